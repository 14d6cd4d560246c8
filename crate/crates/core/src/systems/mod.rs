//! Preset vector fields with manifolds of equilibria.
//!
//! Every preset satisfies `f(0, y) = g(0, y) = 0` along its declared
//! equilibrium manifold. Third-order scalar equations are rewritten as first
//! order systems in the shared state ordering `(y, y', y'')`.
//!
//! | id                | equation                                         | state            |
//! |-------------------|--------------------------------------------------|------------------|
//! | `line-zero-2.1`   | x' = xy, y' = x                                  | (x, y)           |
//! | `reflect-2.2`     | x' = xy, y' = ±x²                                | (x, y)           |
//! | `hopf-2.3`        | x' = yx + ωJx, y' = ±\|x\|² (+ γx₁³)             | (x₁, x₂, y)      |
//! | `tb-2.4`          | y''' + yy' = ε((λ − y)y'' + b y'²)               | (y, y', y'')     |
//! | `rev-tb-2.5`      | y''' + (1 − 3y²)y' = a y y'' + b y'²             | (y, y', y'')     |
//! | `osc-network`     | u̇ⱼ = fⱼ(uⱼ, Σ_{k≠±j} uₖ) on an octahedral graph  | stacked uⱼ       |
//! | `viscous-profile` | ü = (F'(u) − s)u̇ + G(u)                          | (u, u̇)           |
//!
//! The `tb-2.4` field also describes a plane of equilibria when `λ` is read as
//! a second equilibrium coordinate `(y₁, y₂) = (y, λ)`; the flow is the same,
//! so there is no separate field for it. See
//! [`crate::classify::scan_equilibrium_plane`] for the joint scan.

mod params;
pub mod viscous;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oscillators::Network;

pub use params::Params;
pub use viscous::ViscousProfileSpec;

/// Below this radius the Hopf family is reported in Cartesian form only.
pub const POLAR_MIN_RADIUS: f64 = 1e-10;

/// Anything that can be integrated: an autonomous vector field on `R^n`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval_into(&self, state: &[f64], out: &mut [f64]);

    fn eval(&self, state: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(state, &mut out);
        out
    }
}

/// Adapter turning a closure into a [`VectorField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, state: &[f64], out: &mut [f64]) {
        (self.f)(state, out)
    }
}

/// The time-reversed field `-f`.
pub struct Reversed<'a>(pub &'a dyn VectorField);

impl VectorField for Reversed<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval_into(&self, state: &[f64], out: &mut [f64]) {
        self.0.eval_into(state, out);
        for v in out.iter_mut() {
            *v = -*v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FamilyId {
    #[serde(rename = "line-zero-2.1")]
    LineZero21,
    #[serde(rename = "reflect-2.2")]
    Reflect22,
    #[serde(rename = "hopf-2.3")]
    Hopf23,
    #[serde(rename = "tb-2.4")]
    Tb24,
    #[serde(rename = "rev-tb-2.5")]
    RevTb25,
    #[serde(rename = "osc-network")]
    OscNetwork,
    #[serde(rename = "viscous-profile")]
    ViscousProfile,
}

impl FamilyId {
    pub const ALL: [FamilyId; 7] = [
        FamilyId::LineZero21,
        FamilyId::Reflect22,
        FamilyId::Hopf23,
        FamilyId::Tb24,
        FamilyId::RevTb25,
        FamilyId::OscNetwork,
        FamilyId::ViscousProfile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyId::LineZero21 => "line-zero-2.1",
            FamilyId::Reflect22 => "reflect-2.2",
            FamilyId::Hopf23 => "hopf-2.3",
            FamilyId::Tb24 => "tb-2.4",
            FamilyId::RevTb25 => "rev-tb-2.5",
            FamilyId::OscNetwork => "osc-network",
            FamilyId::ViscousProfile => "viscous-profile",
        }
    }

    /// (required, optional-with-default) parameter names.
    fn schema(self) -> (&'static [&'static str], &'static [(&'static str, f64)]) {
        match self {
            FamilyId::LineZero21 => (&[], &[]),
            FamilyId::Reflect22 => (&["sign"], &[]),
            FamilyId::Hopf23 => (&["omega", "sign"], &[("gamma", 0.0)]),
            FamilyId::Tb24 => (&["eps", "lambda", "b"], &[]),
            FamilyId::RevTb25 => (&["a", "b"], &[]),
            FamilyId::OscNetwork => (&["m"], &[("coupling", 0.2), ("node", 0.0), ("mu", 1.0)]),
            FamilyId::ViscousProfile => (&["s"], &[("c", 0.5)]),
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

#[derive(Clone)]
enum Model {
    LineZero,
    Reflect { sign: f64 },
    Hopf { omega: f64, sign: f64, gamma: f64 },
    Tb { eps: f64, lambda: f64, b: f64 },
    RevTb { a: f64, b: f64 },
    Network(Arc<Network>),
    Viscous(Arc<ViscousProfileSpec>),
}

/// A preset vector field together with its equilibrium-manifold chart.
#[derive(Clone)]
pub struct FamilySpec {
    id: FamilyId,
    params: Params,
    state_dim: usize,
    manifold_dim: usize,
    model: Model,
}

impl fmt::Debug for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FamilySpec")
            .field("id", &self.id)
            .field("params", &self.params)
            .field("state_dim", &self.state_dim)
            .field("manifold_dim", &self.manifold_dim)
            .finish()
    }
}

/// Builds a preset family, validating parameter names and ranges.
pub fn make_family(id: FamilyId, params: &Params) -> Result<FamilySpec> {
    let (required, optional) = id.schema();
    let family = id.as_str();
    for name in params.names() {
        if !required.contains(&name) && !optional.iter().any(|(n, _)| *n == name) {
            return Err(Error::UnexpectedParameter { family, name: name.to_string() });
        }
    }
    let mut full = Params::new();
    for &name in required {
        let v = params
            .get(name)
            .ok_or_else(|| Error::MissingParameter { family, name: name.to_string() })?;
        full.insert(name, v);
    }
    for &(name, default) in optional {
        full.insert(name, params.get(name).unwrap_or(default));
    }
    for (name, v) in full.iter() {
        if !v.is_finite() {
            return Err(Error::InvalidParameter { name: name.to_string(), reason: "not finite".into() });
        }
    }
    let p = |n: &str| full.get(n).expect("filled above");
    let sign = |n: &str| -> Result<f64> {
        let v = p(n);
        if v == 1.0 || v == -1.0 {
            Ok(v)
        } else {
            Err(Error::InvalidParameter { name: n.into(), reason: "must be +1 or -1".into() })
        }
    };

    let (model, state_dim, manifold_dim) = match id {
        FamilyId::LineZero21 => (Model::LineZero, 2, 1),
        FamilyId::Reflect22 => (Model::Reflect { sign: sign("sign")? }, 2, 1),
        FamilyId::Hopf23 => {
            let omega = p("omega");
            if omega == 0.0 {
                return Err(Error::InvalidParameter { name: "omega".into(), reason: "must be nonzero".into() });
            }
            (Model::Hopf { omega, sign: sign("sign")?, gamma: p("gamma") }, 3, 1)
        }
        FamilyId::Tb24 => {
            let eps = p("eps");
            if eps < 0.0 {
                return Err(Error::InvalidParameter { name: "eps".into(), reason: "must be >= 0".into() });
            }
            (Model::Tb { eps, lambda: p("lambda"), b: p("b") }, 3, 1)
        }
        FamilyId::RevTb25 => (Model::RevTb { a: p("a"), b: p("b") }, 3, 1),
        FamilyId::OscNetwork => {
            let net = crate::oscillators::network_from_params(&full)?;
            let (n, k) = (net.state_dim(), net.graph().m());
            (Model::Network(Arc::new(net)), n, k)
        }
        FamilyId::ViscousProfile => {
            let vp = viscous::default_profile(p("s"), p("c"));
            let (n, k) = (2 * vp.u_dim, vp.manifold_dim);
            (Model::Viscous(Arc::new(vp)), n, k)
        }
    };
    Ok(FamilySpec { id, params: full, state_dim, manifold_dim, model })
}

impl FamilySpec {
    /// Wraps an assembled oscillator network.
    pub fn from_network(net: Network, params: Params) -> Self {
        let (n, k) = (net.state_dim(), net.graph().m());
        FamilySpec {
            id: FamilyId::OscNetwork,
            params,
            state_dim: n,
            manifold_dim: k,
            model: Model::Network(Arc::new(net)),
        }
    }

    /// Wraps a user-supplied viscous-profile system.
    pub fn from_viscous(vp: ViscousProfileSpec, params: Params) -> Self {
        let (n, k) = (2 * vp.u_dim, vp.manifold_dim);
        FamilySpec {
            id: FamilyId::ViscousProfile,
            params,
            state_dim: n,
            manifold_dim: k,
            model: Model::Viscous(Arc::new(vp)),
        }
    }

    pub fn id(&self) -> FamilyId {
        self.id
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn manifold_dim(&self) -> usize {
        self.manifold_dim
    }

    pub fn network(&self) -> Option<&Network> {
        match &self.model {
            Model::Network(n) => Some(n),
            _ => None,
        }
    }

    pub fn viscous(&self) -> Option<&ViscousProfileSpec> {
        match &self.model {
            Model::Viscous(v) => Some(v),
            _ => None,
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.state_dim {
            return Err(Error::DimensionMismatch { expected: self.state_dim, got: len });
        }
        Ok(())
    }

    /// Right-hand side at `state`.
    pub fn eval_field(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(state.len())?;
        Ok(VectorField::eval(self, state))
    }

    /// Jacobian matrix: closed form for the normal-form presets and the
    /// default viscous profile, central differences otherwise.
    pub fn jacobian(&self, state: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(state.len())?;
        let j = match &self.model {
            Model::LineZero => {
                let (x, y) = (state[0], state[1]);
                DMatrix::from_row_slice(2, 2, &[y, x, 1.0, 0.0])
            }
            Model::Reflect { sign } => {
                let (x, y) = (state[0], state[1]);
                DMatrix::from_row_slice(2, 2, &[y, x, 2.0 * sign * x, 0.0])
            }
            Model::Hopf { omega, sign, gamma } => {
                let (x1, x2, y) = (state[0], state[1], state[2]);
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        y, -omega, x1,
                        *omega, y, x2,
                        2.0 * sign * x1 + 3.0 * gamma * x1 * x1, 2.0 * sign * x2, 0.0,
                    ],
                )
            }
            Model::Tb { eps, lambda, b } => {
                let (y, v, w) = (state[0], state[1], state[2]);
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        0.0, 1.0, 0.0,
                        0.0, 0.0, 1.0,
                        -v - eps * w, -y + 2.0 * eps * b * v, eps * (lambda - y),
                    ],
                )
            }
            Model::RevTb { a, b } => {
                let (y, v, w) = (state[0], state[1], state[2]);
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        0.0, 1.0, 0.0,
                        0.0, 0.0, 1.0,
                        6.0 * y * v + a * w, -(1.0 - 3.0 * y * y) + 2.0 * b * v, a * y,
                    ],
                )
            }
            Model::Network(_) => finite_difference_jacobian(self, state),
            Model::Viscous(vp) => match vp.analytic_jacobian(state) {
                Some(j) => j,
                None => finite_difference_jacobian(self, state),
            },
        };
        Ok(j)
    }

    /// Central-difference Jacobian, regardless of any closed form.
    pub fn jacobian_fd(&self, state: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(state.len())?;
        Ok(finite_difference_jacobian(self, state))
    }

    /// Indices of the coordinates along the equilibrium manifold, for the
    /// families whose manifold is a coordinate axis.
    fn tangent_axis(&self) -> Option<usize> {
        match self.model {
            Model::LineZero | Model::Reflect { .. } => Some(1),
            Model::Hopf { .. } => Some(2),
            Model::Tb { .. } | Model::RevTb { .. } => Some(0),
            _ => None,
        }
    }

    /// Indices of the coordinates transverse to a coordinate-axis manifold.
    pub fn transverse_axes(&self) -> Option<Vec<usize>> {
        let t = self.tangent_axis()?;
        Some((0..self.state_dim).filter(|&i| i != t).collect())
    }

    /// State of the manifold point with manifold coordinates `coords`
    /// (`y` for lines, phases for the oscillator network).
    pub fn manifold_point(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if coords.len() != self.manifold_dim {
            return Err(Error::DimensionMismatch { expected: self.manifold_dim, got: coords.len() });
        }
        if let Some(axis) = self.tangent_axis() {
            let mut s = vec![0.0; self.state_dim];
            s[axis] = coords[0];
            return Ok(s);
        }
        match &self.model {
            Model::Viscous(vp) => {
                let mut s = (vp.chart)(coords);
                s.resize(self.state_dim, 0.0);
                Ok(s)
            }
            Model::Network(net) => net.torus_point(coords),
            _ => unreachable!(),
        }
    }

    /// Manifold coordinates of the nearest-chart projection of `state`.
    pub fn manifold_coords(&self, state: &[f64]) -> Vec<f64> {
        if let Some(axis) = self.tangent_axis() {
            return vec![state[axis]];
        }
        match &self.model {
            Model::Viscous(vp) => (vp.chart_inverse)(&state[..vp.u_dim]),
            Model::Network(net) => net.phases_of(state),
            _ => unreachable!(),
        }
    }

    /// Distance of `state` from the equilibrium manifold, measured in the
    /// transverse coordinates.
    pub fn transverse_distance(&self, state: &[f64]) -> f64 {
        if let Some(axes) = self.transverse_axes() {
            return axes.iter().map(|&i| state[i] * state[i]).sum::<f64>().sqrt();
        }
        match &self.model {
            Model::Viscous(vp) => {
                let (u, p) = state.split_at(vp.u_dim);
                let g = (vp.kinetics)(u);
                (g.iter().chain(p).map(|v| v * v).sum::<f64>()).sqrt()
            }
            Model::Network(net) => net.antipode_residual(state),
            _ => unreachable!(),
        }
    }

    /// Orthonormal basis (columns) of the manifold tangent space at a point.
    pub fn manifold_tangent(&self, coords: &[f64]) -> Result<DMatrix<f64>> {
        if let Some(axis) = self.tangent_axis() {
            let mut t = DMatrix::zeros(self.state_dim, 1);
            t[(axis, 0)] = 1.0;
            return Ok(t);
        }
        let k = self.manifold_dim;
        let mut t = DMatrix::zeros(self.state_dim, k);
        for j in 0..k {
            let h = f64::EPSILON.cbrt() * coords[j].abs().max(1.0);
            let mut cp = coords.to_vec();
            let mut cm = coords.to_vec();
            cp[j] += h;
            cm[j] -= h;
            let sp = self.manifold_point(&cp)?;
            let sm = self.manifold_point(&cm)?;
            for i in 0..self.state_dim {
                t[(i, j)] = (sp[i] - sm[i]) / (2.0 * h);
            }
        }
        Ok(t.qr().q().columns(0, k).into_owned())
    }

    /// The same family with higher-order normal-form coefficients switched
    /// off (`a = b = 0` for `rev-tb-2.5`, `gamma = 0` for `hopf-2.3`).
    /// Used to decide whether a transverse zero is an unfolded double zero.
    pub fn principal_part(&self) -> FamilySpec {
        let mut out = self.clone();
        match &mut out.model {
            Model::RevTb { a, b } => {
                *a = 0.0;
                *b = 0.0;
                out.params.insert("a", 0.0);
                out.params.insert("b", 0.0);
            }
            Model::Hopf { gamma, .. } => {
                *gamma = 0.0;
                out.params.insert("gamma", 0.0);
            }
            _ => {}
        }
        out
    }
}

impl VectorField for FamilySpec {
    fn dim(&self) -> usize {
        self.state_dim
    }

    fn eval_into(&self, s: &[f64], out: &mut [f64]) {
        match &self.model {
            Model::LineZero => {
                out[0] = s[0] * s[1];
                out[1] = s[0];
            }
            Model::Reflect { sign } => {
                out[0] = s[0] * s[1];
                out[1] = sign * s[0] * s[0];
            }
            Model::Hopf { omega, sign, gamma } => {
                let (x1, x2, y) = (s[0], s[1], s[2]);
                out[0] = x1 * y - omega * x2;
                out[1] = omega * x1 + x2 * y;
                out[2] = sign * (x1 * x1 + x2 * x2) + gamma * x1 * x1 * x1;
            }
            Model::Tb { eps, lambda, b } => {
                let (y, v, w) = (s[0], s[1], s[2]);
                out[0] = v;
                out[1] = w;
                out[2] = -y * v + eps * ((lambda - y) * w + b * v * v);
            }
            Model::RevTb { a, b } => {
                let (y, v, w) = (s[0], s[1], s[2]);
                out[0] = v;
                out[1] = w;
                out[2] = -(1.0 - 3.0 * y * y) * v + a * y * w + b * v * v;
            }
            Model::Network(net) => net.eval_into(s, out),
            Model::Viscous(vp) => vp.eval_into(s, out),
        }
    }
}

/// Central differences with step `cbrt(eps) * max(1, |s_i|)`.
pub fn finite_difference_jacobian(field: &dyn VectorField, state: &[f64]) -> DMatrix<f64> {
    let n = field.dim();
    let mut j = DMatrix::zeros(n, n);
    let mut sp = state.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for c in 0..n {
        let h = f64::EPSILON.cbrt() * state[c].abs().max(1.0);
        sp[c] = state[c] + h;
        field.eval_into(&sp, &mut fp);
        sp[c] = state[c] - h;
        field.eval_into(&sp, &mut fm);
        sp[c] = state[c];
        for r in 0..n {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

/// Norm of the field at the manifold point with coordinates `coords`.
///
/// For the oscillator network the manifold lives in the Poincare section
/// rather than in the flow itself; the residual is then the return-map
/// defect of the phase-torus point.
pub fn equilibrium_residual(spec: &FamilySpec, coords: &[f64]) -> Result<f64> {
    if let Model::Network(net) = &spec.model {
        return net.fixed_point_residual(coords, &crate::integrate::Tolerances::default());
    }
    let p = spec.manifold_point(coords)?;
    let f = VectorField::eval(spec, &p);
    Ok(f.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Polar chart `(r, phi, y)` of a `hopf-2.3` state. The angle is reported
/// as 0 when `r <= POLAR_MIN_RADIUS`.
pub fn hopf_to_polar(state: &[f64]) -> [f64; 3] {
    let r = state[0].hypot(state[1]);
    let phi = if r > POLAR_MIN_RADIUS { state[1].atan2(state[0]).rem_euclid(2.0 * PI) } else { 0.0 };
    [r, phi, state[2]]
}

pub fn hopf_from_polar(r: f64, phi: f64, y: f64) -> [f64; 3] {
    [r * phi.cos(), r * phi.sin(), y]
}

/// The S¹-reduced `(r, y)` system of the Hopf truncation:
/// `r' = r y`, `y' = sign * r²`.
pub fn hopf_radial_field(sign: f64) -> FnField<impl Fn(&[f64], &mut [f64]) + Send + Sync> {
    FnField::new(2, move |s: &[f64], out: &mut [f64]| {
        out[0] = s[0] * s[1];
        out[1] = sign * s[0] * s[0];
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(id: FamilyId, kv: &[(&str, f64)]) -> FamilySpec {
        make_family(id, &Params::from_pairs(kv)).unwrap()
    }

    #[test]
    fn tb24_eps_zero_field() {
        let s = fam(FamilyId::Tb24, &[("eps", 0.0), ("lambda", 1.0), ("b", -1.2)]);
        assert_eq!(s.state_dim(), 3);
        assert_eq!(s.eval_field(&[1.0, 1.0, 0.0]).unwrap(), vec![1.0, 0.0, -1.0]);
        let st = [0.3, -0.7, 1.1];
        assert_eq!(s.eval_field(&st).unwrap(), vec![-0.7, 1.1, -0.3 * -0.7]);
    }

    #[test]
    fn line_zero_field() {
        let s = fam(FamilyId::LineZero21, &[]);
        assert_eq!(s.eval_field(&[1.0, 2.0]).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn rev_tb_field() {
        let s = fam(FamilyId::RevTb25, &[("a", 0.1), ("b", 0.2)]);
        let f = s.eval_field(&[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(f[0], 1.0);
        assert_eq!(f[1], 2.0);
        assert!((f[2] - 0.05).abs() < 1e-15);
        let k = fam(FamilyId::RevTb25, &[("a", 0.0), ("b", 0.0)]);
        let (y, v, w): (f64, f64, f64) = (0.4, -0.3, 0.9);
        assert_eq!(k.eval_field(&[y, v, w]).unwrap(), vec![v, w, -(1.0 - 3.0 * y * y) * v]);
    }

    #[test]
    fn parameter_validation() {
        let err = make_family(FamilyId::Tb24, &Params::from_pairs(&[("eps", 0.1), ("lambda", 1.0)]));
        assert!(matches!(err, Err(Error::MissingParameter { .. })));
        let err = make_family(FamilyId::LineZero21, &Params::from_pairs(&[("q", 1.0)]));
        assert!(matches!(err, Err(Error::UnexpectedParameter { .. })));
        let err = make_family(FamilyId::Tb24, &Params::from_pairs(&[("eps", -0.1), ("lambda", 1.0), ("b", 0.0)]));
        assert!(matches!(err, Err(Error::InvalidParameter { .. })));
        let err = make_family(FamilyId::Reflect22, &Params::from_pairs(&[("sign", 0.5)]));
        assert!(matches!(err, Err(Error::InvalidParameter { .. })));
        assert!(matches!("tb-2.6".parse::<FamilyId>(), Err(Error::UnknownFamily(_))));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = fam(FamilyId::LineZero21, &[]);
        assert!(matches!(s.eval_field(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
        assert!(s.jacobian(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn state_dims_match_family() {
        assert_eq!(fam(FamilyId::LineZero21, &[]).state_dim(), 2);
        assert_eq!(fam(FamilyId::Reflect22, &[("sign", 1.0)]).state_dim(), 2);
        assert_eq!(fam(FamilyId::Hopf23, &[("omega", 1.0), ("sign", -1.0)]).state_dim(), 3);
        assert_eq!(fam(FamilyId::OscNetwork, &[("m", 1.0)]).state_dim(), 8);
        assert_eq!(fam(FamilyId::OscNetwork, &[("m", 2.0)]).state_dim(), 12);
        assert_eq!(fam(FamilyId::ViscousProfile, &[("s", 0.3)]).state_dim(), 6);
    }

    #[test]
    fn line_zero_jacobian_on_manifold() {
        let s = fam(FamilyId::LineZero21, &[]);
        let j = s.jacobian(&[0.0, 2.5]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[2.5, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn tb24_characteristic_factor_on_manifold() {
        let (eps, lambda) = (0.3, 1.7);
        let s = fam(FamilyId::Tb24, &[("eps", eps), ("lambda", lambda), ("b", -1.2)]);
        for y in [-1.5, 0.0, 0.4, 2.0] {
            let j = s.jacobian(&[y, 0.0, 0.0]).unwrap();
            // det(mu I - J) = mu (mu^2 - eps (lambda - y) mu + y)
            for mu in [-0.7, 0.3, 1.9] {
                let m = DMatrix::<f64>::identity(3, 3) * mu - &j;
                let expect = mu * (mu * mu - eps * (lambda - y) * mu + y);
                assert!((m.determinant() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn viscous_line_of_equilibria() {
        let s = fam(FamilyId::ViscousProfile, &[("s", 0.4), ("c", 0.7)]);
        for c in [-3.0, 0.0, 0.25, 8.0] {
            assert_eq!(equilibrium_residual(&s, &[c]).unwrap(), 0.0);
        }
    }

    #[test]
    fn polar_chart_round_trip() {
        let p = hopf_to_polar(&[0.0, -0.5, 1.0]);
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 1.5 * PI).abs() < 1e-15);
        let c = hopf_from_polar(p[0], p[1], p[2]);
        assert!(c[0].abs() < 1e-15 && (c[1] + 0.5).abs() < 1e-15);
        assert_eq!(hopf_to_polar(&[1e-12, 0.0, 0.0])[1], 0.0);
    }
}
