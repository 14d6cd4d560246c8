//! Traveling-wave ODE `ü = (F'(u) − s)u̇ + G(u)` of a viscous balance law.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// User-facing description of a viscous-profile system.
///
/// `chart` maps manifold coordinates to a zero of `G`; `chart_inverse`
/// projects a `u` back onto those coordinates.
#[derive(Clone)]
pub struct ViscousProfileSpec {
    pub flux: MapFn,
    /// `F'(u)`; central differences of `flux` when absent.
    pub flux_jacobian: Option<MatFn>,
    pub kinetics: MapFn,
    /// Jacobian of the assembled first-order field in `(u, u̇)`, if known.
    pub field_jacobian: Option<MatFn>,
    pub speed: f64,
    pub u_dim: usize,
    pub manifold_dim: usize,
    pub chart: MapFn,
    pub chart_inverse: MapFn,
}

impl ViscousProfileSpec {
    fn flux_derivative(&self, u: &[f64]) -> DMatrix<f64> {
        if let Some(j) = &self.flux_jacobian {
            return j(u);
        }
        let n = self.u_dim;
        let mut m = DMatrix::zeros(n, n);
        let mut up = u.to_vec();
        for c in 0..n {
            let h = f64::EPSILON.cbrt() * u[c].abs().max(1.0);
            up[c] = u[c] + h;
            let fp = (self.flux)(&up);
            up[c] = u[c] - h;
            let fm = (self.flux)(&up);
            up[c] = u[c];
            for r in 0..n {
                m[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        m
    }

    pub(crate) fn eval_into(&self, s: &[f64], out: &mut [f64]) {
        let n = self.u_dim;
        let (u, p) = s.split_at(n);
        let a = self.flux_derivative(u);
        let g = (self.kinetics)(u);
        let ap = &a * DVector::from_column_slice(p);
        for i in 0..n {
            out[i] = p[i];
            out[n + i] = ap[i] - self.speed * p[i] + g[i];
        }
    }

    pub(crate) fn analytic_jacobian(&self, s: &[f64]) -> Option<DMatrix<f64>> {
        self.field_jacobian.as_ref().map(|j| j(s))
    }
}

/// Three-component preset: `G(u) = (u₁, u₂, 0)` leaves the `u₃` axis as a
/// line of equilibria; the flux is the gradient of
/// `Φ(u) = ½(u₁² + 2u₂² + 3u₃²) + c·u₁u₂u₃`.
pub fn default_profile(speed: f64, c: f64) -> ViscousProfileSpec {
    const A: [f64; 3] = [1.0, 2.0, 3.0];
    let hessian = move |u: &[f64]| {
        DMatrix::from_row_slice(
            3,
            3,
            &[
                A[0], c * u[2], c * u[1],
                c * u[2], A[1], c * u[0],
                c * u[1], c * u[0], A[2],
            ],
        )
    };
    let field_jacobian = move |s: &[f64]| {
        let (u, p) = s.split_at(3);
        let mut j = DMatrix::zeros(6, 6);
        for i in 0..3 {
            j[(i, 3 + i)] = 1.0;
        }
        // d/du_k of (F''(u) p)_i is c * p_j with {i, j, k} = {0, 1, 2}.
        for i in 0..3 {
            for k in 0..3 {
                if i != k {
                    j[(3 + i, k)] = c * p[3 - i - k];
                }
            }
        }
        j[(3, 0)] += 1.0;
        j[(4, 1)] += 1.0;
        let h = hessian(u);
        for i in 0..3 {
            for k in 0..3 {
                j[(3 + i, 3 + k)] = h[(i, k)] - if i == k { speed } else { 0.0 };
            }
        }
        j
    };
    ViscousProfileSpec {
        flux: Arc::new(move |u| {
            vec![A[0] * u[0] + c * u[1] * u[2], A[1] * u[1] + c * u[0] * u[2], A[2] * u[2] + c * u[0] * u[1]]
        }),
        flux_jacobian: Some(Arc::new(hessian)),
        kinetics: Arc::new(|u| vec![u[0], u[1], 0.0]),
        field_jacobian: Some(Arc::new(field_jacobian)),
        speed,
        u_dim: 3,
        manifold_dim: 1,
        chart: Arc::new(|c| vec![0.0, 0.0, c[0]]),
        chart_inverse: Arc::new(|u| vec![u[2]]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{make_family, FamilyId, Params};

    #[test]
    fn analytic_jacobian_matches_differences() {
        let spec = make_family(FamilyId::ViscousProfile, &Params::from_pairs(&[("s", 0.3), ("c", 0.8)])).unwrap();
        let s = [0.2, -0.4, 1.1, 0.5, -0.3, 0.7];
        let a = spec.jacobian(&s).unwrap();
        let f = spec.jacobian_fd(&s).unwrap();
        assert!((a - f).abs().max() < 1e-8);
    }

    #[test]
    fn flux_fallback_uses_differences() {
        let mut vp = default_profile(0.3, 0.8);
        vp.flux_jacobian = None;
        let exact = default_profile(0.3, 0.8);
        let s = [0.2, -0.4, 1.1, 0.5, -0.3, 0.7];
        let (mut o1, mut o2) = ([0.0; 6], [0.0; 6]);
        vp.eval_into(&s, &mut o1);
        exact.eval_into(&s, &mut o2);
        for i in 0..6 {
            assert!((o1[i] - o2[i]).abs() < 1e-9);
        }
    }
}
