//! Failure of normal hyperbolicity along a line of equilibria.
//!
//! At a manifold point `p` the Jacobian annihilates the tangent space, so in
//! a basis `[T | Q]` with `Q` orthonormal to the tangent `T` it is block upper
//! triangular. The transverse spectrum is therefore exactly the spectrum of
//! `Qᵀ J Q`; the `k` tangential zeros never have to be matched by hand.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{integrate_with_events, EventSpec, Tolerances};
use crate::linalg::{null_vector, orth_complement, sorted_eigenvalues, to_complex, C64};
use crate::systems::{FamilyId, FamilySpec, Params};

/// Transverse eigenvalues below this modulus count as zero when labeling.
pub const ZERO_EIG_TOL: f64 = 1e-5;
/// Bisection stops once the bracket is this narrow.
pub const LOCALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BifurcationKind {
    TransverseZero,
    Hopf,
    TakensBogdanov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Subtype {
    Elliptic,
    Hyperbolic,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub y_star: f64,
    /// Second manifold coordinate for plane scans.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    pub kind: BifurcationKind,
    pub subtype: Subtype,
    /// `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransverseSpectrum {
    pub eigenvalues: Vec<C64>,
    /// A transverse eigenvalue sits at zero alongside the tangential zeros.
    pub ambiguous: bool,
}

fn ensure_flow_manifold(spec: &FamilySpec) -> Result<()> {
    if spec.id() == FamilyId::OscNetwork {
        return Err(Error::UnsupportedFamily { op: "transverse spectrum", family: spec.id().as_str() });
    }
    Ok(())
}

/// `(Qᵀ J Q, Q)` at the manifold point with coordinates `coords`.
pub fn transverse_block(spec: &FamilySpec, coords: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    ensure_flow_manifold(spec)?;
    let p = spec.manifold_point(coords)?;
    let j = spec.jacobian(&p)?;
    let q = match spec.transverse_axes() {
        Some(axes) => {
            let mut q = DMatrix::zeros(spec.state_dim(), axes.len());
            for (c, &i) in axes.iter().enumerate() {
                q[(i, c)] = 1.0;
            }
            q
        }
        None => orth_complement(&spec.manifold_tangent(coords)?),
    };
    let m = q.transpose() * j * &q;
    Ok((m, q))
}

pub fn transverse_spectrum(spec: &FamilySpec, y: f64) -> Result<TransverseSpectrum> {
    let (m, _) = transverse_block(spec, &[y])?;
    let eigenvalues = sorted_eigenvalues(&m);
    let ambiguous = eigenvalues.iter().any(|e| e.norm() <= 1e-8);
    Ok(TransverseSpectrum { eigenvalues, ambiguous })
}

/// Signed indicators at one sample: `det` (sign change = real eigenvalue
/// through zero) and the real part of the complex pair closest to the
/// imaginary axis, if any.
fn indicators(spec: &FamilySpec, y: f64) -> Result<(f64, Option<f64>)> {
    let (m, _) = transverse_block(spec, &[y])?;
    let det = m.determinant();
    let ev = sorted_eigenvalues(&m);
    let pair = ev
        .iter()
        .filter(|e| e.im > 0.0)
        .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
        .map(|e| e.re);
    Ok((det, pair))
}

/// Chebyshev points of the second kind on `[lo, hi]`, ascending.
pub fn chebyshev_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let mut pts: Vec<f64> = (0..n).map(|i| mid - half * (PI * i as f64 / (n - 1) as f64).cos()).collect();
    pts[0] = lo;
    pts[n - 1] = hi;
    pts
}

fn bisect(mut a: f64, mut fa: f64, mut b: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    while (b - a).abs() > LOCALIZATION_TOL * a.abs().max(b.abs()).max(1.0) {
        let c = 0.5 * (a + b);
        if c == a || c == b {
            break;
        }
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if (fc < 0.0) == (fa < 0.0) {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
    }
    Ok(0.5 * (a + b))
}

fn to_pairs(ev: &[C64]) -> Vec<[f64; 2]> {
    ev.iter().map(|e| [e.re, e.im]).collect()
}

fn zero_count(ev: &[C64]) -> usize {
    ev.iter().filter(|e| e.norm() <= ZERO_EIG_TOL).count()
}

/// Scans `y_range` for sign changes of the two indicators and labels each
/// refined root.
pub fn scan_manifold(spec: &FamilySpec, y_range: (f64, f64), n_samples: usize) -> Result<Vec<BifurcationPoint>> {
    if n_samples < 2 {
        return Err(Error::InvalidInput("n_samples must be at least 2".into()));
    }
    if spec.manifold_dim() != 1 {
        return Err(Error::UnsupportedFamily { op: "line scan", family: spec.id().as_str() });
    }
    let (lo, hi) = (y_range.0.min(y_range.1), y_range.0.max(y_range.1));
    let ys = chebyshev_points(lo, hi, n_samples);
    let ind: Vec<(f64, Option<f64>)> = ys.par_iter().map(|&y| indicators(spec, y)).collect::<Result<_>>()?;

    let mut zero_roots = Vec::new();
    let mut hopf_roots = Vec::new();
    for i in 0..n_samples {
        if ind[i].0 == 0.0 {
            zero_roots.push(ys[i]);
        }
        if ind[i].1 == Some(0.0) {
            hopf_roots.push(ys[i]);
        }
        if i + 1 == n_samples {
            break;
        }
        let (d0, d1) = (ind[i].0, ind[i + 1].0);
        if d0 != 0.0 && d1 != 0.0 && (d0 < 0.0) != (d1 < 0.0) {
            zero_roots.push(bisect(ys[i], d0, ys[i + 1], |y| Ok(indicators(spec, y)?.0))?);
        }
        if let (Some(r0), Some(r1)) = (ind[i].1, ind[i + 1].1) {
            if r0 != 0.0 && r1 != 0.0 && (r0 < 0.0) != (r1 < 0.0) {
                let root = bisect(ys[i], r0, ys[i + 1], |y| {
                    // a pair that turns real inside the bracket is treated as
                    // sitting on the far side of the axis
                    Ok(indicators(spec, y)?.1.unwrap_or(r1))
                })?;
                hopf_roots.push(root);
            }
        }
    }

    let principal = spec.principal_part();
    let hopf_sub = hopf_type(spec.id(), spec.params()).unwrap_or(Subtype::Undetermined);
    let mut out = Vec::new();
    for y in zero_roots {
        let ev = transverse_spectrum(spec, y)?.eigenvalues;
        let p_ev = transverse_spectrum(&principal, y)?.eigenvalues;
        let (kind, subtype) = if zero_count(&p_ev) >= 2 || zero_count(&ev) >= 2 {
            (BifurcationKind::TakensBogdanov, if spec.id() == FamilyId::RevTb25 { hopf_sub } else { Subtype::Undetermined })
        } else {
            (BifurcationKind::TransverseZero, Subtype::Undetermined)
        };
        out.push(BifurcationPoint { y_star: y, lambda: None, kind, subtype, eigenvalues: to_pairs(&ev) });
    }
    for y in hopf_roots {
        let ev = transverse_spectrum(spec, y)?.eigenvalues;
        out.push(BifurcationPoint { y_star: y, lambda: None, kind: BifurcationKind::Hopf, subtype: hopf_sub, eigenvalues: to_pairs(&ev) });
    }
    out.sort_by(|a, b| a.y_star.total_cmp(&b.y_star));
    Ok(out)
}

/// Joint scan of the `tb-2.4` field over `(y, λ)`, reading `λ` as a second
/// equilibrium coordinate: one line scan in `y` per `λ` sample.
pub fn scan_equilibrium_plane(
    spec: &FamilySpec,
    y_range: (f64, f64),
    lambda_range: (f64, f64),
    n_y: usize,
    n_lambda: usize,
) -> Result<Vec<BifurcationPoint>> {
    if spec.id() != FamilyId::Tb24 {
        return Err(Error::UnsupportedFamily { op: "plane scan", family: spec.id().as_str() });
    }
    if n_lambda < 1 {
        return Err(Error::InvalidInput("n_lambda must be at least 1".into()));
    }
    let lambdas: Vec<f64> = if n_lambda == 1 {
        vec![lambda_range.0]
    } else {
        (0..n_lambda)
            .map(|i| lambda_range.0 + (lambda_range.1 - lambda_range.0) * i as f64 / (n_lambda - 1) as f64)
            .collect()
    };
    let rows: Vec<Vec<BifurcationPoint>> = lambdas
        .par_iter()
        .map(|&lam| {
            let mut p = spec.params().clone();
            p.insert("lambda", lam);
            let s = crate::systems::make_family(FamilyId::Tb24, &p)?;
            let mut pts = scan_manifold(&s, y_range, n_y)?;
            pts.iter_mut().for_each(|b| b.lambda = Some(lam));
            Ok(pts)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Eigenvalue table for plotting: one row per sample.
pub fn spectrum_table(spec: &FamilySpec, y_range: (f64, f64), n: usize) -> Result<Vec<(f64, Vec<C64>)>> {
    let ys = chebyshev_points(y_range.0, y_range.1, n.max(2));
    ys.par_iter().map(|&y| Ok((y, transverse_spectrum(spec, y)?.eigenvalues))).collect()
}

/// Elliptic/hyperbolic label from the parameter criteria of each family.
pub fn hopf_type(family: FamilyId, params: &Params) -> Result<Subtype> {
    let get = |name: &str| {
        params.get(name).ok_or_else(|| Error::MissingParameter { family: family.as_str(), name: name.to_string() })
    };
    Ok(match family {
        FamilyId::Reflect22 | FamilyId::Hopf23 => {
            let s = get("sign")?;
            if s < 0.0 {
                Subtype::Elliptic
            } else if s > 0.0 {
                Subtype::Hyperbolic
            } else {
                Subtype::Undetermined
            }
        }
        FamilyId::Tb24 => {
            let b = get("b")?;
            if b > -1.0 {
                Subtype::Elliptic
            } else if b > -17.0 / 12.0 && b < -1.0 {
                Subtype::Hyperbolic
            } else {
                Subtype::Undetermined
            }
        }
        FamilyId::RevTb25 => {
            let (a, b) = (get("a")?, get("b")?);
            let d = a * (a - b);
            if d > 0.0 {
                Subtype::Elliptic
            } else if d < 0.0 {
                Subtype::Hyperbolic
            } else {
                Subtype::Undetermined
            }
        }
        other => return Err(Error::UnsupportedFamily { op: "hopf_type", family: other.as_str() }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub probe_radius: f64,
    pub t_max: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { probe_radius: 0.05, t_max: 5e4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ProbeFate {
    /// Settled on the manifold at this offset from the probe point.
    Settled(f64),
    Escaped,
    Inconclusive,
}

fn probe_direction(spec: &FamilySpec, y_star: f64) -> Result<Vec<f64>> {
    let (m, q) = transverse_block(spec, &[y_star])?;
    let ev = sorted_eigenvalues(&m);
    let pair = ev.iter().filter(|e| e.im > 0.0).min_by(|a, b| a.re.abs().total_cmp(&b.re.abs())).copied();
    let local: Vec<f64> = match pair {
        Some(mu) => {
            let a = to_complex(&m) - DMatrix::identity(m.nrows(), m.nrows()) * mu;
            let v = null_vector(&a);
            let re: Vec<f64> = v.iter().map(|c| c.re).collect();
            let n = re.iter().map(|x| x * x).sum::<f64>().sqrt();
            re.iter().map(|x| x / n).collect()
        }
        None => {
            let mut e = vec![0.0; m.nrows()];
            e[0] = 1.0;
            e
        }
    };
    let d = &q * nalgebra::DVector::from_vec(local);
    Ok(d.iter().copied().collect())
}

fn run_probe(spec: &FamilySpec, start: &[f64], y_star: f64, rho: f64, t_max: f64) -> Result<ProbeFate> {
    let p_star = spec.manifold_point(&[y_star])?;
    let s1 = Arc::new(spec.clone());
    let s2 = s1.clone();
    let settle = EventSpec::new(move |s| s1.transverse_distance(s) - rho / 10.0, -1, true);
    let ps = p_star.clone();
    let escape = EventSpec::new(
        move |s| s.iter().zip(&ps).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() - 3.0 * rho,
        1,
        true,
    );
    let tol = Tolerances::default();
    let res = integrate_with_events(spec, start, (0.0, t_max), &[settle, escape], &tol);
    let (_, hits) = match res {
        Ok(x) => x,
        Err(Error::Integration(f)) if f.kind == crate::error::FailureKind::BlowUp => return Ok(ProbeFate::Escaped),
        Err(e) => return Err(e),
    };
    Ok(match hits.first() {
        Some(h) if h.event == 0 => ProbeFate::Settled(s2.manifold_coords(&h.state)[0] - y_star),
        Some(_) => ProbeFate::Escaped,
        None => ProbeFate::Inconclusive,
    })
}

/// Empirical classification: probes at transverse distance `ρ` from the
/// point are followed forward and backward in time. Settling on opposite
/// sides in the two directions means elliptic; escaping the ball of radius
/// `3ρ` in either direction means hyperbolic.
pub fn dynamic_type_check(spec: &FamilySpec, y_star: f64, opts: &ProbeOptions) -> Result<Subtype> {
    let rho = opts.probe_radius;
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter { name: "probe_radius".into(), reason: "must be positive".into() });
    }
    let dir = probe_direction(spec, y_star)?;
    let base = spec.manifold_point(&[y_star])?;
    let start: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + rho * d).collect();
    let fwd = run_probe(spec, &start, y_star, rho, opts.t_max)?;
    let bwd = run_probe(spec, &start, y_star, rho, -opts.t_max)?;
    Ok(match (fwd, bwd) {
        (ProbeFate::Escaped, _) | (_, ProbeFate::Escaped) => Subtype::Hyperbolic,
        (ProbeFate::Settled(a), ProbeFate::Settled(b)) if a * b < 0.0 => Subtype::Elliptic,
        _ => Subtype::Undetermined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::make_family;

    fn fam(id: FamilyId, kv: &[(&str, f64)]) -> FamilySpec {
        make_family(id, &Params::from_pairs(kv)).unwrap()
    }

    #[test]
    fn line_zero_spectrum() {
        let s = fam(FamilyId::LineZero21, &[]);
        let sp = transverse_spectrum(&s, 2.0).unwrap();
        assert_eq!(sp.eigenvalues.len(), 1);
        assert!((sp.eigenvalues[0] - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(!sp.ambiguous);
        assert!(transverse_spectrum(&s, 0.0).unwrap().ambiguous);
    }

    #[test]
    fn tb24_hopf_pair() {
        let s = fam(FamilyId::Tb24, &[("eps", 0.1), ("lambda", 1.0), ("b", 0.0)]);
        let ev = transverse_spectrum(&s, 1.0).unwrap().eigenvalues;
        assert!((ev[0] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - C64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn rev_tb_spectrum_at_origin_and_cusp() {
        let s = fam(FamilyId::RevTb25, &[("a", 0.1), ("b", 0.0)]);
        let ev = transverse_spectrum(&s, 0.0).unwrap().eigenvalues;
        assert!((ev[0].im + 1.0).abs() < 1e-14 && ev[0].re.abs() < 1e-14);
        let y = 1.0 / 3f64.sqrt();
        let s = fam(FamilyId::RevTb25, &[("a", 0.3), ("b", 0.0)]);
        let ev = transverse_spectrum(&s, y).unwrap().eigenvalues;
        assert!(ev[0].norm() < 1e-12 && (ev[1].re - 0.3 * y).abs() < 1e-12);
    }

    #[test]
    fn scans_find_expected_points() {
        let s = fam(FamilyId::LineZero21, &[]);
        let pts = scan_manifold(&s, (-1.0, 1.0), 1024).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].kind, BifurcationKind::TransverseZero);
        assert!(pts[0].y_star.abs() < 1e-10);

        let s = fam(FamilyId::Tb24, &[("eps", 0.1), ("lambda", 1.0), ("b", -1.2)]);
        let pts = scan_manifold(&s, (-1.0, 3.0), 1024).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].kind, BifurcationKind::TransverseZero);
        assert!(pts[0].y_star.abs() < 1e-10);
        assert_eq!(pts[1].kind, BifurcationKind::Hopf);
        assert!((pts[1].y_star - 1.0).abs() < 1e-10);
        assert_eq!(pts[1].subtype, Subtype::Hyperbolic);

        let s = fam(FamilyId::RevTb25, &[("a", 0.2), ("b", 0.0)]);
        let pts = scan_manifold(&s, (-1.0, 1.0), 1024).unwrap();
        let kinds: Vec<_> = pts.iter().map(|p| p.kind).collect();
        assert_eq!(kinds, vec![BifurcationKind::TakensBogdanov, BifurcationKind::Hopf, BifurcationKind::TakensBogdanov]);
        let c = 1.0 / 3f64.sqrt();
        assert!((pts[0].y_star + c).abs() < 1e-10 && pts[1].y_star.abs() < 1e-10 && (pts[2].y_star - c).abs() < 1e-10);
        assert_eq!(pts[1].subtype, Subtype::Elliptic);
    }

    #[test]
    fn hopf23_scan_finds_elliptic_point() {
        let s = fam(FamilyId::Hopf23, &[("omega", 1.0), ("sign", -1.0)]);
        let pts = scan_manifold(&s, (-1.0, 2.0), 64).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].kind, pts[0].subtype), (BifurcationKind::Hopf, Subtype::Elliptic));
        assert!(pts[0].y_star.abs() < 1e-10);
    }

    #[test]
    fn plane_scan_traces_hopf_diagonal() {
        let s = fam(FamilyId::Tb24, &[("eps", 0.1), ("lambda", 1.0), ("b", 0.0)]);
        let pts = scan_equilibrium_plane(&s, (-0.5, 3.0), (0.25, 2.0), 256, 8).unwrap();
        let hopf: Vec<_> = pts.iter().filter(|p| p.kind == BifurcationKind::Hopf).collect();
        assert_eq!(hopf.len(), 8);
        for p in hopf {
            assert!((p.y_star - p.lambda.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn parameter_criteria() {
        let p = |kv: &[(&str, f64)]| Params::from_pairs(kv);
        assert_eq!(hopf_type(FamilyId::RevTb25, &p(&[("a", 0.1), ("b", 0.0)])).unwrap(), Subtype::Elliptic);
        assert_eq!(hopf_type(FamilyId::RevTb25, &p(&[("a", 0.1), ("b", 0.3)])).unwrap(), Subtype::Hyperbolic);
        assert_eq!(hopf_type(FamilyId::RevTb25, &p(&[("a", 0.0), ("b", 0.3)])).unwrap(), Subtype::Undetermined);
        assert_eq!(hopf_type(FamilyId::Tb24, &p(&[("b", -1.2)])).unwrap(), Subtype::Hyperbolic);
        assert_eq!(hopf_type(FamilyId::Tb24, &p(&[("b", -0.5)])).unwrap(), Subtype::Elliptic);
        assert_eq!(hopf_type(FamilyId::Tb24, &p(&[("b", -1.5)])).unwrap(), Subtype::Undetermined);
        assert_eq!(hopf_type(FamilyId::Hopf23, &p(&[("sign", -1.0)])).unwrap(), Subtype::Elliptic);
        assert!(hopf_type(FamilyId::LineZero21, &p(&[])).is_err());
    }

    #[test]
    fn dynamic_check_on_truncated_hopf() {
        let opts = ProbeOptions::default();
        let s = fam(FamilyId::Hopf23, &[("omega", 1.0), ("sign", -1.0)]);
        assert_eq!(dynamic_type_check(&s, 0.0, &opts).unwrap(), Subtype::Elliptic);
        let s = fam(FamilyId::Hopf23, &[("omega", 1.0), ("sign", 1.0)]);
        assert_eq!(dynamic_type_check(&s, 0.0, &opts).unwrap(), Subtype::Hyperbolic);
    }

    #[test]
    fn dynamic_check_on_tb24_regimes() {
        let opts = ProbeOptions::default();
        for (b, want) in [(-1.2, Subtype::Hyperbolic), (-0.5, Subtype::Elliptic)] {
            let s = fam(FamilyId::Tb24, &[("eps", 0.05), ("lambda", 1.0), ("b", b)]);
            assert_eq!(dynamic_type_check(&s, 1.0, &opts).unwrap(), want, "b = {b}");
        }
    }

    #[test]
    fn dynamic_check_on_reflect() {
        let opts = ProbeOptions::default();
        for (sign, want) in [(-1.0, Subtype::Elliptic), (1.0, Subtype::Hyperbolic)] {
            let s = fam(FamilyId::Reflect22, &[("sign", sign)]);
            assert_eq!(dynamic_type_check(&s, 0.0, &opts).unwrap(), want);
        }
    }
}
