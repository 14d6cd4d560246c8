//! Strong unstable/stable manifolds of points on an equilibrium line,
//! shooting for heteroclinic connections, and separatrix splitting.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::transverse_block;
use crate::error::{Error, FailureKind, Result};
use crate::integrate::{integrate_with_events, EventSpec, Tolerances, Trajectory};
use crate::linalg::{null_vector, sorted_eigenvalues, to_complex, C64};
use crate::systems::{make_family, FamilyId, FamilySpec, Reversed, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stability {
    Unstable,
    Stable,
}

/// Leading transverse eigenvalue of the requested stability and its
/// full-space eigenvector.
fn leading_eigen(spec: &FamilySpec, y_eq: f64, dir: Stability) -> Result<(C64, DVector<C64>)> {
    let (m, _) = transverse_block(spec, &[y_eq])?;
    let ev = sorted_eigenvalues(&m);
    let scale = 1.0 + m.abs().max();
    let tol = 1e-10 * scale;
    let pick = match dir {
        Stability::Unstable => ev.iter().filter(|e| e.re > tol && e.im >= 0.0).max_by(|a, b| a.re.total_cmp(&b.re)),
        Stability::Stable => ev.iter().filter(|e| e.re < -tol && e.im >= 0.0).min_by(|a, b| a.re.total_cmp(&b.re)),
    }
    .copied()
    .ok_or(Error::NoEigenvalue { y: y_eq })?;
    let twins = ev.iter().filter(|e| (**e - pick).norm() <= 1e-8 * scale).count();
    if twins > 1 {
        return Err(Error::NonSimpleEigenvalue { y: y_eq });
    }
    let p = spec.manifold_point(&[y_eq])?;
    let j = spec.jacobian(&p)?;
    let n = j.nrows();
    let v = null_vector(&(to_complex(&j) - DMatrix::identity(n, n) * pick));
    Ok((pick, v))
}

/// Points at distance `delta` from the equilibrium along the leading
/// eigendirection of the requested stability: both signs for a real
/// eigenvalue, a ring of `ring` phases for a complex pair.
pub fn manifold_seed(spec: &FamilySpec, y_eq: f64, dir: Stability, delta: f64, ring: usize) -> Result<Vec<Vec<f64>>> {
    if !(1e-8..=1e-4).contains(&delta) {
        return Err(Error::InvalidParameter { name: "delta".into(), reason: format!("{delta} not in [1e-8, 1e-4]") });
    }
    let (mu, v) = leading_eigen(spec, y_eq, dir)?;
    let p = spec.manifold_point(&[y_eq])?;
    let along = |w: Vec<f64>| -> Vec<f64> {
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        p.iter().zip(&w).map(|(a, b)| a + delta * b / n).collect()
    };
    if mu.im == 0.0 {
        let re: Vec<f64> = v.iter().map(|c| c.re).collect();
        let neg: Vec<f64> = re.iter().map(|x| -x).collect();
        Ok(vec![along(re), along(neg)])
    } else {
        let ring = ring.max(1);
        Ok((0..ring)
            .map(|k| {
                let rot = C64::from_polar(1.0, 2.0 * PI * k as f64 / ring as f64);
                along(v.iter().map(|c| (c * rot).re).collect())
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionOptions {
    pub delta: f64,
    pub t_max: f64,
    pub accept_tol: f64,
    /// Stop once `|f| <= eta`.
    pub eta: f64,
    /// Seeds per ring for complex eigenvalues.
    pub ring: usize,
    /// Shoot along the stable manifold in backward time.
    pub backward: bool,
}

impl Default for ConnectionOptions {
    fn default() -> Self {
        ConnectionOptions { delta: 1e-6, t_max: 500.0, accept_tol: 1e-6, eta: 1e-9, ring: 16, backward: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Connection {
    pub source_y: f64,
    pub target_y: f64,
    /// Signed: negative for backward shots.
    pub flight_time: f64,
    pub closest_residual: f64,
    pub homoclinic: bool,
    pub seed_index: usize,
    pub backward: bool,
    #[serde(skip)]
    pub orbit: Option<Trajectory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "snake_case")]
pub enum ShotFate {
    Landed { target_y: f64, residual: f64, time: f64 },
    /// Blew up or left through the integrator's bound.
    Escaped { time: f64 },
    /// Still away from the line at `t_max`.
    Undecided { residual: f64 },
}

/// Closest approach to the line after the orbit has left the seed's
/// neighbourhood: `(time, residual)`, refined on the dense output.
fn closest_approach(spec: &FamilySpec, traj: &Trajectory, leave: f64) -> Option<(f64, f64)> {
    let d: Vec<f64> = traj.states.iter().map(|s| spec.transverse_distance(s)).collect();
    let start = d.iter().position(|&x| x > leave)?;
    let (i, _) = d.iter().enumerate().skip(start).min_by(|a, b| a.1.total_cmp(b.1))?;
    let lo = traj.times[i.saturating_sub(1)];
    let hi = traj.times[(i + 1).min(traj.len() - 1)];
    let f = |t: f64| spec.transverse_distance(&traj.at(t).expect("inside span"));
    // golden section on the bracketing steps
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let (mut c, mut e) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fe) = (f(c), f(e));
    for _ in 0..80 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e);
        }
    }
    let (t, r) = if fc < fe { (c, fc) } else { (e, fe) };
    Some(if r < d[i] { (t, r) } else { (traj.times[i], d[i]) })
}

/// One flight from `seed`, stopped near an equilibrium. If the stop never
/// fires, the closest approach to the line after leaving the seed is used
/// (integrable cases recirculate along near-homoclinic loops).
pub fn shoot(spec: &FamilySpec, seed: &[f64], opts: &ConnectionOptions) -> Result<(ShotFate, Option<Trajectory>)> {
    let field: Arc<dyn VectorField> = Arc::new(spec.clone());
    let stop = EventSpec::near_equilibrium(field, opts.eta);
    let t1 = if opts.backward { -opts.t_max } else { opts.t_max };
    let tol = Tolerances::default();
    match integrate_with_events(spec, seed, (0.0, t1), &[stop], &tol) {
        Ok((traj, hits)) => {
            let (t_end, end) = if hits.is_empty() {
                let leave = 100.0 * spec.transverse_distance(seed);
                match closest_approach(spec, &traj, leave) {
                    Some((t, _)) => (t, traj.at(t).expect("inside span")),
                    None => (traj.t_end(), traj.last_state().to_vec()),
                }
            } else {
                (traj.t_end(), traj.last_state().to_vec())
            };
            let residual = spec.transverse_distance(&end);
            let target_y = spec.manifold_coords(&end)[0];
            let fate = if residual <= opts.accept_tol {
                ShotFate::Landed { target_y, residual, time: t_end }
            } else {
                ShotFate::Undecided { residual }
            };
            Ok((fate, Some(traj)))
        }
        Err(Error::Integration(f)) if matches!(f.kind, FailureKind::BlowUp | FailureKind::NonFinite) => {
            Ok((ShotFate::Escaped { time: f.t }, None))
        }
        Err(e) => Err(e),
    }
}

/// Shoots every seed of the unstable (or, backward, stable) manifold of
/// `source_y` and returns the best landing.
pub fn find_heteroclinic(spec: &FamilySpec, source_y: f64, opts: &ConnectionOptions) -> Result<Connection> {
    let dir = if opts.backward { Stability::Stable } else { Stability::Unstable };
    let seeds = manifold_seed(spec, source_y, dir, opts.delta, opts.ring)?;
    let shots: Vec<(usize, ShotFate, Option<Trajectory>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, s)| shoot(spec, s, opts).map(|(f, t)| (i, f, t)))
        .collect::<Result<_>>()?;
    let mut best: Option<(usize, f64, f64, f64, Option<Trajectory>)> = None;
    let mut best_residual = f64::INFINITY;
    for (i, fate, traj) in shots {
        let r = match fate {
            ShotFate::Landed { residual, .. } | ShotFate::Undecided { residual } => residual,
            ShotFate::Escaped { .. } => f64::INFINITY,
        };
        best_residual = best_residual.min(r);
        if let ShotFate::Landed { target_y, residual, time } = fate {
            if best.as_ref().is_none_or(|b| residual < b.1) {
                best = Some((i, residual, target_y, time, traj));
            }
        }
    }
    let (seed_index, residual, target_y, time, orbit) = best.ok_or(Error::NoConvergence { best_residual })?;
    Ok(Connection {
        source_y,
        target_y,
        flight_time: time,
        closest_residual: residual,
        homoclinic: (target_y - source_y).abs() <= 1e-3 * (1.0 + source_y.abs()),
        seed_index,
        backward: opts.backward,
        orbit,
    })
}

/// Stable seeds integrated backward are unstable seeds of the reversed
/// field integrated forward; exposed for checks.
pub fn reversed_field(spec: &FamilySpec) -> Reversed<'_> {
    Reversed(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Saddle,
    Sink,
    Source,
    Center,
    Degenerate,
}

/// Type of the line point `y` from its transverse spectrum.
pub fn point_kind(spec: &FamilySpec, y: f64) -> Result<PointKind> {
    let (m, _) = transverse_block(spec, &[y])?;
    let ev = sorted_eigenvalues(&m);
    let tol = 1e-10 * (1.0 + m.abs().max());
    let pos = ev.iter().any(|e| e.re > tol);
    let neg = ev.iter().any(|e| e.re < -tol);
    let zero = ev.iter().any(|e| e.re.abs() <= tol);
    Ok(match (pos, neg, zero) {
        (true, true, _) => PointKind::Saddle,
        (true, false, false) => PointKind::Source,
        (false, true, false) => PointKind::Sink,
        (false, false, true) if ev.iter().all(|e| e.norm() > tol) => PointKind::Center,
        _ => PointKind::Degenerate,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwarmEntry {
    pub source_y: f64,
    pub branch: usize,
    pub fate: ShotFate,
    pub target_kind: Option<PointKind>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwarmReport {
    pub entries: Vec<SwarmEntry>,
    /// Neighbouring saddle sources whose branch changes fate; each switch
    /// brackets a saddle-saddle connection.
    pub switches: usize,
    /// Landings on saddles within `accept_tol` (rare on a grid).
    pub direct_hits: usize,
}

fn fate_class(e: &SwarmEntry) -> u8 {
    match (e.fate, e.target_kind) {
        (ShotFate::Escaped { .. }, _) => 0,
        (ShotFate::Landed { .. }, Some(PointKind::Saddle)) => 1,
        (ShotFate::Landed { .. }, _) => 2,
        (ShotFate::Undecided { .. }, _) => 3,
    }
}

/// Descriptive count of saddle-saddle connections along a grid of saddle
/// sources. No claim of exhaustiveness.
pub fn heteroclinic_swarm(spec: &FamilySpec, sources: &[f64], opts: &ConnectionOptions) -> Result<SwarmReport> {
    let rows: Vec<Vec<SwarmEntry>> = sources
        .par_iter()
        .map(|&y| -> Result<Vec<SwarmEntry>> {
            if point_kind(spec, y)? != PointKind::Saddle {
                return Ok(vec![]);
            }
            let seeds = manifold_seed(spec, y, Stability::Unstable, opts.delta, opts.ring)?;
            seeds
                .iter()
                .enumerate()
                .map(|(branch, s)| {
                    let (fate, _) = shoot(spec, s, opts)?;
                    let target_kind = match fate {
                        ShotFate::Landed { target_y, .. } => point_kind(spec, target_y).ok(),
                        _ => None,
                    };
                    Ok(SwarmEntry { source_y: y, branch, fate, target_kind })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut switches = 0;
    let mut prev: Option<&Vec<SwarmEntry>> = None;
    for row in rows.iter().filter(|r| !r.is_empty()) {
        if let Some(p) = prev {
            for (a, b) in p.iter().zip(row) {
                let (ca, cb) = (fate_class(a), fate_class(b));
                if ca != cb && ca != 3 && cb != 3 {
                    switches += 1;
                }
            }
        }
        prev = Some(row);
    }
    let entries: Vec<SwarmEntry> = rows.into_iter().flatten().collect();
    let direct_hits = entries.iter().filter(|e| fate_class(e) == 1).count();
    Ok(SwarmReport { entries, switches, direct_hits })
}

/// Separatrix splitting for the elliptic truncation of `hopf-2.3`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplittingMeasurement {
    pub section: String,
    pub r_scale: f64,
    pub gamma: f64,
    /// Largest `|ρ_u − ρ_s|` over the section angle.
    pub gap: f64,
    /// `ρ_u − ρ_s` at the angle of largest modulus.
    pub signed_gap: f64,
    /// Sign changes of `ρ_u − ρ_s` around the circle.
    pub sign_changes: usize,
    /// `(angle, ρ_u − ρ_s)` on a uniform angle grid.
    pub profile: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingOptions {
    pub gamma: f64,
    pub seeds: usize,
    pub delta: f64,
    pub harmonics: usize,
    pub t_max: f64,
}

impl Default for SplittingOptions {
    fn default() -> Self {
        SplittingOptions { gamma: 0.1, seeds: 64, delta: 1e-8, harmonics: 8, t_max: 2000.0 }
    }
}

fn splitting_tolerances() -> Tolerances {
    Tolerances::new(1e-12, 1e-15)
}

/// Section points `(angle, radius)` of the ring around `(0, 0, y_eq)`
/// carried to `y = 0`.
fn trace(spec: &FamilySpec, y_eq: f64, dir: Stability, opts: &SplittingOptions) -> Result<Vec<(f64, f64)>> {
    let seeds = manifold_seed(spec, y_eq, dir, opts.delta, opts.seeds)?;
    let backward = dir == Stability::Stable;
    let t1 = if backward { -opts.t_max } else { opts.t_max };
    // W^u from y > 0 crosses downward; W^s in backward time crosses upward.
    let ev = EventSpec::coordinate(2, 0.0, if backward { 1 } else { -1 });
    seeds
        .par_iter()
        .map(|s| {
            let (_, hits) = integrate_with_events(spec, s, (0.0, t1), std::slice::from_ref(&ev), &splitting_tolerances())?;
            let h = hits.first().ok_or_else(|| Error::SectionMissed(format!("seed from y = {y_eq} did not reach y = 0")))?;
            Ok((h.state[1].atan2(h.state[0]), h.state[0].hypot(h.state[1])))
        })
        .collect()
}

/// Least-squares trigonometric fit of `ρ(φ)` with `k` harmonics.
fn fourier_fit(points: &[(f64, f64)], k: usize) -> Vec<f64> {
    let n = points.len();
    let cols = 2 * k + 1;
    let a = DMatrix::from_fn(n, cols, |i, j| {
        let phi = points[i].0;
        match j {
            0 => 1.0,
            j if j % 2 == 1 => (((j + 1) / 2) as f64 * phi).cos(),
            j => ((j / 2) as f64 * phi).sin(),
        }
    });
    let b = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-14).expect("svd with both factors").iter().copied().collect()
}

fn fourier_eval(c: &[f64], phi: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(j, cj)| match j {
            0 => *cj,
            j if j % 2 == 1 => cj * (((j + 1) / 2) as f64 * phi).cos(),
            j => cj * ((j / 2) as f64 * phi).sin(),
        })
        .sum()
}

/// Gap between `W^u` of the focus at `y = r` and `W^s` of the focus at
/// `y = −r` on the section `y = 0`, for `hopf-2.3` with `sign = −1` and
/// the symmetry-breaking term `γ·x₁³` added to `ẏ`.
pub fn splitting_distance(omega: f64, r_scale: f64, opts: &SplittingOptions) -> Result<SplittingMeasurement> {
    if !(r_scale > 0.0) {
        return Err(Error::InvalidParameter { name: "r_scale".into(), reason: "must be positive".into() });
    }
    let params = crate::systems::Params::from_pairs(&[("omega", omega), ("sign", -1.0), ("gamma", opts.gamma)]);
    let spec = make_family(FamilyId::Hopf23, &params)?;
    let wu = trace(&spec, r_scale, Stability::Unstable, opts)?;
    let ws = trace(&spec, -r_scale, Stability::Stable, opts)?;
    let cu = fourier_fit(&wu, opts.harmonics);
    let cs = fourier_fit(&ws, opts.harmonics);
    let m = 256;
    let profile: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let phi = -PI + 2.0 * PI * i as f64 / m as f64;
            (phi, fourier_eval(&cu, phi) - fourier_eval(&cs, phi))
        })
        .collect();
    let (_, signed_gap) = profile.iter().copied().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).expect("nonempty");
    let gap = signed_gap.abs();
    let floor = 1e-3 * gap;
    let signs: Vec<bool> = profile.iter().filter(|p| p.1.abs() > floor).map(|p| p.1 > 0.0).collect();
    let mut sign_changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    if signs.len() > 1 && signs[0] != signs[signs.len() - 1] {
        sign_changes += 1;
    }
    Ok(SplittingMeasurement { section: "y = 0".into(), r_scale, gamma: opts.gamma, gap, signed_gap, sign_changes, profile })
}
