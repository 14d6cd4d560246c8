//! Phase-portrait data: orbit bundles from a seed grid, the equilibrium
//! line, detected bifurcation points, manifold traces and, on the integral
//! plane, the averaged drift field. Rendering is left to gnuplot through an
//! emitted script.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{averaged_drift, DriftSample};
use crate::classify::{scan_manifold, BifurcationPoint};
use crate::connections::{manifold_seed, Stability};
use crate::error::{Error, Result};
use crate::integrals::{integrals, planar_reduce, scale_pair, IntegralPair, IntegrableFamily, H_TILDE_BOUND};
use crate::integrate::export::fmt_num;
use crate::integrate::{integrate, Tolerances, Trajectory};
use crate::systems::{make_family, FamilyId, FamilySpec, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum View {
    StatePlane,
    State3d,
    IntegralPlane,
}

impl std::str::FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "state_plane" | "plane" => Ok(View::StatePlane),
            "state_3d" | "3d" => Ok(View::State3d),
            "integral_plane" | "integral" => Ok(View::IntegralPlane),
            _ => Err(Error::InvalidInput(format!("unknown view `{s}`"))),
        }
    }
}

/// Rectangular grid. For state views one axis per state coordinate; for
/// the integral plane the axes are `Θ` and the fraction of the periodic
/// window between center (0) and separatrix (1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl SeedGrid {
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![]];
        for ((lo, hi), &n) in self.lo.iter().zip(&self.hi).zip(&self.counts) {
            let axis: Vec<f64> = if n <= 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            };
            out = out.into_iter().flat_map(|p| axis.iter().map(move |&a| [p.clone(), vec![a]].concat())).collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitSpec {
    pub family: FamilyId,
    pub params: Params,
    pub view: View,
    pub grid: SeedGrid,
    /// `(t_backward, t_forward)` with `t_backward <= 0 <= t_forward`.
    pub t_window: (f64, f64),
    /// Sampling step of emitted orbits.
    pub dt: f64,
    /// Range of the equilibrium line to draw and scan.
    pub line_range: (f64, f64),
    /// Number of line points carrying manifold traces.
    pub manifold_points: usize,
}

impl PortraitSpec {
    /// Defaults for a family: a grid over the natural plane of the family.
    pub fn preset(family: FamilyId, params: Params, view: View) -> Self {
        let (grid, line_range, t_window) = match (family, view) {
            (_, View::IntegralPlane) => (SeedGrid { lo: vec![0.1, 0.1], hi: vec![2.0, 0.9], counts: vec![5, 4] }, (-2.0, 2.0), (0.0, 50.0)),
            (FamilyId::LineZero21, _) | (FamilyId::Reflect22, _) => {
                (SeedGrid { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0], counts: vec![5, 4] }, (-2.0, 2.0), (-3.0, 3.0))
            }
            _ => (SeedGrid { lo: vec![-0.5, -0.5, -0.5], hi: vec![0.5, 0.5, 0.5], counts: vec![3, 3, 2] }, (-1.0, 1.0), (-10.0, 10.0)),
        };
        PortraitSpec { family, params, view, grid, t_window, dt: 0.05, line_range, manifold_points: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitStatus {
    pub index: usize,
    pub seed: Vec<f64>,
    /// `ok`, or the failure kind for a truncated orbit.
    pub status: String,
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone)]
pub struct PortraitOrbit {
    pub status: OrbitStatus,
    pub times: Vec<f64>,
    /// Emitted columns: the state, or `(Θ, H, τ, H̃)` on the integral plane.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldTrace {
    pub source_y: f64,
    pub stability: Stability,
    pub branch: usize,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct PortraitBundle {
    pub spec: PortraitSpec,
    pub columns: Vec<String>,
    pub orbits: Vec<PortraitOrbit>,
    /// `(y, emitted columns)` along the equilibrium line.
    pub equilibria: Vec<(f64, Vec<f64>)>,
    pub bifurcations: Vec<BifurcationPoint>,
    pub traces: Vec<ManifoldTrace>,
    pub drift: Vec<DriftSample>,
}

#[derive(Debug, Clone, Serialize)]
struct Annotations<'a> {
    family: &'a str,
    params: &'a Params,
    view: View,
    columns: &'a [String],
    orbits: Vec<&'a OrbitStatus>,
    bifurcations: &'a [BifurcationPoint],
    manifold_traces: &'a [ManifoldTrace],
    #[serde(skip_serializing_if = "Option::is_none")]
    h_tilde_bounds: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    drift_samples: Option<usize>,
}

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Integrates forward and backward from `seed`; failures truncate the orbit
/// and are recorded in its status.
fn run_orbit(spec: &FamilySpec, seed: &[f64], window: (f64, f64), dt: f64) -> (String, Vec<f64>, Vec<Vec<f64>>) {
    let mut status = "ok".to_string();
    let mut leg = |t1: f64| -> Option<Trajectory> {
        if t1 == 0.0 {
            return None;
        }
        match integrate(spec, seed, (0.0, t1), &tol()) {
            Ok(t) => Some(t),
            Err(Error::Integration(f)) => {
                status = format!("{:?}", f.kind);
                Some(f.partial)
            }
            Err(e) => {
                status = e.to_string();
                None
            }
        }
    };
    let back = leg(window.0);
    let fwd = leg(window.1);
    let mut times = Vec::new();
    let mut states = Vec::new();
    if let Some(b) = &back {
        let (mut ts, mut ys) = b.resample(dt);
        ts.reverse();
        ys.reverse();
        ts.pop();
        ys.pop();
        times.extend(ts);
        states.extend(ys);
    }
    match &fwd {
        Some(f) => {
            let (ts, ys) = f.resample(dt);
            times.extend(ts);
            states.extend(ys);
        }
        None => {
            times.push(0.0);
            states.push(seed.to_vec());
        }
    }
    (status, times, states)
}

fn integral_row(family: FamilyId, s: &[f64]) -> Vec<f64> {
    match integrals(family, s) {
        Ok(p) => {
            let sc = scale_pair(p).ok();
            vec![p.theta, p.hamiltonian, sc.map_or(f64::NAN, |c| c.tau), sc.map_or(f64::NAN, |c| c.h_tilde)]
        }
        Err(_) => vec![f64::NAN; 4],
    }
}

/// Builds every layer of the portrait. Numerical failures of single orbits
/// or layers are recorded, not propagated.
pub fn portrait(ps: &PortraitSpec) -> Result<PortraitBundle> {
    let spec = make_family(ps.family, &ps.params)?;
    if spec.manifold_dim() != 1 {
        return Err(Error::UnsupportedFamily { op: "portrait", family: ps.family.as_str() });
    }
    if !(ps.dt > 0.0) || ps.t_window.0 > 0.0 || ps.t_window.1 < 0.0 {
        return Err(Error::InvalidInput("portrait needs dt > 0 and t_backward <= 0 <= t_forward".into()));
    }
    let integral = ps.view == View::IntegralPlane;
    let fam = if integral { Some(IntegrableFamily::try_from(ps.family)?) } else { None };
    let dim = spec.state_dim();
    match ps.view {
        View::StatePlane if dim != 2 && dim != 3 => return Err(Error::UnsupportedFamily { op: "state-plane portrait", family: ps.family.as_str() }),
        View::State3d if dim != 3 => return Err(Error::UnsupportedFamily { op: "3D portrait", family: ps.family.as_str() }),
        _ => {}
    }
    let want = if integral { 2 } else { dim };
    if ps.grid.lo.len() != want || ps.grid.hi.len() != want || ps.grid.counts.len() != want {
        return Err(Error::DimensionMismatch { expected: want, got: ps.grid.lo.len() });
    }

    let columns: Vec<String> = if integral {
        ["theta", "h", "tau", "h_tilde"].iter().map(|s| s.to_string()).collect()
    } else {
        (0..dim).map(|i| format!("c{i}")).collect()
    };

    // seeds: state grid, or (Θ, window fraction) embedded at the right
    // turning point of the level
    let grid = ps.grid.points();
    let seeds: Vec<Option<Vec<f64>>> = grid
        .iter()
        .map(|g| match fam {
            None => Some(g.clone()),
            Some(f) => {
                let planar = planar_reduce(f.into(), g[0]).ok()?;
                let w = planar.periodic_window()?;
                let h = w.h_center + g[1].clamp(0.0, 1.0) * (w.h_separatrix - w.h_center);
                let orbit = crate::averaging::periodic_orbit(&planar, h).ok()?;
                Some(planar.embed(orbit.y_max, 0.0).to_vec())
            }
        })
        .collect();

    let orbits: Vec<PortraitOrbit> = seeds
        .par_iter()
        .enumerate()
        .map(|(index, seed)| {
            let Some(seed) = seed else {
                return PortraitOrbit {
                    status: OrbitStatus { index, seed: grid[index].clone(), status: "outside periodic window".into(), t_min: 0.0, t_max: 0.0 },
                    times: vec![],
                    rows: vec![],
                };
            };
            let (status, times, states) = run_orbit(&spec, seed, ps.t_window, ps.dt);
            let rows = if integral { states.iter().map(|s| integral_row(ps.family, s)).collect() } else { states };
            PortraitOrbit {
                status: OrbitStatus {
                    index,
                    seed: grid[index].clone(),
                    status,
                    t_min: times.first().copied().unwrap_or(0.0),
                    t_max: times.last().copied().unwrap_or(0.0),
                },
                times,
                rows,
            }
        })
        .collect();

    let (lo, hi) = ps.line_range;
    let n_line = 201;
    let equilibria: Vec<(f64, Vec<f64>)> = (0..n_line)
        .map(|i| {
            let y = lo + (hi - lo) * i as f64 / (n_line - 1) as f64;
            let p = spec.manifold_point(&[y])?;
            Ok((y, if integral { integral_row(ps.family, &p) } else { p }))
        })
        .collect::<Result<_>>()?;

    let bifurcations = scan_manifold(&spec, ps.line_range, 256).unwrap_or_default();

    let traces = if integral { vec![] } else { manifold_traces(&spec, ps) };

    let drift = match fam {
        Some(_) => grid.par_iter().filter_map(|g| drift_at(&spec, g)).collect(),
        None => vec![],
    };

    Ok(PortraitBundle { spec: ps.clone(), columns, orbits, equilibria, bifurcations, traces, drift })
}

fn drift_at(spec: &FamilySpec, g: &[f64]) -> Option<DriftSample> {
    let planar = planar_reduce(spec.id(), g[0]).ok()?;
    let w = planar.periodic_window()?;
    let h = w.h_center + g[1].clamp(0.0, 1.0) * (w.h_separatrix - w.h_center);
    averaged_drift(spec, g[0], h).ok()
}

fn manifold_traces(spec: &FamilySpec, ps: &PortraitSpec) -> Vec<ManifoldTrace> {
    let k = ps.manifold_points;
    if k == 0 {
        return vec![];
    }
    let (lo, hi) = ps.line_range;
    let ys: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / k as f64).collect();
    let jobs: Vec<(f64, Stability)> = ys.iter().flat_map(|&y| [(y, Stability::Unstable), (y, Stability::Stable)]).collect();
    jobs.par_iter()
        .map(|&(y, st)| {
            let Ok(seeds) = manifold_seed(spec, y, st, 1e-6, 8) else {
                return vec![];
            };
            let t1 = if st == Stability::Unstable { ps.t_window.1.max(1.0) } else { ps.t_window.0.min(-1.0) };
            seeds
                .iter()
                .enumerate()
                .map(|(branch, s)| {
                    let traj = match integrate(spec, s, (0.0, t1), &tol()) {
                        Ok(t) => t,
                        Err(Error::Integration(f)) => f.partial,
                        Err(_) => return ManifoldTrace { source_y: y, stability: st, branch, points: vec![] },
                    };
                    let (_, pts) = traj.resample(ps.dt);
                    ManifoldTrace { source_y: y, stability: st, branch, points: pts }
                })
                .collect()
        })
        .collect::<Vec<Vec<_>>>()
        .into_iter()
        .flatten()
        .collect()
}

fn join(vals: impl IntoIterator<Item = f64>) -> String {
    vals.into_iter().map(fmt_num).collect::<Vec<_>>().join(",")
}

/// Writes `orbits.csv`, `equilibria.csv`, `annotations.json`,
/// `render.script`, plus `manifolds.csv` and `drift.csv` when present.
pub fn write_bundle(b: &PortraitBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut file = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::File::create(&p)?.write_all(body.as_bytes())?;
        written.push(p);
        Ok(())
    };

    let mut s = format!("orbit,t,{}\n", b.columns.join(","));
    for o in &b.orbits {
        for (t, r) in o.times.iter().zip(&o.rows) {
            let _ = writeln!(s, "{},{},{}", o.status.index, fmt_num(*t), join(r.iter().copied()));
        }
    }
    file("orbits.csv", s)?;

    let mut s = format!("y,{}\n", b.columns.join(","));
    for (y, r) in &b.equilibria {
        let _ = writeln!(s, "{},{}", fmt_num(*y), join(r.iter().copied()));
    }
    file("equilibria.csv", s)?;

    if !b.traces.is_empty() {
        let dim = b.columns.len();
        let mut s = format!("trace,source_y,stability,branch,{}\n", b.columns.join(","));
        for (i, tr) in b.traces.iter().enumerate() {
            let st = match tr.stability {
                Stability::Unstable => "unstable",
                Stability::Stable => "stable",
            };
            for p in &tr.points {
                debug_assert_eq!(p.len(), dim);
                let _ = writeln!(s, "{i},{},{st},{},{}", fmt_num(tr.source_y), tr.branch, join(p.iter().copied()));
            }
        }
        file("manifolds.csv", s)?;
    }

    if !b.drift.is_empty() {
        let mut s = String::from("theta,h,delta_theta,delta_h,period,tau,h_tilde,d_tau,d_h_tilde\n");
        for d in &b.drift {
            let (tau, ht, dtau, dht) = scaled_drift(d);
            let _ = writeln!(s, "{}", join([d.theta, d.h, d.delta_theta, d.delta_h, d.period, tau, ht, dtau, dht]));
        }
        file("drift.csv", s)?;
    }

    let ann = Annotations {
        family: b.spec.family.as_str(),
        params: &b.spec.params,
        view: b.spec.view,
        columns: &b.columns,
        orbits: b.orbits.iter().map(|o| &o.status).collect(),
        bifurcations: &b.bifurcations,
        manifold_traces: &[],
        h_tilde_bounds: (b.spec.view == View::IntegralPlane && b.spec.family == FamilyId::Tb24).then_some([-H_TILDE_BOUND, H_TILDE_BOUND]),
        drift_samples: (!b.drift.is_empty()).then_some(b.drift.len()),
    };
    file("annotations.json", serde_json::to_string_pretty(&ann)? + "\n")?;
    file("render.script", emit_render_script(b, "gnuplot")?)?;
    Ok(written)
}

/// `(τ, H̃)` of a drift sample and the drift expressed in that chart.
pub fn scaled_drift(d: &DriftSample) -> (f64, f64, f64, f64) {
    match scale_pair(IntegralPair { theta: d.theta, hamiltonian: d.h }) {
        Ok(c) => {
            let dtau = d.delta_theta / d.theta;
            let dht = d.theta.powf(-1.5) * (d.delta_h - 1.5 * d.h * d.delta_theta / d.theta);
            (c.tau, c.h_tilde, dtau, dht)
        }
        Err(_) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
    }
}

/// Plotting script for the bundle. Only `gnuplot` is supported.
pub fn emit_render_script(b: &PortraitBundle, format: &str) -> Result<String> {
    if format != "gnuplot" {
        return Err(Error::UnsupportedFormat(format.to_string()));
    }
    let n = b.orbits.len();
    let mut s = String::new();
    let _ = writeln!(s, "# {} portrait, view {:?}", b.spec.family.as_str(), b.spec.view);
    s.push_str("set datafile separator comma\nset key off\n");
    // column numbers: orbit, t, then the emitted columns
    let col = |i: usize| i + 3;
    match b.spec.view {
        View::IntegralPlane => {
            let tb = b.spec.family == FamilyId::Tb24;
            let (x, y) = if tb { (col(2), col(3)) } else { (col(0), col(1)) };
            let (xl, yl) = if tb { ("tau", "H~") } else { ("Theta", "H") };
            let _ = writeln!(s, "set xlabel '{xl}'\nset ylabel '{yl}'");
            if tb {
                let _ = writeln!(s, "set arrow from graph 0, first {b:.16e} to graph 1, first {b:.16e} nohead dt 2", b = H_TILDE_BOUND);
                let _ = writeln!(s, "set arrow from graph 0, first {b:.16e} to graph 1, first {b:.16e} nohead dt 2", b = -H_TILDE_BOUND);
            }
            let (dx, dy, px, py) = if tb { (8, 9, 6, 7) } else { (3, 4, 1, 2) };
            let _ = writeln!(
                s,
                "plot for [i=0:{m}] 'orbits.csv' skip 1 using ($1==i ? ${x} : NaN):{y} with lines lw 0.5, \\\n     'equilibria.csv' skip 1 using {ex}:{ey} with lines lw 2 lc 'black'{drift}",
                m = n.saturating_sub(1),
                ex = x - 1,
                ey = y - 1,
                drift = if b.drift.is_empty() {
                    String::new()
                } else {
                    format!(", \\\n     'drift.csv' skip 1 using {px}:{py}:(0.1*${dx}):(0.1*${dy}) with vectors lc 'red'")
                }
            );
        }
        View::StatePlane => {
            s.push_str("set xlabel 'c0'\nset ylabel 'c1'\n");
            let _ = writeln!(
                s,
                "plot for [i=0:{m}] 'orbits.csv' skip 1 using ($1==i ? $3 : NaN):4 with lines lw 0.5, \\\n     'equilibria.csv' skip 1 using 2:3 with lines lw 2 lc 'black'{tr}",
                m = n.saturating_sub(1),
                tr = if b.traces.is_empty() { "" } else { ", \\\n     'manifolds.csv' skip 1 using 5:6 with points pt 7 ps 0.2 lc 'red'" }
            );
        }
        View::State3d => {
            s.push_str("set view 70, 30\nset xlabel 'c0'\nset ylabel 'c1'\nset zlabel 'c2'\n");
            let _ = writeln!(
                s,
                "splot for [i=0:{m}] 'orbits.csv' skip 1 using ($1==i ? $3 : NaN):4:5 with lines lw 0.5, \\\n      'equilibria.csv' skip 1 using 2:3:4 with lines lw 2 lc 'black'{tr}",
                m = n.saturating_sub(1),
                tr = if b.traces.is_empty() { "" } else { ", \\\n      'manifolds.csv' skip 1 using 5:6:7 with points pt 7 ps 0.2 lc 'red'" }
            );
        }
    }
    s.push_str("pause mouse close\n");
    Ok(s)
}
