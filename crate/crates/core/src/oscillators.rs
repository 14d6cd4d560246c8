//! Coupled oscillators on octahedral graphs.
//!
//! Vertices are `±1, …, ±(m+1)`; every pair of vertices is joined except the
//! antipodal pairs `{+j, −j}`. Vertex `j` sees the additive input
//! `s_j = Σ_{k ≠ ±j} u_k`. On the antipode space `u_{−j} = −u_j` the inputs
//! cancel, so the network splits into independent antipodal pairs, and any
//! choice of phases of equal-period pair orbits gives a periodic solution.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;

use crate::error::{Error, Result};
use crate::integrate::{integrate, poincare_map, EventSpec, Tolerances, Trajectory};
use crate::systems::{FnField, Params, VectorField};

/// Node dynamics `f(u, s, out)` for state `u` and coupling input `s`.
pub type NodeFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OctahedralGraph {
    m: usize,
}

impl OctahedralGraph {
    pub fn new(m: usize) -> Self {
        OctahedralGraph { m }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_vertices(&self) -> usize {
        2 * (self.m + 1)
    }

    /// Vertex labels in storage order: `+1, −1, +2, −2, …`.
    pub fn vertices(&self) -> Vec<i64> {
        (1..=self.m as i64 + 1).flat_map(|j| [j, -j]).collect()
    }

    /// Storage slot of vertex `v`.
    pub fn index(&self, v: i64) -> usize {
        let j = v.unsigned_abs() as usize;
        assert!(v != 0 && j <= self.m + 1, "vertex {v} not in graph");
        2 * (j - 1) + usize::from(v < 0)
    }

    pub fn label(&self, index: usize) -> i64 {
        let j = (index / 2 + 1) as i64;
        if index % 2 == 0 { j } else { -j }
    }

    pub fn adjacent(&self, a: i64, b: i64) -> bool {
        a != b && a != -b
    }

    pub fn neighbors(&self, v: i64) -> Vec<i64> {
        self.vertices().into_iter().filter(|&w| self.adjacent(v, w)).collect()
    }

    pub fn edges(&self) -> Vec<(i64, i64)> {
        let vs = self.vertices();
        let mut out = Vec::new();
        for (i, &a) in vs.iter().enumerate() {
            for &b in &vs[i + 1..] {
                if self.adjacent(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

/// A 2π-periodic orbit of one uncoupled node, started on the section
/// "second component crosses zero upward".
#[derive(Debug, Clone)]
pub struct BaseOrbit {
    pub start: Vec<f64>,
    pub period: f64,
    orbit: Trajectory,
}

impl BaseOrbit {
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        self.orbit.at(t.rem_euclid(self.period).min(self.orbit.t_end())).expect("within one period")
    }

    /// Phase in `[0, period)` of the orbit point closest to `u`.
    pub fn phase_of(&self, u: &[f64]) -> f64 {
        let dist = |t: f64| {
            let p = self.state_at(t);
            p.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        };
        let n = 256;
        let dt = self.period / n as f64;
        let k = (0..n).min_by(|&a, &b| dist(a as f64 * dt).total_cmp(&dist(b as f64 * dt))).unwrap();
        // golden-section refinement on the bracketing cell pair
        let (mut a, mut b) = ((k as f64 - 1.0) * dt, (k as f64 + 1.0) * dt);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fd) = (dist(c), dist(d));
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = dist(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = dist(d);
            }
        }
        (0.5 * (a + b)).rem_euclid(self.period)
    }
}

fn node_tolerances() -> Tolerances {
    Tolerances::new(1e-12, 1e-14)
}

/// Locates the attracting periodic orbit of `u' = f(u, 0)` from `guess`.
pub fn base_orbit(node: &NodeFn, dim: usize, guess: &[f64]) -> Result<BaseOrbit> {
    let zero = vec![0.0; dim];
    let nf = node.clone();
    let field = FnField::new(dim, move |u: &[f64], o: &mut [f64]| nf(u, &zero, o));
    let tol = node_tolerances();
    let section = EventSpec::coordinate(1, 0.0, 1);
    let settled = integrate(&field, guess, (0.0, 200.0), &tol)?;
    let mut y = settled.last_state().to_vec();
    let missed = || Error::InvalidInput("node orbit does not cross its section".into());
    y = poincare_map(&field, &section, &y, 100.0, &tol)?.ok_or_else(missed)?.0;
    let mut period = 0.0;
    for _ in 0..50 {
        let (y2, t) = poincare_map(&field, &section, &y, 100.0, &tol)?.ok_or_else(missed)?;
        let moved = y2.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        y = y2;
        period = t;
        if moved < 1e-11 {
            break;
        }
    }
    let orbit = integrate(&field, &y, (0.0, period), &tol)?;
    Ok(BaseOrbit { start: y, period, orbit })
}

/// Rescales time so the node's periodic orbit has period 2π.
pub fn normalize_period(node: NodeFn, dim: usize, guess: &[f64]) -> Result<(NodeFn, BaseOrbit)> {
    let raw = base_orbit(&node, dim, guess)?;
    let k = raw.period / (2.0 * PI);
    let scaled: NodeFn = Arc::new(move |u, s, o| {
        node(u, s, o);
        o.iter_mut().for_each(|v| *v *= k);
    });
    let base = base_orbit(&scaled, dim, &raw.start)?;
    Ok((scaled, base))
}

/// Planar S¹-equivariant node: `f(u, s) = (1 − |u|²)u + Ju + κs`.
pub fn stuart_landau(kappa: f64) -> NodeFn {
    Arc::new(move |u, s, o| {
        let r2 = u[0] * u[0] + u[1] * u[1];
        o[0] = (1.0 - r2) * u[0] - u[1] + kappa * s[0];
        o[1] = (1.0 - r2) * u[1] + u[0] + kappa * s[1];
    })
}

/// Van der Pol node with additive coupling; not period-normalized.
pub fn van_der_pol(mu: f64, kappa: f64) -> NodeFn {
    Arc::new(move |u, s, o| {
        o[0] = u[1] + kappa * s[0];
        o[1] = mu * (1.0 - u[0] * u[0]) * u[1] - u[0] + kappa * s[1];
    })
}

/// Assembled network field.
#[derive(Clone)]
pub struct Network {
    graph: OctahedralGraph,
    node_dim: usize,
    /// One node field per storage slot.
    nodes: Vec<NodeFn>,
    /// Base orbits of the `+j` vertices; `−j` follows `−u_j`.
    base: Vec<BaseOrbit>,
}

impl std::fmt::Debug for Network {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Network").field("graph", &self.graph).field("node_dim", &self.node_dim).finish()
    }
}

/// Builds the network field `u̇_j = f_j(u_j, Σ_{k≠±j} u_k)`.
///
/// With `oddness_check`, `f_{−j}(−u, 0) = −f_j(u, 0)` is tested on random
/// samples and a violation is returned with its witness.
pub fn build_network(graph: OctahedralGraph, node_dim: usize, nodes: Vec<NodeFn>, oddness_check: bool) -> Result<Network> {
    if nodes.len() != graph.n_vertices() {
        return Err(Error::DimensionMismatch { expected: graph.n_vertices(), got: nodes.len() });
    }
    if oddness_check {
        let mut rng = StdRng::seed_from_u64(0x0dd);
        let zero = vec![0.0; node_dim];
        let (mut fp, mut fm) = (vec![0.0; node_dim], vec![0.0; node_dim]);
        for j in 1..=graph.m() as i64 + 1 {
            for _ in 0..64 {
                let u: Vec<f64> = (0..node_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let neg: Vec<f64> = u.iter().map(|v| -v).collect();
                nodes[graph.index(j)](&u, &zero, &mut fp);
                nodes[graph.index(-j)](&neg, &zero, &mut fm);
                let scale = 1.0 + fp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let defect = fp.iter().zip(&fm).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
                if defect > 1e-12 * scale {
                    return Err(Error::OddnessViolation { vertex: j, witness: u, defect });
                }
            }
        }
    }
    Ok(Network { graph, node_dim, nodes, base: Vec::new() })
}

/// Preset network from `m`, `coupling`, `node` (0 Stuart-Landau, 1 van der
/// Pol) and `mu`.
pub fn network_from_params(p: &Params) -> Result<Network> {
    let m = p.get("m").unwrap_or(1.0);
    if !(m >= 0.0 && m.fract() == 0.0 && m <= 64.0) {
        return Err(Error::InvalidParameter { name: "m".into(), reason: "must be an integer in 0..=64".into() });
    }
    let graph = OctahedralGraph::new(m as usize);
    let kappa = p.get("coupling").unwrap_or(0.2);
    let (node, base) = match p.get("node").unwrap_or(0.0) {
        k if k == 0.0 => {
            let n = stuart_landau(kappa);
            let b = base_orbit(&n, 2, &[1.0, 0.0])?;
            (n, b)
        }
        k if k == 1.0 => {
            let mu = p.get("mu").unwrap_or(1.0);
            if !(mu > 0.0) {
                return Err(Error::InvalidParameter { name: "mu".into(), reason: "must be positive".into() });
            }
            normalize_period(van_der_pol(mu, kappa), 2, &[2.0, 0.0])?
        }
        _ => return Err(Error::InvalidParameter { name: "node".into(), reason: "must be 0 or 1".into() }),
    };
    let nodes = vec![node; graph.n_vertices()];
    let net = build_network(graph, 2, nodes, true)?;
    let base = vec![base; graph.m() + 1];
    net.with_base_orbits(base)
}

impl Network {
    pub fn graph(&self) -> &OctahedralGraph {
        &self.graph
    }

    pub fn node_dim(&self) -> usize {
        self.node_dim
    }

    pub fn state_dim(&self) -> usize {
        self.graph.n_vertices() * self.node_dim
    }

    pub fn base_orbits(&self) -> &[BaseOrbit] {
        &self.base
    }

    /// Attaches the `+j` base orbits used by the phase-torus chart.
    pub fn with_base_orbits(mut self, base: Vec<BaseOrbit>) -> Result<Self> {
        if base.len() != self.graph.m() + 1 {
            return Err(Error::DimensionMismatch { expected: self.graph.m() + 1, got: base.len() });
        }
        self.base = base;
        Ok(self)
    }

    pub fn block<'s>(&self, state: &'s [f64], v: i64) -> &'s [f64] {
        let i = self.graph.index(v) * self.node_dim;
        &state[i..i + self.node_dim]
    }

    /// Coupling input `Σ_{k≠±v} u_k` at vertex `v`.
    pub fn coupling_input(&self, state: &[f64], v: i64) -> Vec<f64> {
        let d = self.node_dim;
        let mut s = vec![0.0; d];
        for w in self.graph.neighbors(v) {
            for (a, b) in s.iter_mut().zip(self.block(state, w)) {
                *a += b;
            }
        }
        s
    }

    pub(crate) fn eval_into(&self, state: &[f64], out: &mut [f64]) {
        let d = self.node_dim;
        let mut total = vec![0.0; d];
        for u in state.chunks_exact(d) {
            for (a, b) in total.iter_mut().zip(u) {
                *a += b;
            }
        }
        let mut s = vec![0.0; d];
        for j in 0..=self.graph.m() {
            let (ip, im) = (2 * j * d, (2 * j + 1) * d);
            for c in 0..d {
                s[c] = total[c] - state[ip + c] - state[im + c];
            }
            self.nodes[2 * j](&state[ip..ip + d], &s, &mut out[ip..ip + d]);
            self.nodes[2 * j + 1](&state[im..im + d], &s, &mut out[im..im + d]);
        }
    }

    /// `max_j |u_{−j} + u_j|`; zero exactly on the antipode space.
    pub fn antipode_residual(&self, state: &[f64]) -> f64 {
        (1..=self.graph.m() as i64 + 1)
            .map(|j| {
                let (a, b) = (self.block(state, j), self.block(state, -j));
                a.iter().zip(b).map(|(x, y)| (x + y) * (x + y)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// The product of uncoupled pairs: every node sees zero input.
    pub fn decoupled(&self) -> Decoupled<'_> {
        Decoupled(self)
    }

    /// Network state `u^φ(t)` with `u_{±j}(t) = ±u_j(t + φ_j)`.
    pub fn phase_torus_state(&self, phases: &[f64], t: f64) -> Result<Vec<f64>> {
        if self.base.is_empty() {
            return Err(Error::InvalidInput("network has no base orbits".into()));
        }
        if phases.len() != self.graph.m() + 1 {
            return Err(Error::DimensionMismatch { expected: self.graph.m() + 1, got: phases.len() });
        }
        let d = self.node_dim;
        let mut s = vec![0.0; self.state_dim()];
        for (j, (b, &phi)) in self.base.iter().zip(phases).enumerate() {
            let u = b.state_at(t + phi);
            for c in 0..d {
                s[2 * j * d + c] = u[c];
                s[(2 * j + 1) * d + c] = -u[c];
            }
        }
        Ok(s)
    }

    /// Torus point with the last phase eliminated (set to zero), so the
    /// state lies on the return section.
    pub fn torus_point(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if coords.len() != self.graph.m() {
            return Err(Error::DimensionMismatch { expected: self.graph.m(), got: coords.len() });
        }
        let mut phases = coords.to_vec();
        phases.push(0.0);
        self.phase_torus_state(&phases, 0.0)
    }

    /// Phase differences `φ_j − φ_{m+1}` of a state near the torus.
    pub fn phases_of(&self, state: &[f64]) -> Vec<f64> {
        if self.base.is_empty() {
            return vec![f64::NAN; self.graph.m()];
        }
        let m = self.graph.m();
        let raw: Vec<f64> = (0..=m).map(|j| self.base[j].phase_of(self.block(state, j as i64 + 1))).collect();
        (0..m).map(|j| (raw[j] - raw[m]).rem_euclid(2.0 * PI)).collect()
    }

    /// Return section: the second component of `u_{+(m+1)}` crossing zero
    /// upward.
    pub fn section(&self) -> EventSpec {
        let idx = self.graph.index(self.graph.m() as i64 + 1) * self.node_dim + 1;
        EventSpec::coordinate(idx, 0.0, 1)
    }

    /// `|P(x) − x|` for the torus point `x` with the given phase differences.
    pub fn fixed_point_residual(&self, coords: &[f64], tol: &Tolerances) -> Result<f64> {
        let x = self.torus_point(coords)?;
        let (y, _) = poincare_map(self, &self.section(), &x, 4.0 * PI, tol)?
            .ok_or_else(|| Error::InvalidInput("no return to the section within 2 periods".into()))?;
        Ok(x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }
}

impl VectorField for Network {
    fn dim(&self) -> usize {
        self.state_dim()
    }

    fn eval_into(&self, state: &[f64], out: &mut [f64]) {
        Network::eval_into(self, state, out)
    }
}

pub struct Decoupled<'a>(&'a Network);

impl VectorField for Decoupled<'_> {
    fn dim(&self) -> usize {
        self.0.state_dim()
    }

    fn eval_into(&self, state: &[f64], out: &mut [f64]) {
        let d = self.0.node_dim;
        let zero = vec![0.0; d];
        for (i, (u, o)) in state.chunks_exact(d).zip(out.chunks_exact_mut(d)).enumerate() {
            self.0.nodes[i](u, &zero, o);
        }
    }
}

/// Largest deviation between a network trajectory and the uncoupled-pair
/// flow started from the same state, over the trajectory's nodes.
pub fn decoupling_defect(net: &Network, traj: &Trajectory, tol: &Tolerances) -> Result<f64> {
    let dec = integrate(&net.decoupled(), &traj.states[0], (traj.t_start(), traj.t_end()), tol)?;
    let mut worst: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let v = dec.at(*t).expect("same span");
        worst = s.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

/// Samples the periodic network solution built from `base` orbits with the
/// given phases at `times`, after checking all periods equal 2π.
pub fn phase_torus_orbit(net: &Network, phases: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    for b in net.base_orbits() {
        if (b.period - 2.0 * PI).abs() > 1e-8 {
            return Err(Error::PeriodMismatch { period: b.period, tol: 1e-8 });
        }
    }
    times.iter().map(|&t| net.phase_torus_state(phases, t)).collect()
}

/// Largest gap between the assembled torus orbit and a direct network
/// integration from its initial point, over one period.
pub fn phase_torus_residual(net: &Network, phases: &[f64], tol: &Tolerances) -> Result<f64> {
    let times: Vec<f64> = (0..=64).map(|k| 2.0 * PI * k as f64 / 64.0).collect();
    let path = phase_torus_orbit(net, phases, &times)?;
    let tr = integrate(net, &path[0], (0.0, 2.0 * PI), tol)?;
    let mut worst: f64 = 0.0;
    for (t, s) in times.iter().zip(&path) {
        let v = tr.at(*t).expect("within span");
        worst = s.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset(m: f64, node: f64) -> Network {
        network_from_params(&Params::from_pairs(&[("m", m), ("node", node)])).unwrap()
    }

    #[test]
    fn graph_counts() {
        for m in 0..5 {
            let g = OctahedralGraph::new(m);
            assert_eq!(g.edges().len(), 2 * m * (m + 1));
            for v in g.vertices() {
                assert_eq!(g.neighbors(v).len(), 2 * m);
                assert_eq!(g.label(g.index(v)), v);
                assert!(!g.neighbors(v).contains(&-v));
            }
        }
    }

    #[test]
    fn coupling_cancels_on_antipode_space() {
        let net = preset(2.0, 0.0);
        let mut rng = StdRng::seed_from_u64(3);
        let mut s = vec![0.0; net.state_dim()];
        for j in 0..3 {
            for c in 0..2 {
                let v: f64 = rng.gen_range(-1.0..1.0);
                s[4 * j + c] = v;
                s[4 * j + 2 + c] = -v;
            }
        }
        assert_eq!(net.antipode_residual(&s), 0.0);
        for v in net.graph().vertices() {
            assert_eq!(net.coupling_input(&s, v), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn van_der_pol_is_normalized() {
        let net = preset(1.0, 1.0);
        for b in net.base_orbits() {
            assert!((b.period - 2.0 * PI).abs() < 1e-9, "{}", b.period);
        }
    }

    #[test]
    fn oddness_violation_has_witness() {
        let g = OctahedralGraph::new(1);
        let bad: NodeFn = Arc::new(|u, _s, o| {
            o[0] = u[0] * u[0];
            o[1] = u[1];
        });
        match build_network(g, 2, vec![bad; 4], true) {
            Err(Error::OddnessViolation { vertex, witness, defect }) => {
                assert_eq!(vertex, 1);
                assert_eq!(witness.len(), 2);
                assert!(defect > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn phase_of_recovers_shift() {
        let net = preset(1.0, 1.0);
        let b = &net.base_orbits()[0];
        for phi in [0.3, 2.0, 5.9] {
            let u = b.state_at(phi);
            assert!((b.phase_of(&u) - phi).abs() < 1e-7);
        }
    }
}
