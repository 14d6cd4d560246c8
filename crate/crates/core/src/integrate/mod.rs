//! Adaptive explicit Runge-Kutta integration with dense output and events.
//!
//! The stepper is the Dormand-Prince 8(5,3) pair; every accepted step keeps a
//! 7th-order interpolant so trajectories can be queried at arbitrary times
//! and event roots are refined on the interpolant rather than by re-stepping.

mod dop853;
pub mod export;
mod tableau;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FailureKind, IntegrationFailure, Result};
use crate::systems::VectorField;

pub use dop853::Segment;
use dop853::{StepOutcome, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub event_tol: f64,
    /// Integration aborts once the max-norm of the state exceeds this.
    pub blow_up: f64,
    pub max_steps: usize,
    pub max_step: Option<f64>,
    pub first_step: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            event_tol: 1e-10,
            blow_up: 1e6,
            max_steps: 2_000_000,
            max_step: None,
            first_step: None,
        }
    }
}

impl Tolerances {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Tolerances { rel_tol, abs_tol, ..Default::default() }
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = Some(h);
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |name: &str| Err(Error::InvalidParameter { name: name.into(), reason: "must be positive and finite".into() });
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return bad("rel_tol");
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return bad("abs_tol");
        }
        if !(self.event_tol > 0.0) {
            return bad("event_tol");
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return bad("max_step");
            }
        }
        Ok(())
    }
}

/// Time-stamped states of one integration plus the interpolants between them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    segments: Vec<Segment>,
    pub accepted: usize,
    pub rejected: usize,
    pub nfev: usize,
    pub tolerances: Tolerances,
}

impl Trajectory {
    fn start(t0: f64, y0: &[f64], tolerances: Tolerances) -> Self {
        Trajectory {
            times: vec![t0],
            states: vec![y0.to_vec()],
            segments: Vec::new(),
            accepted: 0,
            rejected: 0,
            nfev: 0,
            tolerances,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    fn forward(&self) -> bool {
        self.t_end() >= self.t_start()
    }

    /// Dense-output state at `t`, or `None` outside the integrated span.
    pub fn at(&self, t: f64) -> Option<Vec<f64>> {
        let (lo, hi) = if self.forward() { (self.t_start(), self.t_end()) } else { (self.t_end(), self.t_start()) };
        if !(lo..=hi).contains(&t) {
            return None;
        }
        if self.segments.is_empty() {
            return Some(self.states[0].clone());
        }
        let fwd = self.forward();
        let i = self.times.partition_point(|&s| if fwd { s <= t } else { s >= t });
        let i = i.clamp(1, self.segments.len()) - 1;
        Some(self.segments[i].eval(t))
    }

    /// Dense samples every `dt` from the first to the last time, with the
    /// endpoint always included.
    pub fn resample(&self, dt: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let (t0, t1) = (self.t_start(), self.t_end());
        let n = ((t1 - t0).abs() / dt).floor() as usize;
        let sgn = if t1 >= t0 { 1.0 } else { -1.0 };
        let mut ts: Vec<f64> = (0..=n).map(|k| t0 + sgn * dt * k as f64).collect();
        if (ts[n] - t1).abs() > 1e-12 * dt {
            ts.push(t1);
        } else {
            ts[n] = t1;
        }
        let ys = ts.iter().map(|&t| self.at(t).expect("inside span")).collect();
        (ts, ys)
    }

    fn push(&mut self, seg: Segment, t: f64, y: &[f64]) {
        self.segments.push(seg);
        self.times.push(t);
        self.states.push(y.to_vec());
    }
}

pub type EventFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A scalar event function with a crossing direction.
///
/// `direction = +1` fires when `g` goes from negative to non-negative,
/// `-1` from positive to non-positive, `0` either way.
#[derive(Clone)]
pub struct EventSpec {
    pub func: EventFn,
    pub direction: i8,
    pub terminal: bool,
}

impl std::fmt::Debug for EventSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventSpec").field("direction", &self.direction).field("terminal", &self.terminal).finish()
    }
}

impl EventSpec {
    pub fn new(func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, direction: i8, terminal: bool) -> Self {
        EventSpec { func: Arc::new(func), direction, terminal }
    }

    /// Zero of coordinate `index` minus `value`.
    pub fn coordinate(index: usize, value: f64, direction: i8) -> Self {
        Self::new(move |s| s[index] - value, direction, true)
    }

    /// Terminal event `|f(s)| <= eta`, approached from above.
    pub fn near_equilibrium(field: Arc<dyn VectorField>, eta: f64) -> Self {
        Self::new(
            move |s| {
                let f = field.eval(s);
                f.iter().map(|v| v * v).sum::<f64>().sqrt() - eta
            },
            -1,
            true,
        )
    }

    fn crosses(&self, g_prev: f64, g_new: f64) -> bool {
        let up = g_prev < 0.0 && g_new >= 0.0;
        let down = g_prev > 0.0 && g_new <= 0.0;
        match self.direction {
            d if d > 0 => up,
            d if d < 0 => down,
            _ => up || down,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EventHit {
    /// Index into the event list.
    pub event: usize,
    pub t: f64,
    pub state: Vec<f64>,
}

fn fail(kind: FailureKind, t: f64, state: &[f64], partial: Trajectory) -> Error {
    Error::Integration(Box::new(IntegrationFailure { kind, t, state: state.to_vec(), partial }))
}

/// Illinois regula falsi on the dense output of one step, driven well below
/// `tol` so badly scaled event functions still localize the time sharply.
fn refine_root(seg: &Segment, g: &EventFn, mut ta: f64, mut ga: f64, mut tb: f64, mut gb: f64, tol: f64) -> (f64, Vec<f64>) {
    if gb == 0.0 {
        return (tb, seg.eval(tb));
    }
    let mut best = (tb, gb.abs());
    for _ in 0..200 {
        let tc = if gb != ga { tb - gb * (tb - ta) / (gb - ga) } else { 0.5 * (ta + tb) };
        let tc = if tc.is_finite() { tc } else { 0.5 * (ta + tb) };
        let yc = seg.eval(tc);
        let gc = g(&yc);
        if gc.abs() < best.1 {
            best = (tc, gc.abs());
        }
        if gc.abs() <= 1e-3 * tol {
            return (tc, yc);
        }
        if (gc < 0.0) != (gb < 0.0) {
            ta = tb;
            ga = gb;
        } else {
            ga *= 0.5;
        }
        tb = tc;
        gb = gc;
        if (tb - ta).abs() <= 4.0 * f64::EPSILON * tb.abs().max(1.0) {
            break;
        }
    }
    (best.0, seg.eval(best.0))
}

fn run(
    field: &dyn VectorField,
    y0: &[f64],
    t0: f64,
    t1: f64,
    events: &[EventSpec],
    tol: &Tolerances,
    skip_initial: bool,
) -> Result<(Trajectory, Vec<EventHit>)> {
    if y0.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: y0.len() });
    }
    tol.validate()?;
    if !(t0.is_finite() && t1.is_finite()) || t0 == t1 {
        return Err(Error::InvalidInput(format!("degenerate time span ({t0}, {t1})")));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial state has non-finite entries".into()));
    }

    let mut traj = Trajectory::start(t0, y0, *tol);
    let mut hits = Vec::new();
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.func)(y0)).collect();

    if !skip_initial {
        for (i, e) in events.iter().enumerate() {
            if e.direction == 0 && g_prev[i].abs() <= tol.event_tol {
                hits.push(EventHit { event: i, t: t0, state: y0.to_vec() });
                if e.terminal {
                    return Ok((traj, hits));
                }
            }
        }
    }
    let min_gap = 1e-9 * (1.0 + t0.abs());

    let mut st = Stepper::new(field, t0, y0, t1, tol);
    while !st.finished() {
        if traj.accepted >= tol.max_steps {
            traj.nfev = st.nfev;
            traj.rejected = st.rejected;
            return Err(fail(FailureKind::MaxSteps, st.t, &st.y, traj));
        }
        let y_before = st.y.clone();
        let t_before = st.t;
        let seg = match st.step() {
            StepOutcome::Accepted(seg) => seg,
            StepOutcome::TooSmall => {
                traj.nfev = st.nfev;
                traj.rejected = st.rejected;
                return Err(fail(FailureKind::StepUnderflow, t_before, &y_before, traj));
            }
        };
        traj.nfev = st.nfev;
        traj.rejected = st.rejected;
        if st.y.iter().any(|v| !v.is_finite()) {
            return Err(fail(FailureKind::NonFinite, t_before, &y_before, traj));
        }
        if st.y.iter().fold(0.0f64, |m, v| m.max(v.abs())) > tol.blow_up {
            return Err(fail(FailureKind::BlowUp, t_before, &y_before, traj));
        }
        traj.accepted += 1;

        let mut step_hits = Vec::new();
        for (i, e) in events.iter().enumerate() {
            let g_new = (e.func)(&st.y);
            if e.crosses(g_prev[i], g_new) {
                let (t, y) = refine_root(&seg, &e.func, t_before, g_prev[i], st.t, g_new, tol.event_tol);
                if !(skip_initial && (t - t0).abs() <= min_gap) {
                    step_hits.push(EventHit { event: i, t, state: y });
                }
            }
            g_prev[i] = g_new;
        }
        let fwd = t1 > t0;
        step_hits.sort_by(|a, b| if fwd { a.t.total_cmp(&b.t) } else { b.t.total_cmp(&a.t) });
        if let Some(k) = step_hits.iter().position(|h| events[h.event].terminal) {
            step_hits.truncate(k + 1);
            let h = &step_hits[k];
            let (t, y) = (h.t, h.state.clone());
            hits.extend(step_hits);
            traj.push(seg, t, &y);
            return Ok((traj, hits));
        }
        hits.extend(step_hits);
        let (t, y) = (st.t, st.y.clone());
        traj.push(seg, t, &y);
    }
    Ok((traj, hits))
}

/// Integrates over `t_span = (t0, t1)`; `t1 < t0` integrates backward.
pub fn integrate(field: &dyn VectorField, y0: &[f64], t_span: (f64, f64), tol: &Tolerances) -> Result<Trajectory> {
    run(field, y0, t_span.0, t_span.1, &[], tol, false).map(|(t, _)| t)
}

/// Integrates while tracking several events; stops at the first terminal one.
pub fn integrate_with_events(
    field: &dyn VectorField,
    y0: &[f64],
    t_span: (f64, f64),
    events: &[EventSpec],
    tol: &Tolerances,
) -> Result<(Trajectory, Vec<EventHit>)> {
    run(field, y0, t_span.0, t_span.1, events, tol, false)
}

#[derive(Debug, Clone)]
pub enum Until {
    Hit { state: Vec<f64>, t: f64, trajectory: Trajectory },
    /// The event did not occur before `t_max`; this is not a failure.
    NoEvent(Trajectory),
}

impl Until {
    pub fn hit(&self) -> Option<(&[f64], f64)> {
        match self {
            Until::Hit { state, t, .. } => Some((state, *t)),
            Until::NoEvent(_) => None,
        }
    }

    pub fn trajectory(&self) -> &Trajectory {
        match self {
            Until::Hit { trajectory, .. } | Until::NoEvent(trajectory) => trajectory,
        }
    }
}

/// Integrates from time 0 until `event` fires or `t_max` is reached.
/// A negative `t_max` integrates backward.
pub fn integrate_until(field: &dyn VectorField, y0: &[f64], event: &EventSpec, t_max: f64, tol: &Tolerances) -> Result<Until> {
    let ev = EventSpec { terminal: true, ..event.clone() };
    let (trajectory, hits) = run(field, y0, 0.0, t_max, std::slice::from_ref(&ev), tol, false)?;
    Ok(match hits.into_iter().next() {
        Some(h) => Until::Hit { state: h.state, t: h.t, trajectory },
        None => Until::NoEvent(trajectory),
    })
}

/// First return to `section` in its direction. A crossing at the start
/// time itself is not a return.
pub fn poincare_map(
    field: &dyn VectorField,
    section: &EventSpec,
    y0: &[f64],
    t_max: f64,
    tol: &Tolerances,
) -> Result<Option<(Vec<f64>, f64)>> {
    let ev = EventSpec { terminal: true, ..section.clone() };
    let (_, hits) = run(field, y0, 0.0, t_max, std::slice::from_ref(&ev), tol, true)?;
    Ok(hits.into_iter().next().map(|h| (h.state, h.t)))
}
