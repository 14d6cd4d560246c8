//! Averaged drift of `(Θ, H)` over unperturbed periodic orbits, and Melnikov
//! integrals along the homoclinic/heteroclinic boundaries of the periodic
//! region.
//!
//! The perturbation enters the third-order families only through the
//! `ẅ`-equation, so along an unperturbed orbit `Θ̇ = I` and `Ḣ = −y·I` with
//!
//! * `tb-2.4`: `I = (λ − y)ÿ + bẏ²` (per unit `ε`),
//! * `rev-tb-2.5`: `I = a·yÿ + bẏ²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, WindowSide};
use crate::integrals::{planar_reduce, IntegrableFamily, PeriodicWindow, PlanarKind, PlanarSystem, REV_THETA_MAX};
use crate::integrate::{integrate, Tolerances, Trajectory};
use crate::quadrature::{adaptive, gauss_legendre, Poly};
use crate::systems::{FamilyId, FamilySpec};

/// Tolerances for orbits sampled inside this module.
pub fn orbit_tolerances() -> Tolerances {
    Tolerances::new(1e-12, 1e-14)
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub theta_value: f64,
    pub h_value: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub period: f64,
    /// Error estimate of the period quadrature.
    pub period_error: f64,
    /// One period of `(y, ẏ)` starting at `(y_max, 0)`.
    pub orbit: Trajectory,
}

fn potential_poly(ps: &PlanarSystem) -> Poly {
    let t = ps.theta_value;
    match ps.family {
        IntegrableFamily::Tb24 => Poly(vec![0.0, -t, 0.0, 1.0 / 6.0]),
        IntegrableFamily::RevTb25 => Poly(vec![0.0, -t, 0.5, 0.0, -0.25]),
    }
}

fn window(ps: &PlanarSystem) -> Result<PeriodicWindow> {
    ps.periodic_window().ok_or(Error::ThetaOutOfRange {
        theta: ps.theta_value,
        lo: admissible_theta(ps.family).0,
        hi: admissible_theta(ps.family).1,
    })
}

/// Open interval of `Θ` with a center and a bounding saddle.
pub fn admissible_theta(family: IntegrableFamily) -> (f64, f64) {
    match family {
        IntegrableFamily::Tb24 => (0.0, f64::INFINITY),
        IntegrableFamily::RevTb25 => (-REV_THETA_MAX, REV_THETA_MAX),
    }
}

/// Root of `g` in `[a, b]` by bisection down to adjacent floats.
fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn turning_point(ps: &PlanarSystem, win: &PeriodicWindow, h: f64, side: f64) -> f64 {
    let c = win.center;
    let wall = ps
        .equilibria()
        .into_iter()
        .filter(|e| e.kind == PlanarKind::Saddle && (e.y - c) * side > 0.0)
        .map(|e| e.y)
        .min_by(|a, b| (a - c).abs().total_cmp(&(b - c).abs()));
    let far = wall.unwrap_or_else(|| {
        let mut d = 1.0;
        while ps.potential(c + side * d) < h {
            d *= 2.0;
        }
        c + side * d
    });
    bisect(|y| ps.potential(y) - h, c, far)
}

fn check_level(win: &PeriodicWindow, h: f64) -> Result<()> {
    let side = if !(h > win.h_center) {
        Some(WindowSide::Center)
    } else if !(h < win.h_separatrix) {
        Some(WindowSide::Separatrix)
    } else {
        None
    };
    match side {
        Some(side) => Err(Error::OutsidePeriodicWindow { h, lo: win.h_center, hi: win.h_separatrix, side }),
        None => Ok(()),
    }
}

/// The closed orbit at energy `h_value` of the planar system.
pub fn periodic_orbit(ps: &PlanarSystem, h_value: f64) -> Result<PeriodicOrbit> {
    let win = window(ps)?;
    check_level(&win, h_value)?;
    let y_min = turning_point(ps, &win, h_value, -1.0);
    let y_max = turning_point(ps, &win, h_value, 1.0);

    // 2(h − V) = (y − y_max)(y − y_min)·q(y) with q < 0 inside; on
    // y = m + d·sin φ the half period is ∫ dφ / √(−q).
    let p2 = Poly(vec![2.0 * h_value]).add(&potential_poly(ps).scale(-2.0));
    let q = p2.deflate(y_max).deflate(y_min);
    let (m, d) = (0.5 * (y_max + y_min), 0.5 * (y_max - y_min));
    let half = std::f64::consts::FRAC_PI_2;
    let r = adaptive(|phi| 1.0 / (-q.eval(m + d * phi.sin())).max(f64::MIN_POSITIVE).sqrt(), -half, half, 1e-15, 1e-14);
    let period = 2.0 * r.value;

    let orbit = integrate(ps, &[y_max, 0.0], (0.0, period), &orbit_tolerances())?;
    Ok(PeriodicOrbit {
        theta_value: ps.theta_value,
        h_value,
        y_min,
        y_max,
        period,
        period_error: 2.0 * r.error,
        orbit,
    })
}

/// `I = α(y)·ÿ + b·ẏ²`, with `α` returned as a polynomial.
fn drift_weight(spec: &FamilySpec) -> Result<(IntegrableFamily, Poly, f64)> {
    let fam = IntegrableFamily::try_from(spec.id())?;
    let p = |n: &str| spec.param(n).unwrap_or(0.0);
    Ok(match fam {
        IntegrableFamily::Tb24 => (fam, Poly(vec![p("lambda"), -1.0]), p("b")),
        IntegrableFamily::RevTb25 => (fam, Poly(vec![0.0, p("a")]), p("b")),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSample {
    pub theta: f64,
    pub h: f64,
    /// Change of `Θ` over one unperturbed period, per unit perturbation.
    pub delta_theta: f64,
    pub delta_h: f64,
    pub period: f64,
    /// Difference between the last two trapezoid refinements.
    pub error_estimate: f64,
}

/// Per-period drift of `(Θ, H)` at the level `(Θ, h)`.
pub fn averaged_drift(spec: &FamilySpec, theta_value: f64, h_value: f64) -> Result<DriftSample> {
    let (fam, alpha, b) = drift_weight(spec)?;
    let ps = planar_reduce(fam.into(), theta_value)?;
    let orb = periodic_orbit(&ps, h_value)?;
    let t_per = orb.period;

    // periodic trapezoid rule, doubled until two levels agree
    let trap = |n: usize| -> (f64, f64) {
        let mut s = (0.0, 0.0);
        for k in 0..n {
            let t = t_per * k as f64 / n as f64;
            let st = orb.orbit.at(t).expect("inside one period");
            let (y, v) = (st[0], st[1]);
            let i = alpha.eval(y) * ps.force(y) + b * v * v;
            s.0 += i;
            s.1 -= y * i;
        }
        (s.0 * t_per / n as f64, s.1 * t_per / n as f64)
    };
    let mut n = 128;
    let mut prev = trap(n);
    let mut err;
    loop {
        n *= 2;
        let cur = trap(n);
        err = (cur.0 - prev.0).abs().max((cur.1 - prev.1).abs());
        prev = cur;
        let scale = 1.0 + cur.0.abs().max(cur.1.abs());
        if err <= 1e-12 * scale || n >= 1 << 16 {
            break;
        }
    }
    Ok(DriftSample { theta: theta_value, h: h_value, delta_theta: prev.0, delta_h: prev.1, period: t_per, error_estimate: err })
}

/// Drift samples on a `(Θ, h)` grid; `h` given as fractions in `(0, 1)` of
/// the window between center and separatrix. Levels outside a window are
/// skipped.
pub fn drift_grid(spec: &FamilySpec, thetas: &[f64], h_fractions: &[f64]) -> Result<Vec<DriftSample>> {
    let fam = IntegrableFamily::try_from(spec.id())?;
    let jobs: Vec<(f64, f64)> = thetas
        .iter()
        .filter_map(|&th| {
            let ps = planar_reduce(fam.into(), th).ok()?;
            let w = ps.periodic_window()?;
            Some(h_fractions.iter().map(move |f| (th, w.h_center + f * (w.h_separatrix - w.h_center))).collect::<Vec<_>>())
        })
        .flatten()
        .collect();
    jobs.par_iter().map(|&(th, h)| averaged_drift(spec, th, h)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MelnikovComponent {
    /// `m_theta = ∫ I dt`.
    Theta,
    /// `m_h = −∫ y·I dt`.
    H,
    /// `∫ (y_s − y)·I dt = m_h + y_s·m_theta`: the drift of `H` relative to
    /// the separatrix level, `y_s` the saddle (mean of the two saddles for
    /// a heteroclinic).
    Normal,
}

impl std::str::FromStr for MelnikovComponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" | "m_theta" => Ok(Self::Theta),
            "h" | "m_h" => Ok(Self::H),
            "normal" => Ok(Self::Normal),
            _ => Err(Error::InvalidInput(format!("unknown Melnikov component `{s}`"))),
        }
    }
}

/// Direction of the `rev-tb-2.5` heteroclinic at `Θ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `y: −1 → +1`.
    #[default]
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MelnikovRoute {
    /// Closed-form `tb-2.4` homoclinic in the variable `u = tanh(ct)`.
    ClosedForm,
    /// Homoclinic loop integrated over `y` between saddle and turning point.
    Loop,
    /// `rev-tb-2.5` heteroclinic `y = ±tanh(t/√2)`.
    Heteroclinic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelnikovResult {
    pub theta_value: f64,
    pub m_theta: f64,
    pub m_h: f64,
    pub m_normal: f64,
    pub saddle_y: f64,
    pub error_estimate: f64,
    /// Truncation time at which the orbit is within 1e-12 of the saddle
    /// (closed-form route only; `0` otherwise).
    pub t_star: f64,
    /// Contribution of `|t| > t_star`, included in the values above.
    pub tail: f64,
    pub route: MelnikovRoute,
}

impl MelnikovResult {
    pub fn component(&self, c: MelnikovComponent) -> f64 {
        match c {
            MelnikovComponent::Theta => self.m_theta,
            MelnikovComponent::H => self.m_h,
            MelnikovComponent::Normal => self.m_normal,
        }
    }
}

/// Melnikov integrals at level `Θ`: along the `tb-2.4` homoclinic (`Θ > 0`),
/// the `rev-tb-2.5` heteroclinic (`Θ = 0`, increasing orientation), or the
/// `rev-tb-2.5` homoclinic loop to the lower saddle (`0 < |Θ| < 2√3/9`).
pub fn melnikov(spec: &FamilySpec, theta_value: f64) -> Result<MelnikovResult> {
    melnikov_oriented(spec, theta_value, Orientation::Increasing)
}

pub fn melnikov_oriented(spec: &FamilySpec, theta_value: f64, orientation: Orientation) -> Result<MelnikovResult> {
    let (fam, alpha, b) = drift_weight(spec)?;
    let (lo, hi) = admissible_theta(fam);
    if !(theta_value > lo && theta_value < hi) {
        return Err(Error::ThetaOutOfRange { theta: theta_value, lo, hi });
    }
    match fam {
        IntegrableFamily::Tb24 => Ok(tb24_closed_form(theta_value, &alpha, b)),
        IntegrableFamily::RevTb25 if theta_value == 0.0 => Ok(rev_heteroclinic(&alpha, b, orientation)),
        IntegrableFamily::RevTb25 => melnikov_loop(&planar_reduce(fam.into(), theta_value)?, &alpha, b),
    }
}

fn gl_sum(f: impl Fn(f64) -> (f64, f64), a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> (f64, f64) {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).fold((0.0, 0.0), |acc, (x, w)| {
        let v = f(m + h * x);
        (acc.0 + w * h * v.0, acc.1 + w * h * v.1)
    })
}

fn tb24_closed_form(theta: f64, alpha: &Poly, b: f64) -> MelnikovResult {
    let amp = (2.0 * theta).sqrt();
    let c = 0.5 * amp.sqrt();
    // In u = tanh(ct): dt = du / (c(1 − u²)), ÿ = 6Ac²(1 − u²)(3u² − 1),
    // ẏ = −6Ac(1 − u²)u, so both integrands are polynomials in u.
    let integrand = |u: f64| {
        let s2 = 1.0 - u * u;
        let y = amp * (3.0 * s2 - 1.0);
        let i_dt = (alpha.eval(y) * 6.0 * amp * c * c * (3.0 * u * u - 1.0) + b * 36.0 * amp * amp * c * c * s2 * u * u) / c;
        (i_dt, -y * i_dt)
    };
    let u_star = (1.0 - 1e-12 / (3.0 * amp)).sqrt().min(1.0);
    let t_star = u_star.atanh() / c;
    let fine = gauss_legendre(16);
    let coarse = gauss_legendre(8);
    let core = gl_sum(integrand, -u_star, u_star, &fine);
    let tail_r = gl_sum(integrand, u_star, 1.0, &fine);
    let tail_l = gl_sum(integrand, -1.0, -u_star, &fine);
    let m_theta = core.0 + tail_r.0 + tail_l.0;
    let m_h = core.1 + tail_r.1 + tail_l.1;
    let check = gl_sum(integrand, -1.0, 1.0, &coarse);
    let err = (check.0 - m_theta).abs().max((check.1 - m_h).abs());
    let y_s = -amp;
    MelnikovResult {
        theta_value: theta,
        m_theta,
        m_h,
        m_normal: m_h + y_s * m_theta,
        saddle_y: y_s,
        error_estimate: err,
        t_star,
        tail: (tail_r.0 + tail_l.0).abs().max((tail_r.1 + tail_l.1).abs()),
        route: MelnikovRoute::ClosedForm,
    }
}

fn rev_heteroclinic(alpha: &Poly, b: f64, orientation: Orientation) -> MelnikovResult {
    // y = σ·tanh(t/√2), u = tanh(t/√2): dt = √2 du/(1 − u²),
    // ẏ = σ(1 − u²)/√2, ÿ = −y(1 − y²)
    let sigma = match orientation {
        Orientation::Increasing => 1.0,
        Orientation::Decreasing => -1.0,
    };
    let integrand = |u: f64| {
        let y = sigma * u;
        let s2 = 1.0 - u * u;
        let i_dt = std::f64::consts::SQRT_2 * (alpha.eval(y) * (-y) + b * 0.5 * s2);
        (i_dt, -y * i_dt)
    };
    let (m_theta, m_h) = gl_sum(integrand, -1.0, 1.0, &gauss_legendre(16));
    let check = gl_sum(integrand, -1.0, 1.0, &gauss_legendre(8));
    MelnikovResult {
        theta_value: 0.0,
        m_theta,
        m_h,
        m_normal: m_h,
        saddle_y: 0.0,
        error_estimate: (check.0 - m_theta).abs().max((check.1 - m_h).abs()),
        t_star: 0.0,
        tail: 0.0,
        route: MelnikovRoute::Heteroclinic,
    }
}

/// Real roots of a polynomial of degree one or two.
fn low_degree_roots(p: &Poly) -> Vec<f64> {
    let c = &p.0;
    match p.degree() {
        1 => vec![-c[0] / c[1]],
        2 => {
            let (a, b, c0) = (c[2], c[1], c[0]);
            let disc = b * b - 4.0 * a * c0;
            if disc < 0.0 {
                return vec![];
            }
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            let mut r = vec![q / a];
            if q != 0.0 {
                r.push(c0 / q);
            }
            r
        }
        _ => vec![],
    }
}

/// Loop integral along the homoclinic to the window's saddle, over `y`.
///
/// With `P = 2(h_s − V) = (y − y_s)²(y − y_t)·Q` and `−V' = (y − y_s)·g`,
/// the substitution `y = y_t + (y_s − y_t)s²` leaves a smooth integrand in
/// `s ∈ [0, 1]`.
pub fn melnikov_loop(ps: &PlanarSystem, alpha: &Poly, b: f64) -> Result<MelnikovResult> {
    let win = window(ps)?;
    let y_s = win.saddle;
    let v = potential_poly(ps);
    let p2 = Poly(vec![2.0 * ps.potential(y_s)]).add(&v.scale(-2.0));
    let r = p2.deflate(y_s).deflate(y_s);
    let y_t = low_degree_roots(&r)
        .into_iter()
        .filter(|y| (y - win.center) * (y_s - win.center) < 0.0)
        .min_by(|a, b| (a - win.center).abs().total_cmp(&(b - win.center).abs()))
        .ok_or(Error::ThetaOutOfRange { theta: ps.theta_value, lo: admissible_theta(ps.family).0, hi: admissible_theta(ps.family).1 })?;
    let q = r.deflate(y_t);
    let g = v.derivative().scale(-1.0).deflate(y_s);
    let delta = y_s - y_t;
    let sgn = -delta.signum();
    let root = delta.abs().sqrt();

    // (I dt, −y I dt) per ds, for one half of the loop
    let half = |s: f64| {
        let y = y_t + delta * s * s;
        let qa = q.eval(y).abs().max(f64::MIN_POSITIVE);
        let sq = qa.sqrt();
        let t1 = sgn * alpha.eval(y) * g.eval(y) * 2.0 * root / sq;
        let t2 = b * delta.abs() * (1.0 - s * s) * root * s * sq * 2.0 * delta.abs() * s;
        t1 + t2
    };
    let tol = 1e-14;
    let a1 = adaptive(|s| 2.0 * half(s), 0.0, 1.0, tol, tol);
    let a2 = adaptive(|s| -2.0 * (y_t + delta * s * s) * half(s), 0.0, 1.0, tol, tol);
    let (m_theta, m_h) = (a1.value, a2.value);
    Ok(MelnikovResult {
        theta_value: ps.theta_value,
        m_theta,
        m_h,
        m_normal: m_h + y_s * m_theta,
        saddle_y: y_s,
        error_estimate: a1.error.max(a2.error),
        t_star: 0.0,
        tail: 0.0,
        route: MelnikovRoute::Loop,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelnikovZero {
    pub theta: f64,
    pub slope: f64,
    pub simple: bool,
    /// Set when the function vanishes on a whole stretch of the scan; the
    /// zero is then the midpoint.
    pub degenerate_interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroScan {
    pub family: FamilyId,
    pub component: MelnikovComponent,
    pub requested_range: (f64, f64),
    pub effective_range: (f64, f64),
    pub log_spaced: bool,
    pub samples: Vec<MelnikovResult>,
    pub zeros: Vec<MelnikovZero>,
    pub sign_changes: usize,
    pub unique: bool,
}

/// Sign-change scan of one Melnikov component over `Θ`, clipped to the
/// admissible range. Log spacing when the range is positive.
pub fn melnikov_zeros(spec: &FamilySpec, theta_range: (f64, f64), n: usize, component: MelnikovComponent) -> Result<ZeroScan> {
    if n < 16 {
        return Err(Error::InvalidInput(format!("scan needs at least 16 points, got {n}")));
    }
    let fam = IntegrableFamily::try_from(spec.id())?;
    let (alo, ahi) = admissible_theta(fam);
    let shrink = 1e-9 * if ahi.is_finite() { ahi } else { 1.0 };
    let lo = theta_range.0.max(alo + shrink);
    let hi = theta_range.1.min(ahi - shrink);
    if !(lo < hi) {
        return Err(Error::ThetaOutOfRange { theta: theta_range.0, lo: alo, hi: ahi });
    }
    let log_spaced = lo > 0.0;
    let grid: Vec<f64> = (0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            if log_spaced {
                (lo.ln() + f * (hi.ln() - lo.ln())).exp()
            } else {
                lo + f * (hi - lo)
            }
        })
        .collect();
    let samples: Vec<MelnikovResult> = grid.par_iter().map(|&th| melnikov(spec, th)).collect::<Result<_>>()?;
    let vals: Vec<f64> = samples.iter().map(|s| s.component(component)).collect();
    let eval = |th: f64| melnikov(spec, th).map(|r| r.component(component));

    let vmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-12 * (1.0 + vmax);
    let is_zero: Vec<bool> = vals.iter().map(|v| v.abs() <= zero_tol).collect();

    let slope_at = |th: f64| -> Result<f64> {
        let h = 1e-6 * th.abs().max(1.0);
        let (a, b) = ((th - h).max(lo), (th + h).min(hi));
        Ok((eval(b)? - eval(a)?) / (b - a))
    };

    let mut zeros = Vec::new();
    let mut sign_changes = 0;
    let mut i = 0;
    while i < n {
        if is_zero[i] {
            let start = i;
            while i + 1 < n && is_zero[i + 1] {
                i += 1;
            }
            let (a, b) = (grid[start], grid[i]);
            if start == i {
                let slope = slope_at(a)?;
                zeros.push(MelnikovZero { theta: a, slope, simple: slope.abs() > 1e-6, degenerate_interval: None });
                sign_changes += 1;
            } else {
                zeros.push(MelnikovZero { theta: 0.5 * (a + b), slope: 0.0, simple: false, degenerate_interval: Some((a, b)) });
            }
        } else if i + 1 < n && !is_zero[i + 1] && (vals[i] > 0.0) != (vals[i + 1] > 0.0) {
            let (mut a, mut b, mut fa, mut fb) = (grid[i], grid[i + 1], vals[i], vals[i + 1]);
            while b - a > 1e-10 {
                let m = 0.5 * (a + b);
                let fm = eval(m)?;
                if fm == 0.0 {
                    a = m;
                    b = m;
                    fa = 0.0;
                    fb = 0.0;
                    break;
                }
                if (fm > 0.0) == (fa > 0.0) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                    fb = fm;
                }
            }
            let theta = if fa == fb { a } else { a - fa * (b - a) / (fb - fa) };
            let slope = slope_at(theta)?;
            zeros.push(MelnikovZero { theta, slope, simple: slope.abs() > 1e-6, degenerate_interval: None });
            sign_changes += 1;
        }
        i += 1;
    }
    let unique = sign_changes == 1 && zeros.len() == 1;
    Ok(ZeroScan {
        family: spec.id(),
        component,
        requested_range: theta_range,
        effective_range: (lo, hi),
        log_spaced,
        samples,
        zeros,
        sign_changes,
        unique,
    })
}
