//! Dormand-Prince 8(5,3) stepper with the 7th-order dense output.

use super::tableau::{A, B, D, E3, E5, INTERPOLATOR_POWER, STAGES, STAGES_EXTENDED};
use super::Tolerances;
use crate::systems::VectorField;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;
const ERROR_ESTIMATOR_ORDER: i32 = 7;

/// Dense output over one accepted step.
#[derive(Debug, Clone)]
pub struct Segment {
    pub t_old: f64,
    pub t_new: f64,
    y_old: Vec<f64>,
    /// `INTERPOLATOR_POWER` rows of length `n`, stored row-major.
    f: Vec<f64>,
}

impl Segment {
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n = self.y_old.len();
        let h = self.t_new - self.t_old;
        let x = if h == 0.0 { 0.0 } else { (t - self.t_old) / h };
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.f.chunks_exact(n).rev().enumerate() {
            let m = if i % 2 == 0 { x } else { 1.0 - x };
            for (o, r) in out.iter_mut().zip(row) {
                *o = (*o + r) * m;
            }
        }
        for (o, y) in out.iter_mut().zip(&self.y_old) {
            *o += y;
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.y_old.len()];
        self.eval_into(t, &mut out);
        out
    }
}

pub(crate) enum StepOutcome {
    Accepted(Segment),
    /// The proposed step fell below the representable minimum.
    TooSmall,
}

pub(crate) struct Stepper<'a> {
    fun: &'a dyn VectorField,
    pub t: f64,
    pub y: Vec<f64>,
    f: Vec<f64>,
    t_bound: f64,
    direction: f64,
    h_abs: f64,
    rtol: f64,
    atol: f64,
    max_step: f64,
    k: Vec<Vec<f64>>,
    pub nfev: usize,
    pub rejected: usize,
}

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
}

impl<'a> Stepper<'a> {
    pub fn new(
        fun: &'a dyn VectorField,
        t0: f64,
        y0: &[f64],
        t_bound: f64,
        tol: &Tolerances,
    ) -> Self {
        let n = y0.len();
        let f = fun.eval(y0);
        let direction = if t_bound >= t0 { 1.0 } else { -1.0 };
        let mut s = Stepper {
            fun,
            t: t0,
            y: y0.to_vec(),
            f,
            t_bound,
            direction,
            h_abs: 0.0,
            rtol: tol.rel_tol,
            atol: tol.abs_tol,
            max_step: tol.max_step.unwrap_or(f64::INFINITY),
            k: vec![vec![0.0; n]; STAGES_EXTENDED],
            nfev: 1,
            rejected: 0,
        };
        s.h_abs = match tol.first_step {
            Some(h) => h.abs(),
            None => s.initial_step(),
        };
        s
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.y.len();
        let interval = (self.t_bound - self.t).abs();
        if n == 0 {
            return interval;
        }
        let scale: Vec<f64> = self.y.iter().map(|v| self.atol + v.abs() * self.rtol).collect();
        let d0 = rms(self.y.iter().zip(&scale).map(|(v, s)| v / s), n);
        let d1 = rms(self.f.iter().zip(&scale).map(|(v, s)| v / s), n);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(interval);
        let y1: Vec<f64> = self.y.iter().zip(&self.f).map(|(y, f)| y + h0 * self.direction * f).collect();
        let f1 = self.fun.eval(&y1);
        self.nfev += 1;
        let d2 = rms(f1.iter().zip(&self.f).zip(&scale).map(|((a, b), s)| (a - b) / s), n) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / (ERROR_ESTIMATOR_ORDER + 1) as f64)
        };
        (100.0 * h0).min(h1).min(interval)
    }

    pub fn finished(&self) -> bool {
        self.direction * (self.t - self.t_bound) >= 0.0
    }

    /// Advances one accepted step or reports underflow.
    pub fn step(&mut self) -> StepOutcome {
        let n = self.y.len();
        let t = self.t;
        let next = t + self.direction * f64::INFINITY;
        let min_step = 10.0 * (next_after(t, next) - t).abs();
        if self.h_abs > self.max_step {
            self.h_abs = self.max_step;
        } else if self.h_abs < min_step {
            self.h_abs = min_step;
        }
        let mut rejected = false;
        let mut y_new = vec![0.0; n];
        let mut f_new = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        loop {
            if self.h_abs < min_step {
                return StepOutcome::TooSmall;
            }
            let mut t_new = t + self.direction * self.h_abs;
            if self.direction * (t_new - self.t_bound) > 0.0 {
                t_new = self.t_bound;
            }
            let h = t_new - t;
            self.h_abs = h.abs();

            self.k[0].copy_from_slice(&self.f);
            for s in 1..STAGES {
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..s {
                        acc += A[s][j] * self.k[j][i];
                    }
                    tmp[i] = self.y[i] + h * acc;
                }
                let (_, rest) = self.k.split_at_mut(s);
                self.fun.eval_into(&tmp, &mut rest[0]);
            }
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..STAGES {
                    acc += B[j] * self.k[j][i];
                }
                y_new[i] = self.y[i] + h * acc;
            }
            self.fun.eval_into(&y_new, &mut f_new);
            self.k[STAGES].copy_from_slice(&f_new);
            self.nfev += STAGES;

            let mut e5 = 0.0;
            let mut e3 = 0.0;
            for i in 0..n {
                let scale = self.atol + self.y[i].abs().max(y_new[i].abs()) * self.rtol;
                let (mut a5, mut a3) = (0.0, 0.0);
                for j in 0..=STAGES {
                    a5 += E5[j] * self.k[j][i];
                    a3 += E3[j] * self.k[j][i];
                }
                e5 += (a5 / scale).powi(2);
                e3 += (a3 / scale).powi(2);
            }
            let err = if e5 == 0.0 && e3 == 0.0 {
                0.0
            } else {
                h.abs() * e5 / ((e5 + 0.01 * e3) * n as f64).sqrt()
            };

            if err < 1.0 {
                let mut factor = if err == 0.0 { MAX_FACTOR } else { MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT)) };
                if rejected {
                    factor = factor.min(1.0);
                }
                let seg = self.dense_output(t, t_new, &y_new, &f_new);
                self.h_abs *= factor;
                self.t = t_new;
                self.y.copy_from_slice(&y_new);
                self.f.copy_from_slice(&f_new);
                return StepOutcome::Accepted(seg);
            }
            // NaN errors land here too and shrink the step until underflow.
            let shrink = if err.is_nan() { MIN_FACTOR } else { MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT)) };
            self.h_abs *= shrink;
            self.rejected += 1;
            rejected = true;
        }
    }

    fn dense_output(&mut self, t_old: f64, t_new: f64, y_new: &[f64], f_new: &[f64]) -> Segment {
        let n = y_new.len();
        let h = t_new - t_old;
        let mut tmp = vec![0.0; n];
        for s in STAGES + 1..STAGES_EXTENDED {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * self.k[j][i];
                }
                tmp[i] = self.y[i] + h * acc;
            }
            let (_, rest) = self.k.split_at_mut(s);
            self.fun.eval_into(&tmp, &mut rest[0]);
        }
        self.nfev += STAGES_EXTENDED - STAGES - 1;

        let mut f = vec![0.0; INTERPOLATOR_POWER * n];
        for i in 0..n {
            let dy = y_new[i] - self.y[i];
            let f_old = self.k[0][i];
            f[i] = dy;
            f[n + i] = h * f_old - dy;
            f[2 * n + i] = 2.0 * dy - h * (f_new[i] + f_old);
            for (r, drow) in D.iter().enumerate() {
                let mut acc = 0.0;
                for j in 0..STAGES_EXTENDED {
                    acc += drow[j] * self.k[j][i];
                }
                f[(3 + r) * n + i] = h * acc;
            }
        }
        Segment { t_old, t_new, y_old: self.y.clone(), f }
    }
}

fn next_after(x: f64, toward: f64) -> f64 {
    if x.is_nan() || toward.is_nan() {
        return f64::NAN;
    }
    if x == toward {
        return toward;
    }
    if x == 0.0 {
        let tiny = f64::from_bits(1);
        return if toward > 0.0 { tiny } else { -tiny };
    }
    let bits = x.to_bits();
    let up = (toward > x) == (x > 0.0);
    f64::from_bits(if up { bits + 1 } else { bits - 1 })
}
