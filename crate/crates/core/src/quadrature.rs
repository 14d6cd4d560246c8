//! Gauss-Legendre rules, adaptive Gauss-Kronrod, and a small polynomial type.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Composite Gauss-Legendre over `panels` equal panels of `[a, b]`.
pub fn composite_gl(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for k in 0..panels {
        let lo = a + h * k as f64;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            s += w * f(mid + 0.5 * h * x);
        }
        sum += 0.5 * h * s;
    }
    sum
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = WGK[7] * fc;
    let mut rg = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Globally adaptive G7-K15 quadrature: bisects the worst interval until
/// the summed error estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> QuadResult {
    let (val, err) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, val, err });
    let (mut total, mut total_err) = (val, err);
    let max_intervals = 4000;
    while total_err > abs_tol.max(rel_tol * total.abs()) && heap.len() < max_intervals {
        let p = heap.pop().expect("nonempty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.val;
        total_err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, val: v2, err: e2 });
    }
    // resum to shed the drift of incremental updates
    let value = heap.iter().map(|p| p.val).sum();
    let error = heap.iter().map(|p| p.err).sum();
    QuadResult { value, error, intervals: heap.len() }
}

/// Dense polynomial, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly((0..n).map(|i| self.0.get(i).unwrap_or(&0.0) + o.0.get(i).unwrap_or(&0.0)).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    /// Quotient by `(x - r)`, remainder dropped.
    pub fn deflate(&self, r: f64) -> Poly {
        let n = self.0.len();
        if n <= 1 {
            return Poly(vec![0.0]);
        }
        let mut q = vec![0.0; n - 1];
        let mut acc = self.0[n - 1];
        for k in (0..n - 1).rev() {
            q[k] = acc;
            acc = self.0[k] + acc * r;
        }
        Poly(q)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|c| *c != 0.0).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_degree_2n_minus_1() {
        for n in [1, 2, 5, 8, 20, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            for d in [deg - 1, deg] {
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d + 1) as f64 };
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                assert!((got - exact).abs() < 1e-13, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn kronrod_rule_exactness() {
        // K15 integrates degree 22 exactly, G7 degree 13.
        let (v, _) = gk15(&|x: f64| x.powi(22), -1.0, 1.0);
        assert!((v - 2.0 / 23.0).abs() < 1e-15);
        let (v, e) = gk15(&|x: f64| x.powi(12) + x.powi(3), -1.0, 1.0);
        assert!((v - 2.0 / 13.0).abs() < 1e-15 && e < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = adaptive(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-13, 1e-13);
        assert!((r.value - 2.0).abs() < 1e-10, "{r:?}");
        let r = adaptive(|x: f64| (x * 50.0).sin().powi(2), 0.0, PI, 1e-14, 1e-14);
        assert!((r.value - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_deflation() {
        // (x - 1)(x + 2)(x - 3)
        let p = Poly(vec![1.0, -2.0, 1.0]).mul(&Poly(vec![2.0, 1.0])).deflate(1.0);
        // p was (x-1)^2 (x+2); deflated once leaves (x-1)(x+2)
        assert_eq!(p, Poly(vec![-2.0, 1.0, 1.0]));
        assert_eq!(p.eval(1.0), 0.0);
        assert_eq!(p.derivative(), Poly(vec![1.0, 2.0]));
    }
}
