//! First integrals `Θ`, `H` of the unperturbed third-order families, the
//! scaled chart `(τ, H̃)`, and the planar reduction at fixed `Θ`.
//!
//! | family       | Θ               | H                              | V(y) at fixed Θ         |
//! |--------------|-----------------|--------------------------------|-------------------------|
//! | `tb-2.4`     | ÿ + y²/2        | ẏ²/2 − yÿ − y³/3               | −Θy + y³/6              |
//! | `rev-tb-2.5` | ÿ + y − y³      | −ÿy + ẏ²/2 + 3y⁴/4 − y²/2      | −Θy + y²/2 − y⁴/4       |
//!
//! In both cases `H = p²/2 + V(y)` with `p = ẏ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::systems::{FamilyId, VectorField};

/// `(2/3)√2`: `|H̃|` on the equilibrium line of `tb-2.4`.
pub const H_TILDE_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2 / 3.0;

/// `2√3/9`: largest `|Θ|` with three planar equilibria for `rev-tb-2.5`.
pub const REV_THETA_MAX: f64 = 0.384_900_179_459_750_5;

/// Lower end of `Θ` scans in the scaled chart.
pub const THETA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegrableFamily {
    Tb24,
    RevTb25,
}

impl TryFrom<FamilyId> for IntegrableFamily {
    type Error = Error;

    fn try_from(id: FamilyId) -> Result<Self> {
        match id {
            FamilyId::Tb24 => Ok(IntegrableFamily::Tb24),
            FamilyId::RevTb25 => Ok(IntegrableFamily::RevTb25),
            other => Err(Error::UnsupportedFamily { op: "first integrals", family: other.as_str() }),
        }
    }
}

impl From<IntegrableFamily> for FamilyId {
    fn from(f: IntegrableFamily) -> Self {
        match f {
            IntegrableFamily::Tb24 => FamilyId::Tb24,
            IntegrableFamily::RevTb25 => FamilyId::RevTb25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralPair {
    pub theta: f64,
    pub hamiltonian: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledCoords {
    pub tau: f64,
    pub h_tilde: f64,
}

fn check_state(state: &[f64]) -> Result<()> {
    if state.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: state.len() });
    }
    Ok(())
}

pub fn theta(family: FamilyId, state: &[f64]) -> Result<f64> {
    let f = IntegrableFamily::try_from(family)?;
    check_state(state)?;
    let (y, w) = (state[0], state[2]);
    Ok(match f {
        IntegrableFamily::Tb24 => w + 0.5 * y * y,
        IntegrableFamily::RevTb25 => w + y - y * y * y,
    })
}

pub fn hamiltonian(family: FamilyId, state: &[f64]) -> Result<f64> {
    let f = IntegrableFamily::try_from(family)?;
    check_state(state)?;
    let (y, v, w) = (state[0], state[1], state[2]);
    Ok(match f {
        IntegrableFamily::Tb24 => 0.5 * v * v - y * w - y * y * y / 3.0,
        IntegrableFamily::RevTb25 => -w * y + 0.5 * v * v + 0.75 * y.powi(4) - 0.5 * y * y,
    })
}

pub fn integrals(family: FamilyId, state: &[f64]) -> Result<IntegralPair> {
    Ok(IntegralPair { theta: theta(family, state)?, hamiltonian: hamiltonian(family, state)? })
}

/// `τ = log Θ`, `H̃ = H·exp(−1.5 log Θ)`; only for `Θ > 0`.
pub fn scaled_coords(family: FamilyId, state: &[f64]) -> Result<ScaledCoords> {
    let p = integrals(family, state)?;
    scale_pair(p)
}

pub fn scale_pair(p: IntegralPair) -> Result<ScaledCoords> {
    if !(p.theta > 0.0) {
        return Err(Error::OutOfChart { theta: p.theta });
    }
    let tau = p.theta.ln();
    Ok(ScaledCoords { tau, h_tilde: p.hamiltonian * (-1.5 * tau).exp() })
}

/// Largest deviation of `(Θ, H)` from their initial values, sampled on the
/// dense output every 0.01 time units.
pub fn conservation_drift(traj: &Trajectory, family: FamilyId) -> Result<(f64, f64)> {
    let (_, states) = traj.resample(0.01);
    let p0 = integrals(family, &states[0])?;
    let mut out = (0.0f64, 0.0f64);
    for s in &states {
        let p = integrals(family, s)?;
        out.0 = out.0.max((p.theta - p0.theta).abs());
        out.1 = out.1.max((p.hamiltonian - p0.hamiltonian).abs());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanarKind {
    Center,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarEquilibrium {
    pub y: f64,
    pub kind: PlanarKind,
    /// `V(y)`, the level of the point.
    pub energy: f64,
}

/// The region of closed orbits around a planar center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicWindow {
    pub center: f64,
    pub h_center: f64,
    /// The saddle whose level bounds the window.
    pub saddle: f64,
    pub h_separatrix: f64,
}

/// One-degree-of-freedom system `ẏ = p`, `ṗ = −V'(y)` at fixed `Θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarSystem {
    pub family: IntegrableFamily,
    pub theta_value: f64,
}

pub fn planar_reduce(family: FamilyId, theta_value: f64) -> Result<PlanarSystem> {
    let family = IntegrableFamily::try_from(family)?;
    if !theta_value.is_finite() {
        return Err(Error::InvalidInput("theta must be finite".into()));
    }
    Ok(PlanarSystem { family, theta_value })
}

/// Real roots of `y³ − y + θ = 0`, ascending.
fn cubic_roots(theta: f64) -> Vec<f64> {
    // y = (2/√3) cos(φ) substitution for three real roots
    let k = 2.0 / 3f64.sqrt();
    let arg = -theta * 3.0 * 3f64.sqrt() / 2.0;
    if arg.abs() <= 1.0 {
        let phi = arg.acos() / 3.0;
        let mut r: Vec<f64> = (0..3).map(|i| k * (phi - 2.0 * std::f64::consts::PI * i as f64 / 3.0).cos()).collect();
        r.sort_by(f64::total_cmp);
        // one Newton polish each
        for y in r.iter_mut() {
            let d = 3.0 * *y * *y - 1.0;
            if d != 0.0 {
                *y -= (*y * *y * *y - *y + theta) / d;
            }
        }
        r
    } else {
        // single real root via the hyperbolic form
        let s = if arg > 0.0 { 1.0 } else { -1.0 };
        let y = s * k * (arg.abs().acosh() / 3.0).cosh();
        vec![y]
    }
}

impl PlanarSystem {
    pub fn potential(&self, y: f64) -> f64 {
        let t = self.theta_value;
        match self.family {
            IntegrableFamily::Tb24 => -t * y + y * y * y / 6.0,
            IntegrableFamily::RevTb25 => -t * y + 0.5 * y * y - 0.25 * y.powi(4),
        }
    }

    pub fn dpotential(&self, y: f64) -> f64 {
        let t = self.theta_value;
        match self.family {
            IntegrableFamily::Tb24 => -t + 0.5 * y * y,
            IntegrableFamily::RevTb25 => -t + y - y * y * y,
        }
    }

    pub fn d2potential(&self, y: f64) -> f64 {
        match self.family {
            IntegrableFamily::Tb24 => y,
            IntegrableFamily::RevTb25 => 1.0 - 3.0 * y * y,
        }
    }

    pub fn force(&self, y: f64) -> f64 {
        -self.dpotential(y)
    }

    pub fn energy(&self, y: f64, p: f64) -> f64 {
        0.5 * p * p + self.potential(y)
    }

    /// The third-order state `(y, p, ÿ)` on the level `Θ`.
    pub fn embed(&self, y: f64, p: f64) -> [f64; 3] {
        [y, p, self.force(y)]
    }

    pub fn equilibria(&self) -> Vec<PlanarEquilibrium> {
        let t = self.theta_value;
        let ys = match self.family {
            IntegrableFamily::Tb24 if t > 0.0 => {
                let a = (2.0 * t).sqrt();
                vec![-a, a]
            }
            IntegrableFamily::Tb24 if t == 0.0 => vec![0.0],
            IntegrableFamily::Tb24 => vec![],
            IntegrableFamily::RevTb25 => cubic_roots(t),
        };
        ys.into_iter()
            .map(|y| {
                let c = self.d2potential(y);
                let kind = if c > 0.0 {
                    PlanarKind::Center
                } else if c < 0.0 {
                    PlanarKind::Saddle
                } else {
                    PlanarKind::Degenerate
                };
                PlanarEquilibrium { y, kind, energy: self.potential(y) }
            })
            .collect()
    }

    /// Center and bounding separatrix level, if closed orbits exist.
    pub fn periodic_window(&self) -> Option<PeriodicWindow> {
        let eq = self.equilibria();
        let center = eq.iter().find(|e| e.kind == PlanarKind::Center)?;
        let saddle = eq
            .iter()
            .filter(|e| e.kind == PlanarKind::Saddle)
            .min_by(|a, b| a.energy.total_cmp(&b.energy))?;
        Some(PeriodicWindow { center: center.y, h_center: center.energy, saddle: saddle.y, h_separatrix: saddle.energy })
    }
}

impl VectorField for PlanarSystem {
    fn dim(&self) -> usize {
        2
    }

    fn eval_into(&self, s: &[f64], out: &mut [f64]) {
        out[0] = s[1];
        out[1] = self.force(s[0]);
    }
}

/// Closed-form `tb-2.4` homoclinic at level `Θ > 0`, centered at `t = 0`:
/// `y = A(3 sech²(ct) − 1)`, `A = √(2Θ)`, `c = (2Θ)^{1/4}/2`.
/// Returns `(y, ẏ, ÿ)`.
pub fn tb24_homoclinic(theta_value: f64, t: f64) -> [f64; 3] {
    let a = (2.0 * theta_value).sqrt();
    let c = 0.5 * a.sqrt();
    let th = (c * t).tanh();
    let s2 = 1.0 - th * th;
    let y = a * (3.0 * s2 - 1.0);
    let v = -6.0 * a * c * s2 * th;
    [y, v, theta_value - 0.5 * y * y]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate, Tolerances};
    use crate::systems::{make_family, Params};

    #[test]
    fn theta_and_h_examples() {
        assert_eq!(theta(FamilyId::Tb24, &[2.0, 0.0, 0.0]).unwrap(), 2.0);
        let y = 1.0 / 3f64.sqrt();
        assert!((theta(FamilyId::RevTb25, &[y, 0.0, 0.0]).unwrap() - REV_THETA_MAX).abs() < 1e-15);
        assert!((2.0 * 3f64.sqrt() / 9.0 - REV_THETA_MAX).abs() < 1e-16);
        assert_eq!(theta(FamilyId::RevTb25, &[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(hamiltonian(FamilyId::RevTb25, &[1.0, 0.0, 0.0]).unwrap(), 0.25);
        assert!((hamiltonian(FamilyId::RevTb25, &[y, 0.0, 0.0]).unwrap() + 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(hamiltonian(FamilyId::Tb24, &[3.0, 0.0, 0.0]).unwrap(), -9.0);
        assert!(matches!(theta(FamilyId::Hopf23, &[0.0; 3]), Err(Error::UnsupportedFamily { .. })));
    }

    #[test]
    fn scaled_boundaries() {
        let s = scaled_coords(FamilyId::Tb24, &[1.0, 0.0, 0.0]).unwrap();
        assert!((s.h_tilde + H_TILDE_BOUND).abs() < 1e-15);
        assert!((s.tau - 0.5f64.ln()).abs() < 1e-15);
        let s = scaled_coords(FamilyId::Tb24, &[-1.0, 0.0, 0.0]).unwrap();
        assert!((s.h_tilde - H_TILDE_BOUND).abs() < 1e-15);
        assert!(matches!(scaled_coords(FamilyId::Tb24, &[0.0, 0.0, -1.0]), Err(Error::OutOfChart { .. })));
    }

    #[test]
    fn h_is_planar_energy() {
        for fam in [FamilyId::Tb24, FamilyId::RevTb25] {
            for &(y, p, th) in &[(0.3, -0.2, 0.5), (-1.1, 0.7, 0.1), (2.0, 0.0, -0.2)] {
                let ps = planar_reduce(fam, th).unwrap();
                let s = ps.embed(y, p);
                assert!((theta(fam, &s).unwrap() - th).abs() < 1e-14);
                assert!((hamiltonian(fam, &s).unwrap() - ps.energy(y, p)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn planar_equilibria() {
        let p = planar_reduce(FamilyId::Tb24, 0.5).unwrap();
        let eq = p.equilibria();
        assert_eq!(eq.len(), 2);
        assert_eq!((eq[0].y, eq[0].kind), (-1.0, PlanarKind::Saddle));
        assert_eq!((eq[1].y, eq[1].kind), (1.0, PlanarKind::Center));
        assert!((eq[1].energy + 1.0 / 3.0).abs() < 1e-15);
        let w = p.periodic_window().unwrap();
        assert!((w.h_separatrix - 1.0 / 3.0).abs() < 1e-15);

        let r = planar_reduce(FamilyId::RevTb25, 0.0).unwrap();
        let eq = r.equilibria();
        let ys: Vec<f64> = eq.iter().map(|e| e.y).collect();
        assert!((ys[0] + 1.0).abs() < 1e-15 && ys[1].abs() < 1e-15 && (ys[2] - 1.0).abs() < 1e-15);
        assert_eq!(eq[1].kind, PlanarKind::Center);
        assert!((eq[0].energy - 0.25).abs() < 1e-15 && (eq[2].energy - 0.25).abs() < 1e-15);

        for th in [-0.3, -0.1, 0.05, 0.38] {
            let r = planar_reduce(FamilyId::RevTb25, th).unwrap();
            for e in r.equilibria() {
                assert!(r.dpotential(e.y).abs() < 1e-14);
            }
        }
        assert_eq!(planar_reduce(FamilyId::RevTb25, 0.5).unwrap().equilibria().len(), 1);
    }

    #[test]
    fn homoclinic_closed_form_residual() {
        for th in [0.1, 0.5, 2.0] {
            let a = (2.0f64 * th).sqrt();
            let c = 0.5 * a.sqrt();
            for k in -400..=400 {
                let t = k as f64 * 0.05;
                let [_, _, w] = tb24_homoclinic(th, t);
                // second derivative from the sech² form
                let th_ = (c * t).tanh();
                let s2 = 1.0 - th_ * th_;
                let ydd = a * 6.0 * c * c * s2 * (3.0 * th_ * th_ - 1.0);
                assert!((ydd - w).abs() < 1e-12 * (1.0 + w.abs()));
            }
            let far = tb24_homoclinic(th, 60.0);
            assert!((far[0] + a).abs() < 1e-12);
        }
    }

    #[test]
    fn conservation_along_integrable_flow() {
        let spec = make_family(FamilyId::Tb24, &Params::from_pairs(&[("eps", 0.0), ("lambda", 1.0), ("b", 0.0)])).unwrap();
        let tr = integrate(&spec, &[0.5, 0.3, 0.1], (0.0, 100.0), &Tolerances::default()).unwrap();
        let (dt, dh) = conservation_drift(&tr, FamilyId::Tb24).unwrap();
        assert!(dt < 1e-8 && dh < 1e-8, "{dt} {dh}");
        let spec = make_family(FamilyId::Tb24, &Params::from_pairs(&[("eps", 0.05), ("lambda", 1.0), ("b", 0.0)])).unwrap();
        let tr = integrate(&spec, &[0.5, 0.3, 0.1], (0.0, 20.0), &Tolerances::default()).unwrap();
        let (dt, _) = conservation_drift(&tr, FamilyId::Tb24).unwrap();
        assert!(dt > 1e-4);
    }
}
