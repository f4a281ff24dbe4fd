//! Background profile and the physical/self-similar change of frame.
//!
//! Self-similar variables: `xi = x t^{-1/alpha}`, `tau = ln t`, with
//! `Omega(xi, tau) = e^tau omega(e^{tau/alpha} xi, e^tau)` and
//! `V(xi, tau) = e^{tau(1 - 1/alpha)} v(e^{tau/alpha} xi, e^tau)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexParams {
    alpha: f64,
    beta: f64,
    m: u32,
    q: f64,
}

impl VortexParams {
    pub fn new(alpha: f64, beta: f64, m: u32, q: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return domain(format!("alpha must lie in (0,1), got {alpha}"));
        }
        if !beta.is_finite() {
            return domain("beta must be finite");
        }
        if m < 2 {
            return domain(format!("m must be at least 2, got {m}"));
        }
        // small slack so that q = 2/alpha typed in decimal is accepted
        if !(q >= 2.0 && alpha * q <= 2.0 + 1e-12) {
            return domain(format!("q must lie in [2, 2/alpha], got q={q}, alpha={alpha}"));
        }
        Ok(Self { alpha, beta, m, q })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Stability exponent `1 - 2/(alpha q)`.
    pub fn a0(&self) -> f64 {
        a0_of(self)
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..*self }
    }

    /// `m k`, the angular wavenumber of mode `k`.
    pub fn mk(&self, k: u32) -> f64 {
        f64::from(self.m) * f64::from(k)
    }

    /// Amplitude `m k beta` of the phase `e^{-i m k beta e^{-alpha t}}`.
    pub fn phase_amp(&self, k: u32) -> f64 {
        self.mk(k) * self.beta
    }

    /// Bound `2 alpha (2 - alpha) / (2mk (mk - 2 + 2/q))` on the Fredholm coupling.
    pub fn contraction(&self, k: u32) -> f64 {
        contraction_factor(self.alpha, self.q, self.m, k)
    }

    /// `alpha (2 - alpha) / (2 m k)`, the coefficient in front of `Phi1`.
    pub fn coupling(&self, k: u32) -> f64 {
        self.alpha * (2.0 - self.alpha) / (2.0 * self.mk(k))
    }
}

impl Default for VortexParams {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 1.0, m: 2, q: 2.0 }
    }
}

pub fn a0_of(p: &VortexParams) -> f64 {
    1.0 - 2.0 / (p.alpha * p.q)
}

pub fn contraction_factor(alpha: f64, q: f64, m: u32, k: u32) -> f64 {
    let mk = f64::from(m) * f64::from(k);
    2.0 * alpha * (2.0 - alpha) / (2.0 * mk * (mk - 2.0 + 2.0 / q))
}

fn pow(rho: f64, e: f64) -> f64 {
    (e * rho.ln()).exp()
}

pub fn omega_bar(rho: f64, p: &VortexParams) -> Result<f64> {
    if !(rho > 0.0) {
        return domain(format!("profile is singular at rho={rho}"));
    }
    Ok(p.beta * (2.0 - p.alpha) * pow(rho, -p.alpha))
}

/// Azimuthal velocity of the background vortex.
pub fn v_bar(rho: f64, p: &VortexParams) -> Result<f64> {
    if !(rho > 0.0) {
        return domain(format!("profile is singular at rho={rho}"));
    }
    Ok(p.beta * pow(rho, 1.0 - p.alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarPoint {
    pub xi: [f64; 2],
    pub tau: f64,
}

impl SelfSimilarPoint {
    pub fn from_polar(rho: f64, theta: f64, tau: f64) -> Result<Self> {
        if !(rho >= 0.0) {
            return domain("rho must be nonnegative");
        }
        Ok(Self { xi: [rho * theta.cos(), rho * theta.sin()], tau })
    }

    pub fn rho(&self) -> f64 {
        self.xi[0].hypot(self.xi[1])
    }

    /// Angle in `[0, 2 pi)`.
    pub fn theta(&self) -> f64 {
        self.xi[1].atan2(self.xi[0]).rem_euclid(std::f64::consts::TAU)
    }

    /// Physical position and time of this point.
    pub fn to_physical(&self, alpha: f64) -> ([f64; 2], f64) {
        let s = (self.tau / alpha).exp();
        ([self.xi[0] * s, self.xi[1] * s], self.tau.exp())
    }

    pub fn from_physical(x: [f64; 2], t: f64, alpha: f64) -> Result<Self> {
        if !(t > 0.0) {
            return domain(format!("physical time must be positive, got {t}"));
        }
        let tau = t.ln();
        let s = (-tau / alpha).exp();
        Ok(Self { xi: [x[0] * s, x[1] * s], tau })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Vorticity,
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Physical,
    SelfSimilar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToSelfSimilar,
    ToPhysical,
}

/// A pointwise field value. Vorticity uses `value[0]` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub value: [f64; 2],
    pub kind: FieldKind,
    pub frame: Frame,
}

impl FieldSample {
    pub fn vorticity(w: f64, frame: Frame) -> Self {
        Self { value: [w, 0.0], kind: FieldKind::Vorticity, frame }
    }
    pub fn velocity(v: [f64; 2], frame: Frame) -> Self {
        Self { value: v, kind: FieldKind::Velocity, frame }
    }
}

/// Rescale a field value between frames at physical time `t_phys`.
///
/// The position is not part of the sample: the caller evaluates the source
/// field at `x = xi t^{1/alpha}` (or the reverse) and this only applies the
/// amplitude factor.
pub fn map_field(
    sample: FieldSample,
    t_phys: f64,
    alpha: f64,
    direction: Direction,
) -> Result<FieldSample> {
    if !(t_phys > 0.0) {
        return domain(format!("physical time must be positive, got {t_phys}"));
    }
    let (from, to) = match direction {
        Direction::ToSelfSimilar => (Frame::Physical, Frame::SelfSimilar),
        Direction::ToPhysical => (Frame::SelfSimilar, Frame::Physical),
    };
    if sample.frame != from {
        return usage(format!("sample is in frame {:?}, expected {:?}", sample.frame, from));
    }
    let tau = t_phys.ln();
    let log_scale = match sample.kind {
        FieldKind::Vorticity => tau,
        FieldKind::Velocity => tau * (1.0 - 1.0 / alpha),
    };
    let s = match direction {
        Direction::ToSelfSimilar => log_scale.exp(),
        Direction::ToPhysical => (-log_scale).exp(),
    };
    Ok(FieldSample { value: [sample.value[0] * s, sample.value[1] * s], kind: sample.kind, frame: to })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(alpha: f64, beta: f64, q: f64) -> VortexParams {
        VortexParams::new(alpha, beta, 2, q).unwrap()
    }

    #[test]
    fn a0_values() {
        assert_eq!(p(0.5, 1.0, 2.0).a0(), -1.0);
        assert_eq!(p(0.5, 1.0, 4.0).a0(), 0.0);
        assert_eq!(p(0.25, 1.0, 2.0).a0(), -3.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(VortexParams::new(1.0, 1.0, 2, 2.0).is_err());
        assert!(VortexParams::new(0.5, 1.0, 1, 2.0).is_err());
        assert!(VortexParams::new(0.5, 1.0, 2, 4.5).is_err());
        assert!(VortexParams::new(0.5, 1.0, 2, 1.5).is_err());
    }

    #[test]
    fn profiles() {
        let pp = p(0.5, 1.0, 2.0);
        assert!((omega_bar(1.0, &pp).unwrap() - 1.5).abs() < 1e-15);
        assert!((omega_bar(4.0, &pp).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(omega_bar(1.0, &p(0.5, 0.0, 2.0)).unwrap(), 0.0);
        assert!((v_bar(1.0, &pp).unwrap() - 1.0).abs() < 1e-15);
        assert!((v_bar(4.0, &p(0.5, 2.0, 2.0)).unwrap() - 4.0).abs() < 1e-14);
        assert!(omega_bar(0.0, &pp).is_err());
        assert!(v_bar(-1.0, &pp).is_err());
    }

    #[test]
    fn curl_of_velocity_is_vorticity() {
        let pp = p(0.5, 1.0, 2.0);
        let rho = 2.0;
        let d = 1e-4;
        let g = |r: f64| r * v_bar(r, &pp).unwrap();
        let curl = (g(rho + d) - g(rho - d)) / (2.0 * d) / rho;
        assert!((curl - 1.5 * 2f64.powf(-0.5)).abs() < 1e-8);
        assert!((curl - 1.060_66).abs() < 1e-5);
    }

    #[test]
    fn map_field_identity_at_unit_time() {
        let s = FieldSample::vorticity(3.25, Frame::Physical);
        let out = map_field(s, 1.0, 0.5, Direction::ToSelfSimilar).unwrap();
        assert_eq!(out.value[0], 3.25);
        assert_eq!(out.frame, Frame::SelfSimilar);
    }

    #[test]
    fn self_similar_ansatz_is_fixed() {
        // omega(x,t) = t^{-1} g(x t^{-1/alpha}) maps to g(xi)
        let alpha = 0.4;
        let g = |xi: [f64; 2]| (-(xi[0] * xi[0] + 2.0 * xi[1] * xi[1])).exp();
        let xi = [0.3, -0.7];
        for t in [0.01, 0.5, 3.0, 100.0] {
            let pt = SelfSimilarPoint { xi, tau: f64::ln(t) };
            let (x, tp) = pt.to_physical(alpha);
            let back = SelfSimilarPoint::from_physical(x, tp, alpha).unwrap();
            let w = g(back.xi) / tp;
            let out = map_field(FieldSample::vorticity(w, Frame::Physical), tp, alpha, Direction::ToSelfSimilar)
                .unwrap();
            assert!((out.value[0] - g(xi)).abs() < 1e-12 * g(xi).max(1e-300));
        }
    }

    #[test]
    fn frame_mismatch_and_bad_time() {
        let s = FieldSample::vorticity(1.0, Frame::SelfSimilar);
        assert!(map_field(s, 2.0, 0.5, Direction::ToSelfSimilar).is_err());
        assert!(map_field(s, 0.0, 0.5, Direction::ToPhysical).is_err());
    }

    #[test]
    fn polar_round_trip() {
        let pt = SelfSimilarPoint::from_polar(2.0, 5.5, 0.1).unwrap();
        assert!((pt.rho() - 2.0).abs() < 1e-14);
        assert!((pt.theta() - 5.5).abs() < 1e-14);
    }
}
