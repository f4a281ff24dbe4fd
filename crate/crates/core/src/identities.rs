//! Quadrature checks of the integration-by-parts identities behind the
//! kernel composition `i g alpha int K2(t,s) e^{-alpha s} K1(s,r) ds`.
//!
//! Each check evaluates the integral by adaptive quadrature and compares it
//! with two closed forms: the simplified one and the one obtained
//! by carrying the boundary and remainder terms of the integration by parts
//! (`corrected`).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::mode::{k1_eval, KernelK1};
use crate::params::VortexParams;
use crate::quad::integrate;
use crate::resolvent::{k2_eval, KernelK2, SpectralPoint};
use crate::C64;

const QUAD_TOL: f64 = 1e-13;
const MAX_INTERVALS: usize = 200_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentitySample {
    pub t: f64,
    pub r: Option<f64>,
    pub mu: f64,
    pub quadrature: [f64; 2],
    pub simplified: [f64; 2],
    pub corrected: [f64; 2],
    pub err_simplified: f64,
    pub err_corrected: f64,
    pub quad_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub skipped: bool,
    pub samples: Vec<IdentitySample>,
    pub max_err_simplified: f64,
    pub max_err_corrected: f64,
}

impl IdentityReport {
    fn new(name: &str, samples: Vec<IdentitySample>) -> Self {
        let max_err_simplified = samples.iter().map(|s| s.err_simplified).fold(0.0, f64::max);
        let max_err_corrected = samples.iter().map(|s| s.err_corrected).fold(0.0, f64::max);
        Self { name: name.to_string(), skipped: false, samples, max_err_simplified, max_err_corrected }
    }

    fn skipped(name: &str) -> Self {
        Self { name: name.to_string(), skipped: true, samples: Vec::new(), max_err_simplified: 0.0, max_err_corrected: 0.0 }
    }
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn sample(t: f64, r: Option<f64>, mu: f64, quad: C64, qerr: f64, simplified: C64, corrected: C64) -> IdentitySample {
    IdentitySample {
        t,
        r,
        mu,
        quadrature: pair(quad),
        simplified: pair(simplified),
        corrected: pair(corrected),
        err_simplified: (quad - simplified).norm(),
        err_corrected: (quad - corrected).norm(),
        quad_error: qerr,
    }
}

/// Phase integrand `e^{i g e^{-alpha s}} e^{-c s}`.
fn osc(g: f64, alpha: f64, c: f64) -> impl Fn(f64) -> C64 {
    move |s| C64::from_polar((-c * s).exp(), g * (-alpha * s).exp())
}

/// Upper cutoff where `e^{-c (s - t)}` has fallen below `1e-18`.
fn cutoff(t: f64, c: f64) -> f64 {
    t + 42.0 / c
}

/// `int_t^inf e^{i g e^{-alpha s} - alpha s} e^{-mu s} ds` against
/// `e^{i g e^{-alpha t}} e^{-mu t}/(i g alpha)` (simplified) and the same minus
/// `mu/(i g alpha) int_t^inf e^{i g e^{-alpha s}} e^{-mu s} ds` (corrected).
pub fn verify_neat_half_line(points: &[(f64, f64)], params: &VortexParams, k: u32) -> Result<IdentityReport> {
    let g = params.phase_amp(k);
    let a = params.alpha();
    let name = "half_line_identity";
    if g == 0.0 {
        return Ok(IdentityReport::skipped(name));
    }
    let iga = C64::new(0.0, g * a);
    let mut out = Vec::with_capacity(points.len());
    for &(t, mu) in points {
        if !(mu > 0.0) {
            return domain(format!("half-line identity needs mu > 0, got {mu}"));
        }
        let lhs = integrate(osc(g, a, a + mu), t, cutoff(t, a + mu), QUAD_TOL, QUAD_TOL, MAX_INTERVALS);
        let rest = integrate(osc(g, a, mu), t, cutoff(t, mu), QUAD_TOL, QUAD_TOL, MAX_INTERVALS);
        let bdry = osc(g, a, mu)(t);
        let simplified = bdry / iga;
        let corrected = (bdry - rest.value * mu) / iga;
        out.push(sample(t, None, mu, lhs.value, lhs.error + rest.error, simplified, corrected));
    }
    Ok(IdentityReport::new(name, out))
}

/// Finite-interval version on `[t, r]`, any real `mu`.
pub fn verify_neat_interval(points: &[(f64, f64, f64)], params: &VortexParams, k: u32) -> Result<IdentityReport> {
    let g = params.phase_amp(k);
    let a = params.alpha();
    let name = "interval_identity";
    if g == 0.0 {
        return Ok(IdentityReport::skipped(name));
    }
    let iga = C64::new(0.0, g * a);
    let mut out = Vec::with_capacity(points.len());
    for &(t, r, mu) in points {
        let lhs = integrate(osc(g, a, a + mu), t, r, QUAD_TOL, QUAD_TOL, MAX_INTERVALS);
        let rest = integrate(osc(g, a, mu), t, r, QUAD_TOL, QUAD_TOL, MAX_INTERVALS);
        let bdry = osc(g, a, mu)(t) - osc(g, a, mu)(r);
        let simplified = bdry / iga;
        let corrected = (bdry - rest.value * mu) / iga;
        out.push(sample(t, Some(r), mu, lhs.value, lhs.error + rest.error, simplified, corrected));
    }
    Ok(IdentityReport::new(name, out))
}

/// `i g alpha int K2(t,s) e^{-alpha s} K1(s,r) ds` against `K1(t,r)` (simplified)
/// and `K1(t,r) + int K2(t,s) (d/ds - B) K1(s,r) ds` (corrected).
pub fn verify_kernel_composition(
    points: &[(f64, f64)],
    params: &VortexParams,
    k: u32,
    lambda: SpectralPoint,
) -> Result<IdentityReport> {
    let name = "kernel_composition";
    if params.phase_amp(k) == 0.0 {
        return Ok(IdentityReport::skipped(name));
    }
    let k1 = KernelK1::for_params(params, k)?;
    let k2 = KernelK2::new(params, k, lambda)?;
    let a = params.alpha();
    let iga = C64::new(0.0, params.phase_amp(k) * a);
    let mut out = Vec::with_capacity(points.len());
    for &(t, r) in points {
        let end = cutoff(t.max(r), k2.b.re);
        let lhs_f = |s: f64| k2_eval(t, s, &k2) * (-a * s).exp() * k1_eval(s, r, &k1);
        let rem_f = |s: f64| {
            let x = s - r;
            let dk = if x > 0.0 { -k1.a_plus * (-k1.a_plus * x).exp() } else { k1.a_minus * (k1.a_minus * x).exp() };
            k2_eval(t, s, &k2) * (C64::new(dk, 0.0) - k2.b * k1_eval(s, r, &k1))
        };
        // split at the kink of K1: the two pieces are the F1/F2 parts
        let mut lhs = C64::new(0.0, 0.0);
        let mut rem = C64::new(0.0, 0.0);
        let mut err = 0.0;
        let cuts: Vec<f64> = if r > t { vec![t, r, end] } else { vec![t, end] };
        for w in cuts.windows(2) {
            let p = integrate(lhs_f, w[0], w[1], QUAD_TOL, QUAD_TOL, MAX_INTERVALS);
            let q = integrate(rem_f, w[0], w[1], QUAD_TOL, QUAD_TOL, MAX_INTERVALS);
            lhs += p.value;
            rem += q.value;
            err += p.error + q.error;
        }
        let lhs = lhs * iga;
        let kv = C64::new(k1_eval(t, r, &k1), 0.0);
        out.push(sample(t, Some(r), 0.0, lhs, err, kv, kv + rem));
    }
    Ok(IdentityReport::new(name, out))
}
