//! Homogeneous mode equation: the `z = -i mk r^{-alpha}` reduction to a
//! third-order hypergeometric ODE, series evaluation of the regularized
//! `2F2`, and a shooting test for integrable homogeneous solutions.
//!
//! Throughout, `beta = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::params::VortexParams;
use crate::resolvent::SpectralPoint;
use crate::special::{is_gamma_pole, rgamma};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homo2Params {
    pub a1: C64,
    pub a2: C64,
    pub b1: C64,
    pub b2: C64,
    pub q_frak: f64,
    pub k: u32,
    pub m: u32,
    pub alpha: f64,
    pub lambda: C64,
}

pub fn homo2_params(params: &VortexParams, k: u32, lambda: C64) -> Result<Homo2Params> {
    if k == 0 {
        return domain("the hypergeometric reduction needs k >= 1");
    }
    let a = params.alpha();
    let s = params.mk(k);
    let disc = a * a - 2.0 * a + s * s;
    let q_frak = disc.sqrt() / a;
    Ok(Homo2Params {
        a1: C64::new(-s / a - q_frak, 0.0),
        a2: C64::new(-s / a + q_frak, 0.0),
        b1: C64::new((a - 2.0 * s) / a, 0.0),
        b2: (2.0 - s + a * lambda) / a,
        q_frak,
        k,
        m: params.m(),
        alpha: a,
        lambda,
    })
}

impl Homo2Params {
    /// Same ODE family with every parameter shifted by one (derivative identity).
    fn shifted(&self) -> Self {
        Self { a1: self.a1 + 1.0, a2: self.a2 + 1.0, b1: self.b1 + 1.0, b2: self.b2 + 1.0, ..*self }
    }

    pub fn with_abz(a1: C64, a2: C64, b1: C64, b2: C64) -> Self {
        Self { a1, a2, b1, b2, q_frak: f64::NAN, k: 0, m: 0, alpha: f64::NAN, lambda: C64::new(0.0, 0.0) }
    }
}

pub const SERIES_TERM_BUDGET: usize = 20_000;

/// Regularized `2F2(a1, a2; b1, b2; z)` by its power series.
pub fn eval_2f2_reg(p: &Homo2Params, z: C64) -> Result<C64> {
    let (a1, a2, b1, b2) = (p.a1, p.a2, p.b1, p.b2);
    // terms with a reciprocal-gamma pole vanish; past the last pole the ratio recursion is safe
    let last_pole = [b1, b2].iter().filter(|b| b.im == 0.0 && b.re <= 0.0).map(|b| (-b.re).floor() as usize).max();
    let min_terms = last_pole.map_or(0, |n| n + 2).max((2.0 * z.norm()) as usize + 2);
    let mut poch = C64::new(1.0, 0.0); // (a1)_n (a2)_n z^n / n!
    let mut term = rgamma(b1) * rgamma(b2);
    let mut sum = term;
    let mut small = 0;
    for n in 0..SERIES_TERM_BUDGET {
        let nf = n as f64;
        let ratio = (a1 + nf) * (a2 + nf) * z / (nf + 1.0);
        poch *= ratio;
        let restart = is_gamma_pole(b1 + nf) || is_gamma_pole(b2 + nf) || last_pole.is_some_and(|l| n <= l);
        term = if restart {
            poch * rgamma(b1 + nf + 1.0) * rgamma(b2 + nf + 1.0)
        } else {
            term * ratio / ((b1 + nf) * (b2 + nf))
        };
        sum += term;
        if n + 1 >= min_terms && term.norm() <= 1e-16 * sum.norm() {
            small += 1;
            if small == 3 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::Numerical(format!("2F2 series did not converge in {SERIES_TERM_BUDGET} terms at z = {z}")))
}

/// `w, w', w'', w'''` through `d/dz 2F2~(a; b; z) = a1 a2 2F2~(a + 1; b + 1; z)`.
pub fn eval_2f2_reg_derivs(p: &Homo2Params, z: C64) -> Result<[C64; 4]> {
    let mut out = [C64::new(0.0, 0.0); 4];
    let mut cur = *p;
    let mut scale = C64::new(1.0, 0.0);
    for o in out.iter_mut() {
        *o = scale * eval_2f2_reg(&cur, z)?;
        scale *= cur.a1 * cur.a2;
        cur = cur.shifted();
    }
    Ok(out)
}

/// Terms of `z^2 w''' + z(1 - z + b1 + b2) w'' + (b1 b2 - z(a1 + a2 + 1)) w' - a1 a2 w`.
fn homo2_terms(p: &Homo2Params, z: C64, w: [C64; 4]) -> [C64; 4] {
    [
        z * z * w[3],
        z * (1.0 - z + p.b1 + p.b2) * w[2],
        (p.b1 * p.b2 - z * (p.a1 + p.a2 + 1.0)) * w[1],
        -p.a1 * p.a2 * w[0],
    ]
}

fn relative(terms: &[C64]) -> f64 {
    let s: C64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.norm()).sum();
    if scale == 0.0 {
        0.0
    } else {
        s.norm() / scale
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OdeResidual {
    pub z: f64,
    /// Using the analytic derivative identity.
    pub analytic: f64,
    /// Using sixth-order central differences.
    pub finite_difference: f64,
}

/// Default difference step relative to `z`; small enough for `w ~ z^{16}` near the origin.
pub const FD_STEP_REL: f64 = 0.005;

/// Relative residual of the third-order ODE for `w = 2F2~` at real `z`;
/// the difference step is `h_rel * z`.
pub fn homo2_residual(p: &Homo2Params, z: f64, h_rel: f64) -> Result<OdeResidual> {
    let h = h_rel * z;
    let zc = C64::new(z, 0.0);
    let exact = eval_2f2_reg_derivs(p, zc)?;
    let analytic = relative(&homo2_terms(p, zc, exact));
    let mut f = [C64::new(0.0, 0.0); 9];
    for (j, v) in f.iter_mut().enumerate() {
        *v = eval_2f2_reg(p, C64::new(z + (j as f64 - 4.0) * h, 0.0))?;
    }
    // sixth-order central differences
    let d1 = (-f[1] + f[2] * 9.0 - f[3] * 45.0 + f[5] * 45.0 - f[6] * 9.0 + f[7]) / (60.0 * h);
    let d2 = (f[1] * 2.0 - f[2] * 27.0 + f[3] * 270.0 - f[4] * 490.0 + f[5] * 270.0 - f[6] * 27.0 + f[7] * 2.0)
        / (180.0 * h * h);
    let d3 = (-f[0] * 7.0 + f[1] * 72.0 - f[2] * 338.0 + f[3] * 488.0 - f[5] * 488.0 + f[6] * 338.0 - f[7] * 72.0
        + f[8] * 7.0)
        / (240.0 * h * h * h);
    let fd = relative(&homo2_terms(p, zc, [f[4], d1, d2, d3]));
    Ok(OdeResidual { z, analytic, finite_difference: fd })
}

/// Relative residual of the radial homogeneous equation
/// `(r/alpha) D' + (1 - lambda) D - i mk r^{-alpha} D - i mk alpha(2-alpha) r^{-2-alpha} f = 0`,
/// `D = f'' + f'/r - (mk)^2 f / r^2`, for `f(r) = r^{mk} w(-i mk r^{-alpha})`.
pub fn homogode_residual(p: &Homo2Params, r: f64) -> Result<f64> {
    let a = p.alpha;
    let s = (p.m * p.k) as f64;
    let z = C64::new(0.0, -s) * r.powf(-a);
    let w = eval_2f2_reg_derivs(p, z)?;
    // theta = z d/dz; r d/dr = -alpha theta on functions of z
    let th1 = z * w[1];
    let th2 = z * z * w[2] + z * w[1];
    let th3 = z * z * z * w[3] + 3.0 * z * z * w[2] + z * w[1];
    // r^{2-mk} D = (alpha^2 theta^2 - 2 mk alpha theta) w
    let d = a * a * th2 - 2.0 * s * a * th1;
    let th_d = a * a * th3 - 2.0 * s * a * th2;
    // r^{2-mk} r D' = (mk - 2) D - alpha theta D
    let drift = ((s - 2.0) * d - a * th_d) / a;
    let terms = [
        drift,
        (1.0 - p.lambda) * d,
        C64::new(0.0, -s) * r.powf(-a) * d,
        C64::new(0.0, -s) * a * (2.0 - a) * r.powf(-a) * w[0],
    ];
    Ok(relative(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NoIntegrableSolution,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::NoIntegrableSolution => "no_integrable_solution",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootingResult {
    pub lambda: SpectralPoint,
    pub k: u32,
    /// `|det|` of the normalized connection matrix at `t = 0`.
    pub mismatch: f64,
    /// `ln |det|` of the unnormalized connection matrix.
    pub log_abs_det: f64,
    pub verdict: Verdict,
    pub analytic: bool,
    pub steps: usize,
    pub diagnostics: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ShootConfig {
    /// Left end; `None` picks the point where the phase rate reaches `phase_rate`.
    pub t_left: Option<f64>,
    pub t_right: Option<f64>,
    pub phase_rate: f64,
    pub rtol: f64,
    pub threshold: f64,
    pub max_steps: usize,
    /// Multipliers on the first left and the right initial vectors.
    pub left_scale: f64,
    pub right_scale: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            t_left: None,
            t_right: None,
            phase_rate: 200.0,
            rtol: 1e-10,
            threshold: 1e-6,
            max_steps: 2_000_000,
            left_scale: 1.0,
            right_scale: 1.0,
        }
    }
}

type V3 = [C64; 3];

struct System {
    b: C64,
    alpha: f64,
    g: f64,
    c1: f64,
    c0: f64,
}

impl System {
    // y = (U, psi, psi')
    fn rhs(&self, t: f64, y: &V3) -> V3 {
        let e = self.g * (-self.alpha * t).exp();
        let a = self.alpha;
        [
            (self.b + C64::new(0.0, a * e)) * y[0] + C64::new(0.0, a * a * (2.0 - a) * e) * y[1],
            y[2],
            y[0] - self.c1 * y[2] - self.c0 * y[1],
        ]
    }
}

fn dot(a: &V3, b: &V3) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn nrm(a: &V3) -> f64 {
    dot(a, a).re.sqrt()
}

/// Orthonormalize in place, returning `ln |R_ii|` summed.
fn qr(cols: &mut [V3]) -> f64 {
    let mut log = 0.0;
    for i in 0..cols.len() {
        for j in 0..i {
            let p = dot(&cols[j], &cols[i]);
            let cj = cols[j];
            for (x, y) in cols[i].iter_mut().zip(&cj) {
                *x -= p * y;
            }
        }
        let n = nrm(&cols[i]);
        log += n.ln();
        for x in cols[i].iter_mut() {
            *x /= n;
        }
    }
    log
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrates the columns from `t0` to `t1`, re-orthonormalizing after every step.
fn integrate(sys: &System, cols: &mut Vec<V3>, t0: f64, t1: f64, cfg: &ShootConfig) -> Result<(f64, usize)> {
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut log = qr(cols);
    let rate = |t: f64| sys.g * sys.alpha * (-sys.alpha * t).exp() + sys.b.norm() + 1.0 + sys.c1.abs();
    let mut h = dir * 0.1 / rate(t);
    let mut steps = 0;
    while (t1 - t) * dir > 0.0 {
        if steps >= cfg.max_steps {
            return Err(Error::Numerical(format!("step budget exhausted at t = {t:.3}")));
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let mut err = 0.0f64;
        let mut next = cols.clone();
        for (col, out) in cols.iter().zip(next.iter_mut()) {
            let mut ks = [[C64::new(0.0, 0.0); 3]; 7];
            for s in 0..7 {
                let mut y = *col;
                for (j, kj) in ks.iter().enumerate().take(s) {
                    for i in 0..3 {
                        y[i] += kj[i] * (h * A[s][j]);
                    }
                }
                ks[s] = sys.rhs(t + C[s] * h, &y);
            }
            let mut y5 = *col;
            let mut e = [C64::new(0.0, 0.0); 3];
            for s in 0..7 {
                for i in 0..3 {
                    y5[i] += ks[s][i] * (h * B5[s]);
                    e[i] += ks[s][i] * (h * (B5[s] - B4[s]));
                }
            }
            err = err.max(nrm(&e) / (cfg.rtol * nrm(col).max(nrm(&y5))));
            *out = y5;
        }
        if !err.is_finite() {
            return Err(Error::Numerical(format!("non-finite state at t = {t:.3}")));
        }
        if err <= 1.0 {
            t += h;
            *cols = next;
            log += qr(cols);
            steps += 1;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h.abs() < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::Numerical(format!("step size underflow at t = {t:.3}")));
        }
    }
    Ok((log, steps))
}

fn det3(a: &V3, b: &V3, c: &V3) -> C64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1]) + c[0] * (a[1] * b[2] - a[2] * b[1])
}

/// Decides whether the homogeneous mode equation has a nontrivial solution
/// decaying at both ends, by matching the two-dimensional left-decaying
/// subspace against the right-decaying solution at `t = 0`.
pub fn shoot_homogeneous(params: &VortexParams, k: u32, lambda: SpectralPoint, cfg: &ShootConfig) -> Result<ShootingResult> {
    let p = params.with_beta(1.0);
    let a0 = p.a0();
    if !(lambda.lambda1 > a0) {
        return domain(format!("shooting needs Re lambda > a0 = {a0}"));
    }
    let lam = C64::new(lambda.lambda1, lambda.lambda2);
    let alpha = p.alpha();
    let b = alpha * (lam - a0);
    if k == 0 {
        // U = c e^{B t} grows at +infinity since Re B > 0
        return Ok(ShootingResult {
            lambda,
            k,
            mismatch: 1.0,
            log_abs_det: 0.0,
            verdict: Verdict::NoIntegrableSolution,
            analytic: true,
            steps: 0,
            diagnostics: Some("k = 0: only solution is c e^{Bt}, unbounded as t -> +inf".into()),
        });
    }
    let s = p.mk(k);
    let q = p.q();
    let g = p.phase_amp(k);
    let sys = System { b, alpha, g, c1: 4.0 - 4.0 / q, c0: (2.0 - 2.0 / q).powi(2) - s * s };
    let t_left = cfg.t_left.unwrap_or_else(|| (-(cfg.phase_rate / g).ln() / alpha).min(-2.0));
    let t_right = cfg.t_right.unwrap_or_else(|| ((g * 1e10).ln() / alpha).max(30.0 / (s + 2.0 - 2.0 / q)));
    let r_plus = -(2.0 - 2.0 / q) + (s * s - alpha * (2.0 - alpha)).sqrt();
    let a_plus = s + 2.0 - 2.0 / q;
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let mut left = vec![
        [one * cfg.left_scale, z, z],
        [C64::new(-alpha * (2.0 - alpha), 0.0), one, C64::new(r_plus, 0.0)],
    ];
    let mut right = vec![[z, one * cfg.right_scale, C64::new(-a_plus * cfg.right_scale, 0.0)]];
    let inconclusive = |e: Error| ShootingResult {
        lambda,
        k,
        mismatch: f64::NAN,
        log_abs_det: f64::NAN,
        verdict: Verdict::Inconclusive,
        analytic: false,
        steps: 0,
        diagnostics: Some(e.to_string()),
    };
    let (log_l, steps_l) = match integrate(&sys, &mut left, t_left, 0.0, cfg) {
        Ok(v) => v,
        Err(e) => return Ok(inconclusive(e)),
    };
    let (log_r, steps_r) = match integrate(&sys, &mut right, t_right, 0.0, cfg) {
        Ok(v) => v,
        Err(e) => return Ok(inconclusive(e)),
    };
    let mismatch = det3(&left[0], &left[1], &right[0]).norm();
    let verdict = if mismatch > cfg.threshold { Verdict::NoIntegrableSolution } else { Verdict::Inconclusive };
    Ok(ShootingResult {
        lambda,
        k,
        mismatch,
        log_abs_det: mismatch.ln() + log_l + log_r,
        verdict,
        analytic: false,
        steps: steps_l + steps_r,
        diagnostics: None,
    })
}

/// The 5 x 5 probe lattice `lambda1 = a0 + {0.8, ..., 4}`, `lambda2 = -2..2`.
pub fn shooting_lattice(a0: f64) -> Vec<SpectralPoint> {
    let mut out = Vec::with_capacity(25);
    for i in 1..=5 {
        for j in -2..=2 {
            out.push(SpectralPoint { lambda1: a0 + 0.8 * i as f64, lambda2: j as f64 });
        }
    }
    out
}

pub fn shooting_csv(results: &[ShootingResult]) -> String {
    let mut s = String::from("k,re_lambda,im_lambda,mismatch,verdict\n");
    for r in results {
        s.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{}\n",
            r.k, r.lambda.lambda1, r.lambda.lambda2, r.mismatch, r.verdict
        ));
    }
    s
}
