//! Resolvent of one mode for `Re lambda > a0`.
//!
//! The transformed mode equation is `(L - lambda) U = G` with
//! `L U = (1/alpha) U' + a0 U - i g e^{-alpha t} U + i g kappa e^{-alpha t} Phi1(U)`,
//! `g = mk beta`, `kappa = alpha (2 - alpha)/(2mk)`. Integrating the first-order
//! part from `+inf` gives `U = -alpha Phi2(G) + i g alpha kappa Phi2(e^{-alpha s} Phi1 U)`
//! with `K2(t,s) = exp(-i g e^{-alpha t} + i g e^{-alpha s} + (t - s) B)`, `s > t`,
//! and `B = 2/q + alpha (lambda - 1) = alpha (lambda - a0)`.
//!
//! `Phi2` uses the product-moment recursion
//! `X_c = e^{-B h} X_{c+1} + int_cell e^{(t_c - s) B} e^{i g e^{-alpha s}} F(s) ds`,
//! `Phi2(F)(t_c) = e^{-i g e^{-alpha t_c}} X_c`.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Error, Result};
use crate::grid::{lq_norm_samples, LogGrid, ModeFunction, Rep};
use crate::mode::{derivatives, phase_factors, psi_with, KernelK1, Phi1};
use crate::params::VortexParams;
use crate::quad::{cell_weights, gauss_legendre, stencil_offsets, Phase};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl SpectralPoint {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        Self { lambda1, lambda2 }
    }
    pub fn value(&self) -> C64 {
        C64::new(self.lambda1, self.lambda2)
    }
}

impl From<C64> for SpectralPoint {
    fn from(z: C64) -> Self {
        Self { lambda1: z.re, lambda2: z.im }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelK2 {
    pub k: u32,
    pub params: VortexParams,
    pub lambda: SpectralPoint,
    /// Drift exponent `B`.
    pub b: C64,
    /// Phase amplitude `mk beta`.
    pub phase_amp: f64,
}

impl KernelK2 {
    pub fn new(params: &VortexParams, k: u32, lambda: SpectralPoint) -> Result<Self> {
        let a0 = params.a0();
        if !(lambda.lambda1 > a0) {
            return domain(format!("Re lambda = {} must exceed a0 = {a0}", lambda.lambda1));
        }
        let b = C64::new(2.0 / params.q(), 0.0) + (lambda.value() - 1.0) * params.alpha();
        Ok(Self { k, params: *params, lambda, b, phase_amp: params.phase_amp(k) })
    }

    fn phase(&self) -> Option<Phase> {
        (self.phase_amp != 0.0).then_some(Phase {
            gamma: self.phase_amp.abs(),
            alpha: self.params.alpha(),
            sign: self.phase_amp.signum(),
        })
    }

    /// The Young bound `1/Re B`.
    pub fn young_bound(&self) -> f64 {
        1.0 / self.b.re
    }
}

pub fn k2_eval(t: f64, s: f64, kernel: &KernelK2) -> C64 {
    if s <= t {
        return C64::new(0.0, 0.0);
    }
    let a = kernel.params.alpha();
    let g = kernel.phase_amp;
    let ph = -g * (-a * t).exp() + g * (-a * s).exp();
    (kernel.b * (t - s) + C64::new(0.0, ph)).exp()
}

#[derive(Debug, Clone)]
pub struct Phi2 {
    pub grid: LogGrid,
    b: C64,
    phase: Option<Phase>,
    starts: Vec<usize>,
    offsets: Vec<[f64; 4]>,
    w: Vec<[C64; 4]>,
    out: Vec<C64>,
}

impl Phi2 {
    pub fn new(grid: LogGrid, kernel: &KernelK2) -> Self {
        Self::build(grid, kernel.b, kernel.phase())
    }

    /// Same phase, drift exponent `b` instead of `B`.
    pub(crate) fn build(grid: LogGrid, b: C64, phase: Option<Phase>) -> Self {
        let n = grid.n();
        let h = grid.h();
        let mut starts = Vec::with_capacity(n - 1);
        let mut offsets = Vec::with_capacity(n - 1);
        let mut w = Vec::with_capacity(n - 1);
        for c in 0..n - 1 {
            let (s0, d) = stencil_offsets(c, n);
            starts.push(s0);
            offsets.push(d);
            w.push(cell_weights(grid.t(c), h, d, -b, phase));
        }
        let out = phase_factors(&grid, phase, -1.0);
        Self { grid, b, phase, starts, offsets, w, out }
    }

    fn moments(&self, f: &[C64]) -> Vec<C64> {
        let n = self.grid.n();
        assert_eq!(f.len(), n, "sample count does not match the grid");
        let e = (-self.b * self.grid.h()).exp();
        let mut x = vec![C64::new(0.0, 0.0); n];
        for c in (0..n - 1).rev() {
            let w = &self.w[c];
            let s0 = self.starts[c];
            x[c] = x[c + 1] * e + w[0] * f[s0] + w[1] * f[s0 + 1] + w[2] * f[s0 + 2] + w[3] * f[s0 + 3];
        }
        x
    }

    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        let x = self.moments(f);
        x.iter().zip(&self.out).map(|(a, b)| a * b).collect()
    }

    /// `int_{t0}^{t_max} e^{(t0 - s) b} e^{i g e^{-alpha s}} F(s) ds`.
    pub fn moment_at(&self, f: &[C64], t0: f64) -> C64 {
        let g = &self.grid;
        let h = g.h();
        let x = self.moments(f);
        let c = (((t0 - g.t_min()) / h).floor().max(0.0) as usize).min(g.n() - 2);
        let tb = g.t(c + 1);
        let mut acc = x[c + 1] * (self.b * (t0 - tb)).exp();
        if tb > t0 {
            let (xs, ws) = gauss_legendre(16);
            let d = self.offsets[c];
            let s0 = self.starts[c];
            for (xi, wi) in xs.iter().zip(&ws) {
                let s = t0 + 0.5 * (tb - t0) * (xi + 1.0);
                let u = (s - g.t(c)) / h;
                let mut val = C64::new(0.0, 0.0);
                for j in 0..4 {
                    let mut l = 1.0;
                    for m in 0..4 {
                        if m != j {
                            l *= (u - d[m]) / (d[j] - d[m]);
                        }
                    }
                    val += f[s0 + j] * l;
                }
                let ph = self.phase.map_or(0.0, |p| p.value(s));
                acc += val * (self.b * (t0 - s) + C64::new(0.0, ph)).exp() * (0.5 * (tb - t0) * wi);
            }
        }
        acc
    }

    /// Pointwise majorant: the same quadrature with kernel `e^{(t-s) Re B}`.
    pub fn majorant(&self, f: &[C64]) -> Vec<f64> {
        let abs: Vec<C64> = f.iter().map(|z| C64::new(z.norm(), 0.0)).collect();
        Phi2::build(self.grid, C64::new(self.b.re, 0.0), None).apply(&abs).iter().map(|z| z.re).collect()
    }

    pub fn matrix(&self) -> Mat<C64> {
        let n = self.grid.n();
        let e = (-self.b * self.grid.h()).exp();
        let mut mat = Mat::<C64>::zeros(n, n);
        for i in 0..n - 1 {
            let mut f = self.out[i];
            for c in i..n - 1 {
                let s0 = self.starts[c];
                for j in 0..4 {
                    mat[(i, s0 + j)] += self.w[c][j] * f;
                }
                f *= e;
                if f.norm() < 1e-300 {
                    break;
                }
            }
        }
        mat
    }
}

pub fn apply_phi2(g: &ModeFunction, kernel: &KernelK2) -> Result<ModeFunction> {
    let op = Phi2::new(g.grid, kernel);
    g.with_samples(g.rep, op.apply(g.samples()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedPointMap {
    /// `U -> -alpha Phi2(G) + i g alpha kappa Phi2(e^{-alpha s} Phi1 U)`.
    Composed,
    /// `U -> -alpha Phi2(G) + kappa Phi1(U)`, the simplified form; kept for comparison.
    Simplified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    pub tol: f64,
    pub residual_tol: f64,
    pub max_iter: usize,
    pub map: FixedPointMap,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { tol: 1e-10, residual_tol: 1e-7, max_iter: 200, map: FixedPointMap::Composed }
    }
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub u: ModeFunction,
    /// `None` for `k = 0`.
    pub psi: Option<ModeFunction>,
    pub c1: C64,
    pub c2: C64,
    pub c3: C64,
    pub iterations: usize,
    pub residual: f64,
    /// The a-priori coupling bound `gamma` (zero for `k = 0`).
    pub contraction: f64,
    /// Relative update after each application of the map.
    pub updates: Vec<f64>,
}

/// Largest phase increment per cell counted as resolved. Non-oscillating parts
/// of `U` pick up `e^{i phi}` in the phase-compensated frame, so interpolation
/// and difference errors there scale like `(phi' h)^4`.
pub const MAX_PHASE_STEP: f64 = 0.05;

/// Margins kept free at the left and right ends of a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pad {
    pub left: f64,
    pub right: f64,
}

impl From<f64> for Pad {
    fn from(x: f64) -> Self {
        Pad { left: x, right: x }
    }
}

/// Points where `e^{-i g e^{-alpha t}}` is resolved (`|phi'| h <= MAX_PHASE_STEP`),
/// at least `pad.left` past the resolution limit and the left end and at least
/// `pad.right` before the right end.
pub fn resolved_interior(grid: &LogGrid, params: &VortexParams, k: u32, pad: impl Into<Pad>) -> (usize, usize) {
    let pad = pad.into();
    let h = grid.h();
    let n = grid.n();
    let mut lo = ((pad.left / h).ceil() as usize).min(n);
    let hi = n.saturating_sub((pad.right / h).ceil() as usize);
    let g = params.phase_amp(k).abs();
    if g > 0.0 {
        let a = params.alpha();
        let rate = MAX_PHASE_STEP / (a * g * h);
        let t_res = -rate.ln() / a + pad.left;
        let first = ((t_res - grid.t_min()) / h).ceil().max(0.0) as usize;
        lo = lo.max(first);
    }
    (lo.min(hi), hi)
}

/// Twenty decay lengths of the matching tail of `K1` on each side (U to the
/// left of `t` reaches `psi(t)` through `e^{-A+ x}`, from the right through
/// `e^{-A- x}`), or one unit for `k = 0`.
pub fn default_pad(params: &VortexParams, k: u32) -> Pad {
    if k == 0 {
        Pad::from(1.0)
    } else {
        let mk = params.mk(k);
        let q = params.q();
        Pad { left: 20.0 / (mk + 2.0 - 2.0 / q), right: 20.0 / (mk - 2.0 + 2.0 / q) }
    }
}

fn check_g(g: &ModeFunction, k: u32) -> Result<()> {
    if g.rep != Rep::G {
        return usage(format!("right-hand side must have rep G, got {}", g.rep));
    }
    if g.k != k {
        return usage(format!("right-hand side is mode {}, solver asked for mode {k}", g.k));
    }
    Ok(())
}

/// Relative `L^q` residual of `(L - lambda) U - G` on the resolved interior;
/// NaN when that interior is empty.
pub fn mode_residual(
    u: &[C64],
    g: &ModeFunction,
    lambda: SpectralPoint,
    k: u32,
    params: &VortexParams,
    phi1: Option<&Phi1>,
) -> f64 {
    let grid = g.grid;
    let a = params.alpha();
    let gam = params.phase_amp(k);
    let lam = lambda.value();
    // differentiate V = e^{i phi} U, which is smooth where U oscillates
    let ph: Vec<f64> = (0..grid.n()).map(|i| gam * (-a * grid.t(i)).exp()).collect();
    let v: Vec<C64> = u.iter().zip(&ph).map(|(z, p)| z * C64::from_polar(1.0, *p)).collect();
    let (dv, _) = derivatives(&v, grid.h());
    let coupled = phi1.map(|op| op.apply(u));
    let kap = if k == 0 { 0.0 } else { params.coupling(k) };
    let (lo, hi) = resolved_interior(&grid, params, k, default_pad(params, k));
    if hi < lo + 8 {
        // nothing left to check: the grid is too short or too coarse for this mode
        return f64::NAN;
    }
    let res: Vec<C64> = (lo..hi)
        .map(|i| {
            let mut r = C64::from_polar(1.0, -ph[i]) * (dv[i] / a + v[i] * (params.a0() - lam));
            if let Some(c) = &coupled {
                r += C64::new(0.0, gam * kap * (-a * grid.t(i)).exp()) * c[i];
            }
            r - g.samples()[i]
        })
        .collect();
    let den = lq_norm_samples(g.samples(), grid.h(), params.q());
    if den == 0.0 {
        return lq_norm_samples(&res, grid.h(), params.q());
    }
    lq_norm_samples(&res, grid.h(), params.q()) / den
}

/// `k = 0`: `U = -alpha Phi2(G)` with no phase.
pub fn solve_k0(g: &ModeFunction, lambda: SpectralPoint, params: &VortexParams) -> Result<ResolventSolution> {
    check_g(g, 0)?;
    let kernel = KernelK2::new(params, 0, lambda)?;
    let op = Phi2::new(g.grid, &kernel);
    let a = params.alpha();
    let u: Vec<C64> = op.apply(g.samples()).into_iter().map(|z| -z * a).collect();
    let c1 = -op.moment_at(g.samples(), 0.0) * a;
    let residual = mode_residual(&u, g, lambda, 0, params, None);
    Ok(ResolventSolution {
        u: g.with_samples(Rep::U, u)?,
        psi: None,
        c1,
        c2: C64::new(0.0, 0.0),
        c3: C64::new(0.0, 0.0),
        iterations: 0,
        residual,
        contraction: 0.0,
        updates: Vec::new(),
    })
}

/// Operators for one `(k, lambda)` on one grid.
pub struct ModeOperators {
    pub params: VortexParams,
    pub k: u32,
    pub lambda: SpectralPoint,
    pub phi1: Phi1,
    pub phi2: Phi2,
    /// `e^{-alpha t_j}`.
    decay: Vec<f64>,
}

impl ModeOperators {
    pub fn new(grid: LogGrid, params: &VortexParams, k: u32, lambda: SpectralPoint) -> Result<Self> {
        if k == 0 {
            return usage("mode operators are built for k >= 1; use solve_k0");
        }
        let k2 = KernelK2::new(params, k, lambda)?;
        let k1 = KernelK1::for_params(params, k)?;
        let a = params.alpha();
        Ok(Self {
            params: *params,
            k,
            lambda,
            phi1: Phi1::with_phase(grid, k1, params),
            phi2: Phi2::new(grid, &k2),
            decay: (0..grid.n()).map(|i| (-a * grid.t(i)).exp()).collect(),
        })
    }

    /// Linear part of the fixed-point map.
    pub fn coupling_map(&self, u: &[C64], map: FixedPointMap) -> Vec<C64> {
        let kap = self.params.coupling(self.k);
        let p1 = self.phi1.apply(u);
        match map {
            FixedPointMap::Simplified => p1.into_iter().map(|z| z * kap).collect(),
            FixedPointMap::Composed => {
                let f: Vec<C64> = p1.iter().zip(&self.decay).map(|(z, d)| z * d).collect();
                let c = C64::new(0.0, self.params.phase_amp(self.k) * self.params.alpha() * kap);
                self.phi2.apply(&f).into_iter().map(|z| z * c).collect()
            }
        }
    }

    /// Same map through the integration-by-parts form
    /// `kappa (Phi1 U + Phi2((d/dt - B) Phi1 U))`, with the derivative taken exactly.
    pub fn coupling_map_ibp(&self, u: &[C64]) -> Vec<C64> {
        let kap = self.params.coupling(self.k);
        let parts = self.phi1.parts(u);
        let (ap, am) = (self.phi1.kernel.a_plus, self.phi1.kernel.a_minus);
        let b = KernelK2::new(&self.params, self.k, self.lambda).map(|k| k.b).unwrap_or_default();
        let f: Vec<C64> = parts.p.iter().zip(&parts.m).map(|(p, m)| -p * ap + m * am - (p + m) * b).collect();
        let second = self.phi2.apply(&f);
        parts.p.iter().zip(&parts.m).zip(&second).map(|((p, m), s)| (p + m + s) * kap).collect()
    }

    pub fn source(&self, g: &[C64]) -> Vec<C64> {
        let a = self.params.alpha();
        self.phi2.apply(g).into_iter().map(|z| -z * a).collect()
    }

    /// Dense `(I - T)`; used as a cross-check of the iteration.
    pub fn dense_system(&self, map: FixedPointMap) -> Mat<C64> {
        let n = self.phi1.grid.n();
        let kap = self.params.coupling(self.k);
        let m1 = self.phi1.matrix();
        let t = match map {
            FixedPointMap::Simplified => Mat::from_fn(n, n, |i, j| m1[(i, j)] * kap),
            FixedPointMap::Composed => {
                let c = C64::new(0.0, self.params.phase_amp(self.k) * self.params.alpha() * kap);
                let scaled = Mat::from_fn(n, n, |i, j| m1[(i, j)] * self.decay[i]);
                let m2 = self.phi2.matrix();
                let prod = &m2 * &scaled;
                Mat::from_fn(n, n, |i, j| prod[(i, j)] * c)
            }
        };
        Mat::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) - t[(i, j)] } else { -t[(i, j)] })
    }
}

pub fn solve_mode_dense(g: &ModeFunction, lambda: SpectralPoint, k: u32, params: &VortexParams) -> Result<Vec<C64>> {
    check_g(g, k)?;
    let ops = ModeOperators::new(g.grid, params, k, lambda)?;
    let sys = ops.dense_system(FixedPointMap::Composed);
    let rhs = ops.source(g.samples());
    let n = rhs.len();
    let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
    let x = sys.partial_piv_lu().solve(&b);
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

pub fn solve_mode(
    g: &ModeFunction,
    lambda: SpectralPoint,
    k: u32,
    params: &VortexParams,
    cfg: &SolveConfig,
) -> Result<ResolventSolution> {
    solve_mode_from(g, lambda, k, params, cfg, None)
}

/// Picard iteration from `-alpha Phi2(G)`, or from `start` when given.
pub fn solve_mode_from(
    g: &ModeFunction,
    lambda: SpectralPoint,
    k: u32,
    params: &VortexParams,
    cfg: &SolveConfig,
    start: Option<&[C64]>,
) -> Result<ResolventSolution> {
    if k == 0 {
        return usage("solve_mode needs k >= 1; use solve_k0");
    }
    check_g(g, k)?;
    let ops = ModeOperators::new(g.grid, params, k, lambda)?;
    let q = params.q();
    let h = g.grid.h();
    let base = ops.source(g.samples());
    let mut u = start.map_or_else(|| base.clone(), <[C64]>::to_vec);
    let mut updates = Vec::new();
    let mut iterations = 0;
    let contraction = params.contraction(k);
    loop {
        if iterations >= cfg.max_iter {
            return Err(Error::Numerical(format!(
                "fixed point did not converge in {} iterations (gamma = {contraction:.6e}, updates = {:?})",
                cfg.max_iter,
                updates.iter().rev().take(5).collect::<Vec<_>>()
            )));
        }
        let t = ops.coupling_map(&u, cfg.map);
        let next: Vec<C64> = base.iter().zip(&t).map(|(a, b)| a + b).collect();
        let diff: Vec<C64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let nn = lq_norm_samples(&next, h, q);
        let upd = if nn == 0.0 { 0.0 } else { lq_norm_samples(&diff, h, q) / nn };
        u = next;
        iterations += 1;
        updates.push(upd);
        if upd < cfg.tol {
            break;
        }
    }
    let residual = mode_residual(&u, g, lambda, k, params, Some(&ops.phi1));
    let u_fn = g.with_samples(Rep::U, u)?;
    let ps = psi_with(&ops.phi1, &u_fn)?;
    let c1 = c1_functional(&ops, g, &ps.psi)?;
    Ok(ResolventSolution {
        u: u_fn,
        psi: Some(ps.psi),
        c1,
        c2: ps.c2,
        c3: ps.c3,
        iterations,
        residual,
        contraction,
        updates,
    })
}

/// `c1 = -alpha int_0^inf e^{i g e^{-alpha s} - s B} G - i g alpha^2 (2 - alpha) int_0^inf e^{i g e^{-alpha s} - s (B + alpha)} psi`.
fn c1_functional(ops: &ModeOperators, g: &ModeFunction, psi: &ModeFunction) -> Result<C64> {
    let grid = g.grid;
    if !(grid.t_min() <= 0.0 && grid.t_max() > 0.0) {
        return Ok(C64::new(f64::NAN, f64::NAN));
    }
    let p = &ops.params;
    let a = p.alpha();
    let k2 = KernelK2::new(p, ops.k, ops.lambda)?;
    let shifted = Phi2::build(grid, k2.b + a, k2.phase());
    let first = ops.phi2.moment_at(g.samples(), 0.0) * (-a);
    let second = shifted.moment_at(psi.samples(), 0.0) * C64::new(0.0, -p.phase_amp(ops.k) * a * a * (2.0 - a));
    Ok(first + second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lq_norm;

    fn p(beta: f64) -> VortexParams {
        VortexParams::new(0.5, beta, 2, 2.0).unwrap()
    }

    fn gauss(grid: LogGrid, k: u32, c: f64) -> ModeFunction {
        ModeFunction::from_fn(grid, k, Rep::G, 2.0, 2, |t| C64::new((-(t - c) * (t - c)).exp(), 0.0)).unwrap()
    }

    #[test]
    fn k2_values() {
        let k = KernelK2::new(&p(1.0), 1, SpectralPoint::new(0.0, 0.0)).unwrap();
        assert_eq!(k2_eval(0.3, 0.3, &k), C64::new(0.0, 0.0));
        assert!((k2_eval(0.0, 1.0, &k).norm() - 0.606_531).abs() < 1e-6);
        let k0 = KernelK2::new(&p(0.0), 1, SpectralPoint::new(0.0, 0.0)).unwrap();
        assert!((k2_eval(0.0, 1.0, &k0) - C64::new((-0.5f64).exp(), 0.0)).norm() < 1e-15);
        assert!(KernelK2::new(&p(1.0), 1, SpectralPoint::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn phi2_of_indicator_without_phase() {
        let grid = LogGrid::new(-10.0, 10.0, 2001).unwrap();
        let k = KernelK2::new(&p(0.0), 1, SpectralPoint::new(0.0, 0.0)).unwrap();
        let g = ModeFunction::from_fn(grid, 1, Rep::G, 2.0, 2, |t| {
            C64::new(if (0.0..=1.0).contains(&t) { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let out = apply_phi2(&g, &k).unwrap();
        for i in 0..grid.n() {
            let t = grid.t(i);
            if t < -0.1 {
                let want = (0.5 * t).exp() * (1.0 - (-0.5f64).exp()) / 0.5;
                assert!((out.samples()[i].re - want).abs() < 2.0 * grid.h());
            }
        }
    }

    #[test]
    fn phi2_matches_adaptive_quadrature_with_phase() {
        let grid = LogGrid::new(-8.0, 8.0, 1601).unwrap();
        let k = KernelK2::new(&p(1.0), 2, SpectralPoint::new(0.3, 0.7)).unwrap();
        let f = |t: f64| C64::new((-(t - 1.0) * (t - 1.0)).exp(), 0.5 * (-(t + 1.0) * (t + 1.0)).exp());
        let g = ModeFunction::from_fn(grid, 2, Rep::G, 2.0, 2, f).unwrap();
        let out = apply_phi2(&g, &k).unwrap();
        for i in (0..grid.n()).step_by(97) {
            let t = grid.t(i);
            let want = crate::quad::integrate(|s| k2_eval(t, s, &k) * f(s), t, 8.0, 1e-14, 1e-12, 100_000).value;
            assert!((out.samples()[i] - want).norm() < 1e-9, "{t} {:?} {want:?}", out.samples()[i]);
        }
    }

    #[test]
    fn phi2_matrix_matches_apply() {
        let grid = LogGrid::new(-5.0, 5.0, 120).unwrap();
        let k = KernelK2::new(&p(1.0), 1, SpectralPoint::new(0.0, 1.0)).unwrap();
        let op = Phi2::new(grid, &k);
        let f: Vec<C64> = grid.points().iter().map(|t| C64::new((-t * t).exp(), t.sin() * 0.1)).collect();
        let a = op.apply(&f);
        let m = op.matrix();
        for i in 0..grid.n() {
            let mv: C64 = (0..grid.n()).map(|j| m[(i, j)] * f[j]).sum();
            assert!((mv - a[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn k0_closed_form_and_residual() {
        let grid = LogGrid::new(-20.0, 10.0, 3001).unwrap();
        let pp = p(1.0);
        let lam = SpectralPoint::new(0.0, 0.0);
        let ind = ModeFunction::from_fn(grid, 0, Rep::G, 2.0, 2, |t| {
            C64::new(if (0.0..=1.0).contains(&t) { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let sol = solve_k0(&ind, lam, &pp).unwrap();
        for i in 0..grid.n() {
            let t = grid.t(i);
            if t < -0.1 {
                let want = -0.393_469_340_287_366_6 * (0.5 * t).exp();
                assert!((sol.u.samples()[i].re - want).abs() < 2.0 * grid.h());
            }
        }
        let g = gauss(grid, 0, 0.0);
        let sol = solve_k0(&g, lam, &pp).unwrap();
        assert!(sol.residual < 1e-7, "{}", sol.residual);
        let ratio = lq_norm(&sol.u, 2.0).unwrap() / lq_norm(&g, 2.0).unwrap();
        assert!(ratio <= 1.0);
        let z = ModeFunction::zeros(grid, 0, Rep::G, 2.0, 2);
        assert!(solve_k0(&z, lam, &pp).unwrap().u.samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn solve_mode_gaussian() {
        let grid = LogGrid::new(-12.0, 44.0, 5601).unwrap();
        let pp = p(1.0);
        let lam = SpectralPoint::new(0.5, 0.0);
        let g = gauss(grid, 1, 1.0);
        let sol = solve_mode(&g, lam, 1, &pp, &SolveConfig::default()).unwrap();
        assert!(sol.residual < 1e-8, "residual {}", sol.residual);
        let ratio = lq_norm(&sol.u, 2.0).unwrap() / lq_norm(&g, 2.0).unwrap();
        let b = 2.0 / 2.0 + 0.5 * (0.5 - 1.0);
        assert!(ratio <= 0.5 / b / (1.0 - 0.375));
        // c1 = e^{i g} U(0) with g = mk beta
        let i0 = grid.points().iter().position(|t| t.abs() < 1e-12).unwrap();
        let want = sol.u.samples()[i0] * C64::from_polar(1.0, 2.0);
        assert!((sol.c1 - want).norm() < 1e-6 * want.norm(), "{:?} {want:?}", sol.c1);
        let psi = sol.psi.as_ref().unwrap();
        assert!((psi.samples()[i0] - sol.c2 - sol.c3).norm() < 1e-10);
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let grid = LogGrid::new(-6.0, 6.0, 400).unwrap();
        let z = ModeFunction::zeros(grid, 1, Rep::G, 2.0, 2);
        let sol = solve_mode(&z, SpectralPoint::new(0.0, 0.0), 1, &p(1.0), &SolveConfig::default()).unwrap();
        assert!(sol.u.samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn composed_map_equals_ibp_form() {
        let grid = LogGrid::new(-6.0, 10.0, 1601).unwrap();
        let ops = ModeOperators::new(grid, &p(1.0), 1, SpectralPoint::new(0.2, -0.4)).unwrap();
        let u: Vec<C64> = grid.points().iter().map(|t| C64::new((-t * t).exp(), 0.3 * (-(t - 1.0).powi(2)).exp())).collect();
        let a = ops.coupling_map(&u, FixedPointMap::Composed);
        let b = ops.coupling_map_ibp(&u);
        let (lo, hi) = resolved_interior(&grid, &p(1.0), 1, 1.0);
        let num: Vec<C64> = (lo..hi).map(|i| a[i] - b[i]).collect();
        let den: Vec<C64> = (lo..hi).map(|i| a[i]).collect();
        let rel = lq_norm_samples(&num, grid.h(), 2.0) / lq_norm_samples(&den, grid.h(), 2.0);
        assert!(rel < 1e-6, "{rel}");
    }

    #[test]
    fn dense_solve_and_uniqueness() {
        let grid = LogGrid::new(-6.0, 10.0, 500).unwrap();
        let pp = p(1.0);
        let lam = SpectralPoint::new(0.0, 0.5);
        let g = gauss(grid, 1, 1.0);
        let cfg = SolveConfig::default();
        let a = solve_mode(&g, lam, 1, &pp, &cfg).unwrap();
        let d = solve_mode_dense(&g, lam, 1, &pp).unwrap();
        let start: Vec<C64> = grid.points().iter().map(|t| C64::new(t.cos(), 1.0) * (-t * t / 8.0).exp()).collect();
        let b = solve_mode_from(&g, lam, 1, &pp, &cfg, Some(&start)).unwrap();
        let scale = lq_norm(&a.u, 2.0).unwrap();
        let dd: Vec<C64> = a.u.samples().iter().zip(&d).map(|(x, y)| x - y).collect();
        let db: Vec<C64> = a.u.samples().iter().zip(b.u.samples()).map(|(x, y)| x - y).collect();
        assert!(lq_norm_samples(&dd, grid.h(), 2.0) < 1e-9 * scale);
        assert!(lq_norm_samples(&db, grid.h(), 2.0) < 10.0 * cfg.tol * scale);
    }

    #[test]
    fn simplified_map_does_not_solve_the_equation() {
        let grid = LogGrid::new(-10.0, 40.0, 5001).unwrap();
        let g = gauss(grid, 1, 1.0);
        let cfg = SolveConfig { map: FixedPointMap::Simplified, ..SolveConfig::default() };
        let sol = solve_mode(&g, SpectralPoint::new(0.5, 0.0), 1, &p(1.0), &cfg).unwrap();
        assert!(sol.residual > 1e-4, "{}", sol.residual);
    }

    #[test]
    fn beta_zero_reduces_to_source_term() {
        let grid = LogGrid::new(-10.0, 14.0, 1201).unwrap();
        let g = gauss(grid, 1, 1.0);
        let sol = solve_mode(&g, SpectralPoint::new(0.5, 0.0), 1, &p(0.0), &SolveConfig::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        let ratio = lq_norm(&sol.u, 2.0).unwrap() / lq_norm(&g, 2.0).unwrap();
        assert!(ratio <= 0.5 / 0.75);
    }
}
