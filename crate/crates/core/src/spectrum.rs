//! Per-mode generator, semigroup time stepping and eigenvalue scans.
//!
//! The generator is assembled for `V = e^{i phi} U`, `phi = mk beta e^{-alpha t}`:
//! `L_V V = (1/alpha) V' + a0 V + i g kappa e^{-alpha t} e^{i phi} Phi1(e^{-i phi} V)`.
//! This is a diagonal unitary similarity of the action on `U`, so it has the
//! same spectrum and the same `L^q` norms, and it removes the stiff
//! multiplication by `g e^{-alpha t}`.
//!
//! The drift moves data toward decreasing `t` (`U(tau, t) = e^{a0 tau} U0(t + tau/alpha)`
//! at `k = 0`), so the inflow end is `t_max` and the upwind stencil is biased right:
//! `V'_i ~ (-2 V_{i-1} - 3 V_i + 6 V_{i+1} - V_{i+2}) / (6h)` with zero data beyond
//! `t_max`, and `(-3 V_0 + 4 V_1 - V_2)/(2h)` at the outflow end.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::grid::{lq_norm_samples, LogGrid, ModeFunction, Rep};
use crate::mode::{KernelK1, Phi1};
use crate::params::VortexParams;
use crate::resolvent::{resolved_interior, solve_k0, solve_mode, SolveConfig, SpectralPoint};
use crate::C64;

#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub k: u32,
    pub params: VortexParams,
    pub grid: LogGrid,
    phi1: Option<Phi1>,
    /// `e^{i phi(t_j)}`.
    phase: Vec<C64>,
    /// `i g kappa e^{-alpha t_j} e^{i phi(t_j)}`.
    coupling: Vec<C64>,
}

pub fn assemble_generator(k: u32, params: &VortexParams, grid: LogGrid) -> Result<GeneratorMatrix> {
    let g = params.phase_amp(k);
    let a = params.alpha();
    let phase: Vec<C64> = grid.points().iter().map(|t| C64::from_polar(1.0, g * (-a * t).exp())).collect();
    let (phi1, coupling) = if k >= 1 && g != 0.0 {
        let kernel = KernelK1::for_params(params, k)?;
        let kap = params.coupling(k);
        let c = grid
            .points()
            .iter()
            .zip(&phase)
            .map(|(t, p)| C64::new(0.0, g * kap * (-a * t).exp()) * p)
            .collect();
        (Some(Phi1::with_phase(grid, kernel, params)), c)
    } else {
        (None, vec![C64::new(0.0, 0.0); grid.n()])
    };
    Ok(GeneratorMatrix { k, params: *params, grid, phi1, phase, coupling })
}

impl GeneratorMatrix {
    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn has_coupling(&self) -> bool {
        self.phi1.is_some()
    }

    fn drift(&self, v: &[C64], out: &mut [C64]) {
        let n = v.len();
        let s = 1.0 / (self.params.alpha() * 6.0 * self.grid.h());
        let at = |j: usize| if j < n { v[j] } else { C64::new(0.0, 0.0) };
        out[0] = (-v[0] * 3.0 + v[1] * 4.0 - v[2]) * (3.0 * s);
        for i in 1..n {
            out[i] = (-v[i - 1] * 2.0 - v[i] * 3.0 + at(i + 1) * 6.0 - at(i + 2)) * s;
        }
    }

    /// Action on `V`-samples.
    pub fn apply_v(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        self.drift(v, &mut out);
        let a0 = self.params.a0();
        for (o, x) in out.iter_mut().zip(v) {
            *o += x * a0;
        }
        if let Some(op) = &self.phi1 {
            let u: Vec<C64> = v.iter().zip(&self.phase).map(|(x, p)| x * p.conj()).collect();
            let c = op.apply(&u);
            for ((o, ci), w) in out.iter_mut().zip(&c).zip(&self.coupling) {
                *o += ci * w;
            }
        }
        out
    }

    /// Action on `U`-samples.
    pub fn apply_u(&self, u: &[C64]) -> Vec<C64> {
        let v: Vec<C64> = u.iter().zip(&self.phase).map(|(x, p)| x * p).collect();
        self.apply_v(&v).iter().zip(&self.phase).map(|(x, p)| x * p.conj()).collect()
    }

    pub fn phase(&self) -> &[C64] {
        &self.phase
    }

    /// Dense matrix in the `V` frame.
    pub fn dense(&self) -> Mat<C64> {
        let n = self.n();
        let mut m = Mat::<C64>::zeros(n, n);
        let s = 1.0 / (self.params.alpha() * 6.0 * self.grid.h());
        let a0 = self.params.a0();
        m[(0, 0)] += C64::new(-9.0 * s, 0.0);
        m[(0, 1)] += C64::new(12.0 * s, 0.0);
        m[(0, 2)] += C64::new(-3.0 * s, 0.0);
        for i in 1..n {
            m[(i, i - 1)] += C64::new(-2.0 * s, 0.0);
            m[(i, i)] += C64::new(-3.0 * s, 0.0);
            if i + 1 < n {
                m[(i, i + 1)] += C64::new(6.0 * s, 0.0);
            }
            if i + 2 < n {
                m[(i, i + 2)] += C64::new(-s, 0.0);
            }
        }
        for i in 0..n {
            m[(i, i)] += C64::new(a0, 0.0);
        }
        if let Some(op) = &self.phi1 {
            let m1 = op.matrix();
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += self.coupling[i] * m1[(i, j)] * self.phase[j].conj();
                }
            }
        }
        m
    }

    /// Gershgorin bound on the spectral radius.
    pub fn rho_bound(&self) -> f64 {
        let h = self.grid.h();
        let a = self.params.alpha();
        let drift = (12.0 / (6.0 * a * h)).max(8.0 / (2.0 * a * h));
        let coup = match &self.phi1 {
            Some(op) => {
                let rows = op.abs_row_sums();
                rows.iter().zip(&self.coupling).map(|(r, c)| r * c.norm()).fold(0.0, f64::max)
            }
            None => 0.0,
        };
        drift + self.params.a0().abs() + coup
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub k: u32,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub fitted_rate: Option<f64>,
}

/// Largest step the explicit integrator accepts on this generator.
pub fn max_stable_dt(gen: &GeneratorMatrix) -> f64 {
    2.5 / gen.rho_bound()
}

/// Classical RK4 in the `V` frame; `U0` on the generator's grid.
pub fn evolve(u0: &ModeFunction, tau_end: f64, dt: f64, gen: &GeneratorMatrix) -> Result<EvolutionTrace> {
    if u0.grid != gen.grid {
        return usage("initial data and generator live on different grids");
    }
    if !(tau_end > 0.0 && dt > 0.0) {
        return usage("tau_end and dt must be positive");
    }
    let limit = max_stable_dt(gen);
    if dt > limit {
        return usage(format!("dt = {dt:.6e} exceeds the stability limit; use dt <= {limit:.6e}"));
    }
    let steps = (tau_end / dt).ceil() as usize;
    let dt = tau_end / steps as f64;
    let q = gen.params.q();
    let h = gen.grid.h();
    let mut v: Vec<C64> = u0.samples().iter().zip(gen.phase()).map(|(x, p)| x * p).collect();
    let mut times = vec![0.0];
    let mut norms = vec![lq_norm_samples(&v, h, q)];
    let axpy = |x: &[C64], y: &[C64], s: f64| -> Vec<C64> { x.iter().zip(y).map(|(a, b)| a + b * s).collect() };
    for step in 1..=steps {
        let k1 = gen.apply_v(&v);
        let k2 = gen.apply_v(&axpy(&v, &k1, 0.5 * dt));
        let k3 = gen.apply_v(&axpy(&v, &k2, 0.5 * dt));
        let k4 = gen.apply_v(&axpy(&v, &k3, dt));
        for i in 0..v.len() {
            v[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
        times.push(step as f64 * dt);
        norms.push(lq_norm_samples(&v, h, q));
    }
    let mut trace = EvolutionTrace { k: gen.k, times, norms, fitted_rate: None };
    trace.fitted_rate = growth_fit(&trace).ok();
    Ok(trace)
}

/// Least-squares slope of `ln ||U||` over the trailing half of the trace.
pub fn growth_fit(trace: &EvolutionTrace) -> Result<f64> {
    let n = trace.times.len();
    if n < 10 || trace.norms.len() != n {
        return usage("growth fit needs at least 10 samples");
    }
    let tail = n / 2;
    let (ts, ns) = (&trace.times[tail..], &trace.norms[tail..]);
    if ns.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::Numerical("rate undefined: trace contains zero norms".into()));
    }
    let m = ts.len() as f64;
    let tbar = ts.iter().sum::<f64>() / m;
    let ys: Vec<f64> = ns.iter().map(|x| x.ln()).collect();
    let ybar = ys.iter().sum::<f64>() / m;
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tbar) * (y - ybar)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tbar).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlaggedEigenvalue {
    pub re: f64,
    pub im: f64,
    pub probe_residual: f64,
    /// True when the resolvent probe fails, i.e. the point may be spectrum.
    pub survives: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeScan {
    pub k: u32,
    pub n: usize,
    pub max_re: f64,
    pub flagged: Vec<FlaggedEigenvalue>,
    pub eigenvalues: Vec<[f64; 2]>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigScanReport {
    pub a0: f64,
    pub eps_disc: f64,
    pub modes: Vec<ModeScan>,
}

impl EigScanReport {
    pub fn surviving(&self) -> usize {
        self.modes.iter().map(|m| m.flagged.iter().filter(|f| f.survives).count()).sum()
    }
}

pub const PROBE_RESIDUAL: f64 = 1e-6;

/// Resolvent residual at `lambda` for a Gaussian right-hand side.
pub fn resolvent_probe(k: u32, params: &VortexParams, grid: LogGrid, lambda: SpectralPoint) -> f64 {
    let (lo, hi) = resolved_interior(&grid, params, k, 0.0);
    let c = 0.5 * (grid.t(lo) + grid.t(hi.saturating_sub(1)));
    let g = match ModeFunction::from_fn(grid, k, Rep::G, params.q(), params.m(), |t| {
        C64::new((-(t - c) * (t - c)).exp(), 0.0)
    }) {
        Ok(g) => g,
        Err(_) => return f64::INFINITY,
    };
    let r = if k == 0 {
        solve_k0(&g, lambda, params).map(|s| s.residual)
    } else {
        solve_mode(&g, lambda, k, params, &SolveConfig::default()).map(|s| s.residual)
    };
    r.unwrap_or(f64::INFINITY)
}

fn scan_mode(k: u32, params: &VortexParams, grid: LogGrid, eps: f64) -> Result<ModeScan> {
    let gen = assemble_generator(k, params, grid)?;
    let eig = gen.dense().eigenvalues().map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let mut eig: Vec<C64> = eig;
    eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    let a0 = params.a0();
    let max_re = eig.first().map_or(f64::NEG_INFINITY, |z| z.re);
    let flagged = eig
        .iter()
        .filter(|z| z.re > a0 + eps)
        .map(|z| {
            let r = resolvent_probe(k, params, grid, SpectralPoint::from(*z));
            FlaggedEigenvalue { re: z.re, im: z.im, probe_residual: r, survives: !(r < PROBE_RESIDUAL) }
        })
        .collect();
    Ok(ModeScan { k, n: grid.n(), max_re, flagged, eigenvalues: eig.iter().map(|z| [z.re, z.im]).collect(), error: None })
}

/// Dense eigenvalues for each mode, flagging any with `Re > a0 + eps_disc`.
pub fn eig_scan(ks: &[u32], params: &VortexParams, grid: LogGrid, eps_disc: f64) -> Result<EigScanReport> {
    if grid.n() > 4096 {
        return usage("dense eigen scans are limited to n <= 4096");
    }
    let modes = ks
        .par_iter()
        .map(|&k| {
            scan_mode(k, params, grid, eps_disc).unwrap_or_else(|e| ModeScan {
                k,
                n: grid.n(),
                max_re: f64::NAN,
                flagged: Vec::new(),
                eigenvalues: Vec::new(),
                error: Some(e.to_string()),
            })
        })
        .collect();
    Ok(EigScanReport { a0: params.a0(), eps_disc, modes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolvent::SolveConfig;

    fn p(beta: f64) -> VortexParams {
        VortexParams::new(0.5, beta, 2, 2.0).unwrap()
    }

    #[test]
    fn k0_matrix_is_drift_plus_constant() {
        let grid = LogGrid::new(-4.0, 4.0, 40).unwrap();
        let gen = assemble_generator(0, &p(1.0), grid).unwrap();
        assert!(!gen.has_coupling());
        let m = gen.dense();
        let s = 1.0 / (0.5 * 6.0 * grid.h());
        assert!((m[(5, 5)].re - (-3.0 * s - 1.0)).abs() < 1e-12);
        assert!((m[(5, 6)].re - 6.0 * s).abs() < 1e-12);
        assert_eq!(m[(5, 20)], C64::new(0.0, 0.0));
        // beta = 0 gives the same matrix at any k
        let g2 = assemble_generator(3, &p(0.0), grid).unwrap().dense();
        for i in 0..40 {
            for j in 0..40 {
                assert_eq!(m[(i, j)], g2[(i, j)]);
            }
        }
    }

    #[test]
    fn dense_matches_structured_apply() {
        let grid = LogGrid::new(-5.0, 5.0, 150).unwrap();
        let gen = assemble_generator(1, &p(1.0), grid).unwrap();
        let m = gen.dense();
        let v: Vec<C64> = grid.points().iter().map(|t| C64::new((-t * t).exp(), 0.2 * t.sin())).collect();
        let a = gen.apply_v(&v);
        for i in 0..grid.n() {
            let mv: C64 = (0..grid.n()).map(|j| m[(i, j)] * v[j]).sum();
            assert!((mv - a[i]).norm() < 1e-10 * (1.0 + a[i].norm()));
        }
    }

    #[test]
    fn action_matches_analytic_formula() {
        let pp = p(1.0);
        let grid = LogGrid::new(-10.0, 12.0, 4001).unwrap();
        let gen = assemble_generator(1, &pp, grid).unwrap();
        let u: Vec<C64> = grid.points().iter().map(|t| C64::new((-t * t).exp(), 0.0)).collect();
        let got = gen.apply_u(&u);
        // psi from the same Phi1 quadrature, derivative analytic
        let kern = KernelK1::for_params(&pp, 1).unwrap();
        let phi = Phi1::with_phase(grid, kern, &pp).apply(&u);
        let (lo, hi) = resolved_interior(&grid, &pp, 1, 1.0);
        let mut err = 0.0f64;
        for i in lo..hi {
            let t = grid.t(i);
            let du = -2.0 * t * (-t * t).exp();
            let want = C64::new(du / 0.5 - (-t * t).exp(), 0.0) - C64::new(0.0, 2.0 * (-0.5 * t).exp()) * u[i]
                + C64::new(0.0, 2.0 * pp.coupling(1) * (-0.5 * t).exp()) * phi[i];
            err = err.max((got[i] - want).norm());
        }
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn generator_inverts_resolvent() {
        let pp = p(1.0);
        let grid = LogGrid::new(-12.0, 44.0, 5601).unwrap();
        let g = ModeFunction::from_fn(grid, 1, Rep::G, 2.0, 2, |t| C64::new((-(t - 1.0) * (t - 1.0)).exp(), 0.0)).unwrap();
        let lam = C64::new(0.5, 0.0);
        let sol = solve_mode(&g, SpectralPoint::from(lam), 1, &pp, &SolveConfig::default()).unwrap();
        let gen = assemble_generator(1, &pp, grid).unwrap();
        let lu = gen.apply_u(sol.u.samples());
        let (lo, hi) = resolved_interior(&grid, &pp, 1, crate::resolvent::default_pad(&pp, 1));
        assert!(hi > lo + 100);
        let res: Vec<C64> = (lo..hi).map(|i| lu[i] - sol.u.samples()[i] * lam - g.samples()[i]).collect();
        let rel = lq_norm_samples(&res, grid.h(), 2.0) / lq_norm_samples(g.samples(), grid.h(), 2.0);
        assert!(rel < 1e-5, "{rel}");
    }

    #[test]
    fn growth_fit_cases() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let tr = EvolutionTrace { k: 0, norms: times.iter().map(|t| (-t).exp()).collect(), times: times.clone(), fitted_rate: None };
        assert!((growth_fit(&tr).unwrap() + 1.0).abs() < 1e-12);
        let tr = EvolutionTrace { k: 0, norms: vec![2.0; 50], times: times.clone(), fitted_rate: None };
        assert!(growth_fit(&tr).unwrap().abs() < 1e-15);
        let tr = EvolutionTrace { k: 0, norms: vec![0.0; 50], times, fitted_rate: None };
        assert!(growth_fit(&tr).is_err());
    }

    #[test]
    fn k0_evolution_is_translation() {
        let pp = p(1.0);
        let grid = LogGrid::new(-20.0, 10.0, 3001).unwrap();
        let gen = assemble_generator(0, &pp, grid).unwrap();
        let u0 = ModeFunction::from_fn(grid, 0, Rep::U, 2.0, 2, |t| C64::new((-(t - 2.0) * (t - 2.0)).exp(), 0.0)).unwrap();
        let dt = 0.9 * max_stable_dt(&gen);
        let tr = evolve(&u0, 5.0, dt, &gen).unwrap();
        let n0 = tr.norms[0];
        for (t, nv) in tr.times.iter().zip(&tr.norms) {
            assert!((nv / (n0 * (-t).exp()) - 1.0).abs() < 1e-3, "{t}");
        }
        assert!((tr.fitted_rate.unwrap() + 1.0).abs() < 1e-2);
        assert!(evolve(&u0, 1.0, 10.0 * dt, &gen).is_err());
        let z = ModeFunction::zeros(grid, 0, Rep::U, 2.0, 2);
        assert!(evolve(&z, 1.0, dt, &gen).unwrap().norms.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn small_k0_scan_is_left_of_a0() {
        let grid = LogGrid::new(-10.0, 10.0, 200).unwrap();
        let rep = eig_scan(&[0, 1], &p(1.0), grid, 0.05).unwrap();
        assert!(rep.modes[0].max_re <= -1.0, "{}", rep.modes[0].max_re);
        assert_eq!(rep.surviving(), 0);
    }
}
