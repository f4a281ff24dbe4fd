//! Batch runs: configuration, verification suites, and artifact output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::appendix::{shoot_homogeneous, shooting_csv, shooting_lattice, ShootConfig, ShootingResult, Verdict};
use crate::error::{Error, Result};
use crate::grid::{lq_norm, LogGrid, ModeFunction, Rep};
use crate::identities::{verify_kernel_composition, verify_neat_half_line, verify_neat_interval, IdentityReport};
use crate::params::VortexParams;
use crate::mode::{apply_phi1, KernelK1};
use crate::resolvent::{apply_phi2, default_pad, resolved_interior, solve_k0, solve_mode, KernelK2, SolveConfig, SpectralPoint};
use crate::spectrum::{assemble_generator, eig_scan, evolve, max_stable_dt, EvolutionTrace};
use crate::testfn::{random_bumps, task_rng};
use crate::C64;

pub const SUMMARY_SCHEMA: &str = "ssvortex.summary/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Identities,
    Resolvent,
    Semigroup,
    Spectrum,
    Shooting,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Identities, Suite::Resolvent, Suite::Semigroup, Suite::Spectrum, Suite::Shooting];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Resolvent => "resolvent",
            Suite::Semigroup => "semigroup",
            Suite::Spectrum => "spectrum",
            Suite::Shooting => "shooting",
        }
    }
}

/// Which closed form the identities suite gates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityForm {
    Simplified,
    Corrected,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    alpha: Option<f64>,
    beta: Option<f64>,
    m: Option<u32>,
    q: Option<f64>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    n: Option<usize>,
    gen_t_min: Option<f64>,
    gen_t_max: Option<f64>,
    semigroup_n: Option<usize>,
    spectrum_n: Option<usize>,
    k_max: Option<u32>,
    lambdas: Option<Vec<[f64; 2]>>,
    lambda_offsets: Option<Vec<f64>>,
    suites: Option<Vec<Suite>>,
    seed: Option<u64>,
    output_dir: Option<String>,
    residual_tol: Option<f64>,
    identity_tol: Option<f64>,
    identity_form: Option<IdentityForm>,
    eps_disc: Option<f64>,
    shoot_threshold: Option<f64>,
    tau_end: Option<f64>,
    samples: Option<usize>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub q: Option<f64>,
    pub m: Option<u32>,
    pub k_max: Option<u32>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub suites: Option<Vec<Suite>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub params: VortexParams,
    /// Grid for resolvent solves.
    pub grid: LogGrid,
    /// Grid for the generator (semigroup and spectrum); `n` is set per suite.
    pub gen_t_min: f64,
    pub gen_t_max: f64,
    pub semigroup_n: usize,
    pub spectrum_n: usize,
    pub lambda_grid: Vec<SpectralPoint>,
    pub k_max: u32,
    pub suites: Vec<Suite>,
    pub output_dir: PathBuf,
    pub rng_seed: u64,
    pub residual_tol: f64,
    pub identity_tol: f64,
    pub identity_form: IdentityForm,
    pub eps_disc: f64,
    pub shoot_threshold: f64,
    pub tau_end: f64,
    /// Random right-hand sides per `(k, lambda)` in the resolvent suite.
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse("", &Overrides::default()).expect("defaults are valid")
    }
}

fn key_line(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn load(path: &Path, ov: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config { line: 0, msg: format!("cannot read {}: {e}", path.display()) })?;
        Self::parse(&text, ov)
    }

    /// Parses a flat TOML file; line 0 in errors refers to defaults or flags.
    pub fn parse(text: &str, ov: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().trim().to_string(),
        })?;
        let bad = |key: &str, msg: String| Error::Config { line: key_line(text, key), msg };
        let alpha = ov.alpha.or(raw.alpha).unwrap_or(0.5);
        let beta = ov.beta.or(raw.beta).unwrap_or(1.0);
        let m = ov.m.or(raw.m).unwrap_or(2);
        let q = ov.q.or(raw.q).unwrap_or(2.0);
        let params = VortexParams::new(alpha, beta, m, q).map_err(|e| {
            let msg = match &e {
                Error::Domain(m) => m.clone(),
                other => other.to_string(),
            };
            let key = ["alpha", "beta", "m", "q"].into_iter().find(|k| msg.starts_with(&format!("{k} "))).unwrap_or("alpha");
            bad(key, e.to_string())
        })?;
        let grid = LogGrid::new(raw.t_min.unwrap_or(-40.0), raw.t_max.unwrap_or(40.0), raw.n.unwrap_or(16384))
            .map_err(|e| bad(if raw.n.is_some() { "n" } else { "t_min" }, e.to_string()))?;
        let gen_t_min = raw.gen_t_min.unwrap_or(-8.0);
        let gen_t_max = raw.gen_t_max.unwrap_or(24.0);
        let semigroup_n = raw.semigroup_n.unwrap_or(1024);
        let spectrum_n = raw.spectrum_n.unwrap_or(512);
        LogGrid::new(gen_t_min, gen_t_max, semigroup_n).map_err(|e| bad("gen_t_min", e.to_string()))?;
        if !(LogGrid::MIN_POINTS..=4096).contains(&spectrum_n) {
            return Err(bad("spectrum_n", format!("spectrum_n must lie in [16, 4096], got {spectrum_n}")));
        }
        let a0 = params.a0();
        let lambda_grid: Vec<SpectralPoint> = match (&raw.lambdas, &raw.lambda_offsets) {
            (Some(_), Some(_)) => return Err(bad("lambda_offsets", "give either lambdas or lambda_offsets".into())),
            (Some(l), None) => l.iter().map(|p| SpectralPoint::new(p[0], p[1])).collect(),
            (None, offs) => offs
                .clone()
                .unwrap_or_else(|| vec![0.1, 0.5, 1.0, 4.0])
                .into_iter()
                .map(|d| SpectralPoint::new(a0 + d, 0.0))
                .collect(),
        };
        let key = if raw.lambdas.is_some() { "lambdas" } else { "lambda_offsets" };
        for l in &lambda_grid {
            if !(l.lambda1 > a0) {
                return Err(bad(key, format!("lambda1 = {} must exceed a0 = {a0}", l.lambda1)));
            }
        }
        let mut suites = ov.suites.clone().or(raw.suites).unwrap_or_else(|| Suite::ALL.to_vec());
        suites.sort();
        suites.dedup();
        let pos = |key: &str, v: f64| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(bad(key, format!("{key} must be positive, got {v}")))
            }
        };
        let samples = raw.samples.unwrap_or(1);
        if samples == 0 {
            return Err(bad("samples", "samples must be at least 1".into()));
        }
        Ok(RunConfig {
            params,
            grid,
            gen_t_min,
            gen_t_max,
            semigroup_n,
            spectrum_n,
            lambda_grid,
            k_max: ov.k_max.or(raw.k_max).unwrap_or(8),
            suites,
            output_dir: ov.output_dir.clone().unwrap_or_else(|| raw.output_dir.unwrap_or_else(|| "ssvortex-out".into()).into()),
            rng_seed: ov.seed.or(raw.seed).unwrap_or(0),
            residual_tol: pos("residual_tol", raw.residual_tol.unwrap_or(1e-6))?,
            identity_tol: pos("identity_tol", raw.identity_tol.unwrap_or(1e-8))?,
            identity_form: raw.identity_form.unwrap_or(IdentityForm::Corrected),
            eps_disc: pos("eps_disc", raw.eps_disc.unwrap_or(0.05))?,
            shoot_threshold: pos("shoot_threshold", raw.shoot_threshold.unwrap_or(1e-6))?,
            tau_end: pos("tau_end", raw.tau_end.unwrap_or(6.0))?,
            samples,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    fn le(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), passed: value <= limit, value, limit }
    }
    fn lt(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), passed: value < limit, value, limit }
    }
    fn gt(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), passed: value > limit, value, limit }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub data: Value,
    #[serde(skip)]
    pub csv: String,
}

impl SuiteReport {
    fn new(suite: Suite, checks: Vec<Check>, data: Value, csv: String) -> Self {
        SuiteReport { suite, passed: checks.iter().all(|c| c.passed), checks, data, csv }
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------- identities

fn identity_sets(p: &VortexParams) -> Vec<(VortexParams, u32, SpectralPoint)> {
    let a0 = p.a0();
    vec![
        (*p, 1, SpectralPoint::new(a0 + 0.5, 0.0)),
        (*p, 2, SpectralPoint::new(a0 + 1.0, 1.0)),
        (p.with_beta(0.5 * p.beta()), 3, SpectralPoint::new(a0 + 2.0, -0.5)),
    ]
}

/// 10 x 10 `(t, r)` lattice on `[-2, 2]^2`.
pub fn composition_lattice() -> Vec<(f64, f64)> {
    let xs: Vec<f64> = (0..10).map(|i| -2.0 + 4.0 * i as f64 / 9.0).collect();
    xs.iter().flat_map(|&t| xs.iter().map(move |&r| (t, r))).collect()
}

/// 20 `(t, mu)` points for the half-line identity, 20 `(t, r, mu)` for the interval one.
pub fn neat_points(seed: u64) -> (Vec<(f64, f64)>, Vec<(f64, f64, f64)>) {
    use rand::Rng;
    let mut rng = task_rng(seed, 0x1d);
    let half = (0..20).map(|_| (rng.random_range(-2.0..3.0), rng.random_range(0.2..3.0))).collect();
    let interval = (0..20)
        .map(|_| {
            let t = rng.random_range(-2.0..2.0);
            (t, t + rng.random_range(0.1..3.0), rng.random_range(-1.0..3.0))
        })
        .collect();
    (half, interval)
}

pub fn run_identities(cfg: &RunConfig) -> Result<SuiteReport> {
    let (half, interval) = neat_points(cfg.rng_seed);
    let lattice = composition_lattice();
    let sets = identity_sets(&cfg.params);
    let reports: Vec<(u32, Result<Vec<IdentityReport>>)> = sets
        .par_iter()
        .map(|(p, k, lam)| {
            let r = (|| {
                Ok(vec![
                    verify_neat_half_line(&half, p, *k)?,
                    verify_neat_interval(&interval, p, *k)?,
                    verify_kernel_composition(&lattice, p, *k, *lam)?,
                ])
            })();
            (*k, r)
        })
        .collect();
    let mut checks = Vec::new();
    let mut csv = String::from("identity,k,t,r,mu,err_simplified,err_corrected\n");
    let mut data = Vec::new();
    for (k, r) in reports {
        for rep in r? {
            if rep.skipped {
                continue;
            }
            let tol = if rep.name == "kernel_composition" { cfg.identity_tol.max(1e-6) } else { cfg.identity_tol };
            let (gate, other) = match cfg.identity_form {
                IdentityForm::Simplified => (rep.max_err_simplified, "corrected"),
                IdentityForm::Corrected => (rep.max_err_corrected, "simplified"),
            };
            let form = if other == "simplified" { "corrected" } else { "simplified" };
            checks.push(Check::lt(format!("{}_k{k}_{form}", rep.name), gate, tol));
            for s in &rep.samples {
                let _ = writeln!(
                    csv,
                    "{},{k},{},{},{},{},{}",
                    rep.name,
                    num(s.t),
                    s.r.map_or_else(|| "inf".to_string(), num),
                    num(s.mu),
                    num(s.err_simplified),
                    num(s.err_corrected)
                );
            }
            data.push(json!({
                "identity": rep.name, "k": k,
                "max_err_simplified": rep.max_err_simplified,
                "max_err_corrected": rep.max_err_corrected,
                "simplified_holds": rep.max_err_simplified < tol,
            }));
        }
    }
    Ok(SuiteReport::new(Suite::Identities, checks, json!({ "gate": cfg.identity_form, "identities": data }), csv))
}

// ---------------------------------------------------------------- resolvent

/// `ceil(ln 1e-10 / ln gamma) + 1`.
pub fn iteration_bound(gamma: f64) -> usize {
    if gamma <= 0.0 {
        1
    } else {
        (1e-10f64.ln() / gamma.ln()).ceil() as usize + 1
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventRow {
    pub k: u32,
    pub lambda: SpectralPoint,
    pub sample: usize,
    pub iterations: usize,
    pub iteration_bound: usize,
    pub residual: f64,
    pub norm_ratio: f64,
    pub m_estimate: f64,
    /// `||Phi1 U|| / (bound ||U||)`; zero at `k = 0`.
    pub young_phi1: f64,
    /// `||Phi2 G|| / (bound ||G||)`.
    pub young_phi2: f64,
    pub error: Option<String>,
}

pub fn resolvent_row(cfg: &RunConfig, k: u32, lambda: SpectralPoint, sample: usize, task: u64) -> ResolventRow {
    let p = &cfg.params;
    let grid = cfg.grid;
    let mut rng = task_rng(cfg.rng_seed, task);
    // bumps sit where the residual is checked
    let (lo, hi) = resolved_interior(&grid, p, k, default_pad(p, k));
    let (tlo, thi) = (grid.t(lo), grid.t(hi.saturating_sub(1)));
    let samples = random_bumps(&grid.points(), tlo.min(thi), thi.min(tlo + 10.0), &mut rng);
    let bound = if k == 0 { 1 } else { iteration_bound(p.contraction(k)) };
    let out = (|| {
        let g = ModeFunction::new(grid, k, Rep::G, p.q(), p.m(), samples)?;
        let sol = if k == 0 { solve_k0(&g, lambda, p)? } else { solve_mode(&g, lambda, k, p, &SolveConfig::default())? };
        let q = p.q();
        let (nu, ng) = (lq_norm(&sol.u, q)?, lq_norm(&g, q)?);
        // Young bounds, as fractions of the bound
        let k2 = KernelK2::new(p, k, lambda)?;
        let young2 = lq_norm(&apply_phi2(&g, &k2)?, q)? / (k2.young_bound() * ng);
        let young1 = if k == 0 {
            0.0
        } else {
            let k1 = KernelK1::for_params(p, k)?;
            lq_norm(&apply_phi1(&sol.u, &k1)?, q)? / (k1.young_bound() * nu)
        };
        Ok::<_, Error>((sol.iterations, sol.residual, nu / ng, young1, young2))
    })();
    let (iterations, residual, ratio, young_phi1, young_phi2, error) = match out {
        Ok((i, r, x, y1, y2)) => (i, r, x, y1, y2, None),
        Err(e) => (0, f64::NAN, f64::NAN, f64::NAN, f64::NAN, Some(e.to_string())),
    };
    ResolventRow {
        k,
        lambda,
        sample,
        iterations,
        iteration_bound: bound,
        residual,
        norm_ratio: ratio,
        m_estimate: ratio * (lambda.lambda1 - p.a0()),
        young_phi1,
        young_phi2,
        error,
    }
}

pub fn run_resolvent(cfg: &RunConfig) -> Result<SuiteReport> {
    let mut tasks = Vec::new();
    for k in 0..=cfg.k_max {
        for (j, lam) in cfg.lambda_grid.iter().enumerate() {
            for s in 0..cfg.samples {
                tasks.push((k, *lam, s, (1u64 << 32) | ((k as u64) << 20) | ((j as u64) << 10) | s as u64));
            }
        }
    }
    let rows: Vec<ResolventRow> = tasks.par_iter().map(|&(k, l, s, t)| resolvent_row(cfg, k, l, s, t)).collect();
    let mut checks = Vec::new();
    let mut csv = String::from(
        "k,re_lambda,im_lambda,sample,iterations,iteration_bound,residual,norm_ratio,m_estimate,young_phi1,young_phi2\n",
    );
    let max_res = rows.iter().map(|r| r.residual).fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    checks.push(Check::lt("max_relative_residual", max_res, cfg.residual_tol));
    let nan_max = |f: fn(&ResolventRow) -> f64| rows.iter().map(f).fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    checks.push(Check::le("young_phi1_fraction", nan_max(|r| r.young_phi1), 1.0 + 1e-6));
    checks.push(Check::le("young_phi2_fraction", nan_max(|r| r.young_phi2), 1.0 + 1e-6));
    // the contraction certificate is reported, not gated: it bounds a different map
    let over_bound = rows.iter().filter(|r| r.k > 0 && r.iterations > r.iteration_bound).count();
    let m = rows.iter().map(|r| r.m_estimate).fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    checks.push(Check::lt("m_estimate_finite", m, f64::MAX));
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            num(r.lambda.lambda1),
            num(r.lambda.lambda2),
            r.sample,
            r.iterations,
            r.iteration_bound,
            num(r.residual),
            num(r.norm_ratio),
            num(r.m_estimate),
            num(r.young_phi1),
            num(r.young_phi2)
        );
    }
    let errors: Vec<&ResolventRow> = rows.iter().filter(|r| r.error.is_some()).collect();
    checks.push(Check::le("solver_errors", errors.len() as f64, 0.0));
    Ok(SuiteReport::new(Suite::Resolvent, checks, json!({ "m_estimate": m, "rows_over_iteration_bound": over_bound, "rows": rows }), csv))
}

// ---------------------------------------------------------------- semigroup

pub fn semigroup_trace(cfg: &RunConfig, k: u32) -> Result<EvolutionTrace> {
    let p = &cfg.params;
    let grid = LogGrid::new(cfg.gen_t_min, cfg.gen_t_max, cfg.semigroup_n)?;
    let gen = assemble_generator(k, p, grid)?;
    // bump travels left at speed 1/alpha; start it so it stays on the grid
    let c = (cfg.gen_t_min + 4.0 + cfg.tau_end / p.alpha()).min(cfg.gen_t_max - 4.0);
    let u0 = ModeFunction::from_fn(grid, k, Rep::U, p.q(), p.m(), |t| C64::new((-(t - c) * (t - c)).exp(), 0.0))?;
    evolve(&u0, cfg.tau_end, 0.9 * max_stable_dt(&gen), &gen)
}

pub fn run_semigroup(cfg: &RunConfig) -> Result<SuiteReport> {
    let a0 = cfg.params.a0();
    let ks: Vec<u32> = (0..=cfg.k_max).collect();
    let traces: Vec<Result<EvolutionTrace>> = ks.par_iter().map(|&k| semigroup_trace(cfg, k)).collect();
    let mut checks = Vec::new();
    let mut csv = String::from("k,tau,norm\n");
    let mut rates = Vec::new();
    for (k, tr) in ks.iter().zip(traces) {
        let tr = tr?;
        let rate = tr.fitted_rate.unwrap_or(f64::NAN);
        if *k == 0 {
            checks.push(Check::lt("k0_rate_error", (rate - a0).abs(), 1e-2));
        }
        checks.push(Check::le(format!("rate_k{k}"), if rate.is_nan() { f64::INFINITY } else { rate }, a0 + 0.05));
        let stride = (tr.times.len() / 200).max(1);
        for i in (0..tr.times.len()).step_by(stride) {
            let _ = writeln!(csv, "{k},{},{}", num(tr.times[i]), num(tr.norms[i]));
        }
        rates.push(json!({ "k": k, "fitted_rate": rate, "steps": tr.times.len() - 1 }));
    }
    Ok(SuiteReport::new(Suite::Semigroup, checks, json!({ "a0": a0, "rates": rates }), csv))
}

// ---------------------------------------------------------------- spectrum

pub fn run_spectrum(cfg: &RunConfig) -> Result<SuiteReport> {
    let grid = LogGrid::new(cfg.gen_t_min, cfg.gen_t_max, cfg.spectrum_n)?;
    let ks: Vec<u32> = (0..=cfg.k_max).collect();
    let rep = eig_scan(&ks, &cfg.params, grid, cfg.eps_disc)?;
    let mut checks = Vec::new();
    let mut csv = String::from("k,re,im\n");
    for m in &rep.modes {
        checks.push(Check::le(format!("surviving_k{}", m.k), m.flagged.iter().filter(|f| f.survives).count() as f64, 0.0));
        if let Some(e) = &m.error {
            checks.push(Check { name: format!("eigensolver_k{}: {e}", m.k), passed: false, value: f64::NAN, limit: 0.0 });
        }
        for z in &m.eigenvalues {
            let _ = writeln!(csv, "{},{},{}", m.k, num(z[0]), num(z[1]));
        }
    }
    let modes: Vec<Value> = rep
        .modes
        .iter()
        .map(|m| json!({ "k": m.k, "n": m.n, "max_re": m.max_re, "flagged": m.flagged, "error": m.error }))
        .collect();
    Ok(SuiteReport::new(
        Suite::Spectrum,
        checks,
        json!({ "a0": rep.a0, "eps_disc": rep.eps_disc, "modes": modes }),
        csv,
    ))
}

// ---------------------------------------------------------------- shooting

pub fn run_shooting(cfg: &RunConfig) -> Result<SuiteReport> {
    let a0 = cfg.params.a0();
    let lattice = shooting_lattice(a0);
    let scfg = ShootConfig { threshold: cfg.shoot_threshold, ..Default::default() };
    let tasks: Vec<(u32, SpectralPoint)> =
        (0..=cfg.k_max.min(3)).flat_map(|k| lattice.iter().map(move |l| (k, *l))).collect();
    let results: Vec<Result<ShootingResult>> =
        tasks.par_iter().map(|&(k, l)| shoot_homogeneous(&cfg.params, k, l, &scfg)).collect();
    let results: Vec<ShootingResult> = results.into_iter().collect::<Result<_>>()?;
    let mut checks = Vec::new();
    for k in 0..=cfg.k_max.min(3) {
        let of_k: Vec<&ShootingResult> = results.iter().filter(|r| r.k == k).collect();
        let bad = of_k.iter().filter(|r| r.verdict != Verdict::NoIntegrableSolution).count();
        checks.push(Check::le(format!("inconclusive_k{k}"), bad as f64, 0.0));
        let min = of_k.iter().map(|r| r.mismatch).fold(f64::INFINITY, f64::min);
        checks.push(Check::gt(format!("min_mismatch_k{k}"), min, cfg.shoot_threshold));
    }
    let csv = shooting_csv(&results);
    Ok(SuiteReport::new(Suite::Shooting, checks, json!({ "results": results }), csv))
}

// ---------------------------------------------------------------- orchestration

pub fn run_suite(cfg: &RunConfig, suite: Suite) -> Result<SuiteReport> {
    match suite {
        Suite::Identities => run_identities(cfg),
        Suite::Resolvent => run_resolvent(cfg),
        Suite::Semigroup => run_semigroup(cfg),
        Suite::Spectrum => run_spectrum(cfg),
        Suite::Shooting => run_shooting(cfg),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub passed: bool,
    pub reports: Vec<SuiteReport>,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn failures(&self) -> Vec<String> {
        self.reports
            .iter()
            .flat_map(|r| r.failed().map(move |c| format!("{}: {} = {:e} (limit {:e})", r.suite.name(), c.name, c.value, c.limit)))
            .collect()
    }
}

pub fn summary_json(cfg: &RunConfig, reports: &[SuiteReport]) -> Value {
    json!({
        "schema": SUMMARY_SCHEMA,
        "passed": reports.iter().all(|r| r.passed),
        "params": {
            "alpha": cfg.params.alpha(), "beta": cfg.params.beta(),
            "m": cfg.params.m(), "q": cfg.params.q(), "a0": cfg.params.a0(),
        },
        "seed": cfg.rng_seed,
        "k_max": cfg.k_max,
        "suites": reports.iter().map(|r| json!({
            "suite": r.suite,
            "passed": r.passed,
            "report": format!("{}.json", r.suite.name()),
            "failed_checks": r.failed().map(|c| c.name.clone()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

/// Structural check of a summary document against the schema above.
pub fn validate_summary(v: &Value) -> std::result::Result<(), String> {
    let obj = v.as_object().ok_or("summary is not an object")?;
    if obj.get("schema").and_then(Value::as_str) != Some(SUMMARY_SCHEMA) {
        return Err("missing or wrong schema tag".into());
    }
    obj.get("passed").and_then(Value::as_bool).ok_or("passed must be a bool")?;
    obj.get("seed").and_then(Value::as_u64).ok_or("seed must be an unsigned integer")?;
    obj.get("k_max").and_then(Value::as_u64).ok_or("k_max must be an unsigned integer")?;
    let p = obj.get("params").and_then(Value::as_object).ok_or("params must be an object")?;
    for key in ["alpha", "beta", "q", "a0"] {
        p.get(key).and_then(Value::as_f64).ok_or(format!("params.{key} must be a number"))?;
    }
    p.get("m").and_then(Value::as_u64).ok_or("params.m must be an integer")?;
    for s in obj.get("suites").and_then(Value::as_array).ok_or("suites must be an array")? {
        let name = s.get("suite").and_then(Value::as_str).ok_or("suite name missing")?;
        if !Suite::ALL.iter().any(|x| x.name() == name) {
            return Err(format!("unknown suite {name}"));
        }
        s.get("passed").and_then(Value::as_bool).ok_or("suite passed must be a bool")?;
        s.get("report").and_then(Value::as_str).ok_or("suite report must be a string")?;
        let f = s.get("failed_checks").and_then(Value::as_array).ok_or("failed_checks must be an array")?;
        if f.iter().any(|x| !x.is_string()) {
            return Err("failed_checks must hold strings".into());
        }
    }
    Ok(())
}

fn write(path: PathBuf, body: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, body)
        .map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

/// Writes `<suite>.json` and `<suite>.csv`.
pub fn emit(report: &SuiteReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let body = serde_json::to_string_pretty(report).map_err(|e| Error::Numerical(e.to_string()))?;
    write(dir.join(format!("{}.json", report.suite.name())), &(body + "\n"), &mut files)?;
    write(dir.join(format!("{}.csv", report.suite.name())), &report.csv, &mut files)?;
    Ok(files)
}

/// Runs the configured suites in canonical order and writes all artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    // sequential dense kernels keep artifacts bit-stable; parallelism is over tasks
    faer::set_global_parallelism(faer::Par::Seq);
    fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::Usage(format!("cannot create {}: {e}", cfg.output_dir.display())))?;
    let mut reports = Vec::new();
    let mut files = Vec::new();
    for &suite in &cfg.suites {
        let rep = run_suite(cfg, suite)?;
        files.extend(emit(&rep, &cfg.output_dir)?);
        reports.push(rep);
    }
    let summary = serde_json::to_string_pretty(&summary_json(cfg, &reports)).map_err(|e| Error::Numerical(e.to_string()))?;
    write(cfg.output_dir.join("summary.json"), &(summary + "\n"), &mut files)?;
    Ok(RunOutcome { passed: reports.iter().all(|r| r.passed), reports, files })
}
