//! Uniform log-radius grids and sampled azimuthal modes.
//!
//! With `t = ln r` the weighted variables are
//! `psi(t) = f(e^t) e^{(2/q-2)t}`, `U(t) = u(e^t) e^{2t/q}`, `G(t) = g(e^t) e^{2t/q}`,
//! chosen so that `L^q(r dr)` norms of `u, g` equal `L^q(dt)` norms of `U, G`.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    t_min: f64,
    t_max: f64,
    n: usize,
}

impl LogGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
            return usage(format!("grid needs t_min < t_max, got [{t_min}, {t_max}]"));
        }
        if n < Self::MIN_POINTS {
            return usage(format!("grid needs at least {} points, got {n}", Self::MIN_POINTS));
        }
        Ok(Self { t_min, t_max, n })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }
    pub fn t_max(&self) -> f64 {
        self.t_max
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn h(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n - 1) as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.t_max
        } else {
            self.t_min + i as f64 * self.h()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.t(i)).collect()
    }

    /// Index range `[lo, hi)` of points at distance at least `pad` from both ends.
    pub fn interior(&self, pad: f64) -> (usize, usize) {
        let k = (pad / self.h()).ceil() as usize;
        let lo = k.min(self.n / 2);
        let hi = self.n.saturating_sub(k).max(lo);
        (lo, hi)
    }
}

impl Default for LogGrid {
    fn default() -> Self {
        Self { t_min: -40.0, t_max: 40.0, n: 4096 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rep {
    /// Stream function mode `f_k(r)`.
    F,
    /// Vorticity mode `u(r)`.
    LowerU,
    /// Forcing mode `g(r)`.
    LowerG,
    Psi,
    U,
    G,
}

impl Rep {
    /// Exponent `w` with `weighted(t) = physical(e^t) e^{w t}`, and the partner rep.
    fn weight(self, q: f64) -> (f64, Rep, bool) {
        match self {
            Rep::F => (2.0 / q - 2.0, Rep::Psi, true),
            Rep::Psi => (2.0 / q - 2.0, Rep::F, false),
            Rep::LowerU => (2.0 / q, Rep::U, true),
            Rep::U => (2.0 / q, Rep::LowerU, false),
            Rep::LowerG => (2.0 / q, Rep::G, true),
            Rep::G => (2.0 / q, Rep::LowerG, false),
        }
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, Rep::Psi | Rep::U | Rep::G)
    }
}

impl fmt::Display for Rep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rep::F => "f",
            Rep::LowerU => "u",
            Rep::LowerG => "g",
            Rep::Psi => "psi",
            Rep::U => "U",
            Rep::G => "G",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFunction {
    pub grid: LogGrid,
    pub k: u32,
    pub rep: Rep,
    pub q: f64,
    pub m: u32,
    samples: Vec<C64>,
}

impl ModeFunction {
    pub fn new(grid: LogGrid, k: u32, rep: Rep, q: f64, m: u32, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != grid.n() {
            return usage(format!("expected {} samples, got {}", grid.n(), samples.len()));
        }
        if let Some(i) = samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return usage(format!("sample {i} is not finite"));
        }
        Ok(Self { grid, k, rep, q, m, samples })
    }

    pub fn from_fn(grid: LogGrid, k: u32, rep: Rep, q: f64, m: u32, f: impl Fn(f64) -> C64) -> Result<Self> {
        let s = grid.points().into_iter().map(f).collect();
        Self::new(grid, k, rep, q, m, s)
    }

    pub fn zeros(grid: LogGrid, k: u32, rep: Rep, q: f64, m: u32) -> Self {
        Self { grid, k, rep, q, m, samples: vec![C64::new(0.0, 0.0); grid.n()] }
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    /// Same metadata, new samples and representation.
    pub fn with_samples(&self, rep: Rep, samples: Vec<C64>) -> Result<Self> {
        Self::new(self.grid, self.k, rep, self.q, self.m, samples)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# k={},rep={},q={},m={}", self.k, self.rep, self.q, self.m);
        s.push_str("t,re,im\n");
        for (i, z) in self.samples.iter().enumerate() {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", self.grid.t(i), z.re, z.im);
        }
        s
    }
}

/// Convert between a physical mode and its weighted counterpart.
pub fn reweight(func: &ModeFunction, target: Rep) -> Result<ModeFunction> {
    if target == func.rep {
        return Ok(func.clone());
    }
    let (w, partner, forward) = func.rep.weight(func.q);
    if partner != target {
        return usage(format!("no weight relates rep {} to rep {}", func.rep, target));
    }
    let sign = if forward { 1.0 } else { -1.0 };
    let g = func.grid;
    let s = func
        .samples
        .iter()
        .enumerate()
        .map(|(i, z)| z * (sign * w * g.t(i)).exp())
        .collect();
    func.with_samples(target, s)
}

/// Trapezoidal `L^q(dt)` norm of raw samples.
pub fn lq_norm_samples(s: &[C64], h: f64, q: f64) -> f64 {
    let n = s.len();
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, z) in s.iter().enumerate() {
        let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        acc += w * z.norm().powf(q);
    }
    (acc * h).powf(1.0 / q)
}

pub fn lq_norm(func: &ModeFunction, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return usage(format!("norm exponent must be at least 1, got {q}"));
    }
    if !func.rep.is_weighted() {
        return usage(format!("lq_norm takes a weighted rep (psi, U, G), got {}", func.rep));
    }
    Ok(lq_norm_samples(&func.samples, func.grid.h(), q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn grid_basics() {
        let g = LogGrid::new(-1.0, 1.0, 21).unwrap();
        assert!((g.h() - 0.1).abs() < 1e-15);
        assert_eq!(g.t(20), 1.0);
        assert!(LogGrid::new(0.0, 1.0, 8).is_err());
        assert!(LogGrid::new(1.0, 0.0, 32).is_err());
        let (lo, hi) = g.interior(0.25);
        assert_eq!((lo, hi), (3, 18));
    }

    #[test]
    fn weight_of_constant_u() {
        let g = LogGrid::new(-2.0, 2.0, 41).unwrap();
        let u = ModeFunction::from_fn(g, 1, Rep::LowerU, 2.0, 2, |_| c(1.0)).unwrap();
        let big = reweight(&u, Rep::U).unwrap();
        for (i, z) in big.samples().iter().enumerate() {
            assert!((z.re - g.t(i).exp()).abs() < 1e-14 * z.re);
        }
        let back = reweight(&big, Rep::LowerU).unwrap();
        for z in back.samples() {
            assert!((z.re - 1.0).abs() < 1e-14);
        }
        assert!(reweight(&u, Rep::G).is_err());
    }

    #[test]
    fn norm_examples() {
        let g = LogGrid::new(-10.0, 10.0, 4001).unwrap();
        let z = ModeFunction::zeros(g, 0, Rep::U, 2.0, 2);
        assert_eq!(lq_norm(&z, 2.0).unwrap(), 0.0);
        let ind = ModeFunction::from_fn(g, 0, Rep::U, 2.0, 2, |t| c(if (0.0..=1.0).contains(&t) { 1.0 } else { 0.0 }))
            .unwrap();
        assert!((lq_norm(&ind, 2.0).unwrap() - 1.0).abs() < 2.0 * g.h());
        let gauss = ModeFunction::from_fn(g, 0, Rep::U, 2.0, 2, |t| c((-t * t).exp())).unwrap();
        let want = (std::f64::consts::PI / 2.0).powf(0.25);
        assert!((lq_norm(&gauss, 2.0).unwrap() - want).abs() < 1e-12);
        assert!((want - 1.119_51).abs() < 1e-5);
        assert!(lq_norm(&reweight(&gauss, Rep::LowerU).unwrap(), 2.0).is_err());
    }

    #[test]
    fn csv_header() {
        let g = LogGrid::new(0.0, 1.0, 16).unwrap();
        let z = ModeFunction::zeros(g, 3, Rep::Psi, 2.5, 2);
        let s = z.to_csv();
        assert!(s.starts_with("# k=3,rep=psi,q=2.5,m=2\nt,re,im\n"));
        assert_eq!(s.lines().count(), 18);
    }
}
