//! Mode-k Laplacian relation and its inverse `Phi1`.
//!
//! With `A+ = mk + 2 - 2/q` and `A- = mk - 2 + 2/q`,
//! `psi'' + (4 - 4/q) psi' + ((2 - 2/q)^2 - (mk)^2) psi = U` is solved by
//! `psi = -(1/(2mk)) Phi1(U)` where `Phi1(U)(t) = int K1(t - s) U(s) ds` and
//! `K1(x) = e^{-A+ x}` for `x > 0`, `e^{A- x}` for `x < 0`.
//!
//! `Phi1` is applied by product integration: the sampled function is
//! interpolated by local cubics and integrated exactly against the kernel,
//! through the two one-sided recursions
//! `P_{i+1} = e^{-A+ h} P_i + cell_i`, `M_i = e^{-A- h} M_{i+1} + cell_i`.
//! With a phase attached, the cubic interpolates `e^{i phi} U` instead of `U`
//! where `phi(t) = mk beta e^{-alpha t}`; the factor `e^{-i phi(s)}` is then
//! part of the exact kernel. This resolves modes oscillating like `e^{-i phi}`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::grid::{LogGrid, ModeFunction, Rep};
use crate::params::VortexParams;
use crate::quad::{cell_weights, gauss_legendre, stencil_offsets, Phase};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelK1 {
    pub k: u32,
    pub q: f64,
    pub m: u32,
    pub a_plus: f64,
    pub a_minus: f64,
}

impl KernelK1 {
    pub fn new(k: u32, q: f64, m: u32) -> Result<Self> {
        if k == 0 {
            return usage("K1 is defined for k >= 1");
        }
        if !(q >= 2.0) || m < 2 {
            return usage(format!("K1 needs q >= 2 and m >= 2, got q={q}, m={m}"));
        }
        let mk = f64::from(m) * f64::from(k);
        Ok(Self { k, q, m, a_plus: mk + 2.0 - 2.0 / q, a_minus: mk - 2.0 + 2.0 / q })
    }

    pub fn for_params(p: &VortexParams, k: u32) -> Result<Self> {
        Self::new(k, p.q(), p.m())
    }

    pub fn mk(&self) -> f64 {
        f64::from(self.m) * f64::from(self.k)
    }

    /// `int |K1| = 1/A+ + 1/A-`.
    pub fn l1_norm(&self) -> f64 {
        1.0 / self.a_plus + 1.0 / self.a_minus
    }

    /// The Young bound `2/A-`.
    pub fn young_bound(&self) -> f64 {
        2.0 / self.a_minus
    }
}

pub fn k1_eval(t: f64, s: f64, kernel: &KernelK1) -> f64 {
    let x = t - s;
    if x > 0.0 {
        (-kernel.a_plus * x).exp()
    } else if x < 0.0 {
        (kernel.a_minus * x).exp()
    } else {
        1.0
    }
}

/// `e^{sign i value(t_j)}` on the grid, or all ones without a phase.
pub(crate) fn phase_factors(grid: &LogGrid, phase: Option<Phase>, sign: f64) -> Vec<C64> {
    (0..grid.n())
        .map(|i| match phase {
            Some(p) => C64::from_polar(1.0, sign * p.value(grid.t(i))),
            None => C64::new(1.0, 0.0),
        })
        .collect()
}

/// Precomputed product-integration weights for `Phi1` on one grid.
#[derive(Debug, Clone)]
pub struct Phi1 {
    pub grid: LogGrid,
    pub kernel: KernelK1,
    phase: Option<Phase>,
    starts: Vec<usize>,
    offsets: Vec<[f64; 4]>,
    wp: Vec<[C64; 4]>,
    wm: Vec<[C64; 4]>,
    /// `e^{i phi(t_j)}`, the compensation applied to input samples.
    comp: Vec<C64>,
}

pub struct Phi1Parts {
    pub p: Vec<C64>,
    pub m: Vec<C64>,
}

impl Phi1Parts {
    pub fn value(&self) -> Vec<C64> {
        self.p.iter().zip(&self.m).map(|(a, b)| a + b).collect()
    }
}

impl Phi1 {
    /// Plain interpolation of the input.
    pub fn new(grid: LogGrid, kernel: KernelK1) -> Self {
        Self::build(grid, kernel, None)
    }

    /// Interpolate `e^{i phi} U` with `phi = mk beta e^{-alpha t}`.
    pub fn with_phase(grid: LogGrid, kernel: KernelK1, params: &VortexParams) -> Self {
        let gamma = params.phase_amp(kernel.k);
        let phase = (gamma != 0.0).then_some(Phase { gamma: gamma.abs(), alpha: params.alpha(), sign: -gamma.signum() });
        Self::build(grid, kernel, phase)
    }

    fn build(grid: LogGrid, kernel: KernelK1, phase: Option<Phase>) -> Self {
        let n = grid.n();
        let h = grid.h();
        let ap = C64::new(kernel.a_plus, 0.0);
        let am = C64::new(-kernel.a_minus, 0.0);
        let ep = (-kernel.a_plus * h).exp();
        let mut starts = Vec::with_capacity(n - 1);
        let mut offsets = Vec::with_capacity(n - 1);
        let mut wp = Vec::with_capacity(n - 1);
        let mut wm = Vec::with_capacity(n - 1);
        for c in 0..n - 1 {
            let (s0, d) = stencil_offsets(c, n);
            let t_c = grid.t(c);
            let mut a = cell_weights(t_c, h, d, ap, phase);
            for w in &mut a {
                *w *= ep;
            }
            starts.push(s0);
            offsets.push(d);
            wp.push(a);
            wm.push(cell_weights(t_c, h, d, am, phase));
        }
        let comp = phase_factors(&grid, phase, -1.0);
        Self { grid, kernel, phase, starts, offsets, wp, wm, comp }
    }

    pub fn has_phase(&self) -> bool {
        self.phase.is_some()
    }

    fn compensate(&self, u: &[C64]) -> Vec<C64> {
        u.iter().zip(&self.comp).map(|(a, b)| a * b).collect()
    }

    fn dot(w: &[C64; 4], v: &[C64], s0: usize) -> C64 {
        w[0] * v[s0] + w[1] * v[s0 + 1] + w[2] * v[s0 + 2] + w[3] * v[s0 + 3]
    }

    /// Left and right partial integrals; `Phi1 U = P + M`, `(Phi1 U)' = -A+ P + A- M`.
    pub fn parts(&self, u: &[C64]) -> Phi1Parts {
        let n = self.grid.n();
        assert_eq!(u.len(), n, "sample count does not match the grid");
        let v = self.compensate(u);
        let h = self.grid.h();
        let ep = (-self.kernel.a_plus * h).exp();
        let em = (-self.kernel.a_minus * h).exp();
        let mut p = vec![C64::new(0.0, 0.0); n];
        let mut m = vec![C64::new(0.0, 0.0); n];
        for c in 0..n - 1 {
            p[c + 1] = p[c] * ep + Self::dot(&self.wp[c], &v, self.starts[c]);
        }
        for c in (0..n - 1).rev() {
            m[c] = m[c + 1] * em + Self::dot(&self.wm[c], &v, self.starts[c]);
        }
        Phi1Parts { p, m }
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        self.parts(u).value()
    }

    /// Quadratic-cost evaluation of the same quadrature, used as a cross-check.
    pub fn apply_direct(&self, u: &[C64]) -> Vec<C64> {
        let n = self.grid.n();
        let v = self.compensate(u);
        let h = self.grid.h();
        let cells: Vec<(C64, C64)> = (0..n - 1)
            .map(|c| (Self::dot(&self.wp[c], &v, self.starts[c]), Self::dot(&self.wm[c], &v, self.starts[c])))
            .collect();
        (0..n)
            .map(|i| {
                let mut acc = C64::new(0.0, 0.0);
                for (c, (a, b)) in cells.iter().enumerate() {
                    if c < i {
                        acc += a * (-self.kernel.a_plus * h * (i - 1 - c) as f64).exp();
                    } else {
                        acc += b * (-self.kernel.a_minus * h * (c - i) as f64).exp();
                    }
                }
                acc
            })
            .collect()
    }

    /// Dense matrix of the quadrature acting on `U` samples.
    pub fn matrix(&self) -> Mat<C64> {
        let n = self.grid.n();
        let h = self.grid.h();
        let mut mat = Mat::<C64>::zeros(n, n);
        let dp: Vec<f64> = (0..n).map(|j| (-self.kernel.a_plus * h * j as f64).exp()).collect();
        let dm: Vec<f64> = (0..n).map(|j| (-self.kernel.a_minus * h * j as f64).exp()).collect();
        for i in 0..n {
            for c in 0..n - 1 {
                let (f, w) = if c < i { (dp[i - 1 - c], &self.wp[c]) } else { (dm[c - i], &self.wm[c]) };
                if f == 0.0 {
                    continue;
                }
                let s0 = self.starts[c];
                for j in 0..4 {
                    mat[(i, s0 + j)] += w[j] * f * self.comp[s0 + j];
                }
            }
        }
        mat
    }

    /// Upper bounds on the absolute row sums of `matrix()`.
    pub fn abs_row_sums(&self) -> Vec<f64> {
        let n = self.grid.n();
        let h = self.grid.h();
        let ep = (-self.kernel.a_plus * h).exp();
        let em = (-self.kernel.a_minus * h).exp();
        let mut p = vec![0.0; n];
        let mut m = vec![0.0; n];
        for c in 0..n - 1 {
            p[c + 1] = p[c] * ep + self.wp[c].iter().map(|w| w.norm()).sum::<f64>();
        }
        for c in (0..n - 1).rev() {
            m[c] = m[c + 1] * em + self.wm[c].iter().map(|w| w.norm()).sum::<f64>();
        }
        p.iter().zip(&m).map(|(a, b)| a + b).collect()
    }

    /// Interpolant of the input at an arbitrary point.
    fn interp(&self, v: &[C64], s: f64) -> C64 {
        let g = &self.grid;
        let h = g.h();
        let c = (((s - g.t_min()) / h).floor().max(0.0) as usize).min(g.n() - 2);
        let d = self.offsets[c];
        let s0 = self.starts[c];
        let u = (s - g.t(c)) / h;
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..4 {
            let mut l = 1.0;
            for m in 0..4 {
                if m != j {
                    l *= (u - d[m]) / (d[j] - d[m]);
                }
            }
            acc += v[s0 + j] * l;
        }
        match self.phase {
            Some(p) => acc * C64::from_polar(1.0, p.value(s)),
            None => acc,
        }
    }

    /// `(P(t0), M(t0))` at an arbitrary point inside the grid.
    pub fn parts_at(&self, u: &[C64], t0: f64) -> (C64, C64) {
        let g = &self.grid;
        let h = g.h();
        let parts = self.parts(u);
        let v = self.compensate(u);
        let c = (((t0 - g.t_min()) / h).floor().max(0.0) as usize).min(g.n() - 2);
        let (ta, tb) = (g.t(c), g.t(c + 1));
        let (xs, ws) = gauss_legendre(16);
        let mut left = parts.p[c] * (-self.kernel.a_plus * (t0 - ta)).exp();
        let mut right = parts.m[c + 1] * (-self.kernel.a_minus * (tb - t0)).exp();
        for (x, w) in xs.iter().zip(&ws) {
            if t0 > ta {
                let s = ta + 0.5 * (t0 - ta) * (x + 1.0);
                left += self.interp(&v, s) * ((-self.kernel.a_plus * (t0 - s)).exp() * 0.5 * (t0 - ta) * w);
            }
            if tb > t0 {
                let s = t0 + 0.5 * (tb - t0) * (x + 1.0);
                right += self.interp(&v, s) * ((-self.kernel.a_minus * (s - t0)).exp() * 0.5 * (tb - t0) * w);
            }
        }
        (left, right)
    }
}

pub fn apply_phi1(u: &ModeFunction, kernel: &KernelK1) -> Result<ModeFunction> {
    let op = Phi1::new(u.grid, *kernel);
    u.with_samples(u.rep, op.apply(u.samples()))
}

pub fn apply_phi1_direct(u: &ModeFunction, kernel: &KernelK1) -> Result<ModeFunction> {
    let op = Phi1::new(u.grid, *kernel);
    u.with_samples(u.rep, op.apply_direct(u.samples()))
}

/// First and second derivatives: fourth-order centered inside, second-order
/// near the ends.
pub fn derivatives(s: &[C64], h: f64) -> (Vec<C64>, Vec<C64>) {
    let n = s.len();
    let mut d1 = vec![C64::new(0.0, 0.0); n];
    let mut d2 = vec![C64::new(0.0, 0.0); n];
    if n < 5 {
        return (d1, d2);
    }
    for i in 2..n - 2 {
        d1[i] = (s[i - 2] - s[i - 1] * 8.0 + s[i + 1] * 8.0 - s[i + 2]) / (12.0 * h);
        d2[i] = (-s[i - 2] + s[i - 1] * 16.0 - s[i] * 30.0 + s[i + 1] * 16.0 - s[i + 2]) / (12.0 * h * h);
    }
    for i in [1, n - 2] {
        d1[i] = (s[i + 1] - s[i - 1]) / (2.0 * h);
        d2[i] = (s[i + 1] - s[i] * 2.0 + s[i - 1]) / (h * h);
    }
    d1[0] = (-s[0] * 3.0 + s[1] * 4.0 - s[2]) / (2.0 * h);
    d2[0] = (s[0] * 2.0 - s[1] * 5.0 + s[2] * 4.0 - s[3]) / (h * h);
    let l = n - 1;
    d1[l] = (s[l] * 3.0 - s[l - 1] * 4.0 + s[l - 2]) / (2.0 * h);
    d2[l] = (s[l] * 2.0 - s[l - 1] * 5.0 + s[l - 2] * 4.0 - s[l - 3]) / (h * h);
    (d1, d2)
}

/// `psi'' + (4 - 4/q) psi' + ((2 - 2/q)^2 - (mk)^2) psi`.
pub fn second_order_relation(psi: &ModeFunction, params: &VortexParams, k: u32) -> Result<ModeFunction> {
    if psi.grid.n() < LogGrid::MIN_POINTS {
        return usage("grid too coarse for the second-order relation");
    }
    let q = params.q();
    let c1 = 4.0 - 4.0 / q;
    let c0 = (2.0 - 2.0 / q).powi(2) - params.mk(k).powi(2);
    let (d1, d2) = derivatives(psi.samples(), psi.grid.h());
    let out = (0..psi.grid.n()).map(|i| d2[i] + d1[i] * c1 + psi.samples()[i] * c0).collect();
    psi.with_samples(Rep::U, out)
}

#[derive(Debug, Clone)]
pub struct PsiSolution {
    pub psi: ModeFunction,
    pub c2: C64,
    pub c3: C64,
}

/// Per-mode inverse Laplacian together with the two boundary functionals
/// `c2 = -(1/(2mk)) int_{-inf}^0 e^{A+ s} U`, `c3 = -(1/(2mk)) int_0^inf e^{-A- s} U`.
pub fn psi_from_u(u: &ModeFunction, params: &VortexParams, k: u32) -> Result<PsiSolution> {
    if k == 0 {
        return usage("psi is only reconstructed for k >= 1");
    }
    let kernel = KernelK1::for_params(params, k)?;
    let op = Phi1::with_phase(u.grid, kernel, params);
    psi_with(&op, u)
}

pub(crate) fn psi_with(op: &Phi1, u: &ModeFunction) -> Result<PsiSolution> {
    let scale = -1.0 / (2.0 * op.kernel.mk());
    let psi: Vec<C64> = op.apply(u.samples()).into_iter().map(|z| z * scale).collect();
    let (c2, c3) = if u.grid.t_min() < 0.0 && u.grid.t_max() > 0.0 {
        let (l, r) = op.parts_at(u.samples(), 0.0);
        (l * scale, r * scale)
    } else if u.grid.t_min() >= 0.0 {
        let (_, r) = op.parts_at(u.samples(), u.grid.t_min());
        (C64::new(0.0, 0.0), r * (op.kernel.a_minus * u.grid.t_min()).exp() * scale)
    } else {
        let (l, _) = op.parts_at(u.samples(), u.grid.t_max());
        (l * (-op.kernel.a_plus * u.grid.t_max()).exp() * scale, C64::new(0.0, 0.0))
    };
    Ok(PsiSolution { psi: u.with_samples(Rep::Psi, psi)?, c2, c3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn k1_values() {
        let k = KernelK1::new(1, 2.0, 2).unwrap();
        assert_eq!((k.a_plus, k.a_minus), (3.0, 1.0));
        assert!((k1_eval(1.0, 0.0, &k) - 0.049_787_1).abs() < 1e-7);
        assert!((k1_eval(0.0, 1.0, &k) - 0.367_879).abs() < 1e-6);
        assert_eq!(k1_eval(0.3, 0.3, &k), 1.0);
        assert!(KernelK1::new(0, 2.0, 2).is_err());
    }

    #[test]
    fn relation_coefficients_and_examples() {
        let p = VortexParams::new(0.5, 1.0, 2, 2.0).unwrap();
        let g = LogGrid::new(-3.0, 3.0, 601).unwrap();
        let z = ModeFunction::zeros(g, 1, Rep::Psi, 2.0, 2);
        assert!(second_order_relation(&z, &p, 1).unwrap().samples().iter().all(|v| v.norm() == 0.0));
        let e = ModeFunction::from_fn(g, 1, Rep::Psi, 2.0, 2, |t| c(t.exp())).unwrap();
        let r = second_order_relation(&e, &p, 1).unwrap();
        for i in 2..599 {
            assert!(r.samples()[i].norm() < 1e-7 * g.t(i).exp());
        }
        let s = ModeFunction::from_fn(g, 1, Rep::Psi, 2.0, 2, |t| c(t.sin())).unwrap();
        let r = second_order_relation(&s, &p, 1).unwrap();
        for i in 2..599 {
            let t = g.t(i);
            assert!((r.samples()[i].re - (2.0 * t.cos() - 4.0 * t.sin())).abs() < 1e-6);
        }
        // m = 2 coefficient reduces to 4 - 4k^2 + 4/q^2 - 8/q
        for (k, q) in [(1u32, 2.0f64), (3, 2.5), (2, 3.0)] {
            let got = (2.0 - 2.0 / q).powi(2) - (2.0 * k as f64).powi(2);
            let kf = k as f64;
            assert!((got - (4.0 - 4.0 * kf * kf + 4.0 / (q * q) - 8.0 / q)).abs() < 1e-12);
        }
    }

    #[test]
    fn phi1_of_indicator() {
        let k = KernelK1::new(1, 2.0, 2).unwrap();
        let g = LogGrid::new(-10.0, 10.0, 2001).unwrap();
        let u = ModeFunction::from_fn(g, 1, Rep::U, 2.0, 2, |t| c(if (0.0..=1.0).contains(&t) { 1.0 } else { 0.0 }))
            .unwrap();
        let out = apply_phi1(&u, &k).unwrap();
        for i in 0..g.n() {
            let t = g.t(i);
            if t > 1.2 && t < 5.0 {
                let want = ((-3.0 * (t - 1.0)).exp() - (-3.0 * t).exp()) / 3.0;
                assert!((out.samples()[i].re - want).abs() < 2.0 * g.h(), "{t}");
            }
        }
        let z = ModeFunction::zeros(g, 1, Rep::U, 2.0, 2);
        assert!(apply_phi1(&z, &k).unwrap().samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn fast_direct_and_matrix_agree() {
        let p = VortexParams::new(0.5, 1.0, 2, 2.0).unwrap();
        let k = KernelK1::new(2, 2.0, 2).unwrap();
        let g = LogGrid::new(-6.0, 6.0, 200).unwrap();
        let u: Vec<C64> = g.points().iter().map(|t| C64::new((-t * t).exp(), (t * 0.3).sin() * (-t * t / 4.0).exp())).collect();
        for op in [Phi1::new(g, k), Phi1::with_phase(g, k, &p)] {
            let a = op.apply(&u);
            let b = op.apply_direct(&u);
            let m = op.matrix();
            for i in 0..g.n() {
                let mut mv = C64::new(0.0, 0.0);
                for j in 0..g.n() {
                    mv += m[(i, j)] * u[j];
                }
                assert!((a[i] - b[i]).norm() < 1e-13);
                assert!((a[i] - mv).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn psi_inverts_relation() {
        let p = VortexParams::new(0.5, 1.0, 2, 2.0).unwrap();
        let g = LogGrid::new(-12.0, 12.0, 2401).unwrap();
        let u = ModeFunction::from_fn(g, 1, Rep::U, 2.0, 2, |t| c((-t * t).exp())).unwrap();
        let sol = psi_from_u(&u, &p, 1).unwrap();
        let back = second_order_relation(&sol.psi, &p, 1).unwrap();
        let (lo, hi) = g.interior(2.0);
        let num: Vec<C64> = (lo..hi).map(|i| back.samples()[i] - u.samples()[i]).collect();
        let den: Vec<C64> = (lo..hi).map(|i| u.samples()[i]).collect();
        let rel = crate::grid::lq_norm_samples(&num, g.h(), 2.0) / crate::grid::lq_norm_samples(&den, g.h(), 2.0);
        assert!(rel < 1e-5, "{rel}");
        // psi(0) = c2 + c3
        let i0 = 1200;
        assert!(g.t(i0).abs() < 1e-12);
        assert!((sol.psi.samples()[i0] - sol.c2 - sol.c3).norm() < 1e-12);
        assert!(psi_from_u(&u, &p, 0).is_err());
    }

    #[test]
    fn psi_tail_slopes() {
        let p = VortexParams::new(0.5, 1.0, 2, 2.0).unwrap();
        let g = LogGrid::new(-12.0, 12.0, 2401).unwrap();
        let u = ModeFunction::from_fn(g, 1, Rep::U, 2.0, 2, |t| {
            c(if t.abs() < 1.0 { (1.0 - t * t).powi(4) } else { 0.0 })
        })
        .unwrap();
        let sol = psi_from_u(&u, &p, 1).unwrap();
        let s = sol.psi.samples();
        let slope = |a: usize, b: usize| (s[b].norm().ln() - s[a].norm().ln()) / (g.t(b) - g.t(a));
        // right tail e^{-A+ t}, left tail e^{A- t}
        assert!((slope(1500, 1700) + 3.0).abs() < 1e-6);
        assert!((slope(700, 900) - 1.0).abs() < 1e-6);
    }
}
