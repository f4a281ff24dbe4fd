//! Quadrature: Gauss-Legendre rules, adaptive Gauss-Kronrod, and exact-kernel
//! product weights for cubic interpolation on a uniform grid.

use std::sync::OnceLock;

use crate::C64;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
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
    (x, w)
}

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(8))
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

fn gk15(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let d = r * XGK[j];
        let s = f(c - d) + f(c + d);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * r, ((k - g) * r).norm())
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: C64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> C64, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_intervals: usize) -> Integral {
    if a == b {
        return Integral { value: C64::new(0.0, 0.0), error: 0.0, intervals: 0 };
    }
    let mut heap = std::collections::BinaryHeap::new();
    let (v, e) = gk15(&f, a, b);
    heap.push(Piece { lo: a, hi: b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    let mut rounds = 0usize;
    while err > abs_tol.max(rel_tol * total.norm()) && heap.len() < max_intervals {
        let Some(p) = heap.pop() else { break };
        let mid = 0.5 * (p.lo + p.hi);
        if !(mid > p.lo && mid < p.hi) {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&f, p.lo, mid);
        let (v2, e2) = gk15(&f, mid, p.hi);
        heap.push(Piece { lo: p.lo, hi: mid, value: v1, error: e1 });
        heap.push(Piece { lo: mid, hi: p.hi, value: v2, error: e2 });
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        rounds += 1;
        // resum now and then to keep the running totals honest
        if rounds % 1024 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.error).sum();
        }
    }
    let total: C64 = heap.iter().map(|p| p.value).sum();
    let err: f64 = heap.iter().map(|p| p.error).sum();
    Integral { value: total, error: err, intervals: heap.len() }
}

/// First point of the 4-point interpolation stencil used on cell `c`.
pub fn stencil_start(c: usize, n: usize) -> usize {
    c.saturating_sub(1).min(n - 4)
}

/// Lagrange cardinal polynomials through the integer offsets `d`, as
/// monomial coefficients in the local variable `u = (s - t_c)/h`.
fn cardinal_coeffs(d: [f64; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut p = [1.0, 0.0, 0.0, 0.0];
        let mut den = 1.0;
        for m in 0..4 {
            if m == j {
                continue;
            }
            let mut np = [0.0; 4];
            for e in 0..3 {
                np[e + 1] += p[e];
                np[e] -= d[m] * p[e];
            }
            p = np;
            den *= d[j] - d[m];
        }
        for e in 0..4 {
            out[j][e] = p[e] / den;
        }
    }
    out
}

fn poly(c: &[f64; 4], u: f64) -> f64 {
    ((c[3] * u + c[2]) * u + c[1]) * u + c[0]
}

/// Phase factor `e^{i sign gamma e^{-alpha s}}` attached to a kernel.
#[derive(Debug, Clone, Copy)]
pub struct Phase {
    pub gamma: f64,
    pub alpha: f64,
    pub sign: f64,
}

impl Phase {
    pub fn value(&self, s: f64) -> f64 {
        self.sign * self.gamma * (-self.alpha * s).exp()
    }
}

const PHASE_PER_NODE_BLOCK: f64 = 0.5;
const ASYMPTOTIC_PHASE: f64 = 256.0;

/// Weights `w_j = int_0^h e^{sigma x} E(t_c + x) l_j(x/h) dx` for the four
/// cardinal polynomials of cell `c`, with `E` the optional phase factor.
pub fn cell_weights(t_c: f64, h: f64, offsets: [f64; 4], sigma: C64, phase: Option<Phase>) -> [C64; 4] {
    let card = cardinal_coeffs(offsets);
    let dphi = phase.map_or(0.0, |p| p.gamma * ((-p.alpha * t_c).exp() - (-p.alpha * (t_c + h)).exp()));
    if let Some(ph) = phase {
        if dphi > ASYMPTOTIC_PHASE {
            return asymptotic_weights(t_c, h, &card, sigma, ph);
        }
    }
    let blocks = ((dphi / PHASE_PER_NODE_BLOCK).ceil() as usize)
        .max((sigma.norm() * h).ceil() as usize)
        .max(1);
    let (xs, ws) = gl8();
    let sub = h / blocks as f64;
    let mut out = [C64::new(0.0, 0.0); 4];
    for b in 0..blocks {
        let x0 = b as f64 * sub;
        for (xi, wi) in xs.iter().zip(ws) {
            let x = x0 + 0.5 * sub * (xi + 1.0);
            let mut kv = (sigma * x).exp() * (0.5 * sub * wi);
            if let Some(ph) = phase {
                kv *= C64::from_polar(1.0, ph.value(t_c + x));
            }
            let u = x / h;
            for j in 0..4 {
                out[j] += kv * poly(&card[j], u);
            }
        }
    }
    out
}

/// Repeated integration by parts against the phase, valid when the phase
/// turns through many radians inside the cell.
fn asymptotic_weights(t_c: f64, h: f64, card: &[[f64; 4]; 4], sigma: C64, ph: Phase) -> [C64; 4] {
    // E' = -i sign alpha gamma e^{-alpha s} E, so E = (u E)' with u = c e^{alpha x}
    let cu = C64::new(0.0, 1.0) * ((ph.alpha * t_c).exp() / (ph.sign * ph.alpha * ph.gamma));
    let e0 = C64::from_polar(1.0, ph.value(t_c));
    let e1 = C64::from_polar(1.0, ph.value(t_c + h));
    let mut out = [C64::new(0.0, 0.0); 4];
    for j in 0..4 {
        // f_n = C_n e^{(sigma + n alpha) x} P_n(x), coefficients in x
        let mut p: Vec<C64> = (0..4).map(|e| C64::new(card[j][e] / h.powi(e as i32), 0.0)).collect();
        let mut cn = C64::new(1.0, 0.0);
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..12 {
            let rate = sigma + ph.alpha * (n + 1) as f64;
            let pv = |x: f64| p.iter().rev().fold(C64::new(0.0, 0.0), |a, c| a * x + c);
            let term = cn * cu * ((rate * h).exp() * pv(h) * e1 - pv(0.0) * e0);
            let signed = if n % 2 == 0 { term } else { -term };
            acc += signed;
            if n >= 4 && term.norm() <= 1e-17 * acc.norm() {
                break;
            }
            let mut np: Vec<C64> = p.iter().map(|c| c * rate).collect();
            for e in 1..p.len() {
                np[e - 1] += p[e] * e as f64;
            }
            p = np;
            cn *= cu;
        }
        out[j] = acc;
    }
    out
}

/// Offsets of the stencil of cell `c` relative to the cell's left node.
pub fn stencil_offsets(c: usize, n: usize) -> (usize, [f64; 4]) {
    let s0 = stencil_start(c, n);
    let d = s0 as f64 - c as f64;
    (s0, [d, d + 1.0, d + 2.0, d + 3.0])
}
