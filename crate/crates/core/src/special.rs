//! Complex gamma function via the Lanczos approximation (g = 7, 9 terms).

use std::f64::consts::PI;

use crate::C64;

const G: f64 = 7.0;
const COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// True when `z` is exactly a nonpositive integer.
pub fn is_gamma_pole(z: C64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// `ln Gamma(z)` on the principal branch for `Re z >= 1/2`.
fn ln_gamma_right(z: C64) -> C64 {
    let z = z - 1.0;
    let mut x = C64::new(COEF[0], 0.0);
    for (i, c) in COEF.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

pub fn gamma(z: C64) -> C64 {
    let r = rgamma(z);
    if r == C64::new(0.0, 0.0) {
        C64::new(f64::INFINITY, 0.0)
    } else {
        1.0 / r
    }
}

/// `1 / Gamma(z)`, entire, exactly zero at the poles of `Gamma`.
pub fn rgamma(z: C64) -> C64 {
    if is_gamma_pole(z) {
        return C64::new(0.0, 0.0);
    }
    if z.re < 0.5 {
        // reflection: 1/Gamma(z) = sin(pi z) Gamma(1 - z) / pi
        return (PI * z).sin() * (ln_gamma_right(1.0 - z)).exp() / PI;
    }
    (-ln_gamma_right(z)).exp()
}
