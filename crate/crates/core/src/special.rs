//! Error-function helpers on top of `libm`.

use std::f64::consts::PI;

pub(crate) fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub(crate) fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function exp(x²)·erfc(x), for x ≥ 0.
pub(crate) fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 25.0 {
        (x * x).exp() * libm::erfc(x)
    } else {
        // Asymptotic series; the first omitted term is below 1e-12 relative here.
        let r = 1.0 / (2.0 * x * x);
        (1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)))) / (x * PI.sqrt())
    }
}

/// exp(a)·erfc(x) without overflow in the intermediate factors, x ≥ 0.
pub(crate) fn exp_erfc(a: f64, x: f64) -> f64 {
    if x < 0.0 {
        return a.exp() * libm::erfc(x);
    }
    (a - x * x).exp() * erfcx(x)
}
