//! Numerical oracles shared by the integration tests.

#![allow(dead_code)]

use hms_core::arith::kronecker;
use hms_core::field::{Place, RealQuadraticField};
use num_traits::ToPrimitive;

/// ψ'(x) for x > 0 by recurrence and the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 30.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = x * x;
    acc + 1.0 / x + 1.0 / (2.0 * x2) + 1.0 / (6.0 * x2 * x) - 1.0 / (30.0 * x2 * x2 * x) + 1.0 / (42.0 * x2 * x2 * x2 * x)
        - 1.0 / (30.0 * x2 * x2 * x2 * x2 * x)
}

/// ζ_F(−1) = d_F^{3/2} ζ(2) L(2, χ_F) / (4π⁴) with L(2, χ) = d⁻² Σ_a χ(a) ψ'(a/d).
pub fn zeta_minus_one_numeric(disc: i64) -> f64 {
    let pi = std::f64::consts::PI;
    let df = disc as f64;
    let l2: f64 = (1..disc).map(|a| kronecker(disc, a) as f64 * trigamma(a as f64 / df)).sum::<f64>() / (df * df);
    df.powf(1.5) * (pi * pi / 6.0) * l2 / (4.0 * pi.powi(4))
}

/// Absolute error of the exact ζ_F(−1) against the numeric value.
pub fn zeta_error(f: &RealQuadraticField) -> f64 {
    (zeta_minus_one_numeric(f.disc) - f.zeta_minus_one().to_f64().unwrap()).abs()
}

/// h log ε = −½ Σ_{0<a<d} χ(a) log sin(πa/d), or None when the sum is not near an integer.
pub fn analytic_class_number(f: &RealQuadraticField) -> Option<u64> {
    let d = f.disc;
    let s: f64 = (1..d)
        .map(|a| kronecker(d, a) as f64 * (std::f64::consts::PI * a as f64 / d as f64).sin().ln())
        .sum();
    let h = -s / (2.0 * f.eps.approx_at(Place::V).ln());
    ((h - h.round()).abs() < 1e-6).then_some(h.round() as u64)
}
