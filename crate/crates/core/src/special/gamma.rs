use std::f64::consts::PI;

use super::quadrature::integrate_adaptive;
use crate::error::{domain, numeric, Result};

// Lanczos approximation, g = 607/128, 15 terms (Godfrey's coefficients).
const LANCZOS_G: f64 = 607.0 / 128.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_923_517,
    -59.597_960_355_475_491_248,
    14.136_097_974_741_747_174,
    -0.491_913_816_097_620_199_78,
    0.339_946_499_848_118_886_99e-4,
    0.465_236_289_270_485_756_65e-4,
    -0.983_744_753_048_795_646_77e-4,
    0.158_088_703_224_912_488_84e-3,
    -0.210_264_441_724_104_883_19e-3,
    0.217_439_618_115_212_643_20e-3,
    -0.164_318_106_536_763_890_22e-3,
    0.844_182_239_838_527_432_93e-4,
    -0.261_908_384_015_814_086_70e-4,
    0.368_991_826_595_316_227_04e-5,
];

#[allow(clippy::excessive_precision)]
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_78;

fn lanczos_sum(xm1: f64) -> f64 {
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (xm1 + i as f64);
    }
    a
}

/// `sin(πx)` with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    let r = x.rem_euclid(2.0);
    // r ∈ [0, 2): fold to [-0.5, 0.5] keeping track of sign.
    let (r, sign) = if r > 1.0 { (r - 1.0, -1.0) } else { (r, 1.0) };
    let r = if r > 0.5 { 1.0 - r } else { r };
    sign * (PI * r).sin()
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// The Gamma function Γ(x).
///
/// Positive integers up to 171 are evaluated as exact running products;
/// arguments below 1/2 use the reflection formula.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("gamma_fn: non-finite argument {x}"));
    }
    if is_nonpositive_integer(x) {
        return domain(format!("gamma_fn: pole at {x}"));
    }
    if x == x.floor() && x <= 171.0 {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return Ok(f);
    }
    if x < 0.5 {
        let s = sin_pi(x);
        return Ok(PI / (s * gamma_fn(1.0 - x)?));
    }
    let xm1 = x - 1.0;
    let t = xm1 + LANCZOS_G + 0.5;
    let a = lanczos_sum(xm1);
    // split the power so t^(x-1/2) stays representable up to x ≈ 171
    let half = t.powf(0.5 * (xm1 + 0.5));
    Ok((2.0 * PI).sqrt() * half * (-t).exp() * half * a)
}

/// `ln|Γ(x)|`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("ln_gamma: non-finite argument {x}"));
    }
    if is_nonpositive_integer(x) {
        return domain(format!("ln_gamma: pole at {x}"));
    }
    if x < 0.5 {
        return Ok(PI.ln() - sin_pi(x).abs().ln() - ln_gamma(1.0 - x)?);
    }
    if x < 20.0 {
        return Ok(gamma_fn(x)?.abs().ln());
    }
    let xm1 = x - 1.0;
    let t = xm1 + LANCZOS_G + 0.5;
    Ok(LN_SQRT_2PI + (xm1 + 0.5) * t.ln() - t + lanczos_sum(xm1).ln())
}

/// Upper incomplete Gamma function Γ(α, x) = ∫ₓ^∞ t^(α−1) e^(−t) dt, x > 0.
///
/// Any real α is accepted. For α ≤ 0 (and small positive α near the origin)
/// the function is evaluated from
/// `Γ(α, x) = x^α ∫₀^∞ exp(αv − x·e^v) dv`,
/// which has a positive integrand and therefore no cancellation.
pub fn upper_incomplete_gamma(alpha: f64, x: f64) -> Result<f64> {
    if !(alpha.is_finite() && x.is_finite()) {
        return domain(format!("upper_incomplete_gamma: non-finite argument ({alpha}, {x})"));
    }
    if x <= 0.0 {
        return domain(format!("upper_incomplete_gamma: x must be positive, got {x}"));
    }
    if alpha > 0.0 && x >= alpha + 1.0 {
        continued_fraction(alpha, x)
    } else if alpha >= 1.0 {
        Ok(gamma_fn(alpha)? - lower_series(alpha, x)?)
    } else {
        log_integral(alpha, x)
    }
}

/// Lower incomplete gamma γ(α, x) by its power series.
fn lower_series(alpha: f64, x: f64) -> Result<f64> {
    let mut ap = alpha;
    let mut del = 1.0 / alpha;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            return Ok(sum * (alpha * x.ln() - x).exp());
        }
    }
    numeric(format!("incomplete gamma series did not converge at ({alpha}, {x})"))
}

/// Γ(α, x) by the modified Lentz continued fraction.
fn continued_fraction(alpha: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - alpha;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - alpha);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            return Ok((alpha * x.ln() - x).exp() * h);
        }
    }
    numeric(format!("incomplete gamma continued fraction did not converge at ({alpha}, {x})"))
}

fn log_integral(alpha: f64, x: f64) -> Result<f64> {
    let f = |v: f64| (alpha * v - x * v.exp()).exp();
    // the integrand peaks at v* = ln(α/x) when that is positive
    let peak = if alpha > 0.0 { (alpha / x).ln().max(0.0) } else { 0.0 };
    let peak_log = alpha * peak - x * peak.exp();
    let mut upper = peak + 1.0;
    while alpha * upper - x * upper.exp() > peak_log - 745.0 + 40.0 {
        upper = 2.0 * upper + 1.0;
        if upper > 1e4 {
            return numeric(format!("incomplete gamma integral range diverged at ({alpha}, {x})"));
        }
    }
    let head = if peak > 0.0 { integrate_adaptive(f, 0.0, peak, 1e-14)? } else { 0.0 };
    let tail = integrate_adaptive(f, peak, upper, 1e-14)?;
    Ok(x.powf(alpha) * (head + tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_known_values() {
        assert_eq!(gamma_fn(1.0).unwrap(), 1.0);
        assert_eq!(gamma_fn(5.0).unwrap(), 24.0);
        assert_relative_eq!(gamma_fn(0.5).unwrap(), PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma_fn(-0.5).unwrap(), -2.0 * PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma_fn(1.5).unwrap(), 0.5 * PI.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn gamma_poles_are_domain_errors() {
        for x in [0.0, -1.0, -7.0] {
            assert!(matches!(gamma_fn(x), Err(crate::Error::Domain(_))));
        }
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for x in [0.3, 2.7, 15.5, 19.99, 20.01, 45.2, -3.3] {
            assert_relative_eq!(
                ln_gamma(x).unwrap(),
                gamma_fn(x).unwrap().abs().ln(),
                max_relative = 1e-13,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn incomplete_gamma_elementary_cases() {
        assert_relative_eq!(upper_incomplete_gamma(1.0, 2.0).unwrap(), (-2.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(upper_incomplete_gamma(2.0, 1e-12).unwrap(), 1.0, max_relative = 1e-10);
        // Γ(0, x) = E1(x); E1(1) = 0.21938393439552027...
        assert_relative_eq!(upper_incomplete_gamma(0.0, 1.0).unwrap(), 0.219_383_934_395_520_27, max_relative = 1e-13);
    }

    #[test]
    fn incomplete_gamma_small_x_limit_for_negative_alpha() {
        let alpha = -1.5;
        let x = 1e-8;
        let ratio = upper_incomplete_gamma(alpha, x).unwrap() / x.powf(alpha);
        assert_relative_eq!(ratio, 1.0 / 1.5, max_relative = 1e-5);
    }

    #[test]
    fn incomplete_gamma_branches_agree() {
        // the continued fraction and the integral representation overlap here
        for (a, x) in [(0.5, 3.0), (0.9, 2.5), (0.2, 10.0)] {
            let cf = continued_fraction(a, x).unwrap();
            let li = log_integral(a, x).unwrap();
            assert_relative_eq!(cf, li, max_relative = 1e-12);
        }
        for (a, x) in [(1.5, 0.7), (3.0, 2.0)] {
            let s = gamma_fn(a).unwrap() - lower_series(a, x).unwrap();
            let li = log_integral(a, x).unwrap();
            assert_relative_eq!(s, li, max_relative = 1e-12);
        }
    }

    #[test]
    fn sin_pi_is_exact_at_integers() {
        for k in -5..5 {
            assert_eq!(sin_pi(k as f64), 0.0);
        }
        assert_relative_eq!(sin_pi(0.5), 1.0);
        assert_relative_eq!(sin_pi(-0.25), -(PI / 4.0).sin(), max_relative = 1e-15);
    }
}
