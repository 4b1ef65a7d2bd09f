use crate::error::{domain, numeric, Result};

const MAX_TERMS: usize = 10_000;
const REL_TOL: f64 = 1e-13;

/// Kummer's confluent hypergeometric function ₁F₁(a; b; z) by direct series
/// summation, `Σ (a)ₖ zᵏ / ((b)ₖ k!)`.
///
/// Negative `z` is mapped through Kummer's transformation
/// `₁F₁(a; b; z) = e^z ₁F₁(b − a; b; −z)` so the summed series has terms of
/// one sign once `k` exceeds `−a`.
pub fn confluent_1f1(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && z.is_finite()) {
        return domain(format!("confluent_1f1: non-finite argument ({a}, {b}, {z})"));
    }
    if b <= 0.0 && b == b.floor() {
        return domain(format!("confluent_1f1: b = {b} is a pole"));
    }
    if z.abs() > 50.0 {
        return domain(format!("confluent_1f1: |z| = {} exceeds 50", z.abs()));
    }
    if z < 0.0 {
        return Ok(z.exp() * series(b - a, b, -z)?);
    }
    series(a, b, z)
}

fn series(a: f64, b: f64, z: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut comp = 0.0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let next = term * (a + kf) * z / ((b + kf) * (kf + 1.0));
        if next == 0.0 {
            return Ok(sum + comp);
        }
        let t = sum + next;
        comp += if sum.abs() >= next.abs() { (sum - t) + next } else { (next - t) + sum };
        sum = t;
        let decreasing = next.abs() <= term.abs();
        term = next;
        if decreasing && term.abs() <= REL_TOL * (sum + comp).abs() {
            return Ok(sum + comp);
        }
    }
    numeric(format!("confluent_1f1: series did not converge in {MAX_TERMS} terms at ({a}, {b}, {z})"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    #[test]
    fn zero_argument_is_one() {
        for (a, b) in [(1.0, 2.0), (-2.5, 0.5), (3.0, -1.5)] {
            assert_eq!(confluent_1f1(a, b, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn equal_parameters_give_exponential() {
        assert_relative_eq!(confluent_1f1(2.0, 2.0, 1.0).unwrap(), E, max_relative = 1e-14);
        assert_relative_eq!(confluent_1f1(2.0, 2.0, -3.0).unwrap(), (-3.0f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn one_two_one() {
        assert_relative_eq!(confluent_1f1(1.0, 2.0, 1.0).unwrap(), E - 1.0, max_relative = 1e-14);
    }

    #[test]
    fn terminating_series() {
        // ₁F₁(−2; 1; z) = 1 − 2z + z²/2
        let z = 0.7;
        assert_relative_eq!(confluent_1f1(-2.0, 1.0, z).unwrap(), 1.0 - 2.0 * z + z * z / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn rejects_poles_and_large_arguments() {
        assert!(matches!(confluent_1f1(1.0, -2.0, 1.0), Err(crate::Error::Domain(_))));
        assert!(matches!(confluent_1f1(1.0, 2.0, 60.0), Err(crate::Error::Domain(_))));
    }
}
