//! Order-fixed accumulation helpers shared by the Monte Carlo estimators.

/// Neumaier-compensated sum over a slice in index order.
pub(crate) fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `ln(mean(exp(x)))` with the maximum exponent factored out.
///
/// Returns `(log_mean, max_exponent, mean_scaled, var_scaled)` where the
/// scaled quantities refer to `exp(x - max)`; they feed the delta-method
/// standard error.
pub(crate) struct LogMeanExp {
    pub log_mean: f64,
    pub max_exponent: f64,
    pub mean_scaled: f64,
    pub var_scaled: f64,
}

pub(crate) fn log_mean_exp(exponents: &[f64]) -> LogMeanExp {
    let n = exponents.len() as f64;
    let m = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // expm1 keeps full precision when every exponent sits close to the max,
    // which is the low-SNR / small-θ regime.
    let mean_m1 = sum(exponents.iter().map(|x| (x - m).exp_m1())) / n;
    let mean_scaled = 1.0 + mean_m1;
    let var_scaled = if exponents.len() > 1 {
        sum(exponents.iter().map(|x| {
            let d = (x - m).exp_m1() - mean_m1;
            d * d
        })) / (n - 1.0)
    } else {
        0.0
    };
    LogMeanExp {
        log_mean: m + mean_m1.ln_1p(),
        max_exponent: m,
        mean_scaled,
        var_scaled,
    }
}

/// Ordinary least-squares line fit; returns `(slope, intercept, r_squared)`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = sum(xs.iter().copied()) / n;
    let my = sum(ys.iter().copied()) / n;
    let sxx = sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let syy = sum(ys.iter().map(|y| (y - my) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_mean_exp_matches_direct_evaluation() {
        let xs = [-1.0, -2.0, 0.5, -0.25];
        let direct = (xs.iter().map(|x: &f64| x.exp()).sum::<f64>() / 4.0).ln();
        assert!((log_mean_exp(&xs).log_mean - direct).abs() < 1e-14);
    }

    #[test]
    fn log_mean_exp_survives_huge_exponents() {
        let xs = [-5000.0, -5001.0];
        let r = log_mean_exp(&xs);
        assert!(r.log_mean.is_finite());
        let expected = -5000.0 + ((1.0 + (-1f64).exp()) / 2.0).ln();
        assert!((r.log_mean - expected).abs() < 1e-10);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 5.0).collect();
        let (s, i, r2) = linear_fit(&xs, &ys);
        assert!((s - 3.0).abs() < 1e-12 && (i + 5.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
