//! Cross-checks against independently computed reference values.

use effcap::asymptotics::{
    hankel_effective_rate, hankel_mgf, highsnr_metrics, siso_mgf_incomplete_gamma, sparse_ebmin_sublinear, HighSnrRegime,
};
use effcap::channel::{mean_gram_mc, spectral_moments_mc, ChannelModel};
use effcap::engine::{effective_rate_mc, ergodic_rate_mc, CovarianceStrategy, QosScenario};
use effcap::linalg::CMat;
use effcap::queue::{estimate_tail_exponent, trace_from_services};
use effcap::rng::sample_stream;
use rand_distr::{Distribution, Exp1};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `∫₀^∞ f(x) e^{−x} dx` by composite Simpson on `[0, 60]`.
fn exp_weighted(f: impl Fn(f64) -> f64) -> f64 {
    let n = 600_000;
    let h = 60.0 / n as f64;
    let g = |x: f64| f(x) * (-x).exp();
    let mut s = g(0.0) + g(60.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    s * h / 3.0
}

fn scenario(theta_hat: f64, n_r: usize, n_t: usize) -> QosScenario {
    QosScenario::from_theta_hat(theta_hat, 1e-3, 1e5, n_r, n_t).unwrap()
}

#[test]
fn siso_ergodic_rate_matches_quadrature() {
    let model = ChannelModel::iid(1, 1).unwrap();
    for snr in [0.1, 1.0, 10.0] {
        let want = exp_weighted(|x| (1.0 + snr * x).log2());
        let got = ergodic_rate_mc(&model, &CovarianceStrategy::UniformIdentity, snr, 200_000, 3).unwrap();
        assert!((got.value - want).abs() < 4.0 * got.std_err, "snr {snr}: {} vs {want}", got.value);
    }
}

#[test]
fn siso_mgf_closed_form_matches_quadrature() {
    for theta_hat in [0.3, 0.5, 1.0, 1.7, 2.0, 3.5] {
        for snr in [0.5, 1.0, 10.0] {
            let want = exp_weighted(|x| (1.0 + snr * x).powf(-theta_hat));
            let closed = siso_mgf_incomplete_gamma(theta_hat, snr).unwrap();
            let hankel = hankel_mgf(&scenario(theta_hat, 1, 1), snr, 64).unwrap();
            assert!(((closed - want) / want).abs() < 1e-8, "θ̂ {theta_hat} snr {snr}: {closed} vs {want}");
            assert!(((hankel - want) / want).abs() < 1e-8, "θ̂ {theta_hat} snr {snr}: {hankel} vs {want}");
        }
    }
}

#[test]
fn hankel_rate_matches_monte_carlo() {
    for (n_r, n_t) in [(2, 2), (2, 3), (3, 1)] {
        let sc = scenario(1.0, n_r, n_t);
        let model = ChannelModel::iid(n_r, n_t).unwrap();
        let mc = effective_rate_mc(&sc, &model, &CovarianceStrategy::UniformIdentity, 5.0, 200_000, 11)
            .unwrap()
            .total(n_r);
        let h = hankel_effective_rate(&sc, 5.0, 64).unwrap();
        assert!((h - mc.value).abs() < 4.0 * mc.std_err, "{n_r}x{n_t}: {h} vs {}", mc.value);
    }
}

#[test]
fn iid_moment_identities() {
    let (n_r, n_t) = (2usize, 3usize);
    let m = spectral_moments_mc(&ChannelModel::iid(n_r, n_t).unwrap(), 200_000, 21).unwrap();
    let p = (n_r * n_t) as f64;
    let checks = [
        (m.e_trace, p, m.std_errs.e_trace),
        (m.e_trace_sq, p * (p + 1.0), m.std_errs.e_trace_sq),
        (m.e_trace_gram_sq, p * (n_r + n_t) as f64, m.std_errs.e_trace_gram_sq),
    ];
    for (got, want, se) in checks {
        assert!((got - want).abs() < 4.0 * se, "{got} vs {want} (se {se})");
    }
}

#[test]
fn kronecker_mean_gram_matches_sample_mean() {
    let r_r = CMat::from_real_rows(&[&[1.0, 0.5], &[0.5, 1.0]]);
    let r_t = CMat::from_real_rows(&[&[1.0, 0.7, 0.2], &[0.7, 1.0, 0.7], &[0.2, 0.7, 1.0]]);
    let model = ChannelModel::kronecker(r_r, r_t).unwrap();
    let exact = model.mean_gram();
    let est = mean_gram_mc(&model, 200_000, 4);
    assert!((&est - &exact).max_abs() < 0.03, "{:?}", (&est - &exact).max_abs());
}

#[test]
fn power_offset_against_wishart_determinant_moments() {
    // SISO, θ̂ → 0: −E{log₂|h|²} = γ·log₂e
    let m = highsnr_metrics(&scenario(0.0, 1, 1), &ChannelModel::iid(1, 1).unwrap(), 400_000, 8).unwrap();
    assert_eq!(m.regime_note, HighSnrRegime::FullMultiplexing);
    let want = EULER_GAMMA * std::f64::consts::LOG2_E;
    assert!((m.l_inf.unwrap() - want).abs() < 0.01 * want);

    // 2×2, θ̂ = 1/2: E{det(W)^{−1/2}} = Γ(1/2)Γ(3/2) = π/2
    let m = highsnr_metrics(&scenario(0.5, 2, 2), &ChannelModel::iid(2, 2).unwrap(), 400_000, 9).unwrap();
    let want = (std::f64::consts::PI / 2.0).ln() / (0.5 * std::f64::consts::LN_2 * 2.0);
    assert!((m.l_inf.unwrap() - want).abs() < 0.02 * want.abs(), "{:?} vs {want}", m.l_inf);
}

#[test]
fn sublinear_limit_iid_statistical() {
    for n_r in 1..=3 {
        let model = ChannelModel::iid(n_r, 2).unwrap();
        let eb = sparse_ebmin_sublinear(&model, &CovarianceStrategy::StatisticalOptimized, 0, 0).unwrap();
        let want = std::f64::consts::LN_2 / n_r as f64;
        assert!((eb.linear - want).abs() <= 1e-12 * want);
    }
}

#[test]
fn tail_fit_on_exponential_service() {
    // Exp(1) service, arrival ln2 per block: −ln E{e^{−θr}}/θ = ln(1+θ)/θ = ln2 at θ = 1
    let mut rng = sample_stream(77, 0);
    let services: Vec<f64> = (0..1_000_000).map(|_| Exp1.sample(&mut rng)).collect();
    let trace = trace_from_services(std::f64::consts::LN_2, services);
    let fit = estimate_tail_exponent(&trace, 0.90, 0.999).unwrap();
    assert!((fit.theta_est - 1.0).abs() < 0.15, "{}", fit.theta_est);
}
