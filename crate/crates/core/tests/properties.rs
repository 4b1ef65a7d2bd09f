use effcap::channel::{gram, sample_indexed, ChannelModel};
use effcap::engine::{waterfill, CovarianceStrategy, QosScenario, RateSampler};
use effcap::linalg::{hermitian_eig, hermitian_eigenvalues, CMat};
use effcap::queue::{lindley, trace_from_services};
use effcap::special::{confluent_1f1, gamma_fn, gauss_laguerre, upper_incomplete_gamma};
use num_complex::Complex64;
use proptest::prelude::*;

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

fn hermitian(n: usize, vals: &[f64]) -> CMat {
    let mut k = 0;
    let mut a = CMat::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = Complex64::new(vals[k], 0.0);
        k += 1;
        for j in (i + 1)..n {
            let z = Complex64::new(vals[k], vals[k + 1]);
            k += 2;
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    a
}

// Simpson's rule on [0, 1], n even.
fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laguerre_integrates_monomials_exactly(n in 2usize..40, k in 0u32..30) {
        let k = k.min(2 * n as u32 - 1);
        let rule = gauss_laguerre(n).unwrap();
        let got = rule.integrate(|x| x.powi(k as i32));
        let want = factorial(k);
        prop_assert!(((got - want) / want).abs() < 1e-10, "n={n} k={k} got={got} want={want}");
    }

    #[test]
    fn incomplete_gamma_recurrence(alpha in -5.0f64..5.0, x in 0.1f64..10.0) {
        // Γ(α+1, x) = αΓ(α, x) + x^α e^{−x}
        let lhs = upper_incomplete_gamma(alpha + 1.0, x).unwrap();
        let g = upper_incomplete_gamma(alpha, x).unwrap();
        let term = x.powf(alpha) * (-x).exp();
        let scale = (alpha * g).abs() + term;
        prop_assert!((lhs - alpha * g - term).abs() <= 1e-10 * scale, "α={alpha} x={x}");
    }

    #[test]
    fn confluent_series_matches_euler_integral(a in 4.0f64..7.0, c in 4.0f64..7.0, z in -10.0f64..10.0) {
        let b = a + c;
        let norm = gamma_fn(b).unwrap() / (gamma_fn(a).unwrap() * gamma_fn(c).unwrap());
        let integral = simpson(|t| (z * t).exp() * t.powf(a - 1.0) * (1.0 - t).powf(c - 1.0), 20_000);
        let want = norm * integral;
        let got = confluent_1f1(a, b, z).unwrap();
        prop_assert!(((got - want) / want).abs() < 1e-8, "a={a} b={b} z={z} got={got} want={want}");
    }

    #[test]
    fn eigendecomposition_reconstructs(n in 1usize..=8, vals in prop::collection::vec(-3.0f64..3.0, 64)) {
        let a = hermitian(n, &vals);
        let e = hermitian_eig(&a).unwrap();
        let scale = a.frobenius_norm().max(1.0);
        prop_assert!((&e.reconstruct() - &a).max_abs() <= 1e-10 * scale);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let vv = &e.vectors.adjoint() * &e.vectors;
        prop_assert!((&vv - &CMat::identity(n)).max_abs() < 1e-12);
    }

    #[test]
    fn gram_trace_and_max_eigenvalue(n_r in 1usize..5, n_t in 1usize..5, seed in any::<u64>()) {
        let model = ChannelModel::iid(n_r, n_t).unwrap();
        let h = sample_indexed(&model, seed, 0);
        let eigs = hermitian_eigenvalues(&gram(&h)).unwrap();
        let tr = h.entries.frobenius_norm_sq();
        let sum: f64 = eigs.iter().sum();
        prop_assert!((sum - tr).abs() <= 1e-12 * tr.max(1.0));
        prop_assert!(eigs[0] <= tr * (1.0 + 1e-12));
        prop_assert!(eigs[0] * n_t as f64 >= tr * (1.0 - 1e-12));
    }

    #[test]
    fn waterfill_satisfies_kkt(eigs in prop::collection::vec(0.0f64..10.0, 1..8), gain in 0.01f64..100.0) {
        let w = waterfill(&eigs, gain).unwrap();
        let total: f64 = w.powers.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(w.powers.iter().all(|&d| d >= 0.0));
        if !w.degenerate {
            for (&l, &d) in eigs.iter().zip(&w.powers) {
                if d > 1e-12 {
                    prop_assert!((d + 1.0 / (gain * l) - w.level).abs() <= 1e-9 * w.level.max(1.0));
                } else if l > 0.0 {
                    prop_assert!(1.0 / (gain * l) >= w.level * (1.0 - 1e-9));
                }
            }
        }
    }

    #[test]
    fn waterfilling_dominates_uniform(
        n_r in 1usize..4, n_t in 1usize..4, snr_db in -10.0f64..20.0, theta_hat in 0.0f64..4.0, seed in any::<u64>()
    ) {
        let model = ChannelModel::iid(n_r, n_t).unwrap();
        let snr = effcap::from_db(snr_db);
        let wf = RateSampler::new(&model, &CovarianceStrategy::WaterfillingCsit, 400, seed).unwrap();
        let un = RateSampler::new(&model, &CovarianceStrategy::UniformIdentity, 400, seed).unwrap();
        let a = wf.effective_rate(theta_hat, snr).unwrap().value;
        let b = un.effective_rate(theta_hat, snr).unwrap().value;
        prop_assert!(a >= b * (1.0 - 1e-12), "waterfill {a} < uniform {b}");
        let erg = un.ergodic_rate(snr).unwrap().value;
        prop_assert!(b <= erg * (1.0 + 1e-12));
    }

    #[test]
    fn effective_rate_nonincreasing_in_theta(
        t1 in 0.0f64..6.0, dt in 0.0f64..6.0, snr_db in -10.0f64..30.0, seed in any::<u64>()
    ) {
        let model = ChannelModel::iid(2, 2).unwrap();
        let s = RateSampler::new(&model, &CovarianceStrategy::UniformIdentity, 300, seed).unwrap();
        let snr = effcap::from_db(snr_db);
        let lo = s.effective_rate(t1, snr).unwrap().value;
        let hi = s.effective_rate(t1 + dt, snr).unwrap().value;
        prop_assert!(hi <= lo * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn lindley_replay(arrival in 0.0f64..5.0, services in prop::collection::vec(0.0f64..10.0, 1..200)) {
        let q = lindley(arrival, &services);
        prop_assert_eq!(q.len(), services.len() + 1);
        prop_assert_eq!(q[0], 0.0);
        for i in 0..services.len() {
            prop_assert_eq!(q[i + 1], (q[i] + arrival - services[i]).max(0.0));
        }
        let t = trace_from_services(arrival, services);
        prop_assert!(t.queue_lengths.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn large_exponent_stays_finite() {
    let model = ChannelModel::iid(2, 2).unwrap();
    let s = RateSampler::new(&model, &CovarianceStrategy::UniformIdentity, 20_000, 5).unwrap();
    for snr_db in [-10.0, 0.0, 10.0, 30.0] {
        let snr = effcap::from_db(snr_db);
        let r = s.effective_rate(50.0, snr).unwrap();
        assert!(r.value.is_finite() && r.value >= 0.0 && r.std_err.is_finite());
        assert!(r.value <= s.ergodic_rate(snr).unwrap().value);
    }
}

#[test]
fn same_seed_any_worker_count() {
    let scenario = QosScenario::from_theta_hat(1.5, 1e-3, 1e5, 2, 3).unwrap();
    let model = ChannelModel::iid(2, 3).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let strategies = [
                CovarianceStrategy::UniformIdentity,
                CovarianceStrategy::WaterfillingCsit,
                CovarianceStrategy::BeamformingCsit,
                CovarianceStrategy::StatisticalOptimized,
            ];
            strategies
                .iter()
                .map(|st| {
                    let r = effcap::engine::effective_rate_mc(&scenario, &model, st, 3.0, 5_000, 17).unwrap();
                    (r.value.to_bits(), r.std_err.to_bits())
                })
                .collect::<Vec<_>>()
        })
    };
    assert_eq!(run(1), run(4));
    assert_eq!(run(4), run(3));
}
