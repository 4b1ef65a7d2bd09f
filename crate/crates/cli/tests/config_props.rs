use effcap::LOG2_E;
use effcap_cli::config::{Exponent, ModelBlock, RunConfig, StrategyName};
use effcap_cli::output::fmt_sig;
use effcap_cli::sweep::{sweep_table, SweepRow, SWEEP_HEADER};
use proptest::prelude::*;

fn arb_config() -> impl Strategy<Value = RunConfig> {
    (
        (any::<bool>(), 0.0f64..50.0, 1e-4f64..1.0, 1e3f64..1e8, 1usize..5, 1usize..5),
        (-60.0f64..0.0, 0.1f64..60.0, 1usize..200, 1usize..1_000_000, any::<u64>()),
        prop::sample::select(vec![StrategyName::Uniform, StrategyName::Waterfilling, StrategyName::Beamforming, StrategyName::Statistical]),
        (any::<bool>(), -1.0f64..1.0),
    )
        .prop_map(|((use_theta, e, t, b, n_r, n_t), (start, span, points, samples, seed), name, (kron, rho))| {
            let mut c = RunConfig::default();
            c.scenario.exponent = if use_theta { Exponent::Theta(e) } else { Exponent::ThetaHat(e) };
            c.scenario.t = t;
            c.scenario.b = b;
            c.scenario.n_r = n_r;
            c.scenario.n_t = n_t;
            c.sweep.snr_db_start = start;
            c.sweep.snr_db_stop = start + span;
            c.sweep.n_points = points;
            c.mc.n_samples = samples;
            c.mc.seed = seed;
            c.strategy.name = name;
            if kron {
                let corr = |n: usize| {
                    effcap::linalg::CMat::from_fn(n, n, |i, j| {
                        num_complex::Complex64::new(rho.abs().powi((i as i32 - j as i32).abs()), 0.1 * rho * (i as f64 - j as f64))
                    })
                };
                c.model = ModelBlock::Kronecker { r_r: corr(n_r), r_t: corr(n_t) };
            }
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_serialize_parse_is_identity(cfg in arb_config()) {
        let text = cfg.serialize();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.serialize(), text);
    }

    #[test]
    fn derived_exponent_is_consistent(cfg in arb_config()) {
        let sc = cfg.scenario().unwrap();
        let want = sc.theta() * sc.t() * sc.b() * LOG2_E;
        prop_assert!((sc.theta_hat() - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn csv_schema_is_fixed(n in 0usize..5, x in -1e6f64..1e6) {
        let rows: Vec<SweepRow> = (0..n)
            .map(|i| SweepRow {
                snr_db: x + i as f64,
                snr: 1.0,
                rate_total: x,
                rate_per_dim: x,
                std_err: 0.0,
                eb_n0_db: x,
                strategy: "uniform",
                theta_hat: 1.0,
                n_r: 1,
                n_t: 1,
                n_samples: 10,
                seed: 3,
            })
            .collect();
        let text = sweep_table(&rows).to_csv_string();
        let mut lines = text.lines();
        prop_assert_eq!(lines.next().unwrap(), SWEEP_HEADER.join(","));
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            prop_assert_eq!(fields.len(), SWEEP_HEADER.len());
            prop_assert_eq!(fields[2], fmt_sig(x));
        }
    }
}
