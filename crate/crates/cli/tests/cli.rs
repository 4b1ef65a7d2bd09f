use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use effcap_cli::figures::{reproduce_figure, FigureOptions};
use effcap_cli::sweep::SWEEP_HEADER;

fn effcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_effcap")).args(args).output().expect("binary runs")
}

fn effcap_threads(args: &[&str], threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_effcap"))
        .env("RAYON_NUM_THREADS", threads.to_string())
        .args(args)
        .output()
        .expect("binary runs")
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

/// `E{log₂(1 + snr·x)}`, `x ~ Exp(1)`, by composite Simpson on `[0, 60]`.
fn siso_ergodic(snr: f64) -> f64 {
    let n = 200_000;
    let h = 60.0 / n as f64;
    let g = |x: f64| (1.0 + snr * x).log2() * (-x).exp();
    let mut s = g(0.0) + g(60.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    s * h / 3.0
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn ergodic_sweep_matches_quadrature() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scenario.theta_hat = 0\nsweep.snr_db_start = -10\nsweep.snr_db_stop = 20\nsweep.n_points = 7\nmc.n_samples = 100000\n",
    );
    let out = effcap(&["sweep", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows[0], SWEEP_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    assert_eq!(rows.len(), 8);
    for r in &rows[1..] {
        let snr: f64 = r[1].parse().unwrap();
        let rate: f64 = r[2].parse().unwrap();
        let se: f64 = r[4].parse().unwrap();
        let want = siso_ergodic(snr);
        assert!((rate - want).abs() < 4.0 * se, "snr {snr}: {rate} vs {want} (se {se})");
        assert_eq!(r[6], "uniform");
    }
}

#[test]
fn zero_point_sweep_is_a_config_error() {
    let out = effcap(&["sweep", "--set", "sweep.n_points=0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.n_points"));
}

#[test]
fn invalid_fields_are_all_listed() {
    let out = effcap(&["sweep", "--set", "sweep.snr_db_start=5", "--set", "sweep.snr_db_stop=1", "--set", "scenario.n_T=0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sweep.snr_db_start") && err.contains("scenario.n_T"), "{err}");
}

#[test]
fn same_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--samples", "5000", "--set", "scenario.n_R=2", "--set", "scenario.n_T=3", "--set", "strategy.name=waterfilling"];
    let a = effcap_threads(&args, 1);
    let b = effcap_threads(&args, 3);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let path = dir.path().join("out.csv");
    let p = path.to_str().unwrap();
    let mut with_out = args.to_vec();
    with_out.extend(["--out", p]);
    assert!(effcap(&with_out).status.success());
    assert_eq!(fs::read(&path).unwrap(), a.stdout);
}

#[test]
fn unknown_suite_and_figure_are_config_errors() {
    assert_eq!(effcap(&["validate", "everything"]).status.code(), Some(2));
    assert_eq!(effcap(&["reproduce-fig", "fig0"]).status.code(), Some(2));
    assert_eq!(effcap(&["sweep", "--set", "no.such.key=1"]).status.code(), Some(2));
}

#[test]
fn reports_have_expected_quantities() {
    let low = effcap(&["low-snr", "--samples", "20000", "--set", "scenario.n_R=2", "--set", "scenario.n_T=2"]);
    assert!(low.status.success());
    let text = String::from_utf8(low.stdout).unwrap();
    for k in ["first_deriv", "second_deriv", "eb_min_db", "s0_per_rx"] {
        assert!(text.contains(k), "{text}");
    }
    let high = effcap(&["high-snr", "--samples", "20000", "--set", "scenario.theta_hat=2"]);
    let text = String::from_utf8(high.stdout).unwrap();
    assert!(text.contains("s_inf,0.5"), "{text}");
}

#[test]
fn queue_validate_passes_and_exports_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = effcap(&["queue-validate", "--set", "queue.n_blocks=400000", "--trace", trace.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let t = fs::read_to_string(&trace).unwrap();
    assert!(t.starts_with("block_index,queue_bits\n0,0\n"));
    assert_eq!(t.lines().count(), 400_002);
}

#[test]
fn deterministic_channel_queue_is_vacuous() {
    let out = effcap(&["queue-validate", "--set", "model.variant=fixed", "--set", "model.H=1", "--set", "queue.n_blocks=100000"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("vacuous,true"));
}

#[test]
fn reproduce_fig_writes_one_file_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = effcap(&["reproduce-fig", "fig4", "--samples", "2000", "--quiet", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let mut names: Vec<String> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["fig4_n_T_15.csv", "fig4_n_T_2.csv", "fig4_n_T_3.csv", "fig4_n_T_4.csv", "fig4_n_T_8.csv"]);
}

#[test]
fn fig2_curves_share_the_minimum_bit_energy() {
    let curves = reproduce_figure("fig2", &FigureOptions { n_samples: 50_000, ..FigureOptions::default() }).unwrap();
    let mut lowest = Vec::new();
    for c in &curves {
        let rows = c.sweep().unwrap();
        assert!(rows.iter().all(|r| r.eb_n0_db >= -1.59 - 0.1));
        lowest.push(rows[0].eb_n0_db);
    }
    let spread = lowest.iter().copied().fold(f64::MIN, f64::max) - lowest.iter().copied().fold(f64::MAX, f64::min);
    assert!(spread <= 0.1);
}

#[test]
fn fig6_curves_approach_the_limit_with_flat_slope() {
    let curves = reproduce_figure("fig6", &FigureOptions { n_samples: 50_000, ..FigureOptions::default() }).unwrap();
    // rate gained per dB of bit energy over the last decade of B_c
    let tail_slope = |rows: &[effcap_cli::figures::SparseRow]| {
        let (a, b) = (&rows[rows.len() - 11], &rows[rows.len() - 1]);
        (a.rate_total - b.rate_total) / (a.eb_n0_db - b.eb_n0_db)
    };
    let reference = tail_slope(curves[0].sparse().unwrap());
    for c in &curves {
        let rows = c.sparse().unwrap();
        assert!(rows.windows(2).all(|w| w[1].eb_n0_db < w[0].eb_n0_db), "{}", c.stem);
        assert!((rows.last().unwrap().eb_n0_db - -7.61).abs() < 0.35, "{}", c.stem);
        if rows[0].theta > 0.0 {
            assert!(tail_slope(rows) < 0.1 * reference, "{}", c.stem);
        }
    }
}
