//! Validation suites. Every check records the Monte Carlo numbers it
//! produced so that runs under different worker counts can be compared
//! bit for bit.

use std::collections::BTreeMap;
use std::time::Instant;

use effcap::asymptotics::{
    derivs_csit, derivs_statistical, derivs_uniform, energy_metrics, hankel_effective_rate, hankel_entry, hankel_entry_closed,
    hankel_mgf, highsnr_metrics, highsnr_slope_empirical, siso_mgf_incomplete_gamma, sparse_ebmin_bounded,
    sparse_ebmin_sublinear, Growth, SparseWidebandConfig,
};
use effcap::channel::{spectral_moments_mc, ChannelModel};
use effcap::engine::{bit_energy_curve, CovarianceStrategy, QosScenario, RateBasis, RateSampler};
use effcap::linalg::CMat;
use effcap::queue::{validate_theta, validate_theta_scaled};
use effcap::{from_db, to_db, Error, LOG2_E};

use crate::figures::{reproduce_figure, FigureOptions, B_HZ, T_BLOCK};
use crate::output::fmt_sig;
use crate::sweep::low_snr_intercept_db;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone)]
pub struct Check {
    /// Acceptance criterion the check belongs to, if any.
    pub criterion: Option<u8>,
    pub id: String,
    pub status: Status,
    pub detail: String,
    /// Bit patterns of the Monte Carlo quantities behind the check.
    pub digest: Vec<u64>,
}

impl Check {
    fn new(criterion: Option<u8>, id: impl Into<String>, pass: bool, detail: String, digest: Vec<f64>) -> Self {
        Self {
            criterion,
            id: id.into(),
            status: if pass { Status::Pass } else { Status::Fail },
            detail,
            digest: digest.into_iter().map(f64::to_bits).collect(),
        }
    }

    fn skipped(criterion: Option<u8>, id: impl Into<String>, reason: String) -> Self {
        Self { criterion, id: id.into(), status: Status::Skipped, detail: reason, digest: Vec::new() }
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }

    pub fn line(&self) -> String {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        format!("{tag} {}: {}", self.id, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    LowSnr,
    HighSnr,
    Wideband,
    Queue,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "lowsnr" => Self::LowSnr,
            "highsnr" => Self::HighSnr,
            "wideband" => Self::Wideband,
            "queue" => Self::Queue,
            "all" => Self::All,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Overrides every Monte Carlo sample count when set.
    pub samples: Option<usize>,
    pub seed: u64,
    /// Queue trace length.
    pub queue_blocks: usize,
    /// Worker counts of the two runs compared by the determinism check.
    pub worker_counts: (usize, usize),
}

impl Default for Options {
    fn default() -> Self {
        Self { samples: None, seed: 1, queue_blocks: 1_000_000, worker_counts: (1, 4) }
    }
}

impl Options {
    fn n(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }
}

type Checks = Result<Vec<Check>, CliError>;

fn scenario(theta_hat: f64, n_r: usize, n_t: usize) -> Result<QosScenario, CliError> {
    Ok(QosScenario::from_theta_hat(theta_hat, T_BLOCK, B_HZ, n_r, n_t)?)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

const FIG_SAMPLES: usize = 200_000;
/// Points at or below this SNR enter the low-SNR bit-energy extrapolation.
const INTERCEPT_MAX_SNR_DB: f64 = -30.0;

/// Minimum bit energy of the SISO curves.
pub fn criterion_1(opts: &Options) -> Checks {
    let start = Instant::now();
    let fo = FigureOptions { n_samples: opts.n(FIG_SAMPLES), seed: opts.seed, ..FigureOptions::default() };
    let curves = reproduce_figure("fig2", &fo)?;
    let secs = start.elapsed().as_secs_f64();
    let mut out = Vec::new();
    let mut lowest = Vec::new();
    let mut global_min = f64::INFINITY;
    for c in &curves {
        let rows = c.sweep().expect("sweep curve");
        let digest: Vec<f64> = rows.iter().flat_map(|r| [r.rate_total, r.std_err]).collect();
        let got = low_snr_intercept_db(rows, INTERCEPT_MAX_SNR_DB);
        let pass = got.is_some_and(|g| (g - -1.59).abs() <= 0.1);
        out.push(Check::new(
            Some(1),
            format!("fig2 intercept {}", c.stem),
            pass,
            format!("extrapolated Eb/N0 {} dB, target -1.59 +/- 0.1 dB", got.map_or("none".into(), fmt_sig)),
            digest,
        ));
        let first = rows.iter().find(|r| r.eb_n0_db.is_finite()).map_or(f64::NAN, |r| r.eb_n0_db);
        lowest.push(first);
        global_min = rows.iter().map(|r| r.eb_n0_db).fold(global_min, f64::min);
    }
    let spread = lowest.iter().copied().fold(f64::NEG_INFINITY, f64::max) - lowest.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(Check::new(
        Some(1),
        "fig2 curve agreement",
        global_min >= -1.69 && spread <= 0.1,
        format!("min Eb/N0 over all curves {} dB (>= -1.69), lowest-SNR spread {} dB (<= 0.1)", fmt_sig(global_min), fmt_sig(spread)),
        vec![],
    ));
    out.push(Check::new(
        Some(1),
        "fig2 runtime",
        secs <= 300.0,
        format!("{secs:.1} s at {} samples/point (limit 300 s)", fo.n_samples),
        vec![],
    ));
    Ok(out)
}

/// Minimum bit energy of the 2x5 curves.
pub fn criterion_2(opts: &Options) -> Checks {
    let fo = FigureOptions { n_samples: opts.n(FIG_SAMPLES), seed: opts.seed, ..FigureOptions::default() };
    let curves = reproduce_figure("fig3", &fo)?;
    let mut out = Vec::new();
    for th in [0.0, 1.0, 4.0, 8.0] {
        let stem = format!("fig3_theta_hat_{}", fmt_sig(th));
        let c = curves.iter().find(|c| c.stem == stem).expect("curve present");
        let rows = c.sweep().expect("sweep curve");
        let got = low_snr_intercept_db(rows, INTERCEPT_MAX_SNR_DB);
        out.push(Check::new(
            Some(2),
            format!("fig3 intercept {stem}"),
            got.is_some_and(|g| (g - -7.61).abs() <= 0.15),
            format!("extrapolated Eb/N0 {} dB, target -7.61 +/- 0.15 dB", got.map_or("none".into(), fmt_sig)),
            rows.iter().flat_map(|r| [r.rate_total, r.std_err]).collect(),
        ));
    }
    Ok(out)
}

/// Trace moment identities of i.i.d. Gaussian channels.
pub fn criterion_3(opts: &Options) -> Checks {
    let mut out = Vec::new();
    for (n_r, n_t) in [(2usize, 2usize), (2, 5)] {
        let m = spectral_moments_mc(&ChannelModel::iid(n_r, n_t)?, opts.n(1_000_000), opts.seed)?;
        let p = (n_r * n_t) as f64;
        let items = [
            ("E{tr}", m.e_trace, p, m.std_errs.e_trace),
            ("E{tr^2}", m.e_trace_sq, p * (p + 1.0), m.std_errs.e_trace_sq),
            ("E{tr(G^2)}", m.e_trace_gram_sq, p * (n_r + n_t) as f64, m.std_errs.e_trace_gram_sq),
        ];
        for (name, got, want, se) in items {
            let z = (got - want) / se;
            out.push(Check::new(
                Some(3),
                format!("moments {n_r}x{n_t} {name}"),
                z.abs() <= 3.0,
                format!("{} vs {} ({} standard errors, limit 3)", fmt_sig(got), fmt_sig(want), fmt_sig(z)),
                vec![got, se],
            ));
        }
    }
    Ok(out)
}

/// Central differences `(first, second)` of the per-dimension rate.
fn finite_differences(s: &RateSampler, theta_hat: f64, at: f64, h: f64) -> Result<(f64, f64, Vec<f64>), CliError> {
    let rp = s.effective_rate(theta_hat, at + h)?.value;
    let r0 = s.effective_rate(theta_hat, at)?.value;
    let rm = s.effective_rate(theta_hat, at - h)?.value;
    Ok(((rp - rm) / (2.0 * h), (rp - 2.0 * r0 + rm) / (h * h), vec![rp, r0, rm]))
}

/// Closed-form low-SNR derivatives against finite differences.
pub fn criterion_4(opts: &Options) -> Checks {
    let n = opts.n(FIG_SAMPLES);
    let model = ChannelModel::iid(2, 2)?;
    let moments = spectral_moments_mc(&model, n, opts.seed)?;
    let uni = RateSampler::new(&model, &CovarianceStrategy::UniformIdentity, n, opts.seed)?;
    let bf = RateSampler::new(&model, &CovarianceStrategy::BeamformingCsit, n, opts.seed)?;
    let (at, h) = (1e-3, 2.5e-4);
    let mut out = Vec::new();
    for th in [0.5, 2.0] {
        let sc = scenario(th, 2, 2)?;
        let cases = [
            ("uniform", derivs_uniform(&moments, &sc)?, &uni),
            ("csit", derivs_csit(&moments, &sc, 1)?, &bf),
        ];
        for (name, d, s) in cases {
            let (f1, f2, mut digest) = finite_differences(s, th, at, h)?;
            digest.extend([d.first_deriv, d.second_deriv]);
            let e1 = rel(f1, d.first_deriv);
            let e2 = rel(f2, d.second_deriv);
            out.push(Check::new(
                Some(4),
                format!("derivatives {name} theta_hat={th}"),
                e1 <= 0.02 && e2 <= 0.10,
                format!(
                    "first {} vs FD {} (rel {}, limit 0.02); second {} vs FD {} (rel {}, limit 0.10)",
                    fmt_sig(d.first_deriv),
                    fmt_sig(f1),
                    fmt_sig(e1),
                    fmt_sig(d.second_deriv),
                    fmt_sig(f2),
                    fmt_sig(e2)
                ),
                digest,
            ));
        }
        let stat = derivs_statistical(&model.mean_gram(), &model, &sc, n, opts.seed)?;
        let uni_d = derivs_uniform(&moments, &sc)?;
        let e1 = rel(stat.first_deriv, uni_d.first_deriv);
        let e2 = rel(stat.second_deriv, uni_d.second_deriv);
        out.push(Check::new(
            Some(4),
            format!("statistical vs uniform theta_hat={th}"),
            e1 <= 0.01 && e2 <= 0.01,
            format!("first rel {} second rel {} (limit 0.01)", fmt_sig(e1), fmt_sig(e2)),
            vec![stat.first_deriv, stat.second_deriv],
        ));
    }
    Ok(out)
}

/// Wideband slope against a secant of the bit-energy curve.
pub fn criterion_5(opts: &Options) -> Checks {
    let n = opts.n(FIG_SAMPLES);
    let model = ChannelModel::iid(2, 2)?;
    let moments = spectral_moments_mc(&model, n, opts.seed)?;
    let mut out = Vec::new();
    let mut slopes = Vec::new();
    for th in [0.0, 1.0, 4.0] {
        let sc = scenario(th, 2, 2)?;
        let s0 = energy_metrics(&derivs_uniform(&moments, &sc)?)?.s0_per_rx;
        let pts = bit_energy_curve(
            &sc,
            &model,
            &CovarianceStrategy::UniformIdentity,
            &[1e-3, 2e-3],
            RateBasis::PerDimension,
            n,
            opts.seed,
        )?;
        let secant = if pts.len() == 2 {
            (pts[1].rate - pts[0].rate) * 10.0 * 2f64.log10() / (pts[1].eb_n0_db - pts[0].eb_n0_db)
        } else {
            f64::NAN
        };
        let e = rel(secant, s0);
        out.push(Check::new(
            Some(5),
            format!("wideband slope theta_hat={th}"),
            e <= 0.10,
            format!("S0 {} vs secant {} (rel {}, limit 0.10)", fmt_sig(s0), fmt_sig(secant), fmt_sig(e)),
            vec![s0, secant],
        ));
        slopes.push(s0);
    }
    out.push(Check::new(
        Some(5),
        "wideband slope decreasing in theta_hat",
        slopes.windows(2).all(|w| w[1] < w[0]),
        format!("S0 at theta_hat 0, 1, 4: {}", slopes.iter().map(|s| fmt_sig(*s)).collect::<Vec<_>>().join(", ")),
        vec![],
    ));
    Ok(out)
}

/// Hankel closed form against Monte Carlo, and the SISO incomplete-Gamma
/// identity against quadrature.
pub fn criterion_6(opts: &Options) -> Checks {
    let n = opts.n(FIG_SAMPLES);
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut digest = Vec::new();
    for n_r in 1..=3 {
        for n_t in 1..=3 {
            let model = ChannelModel::iid(n_r, n_t)?;
            let s = RateSampler::new(&model, &CovarianceStrategy::UniformIdentity, n, opts.seed)?;
            for th in [0.5, 1.0, 2.0] {
                let sc = scenario(th, n_r, n_t)?;
                for snr in [1.0, 10.0] {
                    let mc = s.effective_rate(th, snr)?.total(n_r);
                    let hk = hankel_effective_rate(&sc, snr, 64)?;
                    let z = (hk - mc.value) / mc.std_err;
                    digest.extend([mc.value, mc.std_err]);
                    worst = worst.max(z.abs());
                    if z.abs() > 3.0 {
                        failures.push(format!("{n_r}x{n_t} theta_hat={th} snr={snr}: z={}", fmt_sig(z)));
                    }
                }
            }
        }
    }
    out.push(Check::new(
        Some(6),
        "hankel vs monte carlo",
        failures.is_empty(),
        format!(
            "54 cases, largest |z| {} (limit 3){}",
            fmt_sig(worst),
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join("; ")) }
        ),
        digest,
    ));
    let mut worst_rel = 0.0f64;
    for th in [0.5, 1.0, 2.0] {
        for snr in [1.0, 10.0] {
            let closed = siso_mgf_incomplete_gamma(th, snr)?;
            let quad = hankel_mgf(&scenario(th, 1, 1)?, snr, 64)?;
            worst_rel = worst_rel.max(rel(closed, quad));
        }
    }
    out.push(Check::new(
        Some(6),
        "siso incomplete-gamma vs quadrature",
        worst_rel <= 1e-8,
        format!("largest relative difference {} (limit 1e-8)", fmt_sig(worst_rel)),
        vec![],
    ));
    Ok(out)
}

/// High-SNR slopes from the Hankel rate, and the SISO power offset.
pub fn criterion_7(opts: &Options) -> Checks {
    let mut out = Vec::new();
    for (n_r, n_t, want) in [(2usize, 5usize, 2.0), (1, 1, 0.5)] {
        let sc = scenario(2.0, n_r, n_t)?;
        let pts: Vec<(f64, f64)> = [30.0, 35.0, 40.0, 45.0, 50.0]
            .iter()
            .map(|&db| Ok((from_db(db), hankel_effective_rate(&sc, from_db(db), 64)?)))
            .collect::<Result<_, CliError>>()?;
        let slope = highsnr_slope_empirical(&pts)?;
        out.push(Check::new(
            Some(7),
            format!("high-SNR slope {n_r}x{n_t} theta_hat=2"),
            (slope - want).abs() <= 0.05,
            format!("regressed slope {} vs {} +/- 0.05", fmt_sig(slope), fmt_sig(want)),
            vec![],
        ));
    }
    let m = highsnr_metrics(&scenario(0.0, 1, 1)?, &ChannelModel::iid(1, 1)?, opts.n(1_000_000), opts.seed)?;
    let want = 0.577_215_664_901_532_9 * LOG2_E;
    let got = m.l_inf.unwrap_or(f64::NAN);
    out.push(Check::new(
        Some(7),
        "siso power offset theta->0",
        rel(got, want) <= 0.01,
        format!("L_inf {} vs gamma*log2(e) = {} (limit 1%)", fmt_sig(got), fmt_sig(want)),
        vec![got],
    ));
    Ok(out)
}

/// Reference θ (1/bit) for the sparse wideband monotonicity check.
pub const SPARSE_THETA_REF: f64 = 1.0;

/// Sparse wideband minimum bit energies.
pub fn criterion_8(opts: &Options) -> Checks {
    let n = opts.n(FIG_SAMPLES);
    let model = ChannelModel::iid(2, 2)?;
    let uniform = CovarianceStrategy::UniformIdentity;
    let cfg = SparseWidebandConfig::new(5, 1e4, 1e4, Growth::BoundedM)?;
    let eb_at = |theta: f64| -> Result<f64, CliError> {
        let sc = QosScenario::new(theta, T_BLOCK, B_HZ, 2, 2)?;
        Ok(sparse_ebmin_bounded(&cfg, &sc, &model, &uniform, n, opts.seed)?.linear)
    };
    let mut out = Vec::new();
    let small = eb_at(1e-6 * SPARSE_THETA_REF)?;
    let rich = std::f64::consts::LN_2 / 2.0;
    out.push(Check::new(
        Some(8),
        "bounded m, theta->0",
        rel(small, rich) <= 0.01,
        format!("Eb/N0_min {} vs ln2/E{{tr(HKH')}} = {} (limit 1%)", fmt_sig(small), fmt_sig(rich)),
        vec![small],
    ));
    let factors = [0.1, 0.5, 1.0, 2.0];
    let ebs: Vec<f64> = factors.iter().map(|f| eb_at(f * SPARSE_THETA_REF)).collect::<Result<_, _>>()?;
    out.push(Check::new(
        Some(8),
        "bounded m increasing in theta",
        ebs.windows(2).all(|w| w[1] > w[0]),
        format!(
            "Eb/N0_min dB at theta {{0.1, 0.5, 1, 2}}: {}",
            ebs.iter().map(|e| fmt_sig(to_db(*e))).collect::<Vec<_>>().join(", ")
        ),
        ebs.clone(),
    ));
    let sub = sparse_ebmin_sublinear(&model, &CovarianceStrategy::StatisticalOptimized, n, opts.seed)?.linear;
    out.push(Check::new(
        Some(8),
        "sublinear growth, statistical CSIT",
        rel(sub, rich) <= 1e-12,
        format!("{} vs ln2/n_R = {}", fmt_sig(sub), fmt_sig(rich)),
        vec![],
    ));
    Ok(out)
}

/// Queue tail exponent at the effective capacity.
pub fn criterion_9(opts: &Options) -> Checks {
    let sc = scenario(1.0, 1, 1)?;
    let model = ChannelModel::iid(1, 1)?;
    let st = CovarianceStrategy::UniformIdentity;
    let v = validate_theta(&sc, &model, &st, 10.0, opts.queue_blocks, opts.seed)?;
    let est = v.theta_est.unwrap_or(f64::NAN);
    let mut out = vec![Check::new(
        Some(9),
        "queue tail exponent",
        v.pass && !v.vacuous,
        format!(
            "theta_est {} vs theta {} (rel {}, limit 0.15) over {} blocks",
            fmt_sig(est),
            fmt_sig(v.theta_target),
            fmt_sig(rel(est, v.theta_target)),
            opts.queue_blocks
        ),
        vec![est, v.arrival_per_block],
    )];
    let ests: Vec<f64> = [0.9, 1.0, 1.1]
        .iter()
        .map(|&a| {
            let r = validate_theta_scaled(&sc, &model, &st, 10.0, opts.queue_blocks, opts.seed, a)?;
            Ok(r.theta_est.unwrap_or(f64::NAN))
        })
        .collect::<Result<_, CliError>>()?;
    out.push(Check::new(
        Some(9),
        "queue tail exponent decreasing in arrival",
        ests.windows(2).all(|w| w[1] < w[0]),
        format!("theta_est at arrival x0.9, x1.0, x1.1: {}", ests.iter().map(|e| fmt_sig(*e)).collect::<Vec<_>>().join(", ")),
        ests.clone(),
    ));
    Ok(out)
}

/// A constant channel gives a constant service and no queue.
pub fn queue_deterministic_check(opts: &Options) -> Checks {
    let model = ChannelModel::fixed(CMat::identity(1))?;
    let v = validate_theta(&scenario(1.0, 1, 1)?, &model, &CovarianceStrategy::UniformIdentity, 10.0, 100_000, opts.seed)?;
    Ok(vec![Check::new(
        None,
        "queue deterministic channel",
        v.pass && v.vacuous,
        format!("pass={} vacuous={}", v.pass, v.vacuous),
        vec![],
    )])
}

/// Closed-form Hankel entries against quadrature. Integer exponents sit on
/// poles of the closed form and are skipped; the quadrature route is still
/// checked there against Monte Carlo.
pub fn hankel_closed_form_checks(opts: &Options) -> Checks {
    let mut out = Vec::new();
    let snr = 10.0;
    for th in [0.5, 2.0] {
        let sc = scenario(th, 2, 2)?;
        let mut worst = 0.0f64;
        let mut skip = None;
        'entries: for i in 0..2 {
            for j in 0..2 {
                match hankel_entry_closed(i, j, &sc, snr) {
                    Ok(c) => worst = worst.max(rel(c, hankel_entry(i, j, &sc, snr, 64)?)),
                    Err(Error::Domain(msg)) => {
                        skip = Some(msg);
                        break 'entries;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        out.push(match skip {
            Some(reason) => Check::skipped(None, format!("hankel closed form theta_hat={th}"), reason),
            None => Check::new(
                None,
                format!("hankel closed form theta_hat={th}"),
                worst <= 1e-8,
                format!("largest relative difference {} (limit 1e-8)", fmt_sig(worst)),
                vec![],
            ),
        });
        let model = ChannelModel::iid(2, 2)?;
        let mc = RateSampler::new(&model, &CovarianceStrategy::UniformIdentity, opts.n(FIG_SAMPLES), opts.seed)?
            .effective_rate(th, snr)?
            .total(2);
        let hk = hankel_effective_rate(&sc, snr, 64)?;
        let z = (hk - mc.value) / mc.std_err;
        out.push(Check::new(
            None,
            format!("hankel quadrature theta_hat={th}"),
            z.abs() <= 3.0,
            format!("{} vs monte carlo {} ({} standard errors, limit 3)", fmt_sig(hk), fmt_sig(mc.value), fmt_sig(z)),
            vec![mc.value, mc.std_err],
        ));
    }
    Ok(out)
}

fn run_parts(suite: Suite, opts: &Options) -> Checks {
    let mut out = Vec::new();
    let low = matches!(suite, Suite::LowSnr | Suite::All);
    let high = matches!(suite, Suite::HighSnr | Suite::All);
    let wide = matches!(suite, Suite::Wideband | Suite::All);
    let queue = matches!(suite, Suite::Queue | Suite::All);
    if low {
        out.extend(criterion_1(opts)?);
        out.extend(criterion_2(opts)?);
        out.extend(criterion_3(opts)?);
        out.extend(criterion_4(opts)?);
        out.extend(criterion_5(opts)?);
    }
    if high {
        out.extend(criterion_6(opts)?);
        out.extend(criterion_7(opts)?);
        out.extend(hankel_closed_form_checks(opts)?);
    }
    if wide {
        out.extend(criterion_8(opts)?);
    }
    if queue {
        out.extend(criterion_9(opts)?);
        out.extend(queue_deterministic_check(opts)?);
    }
    Ok(out)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Numeric(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs `suite`. The `all` suite runs every check twice under different
/// worker counts and appends a determinism check.
pub fn run_suite(suite: Suite, opts: &Options) -> Checks {
    if suite != Suite::All {
        return run_parts(suite, opts);
    }
    let (a, b) = opts.worker_counts;
    let first = in_pool(a, || run_parts(Suite::All, opts))??;
    let second = in_pool(b, || run_parts(Suite::All, opts))??;
    let digests = |cs: &[Check]| -> BTreeMap<String, Vec<u64>> {
        cs.iter().filter(|c| !c.digest.is_empty()).map(|c| (c.id.clone(), c.digest.clone())).collect()
    };
    let (da, db) = (digests(&first), digests(&second));
    let differing: Vec<&String> = da.keys().filter(|k| da.get(*k) != db.get(*k)).collect();
    let mut out = first;
    out.push(Check::new(
        Some(10),
        "determinism across worker counts",
        differing.is_empty() && da.len() == db.len(),
        if differing.is_empty() {
            format!("{} Monte Carlo checks identical with {a} and {b} workers", da.len())
        } else {
            format!("differing: {}", differing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "))
        },
        vec![],
    ));
    Ok(out)
}
