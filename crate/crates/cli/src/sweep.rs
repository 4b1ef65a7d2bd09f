//! SNR sweeps and bit-energy curves.

use effcap::engine::{bit_energy_from_sampler, CovarianceStrategy, QosScenario, RateBasis, RateSampler};
use effcap::{from_db, to_db};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{fmt_sig, Table};
use crate::CliError;

pub const SWEEP_HEADER: [&str; 12] = [
    "snr_db",
    "snr_linear",
    "rate_bits_s_hz",
    "rate_per_dim",
    "std_err",
    "eb_n0_db",
    "strategy",
    "theta_hat",
    "n_R",
    "n_T",
    "n_samples",
    "seed",
];

/// One grid point. `rate_total` is in bits/s/Hz over all receive
/// dimensions and `std_err` refers to it; `eb_n0_db` is
/// `10·log10(snr / rate_total)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub snr: f64,
    pub rate_total: f64,
    pub rate_per_dim: f64,
    pub std_err: f64,
    pub eb_n0_db: f64,
    pub strategy: &'static str,
    pub theta_hat: f64,
    pub n_r: usize,
    pub n_t: usize,
    pub n_samples: usize,
    pub seed: u64,
}

/// Evaluates the rate on every grid point with one shared set of channel
/// draws. `θ̂ = 0` gives the ergodic rate.
pub fn sweep_rows(
    scenario: &QosScenario,
    sampler: &RateSampler,
    strategy: &CovarianceStrategy,
    snr_db_grid: &[f64],
    seed: u64,
) -> Result<Vec<SweepRow>, CliError> {
    let th = scenario.theta_hat();
    let n_r = scenario.n_r();
    snr_db_grid
        .par_iter()
        .map(|&snr_db| {
            let snr = from_db(snr_db);
            let pd = sampler.effective_rate(th, snr)?;
            let tot = pd.total(n_r);
            let eb = if tot.value > 0.0 { to_db(snr / tot.value) } else { f64::INFINITY };
            Ok(SweepRow {
                snr_db,
                snr,
                rate_total: tot.value,
                rate_per_dim: pd.value,
                std_err: tot.std_err,
                eb_n0_db: eb,
                strategy: strategy.name(),
                theta_hat: th,
                n_r,
                n_t: scenario.n_t(),
                n_samples: sampler.n_samples(),
                seed,
            })
        })
        .collect()
}

pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    let scenario = cfg.scenario()?;
    let model = cfg.channel_model()?;
    let strategy = cfg.covariance_strategy()?;
    let sampler = RateSampler::new(&model, &strategy, cfg.mc.n_samples, cfg.mc.seed)?;
    sweep_rows(&scenario, &sampler, &strategy, &cfg.sweep.snr_db_grid(), cfg.mc.seed)
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&SWEEP_HEADER);
    for r in rows {
        t.push(vec![
            fmt_sig(r.snr_db),
            fmt_sig(r.snr),
            fmt_sig(r.rate_total),
            fmt_sig(r.rate_per_dim),
            fmt_sig(r.std_err),
            fmt_sig(r.eb_n0_db),
            r.strategy.to_string(),
            fmt_sig(r.theta_hat),
            r.n_r.to_string(),
            r.n_t.to_string(),
            r.n_samples.to_string(),
            r.seed.to_string(),
        ]);
    }
    t
}

/// Bit energy against the total rate; unreliable low-rate points are
/// dropped.
pub fn run_bit_energy(cfg: &RunConfig) -> Result<Table, CliError> {
    let scenario = cfg.scenario()?;
    let model = cfg.channel_model()?;
    let strategy = cfg.covariance_strategy()?;
    let sampler = RateSampler::new(&model, &strategy, cfg.mc.n_samples, cfg.mc.seed)?;
    let grid: Vec<f64> = cfg.sweep.snr_db_grid().into_iter().map(from_db).collect();
    let pts = bit_energy_from_sampler(&sampler, scenario.theta_hat(), &grid, RateBasis::Total)?;
    let mut t = Table::new(&["snr_db", "snr_linear", "rate_bits_s_hz", "std_err", "eb_n0", "eb_n0_db"]);
    for p in pts {
        t.push(vec![
            fmt_sig(to_db(p.snr)),
            fmt_sig(p.snr),
            fmt_sig(p.rate),
            fmt_sig(p.std_err),
            fmt_sig(p.eb_n0),
            fmt_sig(p.eb_n0_db),
        ]);
    }
    Ok(t)
}

/// Least-squares intercept at `snr = 0` of the linear bit energy over the
/// rows with `snr_db <= max_snr_db`, in dB.
pub fn low_snr_intercept_db(rows: &[SweepRow], max_snr_db: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.snr_db <= max_snr_db && r.eb_n0_db.is_finite())
        .map(|r| (r.snr, from_db(r.eb_n0_db)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let intercept = my - sxy / sxx * mx;
    (intercept > 0.0).then(|| to_db(intercept))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let cfg = RunConfig::parse("mc.n_samples = 2000\nsweep.n_points = 5\n").unwrap();
        let a = sweep_table(&run_sweep(&cfg).unwrap()).to_csv_string();
        let b = sweep_table(&run_sweep(&cfg).unwrap()).to_csv_string();
        assert_eq!(a, b);
        let rows = run_sweep(&cfg).unwrap();
        assert!(rows.windows(2).all(|w| w[0].snr_db < w[1].snr_db));
        assert!(a.starts_with("snr_db,snr_linear,rate_bits_s_hz,rate_per_dim,std_err,eb_n0_db,strategy,theta_hat,n_R,n_T,n_samples,seed\n"));
    }

    #[test]
    fn intercept_of_affine_bit_energy() {
        let rows: Vec<SweepRow> = [-40.0, -35.0, -30.0]
            .iter()
            .map(|&db| {
                let snr = from_db(db);
                let eb = 0.5 + 3.0 * snr;
                SweepRow {
                    snr_db: db,
                    snr,
                    rate_total: snr / eb,
                    rate_per_dim: snr / eb,
                    std_err: 0.0,
                    eb_n0_db: to_db(eb),
                    strategy: "uniform",
                    theta_hat: 0.0,
                    n_r: 1,
                    n_t: 1,
                    n_samples: 1,
                    seed: 0,
                }
            })
            .collect();
        let got = low_snr_intercept_db(&rows, -30.0).unwrap();
        assert!((got - to_db(0.5)).abs() < 1e-9);
    }
}
