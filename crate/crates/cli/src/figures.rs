//! Datasets behind the six standard figures, one CSV per curve.

use effcap::channel::ChannelModel;
use effcap::engine::{CovarianceStrategy, QosScenario, RateSampler};
use effcap::{to_db, LOG2_E};
use rayon::prelude::*;

use crate::output::{fmt_sig, Table};
use crate::sweep::{sweep_rows, sweep_table, SweepRow};
use crate::CliError;

pub const FIGURES: [&str; 6] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6"];

/// Block duration, s.
pub const T_BLOCK: f64 = 1e-3;
/// Bandwidth for figures 1–4, Hz.
pub const B_HZ: f64 = 1e5;
/// Transmit power over noise density for the sparse figures, Hz.
pub const P_OVER_N0: f64 = 1e4;

pub const SISO_THETA_HATS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];
pub const FIG3_THETA_HATS: [f64; 10] = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
pub const FIG4_N_T: [usize; 5] = [2, 3, 4, 8, 15];
/// QoS exponents θ (1/bit) of the sparse figures.
pub const SPARSE_THETAS: [f64; 5] = [0.0, 0.1, 0.5, 1.0, 2.0];

#[derive(Debug, Clone)]
pub struct FigureOptions {
    pub n_samples: usize,
    pub seed: u64,
    pub snr_db_grid: Vec<f64>,
    /// Coherence bandwidths per sparse curve, log-spaced over 10 kHz–10 MHz.
    pub b_c_points: usize,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            n_samples: crate::config::DEFAULT_SAMPLES,
            seed: 1,
            snr_db_grid: (0..=80).map(|i| -40.0 + i as f64).collect(),
            b_c_points: 31,
        }
    }
}

/// A sparse wideband point.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub b_c: f64,
    pub m: usize,
    pub theta: f64,
    pub theta_hat: f64,
    pub snr: f64,
    pub rate_total: f64,
    pub std_err: f64,
    pub eb_n0_db: f64,
    pub n_r: usize,
}

#[derive(Debug, Clone)]
pub enum CurveData {
    Sweep(Vec<SweepRow>),
    Sparse(Vec<SparseRow>),
}

#[derive(Debug, Clone)]
pub struct Curve {
    /// File name without extension.
    pub stem: String,
    pub data: CurveData,
}

impl Curve {
    pub fn table(&self) -> Table {
        match &self.data {
            CurveData::Sweep(rows) => sweep_table(rows),
            CurveData::Sparse(rows) => sparse_table(rows),
        }
    }

    pub fn sweep(&self) -> Option<&[SweepRow]> {
        match &self.data {
            CurveData::Sweep(r) => Some(r),
            CurveData::Sparse(_) => None,
        }
    }

    pub fn sparse(&self) -> Option<&[SparseRow]> {
        match &self.data {
            CurveData::Sparse(r) => Some(r),
            CurveData::Sweep(_) => None,
        }
    }
}

pub const SPARSE_HEADER: [&str; 11] = [
    "b_c_hz",
    "m",
    "bandwidth_hz",
    "theta",
    "theta_hat",
    "snr_db",
    "snr_linear",
    "rate_bits_s_hz",
    "std_err",
    "eb_n0_db",
    "n_R",
];

pub fn sparse_table(rows: &[SparseRow]) -> Table {
    let mut t = Table::new(&SPARSE_HEADER);
    for r in rows {
        t.push(vec![
            fmt_sig(r.b_c),
            r.m.to_string(),
            fmt_sig(r.b_c * r.m as f64),
            fmt_sig(r.theta),
            fmt_sig(r.theta_hat),
            fmt_sig(to_db(r.snr)),
            fmt_sig(r.snr),
            fmt_sig(r.rate_total),
            fmt_sig(r.std_err),
            fmt_sig(r.eb_n0_db),
            r.n_r.to_string(),
        ]);
    }
    t
}

/// Rate per coherence band and bit energy over a coherence-bandwidth grid.
/// Each point uses `θ̂ = θ·T·B_c·log₂e` and `snr = (P/N0)/(n_R·m·B_c)`.
pub fn sparse_rows(
    sampler: &RateSampler,
    theta: f64,
    t: f64,
    p_over_n0: f64,
    b_c_grid: &[f64],
    m_of: impl Fn(f64) -> usize + Sync,
) -> Result<Vec<SparseRow>, CliError> {
    let n_r = sampler.n_r();
    b_c_grid
        .par_iter()
        .map(|&b_c| {
            let m = m_of(b_c);
            let theta_hat = theta * t * b_c * LOG2_E;
            let snr = p_over_n0 / (n_r as f64 * m as f64 * b_c);
            let est = sampler.effective_rate(theta_hat, snr)?.total(n_r);
            let eb = if est.value > 0.0 { to_db(snr / est.value) } else { f64::INFINITY };
            Ok(SparseRow { b_c, m, theta, theta_hat, snr, rate_total: est.value, std_err: est.std_err, eb_n0_db: eb, n_r })
        })
        .collect()
}

/// Log-spaced grid from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// `m` growing as a power of `B_c` from 5 at 10 kHz to 100 at 10 MHz.
pub fn fig6_m(b_c: f64) -> usize {
    let p = (100.0f64 / 5.0).ln() / (1e7f64 / 1e4).ln();
    (5.0 * (b_c / 1e4).powf(p)).round() as usize
}

fn theta_hat_curves(
    prefix: &str,
    n_r: usize,
    n_t: usize,
    theta_hats: &[f64],
    opts: &FigureOptions,
) -> Result<Vec<Curve>, CliError> {
    let model = ChannelModel::iid(n_r, n_t)?;
    let strategy = CovarianceStrategy::UniformIdentity;
    let sampler = RateSampler::new(&model, &strategy, opts.n_samples, opts.seed)?;
    theta_hats
        .iter()
        .map(|&th| {
            let sc = QosScenario::from_theta_hat(th, T_BLOCK, B_HZ, n_r, n_t)?;
            let rows = sweep_rows(&sc, &sampler, &strategy, &opts.snr_db_grid, opts.seed)?;
            Ok(Curve { stem: format!("{prefix}_theta_hat_{}", fmt_sig(th)), data: CurveData::Sweep(rows) })
        })
        .collect()
}

/// Builds every curve of figure `name`.
pub fn reproduce_figure(name: &str, opts: &FigureOptions) -> Result<Vec<Curve>, CliError> {
    match name {
        "fig1" | "fig2" => theta_hat_curves(name, 1, 1, &SISO_THETA_HATS, opts),
        "fig3" => theta_hat_curves(name, 2, 5, &FIG3_THETA_HATS, opts),
        "fig4" => FIG4_N_T
            .iter()
            .map(|&n_t| {
                let model = ChannelModel::iid(2, n_t)?;
                let strategy = CovarianceStrategy::UniformIdentity;
                let sampler = RateSampler::new(&model, &strategy, opts.n_samples, opts.seed)?;
                let sc = QosScenario::from_theta_hat(1.0, T_BLOCK, B_HZ, 2, n_t)?;
                let rows = sweep_rows(&sc, &sampler, &strategy, &opts.snr_db_grid, opts.seed)?;
                Ok(Curve { stem: format!("fig4_n_T_{n_t}"), data: CurveData::Sweep(rows) })
            })
            .collect(),
        "fig5" | "fig6" => {
            let model = ChannelModel::iid(2, 2)?;
            let sampler = RateSampler::new(&model, &CovarianceStrategy::UniformIdentity, opts.n_samples, opts.seed)?;
            let grid = log_grid(1e4, 1e7, opts.b_c_points);
            SPARSE_THETAS
                .iter()
                .map(|&theta| {
                    let rows = if name == "fig5" {
                        sparse_rows(&sampler, theta, T_BLOCK, P_OVER_N0, &grid, |_| 5)?
                    } else {
                        sparse_rows(&sampler, theta, T_BLOCK, P_OVER_N0, &grid, fig6_m)?
                    };
                    Ok(Curve { stem: format!("{name}_theta_{}", fmt_sig(theta)), data: CurveData::Sparse(rows) })
                })
                .collect()
        }
        other => Err(CliError::Config(format!("unknown figure {other:?}; expected one of {}", FIGURES.join(", ")))),
    }
}
