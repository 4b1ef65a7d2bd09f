//! Single-scenario analyses: low-SNR, high-SNR, sparse wideband, queue.

use std::path::Path;

use effcap::asymptotics::{
    derivs_csit, derivs_statistical, derivs_uniform, energy_metrics, highsnr_metrics, sparse_ebmin_bounded,
    sparse_ebmin_sublinear, Growth, SparseWidebandConfig,
};
use effcap::channel::{max_eig_subspace, spectral_moments_mc, DEFAULT_MULTIPLICITY_TOL};
use effcap::engine::{CovarianceStrategy, RateSampler};
use effcap::from_db;
use effcap::queue::{simulate_queue, validate_theta};
use effcap::rng::derive_seed;

use crate::config::{RunConfig, SparseBlock};
use crate::figures::{sparse_rows, sparse_table};
use crate::output::{fmt_sig, Table};
use crate::CliError;

fn report(pairs: Vec<(&'static str, String)>) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in pairs {
        t.push(vec![k.to_string(), v]);
    }
    t
}

/// Low-SNR derivatives, minimum bit energy and wideband slope.
pub fn low_snr_report(cfg: &RunConfig) -> Result<Table, CliError> {
    let sc = cfg.scenario()?;
    let model = cfg.channel_model()?;
    let strategy = cfg.covariance_strategy()?;
    let n = cfg.mc.n_samples;
    let d = match strategy {
        CovarianceStrategy::UniformIdentity => derivs_uniform(&spectral_moments_mc(&model, n, cfg.mc.seed)?, &sc)?,
        CovarianceStrategy::BeamformingCsit | CovarianceStrategy::WaterfillingCsit => {
            // a random channel has a simple top eigenvalue almost surely
            let l = if model.is_deterministic() {
                max_eig_subspace(&model.mean_gram(), DEFAULT_MULTIPLICITY_TOL)?.multiplicity_l
            } else {
                1
            };
            derivs_csit(&spectral_moments_mc(&model, n, cfg.mc.seed)?, &sc, l)?
        }
        CovarianceStrategy::StatisticalOptimized => derivs_statistical(&model.mean_gram(), &model, &sc, n, cfg.mc.seed)?,
        CovarianceStrategy::FixedCovariance(_) => {
            return Err(CliError::Config(
                "strategy.name: low-snr supports uniform, beamforming, waterfilling and statistical".into(),
            ))
        }
    };
    let mut pairs = vec![
        ("regime", format!("{:?}", d.regime).to_lowercase()),
        ("theta_hat", fmt_sig(sc.theta_hat())),
        ("first_deriv", fmt_sig(d.first_deriv)),
        ("second_deriv", fmt_sig(d.second_deriv)),
        ("multiplicity", d.multiplicity.to_string()),
        ("degraded", d.degraded.to_string()),
    ];
    match energy_metrics(&d) {
        Ok(e) => pairs.extend([
            ("eb_min", fmt_sig(e.eb_min)),
            ("eb_min_db", fmt_sig(e.eb_min_db)),
            ("s0_per_rx", fmt_sig(e.s0_per_rx)),
            ("s0_total", fmt_sig(e.s0_total)),
        ]),
        Err(e) => pairs.push(("energy_metrics", format!("unavailable: {e}"))),
    }
    Ok(report(pairs))
}

pub fn high_snr_report(cfg: &RunConfig) -> Result<Table, CliError> {
    let sc = cfg.scenario()?;
    let model = cfg.channel_model()?;
    let m = highsnr_metrics(&sc, &model, cfg.mc.n_samples, cfg.mc.seed)?;
    Ok(report(vec![
        ("theta_hat", fmt_sig(sc.theta_hat())),
        ("s_inf", fmt_sig(m.s_inf)),
        ("l_inf", m.l_inf.map_or_else(|| "none".into(), fmt_sig)),
        ("regime", format!("{:?}", m.regime_note)),
        ("heuristic", m.heuristic.to_string()),
    ]))
}

fn sparse_block(cfg: &RunConfig) -> SparseBlock {
    cfg.sparse.clone().unwrap_or(SparseBlock {
        growth: Growth::BoundedM,
        m: 5,
        m_stop: 5,
        p_over_n0: 1e4,
        b_c_start: 1e4,
        b_c_stop: 1e7,
        n_points: 31,
    })
}

/// Rate and bit energy over the coherence-bandwidth grid, plus the
/// minimum bit energy of the configured growth law.
pub fn sparse_report(cfg: &RunConfig) -> Result<(Table, Table), CliError> {
    let sc = cfg.scenario()?;
    let model = cfg.channel_model()?;
    let strategy = cfg.covariance_strategy()?;
    let sp = sparse_block(cfg);
    let sampler = RateSampler::new(&model, &strategy, cfg.mc.n_samples, cfg.mc.seed)?;
    let rows = sparse_rows(&sampler, sc.theta(), sc.t(), sp.p_over_n0, &sp.b_c_grid(), |b| sp.m_at(b))?;
    let eb = match sp.growth {
        Growth::BoundedM => {
            if sc.theta() > 0.0 {
                let w = SparseWidebandConfig::new(sp.m, sp.p_over_n0, sp.b_c_start, Growth::BoundedM)?;
                Some(sparse_ebmin_bounded(&w, &sc, &model, &strategy, cfg.mc.n_samples, cfg.mc.seed)?)
            } else {
                // θ = 0 reduces to the sublinear expression
                Some(sparse_ebmin_sublinear(&model, &strategy, cfg.mc.n_samples, cfg.mc.seed)?)
            }
        }
        Growth::Sublinear => Some(sparse_ebmin_sublinear(&model, &strategy, cfg.mc.n_samples, cfg.mc.seed)?),
    };
    let mut pairs = vec![("growth", format!("{:?}", sp.growth)), ("theta", fmt_sig(sc.theta()))];
    if let Some(e) = eb {
        pairs.push(("eb_min", fmt_sig(e.linear)));
        pairs.push(("eb_min_db", fmt_sig(e.db)));
    }
    Ok((sparse_table(&rows), report(pairs)))
}

/// Queue tail validation at the configured scenario. Returns the report
/// and whether the check passed.
pub fn queue_report(cfg: &RunConfig, trace_path: Option<&Path>) -> Result<(Table, bool), CliError> {
    let sc = cfg.scenario()?;
    let model = cfg.channel_model()?;
    let strategy = cfg.covariance_strategy()?;
    let snr = from_db(cfg.queue.snr_db);
    let v = validate_theta(&sc, &model, &strategy, snr, cfg.queue.n_blocks, cfg.mc.seed)?;
    if let Some(p) = trace_path {
        let trace =
            simulate_queue(&sc, &model, &strategy, snr, v.arrival_per_block, cfg.queue.n_blocks, derive_seed(cfg.mc.seed, 0x51))?;
        let f = std::io::BufWriter::new(std::fs::File::create(p)?);
        trace.write_csv(f)?;
    }
    let mut pairs = vec![
        ("theta_target", fmt_sig(v.theta_target)),
        ("theta_est", v.theta_est.map_or_else(|| "none".into(), fmt_sig)),
        ("arrival_per_block_bits", fmt_sig(v.arrival_per_block)),
        ("vacuous", v.vacuous.to_string()),
        ("pass", v.pass.to_string()),
    ];
    if let Some(f) = v.fit {
        pairs.push(("fit_r_squared", fmt_sig(f.r_squared)));
        pairs.push(("fit_q_lo_bits", fmt_sig(f.q_range.0)));
        pairs.push(("fit_q_hi_bits", fmt_sig(f.q_range.1)));
    }
    Ok((report(pairs), v.pass))
}
