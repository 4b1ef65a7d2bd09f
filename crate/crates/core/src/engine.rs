//! Finite-SNR effective rate estimation.
//!
//! The effective rate per receive dimension is
//!
//! ```text
//! R_E(snr, θ) = −1/(θ·T·B·n_R) · ln E{ exp(−θ·T·B · log₂det(I + n_R·snr·H K H†)) }
//! ```
//!
//! and depends on `θ`, `T` and `B` only through `θ̂ = θ·T·B·log₂e`, because
//! `θ·T·B·log₂x = θ̂·ln x`. All estimators therefore work with natural-log
//! determinants and `θ̂`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{gram, sample_indexed, ChannelModel, ChannelSample};
use crate::error::{domain, numeric, Result};
use crate::linalg::{hermitian_eig, hermitian_eigenvalues, inverse, ln_det_hpd, CMat};
use crate::stats;
use crate::{LN_2, LOG2_E};

/// QoS exponent together with the block/bandwidth parameters and antenna
/// counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosScenario {
    theta: f64,
    t: f64,
    b: f64,
    n_r: usize,
    n_t: usize,
    theta_hat: f64,
}

impl QosScenario {
    /// Scenario from the QoS exponent `theta` in 1/bit.
    pub fn new(theta: f64, t: f64, b: f64, n_r: usize, n_t: usize) -> Result<Self> {
        Self::check(theta, t, b, n_r, n_t)?;
        Ok(Self { theta, t, b, n_r, n_t, theta_hat: theta * t * b * LOG2_E })
    }

    /// Scenario from the normalized exponent `θ̂ = θ·T·B·log₂e`.
    pub fn from_theta_hat(theta_hat: f64, t: f64, b: f64, n_r: usize, n_t: usize) -> Result<Self> {
        if !(t > 0.0 && b > 0.0 && t.is_finite() && b.is_finite()) {
            return domain(format!("T and B must be positive and finite, got T = {t}, B = {b}"));
        }
        let theta = theta_hat / (t * b * LOG2_E);
        Self::check(theta, t, b, n_r, n_t)?;
        Ok(Self { theta, t, b, n_r, n_t, theta_hat })
    }

    fn check(theta: f64, t: f64, b: f64, n_r: usize, n_t: usize) -> Result<()> {
        if !(theta >= 0.0 && theta.is_finite()) {
            return domain(format!("theta must be finite and nonnegative, got {theta}"));
        }
        if !(t > 0.0 && b > 0.0 && t.is_finite() && b.is_finite()) {
            return domain(format!("T and B must be positive and finite, got T = {t}, B = {b}"));
        }
        if n_r == 0 || n_t == 0 {
            return domain(format!("antenna counts must be positive, got ({n_r}, {n_t})"));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn n_t(&self) -> usize {
        self.n_t
    }
    pub fn theta_hat(&self) -> f64 {
        self.theta_hat
    }

    /// `θ·T·B`, the exponent scale applied to block rates in bits/s/Hz.
    pub fn theta_tb(&self) -> f64 {
        self.theta * self.t * self.b
    }

    /// Same block parameters with a different normalized exponent.
    pub fn with_theta_hat(&self, theta_hat: f64) -> Result<Self> {
        Self::from_theta_hat(theta_hat, self.t, self.b, self.n_r, self.n_t)
    }

    /// Same block parameters and exponent with different antenna counts.
    pub fn with_antennas(&self, n_r: usize, n_t: usize) -> Result<Self> {
        Self::from_theta_hat(self.theta_hat, self.t, self.b, n_r, n_t)
    }

    pub(crate) fn check_model(&self, model: &ChannelModel) -> Result<()> {
        if model.dims() != (self.n_r, self.n_t) {
            return domain(format!(
                "scenario is {}x{} but the channel model is {}x{}",
                self.n_r,
                self.n_t,
                model.n_r(),
                model.n_t()
            ));
        }
        Ok(())
    }
}

/// Transmit covariance policy.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceStrategy {
    /// `K = I/n_T`.
    UniformIdentity,
    /// Per-realization waterfilling over the eigenmodes of `H†H`.
    WaterfillingCsit,
    /// Per-realization rank-one transmission on the top eigenvector.
    BeamformingCsit,
    /// A fixed PSD covariance with unit trace budget; build with
    /// [`CovarianceStrategy::fixed`].
    FixedCovariance(CMat),
    /// `K` optimized from channel statistics only.
    StatisticalOptimized,
}

impl CovarianceStrategy {
    pub fn fixed(k: CMat) -> Result<Self> {
        validate_covariance(&k)?;
        Ok(Self::FixedCovariance(k))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::UniformIdentity => "uniform",
            Self::WaterfillingCsit => "waterfilling",
            Self::BeamformingCsit => "beamforming",
            Self::FixedCovariance(_) => "fixed",
            Self::StatisticalOptimized => "statistical",
        }
    }

    /// Whether the transmitter adapts `K` to each channel realization.
    pub fn is_csit(&self) -> bool {
        matches!(self, Self::WaterfillingCsit | Self::BeamformingCsit)
    }
}

/// Checks that `k` is Hermitian PSD with `tr(k) ≤ 1`.
pub fn validate_covariance(k: &CMat) -> Result<()> {
    if !k.is_square() {
        return domain("covariance must be square");
    }
    let scale = k.frobenius_norm().max(1.0);
    if k.hermitian_defect() > 1e-10 * scale {
        return domain("covariance is not Hermitian");
    }
    let eigs = hermitian_eigenvalues(k)?;
    if eigs.iter().any(|&l| l < -1e-10) {
        return domain("covariance is not positive semidefinite");
    }
    let tr = k.trace().re;
    if tr > 1.0 + 1e-12 {
        return domain(format!("covariance trace {tr} exceeds 1"));
    }
    Ok(())
}

/// A Monte Carlo rate estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffCapEstimate {
    /// bits/s/Hz/dimension when `normalized_per_rx`, else bits/s/Hz.
    pub value: f64,
    pub std_err: f64,
    pub normalized_per_rx: bool,
    pub n_samples: usize,
}

impl EffCapEstimate {
    /// Rescales to the unnormalized rate (bits/s/Hz).
    pub fn total(&self, n_r: usize) -> Self {
        if !self.normalized_per_rx {
            return *self;
        }
        let f = n_r as f64;
        Self { value: self.value * f, std_err: self.std_err * f, normalized_per_rx: false, ..*self }
    }
}

/// `log₂det(I + n_R·snr·H K H†)` in bits/s/Hz.
pub fn log_det_rate(h: &ChannelSample, k: &CMat, snr: f64, n_r: usize) -> f64 {
    if snr == 0.0 {
        return 0.0;
    }
    let hkh = (&(&h.entries * k) * &h.entries.adjoint()).hermitian_part();
    let eigs = hermitian_eigenvalues(&hkh).expect("H K H† is Hermitian");
    let g = n_r as f64 * snr;
    stats::sum(eigs.iter().map(|&m| (g * m.max(0.0)).ln_1p())) * LOG2_E
}

/// Power split returned by [`waterfill`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillAllocation {
    /// Power fractions `d_i`, in the order of the input eigenvalues.
    pub powers: Vec<f64>,
    /// Water level `μ` (zero when degenerate).
    pub level: f64,
    /// Set when every eigenvalue is zero and the split is uniform.
    pub degenerate: bool,
}

/// Waterfilling `d_i = max(0, μ − 1/(gain·λ_i))` with `Σ d_i = 1`.
pub fn waterfill(gram_eigs: &[f64], gain: f64) -> Result<WaterfillAllocation> {
    if gram_eigs.is_empty() {
        return domain("waterfill needs at least one eigenvalue");
    }
    if !(gain > 0.0 && gain.is_finite()) {
        return domain(format!("waterfill gain must be positive, got {gain}"));
    }
    let n = gram_eigs.len();
    let mut order: Vec<usize> = (0..n).filter(|&i| gram_eigs[i] > 0.0).collect();
    if order.is_empty() {
        return Ok(WaterfillAllocation { powers: vec![1.0 / n as f64; n], level: 0.0, degenerate: true });
    }
    order.sort_by(|&i, &j| gram_eigs[j].total_cmp(&gram_eigs[i]));
    let inv: Vec<f64> = order.iter().map(|&i| 1.0 / (gain * gram_eigs[i])).collect();
    let mut active = order.len();
    let mut level;
    loop {
        level = (1.0 + inv[..active].iter().sum::<f64>()) / active as f64;
        if level > inv[active - 1] || active == 1 {
            break;
        }
        active -= 1;
    }
    let mut powers = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate().take(active) {
        powers[i] = (level - inv[rank]).max(0.0);
    }
    // absorb rounding so the budget is met exactly
    let total: f64 = powers.iter().sum();
    for p in &mut powers {
        *p /= total;
    }
    Ok(WaterfillAllocation { powers, level, degenerate: false })
}

/// Waterfilling rate `Σ ln(1 + gain·λ_i·d_i)` in nats.
fn waterfill_ln_det(eigs: &[f64], gain: f64) -> f64 {
    match waterfill(eigs, gain) {
        Ok(w) if !w.degenerate => {
            stats::sum(eigs.iter().zip(&w.powers).map(|(&l, &d)| (gain * l.max(0.0) * d).ln_1p()))
        }
        _ => 0.0,
    }
}

/// Converts per-sample natural-log determinants into an effective rate per
/// receive dimension.
pub(crate) fn effective_from_log_dets(log_dets: &[f64], theta_hat: f64, n_r: usize) -> Result<EffCapEstimate> {
    let n = log_dets.len();
    if n == 0 {
        return domain("no samples");
    }
    if theta_hat == 0.0 {
        return Ok(ergodic_from_log_dets(log_dets, n_r));
    }
    let exponents: Vec<f64> = log_dets.iter().map(|l| -theta_hat * l).collect();
    let lme = stats::log_mean_exp(&exponents);
    if !lme.log_mean.is_finite() || lme.mean_scaled <= 0.0 {
        return numeric(format!(
            "MGF estimate underflowed (largest exponent {:.6e}); θ̂ = {theta_hat} is too large for this sample",
            lme.max_exponent
        ));
    }
    let scale = theta_hat * LN_2 * n_r as f64;
    let value = (-lme.log_mean / scale).max(0.0);
    let std_err = (lme.var_scaled / n as f64).sqrt() / lme.mean_scaled / scale;
    Ok(EffCapEstimate { value, std_err, normalized_per_rx: true, n_samples: n })
}

pub(crate) fn ergodic_from_log_dets(log_dets: &[f64], n_r: usize) -> EffCapEstimate {
    let (mean, se) = stats::mean_and_stderr(log_dets);
    let scale = LN_2 * n_r as f64;
    EffCapEstimate { value: mean / scale, std_err: se / scale, normalized_per_rx: true, n_samples: log_dets.len() }
}

enum SampleData {
    /// `ln det = Σ ln(1 + n_R·snr·μ)` over the stored modes.
    Modes { width: usize, values: Vec<f64> },
    /// Gram eigenvalues, waterfilled per SNR.
    Waterfill { width: usize, values: Vec<f64> },
    /// `U† H†H U` for the eigenbasis `U` of the sample mean Gram.
    Projected { basis: CMat, mats: Vec<CMat> },
}

/// Per-sample channel spectra for one (model, strategy, seed), reusable
/// across SNR and θ̂ so that every evaluation shares the same draws.
pub struct RateSampler {
    n_r: usize,
    n_t: usize,
    n_samples: usize,
    data: SampleData,
}

fn smaller_gram_eigs(h: &ChannelSample) -> Vec<f64> {
    let g = if h.n_r() < h.n_t() { h.entries.outer_gram() } else { h.entries.gram() };
    hermitian_eigenvalues(&g).expect("Gram matrices are Hermitian").into_iter().map(|l| l.max(0.0)).collect()
}

impl RateSampler {
    pub fn new(model: &ChannelModel, strategy: &CovarianceStrategy, n_samples: usize, seed: u64) -> Result<Self> {
        if n_samples == 0 {
            return domain("n_samples must be positive");
        }
        let (n_r, n_t) = model.dims();
        let idx = 0..n_samples as u64;
        let flat = |width: usize, rows: Vec<Vec<f64>>| {
            let mut values = Vec::with_capacity(width * rows.len());
            for r in rows {
                values.extend(r);
            }
            values
        };
        let data = match strategy {
            CovarianceStrategy::UniformIdentity => {
                let width = n_r.min(n_t);
                let rows: Vec<Vec<f64>> = idx
                    .into_par_iter()
                    .map(|i| {
                        let mut e = smaller_gram_eigs(&sample_indexed(model, seed, i));
                        e.iter_mut().for_each(|l| *l /= n_t as f64);
                        e
                    })
                    .collect();
                SampleData::Modes { width, values: flat(width, rows) }
            }
            CovarianceStrategy::BeamformingCsit => {
                let rows: Vec<Vec<f64>> = idx
                    .into_par_iter()
                    .map(|i| vec![smaller_gram_eigs(&sample_indexed(model, seed, i))[0]])
                    .collect();
                SampleData::Modes { width: 1, values: flat(1, rows) }
            }
            CovarianceStrategy::FixedCovariance(k) => {
                if k.rows() != n_t {
                    return domain(format!("covariance is {}x{} but n_T = {n_t}", k.rows(), k.cols()));
                }
                validate_covariance(k)?;
                let rows: Vec<Vec<f64>> = idx
                    .into_par_iter()
                    .map(|i| {
                        let h = sample_indexed(model, seed, i);
                        let hkh = (&(&h.entries * k) * &h.entries.adjoint()).hermitian_part();
                        hermitian_eigenvalues(&hkh)
                            .expect("H K H† is Hermitian")
                            .into_iter()
                            .map(|l| l.max(0.0))
                            .collect()
                    })
                    .collect();
                SampleData::Modes { width: n_r, values: flat(n_r, rows) }
            }
            CovarianceStrategy::WaterfillingCsit => {
                let width = n_r.min(n_t);
                let rows: Vec<Vec<f64>> =
                    idx.into_par_iter().map(|i| smaller_gram_eigs(&sample_indexed(model, seed, i))).collect();
                SampleData::Waterfill { width, values: flat(width, rows) }
            }
            CovarianceStrategy::StatisticalOptimized => {
                let grams: Vec<CMat> = idx.into_par_iter().map(|i| gram(&sample_indexed(model, seed, i))).collect();
                let mut mean = CMat::zeros(n_t, n_t);
                for r in 0..n_t {
                    for c in 0..n_t {
                        let re = stats::sum(grams.iter().map(|g| g[(r, c)].re));
                        let im = stats::sum(grams.iter().map(|g| g[(r, c)].im));
                        mean[(r, c)] = Complex64::new(re, im) / n_samples as f64;
                    }
                }
                let basis = hermitian_eig(&mean.hermitian_part())?.vectors;
                let basis_adj = basis.adjoint();
                let mats: Vec<CMat> =
                    grams.par_iter().map(|g| (&(&basis_adj * g) * &basis).hermitian_part()).collect();
                SampleData::Projected { basis, mats }
            }
        };
        Ok(Self { n_r, n_t, n_samples, data })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    /// Per-sample `ln det(I + n_R·snr·H K H†)`. For the statistically
    /// optimized strategy `K` is optimized for `theta_hat` first.
    pub fn log_dets(&self, snr: f64, theta_hat: f64) -> Result<Vec<f64>> {
        check_snr(snr)?;
        let g = self.n_r as f64 * snr;
        Ok(match &self.data {
            SampleData::Modes { width, values } => values
                .par_chunks(*width)
                .map(|m| stats::sum(m.iter().map(|&l| (g * l).ln_1p())))
                .collect(),
            SampleData::Waterfill { width, values } => {
                if snr == 0.0 {
                    vec![0.0; self.n_samples]
                } else {
                    values.par_chunks(*width).map(|m| waterfill_ln_det(m, g)).collect()
                }
            }
            SampleData::Projected { .. } => {
                let opt = self.optimize(theta_hat, snr)?;
                self.projected_log_dets(snr, &opt.power)
            }
        })
    }

    /// Effective rate per receive dimension; `theta_hat = 0` gives the
    /// ergodic rate.
    pub fn effective_rate(&self, theta_hat: f64, snr: f64) -> Result<EffCapEstimate> {
        if let SampleData::Projected { .. } = self.data {
            return Ok(self.optimize(theta_hat, snr)?.estimate);
        }
        let l = self.log_dets(snr, theta_hat)?;
        effective_from_log_dets(&l, theta_hat, self.n_r)
    }

    /// Ergodic rate per receive dimension.
    pub fn ergodic_rate(&self, snr: f64) -> Result<EffCapEstimate> {
        self.effective_rate(0.0, snr)
    }

    fn projected(&self) -> Result<(&CMat, &[CMat])> {
        match &self.data {
            SampleData::Projected { basis, mats } => Ok((basis, mats)),
            _ => domain("sampler was not built for the statistically optimized strategy"),
        }
    }

    /// Per-sample `ln det(I + n_R·snr·M P)` for power split `p` in the
    /// mean-Gram eigenbasis.
    pub fn projected_log_dets(&self, snr: f64, p: &[f64]) -> Vec<f64> {
        let (_, mats) = self.projected().expect("projected sampler");
        let g = self.n_r as f64 * snr;
        mats.par_iter().map(|m| projected_ln_det(m, p, g)).collect()
    }

    /// Statistically optimized covariance for `(theta_hat, snr)`.
    pub fn optimize(&self, theta_hat: f64, snr: f64) -> Result<StatisticalOptimum> {
        check_snr(snr)?;
        let (basis, mats) = self.projected()?;
        let n_t = self.n_t;
        let g = self.n_r as f64 * snr;
        let uniform = vec![1.0 / n_t as f64; n_t];
        let objective = |p: &[f64]| -> Result<(f64, EffCapEstimate)> {
            let l: Vec<f64> = mats.par_iter().map(|m| projected_ln_det(m, p, g)).collect();
            let est = effective_from_log_dets(&l, theta_hat, self.n_r)?;
            Ok((est.value, est))
        };
        let gradient = |p: &[f64]| -> Vec<f64> {
            let per: Vec<(f64, Vec<f64>)> = mats.par_iter().map(|m| projected_ln_det_grad(m, p, g)).collect();
            let weights: Vec<f64> = if theta_hat > 0.0 {
                let ex: Vec<f64> = per.iter().map(|(l, _)| -theta_hat * l).collect();
                let mx = ex.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = ex.iter().map(|e| (e - mx).exp()).collect();
                let s = stats::sum(w.iter().copied());
                w.into_iter().map(|x| x / s).collect()
            } else {
                vec![1.0 / per.len() as f64; per.len()]
            };
            (0..n_t).map(|j| stats::sum(per.iter().zip(&weights).map(|((_, gr), w)| w * gr[j]))).collect()
        };

        let (u_val, u_est) = objective(&uniform)?;
        let mut p = uniform.clone();
        let mut val = u_val;
        let mut est = u_est;
        if snr > 0.0 && n_t > 1 {
            let mut grad = gradient(&p);
            let mut step = 0.1;
            for _ in 0..2000 {
                let mean = grad.iter().sum::<f64>() / n_t as f64;
                let dir: Vec<f64> = grad.iter().map(|x| x - mean).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 || !norm.is_finite() {
                    break;
                }
                let cand_raw: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a + step * d / norm).collect();
                let cand = project_simplex(&cand_raw);
                let movement: f64 = cand.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
                if movement < 1e-4 {
                    break;
                }
                let (c_val, c_est) = objective(&cand)?;
                if c_val > val {
                    p = cand;
                    val = c_val;
                    est = c_est;
                    grad = gradient(&p);
                } else {
                    step *= 0.5;
                }
            }
        }
        let fell_back = !(val - u_val > 2.0 * est.std_err);
        if fell_back {
            p = uniform;
            est = u_est;
        }
        let diag = CMat::from_real_diag(&p);
        let covariance = (&(basis * &diag) * &basis.adjoint()).hermitian_part();
        Ok(StatisticalOptimum {
            covariance,
            power: p,
            basis: basis.clone(),
            estimate: est,
            uniform_estimate: u_est,
            fell_back_to_uniform: fell_back,
        })
    }
}

fn check_snr(snr: f64) -> Result<()> {
    if !(snr >= 0.0 && snr.is_finite()) {
        return domain(format!("snr must be finite and nonnegative, got {snr}"));
    }
    Ok(())
}

/// `ln det(I + g·D M D)` with `D = diag(√p)`.
fn projected_ln_det(m: &CMat, p: &[f64], g: f64) -> f64 {
    let n = p.len();
    let s: Vec<f64> = p.iter().map(|x| x.max(0.0).sqrt()).collect();
    let a = CMat::from_fn(n, n, |r, c| {
        let v = m[(r, c)] * (g * s[r] * s[c]);
        if r == c {
            v + 1.0
        } else {
            v
        }
    });
    ln_det_hpd(&a).unwrap_or(f64::NAN)
}

/// Value and gradient in `p` of `ln det(I + g·M P)`, `P = diag(p)`.
fn projected_ln_det_grad(m: &CMat, p: &[f64], g: f64) -> (f64, Vec<f64>) {
    let n = p.len();
    let value = projected_ln_det(m, p, g);
    let a = CMat::from_fn(n, n, |r, c| {
        let v = m[(r, c)] * (g * p[c]);
        if r == c {
            v + 1.0
        } else {
            v
        }
    });
    let inv = inverse(&a).expect("I + g M P is invertible for PSD M and p ≥ 0");
    let prod = &inv * m;
    (value, (0..n).map(|j| g * prod[(j, j)].re).collect())
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut tau = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Result of [`optimize_covariance_statistical`].
#[derive(Debug, Clone)]
pub struct StatisticalOptimum {
    pub covariance: CMat,
    /// Power fractions along the columns of `basis`.
    pub power: Vec<f64>,
    /// Eigenvectors of the sample mean of `H†H`, descending eigenvalue.
    pub basis: CMat,
    pub estimate: EffCapEstimate,
    pub uniform_estimate: EffCapEstimate,
    /// Set when the optimizer did not beat `I/n_T` by more than two
    /// standard errors.
    pub fell_back_to_uniform: bool,
}

/// Monte Carlo effective rate per receive dimension for `θ > 0`.
pub fn effective_rate_mc(
    scenario: &QosScenario,
    model: &ChannelModel,
    strategy: &CovarianceStrategy,
    snr: f64,
    n_samples: usize,
    seed: u64,
) -> Result<EffCapEstimate> {
    if scenario.theta() <= 0.0 {
        return domain("effective_rate_mc needs theta > 0; use ergodic_rate_mc for theta = 0");
    }
    scenario.check_model(model)?;
    RateSampler::new(model, strategy, n_samples, seed)?.effective_rate(scenario.theta_hat(), snr)
}

/// Monte Carlo ergodic rate per receive dimension.
pub fn ergodic_rate_mc(
    model: &ChannelModel,
    strategy: &CovarianceStrategy,
    snr: f64,
    n_samples: usize,
    seed: u64,
) -> Result<EffCapEstimate> {
    RateSampler::new(model, strategy, n_samples, seed)?.ergodic_rate(snr)
}

/// Maximizes the effective rate over `K = U diag(p) U†`, `U` the
/// eigenvectors of the sample mean of `H†H`.
pub fn optimize_covariance_statistical(
    scenario: &QosScenario,
    model: &ChannelModel,
    snr: f64,
    n_samples: usize,
    seed: u64,
) -> Result<StatisticalOptimum> {
    if scenario.theta() <= 0.0 {
        return domain("optimize_covariance_statistical needs theta > 0");
    }
    scenario.check_model(model)?;
    RateSampler::new(model, &CovarianceStrategy::StatisticalOptimized, n_samples, seed)?
        .optimize(scenario.theta_hat(), snr)
}

/// Which rate the bit energy is referred to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateBasis {
    /// bits/s/Hz per receive dimension.
    #[default]
    PerDimension,
    /// bits/s/Hz over all receive dimensions.
    Total,
}

/// One point of a bit-energy curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitEnergyPoint {
    pub snr: f64,
    pub rate: f64,
    pub std_err: f64,
    pub eb_n0: f64,
    pub eb_n0_db: f64,
}

/// `E_b/N0 = snr/R_E(snr)` over an ascending SNR grid. Points whose rate is
/// below ten standard errors are dropped as unreliable.
pub fn bit_energy_curve(
    scenario: &QosScenario,
    model: &ChannelModel,
    strategy: &CovarianceStrategy,
    snr_grid: &[f64],
    basis: RateBasis,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<BitEnergyPoint>> {
    if snr_grid.is_empty() {
        return domain("empty SNR grid");
    }
    if snr_grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) || snr_grid.windows(2).any(|w| w[1] <= w[0]) {
        return domain("SNR grid must be positive and strictly ascending");
    }
    scenario.check_model(model)?;
    let sampler = RateSampler::new(model, strategy, n_samples, seed)?;
    bit_energy_from_sampler(&sampler, scenario.theta_hat(), snr_grid, basis)
}

pub fn bit_energy_from_sampler(
    sampler: &RateSampler,
    theta_hat: f64,
    snr_grid: &[f64],
    basis: RateBasis,
) -> Result<Vec<BitEnergyPoint>> {
    let mut out = Vec::with_capacity(snr_grid.len());
    for &snr in snr_grid {
        let mut est = sampler.effective_rate(theta_hat, snr)?;
        if basis == RateBasis::Total {
            est = est.total(sampler.n_r());
        }
        if !(est.value > 10.0 * est.std_err) || est.value <= 0.0 {
            continue;
        }
        let eb = snr / est.value;
        out.push(BitEnergyPoint { snr, rate: est.value, std_err: est.std_err, eb_n0: eb, eb_n0_db: crate::to_db(eb) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_det_rate_cases() {
        let h = ChannelSample::new(CMat::from_real_diag(&[1.0, 2.0])).unwrap();
        let k = CMat::identity(2).scale(0.5);
        assert_eq!(log_det_rate(&h, &k, 0.0, 2), 0.0);
        assert_relative_eq!(log_det_rate(&h, &k, 1.0, 2), 10f64.log2(), max_relative = 1e-14);
        let h1 = ChannelSample::new(CMat::identity(1)).unwrap();
        assert_relative_eq!(log_det_rate(&h1, &CMat::identity(1), 3.0, 1), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn waterfill_cases() {
        assert_eq!(waterfill(&[2.5], 1.0).unwrap().powers, vec![1.0]);
        let w = waterfill(&[3.0, 3.0], 0.7).unwrap();
        assert_relative_eq!(w.powers[0], 0.5, max_relative = 1e-14);
        // eigs {4, 1}, gain 1: both active since μ = (1 + 1/4 + 1)/2 = 1.125 > 1
        let w = waterfill(&[4.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(w.powers[0], 0.875, max_relative = 1e-14);
        assert_relative_eq!(w.powers[1], 0.125, max_relative = 1e-13);
        let w = waterfill(&[0.0, 0.0], 1.0).unwrap();
        assert!(w.degenerate);
        assert_eq!(w.powers, vec![0.5, 0.5]);
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.8, 0.6, -0.2]);
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(p[0], 0.6, max_relative = 1e-14);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn scenario_theta_hat_round_trip() {
        let s = QosScenario::new(0.01, 1e-3, 1e5, 1, 1).unwrap();
        assert_relative_eq!(s.theta_hat(), 0.01 * 100.0 * LOG2_E, max_relative = 1e-15);
        let s2 = QosScenario::from_theta_hat(s.theta_hat(), 1e-3, 1e5, 1, 1).unwrap();
        assert_relative_eq!(s2.theta(), 0.01, max_relative = 1e-14);
        assert!(QosScenario::new(-1.0, 1.0, 1.0, 1, 1).is_err());
    }

    #[test]
    fn deterministic_channel_effective_rate_is_its_rate() {
        let h = CMat::from_real_diag(&[1.0, 2.0]);
        let model = ChannelModel::fixed(h.clone()).unwrap();
        let sc = QosScenario::from_theta_hat(3.0, 1e-3, 1e5, 2, 2).unwrap();
        let e = effective_rate_mc(&sc, &model, &CovarianceStrategy::UniformIdentity, 1.0, 100, 0).unwrap();
        assert_relative_eq!(e.value, 10f64.log2() / 2.0, max_relative = 1e-12);
        assert!(e.std_err < 1e-12);
    }
}
