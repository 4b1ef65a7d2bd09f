//! Low-SNR derivatives and energy metrics, sparse wideband minimum bit
//! energies and high-SNR slope / power-offset analysis.
//!
//! Rates here are per receive dimension unless stated otherwise; the Hankel
//! routines return unnormalized rates (bits/s/Hz).

use std::f64::consts::PI;

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::channel::{gram, max_eig_subspace, sample_indexed, ChannelModel, MomentEstimates, DEFAULT_MULTIPLICITY_TOL};
use crate::engine::{project_simplex, validate_covariance, CovarianceStrategy, QosScenario};
use crate::error::{domain, numeric, Result};
use crate::linalg::{hermitian_eigenvalues, CMat};
use crate::rng::{derive_seed, sample_stream};
use crate::special::{confluent_1f1, gamma_fn, gauss_laguerre, gauss_legendre, ln_gamma, upper_incomplete_gamma, QuadratureRule};
use crate::stats;
use crate::{to_db, LN_2};

/// Transmitter-knowledge regime of a derivative evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Csit,
    Statistical,
    Uniform,
}

/// First and second derivatives of the per-dimension rate at `snr = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowSnrDerivatives {
    pub first_deriv: f64,
    pub second_deriv: f64,
    pub regime: Regime,
    pub n_r: usize,
    /// Multiplicity of the dominant eigenvalue used (1 for uniform).
    pub multiplicity: usize,
    /// Simplex weights minimizing the quadratic form (statistical regime).
    pub alpha: Vec<f64>,
    /// Set when the simplex minimization failed and `α = 1/l` was used.
    pub degraded: bool,
}

/// Derivatives with per-realization channel knowledge (beamforming in the
/// top eigenspace of multiplicity `l`).
pub fn derivs_csit(moments: &MomentEstimates, scenario: &QosScenario, l: usize) -> Result<LowSnrDerivatives> {
    if l == 0 {
        return domain("multiplicity l must be at least 1");
    }
    let e1 = moments.e_lambda_max;
    let e2 = moments.e_lambda_max_sq;
    if !(e1.is_finite() && e2.is_finite()) {
        return domain("moments must be finite");
    }
    let n_r = scenario.n_r() as f64;
    let th = scenario.theta_hat();
    let first = e1 / LN_2;
    let second = th * n_r / LN_2 * (e1 * e1 - e2) - n_r / (l as f64 * LN_2) * e2;
    Ok(LowSnrDerivatives {
        first_deriv: first,
        second_deriv: second,
        regime: Regime::Csit,
        n_r: scenario.n_r(),
        multiplicity: l,
        alpha: Vec::new(),
        degraded: false,
    })
}

/// Derivatives with the uniform covariance `I/n_T`.
pub fn derivs_uniform(moments: &MomentEstimates, scenario: &QosScenario) -> Result<LowSnrDerivatives> {
    let t1 = moments.e_trace;
    let t2 = moments.e_trace_sq;
    let g2 = moments.e_trace_gram_sq;
    if !(t1.is_finite() && t2.is_finite() && g2.is_finite()) {
        return domain("moments must be finite");
    }
    let n_r = scenario.n_r() as f64;
    let n_t = scenario.n_t() as f64;
    let th = scenario.theta_hat();
    let first = t1 / (n_t * LN_2);
    let second = th * n_r / (n_t * n_t * LN_2) * (t1 * t1 - t2) - n_r / (n_t * n_t * LN_2) * g2;
    Ok(LowSnrDerivatives {
        first_deriv: first,
        second_deriv: second,
        regime: Regime::Uniform,
        n_r: scenario.n_r(),
        multiplicity: 1,
        alpha: Vec::new(),
        degraded: false,
    })
}

/// Derivatives when the transmitter knows only `E{H†H}`.
///
/// The quadratic-form coefficients
/// `A_ij = E{(u_i†Gu_i)(u_j†Gu_j)}` and `B_ij = E{|u_j†Gu_i|²}` over the top
/// eigenvectors `u_i` of `mean_gram` are estimated from `n_samples` draws of
/// `model`.
pub fn derivs_statistical(
    mean_gram: &CMat,
    model: &ChannelModel,
    scenario: &QosScenario,
    n_samples: usize,
    seed: u64,
) -> Result<LowSnrDerivatives> {
    scenario.check_model(model)?;
    if mean_gram.shape() != (scenario.n_t(), scenario.n_t()) {
        return domain("mean Gram must be n_T x n_T");
    }
    validate_psd(mean_gram)?;
    if n_samples == 0 {
        return domain("n_samples must be positive");
    }
    let summary = max_eig_subspace(mean_gram, DEFAULT_MULTIPLICITY_TOL)?;
    let l = summary.multiplicity_l;
    let lmax = summary.lambda_max;
    let basis = &summary.max_eig_basis;
    let cols: Vec<Vec<_>> = (0..l).map(|c| basis.column(c)).collect();

    // per sample: diagonal quadratic forms and squared cross terms
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let g = gram(&sample_indexed(model, seed, s));
            let diag: Vec<f64> = cols.iter().map(|u| g.quadratic_form(u).re).collect();
            let mut cross = vec![0.0; l * l];
            for i in 0..l {
                for j in 0..l {
                    cross[i * l + j] = if i == j { diag[i] * diag[i] } else { g.bilinear_form(&cols[j], &cols[i]).norm_sqr() };
                }
            }
            (diag, cross)
        })
        .collect();
    let n = n_samples as f64;
    let n_r = scenario.n_r() as f64;
    let th = scenario.theta_hat();
    let mut q = vec![0.0; l * l];
    for i in 0..l {
        for j in 0..l {
            let a = stats::sum(rows.iter().map(|(d, _)| d[i] * d[j])) / n;
            let b = stats::sum(rows.iter().map(|(_, c)| c[i * l + j])) / n;
            q[i * l + j] = th * n_r / LN_2 * a + n_r / LN_2 * b;
        }
    }
    // symmetrize against rounding
    for i in 0..l {
        for j in (i + 1)..l {
            let m = 0.5 * (q[i * l + j] + q[j * l + i]);
            q[i * l + j] = m;
            q[j * l + i] = m;
        }
    }
    let (alpha, degraded) = match simplex_qp_min(&q, l, derive_seed(seed, 0x5150)) {
        Some(a) => (a, false),
        None => (vec![1.0 / l as f64; l], true),
    };
    let quad = quad_form(&q, &alpha, l);
    let first = lmax / LN_2;
    let second = th * n_r / LN_2 * lmax * lmax - quad;
    Ok(LowSnrDerivatives {
        first_deriv: first,
        second_deriv: second,
        regime: Regime::Statistical,
        n_r: scenario.n_r(),
        multiplicity: l,
        alpha,
        degraded,
    })
}

fn validate_psd(a: &CMat) -> Result<()> {
    let eigs = crate::linalg::hermitian_eig(a)?.values;
    let scale = eigs.first().map_or(1.0, |v| v.abs().max(1.0));
    if eigs.iter().any(|&v| v < -1e-10 * scale) {
        return domain("matrix is not positive semidefinite");
    }
    Ok(())
}

fn quad_form(q: &[f64], a: &[f64], l: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..l {
        for j in 0..l {
            s += a[i] * q[i * l + j] * a[j];
        }
    }
    s
}

/// Minimizes `αᵀQα` over the probability simplex. Exact for `l ≤ 2`;
/// projected gradient from the barycentre, the vertices and 20 random
/// starting points otherwise. `None` if the result is not finite.
pub(crate) fn simplex_qp_min(q: &[f64], l: usize, seed: u64) -> Option<Vec<f64>> {
    if q.iter().any(|v| !v.is_finite()) {
        return None;
    }
    match l {
        0 => None,
        1 => Some(vec![1.0]),
        2 => {
            let (q00, q01, q11) = (q[0], q[1], q[3]);
            let a = q00 - 2.0 * q01 + q11;
            let b = 2.0 * q01 - 2.0 * q11;
            let f = |t: f64| a * t * t + b * t + q11;
            let mut best = if f(0.0) <= f(1.0) { 0.0 } else { 1.0 };
            if a > 0.0 {
                let t = -b / (2.0 * a);
                if (0.0..=1.0).contains(&t) && f(t) < f(best) {
                    best = t;
                }
            }
            Some(vec![best, 1.0 - best])
        }
        _ => {
            let lip = 2.0 * q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if lip == 0.0 {
                return Some(vec![1.0 / l as f64; l]);
            }
            let step = 1.0 / lip;
            let mut starts: Vec<Vec<f64>> = vec![vec![1.0 / l as f64; l]];
            for v in 0..l {
                let mut e = vec![0.0; l];
                e[v] = 1.0;
                starts.push(e);
            }
            let mut rng = sample_stream(seed, 0);
            for _ in 0..20 {
                // uniform on the simplex: normalized exponentials
                let x: Vec<f64> = (0..l).map(|_| Exp1.sample(&mut rng)).collect();
                let s: f64 = x.iter().sum();
                starts.push(x.into_iter().map(|v: f64| v / s).collect());
            }
            let mut best: Option<(f64, Vec<f64>)> = None;
            for mut a in starts {
                for _ in 0..20_000 {
                    let grad: Vec<f64> = (0..l).map(|i| 2.0 * (0..l).map(|j| q[i * l + j] * a[j]).sum::<f64>()).collect();
                    let next = project_simplex(&a.iter().zip(&grad).map(|(x, g)| x - step * g).collect::<Vec<_>>());
                    let mv: f64 = next.iter().zip(&a).map(|(x, y)| (x - y).abs()).sum();
                    a = next;
                    if mv < 1e-14 {
                        break;
                    }
                }
                let v = quad_form(q, &a, l);
                if v.is_finite() && best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, a));
                }
            }
            best.map(|(_, a)| a)
        }
    }
}

/// Minimum bit energy and wideband slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyMetrics {
    /// `E_b/N0_min` as a linear ratio, referred to the per-dimension rate.
    pub eb_min: f64,
    pub eb_min_db: f64,
    /// Wideband slope per receive antenna, bits/s/Hz/(3 dB).
    pub s0_per_rx: f64,
    /// Wideband slope of the unnormalized rate (`n_R · s0_per_rx`).
    pub s0_total: f64,
}

/// `E_b/N0_min = 1/Ċ(0)` and `S_0 = 2·Ċ(0)²/(−C̈(0))·ln2`.
pub fn energy_metrics(derivs: &LowSnrDerivatives) -> Result<EnergyMetrics> {
    let c1 = derivs.first_deriv;
    let c2 = derivs.second_deriv;
    if !(c1 > 0.0 && c1.is_finite()) {
        return domain(format!("first derivative must be positive, got {c1}"));
    }
    if !(c2 < 0.0) {
        return domain(format!("second derivative must be negative for the low-SNR expansion, got {c2}"));
    }
    let eb_min = 1.0 / c1;
    let s0 = 2.0 * c1 * c1 / (-c2) * LN_2;
    Ok(EnergyMetrics { eb_min, eb_min_db: to_db(eb_min), s0_per_rx: s0, s0_total: s0 * derivs.n_r as f64 })
}

/// Wideband slope per receive antenna from the kurtosis of `σmax(H)`.
pub fn s0_from_kurtosis(kurtosis: f64, n_r: usize, l: usize, theta_hat: f64) -> f64 {
    let n_r = n_r as f64;
    2.0 / (n_r / l as f64 * kurtosis + theta_hat * n_r * (kurtosis - 1.0))
}

/// Wideband slope per receive antenna for i.i.d. Rayleigh fading with the
/// uniform covariance.
pub fn s0_iid_uniform(n_r: usize, n_t: usize, theta_hat: f64) -> f64 {
    2.0 * n_t as f64 / (theta_hat + n_r as f64 + n_t as f64)
}

/// How the number of resolvable subchannels scales with bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    BoundedM,
    Sublinear,
}

/// Sparse multipath wideband parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseWidebandConfig {
    pub m: usize,
    /// Total power over noise density, Hz.
    pub p_over_n0: f64,
    /// Coherence bandwidth, Hz.
    pub b_c: f64,
    pub growth: Growth,
}

impl SparseWidebandConfig {
    pub fn new(m: usize, p_over_n0: f64, b_c: f64, growth: Growth) -> Result<Self> {
        if m == 0 || !(p_over_n0 > 0.0 && p_over_n0.is_finite()) || !(b_c > 0.0 && b_c.is_finite()) {
            return domain(format!("invalid sparse configuration m = {m}, P/N0 = {p_over_n0}, B_c = {b_c}"));
        }
        Ok(Self { m, p_over_n0, b_c, growth })
    }
}

/// A minimum bit energy as a linear ratio and in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EbMin {
    pub linear: f64,
    pub db: f64,
}

impl EbMin {
    fn new(linear: f64) -> Self {
        Self { linear, db: to_db(linear) }
    }
}

/// Per-sample received power `tr(H K H†)` (or `λmax(H†H)` for channel-aware
/// strategies).
fn received_power_samples(
    model: &ChannelModel,
    strategy: &CovarianceStrategy,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n_t = model.n_t() as f64;
    if let CovarianceStrategy::FixedCovariance(k) = strategy {
        if k.rows() != model.n_t() {
            return domain("covariance dimension does not match n_T");
        }
        validate_covariance(k)?;
    }
    let per = |i: u64| -> f64 {
        let h = sample_indexed(model, seed, i);
        match strategy {
            CovarianceStrategy::UniformIdentity => h.entries.frobenius_norm_sq() / n_t,
            CovarianceStrategy::FixedCovariance(k) => (&(&h.entries * k) * &h.entries.adjoint()).trace().re,
            _ => {
                let g = if h.n_r() < h.n_t() { h.entries.outer_gram() } else { h.entries.gram() };
                hermitian_eigenvalues(&g).expect("Gram is Hermitian")[0].max(0.0)
            }
        }
    };
    Ok((0..n_samples as u64).into_par_iter().map(per).collect())
}

/// Minimum bit energy with a bounded number `m` of resolvable paths:
/// `c / (−ln E{exp(−(c/ln2)·t)})` with `c = θ·T·(P/N0)/m`.
pub fn sparse_ebmin_bounded(
    config: &SparseWidebandConfig,
    scenario: &QosScenario,
    model: &ChannelModel,
    strategy: &CovarianceStrategy,
    n_samples: usize,
    seed: u64,
) -> Result<EbMin> {
    if config.growth != Growth::BoundedM {
        return domain("sparse_ebmin_bounded needs growth = bounded_m");
    }
    if scenario.theta() <= 0.0 {
        return domain("sparse_ebmin_bounded needs theta > 0");
    }
    scenario.check_model(model)?;
    if n_samples == 0 {
        return domain("n_samples must be positive");
    }
    let c = scenario.theta() * scenario.t() * config.p_over_n0 / config.m as f64;
    let k = c / LN_2;
    let denom = match strategy {
        CovarianceStrategy::StatisticalOptimized => statistical_sparse_denominator(model, k, n_samples, seed)?,
        _ => {
            let t = received_power_samples(model, strategy, n_samples, seed)?;
            neg_log_mgf(&t, k)?
        }
    };
    if !(denom > 0.0) {
        return numeric(format!("bit energy denominator is not positive ({denom:.3e})"));
    }
    Ok(EbMin::new(c / denom))
}

/// `−ln mean exp(−k·t)`.
fn neg_log_mgf(t: &[f64], k: f64) -> Result<f64> {
    let ex: Vec<f64> = t.iter().map(|v| -k * v).collect();
    let lme = stats::log_mean_exp(&ex);
    if !lme.log_mean.is_finite() {
        return numeric(format!("MGF estimate is not finite (largest exponent {:.6e})", lme.max_exponent));
    }
    Ok(-lme.log_mean)
}

/// Maximizes `−ln E{exp(−k·Σ p_j u_j†H†Hu_j)}` over the simplex, `u_j` the
/// eigenvectors of the exact mean Gram.
fn statistical_sparse_denominator(model: &ChannelModel, k: f64, n_samples: usize, seed: u64) -> Result<f64> {
    let n_t = model.n_t();
    let basis = crate::linalg::hermitian_eig(&model.mean_gram())?.vectors;
    let cols: Vec<Vec<_>> = (0..n_t).map(|c| basis.column(c)).collect();
    let diags: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let g = gram(&sample_indexed(model, seed, i));
            cols.iter().map(|u| g.quadratic_form(u).re.max(0.0)).collect()
        })
        .collect();
    let value = |p: &[f64]| -> Result<f64> {
        let t: Vec<f64> = diags.iter().map(|d| d.iter().zip(p).map(|(a, b)| a * b).sum()).collect();
        neg_log_mgf(&t, k)
    };
    let grad = |p: &[f64]| -> Vec<f64> {
        let ex: Vec<f64> = diags.iter().map(|d| -k * d.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()).collect();
        let mx = ex.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = ex.iter().map(|e| (e - mx).exp()).collect();
        let s = stats::sum(w.iter().copied());
        (0..n_t).map(|j| k * stats::sum(diags.iter().zip(&w).map(|(d, wi)| wi * d[j])) / s).collect()
    };
    let mut p = vec![1.0 / n_t as f64; n_t];
    let mut val = value(&p)?;
    let mut g = grad(&p);
    let mut step = 0.1;
    for _ in 0..2000 {
        if n_t == 1 {
            break;
        }
        let mean = g.iter().sum::<f64>() / n_t as f64;
        let dir: Vec<f64> = g.iter().map(|x| x - mean).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        let cand = project_simplex(&p.iter().zip(&dir).map(|(a, d)| a + step * d / norm).collect::<Vec<_>>());
        let mv: f64 = cand.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        if mv < 1e-6 {
            break;
        }
        let cv = value(&cand)?;
        if cv > val {
            p = cand;
            val = cv;
            g = grad(&p);
        } else {
            step *= 0.5;
        }
    }
    Ok(val)
}

/// Minimum bit energy when the number of resolvable paths grows
/// sublinearly with bandwidth: `ln2` over the mean received power of the
/// strategy, with `λmax(E{H†H})` for statistical knowledge.
pub fn sparse_ebmin_sublinear(
    model: &ChannelModel,
    strategy: &CovarianceStrategy,
    n_samples: usize,
    seed: u64,
) -> Result<EbMin> {
    let denom = match strategy {
        CovarianceStrategy::StatisticalOptimized => {
            hermitian_eigenvalues(&model.mean_gram())?.first().copied().unwrap_or(0.0)
        }
        _ => {
            if n_samples == 0 {
                return domain("n_samples must be positive");
            }
            let t = received_power_samples(model, strategy, n_samples, seed)?;
            stats::sum(t.iter().copied()) / t.len() as f64
        }
    };
    if !(denom > 0.0) {
        return domain("mean received power is zero");
    }
    Ok(EbMin::new(LN_2 / denom))
}

// ---------------------------------------------------------------------------
// High SNR

const HANKEL_SPLIT: f64 = 4.0;
const HANKEL_HEAD_PANELS: i32 = 60;
const HANKEL_MAX_ORDER: usize = 256;

fn antenna_shape(scenario: &QosScenario) -> (usize, usize) {
    let k = scenario.n_r().min(scenario.n_t());
    let d = scenario.n_r().max(scenario.n_t()) - k;
    (k, d)
}

/// `∫₀^∞ (1 + c·z)^{−θ̂} z^p e^{−z} dz` with an `order`-point rule.
///
/// `[0, τ]` is covered by geometrically shrinking Gauss–Legendre panels,
/// which resolve the `1/c` scale at large `c`; `[τ, ∞)` by Gauss–Laguerre.
fn hankel_integral(p: usize, theta_hat: f64, c: f64, legendre: &QuadratureRule, laguerre: &QuadratureRule) -> f64 {
    let pf = p as f64;
    let ln_h = |z: f64| -theta_hat * (c * z).ln_1p() + if p == 0 { 0.0 } else { pf * z.ln() };
    let mut total = 0.0;
    let mut comp = 0.0;
    let mut add = |v: f64| {
        let t = total + v;
        comp += if f64::abs(total) >= v.abs() { (total - t) + v } else { (v - t) + total };
        total = t;
    };
    // tail: e^{−τ} ∫ h(τ + x) e^{−x} dx
    add(laguerre.integrate(|x| (ln_h(HANKEL_SPLIT + x) - HANKEL_SPLIT).exp()));
    let mut hi = HANKEL_SPLIT;
    for _ in 0..HANKEL_HEAD_PANELS {
        let lo = 0.5 * hi;
        add(panel(&ln_h, legendre, lo, hi));
        hi = lo;
    }
    add(panel(&ln_h, legendre, 0.0, hi));
    total + comp
}

fn panel(ln_h: &impl Fn(f64) -> f64, rule: &QuadratureRule, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * rule.integrate(|x| {
        let z = mid + half * x;
        (ln_h(z) - z).exp()
    })
}

/// Hankel entry `g_{i,j}` (zero-based) by quadrature with a fixed order.
pub fn hankel_entry(i: usize, j: usize, scenario: &QosScenario, snr: f64, quad_order: usize) -> Result<f64> {
    let (k, d) = antenna_shape(scenario);
    if i >= k || j >= k {
        return domain(format!("Hankel index ({i}, {j}) outside 0..{k}"));
    }
    check_hankel_args(scenario, snr)?;
    let c = scenario.n_r() as f64 / scenario.n_t() as f64 * snr;
    let leg = gauss_legendre(quad_order)?;
    let lag = gauss_laguerre(quad_order)?;
    Ok(hankel_integral(i + j + d, scenario.theta_hat(), c, &leg, &lag))
}

fn check_hankel_args(scenario: &QosScenario, snr: f64) -> Result<()> {
    if !(snr > 0.0 && snr.is_finite()) {
        return domain(format!("snr must be positive and finite, got {snr}"));
    }
    if !(scenario.theta_hat() >= 0.0) {
        return domain("theta_hat must be nonnegative");
    }
    Ok(())
}

/// `E{det(I + (n_R/n_T)·snr·HH†)^{−θ̂}}` for i.i.d. Rayleigh fading at one
/// quadrature order.
fn hankel_mgf_at(scenario: &QosScenario, snr: f64, order: usize) -> Result<f64> {
    let (k, d) = antenna_shape(scenario);
    let c = scenario.n_r() as f64 / scenario.n_t() as f64 * snr;
    let th = scenario.theta_hat();
    let leg = gauss_legendre(order)?;
    let lag = gauss_laguerre(order)?;
    let moments: Vec<f64> = (0..2 * k - 1).map(|s| hankel_integral(s + d, th, c, &leg, &lag)).collect();
    // scale rows/cols by Γ(2i+d+1)^{−1/2} so the θ̂ = 0 matrix has a unit diagonal
    let ln_scale: Vec<f64> = (0..k).map(|i| 0.5 * ln_gamma((2 * i + d + 1) as f64).unwrap_or(0.0)).collect();
    let mut a = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            a[i * k + j] = moments[i + j] * (-(ln_scale[i] + ln_scale[j])).exp();
        }
    }
    let det = real_det(&mut a, k);
    if !(det > 0.0) {
        return numeric(format!("Hankel determinant is not positive ({det:.3e})"));
    }
    let mut ln_norm = 0.0;
    for i in 1..=k {
        ln_norm += ln_gamma(i as f64)? + ln_gamma((d + i) as f64)?;
    }
    let ln_unscale: f64 = 2.0 * ln_scale.iter().sum::<f64>();
    Ok((det.ln() + ln_unscale - ln_norm).exp())
}

/// Determinant by Gaussian elimination with partial pivoting (destroys `a`).
fn real_det(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs())).unwrap_or(col);
        if a[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for r in (col + 1)..n {
            let f = a[r * n + col] / p;
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
        }
    }
    det
}

/// Closed-form MGF of the i.i.d. Rayleigh MIMO rate with uniform
/// covariance, `det(G)/Π_{i=1}^{k} Γ(i)Γ(d+i)`, with the Hankel entries
/// computed by quadrature.
///
/// The order doubles from `quad_order` until the MGF changes by less than
/// 1e-8 relative; reaching order 256 with a change above 1e-6 is an error.
pub fn hankel_mgf(scenario: &QosScenario, snr: f64, quad_order: usize) -> Result<f64> {
    check_hankel_args(scenario, snr)?;
    if quad_order == 0 {
        return domain("quad_order must be positive");
    }
    let mut order = quad_order.min(HANKEL_MAX_ORDER / 2);
    let mut prev = hankel_mgf_at(scenario, snr, order)?;
    let mut change = f64::INFINITY;
    while order < HANKEL_MAX_ORDER {
        order = (2 * order).min(HANKEL_MAX_ORDER);
        let cur = hankel_mgf_at(scenario, snr, order)?;
        change = ((cur - prev) / cur).abs();
        prev = cur;
        if change < 1e-8 {
            return Ok(cur);
        }
    }
    if change <= 1e-6 {
        Ok(prev)
    } else {
        numeric(format!("Hankel quadrature did not converge (relative change {change:.3e} at order {HANKEL_MAX_ORDER})"))
    }
}

/// Effective rate (bits/s/Hz, not normalized by `n_R`) of i.i.d. Rayleigh
/// fading with uniform covariance, from [`hankel_mgf`].
pub fn hankel_effective_rate(scenario: &QosScenario, snr: f64, quad_order: usize) -> Result<f64> {
    if !(scenario.theta_hat() > 0.0) {
        return domain("hankel_effective_rate needs theta_hat > 0");
    }
    let mgf = hankel_mgf(scenario, snr, quad_order)?;
    Ok(-mgf.ln() / (scenario.theta_hat() * LN_2))
}

/// Hankel entry `g_{i,j}` from its two-term ₁F₁ representation.
///
/// The representation has poles at every integer `θ̂`; such inputs are
/// rejected with a domain error naming the integer.
pub fn hankel_entry_closed(i: usize, j: usize, scenario: &QosScenario, snr: f64) -> Result<f64> {
    let (k, d) = antenna_shape(scenario);
    if i >= k || j >= k {
        return domain(format!("Hankel index ({i}, {j}) outside 0..{k}"));
    }
    check_hankel_args(scenario, snr)?;
    let th = scenario.theta_hat();
    if th == th.round() {
        return domain(format!(
            "closed form is singular at integer theta_hat = {} (d + i + j = {})",
            th.round() as i64,
            d + i + j
        ));
    }
    let m = (d + i + j) as f64;
    let c = scenario.n_r() as f64 / scenario.n_t() as f64 * snr;
    let z = 1.0 / c;
    let pre = PI / (gamma_fn(th)? * crate::special::sin_pi(m - th));
    let first = c.powf(-1.0 - m) * gamma_fn(1.0 + m)? / gamma_fn(2.0 + m - th)? * confluent_1f1(1.0 + m, 2.0 + m - th, z)?;
    let second = c.powf(-th) * gamma_fn(th)? / gamma_fn(th - m)? * confluent_1f1(th, th - m, z)?;
    Ok(pre * (first - second))
}

/// SISO Rayleigh MGF `E{(1 + snr·|h|²)^{−θ̂}} = snr^{−θ̂} e^{1/snr} Γ(1 − θ̂, 1/snr)`.
pub fn siso_mgf_incomplete_gamma(theta_hat: f64, snr: f64) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return domain(format!("snr must be positive and finite, got {snr}"));
    }
    let x = 1.0 / snr;
    let g = upper_incomplete_gamma(1.0 - theta_hat, x)?;
    Ok((-theta_hat * snr.ln() + x + g.ln()).exp())
}

/// Which high-SNR result produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HighSnrRegime {
    /// `θ̂ < max − min + 1`: full multiplexing slope `min(n_R, n_T)`.
    FullMultiplexing,
    /// Single antenna with `θ̂ > 1`: slope `1/θ̂`.
    SingleAntenna,
    /// `θ̂ > max + min − 1` with several antennas: slope `min²/θ̂`.
    LargeExponentHeuristic,
    /// Any other case: slope regressed from the Hankel rate curve.
    Empirical,
}

/// High-SNR slope and power offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighSnrMetrics {
    /// bits/s/Hz per 3 dB, unnormalized rate.
    pub s_inf: f64,
    /// Power offset in 3 dB units, when it is finite in the regime.
    pub l_inf: Option<f64>,
    pub regime_note: HighSnrRegime,
    /// Set for results that are not established theorems.
    pub heuristic: bool,
}

/// High-SNR slope and power offset for i.i.d. Rayleigh fading.
pub fn highsnr_metrics(scenario: &QosScenario, model: &ChannelModel, n_samples: usize, seed: u64) -> Result<HighSnrMetrics> {
    if !model.is_iid() {
        return domain("high-SNR metrics are derived for the i.i.d. Gaussian model only");
    }
    scenario.check_model(model)?;
    let (k, d) = antenna_shape(scenario);
    let th = scenario.theta_hat();
    let kf = k as f64;
    let df = d as f64;
    if th < df + 1.0 {
        let l_inf = power_offset_mc(scenario, model, n_samples, seed)?;
        return Ok(HighSnrMetrics { s_inf: kf, l_inf: Some(l_inf), regime_note: HighSnrRegime::FullMultiplexing, heuristic: false });
    }
    if k == 1 && d == 0 && th > 1.0 {
        return Ok(HighSnrMetrics { s_inf: 1.0 / th, l_inf: None, regime_note: HighSnrRegime::SingleAntenna, heuristic: false });
    }
    if th > df + 2.0 * kf - 1.0 {
        return Ok(HighSnrMetrics {
            s_inf: kf * kf / th,
            l_inf: None,
            regime_note: HighSnrRegime::LargeExponentHeuristic,
            heuristic: true,
        });
    }
    let points: Vec<(f64, f64)> = [30.0, 35.0, 40.0, 45.0, 50.0]
        .iter()
        .map(|db| {
            let snr = crate::from_db(*db);
            hankel_effective_rate(scenario, snr, 32).map(|r| (snr, r))
        })
        .collect::<Result<_>>()?;
    Ok(HighSnrMetrics {
        s_inf: highsnr_slope_empirical(&points)?,
        l_inf: None,
        regime_note: HighSnrRegime::Empirical,
        heuristic: true,
    })
}

/// `log₂(n_T/n_R) + 1/(θ̂·ln2·k) · ln E{det(W)^{−θ̂}}`, or the `θ̂ = 0`
/// limit `log₂(n_T/n_R) − E{log₂det W}/k`, with `W` the smaller Gram.
fn power_offset_mc(scenario: &QosScenario, model: &ChannelModel, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return domain("n_samples must be positive");
    }
    let (k, _) = antenna_shape(scenario);
    let ln_dets: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let h = sample_indexed(model, seed, i);
            let w = if h.n_r() <= h.n_t() { h.entries.outer_gram() } else { h.entries.gram() };
            hermitian_eigenvalues(&w).expect("Gram is Hermitian").iter().map(|l| l.ln()).sum()
        })
        .collect();
    let base = (scenario.n_t() as f64 / scenario.n_r() as f64).log2();
    let th = scenario.theta_hat();
    let kf = k as f64;
    if th == 0.0 {
        let mean = stats::sum(ln_dets.iter().copied()) / n_samples as f64;
        return Ok(base - mean / (kf * LN_2));
    }
    let ex: Vec<f64> = ln_dets.iter().map(|l| -th * l).collect();
    let lme = stats::log_mean_exp(&ex);
    if !lme.log_mean.is_finite() {
        return numeric(format!("power offset MGF is not finite (largest exponent {:.6e})", lme.max_exponent));
    }
    Ok(base + lme.log_mean / (th * LN_2 * kf))
}

/// Least-squares slope of rate against `log₂ snr`.
pub fn highsnr_slope_empirical(rate_points: &[(f64, f64)]) -> Result<f64> {
    if rate_points.len() < 4 {
        return domain(format!("need at least 4 points, got {}", rate_points.len()));
    }
    let lo = rate_points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = rate_points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !(lo >= 1e3) {
        return domain(format!("all SNR points must be at least 1e3 (30 dB), smallest is {lo}"));
    }
    if !(hi / lo >= 100.0 * (1.0 - 1e-12)) {
        return domain(format!("SNR points must span at least 20 dB, span is {:.2} dB", to_db(hi / lo)));
    }
    let xs: Vec<f64> = rate_points.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = rate_points.iter().map(|p| p.1).collect();
    Ok(stats::linear_fit(&xs, &ys).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn moments(e1: f64, e2: f64) -> MomentEstimates {
        let z = crate::channel::MomentStdErrs {
            e_lambda_max: 0.0,
            e_lambda_max_sq: 0.0,
            e_trace: 0.0,
            e_trace_sq: 0.0,
            e_trace_gram_sq: 0.0,
            kurtosis_sigma_max: 0.0,
        };
        MomentEstimates {
            e_lambda_max: e1,
            e_lambda_max_sq: e2,
            e_trace: e1,
            e_trace_sq: e2,
            e_trace_gram_sq: e2,
            kurtosis_sigma_max: e2 / (e1 * e1),
            std_errs: z,
            n_samples: 1000,
        }
    }

    #[test]
    fn deterministic_siso_derivatives() {
        let sc = QosScenario::from_theta_hat(2.0, 1e-3, 1e5, 1, 1).unwrap();
        let d = derivs_csit(&moments(1.0, 1.0), &sc, 1).unwrap();
        assert_relative_eq!(d.first_deriv, 1.0 / LN_2, max_relative = 1e-15);
        assert_relative_eq!(d.second_deriv, -1.0 / LN_2, max_relative = 1e-15);
        let u = derivs_uniform(&moments(1.0, 1.0), &sc).unwrap();
        assert_relative_eq!(u.second_deriv, d.second_deriv, max_relative = 1e-15);
        let e = energy_metrics(&d).unwrap();
        assert_relative_eq!(e.s0_per_rx, 2.0, max_relative = 1e-14);
        assert_relative_eq!(s0_from_kurtosis(1.0, 1, 1, 0.0), 2.0);
    }

    #[test]
    fn exponential_siso_derivatives() {
        let sc = QosScenario::from_theta_hat(0.0, 1e-3, 1e5, 1, 1).unwrap();
        let d = derivs_csit(&moments(1.0, 2.0), &sc, 1).unwrap();
        assert_relative_eq!(d.second_deriv, -2.0 / LN_2, max_relative = 1e-15);
        let e = energy_metrics(&derivs_uniform(&moments(1.0, 2.0), &sc).unwrap()).unwrap();
        assert_relative_eq!(e.eb_min, LN_2, max_relative = 1e-15);
        assert_relative_eq!(e.s0_per_rx, 1.0, max_relative = 1e-14);
        let sc1 = sc.with_theta_hat(1.0).unwrap();
        assert!(derivs_csit(&moments(1.0, 2.0), &sc1, 1).unwrap().second_deriv < d.second_deriv);
    }

    #[test]
    fn energy_metrics_rejects_nonnegative_curvature() {
        let mut d = derivs_csit(&moments(1.0, 1.0), &QosScenario::from_theta_hat(0.0, 1.0, 1.0, 1, 1).unwrap(), 1).unwrap();
        d.second_deriv = 0.0;
        assert!(matches!(energy_metrics(&d), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn qp_two_dimensional_matches_grid() {
        let q = [2.0, -0.5, -0.5, 1.0];
        let a = simplex_qp_min(&q, 2, 0).unwrap();
        let grid = (0..=10_000)
            .map(|i| {
                let t = i as f64 / 10_000.0;
                quad_form(&q, &[t, 1.0 - t], 2)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(quad_form(&q, &a, 2) <= grid + 1e-12);
    }

    #[test]
    fn qp_three_dimensional_indefinite() {
        // concave along (1,-1,0); the minimum (1-s)² + 5s² sits at s = 1/6
        let q = [1.0, 3.0, 0.0, 3.0, 1.0, 0.0, 0.0, 0.0, 5.0];
        let a = simplex_qp_min(&q, 3, 1).unwrap();
        assert_relative_eq!(quad_form(&q, &a, 3), 5.0 / 6.0, max_relative = 1e-10);
    }

    #[test]
    fn qp_three_dimensional_random_against_grid() {
        let mut rng = sample_stream(99, 0);
        for trial in 0..20 {
            let m: Vec<f64> = (0..9).map(|_| { let e: f64 = Exp1.sample(&mut rng); e - 1.0 }).collect();
            // symmetrize
            let q: Vec<f64> = (0..9).map(|k| 0.5 * (m[k] + m[(k % 3) * 3 + k / 3])).collect();
            let a = simplex_qp_min(&q, 3, trial).unwrap();
            let n = 50;
            let mut grid = f64::INFINITY;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let p = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                    grid = grid.min(quad_form(&q, &p, 3));
                }
            }
            assert!(quad_form(&q, &a, 3) <= grid + 1e-12, "trial {trial}");
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12 && a.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn slope_of_exact_line() {
        let pts: Vec<(f64, f64)> = [1e3, 1e4, 1e5, 1e6].iter().map(|&s: &f64| (s, 3.0 * s.log2() - 5.0)).collect();
        assert_relative_eq!(highsnr_slope_empirical(&pts).unwrap(), 3.0, max_relative = 1e-12);
        assert!(highsnr_slope_empirical(&pts[..3]).is_err());
        let narrow: Vec<(f64, f64)> = [1e3, 2e3, 4e3, 8e3].iter().map(|&s: &f64| (s, s.log2())).collect();
        assert!(highsnr_slope_empirical(&narrow).is_err());
    }

    #[test]
    fn hankel_mgf_is_one_at_zero_exponent() {
        for (nr, nt) in [(1, 1), (2, 2), (3, 3), (2, 5), (3, 1)] {
            let sc = QosScenario::from_theta_hat(0.0, 1e-3, 1e5, nr, nt).unwrap();
            assert_relative_eq!(hankel_mgf(&sc, 10.0, 32).unwrap(), 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn hankel_closed_form_guard() {
        let sc = QosScenario::from_theta_hat(2.0, 1e-3, 1e5, 1, 1).unwrap();
        match hankel_entry_closed(0, 0, &sc, 5.0) {
            Err(crate::Error::Domain(msg)) => assert!(msg.contains('2')),
            other => panic!("expected domain error, got {other:?}"),
        }
    }
}
