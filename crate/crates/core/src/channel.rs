//! Fading channel models, Gram spectra and Monte Carlo spectral moments.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::linalg::{hermitian_eigenvalues, psd_sqrt, CMat};
use crate::rng::sample_stream;
use crate::stats;

pub use crate::linalg::{hermitian_eig, HermitianEigen};

/// Default relative tolerance for counting the multiplicity of λmax.
pub const DEFAULT_MULTIPLICITY_TOL: f64 = 1e-8;

/// One realization of the `n_R × n_T` channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub entries: CMat,
}

impl ChannelSample {
    pub fn new(entries: CMat) -> Result<Self> {
        if !entries.is_finite() {
            return domain("channel sample has non-finite entries");
        }
        Ok(Self { entries })
    }

    pub fn n_r(&self) -> usize {
        self.entries.rows()
    }

    pub fn n_t(&self) -> usize {
        self.entries.cols()
    }
}

/// Separable spatial correlation `H = R_r^{1/2} G R_t^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kronecker {
    r_r: CMat,
    r_t: CMat,
    sqrt_r: CMat,
    sqrt_t: CMat,
}

impl Kronecker {
    pub fn r_r(&self) -> &CMat {
        &self.r_r
    }

    pub fn r_t(&self) -> &CMat {
        &self.r_t
    }
}

/// Distribution of the channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Independent zero-mean circularly symmetric complex Gaussian entries of
    /// unit variance.
    IidComplexGaussian { n_r: usize, n_t: usize },
    /// A deterministic channel.
    FixedMatrix(CMat),
    /// Kronecker-correlated Rayleigh fading; build with
    /// [`ChannelModel::kronecker`].
    KroneckerCorrelated(Kronecker),
}

impl ChannelModel {
    pub fn iid(n_r: usize, n_t: usize) -> Result<Self> {
        if n_r == 0 || n_t == 0 {
            return domain(format!("antenna counts must be positive, got ({n_r}, {n_t})"));
        }
        Ok(Self::IidComplexGaussian { n_r, n_t })
    }

    pub fn fixed(h: CMat) -> Result<Self> {
        if h.rows() == 0 || h.cols() == 0 || !h.is_finite() {
            return domain("fixed channel must be a finite nonempty matrix");
        }
        Ok(Self::FixedMatrix(h))
    }

    /// Kronecker model with receive correlation `r_r` (`n_R × n_R`) and
    /// transmit correlation `r_t` (`n_T × n_T`), both Hermitian PSD.
    pub fn kronecker(r_r: CMat, r_t: CMat) -> Result<Self> {
        if !r_r.is_square() || !r_t.is_square() || r_r.rows() == 0 || r_t.rows() == 0 {
            return domain("correlation matrices must be square and nonempty");
        }
        let sqrt_r = psd_sqrt(&r_r)?;
        let sqrt_t = psd_sqrt(&r_t)?;
        Ok(Self::KroneckerCorrelated(Kronecker { r_r, r_t, sqrt_r, sqrt_t }))
    }

    /// `(n_R, n_T)`.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Self::IidComplexGaussian { n_r, n_t } => (*n_r, *n_t),
            Self::FixedMatrix(h) => h.shape(),
            Self::KroneckerCorrelated(k) => (k.r_r.rows(), k.r_t.rows()),
        }
    }

    pub fn n_r(&self) -> usize {
        self.dims().0
    }

    pub fn n_t(&self) -> usize {
        self.dims().1
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::FixedMatrix(_))
    }

    pub fn is_iid(&self) -> bool {
        matches!(self, Self::IidComplexGaussian { .. })
    }

    /// Exact `E{H†H}`.
    pub fn mean_gram(&self) -> CMat {
        match self {
            Self::IidComplexGaussian { n_r, n_t } => CMat::identity(*n_t).scale(*n_r as f64),
            Self::FixedMatrix(h) => h.gram(),
            // E{R_t^{1/2} G† R_r G R_t^{1/2}} = tr(R_r) R_t
            Self::KroneckerCorrelated(k) => k.r_t.scale(k.r_r.trace().re),
        }
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws one channel realization. A fixed model returns its matrix.
pub fn sample_channel<R: Rng + ?Sized>(model: &ChannelModel, rng: &mut R) -> ChannelSample {
    let entries = match model {
        ChannelModel::IidComplexGaussian { n_r, n_t } => {
            CMat::from_fn(*n_r, *n_t, |_, _| complex_gaussian(rng))
        }
        ChannelModel::FixedMatrix(h) => h.clone(),
        ChannelModel::KroneckerCorrelated(k) => {
            let g = CMat::from_fn(k.r_r.rows(), k.r_t.rows(), |_, _| complex_gaussian(rng));
            &(&k.sqrt_r * &g) * &k.sqrt_t
        }
    };
    ChannelSample { entries }
}

/// Draws sample number `index` of the stream keyed by `seed`.
pub fn sample_indexed(model: &ChannelModel, seed: u64, index: u64) -> ChannelSample {
    let mut rng = sample_stream(seed, index);
    sample_channel(model, &mut rng)
}

/// `H†H`.
pub fn gram(h: &ChannelSample) -> CMat {
    h.entries.gram()
}

/// Spectrum of a Hermitian PSD matrix together with its top eigenspace.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// Eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub lambda_max: f64,
    pub multiplicity_l: usize,
    /// Orthonormal basis of the λmax eigenspace, one vector per column.
    pub max_eig_basis: CMat,
}

/// Largest eigenvalue of `a`, its multiplicity and an eigenspace basis.
///
/// An eigenvalue λ counts toward the multiplicity when
/// `(λmax − λ)/λmax ≤ rel_tol`. A zero matrix has full multiplicity.
pub fn max_eig_subspace(a: &CMat, rel_tol: f64) -> Result<SpectralSummary> {
    if !(rel_tol > 0.0 && rel_tol <= 1e-2) {
        return domain(format!("rel_tol must lie in (0, 1e-2], got {rel_tol}"));
    }
    let eig = hermitian_eig(a)?;
    let n = eig.values.len();
    let lambda_max = eig.values.first().copied().unwrap_or(0.0);
    let multiplicity_l = if lambda_max <= 0.0 {
        n
    } else {
        eig.values.iter().filter(|&&v| (lambda_max - v) / lambda_max <= rel_tol).count()
    };
    let max_eig_basis = CMat::from_fn(n, multiplicity_l, |r, c| eig.vectors[(r, c)]);
    Ok(SpectralSummary { eigenvalues: eig.values, lambda_max, multiplicity_l, max_eig_basis })
}

/// Spectral summary of `H†H` with the default multiplicity tolerance.
pub fn spectral_summary(h: &ChannelSample) -> Result<SpectralSummary> {
    max_eig_subspace(&gram(h), DEFAULT_MULTIPLICITY_TOL)
}

/// Monte Carlo spectral moments of `H†H`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub e_lambda_max: f64,
    pub e_lambda_max_sq: f64,
    pub e_trace: f64,
    pub e_trace_sq: f64,
    /// `E{tr((H†H)²)}`.
    pub e_trace_gram_sq: f64,
    /// `E{λmax²}/E²{λmax}`, the kurtosis of the largest singular value.
    pub kurtosis_sigma_max: f64,
    pub std_errs: MomentStdErrs,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentStdErrs {
    pub e_lambda_max: f64,
    pub e_lambda_max_sq: f64,
    pub e_trace: f64,
    pub e_trace_sq: f64,
    pub e_trace_gram_sq: f64,
    pub kurtosis_sigma_max: f64,
}

/// Per-sample quantities behind [`MomentEstimates`]:
/// `(λmax, tr(H†H), tr((H†H)²))`.
pub(crate) fn per_sample_spectral(h: &ChannelSample) -> (f64, f64, f64) {
    // the nonzero spectrum of H†H equals that of the smaller Gram
    let g = if h.n_r() < h.n_t() { h.entries.outer_gram() } else { h.entries.gram() };
    let eigs = hermitian_eigenvalues(&g).expect("Gram matrices are Hermitian");
    let lmax = eigs.first().copied().unwrap_or(0.0).max(0.0);
    let tr = g.trace().re;
    let tr2 = g.frobenius_norm_sq();
    (lmax, tr, tr2)
}

/// Estimates the spectral moments of `H†H` from `n_samples` draws.
pub fn spectral_moments_mc(model: &ChannelModel, n_samples: usize, seed: u64) -> Result<MomentEstimates> {
    if n_samples < 1000 {
        return domain(format!("spectral_moments_mc needs at least 1000 samples, got {n_samples}"));
    }
    let rows: Vec<(f64, f64, f64)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| per_sample_spectral(&sample_indexed(model, seed, i)))
        .collect();
    let lam: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let lam_sq: Vec<f64> = lam.iter().map(|l| l * l).collect();
    let tr: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let tr_sq: Vec<f64> = tr.iter().map(|t| t * t).collect();
    let tr_g2: Vec<f64> = rows.iter().map(|r| r.2).collect();

    let (m1, s1) = stats::mean_and_stderr(&lam);
    let (m2, s2) = stats::mean_and_stderr(&lam_sq);
    let (t1, st1) = stats::mean_and_stderr(&tr);
    let (t2, st2) = stats::mean_and_stderr(&tr_sq);
    let (g2, sg2) = stats::mean_and_stderr(&tr_g2);

    let kurtosis = m2 / (m1 * m1);
    // delta method for m2/m1² using the sample covariance of (λ, λ²)
    let n = n_samples as f64;
    let cov = stats::sum(lam.iter().zip(&lam_sq).map(|(a, b)| (a - m1) * (b - m2))) / (n - 1.0) / n;
    let d1 = -2.0 * m2 / (m1 * m1 * m1);
    let d2 = 1.0 / (m1 * m1);
    let var_k = d1 * d1 * s1 * s1 + d2 * d2 * s2 * s2 + 2.0 * d1 * d2 * cov;
    let kurtosis_se = if m1 > 0.0 { var_k.max(0.0).sqrt() } else { 0.0 };

    Ok(MomentEstimates {
        e_lambda_max: m1,
        e_lambda_max_sq: m2,
        e_trace: t1,
        e_trace_sq: t2,
        e_trace_gram_sq: g2,
        kurtosis_sigma_max: if m1 > 0.0 { kurtosis } else { f64::NAN },
        std_errs: MomentStdErrs {
            e_lambda_max: s1,
            e_lambda_max_sq: s2,
            e_trace: st1,
            e_trace_sq: st2,
            e_trace_gram_sq: sg2,
            kurtosis_sigma_max: kurtosis_se,
        },
        n_samples,
    })
}

/// Monte Carlo estimate of `E{H†H}`.
pub fn mean_gram_mc(model: &ChannelModel, n_samples: usize, seed: u64) -> CMat {
    let n_t = model.n_t();
    let grams: Vec<CMat> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| gram(&sample_indexed(model, seed, i)))
        .collect();
    let mut out = CMat::zeros(n_t, n_t);
    for r in 0..n_t {
        for c in 0..n_t {
            let re = stats::sum(grams.iter().map(|g| g[(r, c)].re));
            let im = stats::sum(grams.iter().map(|g| g[(r, c)].im));
            out[(r, c)] = Complex64::new(re, im) / n_samples as f64;
        }
    }
    out.hermitian_part()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fixed_model_returns_its_matrix() {
        let m = ChannelModel::fixed(CMat::identity(2)).unwrap();
        for i in 0..3 {
            assert_eq!(sample_indexed(&m, 7, i).entries, CMat::identity(2));
        }
    }

    #[test]
    fn gram_of_diagonal() {
        let h = ChannelSample::new(CMat::from_real_diag(&[1.0, 2.0])).unwrap();
        assert_eq!(gram(&h), CMat::from_real_diag(&[1.0, 4.0]));
    }

    #[test]
    fn multiplicity_threshold() {
        let tol = 1e-6;
        let a = CMat::from_real_diag(&[2.0, 2.0 * (1.0 - tol / 2.0), 1.0]);
        let s = max_eig_subspace(&a, tol).unwrap();
        assert_eq!(s.multiplicity_l, 2);
        let s = max_eig_subspace(&CMat::from_real_diag(&[3.0, 1.0]), 1e-8).unwrap();
        assert_eq!((s.lambda_max, s.multiplicity_l), (3.0, 1));
        assert_relative_eq!(s.max_eig_basis[(0, 0)].norm(), 1.0, max_relative = 1e-14);
        let z = max_eig_subspace(&CMat::zeros(3, 3), 1e-8).unwrap();
        assert_eq!((z.lambda_max, z.multiplicity_l), (0.0, 3));
        assert!(max_eig_subspace(&a, 0.5).is_err());
    }

    #[test]
    fn fixed_moments_have_zero_variance() {
        let m = ChannelModel::fixed(CMat::from_real_diag(&[1.0, 2.0])).unwrap();
        let est = spectral_moments_mc(&m, 1000, 1).unwrap();
        assert_eq!(est.e_lambda_max, 4.0);
        assert_eq!(est.std_errs.e_lambda_max, 0.0);
        assert_eq!(est.e_trace, 5.0);
        assert_eq!(est.e_trace_gram_sq, 17.0);
        assert_eq!(est.kurtosis_sigma_max, 1.0);
    }

    #[test]
    fn kronecker_mean_gram() {
        let m = ChannelModel::kronecker(
            CMat::from_real_diag(&[1.0, 3.0]),
            CMat::from_real_rows(&[&[1.0, 0.5], &[0.5, 1.0]]),
        )
        .unwrap();
        let g = m.mean_gram();
        assert_relative_eq!(g[(0, 1)].re, 2.0, max_relative = 1e-14);
        assert_relative_eq!(g[(1, 1)].re, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn too_few_samples_rejected() {
        let m = ChannelModel::iid(2, 2).unwrap();
        assert!(spectral_moments_mc(&m, 999, 0).is_err());
    }
}
