//! Small dense complex matrices.
//!
//! Matrices in this crate are tiny (antenna counts rarely exceed 16), so a
//! row-major `Vec` with straightforward loops is all that is needed. The
//! Hermitian eigensolver is cyclic Jacobi, which is unconditionally stable
//! and accurate to working precision on matrices of this size.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{domain, numeric, Result};

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from real row slices.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        Self::from_fn(n_rows, n_cols, |r, c| Complex64::new(rows[r][c], 0.0))
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        Self::from_fn(n_rows, n_cols, |r, c| rows[r][c])
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(*d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entry of `|A - A†|`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// Real diagonal of a Hermitian matrix.
    pub fn real_diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].re).collect()
    }

    /// `A† A` computed directly, exactly Hermitian.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..self.rows {
                    acc += self[(k, i)].conj() * self[(k, j)];
                }
                if i == j {
                    g[(i, i)] = Complex64::new(acc.re, 0.0);
                } else {
                    g[(i, j)] = acc;
                    g[(j, i)] = acc.conj();
                }
            }
        }
        g
    }

    /// `A A†` computed directly, exactly Hermitian.
    pub fn outer_gram(&self) -> Self {
        let n = self.rows;
        let mut g = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..self.cols {
                    acc += self[(i, k)] * self[(j, k)].conj();
                }
                if i == j {
                    g[(i, i)] = Complex64::new(acc.re, 0.0);
                } else {
                    g[(i, j)] = acc;
                    g[(j, i)] = acc.conj();
                }
            }
        }
        g
    }

    /// Averages `A` with `A†`, removing rounding asymmetry.
    pub fn hermitian_part(&self) -> Self {
        let adj = self.adjoint();
        Self::from_fn(self.rows, self.cols, |r, c| (self[(r, c)] + adj[(r, c)]) * 0.5)
    }

    /// `u† A u`.
    pub fn quadratic_form(&self, u: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..self.rows {
            let mut row = Complex64::new(0.0, 0.0);
            for c in 0..self.cols {
                row += self[(r, c)] * u[c];
            }
            acc += u[r].conj() * row;
        }
        acc
    }

    /// `u† A v`.
    pub fn bilinear_form(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..self.rows {
            let mut row = Complex64::new(0.0, 0.0);
            for c in 0..self.cols {
                row += self[(r, c)] * v[c];
            }
            acc += u[r].conj() * row;
        }
        acc
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "matrix shape mismatch");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        assert_eq!(self.shape(), rhs.shape(), "matrix shape mismatch");
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        assert_eq!(self.shape(), rhs.shape(), "matrix shape mismatch");
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Real eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: CMat,
}

impl HermitianEigen {
    /// `U diag(λ) U†`.
    pub fn reconstruct(&self) -> CMat {
        let n = self.values.len();
        let mut out = CMat::zeros(n, n);
        for k in 0..n {
            let l = self.values[k];
            for r in 0..n {
                let ur = self.vectors[(r, k)] * l;
                for c in 0..n {
                    out[(r, c)] += ur * self.vectors[(c, k)].conj();
                }
            }
        }
        out
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Hermitian eigendecomposition by cyclic Jacobi rotations.
///
/// Rejects inputs whose Hermitian defect exceeds `1e-10·max(1, ‖A‖_F)`.
pub fn hermitian_eig(a: &CMat) -> Result<HermitianEigen> {
    if !a.is_square() {
        return domain(format!("eigendecomposition needs a square matrix, got {:?}", a.shape()));
    }
    if !a.is_finite() {
        return domain("matrix has non-finite entries");
    }
    let scale = a.frobenius_norm().max(1.0);
    if a.hermitian_defect() > 1e-10 * scale {
        return domain(format!(
            "matrix is not Hermitian (defect {:.3e})",
            a.hermitian_defect()
        ));
    }
    jacobi(a.hermitian_part(), true)
}

/// Eigenvalues only (descending); skips eigenvector accumulation.
pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    if !a.is_square() {
        return domain(format!("eigendecomposition needs a square matrix, got {:?}", a.shape()));
    }
    let n = a.rows();
    // closed forms for the common tiny cases
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![a[(0, 0)].re]),
        2 => {
            let p = a[(0, 0)].re;
            let q = a[(1, 1)].re;
            let off = a[(0, 1)].norm();
            let mid = 0.5 * (p + q);
            let rad = (0.25 * (p - q) * (p - q) + off * off).sqrt();
            let hi = mid + rad;
            // the product form avoids cancellation in the small root
            let det = p * q - off * off;
            let lo = if hi != 0.0 { det / hi } else { 0.0 };
            return Ok(vec![hi, lo.min(hi)]);
        }
        _ => {}
    }
    Ok(jacobi(a.hermitian_part(), false)?.values)
}

fn jacobi(mut a: CMat, want_vectors: bool) -> Result<HermitianEigen> {
    let n = a.rows();
    let mut v = CMat::identity(n);
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
    }
    let total = a.frobenius_norm_sq();
    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off <= 1e-32 * total || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let alpha = a[(p, p)].re;
                let beta = a[(q, q)].re;
                let phase = apq / r;
                let zeta = (beta - alpha) / (2.0 * r);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J: J_pp = c, J_qq = c, J_pq = s·e, J_qp = -s·ē ; A ← J† A J
                let jpq = phase * s;
                let jqp = -phase.conj() * s;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c + aqk * jqp.conj();
                    a[(q, k)] = apk * jpq.conj() + aqk * c;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
                if want_vectors {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * c + vkq * jqp;
                        v[(k, q)] = vkp * jpq + vkq * c;
                    }
                }
            }
        }
    }
    if !converged {
        return numeric("Jacobi eigensolver did not converge");
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag = a.real_diag();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = if want_vectors {
        CMat::from_fn(n, n, |r, c| v[(r, order[c])])
    } else {
        CMat::zeros(0, 0)
    };
    Ok(HermitianEigen { values, vectors })
}

/// Natural log of the determinant of a Hermitian positive definite matrix
/// via Cholesky. Returns `None` if a pivot is not positive.
pub fn ln_det_hpd(a: &CMat) -> Option<f64> {
    let n = a.rows();
    let mut l = CMat::zeros(n, n);
    let mut acc = 0.0;
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        acc += d.ln();
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(acc)
}

/// Inverse of a Hermitian positive definite matrix (Gauss–Jordan with
/// partial pivoting; the matrices here are well conditioned).
pub fn inverse(a: &CMat) -> Option<CMat> {
    let n = a.rows();
    let mut m = a.clone();
    let mut inv = CMat::identity(n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[(i, col)].norm().total_cmp(&m[(j, col)].norm()))?;
        if m[(pivot, col)].norm() == 0.0 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                let t = m[(col, k)];
                m[(col, k)] = m[(pivot, k)];
                m[(pivot, k)] = t;
                let t = inv[(col, k)];
                inv[(col, k)] = inv[(pivot, k)];
                inv[(pivot, k)] = t;
            }
        }
        let d = m[(col, col)];
        for k in 0..n {
            m[(col, k)] /= d;
            inv[(col, k)] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[(r, col)];
            if f.norm() == 0.0 {
                continue;
            }
            for k in 0..n {
                let mk = m[(col, k)];
                let ik = inv[(col, k)];
                m[(r, k)] -= f * mk;
                inv[(r, k)] -= f * ik;
            }
        }
    }
    Some(inv)
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn psd_sqrt(a: &CMat) -> Result<CMat> {
    let eig = hermitian_eig(a)?;
    let scale = eig.values.first().copied().unwrap_or(0.0).abs().max(1.0);
    if eig.values.iter().any(|&l| l < -1e-10 * scale) {
        return domain("matrix is not positive semidefinite");
    }
    let roots: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(HermitianEigen { values: roots, vectors: eig.vectors }.reconstruct())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_eigenvalues() {
        let e = hermitian_eig(&CMat::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
    }

    #[test]
    fn symmetric_two_by_two() {
        let a = CMat::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = hermitian_eig(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        let fast = hermitian_eigenvalues(&a).unwrap();
        assert!((fast[0] - 3.0).abs() < 1e-14 && (fast[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complex_rank_one_plus_identity() {
        let a = CMat::from_rows(&[vec![c(1.0, 0.0), c(0.0, 1.0)], vec![c(0.0, -1.0), c(1.0, 0.0)]]);
        let e = hermitian_eig(&a).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-14 && e.values[1].abs() < 1e-14);
        for k in 0..2 {
            let v = e.vectors.column(k);
            let av: Vec<Complex64> =
                (0..2).map(|r| (0..2).map(|cc| a[(r, cc)] * v[cc]).sum()).collect();
            for r in 0..2 {
                assert!((av[r] - v[r] * e.values[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = CMat::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(hermitian_eig(&a), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn cholesky_log_det() {
        let a = CMat::from_real_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        assert!((ln_det_hpd(&a).unwrap() - 8f64.ln()).abs() < 1e-14);
        assert!(ln_det_hpd(&CMat::from_real_diag(&[1.0, -1.0])).is_none());
    }

    #[test]
    fn inverse_round_trip() {
        let a = CMat::from_rows(&[vec![c(3.0, 0.0), c(1.0, 1.0)], vec![c(1.0, -1.0), c(2.0, 0.0)]]);
        let inv = inverse(&a).unwrap();
        let id = &a * &inv;
        assert!((&id - &CMat::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn square_root_squares_back() {
        let a = CMat::from_rows(&[vec![c(2.0, 0.0), c(0.5, 0.5)], vec![c(0.5, -0.5), c(1.0, 0.0)]]);
        let s = psd_sqrt(&a).unwrap();
        assert!((&(&s * &s) - &a).max_abs() < 1e-13);
    }
}
