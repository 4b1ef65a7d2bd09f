use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{domain, numeric, Result};

/// A Gauss rule: `∫ f(z) w(z) dz ≈ Σ weights[i]·f(nodes[i])`.
///
/// For [`gauss_laguerre`] the weight is `e^{−z}` on `[0, ∞)`; for
/// [`gauss_legendre`] it is `1` on `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ wᵢ f(xᵢ)`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut s = 0.0;
        let mut c = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            if *w == 0.0 {
                continue;
            }
            let v = w * f(*x);
            let t = s + v;
            c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
            s = t;
        }
        s + c
    }
}

/// Gauss–Laguerre rule with `n` nodes, exact for polynomials of degree
/// `2n − 1` against `e^{−z}`.
///
/// Nodes are seeded by the eigenvalues of the Jacobi matrix and polished by
/// Newton iteration on the three-term recurrence. Weights of the largest
/// nodes fall below the smallest positive double once `n` exceeds roughly
/// 180 and are then stored as zero.
pub fn gauss_laguerre(n: usize) -> Result<QuadratureRule> {
    if !(1..=256).contains(&n) {
        return domain(format!("gauss_laguerre: order {n} outside 1..=256"));
    }
    let diag: Vec<f64> = (0..n).map(|k| (2 * k + 1) as f64).collect();
    let off: Vec<f64> = (1..n).map(|k| k as f64).collect();
    let mut seeds = tridiagonal_eigenvalues(&diag, &off)?;
    seeds.sort_by(f64::total_cmp);

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for seed in seeds {
        let mut x = seed;
        for _ in 0..100 {
            let step = laguerre_newton_step(n, x);
            x -= step;
            if step.abs() <= 1e-14 * x.abs().max(1.0) {
                break;
            }
        }
        // Christoffel number 1/Σ_{k<n} L_k(x)²; the L_k are orthonormal
        // under e^{−z}, so every term is positive
        let ln_w = -laguerre_ln_sum_sq(n, x);
        nodes.push(x);
        weights.push(ln_w.exp());
    }
    for pair in nodes.windows(2) {
        if pair[1] <= pair[0] {
            return numeric(format!("gauss_laguerre({n}): nodes failed to separate"));
        }
    }
    Ok(QuadratureRule { nodes, weights })
}

/// `ln Σ_{k<n} L_k(x)²` with running rescaling.
fn laguerre_ln_sum_sq(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum = 0.0;
    // cur, prev and sum are all stored divided by e^scale (sum by e^{2 scale})
    let mut scale = 0.0;
    for k in 0..n {
        sum += cur * cur;
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > 1e100 {
            cur *= 1e-100;
            prev *= 1e-100;
            sum *= 1e-200;
            scale += 100.0 * std::f64::consts::LN_10;
        }
    }
    sum.ln() + 2.0 * scale
}

/// Returns `(L_n, L_{n−1}, ln scale)` with both values divided by `e^scale`.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut scale = 0.0;
    for k in 0..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            cur *= 1e-150;
            prev *= 1e-150;
            scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    (cur, prev, scale)
}

/// Newton step `L_n(x) / L_n'(x)` using `x L_n' = n (L_n − L_{n−1})`.
fn laguerre_newton_step(n: usize, x: f64) -> f64 {
    let (p, q, _) = laguerre_pair(n, x);
    p * x / (n as f64 * (p - q))
}

/// Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return domain("gauss_legendre: order must be positive");
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for k in 0..n {
                let kf = k as f64;
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * kf + 1.0) * x * p1 - kf * p2) / (kf + 1.0);
            }
            dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
            let step = p0 / dp;
            x -= step;
            if step.abs() <= 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson shifts.
pub(crate) fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return numeric("tridiagonal QL did not converge");
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        resk += WGK[j] * fsum;
        if j % 2 == 1 {
            resg += WG[j / 2] * fsum;
        }
    }
    (resk * half, ((resk - resg) * half).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Bisects the segment with the largest error estimate until the summed
/// estimate falls below `rel_tol·|I|` (or below a few ulps of the
/// accumulated magnitude).
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_SEGMENTS: usize = 5_000;
    let mut heap = BinaryHeap::new();
    let (value, error) = kronrod15(&f, a, b);
    heap.push(Segment { a, b, value, error });
    loop {
        let total: f64 = heap.iter().map(|s| s.value).sum();
        let err: f64 = heap.iter().map(|s| s.error).sum();
        let magnitude: f64 = heap.iter().map(|s| s.value.abs()).sum();
        if !total.is_finite() {
            return numeric("adaptive quadrature produced a non-finite value");
        }
        if err <= rel_tol * total.abs() || err <= 50.0 * f64::EPSILON * magnitude {
            return Ok(total);
        }
        if heap.len() >= MAX_SEGMENTS {
            return numeric(format!(
                "adaptive quadrature on [{a}, {b}] stalled at error {err:.3e} (value {total:.6e})"
            ));
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot subdivide further; keep the estimate as is
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        let (v1, e1) = kronrod15(&f, worst.a, mid);
        let (v2, e2) = kronrod15(&f, mid, worst.b);
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_point_laguerre() {
        let r = gauss_laguerre(1).unwrap();
        assert_relative_eq!(r.nodes[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(r.weights[0], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn two_point_laguerre() {
        let r = gauss_laguerre(2).unwrap();
        let s = 2f64.sqrt();
        assert_relative_eq!(r.nodes[0], 2.0 - s, max_relative = 1e-14);
        assert_relative_eq!(r.nodes[1], 2.0 + s, max_relative = 1e-14);
        assert_relative_eq!(r.weights[0], (2.0 + s) / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn laguerre_order_range() {
        assert!(gauss_laguerre(0).is_err());
        assert!(gauss_laguerre(257).is_err());
        let r = gauss_laguerre(256).unwrap();
        assert_relative_eq!(r.weights.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre(5).unwrap();
        assert_relative_eq!(r.integrate(|x| x.powi(8)), 2.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(r.weights.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn tridiagonal_known_spectrum() {
        // the path graph Laplacian-like matrix tridiag(1, 2, 1) of size 4
        let ev = {
            let mut v = tridiagonal_eigenvalues(&[2.0; 4], &[1.0; 3]).unwrap();
            v.sort_by(f64::total_cmp);
            v
        };
        for (k, l) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / 5.0).cos();
            assert_relative_eq!(*l, exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let v = integrate_adaptive(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-9);
    }
}
