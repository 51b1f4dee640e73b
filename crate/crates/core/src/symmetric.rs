//! Symmetric-function analysis of hyperplane scores.
//!
//! For an order-d tensor A define one score per second-mode hyperplane,
//! C_j = (sum of the hyperplane's entries) / n^((d-1)/2).  The normalized
//! elementary symmetric functions
//!
//! ```text
//! V_k = e_k(C_1, ..., C_n) / n^(k (d-1) / 2)
//! ```
//!
//! approximate the subtensor coefficients a_k for concentrated random
//! tensors, while the normalized power sums D_k = S_k(C) / n^(k (d-1) / 2)
//! measure that concentration (D_1 = V_1 always).  Freezing D_2 at the
//! squared-entry mean xi and dropping D_k for k >= 3 in Newton's identity
//! collapses the V recursion to a two-term Hermite-style recursion with
//! generating function exp(V_1 z - xi z^2 / 2), which is the closed-form
//! estimator's core.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::{CoefficientSeries, SeriesKind};
use crate::tensor::Tensor;

/// Hyperplane scores C_1 ..= C_n of a tensor, with their shape context.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneScores {
    scores: Vec<Complex64>,
    order: usize,
    dim: usize,
}

impl HyperplaneScores {
    pub fn scores(&self) -> &[Complex64] {
        &self.scores
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Scores C_j = hyperplane_sum(A, mode 2, j) / sqrt(n^(d-1)).
pub fn hyperplane_scores(a: &Tensor) -> HyperplaneScores {
    let n = a.dim();
    let d = a.order();
    let scale = (n as f64).powf((d as f64 - 1.0) / 2.0);
    let scores = (1..=n)
        .map(|j| {
            a.hyperplane_sum(2, j)
                .expect("mode 2 and 1..=n are always in range")
                / scale
        })
        .collect();
    HyperplaneScores {
        scores,
        order: d,
        dim: n,
    }
}

/// Power sums S_0 ..= S_kmax of the given values (S_0 = count).
pub fn power_sums(xs: &[Complex64], kmax: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(Complex64::new(xs.len() as f64, 0.0));
    let mut powers: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); xs.len()];
    for _ in 1..=kmax {
        let mut s = Complex64::new(0.0, 0.0);
        for (p, x) in powers.iter_mut().zip(xs) {
            *p *= x;
            s += *p;
        }
        out.push(s);
    }
    out
}

/// Elementary symmetric functions e_0 ..= e_kmax via Newton's identity
/// e_m = (1/m) * sum_{k=0}^{m-1} (-1)^k e_{m-k-1} S_{k+1}.
pub fn elementary_symmetric(xs: &[Complex64], kmax: usize) -> Result<Vec<Complex64>> {
    if kmax > xs.len() {
        return Err(Error::InvalidArgument(format!(
            "kmax {} exceeds value count {}",
            kmax,
            xs.len()
        )));
    }
    let s = power_sums(xs, kmax);
    let mut e = Vec::with_capacity(kmax + 1);
    e.push(Complex64::new(1.0, 0.0));
    for m in 1..=kmax {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut sign = 1.0;
        for k in 0..m {
            acc += sign * e[m - k - 1] * s[k + 1];
            sign = -sign;
        }
        e.push(acc / m as f64);
    }
    Ok(e)
}

/// Normalized elementary symmetric coefficients V_0 ..= V_kmax of the
/// hyperplane scores, as a coefficient series (V_0 = 1).
pub fn elementary_coeffs(a: &Tensor, kmax: usize) -> Result<CoefficientSeries> {
    let n = a.dim();
    let d = a.order();
    if kmax > n {
        return Err(Error::InvalidArgument(format!(
            "kmax {kmax} exceeds dimension {n}"
        )));
    }
    let scores = hyperplane_scores(a);
    let e = elementary_symmetric(scores.scores(), kmax)?;
    let root = (n as f64).powf((d as f64 - 1.0) / 2.0);
    let mut coefficients = Vec::with_capacity(kmax + 1);
    coefficients.push(Complex64::new(1.0, 0.0));
    let mut scale = 1.0;
    for item in e.iter().take(kmax + 1).skip(1) {
        scale /= root;
        coefficients.push(item * scale);
    }
    CoefficientSeries::new(SeriesKind::ScoreCoeff, coefficients, Some(d), Some(n))
}

/// Normalized power-sum moments D_1 ..= D_kmax of the hyperplane scores;
/// entry [k-1] holds D_k.
pub fn power_moments(a: &Tensor, kmax: usize) -> Vec<Complex64> {
    let scores = hyperplane_scores(a);
    power_moments_from_scores(scores.scores(), a.order(), a.dim(), kmax)
}

/// As [`power_moments`], from precomputed scores of an order-d, dimension-n
/// tensor (lets callers stream scores without materializing the tensor).
pub fn power_moments_from_scores(
    scores: &[Complex64],
    d: usize,
    n: usize,
    kmax: usize,
) -> Vec<Complex64> {
    let s = power_sums(scores, kmax);
    let root = (n as f64).powf((d as f64 - 1.0) / 2.0);
    let mut out = Vec::with_capacity(kmax);
    let mut scale = 1.0;
    for item in s.iter().take(kmax + 1).skip(1) {
        scale /= root;
        out.push(item * scale);
    }
    out
}

/// Mean power sums M_1 ..= M_kmax of a score list, M_k = S_k(scores) / n
/// with n the list length; entry [k-1] holds M_k.
///
/// For centered unit-variance entries each hyperplane score has mean square
/// xi, so M_2 concentrates at xi and M_k at 0 for k >= 3 as n grows. The
/// fully normalized moments D_k = S_k / n^(k(d-1)/2) differ by a factor
/// n^(1-k(d-1)/2), which at order d > 2 drives them to zero regardless of
/// the entry law, so the means are the sharper concentration statistic.
pub fn mean_power_sums(scores: &[Complex64], kmax: usize) -> Vec<Complex64> {
    let s = power_sums(scores, kmax);
    let inv = 1.0 / scores.len() as f64;
    s.iter().skip(1).take(kmax).map(|v| v * inv).collect()
}

/// Normalized probabilists' Hermite polynomial h_k(x) = He_k(x) / k!,
/// evaluated by the stable three-term recursion
/// h_0 = 1, h_1 = x, h_k = (x h_{k-1} - h_{k-2}) / k.
pub fn hermite(k: usize, x: Complex64) -> Complex64 {
    let mut prev = Complex64::new(1.0, 0.0);
    if k == 0 {
        return prev;
    }
    let mut cur = x;
    for m in 2..=k {
        let next = (x * cur - prev) / m as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// Shared parameters of the closed-form estimator: score mean statistic V_1,
/// squared-entry mean xi, and evaluation point z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub v1: Complex64,
    pub xi: Complex64,
    pub z: Complex64,
}

/// Coefficients V'_0 ..= V'_kmax of exp(V_1 z - xi z^2 / 2) by the two-term
/// recursion V'_k = (V'_{k-1} V_1 - V'_{k-2} xi) / k.
pub fn gaussian_series(v1: Complex64, xi: Complex64, kmax: usize) -> CoefficientSeries {
    let mut coefficients = Vec::with_capacity(kmax + 1);
    coefficients.push(Complex64::new(1.0, 0.0));
    if kmax >= 1 {
        coefficients.push(v1);
    }
    for k in 2..=kmax {
        let next = (coefficients[k - 1] * v1 - coefficients[k - 2] * xi) / k as f64;
        coefficients.push(next);
    }
    CoefficientSeries::new(SeriesKind::ScoreApprox, coefficients, None, None)
        .expect("constant term is 1 by construction")
}

/// Closed form for a single coefficient: V'_k = V_1^k / k! when xi = 0, else
/// xi^(k/2) h_k(V_1 / sqrt(xi)) with the principal square root (either
/// branch gives the same value because h_k has the parity of k).
pub fn gaussian_coeff(v1: Complex64, xi: Complex64, k: usize) -> Complex64 {
    if xi == Complex64::new(0.0, 0.0) {
        let mut acc = Complex64::new(1.0, 0.0);
        for m in 1..=k {
            acc = acc * v1 / m as f64;
        }
        return acc;
    }
    let s = xi.sqrt();
    let mut s_pow = Complex64::new(1.0, 0.0);
    for _ in 0..k {
        s_pow *= s;
    }
    s_pow * hermite(k, v1 / s)
}

/// The generating function value exp(V_1 z - xi z^2 / 2).
pub fn gaussian_value(p: &GaussianParams) -> Complex64 {
    (p.v1 * p.z - p.xi * p.z * p.z * 0.5).exp()
}
