//! Subtensor coefficient series.
//!
//! For a zero-mean perturbation A the normalized permanent expands as
//!
//! ```text
//! per(J + z A) / (n!)^(d-1) = sum_{k=0}^{n} a_k z^k,
//! a_k = (1 / (n falling k)^(d-1)) * sum over k-subtensors B of A of per(B),
//! ```
//!
//! where the sum ranges over every choice of k indices in each of the d
//! modes.  Selections are enumerated in lexicographic odometer order, split
//! into fixed-size chunks whose partial sums combine in a fixed pairwise
//! tree, so the result does not depend on the number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact::{self, DenseKernel, DEFAULT_WORK_BUDGET};
use crate::numeric::{
    all_combinations, binomial_u128, coefficient_work, factorial_exact, falling_factorial,
    ln_factorial, ln_falling_factorial,
};
use crate::tensor::Tensor;

/// Selections per accumulation chunk.  Fixed so that chunk boundaries (and
/// therefore rounding) are identical at any thread count.
const CHUNK: u128 = 8192;

/// What a coefficient list describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesKind {
    /// Subtensor-average coefficients a_k.
    #[serde(rename = "a_coeff")]
    SubtensorCoeff,
    /// Normalized elementary symmetric functions V_k of the hyperplane scores.
    #[serde(rename = "v_coeff")]
    ScoreCoeff,
    /// Hermite-recursion approximation V'_k of the score coefficients.
    #[serde(rename = "vprime_coeff")]
    ScoreApprox,
}

/// A truncated power series in z with complex coefficients, index 0 first.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries {
    kind: SeriesKind,
    coefficients: Vec<Complex64>,
    /// Shape of the source tensor when there is one.
    order: Option<usize>,
    dim: Option<usize>,
}

impl CoefficientSeries {
    /// Wrap a coefficient list.  The constant term must be exactly 1, which
    /// holds by construction for all three kinds.
    pub fn new(
        kind: SeriesKind,
        coefficients: Vec<Complex64>,
        order: Option<usize>,
        dim: Option<usize>,
    ) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidArgument("series needs at least one coefficient".into()));
        }
        if coefficients[0] != Complex64::new(1.0, 0.0) {
            return Err(Error::InvalidArgument(format!(
                "series constant term must be 1, got {}",
                coefficients[0]
            )));
        }
        Ok(CoefficientSeries {
            kind,
            coefficients,
            order,
            dim,
        })
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    /// Truncation order t (highest retained power of z).
    pub fn t(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn order(&self) -> Option<usize> {
        self.order
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Evaluate the truncated series at z by Horner's rule.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coefficients.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }
}

// Wire form: {"kind": ..., "t": ..., "order": ..., "dim": ..., "coefficients": [[re, im], ...]}
#[derive(Serialize, Deserialize)]
struct SeriesWire {
    kind: SeriesKind,
    t: usize,
    order: Option<usize>,
    dim: Option<usize>,
    #[serde(with = "crate::wire::cvec")]
    coefficients: Vec<Complex64>,
}

impl Serialize for CoefficientSeries {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SeriesWire {
            kind: self.kind,
            t: self.t(),
            order: self.order,
            dim: self.dim,
            coefficients: self.coefficients.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CoefficientSeries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = SeriesWire::deserialize(deserializer)?;
        if wire.t + 1 != wire.coefficients.len() {
            return Err(D::Error::custom(format!(
                "series t = {} inconsistent with {} coefficients",
                wire.t,
                wire.coefficients.len()
            )));
        }
        CoefficientSeries::new(wire.kind, wire.coefficients, wire.order, wire.dim)
            .map_err(D::Error::custom)
    }
}

/// Coefficient a_k of A under the default work budget.
pub fn coefficient(a: &Tensor, k: usize) -> Result<Complex64> {
    coefficient_with_budget(a, k, DEFAULT_WORK_BUDGET)
}

/// Coefficient a_k; the predicted work C(n,k)^d (k!)^(d-1) must stay within
/// `budget` products.
pub fn coefficient_with_budget(a: &Tensor, k: usize, budget: f64) -> Result<Complex64> {
    let n = a.dim();
    let d = a.order();
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "coefficient order {k} exceeds dimension {n}"
        )));
    }
    if k == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let work = coefficient_work(n, k, d);
    if work as f64 > budget {
        return Err(Error::BudgetExceeded {
            work: format!("C({n},{k})^{d} * ({k}!)^{} = {work}", d - 1),
            budget: format!("{budget:.0}"),
            context: format!("coefficient a_{k}"),
        });
    }
    let sum = selection_sum(a, k);
    Ok(apply_falling_scale(sum, n, k, d))
}

/// Divide the raw selection sum by (n falling k)^(d-1), computed directly
/// when representable (which keeps small integer cases exact) and in log
/// space otherwise.
fn apply_falling_scale(sum: Complex64, n: usize, k: usize, d: usize) -> Complex64 {
    let denom = falling_factorial(n, k).powi(d as i32 - 1);
    if denom.is_finite() && denom > 0.0 {
        sum / denom
    } else {
        sum * (-(d as f64 - 1.0) * ln_falling_factorial(n, k)).exp()
    }
}

/// Coefficients a_0 ..= a_t under the default budget.
pub fn coefficients_upto(a: &Tensor, t: usize) -> Result<CoefficientSeries> {
    coefficients_upto_with_budget(a, t, DEFAULT_WORK_BUDGET)
}

/// Coefficients a_0 ..= a_t; cumulative predicted work must fit the budget.
pub fn coefficients_upto_with_budget(a: &Tensor, t: usize, budget: f64) -> Result<CoefficientSeries> {
    let n = a.dim();
    let d = a.order();
    if t > n {
        return Err(Error::InvalidArgument(format!(
            "truncation order {t} exceeds dimension {n}"
        )));
    }
    let total: u128 = (1..=t).map(|k| coefficient_work(n, k, d)).fold(0u128, u128::saturating_add);
    if total as f64 > budget {
        return Err(Error::BudgetExceeded {
            work: format!("sum_k C({n},k)^{d} (k!)^{} = {total}", d - 1),
            budget: format!("{budget:.0}"),
            context: format!("coefficients up to t = {t}"),
        });
    }
    let mut coefficients = Vec::with_capacity(t + 1);
    coefficients.push(Complex64::new(1.0, 0.0));
    for k in 1..=t {
        coefficients.push(apply_falling_scale(selection_sum(a, k), n, k, d));
    }
    CoefficientSeries::new(SeriesKind::SubtensorCoeff, coefficients, Some(d), Some(n))
}

/// Relative residual of the expansion identity at one point:
/// |(n!)^(d-1) * sum_k a_k z^k  -  per(J + z A)| / max(|per(J + z A)|, tiny).
pub fn identity_residual(a: &Tensor, z: Complex64) -> Result<f64> {
    identity_residual_with_budget(a, z, DEFAULT_WORK_BUDGET)
}

/// As [`identity_residual`] with an explicit budget for both sides.
pub fn identity_residual_with_budget(a: &Tensor, z: Complex64, budget: f64) -> Result<f64> {
    let n = a.dim();
    let d = a.order();
    let series = coefficients_upto_with_budget(a, n, budget)?;
    let factor = match factorial_exact(n) {
        Some(f) => {
            let v = f.powi(d as i32 - 1);
            if v.is_finite() {
                v
            } else {
                ((d as f64 - 1.0) * ln_factorial(n)).exp()
            }
        }
        None => ((d as f64 - 1.0) * ln_factorial(n)).exp(),
    };
    let lhs = series.eval(z) * factor;
    let shifted = a.affine_combine(Complex64::new(1.0, 0.0), z)?;
    let rhs = exact::permanent_with_budget(&shifted, budget)?.value;
    Ok((lhs - rhs).norm() / rhs.norm().max(1e-300))
}

/// Raw sum of per(B) over all k-subtensor selections of A, in deterministic
/// chunked order.
fn selection_sum(a: &Tensor, k: usize) -> Complex64 {
    let n = a.dim();
    let d = a.order();
    let combos = all_combinations(n, k);
    let count = binomial_u128(n, k);
    debug_assert_eq!(combos.len() as u128, count * k as u128);
    // Precompute per-mode flat-offset tables: offs[m][c*k + j] is the stride
    // contribution of picking combination c's j-th index in mode m+1.
    let offs: Vec<Vec<usize>> = (0..d)
        .map(|m| {
            let stride = a.stride(m + 1);
            combos.iter().map(|&i| i * stride).collect()
        })
        .collect();
    let total = (0..d).fold(1u128, |acc, _| acc.saturating_mul(count));
    let chunks = total.div_ceil(CHUNK) as usize;
    let partials: Vec<Complex64> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci as u128 * CHUNK;
            let hi = ((ci as u128 + 1) * CHUNK).min(total);
            chunk_sum(a, k, d, count, &offs, lo, hi)
        })
        .collect();
    exact::reduce_partials(&partials)
}

/// Sum of subtensor permanents for selection ordinals in [lo, hi).
fn chunk_sum(
    a: &Tensor,
    k: usize,
    d: usize,
    count: u128,
    offs: &[Vec<usize>],
    lo: u128,
    hi: u128,
) -> Complex64 {
    let entries = a.entries();
    let mut kernel = DenseKernel::new_depth_first(k, d);
    let mut block = vec![Complex64::new(0.0, 0.0); k.pow(d as u32)];
    // Mixed-radix digits of the selection ordinal: one combination rank per
    // mode, mode 1 most significant.
    let mut digits = vec![0usize; d];
    let mut rank = lo;
    for slot in digits.iter_mut().rev() {
        *slot = (rank % count) as usize;
        rank /= count;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut remaining = hi - lo;
    while remaining > 0 {
        gather_block(entries, k, d, offs, &digits, &mut block);
        acc += kernel.permanent(&block);
        remaining -= 1;
        if remaining == 0 {
            break;
        }
        let mut m = d;
        loop {
            m -= 1;
            digits[m] += 1;
            if digits[m] < count as usize {
                break;
            }
            digits[m] = 0;
        }
    }
    acc
}

/// Copy the selected k^d block of `entries` into `block`, row-major.
fn gather_block(
    entries: &[Complex64],
    k: usize,
    d: usize,
    offs: &[Vec<usize>],
    digits: &[usize],
    block: &mut [Complex64],
) {
    if d == 3 {
        let o1 = &offs[0][digits[0] * k..digits[0] * k + k];
        let o2 = &offs[1][digits[1] * k..digits[1] * k + k];
        let o3 = &offs[2][digits[2] * k..digits[2] * k + k];
        let mut pos = 0;
        for &a1 in o1 {
            for &a2 in o2 {
                let base = a1 + a2;
                for &a3 in o3 {
                    block[pos] = entries[base + a3];
                    pos += 1;
                }
            }
        }
        return;
    }
    // Generic order: odometer over the k^d result positions.
    let mut jidx = vec![0usize; d];
    let mut pos = 0;
    loop {
        let mut off = 0;
        for m in 0..d {
            off += offs[m][digits[m] * k + jidx[m]];
        }
        block[pos] = entries[off];
        pos += 1;
        let mut m = d;
        loop {
            if m == 0 {
                return;
            }
            m -= 1;
            jidx[m] += 1;
            if jidx[m] < k {
                break;
            }
            jidx[m] = 0;
        }
    }
}
