//! Permanent estimators for shifted random tensors.
//!
//! A sample R with i.i.d. unit-variance entries of nonzero mean mu factors
//! as R = mu (J + z A) with z = 1/mu and A = (R - mu J).  Then
//!
//! ```text
//! per(R) = mu^n (n!)^(d-1) * sum_k a_k z^k,
//! ```
//!
//! and two estimators truncate that series:
//!
//! * the truncated series keeps a_0 ..= a_t with
//!   t = ceil(ln n + ln(1/epsilon)), costing roughly n^(d t) work;
//! * the closed form replaces the whole series by
//!   exp(V_1 z - xi z^2 / 2), polynomial cost, valid when epsilon is not
//!   too small relative to n.
//!
//! Both compose the final value in log space so that mu^n (n!)^(d-1) cannot
//! overflow.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{PermanentValue, DEFAULT_WORK_BUDGET};
use crate::numeric::ln_factorial;
use crate::sampling::centered;
use crate::series::{self, CoefficientSeries};
use crate::symmetric;
use crate::tensor::Tensor;

/// Which estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "truncated_series")]
    TruncatedSeries,
    #[serde(rename = "ptas_closed_form")]
    ClosedForm,
}

/// Estimator parameters.  `z` is stored as computed from `mu` at
/// construction, so z * mu == 1 up to one rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub epsilon: Option<f64>,
    pub t: usize,
    #[serde(with = "crate::wire::cpair")]
    pub mu: Complex64,
    #[serde(with = "crate::wire::cpair")]
    pub z: Complex64,
}

impl ApproxParams {
    fn new(mu: Complex64, epsilon: Option<f64>, t: usize) -> Self {
        ApproxParams {
            epsilon,
            t,
            mu,
            z: mu.inv(),
        }
    }
}

/// An estimate together with the normalized series value it scaled up.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxResult {
    pub value: PermanentValue,
    /// The factor multiplying mu^n (n!)^(d-1).
    #[serde(with = "crate::wire::cpair")]
    pub normalized_series: Complex64,
    pub method: Method,
    pub params: ApproxParams,
}

/// Admissibility diagnostic for the shifted-mean regime: reports whether
/// |mu| >= (ln n / (d-1)^6)^(-c), equivalently |z| <= (ln n / (d-1)^6)^c.
/// Purely informational; estimators run either way.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub mu_abs: f64,
    pub mu_threshold: f64,
    pub z_abs: Option<f64>,
    pub z_threshold: f64,
    pub c: f64,
    pub detail: String,
}

/// Truncation order t = ceil(ln n + ln(1/epsilon)), clamped into 1 ..= n.
pub fn truncation_order(n: usize, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "truncation order needs n >= 2, got {n}"
        )));
    }
    let raw = ((n as f64).ln() + (1.0 / epsilon).ln()).ceil();
    Ok((raw as usize).clamp(1, n))
}

/// Evaluate the admissibility inequality at the given parameters.
pub fn admissibility(n: usize, d: usize, mu: Complex64, c: f64) -> Admissibility {
    let base = (n as f64).ln() / ((d as f64) - 1.0).powi(6);
    let mu_threshold = base.powf(-c);
    let z_threshold = base.powf(c);
    let mu_abs = mu.norm();
    if mu_abs == 0.0 {
        return Admissibility {
            admissible: false,
            mu_abs,
            mu_threshold,
            z_abs: None,
            z_threshold,
            c,
            detail: "mu = 0: z = 1/mu undefined".into(),
        };
    }
    let z_abs = 1.0 / mu_abs;
    let admissible = mu_abs >= mu_threshold && z_abs <= z_threshold;
    let mut detail = format!(
        "|mu| = {mu_abs:.6} vs threshold {mu_threshold:.6}; |z| = {z_abs:.6} vs threshold {z_threshold:.6}"
    );
    if !(0.0 < c && c < 0.125) {
        detail.push_str("; note: c outside (0, 1/8)");
    }
    Admissibility {
        admissible,
        mu_abs,
        mu_threshold,
        z_abs: Some(z_abs),
        z_threshold,
        c,
        detail,
    }
}

/// Threshold epsilon above which the closed form is dispatched:
/// epsilon > n^(-rho_exponent).
pub fn dispatch_threshold(n: usize, rho_exponent: f64) -> Result<f64> {
    if !(rho_exponent > 0.0 && rho_exponent < 0.125) {
        return Err(Error::InvalidArgument(format!(
            "rho exponent must lie in (0, 1/8), got {rho_exponent}"
        )));
    }
    Ok((n as f64).powf(-rho_exponent))
}

/// Truncated-series estimate of per(R) at accuracy target epsilon.
pub fn permanent_series(r: &Tensor, mu: Complex64, epsilon: f64) -> Result<ApproxResult> {
    permanent_series_with(r, mu, epsilon, None, DEFAULT_WORK_BUDGET)
}

/// As [`permanent_series`], with an explicit truncation override and budget.
pub fn permanent_series_with(
    r: &Tensor,
    mu: Complex64,
    epsilon: f64,
    t_override: Option<usize>,
    budget: f64,
) -> Result<ApproxResult> {
    require_nonzero(mu)?;
    let n = r.dim();
    let t = match t_override {
        Some(t) => {
            if t < 1 || t > n {
                return Err(Error::InvalidArgument(format!(
                    "truncation override {t} outside 1..={n}"
                )));
            }
            t
        }
        None => truncation_order(n, epsilon)?,
    };
    let a = centered(r, mu)?;
    let series = series::coefficients_upto_with_budget(&a, t, budget)?;
    let params = ApproxParams::new(mu, Some(epsilon), t);
    let ns = series.eval(params.z);
    Ok(assemble(r, mu, ns, Method::TruncatedSeries, params))
}

/// Closed-form estimate mu^n (n!)^(d-1) exp(V_1 z - xi z^2 / 2), where xi is
/// the squared-entry mean of the sampling distribution (a caller-supplied
/// property, not estimated from R).
pub fn permanent_gaussian(r: &Tensor, mu: Complex64, xi: Complex64) -> Result<ApproxResult> {
    require_nonzero(mu)?;
    let n = r.dim();
    let d = r.order();
    let a = centered(r, mu)?;
    let v1 = symmetric::elementary_coeffs(&a, 1)?.coefficients()[1];
    let params = ApproxParams::new(mu, None, n);
    let z = params.z;
    let w = v1 * z - xi * z * z * 0.5;
    let ns = w.exp();
    let log_magnitude = n as f64 * mu.norm().ln() + (d as f64 - 1.0) * ln_factorial(n) + w.re;
    let argument = n as f64 * mu.arg() + w.im;
    Ok(ApproxResult {
        value: PermanentValue::from_log(log_magnitude, argument),
        normalized_series: ns,
        method: Method::ClosedForm,
        params,
    })
}

/// Accuracy-based dispatch: the closed form when epsilon > n^(-rho_exponent),
/// the truncated series otherwise.
pub fn permanent_auto(
    r: &Tensor,
    mu: Complex64,
    xi: Complex64,
    epsilon: f64,
    rho_exponent: f64,
) -> Result<ApproxResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let threshold = dispatch_threshold(r.dim(), rho_exponent)?;
    if epsilon > threshold {
        let mut result = permanent_gaussian(r, mu, xi)?;
        result.params.epsilon = Some(epsilon);
        Ok(result)
    } else {
        permanent_series(r, mu, epsilon)
    }
}

fn require_nonzero(mu: Complex64) -> Result<()> {
    if mu == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroMean(
            "shifted-mean estimators need mu != 0".into(),
        ));
    }
    Ok(())
}

/// Scale a normalized series value by mu^n (n!)^(d-1) in log space.
fn assemble(
    r: &Tensor,
    mu: Complex64,
    ns: Complex64,
    method: Method,
    params: ApproxParams,
) -> ApproxResult {
    let n = r.dim();
    let d = r.order();
    let log_magnitude = n as f64 * mu.norm().ln() + (d as f64 - 1.0) * ln_factorial(n) + ns.norm().ln();
    let argument = n as f64 * mu.arg() + ns.arg();
    ApproxResult {
        value: PermanentValue::from_log(log_magnitude, argument),
        normalized_series: ns,
        method,
        params,
    }
}

/// Expose the truncated series used by an estimate (for reporting): the
/// a-coefficients of the centered tensor up to t.
pub fn centered_series(r: &Tensor, mu: Complex64, t: usize, budget: f64) -> Result<CoefficientSeries> {
    require_nonzero(mu)?;
    let a = centered(r, mu)?;
    series::coefficients_upto_with_budget(&a, t, budget)
}
