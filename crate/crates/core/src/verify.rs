//! Monte Carlo verification experiments.
//!
//! Each experiment samples seeded random tensors, computes exact quantities
//! with the oracle kernels, and compares empirical statistics against their
//! analytic values:
//!
//! * `moment_experiment` — means of a_k, |a_k|^2, V_k and a_k - V_k over
//!   zero-mean sampling, against E[a_k] = 0 (k >= 1), E[V_k] = 0 and
//!   E[|a_k|^2] = 1 / (k! (n (n-1) ... (n-k+1))^(d-2)).
//! * `concentration_experiment` — medians and 95th percentiles of the
//!   score-average distances |M_2 - xi| and |M_k| (k >= 3) across a list of
//!   dimensions, with decreasing-in-n trend flags.  Scores are streamed
//!   straight from the entry generator, so large dimensions never
//!   materialize a tensor.
//! * `closeness_experiment` — the truncation tail |sum_{k>t} a_k z^k|, the
//!   series gap |sum_{k<=t} (a_k - V_k) z^k|, the per-order distances
//!   |V'_k - V_k|, and the generating-function magnitude
//!   |exp(V_1 z - xi z^2/2)|.
//! * `end_to_end_experiment` — the relative error |1 - estimate / per(R)|
//!   of both estimators against the exact permanent, per trial and in
//!   aggregate.
//!
//! Every experiment is reproducible bit for bit from its parameters and
//! seed: trials draw from independent substreams, results are collected in
//! trial order, and all reductions use fixed orders.  Statistical pass bands
//! are +-5 batch-means standard errors unless a row records an absolute
//! tolerance.  Degenerate controls (A = 0, R = mu J) are evaluated inside
//! each experiment and must come out exact.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{self, Method};
use crate::error::{Error, Result};
use crate::exact::{self, PermanentValue};
use crate::numeric::{factorial_exact, falling_factorial, ln_factorial};
use crate::sampling::{sample_tensor, DistributionKind, EntryDistribution, EntryStream, SeedSpec};
use crate::series::{self, CoefficientSeries};
use crate::symmetric::{self, GaussianParams};
use crate::tensor::Tensor;

/// Pass band half-width for statistical rows, in standard errors.
pub const SE_TOLERANCE: f64 = 5.0;

/// Number of batches for the batch-means standard error.
const BATCHES: usize = 20;

/// Minimum trial count accepted by the moment experiment; below this the
/// batch-means error bars are too noisy to mean anything.
const MIN_MOMENT_TRIALS: u64 = 1_000;

/// Options shared by all experiments.
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Work budget forwarded to coefficient extraction and exact permanents.
    pub budget: f64,
    /// When false, wall_seconds is reported as 0.0 so that report bytes are
    /// identical across machines and runs.
    pub record_timing: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            budget: exact::DEFAULT_WORK_BUDGET,
            record_timing: true,
        }
    }
}

/// One aggregate statistic with its pass rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatRow {
    pub name: String,
    pub empirical: f64,
    /// Analytic target, when one exists.
    pub target: Option<f64>,
    /// Batch-means standard error, for rows with an `se` band.
    pub standard_error: Option<f64>,
    /// Half-width of the pass band: multiples of SE for `se` rows, an
    /// absolute distance for `abs` rows.
    pub tolerance: Option<f64>,
    /// Pass rule: "se" (|empirical - target| <= tolerance * SE), "abs"
    /// (|empirical - target| <= tolerance), "below" (empirical < target),
    /// "decrease" (empirical < 0), or "info" (recorded, always passes).
    pub band: String,
    pub pass: bool,
}

impl StatRow {
    fn se_band(name: impl Into<String>, empirical: f64, target: f64, se: f64) -> StatRow {
        StatRow {
            name: name.into(),
            empirical,
            target: Some(target),
            standard_error: Some(se),
            tolerance: Some(SE_TOLERANCE),
            band: "se".into(),
            pass: (empirical - target).abs() <= SE_TOLERANCE * se,
        }
    }

    fn abs_band(name: impl Into<String>, empirical: f64, target: f64, tolerance: f64) -> StatRow {
        StatRow {
            name: name.into(),
            empirical,
            target: Some(target),
            standard_error: None,
            tolerance: Some(tolerance),
            band: "abs".into(),
            pass: (empirical - target).abs() <= tolerance,
        }
    }

    fn below(name: impl Into<String>, empirical: f64, bound: f64) -> StatRow {
        StatRow {
            name: name.into(),
            empirical,
            target: Some(bound),
            standard_error: None,
            tolerance: None,
            band: "below".into(),
            pass: empirical < bound,
        }
    }

    /// Trend row: `empirical` is (later value - earlier value), which must
    /// be strictly negative.
    fn decrease(name: impl Into<String>, empirical: f64) -> StatRow {
        StatRow {
            name: name.into(),
            empirical,
            target: None,
            standard_error: None,
            tolerance: None,
            band: "decrease".into(),
            pass: empirical < 0.0,
        }
    }

    fn info(name: impl Into<String>, empirical: f64) -> StatRow {
        StatRow {
            name: name.into(),
            empirical,
            target: None,
            standard_error: None,
            tolerance: None,
            band: "info".into(),
            pass: true,
        }
    }

    fn info_with_se(name: impl Into<String>, empirical: f64, se: f64) -> StatRow {
        StatRow {
            standard_error: Some(se),
            ..StatRow::info(name, empirical)
        }
    }
}

/// One per-trial estimator outcome (end-to-end experiment only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u64,
    pub method: String,
    /// |1 - estimate / per(R)|.
    pub abs_error: f64,
    pub within_epsilon: bool,
}

/// Full record of one experiment: parameters, aggregate rows, and (for the
/// end-to-end experiment) per-trial rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub kind: DistributionKind,
    pub d: usize,
    pub n_list: Vec<usize>,
    pub kmax: Option<usize>,
    #[serde(with = "crate::wire::cpair_opt")]
    pub mu: Option<Complex64>,
    pub epsilon: Option<f64>,
    #[serde(with = "crate::wire::cpair_opt")]
    pub z: Option<Complex64>,
    pub t: Option<usize>,
    pub trials: u64,
    pub seed: SeedSpec,
    pub wall_seconds: f64,
    pub rows: Vec<StatRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_rows: Option<Vec<TrialRow>>,
}

impl ExperimentReport {
    /// True when every row passes.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// The first row whose name matches exactly.
    pub fn row(&self, name: &str) -> Option<&StatRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Batch-means standard error of the mean: split the sequence into up to
/// `BATCHES` contiguous batches, take the standard deviation of the batch
/// means, divide by sqrt(batch count).  None when fewer than two batches.
fn batch_means_se(values: &[f64]) -> Option<f64> {
    let b = BATCHES.min(values.len());
    if b < 2 {
        return None;
    }
    let base = values.len() / b;
    let rem = values.len() % b;
    let mut means = Vec::with_capacity(b);
    let mut start = 0;
    for i in 0..b {
        let len = base + usize::from(i < rem);
        let chunk = &values[start..start + len];
        start += len;
        means.push(chunk.iter().sum::<f64>() / len as f64);
    }
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    Some((var / b as f64).sqrt())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Nearest-rank percentile (p in (0, 1]) of an ascending slice.
fn percentile_of_sorted(v: &[f64], p: f64) -> f64 {
    let idx = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

/// A statistical row for the mean of a complex sequence: one row per part,
/// both targeting `target` (a real number; the imaginary target is 0).
fn complex_mean_rows(label: &str, values: &[Complex64], target: f64) -> [StatRow; 2] {
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    let se_re = batch_means_se(&re).unwrap_or(0.0);
    let se_im = batch_means_se(&im).unwrap_or(0.0);
    [
        StatRow::se_band(format!("E[Re {label}]"), mean(&re), target, se_re),
        StatRow::se_band(format!("E[Im {label}]"), mean(&im), 0.0, se_im),
    ]
}

/// Analytic second moment: E[|a_k|^2] = 1 / (k! (n^(k falling))^(d-2)).
fn second_moment_target(n: usize, d: usize, k: usize) -> f64 {
    let kf = factorial_exact(k).expect("k <= n <= 20 in every experiment");
    1.0 / (kf * falling_factorial(n, k).powi(d as i32 - 2))
}

/// Moments of the coefficient statistics under zero-mean sampling.
///
/// Draws `trials` independent tensors A ~ D_0^(tensor), extracts a_1 ..=
/// a_kmax and V_1 ..= V_kmax from each, and compares the empirical means of
/// a_k, |a_k|^2, V_k and a_k - V_k against their analytic values.
pub fn moment_experiment(
    kind: DistributionKind,
    d: usize,
    n: usize,
    kmax: usize,
    trials: u64,
    seed: SeedSpec,
    opts: &VerifyOptions,
) -> Result<ExperimentReport> {
    if trials < MIN_MOMENT_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "moment experiment needs at least {MIN_MOMENT_TRIALS} trials, got {trials}"
        )));
    }
    if kmax < 1 || kmax > n {
        return Err(Error::InvalidArgument(format!(
            "kmax {kmax} outside 1..={n}"
        )));
    }
    let start = Instant::now();
    let dist = EntryDistribution::new(kind, Complex64::new(0.0, 0.0));
    let budget = opts.budget;

    struct TrialMoments {
        a: Vec<Complex64>,
        v: Vec<Complex64>,
    }

    let per_trial: Result<Vec<TrialMoments>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let a = sample_tensor(&dist, d, n, &seed.substream(trial))?;
            let aser = series::coefficients_upto_with_budget(&a, kmax, budget)?;
            let vser = symmetric::elementary_coeffs(&a, kmax)?;
            Ok(TrialMoments {
                a: aser.coefficients().to_vec(),
                v: vser.coefficients().to_vec(),
            })
        })
        .collect();
    let per_trial = per_trial?;

    let mut rows = Vec::new();
    let a0_dev = per_trial
        .iter()
        .map(|t| (t.a[0] - Complex64::new(1.0, 0.0)).norm())
        .fold(0.0f64, f64::max);
    rows.push(StatRow::abs_band("max |a_0 - 1|", a0_dev, 0.0, 0.0));

    for k in 1..=kmax {
        let ak: Vec<Complex64> = per_trial.iter().map(|t| t.a[k]).collect();
        let vk: Vec<Complex64> = per_trial.iter().map(|t| t.v[k]).collect();
        let diff: Vec<Complex64> = per_trial.iter().map(|t| t.a[k] - t.v[k]).collect();
        let sq: Vec<f64> = ak.iter().map(|v| v.norm_sqr()).collect();

        rows.extend(complex_mean_rows(&format!("a_{k}"), &ak, 0.0));
        rows.push(StatRow::se_band(
            format!("E[|a_{k}|^2]"),
            mean(&sq),
            second_moment_target(n, d, k),
            batch_means_se(&sq).unwrap_or(0.0),
        ));
        rows.extend(complex_mean_rows(&format!("V_{k}"), &vk, 0.0));
        rows.extend(complex_mean_rows(&format!("(a_{k} - V_{k})"), &diff, 0.0));
    }

    Ok(ExperimentReport {
        experiment: "moments".into(),
        kind,
        d,
        n_list: vec![n],
        kmax: Some(kmax),
        mu: None,
        epsilon: None,
        z: None,
        t: None,
        trials,
        seed,
        wall_seconds: elapsed(start, opts),
        rows,
        trial_rows: None,
    })
}

/// Hyperplane scores of the seeded random tensor, without materializing it:
/// each score's entries are regenerated from the stream in exactly the flat
/// order `Tensor::hyperplane_sum` reads them, so the result matches the
/// materialized path bit for bit.
pub fn streamed_hyperplane_scores(
    dist: &EntryDistribution,
    seed: &SeedSpec,
    d: usize,
    n: usize,
) -> Result<Vec<Complex64>> {
    if d < 2 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "need order >= 2 and dimension >= 1, got d={d}, n={n}"
        )));
    }
    let total = (n as u128).checked_pow(d as u32).filter(|&t| t < u64::MAX as u128 / 2);
    let Some(_) = total else {
        return Err(Error::InvalidArgument(format!(
            "entry ordinals for n={n}, d={d} overflow the draw counter"
        )));
    };
    let stream = EntryStream::new(dist, seed);
    let stride: u64 = (n as u64).pow(d as u32 - 2);
    let block: u64 = stride * n as u64;
    let scale = (n as f64).powf((d as f64 - 1.0) / 2.0);
    let scores = (0..n)
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for o in 0..n as u64 {
                let base = o * block + j as u64 * stride;
                for s in 0..stride {
                    acc += stream.at(base + s);
                }
            }
            acc / scale
        })
        .collect();
    Ok(scores)
}

/// Concentration of the mean power sums M_k = (1/n) sum_j C_j^k of the
/// hyperplane scores across a list of dimensions: per n, the median and 95th
/// percentile of |M_2 - xi| and of |M_k| for 3 <= k <= kmax, plus
/// strict-decrease trend rows between consecutive entries of `n_list` and
/// the deterministic all-ones control M_2(J) = n^(d-1) at the smallest
/// dimension. See [`symmetric::mean_power_sums`] for why the means, rather
/// than the fully normalized D_k, are the statistic with a distribution-
/// dependent limit.
pub fn concentration_experiment(
    kind: DistributionKind,
    d: usize,
    n_list: &[usize],
    kmax: usize,
    trials: u64,
    seed: SeedSpec,
    opts: &VerifyOptions,
) -> Result<ExperimentReport> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("empty dimension list".into()));
    }
    if kmax < 3 {
        return Err(Error::InvalidArgument(format!(
            "concentration needs kmax >= 3, got {kmax}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let start = Instant::now();
    let dist = EntryDistribution::new(kind, Complex64::new(0.0, 0.0));
    let xi = dist.xi;

    // medians[i], p95s[i]: per-dimension statistics indexed like n_list;
    // each holds |M_2 - xi| at [0] and |M_k| at [k - 2] for k >= 3.
    let mut medians: Vec<Vec<f64>> = Vec::with_capacity(n_list.len());
    let mut p95s: Vec<Vec<f64>> = Vec::with_capacity(n_list.len());
    for (n_idx, &n) in n_list.iter().enumerate() {
        let base_seed = seed.substream(n_idx as u64);
        let per_trial: Result<Vec<Vec<f64>>> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let scores =
                    streamed_hyperplane_scores(&dist, &base_seed.substream(trial), d, n)?;
                let m = symmetric::mean_power_sums(&scores, kmax);
                let mut stats = Vec::with_capacity(kmax - 1);
                stats.push((m[1] - xi).norm());
                for k in 3..=kmax {
                    stats.push(m[k - 1].norm());
                }
                Ok(stats)
            })
            .collect();
        let per_trial = per_trial?;
        let mut med = Vec::with_capacity(kmax - 1);
        let mut p95 = Vec::with_capacity(kmax - 1);
        for stat in 0..kmax - 1 {
            let vals = sorted(&per_trial.iter().map(|t| t[stat]).collect::<Vec<f64>>());
            med.push(median_of_sorted(&vals));
            p95.push(percentile_of_sorted(&vals, 0.95));
        }
        medians.push(med);
        p95s.push(p95);
    }

    let stat_name = |stat: usize| {
        if stat == 0 {
            "|M_2 - xi|".to_string()
        } else {
            format!("|M_{}|", stat + 2)
        }
    };

    let mut rows = Vec::new();
    for (n_idx, &n) in n_list.iter().enumerate() {
        for stat in 0..kmax - 1 {
            rows.push(StatRow::info(
                format!("median {} (n={n})", stat_name(stat)),
                medians[n_idx][stat],
            ));
            rows.push(StatRow::info(
                format!("p95 {} (n={n})", stat_name(stat)),
                p95s[n_idx][stat],
            ));
        }
    }
    for w in 0..n_list.len().saturating_sub(1) {
        let (a, b) = (n_list[w], n_list[w + 1]);
        for stat in 0..kmax - 1 {
            rows.push(StatRow::decrease(
                format!("median {} decreases (n={a} -> n={b})", stat_name(stat)),
                medians[w + 1][stat] - medians[w][stat],
            ));
        }
    }

    // Deterministic control: for A = J every score is n^((d-1)/2), so
    // M_2 = n^(d-1) (exact up to one rounding when the root is inexact).
    let n0 = n_list[0];
    let ones = Tensor::ones(d, n0)?;
    let scores = symmetric::hyperplane_scores(&ones);
    let m2 = symmetric::mean_power_sums(scores.scores(), 2)[1];
    let target = (n0 as f64).powi(d as i32 - 1);
    rows.push(StatRow::abs_band(
        format!("control |M_2(J) - n^(d-1)| (n={n0})"),
        (m2 - Complex64::new(target, 0.0)).norm(),
        0.0,
        1e-9,
    ));

    Ok(ExperimentReport {
        experiment: "concentration".into(),
        kind,
        d,
        n_list: n_list.to_vec(),
        kmax: Some(kmax),
        mu: None,
        epsilon: None,
        z: None,
        t: None,
        trials,
        seed,
        wall_seconds: elapsed(start, opts),
        rows,
        trial_rows: None,
    })
}

/// Closeness of the truncated series to its approximations, per trial:
/// the discarded tail, the a-vs-V gap on the kept terms, the per-order
/// distances |V'_k - V_k|, and the magnitude of the generating function
/// exp(V_1 z - xi z^2 / 2) the closed form evaluates.
pub fn closeness_experiment(
    kind: DistributionKind,
    d: usize,
    n: usize,
    epsilon: f64,
    z: Complex64,
    trials: u64,
    seed: SeedSpec,
    opts: &VerifyOptions,
) -> Result<ExperimentReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let t = approx::truncation_order(n, epsilon)?;
    let start = Instant::now();
    let dist = EntryDistribution::new(kind, Complex64::new(0.0, 0.0));
    let xi = dist.xi;
    let budget = opts.budget;

    struct TrialCloseness {
        tail: f64,
        term_sum: f64,
        gap: f64,
        eps_k: Vec<f64>,
        v2_a2: f64,
        gf: f64,
    }

    let evaluate = |aser: &CoefficientSeries, vser: &CoefficientSeries, xi: Complex64| {
        let a = aser.coefficients();
        let v = vser.coefficients();
        let mut zp = Complex64::new(1.0, 0.0);
        let mut tail = Complex64::new(0.0, 0.0);
        let mut term_sum = 0.0;
        let mut gap = Complex64::new(0.0, 0.0);
        for k in 0..=n {
            if k <= t {
                gap += (a[k] - v[k]) * zp;
            } else {
                tail += a[k] * zp;
                term_sum += (a[k] * zp).norm();
            }
            zp *= z;
        }
        let v1 = v[1];
        let vprime = symmetric::gaussian_series(v1, xi, n);
        let eps_k: Vec<f64> = vprime
            .coefficients()
            .iter()
            .zip(v)
            .map(|(vp, vk)| (vp - vk).norm())
            .collect();
        let gf = symmetric::gaussian_value(&GaussianParams { v1, xi, z }).norm();
        TrialCloseness {
            tail: tail.norm(),
            term_sum,
            gap: gap.norm(),
            eps_k,
            v2_a2: if n >= 2 { (v[2] - a[2]).norm() } else { 0.0 },
            gf,
        }
    };

    let per_trial: Result<Vec<TrialCloseness>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let a = sample_tensor(&dist, d, n, &seed.substream(trial))?;
            let aser = series::coefficients_upto_with_budget(&a, n, budget)?;
            let vser = symmetric::elementary_coeffs(&a, n)?;
            Ok(evaluate(&aser, &vser, xi))
        })
        .collect();
    let per_trial = per_trial?;

    let mut rows = Vec::new();
    let tails = sorted(&per_trial.iter().map(|t| t.tail).collect::<Vec<f64>>());
    let gaps = sorted(&per_trial.iter().map(|t| t.gap).collect::<Vec<f64>>());
    let gfs = sorted(&per_trial.iter().map(|t| t.gf).collect::<Vec<f64>>());
    rows.push(StatRow::info(
        "median tail |sum_{k>t} a_k z^k|",
        median_of_sorted(&tails),
    ));
    rows.push(StatRow::info(
        "p95 tail |sum_{k>t} a_k z^k|",
        percentile_of_sorted(&tails, 0.95),
    ));
    rows.push(StatRow::info(
        "median gap |sum_{k<=t} (a_k - V_k) z^k|",
        median_of_sorted(&gaps),
    ));
    rows.push(StatRow::info(
        "p95 gap |sum_{k<=t} (a_k - V_k) z^k|",
        percentile_of_sorted(&gaps, 0.95),
    ));

    // |sum| <= sum of |term| exactly; allow a hair of roundoff.
    let slack = per_trial
        .iter()
        .map(|t| t.tail - t.term_sum)
        .fold(f64::NEG_INFINITY, f64::max);
    rows.push(StatRow::below("tail triangle decomposition slack", slack, 1e-12));

    let v1_dev = per_trial
        .iter()
        .map(|t| t.eps_k[1])
        .fold(0.0f64, f64::max);
    rows.push(StatRow::abs_band("max |V'_1 - V_1|", v1_dev, 0.0, 0.0));
    for k in 2..=n {
        let vals = sorted(&per_trial.iter().map(|t| t.eps_k[k]).collect::<Vec<f64>>());
        rows.push(StatRow::info(
            format!("median |V'_{k} - V_{k}|"),
            median_of_sorted(&vals),
        ));
    }
    if n >= 2 {
        let vals = sorted(&per_trial.iter().map(|t| t.v2_a2).collect::<Vec<f64>>());
        rows.push(StatRow::info(
            "median |V_2 - a_2|",
            median_of_sorted(&vals),
        ));
    }
    rows.push(StatRow::info(
        "median |exp(V_1 z - xi z^2/2)|",
        median_of_sorted(&gfs),
    ));
    rows.push(StatRow::info(
        "min |exp(V_1 z - xi z^2/2)|",
        gfs[0],
    ));

    // Parameter-only condition from the tail bound's proof: the squared
    // term ratio |z|^2 / (t+1) must stay below 1 / (2 (d-1)^6).  Recorded,
    // not enforced.
    let ratio = z.norm_sqr() / (t as f64 + 1.0);
    let bound = 1.0 / (2.0 * ((d - 1) as f64).powi(6));
    rows.push(StatRow::below(
        "term ratio |z|^2/(t+1) vs 1/(2(d-1)^6)",
        ratio,
        bound,
    ));

    // Degenerate control A = 0: every coefficient vanishes, and the
    // point-mass noise has xi = 0, so the generating function is exactly 1.
    let zero = Tensor::constant(d, n, Complex64::new(0.0, 0.0))?;
    let aser0 = series::coefficients_upto_with_budget(&zero, n, budget)?;
    let vser0 = symmetric::elementary_coeffs(&zero, n)?;
    let ctrl = evaluate(&aser0, &vser0, Complex64::new(0.0, 0.0));
    rows.push(StatRow::abs_band("control A=0 tail", ctrl.tail, 0.0, 0.0));
    rows.push(StatRow::abs_band("control A=0 gap", ctrl.gap, 0.0, 0.0));
    rows.push(StatRow::abs_band(
        "control A=0 |GF - 1|",
        (ctrl.gf - 1.0).abs(),
        0.0,
        0.0,
    ));

    Ok(ExperimentReport {
        experiment: "closeness".into(),
        kind,
        d,
        n_list: vec![n],
        kmax: Some(n),
        mu: None,
        epsilon: Some(epsilon),
        z: Some(z),
        t: Some(t),
        trials,
        seed,
        wall_seconds: elapsed(start, opts),
        rows,
        trial_rows: None,
    })
}

/// End-to-end estimator accuracy: per trial, the relative error
/// |1 - estimate / per(R)| of the truncated-series and closed-form
/// estimators against the exact permanent, with medians, means, maxima and
/// the fraction of trials within epsilon.  `t_override` forces the series
/// truncation order (1..=n); `None` uses ceil(ln n + ln(1/epsilon)).
#[allow(clippy::too_many_arguments)]
pub fn end_to_end_experiment(
    kind: DistributionKind,
    d: usize,
    n: usize,
    mu: Complex64,
    epsilon: f64,
    trials: u64,
    seed: SeedSpec,
    t_override: Option<usize>,
    opts: &VerifyOptions,
) -> Result<ExperimentReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let t_used = match t_override {
        Some(t) if t >= 1 && t <= n => t,
        Some(t) => {
            return Err(Error::InvalidArgument(format!(
                "truncation override {t} outside 1..={n}"
            )))
        }
        None => approx::truncation_order(n, epsilon)?,
    };
    let start = Instant::now();
    let dist = EntryDistribution::new(kind, mu);
    let xi = dist.xi;
    let budget = opts.budget;

    // |1 - est/per| via the log-polar forms, so huge magnitudes stay exact.
    let rel_error = |est: &PermanentValue, per: &PermanentValue| {
        let ratio = Complex64::new(
            est.log_magnitude - per.log_magnitude,
            est.argument - per.argument,
        )
        .exp();
        (Complex64::new(1.0, 0.0) - ratio).norm()
    };

    let per_trial: Result<Vec<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let r = sample_tensor(&dist, d, n, &seed.substream(trial))?;
            let exact_value = exact::permanent_with_budget(&r, budget)?;
            let series_est =
                approx::permanent_series_with(&r, mu, epsilon, Some(t_used), budget)?;
            let closed_est = approx::permanent_gaussian(&r, mu, xi)?;
            Ok((
                rel_error(&series_est.value, &exact_value),
                rel_error(&closed_est.value, &exact_value),
            ))
        })
        .collect();
    let per_trial = per_trial?;

    let mut trial_rows = Vec::with_capacity(2 * per_trial.len());
    for (trial, &(se, ce)) in per_trial.iter().enumerate() {
        trial_rows.push(TrialRow {
            trial: trial as u64,
            method: method_tag(Method::TruncatedSeries).into(),
            abs_error: se,
            within_epsilon: se <= epsilon,
        });
        trial_rows.push(TrialRow {
            trial: trial as u64,
            method: method_tag(Method::ClosedForm).into(),
            abs_error: ce,
            within_epsilon: ce <= epsilon,
        });
    }

    let mut rows = Vec::new();
    for (errors, label) in [
        (
            per_trial.iter().map(|t| t.0).collect::<Vec<f64>>(),
            "series",
        ),
        (
            per_trial.iter().map(|t| t.1).collect::<Vec<f64>>(),
            "closed form",
        ),
    ] {
        let s = sorted(&errors);
        rows.push(StatRow::info(
            format!("median |1 - estimate/per| ({label})"),
            median_of_sorted(&s),
        ));
        rows.push(StatRow::info_with_se(
            format!("mean |1 - estimate/per| ({label})"),
            mean(&errors),
            batch_means_se(&errors).unwrap_or(0.0),
        ));
        rows.push(StatRow::info(
            format!("max |1 - estimate/per| ({label})"),
            s[s.len() - 1],
        ));
        let frac = errors.iter().filter(|&&e| e <= epsilon).count() as f64
            / errors.len() as f64;
        rows.push(StatRow::info(
            format!("fraction within epsilon ({label})"),
            frac,
        ));
    }

    // Degenerate control R = mu J: per(R) = mu^n (n!)^(d-1) analytically,
    // the centered tensor is exactly zero, and the point-mass noise has
    // xi = 0, so both estimators reproduce the analytic log form bit for
    // bit and the control errors are exact zeros.
    let r_ctrl = Tensor::constant(d, n, mu)?;
    let analytic = PermanentValue::from_log(
        n as f64 * mu.norm().ln() + (d as f64 - 1.0) * ln_factorial(n),
        n as f64 * mu.arg(),
    );
    let series_ctrl = approx::permanent_series_with(&r_ctrl, mu, epsilon, Some(t_used), budget)?;
    let closed_ctrl = approx::permanent_gaussian(&r_ctrl, mu, Complex64::new(0.0, 0.0))?;
    rows.push(StatRow::abs_band(
        "control R=muJ error (series)",
        rel_error(&series_ctrl.value, &analytic),
        0.0,
        0.0,
    ));
    rows.push(StatRow::abs_band(
        "control R=muJ error (closed form)",
        rel_error(&closed_ctrl.value, &analytic),
        0.0,
        0.0,
    ));
    let kernel = exact::permanent_with_budget(&r_ctrl, budget)?;
    rows.push(StatRow::abs_band(
        "control per(muJ) kernel vs analytic",
        rel_error(&kernel, &analytic),
        0.0,
        1e-12,
    ));

    Ok(ExperimentReport {
        experiment: "end-to-end".into(),
        kind,
        d,
        n_list: vec![n],
        kmax: None,
        mu: Some(mu),
        epsilon: Some(epsilon),
        z: Some(mu.inv()),
        t: Some(t_used),
        trials,
        seed,
        wall_seconds: elapsed(start, opts),
        rows,
        trial_rows: Some(trial_rows),
    })
}

fn method_tag(m: Method) -> &'static str {
    match m {
        Method::TruncatedSeries => "truncated_series",
        Method::ClosedForm => "ptas_closed_form",
    }
}

fn elapsed(start: Instant, opts: &VerifyOptions) -> f64 {
    if opts.record_timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    }
}
