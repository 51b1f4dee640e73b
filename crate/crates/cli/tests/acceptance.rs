//! Acceptance suite: one test per acceptance criterion, each printing a
//! single `criterion N PASS` / `criterion N FAIL: ...` line (visible with
//! `cargo test -p tenperm-cli --test acceptance -- --nocapture`).
//!
//! Tolerances are pinned as constants below.  The tests grab a shared lock
//! so they never run concurrently: several criteria carry wall-clock limits
//! and one times a kernel, so they need the machine to themselves.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use tenperm_core::numeric::{binomial_u128, factorial_exact};
use tenperm_core::sampling::{self, DistributionKind, EntryDistribution, SeedSpec};
use tenperm_core::symmetric::GaussianParams;
use tenperm_core::tensor::Tensor;
use tenperm_core::verify::{self, VerifyOptions};
use tenperm_core::{exact, series, symmetric};

/// Relative tolerance for per(all-ones) against (n!)^(d-1).
const ONES_REL_TOL: f64 = 1e-12;
/// Relative tolerance for expansion-vs-Ryser agreement on random matrices.
const RYSER_REL_TOL: f64 = 1e-11;
/// Bound on the expansion-identity residual per tensor and point.
const IDENTITY_RESIDUAL_TOL: f64 = 1e-9;
/// Relative tolerance for brute-force elementary-symmetric agreement.
const NEWTON_REL_TOL: f64 = 1e-10;
/// Relative tolerance for closed-form vs recursion V' coefficients.
const VPRIME_REL_TOL: f64 = 1e-9;
/// Absolute bound on |truncated V' series - exp(V_1 z - xi z^2/2)|.
const GF_ABS_TOL: f64 = 1e-8;
/// Bound on the full-truncation (t = n) series error per trial.
const FULL_SERIES_TOL: f64 = 1e-9;
/// Log-log slope band for measured time vs predicted coefficient work.
const SLOPE_BAND: (f64, f64) = (0.8, 1.2);

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Print the verdict line and fail the test on FAIL.
fn verdict(criterion: u32, ok: bool, detail: &str) {
    if ok {
        println!("criterion {criterion} PASS");
    } else {
        println!("criterion {criterion} FAIL: {detail}");
        panic!("criterion {criterion} failed: {detail}");
    }
}

#[test]
fn criterion_1_exact_permanent_correctness() {
    let _guard = serial();
    let start = Instant::now();
    let mut worst_ones = 0.0f64;
    for d in 2..=4 {
        for n in 1..=5 {
            let per = exact::permanent(&Tensor::ones(d, n).unwrap()).unwrap();
            let target = factorial_exact(n).unwrap().powi(d as i32 - 1);
            let rel = (per.value - c(target, 0.0)).norm() / target;
            worst_ones = worst_ones.max(rel);
        }
    }

    let dist = EntryDistribution::new(DistributionKind::ComplexGaussian, c(0.0, 0.0));
    let mut worst_ryser = 0.0f64;
    for trial in 0..100u64 {
        let n = 2 + (trial as usize % 7); // cycles 2..=8
        let a = sampling::sample_tensor(&dist, 2, n, &SeedSpec::new(101, trial)).unwrap();
        let e = exact::permanent(&a).unwrap().value;
        let r = exact::permanent_ryser(&a).unwrap().value;
        worst_ryser = worst_ryser.max((e - r).norm() / r.norm().max(1e-300));
    }

    let elapsed = start.elapsed();
    let ok = worst_ones < ONES_REL_TOL
        && worst_ryser <= RYSER_REL_TOL
        && elapsed < Duration::from_secs(30);
    verdict(
        1,
        ok,
        &format!(
            "ones rel {worst_ones:.3e} (tol {ONES_REL_TOL:.0e}), ryser rel {worst_ryser:.3e} \
             (tol {RYSER_REL_TOL:.0e}), elapsed {elapsed:.1?} (limit 30s)"
        ),
    );
}

#[test]
fn criterion_2_expansion_identity() {
    let _guard = serial();
    let start = Instant::now();
    let dist = EntryDistribution::new(DistributionKind::ComplexGaussian, c(0.0, 0.0));
    let points = [c(0.5, 0.0), c(1.0, 1.0), c(-2.0, 0.0)];
    let mut worst = 0.0f64;
    for trial in 0..20u64 {
        let a = sampling::sample_tensor(&dist, 3, 4, &SeedSpec::new(202, trial)).unwrap();
        for &z in &points {
            worst = worst.max(series::identity_residual(&a, z).unwrap());
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= IDENTITY_RESIDUAL_TOL && elapsed < Duration::from_secs(60);
    verdict(
        2,
        ok,
        &format!(
            "worst residual {worst:.3e} (tol {IDENTITY_RESIDUAL_TOL:.0e}), \
             elapsed {elapsed:.1?} (limit 60s)"
        ),
    );
}

#[test]
fn criterion_3_ones_coefficients_are_binomials() {
    let _guard = serial();
    let mut ok = true;
    let mut detail = String::new();
    for d in 2..=4 {
        for n in 1..=6 {
            let j = Tensor::ones(d, n).unwrap();
            let coeffs = series::coefficients_upto_with_budget(&j, n, 1e11).unwrap();
            for (k, &a_k) in coeffs.coefficients().iter().enumerate() {
                let want = binomial_u128(n, k) as f64;
                if a_k.re != want || a_k.im != 0.0 {
                    ok = false;
                    detail = format!("d={d} n={n} k={k}: got {a_k}, want exactly {want}");
                }
            }
        }
    }
    verdict(3, ok, &detail);
}

/// Brute-force elementary symmetric polynomial by subset enumeration.
fn brute_elementary(xs: &[Complex64], k: usize) -> Complex64 {
    let n = xs.len();
    let mut acc = c(0.0, 0.0);
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize != k {
            continue;
        }
        let mut p = c(1.0, 0.0);
        for (i, x) in xs.iter().enumerate() {
            if mask >> i & 1 == 1 {
                p *= x;
            }
        }
        acc += p;
    }
    acc
}

#[test]
fn criterion_4_newton_hermite_suite() {
    let _guard = serial();
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    let mut fail = |cond: bool, msg: String| {
        if !cond && ok {
            ok = false;
            detail = msg;
        }
    };

    // Newton-identity evaluation vs brute-force subset sums, n <= 8.
    let seed = SeedSpec::new(404, 0);
    let mut draw = 0u64;
    let mut uniform = || {
        draw += 1;
        sampling::uniform(&seed, draw)
    };
    for n in 1..=8usize {
        let xs: Vec<Complex64> = (0..n)
            .map(|_| c(2.0 * uniform() - 1.0, 2.0 * uniform() - 1.0))
            .collect();
        let e = symmetric::elementary_symmetric(&xs, n).unwrap();
        for (k, &got) in e.iter().enumerate() {
            let want = brute_elementary(&xs, k);
            let err = (got - want).norm() / want.norm().max(1.0);
            fail(
                err <= NEWTON_REL_TOL,
                format!("e_{k} at n={n}: rel err {err:.3e} (tol {NEWTON_REL_TOL:.0e})"),
            );
        }
    }

    // Hermite magnitude bound |h_k(x)| <= max(1,|x|)^k (k/e^2)^(-k/2),
    // checked literally on the grid.
    let grid = [
        c(0.0, 0.0),
        c(0.5, 0.0),
        c(-0.5, 0.0),
        c(1.0, 0.0),
        c(-1.0, 0.0),
        c(2.0, 0.0),
        c(-2.0, 0.0),
        c(4.0, 0.0),
        c(-4.0, 0.0),
        c(0.0, 2.0),
        c(0.0, -2.0),
    ];
    for &x in &grid {
        for k in 0..=40usize {
            let bound = if k == 0 {
                1.0
            } else {
                let e2 = std::f64::consts::E * std::f64::consts::E;
                x.norm().max(1.0).powi(k as i32) * (k as f64 / e2).powf(-(k as f64) / 2.0)
            };
            let h = symmetric::hermite(k, x).norm();
            fail(
                h <= bound,
                format!("|h_{k}({x})| = {h:.3e} exceeds bound {bound:.3e}"),
            );
        }
    }

    // Closed form vs recursion on 100 random (V_1, xi), |V_1| <= 4, |xi| <= 1.
    for _ in 0..100 {
        let v1 = c(5.6 * uniform() - 2.8, 5.6 * uniform() - 2.8);
        let xi = c(1.4 * uniform() - 0.7, 1.4 * uniform() - 0.7);
        let rec = symmetric::gaussian_series(v1, xi, 30);
        for (k, &r) in rec.coefficients().iter().enumerate() {
            if r.norm() <= 1e-12 {
                continue;
            }
            let cl = symmetric::gaussian_coeff(v1, xi, k);
            let err = (cl - r).norm() / r.norm();
            fail(
                err <= VPRIME_REL_TOL,
                format!(
                    "V'_{k} closed vs recursion at V1={v1}, xi={xi}: \
                     rel err {err:.3e} (tol {VPRIME_REL_TOL:.0e})"
                ),
            );
        }
    }

    // Truncated V' series vs the generating function on a grid with
    // |V_1| <= 3, |xi| <= 1, |z| <= 2.
    let v1s = [c(0.0, 0.0), c(1.2, -0.7), c(-2.1, 1.1), c(3.0, 0.0), c(0.3, 2.9)];
    let xis = [c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.6, -0.8), c(-0.3, 0.2)];
    let zs = [
        c(0.5, 0.0),
        c(-1.0, 0.0),
        c(2.0, 0.0),
        c(1.2, 1.6),
        c(-0.9, -0.9),
        c(0.0, 2.0),
    ];
    for &v1 in &v1s {
        for &xi in &xis {
            let ser = symmetric::gaussian_series(v1, xi, 60);
            for &z in &zs {
                let gf = symmetric::gaussian_value(&GaussianParams { v1, xi, z });
                let err = (ser.eval(z) - gf).norm();
                fail(
                    err <= GF_ABS_TOL,
                    format!(
                        "GF gap {err:.3e} at V1={v1}, xi={xi}, z={z} (tol {GF_ABS_TOL:.0e})"
                    ),
                );
            }
        }
    }

    let elapsed = start.elapsed();
    fail(
        elapsed < Duration::from_secs(10),
        format!("elapsed {elapsed:.1?} (limit 10s)"),
    );
    verdict(4, ok, &detail);
}

#[test]
fn criterion_5_moment_targets() {
    let _guard = serial();
    let start = Instant::now();
    let report = verify::moment_experiment(
        DistributionKind::ComplexGaussian,
        3,
        6,
        2,
        100_000,
        SeedSpec::new(505, 0),
        &VerifyOptions::default(),
    )
    .unwrap();

    let mut ok = true;
    let mut detail = String::new();
    let mut expect = |name: &str, target: Option<f64>| match report.row(name) {
        Some(row) => {
            let target_ok = match target {
                Some(t) => {
                    let rt = row.target.unwrap_or(f64::NAN);
                    (rt - t).abs() <= 1e-15 * t.abs().max(1.0)
                }
                None => true,
            };
            if !(row.pass && target_ok) && ok {
                ok = false;
                detail = format!(
                    "row '{name}': empirical {:.6e}, target {:?}, se {:?}, pass {}",
                    row.empirical, row.target, row.standard_error, row.pass
                );
            }
        }
        None => {
            ok = false;
            detail = format!("missing row '{name}'");
        }
    };
    expect("E[Re a_1]", Some(0.0));
    expect("E[Im a_1]", Some(0.0));
    expect("E[|a_1|^2]", Some(1.0 / 6.0));
    expect("E[|a_2|^2]", Some(1.0 / 60.0));

    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(300) && ok {
        ok = false;
        detail = format!("elapsed {elapsed:.1?} (limit 5min)");
    }
    verdict(5, ok, &detail);
}

#[test]
fn criterion_6_concentration_trend() {
    let _guard = serial();
    let start = Instant::now();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pilot_thresholds.json");
    let thresholds: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture).unwrap()).unwrap();
    let seed = thresholds["seed"].as_u64().unwrap();
    let trials = thresholds["trials"].as_u64().unwrap();

    let report = verify::concentration_experiment(
        DistributionKind::RealGaussian,
        3,
        &[64, 128, 256],
        3,
        trials,
        SeedSpec::new(seed, 0),
        &VerifyOptions::default(),
    )
    .unwrap();

    let mut ok = true;
    let mut detail = String::new();
    let mut fail = |cond: bool, msg: String| {
        if !cond && ok {
            ok = false;
            detail = msg;
        }
    };

    for name in [
        "median |M_2 - xi| decreases (n=64 -> n=128)",
        "median |M_2 - xi| decreases (n=128 -> n=256)",
        "median |M_3| decreases (n=64 -> n=128)",
        "median |M_3| decreases (n=128 -> n=256)",
        "control |M_2(J) - n^(d-1)| (n=64)",
    ] {
        let row = report.row(name);
        fail(
            row.is_some_and(|r| r.pass),
            format!("row '{name}' missing or failed: {row:?}"),
        );
    }

    for (stat, key) in [("|M_2 - xi|", "m2_minus_xi"), ("|M_3|", "m3")] {
        for n in [64, 128, 256] {
            let med = report
                .row(&format!("median {stat} (n={n})"))
                .expect("median row")
                .empirical;
            let thr = thresholds["thresholds"][key][n.to_string()]
                .as_f64()
                .expect("threshold entry");
            fail(
                med <= thr,
                format!("median {stat} (n={n}) = {med:.4e} exceeds frozen threshold {thr}"),
            );
        }
    }

    let elapsed = start.elapsed();
    fail(
        elapsed < Duration::from_secs(300),
        format!("elapsed {elapsed:.1?} (limit 5min)"),
    );
    verdict(6, ok, &detail);
}

#[test]
fn criterion_7_end_to_end_degenerations() {
    let _guard = serial();
    let start = Instant::now();
    let opts = VerifyOptions::default();
    let mut ok = true;
    let mut detail = String::new();
    let mut fail = |cond: bool, msg: String| {
        if !cond && ok {
            ok = false;
            detail = msg;
        }
    };

    // Full truncation (t = n): controls exact, worst series error <= 1e-9.
    let full = verify::end_to_end_experiment(
        DistributionKind::ComplexGaussian,
        3,
        4,
        c(1.0, 0.2),
        0.5,
        50,
        SeedSpec::new(707, 0),
        Some(4),
        &opts,
    )
    .unwrap();
    for name in [
        "control R=muJ error (series)",
        "control R=muJ error (closed form)",
        "control per(muJ) kernel vs analytic",
    ] {
        let row = full.row(name);
        fail(
            row.is_some_and(|r| r.pass),
            format!("row '{name}' missing or failed: {row:?}"),
        );
    }
    let worst_full = full
        .row("max |1 - estimate/per| (series)")
        .expect("max row")
        .empirical;
    fail(
        worst_full <= FULL_SERIES_TOL,
        format!("t=n worst series error {worst_full:.3e} (tol {FULL_SERIES_TOL:.0e})"),
    );

    // Median series error non-increasing in the truncation order.
    let mut previous = f64::INFINITY;
    for t in 1..=5usize {
        let rep = verify::end_to_end_experiment(
            DistributionKind::ComplexGaussian,
            3,
            5,
            c(1.0, 0.0),
            0.5,
            100,
            SeedSpec::new(708, 0),
            Some(t),
            &opts,
        )
        .unwrap();
        let med = rep
            .row("median |1 - estimate/per| (series)")
            .expect("median row")
            .empirical;
        fail(
            med <= previous,
            format!("median error rose from {previous:.3e} to {med:.3e} at t={t}"),
        );
        previous = med;
    }

    let elapsed = start.elapsed();
    fail(
        elapsed < Duration::from_secs(600),
        format!("elapsed {elapsed:.1?} (limit 10min)"),
    );
    verdict(7, ok, &detail);
}

#[test]
fn criterion_8_complexity_shape() {
    let _guard = serial();
    let tmp = tempfile::tempdir().unwrap();
    let csv_path = tmp.path().join("bench.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_tenperm"))
        .args([
            "bench", "--d", "3", "--n", "12", "--kmin", "1", "--kmax", "4", "--budget", "1e11",
            "--csv",
        ])
        .arg(&csv_path)
        .output()
        .expect("spawn tenperm bench");

    let mut ok = out.status.success();
    let mut detail = format!("bench exited with {}", out.status);

    if ok {
        let csv = std::fs::read_to_string(&csv_path).unwrap();
        let mut rows = 0usize;
        for line in csv.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let k: usize = fields[2].parse().unwrap();
            let count: u128 = fields[3].parse().unwrap();
            let want = binomial_u128(12, k).pow(3);
            if count != want {
                ok = false;
                detail = format!("subtensor_count at k={k} is {count}, want C(12,{k})^3 = {want}");
            }
            rows += 1;
        }
        if rows != 4 && ok {
            ok = false;
            detail = format!("expected 4 timed rows, found {rows}");
        }
    }

    if ok {
        let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        match summary["log_log_slope"].as_f64() {
            Some(slope) if slope >= SLOPE_BAND.0 && slope <= SLOPE_BAND.1 => {}
            other => {
                ok = false;
                detail = format!(
                    "log-log slope {other:?} outside frozen band [{}, {}]",
                    SLOPE_BAND.0, SLOPE_BAND.1
                );
            }
        }
    }
    verdict(8, ok, &detail);
}

fn own(args: &[&str]) -> Vec<String> {
    args.iter().map(|s| s.to_string()).collect()
}

/// One deterministic CLI invocation; returns (stdout, requested file bytes).
fn run_deterministic(
    threads: &str,
    args: &[String],
    files: &[PathBuf],
) -> (Vec<u8>, Vec<Vec<u8>>) {
    let out = Command::new(env!("CARGO_BIN_EXE_tenperm"))
        .args(["--threads", threads, "--deterministic"])
        .args(args)
        .output()
        .expect("spawn tenperm");
    assert!(
        out.status.success(),
        "tenperm {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    let bytes = files
        .iter()
        .map(|f| std::fs::read(f).expect("declared output file"))
        .collect();
    (out.stdout, bytes)
}

#[test]
fn criterion_9_cli_determinism() {
    let _guard = serial();
    let tmp = tempfile::tempdir().unwrap();

    // Shared input tensor for the tensor-consuming subcommands.
    let tensor_path = tmp.path().join("input.json");
    let sample = Command::new(env!("CARGO_BIN_EXE_tenperm"))
        .args([
            "--deterministic",
            "sample",
            "--kind",
            "complex-gaussian",
            "--mu",
            "0.5,0.25",
            "--d",
            "3",
            "--n",
            "3",
            "--seed",
            "99",
        ])
        .output()
        .expect("spawn tenperm sample");
    assert!(sample.status.success());
    std::fs::write(&tensor_path, &sample.stdout).unwrap();
    let tensor = tensor_path.to_str().unwrap().to_string();

    // Each case maps a per-run scratch directory to (args, output files).
    type Case = Box<dyn Fn(&Path) -> (Vec<String>, Vec<PathBuf>)>;
    let cases: Vec<(&str, Case)> = vec![
        (
            "sample",
            Box::new(|_dir: &Path| {
                (
                    own(&[
                        "sample", "--kind", "shifted-rademacher", "--mu", "1", "--d", "3", "--n",
                        "4", "--seed", "7", "--stream", "2",
                    ]),
                    vec![],
                )
            }),
        ),
        (
            "exact",
            Box::new({
                let tensor = tensor.clone();
                move |_dir: &Path| (own(&["exact", "--input", &tensor, "--log"]), vec![])
            }),
        ),
        (
            "coeffs",
            Box::new({
                let tensor = tensor.clone();
                move |_dir: &Path| (own(&["coeffs", "--input", &tensor, "--t", "3"]), vec![])
            }),
        ),
        (
            "identity-check",
            Box::new({
                let tensor = tensor.clone();
                move |_dir: &Path| {
                    (
                        own(&["identity-check", "--input", &tensor, "--z", "0.5,0.25"]),
                        vec![],
                    )
                }
            }),
        ),
        (
            "stats",
            Box::new({
                let tensor = tensor.clone();
                move |_dir: &Path| {
                    (
                        own(&["stats", "--input", &tensor, "--kmax", "3", "--xi", "1"]),
                        vec![],
                    )
                }
            }),
        ),
        (
            "approx",
            Box::new({
                let tensor = tensor.clone();
                move |_dir: &Path| {
                    (
                        own(&[
                            "approx",
                            "--input",
                            &tensor,
                            "--mu",
                            "0.5,0.25",
                            "--epsilon",
                            "0.3",
                        ]),
                        vec![],
                    )
                }
            }),
        ),
        (
            "verify",
            Box::new(|dir: &Path| {
                let report = dir.join("report.json");
                let rows = dir.join("rows.csv");
                let trials = dir.join("trials.csv");
                let mut args = own(&[
                    "verify",
                    "--experiment",
                    "end-to-end",
                    "--kind",
                    "complex-gaussian",
                    "--d",
                    "3",
                    "--n",
                    "3",
                    "--mu",
                    "1,0.2",
                    "--epsilon",
                    "0.5",
                    "--trials",
                    "10",
                    "--seed",
                    "42",
                ]);
                for (flag, path) in [
                    ("--out", &report),
                    ("--csv", &rows),
                    ("--trial-csv", &trials),
                ] {
                    args.push(flag.to_string());
                    args.push(path.to_str().unwrap().to_string());
                }
                (args, vec![report, rows, trials])
            }),
        ),
        (
            "bench",
            Box::new(|dir: &Path| {
                let csv = dir.join("bench.csv");
                let mut args = own(&[
                    "bench", "--d", "2", "--n", "6", "--kmin", "1", "--kmax", "3", "--seed", "7",
                    "--csv",
                ]);
                args.push(csv.to_str().unwrap().to_string());
                (args, vec![csv])
            }),
        ),
    ];

    let mut ok = true;
    let mut detail = String::new();
    for (name, case) in &cases {
        let mut outputs = Vec::new();
        for threads in ["1", "4"] {
            for rep in 0..2 {
                let dir = tmp.path().join(format!("{name}-t{threads}-r{rep}"));
                std::fs::create_dir_all(&dir).unwrap();
                let (args, files) = case(&dir);
                outputs.push(run_deterministic(threads, &args, &files));
            }
        }
        if !outputs.iter().all(|o| *o == outputs[0]) && ok {
            ok = false;
            detail = format!("subcommand '{name}' output differs across runs or thread counts");
        }
    }
    verdict(9, ok, &detail);
}
