//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criterion 7 needs the public GEFCom2014 wind data: set `CSVQR_GEFCOM_DATA`
//! to an hourly CSV in the layout `csvqr ingest` reads.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use csvqr_core::backtest::{
    run_backtest, tune_hyperparameters, BacktestConfig, HyperGrid, Method, DEFAULT_HOLDOUT_FRACTION,
};
use csvqr_core::benchmarks::BenchmarkKind;
use csvqr_core::csvqr::{
    dual_gradient, predict_intervals, CsvqrConfig, CsvqrModel, DualSolution, QuantileLevels,
};
use csvqr_core::dataset::{load_csv, select_zone, ColumnMapping, YearMonth};
use csvqr_core::kernels::{gram, KernelSpec};
use csvqr_core::metrics::{ace, aggregate_qscore, picp, pinball, quantile_score};
use csvqr_core::synthetic::HeteroscedasticProcess;
use csvqr_testkit as oracle;
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CROSSING_TOL: f64 = 1e-6;

/// Criteria 1 and 4 check the optimum itself, so the solver runs to a tight
/// tolerance instead of the default early-stopping one.
const ORACLE_TOL: f64 = 1e-9;
const ORACLE_MAX_ITER: usize = 1_000_000;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

/// Crossed adjacent levels at the training points, `N x M` fitted values.
fn crossings(fitted: &Array2<f64>) -> usize {
    fitted
        .rows()
        .into_iter()
        .map(|r| {
            r.windows(2)
                .into_iter()
                .filter(|w| w[0] > w[1] + CROSSING_TOL)
                .count()
        })
        .sum()
}

struct Shared {
    /// Training-point crossings from criterion 1, criterion 5 and the synthetic backtest.
    crossings: Vec<(&'static str, usize, usize)>,
}

fn oracle_equivalence(shared: &mut Shared) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20130601);
    let mut worst: f64 = 0.0;
    let mut fits = 0;
    let mut crossed = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=20);
        let p = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let sigma = rng.random_range(0.5..=2.0);
        let c = if rng.random_bool(0.5) { 1.0 } else { 10.0 };
        let x = Array2::from_shape_simple_fn((n, p), || rng.random_range(0.0..1.0));
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut taus: Vec<f64> = Vec::new();
        while taus.len() < m {
            let t = rng.random_range(1..20) as f64 / 20.0;
            if !taus.contains(&t) {
                taus.push(t);
            }
        }
        taus.sort_by(f64::total_cmp);
        let levels = QuantileLevels::new(taus.clone()).unwrap();
        let cfg = CsvqrConfig {
            c,
            kernel: KernelSpec::rbf(sigma).unwrap(),
            tol: ORACLE_TOL,
            max_iter: ORACLE_MAX_ITER,
            clamp: false,
        };
        let model = CsvqrModel::fit(x.view(), &y, &levels, &cfg).unwrap();
        let ours = model.fitted_training();
        crossed += crossings(&ours);
        fits += 1;
        let g = oracle::rbf_matrix(x.view(), x.view(), sigma);
        let reference = oracle::solve_primal(g.view(), &y, &taus, c);
        let dev = ours
            .t()
            .iter()
            .zip(reference.fitted.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    shared.crossings.push(("oracle instances", fits, crossed));
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-3 && elapsed < Duration::from_secs(120),
        format!(
            "50 instances, solver tol {ORACLE_TOL:e}*C, max |f - f_qp| = {worst:.2e} (limit 1e-3), \
             {elapsed:.1?} (limit 2 min)"
        ),
    )
}

fn non_crossing(shared: &Shared) -> Outcome {
    let total: usize = shared.crossings.iter().map(|c| c.2).sum();
    let detail = shared
        .crossings
        .iter()
        .map(|(name, fits, n)| format!("{name}: {n} in {fits} fits"))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(total == 0, format!("violations above 1e-6: {detail}"))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let levels = QuantileLevels::new(vec![0.1, 0.5, 0.9]).unwrap();
    let (m, n, c) = (3, 6, 2.0);
    let x = Array2::from_shape_simple_fn((n, 2), || rng.random_range(0.0..1.0));
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let g = gram(&KernelSpec::rbf(0.9).unwrap(), x.view()).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut d = DualSolution::zeros(m, n);
        for (k, &tau) in levels.as_slice().iter().enumerate() {
            for i in 0..n {
                d.alpha_plus[[k, i]] = rng.random_range(0.0..=tau * c);
                d.alpha_minus[[k, i]] = rng.random_range(0.0..=(1.0 - tau) * c);
            }
        }
        d.lambda.mapv_inplace(|_| rng.random_range(0.0..3.0));
        let grad = dual_gradient(&d, g.view(), &y, &levels, c).unwrap();
        let point: Vec<f64> = d
            .alpha_plus
            .iter()
            .chain(&d.alpha_minus)
            .chain(&d.lambda)
            .copied()
            .collect();
        let objective = |v: &[f64]| {
            let ap = Array2::from_shape_vec((m, n), v[..m * n].to_vec()).unwrap();
            let am = Array2::from_shape_vec((m, n), v[m * n..2 * m * n].to_vec()).unwrap();
            let l = Array2::from_shape_vec((m - 1, n), v[2 * m * n..].to_vec()).unwrap();
            oracle::dual_objective(ap.view(), am.view(), l.view(), g.view(), &y)
        };
        let fd = oracle::central_difference(objective, &point, 1e-5);
        let analytic = grad
            .alpha_plus
            .iter()
            .chain(&grad.alpha_minus)
            .chain(&grad.lambda);
        for (a, f) in analytic.zip(&fd) {
            worst = worst.max((a - f).abs() / f.abs().max(1.0));
        }
    }
    verdict(
        worst <= 1e-5,
        format!(
            "20 points, max relative error {worst:.2e} (limit 1e-5), {:.1?}",
            start.elapsed()
        ),
    )
}

fn pinball_minimizer() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y: Vec<f64> = (0..101).map(|_| rng.random_range(0.0..1.0)).collect();
    let x = Array2::from_elem((101, 1), 1.0);
    let levels = QuantileLevels::deciles();
    let cfg = CsvqrConfig {
        c: 1e4,
        kernel: KernelSpec::Linear,
        tol: ORACLE_TOL,
        max_iter: ORACLE_MAX_ITER,
        clamp: false,
    };
    let model = CsvqrModel::fit(x.view(), &y, &levels, &cfg).unwrap();
    let q = model.predict_unclamped(array![[1.0]].view()).unwrap();
    let worst = levels
        .as_slice()
        .iter()
        .enumerate()
        .map(|(m, &tau)| (q[[0, m]] - oracle::sample_quantile(&y, tau)).abs())
        .fold(0.0, f64::max);
    verdict(
        worst <= 0.01,
        format!(
            "solver tol {ORACLE_TOL:e}*C, max |q_tau - sample quantile| = {worst:.2e} (limit 1/100), {:.1?}",
            start.elapsed()
        ),
    )
}

fn oracle_pinball(truth: &Array2<f64>, y: &[f64], levels: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        for (m, &tau) in levels.iter().enumerate() {
            total += oracle::pinball(yi - truth[[i, m]], tau);
        }
    }
    total / (y.len() * levels.len()) as f64
}

fn synthetic_quantitative(shared: &mut Shared) -> Outcome {
    let start = Instant::now();
    let process = HeteroscedasticProcess::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2014);
    let (x_train, y_train) = process.sample(1000, &mut rng);
    let (x_test, y_test) = process.sample(2000, &mut rng);
    let levels = QuantileLevels::deciles();
    let grid = HyperGrid {
        cs: vec![0.1, 1.0, 10.0, 100.0],
        sigmas: vec![0.1, 0.2, 0.5, 1.0],
    };
    let base = CsvqrConfig::default();
    let tuned = tune_hyperparameters(
        x_train.view(),
        &y_train,
        &grid,
        &levels,
        &base,
        DEFAULT_HOLDOUT_FRACTION,
    )
    .unwrap();
    let (c, sigma) = tuned.best;
    let cfg = CsvqrConfig {
        c,
        kernel: KernelSpec::rbf(sigma).unwrap(),
        ..base
    };
    let model = CsvqrModel::fit_scaled(x_train.view(), &y_train, &levels, &cfg).unwrap();
    shared.crossings.push((
        "tuned synthetic fit",
        1,
        crossings(&model.fitted_training()),
    ));

    let q = model.predict(x_test.view()).unwrap();
    let (score, _) = aggregate_qscore(q.view(), &y_test, levels.as_slice()).unwrap();
    let reference = oracle_pinball(
        &process.quantile_matrix(&x_test, levels.as_slice()),
        &y_test,
        levels.as_slice(),
    );
    let ratio = score / reference;
    let pi = &predict_intervals(q.view(), &levels, &[(0.1, 0.9)]).unwrap()[0];
    let ace80 = ace(picp(&pi.lower, &pi.upper, &y_test).unwrap(), pi.beta()).unwrap();

    // the 13-feature synthetic month through the full pipeline, for the crossing audit
    let records = process.records("2013-03".parse().unwrap(), "2013-06".parse().unwrap(), 1, 7);
    let june: YearMonth = "2013-06".parse().unwrap();
    let report = run_backtest(
        &records,
        &[Method::Csvqr],
        june,
        june,
        &BacktestConfig::default(),
    )
    .unwrap();
    let f = report.forecast(june, Method::Csvqr).unwrap();
    shared
        .crossings
        .push(("synthetic backtest", 1, f.training_crossings));

    let elapsed = start.elapsed();
    verdict(
        ratio <= 1.10 && ace80 <= 5.0 && elapsed < Duration::from_secs(600),
        format!(
            "C={c} sigma={sigma}: Q-score {score:.5} vs oracle {reference:.5} (ratio {ratio:.3}, limit 1.10), \
             ACE80 {ace80:.2} (limit 5) on 2000 points, {elapsed:.1?} (limit 10 min)"
        ),
    )
}

fn metric_values() -> Outcome {
    let checks = [
        ("pinball(2, 0.5)", pinball(2.0, 0.5).unwrap(), 1.0),
        ("pinball(-1, 0.9)", pinball(-1.0, 0.9).unwrap(), 0.1),
        ("pinball(0, 0.3)", pinball(0.0, 0.3).unwrap(), 0.0),
        (
            "qscore(0.5, 1.0, 0.8)",
            quantile_score(0.5, 1.0, 0.8).unwrap(),
            0.4,
        ),
        (
            "qscore(0.5, 0.5, 0.8)",
            quantile_score(0.5, 0.5, 0.8).unwrap(),
            0.0,
        ),
        (
            "picp(all inside)",
            picp(&[0.0, 0.0], &[1.0, 1.0], &[0.2, 0.9]).unwrap(),
            100.0,
        ),
        (
            "picp(half inside)",
            picp(&[0.0, 0.0], &[0.5, 0.5], &[0.2, 0.9]).unwrap(),
            50.0,
        ),
        ("ace(85, 0.2)", ace(85.0, 0.2).unwrap(), 5.0),
        ("ace(80, 0.2)", ace(80.0, 0.2).unwrap(), 0.0),
        ("ace(0, 0.2)", ace(0.0, 0.2).unwrap(), 80.0),
        (
            "aggregate_qscore(perfect)",
            aggregate_qscore(array![[0.3, 0.3]].view(), &[0.3], &[0.1, 0.9])
                .unwrap()
                .0,
            0.0,
        ),
    ];
    // exact for the integer-valued cases; the rest agree to the last bit of the decimal literal
    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > 1e-15)
        .map(|(name, got, want)| format!("{name} = {got}, expected {want}"))
        .collect();
    let exact_ace = ace(85.0, 0.2).unwrap() == 5.0;
    verdict(
        bad.is_empty() && exact_ace,
        if bad.is_empty() {
            format!(
                "{} hand values reproduced, ace(85.00, 0.2) = {:.2}",
                checks.len(),
                ace(85.0, 0.2).unwrap()
            )
        } else {
            bad.join("; ")
        },
    )
}

fn gefcom_reproduction() -> Outcome {
    let Ok(path) = std::env::var("CSVQR_GEFCOM_DATA") else {
        return Outcome::Skip("set CSVQR_GEFCOM_DATA to the GEFCom2014 wind CSV to run".into());
    };
    let start = Instant::now();
    let records = match load_csv(&path, &ColumnMapping::default()) {
        Ok(r) => select_zone(&r, 1),
        Err(e) => return Outcome::Fail(format!("cannot load {path}: {e}")),
    };
    let methods = Method::parse_list("csvqr,climatology,persistence,uniform").unwrap();
    let report = match run_backtest(
        &records,
        &methods,
        "2013-06".parse().unwrap(),
        "2013-11".parse().unwrap(),
        &BacktestConfig::default(),
    ) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let score = |m: Method| report.overall(m).map(|r| r.mean).unwrap_or(f64::NAN);
    let ours = score(Method::Csvqr);
    let others = [
        score(Method::Benchmark(BenchmarkKind::Climatology)),
        score(Method::Benchmark(BenchmarkKind::persistence())),
        score(Method::Benchmark(BenchmarkKind::Uniform)),
    ];
    let mean_ace = report.mean_ace(Method::Csvqr).unwrap_or(f64::NAN);
    // overall CSVQR Q-score reported for this data and period
    let published = 0.0556;
    let ok = others.iter().all(|&o| ours < o)
        && mean_ace < 6.0
        && (ours - published).abs() <= 0.5 * published
        && start.elapsed() <= Duration::from_secs(7200);
    verdict(
        ok,
        format!(
            "Q-score csvqr {ours:.4} vs climatology {:.4}, persistence {:.4}, uniform {:.4}; \
             mean ACE {mean_ace:.2} (limit 6); {:.1?}",
            others[0],
            others[1],
            others[2],
            start.elapsed()
        ),
    )
}

fn report_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_csvqr"))
            .args(["backtest", "--synthetic", "--seed", "7", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        if !status.status.success() {
            return Outcome::Fail(format!(
                "run {k} failed: {}",
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        runs.push(report_bytes(&out));
    }
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    verdict(
        runs[0] == runs[1] && names.len() == 3,
        format!(
            "files {names:?} identical across two runs, {:.1?}",
            start.elapsed()
        ),
    )
}

fn main() {
    let mut shared = Shared {
        crossings: Vec::new(),
    };
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 oracle equivalence", oracle_equivalence(&mut shared)));
    let c3 = gradient_check();
    let c4 = pinball_minimizer();
    let c5 = synthetic_quantitative(&mut shared);
    results.push(("2 non-crossing", non_crossing(&shared)));
    results.push(("3 gradient check", c3));
    results.push(("4 pinball minimizer", c4));
    results.push(("5 synthetic quantitative", c5));
    results.push(("6 metric values", metric_values()));
    results.push(("7 GEFCom2014 zone 1", gefcom_reproduction()));
    results.push(("8 determinism", determinism()));

    let mut failed = 0;
    for (name, outcome) in &results {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {name}: {detail}");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
