//! Acceptance suite: one line per criterion, pass or fail, then a nonzero
//! exit if anything failed. Tolerances and time budgets are pinned below.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use kanfraud::data::{self, BalanceRule, Dataset, DEFAULT_CAP, DEFAULT_FRACTIONS};
use kanfraud::decision::{self, quick_decision};
use kanfraud::metrics::{self, ConfusionCounts, MetricsReport};
use kanfraud::pca::pca_fit;
use kanfraud::seed::{self, stage_seed, Stage};
use kanfraud::spline::make_knots;
use kanfraud::tuner::{self, EstimateMode, GaConfig, IntRange, SearchSpace};
use kanfraud::{KanConfig, KanModel};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const PARTITION_TOL: f64 = 1e-9;
const BASIS_ORACLE_TOL: f64 = 1e-12;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_PASS_FRACTION: f64 = 0.99;
const FD_STEP: f64 = 1e-5;
const LEARNING_F1: f64 = 0.90;
const LEARNING_MARGIN: f64 = 0.05;
const DECISION_THRESHOLD: f64 = 0.9;
const GA_RATIO: f64 = 0.9;
const AUC_TOL: f64 = 1e-12;
const PCA_TOL: f64 = 1e-8;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn heuristic_fidelity() -> Outcome {
    let table = [(30, 15), (51, 25), (27, 13), (35, 17), (50, 25)];
    for (dim, mid) in table {
        let c = tuner::heuristic_config(dim).map_err(|e| e.to_string())?;
        ensure(c.width == vec![dim, mid, 1] && c.k == 15 && c.grid == 5, || {
            format!("input {dim}: got {:?} k {} grid {}", c.width, c.k, c.grid)
        })?;
    }
    Ok("5/5 pyramid configurations match".into())
}

fn grid_count() -> Outcome {
    let n = tuner::enumerate_grid(&SearchSpace::default()).len();
    ensure(n == 14_112, || format!("{n} genomes"))?;
    Ok(format!("{n} genomes"))
}

fn estimator_fidelity() -> Outcome {
    let r = tuner::estimate_search_time(14.0, 105.0, 14_112, EstimateMode::Rounded).map_err(|e| e.to_string())?;
    let e = tuner::estimate_search_time(14.0, 105.0, 14_112, EstimateMode::Exact).map_err(|e| e.to_string())?;
    ensure(r.total_s == 846_720.0 && r.total_h == 235.2 && e.total_s == 839_664.0, || {
        format!("rounded {} s / {} h, exact {} s", r.total_s, r.total_h, e.total_s)
    })?;
    Ok(format!("rounded {} s = {} h, exact {} s", r.total_s, r.total_h, e.total_s))
}

/// Full-table Cox-de Boor over the whole knot vector, knots rebuilt from the
/// uniform rule with the domain ends pinned exactly. Half-open intervals,
/// except the domain's right end belongs to the last domain interval.
fn oracle_basis(lo: f64, hi: f64, grid: usize, degree: usize, t: f64) -> Vec<f64> {
    let h = (hi - lo) / grid as f64;
    let m = grid + 2 * degree + 1;
    let mut u: Vec<f64> = (0..m).map(|i| lo + (i as f64 - degree as f64) * h).collect();
    u[degree + grid] = hi;
    let mut n: Vec<f64> = (0..m - 1)
        .map(|i| {
            let inside = if t == hi { i == degree + grid - 1 } else { u[i] <= t && t < u[i + 1] };
            f64::from(u8::from(inside))
        })
        .collect();
    for p in 1..=degree {
        n = (0..m - 1 - p)
            .map(|i| {
                let a = if u[i + p] > u[i] { (t - u[i]) / (u[i + p] - u[i]) * n[i] } else { 0.0 };
                let b = if u[i + p + 1] > u[i + 1] {
                    (u[i + p + 1] - t) / (u[i + p + 1] - u[i + 1]) * n[i + 1]
                } else {
                    0.0
                };
                a + b
            })
            .collect();
    }
    n
}

fn spline_correctness() -> Outcome {
    let mut rng = seed::rng(2024);
    let mut worst_sum = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for s in 0..1000 {
        let grid = rng.random_range(1..=30);
        let degree = rng.random_range(1..=20);
        let lo = rng.random_range(-5.0..5.0);
        let hi = lo + rng.random_range(0.1..10.0);
        let t = match s % 100 {
            0 => lo,
            1 => hi,
            _ => rng.random_range(lo..=hi),
        };
        let kv = make_knots(lo, hi, grid, degree).map_err(|e| e.to_string())?;
        let b = kv.basis_values(t).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((b.iter().sum::<f64>() - 1.0).abs());
        let o = oracle_basis(lo, hi, grid, degree, t);
        ensure(o.len() == b.len(), || format!("basis length {} vs oracle {}", b.len(), o.len()))?;
        for (x, y) in b.iter().zip(&o) {
            worst_oracle = worst_oracle.max((x - y).abs());
        }
    }
    ensure(worst_sum <= PARTITION_TOL && worst_oracle <= BASIS_ORACLE_TOL, || {
        format!("partition error {worst_sum:e}, oracle error {worst_oracle:e}")
    })?;
    Ok(format!("max partition error {worst_sum:.1e}, max oracle error {worst_oracle:.1e}"))
}

fn gradient_check_network(width: Vec<usize>, seed_value: u64) -> Result<(usize, usize), String> {
    let mut config = KanConfig::new(width.clone(), 3, 5);
    config.seed = seed_value;
    let mut model = KanModel::new(config).map_err(|e| e.to_string())?;
    let base = model.params();
    let mut rng = seed::rng(seed_value ^ 0xFD);
    let (mut good, mut total) = (0, 0);
    for _ in 0..20 {
        let x: Vec<f64> = (0..width[0]).map(|_| rng.random_range(-0.95..0.95)).collect();
        let y = u8::from(rng.random_bool(0.5));
        let row = Dataset::from_rows(vec![x.clone()], vec![y]).map_err(|e| e.to_string())?;
        model.set_params(&base).map_err(|e| e.to_string())?;
        let analytic = model.backward(&x, y).map_err(|e| e.to_string())?.flatten();
        for (i, &a) in analytic.iter().enumerate() {
            let mut p = base.clone();
            p[i] = base[i] + FD_STEP;
            model.set_params(&p).map_err(|e| e.to_string())?;
            let up = model.mean_loss(&row).map_err(|e| e.to_string())?;
            p[i] = base[i] - FD_STEP;
            model.set_params(&p).map_err(|e| e.to_string())?;
            let down = model.mean_loss(&row).map_err(|e| e.to_string())?;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let scale = a.abs().max(numeric.abs());
            let ok = scale < 1e-9 || (a - numeric).abs() / scale <= GRAD_REL_TOL;
            good += usize::from(ok);
            total += 1;
        }
    }
    Ok((good, total))
}

fn gradient_correctness() -> Outcome {
    let mut parts = Vec::new();
    for (width, s) in [(vec![3, 2, 1], 11), (vec![5, 3, 1], 12)] {
        let (good, total) = gradient_check_network(width.clone(), s)?;
        let frac = good as f64 / total as f64;
        ensure(frac >= GRAD_PASS_FRACTION, || format!("{width:?}: {good}/{total} within tolerance"))?;
        parts.push(format!("{width:?} {good}/{total}"));
    }
    Ok(parts.join(", "))
}

fn learning_capability() -> Outcome {
    let master = 7;
    let raw = common::spline_dataset(1000, master);
    let prepared = data::prepare(
        &raw,
        DEFAULT_CAP,
        DEFAULT_FRACTIONS,
        stage_seed(master, Stage::Balance),
        stage_seed(master, Stage::Split),
    )
    .map_err(|e| e.to_string())?;
    let mut config = tuner::heuristic_config(prepared.split.n_features()).map_err(|e| e.to_string())?;
    config.seed = stage_seed(master, Stage::ModelInit);
    let mut model = KanModel::new(config).map_err(|e| e.to_string())?;
    model.train(&prepared.split.train, &prepared.split.valid).map_err(|e| e.to_string())?;
    let kan = model.evaluate(&prepared.split.test).map_err(|e| e.to_string())?.f1_or_zero();
    let base = metrics::logistic_baseline(&prepared.split, stage_seed(master, Stage::Baseline))
        .map_err(|e| e.to_string())?
        .f1_or_zero();
    let detail = format!("KAN test F1 {kan:.4}, logistic F1 {base:.4}");
    ensure(kan >= LEARNING_F1 && kan - base >= LEARNING_MARGIN, || detail.clone())?;
    Ok(detail)
}

fn decision_discrimination() -> Outcome {
    let mut scores = Vec::new();
    for s in 0..5u64 {
        let raw = common::spline_dataset(1000, 100 + s);
        let real = quick_decision(&raw, &decision::DEFAULT_GRIDS, DECISION_THRESHOLD, s).map_err(|e| e.to_string())?;
        let null = quick_decision(&common::shuffled_labels(&raw, 500 + s), &decision::DEFAULT_GRIDS, DECISION_THRESHOLD, s)
            .map_err(|e| e.to_string())?;
        ensure(real.report.suitable && !null.report.suitable, || {
            format!("seed {s}: real {:.4}, shuffled {:.4}", real.report.best_score, null.report.best_score)
        })?;
        scores.push(format!("{:.3}/{:.3}", real.report.best_score, null.report.best_score));
    }
    Ok(format!("real/shuffled scores {}", scores.join(" ")))
}

fn ga_vs_oracle() -> Outcome {
    let master = 3;
    let raw = common::spline_dataset(200, master);
    let prepared = data::prepare(
        &raw,
        DEFAULT_CAP,
        DEFAULT_FRACTIONS,
        stage_seed(master, Stage::Balance),
        stage_seed(master, Stage::Split),
    )
    .map_err(|e| e.to_string())?;
    let space = SearchSpace {
        width2: IntRange::new(2, 4),
        k: IntRange::new(2, 4),
        grid: IntRange::new(3, 5),
    };
    let mut base = KanConfig::new(vec![2, 1], 3, 3);
    base.seed = stage_seed(master, Stage::ModelInit);
    let grid = tuner::grid_search(&space, &base, &prepared.split, None).map_err(|e| e.to_string())?;
    let ga = GaConfig {
        seed: stage_seed(master, Stage::Search),
        ..GaConfig::default()
    };
    let outcome = tuner::ga_search(&space, &ga, &base, &prepared.split).map_err(|e| e.to_string())?;
    let oracle = grid[0].fitness();
    let found = outcome.best.fitness();
    let detail = format!("GA best F1 {found:.4}, exhaustive best {oracle:.4} over {} genomes", grid.len());
    ensure(grid.len() == 27 && found >= GA_RATIO * oracle, || detail.clone())?;
    Ok(detail)
}

fn pair_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn metrics_oracle() -> Outcome {
    let mut rng = seed::rng(99);
    let mut worst = 0.0f64;
    for set in 0..50 {
        let n = rng.random_range(2..300);
        let levels = if set % 3 == 0 { 7 } else { 1_000_000 };
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / f64::from(levels)).collect();
        let got = metrics::auc_roc(&scores, &labels).ok_or("AUC undefined on a two-class set")?;
        worst = worst.max((got - pair_auc(&scores, &labels)).abs());
    }
    ensure(worst <= AUC_TOL, || format!("AUC error {worst:e}"))?;

    // (tp, fp, tn, fn) -> precision, recall, f1, accuracy, fpr, tnr, by hand.
    type Case = ((u64, u64, u64, u64), [Option<f64>; 4], f64);
    let cases: [Case; 10] = [
        ((9, 1, 9, 1), [Some(0.9), Some(0.9), Some(0.9), Some(0.1)], 0.9),
        ((5, 0, 5, 0), [Some(1.0), Some(1.0), Some(1.0), Some(0.0)], 1.0),
        ((0, 0, 10, 10), [None, Some(0.0), Some(0.0), Some(0.0)], 0.5),
        ((10, 10, 0, 0), [Some(0.5), Some(1.0), Some(2.0 / 3.0), Some(1.0)], 0.5),
        ((3, 1, 4, 2), [Some(0.75), Some(0.6), Some(6.0 / 9.0), Some(0.2)], 0.7),
        ((1, 3, 5, 1), [Some(0.25), Some(0.5), Some(2.0 / 6.0), Some(3.0 / 8.0)], 0.6),
        ((0, 4, 6, 0), [Some(0.0), None, Some(0.0), Some(0.4)], 0.6),
        ((7, 2, 0, 1), [Some(7.0 / 9.0), Some(7.0 / 8.0), Some(14.0 / 17.0), Some(1.0)], 0.7),
        ((2, 2, 2, 2), [Some(0.5), Some(0.5), Some(0.5), Some(0.5)], 0.5),
        ((20, 5, 70, 5), [Some(0.8), Some(0.8), Some(0.8), Some(5.0 / 75.0)], 0.9),
    ];
    for ((tp, fp, tn, fn_), [precision, recall, f1, fpr], accuracy) in cases {
        let r = MetricsReport::from_counts(ConfusionCounts { tp, fp, tn, fn_ });
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-15,
            (None, None) => true,
            _ => false,
        };
        let tnr = fpr.map(|f| 1.0 - f);
        ensure(
            close(r.precision, precision)
                && close(r.recall, recall)
                && close(r.tpr, recall)
                && close(r.f1, f1)
                && close(r.fpr, fpr)
                && close(r.tnr, tnr)
                && (r.accuracy - accuracy).abs() < 1e-15,
            || format!("counts {tp}/{fp}/{tn}/{fn_}: {r:?}"),
        )?;
    }
    Ok(format!("50 AUC sets (max error {worst:.1e}), 10 hand-count cases"))
}

fn pca_oracle() -> Outcome {
    let mut rng = seed::rng(4242);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = rng.random_range(5..=20);
        let n = 4 * d + 30;
        let mix: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                (0..d).map(|j| (0..d).map(|i| z[i] * mix[i][j]).sum()).collect()
            })
            .collect();
        let model = pca_fit(&rows).map_err(|e| e.to_string())?;
        let x = nalgebra::DMatrix::from_fn(n, d, |r, c| rows[r][c]);
        let centered = nalgebra::DMatrix::from_fn(n, d, |r, c| x[(r, c)] - x.column(c).mean());
        let cov = centered.transpose() * &centered / (n - 1) as f64;
        let eig = nalgebra::SymmetricEigen::new(cov.clone());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        for c in 0..2 {
            let mut v: Vec<f64> = eig.eigenvectors.column(order[c]).iter().copied().collect();
            let lead = (0..d).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            worst = worst.max((model.explained_variance[c] - eig.eigenvalues[order[c]]).abs());
            for j in 0..d {
                worst = worst.max((model.components[c][j] - v[j]).abs());
            }
        }
        let column_variance: f64 = (0..d).map(|i| cov[(i, i)]).sum();
        worst = worst.max((eig.eigenvalues.sum() - column_variance).abs());
        worst = worst.max((model.total_variance - column_variance).abs());
    }
    ensure(worst <= PCA_TOL, || format!("max deviation {worst:e}"))?;
    Ok(format!("20 datasets, max deviation {worst:.1e}"))
}

fn run_cli(args: &[&str]) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_kanfraud"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    out.status.code().ok_or_else(|| "terminated by signal".to_string())
}

fn artifacts(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if name == "manifest.json" || name == "trial_timings.csv" {
            continue;
        }
        files.insert(PathBuf::from(name), std::fs::read(&path).unwrap());
    }
    files
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = tmp.path().join("fixture.csv");
    common::write_csv(&common::spline_dataset(300, 21), &input);
    let tuner_cfg = tmp.path().join("tuner.toml");
    std::fs::write(
        &tuner_cfg,
        "version = 1\n[space]\nwidth2 = { lo = 2, hi = 3 }\nk = { lo = 2, hi = 3 }\ngrid = { lo = 3, hi = 4 }\n\
         [ga]\npopulation = 4\ngenerations = 2\ncxpb = 0.5\nmutpb = 0.2\ntournament_size = 3\nseed = 0\n",
    )
    .map_err(|e| e.to_string())?;
    let input = input.to_str().unwrap();
    let tuner_cfg = tuner_cfg.to_str().unwrap();

    let mut compared = 0;
    for (name, extra) in [
        ("assess", vec!["assess"]),
        ("tune", vec!["tune", "--mode", "ga", "--tuner-config", tuner_cfg, "--epochs", "20"]),
        ("train", vec!["train", "--epochs", "30"]),
    ] {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{name}-{rep}"));
            let mut args = extra.clone();
            args.extend(["--input", input, "--seed", "5", "--out-dir", out.to_str().unwrap()]);
            let code = run_cli(&args)?;
            ensure(code == 0 || (name == "assess" && code == 10), || format!("{name} exited {code}"))?;
            runs.push(artifacts(&out));
        }
        ensure(runs[0] == runs[1], || format!("{name} artifacts differ"))?;
        compared += runs[0].len();
    }
    let mut evals = Vec::new();
    for rep in 0..2 {
        let model = tmp.path().join(format!("train-{rep}/model.json"));
        let out = tmp.path().join(format!("evaluate-{rep}"));
        let code = run_cli(&[
            "evaluate",
            "--input",
            input,
            "--seed",
            "5",
            "--model",
            model.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ])?;
        ensure(code == 0, || format!("evaluate exited {code}"))?;
        evals.push(artifacts(&out));
    }
    ensure(evals[0] == evals[1], || "evaluate artifacts differ".into())?;
    compared += evals[0].len();
    Ok(format!("{compared} artifacts byte-identical across reruns"))
}

fn balancing_protocol() -> Outcome {
    let fixture = |pos: usize, neg: usize| {
        let labels: Vec<u8> = (0..pos + neg).map(|i| u8::from(i < pos)).collect();
        let features = (0..pos + neg).map(|i| vec![i as f64]).collect();
        Dataset::from_rows(features, labels).unwrap()
    };
    let cases = [
        ((9_000, 300_000), (7_500, BalanceRule::Cap(7_500))),
        ((97, 200_000), (97, BalanceRule::MatchMinority)),
        ((50, 50), (50, BalanceRule::MatchMinority)),
    ];
    for ((pos, neg), (keep, rule)) in cases {
        let (balanced, report) = data::balance(&fixture(pos, neg), DEFAULT_CAP, 1).map_err(|e| e.to_string())?;
        ensure(
            balanced.class_counts() == (keep, keep)
                && report.kept_counts.fraud == keep
                && report.kept_counts.nonfraud == keep
                && report.original_counts.fraud == pos
                && report.original_counts.nonfraud == neg
                && report.rule_applied == rule,
            || format!("{pos}/{neg}: {report:?}"),
        )?;
    }
    Ok("7500/7500 cap-7500, 97/97 match-minority, 50/50 match-minority".into())
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 12] = [
        ("heuristic fidelity", Duration::from_millis(1), heuristic_fidelity),
        ("grid-count fidelity", Duration::from_millis(10), grid_count),
        ("estimator fidelity", Duration::from_millis(1), estimator_fidelity),
        ("spline correctness", Duration::from_secs(5), spline_correctness),
        ("gradient correctness", Duration::from_secs(30), gradient_correctness),
        ("learning capability", Duration::from_secs(300), learning_capability),
        ("decision-rule discrimination", Duration::from_secs(120), decision_discrimination),
        ("GA vs exhaustive oracle", Duration::from_secs(600), ga_vs_oracle),
        ("metrics oracle", Duration::from_secs(5), metrics_oracle),
        ("PCA oracle", Duration::from_secs(10), pca_oracle),
        ("CLI determinism", Duration::from_secs(600), cli_determinism),
        ("balancing protocol", Duration::from_secs(1), balancing_protocol),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, budget, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let (status, detail) = match result {
            Ok(d) if elapsed <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {elapsed:.2?}, budget {budget:?}")),
            Err(d) => ("FAIL", d),
        };
        failures += usize::from(status == "FAIL");
        println!("[{status}] {name}: {detail} ({elapsed:.2?})");
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
