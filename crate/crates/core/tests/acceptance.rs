//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1-6 need the real SCADI file (`SCADI_CSV`, default
//! `data/SCADI.csv` relative to the workspace root) and print FAIL with the
//! reason when it is absent. The process exits nonzero when a deterministic
//! criterion (7-13) fails; set `CARE2VEC_ACCEPTANCE_STRICT=1` to make every
//! FAIL line fatal.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use care2vec::commands::{cmd_gradcheck, cmd_run, gradcheck_options, MethodName, RunConfig};
use care2vec::dataset::{load_scadi, to_binary, Dataset, LabelScheme, ScadiSchema};
use care2vec::eval::{cross_validate, kfold_split, roc_auc, ConfigDescriptor, FittedModel, FoldPrediction, ModelRecipe};
use care2vec::exec::Execution;
use care2vec::neural::{predict, Activation, NetworkParams, NetworkSpec};
use care2vec::numerics::{Matrix, Rng};
use care2vec::pipeline::published::lookup;
use care2vec::pipeline::{
    fit_care2vec_with, run_experiment_grid, Care2VecConfig, CellResult, EncoderCache, GridSpec, LeakageMode, Method,
    ProtocolSettings, Table,
};
use care2vec::synthetic::{scadi_like, to_csv, SyntheticOptions};
use care2vec::tree::{best_split, fit_tree, predict_tree, SplitCriterion, TreeParams};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Line {
    id: &'static str,
    passed: bool,
    gating: bool,
    detail: String,
}

#[derive(Default)]
struct Suite {
    lines: Vec<Line>,
}

impl Suite {
    fn record(&mut self, id: &'static str, gating: bool, passed: bool, detail: String) {
        println!("{} [{id}] {detail}", if passed { "PASS" } else { "FAIL" });
        self.lines.push(Line { id, passed, gating, detail });
    }
}

fn data_path() -> PathBuf {
    match std::env::var_os("SCADI_CSV") {
        Some(p) => PathBuf::from(p),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).expect("workspace root").join("data/SCADI.csv"),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

/// Mean CV score and mean AUC (percent) of one method for each seed.
fn sweep(data: &Dataset, method: Method, task: LabelScheme) -> (Vec<f64>, Vec<f64>, Duration) {
    let data = match task {
        LabelScheme::MultiClass7 => data.clone(),
        LabelScheme::Binary => to_binary(data).expect("multi-class input"),
    };
    let settings = ProtocolSettings::default();
    let recipe = settings.recipe(method, task, None);
    let start = Instant::now();
    let (mut cv, mut auc) = (Vec::new(), Vec::new());
    for seed in SEEDS {
        let folds = kfold_split(data.n_rows(), 10, seed).expect("70 rows");
        let r = cross_validate(recipe.as_ref(), &data, &folds, Execution::from_jobs(0)).expect("fold fit");
        cv.push(100.0 * r.mean_cv_score);
        auc.extend(r.mean_auc.map(|a| 100.0 * a));
    }
    (cv, auc, start.elapsed())
}

fn median(v: &[f64]) -> f64 {
    care2vec::pipeline::median(v).unwrap_or(f64::NAN)
}

fn published(task: LabelScheme, method: Method, metric: &str) -> f64 {
    lookup(task, method, metric).expect("published value").value
}

#[allow(clippy::too_many_arguments)]
fn band_check(
    suite: &mut Suite,
    id: &'static str,
    what: &str,
    observed: &[f64],
    target: f64,
    band: f64,
    elapsed: Duration,
    limit: Option<Duration>,
) {
    let m = median(observed);
    let in_band = (m - target).abs() <= band;
    let fast = limit.is_none_or(|l| elapsed < l);
    let seeds: Vec<String> = observed.iter().map(|v| format!("{v:.2}")).collect();
    let limit_text = limit.map_or(String::new(), |l| format!(" (limit {})", secs(l)));
    suite.record(
        id,
        false,
        in_band && fast,
        format!(
            "{what}: median {m:.2}% vs published {target:.2}% (band +/-{band}), seeds [{}], runtime {}{limit_text}",
            seeds.join(", "),
            secs(elapsed),
        ),
    );
}

fn data_criteria(suite: &mut Suite) {
    let path = data_path();
    let data = match load_scadi(&path, &ScadiSchema::full()) {
        Ok(d) => d,
        Err(e) => {
            for id in ["1 tree multi", "2 ann-40 multi", "3 care2vec-32-300x2 multi", "4 care2vec-32-300x1 binary", "5 ann-40 binary", "6 ordering"] {
                suite.record(id, false, false, format!("SCADI data unavailable: {e}"));
            }
            return;
        }
    };
    let multi = LabelScheme::MultiClass7;
    let binary = LabelScheme::Binary;

    let (cv, _, t) = sweep(&data, Method::Tree, multi);
    band_check(suite, "1 tree multi", "decision tree mean CV", &cv, published(multi, Method::Tree, "mean_cv"), 10.0, t, Some(Duration::from_secs(30)));

    let ann = Method::Ann { nodes: 40, layers: 1 };
    let (cv, _, t) = sweep(&data, ann, multi);
    band_check(suite, "2 ann-40 multi", "ANN 40x1 mean CV", &cv, published(multi, ann, "mean_cv"), 10.0, t, Some(Duration::from_secs(300)));

    let best = Method::Care2Vec { dim: 32, nodes: 300, layers: 2 };
    let (cv, _, t) = sweep(&data, best, multi);
    band_check(suite, "3 care2vec-32-300x2 multi", "Care2Vec 32/300x2 mean CV", &cv, published(multi, best, "mean_cv"), 10.0, t, Some(Duration::from_secs(600)));

    let c2v = Method::Care2Vec { dim: 32, nodes: 300, layers: 1 };
    let (cv, auc, t) = sweep(&data, c2v, binary);
    band_check(suite, "4 care2vec-32-300x1 binary", "Care2Vec 32/300x1 mean AUC", &auc, published(binary, c2v, "mean_auc"), 8.0, t, None);
    println!(
        "     mean CV on the same runs: median {:.2}% (published {:.2}%)",
        median(&cv),
        published(binary, c2v, "mean_cv")
    );

    let (_, auc, t) = sweep(&data, ann, binary);
    band_check(suite, "5 ann-40 binary", "ANN 40x1 mean AUC", &auc, published(binary, ann, "mean_auc"), 8.0, t, None);

    ordering(suite, &data);
}

/// Care2Vec-best >= ANN-best >= tree on mean CV, counted per seed.
fn ordering(suite: &mut Suite, data: &Dataset) {
    let settings = ProtocolSettings { seeds: SEEDS.to_vec(), exec: Execution::from_jobs(0), ..ProtocolSettings::default() };
    let start = Instant::now();
    let grid = match run_experiment_grid(data, &GridSpec::tables(&[Table::T1, Table::T2, Table::T3]), &settings) {
        Ok(g) => g,
        Err(e) => return suite.record("6 ordering", false, false, format!("grid failed: {e}")),
    };
    let seed_cv = |c: &CellResult, i: usize| c.outcomes[i].result.as_ref().ok().map(|r| r.mean_cv_score);
    let best_of = |t: Table, i: usize| {
        grid.cells.iter().filter(|c| c.cell.table == t).filter_map(|c| seed_cv(c, i)).fold(f64::NEG_INFINITY, f64::max)
    };
    let mut held = 0;
    let mut per_seed = Vec::new();
    for (i, seed) in SEEDS.iter().enumerate() {
        let (c, a) = (best_of(Table::T2, i), best_of(Table::T1, i));
        let t = grid.cell(Table::T3, Method::Tree).and_then(|c| seed_cv(c, i)).unwrap_or(f64::NAN);
        let ok = c >= a && a >= t;
        held += usize::from(ok);
        per_seed.push(format!("seed {seed}: {:.2}/{:.2}/{:.2}{}", 100.0 * c, 100.0 * a, 100.0 * t, if ok { "" } else { " (violated)" }));
    }
    suite.record(
        "6 ordering",
        false,
        held * 2 > SEEDS.len(),
        format!(
            "Care2Vec-best >= ANN-best >= tree held in {held}/{} seeds [{}], runtime {}",
            SEEDS.len(),
            per_seed.join("; "),
            secs(start.elapsed())
        ),
    );
}

fn gradients(suite: &mut Suite) {
    let results = cmd_gradcheck(&gradcheck_options(0), Execution::from_jobs(0)).expect("gradcheck runs");
    let failed: Vec<String> =
        results.iter().filter(|(_, r)| !r.passed).map(|(t, r)| format!("{} {}", t.name, r.architecture)).collect();
    let worst = results.iter().map(|(_, r)| r.max_relative_error).fold(0.0, f64::max);
    let checked: usize = results.iter().map(|(_, r)| r.n_checked).sum();
    suite.record(
        "7 gradients",
        true,
        failed.is_empty(),
        format!(
            "{} networks, {checked} sampled entries, worst relative error {worst:.2e} (< 1e-4){}",
            results.len(),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    );
}

fn auc_oracle(suite: &mut Suite) {
    let mut rng = Rng::new(8);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 100 {
        let n = 2 + rng.below(9) as usize;
        let scores: Vec<f64> = (0..n).map(|_| rng.below(6) as f64 / 5.0).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.below(2) as usize).collect();
        let Ok(c) = roc_auc(&scores, &labels) else { continue };
        worst = worst.max((c.auc - common::pair_counting_auc(&scores, &labels)).abs());
        checked += 1;
    }
    suite.record("8 auc oracle", true, worst < 1e-9, format!("{checked} instances, max |trapezoid - pair counting| = {worst:.1e}"));
}

fn softmax_rows(suite: &mut Suite) {
    let mut rng = Rng::new(9);
    let mut worst = 0.0f64;
    let mut rows = 0;
    for _ in 0..50 {
        let width = 2 + rng.below(10) as usize;
        let batch = 1 + rng.below(16) as usize;
        let spec = NetworkSpec::chain(&[6, 12, width], Activation::Relu, Activation::Softmax).unwrap();
        let params = NetworkParams::init(&spec, &mut rng);
        let x = Matrix::from_vec(batch, 6, (0..batch * 6).map(|_| rng.uniform(-20.0, 20.0)).collect()).unwrap();
        let out = predict(&spec, &params, &x).unwrap();
        for r in 0..batch {
            worst = worst.max((out.row(r).iter().sum::<f64>() - 1.0).abs());
        }
        rows += batch;
    }
    suite.record("9 softmax", true, worst < 1e-9, format!("{rows} rows, max |sum - 1| = {worst:.1e}"));
}

fn fold_partition(suite: &mut Suite) {
    let mut ok = true;
    for seed in 0..20 {
        let f = kfold_split(70, 10, seed).unwrap();
        let mut seen = [0usize; 70];
        for fold in 0..10 {
            f.test_indices(fold).into_iter().for_each(|i| seen[i] += 1);
        }
        ok &= seen.iter().all(|&c| c == 1) && f.fold_sizes() == vec![7; 10];
    }
    suite.record("10 folds", true, ok, "n=70, k=10 over 20 seeds: every index in one fold, all folds hold 7".into());
}

fn tree_criteria(suite: &mut Suite) {
    let mut rng = Rng::new(11);
    let mut mismatches = 0;
    let n = 2000;
    for _ in 0..n {
        let (x, y) = common::small_instance(&mut rng);
        let got = best_split(&x, &y, SplitCriterion::Gini).map(|s| (s.feature_index, s.threshold, s.impurity_decrease));
        let same = match (got, common::brute_force_split(&x, &y)) {
            (None, None) => true,
            (Some(g), Some(w)) => g.0 == w.0 && g.1 == w.1 && (g.2 - w.2).abs() < 1e-12,
            _ => false,
        };
        mismatches += usize::from(!same);
    }
    suite.record("11a tree oracle", true, mismatches == 0, format!("{n} instances (<= 8 rows, <= 3 features), {mismatches} mismatches"));

    // SCADI-shaped distinct rows: labels follow class prototypes
    let mut fit = 0;
    for seed in 0..10 {
        let d = scadi_like(&SyntheticOptions::default(), seed);
        let t = fit_tree(d.features(), d.labels(), 7, &TreeParams::default()).unwrap();
        fit += usize::from(predict_tree(&t, d.features()).unwrap() == d.labels());
    }
    suite.record("11b tree fit, SCADI-shaped rows", true, fit == 10, format!("{fit}/10 synthetic 70x205 sets fit 100%"));

    // Arbitrary labels on distinct rows. A strictly positive gain is required
    // for every split, so XOR-like leaves can stay impure.
    let mut fit = 0;
    let trials = 200;
    let mut worst: f64 = 1.0;
    for _ in 0..trials {
        let (x, y) = common::distinct_rows(&mut rng, 24, 3, 4, 3);
        let t = fit_tree(&x, &y, 3, &TreeParams::default()).unwrap();
        let pred = predict_tree(&t, &x).unwrap();
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
        worst = worst.min(acc);
        fit += usize::from(acc == 1.0);
    }
    suite.record(
        "11c tree fit, random labels",
        false,
        fit == trials,
        format!("{fit}/{trials} random-label distinct-row sets fit 100% (worst {:.1}%); zero-gain splits are never taken", 100.0 * worst),
    );
}

struct Probe;

struct ProbeModel(u64);

impl FittedModel for ProbeModel {
    fn predict(&self, x: &Matrix) -> care2vec::Result<FoldPrediction> {
        Ok(FoldPrediction { labels: vec![0; x.rows()], scores: None })
    }
    fn fingerprint(&self) -> u64 {
        self.0
    }
}

impl ModelRecipe for Probe {
    fn descriptor(&self) -> ConfigDescriptor {
        ConfigDescriptor::new("probe")
    }
    fn fit(&self, train: &Dataset, held_out: Option<&Matrix>, seed: u64) -> care2vec::Result<Box<dyn FittedModel>> {
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed ^ u64::from(held_out.is_some());
        for v in train.features().as_slice().iter().map(|v| v.to_bits()).chain(train.labels().iter().map(|&l| l as u64)) {
            h = (h ^ v).wrapping_mul(0x100_0000_01b3);
        }
        Ok(Box::new(ProbeModel(h)))
    }
}

fn perturb(data: &Dataset, rows: &[usize]) -> Dataset {
    let mut x = data.features().clone();
    for &r in rows {
        for c in 0..x.cols() {
            let v = x.get(r, c);
            x.set(r, c, if c == 1 { v + 5.0 } else { 1.0 - v });
        }
    }
    Dataset::new(x, data.labels().to_vec(), data.scheme(), data.feature_names().to_vec()).unwrap()
}

fn leakage(suite: &mut Suite) {
    let data = scadi_like(&SyntheticOptions::default(), 21);
    let folds = kfold_split(70, 10, 21).unwrap();
    let base = cross_validate(&Probe, &data, &folds, Execution::Sequential).unwrap();
    let mut probe_ok = true;
    for f in 0..10 {
        let r = cross_validate(&Probe, &perturb(&data, &folds.test_indices(f)), &folds, Execution::Sequential).unwrap();
        probe_ok &= r.fold_fingerprints[f] == base.fold_fingerprints[f];
    }

    let mut cfg = Care2VecConfig::new(8, 40, 1, LabelScheme::MultiClass7);
    cfg.ae_train.epochs = 5;
    cfg.dnn_train.epochs = 5;
    let train = data.subset(&folds.train_indices(0));
    let held = data.subset(&folds.test_indices(0));
    let held_changed = perturb(&held, &(0..held.n_rows()).collect::<Vec<_>>());
    let cache = EncoderCache::new();
    let a = fit_care2vec_with(&cfg, &train, Some(held.features()), Some(&cache)).unwrap();
    let b = fit_care2vec_with(&cfg, &train, Some(held_changed.features()), None).unwrap();
    let ae_ok = a.encoder.params == b.encoder.params && a.preprocess == b.preprocess;
    let full = Care2VecConfig { leakage: LeakageMode::FullData, ..cfg };
    let c = fit_care2vec_with(&full, &train, Some(held.features()), None).unwrap();
    let d = fit_care2vec_with(&full, &train, Some(held_changed.features()), None).unwrap();
    suite.record(
        "12 leakage",
        true,
        probe_ok && ae_ok,
        format!(
            "probe fingerprints unchanged by held-out edits: {probe_ok}; per-fold autoencoder params invariant: {ae_ok} \
             (full-data mode changes them: {})",
            c.encoder.params != d.encoder.params
        ),
    );
}

fn determinism(suite: &mut Suite) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scadi.csv");
    std::fs::write(&path, to_csv(&scadi_like(&SyntheticOptions::default(), 31))).unwrap();
    let mut outputs = Vec::new();
    for (sub, method) in [("a", MethodName::Tree), ("b", MethodName::Tree), ("c", MethodName::Care2Vec), ("d", MethodName::Care2Vec)] {
        let mut cfg = RunConfig::new(&path, method);
        cfg.task = LabelScheme::Binary;
        cfg.seed = 13;
        cfg.out = dir.path().join(sub);
        cfg.train.epochs = Some(5);
        cfg.train.ae_epochs = Some(5);
        let out = cmd_run(&cfg).unwrap();
        outputs.push(out.files.iter().map(|f| std::fs::read(f).unwrap()).collect::<Vec<_>>());
    }
    let ok = outputs[0] == outputs[1] && outputs[2] == outputs[3];
    suite.record("13 determinism", true, ok, "two cmd_run invocations per method (tree, care2vec; binary, seed 13) wrote identical bytes".into());
}

fn main() {
    let strict = std::env::var("CARE2VEC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut suite = Suite::default();
    data_criteria(&mut suite);
    gradients(&mut suite);
    auc_oracle(&mut suite);
    softmax_rows(&mut suite);
    fold_partition(&mut suite);
    tree_criteria(&mut suite);
    leakage(&mut suite);
    determinism(&mut suite);

    let failed: Vec<&Line> = suite.lines.iter().filter(|l| !l.passed).collect();
    let fatal: Vec<&&Line> = failed.iter().filter(|l| l.gating || strict).collect();
    println!(
        "acceptance: {} passed, {} failed ({} fatal)",
        suite.lines.len() - failed.len(),
        failed.len(),
        fatal.len()
    );
    if !fatal.is_empty() {
        for l in fatal {
            eprintln!("fatal: [{}] {}", l.id, l.detail);
        }
        std::process::exit(1);
    }
}
