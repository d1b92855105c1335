//! k-fold cross-validation, accuracy, ROC/AUC and report assembly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, LabelScheme};
use crate::exec::Execution;
use crate::numerics::{derive_seed, Matrix, Rng, RNG_ALGORITHM_ID};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("k = {k} is invalid for {n} rows (need 2 <= k <= n)")]
    InvalidK { n: usize, k: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("ROC needs both classes; got {positives} positives and {negatives} negatives")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabel(usize),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Row-to-fold map produced by a seeded shuffle followed by contiguous chunking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    /// Held-out row indices of fold `f`, ascending.
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == f).collect()
    }

    /// Training row indices for fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != f).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// The first `n % k` folds get one extra row.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(EvalError::InvalidK { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let (base, extra) = (n / k, n % k);
    let mut fold_of = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[pos..pos + size] {
            fold_of[i] = f;
        }
        pos += size;
    }
    Ok(FoldAssignment { k, fold_of, seed })
}

pub fn accuracy(predicted: &[usize], actual: &[usize]) -> Result<f64> {
    if predicted.len() != actual.len() || predicted.is_empty() {
        return Err(EvalError::LengthMismatch(predicted.len(), actual.len()));
    }
    let hits = predicted.iter().zip(actual).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / actual.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve from a descending-score sweep, tied scores entering together;
/// AUC by the trapezoidal rule.
pub fn roc_auc(scores: &[f64], labels: &[usize]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(s));
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(EvalError::NonBinaryLabel(l));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::DegenerateLabels { positives, negatives });
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n, tp as f64 / p));
    }
    let auc = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
    Ok(RocCurve { points, auc })
}

/// Ordered description of how a report was produced. Rendered verbatim in
/// report headers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigDescriptor {
    pub method: String,
    pub params: Vec<(String, String)>,
}

impl ConfigDescriptor {
    pub fn new(method: impl Into<String>) -> Self {
        Self { method: method.into(), params: Vec::new() }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.params.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// `method(key=value, ...)`
    pub fn label(&self) -> String {
        let inner: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.method, inner.join(", "))
    }
}

/// Output of a fitted model on held-out rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPrediction {
    pub labels: Vec<usize>,
    /// Positive-class scores (binary task only).
    pub scores: Option<Vec<f64>>,
}

pub trait FittedModel: Send {
    fn predict(&self, x: &Matrix) -> crate::Result<FoldPrediction>;
    /// Digest of every fitted parameter; equal digests mean identical fits.
    fn fingerprint(&self) -> u64;
}

/// A self-contained fit procedure. Each call builds a fresh model; all
/// preprocessing happens inside `fit` from the training rows.
pub trait ModelRecipe: Sync {
    fn descriptor(&self) -> ConfigDescriptor;

    /// Whether `fit` should also receive the held-out feature rows (unlabeled).
    /// Only the full-data autoencoder mode asks for them.
    fn uses_held_out_features(&self) -> bool {
        false
    }

    fn fit(&self, train: &Dataset, held_out_features: Option<&Matrix>, seed: u64) -> crate::Result<Box<dyn FittedModel>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ConfigDescriptor,
    pub task: LabelScheme,
    pub k: usize,
    pub seed: u64,
    pub rng_algorithm: String,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracy: Vec<f64>,
    pub mean_cv_score: f64,
    /// Binary task only; `None` marks folds whose held-out rows hold one class.
    pub fold_auc: Vec<Option<f64>>,
    pub mean_auc: Option<f64>,
    pub fold_roc: Vec<Option<RocCurve>>,
    pub fold_fingerprints: Vec<u64>,
    pub annotations: Vec<String>,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct FoldOutcome {
    accuracy: f64,
    roc: Option<std::result::Result<RocCurve, EvalError>>,
    fingerprint: u64,
}

/// Fits a fresh model per fold on the other `k - 1` folds and scores it on the held-out fold.
pub fn cross_validate(
    recipe: &dyn ModelRecipe,
    dataset: &Dataset,
    folds: &FoldAssignment,
    exec: Execution,
) -> crate::Result<EvaluationReport> {
    if folds.fold_of.len() != dataset.n_rows() {
        return Err(EvalError::LengthMismatch(folds.fold_of.len(), dataset.n_rows()).into());
    }
    let binary = dataset.scheme() == LabelScheme::Binary;

    let run_fold = |f: usize| -> crate::Result<FoldOutcome> {
        let train = dataset.subset(&folds.train_indices(f));
        let test = dataset.subset(&folds.test_indices(f));
        let held_out = recipe.uses_held_out_features().then(|| test.features());
        let model = recipe.fit(&train, held_out, derive_seed(folds.seed, f as u64 + 1))?;
        let pred = model.predict(test.features())?;
        let acc = accuracy(&pred.labels, test.labels())?;
        let roc = if binary {
            let scores = pred.scores.as_deref().unwrap_or_default();
            Some(roc_auc(scores, test.labels()))
        } else {
            None
        };
        Ok(FoldOutcome { accuracy: acc, roc, fingerprint: model.fingerprint() })
    };

    let outcomes = exec.map(folds.k, |f| run_fold(f).map_err(|e| crate::Error::Fold { fold: f, source: Box::new(e) }));

    let mut fold_accuracy = Vec::with_capacity(folds.k);
    let mut fold_auc = Vec::new();
    let mut fold_roc = Vec::new();
    let mut fold_fingerprints = Vec::new();
    let mut annotations = Vec::new();
    for (f, outcome) in outcomes.into_iter().enumerate() {
        let o = outcome?;
        fold_accuracy.push(o.accuracy);
        fold_fingerprints.push(o.fingerprint);
        match o.roc {
            None => {}
            Some(Ok(curve)) => {
                fold_auc.push(Some(curve.auc));
                fold_roc.push(Some(curve));
            }
            Some(Err(EvalError::DegenerateLabels { positives, negatives })) => {
                annotations.push(format!(
                    "fold {}: AUC undefined ({positives} positives, {negatives} negatives held out); excluded from mean AUC",
                    f + 1
                ));
                fold_auc.push(None);
                fold_roc.push(None);
            }
            Some(Err(e)) => return Err(crate::Error::Fold { fold: f, source: Box::new(e.into()) }),
        }
    }
    let defined: Vec<f64> = fold_auc.iter().flatten().copied().collect();
    let mean_auc = (binary && !defined.is_empty()).then(|| mean(&defined));

    Ok(EvaluationReport {
        config: recipe.descriptor(),
        task: dataset.scheme(),
        k: folds.k,
        seed: folds.seed,
        rng_algorithm: RNG_ALGORITHM_ID.into(),
        fold_sizes: folds.fold_sizes(),
        mean_cv_score: mean(&fold_accuracy),
        fold_accuracy,
        fold_auc,
        mean_auc,
        fold_roc,
        fold_fingerprints,
        annotations,
    })
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

impl EvaluationReport {
    fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("method: {}", self.config.method),
            format!("config: {}", self.config.label()),
            format!("task: {}", self.task.as_str()),
            format!("k: {}", self.k),
            format!("seed: {}", self.seed),
            format!("rng: {}", self.rng_algorithm),
        ];
        for (k, v) in &self.config.params {
            lines.push(format!("param {k}: {v}"));
        }
        lines.push(format!("mean_cv_score: {}", self.mean_cv_score));
        if let Some(a) = self.mean_auc {
            lines.push(format!("mean_auc: {a}"));
        }
        for a in &self.annotations {
            lines.push(format!("note: {a}"));
        }
        lines
    }

    /// One row per fold, preceded by `#` comment lines carrying the full configuration.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for l in self.header_lines() {
            let _ = writeln!(out, "# {l}");
        }
        out.push_str("fold,n_test,accuracy,auc\n");
        for (f, acc) in self.fold_accuracy.iter().enumerate() {
            let auc = self.fold_auc.get(f).copied().flatten().map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", f + 1, self.fold_sizes[f], acc, auc);
        }
        out
    }

    /// ROC points of every fold, `fold,fpr,tpr`.
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fold,fpr,tpr\n");
        for (f, roc) in self.fold_roc.iter().enumerate() {
            if let Some(r) = roc {
                for (x, y) in &r.points {
                    let _ = writeln!(out, "{},{},{}", f + 1, x, y);
                }
            }
        }
        out
    }

    /// Aligned table: per-fold AUC (binary), mean AUC, per-fold accuracy and mean CV score, in percent.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        for l in self.header_lines() {
            let _ = writeln!(out, "{l}");
        }
        out.push('\n');
        let mut header = vec!["".to_string()];
        header.extend((1..=self.k).map(|f| format!("Fold {f}")));
        let mut rows = Vec::new();
        if self.task == LabelScheme::Binary {
            header.push("Mean AUC (%)".into());
            let mut r = vec!["AUC (%)".to_string()];
            r.extend(self.fold_auc.iter().map(|a| a.map_or("undef".into(), pct)));
            r.push(self.mean_auc.map_or("undef".into(), pct));
            rows.push(r);
        }
        header.push("Mean CV score (%)".into());
        let mut r = vec!["Accuracy (%)".to_string()];
        r.extend(self.fold_accuracy.iter().map(|&a| pct(a)));
        if self.task == LabelScheme::Binary {
            r.push(String::new());
        }
        r.push(pct(self.mean_cv_score));
        rows.push(r);
        out.push_str(&align(&header, &rows));
        out
    }
}

/// Right-aligned columns separated by two spaces.
pub fn align(header: &[String], rows: &[Vec<String>]) -> String {
    let n = header.len();
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(n) {
            widths[i] = widths[i].max(c.len());
        }
    }
    let fmt_row = |r: &[String]| {
        let cells: Vec<String> = (0..n)
            .map(|i| {
                let c = r.get(i).map(String::as_str).unwrap_or("");
                if i == 0 {
                    format!("{c:<w$}", w = widths[i])
                } else {
                    format!("{c:>w$}", w = widths[i])
                }
            })
            .collect();
        cells.join("  ").trim_end().to_string()
    };
    let mut out = fmt_row(header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (n - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&fmt_row(r));
        out.push('\n');
    }
    out
}
