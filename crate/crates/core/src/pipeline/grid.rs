//! The multi-class and binary experiment grids, repeated over a seed list.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::published::{lookup, PUBLISHED};
use super::{
    AnnConfig, AnnRecipe, Care2VecConfig, Care2VecRecipe, EncoderCache, LeakageMode, TreeRecipe, PUBLISHED_ANN_NODES,
    PUBLISHED_DIMS,
};
use crate::dataset::{to_binary, Dataset, LabelScheme};
use crate::eval::{align, cross_validate, kfold_split, EvaluationReport, ModelRecipe};
use crate::exec::Execution;
use crate::neural::{Loss, TrainConfig};
use crate::tree::TreeParams;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Tree,
    Ann { nodes: usize, layers: usize },
    Care2Vec { dim: usize, nodes: usize, layers: usize },
}

impl Method {
    /// Human-readable row label.
    pub fn label(&self) -> String {
        match *self {
            Method::Tree => "Decision tree (Gini)".into(),
            Method::Ann { nodes, layers } => format!("ANN {nodes} nodes, {layers} hidden layer{}", plural(layers)),
            Method::Care2Vec { dim, nodes, layers } => {
                format!("Care2Vec {dim} dim, {nodes} nodes, {layers} hidden layer{}", plural(layers))
            }
        }
    }

    /// Short machine key, e.g. `care2vec-32-300x2`.
    pub fn key(&self) -> String {
        match *self {
            Method::Tree => "tree".into(),
            Method::Ann { nodes, layers } => format!("ann-{nodes}x{layers}"),
            Method::Care2Vec { dim, nodes, layers } => format!("care2vec-{dim}-{nodes}x{layers}"),
        }
    }
}

fn plural(n: usize) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Table {
    /// ANN on raw features, multi-class.
    T1,
    /// Care2Vec grid, multi-class.
    T2,
    /// Best-of summary plus the decision tree, multi-class.
    T3,
    /// Binary task.
    T4,
}

impl Table {
    pub const ALL: [Table; 4] = [Table::T1, Table::T2, Table::T3, Table::T4];

    pub fn file_stem(self) -> &'static str {
        match self {
            Table::T1 => "table1",
            Table::T2 => "table2",
            Table::T3 => "table3",
            Table::T4 => "table4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().trim_start_matches("table") {
            "1" => Some(Table::T1),
            "2" => Some(Table::T2),
            "3" => Some(Table::T3),
            "4" => Some(Table::T4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub table: Table,
    pub task: LabelScheme,
    pub method: Method,
}

/// Ordered list of grid cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub cells: Vec<GridCell>,
}

const TABLE2_ROWS: [(usize, usize); 4] = [(40, 1), (100, 1), (300, 1), (300, 2)];
const TABLE4_ANN_NODES: [usize; 3] = [40, 100, 300];

impl GridSpec {
    /// Every published cell: 5 ANN, 16 Care2Vec, 1 tree (multi-class) and
    /// 1 tree, 3 ANN, 4 Care2Vec (binary).
    pub fn published() -> Self {
        Self::tables(&Table::ALL)
    }

    pub fn tables(tables: &[Table]) -> Self {
        let mut cells = Vec::new();
        let multi = LabelScheme::MultiClass7;
        for &t in &Table::ALL {
            if !tables.contains(&t) {
                continue;
            }
            match t {
                Table::T1 => cells.extend(
                    PUBLISHED_ANN_NODES.iter().map(|&nodes| GridCell { table: t, task: multi, method: Method::Ann { nodes, layers: 1 } }),
                ),
                Table::T2 => {
                    for dim in PUBLISHED_DIMS {
                        for (nodes, layers) in TABLE2_ROWS {
                            cells.push(GridCell { table: t, task: multi, method: Method::Care2Vec { dim, nodes, layers } });
                        }
                    }
                }
                Table::T3 => cells.push(GridCell { table: t, task: multi, method: Method::Tree }),
                Table::T4 => {
                    let task = LabelScheme::Binary;
                    cells.push(GridCell { table: t, task, method: Method::Tree });
                    for nodes in TABLE4_ANN_NODES {
                        cells.push(GridCell { table: t, task, method: Method::Ann { nodes, layers: 1 } });
                    }
                    for dim in PUBLISHED_DIMS {
                        cells.push(GridCell { table: t, task, method: Method::Care2Vec { dim, nodes: 300, layers: 1 } });
                    }
                }
            }
        }
        Self { cells }
    }

    pub fn count(&self, table: Table) -> usize {
        self.cells.iter().filter(|c| c.table == table).count()
    }
}

/// Everything besides the cell that determines a report.
#[derive(Debug, Clone)]
pub struct ProtocolSettings {
    pub k: usize,
    pub seeds: Vec<u64>,
    pub leakage: LeakageMode,
    pub ae_train: TrainConfig,
    /// Loss is replaced per task.
    pub classifier_train: TrainConfig,
    pub tree: TreeParams,
    pub exec: Execution,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        Self {
            k: 10,
            seeds: vec![0],
            leakage: LeakageMode::PerFold,
            ae_train: TrainConfig::autoencoder(),
            classifier_train: TrainConfig::classifier(Loss::CategoricalCrossEntropy),
            tree: TreeParams::default(),
            exec: Execution::Sequential,
        }
    }
}

impl ProtocolSettings {
    /// Recipe for one cell. `cache` lets Care2Vec cells with equal
    /// autoencoder inputs share fitted encoders.
    pub fn recipe(&self, method: Method, task: LabelScheme, cache: Option<Arc<EncoderCache>>) -> Box<dyn ModelRecipe> {
        match method {
            Method::Tree => Box::new(TreeRecipe { params: self.tree }),
            Method::Ann { nodes, layers } => {
                let mut config = AnnConfig::new(nodes, layers, task);
                config.train = TrainConfig { loss: config.train.loss, ..self.classifier_train };
                Box::new(AnnRecipe { config })
            }
            Method::Care2Vec { dim, nodes, layers } => {
                let mut config = Care2VecConfig::new(dim, nodes, layers, task);
                config.ae_train = self.ae_train;
                config.dnn_train = TrainConfig { loss: config.dnn_train.loss, ..self.classifier_train };
                config.leakage = self.leakage;
                let recipe = Care2VecRecipe::new(config);
                Box::new(match cache {
                    Some(c) => recipe.with_cache(c),
                    None => recipe,
                })
            }
        }
    }

    pub fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("k".into(), self.k.to_string()),
            ("seeds".into(), self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")),
            ("leakage".into(), self.leakage.as_str().into()),
            ("ae_train".into(), super::train_label(&self.ae_train)),
            ("classifier_train".into(), super::train_label(&self.classifier_train)),
            ("tree".into(), format!("{} max_depth={:?} min_samples_split={}", self.tree.criterion.name(), self.tree.max_depth, self.tree.min_samples_split)),
            ("rng".into(), crate::numerics::RNG_ALGORITHM_ID.into()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub seed: u64,
    pub result: std::result::Result<EvaluationReport, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: GridCell,
    /// One entry per seed, in seed-list order.
    pub outcomes: Vec<CellOutcome>,
}

/// Per-cell statistics over seeds, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n_ok: usize,
    pub n_failed: usize,
    pub median_cv: Option<f64>,
    pub min_cv: Option<f64>,
    pub max_cv: Option<f64>,
    pub median_auc: Option<f64>,
    pub min_auc: Option<f64>,
    pub max_auc: Option<f64>,
}

/// Median (mean of the middle pair for even lengths); `None` for empty input.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

fn min_max(v: &[f64]) -> (Option<f64>, Option<f64>) {
    (v.iter().copied().reduce(f64::min), v.iter().copied().reduce(f64::max))
}

impl CellResult {
    pub fn reports(&self) -> impl Iterator<Item = &EvaluationReport> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok())
    }

    pub fn summary(&self) -> CellSummary {
        let cv: Vec<f64> = self.reports().map(|r| 100.0 * r.mean_cv_score).collect();
        let auc: Vec<f64> = self.reports().filter_map(|r| r.mean_auc).map(|a| 100.0 * a).collect();
        let (min_cv, max_cv) = min_max(&cv);
        let (min_auc, max_auc) = min_max(&auc);
        CellSummary {
            n_ok: cv.len(),
            n_failed: self.outcomes.len() - cv.len(),
            median_cv: median(&cv),
            min_cv,
            max_cv,
            median_auc: median(&auc),
            min_auc,
            max_auc,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub settings: Vec<(String, String)>,
    pub cells: Vec<CellResult>,
}

/// Runs every cell of `spec` once per seed. The fold assignment of a seed is
/// shared by all cells, so cells are compared on identical splits. Cell
/// failures are recorded and the remaining cells continue.
pub fn run_experiment_grid(dataset: &Dataset, spec: &GridSpec, settings: &ProtocolSettings) -> Result<GridResult> {
    if dataset.scheme() != LabelScheme::MultiClass7 {
        return Err(crate::Error::Config("the grid expects the multi-class dataset; the binary task is derived from it".into()));
    }
    if settings.seeds.is_empty() {
        return Err(crate::Error::Config("seed list is empty".into()));
    }
    let binary = to_binary(dataset)?;
    let folds = settings
        .seeds
        .iter()
        .map(|&s| kfold_split(dataset.n_rows(), settings.k, s))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let cache = Arc::new(EncoderCache::new());

    let n_seeds = settings.seeds.len();
    let outcomes = settings.exec.map(spec.cells.len() * n_seeds, |job| {
        let (cell, s) = (spec.cells[job / n_seeds], job % n_seeds);
        let data = match cell.task {
            LabelScheme::MultiClass7 => dataset,
            LabelScheme::Binary => &binary,
        };
        let recipe = settings.recipe(cell.method, cell.task, Some(cache.clone()));
        let result = cross_validate(recipe.as_ref(), data, &folds[s], Execution::Sequential).map_err(|e| e.to_string());
        CellOutcome { seed: settings.seeds[s], result }
    });

    let mut outcomes = outcomes.into_iter();
    let cells = spec
        .cells
        .iter()
        .map(|&cell| CellResult { cell, outcomes: outcomes.by_ref().take(n_seeds).collect() })
        .collect();
    Ok(GridResult { settings: settings.describe(), cells })
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.2}"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl GridResult {
    pub fn cell(&self, table: Table, method: Method) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.cell.table == table && c.cell.method == method)
    }

    pub fn n_failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.summary().n_ok == 0).count()
    }

    pub fn all_failed(&self) -> bool {
        !self.cells.is_empty() && self.n_failed_cells() == self.cells.len()
    }

    /// Every recorded failure as `table/method seed: message`.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.cells {
            for o in &c.outcomes {
                if let Err(e) = &o.result {
                    out.push(format!("{}/{} seed {}: {e}", c.cell.table.file_stem(), c.cell.method.key(), o.seed));
                }
            }
        }
        out
    }

    /// Cell of `table` with the highest median mean CV score (first on ties).
    pub fn best(&self, table: Table) -> Option<&CellResult> {
        let mut best: Option<(&CellResult, f64)> = None;
        for c in self.cells.iter().filter(|c| c.cell.table == table) {
            if let Some(m) = c.summary().median_cv {
                if best.is_none_or(|(_, b)| m > b) {
                    best = Some((c, m));
                }
            }
        }
        best.map(|(c, _)| c)
    }

    fn seeds(&self) -> Vec<u64> {
        self.cells.first().map(|c| c.outcomes.iter().map(|o| o.seed).collect()).unwrap_or_default()
    }

    fn header(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.settings {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }

    /// One row per (cell, seed) plus per-cell failure text.
    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push_str("table,task,method,seed,mean_cv,mean_auc,status\n");
        for c in &self.cells {
            for o in &c.outcomes {
                let (cv, auc, status) = match &o.result {
                    Ok(r) => (r.mean_cv_score.to_string(), fmt_opt(r.mean_auc), "ok".to_string()),
                    Err(e) => (String::new(), String::new(), format!("\"failed: {}\"", e.replace('"', "'"))),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{cv},{auc},{status}",
                    c.cell.table.file_stem(),
                    c.cell.task.as_str(),
                    c.cell.method.key(),
                    o.seed
                );
            }
        }
        out
    }

    /// Per-cell seed statistics (percent) with the published value.
    pub fn table_csv(&self, table: Table) -> String {
        let mut out = self.header();
        let seeds = self.seeds();
        let mut cols = vec!["method".to_string(), "task".into()];
        cols.extend(seeds.iter().map(|s| format!("seed_{s}")));
        cols.extend(["median_cv", "min_cv", "max_cv", "median_auc", "published_cv", "published_auc"].map(String::from));
        out.push_str(&cols.join(","));
        out.push('\n');
        for (label, c) in self.table_rows(table) {
            let s = c.map(CellResult::summary);
            let mut row = vec![format!("\"{label}\"")];
            row.push(c.map_or("", |c| c.cell.task.as_str()).into());
            for i in 0..seeds.len() {
                row.push(
                    c.and_then(|c| c.outcomes.get(i))
                        .and_then(|o| o.result.as_ref().ok())
                        .map_or_else(String::new, |r| (100.0 * r.mean_cv_score).to_string()),
                );
            }
            let s = s.as_ref();
            row.push(fmt_opt(s.and_then(|s| s.median_cv)));
            row.push(fmt_opt(s.and_then(|s| s.min_cv)));
            row.push(fmt_opt(s.and_then(|s| s.max_cv)));
            row.push(fmt_opt(s.and_then(|s| s.median_auc)));
            let (pcv, pauc) = c.map_or((None, None), published_pair);
            row.push(fmt_opt(pcv));
            row.push(fmt_opt(pauc));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Rows of a table; the summary table pulls the best ANN and Care2Vec cells.
    fn table_rows(&self, table: Table) -> Vec<(String, Option<&CellResult>)> {
        match table {
            Table::T3 => vec![
                ("Decision tree".into(), self.cell(Table::T3, Method::Tree)),
                ("ANN (best)".into(), self.best(Table::T1)),
                ("Care2Vec (best)".into(), self.best(Table::T2)),
            ],
            _ => self.cells.iter().filter(|c| c.cell.table == table).map(|c| (c.cell.method.label(), Some(c))).collect(),
        }
    }

    /// Aligned text version of one table, in percent.
    pub fn table_text(&self, table: Table) -> String {
        let seeds = self.seeds();
        let mut out = self.header().replace("# ", "");
        out.push('\n');
        let rows = self.table_rows(table);
        let mut header = vec!["Method".to_string()];
        if table == Table::T4 {
            header.extend((1..=self.k()).map(|f| format!("AUC F{f}")));
            header.extend(["Mean AUC", "Mean CV", "Pub AUC", "Pub CV"].map(String::from));
        } else {
            header.extend(["Mean CV", "min", "max", "Published"].map(String::from));
        }
        header.push("Config".into());
        let mut body = Vec::new();
        for (label, c) in rows {
            let s = c.map(CellResult::summary);
            let s = s.as_ref();
            let (pcv, pauc) = c.map_or((None, None), published_pair);
            let mut r = vec![label];
            if table == Table::T4 {
                // fold columns come from the first seed's report
                let first = c.and_then(|c| c.outcomes.first()).and_then(|o| o.result.as_ref().ok());
                for f in 0..self.k() {
                    let a = first.and_then(|r| r.fold_auc.get(f).copied().flatten());
                    r.push(first.map_or("n/a".into(), |_| a.map_or("undef".into(), |a| format!("{:.2}", 100.0 * a))));
                }
                r.push(fmt_pct(s.and_then(|s| s.median_auc)));
                r.push(fmt_pct(s.and_then(|s| s.median_cv)));
                r.push(fmt_pct(pauc));
                r.push(fmt_pct(pcv));
            } else {
                r.push(fmt_pct(s.and_then(|s| s.median_cv)));
                r.push(fmt_pct(s.and_then(|s| s.min_cv)));
                r.push(fmt_pct(s.and_then(|s| s.max_cv)));
                r.push(fmt_pct(pcv));
            }
            r.push(c.map_or(String::new(), |c| c.cell.method.key()));
            body.push(r);
        }
        out.push_str(&align(&header, &body));
        let _ = writeln!(
            out,
            "\nMean CV / Mean AUC: median over seeds {:?}; min/max give the spread.{}",
            seeds,
            if table == Table::T4 { " Fold AUC columns: first seed." } else { "" }
        );
        for f in self.failures() {
            let _ = writeln!(out, "failed: {f}");
        }
        out
    }

    fn k(&self) -> usize {
        self.settings.iter().find(|(k, _)| k == "k").and_then(|(_, v)| v.parse().ok()).unwrap_or(10)
    }

    /// Published value, obtained median and delta for every published cell that was run.
    pub fn comparison_csv(&self) -> String {
        let mut out = self.header();
        out.push_str("table,task,method,metric,published,obtained_median,min,max,delta,citation\n");
        for p in PUBLISHED {
            let table = match (p.task, p.method) {
                (LabelScheme::Binary, _) => Table::T4,
                (_, Method::Tree) => Table::T3,
                (_, Method::Ann { .. }) => Table::T1,
                (_, Method::Care2Vec { .. }) => Table::T2,
            };
            let Some(c) = self.cell(table, p.method) else { continue };
            let s = c.summary();
            let (obtained, lo, hi) = if p.metric == "mean_auc" {
                (s.median_auc, s.min_auc, s.max_auc)
            } else {
                (s.median_cv, s.min_cv, s.max_cv)
            };
            let delta = obtained.map(|o| o - p.value);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                table.file_stem(),
                p.task.as_str(),
                p.method.key(),
                p.metric,
                p.value,
                fmt_opt(obtained),
                fmt_opt(lo),
                fmt_opt(hi),
                fmt_opt(delta),
                p.citation
            );
        }
        out
    }
}

fn published_pair(c: &CellResult) -> (Option<f64>, Option<f64>) {
    (
        lookup(c.cell.task, c.cell.method, "mean_cv").map(|p| p.value),
        lookup(c.cell.task, c.cell.method, "mean_auc").map(|p| p.value),
    )
}
