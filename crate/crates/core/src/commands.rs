//! Command implementations behind the `care2vec` binary. Each returns what it
//! wrote so tests can drive them without a subprocess.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dataset::{load_scadi, to_binary, Dataset, LabelScheme, ScadiSchema};
use crate::eval::{cross_validate, kfold_split, EvaluationReport};
use crate::exec::Execution;
use crate::neural::{gradient_check, GradCheckOptions, GradCheckReport, Loss, NetworkSpec, TrainConfig};
use crate::pipeline::{
    classifier_spec, run_experiment_grid, GridResult, GridSpec, LeakageMode, Method, ProtocolSettings, Table,
    PUBLISHED_ANN_NODES, PUBLISHED_DIMS, PUBLISHED_DNN_LAYERS, PUBLISHED_DNN_NODES,
};
use crate::tree::{SplitCriterion, TreeParams};
use crate::{Error, Result};

/// Overrides the default output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "CARE2VEC_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Ok(path)
}

pub fn load(path: &Path) -> Result<Dataset> {
    Ok(load_scadi(path, &ScadiSchema::default())?)
}

/// `"70 rows, 205 features, classes: 2/7/1/12/3/29/16"`.
pub fn cmd_validate(path: &Path) -> Result<String> {
    let d = load(path)?;
    let hist: Vec<String> = d.class_counts().iter().map(usize::to_string).collect();
    Ok(format!("{} rows, {} features, classes: {}", d.n_rows(), d.n_features(), hist.join("/")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodName {
    Tree,
    Ann,
    Care2Vec,
}

impl MethodName {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tree" | "dt" | "decision-tree" => Some(MethodName::Tree),
            "ann" => Some(MethodName::Ann),
            "care2vec" => Some(MethodName::Care2Vec),
            _ => None,
        }
    }
}

/// Training overrides shared by `run` and `reproduce`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub ae_epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
}

impl TrainOverrides {
    fn apply(&self, mut c: TrainConfig, epochs: Option<usize>) -> TrainConfig {
        if let Some(e) = epochs {
            c.epochs = e;
        }
        if let Some(lr) = self.learning_rate {
            c.learning_rate = lr;
        }
        if let Some(b) = self.batch_size {
            c.batch_size = b;
        }
        c
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == Some(0) || self.ae_epochs == Some(0) {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("learning rate {lr} must be positive")));
            }
        }
        Ok(())
    }

    fn settings(&self, k: usize, seeds: Vec<u64>, leakage: LeakageMode, tree: TreeParams, exec: Execution) -> ProtocolSettings {
        let base = ProtocolSettings::default();
        ProtocolSettings {
            k,
            seeds,
            leakage,
            ae_train: self.apply(base.ae_train, self.ae_epochs),
            classifier_train: self.apply(base.classifier_train, self.epochs),
            tree,
            exec,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub method: MethodName,
    pub dim: Option<usize>,
    pub nodes: Option<usize>,
    pub layers: Option<usize>,
    pub task: LabelScheme,
    pub k: usize,
    pub seed: u64,
    pub leakage: LeakageMode,
    pub criterion: SplitCriterion,
    pub max_depth: Option<usize>,
    pub extended: bool,
    pub out: PathBuf,
    pub jobs: usize,
    pub train: TrainOverrides,
}

impl RunConfig {
    pub fn new(data: impl Into<PathBuf>, method: MethodName) -> Self {
        Self {
            data: data.into(),
            method,
            dim: None,
            nodes: None,
            layers: None,
            task: LabelScheme::MultiClass7,
            k: 10,
            seed: 0,
            leakage: LeakageMode::PerFold,
            criterion: SplitCriterion::Gini,
            max_depth: None,
            extended: false,
            out: PathBuf::from(DEFAULT_OUT_DIR),
            jobs: 1,
            train: TrainOverrides::default(),
        }
    }

    /// Checks the flags against the method before any data is read.
    pub fn method(&self) -> Result<Method> {
        self.train.validate()?;
        if self.k < 2 {
            return Err(Error::Config(format!("k = {} must be at least 2", self.k)));
        }
        let reject = |flag: &str| Err(Error::Config(format!("--{flag} does not apply to method {:?}", self.method)));
        match self.method {
            MethodName::Tree => {
                if self.dim.is_some() {
                    return reject("dim");
                }
                if self.nodes.is_some() {
                    return reject("nodes");
                }
                if self.layers.is_some() {
                    return reject("layers");
                }
                Ok(Method::Tree)
            }
            MethodName::Ann => {
                if self.dim.is_some() {
                    return reject("dim");
                }
                let nodes = self.nodes.unwrap_or(40);
                let layers = self.layers.unwrap_or(1);
                if !self.extended && (!PUBLISHED_ANN_NODES.contains(&nodes) || layers != 1) {
                    return Err(Error::Config(format!(
                        "ANN {nodes} nodes x {layers} layers is outside the published grid (nodes {PUBLISHED_ANN_NODES:?}, 1 layer); pass --extended"
                    )));
                }
                if nodes == 0 || layers == 0 {
                    return Err(Error::Config("nodes and layers must be positive".into()));
                }
                Ok(Method::Ann { nodes, layers })
            }
            MethodName::Care2Vec => {
                let (dim, nodes, layers) = (self.dim.unwrap_or(32), self.nodes.unwrap_or(300), self.layers.unwrap_or(2));
                let mut cfg = crate::pipeline::Care2VecConfig::new(dim, nodes, layers, self.task);
                cfg.extended = self.extended;
                cfg.validate()?;
                Ok(Method::Care2Vec { dim, nodes, layers })
            }
        }
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams { criterion: self.criterion, max_depth: self.max_depth, ..TreeParams::default() }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: EvaluationReport,
    pub files: Vec<PathBuf>,
    /// One-line result for standard output.
    pub summary: String,
}

pub fn run_file_stem(cfg: &RunConfig, method: Method) -> String {
    format!("run-{}-{}-seed{}", method.key(), cfg.task.as_str(), cfg.seed)
}

/// One method under k-fold cross-validation; writes `<stem>.csv`,
/// `<stem>.txt` and, on the binary task, `<stem>-roc.csv`.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutput> {
    let method = cfg.method()?;
    let data = load(&cfg.data)?;
    let data = match cfg.task {
        LabelScheme::MultiClass7 => data,
        LabelScheme::Binary => to_binary(&data)?,
    };
    let settings = cfg.train.settings(cfg.k, vec![cfg.seed], cfg.leakage, cfg.tree_params(), Execution::Sequential);
    let recipe = run_recipe(&settings, method, cfg)?;
    let folds = kfold_split(data.n_rows(), cfg.k, cfg.seed)?;
    let report = cross_validate(recipe.as_ref(), &data, &folds, Execution::from_jobs(cfg.jobs))?;

    let stem = run_file_stem(cfg, method);
    let mut files = vec![
        write_file(&cfg.out, &format!("{stem}.csv"), &report.to_csv())?,
        write_file(&cfg.out, &format!("{stem}.txt"), &report.to_text_table())?,
    ];
    if cfg.task == LabelScheme::Binary {
        files.push(write_file(&cfg.out, &format!("{stem}-roc.csv"), &report.roc_csv())?);
    }
    let mut summary = format!("{}: mean CV score {:.2}%", report.config.label(), 100.0 * report.mean_cv_score);
    if cfg.task == LabelScheme::Binary {
        let _ = write!(summary, ", mean AUC {}", report.mean_auc.map_or("undefined".into(), |a| format!("{:.2}%", 100.0 * a)));
    }
    Ok(RunOutput { report, files, summary })
}

/// Recipe for `run`, with the extended flag carried into Care2Vec.
fn run_recipe(settings: &ProtocolSettings, method: Method, cfg: &RunConfig) -> Result<Box<dyn crate::eval::ModelRecipe>> {
    if let Method::Care2Vec { dim, nodes, layers } = method {
        let mut c = crate::pipeline::Care2VecConfig::new(dim, nodes, layers, cfg.task);
        c.ae_train = settings.ae_train;
        c.dnn_train = TrainConfig { loss: c.dnn_train.loss, ..settings.classifier_train };
        c.leakage = cfg.leakage;
        c.extended = cfg.extended;
        c.validate()?;
        return Ok(Box::new(crate::pipeline::Care2VecRecipe::new(c)));
    }
    Ok(settings.recipe(method, cfg.task, None))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceConfig {
    pub data: PathBuf,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub tables: Vec<Table>,
    pub k: usize,
    pub leakage: LeakageMode,
    pub jobs: usize,
    pub train: TrainOverrides,
}

impl ReproduceConfig {
    pub fn new(data: impl Into<PathBuf>) -> Self {
        Self {
            data: data.into(),
            seeds: vec![0],
            out: PathBuf::from(DEFAULT_OUT_DIR),
            tables: Table::ALL.to_vec(),
            k: 10,
            leakage: LeakageMode::PerFold,
            jobs: 1,
            train: TrainOverrides::default(),
        }
    }
}

#[derive(Debug)]
pub struct ReproduceOutput {
    pub grid: GridResult,
    pub files: Vec<PathBuf>,
}

/// All requested table grids; one `.csv` and `.txt` per table, plus
/// `grid.csv` (every cell and seed) and `comparison.csv`.
pub fn cmd_reproduce(cfg: &ReproduceConfig) -> Result<ReproduceOutput> {
    cfg.train.validate()?;
    if cfg.seeds.is_empty() {
        return Err(Error::Config("--seeds must list at least one seed".into()));
    }
    if cfg.k < 2 {
        return Err(Error::Config(format!("k = {} must be at least 2", cfg.k)));
    }
    let data = load(&cfg.data)?;
    let settings =
        cfg.train.settings(cfg.k, cfg.seeds.clone(), cfg.leakage, TreeParams::default(), Execution::from_jobs(cfg.jobs));
    let mut tables = cfg.tables.clone();
    // the summary table needs the grids it summarises
    if tables.contains(&Table::T3) {
        for t in [Table::T1, Table::T2] {
            if !tables.contains(&t) {
                tables.push(t);
            }
        }
    }
    let spec = GridSpec::tables(&tables);
    let grid = run_experiment_grid(&data, &spec, &settings)?;

    let mut files = Vec::new();
    for &t in &Table::ALL {
        if tables.contains(&t) {
            files.push(write_file(&cfg.out, &format!("{}.csv", t.file_stem()), &grid.table_csv(t))?);
            files.push(write_file(&cfg.out, &format!("{}.txt", t.file_stem()), &grid.table_text(t))?);
        }
    }
    files.push(write_file(&cfg.out, "grid.csv", &grid.to_csv())?);
    files.push(write_file(&cfg.out, "comparison.csv", &grid.comparison_csv())?);
    Ok(ReproduceOutput { grid, files })
}

/// One network and loss to check.
#[derive(Debug, Clone)]
pub struct GradCheckTarget {
    pub name: String,
    pub spec: NetworkSpec,
    pub loss: Loss,
}

/// Every network family used anywhere: raw-feature ANNs, autoencoders for
/// each published width, and Care2Vec classifiers for every grid row, each
/// with its multi-class (softmax + CCE) and binary (sigmoid + BCE) head.
pub fn gradcheck_targets() -> Vec<GradCheckTarget> {
    let mut out = Vec::new();
    let heads = [(LabelScheme::MultiClass7, Loss::CategoricalCrossEntropy), (LabelScheme::Binary, Loss::BinaryCrossEntropy)];
    for nodes in PUBLISHED_ANN_NODES {
        for (task, loss) in heads {
            let spec = classifier_spec(crate::dataset::SCADI_FEATURES, nodes, 1, task).expect("valid dims");
            out.push(GradCheckTarget { name: format!("ann {}", task.as_str()), spec, loss });
        }
    }
    for d in PUBLISHED_DIMS {
        let spec = crate::autoencoder::build_autoencoder(d).expect("published dims are valid");
        out.push(GradCheckTarget { name: format!("autoencoder d={d}"), spec, loss: Loss::MeanSquaredError });
        for nodes in PUBLISHED_DNN_NODES {
            for layers in PUBLISHED_DNN_LAYERS {
                for (task, loss) in heads {
                    let spec = classifier_spec(d, nodes, layers, task).expect("valid dims");
                    out.push(GradCheckTarget { name: format!("care2vec dnn {}", task.as_str()), spec, loss });
                }
            }
        }
    }
    out
}

/// Options used for the repo-wide check: 3 samples and at most 24 sampled
/// weight entries (plus 24 biases) per layer.
pub fn gradcheck_options(seed: u64) -> GradCheckOptions {
    GradCheckOptions { n_samples: 3, max_entries_per_layer: Some(24), seed, ..GradCheckOptions::default() }
}

pub fn cmd_gradcheck(opts: &GradCheckOptions, exec: Execution) -> Result<Vec<(GradCheckTarget, GradCheckReport)>> {
    let targets = gradcheck_targets();
    let reports = exec.map(targets.len(), |i| gradient_check(&targets[i].spec, targets[i].loss, opts));
    targets.into_iter().zip(reports).map(|(t, r)| Ok((t, r?))).collect()
}
