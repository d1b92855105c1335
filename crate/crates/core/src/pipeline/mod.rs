//! Care2Vec: age scaling, an autoencoder embedding and a dense classifier on
//! the embedding. Also the baseline recipes (CART tree, raw-feature ANN) and
//! the experiment grid.

mod grid;
pub mod published;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

pub use grid::{
    median, run_experiment_grid, CellOutcome, CellResult, CellSummary, GridCell, GridResult, GridSpec, Method,
    ProtocolSettings, Table,
};

use crate::autoencoder::{encode, fit_encoder, AutoencoderSpec, FittedEncoder};
use crate::dataset::{Dataset, LabelScheme, PreprocessState};
use crate::eval::{ConfigDescriptor, FittedModel, FoldPrediction, ModelRecipe};
use crate::neural::{self, binary_targets, one_hot, Activation, Loss, NetworkParams, NetworkSpec, TrainConfig};
use crate::numerics::{derive_seed, Matrix};
use crate::tree::{fit_tree, predict_proba, TreeNode, TreeParams};
use crate::{Error, Result};

pub const PUBLISHED_DIMS: [usize; 4] = [4, 8, 16, 32];
pub const PUBLISHED_DNN_NODES: [usize; 3] = [40, 100, 300];
pub const PUBLISHED_DNN_LAYERS: [usize; 2] = [1, 2];
pub const PUBLISHED_ANN_NODES: [usize; 5] = [30, 40, 50, 100, 300];
pub const AGE_COLUMN: &str = "Age";

/// Where the autoencoder gets its rows during cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum LeakageMode {
    /// Training split of each fold only.
    #[default]
    PerFold,
    /// Training split plus the held-out fold's features (labels never used).
    FullData,
}

impl LeakageMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LeakageMode::PerFold => "per-fold",
            LeakageMode::FullData => "full-data",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per-fold" | "per_fold" | "fold" => Some(LeakageMode::PerFold),
            "full-data" | "full_data" | "full" => Some(LeakageMode::FullData),
            _ => None,
        }
    }
}

fn output_head(task: LabelScheme) -> (usize, Activation, Loss) {
    match task {
        LabelScheme::MultiClass7 => (task.n_classes(), Activation::Softmax, Loss::CategoricalCrossEntropy),
        LabelScheme::Binary => (1, Activation::Sigmoid, Loss::BinaryCrossEntropy),
    }
}

/// `input -> [nodes] x layers -> 7 softmax | 1 sigmoid`, ReLU hidden layers.
pub fn classifier_spec(input_dim: usize, nodes: usize, layers: usize, task: LabelScheme) -> Result<NetworkSpec> {
    let (out, act, _) = output_head(task);
    let mut dims = vec![input_dim];
    dims.extend(std::iter::repeat_n(nodes, layers));
    dims.push(out);
    Ok(NetworkSpec::chain(&dims, Activation::Relu, act)?)
}

fn targets(labels: &[usize], task: LabelScheme) -> Matrix {
    match task {
        LabelScheme::MultiClass7 => one_hot(labels, task.n_classes()),
        LabelScheme::Binary => binary_targets(labels),
    }
}

/// Labels and optional positive-class scores from classifier outputs.
fn decide(out: &Matrix, task: LabelScheme) -> FoldPrediction {
    match task {
        LabelScheme::MultiClass7 => FoldPrediction { labels: out.argmax_rows(), scores: None },
        LabelScheme::Binary => {
            let scores = out.column(0);
            FoldPrediction { labels: scores.iter().map(|&s| usize::from(s >= 0.5)).collect(), scores: Some(scores) }
        }
    }
}

fn hash_f64s(mut h: u64, values: impl IntoIterator<Item = f64>) -> u64 {
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    }
    h
}

/// FNV-1a over the bit patterns of every weight and bias.
pub fn params_fingerprint(params: &NetworkParams) -> u64 {
    params.layers.iter().fold(0xcbf2_9ce4_8422_2325, |h, l| {
        let h = hash_f64s(h, l.weights.as_slice().iter().copied());
        hash_f64s(h, l.bias.iter().copied())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Care2VecConfig {
    pub encoding_dim: usize,
    pub dnn_hidden_nodes: usize,
    pub dnn_hidden_layers: usize,
    pub task: LabelScheme,
    pub ae_train: TrainConfig,
    pub dnn_train: TrainConfig,
    pub seed: u64,
    pub leakage: LeakageMode,
    /// Allows values outside the published grid.
    pub extended: bool,
}

impl Care2VecConfig {
    pub fn new(encoding_dim: usize, nodes: usize, layers: usize, task: LabelScheme) -> Self {
        let (_, _, loss) = output_head(task);
        Self {
            encoding_dim,
            dnn_hidden_nodes: nodes,
            dnn_hidden_layers: layers,
            task,
            ae_train: TrainConfig::autoencoder(),
            dnn_train: TrainConfig::classifier(loss),
            seed: 0,
            leakage: LeakageMode::PerFold,
            extended: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        AutoencoderSpec::new(self.encoding_dim)?;
        if self.dnn_hidden_nodes == 0 || self.dnn_hidden_layers == 0 {
            return Err(Error::Config("DNN needs at least one hidden layer of at least one node".into()));
        }
        if !self.extended {
            let mut bad = Vec::new();
            if !PUBLISHED_DIMS.contains(&self.encoding_dim) {
                bad.push(format!("encoding dim {} not in {PUBLISHED_DIMS:?}", self.encoding_dim));
            }
            if !PUBLISHED_DNN_NODES.contains(&self.dnn_hidden_nodes) {
                bad.push(format!("hidden nodes {} not in {PUBLISHED_DNN_NODES:?}", self.dnn_hidden_nodes));
            }
            if !PUBLISHED_DNN_LAYERS.contains(&self.dnn_hidden_layers) {
                bad.push(format!("hidden layers {} not in {PUBLISHED_DNN_LAYERS:?}", self.dnn_hidden_layers));
            }
            if !bad.is_empty() {
                return Err(Error::Config(format!("{} (set the extended flag to allow)", bad.join("; "))));
            }
        }
        Ok(())
    }

    pub fn descriptor(&self) -> ConfigDescriptor {
        let clf = classifier_spec(self.encoding_dim, self.dnn_hidden_nodes, self.dnn_hidden_layers, self.task)
            .map(|s| s.describe())
            .unwrap_or_default();
        ConfigDescriptor::new("care2vec")
            .with("task", self.task.as_str())
            .with("dim", self.encoding_dim)
            .with("nodes", self.dnn_hidden_nodes)
            .with("layers", self.dnn_hidden_layers)
            .with("leakage", self.leakage.as_str())
            .with("extended", self.extended)
            .with("autoencoder", format!("205-200-100-50-{0}(linear)-50-100-200-205(sigmoid)", self.encoding_dim))
            .with("classifier", clf)
            .with("ae_train", train_label(&self.ae_train))
            .with("dnn_train", train_label(&self.dnn_train))
    }
}

pub fn train_label(c: &TrainConfig) -> String {
    format!(
        "{} lr={} batch={} epochs={} loss={}",
        c.optimizer.name(),
        c.learning_rate,
        c.batch_size,
        c.epochs,
        c.loss.name()
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub config: Care2VecConfig,
    pub preprocess: PreprocessState,
    pub encoder: Arc<FittedEncoder>,
    pub classifier: NetworkSpec,
    pub classifier_params: NetworkParams,
    pub classifier_loss_history: Vec<f64>,
}

impl TrainedPipeline {
    /// Classifier outputs for raw (unscaled) feature rows.
    pub fn outputs(&self, x: &Matrix) -> Result<Matrix> {
        let z = self.embed(x)?;
        Ok(neural::predict(&self.classifier, &self.classifier_params, &z)?)
    }

    /// Age scaling with the fitted state followed by the encoder.
    pub fn embed(&self, x: &Matrix) -> Result<Matrix> {
        Ok(encode(&self.encoder, &self.preprocess.apply_matrix(x))?)
    }

    /// Softmax argmax (lowest index on ties), or `score >= 0.5` on the binary task.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(decide(&self.outputs(x)?, self.config.task).labels)
    }

    /// Sigmoid output per row. Binary task only.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if self.config.task != LabelScheme::Binary {
            return Err(Error::Config("scores are defined for the binary task only".into()));
        }
        Ok(self.outputs(x)?.column(0))
    }

    pub fn fingerprint(&self) -> u64 {
        params_fingerprint(&self.encoder.params) ^ params_fingerprint(&self.classifier_params).rotate_left(1)
    }
}

/// One cache entry; failures are kept as text so every waiter sees them.
type EncoderSlot = OnceLock<std::result::Result<Arc<FittedEncoder>, String>>;

/// Shares fitted encoders between runs that would train an identical
/// autoencoder (same scaled rows, width and training config). Labels never
/// enter an autoencoder fit, so a hit is bit-identical to a refit.
#[derive(Debug, Default)]
pub struct EncoderCache {
    slots: Mutex<HashMap<Vec<u64>, Arc<EncoderSlot>>>,
}

impl EncoderCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().map(|s| s.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_fit(&self, spec: &AutoencoderSpec, x: &Matrix, cfg: &TrainConfig) -> Result<Arc<FittedEncoder>> {
        let mut key = vec![
            spec.encoding_dim as u64,
            spec.input_dim as u64,
            cfg.learning_rate.to_bits(),
            cfg.epochs as u64,
            cfg.batch_size as u64,
            cfg.seed,
            cfg.optimizer as u64,
            x.rows() as u64,
        ];
        key.extend(x.as_slice().iter().map(|v| v.to_bits()));
        let slot = {
            let mut slots = self.slots.lock().map_err(|_| Error::Config("encoder cache poisoned".into()))?;
            slots.entry(key).or_default().clone()
        };
        slot.get_or_init(|| fit_encoder(spec, x, cfg).map(Arc::new).map_err(|e| e.to_string()))
            .clone()
            .map_err(|e| Error::Stage { stage: "autoencoder", source: Box::new(Error::Config(e)) })
    }
}

/// Fits scaling and both stages on `train`.
pub fn fit_care2vec(cfg: &Care2VecConfig, train: &Dataset) -> Result<TrainedPipeline> {
    fit_care2vec_with(cfg, train, None, None)
}

/// As [`fit_care2vec`]; `extra_features` (raw, unlabeled) join the
/// autoencoder's training rows in full-data leakage mode.
pub fn fit_care2vec_with(
    cfg: &Care2VecConfig,
    train: &Dataset,
    extra_features: Option<&Matrix>,
    cache: Option<&EncoderCache>,
) -> Result<TrainedPipeline> {
    cfg.validate()?;
    if train.scheme() != cfg.task {
        return Err(Error::Config(format!(
            "dataset task {} does not match configured task {}",
            train.scheme().as_str(),
            cfg.task.as_str()
        )));
    }
    let preprocess = PreprocessState::fit(train, AGE_COLUMN).map_err(Error::stage("preprocess"))?;
    let x = preprocess.apply_matrix(train.features());

    let ae_spec = AutoencoderSpec::with_input_dim(train.n_features(), cfg.encoding_dim)?;
    let ae_rows = match (cfg.leakage, extra_features) {
        (LeakageMode::FullData, Some(extra)) => {
            let extra = preprocess.apply_matrix(extra);
            let mut all = x.as_slice().to_vec();
            all.extend_from_slice(extra.as_slice());
            Matrix::from_vec(x.rows() + extra.rows(), x.cols(), all)?
        }
        _ => x.clone(),
    };
    let ae_cfg = cfg.ae_train.with_seed(derive_seed(cfg.seed, 1)).capped_to(ae_rows.rows());
    let encoder = match cache {
        Some(c) => c.get_or_fit(&ae_spec, &ae_rows, &ae_cfg)?,
        None => Arc::new(fit_encoder(&ae_spec, &ae_rows, &ae_cfg).map_err(Error::stage("autoencoder"))?),
    };

    let z = encode(&encoder, &x).map_err(Error::stage("encode"))?;
    let classifier = classifier_spec(cfg.encoding_dim, cfg.dnn_hidden_nodes, cfg.dnn_hidden_layers, cfg.task)?;
    let (_, _, loss) = output_head(cfg.task);
    let dnn_cfg = TrainConfig { loss, ..cfg.dnn_train }.with_seed(derive_seed(cfg.seed, 2)).capped_to(z.rows());
    let outcome = neural::train(&classifier, &dnn_cfg, &z, &targets(train.labels(), cfg.task))
        .map_err(Error::stage("classifier"))?;

    Ok(TrainedPipeline {
        config: cfg.clone(),
        preprocess,
        encoder,
        classifier,
        classifier_params: outcome.params,
        classifier_loss_history: outcome.loss_history,
    })
}

/// Raw-feature network: age scaling, then `205 -> [nodes] x layers -> head`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnConfig {
    pub hidden_nodes: usize,
    pub hidden_layers: usize,
    pub task: LabelScheme,
    pub train: TrainConfig,
}

impl AnnConfig {
    pub fn new(nodes: usize, layers: usize, task: LabelScheme) -> Self {
        let (_, _, loss) = output_head(task);
        Self { hidden_nodes: nodes, hidden_layers: layers, task, train: TrainConfig::classifier(loss) }
    }

    pub fn descriptor(&self, input_dim: usize) -> ConfigDescriptor {
        let arch = classifier_spec(input_dim, self.hidden_nodes, self.hidden_layers, self.task)
            .map(|s| s.describe())
            .unwrap_or_default();
        ConfigDescriptor::new("ann")
            .with("task", self.task.as_str())
            .with("nodes", self.hidden_nodes)
            .with("layers", self.hidden_layers)
            .with("network", arch)
            .with("train", train_label(&self.train))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAnn {
    pub task: LabelScheme,
    pub preprocess: PreprocessState,
    pub spec: NetworkSpec,
    pub params: NetworkParams,
}

pub fn fit_ann(cfg: &AnnConfig, train: &Dataset, seed: u64) -> Result<TrainedAnn> {
    if cfg.hidden_nodes == 0 || cfg.hidden_layers == 0 {
        return Err(Error::Config("ANN needs at least one hidden layer of at least one node".into()));
    }
    let preprocess = PreprocessState::fit(train, AGE_COLUMN)?;
    let x = preprocess.apply_matrix(train.features());
    let spec = classifier_spec(train.n_features(), cfg.hidden_nodes, cfg.hidden_layers, cfg.task)?;
    let (_, _, loss) = output_head(cfg.task);
    let tc = TrainConfig { loss, ..cfg.train }.with_seed(derive_seed(seed, 2)).capped_to(x.rows());
    let outcome = neural::train(&spec, &tc, &x, &targets(train.labels(), cfg.task)).map_err(Error::stage("ann"))?;
    Ok(TrainedAnn { task: cfg.task, preprocess, spec, params: outcome.params })
}

impl FittedModel for TrainedAnn {
    fn predict(&self, x: &Matrix) -> Result<FoldPrediction> {
        let out = neural::predict(&self.spec, &self.params, &self.preprocess.apply_matrix(x))?;
        Ok(decide(&out, self.task))
    }

    fn fingerprint(&self) -> u64 {
        params_fingerprint(&self.params)
    }
}

impl FittedModel for TrainedPipeline {
    fn predict(&self, x: &Matrix) -> Result<FoldPrediction> {
        Ok(decide(&self.outputs(x)?, self.config.task))
    }

    fn fingerprint(&self) -> u64 {
        TrainedPipeline::fingerprint(self)
    }
}

pub struct FittedTree {
    pub tree: TreeNode,
    pub task: LabelScheme,
}

impl FittedModel for FittedTree {
    fn predict(&self, x: &Matrix) -> Result<FoldPrediction> {
        let proba = predict_proba(&self.tree, x)?;
        let labels = proba.argmax_rows();
        let scores = (self.task == LabelScheme::Binary).then(|| proba.column(1));
        Ok(FoldPrediction { labels, scores })
    }

    fn fingerprint(&self) -> u64 {
        let splits = self.tree.splits();
        hash_f64s(
            0xcbf2_9ce4_8422_2325,
            splits.iter().flat_map(|s| [s.feature_index as f64, s.threshold, s.impurity_decrease]),
        )
    }
}

/// CART baseline. The tree sees unscaled features; min-max scaling cannot move a split.
#[derive(Debug, Clone, Default)]
pub struct TreeRecipe {
    pub params: TreeParams,
}

impl ModelRecipe for TreeRecipe {
    fn descriptor(&self) -> ConfigDescriptor {
        ConfigDescriptor::new("tree")
            .with("criterion", self.params.criterion.name())
            .with("max_depth", self.params.max_depth.map_or("unlimited".into(), |d| d.to_string()))
            .with("min_samples_split", self.params.min_samples_split)
    }

    fn fit(&self, train: &Dataset, _held_out: Option<&Matrix>, _seed: u64) -> Result<Box<dyn FittedModel>> {
        let tree = fit_tree(train.features(), train.labels(), train.n_classes(), &self.params)?;
        Ok(Box::new(FittedTree { tree, task: train.scheme() }))
    }
}

#[derive(Debug, Clone)]
pub struct AnnRecipe {
    pub config: AnnConfig,
}

impl ModelRecipe for AnnRecipe {
    fn descriptor(&self) -> ConfigDescriptor {
        self.config.descriptor(crate::dataset::SCADI_FEATURES)
    }

    fn fit(&self, train: &Dataset, _held_out: Option<&Matrix>, seed: u64) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(fit_ann(&self.config, train, seed)?))
    }
}

/// Care2Vec per fold; the fold seed replaces `config.seed`.
#[derive(Debug, Clone)]
pub struct Care2VecRecipe {
    pub config: Care2VecConfig,
    pub cache: Option<Arc<EncoderCache>>,
}

impl Care2VecRecipe {
    pub fn new(config: Care2VecConfig) -> Self {
        Self { config, cache: None }
    }

    pub fn with_cache(mut self, cache: Arc<EncoderCache>) -> Self {
        self.cache = Some(cache);
        self
    }
}

impl ModelRecipe for Care2VecRecipe {
    fn descriptor(&self) -> ConfigDescriptor {
        self.config.descriptor()
    }

    fn uses_held_out_features(&self) -> bool {
        self.config.leakage == LeakageMode::FullData
    }

    fn fit(&self, train: &Dataset, held_out: Option<&Matrix>, seed: u64) -> Result<Box<dyn FittedModel>> {
        let cfg = Care2VecConfig { seed, ..self.config.clone() };
        Ok(Box::new(fit_care2vec_with(&cfg, train, held_out, self.cache.as_deref())?))
    }
}

/// Predicts the training majority class (lowest index on ties); binary score
/// is the training positive rate.
#[derive(Debug, Clone, Copy, Default)]
pub struct MajorityRecipe;

struct MajorityModel {
    class: usize,
    positive_rate: Option<f64>,
}

impl FittedModel for MajorityModel {
    fn predict(&self, x: &Matrix) -> Result<FoldPrediction> {
        Ok(FoldPrediction {
            labels: vec![self.class; x.rows()],
            scores: self.positive_rate.map(|p| vec![p; x.rows()]),
        })
    }

    fn fingerprint(&self) -> u64 {
        self.class as u64
    }
}

impl ModelRecipe for MajorityRecipe {
    fn descriptor(&self) -> ConfigDescriptor {
        ConfigDescriptor::new("majority")
    }

    fn fit(&self, train: &Dataset, _held_out: Option<&Matrix>, _seed: u64) -> Result<Box<dyn FittedModel>> {
        let counts: Vec<f64> = train.class_counts().iter().map(|&c| c as f64).collect();
        let positive_rate = (train.scheme() == LabelScheme::Binary).then(|| counts[1] / train.n_rows() as f64);
        Ok(Box::new(MajorityModel { class: crate::numerics::argmax(&counts), positive_rate }))
    }
}
