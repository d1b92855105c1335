//! Symmetric dense autoencoder; the trained encoder half supplies the embedding.
//!
//! Layout for bottleneck `d`: `205 -> 200 -> 100 -> 50 -> d -> 50 -> 100 -> 200 -> 205`.
//! Hidden layers use ReLU, the bottleneck is linear and the reconstruction
//! layer is a sigmoid because every preprocessed input lies in `[0, 1]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{PreprocessState, SCADI_FEATURES};
use crate::neural::{
    self, params_from_json, Activation, LayerSpec, Loss, NetworkParams, NetworkSpec, NeuralError, SerializedNetwork,
    TrainConfig,
};
use crate::numerics::Matrix;

pub const HIDDEN_DIMS: [usize; 3] = [200, 100, 50];
pub const PUBLISHED_ENCODING_DIMS: [usize; 4] = [4, 8, 16, 32];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutoencoderError {
    #[error("encoding dimension {dim} must lie in 1..{max}")]
    InvalidDim { dim: usize, max: usize },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

pub type Result<T> = std::result::Result<T, AutoencoderError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub encoding_dim: usize,
    /// Set when `encoding_dim` is outside `{4, 8, 16, 32}`.
    pub nonstandard_dim: bool,
}

impl AutoencoderSpec {
    pub fn new(encoding_dim: usize) -> Result<Self> {
        Self::with_input_dim(SCADI_FEATURES, encoding_dim)
    }

    pub fn with_input_dim(input_dim: usize, encoding_dim: usize) -> Result<Self> {
        let narrowest = *HIDDEN_DIMS.last().expect("hidden dims");
        if encoding_dim == 0 || encoding_dim >= narrowest {
            return Err(AutoencoderError::InvalidDim { dim: encoding_dim, max: narrowest });
        }
        Ok(Self {
            input_dim,
            hidden_dims: HIDDEN_DIMS.to_vec(),
            encoding_dim,
            nonstandard_dim: !PUBLISHED_ENCODING_DIMS.contains(&encoding_dim),
        })
    }

    /// Number of layers in the encoder half.
    pub fn encoder_depth(&self) -> usize {
        self.hidden_dims.len() + 1
    }

    pub fn network(&self) -> NetworkSpec {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_dims);
        dims.push(self.encoding_dim);
        dims.extend(self.hidden_dims.iter().rev());
        dims.push(self.input_dim);

        let bottleneck = self.encoder_depth() - 1;
        let last = dims.len() - 2;
        let layers = (0..dims.len() - 1)
            .map(|i| {
                let act = if i == bottleneck {
                    Activation::Linear
                } else if i == last {
                    Activation::Sigmoid
                } else {
                    Activation::Relu
                };
                LayerSpec::new(dims[i], dims[i + 1], act)
            })
            .collect();
        NetworkSpec::new(layers).expect("autoencoder dims chain by construction")
    }

    pub fn encoder_network(&self) -> NetworkSpec {
        self.network().prefix(self.encoder_depth()).expect("encoder prefix")
    }
}

/// Full autoencoder spec for bottleneck `d`.
pub fn build_autoencoder(d: usize) -> Result<NetworkSpec> {
    Ok(AutoencoderSpec::new(d)?.network())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedEncoder {
    pub spec: AutoencoderSpec,
    encoder: NetworkSpec,
    pub params: NetworkParams,
    pub preprocess: Option<PreprocessState>,
    /// Reconstruction loss per epoch.
    pub loss_history: Vec<f64>,
}

impl FittedEncoder {
    pub fn encoding_dim(&self) -> usize {
        self.spec.encoding_dim
    }

    pub fn encoder_network(&self) -> &NetworkSpec {
        &self.encoder
    }

    pub fn with_preprocess(mut self, state: PreprocessState) -> Self {
        self.preprocess = Some(state);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = EncoderDocument {
            encoding_dim: self.spec.encoding_dim,
            network: SerializedNetwork::new(&self.encoder, &self.params)?,
            preprocess: self.preprocess.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| NeuralError::Format(e.to_string()).into())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: EncoderDocument =
            serde_json::from_str(text).map_err(|e| AutoencoderError::from(NeuralError::Format(e.to_string())))?;
        let net_json = serde_json::to_string(&doc.network).map_err(|e| NeuralError::Format(e.to_string()))?;
        let (encoder, params) = params_from_json(&net_json)?;
        let spec = AutoencoderSpec::with_input_dim(encoder.input_dim(), doc.encoding_dim)?;
        if encoder != spec.encoder_network() {
            return Err(NeuralError::Format("stored layers do not form an encoder of the declared width".into()).into());
        }
        Ok(Self { spec, encoder, params, preprocess: doc.preprocess, loss_history: Vec::new() })
    }
}

#[derive(Serialize, Deserialize)]
struct EncoderDocument {
    encoding_dim: usize,
    network: SerializedNetwork,
    preprocess: Option<PreprocessState>,
}

/// Trains the full autoencoder to reconstruct `train_x` and keeps the encoder half.
pub fn fit_encoder(spec: &AutoencoderSpec, train_x: &Matrix, config: &TrainConfig) -> Result<FittedEncoder> {
    if train_x.cols() != spec.input_dim {
        return Err(NeuralError::DimensionMismatch(format!(
            "autoencoder expects {} columns, got {}",
            spec.input_dim,
            train_x.cols()
        ))
        .into());
    }
    let config = TrainConfig { loss: Loss::MeanSquaredError, ..*config };
    let net = spec.network();
    let outcome = neural::train(&net, &config, train_x, train_x)?;
    let depth = spec.encoder_depth();
    Ok(FittedEncoder {
        spec: spec.clone(),
        encoder: spec.encoder_network(),
        params: outcome.params.prefix(depth),
        preprocess: None,
        loss_history: outcome.loss_history,
    })
}

/// `x.rows() x d` embedding.
pub fn encode(enc: &FittedEncoder, x: &Matrix) -> Result<Matrix> {
    Ok(neural::predict(&enc.encoder, &enc.params, x)?)
}
