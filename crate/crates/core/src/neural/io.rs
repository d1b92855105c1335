//! Flat JSON archive format for trained networks.
//!
//! ```json
//! {
//!   "format": "care2vec-network/1",
//!   "layers": [
//!     { "in_dim": 205, "out_dim": 200, "activation": "relu",
//!       "weights": [/* out_dim * in_dim values, row-major, row j = unit j */],
//!       "bias": [/* out_dim values */] }
//!   ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so a write/read cycle is lossless.

use serde::{Deserialize, Serialize};

use super::{Activation, LayerParams, LayerSpec, NetworkParams, NetworkSpec, NeuralError, Result};
use crate::numerics::Matrix;

pub const NETWORK_FORMAT: &str = "care2vec-network/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerializedLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerializedNetwork {
    pub format: String,
    pub layers: Vec<SerializedLayer>,
}

impl SerializedNetwork {
    pub fn new(spec: &NetworkSpec, params: &NetworkParams) -> Result<Self> {
        params.check(spec)?;
        let layers = spec
            .layers()
            .iter()
            .zip(&params.layers)
            .map(|(l, p)| SerializedLayer {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                activation: l.activation,
                weights: p.weights.as_slice().to_vec(),
                bias: p.bias.clone(),
            })
            .collect();
        Ok(Self { format: NETWORK_FORMAT.into(), layers })
    }

    pub fn into_parts(self) -> Result<(NetworkSpec, NetworkParams)> {
        if self.format != NETWORK_FORMAT {
            return Err(NeuralError::Format(format!("unsupported format tag '{}'", self.format)));
        }
        let spec = NetworkSpec::new(
            self.layers.iter().map(|l| LayerSpec::new(l.in_dim, l.out_dim, l.activation)).collect(),
        )?;
        let layers = self
            .layers
            .into_iter()
            .map(|l| {
                let weights = Matrix::from_vec(l.out_dim, l.in_dim, l.weights)?;
                Ok(LayerParams { weights, bias: l.bias })
            })
            .collect::<Result<Vec<_>>>()?;
        let params = NetworkParams { layers };
        params.check(&spec)?;
        Ok((spec, params))
    }
}

pub fn params_to_json(spec: &NetworkSpec, params: &NetworkParams) -> Result<String> {
    let s = SerializedNetwork::new(spec, params)?;
    serde_json::to_string_pretty(&s).map_err(|e| NeuralError::Format(e.to_string()))
}

pub fn params_from_json(text: &str) -> Result<(NetworkSpec, NetworkParams)> {
    let s: SerializedNetwork = serde_json::from_str(text).map_err(|e| NeuralError::Format(e.to_string()))?;
    s.into_parts()
}
