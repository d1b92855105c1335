//! Tabular classification of self-care activity records: autoencoder
//! embeddings feeding a dense classifier, compared against a CART tree and a
//! raw-feature network under k-fold cross-validation.

pub mod autoencoder;
pub mod commands;
pub mod dataset;
pub mod eval;
pub mod exec;
pub mod neural;
pub mod numerics;
pub mod pipeline;
pub mod synthetic;
pub mod tree;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error(transparent)]
    Neural(#[from] neural::NeuralError),
    #[error(transparent)]
    Autoencoder(#[from] autoencoder::AutoencoderError),
    #[error(transparent)]
    Tree(#[from] tree::TreeError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
    #[error("fold {}: {source}", .fold + 1)]
    Fold { fold: usize, source: Box<Error> },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    /// Wraps an error with the name of the pipeline stage that raised it.
    pub fn stage<E: Into<Error>>(stage: &'static str) -> impl FnOnce(E) -> Error {
        move |e| Error::Stage { stage, source: Box::new(e.into()) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
