//! Prediction network: graph encoder, latent pathway and graph decoder.

pub mod layers;
mod checkpoint;
mod model;
mod params;
mod profile;

pub use model::{
    preprocess, DecoderCache, EffectiveGrads, FrequencyMotion, Model, PastEncoding, PredictionSet, Prepared,
    SampleTrace, WindowTrace,
};
pub use checkpoint::{Checkpoint, OptimizerMoments};
pub use params::{group_of, latent_width, layout, ModelParams, GRAPH_BLOCKS};
pub use profile::{AblationMode, Profile};
