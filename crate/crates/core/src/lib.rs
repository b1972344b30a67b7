//! Graph contrastive self-supervised learning workbench.
//!
//! Edge-perturbation and spectral augmentations, shallow GCN encoders with
//! analytic gradients, four contrastive objectives, Laplacian spectrum tools,
//! InfoNCE bound computations with empirical verification, and the
//! regression/timing utilities used to analyse sweeps.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`).

pub mod eigen;
pub mod encoder;
pub mod error;
pub mod analysis;
pub mod augment;
pub mod graph;
pub mod linalg;
pub mod objectives;
pub mod plot;
pub mod rng;
pub mod scalar;
mod serde_rows;
pub mod trainer;
pub mod spectrum;
pub mod theory;

pub use error::{Error, Result};
pub use graph::{Graph, Labels};
pub use scalar::Scalar;

pub type Graph64 = Graph<f64>;
pub type Graph32 = Graph<f32>;
pub type EncoderState64 = encoder::EncoderState<f64>;
pub type EncoderState32 = encoder::EncoderState<f32>;
pub type Spectrum64 = spectrum::Spectrum<f64>;
pub type Spectrum32 = spectrum::Spectrum<f32>;
pub type RunRecord64 = trainer::RunRecord<f64>;
pub type RunRecord32 = trainer::RunRecord<f32>;
