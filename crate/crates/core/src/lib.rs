//! Simulated uncivil-client conversations, reframing and assistance panels,
//! lexico-semantic message metrics and paired statistics.
//!
//! Numeric kernels in [`stats`] and [`lingua`] are generic over [`Real`];
//! the aliases below fix the common `f64` and `f32` instantiations.

pub mod assets;
pub mod lingua;
pub mod llm;
pub mod panels;
pub mod prompts;
mod scalar;
pub mod simulant;
pub mod stats;

pub use assets::Assets;
pub use scalar::Real;

pub type PairedSample64 = stats::PairedSample<f64>;
pub type PairedSample32 = stats::PairedSample<f32>;
pub type TestResult64 = stats::TestResult<f64>;
pub type TestResult32 = stats::TestResult<f32>;
pub type EmbeddingTable64 = lingua::EmbeddingTable<f64>;
pub type EmbeddingTable32 = lingua::EmbeddingTable<f32>;

/// Everything a prompt chain needs: assets, a backend and call parameters.
#[derive(Clone, Copy)]
pub struct ChainContext<'a> {
    pub assets: &'a Assets,
    pub backend: &'a dyn llm::ChatBackend,
    pub params: &'a llm::CompletionParams,
}
