pub mod embedding;
pub mod evalkit;
pub mod gql;
pub mod graph;
pub mod kgforge;
pub mod llm;
pub mod pipeline;
pub mod scalar;
pub mod taskops;

pub use scalar::Scalar;

/// Double-precision instantiations of the scalar-generic types.
pub type Embedding = embedding::EmbeddingVector<f64>;
pub type Linker = embedding::EntityLinker<f64>;
pub type Metrics = evalkit::MetricsReport<f64>;
pub type ClassScores = evalkit::ClassMetrics<f64>;
/// Single-precision variants for memory-bound callers.
pub type Embedding32 = embedding::EmbeddingVector<f32>;
pub type Metrics32 = evalkit::MetricsReport<f32>;
