//! Probing frozen concept embeddings for hypernymy and rebuilding taxonomies
//! from the probe's pairwise scores.
//!
//! Pair convention: the probe reads `(x, y)` and returns P(`y` is a hypernym
//! of `x`). Score matrices store `h(u, v)` = P(`u` is a parent of `v`).

pub mod analysis;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod pipeline;
pub mod probe;
pub mod reconstruction;
pub mod sampler;
pub mod synthetic;
pub mod taxonomy;

pub use embeddings::{EmbeddingStore, LayerSelector, PlantedConfig};
pub use error::{Error, Result};
pub use evaluation::{LabeledTree, ReconstructionReport, TedResult};
pub use probe::{EvalReport, ProbeConfig, ProbeModel};
pub use reconstruction::{ArborescenceSolution, DistanceMatrix, Metric, ScoreMatrix};
pub use sampler::{LabeledEdgeExample, Split, SplitAssignment, Triplet};
pub use taxonomy::{Synset, TaxonomyGraph};
