//! Noisy-channel decomposition of word surprisal into heuristic surprise
//! and discrepancy signal, with the experiment and regression tooling built
//! on top of it.

pub mod analysis;
pub mod decomposition;
pub mod experiment;
pub mod lexdist;
pub mod noisy_channel;
pub mod report;
pub mod scorer;
pub mod text;

pub use decomposition::{decompose, score_item, Decomposition, DecompositionError, ScoredItem};
pub use experiment::{Condition, Stimulus};
pub use noisy_channel::{DistanceMode, NoiseParams, Posterior};
pub use report::{emit_report, Provenance, Report, ReportFormat};
pub use scorer::{Scorer, ScorerDescriptor, ScorerError};
