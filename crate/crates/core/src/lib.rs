//! The diffusion game on graphs: every step, each edge whose endpoints hold
//! different numbers of chips moves one chip from the richer endpoint to
//! the poorer one.
//!
//! - [`graph`]: multigraphs, generators, the text graph format.
//! - [`engine`]: the deterministic rule, the weak game, period detection.
//! - [`encoding`]: digraph-encoding certificates of non-negativity.
//! - [`coupling`]: chip-removal monotonicity of the weak game, constructively.
//! - [`constructions`]: explicit starting positions that go negative.
//! - [`search`]: bounded exhaustive and sampled witness searches.

pub mod constructions;
pub mod coupling;
pub mod encoding;
pub mod engine;
pub mod graph;
pub mod search;

pub use constructions::Witness;
pub use encoding::DigraphEncoding;
pub use engine::{ChipState, PeriodReport, Trajectory, TransferPlan};
pub use graph::Graph;
pub use search::{SearchConfig, SearchReport};
