//! Genetic improvement of interpreter source code.
//!
//! Sources are [`tree::SourceTree`]s: srcML-style XML whose text content is
//! the program. A [`edit::Patch`] is an ordered list of edits on those trees.
//! [`pipeline::Evaluator`] builds and runs a patched program (unoptimized
//! build and run, optimized build, artifact comparison, sandboxed run) and
//! caches the result; [`search::local_search`] walks patch space from the
//! empty patch; [`report`] turns the search log into CSV files.

pub mod edit;
pub mod mutate;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod search;
pub mod tree;

pub use edit::{Edit, EditKind, NodeRef, ParsePatchError, Patch, Payload, Trees};
pub use mutate::{random_edit, EditSampler, EditWeights};
pub use pipeline::{Evaluation, Evaluator, ExternalPipeline, Outcome, Pipeline, SandboxMode, ToyPipeline};
pub use scenario::{Mode, Scenario, ScenarioError};
pub use search::{local_search, Move, SearchConfig, SearchLog, SearchResult, StepRecord, WARMUP};
pub use tree::{Child, Node, SourceTree, TreeError};
