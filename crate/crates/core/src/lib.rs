//! Cross-word BPE supertokens for reasoning traces.
//!
//! Train a merge table over base-token sequences, apply it losslessly, and
//! analyze the result: per-role entropy and the compression ceiling, a
//! nine-way structural taxonomy of merges, category transition diagnostics
//! split by correctness, and static renderings.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix it to `f64`.

pub mod corpus;
pub mod diagnostics;
pub mod embeddings;
pub mod entropy;
pub mod error;
pub mod filter;
pub mod format;
pub mod intervals;
pub mod pipeline;
pub mod render;
pub mod scalar;
pub mod supertokenizer;
pub mod taxonomy;
pub mod trainer;
pub mod vocab;

pub use corpus::{count_pairs, load_corpus, read_corpus, write_corpus, BaseToken, CorpusFormat, Pair, PairCountTable, TokenId, Trace, DEFAULT_CAP, UNCAPPED};
pub use diagnostics::{
    composite_metrics, event_sequence, ratio_table, transition_matrix, transition_report, CompositeMetrics, Direction, EventFilter, Group, LabeledSequence, Labels, Pooling, RatioCell,
    TransitionMatrix, TransitionReport,
};
pub use embeddings::{extend_embeddings, EmbeddingInit, Embeddings};
pub use entropy::{
    assign_roles, ceiling_from_stats, compression_ceiling, cross_model_gap, length_binned_stats, merged_fraction, role_stats, CeilingReport, GapTable, Role, RoleAnnotation, RoleMeans, RoleStats,
};
pub use error::{Error, ErrorKind, Result};
pub use filter::{is_eligible, Eligibility, FilterConfig, FilterKind, FilterRule, RuleSet};
pub use intervals::{accuracy_ci, accuracy_ci_with_delta, paired_token_ci, IntervalEstimate, IntervalKind};
pub use pipeline::{run_pipeline, Manifest, PipelineConfig};
pub use render::{auto_windows, render_trace, Palette, RenderFormat, RenderPlan};
pub use scalar::{CompensatedSum, Scalar};
pub use supertokenizer::{adoption_rate, apply, decode, Segmentation, Supertokenizer};
pub use taxonomy::{classify, classify_table, Category, CategoryMap};
pub use trainer::{compression_curve, train, MergeRule, MergeTable, TrainConfig};
pub use vocab::BaseVocab;

pub type Embeddings32 = Embeddings<f32>;
pub type Embeddings64 = Embeddings<f64>;
pub type RoleStats64 = RoleStats<f64>;
pub type CeilingReport64 = CeilingReport<f64>;
pub type GapTable64 = GapTable<f64>;
pub type TransitionMatrix64 = TransitionMatrix<f64>;
pub type TransitionReport64 = TransitionReport<f64>;
pub type IntervalEstimate64 = IntervalEstimate<f64>;
