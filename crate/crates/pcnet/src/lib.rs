//! Probabilistic conceptual networks.
//!
//! A pc-net couples a concept taxonomy with per-concept probabilistic
//! models over a shared feature set. Internal concepts get their models
//! derived bottom-up as mixtures of their children. Any conceptual cover
//! (an antichain partitioning the leaves) turns into an exactly solvable
//! categorization decision model, and a greedy controller trades the
//! expected utility of finer covers against their representation cost.
//!
//! The crate is organized around [`PcNet`] (parsing, taxonomy and
//! diagrams), [`ConceptualCover`] and propagation ([`abstraction`]),
//! model construction ([`builder`]), exact solving and the brute-force
//! soundness oracle ([`inference`]), and cover refinement ([`refine`]).
//!
//! With the default `parallel` feature the batch-oriented entry points
//! fan out over a rayon pool; results are bitwise identical to the
//! sequential builds.

pub mod abstraction;
pub mod builder;
pub mod dot;
pub mod error;
mod exec;
pub mod inference;
pub mod io;
pub mod model;
pub mod numfmt;
pub mod refine;
pub mod validate;

pub use abstraction::{derived_diagram, ConceptualCover};
pub use builder::{CategorizationDecisionModel, CategorizationPid, PreferenceModel};
pub use error::{Error, Result};
pub use inference::{
    check_soundness, joint_oracle, joint_oracle_seq, solve_batch, solve_batch_seq, EvidenceSet,
    JointTable, SolveResult, SoundnessReport,
};
pub use model::{Cpt, FeatureDecl, PcDiagram, PcNet};
pub use refine::{
    model_cost, refine, refine_with, CostParams, RefineMove, RefineStep, RefinementTrace,
};
pub use validate::{Issue, Severity, ValidationReport};

/// Enumerating covers is refused above this count.
pub const COVER_SPACE_LIMIT: u64 = 1_000_000;

/// Materializing a full joint table is refused above this entry count.
pub const JOINT_TABLE_LIMIT: u64 = 10_000_000;

/// Evidence with total mass at or below this threshold is impossible.
pub const EVIDENCE_MASS_THRESHOLD: f64 = 1e-12;

/// Probability rows and the root prior must normalize within this bound,
/// and soundness checks compare joints at the same resolution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
