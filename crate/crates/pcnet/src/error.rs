use thiserror::Error;

/// Errors raised by loading, validation, model construction and inference.
#[derive(Error, Debug)]
pub enum Error {
    #[error("malformed input at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("unknown concept: {0}")]
    UnknownConcept(String),
    #[error("unknown feature: {0}")]
    UnknownFeature(String),
    #[error("unknown action: {0}")]
    UnknownAction(String),
    #[error("unknown state {state:?} for feature {feature}")]
    UnknownState { feature: String, state: String },
    #[error("{child} is not a proper subconcept of {ancestor}")]
    NotASubconcept { child: String, ancestor: String },
    #[error("ancestor {0} has zero prior mass")]
    ZeroPriorAncestor(String),
    #[error("{0} is not an internal concept")]
    NotInternal(String),
    #[error("no diagram available for concept {0}")]
    DiagramMissing(String),
    #[error("child {child} of {parent} has no diagram")]
    ChildDiagramMissing { parent: String, child: String },
    #[error("children of {0} declare mismatched feature sets")]
    FeatureSetMismatch(String),
    #[error("not a conceptual cover: {0}")]
    CoverInvalid(String),
    #[error("cover space holds {count} covers, more than the {limit} limit")]
    CoverSpaceTooLarge { count: u128, limit: u64 },
    #[error("joint table would hold {entries} entries, more than the {limit} limit")]
    JointTooLarge { entries: u128, limit: u64 },
    #[error("evidence mass {mass:e} is below the impossibility threshold {threshold:e}")]
    EvidenceImpossible { mass: f64, threshold: f64 },
    #[error("feature {0} is not observed by the preference model")]
    UnobservedFeatureInEvidence(String),
    #[error("conflicting evidence for feature {0}")]
    ConflictingEvidence(String),
    #[error("concept {0} is not a member of the cover")]
    NotInCover(String),
    #[error("cannot specialize leaf concept {0}")]
    LeafNotSpecializable(String),
    #[error("not a complete sibling group: {0}")]
    NotSiblingComplete(String),
    #[error("invalid initial cover: {0}")]
    InitInvalid(String),
    #[error("cost parameters must be nonnegative")]
    NegativeCost,
    #[error("net failed validation: {0}")]
    Invalid(String),
    #[error("the net declares no preference model")]
    NoPreference,
    #[error("empty concept set")]
    EmptyConceptSet,
}

pub type Result<T> = std::result::Result<T, Error>;
