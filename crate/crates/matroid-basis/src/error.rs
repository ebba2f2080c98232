use thiserror::Error;

/// Errors surfaced by the oracle layer, the scheduler, and the algorithms.
#[derive(Debug, Error)]
pub enum Error {
    /// A query referenced an element outside the view's live ground set.
    #[error("element {element} is not in the live ground set")]
    ElementOutOfRange { element: u32 },

    /// A view construction was invalid (overlapping delete/contract sets,
    /// contracting a dependent set, ...).
    #[error("invalid view construction: {0}")]
    InvalidView(String),

    /// A single round asked for more queries than the configured cap allows.
    #[error("round budget exceeded: batch of {requested} queries > cap {cap}")]
    BudgetExceeded { requested: u64, cap: u64 },

    /// A batch was submitted with no queries in it.
    #[error("empty query batch")]
    EmptyBatch,

    /// The globally-optimal constructor stripped the working set down to
    /// nothing; the instance has no circuit mass to anchor a peel.
    #[error("peel collapsed to the empty set")]
    EmptyPeel,

    /// A deletion subroutine could not certify any redundant element.
    #[error("no redundant elements recovered")]
    EmptyDeletion,

    /// Every sampled prefix of the requested length was dependent.
    #[error("no independent prefix found (length {len})")]
    ContractionFailed { len: usize },

    /// The pooled circuit sample has no circuit containing the element.
    #[error("no sampled circuit contains element {element}")]
    NoCircuitForElement { element: u32 },

    /// Not enough circuits containing the element to fill the requested
    /// group structure.
    #[error("element {element}: {have} circuits in pool, need {need}")]
    InsufficientSample { element: u32, have: usize, need: usize },

    /// A short-circuit witness violated the stated length cap.
    #[error("witness for element {element} has {len} non-barrier members, cap {cap}")]
    WitnessTooLong { element: u32, len: usize, cap: usize },

    /// Malformed matroid spec, generator string, or experiment spec.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
