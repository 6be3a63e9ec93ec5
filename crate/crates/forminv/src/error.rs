use thiserror::Error;

/// Errors produced by ingestion, metric computation, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("line {line}: unknown family {name:?} (valid: {valid})")]
    UnknownFamily {
        line: usize,
        name: String,
        valid: String,
    },

    #[error(
        "duplicate record for (model={model}, theorem={theorem}, family={family}) \
         at lines {first_line} and {second_line}"
    )]
    DuplicateRecord {
        model: String,
        theorem: String,
        family: String,
        first_line: usize,
        second_line: usize,
    },

    #[error(
        "item id {item_id:?} maps to conflicting cells: ({first_theorem}, {first_family}) \
         at line {first_line} vs ({second_theorem}, {second_family}) at line {second_line}"
    )]
    InconsistentItem {
        item_id: String,
        first_theorem: String,
        first_family: String,
        first_line: usize,
        second_theorem: String,
        second_family: String,
        second_line: usize,
    },

    #[error("unknown model {0:?}")]
    UnknownModel(String),

    #[error("theorem {theorem} has no present paraphrase answers for model {model}")]
    UndefinedProfile { model: String, theorem: String },

    #[error("matrix has a single ground-truth class ({class}); use plain accuracy instead")]
    SingleClass { class: bool },

    #[error("accuracy {value} outside (0.5, 1]; the reversal condition does not apply")]
    ReversalPrecondition { value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty matrix: no records to evaluate")]
    EmptyMatrix,

    #[error("correlation undefined: {0}")]
    CorrelationUndefined(String),

    #[error("linear program error: {0}")]
    Lp(String),
}

pub type Result<T> = std::result::Result<T, Error>;
