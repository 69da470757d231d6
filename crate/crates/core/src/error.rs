use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// A text input (vocabulary, TSV, CoNLL-U) could not be parsed.
    #[error("{source_name}, line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("duplicate subword {piece:?} at line {line}")]
    DuplicateSubword { piece: String, line: usize },

    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),

    #[error("cannot tokenize an empty word")]
    EmptyWord,

    #[error("word {0:?} contains whitespace")]
    WhitespaceInWord(String),

    #[error("target vocabulary size {requested} is too small, minimum is {minimum}")]
    VocabularyTooSmall { requested: usize, minimum: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("word {0:?} has no gold segmentation")]
    MissingGold(String),

    #[error("embedding store error at byte {offset}: {message}")]
    Store { offset: u64, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("task {task} cannot be generated: {reason}")]
    Ungeneratable { task: String, reason: String },

    #[error("not enough instances for task {task}: {details}")]
    Shortfall { task: String, details: String },

    #[error("sentence {0} is not in the embedding store")]
    MissingSentence(u64),

    #[error("sentence {sentence_id}: {message}")]
    Alignment { sentence_id: u64, message: String },

    #[error("degenerate dataset: {0}")]
    Degenerate(String),

    #[error("invalid tag {0:?}")]
    InvalidTag(String),

    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable category, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Parse { .. } => "parse",
            Error::DuplicateSubword { .. } | Error::Vocabulary(_) => "vocabulary",
            Error::EmptyWord | Error::WhitespaceInWord(_) => "word",
            Error::VocabularyTooSmall { .. } => "vocabulary_size",
            Error::EmptyCorpus => "empty_corpus",
            Error::MissingGold(_) => "missing_gold",
            Error::Store { .. } => "store",
            Error::Shape(_) => "shape",
            Error::OutOfRange(_) => "out_of_range",
            Error::Ungeneratable { .. } => "ungeneratable",
            Error::Shortfall { .. } => "shortfall",
            Error::MissingSentence(_) => "missing_sentence",
            Error::Alignment { .. } => "alignment",
            Error::Degenerate(_) => "degenerate",
            Error::InvalidTag(_) => "invalid_tag",
            Error::Invalid(_) => "invalid_argument",
        }
    }
}
