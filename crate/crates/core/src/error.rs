use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data item: {0}")]
    InvalidChunk(String),
    #[error("node '{node}' failed: {source}")]
    NodeFailure {
        node: String,
        #[source]
        source: Box<Error>,
    },
    #[error("pipeline is invalid:\n{0}")]
    Validation(String),
    #[error("channel count changed from {expected} to {got}")]
    ChannelCountChanged { expected: usize, got: usize },

    // pipeline description and expressions
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unknown node kind '{name}'{}", hint.as_ref().map(|h| format!(" (did you mean '{h}'?)")).unwrap_or_default())]
    UnknownNodeKind { name: String, hint: Option<String> },
    #[error("duplicate node name '{0}'")]
    DuplicateNodeName(String),
    #[error("node '{node}': {message}")]
    Param { node: String, message: String },
    #[error("expression syntax error at position {position}: {message}")]
    ExprSyntax { position: usize, message: String },
    #[error("domain error at sample {row}, channel {col}: {message}")]
    Domain { row: usize, col: usize, message: String },

    // filters
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("unstable filter design: {0}")]
    UnstableDesign(String),

    // analysis
    #[error("epoch is empty or too short")]
    EmptyEpoch,
    #[error("input of {len} samples is shorter than segment length {segment}")]
    TooShort { len: usize, segment: usize },

    // selection
    #[error("unknown channel '{0}'")]
    UnknownChannel(String),
    #[error("channel index {index} out of range for {count} channels")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least 2 channels, got {0}")]
    TooFewChannels(usize),

    // stimulator configuration
    #[error("XML syntax error at line {line}: {message}")]
    XmlSyntax { line: u32, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid duration: {0}")]
    InvalidDuration(String),

    // wire protocols
    #[error("bad RDA GUID")]
    BadGuid,
    #[error("truncated message: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("inconsistent header: {0}")]
    InconsistentHeader(String),
    #[error("bad magic (expected {expected:?})")]
    BadMagic { expected: &'static str },
    #[error("oversize item: {0}")]
    Oversize(String),
    #[error("connection failed: {0}")]
    ConnectFailed(String),
    #[error("protocol error: {0}")]
    Protocol(String),

    // files
    #[error("corrupt chunk at byte offset {offset}: {message}")]
    CorruptChunk { offset: u64, message: String },
    #[error("unsupported sample format '{0}'")]
    UnsupportedSampleFormat(String),
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("unsupported binary format '{0}'")]
    UnsupportedBinaryFormat(String),
    #[error("file size mismatch: expected {expected} samples, found {got}")]
    FileSizeMismatch { expected: usize, got: usize },
    #[error("schema changed: header has {expected:?}, item has {got:?}")]
    SchemaChanged { expected: Vec<String>, got: Vec<String> },
    #[error(transparent)]
    Io(#[from] std::io::Error),

    // classification
    #[error("inputs misaligned: timestamps {0} and {1}")]
    MisalignedInputs(f64, f64),
    #[error("pooled covariance is singular")]
    SingularCovariance,
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("model version {0} is not supported")]
    VersionMismatch(u64),
    #[error("model document invalid: {0}")]
    ModelSchema(String),
}

impl Error {
    pub(crate) fn param(node: &str, message: impl Into<String>) -> Self {
        Error::Param { node: node.to_string(), message: message.into() }
    }
}
