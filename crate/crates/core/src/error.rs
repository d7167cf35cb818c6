use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("instruction memory overflow: program needs {needed} bytes, capacity is {capacity}")]
    InstructionMemory { needed: usize, capacity: usize },

    #[error("local memory capacity exceeded: working set needs {needed} words, {available} available")]
    Capacity { needed: usize, available: usize },

    #[error("unsupported kernel spec: {0}")]
    Spec(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("invalid program: {0}")]
    InvalidProgram(String),

    #[error("address fault: {0}")]
    AddressFault(String),

    #[error("deadlock at cycle {cycle}: {detail}")]
    Deadlock { cycle: u64, detail: String },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("invalid metric input: {0}")]
    MetricInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("numerical mismatch: {0}")]
    Numerical(String),

    #[error("tile ({row},{col}): {source}")]
    Tile {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Machine-parsable category used by the CLI error line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Partition(_) => "partition",
            Error::Shape(_) => "shape",
            Error::InstructionMemory { .. } => "imem",
            Error::Capacity { .. } => "capacity",
            Error::Spec(_) => "spec",
            Error::Graph(_) => "graph",
            Error::InvalidProgram(_) => "invalid-program",
            Error::AddressFault(_) => "address-fault",
            Error::Deadlock { .. } => "deadlock",
            Error::UndefinedMetric(_) => "undefined-metric",
            Error::MetricInput(_) => "metric-input",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Numerical(_) => "numerical",
            Error::Tile { source, .. } => source.category(),
            Error::Io(_) => "io",
        }
    }

    /// Process exit code: 2 usage, 3 shape/capacity, 4 numerical mismatch, 5 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Spec(_) | Error::Io(_) => 2,
            Error::Dimension(_)
            | Error::Partition(_)
            | Error::Shape(_)
            | Error::InstructionMemory { .. }
            | Error::Capacity { .. } => 3,
            Error::Numerical(_) => 4,
            Error::Tile { source, .. } => source.exit_code(),
            _ => 5,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
