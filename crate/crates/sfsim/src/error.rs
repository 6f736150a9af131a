use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("depth must be at least 1, got {0}")]
    InvalidDepth(usize),
    #[error("layout {rows}x{cols} admits no CZ pattern")]
    LayoutTooSmall { rows: usize, cols: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("qubit {qubit} out of range for {n} qubits")]
    QubitOutOfRange { qubit: usize, n: usize },
    #[error("layer {layer}: qubit {qubit} is used by two gates")]
    OverlappingGates { layer: usize, qubit: usize },
    #[error("control and target are the same qubit ({0})")]
    SameQubit(usize),
    #[error("gate {0:?} is not a single-qubit gate")]
    NotSingleQubit(crate::circuit::GateKind),
    #[error("{what} needs 2^{required} amplitudes, cap is 2^{cap}")]
    CapacityExceeded { what: &'static str, required: usize, cap: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("boundary row {row} out of range for {rows} rows")]
    InvalidBoundary { row: usize, rows: usize },
    #[error("no scheme fits the budget 2^{budget} bytes; smallest needs about 2^{needed:.2} bytes")]
    NoFeasibleScheme { budget: u32, needed: f64 },
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid local window {n_local} for {n} qubits")]
    InvalidLocalQubits { n_local: usize, n: usize },
    #[error("swap width {w} does not fit {n} qubits")]
    InvalidSwapWidth { w: usize, n: usize },
    #[error("combine plan does not match the scheme: {0}")]
    PlanMismatch(String),
    #[error("part C block of 2^{block} amplitudes exceeds node memory 2^{node}")]
    BlockTooLarge { block: usize, node: u32 },
    #[error("split layer {split} outside 0..={depth}")]
    InvalidSplitLayer { split: usize, depth: usize },
    #[error("basis index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: u64, n: usize },
    #[error("state vector has zero norm")]
    ZeroState,
    #[error("need at least {min} qubits, got {got}")]
    TooFewQubits { min: usize, got: usize },
    #[error("sample list is empty")]
    EmptySamples,
    #[error("bad state file: {0}")]
    BadStateFile(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
