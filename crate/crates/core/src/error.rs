use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("length mismatch: {left} bits vs {right} bits")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid bit string {input:?}: {reason}")]
    Parse { input: String, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("segment {index} out of range ({count} segments)")]
    SegmentOutOfRange { index: usize, count: usize },

    #[error("exhaustive census over {bits} bits exceeds the {cap}-bit limit")]
    CensusTooLarge { bits: usize, cap: usize },

    #[error("qubit {qubit} out of range for a {num_qubits}-qubit state")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("{requested} qubits exceeds the simulator cap of {cap}")]
    QubitCap { requested: usize, cap: usize },

    #[error("control and target must differ (both {0})")]
    SameQubit(usize),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid adversary strategy: {0}")]
    InvalidStrategy(String),

    #[error("oracle size limit exceeded: {0}")]
    OracleCap(String),

    #[error("missing segment {segment} from {from} for agent {agent}")]
    MissingSegment {
        agent: usize,
        segment: usize,
        from: String,
    },
}
