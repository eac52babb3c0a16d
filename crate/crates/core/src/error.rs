use thiserror::Error;

/// Errors raised while building configurations or running analyses.
///
/// Protocol-level cheating is not an error: it is a [`Decision`](crate::protocol::Decision).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("input must be 0 or 1, got {0}")]
    InvalidInput(u32),

    #[error("random value {random} is outside Z_{n}")]
    RandomOutOfRange { random: u64, n: usize },

    #[error("a ring needs at least 2 nodes, got {0}")]
    RingTooSmall(usize),

    #[error("node id {0} appears more than once")]
    DuplicateId(u64),

    #[error("expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("position {position} is out of range for a ring of {n}")]
    PositionOutOfRange { position: usize, n: usize },

    #[error("position {0} is not honest")]
    NotHonest(usize),

    #[error("position {0} is not a coalition member")]
    NotCoalition(usize),

    #[error("the coalition is empty")]
    EmptyCoalition,

    #[error("no honest node has a coalition member as its upstream neighbour")]
    NoRiggableTarget,

    #[error("honest node at position {0} did not complete its view of the run")]
    IncompleteView(usize),

    #[error("{0}")]
    Unsupported(String),

    #[error("search space of {required} exceeds the capacity bound {bound}")]
    Capacity { required: u128, bound: u128 },
}

impl Error {
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
