use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown order id {0}")]
    UnknownOrder(u64),

    #[error("order {id}: illegal transition from {from} to {to}")]
    IllegalTransition {
        id: u64,
        from: &'static str,
        to: &'static str,
    },

    #[error("action {action} is not feasible in the current state")]
    InfeasibleAction { action: u8 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("empty pick list")]
    EmptyPickList,

    #[error("no feasible action in mask")]
    EmptyMask,

    #[error("model bank is empty")]
    EmptyModelBank,

    #[error("position {0} does not lie on the route")]
    OffRoute(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
