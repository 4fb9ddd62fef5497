use thiserror::Error;

/// Which parity block of a symmetric two-center problem an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Gerade,
    Ungerade,
}

impl Parity {
    /// `+1` for gerade, `-1` for ungerade.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Gerade => 1.0,
            Parity::Ungerade => -1.0,
        }
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Parity::Gerade => f.write_str("gerade"),
            Parity::Ungerade => f.write_str("ungerade"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZrpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix that has to be inverted is singular (or nearly so). At a
    /// physical energy this means the amplitude has a pole there.
    #[error("singular matrix in {context} (condition estimate {condition:.3e})")]
    Singular { context: String, condition: f64 },

    /// A scalar denominator of a closed-form amplitude vanished.
    #[error("pole of the {parity} amplitude: |denominator| = {magnitude:.3e}")]
    Pole { parity: Parity, magnitude: f64 },

    #[error("channel {channel} is closed at this energy")]
    ClosedChannel { channel: usize },

    #[error("centers {first} and {second} overlap: d_i + d_j = {radii} > separation {separation}")]
    Overlap {
        first: usize,
        second: usize,
        radii: f64,
        separation: f64,
    },

    #[error("argument principle counted {counted} roots but {converged} converged")]
    RootCountMismatch { counted: i64, converged: usize },

    #[error("pole track lost after R = {last_good_r}")]
    TrackLost { last_good_r: f64 },

    #[error("{quantity} did not converge: {detail}")]
    NotConverged { quantity: String, detail: String },
}

pub type Result<T> = std::result::Result<T, ZrpError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ZrpError::InvalidArgument(msg.into()))
}
