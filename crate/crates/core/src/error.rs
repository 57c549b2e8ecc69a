use alloc::string::String;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("block index ({az_block}, {range_block}) is outside the 20x12 block grid")]
    BlockOutOfRange { az_block: usize, range_block: usize },

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("intensity at flat index {index} is negative or not finite")]
    InvalidIntensity { index: usize },

    #[error("point at {range_m} m lies outside the {max_range_m} m sensor disc")]
    OutsideDisc { range_m: f64, max_range_m: f64 },

    #[error("point at the sensor origin has no bearing")]
    DegeneratePoint,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unsupported sampling rate {0}; supported rates are 0.10, 0.20 and 0.30")]
    UnsupportedRate(f64),

    #[error("plan does not match frame: {0}")]
    Plan(String),

    #[error("invalid synthetic scene: {0}")]
    Scene(String),
}

pub type Result<T> = core::result::Result<T, Error>;
