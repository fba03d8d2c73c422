use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no stationary point: delta + q = {0} must exceed 1")]
    NoStationaryPoint(f64),
    #[error("empty window: window mass q = {q} does not exceed target mass p = {p}")]
    EmptyWindow { p: f64, q: f64 },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("cannot rescale dimension `{0}` with zero precision radius")]
    CannotScale(String),
    #[error("argument {0} is outside the domain of the Lambert W branch")]
    OutOfDomain(f64),
    #[error("every likelihood vanishes at output y = {0}")]
    UndefinedOutput(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, CalibrationError>;

pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(CalibrationError::InvalidArgument(format!(
            "{name} = {value} is not a probability"
        )));
    }
    Ok(())
}

pub(crate) fn check_open_unit(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(CalibrationError::InvalidArgument(format!(
            "{name} = {value} must lie strictly between 0 and 1"
        )));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0) || value.is_nan() {
        return Err(CalibrationError::InvalidArgument(format!(
            "{name} = {value} must be positive"
        )));
    }
    Ok(())
}
