use thiserror::Error;

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("operation requires a positive signal precision, got {0}")]
    NoSignal(f64),

    #[error("observed action has zero likelihood under both states")]
    ZeroLikelihood,

    #[error("{0} is only defined for the proportional bonus")]
    ProportionalOnly(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown check id `{0}`")]
    UnknownCheck(String),
}

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ModelError::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(ModelError::Domain {
            name,
            value,
            domain: "(0, 1)",
        })
    }
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::Domain {
            name,
            value,
            domain: "[0, inf)",
        })
    }
}
