use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("value iteration did not converge after {iterations} iterations (sup diff {sup_diff:e} > tol {tol:e})")]
    NotConverged {
        iterations: usize,
        sup_diff: f64,
        tol: f64,
    },

    #[error("initial belief {0} is outside (0, 1)")]
    InvalidBelief(f64),

    #[error("outcome {outcome:?} is inconsistent with action {action:?}")]
    InconsistentOutcome {
        action: crate::model::Action,
        outcome: crate::extensions::outcomes::Outcome,
    },

    #[error("log-odds domain [{lo}, {hi}] is not representable")]
    Domain { lo: f64, hi: f64 },

    #[error("threshold not found: {0}")]
    NotFound(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check(
    ok: bool,
    name: &'static str,
    value: f64,
    constraint: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            constraint,
        })
    }
}
