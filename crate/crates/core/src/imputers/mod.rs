//! Univariate imputation methods. Each method separates drawing parameters
//! from their posterior and drawing values given those parameters.

mod linreg;
mod logreg;
mod pmm;
mod polycomb;
mod smcfcs;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use linreg::{draw_bayes_linreg, draw_bayes_linreg_with, impute_norm, LinRegDraw, Ridge};
pub use logreg::{draw_bayes_logreg, fit_logistic, impute_logreg, LogRegDraw, LogisticFit};
pub use pmm::{impute_pmm, pmm_donors, DonorIndex};
pub use polycomb::{impute_polycomb, PolyCombDraws, PolyCombModel};
pub use smcfcs::{impute_smcfcs_quadratic, SmcFcsDraws, MAX_PROPOSALS};

pub const DEFAULT_DONORS: usize = 5;

fn default_donors() -> usize {
    DEFAULT_DONORS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    Norm,
    Pmm {
        #[serde(default = "default_donors")]
        donors: usize,
    },
    #[serde(rename = "polycomb")]
    PolyComb {
        #[serde(default = "default_donors")]
        donors: usize,
    },
    #[serde(rename = "smcfcs-quad")]
    SmcFcsQuadratic,
    #[serde(rename = "logreg")]
    LogReg,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Norm => "norm",
            Method::Pmm { .. } => "pmm",
            Method::PolyComb { .. } => "polycomb",
            Method::SmcFcsQuadratic => "smcfcs-quad",
            Method::LogReg => "logreg",
        }
    }

    pub fn donors(&self) -> Option<usize> {
        match *self {
            Method::Pmm { donors } | Method::PolyComb { donors } => Some(donors),
            _ => None,
        }
    }

    /// Methods that impute a covariate from the substantive outcome.
    pub fn is_covariate_method(&self) -> bool {
        matches!(self, Method::PolyComb { .. } | Method::SmcFcsQuadratic)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Parses a method name with default donor counts.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm" => Ok(Method::Norm),
            "pmm" => Ok(Method::Pmm { donors: DEFAULT_DONORS }),
            "polycomb" => Ok(Method::PolyComb { donors: DEFAULT_DONORS }),
            "smcfcs-quad" => Ok(Method::SmcFcsQuadratic),
            "logreg" => Ok(Method::LogReg),
            other => Err(Error::InvalidConfig(format!("unknown imputation method `{other}`"))),
        }
    }
}

/// Method and predictor set for one incomplete column.
///
/// `square` names a companion column kept equal to the square of this column;
/// it is imputed jointly and needs no spec of its own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputerSpec {
    #[serde(flatten)]
    pub method: Method,
    #[serde(default)]
    pub predictors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub square: Option<String>,
}

impl ImputerSpec {
    pub fn new(method: Method, predictors: &[&str]) -> Self {
        Self { method, predictors: predictors.iter().map(|s| s.to_string()).collect(), square: None }
    }

    pub fn norm(predictors: &[&str]) -> Self {
        Self::new(Method::Norm, predictors)
    }

    pub fn pmm(predictors: &[&str]) -> Self {
        Self::new(Method::Pmm { donors: DEFAULT_DONORS }, predictors)
    }

    pub fn logreg(predictors: &[&str]) -> Self {
        Self::new(Method::LogReg, predictors)
    }

    pub fn with_square(mut self, column: &str) -> Self {
        self.square = Some(column.to_string());
        self
    }

    pub fn validate(&self, target: &str) -> Result<()> {
        if let Some(d) = self.method.donors() {
            if d == 0 {
                return Err(Error::InvalidConfig(format!("`{target}`: donors must be at least 1")));
            }
        }
        if self.predictors.iter().any(|p| p == target) {
            return Err(Error::InvalidConfig(format!("`{target}` cannot predict itself")));
        }
        if self.square.as_deref() == Some(target) {
            return Err(Error::InvalidConfig(format!("`{target}` cannot be its own square")));
        }
        if let Some(sq) = &self.square {
            if self.predictors.contains(sq) {
                return Err(Error::InvalidConfig(format!("`{target}`: square column `{sq}` is also a predictor")));
            }
        }
        if self.method.is_covariate_method() && self.predictors.len() != 1 {
            return Err(Error::InvalidConfig(format!(
                "`{target}`: {} takes exactly one predictor, the outcome",
                self.method
            )));
        }
        Ok(())
    }
}
