use deptex_core::reachability::EpdParams;

use crate::dispatch::RetryPolicy;
use crate::error::ServiceError;

pub const ENV_TOKEN: &str = "DEPTEX_TOKEN";
pub const ENV_VERIFIER_URL: &str = "DEPTEX_VERIFIER_URL";
pub const ENV_ALPHA: &str = "DEPTEX_ALPHA";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServiceConfig {
    pub epd: EpdParams,
    /// External semantic verifier; rule-based verdicts when unset.
    pub verifier_url: Option<String>,
    pub retry: RetryPolicy,
}

impl ServiceConfig {
    /// Reads `DEPTEX_ALPHA` (default 0.85) and `DEPTEX_VERIFIER_URL`.
    pub fn from_env() -> Result<Self, ServiceError> {
        Self::from_vars(|k| std::env::var(k).ok())
    }

    pub fn from_vars(var: impl Fn(&str) -> Option<String>) -> Result<Self, ServiceError> {
        let epd = match var(ENV_ALPHA).filter(|v| !v.trim().is_empty()) {
            None => EpdParams::default(),
            Some(raw) => {
                let alpha: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| ServiceError::Validation(format!("{ENV_ALPHA}=`{raw}` is not a number")))?;
                EpdParams::with_alpha(alpha)?
            }
        };
        Ok(Self {
            epd,
            verifier_url: var(ENV_VERIFIER_URL).filter(|v| !v.trim().is_empty()),
            retry: RetryPolicy::default(),
        })
    }
}
