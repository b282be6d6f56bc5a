use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// Wall-clock budget shared by the exponential-time searches.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    deadline: Option<Instant>,
    limit: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self {
            deadline: None,
            limit: None,
        }
    }

    pub fn from_secs(secs: f64) -> Self {
        let limit = Duration::from_secs_f64(secs.max(0.0));
        Self {
            deadline: Some(Instant::now() + limit),
            limit: Some(limit),
        }
    }

    pub fn check(&self, stage: &str) -> Result<()> {
        match self.deadline {
            Some(d) if Instant::now() > d => Err(Error::TimeBudgetExceeded {
                stage: stage.to_string(),
                seconds: self.limit.unwrap_or_default().as_secs_f64(),
            }),
            _ => Ok(()),
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::unlimited()
    }
}
