use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Smallest accepted number of null replicates.
pub const MIN_BUDGET: usize = 1000;
pub const DEFAULT_BUDGET: usize = 100_000;

/// Budget, seed and execution mode of a null-distribution simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub budget: usize,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl MonteCarlo {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub(crate) fn validate(&self, n: usize, alpha: f64) -> Result<()> {
        if n < 2 {
            return Err(Error::domain(format!("sample size must be at least 2, got {n}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if self.budget < MIN_BUDGET {
            return Err(Error::CalibrationBudget {
                budget: self.budget,
                minimum: MIN_BUDGET,
            });
        }
        Ok(())
    }
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self::new(DEFAULT_BUDGET, 0)
    }
}
