use std::str::FromStr;

use crate::error::CoreError;
use crate::model::Dataset;

/// Which earlier synthetic batches stay in the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Accrual {
    /// Only the current generation's batch.
    #[default]
    FreshEachGeneration,
    /// The current batch plus every batch from a power-of-two generation.
    LogAccrual,
}

impl Accrual {
    pub fn as_str(self) -> &'static str {
        match self {
            Accrual::FreshEachGeneration => "fresh",
            Accrual::LogAccrual => "log",
        }
    }

    /// Number of batches held right after generation `t >= 1`.
    pub fn batches_at(self, t: usize) -> usize {
        match self {
            Accrual::FreshEachGeneration => usize::from(t >= 1),
            Accrual::LogAccrual if t == 0 => 0,
            Accrual::LogAccrual => {
                // powers of two strictly below t, plus t itself
                let below = (usize::BITS - (t - 1).leading_zeros()) as usize;
                below + 1
            }
        }
    }
}

impl FromStr for Accrual {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, CoreError> {
        match s {
            "fresh" => Ok(Accrual::FreshEachGeneration),
            "log" => Ok(Accrual::LogAccrual),
            other => Err(CoreError::invalid("accrual", other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPool {
    policy: Accrual,
    batches: Vec<(usize, Dataset)>,
}

impl SyntheticPool {
    pub fn new(policy: Accrual) -> Self {
        Self {
            policy,
            batches: Vec::new(),
        }
    }

    pub fn accrue(&mut self, batch: Dataset, t: usize) {
        match self.policy {
            Accrual::FreshEachGeneration => self.batches.clear(),
            Accrual::LogAccrual => self.batches.retain(|(g, _)| g.is_power_of_two()),
        }
        self.batches.push((t, batch));
    }

    pub fn generations(&self) -> Vec<usize> {
        self.batches.iter().map(|(g, _)| *g).collect()
    }

    pub fn datasets(&self) -> impl Iterator<Item = &Dataset> {
        self.batches.iter().map(|(_, d)| d)
    }

    /// Total number of points across batches.
    pub fn len(&self) -> usize {
        self.datasets().map(Dataset::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
