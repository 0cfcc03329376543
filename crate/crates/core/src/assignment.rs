use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::ReportProfile;
use crate::path::{welfare, Path};

/// Which part of a search produced an assignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssignmentSource {
    Cbs,
    /// EPBS leaf with its node creation index.
    Leaf { creation_index: usize },
    /// Prioritized planning on the `index`-th ordering of a range, highest
    /// priority first.
    Ordering { index: usize, order: Vec<usize> },
    Oracle,
}

/// One path (or none) per agent with cached reported welfare.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub paths: Vec<Option<Path>>,
    pub welfare: Vec<f64>,
    pub social_welfare: f64,
    pub source: AssignmentSource,
}

impl Assignment {
    pub fn new(paths: Vec<Option<Path>>, reports: &ReportProfile, source: AssignmentSource) -> Self {
        assert_eq!(paths.len(), reports.len());
        let welfare: Vec<f64> = paths.iter().zip(reports.agents()).map(|(p, a)| welfare(p.as_ref(), a)).collect();
        let social_welfare = welfare.iter().fold(0.0, |acc, w| acc + w);
        Assignment {
            paths,
            welfare,
            social_welfare,
            source,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.paths.len()
    }

    /// Reported welfare of everyone except `agent`.
    pub fn welfare_without(&self, agent: usize) -> f64 {
        self.welfare
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != agent)
            .fold(0.0, |acc, (_, w)| acc + w)
    }

    /// Same paths re-scored under another profile.
    pub fn rescored(&self, reports: &ReportProfile) -> Self {
        Assignment::new(self.paths.clone(), reports, self.source.clone())
    }

    /// Sum of arrival times over non-empty paths.
    pub fn flowtime(&self) -> usize {
        self.paths.iter().flatten().map(Path::arrival).sum()
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("time limit of {limit_s} s exceeded")]
pub struct Timeout {
    pub limit_s: f64,
}

/// Cooperative wall-clock budget, checked at node and sample boundaries.
#[derive(Clone, Copy, Debug)]
pub struct Deadline {
    started: Instant,
    limit: Option<Duration>,
}

impl Deadline {
    pub fn new(limit: Option<Duration>) -> Self {
        Deadline {
            started: Instant::now(),
            limit,
        }
    }

    pub fn unlimited() -> Self {
        Self::new(None)
    }

    pub fn limit(&self) -> Option<Duration> {
        self.limit
    }

    pub fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }

    pub fn check(&self) -> Result<(), Timeout> {
        match self.limit {
            Some(limit) if self.started.elapsed() >= limit => Err(Timeout {
                limit_s: limit.as_secs_f64(),
            }),
            _ => Ok(()),
        }
    }
}
