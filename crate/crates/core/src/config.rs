//! Engine configuration and its validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::LabelSet;

/// How a round's control-task errors are turned into a quality in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReliabilityMode {
    /// `exp(-alpha * errors)`.
    #[default]
    Exponential,
    /// `1 - errors / control_count`.
    LinearFraction,
}

/// Parameters of incremental truth inference.
///
/// The default calibration uses `increment = 1` and `threshold = min_agreement - 0.5`, so
/// exactly `min_agreement` fully reliable agreeing answers solve a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Completion threshold: a task is solved once its unique top score exceeds this.
    pub threshold: f64,
    /// Amount (times quality) added to the answered label's score.
    pub increment: f64,
    /// Amount (times quality) removed from every other label's score. 0 disables it.
    pub decrement: f64,
    /// Decay rate of exponential reliability.
    pub alpha: f64,
    /// Minimum number of agreeing answers required per task.
    pub min_agreement: u32,
    pub reliability_mode: ReliabilityMode,
    pub control_tasks_per_round: usize,
    pub tasks_per_round: usize,
    /// Add solved tasks to the control pool, using the inferred label as their known answer.
    pub promote_solved_to_control: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self::for_min_agreement(3)
    }
}

impl EngineConfig {
    /// Default calibration for a given minimum agreement `p`.
    pub fn for_min_agreement(p: u32) -> Self {
        Self {
            threshold: f64::from(p) - 0.5,
            increment: 1.0,
            decrement: 0.0,
            // exp(-0.7) ~ 0.497: one mistake almost halves the quality.
            alpha: 0.7,
            min_agreement: p,
            reliability_mode: ReliabilityMode::Exponential,
            control_tasks_per_round: 2,
            tasks_per_round: 6,
            promote_solved_to_control: true,
        }
    }

    /// Checks every numeric constraint and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            v.push(format!(
                "threshold must be positive, got {}",
                self.threshold
            ));
        }
        if !(self.increment.is_finite() && self.increment > 0.0) {
            v.push(format!(
                "increment must be positive, got {}",
                self.increment
            ));
        }
        if !(self.decrement.is_finite() && self.decrement >= 0.0) {
            v.push(format!(
                "decrement must be nonnegative, got {}",
                self.decrement
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            v.push(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.min_agreement < 2 {
            v.push(format!(
                "min_agreement must be at least 2, got {}",
                self.min_agreement
            ));
        }
        if self.control_tasks_per_round == 0 {
            v.push("control_tasks_per_round must be positive".to_owned());
        }
        if self.tasks_per_round == 0 {
            v.push("tasks_per_round must be positive".to_owned());
        }
        if self.min_agreement >= 1 && self.increment > 0.0 && self.threshold > 0.0 {
            let p = f64::from(self.min_agreement);
            let lower = (p - 1.0) * self.increment;
            let upper = p * self.increment;
            if self.threshold <= lower {
                v.push(format!(
                    "threshold {} is reachable by {} perfect answers (must exceed (p-1)*increment = {lower})",
                    self.threshold,
                    self.min_agreement - 1
                ));
            }
            if self.threshold > upper {
                v.push(format!(
                    "threshold {} is unreachable by {} perfect answers (must be at most p*increment = {upper})",
                    self.threshold, self.min_agreement
                ));
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl ConfigError {
    pub fn violations(&self) -> &[String] {
        match self {
            ConfigError::Invalid(v) => v,
        }
    }
}

/// Validates `config` together with raw label identifiers, returning the config and the
/// built label set on success.
pub fn validate_config<S: AsRef<str>>(
    config: EngineConfig,
    labels: &[S],
) -> Result<(EngineConfig, LabelSet), ConfigError> {
    let mut v = config.violations();
    let label_set = match LabelSet::new(labels.iter().map(|l| l.as_ref().to_owned())) {
        Ok(ls) => Some(ls),
        Err(e) => {
            v.push(e.to_string());
            None
        }
    };
    match label_set {
        Some(ls) if v.is_empty() => Ok((config, ls)),
        _ => Err(ConfigError::Invalid(v)),
    }
}
