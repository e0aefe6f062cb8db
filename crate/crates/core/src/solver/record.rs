use serde::{Deserialize, Serialize};

use crate::vecops;

/// One bandit decision: at `step` the agent chose to extrapolate `arm` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipDecision {
    pub step: usize,
    pub arm: usize,
    pub reward: f64,
    pub loss: f64,
}

/// A step whose velocity came from extrapolation rather than a model call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub step: usize,
    /// Most recent evaluated index used as the expansion point.
    pub anchor: usize,
    /// Earlier evaluated index used for the finite difference.
    pub previous: usize,
    /// Time at which the extrapolated velocity is meant to hold.
    pub target_time: f64,
}

/// Complete trace of one sampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `x_{t_0} .. x_{t_T}`.
    pub states: Vec<Vec<f64>>,
    /// Velocity used for the step out of each state (length `T`).
    pub velocities: Vec<Vec<f64>>,
    /// Whether the model was called at index `k` (length `T`).
    pub evaluated: Vec<bool>,
    pub decisions: Vec<SkipDecision>,
    pub extrapolations: Vec<Extrapolation>,
    pub eval_count: usize,
    pub skipped_set_size: usize,
}

impl TrajectoryRecord {
    pub(crate) fn new(times: &[f64], x0: &[f64]) -> Self {
        let steps = times.len() - 1;
        Self {
            times: times.to_vec(),
            states: {
                let mut s = Vec::with_capacity(steps + 1);
                s.push(x0.to_vec());
                s
            },
            velocities: Vec::with_capacity(steps),
            evaluated: vec![false; steps],
            decisions: Vec::new(),
            extrapolations: Vec::new(),
            eval_count: 0,
            skipped_set_size: 0,
        }
    }

    pub(crate) fn finish(&mut self) {
        self.eval_count = self.evaluated.iter().filter(|e| **e).count();
        self.skipped_set_size = self.evaluated.len() - self.eval_count;
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("a record always holds x0")
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.states[0]
    }

    /// Indices in `0..T` where the model was called.
    pub fn evaluated_indices(&self) -> Vec<usize> {
        (0..self.evaluated.len()).filter(|&k| self.evaluated[k]).collect()
    }

    /// The skipped set: indices in `0..T` without a model call.
    pub fn skipped_indices(&self) -> Vec<usize> {
        (0..self.evaluated.len()).filter(|&k| !self.evaluated[k]).collect()
    }

    /// `T / eval_count`, the evaluation-count speedup over a full run.
    pub fn speedup(&self) -> f64 {
        self.steps() as f64 / self.eval_count as f64
    }

    /// Euclidean distance between the final states of two runs, regardless of
    /// their grids.
    pub fn endpoint_distance(&self, other: &TrajectoryRecord) -> f64 {
        vecops::l2_distance(self.final_state(), other.final_state())
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let steps = self.steps();
        if self.states.len() != steps + 1 {
            return Err(format!("{} states for {} steps", self.states.len(), steps));
        }
        if self.velocities.len() != steps || self.evaluated.len() != steps {
            return Err("velocity/evaluated length differs from step count".into());
        }
        let evals = self.evaluated.iter().filter(|e| **e).count();
        if evals != self.eval_count {
            return Err(format!("eval_count {} but {} flags set", self.eval_count, evals));
        }
        if steps - evals != self.skipped_set_size {
            return Err("skipped_set_size disagrees with flags".into());
        }
        for e in &self.extrapolations {
            if e.previous >= e.anchor {
                return Err(format!("anchor pair ({}, {}) not ordered", e.anchor, e.previous));
            }
            if !self.evaluated[e.anchor] || !self.evaluated[e.previous] {
                return Err(format!(
                    "step {} extrapolates from unevaluated anchors ({}, {})",
                    e.step, e.anchor, e.previous
                ));
            }
            if e.anchor > e.step {
                return Err(format!("step {} uses a future anchor {}", e.step, e.anchor));
            }
        }
        Ok(())
    }
}
