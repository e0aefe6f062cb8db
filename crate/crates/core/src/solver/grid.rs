use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretization `0 = t_0 < t_1 < ... < t_T = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
    uniform: bool,
    shift: Option<f64>,
}

impl TimeGrid {
    /// `t_k = k / T`.
    pub fn uniform(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid("at least one step is required".into()));
        }
        let times = (0..=steps).map(|k| k as f64 / steps as f64).collect();
        Ok(Self { times, uniform: true, shift: None })
    }

    /// Uniform grid warped by `t' = s t / (1 + (s - 1) t)`; `s = 1` is the
    /// identity and yields a uniform grid.
    pub fn shifted(steps: usize, shift: f64) -> Result<Self> {
        if !(shift.is_finite() && shift > 0.0) {
            return Err(Error::InvalidGrid(format!("shift must be positive, got {shift}")));
        }
        let mut grid = Self::uniform(steps)?;
        if shift == 1.0 {
            return Ok(grid);
        }
        for t in grid.times.iter_mut().take(steps).skip(1) {
            *t = shift * *t / (1.0 + (shift - 1.0) * *t);
        }
        grid.uniform = false;
        grid.shift = Some(shift);
        Ok(grid)
    }

    /// Arbitrary grid; must be strictly increasing from exactly 0 to exactly 1.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid("need at least two time points".into()));
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return Err(Error::InvalidGrid("endpoints must be exactly 0 and 1".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("times must be strictly increasing".into()));
        }
        let steps = times.len() - 1;
        let uniform = times.iter().enumerate().all(|(k, &t)| t == k as f64 / steps as f64);
        Ok(Self { times, uniform, shift: None })
    }

    /// Number of steps `T`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t(&self, k: usize) -> f64 {
        self.times[k]
    }

    /// `t_{k+1} - t_k`.
    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn shift(&self) -> Option<f64> {
        self.shift
    }

    /// `1 / T` for uniform grids.
    pub fn step_size(&self) -> Option<f64> {
        self.uniform.then(|| 1.0 / self.steps() as f64)
    }
}
