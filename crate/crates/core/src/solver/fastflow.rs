use serde::{Deserialize, Serialize};

use super::record::{Extrapolation, SkipDecision, TrajectoryRecord};
use super::{advance, check_dim, extrapolate_velocity, TimeGrid};
use crate::bandit::{compute_reward, BanditRegistry, RewardParams};
use crate::error::{Error, Result};
use crate::fields::VelocityField;

/// How the offset handed to the extrapolator is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaTSemantics {
    /// Offset is `target time - t_k`, measured from the anchor. With a zero
    /// skip the step velocity is exactly `v_k`.
    #[default]
    AnchorOffset,
    /// Offset is the local step `t_{k+m+1} - t_{k+m}`, as written in the
    /// pseudo-code.
    Literal,
}

/// How the state is carried across the skipped stretch `k -> k+m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpMode {
    /// One stride with the extrapolated velocity at `t_{k+m}`.
    #[default]
    Extrapolated,
    /// One stride with the anchor velocity `v_k`.
    PlainEuler,
}

/// Skip lengths available to the agent at each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmSchedule {
    /// Same arms everywhere; arms that would overrun the horizon are dropped
    /// near the end of the grid.
    Uniform(Vec<usize>),
    /// Explicit arm set per step index; checked strictly against the horizon.
    PerStep(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastFlowConfig {
    pub mu: f64,
    pub gamma: f64,
    pub arms: ArmSchedule,
    pub delta_t: DeltaTSemantics,
    pub jump: JumpMode,
}

impl Default for FastFlowConfig {
    fn default() -> Self {
        Self {
            mu: Self::MU_GENERATION,
            gamma: Self::DEFAULT_GAMMA,
            arms: ArmSchedule::Uniform(vec![0, 2, 4, 6]),
            delta_t: DeltaTSemantics::default(),
            jump: JumpMode::default(),
        }
    }
}

impl FastFlowConfig {
    pub const DEFAULT_GAMMA: f64 = 2.0;
    /// Trade-off used for generation workloads when calibration is off.
    pub const MU_GENERATION: f64 = 0.001;
    /// Trade-off used for editing workloads when calibration is off.
    pub const MU_EDITING: f64 = 0.005;

    /// Arm set matched to the generation horizon: `[0,2,4,6]` for 25 and 50
    /// steps, `[0,1,2,3]` for 10 steps; other horizons use the closest.
    pub fn default_arms(steps: usize) -> Vec<usize> {
        if steps <= 17 {
            vec![0, 1, 2, 3]
        } else {
            vec![0, 2, 4, 6]
        }
    }

    pub fn for_horizon(steps: usize, mu: f64) -> Self {
        Self { mu, arms: ArmSchedule::Uniform(Self::default_arms(steps)), ..Self::default() }
    }

    pub fn validate(&self, steps: usize) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::Format(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Format(format!("gamma must be positive, got {}", self.gamma)));
        }
        let sets: Vec<&[usize]> = match &self.arms {
            ArmSchedule::Uniform(a) => vec![a],
            ArmSchedule::PerStep(per) => {
                if per.len() < steps {
                    return Err(Error::Format(format!(
                        "per-step arm schedule covers {} of {steps} steps",
                        per.len()
                    )));
                }
                per.iter().map(Vec::as_slice).collect()
            }
        };
        if sets.iter().any(|s| !s.contains(&0)) {
            return Err(Error::Format("every arm set must contain 0".into()));
        }
        if let ArmSchedule::PerStep(per) = &self.arms {
            for (k, set) in per.iter().enumerate().take(steps) {
                if let Some(&arm) = set.iter().find(|&&m| m > 0 && !skip_fits(k, m, steps)) {
                    return Err(Error::ArmOverrun { step: k, arm, horizon: steps });
                }
            }
        }
        Ok(())
    }

    /// Sorted, de-duplicated arms usable at step `k` of a `steps`-step grid.
    pub fn arms_at(&self, k: usize, steps: usize) -> Vec<usize> {
        let raw: &[usize] = match &self.arms {
            ArmSchedule::Uniform(a) => a,
            ArmSchedule::PerStep(per) => &per[k],
        };
        let mut arms: Vec<usize> =
            raw.iter().copied().filter(|&m| m == 0 || skip_fits(k, m, steps)).collect();
        arms.sort_unstable();
        arms.dedup();
        arms
    }
}

/// A skip of `m` from `k` must land on an index whose velocity is still
/// needed, i.e. `k + m + 1 <= T - 1`.
fn skip_fits(k: usize, m: usize, steps: usize) -> bool {
    k + m + 2 <= steps
}

/// Source of skip decisions for [`generate_with_policy`].
pub trait SkipPolicy {
    /// Picks an arm from `arms` (sorted, non-empty, contains 0) at `step`.
    fn choose(&mut self, step: usize, arms: &[usize]) -> Result<usize>;

    /// Feedback for the choice made at `step`.
    fn observe(&mut self, step: usize, arm: usize, reward: f64, loss: f64) -> Result<()>;
}

/// Always plays the largest available arm not exceeding the given length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedSkip(pub usize);

impl SkipPolicy for FixedSkip {
    fn choose(&mut self, _step: usize, arms: &[usize]) -> Result<usize> {
        Ok(arms.iter().copied().filter(|&m| m <= self.0).max().unwrap_or(0))
    }

    fn observe(&mut self, _: usize, _: usize, _: f64, _: f64) -> Result<()> {
        Ok(())
    }
}

/// One skip of length `m` from the evaluated anchor `k` (previous evaluated
/// index `p`). Returns `(x_{k+m}, stride velocity, step velocity, x_{k+m+1})`.
///
/// `times` must hold `t_p, t_k, t_{k+m}, t_{k+m+1}`.
#[allow(clippy::type_complexity)]
pub fn skip_update(
    x_k: &[f64],
    v_k: &[f64],
    v_p: &[f64],
    times: [f64; 4],
    jump: JumpMode,
    delta_t: DeltaTSemantics,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let [t_p, t_k, t_jump, t_next] = times;
    let stride = t_jump - t_k;
    let (x_jump, v_stride) = if stride > 0.0 {
        let v = match jump {
            JumpMode::Extrapolated => extrapolate_velocity(v_k, v_p, t_k, t_p, stride)?,
            JumpMode::PlainEuler => v_k.to_vec(),
        };
        (super::euler_step(x_k, &v, stride)?, v)
    } else {
        (x_k.to_vec(), v_k.to_vec())
    };
    let step = t_next - t_jump;
    let offset = match delta_t {
        DeltaTSemantics::AnchorOffset => stride,
        DeltaTSemantics::Literal => step,
    };
    let v_step = extrapolate_velocity(v_k, v_p, t_k, t_p, offset)?;
    let x_next = super::euler_step(&x_jump, &v_step, step)?;
    Ok((x_jump, v_stride, v_step, x_next))
}

/// Bandit-driven sampling: per-step UCB agents in `bandits` choose how many
/// steps to extrapolate before the next model call, and learn from the
/// reward `mu * m - mse(v̂, v)` observed at the next evaluated index.
///
/// The registry persists across calls; each call counts as one generation.
pub fn fastflow_generate<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    x0: &[f64],
    config: &FastFlowConfig,
    bandits: &mut BanditRegistry,
) -> Result<TrajectoryRecord> {
    bandits.begin_generation(grid.steps(), config.gamma)?;
    generate_with_policy(field, grid, x0, config, bandits)
}

/// Fixed skip length `m` with the plain-Euler stride; on a uniform grid each
/// skip equals the linear-multistep closed form [`super::lms_jump`].
pub fn lms_generate<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    x0: &[f64],
    skip: usize,
) -> Result<TrajectoryRecord> {
    let config = FastFlowConfig {
        arms: ArmSchedule::Uniform(vec![0, skip]),
        jump: JumpMode::PlainEuler,
        delta_t: DeltaTSemantics::AnchorOffset,
        ..FastFlowConfig::default()
    };
    generate_with_policy(field, grid, x0, &config, &mut FixedSkip(skip))
}

/// The sampling loop shared by [`fastflow_generate`] and [`lms_generate`].
///
/// Indices 0 and 1 are always evaluated. At each decision index `k` the
/// velocity `v_k` is known; a skip `m` extrapolates `k+1..=k+m`, advances to
/// `k+m+1` and evaluates there, which becomes the next decision index. The
/// last step out of `t_{T-1}` uses the evaluated `v_{T-1}`.
pub fn generate_with_policy<F, P>(
    field: &F,
    grid: &TimeGrid,
    x0: &[f64],
    config: &FastFlowConfig,
    policy: &mut P,
) -> Result<TrajectoryRecord>
where
    F: VelocityField + ?Sized,
    P: SkipPolicy + ?Sized,
{
    check_dim(field, x0)?;
    let steps = grid.steps();
    config.validate(steps)?;
    let reward = RewardParams::new(config.mu)?;
    let mut rec = TrajectoryRecord::new(grid.times(), x0);
    let t = |k: usize| grid.t(k);

    let v0 = field.eval(x0, t(0));
    rec.evaluated[0] = true;
    let x1 = advance(x0, &v0, grid.dt(0), 1)?;
    rec.velocities.push(v0.clone());
    rec.states.push(x1);
    if steps == 1 {
        rec.finish();
        return Ok(rec);
    }

    let mut v_prev = v0;
    let mut v_cur = field.eval(&rec.states[1], t(1));
    rec.evaluated[1] = true;
    let (mut p, mut k) = (0usize, 1usize);

    while k + 1 < steps {
        let arms = config.arms_at(k, steps);
        let m = if arms.len() > 1 {
            let m = policy.choose(k, &arms)?;
            if !arms.contains(&m) {
                return Err(Error::ArmOverrun { step: k, arm: m, horizon: steps });
            }
            m
        } else {
            0
        };
        let next = k + m + 1;
        let (x_jump, v_stride, v_step, x_next) = skip_update(
            &rec.states[k],
            &v_cur,
            &v_prev,
            [t(p), t(k), t(k + m), t(next)],
            config.jump,
            config.delta_t,
        )
        .map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite { step: next },
            other => other,
        })?;

        // The stride is a single Euler move; intermediate states lie on it.
        for i in k + 1..k + m {
            let x = advance(&rec.states[k], &v_stride, t(i) - t(k), i)?;
            rec.states.push(x);
        }
        if m > 0 {
            if !x_jump.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { step: k + m });
            }
            rec.states.push(x_jump);
            let stride_target = match config.jump {
                JumpMode::Extrapolated => t(k + m),
                JumpMode::PlainEuler => t(k),
            };
            for i in k..k + m {
                rec.velocities.push(v_stride.clone());
                if config.jump == JumpMode::Extrapolated {
                    rec.extrapolations.push(Extrapolation {
                        step: i,
                        anchor: k,
                        previous: p,
                        target_time: stride_target,
                    });
                }
            }
        }
        if !x_next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { step: next });
        }
        let step_target = match config.delta_t {
            DeltaTSemantics::AnchorOffset => t(k + m),
            DeltaTSemantics::Literal => t(k) + grid.dt(k + m),
        };
        if m > 0 || config.delta_t == DeltaTSemantics::Literal {
            rec.extrapolations.push(Extrapolation {
                step: k + m,
                anchor: k,
                previous: p,
                target_time: step_target,
            });
        }
        rec.velocities.push(v_step.clone());
        rec.states.push(x_next);

        let v_next = field.eval(&rec.states[next], t(next));
        rec.evaluated[next] = true;

        if arms.len() > 1 {
            let predicted = match config.delta_t {
                DeltaTSemantics::AnchorOffset => {
                    extrapolate_velocity(&v_cur, &v_prev, t(k), t(p), t(next) - t(k))?
                }
                DeltaTSemantics::Literal => v_step,
            };
            let (r, loss) = compute_reward(&reward, m, &predicted, &v_next)?;
            policy.observe(k, m, r, loss)?;
            rec.decisions.push(SkipDecision { step: k, arm: m, reward: r, loss });
        }

        p = k;
        k = next;
        v_prev = std::mem::replace(&mut v_cur, v_next);
    }

    debug_assert_eq!(k, steps - 1);
    let last = advance(&rec.states[k], &v_cur, grid.dt(k), steps)?;
    rec.velocities.push(v_cur);
    rec.states.push(last);
    rec.finish();
    Ok(rec)
}
