//! Per-timestep UCB agents and the analytics around them.
//!
//! One [`UcbAgent`] lives at every step index of the sampling grid. Its arms
//! are skip lengths; its reward for skipping `m` steps is
//! `mu * m - mse(v̂, v)`, where `v̂` is the extrapolated velocity and `v` the
//! model velocity at the next evaluated index. Agents persist across
//! generations inside a [`BanditRegistry`].

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::VelocityField;
use crate::solver::{
    extrapolate_velocity, fastflow_generate, full_trajectory, FastFlowConfig, SkipPolicy, TimeGrid,
    TrajectoryRecord,
};
use crate::vecops::mse;

pub const REGISTRY_FORMAT: &str = "banditreg-v1";

/// Lower clamp for a calibrated trade-off.
pub const MU_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    mu: f64,
}

impl RewardParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Format(format!("mu must be positive, got {mu}")));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// `(r, ℓ)` with `ℓ = mse(v_hat, v_true)` and `r = mu * alpha - ℓ`.
pub fn compute_reward(
    params: &RewardParams,
    alpha: usize,
    v_hat: &[f64],
    v_true: &[f64],
) -> Result<(f64, f64)> {
    if v_hat.len() != v_true.len() {
        return Err(Error::DimensionMismatch { expected: v_true.len(), got: v_hat.len() });
    }
    let loss = mse(v_hat, v_true);
    Ok((params.mu * alpha as f64 - loss, loss))
}

/// UCB agent over a fixed set of skip lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcbAgent {
    arms: Vec<usize>,
    q: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
    gamma: f64,
}

impl UcbAgent {
    /// Fresh agent; arms are sorted and de-duplicated.
    pub fn new(arms: &[usize], gamma: f64) -> Result<Self> {
        let mut arms = arms.to_vec();
        arms.sort_unstable();
        arms.dedup();
        if arms.is_empty() {
            return Err(Error::Format("an agent needs at least one arm".into()));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Format(format!("gamma must be non-negative, got {gamma}")));
        }
        let k = arms.len();
        Ok(Self { arms, q: vec![0.0; k], counts: vec![0; k], total: 0, gamma })
    }

    /// Agent with given statistics; `n` is the sum of the counts.
    pub fn with_stats(arms: &[usize], q: &[f64], counts: &[u64], gamma: f64) -> Result<Self> {
        let mut agent = Self::new(arms, gamma)?;
        if agent.arms.len() != arms.len() || q.len() != arms.len() || counts.len() != arms.len() {
            return Err(Error::Format("arms, q and counts must align".into()));
        }
        agent.arms = arms.to_vec();
        agent.q = q.to_vec();
        agent.counts = counts.to_vec();
        agent.total = counts.iter().sum();
        Ok(agent)
    }

    pub fn arms(&self) -> &[usize] {
        &self.arms
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_initialized(&self) -> bool {
        self.counts.iter().all(|&n| n > 0)
    }

    /// Smallest arm not yet played.
    pub fn next_unplayed(&self) -> Option<usize> {
        self.counts.iter().position(|&n| n == 0).map(|i| self.arms[i])
    }

    fn index_of(&self, arm: usize) -> Result<usize> {
        self.arms.iter().position(|&a| a == arm).ok_or(Error::UnknownArm(arm))
    }

    /// UCB score `Q(α) + γ sqrt(ln n / N(α))` of every arm.
    pub fn scores(&self) -> Result<Vec<f64>> {
        if !self.is_initialized() {
            return Err(Error::Uninitialized);
        }
        let ln_n = (self.total as f64).ln();
        Ok(self.q.iter().zip(&self.counts).map(|(q, &n)| q + self.gamma * (ln_n / n as f64).sqrt()).collect())
    }

    /// Incremental mean update of the played arm.
    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        let i = self.index_of(arm)?;
        self.counts[i] += 1;
        self.q[i] += (reward - self.q[i]) / self.counts[i] as f64;
        self.total += 1;
        Ok(())
    }

    /// Forced round-robin while arms remain unplayed, UCB afterwards.
    pub fn choose(&self) -> Result<usize> {
        match self.next_unplayed() {
            Some(arm) => Ok(arm),
            None => select_arm(self),
        }
    }
}

/// UCB arm choice; ties go to the smallest skip length.
pub fn select_arm(agent: &UcbAgent) -> Result<usize> {
    let scores = agent.scores()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(agent.arms[best])
}

/// Arm maximizing the true mean reward `mu * α - ℓ_α`; ties go to the
/// smallest skip length.
pub fn optimal_arm(arms: &[usize], losses: &[f64], mu: f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    let mut order: Vec<usize> = (0..arms.len()).collect();
    order.sort_by_key(|&i| arms[i]);
    for i in order {
        let value = mu * arms[i] as f64 - losses[i];
        if best.is_none_or(|(_, b)| value > b) {
            best = Some((arms[i], value));
        }
    }
    best.expect("at least one arm").0
}

/// One line of the append-only reward log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardLogEntry {
    pub generation: u64,
    pub step: usize,
    pub arm: usize,
    pub reward: f64,
    pub loss: f64,
}

/// Agents keyed by step index, plus the reward log that reproduces them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BanditRegistry {
    horizon: Option<usize>,
    gamma: Option<f64>,
    generations: u64,
    agents: BTreeMap<usize, UcbAgent>,
    log: Vec<RewardLogEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AgentState {
    step: usize,
    arms: Vec<usize>,
    q: Vec<f64>,
    counts: Vec<u64>,
    n: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegistryState {
    format: String,
    horizon: Option<usize>,
    gamma: Option<f64>,
    generations: u64,
    agents: Vec<AgentState>,
}

impl BanditRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty() && self.log.is_empty()
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    /// Number of generations started so far.
    pub fn generations(&self) -> u64 {
        self.generations
    }

    pub fn agent(&self, step: usize) -> Option<&UcbAgent> {
        self.agents.get(&step)
    }

    pub fn agents(&self) -> impl Iterator<Item = (usize, &UcbAgent)> {
        self.agents.iter().map(|(k, a)| (*k, a))
    }

    pub fn log(&self) -> &[RewardLogEntry] {
        &self.log
    }

    /// True once every existing agent has played each of its arms.
    pub fn is_initialized(&self) -> bool {
        !self.agents.is_empty() && self.agents.values().all(UcbAgent::is_initialized)
    }

    /// Opens a new generation on a `horizon`-step grid. The first call fixes
    /// the horizon and exploration constant.
    pub fn begin_generation(&mut self, horizon: usize, gamma: f64) -> Result<()> {
        match self.horizon {
            Some(h) if h != horizon => return Err(Error::HorizonMismatch { registry: h, grid: horizon }),
            _ => self.horizon = Some(horizon),
        }
        self.gamma.get_or_insert(gamma);
        self.generations += 1;
        Ok(())
    }

    fn current_generation(&self) -> u64 {
        self.generations.saturating_sub(1)
    }

    /// Arm for the agent at `step`, creating it on first visit with `arms`.
    pub fn choose(&mut self, step: usize, arms: &[usize]) -> Result<usize> {
        let gamma = self.gamma.unwrap_or(FastFlowConfig::DEFAULT_GAMMA);
        let agent = match self.agents.entry(step) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(UcbAgent::new(arms, gamma)?),
        };
        if agent.arms != arms {
            return Err(Error::Format(format!(
                "agent at step {step} was created with arms {:?}, now offered {arms:?}",
                agent.arms
            )));
        }
        agent.choose()
    }

    /// Feeds a reward to the agent at `step` and appends it to the log.
    pub fn record(&mut self, step: usize, arm: usize, reward: f64, loss: f64) -> Result<()> {
        let agent =
            self.agents.get_mut(&step).ok_or_else(|| Error::Format(format!("no agent at step {step}")))?;
        agent.update(arm, reward)?;
        self.log.push(RewardLogEntry { generation: self.current_generation(), step, arm, reward, loss });
        Ok(())
    }

    /// Rebuilds agent statistics from the log, keeping arm sets and settings.
    pub fn replay(&self) -> Result<BanditRegistry> {
        let mut fresh = BanditRegistry {
            horizon: self.horizon,
            gamma: self.gamma,
            generations: self.generations,
            agents: BTreeMap::new(),
            log: Vec::with_capacity(self.log.len()),
        };
        for (&k, agent) in &self.agents {
            fresh.agents.insert(k, UcbAgent::new(&agent.arms, agent.gamma)?);
        }
        for e in &self.log {
            let agent = fresh
                .agents
                .get_mut(&e.step)
                .ok_or_else(|| Error::Format(format!("log references unknown step {}", e.step)))?;
            agent.update(e.arm, e.reward)?;
            fresh.log.push(*e);
        }
        Ok(fresh)
    }

    /// Path of the JSON-lines reward log stored next to `path`.
    pub fn log_path(path: &Path) -> PathBuf {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("registry");
        path.with_file_name(format!("{stem}.log.jsonl"))
    }

    /// Writes the agent state to `path` and the full log next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let state = RegistryState {
            format: REGISTRY_FORMAT.into(),
            horizon: self.horizon,
            gamma: self.gamma,
            generations: self.generations,
            agents: self
                .agents
                .iter()
                .map(|(&step, a)| AgentState {
                    step,
                    arms: a.arms.clone(),
                    q: a.q.clone(),
                    counts: a.counts.clone(),
                    n: a.total,
                })
                .collect(),
        };
        fs::write(path, serde_json::to_string_pretty(&state)?)?;
        let mut w = BufWriter::new(File::create(Self::log_path(path))?);
        for e in &self.log {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a registry written by [`save`](Self::save). A missing log file
    /// is treated as an empty log.
    pub fn load(path: &Path) -> Result<BanditRegistry> {
        let state: RegistryState = serde_json::from_str(&fs::read_to_string(path)?)?;
        if state.format != REGISTRY_FORMAT {
            return Err(Error::Format(format!(
                "expected format `{REGISTRY_FORMAT}`, found `{}`",
                state.format
            )));
        }
        let gamma = state.gamma.unwrap_or(FastFlowConfig::DEFAULT_GAMMA);
        let mut agents = BTreeMap::new();
        for a in state.agents {
            let agent = UcbAgent::with_stats(&a.arms, &a.q, &a.counts, gamma)?;
            if agent.total != a.n {
                return Err(Error::Format(format!("agent {}: n != sum of counts", a.step)));
            }
            agents.insert(a.step, agent);
        }
        let mut log = Vec::new();
        let log_path = Self::log_path(path);
        if log_path.exists() {
            for line in BufReader::new(File::open(log_path)?).lines() {
                let line = line?;
                if !line.trim().is_empty() {
                    log.push(serde_json::from_str(&line)?);
                }
            }
        }
        Ok(BanditRegistry {
            horizon: state.horizon,
            gamma: state.gamma,
            generations: state.generations,
            agents,
            log,
        })
    }
}

impl SkipPolicy for BanditRegistry {
    fn choose(&mut self, step: usize, arms: &[usize]) -> Result<usize> {
        BanditRegistry::choose(self, step, arms)
    }

    fn observe(&mut self, step: usize, arm: usize, reward: f64, loss: f64) -> Result<()> {
        self.record(step, arm, reward, loss)
    }
}

/// Runs the first generation on an empty registry. Agents visited during it
/// play their arms round-robin; agents seen later do the same lazily.
pub fn initialize_registry<F: VelocityField + ?Sized>(
    registry: &mut BanditRegistry,
    field: &F,
    grid: &TimeGrid,
    x0: &[f64],
    config: &FastFlowConfig,
) -> Result<TrajectoryRecord> {
    if !registry.is_empty() {
        return Err(Error::Format("registry is already initialized".into()));
    }
    fastflow_generate(field, grid, x0, config, registry)
}

/// Result of [`calibrate_mu`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuCalibration {
    pub mu: f64,
    /// Largest one-step extrapolation MSE along the full pass.
    pub max_mse: f64,
    pub clamped: bool,
}

/// `mu = max_k mse(v̂_k, v_k) / T`, where `v̂_k` extrapolates one step ahead
/// from `v_{k-1}` and `v_{k-2}` along one full Euler pass.
pub fn calibrate_mu<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    x0: &[f64],
) -> Result<MuCalibration> {
    let full = full_trajectory(field, grid, x0)?;
    let v = &full.velocities;
    let mut max_mse: f64 = 0.0;
    for k in 2..v.len() {
        let hat = extrapolate_velocity(
            &v[k - 1],
            &v[k - 2],
            grid.t(k - 1),
            grid.t(k - 2),
            grid.t(k) - grid.t(k - 1),
        )?;
        max_mse = max_mse.max(mse(&hat, &v[k]));
    }
    let raw = max_mse / grid.steps() as f64;
    let clamped = !(raw >= MU_FLOOR);
    if clamped {
        log::warn!("calibrated mu {raw:e} is below the floor; using {MU_FLOOR:e}");
    }
    Ok(MuCalibration { mu: if clamped { MU_FLOOR } else { raw }, max_mse, clamped })
}

/// `regret_n = Σ_{j≤n} (max mean - mean of arm j)` for arm indices `choices`.
pub fn cumulative_regret(choices: &[usize], true_means: &[f64]) -> Vec<f64> {
    let best = true_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    choices
        .iter()
        .scan(0.0, |acc, &i| {
            *acc += best - true_means[i];
            Some(*acc)
        })
        .collect()
}

/// Closed-form expected total skip count after `n` rounds:
/// `n i* + Σ_{i≠i*} (4 ln n / Δ_i²)(i - i*)`, where arm `i` skips `levels[i]`
/// steps and `optimal` indexes the best arm. Infinite gaps contribute nothing.
pub fn expected_skips(levels: &[f64], gaps: &[f64], optimal: usize, n: f64) -> Result<f64> {
    if levels.len() != gaps.len() || optimal >= levels.len() {
        return Err(Error::Format("levels and gaps must align with a valid optimum".into()));
    }
    let best = levels[optimal];
    let mut total = n * best;
    for (i, (&level, &gap)) in levels.iter().zip(gaps).enumerate() {
        if i == optimal {
            continue;
        }
        if !(gap > 0.0) {
            return Err(Error::ZeroGap(i));
        }
        if gap.is_finite() {
            total += 4.0 * n.ln() / (gap * gap) * (level - best);
        }
    }
    Ok(total)
}

/// Stationary synthetic instance with Bernoulli rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliBandit {
    /// Success probability of each arm.
    pub means: Vec<f64>,
}

impl BernoulliBandit {
    /// Arms with success probability `best - gap_i`.
    pub fn from_gaps(best: f64, gaps: &[f64]) -> Self {
        Self { means: gaps.iter().map(|g| best - g).collect() }
    }

    pub fn optimal(&self) -> usize {
        let mut best = 0;
        for (i, m) in self.means.iter().enumerate() {
            if *m > self.means[best] {
                best = i;
            }
        }
        best
    }

    pub fn gaps(&self) -> Vec<f64> {
        let best = self.means[self.optimal()];
        self.means.iter().map(|m| best - m).collect()
    }
}

/// Plays `rounds` rounds of UCB (forced round-robin first) on `instance`;
/// arm `i` is labelled with skip length `i`. Returns chosen arm indices.
pub fn simulate_ucb(instance: &BernoulliBandit, gamma: f64, rounds: usize, seed: u64) -> Result<Vec<usize>> {
    let labels: Vec<usize> = (0..instance.means.len()).collect();
    let mut agent = UcbAgent::new(&labels, gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut choices = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let arm = agent.choose()?;
        let reward = if rng.random_bool(instance.means[arm].clamp(0.0, 1.0)) { 1.0 } else { 0.0 };
        agent.update(arm, reward)?;
        choices.push(arm);
    }
    Ok(choices)
}

/// Element-wise mean of the cumulative regret over `seeds`.
pub fn mean_regret_curve(
    instance: &BernoulliBandit,
    gamma: f64,
    rounds: usize,
    seeds: &[u64],
) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; rounds];
    for &seed in seeds {
        let choices = simulate_ucb(instance, gamma, rounds, seed)?;
        for (s, r) in sum.iter_mut().zip(cumulative_regret(&choices, &instance.means)) {
            *s += r;
        }
    }
    Ok(sum.into_iter().map(|s| s / seeds.len() as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_field_id;

    #[test]
    fn select_arm_examples() {
        let a = UcbAgent::with_stats(&[0, 2], &[1.0, 0.5], &[1, 1], 2.0).unwrap();
        assert_eq!(select_arm(&a).unwrap(), 0);
        let b = UcbAgent::with_stats(&[0, 1], &[0.0, 0.0], &[10, 1], 2.0).unwrap();
        assert_eq!(b.total(), 11);
        assert_eq!(select_arm(&b).unwrap(), 1);
        let c = UcbAgent::with_stats(&[0, 4], &[0.5, 0.5], &[3, 3], 2.0).unwrap();
        assert_eq!(select_arm(&c).unwrap(), 0);
        let fresh = UcbAgent::new(&[0, 1], 2.0).unwrap();
        assert!(matches!(select_arm(&fresh), Err(Error::Uninitialized)));
    }

    #[test]
    fn reward_examples() {
        let p = RewardParams::new(0.001).unwrap();
        // mse of a single coordinate differing by sqrt(0.002) is 0.002.
        let (r, l) = compute_reward(&p, 4, &[0.002f64.sqrt()], &[0.0]).unwrap();
        assert!((l - 0.002).abs() < 1e-15);
        assert!((r - 0.002).abs() < 1e-15);
        let (r, l) = compute_reward(&p, 3, &[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((r, l), (0.003, 0.0));
        assert_eq!(compute_reward(&p, 0, &[5.0], &[5.0]).unwrap(), (0.0, 0.0));
        assert!(compute_reward(&p, 0, &[5.0], &[5.0, 1.0]).is_err());
        assert!(RewardParams::new(0.0).is_err());
    }

    #[test]
    fn update_examples() {
        let mut a = UcbAgent::with_stats(&[0, 2], &[0.0, 0.0], &[1, 1], 2.0).unwrap();
        a.update(0, 1.0).unwrap();
        assert_eq!((a.q()[0], a.counts()[0], a.total()), (0.5, 2, 3));
        let mut b = UcbAgent::new(&[0, 3], 2.0).unwrap();
        for _ in 0..9 {
            b.update(3, 0.125).unwrap();
        }
        assert_eq!(b.q()[1], 0.125);
        assert!(matches!(b.update(7, 1.0), Err(Error::UnknownArm(7))));
    }

    #[test]
    fn forced_round_robin() {
        let mut reg = BanditRegistry::new();
        reg.begin_generation(50, 2.0).unwrap();
        let arms = [0, 2, 4, 6];
        for expected in arms {
            let arm = reg.choose(5, &arms).unwrap();
            assert_eq!(arm, expected);
            reg.record(5, arm, -0.1, 0.1).unwrap();
        }
        assert_eq!(reg.agent(5).unwrap().counts(), &[1, 1, 1, 1]);
        assert!(reg.agent(5).unwrap().scores().is_ok());
        assert!(reg.choose(5, &[0, 2]).is_err());
        assert!(reg.begin_generation(25, 2.0).is_err());
    }

    #[test]
    fn expected_skip_examples() {
        let n = std::f64::consts::E.powi(2);
        let e = expected_skips(&[0.0, 1.0], &[0.0, 1.0], 0, n).unwrap();
        assert!((e - 8.0).abs() < 1e-12);
        assert_eq!(expected_skips(&[2.0], &[0.0], 0, 1000.0).unwrap(), 2000.0);
        assert!(matches!(expected_skips(&[0.0, 1.0], &[0.0, 0.0], 0, 10.0), Err(Error::ZeroGap(1))));
    }

    #[test]
    fn regret_examples() {
        let means = [0.2, 0.7];
        assert!(cumulative_regret(&[1; 100], &means).iter().all(|r| *r == 0.0));
        let worst = cumulative_regret(&[0; 40], &means);
        for (n, r) in worst.iter().enumerate() {
            assert!((r - 0.5 * (n + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_floor_for_affine_time() {
        let (f, _) = parse_field_id("linear_time:a=1,b=-3", 2).unwrap();
        let grid = TimeGrid::uniform(50).unwrap();
        let cal = calibrate_mu(&f, &grid, &[0.0, 0.0]).unwrap();
        assert!(cal.clamped);
        assert_eq!(cal.mu, MU_FLOOR);
        assert!(cal.max_mse < 1e-25);
    }

    #[test]
    fn registry_save_load_round_trip() {
        let (f, _) = parse_field_id("three_phase", 1).unwrap();
        let grid = TimeGrid::uniform(30).unwrap();
        let config = FastFlowConfig::for_horizon(30, 1e-3);
        let mut reg = BanditRegistry::new();
        initialize_registry(&mut reg, &f, &grid, &[0.0], &config).unwrap();
        for _ in 0..5 {
            fastflow_generate(&f, &grid, &[0.0], &config, &mut reg).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("registry.json");
        reg.save(&path).unwrap();
        assert!(BanditRegistry::log_path(&path).exists());
        let loaded = BanditRegistry::load(&path).unwrap();
        assert_eq!(loaded.horizon(), Some(30));
        assert_eq!(loaded.generations(), 6);
        assert_eq!(loaded.log(), reg.log());
        for ((ka, a), (kb, b)) in loaded.agents().zip(reg.agents()) {
            assert_eq!(ka, kb);
            assert_eq!(a.counts(), b.counts());
            for (x, y) in a.q().iter().zip(b.q()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert!(initialize_registry(&mut reg, &f, &grid, &[0.0], &config).is_err());
    }
}
