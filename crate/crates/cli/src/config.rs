//! Flat `key = value` experiment configuration with dotted section keys.
//!
//! ```text
//! # comments start with '#'
//! field.id = sinusoidal_time:A=1,omega=3.14159
//! grid.steps = 50
//! method.name = fastflow
//! method.mu = calibrate
//! method.arms = 0,2,4,6
//! ```
//!
//! Every key has a default; unknown or repeated keys are rejected.

use std::fmt::{self, Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fastflow::{DeltaTSemantics, JumpMode};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    /// Analytic fixture id, e.g. `three_phase` or `sinusoidal_time:A=2`.
    Analytic(String),
    /// Path to an `mlpfield-v1` checkpoint.
    Checkpoint(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Full,
    FastFlow,
    FixedSkip,
    ReuseVelocity,
    Lms,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Full, Method::FastFlow, Method::FixedSkip, Method::ReuseVelocity, Method::Lms];

    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::FastFlow => "fastflow",
            Method::FixedSkip => "fixed_skip",
            Method::ReuseVelocity => "reuse_velocity",
            Method::Lms => "lms",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            format!("expected one of full, fastflow, fixed_skip, reuse_velocity, lms; got `{s}`")
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuSetting {
    Calibrate,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    pub mu: MuSetting,
    pub gamma: f64,
    pub arms: Vec<usize>,
    pub delta_t: DeltaTSemantics,
    pub jump: JumpMode,
    /// Evaluation period of `fixed_skip`.
    pub skip_every: usize,
    /// rel-L1 threshold of `reuse_velocity`.
    pub threshold: f64,
    /// Skip length of `lms`.
    pub lms_skip: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSection {
    pub dataset: String,
    pub dataset_params: Vec<f64>,
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    /// Checkpoint path; relative paths resolve against the output directory.
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySection {
    pub steps: Vec<usize>,
    pub skips: Vec<usize>,
    pub x0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretSection {
    pub best: f64,
    pub gaps: Vec<f64>,
    pub rounds: usize,
    pub seeds: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub field: FieldSource,
    pub dim: usize,
    pub steps: usize,
    pub shift: f64,
    pub method: MethodConfig,
    pub generations: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub train: TrainSection,
    pub verify: VerifySection,
    pub regret: RegretSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            field: FieldSource::Analytic("sinusoidal_time".into()),
            dim: 2,
            steps: 50,
            shift: 1.0,
            method: MethodConfig {
                method: Method::FastFlow,
                mu: MuSetting::Calibrate,
                gamma: 2.0,
                arms: vec![0, 2, 4, 6],
                delta_t: DeltaTSemantics::AnchorOffset,
                jump: JumpMode::Extrapolated,
                skip_every: 2,
                threshold: 0.05,
                lms_skip: 1,
            },
            generations: 1,
            seed: 0,
            out: PathBuf::from("results"),
            train: TrainSection {
                dataset: "gaussian_mixture".into(),
                dataset_params: Vec::new(),
                steps: 3000,
                batch: 256,
                learning_rate: 0.03,
                hidden: 64,
                output: PathBuf::from("toy.json"),
            },
            verify: VerifySection { steps: vec![50, 100, 200], skips: vec![1, 5, 10], x0: 0.0 },
            regret: RegretSection {
                best: 0.9,
                gaps: vec![0.8, 0.5, 0.3, 0.0],
                rounds: 1000,
                seeds: 5,
                gamma: 2.0,
            },
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::config(key, format!("cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_value(key, s)).collect()
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn delta_t_name(d: DeltaTSemantics) -> &'static str {
    match d {
        DeltaTSemantics::AnchorOffset => "anchor_offset",
        DeltaTSemantics::Literal => "literal",
    }
}

fn jump_name(j: JumpMode) -> &'static str {
    match j {
        JumpMode::Extrapolated => "extrapolated",
        JumpMode::PlainEuler => "plain_euler",
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
        text.parse()
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let m = &mut self.method;
        match key {
            "field.id" => self.field = FieldSource::Analytic(value.to_string()),
            "field.checkpoint" => self.field = FieldSource::Checkpoint(PathBuf::from(value)),
            "field.dim" => self.dim = parse_value(key, value)?,
            "grid.steps" => self.steps = parse_value(key, value)?,
            "grid.shift" => self.shift = parse_value(key, value)?,
            "method.name" => m.method = value.parse().map_err(|e| CliError::config(key, e))?,
            "method.mu" => {
                m.mu = if value == "calibrate" {
                    MuSetting::Calibrate
                } else {
                    MuSetting::Fixed(parse_value(key, value)?)
                }
            }
            "method.gamma" => m.gamma = parse_value(key, value)?,
            "method.arms" => m.arms = parse_list(key, value)?,
            "method.delta_t" => {
                m.delta_t = match value {
                    "anchor_offset" => DeltaTSemantics::AnchorOffset,
                    "literal" => DeltaTSemantics::Literal,
                    _ => return Err(CliError::config(key, "expected anchor_offset or literal")),
                }
            }
            "method.jump" => {
                m.jump = match value {
                    "extrapolated" => JumpMode::Extrapolated,
                    "plain_euler" => JumpMode::PlainEuler,
                    _ => return Err(CliError::config(key, "expected extrapolated or plain_euler")),
                }
            }
            "method.j" => m.skip_every = parse_value(key, value)?,
            "method.delta" => m.threshold = parse_value(key, value)?,
            "method.m" => m.lms_skip = parse_value(key, value)?,
            "run.generations" => self.generations = parse_value(key, value)?,
            "run.seed" => self.seed = parse_value(key, value)?,
            "run.out" => self.out = PathBuf::from(value),
            "train.dataset" => self.train.dataset = value.to_string(),
            "train.dataset_params" => self.train.dataset_params = parse_list(key, value)?,
            "train.steps" => self.train.steps = parse_value(key, value)?,
            "train.batch" => self.train.batch = parse_value(key, value)?,
            "train.learning_rate" => self.train.learning_rate = parse_value(key, value)?,
            "train.hidden" => self.train.hidden = parse_value(key, value)?,
            "train.output" => self.train.output = PathBuf::from(value),
            "verify.steps" => self.verify.steps = parse_list(key, value)?,
            "verify.skips" => self.verify.skips = parse_list(key, value)?,
            "verify.x0" => self.verify.x0 = parse_value(key, value)?,
            "regret.best" => self.regret.best = parse_value(key, value)?,
            "regret.gaps" => self.regret.gaps = parse_list(key, value)?,
            "regret.rounds" => self.regret.rounds = parse_value(key, value)?,
            "regret.seeds" => self.regret.seeds = parse_value(key, value)?,
            "regret.gamma" => self.regret.gamma = parse_value(key, value)?,
            _ => return Err(CliError::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks ranges and cross-key requirements.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CliError::config(key, format!("must be positive, got {v}")))
            }
        };
        if self.dim == 0 {
            return Err(CliError::config("field.dim", "must be at least 1"));
        }
        if let FieldSource::Checkpoint(p) = &self.field {
            if !p.is_file() {
                return Err(CliError::config("field.checkpoint", format!("{} does not exist", p.display())));
            }
        }
        if self.steps == 0 {
            return Err(CliError::config("grid.steps", "must be at least 1"));
        }
        positive("grid.shift", self.shift)?;
        let m = &self.method;
        if let MuSetting::Fixed(mu) = m.mu {
            positive("method.mu", mu)?;
        }
        positive("method.gamma", m.gamma)?;
        if !m.arms.contains(&0) {
            return Err(CliError::config("method.arms", "must contain 0"));
        }
        if m.skip_every == 0 {
            return Err(CliError::config("method.j", "must be at least 1"));
        }
        if !(m.threshold >= 0.0) {
            return Err(CliError::config("method.delta", "must be non-negative"));
        }
        if self.generations == 0 {
            return Err(CliError::config("run.generations", "must be at least 1"));
        }
        positive("train.learning_rate", self.train.learning_rate)?;
        if self.train.batch == 0 || self.train.hidden == 0 {
            return Err(CliError::config("train.batch", "batch and hidden width must be positive"));
        }
        if self.verify.steps.is_empty() || self.verify.skips.is_empty() {
            return Err(CliError::config("verify.steps", "steps and skip counts must be non-empty"));
        }
        if self.regret.gaps.is_empty() {
            return Err(CliError::config("regret.gaps", "need at least one arm"));
        }
        if self.regret.gaps.iter().any(|g| !(*g >= 0.0)) {
            return Err(CliError::config("regret.gaps", "gaps must be non-negative"));
        }
        if self.regret.seeds == 0 || self.regret.rounds == 0 {
            return Err(CliError::config("regret.seeds", "seeds and rounds must be positive"));
        }
        positive("regret.gamma", self.regret.gamma)?;
        Ok(())
    }
}

impl FromStr for ExperimentConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}", n + 1), "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(CliError::config(key, "given more than once"));
            }
            if (key == "field.id" && seen.contains("field.checkpoint"))
                || (key == "field.checkpoint" && seen.contains("field.id"))
            {
                return Err(CliError::config(key, "field.id and field.checkpoint are exclusive"));
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }
}

impl Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}");
        match &self.field {
            FieldSource::Analytic(id) => kv("field.id", id.clone())?,
            FieldSource::Checkpoint(p) => kv("field.checkpoint", p.display().to_string())?,
        }
        let m = &self.method;
        kv("field.dim", self.dim.to_string())?;
        kv("grid.steps", self.steps.to_string())?;
        kv("grid.shift", self.shift.to_string())?;
        kv("method.name", m.method.name().into())?;
        kv(
            "method.mu",
            match m.mu {
                MuSetting::Calibrate => "calibrate".into(),
                MuSetting::Fixed(mu) => mu.to_string(),
            },
        )?;
        kv("method.gamma", m.gamma.to_string())?;
        kv("method.arms", join(&m.arms))?;
        kv("method.delta_t", delta_t_name(m.delta_t).into())?;
        kv("method.jump", jump_name(m.jump).into())?;
        kv("method.j", m.skip_every.to_string())?;
        kv("method.delta", m.threshold.to_string())?;
        kv("method.m", m.lms_skip.to_string())?;
        kv("run.generations", self.generations.to_string())?;
        kv("run.seed", self.seed.to_string())?;
        kv("run.out", self.out.display().to_string())?;
        kv("train.dataset", self.train.dataset.clone())?;
        kv("train.dataset_params", join(&self.train.dataset_params))?;
        kv("train.steps", self.train.steps.to_string())?;
        kv("train.batch", self.train.batch.to_string())?;
        kv("train.learning_rate", self.train.learning_rate.to_string())?;
        kv("train.hidden", self.train.hidden.to_string())?;
        kv("train.output", self.train.output.display().to_string())?;
        kv("verify.steps", join(&self.verify.steps))?;
        kv("verify.skips", join(&self.verify.skips))?;
        kv("verify.x0", self.verify.x0.to_string())?;
        kv("regret.best", self.regret.best.to_string())?;
        kv("regret.gaps", join(&self.regret.gaps))?;
        kv("regret.rounds", self.regret.rounds.to_string())?;
        kv("regret.seeds", self.regret.seeds.to_string())?;
        kv("regret.gamma", self.regret.gamma.to_string())?;
        f.write_str(&s)
    }
}

pub(crate) fn method_label(cfg: &ExperimentConfig, mu: Option<f64>) -> String {
    let m = &cfg.method;
    let detail = match m.method {
        Method::Full => String::new(),
        Method::FastFlow => format!(
            " mu={} gamma={} arms={} delta_t={} jump={}",
            mu.map_or("-".into(), |v| format!("{v:e}")),
            m.gamma,
            join(&m.arms),
            delta_t_name(m.delta_t),
            jump_name(m.jump)
        ),
        Method::FixedSkip => format!(" j={}", m.skip_every),
        Method::ReuseVelocity => format!(" delta={}", m.threshold),
        Method::Lms => format!(" m={}", m.lms_skip),
    };
    format!("{}{detail}", m.method.name())
}
