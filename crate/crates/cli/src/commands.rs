//! Subcommand implementations. Each returns a small summary of what it wrote.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use fastflow::analysis::{isolated_skip_set, rel_l1_series, verify_bound, RunMetrics};
use fastflow::bandit::{calibrate_mu, mean_regret_curve, BernoulliBandit};
use fastflow::fields::{parse_field_id, sample_source, AnalyticField, TargetDataset};
use fastflow::solver::{
    fastflow_generate, fixed_skip_generate, full_trajectory, lms_generate, reuse_velocity_generate,
    ArmSchedule,
};
use fastflow::toyfm::{train, MlpField};
use fastflow::{
    BanditRegistry, FastFlowConfig, SmoothnessBounds, TimeGrid, TrainConfig, TrajectoryRecord, VelocityField,
};

use crate::config::{method_label, ExperimentConfig, FieldSource, Method, MuSetting};
use crate::error::CliError;

pub const RESULTS_FILE: &str = "results.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const REGISTRY_FILE: &str = "registry.json";
pub const BOUND_FILE: &str = "verify_bound.csv";
pub const REGRET_FILE: &str = "regret.csv";

/// Velocity field named by the configuration.
pub fn load_field(cfg: &ExperimentConfig) -> Result<Box<dyn VelocityField>, CliError> {
    match &cfg.field {
        FieldSource::Analytic(id) => Ok(Box::new(analytic_field(id, cfg.dim)?.0)),
        FieldSource::Checkpoint(path) => Ok(Box::new(MlpField::load(path).map_err(|e| match e {
            fastflow::Error::Io(_) | fastflow::Error::Json(_) | fastflow::Error::Format(_) => {
                CliError::config("field.checkpoint", e.to_string())
            }
            other => other.into(),
        })?)),
    }
}

fn analytic_field(id: &str, dim: usize) -> Result<(AnalyticField, SmoothnessBounds), CliError> {
    parse_field_id(id, dim).map_err(|e| CliError::config("field.id", e.to_string()))
}

fn field_name(cfg: &ExperimentConfig) -> String {
    match &cfg.field {
        FieldSource::Analytic(id) => id.clone(),
        FieldSource::Checkpoint(p) => p.display().to_string(),
    }
}

fn grid(cfg: &ExperimentConfig, steps: usize) -> Result<TimeGrid, CliError> {
    TimeGrid::shifted(steps, cfg.shift).map_err(|e| CliError::config("grid.shift", e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
}

/// Trains the toy field and writes its checkpoint.
pub fn train_toy(cfg: &ExperimentConfig) -> Result<TrainOutcome, CliError> {
    let t = &cfg.train;
    let dataset = TargetDataset::from_id(&t.dataset, &t.dataset_params)
        .map_err(|e| CliError::config("train.dataset", e.to_string()))?;
    let config = TrainConfig {
        steps: t.steps,
        batch: t.batch,
        learning_rate: t.learning_rate,
        seed: cfg.seed,
        hidden: t.hidden,
    };
    let (field, summary) = train(&config, &dataset)?;
    let checkpoint = cfg.out.join(&t.output);
    field.save(&checkpoint)?;
    info!("wrote {}", checkpoint.display());
    Ok(TrainOutcome { checkpoint, initial_loss: summary.initial_loss(), final_loss: summary.final_loss() })
}

/// One decision as stored in the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub step: usize,
    pub time: f64,
    pub arm: usize,
    pub reward: f64,
    pub loss: f64,
}

/// One line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub label: String,
    pub method: String,
    pub field: String,
    pub seed: u64,
    pub generation: u64,
    pub mu: Option<f64>,
    #[serde(flatten)]
    pub metrics: RunMetrics,
    pub evaluated: Vec<usize>,
    pub decisions: Vec<DecisionRow>,
    /// rel-L1 series of the fully evaluated run from the same initial state.
    pub rel_l1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub records: Vec<GenerationRecord>,
    pub registry: Option<PathBuf>,
}

fn generate(
    cfg: &ExperimentConfig,
    field: &dyn VelocityField,
    grid: &TimeGrid,
    x0: &[f64],
    ff: &FastFlowConfig,
    registry: &mut BanditRegistry,
) -> Result<TrajectoryRecord, CliError> {
    let m = &cfg.method;
    let rec = match m.method {
        Method::Full => full_trajectory(field, grid, x0)?,
        Method::FastFlow => fastflow_generate(field, grid, x0, ff, registry)?,
        Method::FixedSkip => fixed_skip_generate(field, grid, x0, m.skip_every)?,
        Method::ReuseVelocity => reuse_velocity_generate(field, grid, x0, m.threshold)?,
        Method::Lms => lms_generate(field, grid, x0, m.lms_skip)?,
    };
    Ok(rec)
}

/// Runs `run.generations` generations, appends them to `results.jsonl` and
/// regenerates `summary.csv`. FastFlow runs persist their bandit registry,
/// optionally continuing from `resume`.
pub fn run(cfg: &ExperimentConfig, resume: Option<&Path>) -> Result<RunOutcome, CliError> {
    let field = load_field(cfg)?;
    let grid = grid(cfg, cfg.steps)?;
    let dim = field.dim();
    let m = &cfg.method;
    if resume.is_some() && m.method != Method::FastFlow {
        return Err(CliError::config("--resume-registry", "only applies to method.name = fastflow"));
    }
    let mut registry = match resume {
        Some(path) => BanditRegistry::load(path)
            .map_err(|e| CliError::config("--resume-registry", format!("{}: {e}", path.display())))?,
        None => BanditRegistry::new(),
    };
    let start = registry.generations() as usize;
    let stream = sample_source(cfg.seed, start + cfg.generations, dim);
    let mu = match (m.method, m.mu) {
        (Method::FastFlow, MuSetting::Fixed(mu)) => Some(mu),
        (Method::FastFlow, MuSetting::Calibrate) => Some(calibrate_mu(field.as_ref(), &grid, &stream[0])?.mu),
        _ => None,
    };
    let ff = FastFlowConfig {
        mu: mu.unwrap_or(FastFlowConfig::MU_GENERATION),
        gamma: m.gamma,
        arms: ArmSchedule::Uniform(m.arms.clone()),
        delta_t: m.delta_t,
        jump: m.jump,
    };
    if m.method == Method::FastFlow {
        ff.validate(cfg.steps).map_err(|e| CliError::config("method", e.to_string()))?;
    }
    let label = format!("{} T={} {}", field_name(cfg), cfg.steps, method_label(cfg, mu));
    let mut records = Vec::with_capacity(cfg.generations);
    for (g, x0) in stream.iter().enumerate().skip(start) {
        let rec = generate(cfg, field.as_ref(), &grid, x0, &ff, &mut registry)?;
        let full = full_trajectory(field.as_ref(), &grid, x0)?;
        let metrics = RunMetrics::from_record(&rec, Some(&full))?;
        records.push(GenerationRecord {
            label: label.clone(),
            method: m.method.name().into(),
            field: field_name(cfg),
            seed: cfg.seed,
            generation: g as u64,
            mu,
            metrics,
            evaluated: rec.evaluated_indices(),
            decisions: rec
                .decisions
                .iter()
                .map(|d| DecisionRow {
                    step: d.step,
                    time: rec.times[d.step],
                    arm: d.arm,
                    reward: d.reward,
                    loss: d.loss,
                })
                .collect(),
            rel_l1: rel_l1_series(&full)?.values,
        });
    }

    fs::create_dir_all(&cfg.out)?;
    let mut file = OpenOptions::new().create(true).append(true).open(cfg.out.join(RESULTS_FILE))?;
    for r in &records {
        writeln!(file, "{}", serde_json::to_string(r)?)?;
    }
    write_summary(&cfg.out)?;
    let registry_path = if m.method == Method::FastFlow {
        let path = cfg.out.join(REGISTRY_FILE);
        registry.save(&path)?;
        Some(path)
    } else {
        None
    };
    info!("appended {} records to {}", records.len(), cfg.out.join(RESULTS_FILE).display());
    Ok(RunOutcome { records, registry: registry_path })
}

/// All records in `dir/results.jsonl`, in file order.
pub fn read_results(dir: &Path) -> Result<Vec<GenerationRecord>, CliError> {
    let path = dir.join(RESULTS_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::EmptyResults(dir.display().to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let records = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<Vec<GenerationRecord>, _>>()?;
    if records.is_empty() {
        return Err(CliError::EmptyResults(dir.display().to_string()));
    }
    Ok(records)
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Rewrites `summary.csv` from every record in the results file.
pub fn write_summary(dir: &Path) -> Result<(), CliError> {
    let records = read_results(dir)?;
    let mut w = csv::Writer::from_path(dir.join(SUMMARY_FILE))?;
    w.write_record([
        "label",
        "method",
        "seed",
        "generation",
        "steps",
        "eval_count",
        "speedup",
        "final_deviation",
        "skipped_set_size",
        "mean_reward",
        "mean_loss",
    ])?;
    for r in &records {
        let m = &r.metrics;
        w.write_record([
            r.label.clone(),
            r.method.clone(),
            r.seed.to_string(),
            r.generation.to_string(),
            m.steps.to_string(),
            m.eval_count.to_string(),
            m.speedup.to_string(),
            opt(m.final_deviation),
            m.skipped_set_size.to_string(),
            opt(m.mean_reward),
            opt(m.mean_loss),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub steps: usize,
    pub skipped: usize,
    pub empirical: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Strict single-skip bound check over `verify.steps` x `verify.skips`.
pub fn verify_bound_cmd(cfg: &ExperimentConfig) -> Result<Vec<BoundRow>, CliError> {
    let id = match &cfg.field {
        FieldSource::Analytic(id) => id,
        FieldSource::Checkpoint(_) => {
            return Err(CliError::config("field.checkpoint", "bound verification needs an analytic field"))
        }
    };
    let (field, bounds) = analytic_field(id, cfg.dim)?;
    let x0 = vec![cfg.verify.x0; cfg.dim];
    let mut rows = Vec::new();
    for &steps in &cfg.verify.steps {
        let grid = TimeGrid::uniform(steps).map_err(|e| CliError::config("verify.steps", e.to_string()))?;
        for &count in &cfg.verify.skips {
            let skips = isolated_skip_set(steps, count)
                .map_err(|e| CliError::config("verify.skips", e.to_string()))?;
            let r = verify_bound(&field, bounds, &grid, &x0, &skips)?;
            rows.push(BoundRow {
                steps,
                skipped: count,
                empirical: r.empirical,
                bound: r.bound,
                satisfied: r.satisfied,
            });
        }
    }
    fs::create_dir_all(&cfg.out)?;
    let mut w = csv::Writer::from_path(cfg.out.join(BOUND_FILE))?;
    w.write_record(["T", "skipped", "e_T", "bound", "satisfied"])?;
    for r in &rows {
        w.serialize((r.steps, r.skipped, r.empirical, r.bound, r.satisfied))?;
    }
    w.flush()?;
    Ok(rows)
}

/// Mean cumulative regret of UCB over `regret.seeds` seeds starting at `run.seed`.
pub fn regret_cmd(cfg: &ExperimentConfig) -> Result<Vec<f64>, CliError> {
    let r = &cfg.regret;
    let instance = BernoulliBandit::from_gaps(r.best, &r.gaps);
    if instance.means.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(CliError::config("regret.gaps", "arm means best - gap must lie in [0, 1]"));
    }
    let seeds: Vec<u64> = (0..r.seeds as u64).map(|i| cfg.seed + i).collect();
    let curve = mean_regret_curve(&instance, r.gamma, r.rounds, &seeds)?;
    fs::create_dir_all(&cfg.out)?;
    let mut w = csv::Writer::from_path(cfg.out.join(REGRET_FILE))?;
    w.write_record(["round", "mean_regret"])?;
    for (i, v) in curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(curve)
}
