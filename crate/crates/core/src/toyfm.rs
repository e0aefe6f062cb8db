//! A small tanh MLP trained by conditional flow matching on toy 2D data.
//!
//! The network maps `[x, t]` through two hidden layers to a velocity in
//! `R^d`. Training regresses `v(x_t, t)` onto `x1 - x0` along straight paths
//! `x_t = (1 - t) x0 + t x1`, with plain SGD and hand-written backprop.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{sample_source, sample_target, TargetDataset, VelocityField};
use crate::solver::{full_trajectory, TimeGrid};

pub const CHECKPOINT_FORMAT: &str = "mlpfield-v1";

/// Dense layer `y = W x + b` with row-major `W` of shape `rows x cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, weights: vec![0.0; rows * cols], bias: vec![0.0; rows] }
    }

    fn init(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = (3.0 / cols as f64).sqrt();
        Self {
            rows,
            cols,
            weights: (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect(),
            bias: vec![0.0; rows],
        }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            *o = self.bias[r] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// `(d + 1) -> h -> h -> d` tanh network used as a velocity field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpField {
    dim: usize,
    hidden: usize,
    layers: [Layer; 3],
}

/// Activations of one forward pass, kept for backprop.
struct Trace {
    input: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    out: Vec<f64>,
}

impl MlpField {
    /// Randomly initialized network (uniform fan-in scaling, zero biases).
    pub fn new(dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        if dim == 0 || hidden == 0 {
            return Err(Error::Format("dimension and hidden width must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            dim,
            hidden,
            layers: [
                Layer::init(hidden, dim + 1, &mut rng),
                Layer::init(hidden, hidden, &mut rng),
                Layer::init(dim, hidden, &mut rng),
            ],
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn layers(&self) -> &[Layer; 3] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// All parameters flattened, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    /// Inverse of [`params`](Self::params).
    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), got: p.len() });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let (w, b) = (l.weights.len(), l.bias.len());
            l.weights.copy_from_slice(&p[at..at + w]);
            l.bias.copy_from_slice(&p[at + w..at + w + b]);
            at += w + b;
        }
        Ok(())
    }

    fn zeros_like(&self) -> Self {
        Self {
            dim: self.dim,
            hidden: self.hidden,
            layers: [
                Layer::zeros(self.hidden, self.dim + 1),
                Layer::zeros(self.hidden, self.hidden),
                Layer::zeros(self.dim, self.hidden),
            ],
        }
    }

    fn trace(&self, x: &[f64], t: f64) -> Trace {
        let mut input = Vec::with_capacity(self.dim + 1);
        input.extend_from_slice(x);
        input.push(t);
        let mut a1 = vec![0.0; self.hidden];
        self.layers[0].forward(&input, &mut a1);
        a1.iter_mut().for_each(|v| *v = v.tanh());
        let mut a2 = vec![0.0; self.hidden];
        self.layers[1].forward(&a1, &mut a2);
        a2.iter_mut().for_each(|v| *v = v.tanh());
        let mut out = vec![0.0; self.dim];
        self.layers[2].forward(&a2, &mut out);
        Trace { input, a1, a2, out }
    }

    /// Accumulates `d(loss)/d(params)` into `grad` given `d(loss)/d(out)`.
    fn backward(&self, tr: &Trace, g_out: &[f64], grad: &mut MlpField) {
        let h = self.hidden;
        let [l1, l2, l3] = &self.layers;
        let [g1, g2, g3] = &mut grad.layers;

        let mut g_a2 = vec![0.0; h];
        for (r, &g) in g_out.iter().enumerate() {
            g3.bias[r] += g;
            for c in 0..h {
                g3.weights[r * h + c] += g * tr.a2[c];
                g_a2[c] += l3.weights[r * h + c] * g;
            }
        }
        let g_z2: Vec<f64> = g_a2.iter().zip(&tr.a2).map(|(g, a)| g * (1.0 - a * a)).collect();

        let mut g_a1 = vec![0.0; h];
        for (r, &g) in g_z2.iter().enumerate() {
            g2.bias[r] += g;
            for c in 0..h {
                g2.weights[r * h + c] += g * tr.a1[c];
                g_a1[c] += l2.weights[r * h + c] * g;
            }
        }
        let g_z1: Vec<f64> = g_a1.iter().zip(&tr.a1).map(|(g, a)| g * (1.0 - a * a)).collect();

        let cols = l1.cols;
        for (r, &g) in g_z1.iter().enumerate() {
            g1.bias[r] += g;
            for c in 0..cols {
                g1.weights[r * cols + c] += g * tr.input[c];
            }
        }
    }

    /// Writes the `mlpfield-v1` checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            dim: self.dim,
            hidden: self.hidden,
            layers: self.layers.to_vec(),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!(
                "expected format `{CHECKPOINT_FORMAT}`, found `{}`",
                ck.format
            )));
        }
        let layers: [Layer; 3] = ck
            .layers
            .try_into()
            .map_err(|_| Error::Format("checkpoint must hold exactly three layers".into()))?;
        let shapes = [(ck.hidden, ck.dim + 1), (ck.hidden, ck.hidden), (ck.dim, ck.hidden)];
        for (l, (rows, cols)) in layers.iter().zip(shapes) {
            if l.rows != rows || l.cols != cols || l.weights.len() != rows * cols || l.bias.len() != rows {
                return Err(Error::Format(format!(
                    "layer shape {}x{} does not match a {}-dim, {}-wide network",
                    l.rows, l.cols, ck.dim, ck.hidden
                )));
            }
        }
        Ok(Self { dim: ck.dim, hidden: ck.hidden, layers })
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    dim: usize,
    hidden: usize,
    layers: Vec<Layer>,
}

impl VelocityField for MlpField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.trace(x, t).out);
    }
}

fn check_batch(x0: &[Vec<f64>], x1: &[Vec<f64>], t: &[f64], dim: usize) -> Result<()> {
    if x1.len() != x0.len() || t.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: x0.len(),
            got: if x1.len() != x0.len() { x1.len() } else { t.len() },
        });
    }
    if x0.is_empty() {
        return Err(Error::Format("empty batch".into()));
    }
    for row in x0.iter().chain(x1) {
        if row.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
        }
    }
    Ok(())
}

/// Point on the straight path and its regression target.
fn path_point(x0: &[f64], x1: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
    let xt = x0.iter().zip(x1).map(|(a, b)| (1.0 - t) * a + t * b).collect();
    let u = x0.iter().zip(x1).map(|(a, b)| b - a).collect();
    (xt, u)
}

/// `mean_i ‖v(x_t^i, t_i) - (x1^i - x0^i)‖²` over the batch.
pub fn cfm_loss<F: VelocityField + ?Sized>(
    field: &F,
    x0: &[Vec<f64>],
    x1: &[Vec<f64>],
    t: &[f64],
) -> Result<f64> {
    check_batch(x0, x1, t, field.dim())?;
    let mut total = 0.0;
    for ((a, b), &ti) in x0.iter().zip(x1).zip(t) {
        let (xt, u) = path_point(a, b, ti);
        let v = field.eval(&xt, ti);
        total += v.iter().zip(&u).map(|(v, u)| (v - u) * (v - u)).sum::<f64>();
    }
    Ok(total / x0.len() as f64)
}

/// Loss and its gradient with respect to [`MlpField::params`].
pub fn cfm_gradient(
    field: &MlpField,
    x0: &[Vec<f64>],
    x1: &[Vec<f64>],
    t: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_batch(x0, x1, t, field.dim)?;
    let mut grad = field.zeros_like();
    let scale = 2.0 / x0.len() as f64;
    let mut total = 0.0;
    for ((a, b), &ti) in x0.iter().zip(x1).zip(t) {
        let (xt, u) = path_point(a, b, ti);
        let tr = field.trace(&xt, ti);
        let diff: Vec<f64> = tr.out.iter().zip(&u).map(|(v, u)| v - u).collect();
        total += diff.iter().map(|d| d * d).sum::<f64>();
        let g_out: Vec<f64> = diff.iter().map(|d| scale * d).collect();
        field.backward(&tr, &g_out, &mut grad);
    }
    Ok((total / x0.len() as f64, grad.params()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 3000, batch: 256, learning_rate: 0.03, seed: 0, hidden: 64 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0
            || self.hidden == 0
            || !(self.learning_rate > 0.0 && self.learning_rate.is_finite())
        {
            return Err(Error::Format("batch, hidden width and learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Loss trace of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    /// Minibatch loss before each update.
    pub losses: Vec<f64>,
}

impl TrainSummary {
    pub fn initial_loss(&self) -> Option<f64> {
        self.losses.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }

    /// Mean of the last `n` minibatch losses.
    pub fn tail_mean(&self, n: usize) -> Option<f64> {
        let n = n.min(self.losses.len());
        (n > 0).then(|| self.losses[self.losses.len() - n..].iter().sum::<f64>() / n as f64)
    }
}

/// One minibatch: source rows, target rows and times.
pub type Batch = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>);

/// Draws minibatch `step` of a run seeded with `seed`.
pub fn training_batch(dataset: &TargetDataset, seed: u64, step: usize, batch: usize) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64 + 1);
    let x0 = sample_source(rng.random(), batch, dataset.dim());
    let x1 = sample_target(dataset, rng.random(), batch);
    let t = (0..batch).map(|_| rng.random::<f64>()).collect();
    (x0, x1, t)
}

/// Trains a fresh network on `dataset` with plain SGD.
pub fn train(config: &TrainConfig, dataset: &TargetDataset) -> Result<(MlpField, TrainSummary)> {
    config.validate()?;
    let mut field = MlpField::new(dataset.dim(), config.hidden, config.seed)?;
    let mut params = field.params();
    let mut losses = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let (x0, x1, t) = training_batch(dataset, config.seed, step, config.batch);
        let (loss, grad) = cfm_gradient(&field, &x0, &x1, &t)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { step, loss });
        }
        losses.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= config.learning_rate * g;
        }
        if !params.iter().all(|p| p.is_finite()) {
            return Err(Error::Divergence { step, loss });
        }
        field.set_params(&params)?;
    }
    Ok((field, TrainSummary { losses }))
}

/// Final states of full Euler runs from `count` source samples.
pub fn generate_samples<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    seed: u64,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    sample_source(seed, count, field.dim())
        .iter()
        .map(|x0| full_trajectory(field, grid, x0).map(|r| r.final_state().to_vec()))
        .collect()
}
