//! Velocity fields, analytic fixtures and source/target samplers.
//!
//! Every sampler in this crate talks to the model through [`VelocityField`].
//! The analytic fixtures come with exact smoothness constants (spatial
//! Lipschitz constant `L_x` and a bound `M` on `‖∂²v/∂t²‖`), which is what the
//! error-bound harness in [`crate::analysis`] needs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A deterministic time-dependent velocity field `v(x, t)` on `R^d`.
pub trait VelocityField {
    fn dim(&self) -> usize;

    /// Writes `v(x, t)` into `out`. Both slices have length [`dim`](Self::dim).
    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]);

    fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, t, &mut out);
        out
    }
}

impl<F: VelocityField + ?Sized> VelocityField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (**self).eval_into(x, t, out)
    }
}

impl<F: VelocityField + ?Sized> VelocityField for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (**self).eval_into(x, t, out)
    }
}

/// Fields whose partial time derivative is available in closed form.
pub trait TimeDerivative: VelocityField {
    fn time_derivative(&self, x: &[f64], t: f64) -> Vec<f64>;
}

/// Smoothness constants of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessBounds {
    /// Spatial Lipschitz constant `L_x`.
    pub lipschitz_x: f64,
    /// Bound `M` on the Euclidean norm of `∂²v/∂t²`.
    pub curvature_m: f64,
    pub known: bool,
}

impl SmoothnessBounds {
    pub fn unknown() -> Self {
        Self { lipschitz_x: f64::NAN, curvature_m: f64::NAN, known: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Constant,
    LinearTime,
    SinusoidalTime,
    ThreePhase,
    ContractingAffine,
}

impl FieldKind {
    pub const ALL: [FieldKind; 5] = [
        FieldKind::Constant,
        FieldKind::LinearTime,
        FieldKind::SinusoidalTime,
        FieldKind::ThreePhase,
        FieldKind::ContractingAffine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Constant => "constant",
            FieldKind::LinearTime => "linear_time",
            FieldKind::SinusoidalTime => "sinusoidal_time",
            FieldKind::ThreePhase => "three_phase",
            FieldKind::ContractingAffine => "contracting_affine",
        }
    }

    /// Parameter names accepted in string ids, with their defaults.
    fn named_params(self) -> &'static [(&'static str, f64)] {
        match self {
            FieldKind::Constant => &[("c", 1.0)],
            FieldKind::LinearTime => &[("a", 0.0), ("b", 1.0)],
            FieldKind::SinusoidalTime => &[("A", 1.0), ("omega", PI), ("B", 0.0)],
            FieldKind::ThreePhase => &[("A", 1.0), ("B", 1.0), ("floor", 0.02), ("width", 0.1)],
            FieldKind::ContractingAffine => &[("lambda", 1.0), ("A", 1.0), ("omega", PI)],
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FieldKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownFieldKind(s.to_string()))
    }
}

/// Angular frequency of the oscillation inside the three-phase profile.
const THREE_PHASE_OMEGA: f64 = 8.0 * PI;

#[derive(Debug, Clone, PartialEq)]
enum Profile {
    Constant { c: Vec<f64> },
    LinearTime { a: Vec<f64>, b: Vec<f64> },
    Sinusoidal { amp: f64, omega: f64, offset: f64 },
    ThreePhase { amp: f64, offset: f64, floor: f64, width: f64 },
    ContractingAffine { lambda: f64, amp: f64, omega: f64 },
}

/// Closed-form fixture field with exactly known smoothness constants.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticField {
    kind: FieldKind,
    params: Vec<f64>,
    dim: usize,
    profile: Profile,
}

/// Builds an analytic fixture from positional parameters.
///
/// | kind | params | field |
/// |------|--------|-------|
/// | `constant` | `c` (1 or d values) | `v = c` |
/// | `linear_time` | `a, b` (scalars, or d values each) | `v = a + b t` |
/// | `sinusoidal_time` | `A, ω [, B]` | `v_i = A sin(ωt) + B` |
/// | `three_phase` | `A, B, floor, width` | `v_i = B + A sin(8πt) w(t)` |
/// | `contracting_affine` | `λ, A, ω` | `v = -λx + A sin(ωt)` |
///
/// `w(t) = floor + (1 - floor)(exp(-(t/width)²) + exp(-((1-t)/width)²))`
/// concentrates curvature near both ends of `[0, 1]`.
pub fn make_analytic_field(
    kind: FieldKind,
    params: &[f64],
    dim: usize,
) -> Result<(AnalyticField, SmoothnessBounds)> {
    if dim == 0 {
        return Err(Error::InvalidParam {
            kind: kind.name().into(),
            reason: "dimension must be positive".into(),
        });
    }
    if let Some(bad) = params.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidParam {
            kind: kind.name().into(),
            reason: format!("non-finite parameter {bad}"),
        });
    }
    let arity = |expected: &'static str| Error::ParamArity { kind: kind.name(), expected, got: params.len() };
    let profile = match kind {
        FieldKind::Constant => match params.len() {
            1 => Profile::Constant { c: vec![params[0]; dim] },
            n if n == dim => Profile::Constant { c: params.to_vec() },
            _ => return Err(arity("1 or d")),
        },
        FieldKind::LinearTime => match params.len() {
            2 => Profile::LinearTime { a: vec![params[0]; dim], b: vec![params[1]; dim] },
            n if n == 2 * dim => Profile::LinearTime { a: params[..dim].to_vec(), b: params[dim..].to_vec() },
            _ => return Err(arity("2 or 2d")),
        },
        FieldKind::SinusoidalTime => match *params {
            [amp, omega] => Profile::Sinusoidal { amp, omega, offset: 0.0 },
            [amp, omega, offset] => Profile::Sinusoidal { amp, omega, offset },
            _ => return Err(arity("2 or 3")),
        },
        FieldKind::ThreePhase => match *params {
            [amp, offset, floor, width] => {
                if !(0.0..=1.0).contains(&floor) || width <= 0.0 {
                    return Err(Error::InvalidParam {
                        kind: kind.name().into(),
                        reason: "floor must lie in [0, 1] and width must be positive".into(),
                    });
                }
                Profile::ThreePhase { amp, offset, floor, width }
            }
            _ => return Err(arity("4")),
        },
        FieldKind::ContractingAffine => match *params {
            [lambda, amp, omega] => {
                if lambda < 0.0 {
                    return Err(Error::InvalidParam {
                        kind: kind.name().into(),
                        reason: "lambda must be non-negative".into(),
                    });
                }
                Profile::ContractingAffine { lambda, amp, omega }
            }
            _ => return Err(arity("3")),
        },
    };
    let field = AnalyticField { kind, params: params.to_vec(), dim, profile };
    let bounds = field.bounds();
    Ok((field, bounds))
}

/// Parses a fixture id such as `sinusoidal_time:A=1,omega=3.14159`.
///
/// Omitted parameters take their defaults; unknown names are rejected.
pub fn parse_field_id(id: &str, dim: usize) -> Result<(AnalyticField, SmoothnessBounds)> {
    let (kind_str, rest) = match id.split_once(':') {
        Some((k, r)) => (k.trim(), r.trim()),
        None => (id.trim(), ""),
    };
    let kind: FieldKind = kind_str.parse()?;
    let names = kind.named_params();
    let mut values: Vec<f64> = names.iter().map(|(_, d)| *d).collect();
    for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item.split_once('=').ok_or_else(|| Error::InvalidParam {
            kind: kind.name().into(),
            reason: format!("expected key=value, got `{item}`"),
        })?;
        let slot = names.iter().position(|(n, _)| *n == key.trim()).ok_or_else(|| Error::InvalidParam {
            kind: kind.name().into(),
            reason: format!("unknown parameter `{}`", key.trim()),
        })?;
        values[slot] = value.trim().parse().map_err(|_| Error::InvalidParam {
            kind: kind.name().into(),
            reason: format!("`{}` is not a number", value.trim()),
        })?;
    }
    make_analytic_field(kind, &values, dim)
}

impl AnalyticField {
    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Exact smoothness constants (Euclidean norms over all `d` coordinates).
    pub fn bounds(&self) -> SmoothnessBounds {
        let root_d = (self.dim as f64).sqrt();
        let (lipschitz_x, curvature_m) = match &self.profile {
            Profile::Constant { .. } | Profile::LinearTime { .. } => (0.0, 0.0),
            Profile::Sinusoidal { amp, omega, .. } => (0.0, root_d * amp.abs() * omega * omega),
            Profile::ThreePhase { amp, floor, width, .. } => {
                (0.0, root_d * amp.abs() * three_phase_max_curvature(*floor, *width))
            }
            Profile::ContractingAffine { lambda, amp, omega } => {
                (*lambda, root_d * amp.abs() * omega * omega)
            }
        };
        SmoothnessBounds { lipschitz_x, curvature_m, known: true }
    }

    /// Canonical string id; round-trips through [`parse_field_id`] for the
    /// scalar-parameter forms.
    pub fn id(&self) -> String {
        let names = self.kind.named_params();
        if self.params.len() != names.len() {
            let values: Vec<String> = self.params.iter().map(|p| p.to_string()).collect();
            return format!("{}[{}]", self.kind, values.join(";"));
        }
        let pairs: Vec<String> =
            names.iter().zip(&self.params).map(|((n, _), v)| format!("{n}={v}")).collect();
        format!("{}:{}", self.kind, pairs.join(","))
    }

    /// `∂²v/∂t²` at `(x, t)`.
    pub fn second_time_derivative(&self, _x: &[f64], t: f64) -> Vec<f64> {
        let scalar = match &self.profile {
            Profile::Constant { .. } | Profile::LinearTime { .. } => 0.0,
            Profile::Sinusoidal { amp, omega, .. } | Profile::ContractingAffine { amp, omega, .. } => {
                -amp * omega * omega * (omega * t).sin()
            }
            Profile::ThreePhase { amp, floor, width, .. } => amp * three_phase_profile(t, *floor, *width).2,
        };
        vec![scalar; self.dim]
    }
}

impl VelocityField for AnalyticField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        match &self.profile {
            Profile::Constant { c } => out.copy_from_slice(c),
            Profile::LinearTime { a, b } => {
                for ((o, a), b) in out.iter_mut().zip(a).zip(b) {
                    *o = a + b * t;
                }
            }
            Profile::Sinusoidal { amp, omega, offset } => {
                out.fill(amp * (omega * t).sin() + offset);
            }
            Profile::ThreePhase { amp, offset, floor, width } => {
                out.fill(offset + amp * three_phase_profile(t, *floor, *width).0);
            }
            Profile::ContractingAffine { lambda, amp, omega } => {
                let g = amp * (omega * t).sin();
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -lambda * xi + g;
                }
            }
        }
    }
}

impl TimeDerivative for AnalyticField {
    fn time_derivative(&self, _x: &[f64], t: f64) -> Vec<f64> {
        match &self.profile {
            Profile::Constant { .. } => vec![0.0; self.dim],
            Profile::LinearTime { b, .. } => b.clone(),
            Profile::Sinusoidal { amp, omega, .. } | Profile::ContractingAffine { amp, omega, .. } => {
                vec![amp * omega * (omega * t).cos(); self.dim]
            }
            Profile::ThreePhase { amp, floor, width, .. } => {
                vec![amp * three_phase_profile(t, *floor, *width).1; self.dim]
            }
        }
    }
}

/// `g(t) = sin(8πt) w(t)` and its first two derivatives.
fn three_phase_profile(t: f64, floor: f64, width: f64) -> (f64, f64, f64) {
    let s2 = width * width;
    let u = 1.0 - t;
    let e1 = (-(t * t) / s2).exp();
    let e2 = (-(u * u) / s2).exp();
    let bump = 1.0 - floor;
    let w = floor + bump * (e1 + e2);
    let dw = bump * (-2.0 * t / s2 * e1 + 2.0 * u / s2 * e2);
    let ddw = bump * ((4.0 * t * t / (s2 * s2) - 2.0 / s2) * e1 + (4.0 * u * u / (s2 * s2) - 2.0 / s2) * e2);
    let om = THREE_PHASE_OMEGA;
    let (s, c) = (om * t).sin_cos();
    let g = s * w;
    let dg = om * c * w + s * dw;
    let ddg = -om * om * s * w + 2.0 * om * c * dw + s * ddw;
    (g, dg, ddg)
}

/// `max_t |g''(t)|` on a dense grid, padded by a relative `1e-6`.
fn three_phase_max_curvature(floor: f64, width: f64) -> f64 {
    const SAMPLES: usize = 200_000;
    let max = (0..=SAMPLES)
        .map(|i| three_phase_profile(i as f64 / SAMPLES as f64, floor, width).2.abs())
        .fold(0.0, f64::max);
    max * (1.0 + 1e-6)
}

/// Wraps a field and counts evaluations, the cost proxy for model calls.
#[derive(Debug)]
pub struct CountingField<F> {
    inner: F,
    evals: AtomicU64,
    latency: Duration,
}

impl<F: VelocityField> CountingField<F> {
    pub fn new(inner: F) -> Self {
        Self { inner, evals: AtomicU64::new(0), latency: Duration::ZERO }
    }

    /// Sleeps for `latency` on every evaluation.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    pub fn into_inner(self) -> F {
        self.inner
    }
}

impl<F: VelocityField> VelocityField for CountingField<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        self.evals.fetch_add(1, Ordering::Relaxed);
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        self.inner.eval_into(x, t, out);
    }
}

/// Applies a `d`-dimensional field independently to `count` stacked points,
/// so a whole batch of samples forms one state vector of length `count * d`.
#[derive(Debug, Clone)]
pub struct BatchedField<F> {
    inner: F,
    count: usize,
}

impl<F: VelocityField> BatchedField<F> {
    pub fn new(inner: F, count: usize) -> Self {
        assert!(count > 0, "batch must contain at least one point");
        Self { inner, count }
    }
}

impl<F: VelocityField> VelocityField for BatchedField<F> {
    fn dim(&self) -> usize {
        self.inner.dim() * self.count
    }

    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let d = self.inner.dim();
        for (xs, os) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            self.inner.eval_into(xs, t, os);
        }
    }
}

/// `n` i.i.d. standard-normal rows of length `d`, reproducible from `seed`.
pub fn sample_source(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// Toy target distributions in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dataset", rename_all = "snake_case")]
pub enum TargetDataset {
    /// Uniform choice among `means`, isotropic Gaussian noise of `std`.
    GaussianMixture { means: Vec<Vec<f64>>, std: f64 },
    /// Two concentric rings at radii `radius ± half_gap`, radial noise `std`.
    TwoRings { radius: f64, half_gap: f64, std: f64 },
}

impl TargetDataset {
    /// Four components at `(±3, ±3)` with standard deviation `0.3`.
    pub fn four_gaussians() -> Self {
        TargetDataset::GaussianMixture {
            means: vec![vec![3.0, 3.0], vec![-3.0, 3.0], vec![-3.0, -3.0], vec![3.0, -3.0]],
            std: 0.3,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetDataset::GaussianMixture { means, .. } => means.first().map_or(0, Vec::len),
            TargetDataset::TwoRings { .. } => 2,
        }
    }

    /// Builds a dataset from its id and positional parameters.
    ///
    /// `gaussian_mixture`: `std, m1x, m1y, m2x, m2y, ...` (2D means).
    /// `two_rings`: `radius, std [, half_gap]`.
    pub fn from_id(id: &str, params: &[f64]) -> Result<Self> {
        match id {
            "gaussian_mixture" => {
                if params.is_empty() {
                    return Ok(Self::four_gaussians());
                }
                if params.len() < 3 || !(params.len() - 1).is_multiple_of(2) {
                    return Err(Error::InvalidParam {
                        kind: id.into(),
                        reason: "expected std followed by 2D means".into(),
                    });
                }
                Ok(TargetDataset::GaussianMixture {
                    std: params[0],
                    means: params[1..].chunks(2).map(<[f64]>::to_vec).collect(),
                })
            }
            "two_rings" => match *params {
                [] => Ok(TargetDataset::TwoRings { radius: 2.0, half_gap: 0.5, std: 0.05 }),
                [radius, std] => Ok(TargetDataset::TwoRings { radius, half_gap: 0.5, std }),
                [radius, std, half_gap] => Ok(TargetDataset::TwoRings { radius, half_gap, std }),
                _ => Err(Error::InvalidParam {
                    kind: id.into(),
                    reason: "expected radius, std [, half_gap]".into(),
                }),
            },
            other => Err(Error::UnknownDataset(other.into())),
        }
    }
}

/// `n` samples from `dataset`, reproducible from `seed`.
pub fn sample_target(dataset: &TargetDataset, seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match dataset {
        TargetDataset::GaussianMixture { means, std } => (0..n)
            .map(|_| {
                let mean = &means[rng.random_range(0..means.len())];
                mean.iter().map(|m| m + std * rng.sample::<f64, _>(StandardNormal)).collect()
            })
            .collect(),
        TargetDataset::TwoRings { radius, half_gap, std } => (0..n)
            .map(|_| {
                let ring = if rng.random_bool(0.5) { radius - half_gap } else { radius + half_gap };
                let theta = rng.random_range(0.0..2.0 * PI);
                let r = ring + std * rng.sample::<f64, _>(StandardNormal);
                vec![r * theta.cos(), r * theta.sin()]
            })
            .collect(),
    }
}
