//! Error bounds, deviation metrics and skip-pattern reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{SmoothnessBounds, TimeDerivative};
use crate::solver::{full_trajectory, TimeGrid, TrajectoryRecord};
use crate::vecops::{all_finite, l1_distance, l1_norm, l2_distance};

/// Relative slack allowed when comparing an empirical error to its bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// Value written into a rel-L1 series where the denominator vanishes.
pub const REL_L1_SENTINEL: f64 = -1.0;

/// Start, middle and end thirds used by the adaptivity reports.
pub const THREE_REGIONS: [(f64, f64); 3] = [(0.0, 0.2), (0.2, 0.8), (0.8, 1.0)];

/// `|S| M e^{L_x} / (2 T³)`: the final-state error bound for `skipped`
/// single-step first-order Taylor skips on a uniform `steps`-step grid.
pub fn theorem_bound(skipped: usize, curvature_m: f64, lipschitz_x: f64, steps: usize) -> f64 {
    let t = steps as f64;
    skipped as f64 * curvature_m * lipschitz_x.exp() / 2.0 / (t * t * t)
}

/// [`theorem_bound`] with every step size replaced by `(max_skip + 1) / T`.
/// Reported for multi-step skips; no claim is attached to it.
pub fn conservative_bound(
    skipped: usize,
    curvature_m: f64,
    lipschitz_x: f64,
    steps: usize,
    max_skip: usize,
) -> f64 {
    let scale = (max_skip + 1) as f64;
    theorem_bound(skipped, curvature_m, lipschitz_x, steps) * scale * scale * scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    /// Isolated single-step skips; the bound is asserted.
    Strict,
    /// Multi-step skips against the widened step size; informational.
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub variant: BoundVariant,
    pub steps: usize,
    pub skipped_count: usize,
    pub curvature_m: f64,
    pub lipschitz_x: f64,
    pub bound: f64,
    pub empirical: f64,
    pub satisfied: bool,
}

impl BoundReport {
    fn new(
        variant: BoundVariant,
        steps: usize,
        skipped_count: usize,
        b: SmoothnessBounds,
        bound: f64,
        empirical: f64,
    ) -> Self {
        Self {
            variant,
            steps,
            skipped_count,
            curvature_m: b.curvature_m,
            lipschitz_x: b.lipschitz_x,
            bound,
            empirical,
            satisfied: empirical <= bound * (1.0 + BOUND_SLACK),
        }
    }
}

/// `‖x_T^a - x_T^b‖₂` for two runs on the same grid from the same start.
pub fn final_state_error(a: &TrajectoryRecord, b: &TrajectoryRecord) -> Result<f64> {
    if a.times != b.times || a.initial_state() != b.initial_state() {
        return Err(Error::GridMismatch);
    }
    Ok(l2_distance(a.final_state(), b.final_state()))
}

/// `count` isolated skip indices spread evenly over a `steps`-step grid:
/// `k_i = round((i + 1) T / (count + 1))`.
pub fn isolated_skip_set(steps: usize, count: usize) -> Result<Vec<usize>> {
    let skips: Vec<usize> =
        (0..count).map(|i| ((i + 1) as f64 * steps as f64 / (count + 1) as f64).round() as usize).collect();
    check_isolated(&skips, steps)?;
    Ok(skips)
}

fn check_isolated(skips: &[usize], steps: usize) -> Result<()> {
    for (i, &k) in skips.iter().enumerate() {
        if k == 0 || k >= steps {
            return Err(Error::InvalidSkipSet(format!("index {k} outside 1..{steps}")));
        }
        if i > 0 && k <= skips[i - 1] + 1 {
            return Err(Error::InvalidSkipSet(format!(
                "indices {} and {k} are not isolated single skips",
                skips[i - 1]
            )));
        }
    }
    Ok(())
}

/// Euler run where at each index in `skips` the velocity is replaced by its
/// first-order Taylor expansion in time from the previous grid point,
/// `v(x_k, t_{k-1}) + h ∂_t v(x_k, t_{k-1})`.
pub fn taylor_skip_trajectory<F: TimeDerivative + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    x0: &[f64],
    skips: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let steps = grid.steps();
    check_isolated(skips, steps)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    let mut next_skip = skips.iter().peekable();
    for k in 0..steps {
        let x = &states[k];
        let v = if next_skip.peek() == Some(&&k) {
            next_skip.next();
            let t_prev = grid.t(k - 1);
            let h = grid.t(k) - t_prev;
            let mut v = field.eval(x, t_prev);
            for (vi, di) in v.iter_mut().zip(field.time_derivative(x, t_prev)) {
                *vi += h * di;
            }
            v
        } else {
            field.eval(x, grid.t(k))
        };
        let dt = grid.dt(k);
        let x_next: Vec<f64> = x.iter().zip(&v).map(|(x, v)| x + dt * v).collect();
        if !all_finite(&x_next) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        states.push(x_next);
    }
    Ok(states)
}

/// Compares a Taylor-skip run against full Euler and checks the final error
/// against [`theorem_bound`]. Only isolated single skips on a uniform grid
/// with known smoothness constants are accepted.
pub fn verify_bound<F: TimeDerivative + ?Sized>(
    field: &F,
    bounds: SmoothnessBounds,
    grid: &TimeGrid,
    x0: &[f64],
    skips: &[usize],
) -> Result<BoundReport> {
    if !bounds.known {
        return Err(Error::UnknownBounds);
    }
    if !grid.is_uniform() {
        return Err(Error::InvalidGrid("bound verification needs a uniform grid".into()));
    }
    let approx = taylor_skip_trajectory(field, grid, x0, skips)?;
    let full = full_trajectory(field, grid, x0)?;
    let e_t = l2_distance(approx.last().unwrap(), full.final_state());
    let bound = theorem_bound(skips.len(), bounds.curvature_m, bounds.lipschitz_x, grid.steps());
    Ok(BoundReport::new(BoundVariant::Strict, grid.steps(), skips.len(), bounds, bound, e_t))
}

/// Reports a skipping run (e.g. FastFlow) against [`conservative_bound`],
/// using its skipped set and largest chosen skip.
pub fn conservative_report(
    run: &TrajectoryRecord,
    full: &TrajectoryRecord,
    bounds: SmoothnessBounds,
) -> Result<BoundReport> {
    if !bounds.known {
        return Err(Error::UnknownBounds);
    }
    let e_t = final_state_error(run, full)?;
    let max_skip = run.decisions.iter().map(|d| d.arm).max().unwrap_or(0);
    let bound = conservative_bound(
        run.skipped_set_size,
        bounds.curvature_m,
        bounds.lipschitz_x,
        run.steps(),
        max_skip,
    );
    Ok(BoundReport::new(BoundVariant::Conservative, run.steps(), run.skipped_set_size, bounds, bound, e_t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelL1Series {
    /// `‖v_k - v_{k+1}‖₁ / ‖v_{k+1}‖₁` for `k = 0..T-1`.
    pub values: Vec<f64>,
    /// Positions holding [`REL_L1_SENTINEL`] because `v_{k+1} = 0`.
    pub degenerate: Vec<usize>,
}

impl RelL1Series {
    /// Mean over the valid entries whose position fraction `k / len` lies in
    /// `[start, end)`; `None` if there are none.
    pub fn mean_over(&self, start: f64, end: f64) -> Option<f64> {
        let n = self.values.len() as f64;
        let picked: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .filter(|(k, v)| {
                let f = *k as f64 / n;
                **v >= 0.0 && f >= start && f < end
            })
            .map(|(_, v)| *v)
            .collect();
        (!picked.is_empty()).then(|| picked.iter().sum::<f64>() / picked.len() as f64)
    }
}

/// Consecutive-velocity rel-L1 series of a sequence of velocities.
pub fn rel_l1_of(velocities: &[Vec<f64>]) -> RelL1Series {
    let mut values = Vec::with_capacity(velocities.len().saturating_sub(1));
    let mut degenerate = Vec::new();
    for (k, pair) in velocities.windows(2).enumerate() {
        let denom = l1_norm(&pair[1]);
        if denom > 0.0 {
            values.push(l1_distance(&pair[0], &pair[1]) / denom);
        } else {
            values.push(REL_L1_SENTINEL);
            degenerate.push(k);
        }
    }
    RelL1Series { values, degenerate }
}

/// Rel-L1 series of a fully evaluated trajectory (length `T - 1`).
pub fn rel_l1_series(record: &TrajectoryRecord) -> Result<RelL1Series> {
    if let Some(k) = record.evaluated.iter().position(|e| !e) {
        return Err(Error::Format(format!(
            "rel-L1 series needs every velocity evaluated; step {k} was extrapolated"
        )));
    }
    Ok(rel_l1_of(&record.velocities))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSkip {
    pub start: f64,
    pub end: f64,
    pub decisions: usize,
    pub mean_skip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptivityReport {
    pub regions: Vec<RegionSkip>,
    /// Evaluation count of each record, in input order.
    pub eval_counts: Vec<usize>,
}

/// Index of the region containing `t`; half-open except the last region.
pub fn region_of(t: f64, regions: &[(f64, f64)]) -> Option<usize> {
    let last = regions.len().checked_sub(1)?;
    regions.iter().enumerate().position(|(i, &(a, b))| t >= a && (t < b || (i == last && t <= b)))
}

/// Mean chosen skip per time region over all decisions in `records`, where a
/// decision belongs to the region containing its step time. Regions are
/// half-open except the last, which includes its right end.
pub fn adaptivity_report(records: &[TrajectoryRecord], regions: &[(f64, f64)]) -> Result<AdaptivityReport> {
    for (i, &(a, b)) in regions.iter().enumerate() {
        if !(b > a) {
            return Err(Error::EmptyRegion(i));
        }
    }
    let mut sums = vec![0.0; regions.len()];
    let mut counts = vec![0usize; regions.len()];
    for rec in records {
        for d in &rec.decisions {
            if let Some(r) = region_of(rec.times[d.step], regions) {
                sums[r] += d.arm as f64;
                counts[r] += 1;
            }
        }
    }
    let mut out = Vec::with_capacity(regions.len());
    for (i, &(start, end)) in regions.iter().enumerate() {
        if counts[i] == 0 {
            return Err(Error::EmptyRegion(i));
        }
        out.push(RegionSkip { start, end, decisions: counts[i], mean_skip: sums[i] / counts[i] as f64 });
    }
    Ok(AdaptivityReport { regions: out, eval_counts: records.iter().map(|r| r.eval_count).collect() })
}

/// Per-run bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub steps: usize,
    pub eval_count: usize,
    pub speedup: f64,
    /// Final-state distance to the reference run, when one was given.
    pub final_deviation: Option<f64>,
    pub skipped_set_size: usize,
    /// Mean chosen skip over the three default regions (`None` where a
    /// region saw no decision).
    pub region_mean_skip: [Option<f64>; 3],
    pub mean_reward: Option<f64>,
    pub mean_loss: Option<f64>,
}

impl RunMetrics {
    pub fn from_record(record: &TrajectoryRecord, reference: Option<&TrajectoryRecord>) -> Result<Self> {
        let final_deviation = reference.map(|r| final_state_error(record, r)).transpose()?;
        let mut sums = [0.0; 3];
        let mut counts = [0usize; 3];
        for d in &record.decisions {
            if let Some(r) = region_of(record.times[d.step], &THREE_REGIONS) {
                sums[r] += d.arm as f64;
                counts[r] += 1;
            }
        }
        let region_mean_skip = std::array::from_fn(|i| (counts[i] > 0).then(|| sums[i] / counts[i] as f64));
        let n = record.decisions.len();
        let mean = |f: fn(&crate::solver::SkipDecision) -> f64| {
            (n > 0).then(|| record.decisions.iter().map(f).sum::<f64>() / n as f64)
        };
        Ok(Self {
            steps: record.steps(),
            eval_count: record.eval_count,
            speedup: record.speedup(),
            final_deviation,
            skipped_set_size: record.skipped_set_size,
            region_mean_skip,
            mean_reward: mean(|d| d.reward),
            mean_loss: mean(|d| d.loss),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_field_id;
    use crate::solver::{SkipDecision, TimeGrid};

    #[test]
    fn theorem_bound_examples() {
        assert!((theorem_bound(2, 1.0, 0.0, 10) - 0.001).abs() < 1e-18);
        assert_eq!(theorem_bound(0, 5.0, 1.0, 10), 0.0);
        let a = theorem_bound(7, 3.0, 0.5, 40);
        let b = theorem_bound(7, 3.0, 0.5, 80);
        assert_eq!(a / b, 8.0);
        assert_eq!(conservative_bound(2, 1.0, 0.0, 10, 1), 0.008);
    }

    #[test]
    fn skip_sets() {
        assert_eq!(isolated_skip_set(50, 1).unwrap(), vec![25]);
        let s = isolated_skip_set(50, 10).unwrap();
        assert_eq!(s.len(), 10);
        assert!(check_isolated(&[3, 4], 10).is_err());
        assert!(check_isolated(&[0], 10).is_err());
        assert!(check_isolated(&[10], 10).is_err());
        assert!(isolated_skip_set(10, 9).is_err());
    }

    #[test]
    fn strict_bound_on_degenerate_fields() {
        let grid = TimeGrid::uniform(40).unwrap();
        let skips = isolated_skip_set(40, 5).unwrap();
        let (c, cb) = parse_field_id("constant:c=2", 2).unwrap();
        let r = verify_bound(&c, cb, &grid, &[0.0, 1.0], &skips).unwrap();
        assert_eq!(r.empirical, 0.0);
        assert!(r.satisfied);
        let (l, lb) = parse_field_id("linear_time:a=1,b=-2", 1).unwrap();
        let r = verify_bound(&l, lb, &grid, &[0.0], &skips).unwrap();
        assert_eq!(r.bound, 0.0);
        assert!(r.empirical <= 1e-10);
        let r = verify_bound(&l, SmoothnessBounds::unknown(), &grid, &[0.0], &skips);
        assert!(matches!(r, Err(Error::UnknownBounds)));
    }

    #[test]
    fn final_error_examples() {
        let (f, _) = parse_field_id("constant:c=1", 2).unwrap();
        let grid = TimeGrid::uniform(4).unwrap();
        let a = full_trajectory(&f, &grid, &[0.0, 0.0]).unwrap();
        let mut b = a.clone();
        assert_eq!(final_state_error(&a, &b).unwrap(), 0.0);
        *b.states.last_mut().unwrap() = vec![2.0, 1.0];
        assert_eq!(final_state_error(&a, &b).unwrap(), 1.0);
        assert_eq!(final_state_error(&b, &a).unwrap(), 1.0);
        let other = full_trajectory(&f, &TimeGrid::uniform(5).unwrap(), &[0.0, 0.0]).unwrap();
        assert!(matches!(final_state_error(&a, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn rel_l1_examples() {
        let alt: Vec<Vec<f64>> =
            (0..6).map(|i| if i % 2 == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect();
        assert!(rel_l1_of(&alt).values.iter().all(|v| *v == 2.0));
        let s = rel_l1_of(&[vec![1.0], vec![0.0], vec![1.0]]);
        assert_eq!(s.values, vec![REL_L1_SENTINEL, 1.0]);
        assert_eq!(s.degenerate, vec![0]);
        let (f, _) = parse_field_id("constant:c=3", 2).unwrap();
        let full = full_trajectory(&f, &TimeGrid::uniform(10).unwrap(), &[0.0, 0.0]).unwrap();
        let series = rel_l1_series(&full).unwrap();
        assert_eq!(series.values, vec![0.0; 9]);
    }

    fn scripted(steps: usize, arm_at: impl Fn(f64) -> usize) -> TrajectoryRecord {
        let (f, _) = parse_field_id("constant", 1).unwrap();
        let grid = TimeGrid::uniform(steps).unwrap();
        let mut rec = full_trajectory(&f, &grid, &[0.0]).unwrap();
        rec.decisions = (1..steps - 1)
            .map(|k| SkipDecision { step: k, arm: arm_at(grid.t(k)), reward: 0.0, loss: 0.0 })
            .collect();
        rec
    }

    #[test]
    fn adaptivity_examples() {
        let regions = [(0.0, 0.3), (0.3, 0.7), (0.7, 1.0)];
        let zero = scripted(50, |_| 0);
        let r = adaptivity_report(&[zero], &regions).unwrap();
        assert!(r.regions.iter().all(|g| g.mean_skip == 0.0));
        let mid = scripted(50, |t| if (0.3..0.7).contains(&t) { 4 } else { 0 });
        let r = adaptivity_report(std::slice::from_ref(&mid), &regions).unwrap();
        let means: Vec<f64> = r.regions.iter().map(|g| g.mean_skip).collect();
        assert_eq!(means, vec![0.0, 4.0, 0.0]);
        assert_eq!(r.eval_counts, vec![50]);
        assert!(matches!(
            adaptivity_report(std::slice::from_ref(&mid), &[(0.0, 0.5), (0.5, 0.5)]),
            Err(Error::EmptyRegion(1))
        ));
        let m = RunMetrics::from_record(&mid, Some(&mid)).unwrap();
        assert_eq!(m.final_deviation, Some(0.0));
        assert_eq!(m.speedup, 1.0);
        assert_eq!(m.region_mean_skip[0], Some(0.0));
    }
}
