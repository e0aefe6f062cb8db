//! Static baselines: periodic evaluation and threshold-gated velocity reuse.

use super::record::{Extrapolation, TrajectoryRecord};
use super::{advance, check_dim, extrapolate_velocity, TimeGrid};
use crate::error::{Error, Result};
use crate::fields::VelocityField;
use crate::vecops::{l1_distance, l1_norm};

/// Indices evaluated by [`fixed_skip_generate`]: `0`, `1` and every multiple
/// of `j` below `steps`.
pub fn fixed_skip_evaluated(steps: usize, j: usize) -> Vec<bool> {
    (0..steps).map(|k| k < 2 || k % j == 0).collect()
}

/// Evaluates at `k ≡ 0 (mod j)` (plus index 1) and extrapolates every other
/// velocity from the last two evaluated anchors.
pub fn fixed_skip_generate<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    x0: &[f64],
    j: usize,
) -> Result<TrajectoryRecord> {
    if j == 0 {
        return Err(Error::Format("skip period must be at least 1".into()));
    }
    let schedule = fixed_skip_evaluated(grid.steps(), j);
    run_gated(field, grid, x0, |_, _, _| Gate::Extrapolate, &schedule)
}

/// Zeroth-order reuse baseline: after each evaluation, the rel-L1 change
/// between the last two evaluated velocities is accumulated once per step;
/// while the sum stays below `threshold` the last velocity is reused,
/// otherwise the model is called and the sum resets.
pub fn reuse_velocity_generate<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    x0: &[f64],
    threshold: f64,
) -> Result<TrajectoryRecord> {
    if !(threshold >= 0.0) {
        return Err(Error::Format(format!("threshold must be non-negative, got {threshold}")));
    }
    let mut accumulated = 0.0;
    let gate = move |just_evaluated: bool, v_a: &[f64], v_p: &[f64]| {
        if just_evaluated {
            accumulated = 0.0;
        }
        accumulated += rel_l1(v_p, v_a);
        if accumulated < threshold {
            Gate::Reuse
        } else {
            Gate::Evaluate
        }
    };
    let schedule = vec![false; grid.steps()];
    run_gated(field, grid, x0, gate, &schedule)
}

/// `‖a - b‖₁ / ‖b‖₁`, infinite when only the denominator vanishes.
fn rel_l1(a: &[f64], b: &[f64]) -> f64 {
    let num = l1_distance(a, b);
    let den = l1_norm(b);
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

enum Gate {
    Evaluate,
    Extrapolate,
    Reuse,
}

/// Shared per-step loop. Indices 0 and 1 and every index flagged in
/// `forced` are evaluated; other indices ask `gate(just_evaluated, v_a, v_p)`
/// where `a` and `p` are the last two evaluated indices.
fn run_gated<F, G>(
    field: &F,
    grid: &TimeGrid,
    x0: &[f64],
    mut gate: G,
    forced: &[bool],
) -> Result<TrajectoryRecord>
where
    F: VelocityField + ?Sized,
    G: FnMut(bool, &[f64], &[f64]) -> Gate,
{
    check_dim(field, x0)?;
    let mut rec = TrajectoryRecord::new(grid.times(), x0);
    // (index, velocity) of the last two evaluations, newest first.
    let mut anchors: Vec<(usize, Vec<f64>)> = Vec::with_capacity(2);
    let mut just_evaluated = false;
    for k in 0..grid.steps() {
        let x = &rec.states[k];
        let decision = if k < 2 || forced[k] {
            Gate::Evaluate
        } else {
            gate(just_evaluated, &anchors[0].1, &anchors[1].1)
        };
        let v = match decision {
            Gate::Evaluate => {
                let v = field.eval(x, grid.t(k));
                rec.evaluated[k] = true;
                anchors.insert(0, (k, v.clone()));
                anchors.truncate(2);
                just_evaluated = true;
                v
            }
            Gate::Extrapolate | Gate::Reuse => {
                let (a, ref v_a) = anchors[0];
                let (p, ref v_p) = anchors[1];
                let (v, target_time) = match decision {
                    Gate::Reuse => (v_a.clone(), grid.t(a)),
                    _ => (
                        extrapolate_velocity(v_a, v_p, grid.t(a), grid.t(p), grid.t(k) - grid.t(a))?,
                        grid.t(k),
                    ),
                };
                rec.extrapolations.push(Extrapolation { step: k, anchor: a, previous: p, target_time });
                just_evaluated = false;
                v
            }
        };
        let next = advance(x, &v, grid.dt(k), k + 1)?;
        rec.velocities.push(v);
        rec.states.push(next);
    }
    rec.finish();
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_analytic_field, parse_field_id, FieldKind};
    use crate::solver::full_trajectory;

    #[test]
    fn fixed_skip_counts() {
        let (f, _) = parse_field_id("sinusoidal_time", 2).unwrap();
        let grid = TimeGrid::uniform(50).unwrap();
        let x0 = [0.1, 0.2];
        let j1 = fixed_skip_generate(&f, &grid, &x0, 1).unwrap();
        assert_eq!(j1.eval_count, 50);
        assert_eq!(j1.states, full_trajectory(&f, &grid, &x0).unwrap().states);
        // Count by direct enumeration of the schedule.
        let expected = (0..50).filter(|k| *k < 2 || k % 2 == 0).count();
        assert_eq!(expected, 26);
        let j2 = fixed_skip_generate(&f, &grid, &x0, 2).unwrap();
        assert_eq!(j2.eval_count, 26);
        j2.check_invariants().unwrap();
        assert!(fixed_skip_generate(&f, &grid, &x0, 0).is_err());
    }

    #[test]
    fn constant_field_exact() {
        let (f, _) = make_analytic_field(FieldKind::Constant, &[2.0], 1).unwrap();
        let grid = TimeGrid::uniform(40).unwrap();
        for j in [1, 2, 3, 7, 40] {
            let rec = fixed_skip_generate(&f, &grid, &[1.0], j).unwrap();
            assert!((rec.final_state()[0] - 3.0).abs() < 1e-12);
        }
        let rec = reuse_velocity_generate(&f, &grid, &[1.0], 0.05).unwrap();
        assert_eq!(rec.eval_count, 2);
        assert!((rec.final_state()[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_threshold_is_full() {
        let (f, _) = parse_field_id("three_phase", 1).unwrap();
        let grid = TimeGrid::uniform(50).unwrap();
        let rec = reuse_velocity_generate(&f, &grid, &[0.0], 0.0).unwrap();
        assert_eq!(rec.eval_count, 50);
        assert_eq!(rec.states, full_trajectory(&f, &grid, &[0.0]).unwrap().states);
        assert!(reuse_velocity_generate(&f, &grid, &[0.0], -1.0).is_err());
    }

    #[test]
    fn rel_l1_edge_cases() {
        assert_eq!(rel_l1(&[1.0, 0.0], &[0.0, 1.0]), 2.0);
        assert_eq!(rel_l1(&[0.0], &[0.0]), 0.0);
        assert_eq!(rel_l1(&[1.0], &[0.0]), f64::INFINITY);
    }
}
