//! Trajectory engines.
//!
//! Every engine integrates with forward Euler on a [`TimeGrid`] and returns a
//! [`TrajectoryRecord`]. They differ only in which velocities come from the
//! model and which are extrapolated from earlier evaluations:
//!
//! - [`full_trajectory`]: every step evaluated.
//! - [`fastflow_generate`]: per-step UCB agents choose skip lengths.
//! - [`fixed_skip_generate`]: evaluate every `j`-th step, extrapolate between.
//! - [`reuse_velocity_generate`]: reuse the last velocity while an accumulated
//!   rel-L1 change stays under a threshold.
//! - [`lms_generate`]: fixed skip length with the two-stage update that
//!   reduces to the linear-multistep closed form [`lms_jump`].

mod baselines;
mod fastflow;
mod grid;
mod lms;
mod record;

pub use baselines::{fixed_skip_evaluated, fixed_skip_generate, reuse_velocity_generate};
pub use fastflow::{
    fastflow_generate, generate_with_policy, lms_generate, skip_update, ArmSchedule, DeltaTSemantics,
    FastFlowConfig, FixedSkip, JumpMode, SkipPolicy,
};
pub use grid::TimeGrid;
pub use lms::{lms_jump, local_truncation_error_coeff};
pub use record::{Extrapolation, SkipDecision, TrajectoryRecord};

use crate::error::{Error, Result};
use crate::fields::VelocityField;
use crate::vecops::all_finite;

/// `x + dt * v`.
pub fn euler_step(x: &[f64], v: &[f64], dt: f64) -> Result<Vec<f64>> {
    if x.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: v.len() });
    }
    if !(dt.is_finite() && dt > 0.0) || !all_finite(x) || !all_finite(v) {
        return Err(Error::NonFinite { step: 0 });
    }
    Ok(x.iter().zip(v).map(|(xi, vi)| xi + dt * vi).collect())
}

/// First-order finite-difference extrapolation
/// `v̂ = v_k + dt (v_k - v_p) / (t_k - t_p)`.
///
/// `dt = 0` returns `v_k` unchanged.
pub fn extrapolate_velocity(v_k: &[f64], v_p: &[f64], t_k: f64, t_p: f64, dt: f64) -> Result<Vec<f64>> {
    if v_k.len() != v_p.len() {
        return Err(Error::DimensionMismatch { expected: v_k.len(), got: v_p.len() });
    }
    if t_k == t_p {
        return Err(Error::CoincidentAnchors(t_k));
    }
    if dt == 0.0 {
        return Ok(v_k.to_vec());
    }
    let span = t_k - t_p;
    Ok(v_k.iter().zip(v_p).map(|(a, b)| a + dt * (a - b) / span).collect())
}

/// Plain forward Euler with a model call at every step.
pub fn full_trajectory<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    x0: &[f64],
) -> Result<TrajectoryRecord> {
    check_dim(field, x0)?;
    let mut rec = TrajectoryRecord::new(grid.times(), x0);
    for k in 0..grid.steps() {
        let x = &rec.states[k];
        let v = field.eval(x, grid.t(k));
        rec.evaluated[k] = true;
        let next = advance(x, &v, grid.dt(k), k + 1)?;
        rec.velocities.push(v);
        rec.states.push(next);
    }
    rec.finish();
    Ok(rec)
}

pub(crate) fn check_dim<F: VelocityField + ?Sized>(field: &F, x0: &[f64]) -> Result<()> {
    if field.dim() != x0.len() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: x0.len() });
    }
    if !all_finite(x0) {
        return Err(Error::NonFinite { step: 0 });
    }
    Ok(())
}

/// Euler step that reports `index` (the index of the produced state) on
/// non-finite input or output.
pub(crate) fn advance(x: &[f64], v: &[f64], dt: f64, index: usize) -> Result<Vec<f64>> {
    let next = euler_step(x, v, dt).map_err(|e| match e {
        Error::NonFinite { .. } => Error::NonFinite { step: index },
        other => other,
    })?;
    if !all_finite(&next) {
        return Err(Error::NonFinite { step: index });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_analytic_field, FieldKind};

    #[test]
    fn euler_step_examples() {
        assert_eq!(euler_step(&[0.0, 0.0], &[1.0, 2.0], 0.5).unwrap(), vec![0.5, 1.0]);
        assert_eq!(euler_step(&[3.0, -1.0], &[0.0, 0.0], 0.1).unwrap(), vec![3.0, -1.0]);
        assert!(euler_step(&[f64::NAN], &[1.0], 0.1).is_err());
        assert!(euler_step(&[0.0], &[1.0], 0.0).is_err());
        assert!(euler_step(&[0.0], &[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn constant_field_telescopes() {
        let (f, _) = make_analytic_field(FieldKind::Constant, &[0.3, -1.7], 2).unwrap();
        for steps in [1, 7, 50, 333] {
            let rec = full_trajectory(&f, &TimeGrid::uniform(steps).unwrap(), &[1.0, 2.0]).unwrap();
            let end = rec.final_state();
            assert!((end[0] - 1.3).abs() < 1e-12 && (end[1] - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_time_hand_computation() {
        let (f, _) = make_analytic_field(FieldKind::LinearTime, &[0.0, 1.0], 1).unwrap();
        let rec = full_trajectory(&f, &TimeGrid::uniform(4).unwrap(), &[0.0]).unwrap();
        // x_{k+1} = x_k + (1/4) t_k with t_k = k/4.
        let mut x = 0.0;
        let mut expected = vec![x];
        for k in 0..4 {
            x += 0.25 * (k as f64 / 4.0);
            expected.push(x);
        }
        assert_eq!(expected, vec![0.0, 0.0, 0.0625, 0.1875, 0.375]);
        let got: Vec<f64> = rec.states.iter().map(|s| s[0]).collect();
        assert_eq!(got, expected);
        assert_eq!(rec.eval_count, 4);
        assert!(rec.evaluated.iter().all(|e| *e));
        rec.check_invariants().unwrap();
    }

    #[test]
    fn single_step_grid() {
        let (f, _) = make_analytic_field(FieldKind::SinusoidalTime, &[1.0, 2.0, 0.5], 1).unwrap();
        let rec = full_trajectory(&f, &TimeGrid::uniform(1).unwrap(), &[0.2]).unwrap();
        assert_eq!(rec.states.len(), 2);
        assert_eq!(rec.states[1][0], 0.2 + 1.0 * 0.5);
        assert_eq!(rec.eval_count, 1);
    }

    #[test]
    fn extrapolation_examples() {
        let v = extrapolate_velocity(&[2.0], &[1.0], 0.3, 0.2, 0.2).unwrap();
        assert!((v[0] - 4.0).abs() < 1e-12);
        assert_eq!(extrapolate_velocity(&[2.0, 5.0], &[1.0, 0.0], 0.3, 0.2, 0.0).unwrap(), vec![2.0, 5.0]);
        assert!(matches!(
            extrapolate_velocity(&[1.0], &[1.0], 0.4, 0.4, 0.1),
            Err(Error::CoincidentAnchors(_))
        ));
    }

    #[test]
    fn extrapolation_is_exact_for_affine_time() {
        let (f, _) = make_analytic_field(FieldKind::LinearTime, &[0.5, -2.0, 3.0, 0.25], 2).unwrap();
        let (tp, tk) = (0.1, 0.35);
        let (vp, vk) = (f.eval(&[0.0, 0.0], tp), f.eval(&[0.0, 0.0], tk));
        for target in [0.35, 0.4, 0.77, 1.0] {
            let hat = extrapolate_velocity(&vk, &vp, tk, tp, target - tk).unwrap();
            let truth = f.eval(&[0.0, 0.0], target);
            for (a, b) in hat.iter().zip(&truth) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_state_reports_step() {
        struct Blowup;
        impl VelocityField for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn eval_into(&self, _x: &[f64], t: f64, out: &mut [f64]) {
                out[0] = if t >= 0.5 { f64::INFINITY } else { 1.0 };
            }
        }
        let err = full_trajectory(&Blowup, &TimeGrid::uniform(10).unwrap(), &[0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 6 }), "{err:?}");
    }
}
