//! Inverse retargeting: landmarks → motor commands through the
//! self-model.
//!
//! Projected gradient descent on the ℓ1 landmark loss with a monotone
//! line search: each iteration starts from the configured step size
//! and halves it (up to [`MAX_HALVINGS`] times) until the candidate
//! does not increase the loss; iterates are clamped to the motor box
//! `[0,1]^26` after every step. The loss trace is therefore
//! non-increasing by construction.
//!
//! Sequences warm-start each frame from the previous frame's solution
//! by default, which both speeds convergence and keeps consecutive
//! commands close together — jerk-free motion matters more on hardware
//! than per-frame global optimality.

use crate::error::{Error, Result};
use crate::landmarks::LandmarkSet;
use crate::motor::{MotorVector, EXPRESSION_MOTOR_COUNT};
use crate::rig::{BlendshapeCoeffs, BlendshapeRig};
use crate::scalar::Real;
use crate::selfmodel::SelfModel;

/// Step-halving budget per iteration.
pub const MAX_HALVINGS: u32 = 20;

/// How a solve picks its starting point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Start every frame at the mid-travel neutral (all 0.5).
    NeutralStart,
    /// Start each frame at the previous frame's solution (first frame
    /// at neutral). Single-frame solves treat this as neutral unless
    /// an explicit start is passed.
    #[default]
    WarmStartPrevious,
    /// Start at [`SolverOptions::explicit_init`].
    Explicit,
}

/// Inverse-solver configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Iteration budget per frame.
    pub max_iterations: usize,
    /// Initial step size per iteration (before halving). The mean
    /// form of the loss makes raw gradients small (≈1e−3 for typical
    /// faces), so useful steps are large; the backtracking line
    /// search absorbs any overshoot.
    pub step_size: f64,
    /// Converged when a step improves the loss by less than this.
    pub convergence_tol: f64,
    /// Starting-point policy.
    pub init_mode: InitMode,
    /// Starting point for [`InitMode::Explicit`].
    pub explicit_init: Option<Vec<f64>>,
    /// Record every iterate in the report (off by default; memory).
    pub track_iterates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 500,
            step_size: 50.0,
            convergence_tol: 1e-7,
            init_mode: InitMode::WarmStartPrevious,
            explicit_init: None,
            track_iterates: false,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be positive".to_string()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::config(format!(
                "step_size {} must be positive and finite",
                self.step_size
            )));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol >= 0.0) {
            return Err(Error::config(format!(
                "convergence_tol {} must be non-negative and finite",
                self.convergence_tol
            )));
        }
        if self.init_mode == InitMode::Explicit && self.explicit_init.is_none() {
            return Err(Error::config(
                "explicit init mode needs explicit_init".to_string(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one frame's solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<R> {
    /// Solution motor vector.
    pub final_motor: MotorVector<R>,
    /// Loss at the solution.
    pub final_loss: R,
    /// Gradient-descent iterations taken (accepted steps).
    pub iterations_used: usize,
    /// Whether the solve stopped by convergence rather than budget.
    pub converged: bool,
    /// ℓ2 norm of the loss gradient at the solution.
    pub gradient_norm: R,
    /// Loss after each accepted step, starting with the initial loss
    /// (`iterations_used + 1` entries, non-increasing).
    pub loss_trace: Vec<R>,
    /// Every iterate including the start, when
    /// [`SolverOptions::track_iterates`] is set.
    pub iterates: Option<Vec<MotorVector<R>>>,
}

/// Retargeting result for a coefficient sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RetargetOutput<R> {
    /// One solved motor vector per input frame.
    pub motors: Vec<MotorVector<R>>,
    /// The per-frame solve reports (losses, convergence).
    pub reports: Vec<SolveReport<R>>,
}

fn neutral_start<R: Real>() -> MotorVector<R> {
    let half = vec![R::of(0.5); EXPRESSION_MOTOR_COUNT];
    MotorVector::clamp_to_limits(&half).expect("neutral is in range")
}

fn clamp_unit<R: Real>(v: R) -> R {
    if v < R::zero() {
        R::zero()
    } else if v > R::one() {
        R::one()
    } else {
        v
    }
}

/// Solves one frame: finds motors whose predicted landmarks match
/// `target` under the ℓ1 landmark loss.
///
/// `init` overrides the starting point (used by sequence warm starts);
/// otherwise [`SolverOptions::init_mode`] decides.
pub fn retarget_frame<R: Real>(
    model: &SelfModel<R>,
    target: &LandmarkSet<R>,
    options: &SolverOptions,
    init: Option<&MotorVector<R>>,
) -> Result<SolveReport<R>> {
    options.validate()?;
    let mut p = match (init, options.init_mode) {
        (Some(m), _) => *m,
        (None, InitMode::Explicit) => {
            let vals = options.explicit_init.as_ref().expect("validated");
            let vals: Vec<R> = vals.iter().map(|&v| R::of(v)).collect();
            MotorVector::new(
                vals.try_into()
                    .map_err(|_| Error::config("explicit_init needs 26 values".to_string()))?,
            )?
        }
        (None, _) => neutral_start(),
    };

    let tol = R::of(options.convergence_tol);
    let mut loss = model.loss(&p, target);
    let mut trace = vec![loss];
    let mut iterates = options.track_iterates.then(|| vec![p]);
    let mut converged = false;
    let mut iterations_used = 0;

    for _ in 0..options.max_iterations {
        let grad = model.loss_gradient_wrt_input(&p, target);
        if grad.iter().all(|g| *g == R::zero()) {
            // Flat point (e.g. exact fit): nothing to descend.
            converged = true;
            break;
        }
        // Fresh step size every iteration, halved until the loss does
        // not increase.
        let mut step = R::of(options.step_size);
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut cand = [R::zero(); EXPRESSION_MOTOR_COUNT];
            for (i, c) in cand.iter_mut().enumerate() {
                *c = clamp_unit(p.get(i) - step * grad[i]);
            }
            let cand = MotorVector::new(cand)?;
            let cand_loss = model.loss(&cand, target);
            if cand_loss <= loss {
                accepted = Some((cand, cand_loss));
                break;
            }
            step /= R::of(2.0);
        }
        let Some((next, next_loss)) = accepted else {
            // No descent within the halving budget: treat the point as
            // converged rather than looping in place.
            converged = true;
            break;
        };
        let improvement = loss - next_loss;
        p = next;
        loss = next_loss;
        iterations_used += 1;
        trace.push(loss);
        if let Some(it) = iterates.as_mut() {
            it.push(p);
        }
        if improvement < tol {
            converged = true;
            break;
        }
    }

    let grad = model.loss_gradient_wrt_input(&p, target);
    let gradient_norm = grad.iter().fold(R::zero(), |acc, g| acc + *g * *g).sqrt();
    Ok(SolveReport {
        final_motor: p,
        final_loss: loss,
        iterations_used,
        converged,
        gradient_norm,
        loss_trace: trace,
        iterates,
    })
}

/// Solves a landmark sequence frame by frame.
///
/// Under [`InitMode::WarmStartPrevious`] (the default), frame `t`
/// starts from frame `t − 1`'s solution; the first frame starts from
/// neutral (or [`SolverOptions::explicit_init`] under
/// [`InitMode::Explicit`]).
pub fn retarget_sequence<R: Real>(
    model: &SelfModel<R>,
    targets: &[LandmarkSet<R>],
    options: &SolverOptions,
) -> Result<Vec<SolveReport<R>>> {
    options.validate()?;
    if targets.is_empty() {
        return Err(Error::input("no frames to retarget".to_string()));
    }
    let mut reports = Vec::with_capacity(targets.len());
    let mut prev: Option<MotorVector<R>> = None;
    for (t, target) in targets.iter().enumerate() {
        let init = match options.init_mode {
            InitMode::WarmStartPrevious => prev.as_ref(),
            _ => None,
        };
        let report = retarget_frame(model, target, options, init)
            .map_err(|e| Error::input(format!("frame {t}: {e}")))?;
        prev = Some(report.final_motor);
        reports.push(report);
    }
    Ok(reports)
}

/// Full blendshape → motor retargeting: maps each coefficient frame
/// through the rig to target landmarks, then solves the sequence.
pub fn blendshape_to_motor<R: Real>(
    model: &SelfModel<R>,
    rig: &BlendshapeRig<R>,
    coeffs: &[BlendshapeCoeffs<R>],
    options: &SolverOptions,
) -> Result<RetargetOutput<R>> {
    if coeffs.is_empty() {
        return Err(Error::input("no coefficient frames".to_string()));
    }
    let targets: Vec<LandmarkSet<R>> = coeffs.iter().map(|c| rig.rig_landmarks(c)).collect();
    let reports = retarget_sequence(model, &targets, options)?;
    Ok(RetargetOutput {
        motors: reports.iter().map(|r| r.final_motor).collect(),
        reports,
    })
}
