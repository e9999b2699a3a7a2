//! Matching a method's mean error to a reference method by adjusting its threshold.

use serde::Serialize;

use super::{Experiment, Method, RowStatus};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct CalibrationOptions {
    /// Accept when |target - reference| <= this times the reference error.
    pub relative_tolerance: f64,
    /// Target-method evaluations before giving up.
    pub max_evaluations: usize,
    /// Factor applied per step while bracketing.
    pub expansion: f64,
    pub min_epsilon: f64,
    pub max_epsilon: f64,
    /// Consecutive tightening steps without error reduction before giving up.
    pub stall_steps: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            relative_tolerance: 0.05,
            max_evaluations: 30,
            expansion: 4.0,
            min_epsilon: 1e-15,
            max_epsilon: 1e-2,
            stall_steps: 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    pub target: Method,
    pub reference: Method,
    pub reference_epsilon: f64,
    pub epsilon: f64,
    pub target_error: f64,
    pub reference_error: f64,
    /// Every (epsilon, mean error) evaluated for the target.
    pub trace: Vec<(f64, f64)>,
}

/// Mean l1 error of `method` at `epsilon` over the experiment's sources.
pub fn mean_error(exp: &Experiment, method: Method, epsilon: f64) -> Result<f64> {
    let rows = exp.run_method(method, epsilon)?;
    if let Some(bad) = rows.iter().find(|r| r.status != RowStatus::Ok) {
        return Err(Error::Precondition(format!(
            "{method} at epsilon {epsilon:e} returned status {:?} for source {}",
            bad.status, bad.source
        )));
    }
    Ok(rows.iter().map(|r| r.l1_error).sum::<f64>() / rows.len() as f64)
}

/// Log-space bracketing and bisection on the target's threshold until its
/// mean error is within the relative tolerance of the reference's mean
/// error at `reference_epsilon`.
pub fn calibrate_epsilon(
    exp: &Experiment,
    target: Method,
    reference: Method,
    reference_epsilon: f64,
    opts: CalibrationOptions,
) -> Result<Calibration> {
    let reference_error = mean_error(exp, reference, reference_epsilon)?;
    let mut trace = Vec::new();
    let done = |epsilon: f64, target_error: f64, trace: Vec<(f64, f64)>| Calibration {
        target,
        reference,
        reference_epsilon,
        epsilon,
        target_error,
        reference_error,
        trace,
    };
    if target == reference {
        return Ok(done(reference_epsilon, reference_error, vec![(reference_epsilon, reference_error)]));
    }
    let close = |e: f64| (e - reference_error).abs() <= opts.relative_tolerance * reference_error;
    let fail = |message: String, trace: Vec<(f64, f64)>| Error::CalibrationFailed { message, trace };

    let eval = |eps: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64> {
        let e = mean_error(exp, target, eps)?;
        log::info!("calibrate {target}: epsilon {eps:e} -> mean l1 {e:e} (reference {reference_error:e})");
        trace.push((eps, e));
        Ok(e)
    };

    let mut eps = reference_epsilon;
    let err = eval(eps, &mut trace)?;
    if close(err) {
        return Ok(done(eps, err, trace));
    }
    // Bracket: lo has error below the reference, hi above.
    let (mut lo, mut hi);
    if err < reference_error {
        lo = eps;
        loop {
            eps *= opts.expansion;
            if eps > opts.max_epsilon || trace.len() >= opts.max_evaluations {
                return Err(fail("no threshold raises the error to the reference".into(), trace));
            }
            let e = eval(eps, &mut trace)?;
            if close(e) {
                return Ok(done(eps, e, trace));
            }
            if e > reference_error {
                hi = eps;
                break;
            }
            lo = eps;
        }
    } else {
        hi = eps;
        let (mut prev, mut stalled) = (err, 0);
        loop {
            eps /= opts.expansion;
            if eps < opts.min_epsilon || trace.len() >= opts.max_evaluations {
                return Err(fail("no threshold lowers the error to the reference".into(), trace));
            }
            let e = eval(eps, &mut trace)?;
            if close(e) {
                return Ok(done(eps, e, trace));
            }
            if e < reference_error {
                lo = eps;
                break;
            }
            hi = eps;
            // An error floor above the reference: tightening no longer helps.
            stalled = if e >= prev * (1.0 - opts.relative_tolerance / 10.0) { stalled + 1 } else { 0 };
            if stalled >= opts.stall_steps {
                return Err(fail(
                    format!("error stalls at {e:e}, above the reference {reference_error:e}"),
                    trace,
                ));
            }
            prev = e;
        }
    }
    while trace.len() < opts.max_evaluations {
        let mid = (lo * hi).sqrt();
        let e = eval(mid, &mut trace)?;
        if close(e) {
            return Ok(done(mid, e, trace));
        }
        if e < reference_error {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(fail(
        format!("no match within {} evaluations (bracket {lo:e}..{hi:e})", opts.max_evaluations),
        trace,
    ))
}
