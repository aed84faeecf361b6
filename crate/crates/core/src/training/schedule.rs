use std::f64::consts::PI;

use super::TrainConfig;
use crate::error::{Error, Result};

fn cosine(from: f64, to: f64, frac: f64) -> f64 {
    to + (from - to) * (1.0 + (PI * frac).cos()) / 2.0
}

/// Step index at which the one-cycle schedule peaks.
pub fn peak_step(total_steps: usize, pct_start: f64) -> usize {
    if total_steps < 3 {
        return 0;
    }
    let raw = (pct_start * total_steps as f64).round() as usize;
    raw.clamp(1, total_steps - 2)
}

/// One-cycle learning rate at `step` of `total_steps`.
///
/// With `p` the peak step, `lr0 = max_lr / div_factor` and
/// `lr_min = max_lr / final_div_factor`:
///
/// * `step ≤ p`: `max_lr + (lr0 − max_lr)·(1 + cos(π·step/p))/2`
/// * `step > p`: `lr_min + (max_lr − lr_min)·(1 + cos(π·(step − p)/(total − 1 − p)))/2`
///
/// Runs shorter than three steps have no room for a peak: one step uses
/// `lr0`, two steps use `lr0` then `lr_min`.
pub fn onecycle_lr(step: usize, total_steps: usize, cfg: &TrainConfig) -> Result<f64> {
    if step >= total_steps {
        return Err(Error::StepOutOfRange {
            step,
            total: total_steps,
        });
    }
    let initial = cfg.max_lr / cfg.div_factor;
    let min = cfg.max_lr / cfg.final_div_factor;
    if total_steps < 3 {
        return Ok(if step == 0 { initial } else { min });
    }
    let peak = peak_step(total_steps, cfg.pct_start);
    Ok(if step <= peak {
        cosine(initial, cfg.max_lr, step as f64 / peak as f64)
    } else {
        let span = (total_steps - 1 - peak) as f64;
        cosine(cfg.max_lr, min, (step - peak) as f64 / span)
    })
}
