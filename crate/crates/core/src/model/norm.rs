//! Per-window instance normalization and its inverse.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::config::NormMode;
use super::SwiftModel;
use crate::error::{Error, Result};

/// Variance regularizer of the learnable instance norm.
pub const REVIN_EPS: f64 = 1e-5;

/// Per-row statistics captured by [`normalize`] and consumed by [`denormalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mode: NormMode,
    /// Row means (zero in `none` mode).
    pub mean: Array1<f64>,
    /// Row population variances (only populated in `revin` mode).
    pub var: Array1<f64>,
}

impl NormStats {
    /// `sqrt(var + eps)` in revin mode, one otherwise.
    pub fn scale(&self, row: usize) -> f64 {
        match self.mode {
            NormMode::Revin => (self.var[row] + REVIN_EPS).sqrt(),
            _ => 1.0,
        }
    }

    pub fn rows(&self) -> usize {
        self.mean.len()
    }
}

pub(crate) fn check_rows(x: &ArrayView2<'_, f64>, model: &SwiftModel, width: usize) -> Result<()> {
    let channels = model.config.channels;
    if x.ncols() != width {
        return Err(Error::Shape(format!(
            "expected rows of length {width}, got {}",
            x.ncols()
        )));
    }
    if x.nrows() == 0 || x.nrows() % channels != 0 {
        return Err(Error::Shape(format!(
            "{} rows is not a positive multiple of {channels} channels",
            x.nrows()
        )));
    }
    if let Some(((r, t), v)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidData(format!("non-finite value {v} at row {r}, step {t}")));
    }
    Ok(())
}

/// Returns the unit-free standardized rows `z = (x - mean) / scale` and the stats.
pub(crate) fn standardize(x: &ArrayView2<'_, f64>, mode: NormMode) -> (Array2<f64>, NormStats) {
    let rows = x.nrows();
    let width = x.ncols() as f64;
    let mut mean = Array1::zeros(rows);
    let mut var = Array1::zeros(rows);
    if mode != NormMode::None {
        for (r, row) in x.axis_iter(Axis(0)).enumerate() {
            let m = row.sum() / width;
            mean[r] = m;
            if mode == NormMode::Revin {
                var[r] = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / width;
            }
        }
    }
    let stats = NormStats { mode, mean, var };
    let mut z = x.to_owned();
    for (r, mut row) in z.axis_iter_mut(Axis(0)).enumerate() {
        let (m, s) = (stats.mean[r], stats.scale(r));
        row.mapv_inplace(|v| (v - m) / s);
    }
    (z, stats)
}

/// Applies the learnable affine (revin) to standardized rows in place.
pub(crate) fn apply_affine(z: &mut Array2<f64>, model: &SwiftModel) {
    if let Some(affine) = &model.params.affine {
        let channels = model.config.channels;
        for (r, mut row) in z.axis_iter_mut(Axis(0)).enumerate() {
            let (g, b) = (affine.gamma[r % channels], affine.beta[r % channels]);
            row.mapv_inplace(|v| g * v + b);
        }
    }
}

/// Normalizes the rows of `x` (row `r` belongs to channel `r mod N`).
pub fn normalize(x: ArrayView2<'_, f64>, model: &SwiftModel) -> Result<(Array2<f64>, NormStats)> {
    check_rows(&x, model, x.ncols())?;
    let (mut z, stats) = standardize(&x, model.config.norm);
    if model.config.norm == NormMode::Revin {
        apply_affine(&mut z, model);
    }
    Ok((z, stats))
}

/// Inverse of [`normalize`] applied to model output rows.
pub fn denormalize(y: ArrayView2<'_, f64>, stats: &NormStats, model: &SwiftModel) -> Result<Array2<f64>> {
    if y.nrows() != stats.rows() {
        return Err(Error::Shape(format!(
            "{} output rows but stats for {}",
            y.nrows(),
            stats.rows()
        )));
    }
    let channels = model.config.channels;
    let mut out = y.to_owned();
    match stats.mode {
        NormMode::None => {}
        NormMode::Mean => {
            Zip::from(out.rows_mut())
                .and(&stats.mean)
                .for_each(|mut row, &m| row += m);
        }
        NormMode::Revin => {
            let affine = model
                .params
                .affine
                .as_ref()
                .ok_or_else(|| Error::Config("revin stats on a model without affine".into()))?;
            if let Some(c) = affine.gamma.iter().position(|&g| g == 0.0) {
                return Err(Error::DegenerateAffine(c));
            }
            for (r, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
                let (g, b) = (affine.gamma[r % channels], affine.beta[r % channels]);
                let (m, s) = (stats.mean[r], stats.scale(r));
                row.mapv_inplace(|v| (v - b) / g * s + m);
            }
        }
    }
    Ok(out)
}
