use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Mean squared error and its gradient `2·(pred − target)/count`.
pub fn mse_loss(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} and target {:?} differ",
            pred.dim(),
            target.dim()
        )));
    }
    let count = pred.len().max(1) as f64;
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    Ok((loss, diff * (2.0 / count)))
}
