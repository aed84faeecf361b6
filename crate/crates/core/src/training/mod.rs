//! Mini-batch Adam training with a one-cycle schedule, validation-based
//! model selection and sliding-window evaluation.

mod adam;
mod loss;
mod schedule;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use adam::{adam_step, adam_update, AdamState};
pub use loss::mse_loss;
pub use schedule::{onecycle_lr, peak_step};

use crate::data::{ForecastData, Split, Windows};
use crate::error::{Error, Result};
use crate::model::{backward, forward, init_model, ModelConfig, ParamGrads, SwiftModel};

/// Windows per parallel work unit. Fixed so the reduction order, and with it
/// every floating-point sum, does not depend on the thread count.
const CHUNK_WINDOWS: usize = 8;
/// Windows per evaluation batch.
const EVAL_WINDOWS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub max_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub pct_start: f64,
    pub div_factor: f64,
    pub final_div_factor: f64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            max_lr: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            pct_start: 0.3,
            div_factor: 25.0,
            final_div_factor: 1e4,
            patience: 3,
            seed: 2024,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.max_lr > 0.0 && self.max_lr.is_finite()) {
            return bad(format!("max_lr {} must be positive", self.max_lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)".into());
        }
        if !(self.eps > 0.0) {
            return bad("adam eps must be positive".into());
        }
        if !(self.pct_start > 0.0 && self.pct_start < 1.0) {
            return bad(format!("pct_start {} must lie in (0, 1)", self.pct_start));
        }
        if !(self.div_factor >= 1.0) || !(self.final_div_factor >= 1.0) {
            return bad("div factors must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the epoch's mini-batch losses.
    pub train_mse: f64,
    pub val_mse: f64,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the selected model.
    pub best: usize,
}

impl History {
    pub fn best_val(&self) -> Option<f64> {
        self.epochs.get(self.best).map(|r| r.val_mse)
    }

    /// `epoch,train_mse,val_mse,lr` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(w, "epoch,train_mse,val_mse,lr").map_err(io)?;
        for r in &self.epochs {
            writeln!(w, "{},{},{},{}", r.epoch, r.train_mse, r.val_mse, r.lr).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

/// Loss (mean squared error over the whole batch) and its parameter gradient.
///
/// The batch is cut into fixed chunks processed in parallel; chunk results
/// are summed in chunk order.
pub fn batch_gradient(model: &SwiftModel, windows: &Windows<'_>, indices: &[usize]) -> Result<(f64, ParamGrads)> {
    let horizon = model.config.horizon;
    let count = (indices.len() * model.config.channels * horizon) as f64;
    let parts: Vec<Result<(f64, ParamGrads)>> = indices
        .par_chunks(CHUNK_WINDOWS)
        .map(|chunk| {
            let (x, y) = windows.batch(chunk).rows();
            let (pred, cache) = forward(x.view(), model)?;
            let diff = &pred - &y;
            let sq = diff.iter().map(|d| d * d).sum::<f64>();
            let grad = diff * (2.0 / count);
            Ok((sq, backward(cache, model, grad.view())?))
        })
        .collect();
    let mut total = 0.0;
    let mut grads = model.params.zeros_like();
    for part in parts {
        let (sq, g) = part?;
        total += sq;
        grads.accumulate(&g);
    }
    Ok((total / count, grads))
}

/// Mean squared and absolute error over every window, on the scale of the data.
pub fn evaluate(model: &SwiftModel, windows: &Windows<'_>) -> Result<Metrics> {
    if windows.is_empty() {
        return Err(Error::EmptySplit("evaluation"));
    }
    check_channels(model, windows)?;
    let indices: Vec<usize> = (0..windows.len()).collect();
    let parts: Vec<Result<(f64, f64)>> = indices
        .par_chunks(EVAL_WINDOWS)
        .map(|chunk| {
            let (x, y) = windows.batch(chunk).rows();
            let pred = model.predict(x.view())?;
            let diff = pred - y;
            Ok((diff.iter().map(|d| d * d).sum(), diff.iter().map(|d| d.abs()).sum()))
        })
        .collect();
    let (mut sq, mut abs) = (0.0, 0.0);
    for part in parts {
        let (a, b) = part?;
        sq += a;
        abs += b;
    }
    let count = (windows.len() * model.config.channels * windows.horizon) as f64;
    Ok(Metrics {
        mse: sq / count,
        mae: abs / count,
    })
}

/// Forecasts for every window, stacked as `windows × N × T'`.
pub fn predict_windows(model: &SwiftModel, windows: &Windows<'_>) -> Result<Vec<Array2<f64>>> {
    check_channels(model, windows)?;
    let n = model.config.channels;
    let mut out = Vec::with_capacity(windows.len());
    let indices: Vec<usize> = (0..windows.len()).collect();
    for chunk in indices.chunks(EVAL_WINDOWS) {
        let (x, _) = windows.batch(chunk).rows();
        let pred = model.predict(x.view())?;
        for b in 0..chunk.len() {
            out.push(pred.slice(s![b * n..(b + 1) * n, ..]).to_owned());
        }
    }
    Ok(out)
}

fn check_channels(model: &SwiftModel, windows: &Windows<'_>) -> Result<()> {
    let data_channels = windows.channels();
    let cfg = &model.config;
    if data_channels != cfg.channels || windows.lookback != cfg.lookback || windows.horizon != cfg.horizon {
        return Err(Error::ConfigMismatch(format!(
            "model expects {} channels, lookback {}, horizon {}; data windows have {}, {}, {}",
            cfg.channels, cfg.lookback, cfg.horizon, data_channels, windows.lookback, windows.horizon
        )));
    }
    Ok(())
}

/// Trains from a seeded initialization and returns the parameters with the
/// lowest validation MSE together with the per-epoch history.
pub fn train(model_cfg: &ModelConfig, train_cfg: &TrainConfig, data: &ForecastData) -> Result<(SwiftModel, History)> {
    train_cfg.validate()?;
    let model = init_model(model_cfg, train_cfg.seed)?;
    train_from(model, train_cfg, data)
}

/// Like [`train`], starting from an existing model.
pub fn train_from(mut model: SwiftModel, cfg: &TrainConfig, data: &ForecastData) -> Result<(SwiftModel, History)> {
    cfg.validate()?;
    let (lookback, horizon) = (model.config.lookback, model.config.horizon);
    let train_w = data
        .windows(Split::Train, lookback, horizon)
        .map_err(|_| Error::EmptySplit("train"))?;
    let val_w = data
        .windows(Split::Val, lookback, horizon)
        .map_err(|_| Error::EmptySplit("validation"))?;
    check_channels(&model, &train_w)?;

    let batch = cfg.batch_size.min(train_w.len());
    let steps_per_epoch = train_w.len() / batch;
    let total_steps = steps_per_epoch * cfg.epochs;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train_w.len()).collect();
    let mut state = adam::AdamState::new(&model.params);
    let mut history = History::default();
    let mut best: Option<(f64, SwiftModel)> = None;
    let mut since_best = 0;
    let mut global = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for (step, idx) in order.chunks_exact(batch).enumerate() {
            let (loss, grads) = batch_gradient(&model, &train_w, idx)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, step, loss });
            }
            lr = onecycle_lr(global, total_steps, cfg)?;
            adam_step(model.params_mut(), &grads, &mut state, lr, cfg)?;
            loss_sum += loss;
            global += 1;
        }
        let train_mse = loss_sum / steps_per_epoch as f64;
        let val_mse = evaluate(&model, &val_w)?.mse;
        log::info!("epoch {epoch}: train {train_mse:.6} val {val_mse:.6} lr {lr:.3e}");
        history.epochs.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            lr,
        });
        if best.as_ref().is_none_or(|(b, _)| val_mse < *b) {
            best = Some((val_mse, model.clone()));
            history.best = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                log::info!("early stop after epoch {epoch}");
                break;
            }
        }
    }
    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, SplitScheme};

    fn trend_data(len: usize, channels: usize) -> ForecastData {
        let series = Array2::from_shape_fn((channels, len), |(c, t)| {
            let tf = t as f64;
            0.01 * tf * (c + 1) as f64 + (tf * 0.3 + c as f64).sin()
        });
        ForecastData {
            split: split(len, SplitScheme::Ratio).unwrap(),
            series,
        }
    }

    fn cfg(channels: usize) -> ModelConfig {
        let mut m = ModelConfig::new(16, 8, channels);
        m.kernel_size = 3;
        m
    }

    fn fast() -> TrainConfig {
        TrainConfig {
            epochs: 4,
            batch_size: 16,
            max_lr: 1e-2,
            patience: 0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn deterministic_runs() {
        let data = trend_data(400, 2);
        let (m1, h1) = train(&cfg(2), &fast(), &data).unwrap();
        let (m2, h2) = train(&cfg(2), &fast(), &data).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1.params, m2.params);
    }

    #[test]
    fn loss_decreases() {
        let data = trend_data(400, 1);
        let (_, h) = train(&cfg(1), &fast(), &data).unwrap();
        assert!(h.epochs.last().unwrap().train_mse < h.epochs[0].train_mse, "{h:?}");
    }

    #[test]
    fn best_model_matches_history_minimum() {
        let data = trend_data(400, 2);
        let (m, h) = train(&cfg(2), &fast(), &data).unwrap();
        let min = h.epochs.iter().map(|r| r.val_mse).fold(f64::INFINITY, f64::min);
        assert_eq!(h.best_val().unwrap(), min);
        let val = data.windows(Split::Val, 16, 8).unwrap();
        assert_eq!(evaluate(&m, &val).unwrap().mse, min);
    }

    #[test]
    fn evaluate_perfect_and_zero_predictors() {
        // zero data: any model with zero head output predicts perfectly
        let data = ForecastData {
            series: Array2::zeros((2, 200)),
            split: split(200, SplitScheme::Ratio).unwrap(),
        };
        let model = init_model(&cfg(2), 0).unwrap();
        let w = data.windows(Split::Test, 16, 8).unwrap();
        let m = evaluate(&model, &w).unwrap();
        assert_eq!((m.mse, m.mae), (0.0, 0.0));
        assert_eq!(evaluate(&model, &w).unwrap(), m);
    }

    #[test]
    fn zero_predictor_mse_is_target_power() {
        let data = trend_data(300, 2);
        let mut model = init_model(&cfg(2), 1).unwrap();
        model.config.norm = crate::model::NormMode::None;
        for h in &mut model.params_mut().heads {
            h.out.weight.fill(0.0);
        }
        model.params_mut().conv = None;
        model.config.conv = false;
        let w = data.windows(Split::Test, 16, 8).unwrap();
        let mut sq = 0.0;
        for (_, y) in w.iter() {
            sq += y.iter().map(|v| v * v).sum::<f64>();
        }
        let want = sq / (w.len() * 2 * 8) as f64;
        assert!((evaluate(&model, &w).unwrap().mse - want).abs() < 1e-12);
    }

    #[test]
    fn chunked_gradient_equals_single_pass() {
        let data = trend_data(300, 3);
        let model = init_model(&cfg(3), 2).unwrap();
        let w = data.windows(Split::Train, 16, 8).unwrap();
        let idx: Vec<usize> = (0..21).collect();
        let (loss, g) = batch_gradient(&model, &w, &idx).unwrap();
        let (x, y) = w.batch(&idx).rows();
        let (pred, cache) = forward(x.view(), &model).unwrap();
        let (l2, d) = mse_loss(pred.view(), y.view()).unwrap();
        let g2 = backward(cache, &model, d.view()).unwrap();
        assert!((loss - l2).abs() < 1e-12);
        for (a, b) in g.tensors().iter().zip(g2.tensors()) {
            for (u, v) in a.data.iter().zip(b.data) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_mismatched_channels() {
        let data = trend_data(300, 3);
        assert!(matches!(train(&cfg(2), &fast(), &data), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn history_csv() {
        let h = History {
            epochs: vec![EpochRecord {
                epoch: 0,
                train_mse: 0.5,
                val_mse: 0.25,
                lr: 1e-3,
            }],
            best: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        h.write_csv(&p).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "epoch,train_mse,val_mse,lr\n0,0.5,0.25,0.001\n");
    }
}
