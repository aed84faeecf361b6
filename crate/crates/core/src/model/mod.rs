//! The forecaster: normalize → DWT → residual cross-band conv → band heads →
//! IDWT → denormalize, with an exact hand-written reverse pass.
//!
//! Batches are row matrices: row `r` of a batch holds one window of channel
//! `r mod N`, so a single sample is `N` rows and a batch of `B` windows is
//! `B·N` rows. All parameters are shared across rows (channel independence),
//! except the instance-norm affine, which is per channel.

mod config;
mod conv;
mod head;
mod norm;
mod params;

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{HeadKind, HeadMode, ModelConfig, NormMode};
pub use conv::band_mix;
pub use head::head_map;
pub use norm::{denormalize, normalize, NormStats, REVIN_EPS};
pub use params::{Affine, ConvParams, Dense, Head, ParamGrads, Params, TensorView, TensorViewMut};

use crate::error::{Error, Result};
use crate::wavelet::FilterPair;

/// Model parameters plus configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SwiftModel {
    pub config: ModelConfig,
    pub params: Params,
    filters: FilterPair,
    version: u64,
}

/// Intermediates of one forward pass; consumed by exactly one [`backward`] call.
#[derive(Debug)]
pub struct ForwardCache {
    version: u64,
    stats: NormStats,
    /// Standardized input (revin only; needed for the affine gradient).
    standardized: Option<Array2<f64>>,
    approx: Array2<f64>,
    detail: Array2<f64>,
    heads: Vec<head::HeadGroup>,
    /// IDWT output before denormalization.
    body_out: Array2<f64>,
}

impl ForwardCache {
    pub fn stats(&self) -> &NormStats {
        &self.stats
    }

    pub fn rows(&self) -> usize {
        self.body_out.nrows()
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

fn init_dense(rng: &mut ChaCha8Rng, inputs: usize, outputs: usize) -> Dense {
    Dense {
        weight: Array2::from_shape_vec((inputs, outputs), uniform(rng, &[inputs, outputs], inputs))
            .expect("shape matches length"),
        bias: Array1::zeros(outputs),
    }
}

/// Builds a model with weights drawn uniformly in `±1/sqrt(fan_in)` from a
/// ChaCha8 stream seeded by `seed`, zero biases, `gamma = 1` and `beta = 0`.
pub fn init_model(cfg: &ModelConfig, seed: u64) -> Result<SwiftModel> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let affine = (cfg.norm == NormMode::Revin).then(|| Affine {
        gamma: Array1::ones(cfg.channels),
        beta: Array1::zeros(cfg.channels),
    });
    let conv = cfg.conv.then(|| {
        let k = cfg.kernel_size;
        ConvParams {
            weight: Array3::from_shape_vec((2, 2, k), uniform(&mut rng, &[2, 2, k], 2 * k))
                .expect("shape matches length"),
            bias: Array1::zeros(2),
        }
    });
    let (half_in, half_out) = (cfg.half_lookback(), cfg.half_horizon());
    let heads = (0..cfg.head_sets())
        .map(|i| {
            let label = cfg.head_label(i);
            match cfg.head {
                HeadKind::Linear => Head {
                    label,
                    hidden: None,
                    out: init_dense(&mut rng, half_in, half_out),
                },
                HeadKind::Mlp => {
                    let hidden = init_dense(&mut rng, half_in, cfg.mlp_hidden);
                    Head {
                        label,
                        hidden: Some(hidden),
                        out: init_dense(&mut rng, cfg.mlp_hidden, half_out),
                    }
                }
            }
        })
        .collect();
    Ok(SwiftModel {
        config: cfg.clone(),
        params: Params { affine, conv, heads },
        filters: cfg.filters()?,
        version: 0,
    })
}

/// Component-wise multiply-accumulate count of one forward pass over `N` channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacReport {
    pub head: u64,
    pub conv: u64,
    pub norm: u64,
    pub total: u64,
}

impl SwiftModel {
    /// Rebuilds a model from a configuration and a full parameter set.
    pub fn from_params(config: ModelConfig, params: Params) -> Result<Self> {
        config.validate()?;
        let template = init_model(&config, 0)?;
        let expected: Vec<_> = template.params.tensors().into_iter().map(|t| (t.name, t.shape)).collect();
        let got: Vec<_> = params.tensors().into_iter().map(|t| (t.name, t.shape)).collect();
        if expected != got {
            return Err(Error::Shape(format!(
                "parameter layout does not match configuration: expected {expected:?}, got {got:?}"
            )));
        }
        Ok(SwiftModel {
            filters: config.filters()?,
            config,
            params,
            version: 0,
        })
    }

    pub fn filters(&self) -> &FilterPair {
        &self.filters
    }

    /// Monotone counter bumped by every parameter mutation made through
    /// [`SwiftModel::params_mut`]; forward caches are tied to it.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn params_mut(&mut self) -> &mut Params {
        self.version += 1;
        &mut self.params
    }

    pub fn count_params(&self) -> usize {
        self.params.count()
    }

    pub fn count_macs(&self) -> MacReport {
        let cfg = &self.config;
        let n = cfg.channels as u64;
        let (hi, ho) = (cfg.half_lookback() as u64, cfg.half_horizon() as u64);
        let per_band = match cfg.head {
            HeadKind::Linear => hi * ho,
            HeadKind::Mlp => {
                let h = cfg.mlp_hidden as u64;
                hi * h + h * ho
            }
        };
        let head = 2 * n * per_band;
        let conv = if cfg.conv {
            4 * cfg.kernel_size as u64 * hi * n
        } else {
            0
        };
        let io = n * (cfg.lookback + cfg.horizon) as u64;
        let norm = match cfg.norm {
            NormMode::None => 0,
            NormMode::Mean => io,
            NormMode::Revin => 2 * io,
        };
        MacReport {
            head,
            conv,
            norm,
            total: head + conv + norm,
        }
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        forward(x, self).map(|(y, _)| y)
    }
}

/// Runs the full model on `x` (`B·N × T`).
pub fn forward(x: ArrayView2<'_, f64>, model: &SwiftModel) -> Result<(Array2<f64>, ForwardCache)> {
    let cfg = &model.config;
    norm::check_rows(&x, model, cfg.lookback)?;
    let rows = x.nrows();

    let (mut normed, stats) = norm::standardize(&x, cfg.norm);
    let standardized = (cfg.norm == NormMode::Revin).then(|| normed.clone());
    norm::apply_affine(&mut normed, model);

    let half = cfg.half_lookback();
    let mut approx = Array2::zeros((rows, half));
    let mut detail = Array2::zeros((rows, half));
    for r in 0..rows {
        let src = normed.row(r);
        model.filters.analyze_row(
            src.as_slice().expect("contiguous row"),
            approx.row_mut(r).into_slice().unwrap(),
            detail.row_mut(r).into_slice().unwrap(),
        );
    }

    let (mixed_a, mixed_d) = match &model.params.conv {
        Some(p) => {
            let mut ma = Array2::zeros((rows, half));
            let mut md = Array2::zeros((rows, half));
            for r in 0..rows {
                conv::mix_row(
                    p,
                    [approx.row(r).to_slice().unwrap(), detail.row(r).to_slice().unwrap()],
                    [ma.row_mut(r).into_slice().unwrap(), md.row_mut(r).into_slice().unwrap()],
                );
            }
            (ma, md)
        }
        None => (approx.clone(), detail.clone()),
    };

    let (out_a, out_d, heads) = head::forward(model, mixed_a.view(), mixed_d.view());

    let mut body_out = Array2::zeros((rows, cfg.horizon));
    for r in 0..rows {
        model.filters.synthesize_row(
            out_a.row(r).to_slice().unwrap(),
            out_d.row(r).to_slice().unwrap(),
            body_out.row_mut(r).into_slice().unwrap(),
        );
    }
    let y = denormalize(body_out.view(), &stats, model)?;
    Ok((
        y,
        ForwardCache {
            version: model.version,
            stats,
            standardized,
            approx,
            detail,
            heads,
            body_out,
        },
    ))
}

/// Exact gradient of `Σ grad_out ⊙ forward(x)` with respect to every parameter.
pub fn backward(cache: ForwardCache, model: &SwiftModel, grad_out: ArrayView2<'_, f64>) -> Result<ParamGrads> {
    if cache.version != model.version {
        return Err(Error::StaleCache {
            cached: cache.version,
            current: model.version,
        });
    }
    let cfg = &model.config;
    let rows = cache.rows();
    if grad_out.dim() != (rows, cfg.horizon) {
        return Err(Error::Shape(format!(
            "gradient {:?} does not match output ({rows}, {})",
            grad_out.dim(),
            cfg.horizon
        )));
    }
    if grad_out.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite output gradient".into()));
    }
    let mut grads = model.params.zeros_like();
    let channels = cfg.channels;

    // denormalize
    let mut d_body = grad_out.to_owned();
    if let (Some(affine), Some(g_aff)) = (&model.params.affine, grads.affine.as_mut()) {
        for (r, mut row) in d_body.axis_iter_mut(Axis(0)).enumerate() {
            let c = r % channels;
            let (g, b) = (affine.gamma[c], affine.beta[c]);
            let s = cache.stats.scale(r);
            let mut d_gamma = 0.0;
            let mut d_beta = 0.0;
            for (d, &y) in row.iter_mut().zip(cache.body_out.row(r)) {
                let up = *d;
                d_beta -= up * s / g;
                d_gamma -= up * (y - b) * s / (g * g);
                *d = up * s / g;
            }
            g_aff.gamma[c] += d_gamma;
            g_aff.beta[c] += d_beta;
        }
    }

    // IDWT adjoint is the analysis operator
    let half_out = cfg.half_horizon();
    let mut d_out_a = Array2::zeros((rows, half_out));
    let mut d_out_d = Array2::zeros((rows, half_out));
    for r in 0..rows {
        model.filters.analyze_row(
            d_body.row(r).to_slice().unwrap(),
            d_out_a.row_mut(r).into_slice().unwrap(),
            d_out_d.row_mut(r).into_slice().unwrap(),
        );
    }

    let (d_mixed_a, d_mixed_d) = head::backward(model, &cache.heads, d_out_a.view(), d_out_d.view(), &mut grads);

    let half = cfg.half_lookback();
    let mut d_a = d_mixed_a.clone();
    let mut d_d = d_mixed_d.clone();
    if let (Some(p), Some(g_conv)) = (&model.params.conv, grads.conv.as_mut()) {
        for r in 0..rows {
            conv::mix_row_backward(
                p,
                [cache.approx.row(r).to_slice().unwrap(), cache.detail.row(r).to_slice().unwrap()],
                [d_mixed_a.row(r).to_slice().unwrap(), d_mixed_d.row(r).to_slice().unwrap()],
                g_conv,
                [d_a.row_mut(r).into_slice().unwrap(), d_d.row_mut(r).into_slice().unwrap()],
            );
        }
    }

    // Only the revin affine sits upstream of the transform.
    let Some(g_aff) = grads.affine.as_mut() else {
        return Ok(grads);
    };
    let z = cache.standardized.as_ref().expect("revin cache keeps standardized input");
    let mut d_norm = vec![0.0; 2 * half];
    for r in 0..rows {
        let c = r % channels;
        model.filters.synthesize_row(
            d_a.row(r).to_slice().unwrap(),
            d_d.row(r).to_slice().unwrap(),
            &mut d_norm,
        );
        let mut d_gamma = 0.0;
        let mut d_beta = 0.0;
        for (d, zv) in d_norm.iter().zip(z.row(r)) {
            d_gamma += d * zv;
            d_beta += d;
        }
        g_aff.gamma[c] += d_gamma;
        g_aff.beta[c] += d_beta;
    }
    Ok(grads)
}
