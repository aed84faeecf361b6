//! Band mapping heads. Rows of the approximation and detail bands are
//! gathered per head parameter set, mapped with one matrix product per
//! layer, and scattered back.

use ndarray::{Array2, ArrayView2, Axis};

use super::params::{Dense, Head, Params};
use super::SwiftModel;
use crate::error::{Error, Result};
use crate::wavelet::BandTensor;

/// Rows routed through one head during a forward pass.
#[derive(Debug, Clone)]
pub(crate) struct HeadGroup {
    pub head: usize,
    /// `(band, row)` pairs in gather order; band 0 is the approximation.
    pub members: Vec<(usize, usize)>,
    pub input: Array2<f64>,
    /// Post-ReLU hidden activations (MLP heads only).
    pub hidden: Option<Array2<f64>>,
}

fn gather(bands: [&ArrayView2<'_, f64>; 2], members: &[(usize, usize)]) -> Array2<f64> {
    let width = bands[0].ncols();
    let mut out = Array2::zeros((members.len(), width));
    for (dst, &(band, row)) in out.axis_iter_mut(Axis(0)).zip(members) {
        dst.into_slice().unwrap().copy_from_slice(
            bands[band].row(row).as_slice().expect("contiguous band row"),
        );
    }
    out
}

fn scatter(src: &Array2<f64>, members: &[(usize, usize)], bands: [&mut Array2<f64>; 2]) {
    let [a, d] = bands;
    for (row_src, &(band, row)) in src.axis_iter(Axis(0)).zip(members) {
        let dst = if band == 0 { &mut *a } else { &mut *d };
        dst.row_mut(row).assign(&row_src);
    }
}

fn dense(layer: &Dense, x: &Array2<f64>) -> Array2<f64> {
    x.dot(&layer.weight) + &layer.bias
}

fn route(model: &SwiftModel, rows: usize) -> Vec<Vec<(usize, usize)>> {
    let cfg = &model.config;
    let mut groups = vec![Vec::new(); cfg.head_sets()];
    for row in 0..rows {
        for band in 0..2 {
            groups[cfg.head_index(band, row % cfg.channels)].push((band, row));
        }
    }
    groups
}

/// Maps both mixed bands; returns the output bands and the per-head caches.
pub(crate) fn forward(
    model: &SwiftModel,
    approx: ArrayView2<'_, f64>,
    detail: ArrayView2<'_, f64>,
) -> (Array2<f64>, Array2<f64>, Vec<HeadGroup>) {
    let rows = approx.nrows();
    let out_len = model.config.half_horizon();
    let mut out_a = Array2::zeros((rows, out_len));
    let mut out_d = Array2::zeros((rows, out_len));
    let mut caches = Vec::new();
    for (head_idx, members) in route(model, rows).into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let head: &Head = &model.params.heads[head_idx];
        let input = gather([&approx, &detail], &members);
        let hidden = head
            .hidden
            .as_ref()
            .map(|layer| dense(layer, &input).mapv(|v| v.max(0.0)));
        let y = dense(&head.out, hidden.as_ref().unwrap_or(&input));
        scatter(&y, &members, [&mut out_a, &mut out_d]);
        caches.push(HeadGroup {
            head: head_idx,
            members,
            input,
            hidden,
        });
    }
    (out_a, out_d, caches)
}

fn dense_backward(layer: &Dense, input: &Array2<f64>, d_out: &Array2<f64>, grad: &mut Dense) -> Array2<f64> {
    grad.weight += &input.t().dot(d_out);
    grad.bias += &d_out.sum_axis(Axis(0));
    d_out.dot(&layer.weight.t())
}

/// Back-propagates output-band gradients through the heads. Returns the
/// gradients w.r.t. the mixed input bands.
pub(crate) fn backward(
    model: &SwiftModel,
    groups: &[HeadGroup],
    d_approx: ArrayView2<'_, f64>,
    d_detail: ArrayView2<'_, f64>,
    grads: &mut Params,
) -> (Array2<f64>, Array2<f64>) {
    let rows = d_approx.nrows();
    let in_len = model.config.half_lookback();
    let mut din_a = Array2::zeros((rows, in_len));
    let mut din_d = Array2::zeros((rows, in_len));
    for g in groups {
        let head = &model.params.heads[g.head];
        let grad = &mut grads.heads[g.head];
        let d_out = gather([&d_approx, &d_detail], &g.members);
        let d_in = match (&head.hidden, &g.hidden) {
            (Some(layer), Some(act)) => {
                let mut d_hidden = dense_backward(&head.out, act, &d_out, &mut grad.out);
                ndarray::Zip::from(&mut d_hidden)
                    .and(act)
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
                dense_backward(
                    layer,
                    &g.input,
                    &d_hidden,
                    grad.hidden.as_mut().expect("gradient mirrors parameters"),
                )
            }
            _ => dense_backward(&head.out, &g.input, &d_out, &mut grad.out),
        };
        scatter(&d_in, &g.members, [&mut din_a, &mut din_d]);
    }
    (din_a, din_d)
}

/// Maps mixed bands of half length `T/2` to forecast bands of half length `T'/2`.
pub fn head_map(yc: &BandTensor, model: &SwiftModel) -> Result<BandTensor> {
    let cfg = &model.config;
    if yc.half_len() != cfg.half_lookback() {
        return Err(Error::Shape(format!(
            "head expects band length {}, got {}",
            cfg.half_lookback(),
            yc.half_len()
        )));
    }
    if yc.approx.dim() != yc.detail.dim() {
        return Err(Error::Shape("approx/detail shapes differ".into()));
    }
    if yc.channels() % cfg.channels != 0 {
        return Err(Error::Shape(format!(
            "{} rows is not a multiple of {} channels",
            yc.channels(),
            cfg.channels
        )));
    }
    let (a, d, _) = forward(model, yc.approx.view(), yc.detail.view());
    BandTensor::new(a, d)
}
