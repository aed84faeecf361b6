//! Cross-band residual convolution: `Yc = Conv(Y) + Y`, with `Y` the
//! (approximation, detail) pair viewed as a two-channel signal.

use ndarray::Axis;

use super::params::ConvParams;
use super::SwiftModel;
use crate::error::{Error, Result};
use crate::wavelet::BandTensor;

/// Forward pass for one row. Stride 1, zero padding `(k - 1) / 2`.
pub(crate) fn mix_row(p: &ConvParams, input: [&[f64]; 2], out: [&mut [f64]; 2]) {
    let k = p.weight.dim().2;
    let pad = (k - 1) / 2;
    let len = input[0].len();
    for (o, dst) in out.into_iter().enumerate() {
        let b = p.bias[o];
        for i in 0..len {
            let mut acc = input[o][i] + b;
            for (c, src) in input.iter().enumerate() {
                for j in 0..k {
                    let pos = i + j;
                    if pos < pad || pos - pad >= len {
                        continue;
                    }
                    acc += p.weight[[o, c, j]] * src[pos - pad];
                }
            }
            dst[i] = acc;
        }
    }
}

/// Backward pass for one row: accumulates kernel/bias gradients into `grad`
/// and writes the gradient w.r.t. the unmixed input into `d_input`.
pub(crate) fn mix_row_backward(
    p: &ConvParams,
    input: [&[f64]; 2],
    d_out: [&[f64]; 2],
    grad: &mut ConvParams,
    d_input: [&mut [f64]; 2],
) {
    let k = p.weight.dim().2;
    let pad = (k - 1) / 2;
    let len = input[0].len();
    let [d_in0, d_in1] = d_input;
    // residual path
    d_in0.copy_from_slice(d_out[0]);
    d_in1.copy_from_slice(d_out[1]);
    let d_in = [d_in0, d_in1];
    for o in 0..2 {
        grad.bias[o] += d_out[o].iter().sum::<f64>();
        for i in 0..len {
            let g = d_out[o][i];
            if g == 0.0 {
                continue;
            }
            for c in 0..2 {
                for j in 0..k {
                    let pos = i + j;
                    if pos < pad || pos - pad >= len {
                        continue;
                    }
                    grad.weight[[o, c, j]] += g * input[c][pos - pad];
                    d_in[c][pos - pad] += g * p.weight[[o, c, j]];
                }
            }
        }
    }
}

/// Applies the residual cross-band convolution to every channel of `y`.
/// Without a convolution stage the bands pass through unchanged.
pub fn band_mix(y: &BandTensor, model: &SwiftModel) -> Result<BandTensor> {
    let k = model.config.kernel_size;
    if y.half_len() < k {
        return Err(Error::KernelTooLarge {
            kernel: k,
            half_len: y.half_len(),
        });
    }
    let Some(conv) = &model.params.conv else {
        return Ok(y.clone());
    };
    let mut out = BandTensor::zeros(y.channels(), y.half_len());
    for r in 0..y.channels() {
        let a = y.approx.row(r).to_vec();
        let d = y.detail.row(r).to_vec();
        let mut oa = out.approx.index_axis_mut(Axis(0), r);
        let mut od = out.detail.index_axis_mut(Axis(0), r);
        mix_row(
            conv,
            [&a, &d],
            [oa.as_slice_mut().unwrap(), od.as_slice_mut().unwrap()],
        );
    }
    Ok(out)
}
