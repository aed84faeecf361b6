//! Learnable tensors and their named, ordered views.

use ndarray::{Array1, Array2, Array3};

/// Fully connected layer `out = in · weight + bias`, weight stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }
}

/// One band-mapping head: optional ReLU hidden layer followed by the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub label: String,
    pub hidden: Option<Dense>,
    pub out: Dense,
}

/// Per-channel affine of the learnable instance norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

/// Two-in, two-out 1-D convolution; weight is `out × in × k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weight: Array3<f64>,
    pub bias: Array1<f64>,
}

/// Every learnable tensor of a model. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub affine: Option<Affine>,
    pub conv: Option<ConvParams>,
    pub heads: Vec<Head>,
}

/// Gradient of a loss with respect to every entry of [`Params`].
pub type ParamGrads = Params;

/// Borrowed view of one named tensor.
#[derive(Debug)]
pub struct TensorView<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// Mutable counterpart of [`TensorView`].
#[derive(Debug)]
pub struct TensorViewMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
}

macro_rules! push_tensor {
    ($out:ident, $view:ident, $name:expr, $arr:expr, $slice:ident) => {{
        let shape = $arr.shape().to_vec();
        $out.push($view {
            name: $name,
            shape,
            data: $arr.$slice().expect("parameter tensors are contiguous"),
        });
    }};
}

impl Params {
    /// All tensors in canonical order.
    pub fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut out = Vec::new();
        if let Some(a) = &self.affine {
            push_tensor!(out, TensorView, "norm.gamma".into(), a.gamma, as_slice);
            push_tensor!(out, TensorView, "norm.beta".into(), a.beta, as_slice);
        }
        if let Some(c) = &self.conv {
            push_tensor!(out, TensorView, "conv.weight".into(), c.weight, as_slice);
            push_tensor!(out, TensorView, "conv.bias".into(), c.bias, as_slice);
        }
        for h in &self.heads {
            let out_prefix = if h.hidden.is_some() {
                format!("{}.out", h.label)
            } else {
                h.label.clone()
            };
            if let Some(d) = &h.hidden {
                push_tensor!(out, TensorView, format!("{}.hidden.weight", h.label), d.weight, as_slice);
                push_tensor!(out, TensorView, format!("{}.hidden.bias", h.label), d.bias, as_slice);
            }
            push_tensor!(out, TensorView, format!("{out_prefix}.weight"), h.out.weight, as_slice);
            push_tensor!(out, TensorView, format!("{out_prefix}.bias"), h.out.bias, as_slice);
        }
        out
    }

    /// Mutable tensors, same order and names as [`Params::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<TensorViewMut<'_>> {
        let mut out = Vec::new();
        if let Some(a) = &mut self.affine {
            push_tensor!(out, TensorViewMut, "norm.gamma".into(), a.gamma, as_slice_mut);
            push_tensor!(out, TensorViewMut, "norm.beta".into(), a.beta, as_slice_mut);
        }
        if let Some(c) = &mut self.conv {
            push_tensor!(out, TensorViewMut, "conv.weight".into(), c.weight, as_slice_mut);
            push_tensor!(out, TensorViewMut, "conv.bias".into(), c.bias, as_slice_mut);
        }
        for h in &mut self.heads {
            let out_prefix = if h.hidden.is_some() {
                format!("{}.out", h.label)
            } else {
                h.label.clone()
            };
            if let Some(d) = &mut h.hidden {
                push_tensor!(out, TensorViewMut, format!("{}.hidden.weight", h.label), d.weight, as_slice_mut);
                push_tensor!(out, TensorViewMut, format!("{}.hidden.bias", h.label), d.bias, as_slice_mut);
            }
            push_tensor!(out, TensorViewMut, format!("{out_prefix}.weight"), h.out.weight, as_slice_mut);
            push_tensor!(out, TensorViewMut, format!("{out_prefix}.bias"), h.out.bias, as_slice_mut);
        }
        out
    }

    /// Same structure, every entry zero.
    pub fn zeros_like(&self) -> Params {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.fill(0.0);
        }
        z
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// `self += other`, element by element in canonical order.
    pub fn accumulate(&mut self, other: &Params) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            debug_assert_eq!(dst.name, src.name);
            for (d, s) in dst.data.iter_mut().zip(src.data) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Name of the first tensor holding a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name)
    }
}
