use std::ops::Range;

use ndarray::{s, Array2, Array3, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Sliding `(lookback, horizon)` windows over a channel-major series,
/// restricted to one row range.
#[derive(Debug, Clone)]
pub struct Windows<'a> {
    series: &'a Array2<f64>,
    pub lookback: usize,
    pub horizon: usize,
    /// Absolute start row of each window's input.
    pub starts: Vec<usize>,
}

/// `B` windows stacked: `x` is `B × N × T`, `y` is `B × N × T'`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub x: Array3<f64>,
    pub y: Array3<f64>,
}

impl WindowBatch {
    /// Flattens to `B·N` rows, channel-fastest, the layout the model consumes.
    pub fn rows(&self) -> (Array2<f64>, Array2<f64>) {
        let (b, n, t) = self.x.dim();
        let h = self.y.dim().2;
        (
            self.x.to_shape((b * n, t)).expect("standard layout").into_owned(),
            self.y.to_shape((b * n, h)).expect("standard layout").into_owned(),
        )
    }
}

/// Enumerates windows with `stride` over `range` of `series` (`N × L`).
/// The count is `(len - lookback - horizon) / stride + 1`.
pub fn windows(
    series: &Array2<f64>,
    range: Range<usize>,
    lookback: usize,
    horizon: usize,
    stride: usize,
) -> Result<Windows<'_>> {
    if stride == 0 {
        return Err(Error::InvalidParams("window stride must be positive".into()));
    }
    if range.end > series.ncols() || range.len() < lookback + horizon {
        return Err(Error::RangeTooShort {
            len: range.len().min(series.ncols().saturating_sub(range.start)),
            lookback,
            horizon,
        });
    }
    let last = range.end - lookback - horizon;
    Ok(Windows {
        series,
        lookback,
        horizon,
        starts: (range.start..=last).step_by(stride).collect(),
    })
}

impl<'a> Windows<'a> {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.series.nrows()
    }

    /// Input and target of window `i`.
    pub fn get(&self, i: usize) -> (ArrayView2<'a, f64>, ArrayView2<'a, f64>) {
        let s0 = self.starts[i];
        let split = s0 + self.lookback;
        (
            self.series.slice(s![.., s0..split]),
            self.series.slice(s![.., split..split + self.horizon]),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = (ArrayView2<'a, f64>, ArrayView2<'a, f64>)> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Window indices in a seeded random order.
    pub fn shuffled_indices(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        idx
    }

    /// Window indices shuffled by a fresh generator seeded with `seed`.
    pub fn shuffled(&self, seed: u64) -> Vec<usize> {
        self.shuffled_indices(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn batch(&self, indices: &[usize]) -> WindowBatch {
        let n = self.series.nrows();
        let mut x = Array3::zeros((indices.len(), n, self.lookback));
        let mut y = Array3::zeros((indices.len(), n, self.horizon));
        for (b, &i) in indices.iter().enumerate() {
            let (xi, yi) = self.get(i);
            x.slice_mut(s![b, .., ..]).assign(&xi);
            y.slice_mut(s![b, .., ..]).assign(&yi);
        }
        WindowBatch { x, y }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, len: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, len), |(c, t)| (c * 1000 + t) as f64)
    }

    #[test]
    fn counts() {
        let s = ramp(2, 100);
        assert_eq!(windows(&s, 10..30, 12, 8, 1).unwrap().len(), 1);
        assert_eq!(windows(&s, 10..35, 12, 8, 1).unwrap().len(), 6);
        assert_eq!(windows(&s, 0..100, 12, 8, 5).unwrap().len(), (100 - 20) / 5 + 1);
        assert!(matches!(windows(&s, 10..29, 12, 8, 1), Err(Error::RangeTooShort { .. })));
    }

    #[test]
    fn target_follows_input() {
        let s = ramp(2, 60);
        let w = windows(&s, 5..60, 8, 4, 1).unwrap();
        for (x, y) in w.iter() {
            assert_eq!(x[[1, 7]] + 1.0, y[[1, 0]]);
        }
        let (x, y) = w.get(w.len() - 1);
        assert_eq!(y[[0, 3]], 59.0);
        assert_eq!(x[[0, 0]], 48.0);
    }

    #[test]
    fn batch_rows_are_channel_fastest() {
        let s = ramp(3, 40);
        let w = windows(&s, 0..40, 4, 2, 1).unwrap();
        let (x, y) = w.batch(&[5, 0]).rows();
        assert_eq!(x.dim(), (6, 4));
        assert_eq!(x[[0, 0]], 5.0);
        assert_eq!(x[[2, 0]], 2005.0);
        assert_eq!(x[[3, 0]], 0.0);
        assert_eq!(y[[4, 1]], 1005.0);
    }

    #[test]
    fn shuffle_is_seeded() {
        let s = ramp(1, 100);
        let w = windows(&s, 0..100, 4, 2, 1).unwrap();
        assert_eq!(w.shuffled(9), w.shuffled(9));
        assert_ne!(w.shuffled(9), w.shuffled(10));
    }
}
