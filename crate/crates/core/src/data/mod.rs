//! Dataset ingestion, splits, standardization, sliding windows and a
//! synthetic non-stationary generator.

mod csv_io;
mod scaler;
mod split;
mod synth;
mod window;

use ndarray::Array2;

pub use csv_io::{load_csv, write_csv};
pub use scaler::{standardize, Scaler};
pub use split::{split, Split, SplitScheme, SplitSpec};
pub use synth::{synth_nonstationary, SynthParams};
pub use window::{windows, WindowBatch, Windows};

/// Channel-major multivariate series (`N × L`).
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub values: Array2<f64>,
    pub channel_names: Vec<String>,
    pub timestamps: Option<Vec<String>>,
}

impl RawSeries {
    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }
}

/// A standardized series together with its split, ready for training.
#[derive(Debug, Clone)]
pub struct ForecastData {
    pub series: Array2<f64>,
    pub split: SplitSpec,
}

impl ForecastData {
    /// Windows of `which`, using the lookback-extended range for val/test.
    pub fn windows(&self, which: Split, lookback: usize, horizon: usize) -> crate::Result<Windows<'_>> {
        windows(&self.series, self.split.window_range(which, lookback), lookback, horizon, 1)
    }
}
