use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::wavelet::{FilterPair, WaveletName};

/// Sub-series mapping layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Linear,
    /// One hidden layer with ReLU.
    Mlp,
}

/// Whether the approximation and detail bands share one mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMode {
    Share,
    Split,
}

/// Instance normalization wrapped around the model body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Subtract the per-window mean, add it back afterwards.
    Mean,
    /// Mean/variance standardization with a learnable per-channel affine.
    Revin,
    None,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $text),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), other
                    ))),
                }
            }
        }
    };
}

text_enum!(HeadKind { Linear => "linear", Mlp => "mlp" });
text_enum!(HeadMode { Share => "share", Split => "split" });
text_enum!(NormMode { Mean => "mean", Revin => "revin", None => "none" });

/// Architecture of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Lookback window length `T`.
    pub lookback: usize,
    /// Forecast horizon `T'`.
    pub horizon: usize,
    pub kernel_size: usize,
    pub head: HeadKind,
    pub head_mode: HeadMode,
    pub norm: NormMode,
    pub wavelet: WaveletName,
    pub mlp_hidden: usize,
    pub channels: usize,
    /// Cross-band convolution enabled. When off the stage is absent (the
    /// "without convolution" ablation).
    pub conv: bool,
    /// Wavelet stage enabled. When off the bands are a plain even/odd sample
    /// split (the "without DWT" ablation).
    pub dwt: bool,
    /// One head shared by every channel. When off each channel gets its own
    /// head parameters.
    pub channel_independent: bool,
}

impl ModelConfig {
    /// Linear shared-head model with mean normalization, Haar bank and `k = 3`.
    pub fn new(lookback: usize, horizon: usize, channels: usize) -> Self {
        ModelConfig {
            lookback,
            horizon,
            kernel_size: 3,
            head: HeadKind::Linear,
            head_mode: HeadMode::Share,
            norm: NormMode::Mean,
            wavelet: WaveletName::Haar,
            mlp_hidden: lookback,
            channels,
            conv: true,
            dwt: true,
            channel_independent: true,
        }
    }

    pub fn half_lookback(&self) -> usize {
        self.lookback / 2
    }

    pub fn half_horizon(&self) -> usize {
        self.horizon / 2
    }

    /// Filter bank used by the transform stage.
    pub fn filters(&self) -> Result<FilterPair> {
        if self.dwt {
            FilterPair::new(self.wavelet)
        } else {
            Ok(FilterPair::polyphase())
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.lookback == 0 || self.lookback % 2 != 0 {
            return bad(format!("lookback {} must be positive and even", self.lookback));
        }
        if self.horizon == 0 || self.horizon % 2 != 0 {
            return bad(format!("horizon {} must be positive and even", self.horizon));
        }
        if self.kernel_size % 2 == 0 {
            return bad(format!("kernel_size {} must be odd", self.kernel_size));
        }
        if self.kernel_size > self.half_lookback() {
            return bad(format!(
                "kernel_size {} exceeds half lookback {}",
                self.kernel_size,
                self.half_lookback()
            ));
        }
        if self.mlp_hidden == 0 {
            return bad("mlp_hidden must be at least 1".into());
        }
        if self.channels == 0 {
            return bad("channels must be at least 1".into());
        }
        let taps = self.filters()?.len();
        if self.lookback < taps || self.horizon < taps {
            return bad(format!(
                "lookback {} and horizon {} must be at least the {}-tap filter length",
                self.lookback, self.horizon, taps
            ));
        }
        Ok(())
    }

    /// Number of distinct head parameter sets.
    pub fn head_sets(&self) -> usize {
        let per_band = match self.head_mode {
            HeadMode::Share => 1,
            HeadMode::Split => 2,
        };
        let per_channel = if self.channel_independent { 1 } else { self.channels };
        per_band * per_channel
    }

    /// Head used by `band` (0 = approximation, 1 = detail) of `channel`.
    pub fn head_index(&self, band: usize, channel: usize) -> usize {
        let band_part = match self.head_mode {
            HeadMode::Share => 0,
            HeadMode::Split => band,
        };
        if self.channel_independent {
            band_part
        } else {
            band_part * self.channels + channel
        }
    }

    /// Parameter-name prefix of head `index`.
    pub fn head_label(&self, index: usize) -> String {
        let (band_part, channel) = if self.channel_independent {
            (index, None)
        } else {
            (index / self.channels, Some(index % self.channels))
        };
        let band = match (self.head_mode, band_part) {
            (HeadMode::Share, _) => "shared",
            (HeadMode::Split, 0) => "low",
            (HeadMode::Split, _) => "high",
        };
        match channel {
            Some(c) => format!("head.{band}.c{c}"),
            None => format!("head.{band}"),
        }
    }
}
