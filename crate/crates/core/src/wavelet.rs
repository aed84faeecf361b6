//! Single-level orthogonal discrete wavelet analysis and synthesis.
//!
//! Analysis is a periodized correlation followed by downsampling by two:
//!
//! ```text
//! approx[k] = Σ_n lo[n] · x[(2k + n) mod T]
//! detail[k] = Σ_n hi[n] · x[(2k + n) mod T]
//! ```
//!
//! so every supported filter produces exactly `T / 2` coefficients per band.
//! For an orthonormal bank the synthesis operator is the transpose of the
//! analysis operator, which is also what the model uses as the adjoint of
//! each transform during back-propagation.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Tolerance used when validating orthonormality of tabulated coefficients.
const FILTER_TOLERANCE: f64 = 1e-14;

/// Wavelet families available for the analysis bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveletName {
    Haar,
    Db2,
    Sym4,
    Coif1,
}

impl WaveletName {
    pub const ALL: [WaveletName; 4] = [
        WaveletName::Haar,
        WaveletName::Db2,
        WaveletName::Sym4,
        WaveletName::Coif1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WaveletName::Haar => "haar",
            WaveletName::Db2 => "db2",
            WaveletName::Sym4 => "sym4",
            WaveletName::Coif1 => "coif1",
        }
    }
}

impl fmt::Display for WaveletName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WaveletName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "haar" => Ok(WaveletName::Haar),
            "db2" => Ok(WaveletName::Db2),
            "sym4" => Ok(WaveletName::Sym4),
            "coif1" => Ok(WaveletName::Coif1),
            _ => Err(Error::UnsupportedWavelet(s.to_string())),
        }
    }
}

// Low-pass analysis coefficients in correlation order (first tap multiplies
// the earliest sample of each pair). Values are the standard published
// reconstruction low-pass tables; sym4 is re-solved from its orthonormality
// and vanishing-moment equations to full double precision, since the common
// 16-digit table leaves defects near 1e-13.
const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

const SYM4_LO: [f64; 8] = [
    0.032_223_100_604_051_466,
    -0.012_603_967_262_031_304,
    -0.099_219_543_576_633_53,
    0.297_857_795_605_306_06,
    0.803_738_751_805_132_1,
    0.497_618_667_632_775,
    -0.029_635_527_646_002_493,
    -0.075_765_714_789_502_21,
];

const COIF1_LO: [f64; 6] = [
    -0.072_732_619_512_526_45,
    0.337_897_662_457_481_8,
    0.852_572_020_211_600_4,
    0.384_864_846_864_857_8,
    -0.072_732_619_512_526_45,
    -0.015_655_728_135_791_993,
];

fn db2_lo() -> [f64; 4] {
    let s3 = 3f64.sqrt();
    let d = 4.0 * std::f64::consts::SQRT_2;
    [(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
}

/// Analysis low-pass / high-pass pair of an orthogonal wavelet.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPair {
    label: &'static str,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl FilterPair {
    /// Builds the analysis bank for `name`.
    pub fn new(name: WaveletName) -> Result<Self> {
        match name {
            // Stored exactly; the quadrature mirror of {a, a} is {a, -a}.
            WaveletName::Haar => Ok(FilterPair {
                label: "haar",
                lo: vec![SQRT_HALF, SQRT_HALF],
                hi: vec![SQRT_HALF, -SQRT_HALF],
            }),
            WaveletName::Db2 => Self::from_lowpass("db2", &db2_lo()),
            WaveletName::Sym4 => Self::from_lowpass("sym4", &SYM4_LO),
            WaveletName::Coif1 => Self::from_lowpass("coif1", &COIF1_LO),
        }
    }

    /// Even/odd sample split (the "lazy" wavelet). Orthonormal, but does no
    /// filtering; used to bypass the wavelet stage while keeping band shapes.
    pub fn polyphase() -> Self {
        FilterPair {
            label: "polyphase",
            lo: vec![1.0, 0.0],
            hi: vec![0.0, -1.0],
        }
    }

    /// Derives the high-pass branch by the quadrature-mirror relation
    /// `hi[n] = (-1)^n lo[L-1-n]` and validates the pair.
    pub fn from_lowpass(label: &'static str, lo: &[f64]) -> Result<Self> {
        let len = lo.len();
        if len < 2 || len % 2 != 0 {
            return Err(Error::InvalidFilter {
                name: label.into(),
                reason: format!("length {len} is not a positive even number"),
            });
        }
        let hi = (0..len)
            .map(|n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * lo[len - 1 - n]
            })
            .collect();
        let pair = FilterPair {
            label,
            lo: lo.to_vec(),
            hi,
        };
        pair.validate()?;
        Ok(pair)
    }

    /// Checks unit energy of both branches, the quadrature relation and
    /// double-shift orthogonality of the low-pass branch.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidFilter {
            name: self.label.into(),
            reason,
        };
        let len = self.lo.len();
        if len != self.hi.len() || len % 2 != 0 || len == 0 {
            return Err(fail(format!(
                "branch lengths {} / {} are not equal and even",
                len,
                self.hi.len()
            )));
        }
        for (branch, taps) in [("low-pass", &self.lo), ("high-pass", &self.hi)] {
            let energy: f64 = taps.iter().map(|c| c * c).sum();
            if (energy - 1.0).abs() > FILTER_TOLERANCE {
                return Err(fail(format!("{branch} energy {energy} != 1")));
            }
        }
        for n in 0..len {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            if (self.hi[n] - sign * self.lo[len - 1 - n]).abs() > FILTER_TOLERANCE {
                return Err(fail(format!("quadrature relation broken at tap {n}")));
            }
        }
        for shift in (2..len).step_by(2) {
            let dot: f64 = (0..len - shift).map(|n| self.lo[n] * self.lo[n + shift]).sum();
            if dot.abs() > FILTER_TOLERANCE {
                return Err(fail(format!("low-pass not orthogonal to its {shift}-shift")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &'static str {
        self.label
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    /// Analysis of one row. `approx` and `detail` must hold `x.len() / 2` values.
    pub fn analyze_row(&self, x: &[f64], approx: &mut [f64], detail: &mut [f64]) {
        let len = x.len();
        for k in 0..approx.len() {
            let mut a = 0.0;
            let mut d = 0.0;
            for (n, (lo, hi)) in self.lo.iter().zip(&self.hi).enumerate() {
                let v = x[(2 * k + n) % len];
                a += lo * v;
                d += hi * v;
            }
            approx[k] = a;
            detail[k] = d;
        }
    }

    /// Synthesis of one row; `out` must hold `2 * approx.len()` values.
    pub fn synthesize_row(&self, approx: &[f64], detail: &[f64], out: &mut [f64]) {
        let len = out.len();
        out.fill(0.0);
        for k in 0..approx.len() {
            let (a, d) = (approx[k], detail[k]);
            for (n, (lo, hi)) in self.lo.iter().zip(&self.hi).enumerate() {
                out[(2 * k + n) % len] += lo * a + hi * d;
            }
        }
    }
}

/// Looks up a supported wavelet by name.
pub fn make_filters(name: &str) -> Result<FilterPair> {
    FilterPair::new(name.parse()?)
}

/// Per-channel approximation / detail coefficients, each `N × T/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTensor {
    pub approx: Array2<f64>,
    pub detail: Array2<f64>,
}

impl BandTensor {
    pub fn new(approx: Array2<f64>, detail: Array2<f64>) -> Result<Self> {
        if approx.dim() != detail.dim() {
            return Err(Error::Shape(format!(
                "approx {:?} vs detail {:?}",
                approx.dim(),
                detail.dim()
            )));
        }
        if approx.ncols() == 0 {
            return Err(Error::Shape("band tensor with zero half length".into()));
        }
        Ok(BandTensor { approx, detail })
    }

    pub fn zeros(channels: usize, half_len: usize) -> Self {
        BandTensor {
            approx: Array2::zeros((channels, half_len)),
            detail: Array2::zeros((channels, half_len)),
        }
    }

    pub fn channels(&self) -> usize {
        self.approx.nrows()
    }

    pub fn half_len(&self) -> usize {
        self.approx.ncols()
    }
}

fn check_series(x: &ArrayView2<'_, f64>, f: &FilterPair) -> Result<()> {
    let len = x.ncols();
    if len % 2 != 0 {
        return Err(Error::OddLength(len));
    }
    if len < f.len() {
        return Err(Error::TooShort {
            len,
            filter_len: f.len(),
        });
    }
    if let Some(((c, t), v)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidData(format!(
            "non-finite value {v} at channel {c}, step {t}"
        )));
    }
    Ok(())
}

/// Single-level periodized DWT of every row of `x` (`N × T`).
pub fn dwt1(x: ArrayView2<'_, f64>, f: &FilterPair) -> Result<BandTensor> {
    check_series(&x, f)?;
    let (channels, len) = x.dim();
    let mut bands = BandTensor::zeros(channels, len / 2);
    for ((row, mut a), mut d) in x
        .axis_iter(Axis(0))
        .zip(bands.approx.axis_iter_mut(Axis(0)))
        .zip(bands.detail.axis_iter_mut(Axis(0)))
    {
        let row = row.to_vec();
        f.analyze_row(
            &row,
            a.as_slice_mut().expect("row-major band"),
            d.as_slice_mut().expect("row-major band"),
        );
    }
    Ok(bands)
}

/// Inverse of [`dwt1`] under periodization.
pub fn idwt1(b: &BandTensor, f: &FilterPair) -> Result<Array2<f64>> {
    if b.approx.dim() != b.detail.dim() {
        return Err(Error::Shape(format!(
            "approx {:?} vs detail {:?}",
            b.approx.dim(),
            b.detail.dim()
        )));
    }
    let (channels, half) = b.approx.dim();
    if 2 * half < f.len() {
        return Err(Error::TooShort {
            len: 2 * half,
            filter_len: f.len(),
        });
    }
    let mut out = Array2::zeros((channels, 2 * half));
    for ((a, d), mut o) in b
        .approx
        .axis_iter(Axis(0))
        .zip(b.detail.axis_iter(Axis(0)))
        .zip(out.axis_iter_mut(Axis(0)))
    {
        f.synthesize_row(
            &a.to_vec(),
            &d.to_vec(),
            o.as_slice_mut().expect("row-major output"),
        );
    }
    Ok(out)
}
