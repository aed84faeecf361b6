//! Head weight comparison: cosine similarity, least-squares decomposition of
//! the shared head onto the per-band heads, and heatmap export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{HeadKind, HeadMode, SwiftModel};

/// Largest accepted condition number of the (equilibrated) normal matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Cosine of the angle between two matrices viewed as flat vectors.
pub fn cosine_sim(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("cannot compare {:?} with {:?}", a.dim(), b.dim())));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Least-squares fit `target ≈ beta_low·low + beta_high·high + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub beta_low: f64,
    pub beta_high: f64,
    pub intercept: f64,
    pub fit_mse: f64,
}

fn fit_mse(target: &Array2<f64>, predict: impl Fn(usize) -> f64) -> f64 {
    let n = target.len() as f64;
    target.iter().enumerate().map(|(i, y)| (y - predict(i)).powi(2)).sum::<f64>() / n
}

/// Solves the normal equations of a flattened two-regressor-plus-intercept
/// problem. Columns are rescaled to unit diagonal before the condition check
/// so the guard reflects collinearity rather than units.
pub fn lr_decompose(target: &Array2<f64>, low: &Array2<f64>, high: &Array2<f64>) -> Result<LinearFit> {
    if target.dim() != low.dim() || target.dim() != high.dim() {
        return Err(Error::Shape(format!(
            "weight shapes differ: {:?}, {:?}, {:?}",
            target.dim(),
            low.dim(),
            high.dim()
        )));
    }
    if [target, low, high].iter().any(|m| m.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidData("non-finite weight".into()));
    }
    let (l, h, y): (Vec<f64>, Vec<f64>, Vec<f64>) = (
        low.iter().copied().collect(),
        high.iter().copied().collect(),
        target.iter().copied().collect(),
    );
    let cols = [&l[..], &h[..]];
    let mut gram = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    let n = y.len() as f64;
    for i in 0..2 {
        for j in 0..2 {
            gram[(i, j)] = cols[i].iter().zip(cols[j]).map(|(a, b)| a * b).sum();
        }
        gram[(i, 2)] = cols[i].iter().sum();
        gram[(2, i)] = gram[(i, 2)];
        rhs[i] = cols[i].iter().zip(&y).map(|(a, b)| a * b).sum();
    }
    gram[(2, 2)] = n;
    rhs[2] = y.iter().sum();

    let diag = Vector3::from_fn(|i, _| gram[(i, i)]);
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::SingularFit("a regressor is identically zero".into()));
    }
    let d = diag.map(|v| 1.0 / v.sqrt());
    let scaled = Matrix3::from_fn(|i, j| gram[(i, j)] * d[i] * d[j]);
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 || hi / lo > MAX_CONDITION {
        return Err(Error::SingularFit(format!(
            "normal matrix condition number {:.3e} exceeds {MAX_CONDITION:e}",
            if lo <= 0.0 { f64::INFINITY } else { hi / lo }
        )));
    }
    let z = scaled
        .cholesky()
        .ok_or_else(|| Error::SingularFit("normal matrix is not positive definite".into()))?
        .solve(&rhs.component_mul(&d));
    let beta = z.component_mul(&d);
    let mse = fit_mse(target, |i| beta[0] * l[i] + beta[1] * h[i] + beta[2]);
    Ok(LinearFit {
        beta_low: beta[0],
        beta_high: beta[1],
        intercept: beta[2],
        fit_mse: mse,
    })
}

/// Fit with the high-band regressor dropped, used when it is degenerate.
fn fit_low_only(target: &Array2<f64>, low: &Array2<f64>) -> Result<LinearFit> {
    let n = target.len() as f64;
    let mx = low.sum() / n;
    let my = target.sum() / n;
    let sxx: f64 = low.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::SingularFit("low-band weights are constant".into()));
    }
    let sxy: f64 = low.iter().zip(target).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let flat: Vec<f64> = low.iter().copied().collect();
    Ok(LinearFit {
        beta_low: beta,
        beta_high: 0.0,
        intercept,
        fit_mse: fit_mse(target, |i| beta * flat[i] + intercept),
    })
}

/// Shared, low-band and high-band head weights (`T/2 × T'/2`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTriple {
    pub shared: Array2<f64>,
    pub low: Array2<f64>,
    pub high: Array2<f64>,
}

impl WeightTriple {
    /// Extracts weights from a shared-head and a split-head model. A
    /// shared-head model in the split position contributes its one head as
    /// both bands.
    pub fn from_models(share: &SwiftModel, split: &SwiftModel) -> Result<Self> {
        let (a, b) = (&share.config, &split.config);
        for cfg in [a, b] {
            if cfg.head != HeadKind::Linear || !cfg.channel_independent {
                return Err(Error::ConfigMismatch(
                    "weight analysis needs channel-independent linear heads".into(),
                ));
            }
        }
        if (a.lookback, a.horizon) != (b.lookback, b.horizon) {
            return Err(Error::ConfigMismatch(format!(
                "lookback/horizon differ: {}/{} vs {}/{}",
                a.lookback, a.horizon, b.lookback, b.horizon
            )));
        }
        if a.head_mode != HeadMode::Share {
            return Err(Error::ConfigMismatch("first model must use a shared head".into()));
        }
        let weight = |m: &SwiftModel, i: usize| m.params.heads[i].out.weight.clone();
        let (low, high) = match b.head_mode {
            HeadMode::Split => (weight(split, 0), weight(split, 1)),
            HeadMode::Share => (weight(split, 0), weight(split, 0)),
        };
        Ok(WeightTriple {
            shared: weight(share, 0),
            low,
            high,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub sim_shared_low: f64,
    pub sim_shared_high: f64,
    pub sim_low_high: f64,
    pub fit: LinearFit,
    /// The high-band regressor was collinear with the others and dropped.
    pub high_degenerate: bool,
}

impl PairReport {
    /// `key,value` lines.
    pub fn to_csv(&self) -> String {
        let f = &self.fit;
        let rows = [
            ("sim_shared_low", self.sim_shared_low),
            ("sim_shared_high", self.sim_shared_high),
            ("sim_low_high", self.sim_low_high),
            ("beta_low", f.beta_low),
            ("beta_high", f.beta_high),
            ("intercept", f.intercept),
            ("fit_mse", f.fit_mse),
            ("high_degenerate", f64::from(u8::from(self.high_degenerate))),
        ];
        let mut out = String::from("key,value\n");
        for (k, v) in rows {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }

    pub fn equation(&self) -> String {
        let f = &self.fit;
        format!(
            "W_s = {:.4} W_l + {:.4} W_h + {:.3e}  (fit mse {:.3e})",
            f.beta_low, f.beta_high, f.intercept, f.fit_mse
        )
    }
}

/// Similarities and decomposition of the shared head onto the band heads.
pub fn analyze_weights(t: &WeightTriple) -> Result<PairReport> {
    let (fit, high_degenerate) = match lr_decompose(&t.shared, &t.low, &t.high) {
        Ok(fit) => (fit, false),
        Err(Error::SingularFit(reason)) => {
            log::warn!("high-band regressor dropped: {reason}");
            (fit_low_only(&t.shared, &t.low)?, true)
        }
        Err(e) => return Err(e),
    };
    Ok(PairReport {
        sim_shared_low: cosine_sim(&t.shared, &t.low)?,
        sim_shared_high: cosine_sim(&t.shared, &t.high)?,
        sim_low_high: cosine_sim(&t.low, &t.high)?,
        fit,
        high_degenerate,
    })
}

pub fn analyze_pair(share: &SwiftModel, split: &SwiftModel) -> Result<PairReport> {
    analyze_weights(&WeightTriple::from_models(share, split)?)
}

/// Grey level of each entry after min-max scaling to 0..=255; a constant
/// matrix maps to 128 everywhere.
pub fn heatmap_pixels(w: &Array2<f64>) -> Result<Vec<u8>> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite weight".into()));
    }
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    Ok(w.iter()
        .map(|&v| {
            if range > 0.0 {
                (255.0 * (v - min) / range).round() as u8
            } else {
                128
            }
        })
        .collect())
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Writes a binary greyscale PGM at `path` and the raw values as CSV next to
/// it (same stem, `.csv`). Returns the CSV path.
pub fn export_heatmap(w: &Array2<f64>, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    let pixels = heatmap_pixels(w)?;
    let (rows, cols) = w.dim();
    let mut img = BufWriter::new(File::create(path).map_err(io(path))?);
    write!(img, "P5\n{cols} {rows}\n255\n").map_err(io(path))?;
    img.write_all(&pixels).map_err(io(path))?;
    img.flush().map_err(io(path))?;

    let csv_path = path.with_extension("csv");
    let mut out = BufWriter::new(File::create(&csv_path).map_err(io(&csv_path))?);
    for row in w.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", cells.join(",")).map_err(io(&csv_path))?;
    }
    out.flush().map_err(io(&csv_path))?;
    Ok(csv_path)
}

/// Reads a headerless numeric CSV as written by [`export_heatmap`].
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let mut data = Vec::new();
    let mut cols = 0;
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        cols = rec.len();
        rows += 1;
        for cell in rec.iter() {
            data.push(cell.trim().parse::<f64>().map_err(|e| Error::Ingestion {
                path: path.to_path_buf(),
                reason: format!("row {rows}: {e}"),
            })?);
        }
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
