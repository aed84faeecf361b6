use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use super::RawSeries;
use crate::error::{Error, Result};

/// Standard deviations below this are treated as a constant channel.
const MIN_STD: f64 = 1e-8;

/// Per-channel z-score statistics fitted on the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub channel_names: Vec<String>,
    pub mean: Array1<f64>,
    /// Guarded population standard deviation (1 for constant channels).
    pub std: Array1<f64>,
}

impl Scaler {
    /// Fits on columns `rows` of a channel-major matrix.
    pub fn fit(values: &Array2<f64>, rows: Range<usize>, channel_names: &[String]) -> Result<Self> {
        if rows.is_empty() || rows.end > values.ncols() {
            return Err(Error::EmptySplit("train"));
        }
        let train = values.slice(ndarray::s![.., rows]);
        let n = train.ncols() as f64;
        let mean = train.sum_axis(Axis(1)) / n;
        let mut std = Array1::zeros(values.nrows());
        for (c, row) in train.axis_iter(Axis(0)).enumerate() {
            let var = row.iter().map(|v| (v - mean[c]) * (v - mean[c])).sum::<f64>() / n;
            let s = var.sqrt();
            std[c] = if s < MIN_STD {
                log::warn!(
                    "channel `{}` is constant over the training range; using unit scale",
                    channel_names.get(c).map(String::as_str).unwrap_or("?")
                );
                1.0
            } else {
                s
            };
        }
        Ok(Scaler {
            channel_names: channel_names.to_vec(),
            mean,
            std,
        })
    }

    pub fn transform(&self, values: &Array2<f64>) -> Array2<f64> {
        let mut out = values.clone();
        for (c, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let (m, s) = (self.mean[c], self.std[c]);
            row.mapv_inplace(|v| (v - m) / s);
        }
        out
    }

    pub fn inverse(&self, values: &Array2<f64>) -> Array2<f64> {
        let mut out = values.clone();
        for (c, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let (m, s) = (self.mean[c], self.std[c]);
            row.mapv_inplace(|v| v * s + m);
        }
        out
    }

    /// `channel,mean,std` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(w, "channel,mean,std").map_err(io)?;
        for (c, name) in self.channel_names.iter().enumerate() {
            writeln!(w, "{name},{},{}", self.mean[c], self.std[c]).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let (mut names, mut mean, mut std) = (Vec::new(), Vec::new(), Vec::new());
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Ingestion {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Ingestion {
                    path: path.to_path_buf(),
                    reason: format!("bad stats row {rec:?}"),
                })
            };
            names.push(rec.get(0).unwrap_or_default().to_string());
            mean.push(num(1)?);
            std.push(num(2)?);
        }
        Ok(Scaler {
            channel_names: names,
            mean: Array1::from(mean),
            std: Array1::from(std),
        })
    }
}

/// Z-scores every row of `raw` with statistics from `train_range` only.
pub fn standardize(raw: &RawSeries, train_range: Range<usize>) -> Result<(RawSeries, Scaler)> {
    let scaler = Scaler::fit(&raw.values, train_range, &raw.channel_names)?;
    let scaled = RawSeries {
        values: scaler.transform(&raw.values),
        channel_names: raw.channel_names.clone(),
        timestamps: raw.timestamps.clone(),
    };
    Ok((scaled, scaler))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series(rng: &mut ChaCha8Rng) -> RawSeries {
        RawSeries {
            values: Array2::from_shape_fn((3, 200), |(c, _)| rng.random_range(-1.0..1.0) * (c + 1) as f64 * 4.0 + 10.0),
            channel_names: vec!["a".into(), "b".into(), "c".into()],
            timestamps: None,
        }
    }

    #[test]
    fn train_statistics_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = series(&mut rng);
        let (scaled, _) = standardize(&raw, 0..140).unwrap();
        for row in scaled.values.slice(ndarray::s![.., 0..140]).rows() {
            let m = row.mean().unwrap();
            let sd = (row.mapv(|v| (v - m) * (v - m)).sum() / 140.0).sqrt();
            assert!(m.abs() < 1e-10);
            assert!((sd - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn stats_ignore_held_out_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw = series(&mut rng);
        let (_, a) = standardize(&raw, 0..140).unwrap();
        let mut perturbed = raw.clone();
        perturbed.values.slice_mut(ndarray::s![.., 140..]).mapv_inplace(|v| v * 3.0 - 50.0);
        let (_, b) = standardize(&perturbed, 0..140).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_channel_is_guarded() {
        let raw = RawSeries {
            values: Array2::from_elem((1, 20), 5.0),
            channel_names: vec!["flat".into()],
            timestamps: None,
        };
        let (scaled, s) = standardize(&raw, 0..14).unwrap();
        assert_eq!(s.std[0], 1.0);
        assert!(scaled.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inverse_and_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = series(&mut rng);
        let (scaled, s) = standardize(&raw, 0..140).unwrap();
        let back = s.inverse(&scaled.values);
        assert!((&back - &raw.values).iter().all(|d| d.abs() < 1e-10));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stats.csv");
        s.write_csv(&p).unwrap();
        assert_eq!(Scaler::read_csv(&p).unwrap(), s);
    }
}
