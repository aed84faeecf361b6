use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::RawSeries;
use crate::error::{Error, Result};

fn ingest_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Ingestion {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads a comma-separated file with a header row. A first column named
/// `date` (any case) is kept as timestamps; every other column must be
/// numeric and finite.
pub fn load_csv(path: impl AsRef<Path>) -> Result<RawSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| ingest_err(path, format!("malformed header: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(ingest_err(path, "empty header"));
    }
    let has_date = headers
        .get(0)
        .is_some_and(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case("date"));
    let first_value = usize::from(has_date);
    let channel_names: Vec<String> = headers.iter().skip(first_value).map(str::to_string).collect();
    if channel_names.is_empty() {
        return Err(ingest_err(path, "no numeric columns"));
    }

    let width = channel_names.len();
    let mut rows: Vec<f64> = Vec::new();
    let mut stamps = Vec::new();
    let mut bad_rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // 1-based data row numbers; the header is line 1 of the file.
        let row_no = i + 1;
        let record = record.map_err(|e| ingest_err(path, format!("malformed row {row_no}: {e}")))?;
        if record.len() != width + first_value {
            return Err(ingest_err(
                path,
                format!("row {row_no} has {} fields, expected {}", record.len(), width + first_value),
            ));
        }
        if has_date {
            stamps.push(record[0].to_string());
        }
        let mut ok = true;
        for cell in record.iter().skip(first_value) {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => rows.push(v),
                _ => {
                    ok = false;
                    rows.push(0.0);
                }
            }
        }
        if !ok {
            bad_rows.push(row_no);
        }
    }
    if !bad_rows.is_empty() {
        let shown: Vec<String> = bad_rows.iter().take(20).map(usize::to_string).collect();
        let more = if bad_rows.len() > 20 {
            format!(" (+{} more)", bad_rows.len() - 20)
        } else {
            String::new()
        };
        return Err(ingest_err(
            path,
            format!("missing or non-numeric values in rows {}{more}", shown.join(", ")),
        ));
    }
    let len = rows.len() / width;
    if len == 0 {
        return Err(ingest_err(path, "no data rows"));
    }
    let time_major = Array2::from_shape_vec((len, width), rows).expect("rows have uniform width");
    Ok(RawSeries {
        values: time_major.t().as_standard_layout().into_owned(),
        channel_names,
        timestamps: has_date.then_some(stamps),
    })
}

/// Writes `series` in the layout [`load_csv`] reads. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv(series: &RawSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = Vec::new();
    if series.timestamps.is_some() {
        header.push("date".to_string());
    }
    header.extend(series.channel_names.iter().cloned());
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for t in 0..series.len() {
        let mut line = String::new();
        if let Some(ts) = &series.timestamps {
            line.push_str(&ts[t]);
            line.push(',');
        }
        let cells: Vec<String> = series.values.column(t).iter().map(|v| format!("{v}")).collect();
        line.push_str(&cells.join(","));
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}
