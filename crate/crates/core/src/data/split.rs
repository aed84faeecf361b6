use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Row counts of the ETT hourly benchmark splits (12 / 4 / 4 months of hours).
const ETT_HOURLY: [usize; 3] = [12 * 30 * 24, 4 * 30 * 24, 4 * 30 * 24];
/// The 15-minute ETT variants use four times as many rows.
const ETT_MINUTE: [usize; 3] = [12 * 30 * 24 * 4, 4 * 30 * 24 * 4, 4 * 30 * 24 * 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitScheme {
    EttHourly,
    EttMinute,
    /// 70 / 10 / 20 percent by row count.
    Ratio,
}

impl SplitScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitScheme::EttHourly => "ett_hourly",
            SplitScheme::EttMinute => "ett_minute",
            SplitScheme::Ratio => "ratio",
        }
    }
}

impl fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ett_hourly" => Ok(SplitScheme::EttHourly),
            "ett_minute" => Ok(SplitScheme::EttMinute),
            "ratio" => Ok(SplitScheme::Ratio),
            other => Err(Error::Config(format!("unknown split scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Contiguous, ordered, non-overlapping train / val / test row ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub scheme: SplitScheme,
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitSpec {
    pub fn range(&self, which: Split) -> Range<usize> {
        match which {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
        }
    }

    /// Rows a split's windows may read. Validation and test ranges reach back
    /// `lookback` rows (clamped at zero) so the first window's target starts
    /// on the first row of the split; targets never leave the split.
    pub fn window_range(&self, which: Split, lookback: usize) -> Range<usize> {
        let r = self.range(which);
        match which {
            Split::Train => r,
            Split::Val | Split::Test => r.start.saturating_sub(lookback)..r.end,
        }
    }
}

/// Partitions a series of `len` rows according to `scheme`.
pub fn split(len: usize, scheme: SplitScheme) -> Result<SplitSpec> {
    let sizes = match scheme {
        SplitScheme::EttHourly => ETT_HOURLY,
        SplitScheme::EttMinute => ETT_MINUTE,
        SplitScheme::Ratio => {
            let train = len * 7 / 10;
            let test = len * 2 / 10;
            [train, len - train - test, test]
        }
    };
    let needed: usize = sizes.iter().sum();
    if len < needed || sizes.contains(&0) {
        return Err(Error::InsufficientLength {
            scheme: scheme.to_string(),
            len,
            needed: needed.max(3),
        });
    }
    let train_end = sizes[0];
    let val_end = train_end + sizes[1];
    Ok(SplitSpec {
        scheme,
        train: 0..train_end,
        val: train_end..val_end,
        test: val_end..val_end + sizes[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ett_hourly_boundaries() {
        let s = split(14400, SplitScheme::EttHourly).unwrap();
        assert_eq!(s.train, 0..8640);
        assert_eq!(s.val, 8640..11520);
        assert_eq!(s.test, 11520..14400);
        // extra rows beyond the benchmark span are ignored
        assert_eq!(split(17420, SplitScheme::EttHourly).unwrap(), s);
        assert_eq!(s.window_range(Split::Val, 720), 7920..11520);
    }

    #[test]
    fn ett_minute_boundaries() {
        let s = split(69680, SplitScheme::EttMinute).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (34560, 11520, 11520));
    }

    #[test]
    fn ratio() {
        let s = split(100, SplitScheme::Ratio).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 10, 20));
        let s = split(1001, SplitScheme::Ratio).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (700, 101, 200));
        assert_eq!(s.test.end, 1001);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            split(10, SplitScheme::EttHourly),
            Err(Error::InsufficientLength { .. })
        ));
        assert!(split(4, SplitScheme::Ratio).is_err());
    }
}
