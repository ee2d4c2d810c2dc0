use std::ops::Range;

use super::SpatioTemporalDataset;
use crate::error::{Result, StemoError};
use crate::predictor::Scaler;

/// One episode's worth of frames; the last frame is the forecast target.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Index of the first frame in the full timeline.
    pub start: usize,
    /// `T×n`, normalized with the training-split scaler.
    pub inputs: Vec<Vec<f64>>,
    /// `T×n`, raw units.
    pub raw: Vec<Vec<f64>>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn end(&self) -> usize {
        self.start + self.raw.len()
    }
}

/// Chronological train/validation/test row ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl Splits {
    /// 70/10/20 of `len` rows, with boundaries rounded to multiples of `align`.
    pub fn chronological(len: usize, align: usize) -> Result<Self> {
        Self::with_fractions(len, 0.7, 0.1, align)
    }

    pub fn with_fractions(len: usize, train: f64, val: f64, align: usize) -> Result<Self> {
        if !(train > 0.0 && val >= 0.0 && train + val < 1.0) {
            return Err(StemoError::Config(format!("bad split fractions {train}/{val}")));
        }
        let align = align.max(1);
        let cut = |f: f64| ((f * len as f64 / align as f64).round() as usize * align).min(len);
        let a = cut(train);
        let b = cut(train + val).max(a);
        Ok(Self {
            train: 0..a,
            val: a..b,
            test: b..len,
        })
    }
}

/// Windows of length `horizon` inside `range`, every `stride` rows.
pub fn windows_in(
    rows: &[Vec<f64>],
    scaler: &Scaler,
    range: Range<usize>,
    horizon: usize,
    stride: usize,
) -> Result<Vec<Window>> {
    if horizon < 2 {
        return Err(StemoError::Config(format!("T must be at least 2, got {horizon}")));
    }
    if stride == 0 {
        return Err(StemoError::Config("window stride must be positive".into()));
    }
    if range.end > rows.len() {
        return Err(StemoError::Data(format!("range {range:?} beyond {} rows", rows.len())));
    }
    let mut out = Vec::new();
    let mut start = range.start;
    while start + horizon <= range.end {
        let raw: Vec<Vec<f64>> = rows[start..start + horizon].to_vec();
        let inputs = raw.iter().map(|r| scaler.transform(r)).collect();
        out.push(Window { start, inputs, raw });
        start += stride;
    }
    Ok(out)
}

/// Sliding windows of length `horizon`, stride 1, over the whole dataset.
pub fn make_windows(ds: &SpatioTemporalDataset, scaler: &Scaler, horizon: usize) -> Result<Vec<Window>> {
    windows_in(&ds.values, scaler, 0..ds.len(), horizon, 1)
}

/// Windows per split; none straddles a boundary and the scaler is fitted
/// on training rows only.
#[derive(Debug, Clone)]
pub struct SplitWindows {
    pub splits: Splits,
    pub scaler: Scaler,
    pub train: Vec<Window>,
    pub val: Vec<Window>,
    pub test: Vec<Window>,
}

pub fn split_windows(ds: &SpatioTemporalDataset, horizon: usize, stride: usize) -> Result<SplitWindows> {
    split_windows_with(ds, horizon, stride, 0.7, 0.1)
}

/// As [`split_windows`] with explicit train and validation fractions.
pub fn split_windows_with(
    ds: &SpatioTemporalDataset,
    horizon: usize,
    stride: usize,
    train_frac: f64,
    val_frac: f64,
) -> Result<SplitWindows> {
    let splits = Splits::with_fractions(ds.len(), train_frac, val_frac, stride)?;
    if splits.train.len() < horizon {
        return Err(StemoError::Data(format!(
            "training split has {} rows, fewer than T={horizon}",
            splits.train.len()
        )));
    }
    let scaler = Scaler::fit(&ds.values[splits.train.clone()])?;
    let train = windows_in(&ds.values, &scaler, splits.train.clone(), horizon, stride)?;
    let val = windows_in(&ds.values, &scaler, splits.val.clone(), horizon, stride)?;
    let test = windows_in(&ds.values, &scaler, splits.test.clone(), horizon, stride)?;
    if test.is_empty() {
        return Err(StemoError::Data(format!(
            "test split ({} rows) holds no window of length {horizon}",
            splits.test.len()
        )));
    }
    Ok(SplitWindows {
        splits,
        scaler,
        train,
        val,
        test,
    })
}
