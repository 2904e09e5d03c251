//! Freedman–Diaconis document-length bins.

use crate::error::{EvalError, Result};

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-width bins anchored at zero. Bin `k` is labelled `[k·w, (k+1)·w]`
/// and holds lengths in `(k·w, (k+1)·w]`, with 0 going to the first bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthBins {
    pub width: usize,
}

impl LengthBins {
    pub fn bin_of(&self, len: usize) -> usize {
        len.saturating_sub(1) / self.width
    }

    pub fn range(&self, bin: usize) -> (usize, usize) {
        (bin * self.width, (bin + 1) * self.width)
    }
}

/// `round(2·IQR·N^(−1/3))`. A zero width falls back to one bin covering
/// every length.
pub fn fd_length_bins(lengths: &[usize]) -> Result<LengthBins> {
    if lengths.len() < 2 {
        return Err(EvalError::TooFewDocuments(lengths.len()));
    }
    let mut x: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    x.sort_by(f64::total_cmp);
    let iqr = quantile(&x, 0.75) - quantile(&x, 0.25);
    let width = (2.0 * iqr * (x.len() as f64).powf(-1.0 / 3.0)).round() as usize;
    if width == 0 {
        let max = lengths.iter().copied().max().unwrap_or(0);
        return Ok(LengthBins { width: max.max(1) });
    }
    Ok(LengthBins { width })
}
