//! Accuracy, per-split standardisation across methods and the paired
//! Wilcoxon signed-rank test.

use ndarray::Array2;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{BopnnError, Result};

/// Largest number of non-zero differences handled by the exact null distribution.
pub const EXACT_MAX_N: usize = 20;

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(BopnnError::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(BopnnError::DegenerateInput("no predictions".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

fn check_tensor(a: &Array2<f64>) -> Result<()> {
    if a.nrows() < 2 {
        return Err(BopnnError::DegenerateInput(
            "standardisation needs at least two methods".into(),
        ));
    }
    Ok(())
}

/// Rows are methods, columns splits. Each column is mapped to `[0, 1]` by its
/// min and max; a column where every method ties becomes 0.5.
pub fn standardize_minmax(a: &Array2<f64>) -> Result<Array2<f64>> {
    check_tensor(a)?;
    let mut out = a.clone();
    for mut col in out.columns_mut() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            col.mapv_inplace(|v| (v - lo) / (hi - lo));
        } else {
            col.fill(0.5);
        }
    }
    Ok(out)
}

/// Rows are methods, columns splits. Each column is studentised with its
/// mean and sample standard deviation (divisor M - 1); a column with zero
/// spread becomes 0.
pub fn standardize_student(a: &Array2<f64>) -> Result<Array2<f64>> {
    check_tensor(a)?;
    let m = a.nrows() as f64;
    let mut out = a.clone();
    for mut col in out.columns_mut() {
        if col.iter().all(|&v| v == col[0]) {
            col.fill(0.0);
            continue;
        }
        let mean = col.sum() / m;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
        let sd = var.sqrt();
        if sd > 0.0 {
            col.mapv_inplace(|v| (v - mean) / sd);
        } else {
            col.fill(0.0);
        }
    }
    Ok(out)
}

/// Mean over splits of method `m`'s standardised accuracies.
pub fn dataset_score(standardized: &Array2<f64>, m: usize) -> Result<f64> {
    if m >= standardized.nrows() {
        return Err(BopnnError::IndexOutOfRange {
            index: m,
            dim: standardized.nrows(),
        });
    }
    let row = standardized.row(m);
    if row.is_empty() {
        return Err(BopnnError::DegenerateInput("no splits".into()));
    }
    Ok(row.sum() / row.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences.
    pub w_plus: f64,
    pub p_two_sided: f64,
    /// Number of non-zero differences.
    pub n: usize,
    pub exact: bool,
}

/// Mid-ranks (1-based) of `values`.
fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Paired two-sided Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped and tied magnitudes get mid-ranks. With at
/// most [`EXACT_MAX_N`] non-zero differences the p-value comes from the exact
/// null distribution of W+ over all sign patterns; otherwise from the normal
/// approximation with tie-corrected variance and a 0.5 continuity correction.
/// All-zero differences give `W+ = 0`, `p = 1`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(BopnnError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(BopnnError::DegenerateInput("no paired observations".into()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|&d| d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            w_plus: 0.0,
            p_two_sided: 1.0,
            n: 0,
            exact: true,
        });
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = mid_ranks(&mags);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    let (p, exact) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, w_plus), true)
    } else {
        (normal_p(&mags, &ranks, w_plus), false)
    };
    Ok(WilcoxonResult {
        w_plus,
        p_two_sided: p.min(1.0),
        n,
        exact,
    })
}

/// Exact two-sided p: counts sign patterns by W+ with a subset-sum table over
/// doubled (integer) ranks.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut ways = vec![0f64; total + 1];
    ways[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            ways[s] += ways[s - r];
        }
    }
    let patterns = 2f64.powi(ranks.len() as i32);
    let w = (2.0 * w_plus).round() as usize;
    let lower: f64 = ways[..=w].iter().sum::<f64>() / patterns;
    let upper: f64 = ways[w..].iter().sum::<f64>() / patterns;
    2.0 * lower.min(upper)
}

fn normal_p(mags: &[f64], ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = mags.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::standard();
    2.0 * (1.0 - std.cdf(z))
}
