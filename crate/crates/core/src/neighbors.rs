//! Exact brute-force Euclidean neighbour queries.
//!
//! Every query ranks candidates by `(squared distance, index)`, so ties are
//! always resolved towards the lower index.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1};

use crate::error::{BopnnError, Result};

/// Points (one per row) with optional class labels in `0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Array2<f64>,
    labels: Option<Vec<usize>>,
}

impl PointSet {
    pub fn new(points: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(BopnnError::InsufficientPoints {
                needed: 1,
                available: 0,
            });
        }
        if let Some(l) = &labels {
            if l.len() != points.nrows() {
                return Err(BopnnError::DimensionMismatch {
                    expected: points.nrows(),
                    actual: l.len(),
                });
            }
        }
        let points = if points.is_standard_layout() {
            points
        } else {
            points.as_standard_layout().to_owned()
        };
        Ok(PointSet { points, labels })
    }

    pub fn labeled(points: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        Self::new(points, Some(labels))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    fn require_labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| BopnnError::DegenerateInput("point set has no labels".into()))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.dim();
        &self.points.as_slice().expect("standard layout")[i * m..(i + 1) * m]
    }

    fn check_query(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.dim() {
            return Err(BopnnError::DimensionMismatch {
                expected: self.dim(),
                actual: query.len(),
            });
        }
        Ok(())
    }

    fn distances_to(&self, query: &[f64]) -> Vec<(f64, usize)> {
        (0..self.len())
            .map(|i| (squared_distance(self.row(i), query), i))
            .collect()
    }
}

/// Class-probability vector of length `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub probs: Vec<f64>,
}

impl ClassDistribution {
    pub fn indicator(n_classes: usize, class: usize) -> Self {
        let mut probs = vec![0.0; n_classes];
        probs[class] = 1.0;
        ClassDistribution { probs }
    }

    pub fn n_classes(&self) -> usize {
        self.probs.len()
    }

    /// Index of the largest probability; ties go to the smallest class index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` smallest candidates, sorted. `cands.len() >= k` is required.
fn smallest_k(mut cands: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    if k < cands.len() {
        cands.select_nth_unstable_by(k - 1, by_distance_then_index);
        cands.truncate(k);
    }
    cands.sort_unstable_by(by_distance_then_index);
    cands.into_iter().map(|(_, i)| i).collect()
}

/// The `k`-th (1-based) smallest candidate.
fn kth_smallest(mut cands: Vec<(f64, usize)>, k: usize) -> Result<usize> {
    if k == 0 || k > cands.len() {
        return Err(BopnnError::InsufficientPoints {
            needed: k,
            available: cands.len(),
        });
    }
    let (_, &mut (_, idx), _) = cands.select_nth_unstable_by(k - 1, by_distance_then_index);
    Ok(idx)
}

/// Indices of the `k` nearest points to `query`, optionally excluding one index.
pub fn knn_indices(
    ps: &PointSet,
    query: ArrayView1<'_, f64>,
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<usize>> {
    let query = query.to_vec();
    knn_indices_slice(ps, &query, k, exclude)
}

pub(crate) fn knn_indices_slice(
    ps: &PointSet,
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<usize>> {
    ps.check_query(query)?;
    let mut cands = ps.distances_to(query);
    if let Some(ex) = exclude {
        cands.retain(|&(_, i)| i != ex);
    }
    if k > cands.len() {
        return Err(BopnnError::InsufficientPoints {
            needed: k,
            available: cands.len(),
        });
    }
    Ok(smallest_k(cands, k))
}

/// Index of the `k`-th nearest point sharing the label of point `i` (excluding `i`).
pub fn kth_same_class(ps: &PointSet, i: usize, k: usize) -> Result<usize> {
    let labels = ps.require_labels()?;
    let cls = labels[i];
    let cands: Vec<(f64, usize)> = (0..ps.len())
        .filter(|&j| j != i && labels[j] == cls)
        .map(|j| (squared_distance(ps.row(i), ps.row(j)), j))
        .collect();
    kth_smallest(cands, k)
}

/// Index of the `k`-th nearest point whose label differs from that of point `i`.
pub fn kth_other_class(ps: &PointSet, i: usize, k: usize) -> Result<usize> {
    let labels = ps.require_labels()?;
    let cls = labels[i];
    let cands: Vec<(f64, usize)> = (0..ps.len())
        .filter(|&j| labels[j] != cls)
        .map(|j| (squared_distance(ps.row(i), ps.row(j)), j))
        .collect();
    kth_smallest(cands, k)
}

/// Both neighbours of point `i` from one distance pass: the `k_same`-th
/// same-class neighbour (`None` when `k_same == 0`) and the `k_other`-th
/// other-class neighbour.
pub(crate) fn kth_same_and_other(
    ps: &PointSet,
    i: usize,
    k_same: usize,
    k_other: usize,
    scratch_same: &mut Vec<(f64, usize)>,
    scratch_other: &mut Vec<(f64, usize)>,
) -> Result<(Option<usize>, usize)> {
    let labels = ps.require_labels()?;
    let cls = labels[i];
    let xi = ps.row(i);
    scratch_same.clear();
    scratch_other.clear();
    for (j, &lj) in labels.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = squared_distance(xi, ps.row(j));
        if lj == cls {
            scratch_same.push((d, j));
        } else {
            scratch_other.push((d, j));
        }
    }
    let same = if k_same == 0 {
        None
    } else {
        Some(kth_in_place(scratch_same, k_same)?)
    };
    let other = kth_in_place(scratch_other, k_other)?;
    Ok((same, other))
}

fn kth_in_place(cands: &mut [(f64, usize)], k: usize) -> Result<usize> {
    if k == 0 || k > cands.len() {
        return Err(BopnnError::InsufficientPoints {
            needed: k,
            available: cands.len(),
        });
    }
    let (_, &mut (_, idx), _) = cands.select_nth_unstable_by(k - 1, by_distance_then_index);
    Ok(idx)
}

/// Class proportions among the `k` nearest labelled points.
pub fn vote_distribution(
    ps: &PointSet,
    query: ArrayView1<'_, f64>,
    k: usize,
    n_classes: usize,
) -> Result<ClassDistribution> {
    let query = query.to_vec();
    vote_distribution_slice(ps, &query, k, n_classes)
}

pub(crate) fn vote_distribution_slice(
    ps: &PointSet,
    query: &[f64],
    k: usize,
    n_classes: usize,
) -> Result<ClassDistribution> {
    let labels = ps.require_labels()?;
    if k == 0 {
        return Err(BopnnError::InsufficientPoints {
            needed: 1,
            available: ps.len(),
        });
    }
    let idx = knn_indices_slice(ps, query, k, None)?;
    let mut counts = vec![0usize; n_classes];
    for i in idx {
        let c = labels[i];
        if c >= n_classes {
            return Err(BopnnError::IndexOutOfRange {
                index: c,
                dim: n_classes,
            });
        }
        counts[c] += 1;
    }
    Ok(ClassDistribution {
        probs: counts.iter().map(|&c| c as f64 / k as f64).collect(),
    })
}
