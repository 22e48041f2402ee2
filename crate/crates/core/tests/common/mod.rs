#![allow(dead_code)]

use bopnn::dataio::LabeledDataset;
use bopnn::rng::SplitMix64;
use ndarray::Array2;

pub fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| 2.0 * rng.next_f64() - 1.0)
}

/// `M Mᵀ / dim + shift I`.
pub fn random_pd(rng: &mut SplitMix64, dim: usize, shift: f64) -> Array2<f64> {
    let m = random_matrix(rng, dim, dim);
    let mut s = m.dot(&m.t()) / dim as f64;
    for i in 0..dim {
        s[[i, i]] += shift;
    }
    s
}

/// Random labelled dataset with every class present.
pub fn random_dataset(rng: &mut SplitMix64, n: usize, d: usize, k: usize) -> LabeledDataset {
    let x = random_matrix(rng, n, d);
    let y = (0..n)
        .map(|i| {
            if i < k {
                i
            } else {
                rng.below(k as u64) as usize
            }
        })
        .collect();
    LabeledDataset::from_arrays(x, y).unwrap()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Textbook k-NN: full sort by (distance, index), majority vote, ties to the
/// smallest label.
pub fn brute_knn_classify(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    q: &[f64],
    k: usize,
) -> usize {
    let mut order: Vec<(f64, usize)> = (0..x.nrows())
        .map(|i| (sq_dist(x.row(i).as_slice().unwrap(), q), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut votes = vec![0usize; n_classes];
    for &(_, i) in order.iter().take(k) {
        votes[y[i]] += 1;
    }
    let mut best = 0;
    for c in 1..n_classes {
        if votes[c] > votes[best] {
            best = c;
        }
    }
    best
}

/// Index of the k-th nearest point among `candidates` to point `i`, by full sort.
fn kth_by_sort(x: &Array2<f64>, i: usize, candidates: &[usize], k: usize) -> usize {
    let xi = x.row(i).to_vec();
    let mut c: Vec<(f64, usize)> = candidates
        .iter()
        .map(|&j| (sq_dist(&xi, x.row(j).as_slice().unwrap()), j))
        .collect();
    c.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    c[k - 1].1
}

/// Neighbour scatter matrices by explicit double loops.
pub fn scatter_oracle(
    x: &Array2<f64>,
    y: &[usize],
    k: usize,
    balanced: bool,
) -> (Array2<f64>, Array2<f64>) {
    let n = x.nrows();
    let m = x.ncols();
    let n_classes = y.iter().max().unwrap() + 1;
    let mut sum_in = vec![Array2::<f64>::zeros((m, m)); n_classes];
    let mut sum_out = vec![Array2::<f64>::zeros((m, m)); n_classes];
    let mut cnt_in = vec![0usize; n_classes];
    let mut cnt_out = vec![0usize; n_classes];
    for i in 0..n {
        let same: Vec<usize> = (0..n).filter(|&j| j != i && y[j] == y[i]).collect();
        let other: Vec<usize> = (0..n).filter(|&j| y[j] != y[i]).collect();
        let k_in = k.min(same.len());
        let k_out = k.min(other.len());
        if k_in > 0 {
            let j = kth_by_sort(x, i, &same, k_in);
            for a in 0..m {
                for b in 0..m {
                    sum_in[y[i]][[a, b]] += (x[[i, a]] - x[[j, a]]) * (x[[i, b]] - x[[j, b]]);
                }
            }
            cnt_in[y[i]] += 1;
        }
        let j = kth_by_sort(x, i, &other, k_out);
        for a in 0..m {
            for b in 0..m {
                sum_out[y[i]][[a, b]] += (x[[i, a]] - x[[j, a]]) * (x[[i, b]] - x[[j, b]]);
            }
        }
        cnt_out[y[i]] += 1;
    }
    let finish = |sums: Vec<Array2<f64>>, cnt: Vec<usize>| {
        if balanced {
            let used = cnt.iter().filter(|&&c| c > 0).count() as f64;
            let mut out = Array2::<f64>::zeros((m, m));
            for (s, c) in sums.iter().zip(&cnt) {
                if *c > 0 {
                    out = out + s / (*c as f64 * used);
                }
            }
            out
        } else {
            let total: usize = cnt.iter().sum();
            let mut out = Array2::<f64>::zeros((m, m));
            for s in &sums {
                out += s;
            }
            if total > 0 {
                out / total as f64
            } else {
                out
            }
        }
    };
    (finish(sum_in, cnt_in), finish(sum_out, cnt_out))
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
