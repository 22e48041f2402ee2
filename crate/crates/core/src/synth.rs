//! Synthetic labelled datasets for tests, examples and benchmarks.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use crate::dataio::LabeledDataset;
use crate::rng::SplitMix64;

/// Two spherical unit-variance Gaussian classes in `d` dimensions whose means
/// differ by `separation` in every coordinate. Labels alternate 0, 1, 0, ...
pub fn gaussian_blobs(n: usize, d: usize, separation: f64, seed: u64) -> LabeledDataset {
    let mut rng = SplitMix64::new(seed);
    let mut x = Array2::zeros((n, d));
    let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
    for i in 0..n {
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[[i, j]] = z + separation * y[i] as f64;
        }
    }
    LabeledDataset::from_arrays(x, y).expect("consistent shapes")
}

/// Two classes that differ only in the first `informative` coordinates
/// (means `-shift/2` and `+shift/2`, unit variance), followed by `noise`
/// standard-normal coordinates. Labels alternate 0, 1, 0, ...
pub fn informative_plus_noise(
    n: usize,
    informative: usize,
    noise: usize,
    shift: f64,
    seed: u64,
) -> LabeledDataset {
    let mut rng = SplitMix64::new(seed);
    let d = informative + noise;
    let mut x = Array2::zeros((n, d));
    let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
    for i in 0..n {
        let sign = if y[i] == 0 { -0.5 } else { 0.5 };
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[[i, j]] = if j < informative { z + sign * shift } else { z };
        }
    }
    LabeledDataset::from_arrays(x, y).expect("consistent shapes")
}

/// `n` points with `k` classes drawn uniformly and coordinates uniform on
/// `[-1, 1)`; every class is guaranteed at least one point when `n >= k`.
pub fn uniform_classes(n: usize, d: usize, k: usize, seed: u64) -> LabeledDataset {
    let mut rng = SplitMix64::new(seed);
    let x = Array2::from_shape_fn((n, d), |_| 2.0 * rng.next_f64() - 1.0);
    let y: Vec<usize> = (0..n)
        .map(|i| {
            if i < k {
                i
            } else {
                rng.below(k as u64) as usize
            }
        })
        .collect();
    LabeledDataset::from_arrays(x, y).expect("consistent shapes")
}

/// Two classes laid out as an exclusive-or of Gaussian clusters in the first
/// two coordinates: each class is an equal mixture of two unit-variance
/// Gaussians centred at `(±spread, ±spread)` with opposite corners sharing a
/// class. The remaining `noise` coordinates are standard normal. Labels
/// alternate 0, 1, 0, ...
pub fn xor_plus_noise(n: usize, noise: usize, spread: f64, seed: u64) -> LabeledDataset {
    let mut rng = SplitMix64::new(seed);
    let d = 2 + noise;
    let mut x = Array2::zeros((n, d));
    let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
    for i in 0..n {
        let s1 = if rng.below(2) == 0 { -1.0 } else { 1.0 };
        let s2 = if y[i] == 0 { s1 } else { -s1 };
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[[i, j]] = match j {
                0 => z + s1 * spread,
                1 => z + s2 * spread,
                _ => z,
            };
        }
    }
    LabeledDataset::from_arrays(x, y).expect("consistent shapes")
}
