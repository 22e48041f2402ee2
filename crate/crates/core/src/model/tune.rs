//! Out-of-bag model selection and the bagged k-NN baseline variants.

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use super::{fit_ensemble, Ensemble, HyperParams, DEFAULT_SEED};
use crate::dataio::LabeledDataset;
use crate::error::{BopnnError, Result};
use crate::neighbors::{argmax, knn_indices_slice, PointSet};
use crate::rng::SplitMix64;

/// Bag fractions tried when tuning the bagged 1-NN baseline.
pub const DEFAULT_PI_B_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

const TUNE_STREAM: u64 = 0x5455_4E45_0000_0000;

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub hp: HyperParams,
    /// OOB accuracy, or -1 when the fit failed or had no OOB points.
    pub oob_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub trials: Vec<Trial>,
    /// Best trial; ties go to the earliest.
    pub chosen: usize,
}

impl TuneResult {
    pub fn best(&self) -> &Trial {
        &self.trials[self.chosen]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOptions {
    pub n_draws: usize,
    pub n_models: usize,
    pub seed: u64,
    /// `false` tunes the unprojected variant: q is pinned to q0.
    pub projection_enabled: bool,
    pub balanced: bool,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            n_draws: 30,
            n_models: 100,
            seed: DEFAULT_SEED,
            projection_enabled: true,
            balanced: false,
        }
    }
}

fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// `floor(sqrt d) ..= min(floor(10 sqrt d), d)`, lower end at least 1.
pub fn q0_range(d: usize) -> (usize, usize) {
    let lo = isqrt(d).max(1);
    let hi = isqrt(100 * d).min(d).max(lo);
    (lo, hi)
}

/// `ceil(q0 / 2) ..= q0`.
pub fn q_range(q0: usize) -> (usize, usize) {
    (q0.div_ceil(2), q0)
}

/// Fits every candidate, scoring failures as -1, and keeps the best ensemble.
fn run_trials(hps: Vec<HyperParams>, ds: &LabeledDataset) -> Result<(TuneResult, Ensemble)> {
    let mut trials = Vec::with_capacity(hps.len());
    let mut best: Option<(usize, f64, Ensemble)> = None;
    let mut first_err = None;
    for hp in hps {
        let score = match fit_ensemble(ds, &hp) {
            Ok(e) => match e.oob_accuracy {
                Some(acc) => {
                    if best.as_ref().is_none_or(|(_, top, _)| acc > *top) {
                        best = Some((trials.len(), acc, e));
                    }
                    acc
                }
                None => -1.0,
            },
            Err(err) => {
                first_err.get_or_insert(err);
                -1.0
            }
        };
        trials.push(Trial {
            hp,
            oob_accuracy: score,
        });
    }
    match best {
        Some((chosen, _, e)) => Ok((TuneResult { trials, chosen }, e)),
        None => Err(first_err.unwrap_or(BopnnError::NoOOBPoints)),
    }
}

/// Random search: `k ~ U{1..5}`, `q0 ~ U(q0_range(d))`, `q | q0 ~ U(q_range(q0))`
/// with `pi_b = 0.63`; picks the trial with the highest OOB accuracy.
pub fn tune(ds: &LabeledDataset, opts: &TuneOptions) -> Result<TuneResult> {
    tune_and_fit(ds, opts).map(|(r, _)| r)
}

/// As [`tune`], also returning the winning ensemble.
pub fn tune_and_fit(ds: &LabeledDataset, opts: &TuneOptions) -> Result<(TuneResult, Ensemble)> {
    let d = ds.d();
    if d == 0 {
        return Err(BopnnError::DegenerateInput(
            "dataset has no features".into(),
        ));
    }
    let mut rng = SplitMix64::stream(opts.seed, TUNE_STREAM);
    let (q0_lo, q0_hi) = q0_range(d);
    let hps = (0..opts.n_draws)
        .map(|_| {
            let k = rng.range_inclusive(1, 5);
            let q0 = rng.range_inclusive(q0_lo, q0_hi);
            let q = if opts.projection_enabled {
                let (lo, hi) = q_range(q0);
                rng.range_inclusive(lo, hi)
            } else {
                q0
            };
            HyperParams {
                k,
                q0,
                q,
                n_models: opts.n_models,
                pi_b: 0.63,
                projection_enabled: opts.projection_enabled,
                balanced: opts.balanced,
                seed: rng.next_u64(),
            }
        })
        .collect();
    run_trials(hps, ds)
}

/// Grid search over the bag fraction with everything else fixed.
pub fn tune_pi_b(
    ds: &LabeledDataset,
    base: &HyperParams,
    grid: &[f64],
) -> Result<(TuneResult, Ensemble)> {
    let hps = grid
        .iter()
        .map(|&pi_b| HyperParams {
            pi_b,
            ..base.clone()
        })
        .collect();
    run_trials(hps, ds)
}

/// Plug-in bag fraction for bagged 1-NN in `p` dimensions given a selected
/// single-model `k_hat`: `(2 Γ(2 + 2/p)²)^{p/(p+4)} / k_hat`, replaced by 0.9
/// when it reaches 1.
pub fn plugin_pi_b(p: usize, k_hat: usize) -> f64 {
    assert!(p >= 1 && k_hat >= 1);
    let p = p as f64;
    let g = gamma(2.0 + 2.0 / p);
    let v = (2.0 * g * g).powf(p / (p + 4.0)) / k_hat as f64;
    if v >= 1.0 {
        0.9
    } else {
        v
    }
}

/// The `k` in `1..=min(k_max, n-1)` with the best leave-one-out accuracy of a
/// single k-NN classifier (smallest `k` on ties).
pub fn loocv_k(ds: &LabeledDataset, k_max: usize) -> Result<usize> {
    let n = ds.n();
    if n < 2 {
        return Err(BopnnError::InsufficientPoints {
            needed: 2,
            available: n,
        });
    }
    let k_max = k_max.min(n - 1).max(1);
    let ps = PointSet::labeled(ds.x.clone(), ds.y.clone())?;
    let n_classes = ds.n_classes();
    let correct = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<usize>> {
            let nn = knn_indices_slice(&ps, ps.row(i), k_max, Some(i))?;
            let mut counts = vec![0.0; n_classes];
            let mut hits = vec![0usize; k_max];
            for (k, &j) in nn.iter().enumerate() {
                counts[ds.y[j]] += 1.0;
                if argmax(&counts) == ds.y[i] {
                    hits[k] = 1;
                }
            }
            Ok(hits)
        })
        .try_reduce(
            || vec![0usize; k_max],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(argmax_usize(&correct) + 1)
}

fn argmax_usize(v: &[usize]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// The classifier configurations compared in benchmarks. All of them are
/// plain [`HyperParams`] settings of the same ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Projected k-NN bag, random-search tuned.
    Bopnn,
    /// Same without the discriminant step (q = q0).
    BopnnNoProj,
    /// Bagged 1-NN on all covariates, bag fraction tuned by OOB.
    Bnn,
    /// Bagged 1-NN with the plug-in bag fraction.
    BnnInf,
    /// A single k-NN model with k chosen by leave-one-out.
    Knn,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Bopnn,
        Variant::BopnnNoProj,
        Variant::Bnn,
        Variant::BnnInf,
        Variant::Knn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Bopnn => "bopnn",
            Variant::BopnnNoProj => "bopnn-noproj",
            Variant::Bnn => "bnn",
            Variant::BnnInf => "bnn-inf",
            Variant::Knn => "knn",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s)
    }

    /// Fixed part of the variant's hyperparameters for dimension `d`; the
    /// data-driven parts (k, pi_b) are filled in by [`fit_variant`].
    pub fn template(self, d: usize, seed: u64) -> HyperParams {
        let base = HyperParams {
            seed,
            ..HyperParams::default_for(d)
        };
        let full = HyperParams {
            k: 1,
            q0: d,
            q: d,
            projection_enabled: false,
            ..base.clone()
        };
        match self {
            Variant::Bopnn => base,
            Variant::BopnnNoProj => HyperParams {
                q: base.q0,
                projection_enabled: false,
                ..base
            },
            Variant::Bnn | Variant::BnnInf => full,
            Variant::Knn => HyperParams {
                n_models: 1,
                pi_b: 1.0,
                ..full
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantOptions {
    pub n_draws: usize,
    pub n_models: usize,
    pub seed: u64,
    pub balanced: bool,
    pub pi_b_grid: Vec<f64>,
    /// Largest k considered by leave-one-out selection.
    pub k_max: usize,
}

impl Default for VariantOptions {
    fn default() -> Self {
        VariantOptions {
            n_draws: 30,
            n_models: 100,
            seed: DEFAULT_SEED,
            balanced: false,
            pi_b_grid: DEFAULT_PI_B_GRID.to_vec(),
            k_max: 25,
        }
    }
}

/// Fits a variant with its model-selection procedure: random search for the
/// two bag-of-projections variants, an OOB grid over the bag fraction for
/// bagged 1-NN, the plug-in fraction for its asymptotic counterpart and a
/// leave-one-out k for the single k-NN model.
pub fn fit_variant(
    ds: &LabeledDataset,
    variant: Variant,
    opts: &VariantOptions,
) -> Result<(Ensemble, Option<TuneResult>)> {
    let template = HyperParams {
        n_models: opts.n_models,
        balanced: opts.balanced,
        ..variant.template(ds.d(), opts.seed)
    };
    match variant {
        Variant::Bopnn | Variant::BopnnNoProj => {
            let topts = TuneOptions {
                n_draws: opts.n_draws,
                n_models: opts.n_models,
                seed: opts.seed,
                projection_enabled: variant == Variant::Bopnn,
                balanced: opts.balanced,
            };
            let (r, e) = tune_and_fit(ds, &topts)?;
            Ok((e, Some(r)))
        }
        Variant::Bnn => {
            let (r, e) = tune_pi_b(ds, &template, &opts.pi_b_grid)?;
            Ok((e, Some(r)))
        }
        Variant::BnnInf => {
            let k_hat = loocv_k(ds, opts.k_max)?;
            let hp = HyperParams {
                pi_b: plugin_pi_b(ds.d(), k_hat),
                ..template
            };
            Ok((fit_ensemble(ds, &hp)?, None))
        }
        Variant::Knn => {
            let hp = HyperParams {
                k: loocv_k(ds, opts.k_max)?,
                n_models: 1,
                ..template
            };
            Ok((fit_ensemble(ds, &hp)?, None))
        }
    }
}
