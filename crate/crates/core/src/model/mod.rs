//! Projected k-NN base learners and their bagged ensemble.
//!
//! Each base model draws a bag of `floor(pi_b * n)` training points without
//! replacement and a random subset of `q0` covariates, fits a discriminant
//! subspace of dimension `q` on the bag (when projection is enabled) and
//! answers queries with a k-NN vote in that subspace. The ensemble averages
//! the base models' class distributions.

mod inspect;
mod tune;

pub use inspect::{project_for_view, variable_importance};
pub use tune::{
    fit_variant, loocv_k, plugin_pi_b, q0_range, q_range, tune, tune_pi_b, Trial, TuneOptions,
    TuneResult, Variant, VariantOptions, DEFAULT_PI_B_GRID,
};

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{Encoding, LabeledDataset};
use crate::error::{BopnnError, Result};
use crate::neighbors::{argmax, vote_distribution_slice, ClassDistribution, PointSet};
use crate::rng::SplitMix64;
use crate::subspace::{discriminant_basis, scatter_pair, DiscriminantBasis};

pub const DEFAULT_SEED: u64 = 20_190_521;

/// Resampling attempts for a bag that contains a single class.
const MAX_BAG_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Neighbours, for both the scatter matrices and the vote.
    pub k: usize,
    /// Covariates sampled per model.
    pub q0: usize,
    /// Discriminant dimensions kept per model.
    pub q: usize,
    /// Ensemble size B.
    pub n_models: usize,
    /// Bag fraction.
    pub pi_b: f64,
    pub projection_enabled: bool,
    pub balanced: bool,
    pub seed: u64,
}

impl HyperParams {
    /// k = 3, q0 = floor(0.75 d), q = ceil(q0 / 2), B = 100, pi_b = 0.63.
    pub fn default_for(d: usize) -> Self {
        let q0 = (3 * d / 4).max(1);
        HyperParams {
            k: 3,
            q0,
            q: q0.div_ceil(2),
            n_models: 100,
            pi_b: 0.63,
            projection_enabled: true,
            balanced: false,
            seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(BopnnError::InvalidHyperParams(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.q0 == 0 || self.q0 > d {
            return bad(format!("q0 = {} must lie in 1..={d}", self.q0));
        }
        if self.q == 0 || self.q > self.q0 {
            return bad(format!("q = {} must lie in 1..={}", self.q, self.q0));
        }
        if self.n_models == 0 {
            return bad("B must be at least 1".into());
        }
        if !(self.pi_b > 0.0 && self.pi_b <= 1.0) {
            return bad(format!("pi_b = {} must lie in (0, 1]", self.pi_b));
        }
        Ok(())
    }

    pub fn bag_size(&self, n: usize) -> usize {
        (self.pi_b * n as f64).floor() as usize
    }
}

/// One bagged learner.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseModel {
    /// Ambient covariates this model sees, strictly increasing.
    pub subset: Vec<usize>,
    /// Absent when projection is disabled.
    pub basis: Option<DiscriminantBasis>,
    /// Training rows in the bag, strictly increasing.
    pub inbag: Vec<usize>,
    /// In-bag points in model coordinates, labelled.
    pub points: PointSet,
}

impl BaseModel {
    pub fn inbag_labels(&self) -> &[usize] {
        self.points
            .labels()
            .expect("base model points are labelled")
    }

    /// Restricts an ambient row to the subset and applies the basis.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let restricted: Vec<f64> = self.subset.iter().map(|&j| x[j]).collect();
        match &self.basis {
            Some(db) => project_row(&restricted, &db.basis),
            None => restricted,
        }
    }

    /// Rebuilds a base model from its stored parts and the training matrix.
    pub fn assemble(
        train_x: &Array2<f64>,
        subset: Vec<usize>,
        basis: Option<DiscriminantBasis>,
        inbag: Vec<usize>,
        inbag_labels: Vec<usize>,
    ) -> Result<Self> {
        let width = basis.as_ref().map_or(subset.len(), DiscriminantBasis::q);
        let mut data = Vec::with_capacity(inbag.len() * width);
        let mut restricted = vec![0.0; subset.len()];
        for &i in &inbag {
            let row = train_x.row(i);
            for (r, &j) in restricted.iter_mut().zip(&subset) {
                *r = row[j];
            }
            match &basis {
                Some(db) => data.extend(project_row(&restricted, &db.basis)),
                None => data.extend_from_slice(&restricted),
            }
        }
        let pts = Array2::from_shape_vec((inbag.len(), width), data)
            .map_err(|e| BopnnError::DegenerateInput(e.to_string()))?;
        Ok(BaseModel {
            subset,
            basis,
            inbag,
            points: PointSet::labeled(pts, inbag_labels)?,
        })
    }
}

/// `rowᵀ · basis` accumulated in a fixed order.
fn project_row(row: &[f64], basis: &Array2<f64>) -> Vec<f64> {
    let mut out = vec![0.0; basis.ncols()];
    for (a, &x) in row.iter().enumerate() {
        for (o, &b) in out.iter_mut().zip(basis.row(a)) {
            *o += x * b;
        }
    }
    out
}

fn distinct_classes(labels: impl Iterator<Item = usize>) -> usize {
    let mut seen: Vec<usize> = labels.collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Fits base model `b`. All randomness comes from the stream `(hp.seed, b)`.
pub fn fit_base(ds: &LabeledDataset, hp: &HyperParams, b: usize) -> Result<BaseModel> {
    hp.validate(ds.d())?;
    let n = ds.n();
    let n_bag = hp.bag_size(n);
    if n_bag < 2 {
        return Err(BopnnError::InsufficientPoints {
            needed: 2,
            available: n_bag,
        });
    }
    let mut rng = SplitMix64::stream(hp.seed, b as u64);
    let mut inbag = rng.sample_without_replacement(n, n_bag);
    let mut attempts = 0;
    while distinct_classes(inbag.iter().map(|&i| ds.y[i])) < 2 {
        if attempts == MAX_BAG_RESAMPLES {
            return Err(BopnnError::SingleClassSample);
        }
        inbag = rng.sample_without_replacement(n, n_bag);
        attempts += 1;
    }
    let subset = rng.sample_without_replacement(ds.d(), hp.q0);
    let labels: Vec<usize> = inbag.iter().map(|&i| ds.y[i]).collect();

    let basis = if hp.projection_enabled {
        let restricted = ds.x.select(ndarray::Axis(0), &inbag);
        let restricted = restricted.select(ndarray::Axis(1), &subset);
        let ps = PointSet::labeled(restricted, labels.clone())?;
        let k = hp.k.min(n_bag - 1);
        let sc = scatter_pair(&ps, k, hp.balanced)?;
        Some(discriminant_basis(&sc, &subset, hp.q)?)
    } else {
        None
    };
    BaseModel::assemble(&ds.x, subset, basis, inbag, labels)
}

/// Vote distribution of one base model, with `k` clamped to the bag size.
pub fn predict_base(
    m: &BaseModel,
    x: ArrayView1<'_, f64>,
    k: usize,
    n_classes: usize,
) -> Result<ClassDistribution> {
    let x = x.to_vec();
    predict_base_slice(m, &x, k, n_classes)
}

fn predict_base_slice(
    m: &BaseModel,
    x: &[f64],
    k: usize,
    n_classes: usize,
) -> Result<ClassDistribution> {
    if let Some(&j) = m.subset.last() {
        if j >= x.len() {
            return Err(BopnnError::DimensionMismatch {
                expected: j + 1,
                actual: x.len(),
            });
        }
    }
    let z = m.transform(x);
    vote_distribution_slice(&m.points, &z, k.min(m.points.len()).max(1), n_classes)
}

/// Fitted bagged ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub models: Vec<BaseModel>,
    pub n_classes: usize,
    pub d: usize,
    pub hp: HyperParams,
    /// `None` when no training point is ever out of bag.
    pub oob_accuracy: Option<f64>,
    pub encoding: Encoding,
    /// Training matrix the bags index into.
    pub train_x: Array2<f64>,
    pub train_y: Vec<usize>,
}

/// Fits `hp.n_models` base models (in parallel on the current rayon pool) and
/// the out-of-bag accuracy. The result does not depend on the pool size.
pub fn fit_ensemble(ds: &LabeledDataset, hp: &HyperParams) -> Result<Ensemble> {
    hp.validate(ds.d())?;
    if ds.n() < 2 {
        return Err(BopnnError::InsufficientPoints {
            needed: 2,
            available: ds.n(),
        });
    }
    let models = (0..hp.n_models)
        .into_par_iter()
        .map(|b| fit_base(ds, hp, b))
        .collect::<Result<Vec<_>>>()?;
    let mut e = Ensemble {
        models,
        n_classes: ds.n_classes(),
        d: ds.d(),
        hp: hp.clone(),
        oob_accuracy: None,
        encoding: ds.encoding.clone(),
        train_x: ds.x.clone(),
        train_y: ds.y.clone(),
    };
    e.oob_accuracy = match oob_accuracy(&e, ds) {
        Ok(a) => Some(a),
        Err(BopnnError::NoOOBPoints) => None,
        Err(err) => return Err(err),
    };
    Ok(e)
}

impl Ensemble {
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<ClassDistribution> {
        predict(self, x)
    }

    pub fn classify(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        classify(self, x)
    }

    pub fn bases(&self) -> Vec<&DiscriminantBasis> {
        self.models
            .iter()
            .filter_map(|m| m.basis.as_ref())
            .collect()
    }
}

/// Mean of the base models' class distributions.
pub fn predict(e: &Ensemble, x: ArrayView1<'_, f64>) -> Result<ClassDistribution> {
    if x.len() != e.d {
        return Err(BopnnError::DimensionMismatch {
            expected: e.d,
            actual: x.len(),
        });
    }
    if e.models.is_empty() {
        return Err(BopnnError::EmptyEnsemble);
    }
    let x = x.to_vec();
    let mut acc = vec![0.0; e.n_classes];
    for m in &e.models {
        let dist = predict_base_slice(m, &x, e.hp.k, e.n_classes)?;
        for (a, p) in acc.iter_mut().zip(&dist.probs) {
            *a += p;
        }
    }
    let b = e.models.len() as f64;
    Ok(ClassDistribution {
        probs: acc.into_iter().map(|a| a / b).collect(),
    })
}

/// Mode of the ensemble distribution; ties go to the smallest class index.
pub fn classify(e: &Ensemble, x: ArrayView1<'_, f64>) -> Result<usize> {
    Ok(predict(e, x)?.argmax())
}

/// Out-of-bag accuracy: every training point is scored by the average
/// distribution of the models whose bag excludes it. Points that are in every
/// bag are skipped.
pub fn oob_accuracy(e: &Ensemble, ds: &LabeledDataset) -> Result<f64> {
    let n = ds.n();
    let k = e.n_classes;
    // Per-model OOB votes are computed in parallel and summed in model order.
    let per_model: Vec<Vec<(usize, ClassDistribution)>> = e
        .models
        .par_iter()
        .map(|m| {
            let mut in_bag = vec![false; n];
            for &i in &m.inbag {
                in_bag[i] = true;
            }
            (0..n)
                .filter(|&i| !in_bag[i])
                .map(|i| {
                    let row = ds.x.row(i);
                    let row = row
                        .as_slice()
                        .map(<[f64]>::to_vec)
                        .unwrap_or_else(|| row.to_vec());
                    predict_base_slice(m, &row, e.hp.k, k).map(|d| (i, d))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sums = vec![0.0; n * k];
    let mut counts = vec![0usize; n];
    for votes in per_model {
        for (i, dist) in votes {
            counts[i] += 1;
            for (s, p) in sums[i * k..(i + 1) * k].iter_mut().zip(&dist.probs) {
                *s += p;
            }
        }
    }
    let mut scored = 0usize;
    let mut correct = 0usize;
    for i in 0..n {
        if counts[i] == 0 {
            continue;
        }
        scored += 1;
        if argmax(&sums[i * k..(i + 1) * k]) == ds.y[i] {
            correct += 1;
        }
    }
    if scored == 0 {
        return Err(BopnnError::NoOOBPoints);
    }
    Ok(correct as f64 / scored as f64)
}
