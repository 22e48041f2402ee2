//! Neighbour scatter matrices and the discriminant subspace they define.
//!
//! `sigma_in` averages outer products of differences between each point and
//! its k-th nearest same-class neighbour, `sigma_out` the same for the k-th
//! nearest other-class neighbour. The discriminant basis is the leading
//! eigenvectors of `sigma_in⁻¹ sigma_out`.

use ndarray::{Array1, Array2};

use crate::error::{BopnnError, Result};
use crate::matrixcore::{generalized_eigen, SymMatrix};
use crate::neighbors::{kth_same_and_other, PointSet};

const RIDGE_BASE: f64 = 1e-8;
const RIDGE_ESCALATIONS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPair {
    pub sigma_in: SymMatrix,
    pub sigma_out: SymMatrix,
    /// Points contributing to `sigma_in` (points in singleton classes do not).
    pub n_used_in: usize,
    pub n_used_out: usize,
}

/// Per-model discriminant subspace, expressed in the coordinates of the
/// covariate subset it was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminantBasis {
    /// Ambient column indices, strictly increasing.
    pub subset: Vec<usize>,
    /// `subset.len() x q`, unit-norm columns.
    pub basis: Array2<f64>,
    /// Leading eigenvalues, non-increasing and non-negative.
    pub values: Array1<f64>,
    /// Ridge that was added to `sigma_in` for the solve.
    pub ridge: f64,
}

impl DiscriminantBasis {
    pub fn q(&self) -> usize {
        self.basis.ncols()
    }
}

/// Accumulates the upper triangle of `diff diffᵀ` into `acc`.
fn add_outer(acc: &mut Array2<f64>, diff: &[f64]) {
    let m = diff.len();
    for a in 0..m {
        let da = diff[a];
        if da == 0.0 {
            continue;
        }
        for b in a..m {
            acc[[a, b]] += da * diff[b];
        }
    }
}

fn mirror_upper(mut m: Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    for a in 0..n {
        for b in 0..a {
            m[[a, b]] = m[[b, a]];
        }
    }
    m
}

/// Neighbour scatter matrices of a labelled point set.
///
/// Per point, the same-class rank is clamped to `class_size - 1` and the
/// other-class rank to `n - class_size`; points alone in their class are left
/// out of `sigma_in`. Unbalanced mode divides by the number of contributing
/// points. Balanced mode averages within each class first and then across the
/// classes that contributed.
pub fn scatter_pair(ps: &PointSet, k: usize, balanced: bool) -> Result<ScatterPair> {
    let labels = ps
        .labels()
        .ok_or_else(|| BopnnError::DegenerateInput("scatter needs labels".into()))?;
    if k == 0 {
        return Err(BopnnError::InvalidHyperParams(
            "k must be at least 1".into(),
        ));
    }
    let n = ps.len();
    let m = ps.dim();
    let n_classes = labels.iter().copied().max().map_or(0, |c| c + 1);
    let mut class_size = vec![0usize; n_classes];
    for &c in labels {
        class_size[c] += 1;
    }
    if class_size.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(BopnnError::SingleClassSample);
    }

    let mut acc_in = vec![Array2::<f64>::zeros((m, m)); if balanced { n_classes } else { 1 }];
    let mut acc_out = acc_in.clone();
    let mut used_in = vec![0usize; acc_in.len()];
    let mut used_out = vec![0usize; acc_in.len()];

    let mut scratch_same = Vec::with_capacity(n);
    let mut scratch_other = Vec::with_capacity(n);
    let mut diff = vec![0.0; m];
    for (i, &cls) in labels.iter().enumerate() {
        let k_in = k.min(class_size[cls] - 1);
        let k_out = k.min(n - class_size[cls]);
        let (same, other) =
            kth_same_and_other(ps, i, k_in, k_out, &mut scratch_same, &mut scratch_other)?;
        let slot = if balanced { cls } else { 0 };
        let xi = ps.row(i);
        if let Some(j) = same {
            for (d, (a, b)) in diff.iter_mut().zip(xi.iter().zip(ps.row(j))) {
                *d = a - b;
            }
            add_outer(&mut acc_in[slot], &diff);
            used_in[slot] += 1;
        }
        for (d, (a, b)) in diff.iter_mut().zip(xi.iter().zip(ps.row(other))) {
            *d = a - b;
        }
        add_outer(&mut acc_out[slot], &diff);
        used_out[slot] += 1;
    }

    let combine = |acc: Vec<Array2<f64>>, used: &[usize]| -> Array2<f64> {
        let mut total = Array2::<f64>::zeros((m, m));
        if balanced {
            let contributing = used.iter().filter(|&&u| u > 0).count();
            for (a, &u) in acc.iter().zip(used) {
                if u > 0 {
                    total.scaled_add(1.0 / (contributing as f64 * u as f64), a);
                }
            }
        } else if used[0] > 0 {
            total.scaled_add(1.0 / used[0] as f64, &acc[0]);
        }
        mirror_upper(total)
    };

    let n_used_in = used_in.iter().sum();
    let n_used_out = used_out.iter().sum();
    Ok(ScatterPair {
        sigma_in: SymMatrix::new(combine(acc_in, &used_in))?,
        sigma_out: SymMatrix::new(combine(acc_out, &used_out))?,
        n_used_in,
        n_used_out,
    })
}

/// Starting ridge: `1e-8 * trace(sigma_in) / dim`, falling back to the
/// `sigma_out` trace and then to `1e-8` when the traces vanish.
fn initial_ridge(sc: &ScatterPair) -> f64 {
    let dim = sc.sigma_in.dim() as f64;
    [sc.sigma_in.trace(), sc.sigma_out.trace()]
        .into_iter()
        .map(|t| RIDGE_BASE * t / dim)
        .find(|r| r.is_finite() && *r > 0.0)
        .unwrap_or(RIDGE_BASE)
}

/// Leading `q` generalized eigenpairs of `(sigma_out, sigma_in)`.
///
/// The solve starts at the ridge from [`initial_ridge`] and multiplies it by
/// ten, at most three times, while `sigma_in + ridge*I` is not positive definite.
pub fn discriminant_basis(
    sc: &ScatterPair,
    subset: &[usize],
    q: usize,
) -> Result<DiscriminantBasis> {
    let dim = sc.sigma_in.dim();
    if subset.len() != dim {
        return Err(BopnnError::DimensionMismatch {
            expected: dim,
            actual: subset.len(),
        });
    }
    if !subset.windows(2).all(|w| w[0] < w[1]) {
        return Err(BopnnError::DegenerateInput(
            "covariate subset must be strictly increasing".into(),
        ));
    }
    if q == 0 || q > dim {
        return Err(BopnnError::InvalidHyperParams(format!(
            "q = {q} must lie in 1..={dim}"
        )));
    }
    let mut ridge = initial_ridge(sc);
    let mut attempt = 0;
    let eig = loop {
        match generalized_eigen(&sc.sigma_out, &sc.sigma_in, ridge) {
            Ok(e) => break e,
            Err(BopnnError::NotPositiveDefinite { .. }) if attempt < RIDGE_ESCALATIONS => {
                ridge *= 10.0;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let eig = eig.truncate(q);
    Ok(DiscriminantBasis {
        subset: subset.to_vec(),
        basis: eig.vectors,
        values: eig.values,
        ridge,
    })
}

/// Ambient-length vector of `diag(V Vᵀ)` with `V = basis · diag(values)^{1/2}`.
pub fn importance_contribution(db: &DiscriminantBasis, d: usize) -> Result<Array1<f64>> {
    let mut out = Array1::zeros(d);
    for (row, &j) in db.subset.iter().enumerate() {
        if j >= d {
            return Err(BopnnError::IndexOutOfRange { index: j, dim: d });
        }
        out[j] = db
            .basis
            .row(row)
            .iter()
            .zip(db.values.iter())
            .map(|(u, lam)| lam * u * u)
            .sum();
    }
    Ok(out)
}

/// Mean over bases of the ambient-embedded `U Uᵀ`.
pub fn ensemble_projection(bases: &[&DiscriminantBasis], d: usize) -> Result<SymMatrix> {
    if bases.is_empty() {
        return Err(BopnnError::EmptyEnsemble);
    }
    let mut acc = Array2::<f64>::zeros((d, d));
    for db in bases {
        if let Some(&bad) = db.subset.iter().find(|&&j| j >= d) {
            return Err(BopnnError::IndexOutOfRange { index: bad, dim: d });
        }
        let uut = db.basis.dot(&db.basis.t());
        for (a, &ja) in db.subset.iter().enumerate() {
            for (b, &jb) in db.subset.iter().enumerate() {
                acc[[ja, jb]] += uut[[a, b]];
            }
        }
    }
    acc /= bases.len() as f64;
    SymMatrix::new(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::sym_eigen;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn pair(sigma_in: SymMatrix, sigma_out: SymMatrix) -> ScatterPair {
        ScatterPair {
            sigma_in,
            sigma_out,
            n_used_in: 0,
            n_used_out: 0,
        }
    }

    #[test]
    fn duplicated_points() {
        let ps = PointSet::labeled(
            array![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        for balanced in [false, true] {
            let sc = scatter_pair(&ps, 1, balanced).unwrap();
            assert_eq!(sc.sigma_in.view(), Array2::<f64>::zeros((2, 2)));
            assert_eq!(sc.sigma_out.view(), array![[1.0, 1.0], [1.0, 1.0]]);
            assert_eq!((sc.n_used_in, sc.n_used_out), (4, 4));
        }
    }

    #[test]
    fn singleton_class_dropped_from_sigma_in() {
        let ps = PointSet::labeled(array![[0.0], [1.0], [3.0]], vec![0, 0, 1]).unwrap();
        let sc = scatter_pair(&ps, 2, false).unwrap();
        assert_eq!(sc.n_used_in, 2);
        assert_eq!(sc.n_used_out, 3);
        assert_abs_diff_eq!(sc.sigma_in[[0, 0]], 1.0);
        // other-class ranks clamp to 1 for class 0; the singleton takes its 2nd nearest (x = 0)
        assert_abs_diff_eq!(
            sc.sigma_out[[0, 0]],
            (9.0 + 4.0 + 9.0) / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn single_class_rejected() {
        let ps = PointSet::labeled(array![[0.0], [1.0]], vec![1, 1]).unwrap();
        assert_eq!(
            scatter_pair(&ps, 1, false),
            Err(BopnnError::SingleClassSample)
        );
    }

    #[test]
    fn basis_identity_in() {
        let sc = pair(SymMatrix::identity(2), SymMatrix::from_diag(&[5.0, 1.0]));
        let db = discriminant_basis(&sc, &[0, 1], 1).unwrap();
        assert_abs_diff_eq!(db.values[0], 5.0, epsilon = 1e-6);
        assert_abs_diff_eq!(db.basis, array![[1.0], [0.0]], epsilon = 1e-12);
    }

    #[test]
    fn basis_diagonal_ratios() {
        let sc = pair(
            SymMatrix::from_diag(&[4.0, 1.0]),
            SymMatrix::from_diag(&[4.0, 4.0]),
        );
        let db = discriminant_basis(&sc, &[3, 7], 2).unwrap();
        assert_abs_diff_eq!(db.values, array![4.0, 1.0], epsilon = 1e-6);
        assert_abs_diff_eq!(db.basis, array![[0.0, 1.0], [1.0, 0.0]], epsilon = 1e-12);
    }

    #[test]
    fn full_q_matches_sym_eigen() {
        let out =
            SymMatrix::new(array![[3.0, 1.0, 0.5], [1.0, 2.0, 0.2], [0.5, 0.2, 1.0]]).unwrap();
        let sc = pair(SymMatrix::identity(3), out.clone());
        let db = discriminant_basis(&sc, &[0, 1, 2], 3).unwrap();
        let e = sym_eigen(&out).unwrap();
        assert_abs_diff_eq!(db.values, e.values, epsilon = 1e-6);
        assert_abs_diff_eq!(db.basis, e.vectors, epsilon = 1e-7);
    }

    #[test]
    fn singular_sigma_in_is_ridged() {
        let sc = pair(
            SymMatrix::zeros(2),
            SymMatrix::new(array![[1.0, 1.0], [1.0, 1.0]]).unwrap(),
        );
        let db = discriminant_basis(&sc, &[0, 1], 1).unwrap();
        assert!(db.ridge > 0.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(db.basis, array![[r], [r]], epsilon = 1e-9);
    }

    #[test]
    fn basis_argument_checks() {
        let sc = pair(SymMatrix::identity(2), SymMatrix::identity(2));
        assert!(discriminant_basis(&sc, &[1, 0], 1).is_err());
        assert!(discriminant_basis(&sc, &[0, 1], 3).is_err());
        assert!(discriminant_basis(&sc, &[0], 1).is_err());
    }

    #[test]
    fn importance_scatter() {
        let db = DiscriminantBasis {
            subset: vec![2],
            basis: array![[1.0]],
            values: array![4.0],
            ridge: 0.0,
        };
        assert_eq!(
            importance_contribution(&db, 4).unwrap(),
            array![0.0, 0.0, 4.0, 0.0]
        );
        assert!(matches!(
            importance_contribution(&db, 2),
            Err(BopnnError::IndexOutOfRange { index: 2, dim: 2 })
        ));
        let zero = DiscriminantBasis {
            values: array![0.0],
            ..db
        };
        assert_eq!(
            importance_contribution(&zero, 4).unwrap(),
            Array1::<f64>::zeros(4)
        );
    }

    #[test]
    fn projection_examples() {
        let e1 = DiscriminantBasis {
            subset: vec![0],
            basis: array![[1.0]],
            values: array![1.0],
            ridge: 0.0,
        };
        let e2 = DiscriminantBasis {
            subset: vec![1],
            ..e1.clone()
        };
        let p = ensemble_projection(&[&e1], 2).unwrap();
        assert_eq!(p.view(), array![[1.0, 0.0], [0.0, 0.0]]);
        let p = ensemble_projection(&[&e1, &e2], 2).unwrap();
        assert_eq!(p.view(), array![[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(ensemble_projection(&[], 2), Err(BopnnError::EmptyEnsemble));
    }
}
