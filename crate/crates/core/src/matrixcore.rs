//! Dense symmetric linear algebra: Cholesky, cyclic Jacobi eigen-decomposition,
//! the symmetric-definite generalized eigenproblem and PCA bases.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{BopnnError, Result};

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;

/// Square symmetric matrix. Construction averages `a` with its transpose so
/// `m[[i, j]] == m[[j, i]]` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Array2<f64>);

impl SymMatrix {
    pub fn new(a: Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(BopnnError::DimensionMismatch {
                expected: r,
                actual: c,
            });
        }
        if r == 0 {
            return Err(BopnnError::DegenerateInput("empty matrix".into()));
        }
        let mut m = a;
        for i in 0..r {
            for j in (i + 1)..r {
                let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
                m[[i, j]] = avg;
                m[[j, i]] = avg;
            }
        }
        Ok(SymMatrix(m))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(Array2::zeros((dim, dim)))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(Array2::eye(dim))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        SymMatrix(Array2::from_diag(&Array1::from(diag.to_vec())))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.0.diag().sum()
    }

    /// `self + ridge * I`
    pub fn with_ridge(&self, ridge: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[[i, i]] += ridge;
        }
        SymMatrix(m)
    }
}

impl std::ops::Index<[usize; 2]> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: [usize; 2]) -> &f64 {
        &self.0[idx]
    }
}

/// Eigenpairs with values sorted non-increasing and unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub values: Array1<f64>,
    /// dim x m, one eigenvector per column.
    pub vectors: Array2<f64>,
}

impl EigenBasis {
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keeps the leading `m` pairs.
    pub fn truncate(mut self, m: usize) -> Self {
        let m = m.min(self.len());
        self.values = self.values.slice(ndarray::s![..m]).to_owned();
        self.vectors = self.vectors.slice(ndarray::s![.., ..m]).to_owned();
        self
    }
}

/// Lower-triangular `L` with `L Lᵀ = S`.
pub fn cholesky(s: &SymMatrix) -> Result<Array2<f64>> {
    let n = s.dim();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut pivot = s[[j, j]];
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if pivot.is_nan() || pivot <= 0.0 {
            return Err(BopnnError::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut acc = s[[i, j]];
            for k in 0..j {
                acc -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = acc / ljj;
        }
    }
    Ok(l)
}

/// Cyclic Jacobi rotations. Stops once the off-diagonal Frobenius norm drops
/// to `1e-12 * ||S||_F`; fails after 100 sweeps.
pub fn sym_eigen(s: &SymMatrix) -> Result<EigenBasis> {
    let n = s.dim();
    let mut a = s.view().to_owned();
    let mut v = Array2::<f64>::eye(n);
    let tol = JACOBI_REL_TOL * s.frobenius_norm();

    let off_norm = |a: &Array2<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += a[[i, j]] * a[[i, j]];
                }
            }
        }
        acc.sqrt()
    };

    let mut converged = off_norm(&a) <= tol;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(BopnnError::ConvergenceFailure { sweeps });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[[r, p]];
                    let arq = a[[r, q]];
                    let new_rp = c * arp - sn * arq;
                    let new_rq = sn * arp + c * arq;
                    a[[r, p]] = new_rp;
                    a[[p, r]] = new_rp;
                    a[[r, q]] = new_rq;
                    a[[q, r]] = new_rq;
                }
                a[[p, p]] -= t * apq;
                a[[q, q]] += t * apq;
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for r in 0..n {
                    let vrp = v[[r, p]];
                    let vrq = v[[r, q]];
                    v[[r, p]] = c * vrp - sn * vrq;
                    v[[r, q]] = sn * vrp + c * vrq;
                }
            }
        }
        sweeps += 1;
        converged = off_norm(&a) <= tol;
    }

    let values: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    Ok(sorted_basis(&values, &v, |_| {}))
}

/// Sorts eigenpairs non-increasing (stable on original index), normalizes
/// each column and fixes its sign so the entry of largest magnitude is
/// positive (first such entry on ties).
fn sorted_basis(
    values: &[f64],
    vectors: &Array2<f64>,
    mut adjust: impl FnMut(&mut f64),
) -> EigenBasis {
    let n = vectors.nrows();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));

    let mut out_vals = Array1::zeros(order.len());
    let mut out_vecs = Array2::zeros((n, order.len()));
    for (dst, &src) in order.iter().enumerate() {
        let mut val = values[src];
        adjust(&mut val);
        out_vals[dst] = val;
        let mut col = vectors.column(src).to_owned();
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 {
            col /= norm;
        }
        let mut lead = 0;
        for i in 1..n {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
        out_vecs.column_mut(dst).assign(&col);
    }
    EigenBasis {
        values: out_vals,
        vectors: out_vecs,
    }
}

/// Eigenpairs of `(Bmat + ridge*I)^{-1} A` through the Cholesky reduction
/// `Bmat + ridge*I = L Lᵀ`, `C = L⁻¹ A L⁻ᵀ`, `u = L⁻ᵀ w`. Columns are
/// rescaled to unit Euclidean norm and negative values clamped to zero.
pub fn generalized_eigen(a: &SymMatrix, bmat: &SymMatrix, ridge: f64) -> Result<EigenBasis> {
    let n = a.dim();
    if bmat.dim() != n {
        return Err(BopnnError::DimensionMismatch {
            expected: n,
            actual: bmat.dim(),
        });
    }
    let l = cholesky(&bmat.with_ridge(ridge))?;

    // Y = L⁻¹ A, then C = L⁻¹ Yᵀ (A symmetric so Yᵀ = A L⁻ᵀ).
    let y = forward_solve(&l, &a.view().to_owned());
    let c = forward_solve(&l, &y.t().to_owned());
    let reduced = sym_eigen(&SymMatrix::new(c)?)?;

    let u = backward_solve_transposed(&l, &reduced.vectors);
    let values: Vec<f64> = reduced.values.to_vec();
    Ok(sorted_basis(&values, &u, |v| {
        if *v < 0.0 {
            *v = 0.0;
        }
    }))
}

/// Solves `L X = rhs` for lower-triangular `L`, column by column.
fn forward_solve(l: &Array2<f64>, rhs: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut x = rhs.clone();
    for col in 0..x.ncols() {
        for i in 0..n {
            let mut acc = x[[i, col]];
            for k in 0..i {
                acc -= l[[i, k]] * x[[k, col]];
            }
            x[[i, col]] = acc / l[[i, i]];
        }
    }
    x
}

/// Solves `Lᵀ X = rhs` for lower-triangular `L`.
fn backward_solve_transposed(l: &Array2<f64>, rhs: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut x = rhs.clone();
    for col in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut acc = x[[i, col]];
            for k in (i + 1)..n {
                acc -= l[[k, i]] * x[[k, col]];
            }
            x[[i, col]] = acc / l[[i, i]];
        }
    }
    x
}

/// Top `m_out` principal directions of the column-centred covariance of `x`
/// (divisor `n - 1`).
pub fn pca_basis(x: ArrayView2<'_, f64>, m_out: usize) -> Result<EigenBasis> {
    let (n, m) = x.dim();
    if n < 2 {
        return Err(BopnnError::DegenerateInput(format!(
            "pca needs at least 2 rows, got {n}"
        )));
    }
    if m_out > m || m_out == 0 {
        return Err(BopnnError::DegenerateInput(format!(
            "requested {m_out} components from {m} columns"
        )));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centred = &x - &mean;
    let cov = centred.t().dot(&centred) / (n as f64 - 1.0);
    Ok(sym_eigen(&SymMatrix::new(cov)?)?.truncate(m_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn reconstruct(l: &Array2<f64>) -> Array2<f64> {
        l.dot(&l.t())
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&SymMatrix::identity(3)).unwrap();
        assert_eq!(l, Array2::<f64>::eye(3));
    }

    #[test]
    fn cholesky_two_by_two() {
        let s = SymMatrix::new(array![[4.0, 2.0], [2.0, 5.0]]).unwrap();
        let l = cholesky(&s).unwrap();
        assert_abs_diff_eq!(l, array![[2.0, 0.0], [1.0, 2.0]], epsilon = 1e-15);
        assert_abs_diff_eq!(reconstruct(&l), s.view().to_owned(), epsilon = 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let s = SymMatrix::new(array![[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky(&s),
            Err(BopnnError::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn construction_symmetrizes() {
        let s = SymMatrix::new(array![[1.0, 2.0], [4.0, 1.0]]).unwrap();
        assert_eq!(s[[0, 1]], 3.0);
        assert_eq!(s[[1, 0]], 3.0);
        assert!(SymMatrix::new(Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn eigen_diagonal() {
        let e = sym_eigen(&SymMatrix::from_diag(&[1.0, 4.0])).unwrap();
        assert_eq!(e.values.to_vec(), vec![4.0, 1.0]);
        assert_abs_diff_eq!(e.vectors, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn eigen_two_by_two() {
        let e = sym_eigen(&SymMatrix::new(array![[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap();
        assert_abs_diff_eq!(e.values, array![3.0, 1.0], epsilon = 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.vectors, array![[r, r], [r, -r]], epsilon = 1e-14);
    }

    #[test]
    fn eigen_zero_matrix() {
        let e = sym_eigen(&SymMatrix::zeros(3)).unwrap();
        assert_eq!(e.values.to_vec(), vec![0.0; 3]);
        assert_eq!(e.vectors, Array2::<f64>::eye(3));
    }

    #[test]
    fn generalized_reduces_to_standard() {
        let g = generalized_eigen(
            &SymMatrix::from_diag(&[4.0, 1.0]),
            &SymMatrix::identity(2),
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(g.values, array![4.0, 1.0], epsilon = 1e-14);
    }

    #[test]
    fn generalized_diagonal_ratio() {
        let g = generalized_eigen(
            &SymMatrix::from_diag(&[8.0, 1.0]),
            &SymMatrix::from_diag(&[4.0, 1.0]),
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(g.values, array![2.0, 1.0], epsilon = 1e-14);
        assert_abs_diff_eq!(g.vectors, Array2::<f64>::eye(2), epsilon = 1e-14);
    }

    #[test]
    fn generalized_rank_one() {
        let a = SymMatrix::new(array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let g = generalized_eigen(&a, &SymMatrix::identity(2), 0.0).unwrap();
        assert_abs_diff_eq!(g.values, array![2.0, 0.0], epsilon = 1e-14);
        assert!(g.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn generalized_surfaces_not_pd() {
        let a = SymMatrix::identity(2);
        let b = SymMatrix::new(array![[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            generalized_eigen(&a, &b, 0.0),
            Err(BopnnError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn pca_on_a_line() {
        let x = array![[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let p = pca_basis(x.view(), 2).unwrap();
        let dir = p.vectors.column(0);
        assert_abs_diff_eq!(dir[1] / dir[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pca_full_basis_is_orthonormal() {
        let x = array![
            [1.0, 0.5, 2.0],
            [0.2, 1.5, -1.0],
            [3.0, 0.1, 0.0],
            [-1.0, 2.0, 1.0]
        ];
        let p = pca_basis(x.view(), 3).unwrap();
        assert_abs_diff_eq!(
            p.vectors.t().dot(&p.vectors),
            Array2::eye(3),
            epsilon = 1e-12
        );
    }

    #[test]
    fn pca_rejects_single_row() {
        let x = array![[1.0, 2.0]];
        assert!(matches!(
            pca_basis(x.view(), 1),
            Err(BopnnError::DegenerateInput(_))
        ));
    }
}
