use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::Ensemble;
use crate::error::{BopnnError, Result};
use crate::matrixcore::pca_basis;
use crate::subspace::{ensemble_projection, importance_contribution};

/// Mean over base models of the eigenvalue-weighted squared loadings of each
/// ambient variable.
pub fn variable_importance(e: &Ensemble) -> Result<Array1<f64>> {
    if !e.hp.projection_enabled {
        return Err(BopnnError::ProjectionDisabled);
    }
    let bases = e.bases();
    if bases.is_empty() {
        return Err(BopnnError::EmptyEnsemble);
    }
    let mut acc = Array1::zeros(e.d);
    for db in &bases {
        acc += &importance_contribution(db, e.d)?;
    }
    Ok(acc / bases.len() as f64)
}

/// Low-dimensional view of `x`: rows are mapped through the averaged
/// subspace projection and then expressed in the leading principal
/// directions of the mapped rows (after centring).
pub fn project_for_view(
    e: &Ensemble,
    x: ArrayView2<'_, f64>,
    view_dims: usize,
) -> Result<Array2<f64>> {
    if !e.hp.projection_enabled {
        return Err(BopnnError::ProjectionDisabled);
    }
    if x.ncols() != e.d {
        return Err(BopnnError::DimensionMismatch {
            expected: e.d,
            actual: x.ncols(),
        });
    }
    if view_dims == 0 || view_dims > e.d {
        return Err(BopnnError::DegenerateInput(format!(
            "view_dims = {view_dims} must lie in 1..={}",
            e.d
        )));
    }
    let p_bar = ensemble_projection(&e.bases(), e.d)?;
    let mapped = x.dot(&p_bar.view());
    let pcs = pca_basis(mapped.view(), view_dims)?;
    let mean = mapped.mean_axis(Axis(0)).expect("pca checked n >= 2");
    Ok((&mapped - &mean).dot(&pcs.vectors))
}
