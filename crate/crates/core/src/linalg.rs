//! Hermitian eigen decomposition and rank estimation.
//!
//! Backed by nalgebra's symmetric QR iteration and SVD. Eigenvectors are
//! defined only up to a unit-modulus factor per column (and up to any
//! unitary rotation inside a degenerate cluster); callers must not depend
//! on either.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
const HERMITIAN_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100_000;

/// Eigenpairs of a Hermitian matrix, values ascending.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

/// Eigenpairs of a real symmetric matrix, values ascending.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl HermEig {
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let v = &self.vectors;
        let mut scaled = v.clone();
        for (j, &l) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(l);
        }
        scaled * v.adjoint()
    }
}

impl SymEig {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.vectors;
        let mut scaled = v.clone();
        for (j, &l) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(l);
        }
        scaled * v.transpose()
    }

    pub fn to_complex(&self) -> HermEig {
        HermEig {
            values: self.values.clone(),
            vectors: self.vectors.map(|x| Complex64::new(x, 0.0)),
        }
    }
}

fn check_square(rows: usize, cols: usize) -> Result<()> {
    if rows != cols {
        return Err(Error::Dimension(format!("expected a square matrix, got {rows}x{cols}")));
    }
    if rows == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    Ok(())
}

fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

pub fn herm_eig(a: &DMatrix<Complex64>) -> Result<HermEig> {
    check_square(a.nrows(), a.ncols())?;
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Input("non-finite entry in Hermitian matrix".into()));
    }
    let skew = (a - a.adjoint()).norm();
    let scale = a.norm();
    if skew > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) * 2.0 {
        return Err(Error::Input(format!(
            "matrix is not Hermitian: |A - A^H|_F / |A|_F = {:.3e}",
            skew / scale
        )));
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::NoConvergence { iterations: MAX_SWEEPS })?;
    let order = ascending_order(eig.eigenvalues.as_slice());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermEig { values, vectors })
}

pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymEig> {
    check_square(a.nrows(), a.ncols())?;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite entry in symmetric matrix".into()));
    }
    let skew = (a - a.transpose()).norm();
    let scale = a.norm();
    if skew > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) * 2.0 {
        return Err(Error::Input(format!(
            "matrix is not symmetric: |A - A^T|_F / |A|_F = {:.3e}",
            skew / scale
        )));
    }
    let sym = (a + a.transpose()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::NoConvergence { iterations: MAX_SWEEPS })?;
    let order = ascending_order(eig.eigenvalues.as_slice());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymEig { values, vectors })
}

pub fn singular_values(a: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let svd = SVD::try_new(a.clone(), false, false, f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::NoConvergence { iterations: MAX_SWEEPS })?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Number of singular values above `tol` times the largest one.
pub fn numerical_rank(a: &DMatrix<Complex64>, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::Input(format!("rank tolerance must be positive, got {tol}")));
    }
    let s = singular_values(a)?;
    let top = s[0];
    if top == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > tol * top).count())
}

/// Frobenius distance between the orthogonal projectors onto two column spaces.
pub fn projector_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a * a.adjoint() - b * b.adjoint()).norm()
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}
