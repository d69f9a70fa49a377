//! Laplacian-regularized recovery of the image series.
//!
//! The full problem `min ||A(X) - B||^2 + lambda trace(X L X^H)` is solved by
//! conjugate gradients on its normal equations at tiny scale. The workhorse
//! restricts `X = U V_r^H` to the `r` smallest eigenvectors of `L`, where the
//! penalty becomes `lambda sum_i s_i ||u_i||^2` and CG runs on `r n` unknowns.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::acquisition::Operator;
use crate::error::{Error, Result};
use crate::laplacian::{laplacian_energy, GraphLaplacian};
use crate::linalg::to_complex;

/// Largest `pixels * frames` accepted by [`solve_full`] without override.
pub const FULL_SOLVE_LIMIT: usize = 100_000;

pub trait LinearModel {
    fn pixels(&self) -> usize;
    fn frames(&self) -> usize;
    fn forward(&self, x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>>;
    fn adjoint(&self, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>>;
    fn normal(&self, x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        self.adjoint(&self.forward(x)?)
    }
}

impl LinearModel for Operator {
    fn pixels(&self) -> usize {
        Operator::pixels(self)
    }
    fn frames(&self) -> usize {
        Operator::frames(self)
    }
    fn forward(&self, x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        Operator::forward(self, x)
    }
    fn adjoint(&self, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        Operator::adjoint(self, b)
    }
    fn normal(&self, x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        Operator::normal(self, x)
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedBasis {
    /// Frames x r, orthonormal columns.
    pub vectors: DMatrix<Complex64>,
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
}

impl TruncatedBasis {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn frames(&self) -> usize {
        self.vectors.nrows()
    }

    /// Multiplies column `i` by `phases[i]`.
    pub fn rephased(&self, phases: &[Complex64]) -> Self {
        let mut v = self.vectors.clone();
        for (mut c, p) in v.column_iter_mut().zip(phases) {
            c *= *p;
        }
        Self {
            vectors: v,
            values: self.values.clone(),
        }
    }
}

pub fn eigen_truncate(lap: &mut GraphLaplacian, r: usize) -> Result<TruncatedBasis> {
    let k = lap.frames();
    if r == 0 || r > k {
        return Err(Error::Input(format!("rank must be in 1..={k}, got {r}")));
    }
    let e = lap.eigen()?;
    Ok(TruncatedBasis {
        vectors: to_complex(&e.vectors.columns(0, r).into_owned()),
        values: e.values[..r].to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl CgOptions {
    pub const FULL: Self = Self { tol: 1e-8, max_iter: 500 };
    pub const TRUNCATED: Self = Self { tol: 1e-6, max_iter: 100 };
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgStep {
    pub iteration: usize,
    pub rel_residual: f64,
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: DMatrix<Complex64>,
    /// Expansion coefficients for truncated solves.
    pub coeffs: Option<DMatrix<Complex64>>,
    pub log: Vec<CgStep>,
    pub converged: bool,
}

fn dot(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn split(a: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (a.map(|v| v.re), a.map(|v| v.im))
}

/// Complex product through four real products.
pub fn cmul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    re.zip_map(&im, Complex64::new)
}

fn cmul_real(a: &DMatrix<Complex64>, l: &DMatrix<f64>) -> DMatrix<Complex64> {
    let (ar, ai) = split(a);
    (ar * l).zip_map(&(ai * l), Complex64::new)
}

/// CG for a Hermitian positive semidefinite operator, starting from zero.
/// `offset` is added to the logged energy `<x, G x> - 2 Re <x, rhs>`.
fn conjugate_gradient<F>(apply: F, rhs: &DMatrix<Complex64>, opts: CgOptions, offset: f64) -> Result<(DMatrix<Complex64>, Vec<CgStep>, bool)>
where
    F: Fn(&DMatrix<Complex64>) -> Result<DMatrix<Complex64>>,
{
    let mut x = DMatrix::zeros(rhs.nrows(), rhs.ncols());
    let bnorm = rhs.norm();
    if bnorm == 0.0 {
        return Ok((x, vec![], true));
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rs = r.norm_squared();
    let mut log = Vec::new();
    for it in 1..=opts.max_iter {
        let ap = apply(&p)?;
        let curv = dot(&p, &ap).re;
        if !(curv > 0.0) {
            if rs.sqrt() / bnorm < opts.tol {
                return Ok((x, log, true));
            }
            return Err(Error::Numerical(format!("non-positive curvature {curv:e} at CG iteration {it}")));
        }
        let alpha = rs / curv;
        x.zip_apply(&p, |xv, pv| *xv += pv * alpha);
        r.zip_apply(&ap, |rv, av| *rv -= av * alpha);
        let rs_new = r.norm_squared();
        let rel = rs_new.sqrt() / bnorm;
        let objective = offset - dot(&x, rhs).re - dot(&x, &r).re;
        log.push(CgStep {
            iteration: it,
            rel_residual: rel,
            objective,
        });
        if !rel.is_finite() {
            return Err(Error::Numerical(format!("CG diverged at iteration {it}")));
        }
        if rel < opts.tol {
            return Ok((x, log, true));
        }
        p = &r + &p * Complex64::new(rs_new / rs, 0.0);
        rs = rs_new;
    }
    Ok((x, log, false))
}

fn check_measurements(b: &DMatrix<Complex64>, frames: usize) -> Result<()> {
    if b.ncols() != frames {
        return Err(Error::Dimension(format!("measurements have {} frames, model has {frames}", b.ncols())));
    }
    if b.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Input("non-finite measurement".into()));
    }
    Ok(())
}

/// CG on `A^H A X + lambda X L = A^H B`.
pub fn solve_full<M: LinearModel>(
    model: &M,
    b: &DMatrix<Complex64>,
    lap: &GraphLaplacian,
    lambda: f64,
    opts: CgOptions,
    allow_large: bool,
) -> Result<Solution> {
    let (n, k) = (model.pixels(), model.frames());
    if !allow_large && n * k > FULL_SOLVE_LIMIT {
        return Err(Error::Guard(format!(
            "full solve on {n} pixels x {k} frames exceeds the {FULL_SOLVE_LIMIT} limit; use solve_truncated"
        )));
    }
    check_measurements(b, k)?;
    if lap.frames() != k {
        return Err(Error::Dimension(format!("Laplacian has {} frames, model has {k}", lap.frames())));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Input(format!("lambda must be >= 0, got {lambda}")));
    }
    let rhs = model.adjoint(b)?;
    let l = &lap.laplacian;
    let apply = |x: &DMatrix<Complex64>| -> Result<DMatrix<Complex64>> {
        let mut g = model.normal(x)?;
        if lambda != 0.0 {
            g += cmul_real(x, l) * Complex64::new(lambda, 0.0);
        }
        Ok(g)
    };
    let (x, log, converged) = conjugate_gradient(apply, &rhs, opts, b.norm_squared())?;
    Ok(Solution {
        x,
        coeffs: None,
        log,
        converged,
    })
}

/// CG on `G(U) = A^H A (U V^H) V + lambda U diag(s) = A^H(B) V`.
pub fn solve_truncated<M: LinearModel>(
    model: &M,
    b: &DMatrix<Complex64>,
    basis: &TruncatedBasis,
    lambda: f64,
    opts: CgOptions,
) -> Result<Solution> {
    let k = model.frames();
    check_measurements(b, k)?;
    if basis.frames() != k {
        return Err(Error::Dimension(format!("basis has {} frames, model has {k}", basis.frames())));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Input(format!("lambda must be >= 0, got {lambda}")));
    }
    let v = &basis.vectors;
    let vh = v.adjoint();
    let rhs = cmul(&model.adjoint(b)?, v);
    let penalty: Vec<f64> = basis.values.iter().map(|s| lambda * s).collect();
    let apply = |u: &DMatrix<Complex64>| -> Result<DMatrix<Complex64>> {
        let mut g = cmul(&model.normal(&cmul(u, &vh))?, v);
        for (mut c, (uc, s)) in g.column_iter_mut().zip(u.column_iter().zip(&penalty)) {
            c.axpy(Complex64::new(*s, 0.0), &uc, Complex64::new(1.0, 0.0));
        }
        Ok(g)
    };
    let (u, log, converged) = conjugate_gradient(apply, &rhs, opts, b.norm_squared())?;
    let x = cmul(&u, &vh);
    Ok(Solution {
        x,
        coeffs: Some(u),
        log,
        converged,
    })
}

/// `||A(X) - B||^2 + lambda trace(X L X^H)`.
pub fn full_objective<M: LinearModel>(model: &M, b: &DMatrix<Complex64>, x: &DMatrix<Complex64>, l: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    Ok((model.forward(x)? - b).norm_squared() + lambda * laplacian_energy(x, l))
}

pub fn nrmse(x: &DMatrix<Complex64>, truth: &DMatrix<Complex64>) -> Result<f64> {
    if x.shape() != truth.shape() {
        return Err(Error::Dimension(format!("shapes {:?} and {:?} differ", x.shape(), truth.shape())));
    }
    let t = truth.norm();
    if t == 0.0 {
        return Err(Error::Input("truth has zero norm".into()));
    }
    Ok((x - truth).norm() / t)
}

/// NRMSE restricted to the listed frames.
pub fn nrmse_frames(x: &DMatrix<Complex64>, truth: &DMatrix<Complex64>, frames: &[usize]) -> Result<f64> {
    if x.shape() != truth.shape() {
        return Err(Error::Dimension(format!("shapes {:?} and {:?} differ", x.shape(), truth.shape())));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &t in frames {
        num += (x.column(t) - truth.column(t)).norm_squared();
        den += truth.column(t).norm_squared();
    }
    if den == 0.0 {
        return Err(Error::Input("truth has zero norm on the selected frames".into()));
    }
    Ok((num / den).sqrt())
}
