//! Bandlimited level sets in low ambient dimension.
//!
//! A potential `psi(x) = sum_k c_k exp(j 2 pi k.x)` with finite support
//! `Lambda` defines the point set `psi(x) = 0`. For any rectangular
//! frequency box `Gamma` containing `Lambda`, every shift of the zero-padded
//! coefficients that stays inside `Gamma` annihilates the exponential
//! feature maps of those points, which bounds the rank of the feature
//! matrix (and of its Gram matrix) by `|Gamma| - |Gamma:Lambda|`.
//!
//! Frequencies are always enumerated lexicographically on `(k_1, .., k_n)`
//! with the last coordinate varying fastest.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const ROOT_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;
const CONJ_TOL: f64 = 1e-12;

pub type Freq = Vec<i64>;

#[derive(Clone, Debug)]
pub struct LevelSetModel {
    dim: usize,
    support: Vec<Freq>,
    coeffs: Vec<Complex64>,
}

impl LevelSetModel {
    pub fn new(dim: usize, support: Vec<Freq>, coeffs: Vec<Complex64>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::Input(format!("ambient dimension must be 2 or 3, got {dim}")));
        }
        if support.len() != coeffs.len() || support.is_empty() {
            return Err(Error::Input(format!(
                "{} frequencies but {} coefficients",
                support.len(),
                coeffs.len()
            )));
        }
        if support.iter().any(|k| k.len() != dim) {
            return Err(Error::Input("frequency vector length differs from ambient dimension".into()));
        }
        for (i, k) in support.iter().enumerate() {
            if support[..i].contains(k) {
                return Err(Error::Input(format!("duplicate frequency {k:?}")));
            }
        }
        if coeffs.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::Input("coefficients are identically zero".into()));
        }
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (k, c) in support.iter().zip(&coeffs) {
            let neg: Freq = k.iter().map(|&x| -x).collect();
            let pos = support.iter().position(|q| *q == neg).ok_or_else(|| {
                Error::Input(format!("support is not symmetric: {neg:?} missing"))
            })?;
            if (coeffs[pos] - c.conj()).norm() > CONJ_TOL * scale {
                return Err(Error::Input(format!("c at {neg:?} is not the conjugate of c at {k:?}")));
            }
        }
        Ok(Self { dim, support, coeffs })
    }

    /// Random real-valued potential with zero mean on the centered box of
    /// the given half-widths. Zero mean guarantees a sign change, hence a
    /// nonempty zero set.
    pub fn random_box(half_widths: &[usize], seed: u64) -> Result<Self> {
        let dim = half_widths.len();
        let support = box_frequencies(half_widths);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); support.len()];
        for (i, k) in support.iter().enumerate() {
            if k.iter().all(|&x| x == 0) {
                continue;
            }
            let neg: Freq = k.iter().map(|&x| -x).collect();
            let j = support.iter().position(|q| *q == neg).unwrap();
            if j < i {
                coeffs[i] = coeffs[j].conj();
            } else {
                coeffs[i] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        Self::new(dim, support, coeffs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[Freq] {
        &self.support
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval_complex(&self, x: &[f64]) -> Complex64 {
        self.support
            .iter()
            .zip(&self.coeffs)
            .map(|(k, c)| c * Complex64::cis(2.0 * PI * dot(k, x)))
            .sum()
    }

    pub fn eval_potential(&self, x: &[f64]) -> f64 {
        self.eval_complex(x).re
    }

    fn bounding_box(&self) -> (Vec<i64>, Vec<i64>) {
        let lo = (0..self.dim).map(|a| self.support.iter().map(|k| k[a]).min().unwrap()).collect();
        let hi = (0..self.dim).map(|a| self.support.iter().map(|k| k[a]).max().unwrap()).collect();
        (lo, hi)
    }
}

fn dot(k: &[i64], x: &[f64]) -> f64 {
    k.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum()
}

fn box_frequencies(half_widths: &[usize]) -> Vec<Freq> {
    let mut out: Vec<Freq> = vec![vec![]];
    for &h in half_widths {
        let h = h as i64;
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-h..=h).map(move |k| {
                    let mut p = prefix.clone();
                    p.push(k);
                    p
                })
            })
            .collect();
    }
    out
}

/// Points on the zero set by bisection along random chords of `[0,1)^n`.
///
/// Chord `i` draws its endpoints from stream `i` of a ChaCha generator
/// seeded with `seed`, so the result depends only on `(model, count, seed)`.
pub fn sample_levelset(m: &LevelSetModel, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    let n = m.dim;
    let mut points = DMatrix::zeros(n, count);
    let max_chords = 1000 + 200 * count as u64;
    let mut found = 0;
    let mut chord = 0u64;
    while found < count {
        if chord >= max_chords {
            return Err(Error::Sampling(format!(
                "only {found} of {count} zero crossings after {max_chords} chords; zero set may be empty"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chord);
        chord += 1;
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        if let Some(p) = bisect_chord(m, &a, &b) {
            points.column_mut(found).copy_from_slice(&p);
            found += 1;
        }
    }
    Ok(points)
}

fn bisect_chord(m: &LevelSetModel, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let at = |t: f64| -> Vec<f64> { a.iter().zip(b).map(|(&p, &q)| p + t * (q - p)).collect() };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let f_lo = m.eval_potential(a);
    let f_hi = m.eval_potential(b);
    if f_lo.abs() < ROOT_TOL {
        return Some(a.to_vec());
    }
    if f_hi.abs() < ROOT_TOL {
        return Some(b.to_vec());
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let p = at(mid);
        let f = m.eval_potential(&p);
        if f.abs() < ROOT_TOL {
            return Some(p);
        }
        if f.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weighting {
    None,
    /// Diagonal weights `exp(-pi^2 sigma^2 |k|^2)`.
    Gaussian { sigma: f64 },
}

/// Centered rectangular frequency box with optional Gaussian weighting.
#[derive(Clone, Debug)]
pub struct FeatureSupport {
    half_widths: Vec<usize>,
    weighting: Weighting,
    freqs: Vec<Freq>,
}

impl FeatureSupport {
    pub fn new(half_widths: Vec<usize>, weighting: Weighting) -> Result<Self> {
        if !(2..=3).contains(&half_widths.len()) {
            return Err(Error::Input(format!(
                "ambient dimension must be 2 or 3, got {}",
                half_widths.len()
            )));
        }
        if let Weighting::Gaussian { sigma } = weighting {
            if !(sigma > 0.0) {
                return Err(Error::Input(format!("gaussian weighting needs sigma > 0, got {sigma}")));
            }
        }
        let freqs = box_frequencies(&half_widths);
        Ok(Self { half_widths, weighting, freqs })
    }

    /// `extent x extent (x extent)` box; `extent` must be odd.
    pub fn cube(dim: usize, extent: usize, weighting: Weighting) -> Result<Self> {
        if extent.is_multiple_of(2) {
            return Err(Error::Input(format!("box extent must be odd, got {extent}")));
        }
        Self::new(vec![extent / 2; dim], weighting)
    }

    pub fn dim(&self) -> usize {
        self.half_widths.len()
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn frequencies(&self) -> &[Freq] {
        &self.freqs
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for (a, &h) in self.half_widths.iter().enumerate() {
            let h = h as i64;
            if k[a] < -h || k[a] > h {
                return None;
            }
            idx = idx * (2 * h as usize + 1) + (k[a] + h) as usize;
        }
        Some(idx)
    }

    pub fn contains_model(&self, m: &LevelSetModel) -> bool {
        m.dim == self.dim() && m.support.iter().all(|k| self.index_of(k).is_some())
    }

    fn weight(&self, k: &[i64]) -> f64 {
        match self.weighting {
            Weighting::None => 1.0,
            Weighting::Gaussian { sigma } => {
                let k2: f64 = k.iter().map(|&x| (x * x) as f64).sum();
                (-PI * PI * sigma * sigma * k2).exp()
            }
        }
    }

    /// All integer shifts `s` with `Lambda + s` inside the box.
    pub fn valid_shifts(&self, m: &LevelSetModel) -> Vec<Freq> {
        let (lo, hi) = m.bounding_box();
        let ranges: Vec<(i64, i64)> = self
            .half_widths
            .iter()
            .enumerate()
            .map(|(a, &h)| (-(h as i64) - lo[a], h as i64 - hi[a]))
            .collect();
        let mut out: Vec<Freq> = vec![vec![]];
        for &(a, b) in &ranges {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (a..=b).map(move |s| {
                        let mut p = prefix.clone();
                        p.push(s);
                        p
                    })
                })
                .collect();
        }
        out.retain(|s| s.len() == self.dim() && m.support.iter().all(|k| self.shifted_index(k, s).is_some()));
        out
    }

    fn shifted_index(&self, k: &[i64], s: &[i64]) -> Option<usize> {
        let ks: Freq = k.iter().zip(s).map(|(a, b)| a + b).collect();
        self.index_of(&ks)
    }

    /// Upper bound `|Gamma| - |Gamma:Lambda|` on the feature-matrix rank.
    pub fn rank_bound(&self, m: &LevelSetModel) -> usize {
        self.len().saturating_sub(self.valid_shifts(m).len())
    }

    /// Coefficients of `m` placed in this box, translated by `shift`.
    pub fn zero_padded(&self, m: &LevelSetModel, shift: &[i64]) -> Option<DVector<Complex64>> {
        let mut c = DVector::zeros(self.len());
        for (k, v) in m.support.iter().zip(&m.coeffs) {
            c[self.shifted_index(k, shift)?] = *v;
        }
        Some(c)
    }
}

pub fn feature_map(x: &[f64], s: &FeatureSupport) -> DVector<Complex64> {
    DVector::from_iterator(
        s.len(),
        s.freqs.iter().map(|k| Complex64::cis(2.0 * PI * dot(k, x)) * s.weight(k)),
    )
}

/// Column `i` is the feature map of point `i` (column `i` of `points`).
pub fn feature_matrix(points: &DMatrix<f64>, s: &FeatureSupport) -> DMatrix<Complex64> {
    let mut phi = DMatrix::zeros(s.len(), points.ncols());
    for (i, col) in points.column_iter().enumerate() {
        let x: Vec<f64> = col.iter().copied().collect();
        phi.set_column(i, &feature_map(&x, s));
    }
    phi
}

/// One-dimensional kernel `sum_{|k|<=h} w(k)^2 exp(j 2 pi k r)`.
fn axis_kernel(h: usize, r: f64, weighting: Weighting) -> f64 {
    let extent = (2 * h + 1) as f64;
    match weighting {
        Weighting::None => {
            let s = (PI * r).sin();
            if s.abs() < 1e-6 {
                // near an integer: sum directly, exact at r = 0
                if r == 0.0 {
                    return extent;
                }
                (-(h as i64)..=h as i64).map(|k| (2.0 * PI * k as f64 * r).cos()).sum()
            } else {
                (PI * extent * r).sin() / s
            }
        }
        Weighting::Gaussian { sigma } => {
            let a = 2.0 * PI * PI * sigma * sigma;
            1.0 + 2.0 * (1..=h as i64).map(|k| (-a * (k * k) as f64).exp() * (2.0 * PI * k as f64 * r).cos()).sum::<f64>()
        }
    }
}

/// Gram matrix `Phi^H Phi` via the separable shift-invariant kernel
/// (a product of Dirichlet kernels without weighting).
pub fn gram_matrix(points: &DMatrix<f64>, s: &FeatureSupport) -> DMatrix<Complex64> {
    let n = points.ncols();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v: f64 = s
                .half_widths
                .iter()
                .enumerate()
                .map(|(a, &h)| axis_kernel(h, points[(a, j)] - points[(a, i)], s.weighting))
                .product();
            k[(i, j)] = Complex64::new(v, 0.0);
            k[(j, i)] = Complex64::new(v, 0.0);
        }
    }
    k
}
