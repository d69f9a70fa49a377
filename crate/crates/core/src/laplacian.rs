//! Frame-similarity graph Laplacians.
//!
//! Two constructions: exponential weights on navigator distances under a
//! threshold or k-nearest-neighbour rule, and the iteratively reweighted
//! kernel low-rank estimate, which jointly denoises the navigators and
//! returns the Laplacian of its final reweighting.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, SymEig};

#[derive(Clone, Debug)]
pub struct GraphLaplacian {
    pub weights: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    /// More than one connected component among nonzero weights.
    pub disconnected: bool,
    pub eig: Option<SymEig>,
}

impl GraphLaplacian {
    /// Symmetrizes `w`, zeroes its diagonal and forms `L = D - W`.
    pub fn from_weights(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() || w.nrows() == 0 {
            return Err(Error::Dimension(format!("weight matrix is {}x{}", w.nrows(), w.ncols())));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite graph weight".into()));
        }
        let mut w = (&w + w.transpose()) * 0.5;
        w.fill_diagonal(0.0);
        let k = w.nrows();
        let mut l = -&w;
        for i in 0..k {
            l[(i, i)] = w.row(i).sum();
        }
        let disconnected = components(&w) > 1;
        Ok(Self {
            weights: w,
            laplacian: l,
            disconnected,
            eig: None,
        })
    }

    pub fn frames(&self) -> usize {
        self.weights.nrows()
    }

    pub fn eigen(&mut self) -> Result<&SymEig> {
        if self.eig.is_none() {
            self.eig = Some(sym_eig(&self.laplacian)?);
        }
        Ok(self.eig.as_ref().unwrap())
    }

    /// Largest absolute row sum of `L`, relative to its norm.
    pub fn row_sum_defect(&self) -> f64 {
        let scale = self.laplacian.norm().max(f64::MIN_POSITIVE);
        self.laplacian.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max) / scale
    }
}

fn components(w: &DMatrix<f64>) -> usize {
    let k = w.nrows();
    let mut seen = vec![false; k];
    let mut count = 0;
    for s in 0..k {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                if !seen[j] && w[(i, j)] != 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

/// Squared Euclidean distances between columns.
pub fn pairwise_sq_distances(z: &DMatrix<Complex64>) -> DMatrix<f64> {
    let k = z.ncols();
    let norms: Vec<f64> = z.column_iter().map(|c| c.norm_squared()).collect();
    let g = z.ad_mul(z);
    DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            0.0
        } else {
            (norms[i] + norms[j] - 2.0 * g[(i, j)].re).max(0.0)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NeighborRule {
    /// Keep pairs with distance below `t`.
    Threshold(f64),
    /// Keep each frame's `kappa` nearest others, then symmetrize by max.
    Knn(usize),
}

pub fn exp_weights(z: &DMatrix<Complex64>, sigma: f64, rule: NeighborRule) -> Result<GraphLaplacian> {
    if !(sigma > 0.0) {
        return Err(Error::Input(format!("sigma must be positive, got {sigma}")));
    }
    let k = z.ncols();
    let d2 = pairwise_sq_distances(z);
    let mut w = DMatrix::zeros(k, k);
    match rule {
        NeighborRule::Threshold(t) => {
            if !(t > 0.0) {
                return Err(Error::Input(format!("threshold must be positive, got {t}")));
            }
            for i in 0..k {
                for j in 0..k {
                    if i != j && d2[(i, j)].sqrt() < t {
                        w[(i, j)] = (-d2[(i, j)] / (sigma * sigma)).exp();
                    }
                }
            }
        }
        NeighborRule::Knn(kappa) => {
            if kappa == 0 {
                return Err(Error::Input("kNN rule needs kappa >= 1".into()));
            }
            for i in 0..k {
                let mut others: Vec<usize> = (0..k).filter(|&j| j != i).collect();
                others.sort_by(|&a, &b| d2[(i, a)].total_cmp(&d2[(i, b)]).then(a.cmp(&b)));
                for &j in others.iter().take(kappa) {
                    w[(i, j)] = (-d2[(i, j)] / (sigma * sigma)).exp();
                }
            }
            w = w.zip_map(&w.transpose(), f64::max);
        }
    }
    GraphLaplacian::from_weights(w)
}

pub fn gaussian_kernel_navs(r: &DMatrix<Complex64>, sigma: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::Input(format!("sigma must be positive, got {sigma}")));
    }
    let k = pairwise_sq_distances(r).map(|d| (-d / (sigma * sigma)).exp());
    if k.iter().any(|v| v.is_nan()) {
        return Err(Error::Input("NaN in navigator kernel".into()));
    }
    Ok(k)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AutoSigma {
    pub sigma: f64,
    /// All distances were zero and `sigma` is a tiny placeholder.
    pub fallback: bool,
}

/// Median pairwise column distance.
pub fn auto_sigma(z: &DMatrix<Complex64>) -> Result<AutoSigma> {
    let k = z.ncols();
    if k < 2 {
        return Err(Error::Input("need at least two frames for a median distance".into()));
    }
    let d2 = pairwise_sq_distances(z);
    let mut d: Vec<f64> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).map(|(i, j)| d2[(i, j)].sqrt()).collect();
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let med = if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) };
    if med > 0.0 {
        return Ok(AutoSigma { sigma: med, fallback: false });
    }
    let max = d[n - 1];
    if max > 0.0 {
        return Ok(AutoSigma { sigma: max, fallback: false });
    }
    let scale = z.norm().max(1.0);
    Ok(AutoSigma {
        sigma: f64::EPSILON.sqrt() * scale,
        fallback: true,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sigma {
    MedianAuto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IrlsParams {
    pub sigma: Sigma,
    /// Signal-update weight; multiplied by `sigma^2` when `mu_relative`.
    pub mu: f64,
    pub mu_relative: bool,
    /// Initial regularizer; `None` selects `100 * mean(eig(K0)) / k`.
    pub gamma0: Option<f64>,
    pub eta: f64,
    pub iterations: usize,
    /// Drop negative weights after each reweighting.
    pub clip_negative: bool,
}

impl Default for IrlsParams {
    fn default() -> Self {
        Self {
            sigma: Sigma::MedianAuto,
            mu: 1.0,
            mu_relative: true,
            gamma0: None,
            eta: 1.5,
            iterations: 10,
            clip_negative: false,
        }
    }
}

impl IrlsParams {
    pub fn validate(&self) -> Result<()> {
        if let Sigma::Fixed(s) = self.sigma {
            if !(s > 0.0) {
                return Err(Error::Input(format!("sigma must be positive, got {s}")));
            }
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::Input(format!("mu must be finite and >= 0, got {}", self.mu)));
        }
        if let Some(g) = self.gamma0 {
            if !(g > 0.0) {
                return Err(Error::Input(format!("gamma0 must be positive, got {g}")));
            }
        }
        if !(self.eta >= 1.0) {
            return Err(Error::Input(format!("eta must be >= 1, got {}", self.eta)));
        }
        if self.iterations == 0 {
            return Err(Error::Input("need at least one outer iteration".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IrlsIteration {
    pub n: usize,
    pub gamma: f64,
    /// `||R - Z||^2 + mu trace(R L R^H)` at the new iterate.
    pub cost: f64,
    /// `||2 (R - Z) + 2 mu R L||_F / ||Z||_F`.
    pub stationarity: f64,
}

pub struct IrlsResult {
    pub denoised: DMatrix<Complex64>,
    pub laplacian: GraphLaplacian,
    pub trace: Vec<IrlsIteration>,
    pub sigma: f64,
    pub mu: f64,
    pub sigma_fallback: bool,
}

/// `(K + gamma I)^{-1/2}` with the spectrum of `K` floored at zero.
pub fn inverse_sqrt_shifted(k: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    let e = sym_eig(k)?;
    let s = DVector::from_iterator(e.values.len(), e.values.iter().map(|&v| (v.max(0.0) + gamma).powf(-0.5)));
    let scaled = DMatrix::from_fn(e.vectors.nrows(), e.vectors.ncols(), |i, j| e.vectors[(i, j)] * s[j]);
    Ok(scaled * e.vectors.transpose())
}

/// Weights `-(1/sigma^2) K .* P`, symmetrized, zero diagonal.
pub fn reweight(k: &DMatrix<f64>, p: &DMatrix<f64>, sigma: f64, clip: bool) -> Result<GraphLaplacian> {
    let mut w = k.component_mul(p) * (-1.0 / (sigma * sigma));
    if clip {
        w.apply(|v| *v = v.max(0.0));
    }
    GraphLaplacian::from_weights(w)
}

/// Closed-form minimizer of `||R - Z||^2 + mu trace(R L R^H)`: `Z (I + mu L)^{-1}`.
pub fn signal_update(z: &DMatrix<Complex64>, l: &DMatrix<f64>, mu: f64) -> Result<DMatrix<Complex64>> {
    let k = l.nrows();
    let m = DMatrix::identity(k, k) + l * mu;
    let inv = match m.clone().cholesky() {
        Some(c) => c.inverse(),
        None => {
            let lu = m.lu();
            lu.try_inverse()
                .ok_or_else(|| Error::Numerical("I + mu L is singular".into()))?
        }
    };
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("I + mu L is numerically singular".into()));
    }
    let re = z.map(|v| v.re) * &inv;
    let im = z.map(|v| v.im) * &inv;
    Ok(re.zip_map(&im, Complex64::new))
}

/// `trace(R L R^H)` for real symmetric `L`.
pub fn laplacian_energy(r: &DMatrix<Complex64>, l: &DMatrix<f64>) -> f64 {
    let re = r.map(|v| v.re);
    let im = r.map(|v| v.im);
    (&re * l).component_mul(&re).sum() + (&im * l).component_mul(&im).sum()
}

fn times_real(r: &DMatrix<Complex64>, l: &DMatrix<f64>) -> DMatrix<Complex64> {
    let re = r.map(|v| v.re) * l;
    let im = r.map(|v| v.im) * l;
    re.zip_map(&im, Complex64::new)
}

pub fn irls_estimate(z: &DMatrix<Complex64>, p: &IrlsParams) -> Result<IrlsResult> {
    p.validate()?;
    if z.is_empty() {
        return Err(Error::Input("empty navigator matrix".into()));
    }
    if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Input("non-finite navigator sample".into()));
    }
    let k = z.ncols();
    let (sigma, sigma_fallback) = match p.sigma {
        Sigma::Fixed(s) => (s, false),
        Sigma::MedianAuto if k >= 2 => {
            let a = auto_sigma(z)?;
            (a.sigma, a.fallback)
        }
        Sigma::MedianAuto => (1.0, true),
    };
    let mu = if p.mu_relative { p.mu * sigma * sigma } else { p.mu };
    let znorm = z.norm().max(f64::MIN_POSITIVE);
    let mut r = z.clone();
    let mut gamma = p.gamma0;
    let mut trace = Vec::with_capacity(p.iterations);
    let mut lap = None;
    for n in 1..=p.iterations {
        let kern = gaussian_kernel_navs(&r, sigma)?;
        let g = *gamma.get_or_insert_with(|| 100.0 * kern.trace() / (k * k) as f64);
        let pm = inverse_sqrt_shifted(&kern, g)?;
        let gl = reweight(&kern, &pm, sigma, p.clip_negative)?;
        r = signal_update(z, &gl.laplacian, mu)?;
        let diff = &r - z;
        let cost = diff.norm_squared() + mu * laplacian_energy(&r, &gl.laplacian);
        let grad = diff * Complex64::new(2.0, 0.0) + times_real(&r, &gl.laplacian) * Complex64::new(2.0 * mu, 0.0);
        trace.push(IrlsIteration {
            n,
            gamma: g,
            cost,
            stationarity: grad.norm() / znorm,
        });
        lap = Some(gl);
        gamma = Some(g / p.eta);
    }
    Ok(IrlsResult {
        denoised: r,
        laplacian: lap.unwrap(),
        trace,
        sigma,
        mu,
        sigma_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{add_noise, extract_navigators, forward, noise_std_for_snr, AcquisitionSpec, SamplingMode};
    use crate::phantom::{make_phantom, raised_cosine_coils, PhantomSpec};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_navs(rows: usize, k: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, k, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn phantom_navs(k: usize, snr: Option<f64>) -> (DMatrix<Complex64>, DMatrix<Complex64>, Vec<f64>, Vec<f64>) {
        let ps = PhantomSpec::from_rates(32, k, 48.73, 11.47, 0.06, vec![], 21).unwrap();
        let ph = make_phantom(&ps).unwrap();
        let maps = raised_cosine_coils(32, 4).unwrap();
        let a = AcquisitionSpec::golden(32, k, 10, 4, 32, maps, 0.0, SamplingMode::CartesianMask).unwrap();
        let clean = forward(&ph.truth, &a).unwrap();
        let zc = extract_navigators(&clean, &a).unwrap();
        let zn = match snr {
            Some(db) => {
                let noisy = add_noise(&clean, noise_std_for_snr(&clean, db), 5).unwrap();
                extract_navigators(&noisy, &a).unwrap()
            }
            None => zc.clone(),
        };
        (zn, zc, ph.theta_c, ph.theta_r)
    }

    fn assert_laplacian_invariants(g: &GraphLaplacian) {
        let l = &g.laplacian;
        assert!((l - l.transpose()).norm() <= 1e-12 * l.norm().max(1.0));
        assert!(g.row_sum_defect() < 1e-10);
        let ones = DVector::from_element(g.frames(), 1.0);
        assert!((l * ones).norm() <= 1e-10 * l.norm().max(1.0));
    }

    #[test]
    fn identical_columns_get_unit_weight() {
        let mut z = random_navs(6, 5, 1);
        let c0 = z.column(0).into_owned();
        z.set_column(1, &c0);
        for rule in [NeighborRule::Threshold(10.0), NeighborRule::Knn(1), NeighborRule::Knn(3)] {
            let g = exp_weights(&z, 0.7, rule).unwrap();
            assert_eq!(g.weights[(0, 1)], 1.0);
            assert_laplacian_invariants(&g);
        }
    }

    #[test]
    fn tiny_threshold_gives_empty_graph() {
        let z = random_navs(6, 5, 2);
        let g = exp_weights(&z, 1.0, NeighborRule::Threshold(1e-6)).unwrap();
        assert_eq!(g.weights, DMatrix::zeros(5, 5));
        assert_eq!(g.laplacian, DMatrix::zeros(5, 5));
        assert!(g.disconnected);
    }

    #[test]
    fn knn_is_symmetric_and_exponential() {
        let z = random_navs(4, 12, 3);
        let g = exp_weights(&z, 0.9, NeighborRule::Knn(2)).unwrap();
        assert_eq!(g.weights, g.weights.transpose());
        let d2 = pairwise_sq_distances(&z);
        for i in 0..12 {
            assert!(g.weights.row(i).iter().filter(|&&w| w > 0.0).count() >= 2);
            for j in 0..12 {
                let w = g.weights[(i, j)];
                if w > 0.0 {
                    assert!((w - (-d2[(i, j)] / 0.81).exp()).abs() < 1e-14);
                }
            }
        }
        assert!(exp_weights(&z, 0.0, NeighborRule::Knn(2)).is_err());
        assert!(exp_weights(&z, 1.0, NeighborRule::Knn(0)).is_err());
    }

    #[test]
    fn knn_neighbours_follow_latent_phase() {
        let (z, _, tc, tr) = phantom_navs(120, None);
        let sigma = auto_sigma(&z).unwrap().sigma;
        let g = exp_weights(&z, sigma, NeighborRule::Knn(2)).unwrap();
        let d2 = pairwise_sq_distances(&z);
        // The scene depends on the phases through the blood-pool scale
        // 0.3 cos(theta_c) of a 0.15-radius pool and the 0.06 sin(theta_r)
        // displacement; compare neighbours in that motion state.
        let state: Vec<(f64, f64)> = tc.iter().zip(&tr).map(|(c, r)| (0.045 * c.cos(), 0.06 * r.sin())).collect();
        let mut good = 0;
        for i in 0..120 {
            let mut nav: Vec<usize> = (0..120).filter(|&j| j != i).collect();
            nav.sort_by(|&a, &b| d2[(i, a)].total_cmp(&d2[(i, b)]));
            let mut lat: Vec<usize> = (0..120).filter(|&j| j != i).collect();
            let pd = |j: usize| (state[i].0 - state[j].0).hypot(state[i].1 - state[j].1);
            lat.sort_by(|&a, &b| pd(a).total_cmp(&pd(b)));
            if nav[..2].iter().all(|j| lat[..6].contains(j)) {
                good += 1;
            }
            assert!(g.weights[(i, nav[0])] > 0.0);
        }
        assert!(good as f64 >= 0.9 * 120.0, "{good}");
    }

    #[test]
    fn kernel_examples() {
        let z = random_navs(3, 1, 4);
        assert_eq!(gaussian_kernel_navs(&z, 1.0).unwrap(), DMatrix::from_element(1, 1, 1.0));
        let z = DMatrix::from_row_slice(1, 2, &[Complex64::new(0.0, 0.0), Complex64::new(0.0, 2.0)]);
        let k = gaussian_kernel_navs(&z, 2.0).unwrap();
        assert!((k[(0, 1)] - 0.367879441171).abs() < 1e-11);
        let z = random_navs(5, 40, 5);
        let k = gaussian_kernel_navs(&z, 0.8).unwrap();
        assert_eq!(k, k.transpose());
        assert!(k.diagonal().iter().all(|&v| v == 1.0));
        assert!(sym_eig(&k).unwrap().values[0] > -1e-10);
    }

    #[test]
    fn auto_sigma_cases() {
        let z = DMatrix::from_row_slice(1, 2, &[Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)]);
        assert_eq!(auto_sigma(&z).unwrap(), AutoSigma { sigma: 2.0, fallback: false });
        let z = DMatrix::from_element(3, 4, Complex64::new(1.0, 1.0));
        assert!(auto_sigma(&z).unwrap().fallback);
        assert!(auto_sigma(&DMatrix::zeros(3, 1)).is_err());
        let (z, _, _, _) = phantom_navs(40, None);
        let s = auto_sigma(&z).unwrap().sigma;
        let d = pairwise_sq_distances(&z);
        let off: Vec<f64> = (0..40).flat_map(|i| (i + 1..40).map(move |j| (i, j))).map(|(i, j)| d[(i, j)].sqrt()).collect();
        assert!(off.iter().any(|&x| x <= s) && off.iter().any(|&x| x >= s));
    }

    #[test]
    fn irls_mu_zero_is_identity() {
        let z = random_navs(8, 15, 6);
        let p = IrlsParams { mu: 0.0, ..Default::default() };
        let out = irls_estimate(&z, &p).unwrap();
        assert_eq!(out.denoised, z);
    }

    #[test]
    fn irls_identical_columns_stay_identical() {
        let mut z = random_navs(8, 15, 7);
        let c = z.column(0).into_owned();
        z.set_column(1, &c);
        let out = irls_estimate(&z, &IrlsParams::default()).unwrap();
        assert!((out.denoised.column(0) - out.denoised.column(1)).norm() < 1e-10 * z.norm());
        assert_laplacian_invariants(&out.laplacian);
    }

    #[test]
    fn irls_stationarity_every_iteration() {
        let (z, _, _, _) = phantom_navs(60, Some(20.0));
        let out = irls_estimate(&z, &IrlsParams::default()).unwrap();
        assert_eq!(out.trace.len(), 10);
        for it in &out.trace {
            assert!(it.stationarity < 1e-8, "{it:?}");
        }
        for w in out.trace.windows(2) {
            assert!((w[1].gamma - w[0].gamma / 1.5).abs() < 1e-15);
        }
        assert!((out.trace[0].gamma - 100.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn irls_three_clusters_are_block_dominant() {
        let base = random_navs(10, 3, 8);
        let k = 30;
        let z = DMatrix::from_fn(10, k, |i, j| base[(i, j % 3)]);
        let out = irls_estimate(&z, &IrlsParams::default()).unwrap();
        let w = &out.laplacian.weights;
        let (mut within, mut cross) = (f64::INFINITY, 0.0f64);
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                if i % 3 == j % 3 {
                    within = within.min(w[(i, j)]);
                } else {
                    cross = cross.max(w[(i, j)].abs());
                }
            }
        }
        assert!(within > 10.0 * cross, "within {within} cross {cross}");
    }

    #[test]
    fn irls_denoises_phantom_navigators() {
        let (z, zc, _, _) = phantom_navs(100, Some(20.0));
        let out = irls_estimate(&z, &IrlsParams::default()).unwrap();
        assert!((&out.denoised - &zc).norm() < (&z - &zc).norm());
    }

    #[test]
    fn reweighting_favours_close_frames() {
        let (z, _, _, _) = phantom_navs(80, None);
        let sigma = auto_sigma(&z).unwrap().sigma;
        let k = gaussian_kernel_navs(&z, sigma).unwrap();
        let p = inverse_sqrt_shifted(&k, 100.0 / 80.0).unwrap();
        let g = reweight(&k, &p, sigma, false).unwrap();
        let d = pairwise_sq_distances(&z);
        let (mut w, mut nd) = (vec![], vec![]);
        for i in 0..80 {
            for j in i + 1..80 {
                w.push(g.weights[(i, j)]);
                nd.push(-d[(i, j)]);
            }
        }
        assert!(spearman(&w, &nd) > 0.5);
    }

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        let (ra, rb) = (ranks(a), ranks(b));
        let m = (a.len() as f64 - 1.0) / 2.0;
        let num: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - m) * (y - m)).sum();
        let den: f64 = ra.iter().map(|x| (x - m).powi(2)).sum();
        num / den
    }

    #[test]
    fn surrogate_non_increasing_at_fixed_weights() {
        let (z, _, _, _) = phantom_navs(60, Some(20.0));
        let sigma = auto_sigma(&z).unwrap().sigma;
        let mu = 0.05 * sigma * sigma;
        let gamma = 100.0 / 60.0;
        let surrogate = |r: &DMatrix<Complex64>, p: &DMatrix<f64>| {
            let k = gaussian_kernel_navs(r, sigma).unwrap();
            (r - &z).norm_squared() + 0.5 * mu * k.component_mul(p).sum()
        };
        let mut r = z.clone();
        for _ in 0..5 {
            let k = gaussian_kernel_navs(&r, sigma).unwrap();
            let p = inverse_sqrt_shifted(&k, gamma).unwrap();
            let g = reweight(&k, &p, sigma, false).unwrap();
            let next = signal_update(&z, &g.laplacian, mu).unwrap();
            assert!(surrogate(&next, &p) <= surrogate(&r, &p) + 1e-12 * surrogate(&r, &p).abs());
            r = next;
        }
    }

    #[test]
    fn params_validation() {
        let z = random_navs(3, 5, 9);
        for bad in [
            IrlsParams { eta: 0.5, ..Default::default() },
            IrlsParams { iterations: 0, ..Default::default() },
            IrlsParams { gamma0: Some(0.0), ..Default::default() },
            IrlsParams { sigma: Sigma::Fixed(-1.0), ..Default::default() },
        ] {
            assert!(irls_estimate(&z, &bad).is_err());
        }
        assert!(irls_estimate(&DMatrix::zeros(0, 0), &IrlsParams::default()).is_err());
    }
}
