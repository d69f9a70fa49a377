//! Navigated golden-angle multi-coil acquisition.
//!
//! Every frame acquires `L` radial spokes of `M` samples: the fixed
//! navigator spokes first, then `L - nav_count` golden-angle spokes whose
//! angle counter runs continuously across frames. Sample `m` of a spoke at
//! angle `a` sits at radius `(m - M/2) N / M` in cycles per field of view,
//! i.e. at `(kr cos a, kr sin a)`.
//!
//! Transform convention (unnormalized, centered on the image):
//! `y(kx, ky) = sum_{iy, ix} x[iy, ix] exp(-j 2 pi (kx (ix - N/2) + ky (iy - N/2)) / N)`.
//! The adjoint is the conjugate sum under the plain unweighted inner product.
//!
//! Measurements form a matrix with one column per frame; row
//! `coil * (L M) + spoke * M + m`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fft2::Fft2;

pub const GOLDEN_ANGLE_DEG: f64 = 111.246117975;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMode {
    /// Exact direct nonuniform DFT at the spoke sample locations.
    RadialNudft,
    /// Grid FFT sampled at the nearest grid point of every spoke sample.
    CartesianMask,
}

impl SamplingMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "radial_nudft" => Ok(Self::RadialNudft),
            "cartesian_mask" => Ok(Self::CartesianMask),
            _ => Err(Error::Input(format!("unknown sampling mode {s:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::RadialNudft => "radial_nudft",
            Self::CartesianMask => "cartesian_mask",
        }
    }
}

/// Navigator angles in degrees for 1, 2 or 4 navigators.
pub fn nav_angles_for_count(count: usize) -> Result<Vec<f64>> {
    match count {
        1 => Ok(vec![0.0]),
        2 => Ok(vec![0.0, 90.0]),
        4 => Ok(vec![0.0, 45.0, 90.0, 135.0]),
        _ => Err(Error::Input(format!("navigator count must be 1, 2 or 4, got {count}"))),
    }
}

#[derive(Clone, Debug)]
pub struct AcquisitionSpec {
    pub grid: usize,
    pub lines_per_frame: usize,
    pub nav_angles: Vec<f64>,
    /// Per frame, the `L - nav_count` golden-angle spoke angles in degrees.
    pub golden_angles: Vec<Vec<f64>>,
    pub samples_per_spoke: usize,
    /// Spoke half-length as a fraction of the Nyquist radius `N/2`.
    pub kspace_extent: f64,
    /// Pixels x coils.
    pub coil_maps: DMatrix<Complex64>,
    pub noise_std: f64,
    pub mode: SamplingMode,
}

impl AcquisitionSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn golden(
        grid: usize,
        frames: usize,
        lines_per_frame: usize,
        nav_count: usize,
        samples_per_spoke: usize,
        coil_maps: DMatrix<Complex64>,
        noise_std: f64,
        mode: SamplingMode,
    ) -> Result<Self> {
        let nav_angles = nav_angles_for_count(nav_count)?;
        if lines_per_frame <= nav_count {
            return Err(Error::Input(format!(
                "lines per frame ({lines_per_frame}) must exceed navigator count ({nav_count})"
            )));
        }
        let per = lines_per_frame - nav_count;
        let golden_angles = (0..frames)
            .map(|t| {
                (0..per)
                    .map(|s| ((t * per + s + 1) as f64 * GOLDEN_ANGLE_DEG).rem_euclid(360.0))
                    .collect()
            })
            .collect();
        let spec = Self {
            grid,
            lines_per_frame,
            nav_angles,
            golden_angles,
            samples_per_spoke,
            kspace_extent: 1.0,
            coil_maps,
            noise_std,
            mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn frames(&self) -> usize {
        self.golden_angles.len()
    }

    pub fn nav_count(&self) -> usize {
        self.nav_angles.len()
    }

    pub fn coils(&self) -> usize {
        self.coil_maps.ncols()
    }

    pub fn pixels(&self) -> usize {
        self.grid * self.grid
    }

    /// Samples per coil per frame, `L * M`.
    pub fn samples_per_frame(&self) -> usize {
        self.lines_per_frame * self.samples_per_spoke
    }

    pub fn measurement_rows(&self) -> usize {
        self.coils() * self.samples_per_frame()
    }

    /// The same acquisition restricted to frames `start..start + count`.
    pub fn frame_window(&self, start: usize, count: usize) -> Result<Self> {
        if count == 0 || start + count > self.frames() {
            return Err(Error::Dimension(format!(
                "frame window {start}+{count} outside {} frames",
                self.frames()
            )));
        }
        let mut out = self.clone();
        out.golden_angles = self.golden_angles[start..start + count].to_vec();
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 || !self.grid.is_multiple_of(2) {
            return Err(Error::Input(format!("grid must be even, got {}", self.grid)));
        }
        if self.samples_per_spoke == 0 {
            return Err(Error::Input("samples per spoke must be positive".into()));
        }
        if self.golden_angles.is_empty() {
            return Err(Error::Input("acquisition has no frames".into()));
        }
        let per = self.lines_per_frame.saturating_sub(self.nav_count());
        if self.nav_angles.is_empty() || per == 0 {
            return Err(Error::Input("need navigator and golden-angle spokes in every frame".into()));
        }
        if self.golden_angles.iter().any(|g| g.len() != per) {
            return Err(Error::Input(format!("every frame needs {per} golden-angle spokes")));
        }
        if self.coil_maps.nrows() != self.pixels() || self.coil_maps.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "coil maps are {}x{}, expected {} pixels",
                self.coil_maps.nrows(),
                self.coil_maps.ncols(),
                self.pixels()
            )));
        }
        for p in 0..self.pixels() {
            let ss: f64 = self.coil_maps.row(p).iter().map(|c| c.norm_sqr()).sum();
            if !(ss > 0.0) || !ss.is_finite() {
                return Err(Error::Input(format!("coil maps jointly vanish or are non-finite at pixel {p}")));
            }
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Input(format!("noise std must be >= 0, got {}", self.noise_std)));
        }
        if !(self.kspace_extent > 0.0) || !self.kspace_extent.is_finite() {
            return Err(Error::Input(format!("k-space extent must be positive, got {}", self.kspace_extent)));
        }
        Ok(())
    }

    /// Spoke angles of frame `t`, navigators first.
    pub fn frame_angles(&self, t: usize) -> Vec<f64> {
        self.nav_angles.iter().chain(&self.golden_angles[t]).copied().collect()
    }

    /// k-space sample locations of frame `t` in cycles per field of view.
    pub fn frame_points(&self, t: usize) -> Vec<(f64, f64)> {
        let m = self.samples_per_spoke;
        let scale = self.kspace_extent * self.grid as f64 / m as f64;
        let mut pts = Vec::with_capacity(self.samples_per_frame());
        for a in self.frame_angles(t) {
            let (s, c) = a.to_radians().sin_cos();
            for i in 0..m {
                let kr = (i as f64 - (m / 2) as f64) * scale;
                pts.push((kr * c, kr * s));
            }
        }
        pts
    }
}

/// Compiled forward model: validated trajectory plus per-frame lookup tables.
pub struct Operator {
    acq: AcquisitionSpec,
    points: Vec<Vec<(f64, f64)>>,
    cells: Vec<Vec<usize>>,
    sign: Vec<f64>,
}

impl Operator {
    pub fn new(acq: &AcquisitionSpec) -> Result<Self> {
        acq.validate()?;
        let n = acq.grid;
        let half = n as f64 / 2.0;
        let points: Vec<Vec<(f64, f64)>> = (0..acq.frames()).map(|t| acq.frame_points(t)).collect();
        for (t, pts) in points.iter().enumerate() {
            if let Some(p) = pts.iter().find(|p| p.0.abs() > half + 1e-9 || p.1.abs() > half + 1e-9) {
                return Err(Error::Trajectory(format!(
                    "frame {t}: sample ({:.3}, {:.3}) outside the Nyquist box |k| <= {half}",
                    p.0, p.1
                )));
            }
        }
        let wrap = |k: f64| (k.round() as i64).rem_euclid(n as i64) as usize;
        let cells = points
            .iter()
            .map(|pts| pts.iter().map(|&(kx, ky)| wrap(ky) * n + wrap(kx)).collect())
            .collect();
        let sign = (0..n * n)
            .map(|q| if (q / n + q % n).is_multiple_of(2) { 1.0 } else { -1.0 })
            .collect();
        Ok(Self {
            acq: acq.clone(),
            points,
            cells,
            sign,
        })
    }

    pub fn spec(&self) -> &AcquisitionSpec {
        &self.acq
    }

    pub fn frames(&self) -> usize {
        self.acq.frames()
    }

    pub fn pixels(&self) -> usize {
        self.acq.pixels()
    }

    pub fn points(&self, t: usize) -> &[(f64, f64)] {
        &self.points[t]
    }

    /// Flattened grid index `qy * N + qx` of every sample of frame `t`
    /// (nearest grid point, wrapped into FFT order).
    pub fn cells(&self, t: usize) -> &[usize] {
        &self.cells[t]
    }

    fn check_images(&self, x: &DMatrix<Complex64>) -> Result<()> {
        if x.nrows() != self.pixels() || x.ncols() != self.frames() {
            return Err(Error::Dimension(format!(
                "image series is {}x{}, acquisition expects {}x{}",
                x.nrows(),
                x.ncols(),
                self.pixels(),
                self.frames()
            )));
        }
        Ok(())
    }

    fn check_measurements(&self, b: &DMatrix<Complex64>) -> Result<()> {
        if b.nrows() != self.acq.measurement_rows() || b.ncols() != self.frames() {
            return Err(Error::Dimension(format!(
                "measurements are {}x{}, acquisition expects {}x{}",
                b.nrows(),
                b.ncols(),
                self.acq.measurement_rows(),
                self.frames()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        self.check_images(x)?;
        let s = self.acq.samples_per_frame();
        let mut b = DMatrix::zeros(self.acq.measurement_rows(), self.frames());
        let mut fft = Fft2::new(self.acq.grid);
        let mut img = vec![Complex64::default(); self.pixels()];
        for t in 0..self.frames() {
            let xt = x.column(t);
            let mut col = b.column_mut(t);
            for j in 0..self.acq.coils() {
                let cj = self.acq.coil_maps.column(j);
                for p in 0..img.len() {
                    img[p] = cj[p] * xt[p];
                }
                let out = &mut col.as_mut_slice()[j * s..(j + 1) * s];
                match self.acq.mode {
                    SamplingMode::CartesianMask => {
                        fft.forward(&mut img);
                        for (o, &q) in out.iter_mut().zip(&self.cells[t]) {
                            *o = img[q] * self.sign[q];
                        }
                    }
                    SamplingMode::RadialNudft => self.nudft(&img, t, out),
                }
            }
        }
        Ok(b)
    }

    pub fn adjoint(&self, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        self.check_measurements(b)?;
        let mut x = DMatrix::zeros(self.pixels(), self.frames());
        let mut fft = Fft2::new(self.acq.grid);
        let mut img = vec![Complex64::default(); self.pixels()];
        for t in 0..self.frames() {
            self.adjoint_frame(b.column(t).as_slice(), t, &mut fft, &mut img, x.column_mut(t).as_mut_slice());
        }
        Ok(x)
    }

    fn adjoint_frame(&self, bt: &[Complex64], t: usize, fft: &mut Fft2, img: &mut [Complex64], out: &mut [Complex64]) {
        let s = self.acq.samples_per_frame();
        for j in 0..self.acq.coils() {
            let data = &bt[j * s..(j + 1) * s];
            img.fill(Complex64::default());
            match self.acq.mode {
                SamplingMode::CartesianMask => {
                    for (v, &q) in data.iter().zip(&self.cells[t]) {
                        img[q] += v * self.sign[q];
                    }
                    fft.inverse(img);
                }
                SamplingMode::RadialNudft => self.nudft_adjoint(data, t, img),
            }
            let cj = self.acq.coil_maps.column(j);
            for p in 0..img.len() {
                out[p] += cj[p].conj() * img[p];
            }
        }
    }

    /// `A^H A x`, using a sampling-multiplicity mask in Cartesian mode.
    pub fn normal(&self, x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        self.check_images(x)?;
        if self.acq.mode == SamplingMode::RadialNudft {
            return self.adjoint(&self.forward(x)?);
        }
        let npix = self.pixels();
        let mut out = DMatrix::zeros(npix, self.frames());
        let mut fft = Fft2::new(self.acq.grid);
        let mut img = vec![Complex64::default(); npix];
        let mut mult = vec![0.0; npix];
        for t in 0..self.frames() {
            mult.fill(0.0);
            for &q in &self.cells[t] {
                mult[q] += 1.0;
            }
            let xt = x.column(t);
            let mut ot = out.column_mut(t);
            for j in 0..self.acq.coils() {
                let cj = self.acq.coil_maps.column(j);
                for p in 0..npix {
                    img[p] = cj[p] * xt[p];
                }
                fft.forward(&mut img);
                for (v, m) in img.iter_mut().zip(&mult) {
                    *v *= *m;
                }
                fft.inverse(&mut img);
                for p in 0..npix {
                    ot[p] += cj[p].conj() * img[p];
                }
            }
        }
        Ok(out)
    }

    fn axis_phases(&self, k: f64) -> Vec<Complex64> {
        let n = self.acq.grid;
        let half = (n / 2) as f64;
        (0..n)
            .map(|i| Complex64::from_polar(1.0, -2.0 * PI * k * (i as f64 - half) / n as f64))
            .collect()
    }

    fn nudft(&self, img: &[Complex64], t: usize, out: &mut [Complex64]) {
        let n = self.acq.grid;
        for (o, &(kx, ky)) in out.iter_mut().zip(&self.points[t]) {
            let ex = self.axis_phases(kx);
            let ey = self.axis_phases(ky);
            let mut acc = Complex64::default();
            for iy in 0..n {
                let row = &img[iy * n..(iy + 1) * n];
                let inner: Complex64 = row.iter().zip(&ex).map(|(a, b)| a * b).sum();
                acc += ey[iy] * inner;
            }
            *o = acc;
        }
    }

    fn nudft_adjoint(&self, data: &[Complex64], t: usize, img: &mut [Complex64]) {
        let n = self.acq.grid;
        for (v, &(kx, ky)) in data.iter().zip(&self.points[t]) {
            let ex = self.axis_phases(kx);
            let ey = self.axis_phases(ky);
            for iy in 0..n {
                let w = v * ey[iy].conj();
                for (p, e) in img[iy * n..(iy + 1) * n].iter_mut().zip(&ex) {
                    *p += w * e.conj();
                }
            }
        }
    }

    /// Non-iterative baseline: density-compensated adjoint followed by a
    /// sensitivity-weighted coil combination. Cartesian mode divides each
    /// sampled cell by its multiplicity and inverts the grid FFT; radial mode
    /// applies a ramp filter and rescales each frame by the scalar that best
    /// fits its own measurements.
    pub fn gridding(&self, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        self.check_measurements(b)?;
        let npix = self.pixels();
        let s = self.acq.samples_per_frame();
        let coils = self.acq.coils();
        let sos: Vec<f64> = (0..npix)
            .map(|p| self.acq.coil_maps.row(p).iter().map(|c| c.norm_sqr()).sum())
            .collect();
        let mut x = DMatrix::zeros(npix, self.frames());
        let mut fft = Fft2::new(self.acq.grid);
        let mut img = vec![Complex64::default(); npix];
        let mut mult = vec![0.0; npix];
        let scale = 1.0 / npix as f64;
        for t in 0..self.frames() {
            let bt = b.column(t);
            let mut xt = x.column_mut(t);
            match self.acq.mode {
                SamplingMode::CartesianMask => {
                    mult.fill(0.0);
                    for &q in &self.cells[t] {
                        mult[q] += 1.0;
                    }
                    for j in 0..coils {
                        img.fill(Complex64::default());
                        for (v, &q) in bt.as_slice()[j * s..(j + 1) * s].iter().zip(&self.cells[t]) {
                            img[q] += v * self.sign[q] / mult[q];
                        }
                        fft.inverse(&mut img);
                        let cj = self.acq.coil_maps.column(j);
                        for p in 0..npix {
                            xt[p] += cj[p].conj() * img[p] * scale;
                        }
                    }
                }
                SamplingMode::RadialNudft => {
                    let floor = 0.5 * self.acq.grid as f64 / self.acq.samples_per_spoke as f64;
                    let w: Vec<Complex64> = (0..coils)
                        .flat_map(|j| {
                            bt.as_slice()[j * s..(j + 1) * s]
                                .iter()
                                .zip(&self.points[t])
                                .map(|(v, &(kx, ky))| v * kx.hypot(ky).max(floor))
                                .collect::<Vec<_>>()
                        })
                        .collect();
                    let mut out = vec![Complex64::default(); npix];
                    self.adjoint_frame(&w, t, &mut fft, &mut img, &mut out);
                    xt.as_mut_slice().copy_from_slice(&out);
                }
            }
            for p in 0..npix {
                xt[p] /= sos[p];
            }
        }
        if self.acq.mode == SamplingMode::RadialNudft {
            let ax = self.forward(&x)?;
            for t in 0..self.frames() {
                let num: Complex64 = ax.column(t).iter().zip(b.column(t).iter()).map(|(a, y)| a.conj() * y).sum();
                let den: f64 = ax.column(t).iter().map(|a| a.norm_sqr()).sum();
                if den > 0.0 {
                    let alpha = num / den;
                    x.column_mut(t).iter_mut().for_each(|v| *v *= alpha);
                }
            }
        }
        Ok(x)
    }
}

pub fn forward(x: &DMatrix<Complex64>, acq: &AcquisitionSpec) -> Result<DMatrix<Complex64>> {
    Operator::new(acq)?.forward(x)
}

pub fn adjoint(b: &DMatrix<Complex64>, acq: &AcquisitionSpec) -> Result<DMatrix<Complex64>> {
    Operator::new(acq)?.adjoint(b)
}

/// Adds circular complex Gaussian noise with `E|n|^2 = noise_std^2`.
pub fn add_noise(b: &DMatrix<Complex64>, noise_std: f64, seed: u64) -> Result<DMatrix<Complex64>> {
    if !(noise_std >= 0.0) {
        return Err(Error::Input(format!("noise std must be >= 0, got {noise_std}")));
    }
    let mut out = b.clone();
    if noise_std == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = noise_std / 2f64.sqrt();
    for v in out.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(s * re, s * im);
    }
    Ok(out)
}

/// Noise std giving the requested SNR (dB) relative to the rms of `b`.
pub fn noise_std_for_snr(b: &DMatrix<Complex64>, snr_db: f64) -> f64 {
    let rms = (b.iter().map(|v| v.norm_sqr()).sum::<f64>() / b.len().max(1) as f64).sqrt();
    rms * 10f64.powf(-snr_db / 20.0)
}

/// Navigator samples of every frame, coil-major: row `coil * (nav M) + l * M + m`.
pub fn extract_navigators(b: &DMatrix<Complex64>, acq: &AcquisitionSpec) -> Result<DMatrix<Complex64>> {
    let angles = acq.nav_angles.clone();
    extract_navigator_subset(b, acq, &angles)
}

/// Like [`extract_navigators`] but keeping only the navigator spokes at the
/// given angles (degrees), in the order given.
pub fn extract_navigator_subset(
    b: &DMatrix<Complex64>,
    acq: &AcquisitionSpec,
    angles: &[f64],
) -> Result<DMatrix<Complex64>> {
    if b.nrows() != acq.measurement_rows() || b.ncols() != acq.frames() {
        return Err(Error::Dimension(format!(
            "measurements are {}x{}, acquisition expects {}x{}",
            b.nrows(),
            b.ncols(),
            acq.measurement_rows(),
            acq.frames()
        )));
    }
    let spokes: Vec<usize> = angles
        .iter()
        .map(|a| {
            acq.nav_angles
                .iter()
                .position(|n| (n - a).abs() < 1e-9)
                .ok_or_else(|| Error::Input(format!("no navigator spoke at {a} degrees")))
        })
        .collect::<Result<_>>()?;
    let m = acq.samples_per_spoke;
    let s = acq.samples_per_frame();
    let per_coil = spokes.len() * m;
    Ok(DMatrix::from_fn(acq.coils() * per_coil, acq.frames(), |r, t| {
        let (j, rest) = (r / per_coil, r % per_coil);
        let (l, i) = (rest / m, rest % m);
        b[(j * s + spokes[l] * m + i, t)]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{make_phantom, raised_cosine_coils, uniform_coil, PhantomSpec};
    use rand::RngExt;

    fn random_series(rows: usize, cols: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
    }

    fn acq(mode: SamplingMode, grid: usize, frames: usize, coils: usize) -> AcquisitionSpec {
        let maps = raised_cosine_coils(grid, coils).unwrap();
        AcquisitionSpec::golden(grid, frames, 6, 2, grid, maps, 0.0, mode).unwrap()
    }

    fn adjoint_gap(mode: SamplingMode) -> f64 {
        let a = acq(mode, 16, 5, 3);
        let op = Operator::new(&a).unwrap();
        let x = random_series(256, 5, 1);
        let y = random_series(a.measurement_rows(), 5, 2);
        let ax = op.forward(&x).unwrap();
        let ahy = op.adjoint(&y).unwrap();
        (inner(&ax, &y) - inner(&x, &ahy)).norm() / (ax.norm() * y.norm())
    }

    #[test]
    fn adjoint_identity_both_modes() {
        assert!(adjoint_gap(SamplingMode::RadialNudft) < 1e-10);
        assert!(adjoint_gap(SamplingMode::CartesianMask) < 1e-10);
    }

    #[test]
    fn forward_is_linear() {
        for mode in [SamplingMode::RadialNudft, SamplingMode::CartesianMask] {
            let op = Operator::new(&acq(mode, 16, 4, 2)).unwrap();
            let x = random_series(256, 4, 3);
            let y = random_series(256, 4, 4);
            let (al, be) = (Complex64::new(0.3, -1.2), Complex64::new(-2.0, 0.5));
            let lhs = op.forward(&(&x * al + &y * be)).unwrap();
            let rhs = op.forward(&x).unwrap() * al + op.forward(&y).unwrap() * be;
            assert!((&lhs - &rhs).norm() / rhs.norm() < 1e-12);
        }
    }

    #[test]
    fn normal_matches_adjoint_of_forward() {
        let op = Operator::new(&acq(SamplingMode::CartesianMask, 16, 4, 3)).unwrap();
        let x = random_series(256, 4, 5);
        let a = op.normal(&x).unwrap();
        let b = op.adjoint(&op.forward(&x).unwrap()).unwrap();
        assert!((&a - &b).norm() / b.norm() < 1e-12);
    }

    #[test]
    fn center_delta_has_unit_modulus_everywhere() {
        for mode in [SamplingMode::RadialNudft, SamplingMode::CartesianMask] {
            let a = AcquisitionSpec::golden(16, 3, 6, 4, 16, uniform_coil(16), 0.0, mode).unwrap();
            let mut x = DMatrix::zeros(256, 3);
            for t in 0..3 {
                x[(8 * 16 + 8, t)] = Complex64::new(1.0, 0.0);
            }
            let b = forward(&x, &a).unwrap();
            assert!(b.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn dc_sample_is_weighted_pixel_sum() {
        for mode in [SamplingMode::RadialNudft, SamplingMode::CartesianMask] {
            let a = acq(mode, 16, 2, 4);
            let x = random_series(256, 2, 9);
            let b = forward(&x, &a).unwrap();
            let s = a.samples_per_frame();
            for j in 0..4 {
                let want: Complex64 = (0..256).map(|p| a.coil_maps[(p, j)] * x[(p, 1)]).sum();
                for spoke in 0..6 {
                    let got = b[(j * s + spoke * 16 + 8, 1)];
                    assert!((got - want).norm() < 1e-10 * want.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn single_coil_adjoint_is_conjugate_dft() {
        let a = AcquisitionSpec::golden(16, 1, 3, 1, 4, uniform_coil(16), 0.0, SamplingMode::RadialNudft).unwrap();
        let b = random_series(a.measurement_rows(), 1, 11);
        let x = adjoint(&b, &a).unwrap();
        let pts = a.frame_points(0);
        for (iy, ix) in [(0usize, 0usize), (3, 12), (15, 7)] {
            let want: Complex64 = pts
                .iter()
                .zip(b.column(0).iter())
                .map(|(&(kx, ky), v)| {
                    let ph = 2.0 * PI * (kx * (ix as f64 - 8.0) + ky * (iy as f64 - 8.0)) / 16.0;
                    v * Complex64::from_polar(1.0, ph)
                })
                .sum();
            assert!((x[(iy * 16 + ix, 0)] - want).norm() < 1e-10);
        }
        assert_eq!(adjoint(&DMatrix::zeros(a.measurement_rows(), 1), &a).unwrap(), DMatrix::zeros(256, 1));
    }

    #[test]
    fn trajectory_outside_nyquist_box_is_rejected() {
        let mut a = acq(SamplingMode::RadialNudft, 16, 2, 1);
        assert!(Operator::new(&a).is_ok());
        a.kspace_extent = 1.2;
        assert!(matches!(Operator::new(&a), Err(Error::Trajectory(_))));
    }

    #[test]
    fn golden_angles_advance_continuously_and_are_distinct() {
        let a = acq(SamplingMode::CartesianMask, 16, 20, 1);
        let all: Vec<f64> = a.golden_angles.iter().flatten().copied().collect();
        for w in all.windows(2) {
            let step = (w[1] - w[0]).rem_euclid(360.0);
            assert!((step - GOLDEN_ANGLE_DEG).abs() < 1e-9);
        }
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert!(((all[i] - all[j]).rem_euclid(180.0)).min(180.0 - (all[i] - all[j]).rem_euclid(180.0)) > 1e-6);
            }
        }
        let f0 = a.frame_points(0);
        let f7 = a.frame_points(7);
        let nav = a.nav_count() * a.samples_per_spoke;
        assert_eq!(f0[..nav], f7[..nav]);
    }

    #[test]
    fn noise_statistics_and_determinism() {
        let b = DMatrix::<Complex64>::zeros(1000, 1000);
        let n = add_noise(&b, 0.7, 3).unwrap();
        let var = n.iter().map(|v| v.norm_sqr()).sum::<f64>() / 1e6;
        assert!((var.sqrt() / 0.7 - 1.0).abs() < 0.01);
        assert_eq!(add_noise(&b, 0.0, 3).unwrap(), b);
        let small = DMatrix::<Complex64>::zeros(10, 2);
        assert_eq!(add_noise(&small, 1.0, 5).unwrap(), add_noise(&small, 1.0, 5).unwrap());
        assert_ne!(add_noise(&small, 1.0, 5).unwrap(), add_noise(&small, 1.0, 6).unwrap());
        assert!(add_noise(&small, -1.0, 5).is_err());
    }

    #[test]
    fn navigator_layout_and_subsets() {
        let maps = raised_cosine_coils(16, 2).unwrap();
        let a = AcquisitionSpec::golden(16, 3, 7, 4, 16, maps, 0.0, SamplingMode::CartesianMask).unwrap();
        let b = random_series(a.measurement_rows(), 3, 13);
        let z = extract_navigators(&b, &a).unwrap();
        assert_eq!(z.nrows(), 4 * 16 * 2);
        assert_eq!(z[(64 + 16 + 3, 2)], b[(7 * 16 + 16 + 3, 2)]);
        let z1 = extract_navigator_subset(&b, &a, &[0.0]).unwrap();
        assert_eq!(z1.nrows(), 32);
        assert_eq!(z1[(16 + 5, 1)], b[(7 * 16 + 5, 1)]);
        let z2 = extract_navigator_subset(&b, &a, &[0.0, 90.0]).unwrap();
        assert_eq!(z2[(16 + 2, 0)], b[(2 * 16 + 2, 0)]);
        assert!(extract_navigator_subset(&b, &a, &[30.0]).is_err());
    }

    #[test]
    fn navigator_distance_follows_latent_phase() {
        let mut ps = PhantomSpec::from_rates(32, 12, 48.73, 11.47, 0.06, vec![], 3).unwrap();
        ps.theta_c[7] = ps.theta_c[1];
        ps.theta_r[7] = ps.theta_r[1];
        let ph = make_phantom(&ps).unwrap();
        let maps = raised_cosine_coils(32, 4).unwrap();
        let a = AcquisitionSpec::golden(32, 12, 10, 4, 32, maps, 0.0, SamplingMode::RadialNudft).unwrap();
        let z = extract_navigators(&forward(&ph.truth, &a).unwrap(), &a).unwrap();
        let d = |i: usize, j: usize| (z.column(i) - z.column(j)).norm();
        assert!(d(1, 7) < 1e-9);
        for k in (0..12).filter(|&k| k != 1 && k != 7) {
            assert!(d(1, 7) < d(1, k));
        }
    }

    #[test]
    fn cartesian_gridding_is_data_consistent() {
        let a = AcquisitionSpec::golden(16, 3, 8, 4, 16, uniform_coil(16), 0.0, SamplingMode::CartesianMask).unwrap();
        let op = Operator::new(&a).unwrap();
        let b = op.forward(&random_series(256, 3, 17)).unwrap();
        let again = op.forward(&op.gridding(&b).unwrap()).unwrap();
        assert!((&again - &b).norm() / b.norm() < 1e-12);
    }

    #[test]
    fn radial_gridding_recovers_smooth_phantom_roughly() {
        let ps = PhantomSpec::from_rates(16, 10, 48.73, 11.47, 0.06, vec![], 3).unwrap();
        let ph = make_phantom(&ps).unwrap();
        let maps = raised_cosine_coils(16, 4).unwrap();
        let a = AcquisitionSpec::golden(16, 10, 24, 4, 16, maps, 0.0, SamplingMode::RadialNudft).unwrap();
        let op = Operator::new(&a).unwrap();
        let g = op.gridding(&op.forward(&ph.truth).unwrap()).unwrap();
        assert!((&g - &ph.truth).norm() / ph.truth.norm() < 0.6);
    }

    #[test]
    fn dimension_errors() {
        let op = Operator::new(&acq(SamplingMode::CartesianMask, 16, 4, 2)).unwrap();
        assert!(op.forward(&DMatrix::zeros(255, 4)).is_err());
        assert!(op.adjoint(&DMatrix::zeros(10, 4)).is_err());
        assert!(AcquisitionSpec::golden(16, 4, 6, 3, 16, uniform_coil(16), 0.0, SamplingMode::CartesianMask).is_err());
        assert!(AcquisitionSpec::golden(16, 4, 6, 2, 16, DMatrix::zeros(256, 1), 0.0, SamplingMode::CartesianMask).is_err());
    }
}
