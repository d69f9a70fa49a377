//! Two-phase dynamic phantom.
//!
//! Each frame is a supersampled piecewise-constant scene on `[-1, 1)^2`:
//! a static torso with lungs and spine, a liver block and an elliptical
//! heart that both ride on a vertical "diaphragm" displacement
//! `A * m(t) * sin(theta_r(t))`, and a blood pool whose radius scales by
//! `1 + 0.3 cos(theta_c(t))`. `m(t)` is the amplitude multiplier of any
//! irregular-breathing episode covering frame `t` (1 elsewhere).
//!
//! Images are real and the whole series is normalized to a maximum of 1.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const SUPERSAMPLE: usize = 3;
const CARDIAC_MODULATION: f64 = 0.3;
const CARDIAC_JITTER: f64 = 0.02;
const RESP_JITTER: f64 = 0.01;

/// Frames `[start, end)` breathe with amplitude scaled by `multiplier`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Episode {
    pub start: usize,
    pub end: usize,
    pub multiplier: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub grid: usize,
    /// Cycles per 1000 frames.
    pub cardiac_rate: f64,
    pub resp_rate: f64,
    /// Peak diaphragm displacement as a fraction of the half field of view.
    pub resp_amplitude: f64,
    pub episodes: Vec<Episode>,
    pub theta_c: Vec<f64>,
    pub theta_r: Vec<f64>,
    pub seed: u64,
}

impl PhantomSpec {
    /// Phase series advancing at the given rates with a small seeded random
    /// walk on top, starting from seeded random phases.
    pub fn from_rates(
        grid: usize,
        frames: usize,
        cardiac_rate: f64,
        resp_rate: f64,
        resp_amplitude: f64,
        episodes: Vec<Episode>,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let walk = |rate: f64, jitter: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
            let start = 2.0 * PI * uniform(rng);
            let step = 2.0 * PI * rate / 1000.0;
            let mut drift = 0.0;
            (0..frames)
                .map(|t| {
                    let n: f64 = StandardNormal.sample(rng);
                    drift += jitter * n;
                    (start + step * t as f64 + drift).rem_euclid(2.0 * PI)
                })
                .collect()
        };
        let theta_c = walk(cardiac_rate, CARDIAC_JITTER, &mut rng);
        let theta_r = walk(resp_rate, RESP_JITTER, &mut rng);
        let spec = Self {
            grid,
            cardiac_rate,
            resp_rate,
            resp_amplitude,
            episodes,
            theta_c,
            theta_r,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn frames(&self) -> usize {
        self.theta_c.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid < 16 || !self.grid.is_multiple_of(2) {
            return Err(Error::Input(format!("grid must be even and >= 16, got {}", self.grid)));
        }
        let k = self.theta_c.len();
        if k < 10 {
            return Err(Error::Input(format!("need at least 10 frames, got {k}")));
        }
        if self.theta_r.len() != k {
            return Err(Error::Input(format!(
                "phase series lengths differ: {} cardiac vs {} respiratory",
                k,
                self.theta_r.len()
            )));
        }
        if self.theta_c.iter().chain(&self.theta_r).any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite phase value".into()));
        }
        if !self.resp_amplitude.is_finite() || self.resp_amplitude < 0.0 {
            return Err(Error::Input(format!("respiratory amplitude must be >= 0, got {}", self.resp_amplitude)));
        }
        for e in &self.episodes {
            if e.start >= e.end || e.end > k || !(e.multiplier > 0.0) {
                return Err(Error::Input(format!("invalid breathing episode {e:?} for {k} frames")));
            }
        }
        Ok(())
    }

    pub fn amplitude_multipliers(&self) -> Vec<f64> {
        let mut m = vec![1.0; self.frames()];
        for e in &self.episodes {
            for v in &mut m[e.start..e.end] {
                *v = e.multiplier;
            }
        }
        m
    }

    /// Vertical diaphragm offset per frame, in half-FOV units.
    pub fn displacement(&self) -> Vec<f64> {
        self.amplitude_multipliers()
            .iter()
            .zip(&self.theta_r)
            .map(|(m, th)| self.resp_amplitude * m * th.sin())
            .collect()
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    use rand::RngExt;
    rng.random::<f64>()
}

pub struct Phantom {
    /// Casorati matrix, pixels x frames; pixel index `iy * N + ix`.
    pub truth: DMatrix<Complex64>,
    pub theta_c: Vec<f64>,
    pub theta_r: Vec<f64>,
    pub displacement: Vec<f64>,
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    value: f64,
}

impl Ellipse {
    fn contains(&self, u: f64, v: f64) -> bool {
        let du = (u - self.cx) / self.a;
        let dv = (v - self.cy) / self.b;
        du * du + dv * dv <= 1.0
    }
}

fn scene(cardiac: f64, offset: f64) -> [Ellipse; 7] {
    let r = 1.0 + CARDIAC_MODULATION * cardiac.cos();
    let heart_y = -0.05 + offset;
    [
        Ellipse { cx: 0.0, cy: 0.0, a: 0.85, b: 0.7, value: 0.25 },
        Ellipse { cx: -0.45, cy: -0.1, a: 0.25, b: 0.4, value: 0.05 },
        Ellipse { cx: 0.45, cy: -0.1, a: 0.25, b: 0.4, value: 0.05 },
        Ellipse { cx: 0.0, cy: 0.6, a: 0.08, b: 0.08, value: 0.5 },
        Ellipse { cx: 0.0, cy: 0.45 + offset, a: 0.6, b: 0.25, value: 0.45 },
        Ellipse { cx: 0.05, cy: heart_y, a: 0.3, b: 0.26, value: 0.7 },
        Ellipse { cx: 0.05, cy: heart_y, a: 0.15 * r, b: 0.13 * r, value: 1.0 },
    ]
}

fn render(grid: usize, cardiac: f64, offset: f64, out: &mut [f64]) {
    let shapes = scene(cardiac, offset);
    let sub = (grid * SUPERSAMPLE) as f64;
    let norm = 1.0 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
    for iy in 0..grid {
        for ix in 0..grid {
            let mut acc = 0.0;
            for sy in 0..SUPERSAMPLE {
                let v = ((iy * SUPERSAMPLE + sy) as f64 + 0.5) / sub * 2.0 - 1.0;
                for sx in 0..SUPERSAMPLE {
                    let u = ((ix * SUPERSAMPLE + sx) as f64 + 0.5) / sub * 2.0 - 1.0;
                    let mut val = 0.0;
                    for e in &shapes {
                        if e.contains(u, v) {
                            val = e.value;
                        }
                    }
                    acc += val;
                }
            }
            out[iy * grid + ix] = acc * norm;
        }
    }
}

pub fn make_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let n = spec.grid * spec.grid;
    let k = spec.frames();
    let displacement = spec.displacement();
    let mut frames = vec![0.0; n * k];
    for t in 0..k {
        render(spec.grid, spec.theta_c[t], displacement[t], &mut frames[t * n..(t + 1) * n]);
    }
    let peak = frames.iter().copied().fold(0.0, f64::max);
    let truth = DMatrix::from_fn(n, k, |p, t| Complex64::new(frames[t * n + p] / peak, 0.0));
    Ok(Phantom {
        truth,
        theta_c: spec.theta_c.clone(),
        theta_r: spec.theta_r.clone(),
        displacement,
    })
}

/// Rigid horizontal shift of one frame by `pixels` (circular), a stand-in
/// for abrupt bulk patient motion.
pub fn inject_bulk_shift(truth: &mut DMatrix<Complex64>, grid: usize, frame: usize, pixels: i64) {
    let col: Vec<Complex64> = truth.column(frame).iter().copied().collect();
    let g = grid as i64;
    for iy in 0..grid {
        for ix in 0..grid {
            let src = (ix as i64 - pixels).rem_euclid(g) as usize;
            truth[(iy * grid + ix, frame)] = col[iy * grid + src];
        }
    }
}

/// Raised-cosine coil lobes centered at radius `1/sqrt(2)` and angles
/// `45 + 360 j / C` degrees; four coils sit on the quadrant centers.
/// Each map carries a small linear phase ramp so the maps are complex.
pub fn raised_cosine_coils(grid: usize, coils: usize) -> Result<DMatrix<Complex64>> {
    if coils == 0 {
        return Err(Error::Input("need at least one coil".into()));
    }
    let n = grid * grid;
    let mut maps = DMatrix::zeros(n, coils);
    for j in 0..coils {
        let ang = PI / 4.0 + 2.0 * PI * j as f64 / coils as f64;
        let (cu, cv) = (0.5 * 2f64.sqrt() * ang.cos(), 0.5 * 2f64.sqrt() * ang.sin());
        for iy in 0..grid {
            let v = (iy as f64 + 0.5) / grid as f64 * 2.0 - 1.0;
            for ix in 0..grid {
                let u = (ix as f64 + 0.5) / grid as f64 * 2.0 - 1.0;
                let mag = 0.25 * (1.0 + (PI * (u - cu) / 2.0).cos()) * (1.0 + (PI * (v - cv) / 2.0).cos());
                maps[(iy * grid + ix, j)] = Complex64::from_polar(mag, 0.25 * PI * j as f64 * (u + v));
            }
        }
    }
    Ok(maps)
}

pub fn uniform_coil(grid: usize) -> DMatrix<Complex64> {
    DMatrix::from_element(grid * grid, 1, Complex64::new(1.0, 0.0))
}
