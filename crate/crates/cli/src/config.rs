//! INI run configuration.
//!
//! Every key is optional and falls back to the default run; unknown
//! sections and keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use manifold_recon::acquisition::SamplingMode;
use manifold_recon::laplacian::{IrlsParams, Sigma};
use manifold_recon::phantom::Episode;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomConfig {
    pub grid: usize,
    pub frames: usize,
    pub cardiac_rate: f64,
    pub resp_rate: f64,
    pub resp_amplitude: f64,
    pub episodes: Vec<Episode>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionConfig {
    pub mode: SamplingMode,
    pub lines_per_frame: usize,
    pub nav_count: usize,
    /// `None` means one sample per grid column.
    pub samples_per_spoke: Option<usize>,
    pub coils: usize,
    /// `None` disables noise.
    pub snr_db: Option<f64>,
    pub kspace_extent: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrlsConfig {
    pub params: IrlsParams,
    /// Navigator spokes used for estimation (1, 2 or 4).
    pub navigators: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Full-rank solve instead of the truncated one (tiny problems only).
    pub full: bool,
    pub lambda: f64,
    pub rank: usize,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinningConfig {
    pub n_resp: usize,
    pub n_card: usize,
    pub dims: usize,
    pub generalized: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub budgets: Vec<f64>,
    pub low_motion_amplitude: f64,
    pub high_motion_amplitude: f64,
    pub high_motion_episodes: Vec<Episode>,
    pub duration_snr_db: Option<f64>,
    pub high_motion_quantile: f64,
    pub outlier_frame: Option<usize>,
    pub outlier_shift: i64,
    pub knn: usize,
    pub threshold_quantile: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub phantom: PhantomConfig,
    pub acquisition: AcquisitionConfig,
    pub irls: IrlsConfig,
    pub solver: SolverConfig,
    pub binning: BinningConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            seed: 1,
            phantom: PhantomConfig {
                grid: 64,
                frames: 300,
                cardiac_rate: 48.73,
                resp_rate: 11.47,
                resp_amplitude: 0.06,
                episodes: vec![],
            },
            acquisition: AcquisitionConfig {
                mode: SamplingMode::CartesianMask,
                lines_per_frame: 10,
                nav_count: 4,
                samples_per_spoke: None,
                coils: 4,
                snr_db: Some(20.0),
                kspace_extent: 1.0,
            },
            irls: IrlsConfig {
                params: IrlsParams::default(),
                navigators: 4,
            },
            solver: SolverConfig {
                full: false,
                lambda: 3e8,
                rank: 30,
                tol: 1e-6,
                max_iter: 100,
            },
            binning: BinningConfig {
                n_resp: 4,
                n_card: 8,
                dims: 4,
                generalized: false,
            },
            experiment: ExperimentConfig {
                budgets: vec![1.0, 0.55, 0.35],
                low_motion_amplitude: 0.03,
                high_motion_amplitude: 0.12,
                high_motion_episodes: vec![
                    Episode { start: 40, end: 70, multiplier: 1.8 },
                    Episode { start: 150, end: 180, multiplier: 0.4 },
                    Episode { start: 230, end: 260, multiplier: 1.8 },
                ],
                duration_snr_db: Some(40.0),
                high_motion_quantile: 0.75,
                outlier_frame: None,
                outlier_shift: 2,
                knn: 2,
                threshold_quantile: 0.2,
            },
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("paths", &["out_dir"]),
    ("global", &["seed"]),
    ("phantom", &["grid", "frames", "cardiac_rate", "resp_rate", "resp_amplitude", "episodes"]),
    (
        "acquisition",
        &["mode", "lines_per_frame", "nav_count", "samples_per_spoke", "coils", "snr_db", "kspace_extent"],
    ),
    (
        "irls",
        &["sigma", "mu", "mu_relative", "gamma0", "eta", "iterations", "clip_negative", "navigators"],
    ),
    ("solver", &["method", "lambda", "rank", "tol", "max_iter"]),
    ("binning", &["n_resp", "n_card", "dims", "generalized"]),
    (
        "experiment",
        &[
            "budgets",
            "low_motion_amplitude",
            "high_motion_amplitude",
            "high_motion_episodes",
            "duration_snr_db",
            "high_motion_quantile",
            "outlier_frame",
            "outlier_shift",
            "knn",
            "threshold_quantile",
        ],
    ),
];

fn bad(section: &str, key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("[{section}] {key} = {value:?}: {why}"))
}

fn num<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| bad(section, key, value, e))
}

fn boolean(section: &str, key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(section, key, value, "expected true or false")),
    }
}

fn optional<T: FromStr>(section: &str, key: &str, value: &str, none: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if value.trim() == none {
        Ok(None)
    } else {
        num(section, key, value).map(Some)
    }
}

/// `start:end:multiplier` entries separated by `;`.
pub fn parse_episodes(section: &str, key: &str, value: &str) -> Result<Vec<Episode>> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').collect();
            if parts.len() != 3 {
                return Err(bad(section, key, value, "episodes are start:end:multiplier"));
            }
            Ok(Episode {
                start: num(section, key, parts[0])?,
                end: num(section, key, parts[1])?,
                multiplier: num(section, key, parts[2])?,
            })
        })
        .collect()
}

fn format_episodes(e: &[Episode]) -> String {
    e.iter()
        .map(|e| format!("{}:{}:{}", e.start, e.end, e.multiplier))
        .collect::<Vec<_>>()
        .join("; ")
}

fn opt_str<T: std::fmt::Display>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or_else(|| none.to_string(), ToString::to_string)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_ini_str(&text)
    }

    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("malformed INI: {e}")))?;
        let mut c = Self::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(CliError::Config(format!("key `{k}` outside any section")));
                }
                continue;
            };
            let Some((_, keys)) = KEYS.iter().find(|(s, _)| *s == section) else {
                return Err(CliError::Config(format!("unknown section [{section}]")));
            };
            for (key, value) in props.iter() {
                if !keys.contains(&key) {
                    return Err(CliError::Config(format!("unknown key `{key}` in [{section}]")));
                }
                c.set(section, key, value)?;
            }
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, s: &str, k: &str, v: &str) -> Result<()> {
        let v = v.trim();
        match (s, k) {
            ("paths", "out_dir") => self.out_dir = PathBuf::from(v),
            ("global", "seed") => self.seed = num(s, k, v)?,
            ("phantom", "grid") => self.phantom.grid = num(s, k, v)?,
            ("phantom", "frames") => self.phantom.frames = num(s, k, v)?,
            ("phantom", "cardiac_rate") => self.phantom.cardiac_rate = num(s, k, v)?,
            ("phantom", "resp_rate") => self.phantom.resp_rate = num(s, k, v)?,
            ("phantom", "resp_amplitude") => self.phantom.resp_amplitude = num(s, k, v)?,
            ("phantom", "episodes") => self.phantom.episodes = parse_episodes(s, k, v)?,
            ("acquisition", "mode") => {
                self.acquisition.mode = SamplingMode::parse(v).map_err(|e| bad(s, k, v, e))?
            }
            ("acquisition", "lines_per_frame") => self.acquisition.lines_per_frame = num(s, k, v)?,
            ("acquisition", "nav_count") => self.acquisition.nav_count = num(s, k, v)?,
            ("acquisition", "samples_per_spoke") => self.acquisition.samples_per_spoke = optional(s, k, v, "grid")?,
            ("acquisition", "coils") => self.acquisition.coils = num(s, k, v)?,
            ("acquisition", "snr_db") => self.acquisition.snr_db = optional(s, k, v, "none")?,
            ("acquisition", "kspace_extent") => self.acquisition.kspace_extent = num(s, k, v)?,
            ("irls", "sigma") => {
                self.irls.params.sigma = match v {
                    "auto" => Sigma::MedianAuto,
                    _ => Sigma::Fixed(num(s, k, v)?),
                }
            }
            ("irls", "mu") => self.irls.params.mu = num(s, k, v)?,
            ("irls", "mu_relative") => self.irls.params.mu_relative = boolean(s, k, v)?,
            ("irls", "gamma0") => self.irls.params.gamma0 = optional(s, k, v, "auto")?,
            ("irls", "eta") => self.irls.params.eta = num(s, k, v)?,
            ("irls", "iterations") => self.irls.params.iterations = num(s, k, v)?,
            ("irls", "clip_negative") => self.irls.params.clip_negative = boolean(s, k, v)?,
            ("irls", "navigators") => self.irls.navigators = num(s, k, v)?,
            ("solver", "method") => {
                self.solver.full = match v {
                    "truncated" => false,
                    "full" => true,
                    _ => return Err(bad(s, k, v, "expected truncated or full")),
                }
            }
            ("solver", "lambda") => self.solver.lambda = num(s, k, v)?,
            ("solver", "rank") => self.solver.rank = num(s, k, v)?,
            ("solver", "tol") => self.solver.tol = num(s, k, v)?,
            ("solver", "max_iter") => self.solver.max_iter = num(s, k, v)?,
            ("binning", "n_resp") => self.binning.n_resp = num(s, k, v)?,
            ("binning", "n_card") => self.binning.n_card = num(s, k, v)?,
            ("binning", "dims") => self.binning.dims = num(s, k, v)?,
            ("binning", "generalized") => self.binning.generalized = boolean(s, k, v)?,
            ("experiment", "budgets") => {
                self.experiment.budgets = v
                    .split(',')
                    .map(|b| num(s, k, b))
                    .collect::<Result<_>>()?
            }
            ("experiment", "low_motion_amplitude") => self.experiment.low_motion_amplitude = num(s, k, v)?,
            ("experiment", "high_motion_amplitude") => self.experiment.high_motion_amplitude = num(s, k, v)?,
            ("experiment", "high_motion_episodes") => self.experiment.high_motion_episodes = parse_episodes(s, k, v)?,
            ("experiment", "duration_snr_db") => self.experiment.duration_snr_db = optional(s, k, v, "none")?,
            ("experiment", "high_motion_quantile") => self.experiment.high_motion_quantile = num(s, k, v)?,
            ("experiment", "outlier_frame") => self.experiment.outlier_frame = optional(s, k, v, "middle")?,
            ("experiment", "outlier_shift") => self.experiment.outlier_shift = num(s, k, v)?,
            ("experiment", "knn") => self.experiment.knn = num(s, k, v)?,
            ("experiment", "threshold_quantile") => self.experiment.threshold_quantile = num(s, k, v)?,
            _ => return Err(CliError::Config(format!("unknown key `{k}` in [{s}]"))),
        }
        Ok(())
    }

    pub fn samples_per_spoke(&self) -> usize {
        self.acquisition.samples_per_spoke.unwrap_or(self.phantom.grid)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CliError::Config(msg));
        let p = &self.phantom;
        if p.grid < 16 || !p.grid.is_multiple_of(2) || p.grid > 512 {
            return fail(format!("[phantom] grid must be even and in 16..=512, got {}", p.grid));
        }
        if p.frames < 10 {
            return fail(format!("[phantom] frames must be >= 10, got {}", p.frames));
        }
        for (k, v) in [("cardiac_rate", p.cardiac_rate), ("resp_rate", p.resp_rate)] {
            if !(v > 0.0 && v < 500.0) {
                return fail(format!("[phantom] {k} must be in (0, 500) cycles per 1000 frames, got {v}"));
            }
        }
        if !(0.0..=0.5).contains(&p.resp_amplitude) {
            return fail(format!("[phantom] resp_amplitude must be in [0, 0.5], got {}", p.resp_amplitude));
        }
        check_episodes("phantom", &p.episodes, p.frames)?;
        let a = &self.acquisition;
        if ![1, 2, 4].contains(&a.nav_count) {
            return fail(format!("[acquisition] nav_count must be 1, 2 or 4, got {}", a.nav_count));
        }
        if a.lines_per_frame <= a.nav_count || a.lines_per_frame > 64 {
            return fail(format!(
                "[acquisition] lines_per_frame must exceed nav_count and be <= 64, got {}",
                a.lines_per_frame
            ));
        }
        if !(2..=4 * p.grid).contains(&self.samples_per_spoke()) {
            return fail(format!("[acquisition] samples_per_spoke must be in 2..={}", 4 * p.grid));
        }
        if !(1..=16).contains(&a.coils) {
            return fail(format!("[acquisition] coils must be in 1..=16, got {}", a.coils));
        }
        if a.snr_db.is_some_and(|s| !s.is_finite()) {
            return fail("[acquisition] snr_db must be finite or `none`".into());
        }
        if !(a.kspace_extent > 0.0 && a.kspace_extent <= 1.0) {
            return fail(format!("[acquisition] kspace_extent must be in (0, 1], got {}", a.kspace_extent));
        }
        self.irls.params.validate().map_err(|e| CliError::Config(format!("[irls] {e}")))?;
        if ![1, 2, 4].contains(&self.irls.navigators) || self.irls.navigators > a.nav_count {
            return fail(format!(
                "[irls] navigators must be 1, 2 or 4 and at most nav_count, got {}",
                self.irls.navigators
            ));
        }
        if self.irls.navigators == 2 && a.nav_count == 1 {
            return fail("[irls] two navigators need nav_count 2 or 4".into());
        }
        let s = &self.solver;
        if !(s.lambda >= 0.0) || !s.lambda.is_finite() {
            return fail(format!("[solver] lambda must be finite and >= 0, got {}", s.lambda));
        }
        if s.rank == 0 || s.rank > p.frames {
            return fail(format!("[solver] rank must be in 1..={}, got {}", p.frames, s.rank));
        }
        if !(s.tol > 0.0 && s.tol < 1.0) || s.max_iter == 0 {
            return fail("[solver] tol must be in (0, 1) and max_iter >= 1".into());
        }
        let b = &self.binning;
        if b.n_resp == 0 || b.n_card == 0 || b.n_resp * b.n_card > p.frames {
            return fail("[binning] n_resp, n_card must be >= 1 with n_resp * n_card <= frames".into());
        }
        if b.dims < 2 || b.dims + 1 > p.frames {
            return fail(format!("[binning] dims must be in 2..{}, got {}", p.frames, b.dims));
        }
        let e = &self.experiment;
        if e.budgets.is_empty() || e.budgets.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return fail("[experiment] budgets must be fractions in (0, 1]".into());
        }
        for (k, v) in [
            ("low_motion_amplitude", e.low_motion_amplitude),
            ("high_motion_amplitude", e.high_motion_amplitude),
        ] {
            if !(0.0..=0.5).contains(&v) {
                return fail(format!("[experiment] {k} must be in [0, 0.5], got {v}"));
            }
        }
        check_episodes("experiment", &e.high_motion_episodes, usize::MAX)?;
        if e.duration_snr_db.is_some_and(|s| !s.is_finite()) {
            return fail("[experiment] duration_snr_db must be finite or `none`".into());
        }
        if !(e.high_motion_quantile > 0.0 && e.high_motion_quantile < 1.0) {
            return fail("[experiment] high_motion_quantile must be in (0, 1)".into());
        }
        if e.outlier_frame.is_some_and(|f| f >= p.frames) {
            return fail("[experiment] outlier_frame outside the frame range".into());
        }
        if e.outlier_shift.unsigned_abs() as usize >= p.grid {
            return fail("[experiment] outlier_shift must be smaller than the grid".into());
        }
        if e.knn == 0 || e.knn >= p.frames {
            return fail("[experiment] knn must be in 1..frames".into());
        }
        if !(e.threshold_quantile > 0.0 && e.threshold_quantile <= 1.0) {
            return fail("[experiment] threshold_quantile must be in (0, 1]".into());
        }
        Ok(())
    }

    /// Canonical INI text covering every key.
    pub fn to_ini(&self) -> String {
        let mut o = String::new();
        let p = &self.phantom;
        let a = &self.acquisition;
        let i = &self.irls.params;
        let s = &self.solver;
        let b = &self.binning;
        let e = &self.experiment;
        let sigma = match i.sigma {
            Sigma::MedianAuto => "auto".to_string(),
            Sigma::Fixed(v) => v.to_string(),
        };
        let _ = write!(
            o,
            "[paths]\nout_dir = {}\n\n[global]\nseed = {}\n\n\
             [phantom]\ngrid = {}\nframes = {}\ncardiac_rate = {}\nresp_rate = {}\nresp_amplitude = {}\nepisodes = {}\n\n\
             [acquisition]\nmode = {}\nlines_per_frame = {}\nnav_count = {}\nsamples_per_spoke = {}\ncoils = {}\nsnr_db = {}\nkspace_extent = {}\n\n\
             [irls]\nsigma = {}\nmu = {}\nmu_relative = {}\ngamma0 = {}\neta = {}\niterations = {}\nclip_negative = {}\nnavigators = {}\n\n\
             [solver]\nmethod = {}\nlambda = {:e}\nrank = {}\ntol = {:e}\nmax_iter = {}\n\n\
             [binning]\nn_resp = {}\nn_card = {}\ndims = {}\ngeneralized = {}\n\n\
             [experiment]\nbudgets = {}\nlow_motion_amplitude = {}\nhigh_motion_amplitude = {}\nhigh_motion_episodes = {}\nduration_snr_db = {}\nhigh_motion_quantile = {}\noutlier_frame = {}\noutlier_shift = {}\nknn = {}\nthreshold_quantile = {}\n",
            self.out_dir.display(),
            self.seed,
            p.grid,
            p.frames,
            p.cardiac_rate,
            p.resp_rate,
            p.resp_amplitude,
            format_episodes(&p.episodes),
            a.mode.name(),
            a.lines_per_frame,
            a.nav_count,
            opt_str(&a.samples_per_spoke, "grid"),
            a.coils,
            opt_str(&a.snr_db, "none"),
            a.kspace_extent,
            sigma,
            i.mu,
            i.mu_relative,
            opt_str(&i.gamma0, "auto"),
            i.eta,
            i.iterations,
            i.clip_negative,
            self.irls.navigators,
            if s.full { "full" } else { "truncated" },
            s.lambda,
            s.rank,
            s.tol,
            s.max_iter,
            b.n_resp,
            b.n_card,
            b.dims,
            b.generalized,
            e.budgets.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
            e.low_motion_amplitude,
            e.high_motion_amplitude,
            format_episodes(&e.high_motion_episodes),
            opt_str(&e.duration_snr_db, "none"),
            e.high_motion_quantile,
            opt_str(&e.outlier_frame, "middle"),
            e.outlier_shift,
            e.knn,
            e.threshold_quantile,
        );
        o
    }
}

fn check_episodes(section: &str, eps: &[Episode], frames: usize) -> Result<()> {
    for e in eps {
        if e.start >= e.end || !(e.multiplier > 0.0) {
            return Err(CliError::Config(format!("[{section}] invalid episode {e:?}")));
        }
        if e.start >= frames {
            return Err(CliError::Config(format!("[{section}] episode {e:?} starts after the last frame")));
        }
    }
    Ok(())
}

/// Episodes clipped to the first `frames` frames.
pub fn clip_episodes(eps: &[Episode], frames: usize) -> Vec<Episode> {
    eps.iter()
        .filter(|e| e.start < frames)
        .map(|e| Episode { end: e.end.min(frames), ..*e })
        .collect()
}
