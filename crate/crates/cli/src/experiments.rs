//! Comparison studies: navigator count, scan duration, graph estimators.

use manifold_recon::acquisition::Operator;
use manifold_recon::embed::embed;
use manifold_recon::laplacian::{auto_sigma, exp_weights, pairwise_sq_distances, GraphLaplacian, NeighborRule};
use manifold_recon::recon::{nrmse, nrmse_frames};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::{clip_episodes, RunConfig};
use crate::error::Result;
use crate::output::{csv, Stage};
use crate::pipeline::{
    best_agreements, estimate, motion_split, navigators, phantom_spec, quantile_sorted, reconstruct, simulate,
    simulate_spec, Simulation,
};

#[derive(Clone, Debug)]
pub struct NavcountRow {
    pub navigators: usize,
    pub nrmse: f64,
    pub nrmse_high_motion: f64,
    pub nrmse_low_motion: f64,
}

#[derive(Clone, Debug)]
pub struct NavcountReport {
    pub rows: Vec<NavcountRow>,
    pub baseline_nrmse: f64,
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn shared_window(images: &[&DMatrix<Complex64>], truth: &DMatrix<Complex64>, frame: usize) -> (f64, f64) {
    let hi = images
        .iter()
        .flat_map(|x| x.column(frame).iter().zip(truth.column(frame).iter()).map(|(a, b)| (a - b).norm()).collect::<Vec<_>>())
        .fold(0.0f64, f64::max);
    (0.0, hi)
}

fn error_image(x: &DMatrix<Complex64>, truth: &DMatrix<Complex64>, frame: usize) -> Vec<Complex64> {
    x.column(frame).iter().zip(truth.column(frame).iter()).map(|(a, b)| a - b).collect()
}

/// Reconstructs the same acquisition with Laplacians estimated from 4, 2
/// and 1 navigator angles.
pub fn navcount(cfg: &RunConfig) -> Result<NavcountReport> {
    let mut cfg = cfg.clone();
    cfg.acquisition.nav_count = 4;
    let sim = simulate(&cfg)?;
    let op = Operator::new(&sim.acq)?;
    let truth = &sim.phantom.truth;
    let (high, low) = motion_split(&sim.phantom.displacement, cfg.experiment.high_motion_quantile);
    let baseline = op.gridding(&sim.measurements)?;
    let baseline_nrmse = nrmse(&baseline, truth)?;
    let mut rows = Vec::new();
    let mut recons = Vec::new();
    for count in [4, 2, 1] {
        let z = navigators(&sim.measurements, &sim.acq, count)?;
        let mut lap = estimate(&cfg, &z)?.laplacian;
        let x = reconstruct(&cfg, &op, &sim.measurements, &mut lap, cfg.solver.rank)?.x;
        rows.push(NavcountRow {
            navigators: count,
            nrmse: nrmse(&x, truth)?,
            nrmse_high_motion: nrmse_frames(&x, truth, &high)?,
            nrmse_low_motion: nrmse_frames(&x, truth, &low)?,
        });
        recons.push(x);
    }
    let mut st = Stage::new(&cfg.out_dir.join("navcount"), "navcount")?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.navigators.to_string(), fmt(r.nrmse), fmt(r.nrmse_high_motion), fmt(r.nrmse_low_motion)])
        .chain(std::iter::once(vec!["gridding".into(), fmt(baseline_nrmse), "".into(), "".into()]))
        .collect();
    st.text("navcount.csv", &csv(&["navigators", "nrmse", "nrmse_high_motion", "nrmse_low_motion"], &table))?;
    let frame = high.first().copied().unwrap_or(0);
    let refs: Vec<&DMatrix<Complex64>> = recons.iter().collect();
    let window = shared_window(&refs, truth, frame);
    for (r, x) in rows.iter().zip(&recons) {
        st.pgm(&format!("error_nav{}_frame{frame}.pgm", r.navigators), &error_image(x, truth, frame), cfg.phantom.grid, Some(window))?;
    }
    st.finish(&cfg.to_ini())?;
    Ok(NavcountReport { rows, baseline_nrmse })
}

#[derive(Clone, Debug)]
pub struct DurationRow {
    pub motion: &'static str,
    pub budget: f64,
    pub frames: usize,
    /// NRMSE over the shared evaluation window.
    pub nrmse_window: f64,
}

#[derive(Clone, Debug)]
pub struct DurationReport {
    pub rows: Vec<DurationRow>,
    pub window: usize,
}

impl DurationReport {
    /// Relative NRMSE growth from the longest to the shortest scan.
    pub fn inflation(&self, motion: &str) -> Option<f64> {
        let rows: Vec<&DurationRow> = self.rows.iter().filter(|r| r.motion == motion).collect();
        let full = rows.iter().max_by(|a, b| a.budget.total_cmp(&b.budget))?;
        let short = rows.iter().min_by(|a, b| a.budget.total_cmp(&b.budget))?;
        Some(short.nrmse_window / full.nrmse_window - 1.0)
    }
}

fn truncate_run(cfg: &RunConfig, sim: &Simulation, frames: usize, window: usize) -> Result<f64> {
    let acq = sim.acq.frame_window(0, frames)?;
    let b = sim.measurements.columns(0, frames).into_owned();
    let op = Operator::new(&acq)?;
    let z = navigators(&b, &acq, cfg.irls.navigators)?;
    let mut lap = estimate(cfg, &z)?.laplacian;
    let x = reconstruct(cfg, &op, &b, &mut lap, cfg.solver.rank)?.x;
    let idx: Vec<usize> = (0..window).collect();
    Ok(nrmse_frames(&x, &sim.phantom.truth.columns(0, frames).into_owned(), &idx)?)
}

/// Shortens the scan to each budget fraction and scores the frames that all
/// budgets share, for a low-motion and a high-motion subject.
pub fn duration(cfg: &RunConfig) -> Result<DurationReport> {
    let e = &cfg.experiment;
    let k = cfg.phantom.frames;
    let shortest = e.budgets.iter().copied().fold(1.0f64, f64::min);
    let window = ((shortest * k as f64).ceil() as usize).clamp(2, k);
    let mut rows = Vec::new();
    for (motion, amp, eps) in [
        ("low", e.low_motion_amplitude, Vec::new()),
        ("high", e.high_motion_amplitude, clip_episodes(&e.high_motion_episodes, k)),
    ] {
        let mut c = cfg.clone();
        c.phantom.resp_amplitude = amp;
        c.phantom.episodes = eps;
        let sim = simulate_spec(&c, phantom_spec(&c)?, e.duration_snr_db, None)?;
        for &f in &e.budgets {
            let frames = ((f * k as f64).ceil() as usize).clamp(window, k);
            rows.push(DurationRow {
                motion,
                budget: f,
                frames,
                nrmse_window: truncate_run(&c, &sim, frames, window)?,
            });
        }
    }
    let report = DurationReport { rows, window };
    let mut st = Stage::new(&cfg.out_dir.join("duration"), "duration")?;
    let table: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![r.motion.into(), format!("{:.3}", r.budget), r.frames.to_string(), fmt(r.nrmse_window)])
        .collect();
    st.text("duration.csv", &csv(&["motion", "budget", "frames", "nrmse_window"], &table))?;
    let infl: Vec<Vec<String>> = ["low", "high"]
        .iter()
        .map(|m| vec![m.to_string(), report.inflation(m).map_or("nan".into(), fmt)])
        .collect();
    st.text("duration_inflation.csv", &csv(&["motion", "inflation"], &infl))?;
    st.finish(&cfg.to_ini())?;
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct MethodRow {
    pub method: &'static str,
    pub resp_agreement: f64,
    pub card_agreement: f64,
    pub nrmse: f64,
    pub resp_agreement_outlier: f64,
    pub card_agreement_outlier: f64,
}

impl MethodRow {
    /// Mean agreement lost when one frame is corrupted.
    pub fn degradation(&self) -> f64 {
        0.5 * ((self.resp_agreement - self.resp_agreement_outlier) + (self.card_agreement - self.card_agreement_outlier))
    }
}

#[derive(Clone, Debug)]
pub struct MethodsReport {
    pub rows: Vec<MethodRow>,
}

impl MethodsReport {
    pub fn row(&self, method: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

fn graphs(cfg: &RunConfig, z: &DMatrix<Complex64>) -> Result<Vec<(&'static str, GraphLaplacian)>> {
    let sigma = auto_sigma(z)?.sigma;
    let d2 = pairwise_sq_distances(z);
    let k = z.ncols();
    let mut d: Vec<f64> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).map(|(i, j)| d2[(i, j)].sqrt()).collect();
    d.sort_by(f64::total_cmp);
    let t = quantile_sorted(&d, cfg.experiment.threshold_quantile);
    Ok(vec![
        ("irls", estimate(cfg, z)?.laplacian),
        ("exp_knn", exp_weights(z, sigma, NeighborRule::Knn(cfg.experiment.knn))?),
        ("exp_threshold", exp_weights(z, sigma, NeighborRule::Threshold(t))?),
    ])
}

fn agreements(cfg: &RunConfig, lap: &mut GraphLaplacian, sim: &Simulation) -> Result<(f64, f64)> {
    let e = embed(lap, cfg.binning.dims, cfg.binning.generalized)?;
    best_agreements(&e.coords, &sim.phantom.theta_r, &sim.phantom.theta_c)
}

/// Scores each graph estimator by how well its embedding follows the true
/// phases, with and without one rigidly shifted frame.
pub fn methods(cfg: &RunConfig) -> Result<MethodsReport> {
    let spec = phantom_spec(cfg)?;
    let clean = simulate_spec(cfg, spec.clone(), cfg.acquisition.snr_db, None)?;
    let frame = cfg.experiment.outlier_frame.unwrap_or(spec.frames() / 2);
    let dirty = simulate_spec(cfg, spec, cfg.acquisition.snr_db, Some((frame, cfg.experiment.outlier_shift)))?;
    let op = Operator::new(&clean.acq)?;
    let z = navigators(&clean.measurements, &clean.acq, cfg.irls.navigators)?;
    let zo = navigators(&dirty.measurements, &dirty.acq, cfg.irls.navigators)?;
    let mut rows = Vec::new();
    for ((method, mut lap), (_, mut lap_o)) in graphs(cfg, &z)?.into_iter().zip(graphs(cfg, &zo)?) {
        let (ra, ca) = agreements(cfg, &mut lap, &clean)?;
        let (rb, cb) = agreements(cfg, &mut lap_o, &clean)?;
        let x = reconstruct(cfg, &op, &clean.measurements, &mut lap, cfg.solver.rank)?.x;
        rows.push(MethodRow {
            method,
            resp_agreement: ra,
            card_agreement: ca,
            nrmse: nrmse(&x, &clean.phantom.truth)?,
            resp_agreement_outlier: rb,
            card_agreement_outlier: cb,
        });
    }
    let mut st = Stage::new(&cfg.out_dir.join("methods"), "methods")?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.into(),
                fmt(r.resp_agreement),
                fmt(r.card_agreement),
                fmt(r.nrmse),
                fmt(r.resp_agreement_outlier),
                fmt(r.card_agreement_outlier),
                fmt(r.degradation()),
            ]
        })
        .collect();
    st.text(
        "methods.csv",
        &csv(
            &["method", "resp_agreement", "card_agreement", "nrmse", "resp_agreement_outlier", "card_agreement_outlier", "degradation"],
            &table,
        ),
    )?;
    st.finish(&cfg.to_ini())?;
    Ok(MethodsReport { rows })
}
