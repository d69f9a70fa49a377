//! Workflow stages, in memory and as file-producing commands.

use std::fmt::Write as _;

use manifold_recon::acquisition::{
    add_noise, extract_navigator_subset, nav_angles_for_count, noise_std_for_snr, AcquisitionSpec, Operator,
};
use manifold_recon::embed::{
    assign_bins, assign_bins_by, bin_spreads, embed, gated_export, match_coordinates, phase_agreement, BinAssignment, CoordinateMatch,
    Embedding, GatedImages,
};
use manifold_recon::laplacian::{irls_estimate, GraphLaplacian, IrlsResult};
use manifold_recon::phantom::{inject_bulk_shift, make_phantom, raised_cosine_coils, Phantom, PhantomSpec};
use manifold_recon::recon::{eigen_truncate, nrmse, solve_full, solve_truncated, CgOptions, Solution};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{csv, read_complex, read_real, read_vector, Stage};

pub struct Simulation {
    pub spec: PhantomSpec,
    pub phantom: Phantom,
    pub acq: AcquisitionSpec,
    pub clean: DMatrix<Complex64>,
    pub measurements: DMatrix<Complex64>,
}

pub fn noise_seed(cfg: &RunConfig) -> u64 {
    cfg.seed.wrapping_add(1)
}

pub fn phantom_spec(cfg: &RunConfig) -> Result<PhantomSpec> {
    let p = &cfg.phantom;
    Ok(PhantomSpec::from_rates(
        p.grid,
        p.frames,
        p.cardiac_rate,
        p.resp_rate,
        p.resp_amplitude,
        p.episodes.clone(),
        cfg.seed,
    )?)
}

/// Noise-free acquisition description for `frames` frames.
pub fn acquisition(cfg: &RunConfig, frames: usize) -> Result<AcquisitionSpec> {
    let a = &cfg.acquisition;
    let mut acq = AcquisitionSpec::golden(
        cfg.phantom.grid,
        frames,
        a.lines_per_frame,
        a.nav_count,
        cfg.samples_per_spoke(),
        raised_cosine_coils(cfg.phantom.grid, a.coils)?,
        0.0,
        a.mode,
    )?;
    acq.kspace_extent = a.kspace_extent;
    acq.validate()?;
    Ok(acq)
}

/// Simulates `spec`, optionally shifting one frame rigidly before sampling.
pub fn simulate_spec(cfg: &RunConfig, spec: PhantomSpec, snr_db: Option<f64>, outlier: Option<(usize, i64)>) -> Result<Simulation> {
    let mut phantom = make_phantom(&spec)?;
    if let Some((frame, shift)) = outlier {
        inject_bulk_shift(&mut phantom.truth, spec.grid, frame, shift);
    }
    let mut acq = acquisition(cfg, spec.frames())?;
    let op = Operator::new(&acq)?;
    let clean = op.forward(&phantom.truth)?;
    acq.noise_std = snr_db.map_or(0.0, |db| noise_std_for_snr(&clean, db));
    let measurements = add_noise(&clean, acq.noise_std, noise_seed(cfg))?;
    Ok(Simulation {
        spec,
        phantom,
        acq,
        clean,
        measurements,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    simulate_spec(cfg, phantom_spec(cfg)?, cfg.acquisition.snr_db, None)
}

/// Navigator matrix from the first `count` navigator angles of the 1/2/4 set.
pub fn navigators(b: &DMatrix<Complex64>, acq: &AcquisitionSpec, count: usize) -> Result<DMatrix<Complex64>> {
    Ok(extract_navigator_subset(b, acq, &nav_angles_for_count(count)?)?)
}

pub fn estimate(cfg: &RunConfig, z: &DMatrix<Complex64>) -> Result<IrlsResult> {
    Ok(irls_estimate(z, &cfg.irls.params)?)
}

pub fn solver_options(cfg: &RunConfig) -> CgOptions {
    if cfg.solver.full {
        CgOptions {
            tol: cfg.solver.tol.min(CgOptions::FULL.tol),
            max_iter: cfg.solver.max_iter.max(CgOptions::FULL.max_iter),
        }
    } else {
        CgOptions {
            tol: cfg.solver.tol,
            max_iter: cfg.solver.max_iter,
        }
    }
}

pub fn reconstruct(cfg: &RunConfig, op: &Operator, b: &DMatrix<Complex64>, lap: &mut GraphLaplacian, rank: usize) -> Result<Solution> {
    let opts = solver_options(cfg);
    if cfg.solver.full {
        return Ok(solve_full(op, b, lap, cfg.solver.lambda, opts, false)?);
    }
    let basis = eigen_truncate(lap, rank.min(lap.frames()))?;
    Ok(solve_truncated(op, b, &basis, cfg.solver.lambda, opts)?)
}

/// Frames whose |displacement| exceeds its `q` quantile, and the rest.
pub fn motion_split(displacement: &[f64], q: f64) -> (Vec<usize>, Vec<usize>) {
    let mut mags: Vec<f64> = displacement.iter().map(|d| d.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let cut = quantile_sorted(&mags, q);
    (0..displacement.len()).partition(|&t| displacement[t].abs() > cut)
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub struct BinResult {
    pub embedding: Embedding,
    pub bins: BinAssignment,
    pub gated: GatedImages,
}

pub fn bin(cfg: &RunConfig, lap: &mut GraphLaplacian, x: &DMatrix<Complex64>) -> Result<BinResult> {
    let embedding = embed(lap, cfg.binning.dims, cfg.binning.generalized)?;
    let bins = assign_bins(&embedding.coords, cfg.binning.n_resp, cfg.binning.n_card)?;
    let gated = gated_export(x, &bins)?;
    Ok(BinResult { embedding, bins, gated })
}

/// Best single-coordinate agreement with each phase over the embedding.
pub fn best_agreements(coords: &DMatrix<f64>, theta_r: &[f64], theta_c: &[f64]) -> Result<(f64, f64)> {
    let mut best = (0.0f64, 0.0f64);
    for c in coords.column_iter() {
        let v: Vec<f64> = c.iter().copied().collect();
        best.0 = best.0.max(phase_agreement(&v, theta_r)?);
        best.1 = best.1.max(phase_agreement(&v, theta_c)?);
    }
    Ok(best)
}

fn column(m: &DMatrix<f64>, c: usize) -> Vec<f64> {
    m.column(c).iter().copied().collect()
}

/// θ_c spread per cardiac bin when binning on the auto-matched coordinates.
pub fn matched_card_spreads(cfg: &RunConfig, coords: &DMatrix<f64>, m: &CoordinateMatch, theta_c: &[f64]) -> Result<Vec<Option<f64>>> {
    let bins = assign_bins_by(coords, m.resp_col, m.card_col, cfg.binning.n_resp, cfg.binning.n_card)?;
    Ok(bin_spreads(theta_c, &bins.card, cfg.binning.n_card))
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Simulation> {
    let sim = simulate(cfg)?;
    let mut st = Stage::new(&cfg.out_dir, "simulate")?;
    let g = cfg.phantom.grid;
    st.complex("truth.bstm", &sim.phantom.truth)?;
    st.complex("measurements.bstm", &sim.measurements)?;
    st.complex("navigators.bstm", &navigators(&sim.measurements, &sim.acq, cfg.acquisition.nav_count)?)?;
    st.vector("theta_c.bstm", &sim.phantom.theta_c)?;
    st.vector("theta_r.bstm", &sim.phantom.theta_r)?;
    st.vector("displacement.bstm", &sim.phantom.displacement)?;
    st.complex("coil_maps.bstm", &sim.acq.coil_maps)?;
    let k = sim.acq.frames();
    let angles = DMatrix::from_fn(k, cfg.acquisition.lines_per_frame, |t, l| sim.acq.frame_angles(t)[l]);
    st.real("trajectory.bstm", &angles)?;
    st.text("noise.txt", &format!("noise_std {:e}\n", sim.acq.noise_std))?;
    st.pgm("truth_frame0.pgm", sim.phantom.truth.column(0).as_slice(), g, None)?;
    st.finish(&cfg.to_ini())?;
    Ok(sim)
}

pub fn cmd_estimate(cfg: &RunConfig) -> Result<IrlsResult> {
    let dir = &cfg.out_dir;
    let b = read_complex(dir, "measurements.bstm", "simulate")?;
    let acq = acquisition(cfg, b.ncols())?;
    let z = navigators(&b, &acq, cfg.irls.navigators)?;
    let mut res = estimate(cfg, &z)?;
    let mut st = Stage::new(dir, "estimate")?;
    st.complex("denoised_navigators.bstm", &res.denoised)?;
    st.real("weights.bstm", &res.laplacian.weights)?;
    st.real("laplacian.bstm", &res.laplacian.laplacian)?;
    let eig = res.laplacian.eigen()?.clone();
    st.vector("eigenvalues.bstm", &eig.values)?;
    st.real("eigenvectors.bstm", &eig.vectors)?;
    let mut log = String::from("# n gamma cost stationarity\n");
    for it in &res.trace {
        let _ = writeln!(log, "{} {:e} {:e} {:e}", it.n, it.gamma, it.cost, it.stationarity);
    }
    st.text("irls_trace.txt", &log)?;
    st.text(
        "estimate_metrics.csv",
        &csv(
            &["sigma", "mu", "sigma_fallback", "disconnected"],
            &[vec![
                format!("{:e}", res.sigma),
                format!("{:e}", res.mu),
                res.sigma_fallback.to_string(),
                res.laplacian.disconnected.to_string(),
            ]],
        ),
    )?;
    st.finish(&cfg.to_ini())?;
    Ok(res)
}

fn load_laplacian(cfg: &RunConfig) -> Result<GraphLaplacian> {
    Ok(GraphLaplacian::from_weights(read_real(&cfg.out_dir, "weights.bstm", "estimate")?)?)
}

pub struct ReconOutputs {
    pub solution: Solution,
    pub baseline: DMatrix<Complex64>,
    pub nrmse: Option<(f64, f64)>,
}

pub fn cmd_reconstruct(cfg: &RunConfig) -> Result<ReconOutputs> {
    let dir = &cfg.out_dir;
    let b = read_complex(dir, "measurements.bstm", "simulate")?;
    let mut lap = load_laplacian(cfg)?;
    let acq = acquisition(cfg, b.ncols())?;
    let op = Operator::new(&acq)?;
    let solution = reconstruct(cfg, &op, &b, &mut lap, cfg.solver.rank)?;
    let baseline = op.gridding(&b)?;
    let truth = dir.join("truth.bstm").exists().then(|| read_complex(dir, "truth.bstm", "simulate")).transpose()?;
    let scores = truth
        .as_ref()
        .map(|t| -> Result<(f64, f64)> { Ok((nrmse(&solution.x, t)?, nrmse(&baseline, t)?)) })
        .transpose()?;
    let mut st = Stage::new(dir, "reconstruct")?;
    if let Some(u) = &solution.coeffs {
        st.complex("coefficients.bstm", u)?;
    }
    st.complex("recon.bstm", &solution.x)?;
    st.complex("baseline.bstm", &baseline)?;
    let mut log = String::from("# iteration rel_residual objective\n");
    for s in &solution.log {
        let _ = writeln!(log, "{} {:e} {:e}", s.iteration, s.rel_residual, s.objective);
    }
    st.text("cg_log.txt", &log)?;
    let mut rows = vec![
        vec!["method".into(), if cfg.solver.full { "full" } else { "truncated" }.into()],
        vec!["iterations".into(), solution.log.len().to_string()],
        vec!["converged".into(), solution.converged.to_string()],
    ];
    if let Some((r, g)) = scores {
        rows.push(vec!["nrmse_recon".into(), format!("{r:.6}")]);
        rows.push(vec!["nrmse_baseline".into(), format!("{g:.6}")]);
    }
    st.text("recon_metrics.csv", &csv(&["metric", "value"], &rows))?;
    let g = cfg.phantom.grid;
    st.pgm("recon_frame0.pgm", solution.x.column(0).as_slice(), g, None)?;
    st.pgm("baseline_frame0.pgm", baseline.column(0).as_slice(), g, None)?;
    st.finish(&cfg.to_ini())?;
    Ok(ReconOutputs {
        solution,
        baseline,
        nrmse: scores,
    })
}

pub struct BinOutputs {
    pub result: BinResult,
    pub matched: Option<CoordinateMatch>,
}

pub fn cmd_bin(cfg: &RunConfig) -> Result<BinOutputs> {
    let dir = &cfg.out_dir;
    let x = read_complex(dir, "recon.bstm", "reconstruct")?;
    let mut lap = load_laplacian(cfg)?;
    let result = bin(cfg, &mut lap, &x)?;
    let phases = if dir.join("theta_r.bstm").exists() {
        Some((read_vector(dir, "theta_r.bstm", "simulate")?, read_vector(dir, "theta_c.bstm", "simulate")?))
    } else {
        None
    };
    let mut st = Stage::new(dir, "bin")?;
    st.real("embedding.bstm", &result.embedding.coords)?;
    st.text("bins.csv", &result.bins.to_csv())?;
    let g = cfg.phantom.grid;
    let nc = cfg.binning.n_card;
    for (i, img) in result.gated.images.iter().enumerate() {
        if let Some(img) = img {
            let name = format!("bin_r{}_c{}", i / nc, i % nc);
            st.complex(&format!("{name}.bstm"), &DMatrix::from_column_slice(img.len(), 1, img.as_slice()))?;
            st.pgm(&format!("{name}.pgm"), img.as_slice(), g, None)?;
        }
    }
    let mut rows = vec![
        vec!["degenerate_embedding".into(), result.embedding.degenerate.to_string()],
        vec!["empty_bins".into(), result.gated.empty_bins().len().to_string()],
    ];
    let mut matched = None;
    if let Some((tr, tc)) = &phases {
        let m = match_coordinates(&result.embedding.coords, tr, tc)?;
        for c in 0..result.embedding.coords.ncols() {
            let v = column(&result.embedding.coords, c);
            rows.push(vec![format!("agreement_resp_coord{}", c + 1), format!("{:.6}", phase_agreement(&v, tr)?)]);
            rows.push(vec![format!("agreement_card_coord{}", c + 1), format!("{:.6}", phase_agreement(&v, tc)?)]);
        }
        rows.push(vec!["matched_resp_coord".into(), (m.resp_col + 1).to_string()]);
        rows.push(vec!["matched_card_coord".into(), (m.card_col + 1).to_string()]);
        rows.push(vec!["order_swapped".into(), m.swapped.to_string()]);
        let spreads = matched_card_spreads(cfg, &result.embedding.coords, &m, tc)?;
        for (i, s) in spreads.iter().enumerate() {
            rows.push(vec![format!("card_bin{i}_theta_c_spread"), s.map_or("empty".into(), |v| format!("{v:.6}"))]);
        }
        matched = Some(m);
    }
    st.text("bin_metrics.csv", &csv(&["metric", "value"], &rows))?;
    st.finish(&cfg.to_ini())?;
    Ok(BinOutputs { result, matched })
}

pub fn cmd_all(cfg: &RunConfig) -> Result<()> {
    cmd_simulate(cfg)?;
    cmd_estimate(cfg)?;
    cmd_reconstruct(cfg)?;
    cmd_bin(cfg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motion_split_uses_quantile() {
        let d: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        let (hi, lo) = motion_split(&d, 0.75);
        assert_eq!(hi, vec![0, 7]);
        assert_eq!(lo.len(), 6);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0], 0.5), 2.0);
    }
}
