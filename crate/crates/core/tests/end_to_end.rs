use manifold_recon::acquisition::{add_noise, extract_navigators, noise_std_for_snr, AcquisitionSpec, Operator, SamplingMode};
use manifold_recon::embed::{embed, phase_agreement};
use manifold_recon::laplacian::{irls_estimate, IrlsParams};
use manifold_recon::phantom::{make_phantom, raised_cosine_coils, PhantomSpec};
use manifold_recon::recon::{eigen_truncate, nrmse, solve_truncated, CgOptions};

#[test]
fn navigator_graph_reconstruction_beats_gridding() {
    let spec = PhantomSpec::from_rates(32, 80, 48.73, 11.47, 0.06, vec![], 5).unwrap();
    let ph = make_phantom(&spec).unwrap();
    let acq = AcquisitionSpec::golden(32, 80, 8, 4, 32, raised_cosine_coils(32, 4).unwrap(), 0.0, SamplingMode::CartesianMask).unwrap();
    let op = Operator::new(&acq).unwrap();
    let clean = op.forward(&ph.truth).unwrap();
    let b = add_noise(&clean, noise_std_for_snr(&clean, 25.0), 6).unwrap();

    let z = extract_navigators(&b, &acq).unwrap();
    let mut lap = irls_estimate(&z, &IrlsParams::default()).unwrap().laplacian;
    let coords = embed(&mut lap, 3, false).unwrap().coords;
    let resp = (0..3)
        .map(|c| phase_agreement(coords.column(c).as_slice(), &ph.theta_r).unwrap())
        .fold(0.0, f64::max);
    assert!(resp > 0.9, "respiratory agreement {resp}");

    let basis = eigen_truncate(&mut lap, 20).unwrap();
    let x = solve_truncated(&op, &b, &basis, 3e8, CgOptions::TRUNCATED).unwrap().x;
    let ours = nrmse(&x, &ph.truth).unwrap();
    let grid = nrmse(&op.gridding(&b).unwrap(), &ph.truth).unwrap();
    assert!(ours < 0.8 * grid, "{ours} vs gridding {grid}");
}
