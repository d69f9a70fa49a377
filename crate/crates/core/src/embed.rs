//! Spectral embedding of the frame graph and phase binning.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::laplacian::GraphLaplacian;
use crate::linalg::sym_eig;

const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Embedding {
    /// Frames x m.
    pub coords: DMatrix<f64>,
    /// Eigenvalues of the returned coordinates.
    pub values: Vec<f64>,
    /// An eigenvalue gap at either end of the selection is numerically zero.
    pub degenerate: bool,
}

/// Eigenvectors 2..m+1 of `L`, or of `L f = s D f` when `generalized`.
/// Each column has unit norm and its largest-magnitude entry positive.
pub fn embed(lap: &mut GraphLaplacian, m: usize, generalized: bool) -> Result<Embedding> {
    let k = lap.frames();
    if m + 1 > k {
        return Err(Error::Input(format!("{m} coordinates need at least {} frames, got {k}", m + 1)));
    }
    let (values, vectors) = if generalized {
        let deg: Vec<f64> = lap.laplacian.diagonal().iter().copied().collect();
        if let Some(i) = deg.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::Numerical(format!("frame {i} has non-positive degree; generalized embedding undefined")));
        }
        let s: Vec<f64> = deg.iter().map(|d| d.sqrt().recip()).collect();
        let norm = DMatrix::from_fn(k, k, |i, j| s[i] * lap.laplacian[(i, j)] * s[j]);
        let e = sym_eig(&norm)?;
        let f = DMatrix::from_fn(k, k, |i, j| s[i] * e.vectors[(i, j)]);
        (e.values, f)
    } else {
        let e = lap.eigen()?;
        (e.values.clone(), e.vectors.clone())
    };
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let close = |a: usize, b: usize| b < k && (values[b] - values[a]).abs() <= DEGENERACY_TOL * scale;
    let degenerate = m > 0 && (close(0, 1) || close(m, m + 1));
    let mut coords = DMatrix::zeros(k, m);
    for c in 0..m {
        let mut v: DVector<f64> = vectors.column(c + 1).into_owned();
        let n = v.norm();
        if n > 0.0 {
            v /= n;
        }
        let mut at = 0;
        for i in 1..k {
            if v[i].abs() > v[at].abs() {
                at = i;
            }
        }
        if v[at] < 0.0 {
            v = -v;
        }
        coords.set_column(c, &v);
    }
    Ok(Embedding {
        coords,
        values: values[1..=m].to_vec(),
        degenerate,
    })
}

/// Equal-population bins: frames sorted by (value, index), rank `q` goes to
/// bin `floor(q n / k)`. Returns the bins and the `n - 1` interior edges
/// (midpoints between the last member of a bin and the first of the next).
pub fn quantile_bins(values: &[f64], n: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Input("need at least one bin".into()));
    }
    let k = values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut bins = vec![0; k];
    for (q, &i) in order.iter().enumerate() {
        bins[i] = q * n / k.max(1);
    }
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for b in 1..n {
        let first = (b * k).div_ceil(n);
        if first == 0 || first >= k {
            edges.push(f64::NAN);
        } else {
            edges.push(0.5 * (values[order[first - 1]] + values[order[first]]));
        }
    }
    Ok((bins, edges))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinAssignment {
    pub n_resp: usize,
    pub n_card: usize,
    pub resp: Vec<usize>,
    pub card: Vec<usize>,
    pub resp_edges: Vec<f64>,
    pub card_edges: Vec<f64>,
}

impl BinAssignment {
    pub fn frames(&self) -> usize {
        self.resp.len()
    }

    /// Flattened bin index `resp * n_card + card` per frame.
    pub fn flat(&self) -> Vec<usize> {
        self.resp.iter().zip(&self.card).map(|(r, c)| r * self.n_card + c).collect()
    }

    pub fn populations(&self) -> Vec<usize> {
        let mut p = vec![0; self.n_resp * self.n_card];
        for b in self.flat() {
            p[b] += 1;
        }
        p
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame_index,resp_bin,card_bin\n");
        for (t, (r, c)) in self.resp.iter().zip(&self.card).enumerate() {
            s.push_str(&format!("{t},{r},{c}\n"));
        }
        s
    }
}

/// Respiratory bins from column `resp_col`, cardiac bins from `card_col`.
pub fn assign_bins_by(coords: &DMatrix<f64>, resp_col: usize, card_col: usize, n_resp: usize, n_card: usize) -> Result<BinAssignment> {
    if resp_col >= coords.ncols() || card_col >= coords.ncols() {
        return Err(Error::Dimension(format!(
            "coordinate columns {resp_col}, {card_col} outside {} columns",
            coords.ncols()
        )));
    }
    let col = |c: usize| coords.column(c).iter().copied().collect::<Vec<_>>();
    let (resp, resp_edges) = quantile_bins(&col(resp_col), n_resp)?;
    let (card, card_edges) = quantile_bins(&col(card_col), n_card)?;
    Ok(BinAssignment {
        n_resp,
        n_card,
        resp,
        card,
        resp_edges,
        card_edges,
    })
}

/// First coordinate drives respiratory bins, second cardiac bins.
pub fn assign_bins(coords: &DMatrix<f64>, n_resp: usize, n_card: usize) -> Result<BinAssignment> {
    if coords.ncols() < 2 {
        return Err(Error::Dimension(format!("binning needs two coordinates, got {}", coords.ncols())));
    }
    assign_bins_by(coords, 0, 1, n_resp, n_card)
}

/// `|corr(coord, a cos(theta) + b sin(theta))|` for the least-squares `a, b`.
pub fn phase_agreement(coord: &[f64], theta: &[f64]) -> Result<f64> {
    if coord.len() != theta.len() {
        return Err(Error::Dimension(format!("{} coordinates vs {} phases", coord.len(), theta.len())));
    }
    let k = coord.len();
    if k < 3 {
        return Ok(0.0);
    }
    let a = DMatrix::from_fn(k, 3, |i, j| match j {
        0 => 1.0,
        1 => theta[i].cos(),
        _ => theta[i].sin(),
    });
    let y = DVector::from_column_slice(coord);
    let fit = match a.clone().svd(true, true).solve(&y, 1e-12) {
        Ok(c) => &a * c,
        Err(_) => return Ok(0.0),
    };
    Ok(correlation(coord, fit.as_slice()).abs())
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    let scale = 1e-24 * (1.0 + ma * ma + mb * mb) * n;
    if saa <= scale || sbb <= scale {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoordinateMatch {
    pub resp_col: usize,
    pub card_col: usize,
    pub resp_agreement: f64,
    pub card_agreement: f64,
    /// The best respiratory coordinate comes after the cardiac one.
    pub swapped: bool,
}

/// Picks the distinct coordinate pair maximizing the summed agreement with
/// the respiratory and cardiac phases.
pub fn match_coordinates(coords: &DMatrix<f64>, theta_r: &[f64], theta_c: &[f64]) -> Result<CoordinateMatch> {
    let m = coords.ncols();
    if m < 2 {
        return Err(Error::Dimension(format!("need two coordinates, got {m}")));
    }
    let col = |c: usize| coords.column(c).iter().copied().collect::<Vec<_>>();
    let ar: Vec<f64> = (0..m).map(|c| phase_agreement(&col(c), theta_r)).collect::<Result<_>>()?;
    let ac: Vec<f64> = (0..m).map(|c| phase_agreement(&col(c), theta_c)).collect::<Result<_>>()?;
    let mut best: Option<CoordinateMatch> = None;
    for r in 0..m {
        for c in 0..m {
            if r == c {
                continue;
            }
            if best.is_none_or(|b| ar[r] + ac[c] > b.resp_agreement + b.card_agreement) {
                best = Some(CoordinateMatch {
                    resp_col: r,
                    card_col: c,
                    resp_agreement: ar[r],
                    card_agreement: ac[c],
                    swapped: r > c,
                });
            }
        }
    }
    Ok(best.unwrap())
}

/// Circular standard deviation `sqrt(-2 ln R)` of angles in radians.
pub fn circular_std(angles: &[f64]) -> f64 {
    if angles.is_empty() {
        return f64::NAN;
    }
    let n = angles.len() as f64;
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let r = ((s / n).powi(2) + (c / n).powi(2)).sqrt().min(1.0);
    if r == 0.0 {
        return f64::INFINITY;
    }
    (-2.0 * r.ln()).max(0.0).sqrt()
}

/// Circular spread of `theta` within each bin of `bins` (`None` if empty).
pub fn bin_spreads(theta: &[f64], bins: &[usize], n_bins: usize) -> Vec<Option<f64>> {
    let mut groups = vec![Vec::new(); n_bins];
    for (a, &b) in theta.iter().zip(bins) {
        groups[b].push(*a);
    }
    groups.iter().map(|g| (!g.is_empty()).then(|| circular_std(g))).collect()
}

#[derive(Clone, Debug)]
pub struct GatedImages {
    /// Indexed by `resp * n_card + card`; `None` for empty bins.
    pub images: Vec<Option<DVector<Complex64>>>,
    pub counts: Vec<usize>,
}

impl GatedImages {
    pub fn empty_bins(&self) -> Vec<usize> {
        self.counts.iter().enumerate().filter(|(_, &c)| c == 0).map(|(i, _)| i).collect()
    }
}

pub fn gated_export(x: &DMatrix<Complex64>, bins: &BinAssignment) -> Result<GatedImages> {
    if x.ncols() != bins.frames() {
        return Err(Error::Dimension(format!("{} frames vs {} bin labels", x.ncols(), bins.frames())));
    }
    let nb = bins.n_resp * bins.n_card;
    let mut sums: Vec<DVector<Complex64>> = vec![DVector::zeros(x.nrows()); nb];
    let mut counts = vec![0usize; nb];
    for (t, b) in bins.flat().into_iter().enumerate() {
        sums[b] += x.column(t);
        counts[b] += 1;
    }
    let images = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s / Complex64::new(c as f64, 0.0)))
        .collect();
    Ok(GatedImages { images, counts })
}

/// Sum of squared forward differences of the magnitude image.
pub fn gradient_energy(img: &[Complex64], grid: usize) -> f64 {
    let mag = |iy: usize, ix: usize| img[iy * grid + ix].norm();
    let mut e = 0.0;
    for iy in 0..grid {
        for ix in 0..grid {
            if ix + 1 < grid {
                e += (mag(iy, ix + 1) - mag(iy, ix)).powi(2);
            }
            if iy + 1 < grid {
                e += (mag(iy + 1, ix) - mag(iy, ix)).powi(2);
            }
        }
    }
    e
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_phase(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_cluster_laplacian() -> GraphLaplacian {
        let mut w = DMatrix::zeros(10, 10);
        for i in 0..10 {
            for j in 0..10 {
                if i != j {
                    w[(i, j)] = if (i < 5) == (j < 5) { 1.0 } else { 0.01 };
                }
            }
        }
        GraphLaplacian::from_weights(w).unwrap()
    }

    #[test]
    fn first_coordinate_bipartitions_clusters() {
        let mut lap = two_cluster_laplacian();
        let e = embed(&mut lap, 2, false).unwrap();
        let c = e.coords.column(0);
        let s0 = c[0].signum();
        assert!((0..5).all(|i| c[i].signum() == s0));
        assert!((5..10).all(|i| c[i].signum() == -s0));
        let g = embed(&mut lap, 1, true).unwrap();
        let c = g.coords.column(0);
        assert!((0..5).all(|i| c[i].signum() == c[0].signum()) && c[0].signum() != c[9].signum());
    }

    #[test]
    fn constant_vector_is_skipped_and_columns_normalized() {
        let mut lap = two_cluster_laplacian();
        let e = embed(&mut lap, 4, false).unwrap();
        for c in e.coords.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
            assert!(c.sum().abs() < 1e-8);
            let big = c.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(big > 0.0);
        }
        assert_eq!(embed(&mut lap, 0, false).unwrap().coords.ncols(), 0);
        assert!(embed(&mut lap, 10, false).is_err());
    }

    #[test]
    fn degenerate_cut_is_flagged() {
        let mut lap = two_cluster_laplacian();
        // Eigenvalues beyond the Fiedler value repeat within each block.
        assert!(embed(&mut lap, 2, false).unwrap().degenerate);
        let mut w = DMatrix::zeros(6, 6);
        for i in 0..5 {
            w[(i, i + 1)] = 1.0 + i as f64 * 0.3;
            w[(i + 1, i)] = 1.0 + i as f64 * 0.3;
        }
        let mut path = GraphLaplacian::from_weights(w).unwrap();
        assert!(!embed(&mut path, 2, false).unwrap().degenerate);
    }

    #[test]
    fn embedding_invariant_to_laplacian_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = DMatrix::from_fn(12, 12, |_, _| rng.random::<f64>());
        let mut a = GraphLaplacian::from_weights(w.clone()).unwrap();
        let mut b = GraphLaplacian::from_weights(w * 7.5).unwrap();
        let ea = embed(&mut a, 3, false).unwrap();
        let eb = embed(&mut b, 3, false).unwrap();
        assert!((ea.coords - eb.coords).norm() < 1e-9);
    }

    #[test]
    fn quantile_bin_examples() {
        let coords = DMatrix::from_fn(8, 2, |i, j| if j == 0 { i as f64 } else { -(i as f64) });
        let b = assign_bins(&coords, 4, 2).unwrap();
        assert_eq!(b.resp, vec![0, 0, 1, 1, 2, 2, 3, 3]);
        assert_eq!(b.card, vec![1, 1, 1, 1, 0, 0, 0, 0]);
        assert_eq!(b.resp_edges, vec![1.5, 3.5, 5.5]);
        let one = assign_bins(&coords, 1, 1).unwrap();
        assert!(one.resp.iter().chain(&one.card).all(|&v| v == 0));
        assert!(assign_bins(&DMatrix::zeros(8, 1), 2, 2).is_err());
    }

    #[test]
    fn ties_broken_by_index_and_populations_balanced() {
        let (bins, _) = quantile_bins(&[1.0; 7], 3).unwrap();
        assert_eq!(bins, vec![0, 0, 0, 1, 1, 2, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..301).map(|_| rng.random::<f64>()).collect();
        for n in [1, 4, 7, 8] {
            let (bins, _) = quantile_bins(&v, n).unwrap();
            let mut pop = vec![0; n];
            bins.iter().for_each(|&b| pop[b] += 1);
            assert!(pop.iter().max().unwrap() - pop.iter().min().unwrap() <= 1);
            assert_eq!(pop.iter().sum::<usize>(), 301);
        }
    }

    #[test]
    fn phase_agreement_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let th: Vec<f64> = (0..300).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        let c: Vec<f64> = th.iter().map(|t| t.cos()).collect();
        assert!((phase_agreement(&c, &th).unwrap() - 1.0).abs() < 1e-12);
        let mix: Vec<f64> = th.iter().map(|t| 0.3 * t.cos() - 2.0 * t.sin() + 4.0).collect();
        assert!((phase_agreement(&mix, &th).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(phase_agreement(&[2.0; 300], &th).unwrap(), 0.0);
        assert!(phase_agreement(&c[..10], &th).is_err());
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let noise: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
            worst = worst.max(phase_agreement(&noise, &th).unwrap());
        }
        assert!(worst < 0.3, "{worst}");
    }

    #[test]
    fn match_prefers_the_right_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let tr: Vec<f64> = (0..200).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        let tc: Vec<f64> = (0..200).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        let coords = DMatrix::from_fn(200, 3, |i, j| match j {
            0 => rng.random::<f64>(),
            1 => tc[i].sin(),
            _ => tr[i].cos(),
        });
        let m = match_coordinates(&coords, &tr, &tc).unwrap();
        assert_eq!((m.resp_col, m.card_col, m.swapped), (2, 1, true));
    }

    #[test]
    fn circular_std_examples() {
        assert!(circular_std(&[0.3; 5]) < 1e-7);
        let spread = circular_std(&[0.0, PI]);
        assert!(spread.is_infinite() || spread > 5.0);
        let near = circular_std(&[2.0 * PI - 0.05, 0.05]);
        assert!((near - 0.05).abs() < 1e-3);
        assert_eq!(bin_spreads(&[0.1, 0.2], &[0, 0], 2)[1], None);
    }

    #[test]
    fn gated_export_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DMatrix::from_fn(9, 4, |_, _| Complex64::new(rng.random::<f64>(), 0.0));
        let coords = DMatrix::from_fn(4, 2, |i, j| if j == 0 { (i / 2) as f64 } else { (i % 2) as f64 });
        let bins = assign_bins(&coords, 2, 2).unwrap();
        let g = gated_export(&x, &bins).unwrap();
        for t in 0..4 {
            let b = bins.flat()[t];
            assert_eq!(g.images[b].as_ref().unwrap(), &x.column(t).into_owned());
        }
        let same = DMatrix::from_fn(9, 6, |i, _| Complex64::new(i as f64, 1.0));
        let coords = DMatrix::from_fn(6, 2, |i, j| (i * (j + 1)) as f64);
        let bins = assign_bins(&coords, 2, 3).unwrap();
        let g = gated_export(&same, &bins).unwrap();
        let first = g.images.iter().flatten().next().unwrap().clone();
        assert!(g.images.iter().flatten().all(|im| *im == first));
        assert_eq!(g.counts.iter().sum::<usize>(), 6);
        assert!(!g.empty_bins().is_empty());
        assert!(gated_export(&same.columns(0, 5).into_owned(), &bins).is_err());
    }

    #[test]
    fn gradient_energy_of_flat_image_is_zero() {
        let flat = vec![Complex64::new(2.0, 0.0); 16];
        assert_eq!(gradient_energy(&flat, 4), 0.0);
        let mut step = flat.clone();
        step[5] = Complex64::new(3.0, 0.0);
        assert_eq!(gradient_energy(&step, 4), 4.0);
    }
}
