//! Seeded synthetic panels, blobs and regression designs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub const DIM: usize = 30;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Independent Gaussian facets, clamped into the 10..50 raw band.
pub fn facet_rows<R: Rng>(rng: &mut R, n: usize, mean: f64, sd: f64) -> Vec<[f64; DIM]> {
    let dist = Normal::new(mean, sd).unwrap();
    (0..n)
        .map(|_| std::array::from_fn(|_| dist.sample(rng).clamp(10.0, 50.0)))
        .collect()
}

/// Members drawn around a few random profiles in a centered space, so
/// pairwise cosines take both signs.
pub fn mixed_panel<R: Rng>(rng: &mut R, n: usize, profiles: usize) -> Vec<[f64; DIM]> {
    let centers: Vec<[f64; DIM]> = (0..profiles.max(1))
        .map(|_| std::array::from_fn(|_| 0.8 * gauss(rng)))
        .collect();
    (0..n)
        .map(|_| {
            let c = &centers[rng.gen_range(0..centers.len())];
            std::array::from_fn(|f| c[f] + gauss(rng))
        })
        .collect()
}

/// Integer Likert answers for a raw-item record.
pub fn likert_items<R: Rng>(rng: &mut R, count: usize, lo: u8, hi: u8) -> Vec<u8> {
    (0..count).map(|_| rng.gen_range(lo..=hi)).collect()
}

pub fn uniform_points<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

/// `k` isotropic unit-variance Gaussian blobs whose centers are pairwise at
/// least `separation` standard deviations apart. Returns points and true labels.
pub fn blobs<R: Rng>(
    rng: &mut R,
    k: usize,
    per_cluster: usize,
    dim: usize,
    separation: f64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let side = 2.0 * separation * (k as f64).powf(1.0 / dim as f64);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    while centers.len() < k {
        let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..side)).collect();
        let far = centers.iter().all(|o| {
            o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= separation
        });
        if far {
            centers.push(c);
        }
    }
    let mut points = Vec::with_capacity(k * per_cluster);
    let mut labels = Vec::with_capacity(k * per_cluster);
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..per_cluster {
            points.push(c.iter().map(|m| m + gauss(rng)).collect());
            labels.push(label);
        }
    }
    (points, labels)
}

/// Random regression design: `n` rows, `p` correlated predictors, response
/// with random coefficients plus Gaussian noise.
pub fn design<R: Rng>(rng: &mut R, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mix: Vec<Vec<f64>> = (0..p).map(|_| (0..p).map(|_| 0.5 * gauss(rng)).collect()).collect();
    let scales: Vec<f64> = (0..p).map(|_| rng.gen_range(0.5..20.0)).collect();
    let offsets: Vec<f64> = (0..p).map(|_| rng.gen_range(-50.0..50.0)).collect();
    let beta: Vec<f64> = (0..=p).map(|_| 3.0 * gauss(rng)).collect();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..p).map(|_| gauss(rng)).collect();
        let row: Vec<f64> = (0..p)
            .map(|j| {
                let corr: f64 = (0..p).map(|l| mix[j][l] * z[l]).sum();
                offsets[j] + scales[j] * (z[j] + corr)
            })
            .collect();
        let mean = beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        y.push(mean + 2.0 * gauss(rng));
        x.push(row);
    }
    (x, y)
}
