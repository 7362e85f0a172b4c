//! Synthetic dataset generators for the toy experiments.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::io::Dataset;
use crate::CliError;

/// Points on the unit circle embedded in the z=0 plane of R³, plus isotropic
/// Gaussian noise. Unlabeled.
pub fn circle3d(n_samples: usize, noise: f64, seed: u64) -> Result<Dataset, CliError> {
    if n_samples == 0 {
        return Err(CliError::config(
            "circle3d needs at least one sample".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut x = Array2::<f64>::zeros((n_samples, 3));
    for i in 0..n_samples {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        x[[i, 0]] = theta.cos();
        x[[i, 1]] = theta.sin();
        if noise > 0.0 {
            for j in 0..3 {
                let g: f64 = normal.sample(&mut rng);
                x[[i, j]] += noise * g;
            }
        }
    }
    Ok(Dataset {
        x,
        labels: None,
        name: "circle3d".into(),
    })
}

/// Gaussian blobs in R³ with per-cluster sizes, labeled by cluster.
///
/// Centers sit on a 3D grid scaled by `separation`, so any two centers are
/// at least `separation` apart.
pub fn blobs(sizes: &[usize], separation: f64, noise: f64, seed: u64) -> Result<Dataset, CliError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(CliError::config("blob sizes must be positive".into()));
    }
    if separation <= 0.0 {
        return Err(CliError::config("separation must be positive".into()));
    }
    let k = sizes.len();
    let total: usize = sizes.iter().sum();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    // Grid side chosen to fit k centers.
    let side = (k as f64).cbrt().ceil() as usize;
    let centers: Vec<[f64; 3]> = (0..k)
        .map(|c| {
            [
                (c % side) as f64 * separation,
                ((c / side) % side) as f64 * separation,
                (c / (side * side)) as f64 * separation,
            ]
        })
        .collect();
    let mut x = Array2::<f64>::zeros((total, 3));
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for (c, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            for j in 0..3 {
                let g: f64 = normal.sample(&mut rng);
                x[[row, j]] = centers[c][j] + noise * g;
            }
            labels.push(c);
            row += 1;
        }
    }
    Ok(Dataset {
        x,
        labels: Some(labels),
        name: "blobs".into(),
    })
}
