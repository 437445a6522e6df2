#![allow(dead_code)]

use kaf_core::faer::Mat;
use kaf_core::{FittedKernel, KernelSpec, NormalizationMode, NormalizedKernel, TimeSeriesDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Points on a jittered line in the plane: well separated in the first coordinate.
pub fn separated_points(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .flat_map(|j| {
            let x = (j as f64 + rng.random_range(-0.25..0.25)) / n as f64;
            [x, rng.random_range(-0.5..0.5)]
        })
        .collect()
}

pub fn random_points(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn smooth_response(points: &[f64], dim: usize) -> Vec<f64> {
    points
        .chunks(dim)
        .map(|c| (3.0 * c[0]).sin() + c[dim - 1] * c[dim - 1])
        .collect()
}

pub fn dataset(points: &[f64], dim: usize) -> TimeSeriesDataset {
    TimeSeriesDataset::new(points.to_vec(), dim, smooth_response(points, dim), 0.1).unwrap()
}

pub struct Fitted {
    pub nk: NormalizedKernel,
    pub k: Mat<f64>,
    pub p: Mat<f64>,
}

pub fn fit(spec: KernelSpec, points: &[f64], dim: usize, mode: NormalizationMode) -> Fitted {
    let kern = FittedKernel::fit(&spec, points, dim).unwrap();
    let k = kern.matrix();
    let (nk, p) = NormalizedKernel::fit(kern, k.as_ref(), mode).unwrap();
    Fitted { nk, k, p }
}

pub fn to_nalgebra(m: kaf_core::faer::MatRef<'_, f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}
