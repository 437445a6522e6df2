mod common;

use std::sync::Arc;

use common::{dataset, fit, random_points, separated_points};
use kaf_core::dataset::{analog_vector, delay_embed};
use kaf_core::eval::rmse;
use kaf_core::faer::Mat;
use kaf_core::forecast::{fit_kpcr, KrrModel};
use kaf_core::normalization::{diffusion_normalize, markov_normalize};
use kaf_core::spectral::{biorthogonal_decompose, eigendecompose};
use kaf_core::{
    Bandwidth, Basis, BiorthogonalBasis, KernelSpec, NormalizationMode, ResponseTransform, SpectralBasis,
    TimeSeriesDataset,
};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

fn row_mean_error(p: &Mat<f64>) -> f64 {
    let n = p.nrows() as f64;
    (0..p.nrows())
        .map(|i| ((0..p.ncols()).map(|j| p[(i, j)]).sum::<f64>() / n - 1.0).abs())
        .fold(0.0, f64::max)
}

fn orthonormality_error(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let n = a.nrows() as f64;
    let mut worst: f64 = 0.0;
    for i in 0..a.ncols() {
        for k in 0..b.ncols() {
            let g = (0..a.nrows()).map(|j| a[(j, i)] * b[(j, k)]).sum::<f64>() / n;
            let target = if i == k { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

/// `max_i |(1/n) P v_i - lambda_i v_i|_inf`.
fn eigen_residual(p: &Mat<f64>, values: &[f64], vectors: &Mat<f64>) -> f64 {
    let n = p.nrows();
    let mut worst: f64 = 0.0;
    for (i, l) in values.iter().enumerate() {
        for r in 0..n {
            let pv = (0..n).map(|j| p[(r, j)] * vectors[(j, i)]).sum::<f64>() / n as f64;
            worst = worst.max((pv - l * vectors[(r, i)]).abs());
        }
    }
    worst
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn analog_vector_matches_definition(ys in prop::collection::vec(-5.0f64..5.0, 1..30), q_frac in 0.0f64..1.0) {
        let n = ys.len();
        let q = (q_frac * n as f64) as usize;
        let ds = TimeSeriesDataset::new(vec![0.0; n], 1, ys.clone(), 0.5).unwrap();
        let a = analog_vector(&ds, q, ResponseTransform::Identity).unwrap();
        for j in 0..n {
            let expect = if j + q < n { ys[j + q] } else { 0.0 };
            prop_assert_eq!(a.values[j], expect);
        }
        prop_assert!((a.tau - q as f64 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn delay_embedding_shapes(n in 1usize..30, lags in 1usize..6, seed in 0u64..1000) {
        prop_assume!(lags <= n);
        let pts = random_points(n, 2, seed);
        let ds = dataset(&pts, 2);
        let e = delay_embed(&ds, lags).unwrap();
        prop_assert_eq!(e.n(), n - lags + 1);
        prop_assert_eq!(e.dim(), 2 * lags);
        for j in 0..e.n() {
            prop_assert_eq!(e.responses()[j], ds.responses()[j + lags - 1]);
            for lag in 0..lags {
                prop_assert_eq!(&e.covariate(j)[2 * lag..2 * lag + 2], ds.covariate(j + lags - 1 - lag));
            }
        }
    }

    #[test]
    fn markov_normalizations(n in 5usize..50, eps in 0.05f64..2.0, alpha in 0.0f64..1.5, seed in 0u64..1000) {
        let pts = random_points(n, 2, seed);
        let k = kaf_core::FittedKernel::fit(&KernelSpec::gaussian(Bandwidth::Fixed(eps)), &pts, 2).unwrap().matrix();
        let (p, _, _) = markov_normalize(k.as_ref()).unwrap();
        prop_assert!(row_mean_error(&p) < 1e-10);
        for i in 0..n {
            for j in 0..n {
                prop_assert!((p[(i, j)] - p[(j, i)]).abs() <= 1e-12);
            }
        }
        let (pd, _, _, d) = diffusion_normalize(k.as_ref(), alpha).unwrap();
        prop_assert!(row_mean_error(&pd) < 1e-10);
        for i in 0..n {
            for j in 0..n {
                prop_assert!((d[i] * pd[(i, j)] - d[j] * pd[(j, i)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn markov_spectrum(n in 8usize..60, eps in 0.05f64..1.0, seed in 0u64..1000) {
        let pts = random_points(n, 2, seed);
        let f = fit(KernelSpec::gaussian(Bandwidth::Fixed(eps)), &pts, 2, NormalizationMode::SymmetricMarkov);
        let ell = 5.min(n);
        let Ok((values, phis)) = eigendecompose(f.p.as_ref(), ell) else {
            return Err(TestCaseError::reject("numerically rank deficient"));
        };
        prop_assert!((values[0] - 1.0).abs() < 1e-8);
        let top: Vec<f64> = (0..n).map(|j| phis[(j, 0)]).collect();
        let spread = top.iter().cloned().fold(f64::MIN, f64::max) - top.iter().cloned().fold(f64::MAX, f64::min);
        prop_assert!(spread / top[0].abs() < 1e-6);
        prop_assert!(values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(*values.last().unwrap() > 0.0);
        prop_assert!(orthonormality_error(&phis, &phis) < 1e-10);
        prop_assert!(eigen_residual(&f.p, &values, &phis) <= 1e-8 * values[0].max(1.0));
    }

    #[test]
    fn biorthogonal_system(n in 8usize..50, eps in 0.05f64..1.0, alpha in 0.0f64..1.5, seed in 0u64..1000) {
        let pts = random_points(n, 2, seed);
        let k = kaf_core::FittedKernel::fit(&KernelSpec::gaussian(Bandwidth::Fixed(eps)), &pts, 2).unwrap().matrix();
        let Ok((etas, xis, xi_primes, _)) = biorthogonal_decompose(k.as_ref(), alpha, 5) else {
            return Err(TestCaseError::reject("numerically rank deficient"));
        };
        prop_assert!(orthonormality_error(&xi_primes, &xis) < 1e-8);
        let (p, _, _, _) = diffusion_normalize(k.as_ref(), alpha).unwrap();
        prop_assert!(eigen_residual(&p, &etas, &xis) <= 1e-8);
        prop_assert!((etas[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn full_rank_estimators_agree(n in 6usize..40, seed in 0u64..1000) {
        let pts = separated_points(n, seed);
        let ds = dataset(&pts, 2);
        let eps = 0.5 / (n as f64 * n as f64);
        let f = fit(KernelSpec::gaussian(Bandwidth::Fixed(eps)), &pts, 2, NormalizationMode::None);
        let sb = SpectralBasis::new(f.nk.clone(), f.k.as_ref(), f.p.as_ref(), n).unwrap();
        let model = fit_kpcr(Arc::new(Basis::Symmetric(sb)), &ds, &[0], ResponseTransform::Identity).unwrap();
        let eta = 1e-9;
        let krr = KrrModel::fit(&f.nk, f.k.as_ref(), f.p.as_ref(), &ds, 0, ResponseTransform::Identity, eta).unwrap();
        let queries = random_points(5, 2, seed + 1);
        let scale = ds.responses().iter().fold(0.0f64, |a, y| a.max(y.abs()));
        for x in queries.chunks(2).chain(pts.chunks(2).take(3)) {
            let h = model.predict_hybrid(x, 0, eta).unwrap();
            let r = krr.predict(x).unwrap();
            prop_assert!((h - r).abs() <= 1e-6 * scale, "hybrid {} krr {}", h, r);
            let kp = model.predict_kpcr(x, 0).unwrap();
            prop_assert!((kp - h).abs() <= 1e-6 * scale, "kpcr {} hybrid {}", kp, h);
        }
        for j in 0..n {
            let y = ds.responses()[j];
            prop_assert!((model.predict_kpcr(ds.covariate(j), 0).unwrap() - y).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn probabilities_are_clipped(theta in -1.5f64..1.5, ell in 1usize..12, seed in 0u64..1000) {
        let pts = random_points(30, 2, seed);
        let ds = dataset(&pts, 2);
        let f = fit(KernelSpec::gaussian(Bandwidth::Fixed(0.1)), &pts, 2, NormalizationMode::SymmetricMarkov);
        let Ok(sb) = SpectralBasis::new(f.nk, f.k.as_ref(), f.p.as_ref(), ell) else {
            return Err(TestCaseError::reject("numerically rank deficient"));
        };
        let model = fit_kpcr(Arc::new(Basis::Symmetric(sb)), &ds, &[0, 2], ResponseTransform::Indicator { threshold: theta }).unwrap();
        for x in random_points(10, 2, seed + 7).chunks(2) {
            for k in 0..2 {
                let p = model.predict_probability(x, k).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    #[test]
    fn forecasts_are_affine_in_the_response(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let pts = random_points(30, 2, seed);
        let ds = dataset(&pts, 2);
        let shifted = ds.with_responses(ds.responses().iter().map(|y| a * y + b).collect()).unwrap();
        let f = fit(KernelSpec::gaussian(Bandwidth::Fixed(0.2)), &pts, 2, NormalizationMode::SymmetricMarkov);
        let sb = Arc::new(Basis::Symmetric(SpectralBasis::new(f.nk, f.k.as_ref(), f.p.as_ref(), 6).unwrap()));
        let m1 = fit_kpcr(sb.clone(), &ds, &[0], ResponseTransform::Identity).unwrap();
        let m2 = fit_kpcr(sb, &shifted, &[0], ResponseTransform::Identity).unwrap();
        for x in random_points(6, 2, seed + 3).chunks(2) {
            let f1 = m1.predict_kpcr(x, 0).unwrap();
            let f2 = m2.predict_kpcr(x, 0).unwrap();
            prop_assert!((f2 - (a * f1 + b)).abs() < 1e-10);
        }
    }

    #[test]
    fn rmse_is_a_metric(
        a in prop::collection::vec(-10.0f64..10.0, 1..20),
        seed in 0u64..1000,
    ) {
        let b = random_points(a.len(), 1, seed);
        let c = random_points(a.len(), 1, seed + 1);
        prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        prop_assert!((rmse(&a, &b).unwrap() - rmse(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!(rmse(&a, &c).unwrap() <= rmse(&a, &b).unwrap() + rmse(&b, &c).unwrap() + 1e-12);
    }
}

#[test]
fn variable_bandwidth_markov_basis_has_unit_top_function() {
    let pts = random_points(80, 2, 42);
    let f = fit(
        KernelSpec::variable_bandwidth(Bandwidth::Auto),
        &pts,
        2,
        NormalizationMode::SymmetricMarkov,
    );
    let sb = SpectralBasis::new(f.nk, f.k.as_ref(), f.p.as_ref(), 4).unwrap();
    assert!((sb.lambdas()[0] - 1.0).abs() < 1e-8);
    let psi = sb
        .psi_batch(kaf_core::kernels::Points::new(&random_points(10, 2, 1), 2))
        .unwrap();
    assert!((0..10).all(|r| (psi[(r, 0)] - 1.0).abs() < 1e-8));
}

#[test]
fn diffusion_basis_round_trips_through_parts() {
    let pts = random_points(30, 2, 5);
    let f = fit(
        KernelSpec::gaussian(Bandwidth::Fixed(0.3)),
        &pts,
        2,
        NormalizationMode::Diffusion { alpha: 1.0 },
    );
    let b = BiorthogonalBasis::new(f.nk.clone(), f.k.as_ref(), 4).unwrap();
    let rebuilt = BiorthogonalBasis::from_parts(
        f.nk,
        b.etas().to_vec(),
        b.xis().to_owned(),
        b.xi_primes().to_owned(),
        b.weights().to_owned(),
    )
    .unwrap();
    assert_eq!(rebuilt, b);
}
