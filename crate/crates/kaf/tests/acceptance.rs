//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 regardless of the outcome so that the workspace test run reports
//! the lines without aborting; set `KAF_ACCEPTANCE_STRICT=1` to exit 1 when
//! any criterion fails, and `KAF_WRITE_GOLDEN=1` to regenerate the circle
//! golden file.

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use kaf::experiments::{
    circle_config, circle_leads, circle_pair, ell_sweep, l63_basis, l63_config, L63Run, CIRCLE_DT, CIRCLE_M, CIRCLE_N,
    L63_DT, L63_N, TRAIN_SEED, VERIF_SEED,
};
use kaf::model_file::{read_model, write_model, StoredModel};
use kaf_core::eval::evaluate_with_features;
use kaf_core::forecast::mean_threshold;
use kaf_core::kernels::Points;
use kaf_core::normalization::{diffusion_normalize, markov_normalize};
use kaf_core::spectral::{biorthogonal_decompose, eigendecompose_with_tolerance};
use kaf_core::systems::{integrate_rk4, CovariateSelector, L63Params};
use kaf_core::{
    build_basis, build_basis_full, fit_kpcr, fit_predict_krr, Bandwidth, Basis, BasisConfig, CircleOracle,
    CircleParams, FittedKernel, ForecastModel, KernelSpec, NormalizationMode, NormalizedKernel, ResponseTransform,
    SkillReport, TimeSeriesDataset,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Phase advances `alpha * tau` of the circle criteria.
const CIRCLE_PHASES: [f64; 4] = [0.0, 0.5, 1.0, 1.5];
const L63_ELL: usize = 500;
/// Lead steps 0, 0.1, ..., 5 time units.
const L63_LEAD_STEP: usize = 10;
const L63_LEAD_MAX: usize = 500;
const PARTIAL_DELAYS: usize = 15;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/circle_eps0.1_l15.csv")
}

fn l63_leads() -> Vec<usize> {
    (0..=L63_LEAD_MAX).step_by(L63_LEAD_STEP).collect()
}

fn circle_excess(ell_values: &[usize], max_ell: usize) -> anyhow::Result<(Vec<SkillReport>, Duration)> {
    let start = Instant::now();
    let params = CircleParams::default();
    let (train, verif) = circle_pair(&params, CIRCLE_N, CIRCLE_M, CIRCLE_DT)?;
    let basis = build_basis(train.covariates(), 1, &circle_config(0.1, max_ell))?;
    let leads = circle_leads(&params, CIRCLE_DT, &CIRCLE_PHASES);
    let oracle = CircleOracle { params };
    let reports = ell_sweep(
        &basis,
        &train,
        &verif,
        &leads,
        ResponseTransform::Identity,
        ell_values,
        Some(&oracle),
    )
    .into_iter()
    .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((reports, start.elapsed()))
}

fn excess_at(report: &SkillReport, k: usize) -> f64 {
    report.excess_gen_error[k].expect("oracle was supplied")
}

fn criterion_1() -> anyhow::Result<Outcome> {
    let (reports, elapsed) = circle_excess(&[1, 20, 59], 59)?;
    let last = CIRCLE_PHASES.len() - 1;
    let (a1, a20, a59) = (
        excess_at(&reports[0], last),
        excess_at(&reports[1], last),
        excess_at(&reports[2], last),
    );
    let pass = a20 <= 1e-3 && (0.05..=0.5).contains(&a1) && a20 < a1 && a20 < a59 && elapsed.as_secs_f64() < 30.0;
    Ok(outcome(
        pass,
        format!(
            "A(l=1)={a1:.3e} A(l=20)={a20:.3e} A(l=59)={a59:.3e} runtime={:.1}s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn criterion_2() -> anyhow::Result<Outcome> {
    let (reports, _) = circle_excess(&[15], 15)?;
    let values: Vec<f64> = (0..CIRCLE_PHASES.len()).map(|k| excess_at(&reports[0], k)).collect();
    let path = golden_path();
    if std::env::var_os("KAF_WRITE_GOLDEN").is_some() {
        let mut text = String::from("alpha_tau,excess_gen_error\n");
        for (p, v) in CIRCLE_PHASES.iter().zip(&values) {
            text.push_str(&format!("{p},{v}\n"));
        }
        std::fs::write(&path, text)?;
    }
    let golden: Vec<f64> = std::fs::read_to_string(&path)?
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap_or("").parse::<f64>())
        .collect::<Result<_, _>>()?;
    anyhow::ensure!(golden.len() == values.len(), "golden file has {} rows", golden.len());
    let in_band = values.iter().all(|v| (1e-4..=0.5).contains(v));
    let near = values.iter().zip(&golden).all(|(v, g)| v / g <= 5.0 && g / v <= 5.0);
    let list = values.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(", ");
    Ok(outcome(
        in_band && near,
        format!("A(alpha tau=0,0.5,1,1.5)=[{list}] in_band={in_band} within_5x_golden={near}"),
    ))
}

/// Fully observed Lorenz 63 data, basis and out-of-sample features.
struct L63Full {
    train: L63Run,
    verif: L63Run,
    basis: Arc<Basis>,
    features: kaf_core::faer::Mat<f64>,
    elapsed: Duration,
}

fn l63_full() -> &'static anyhow::Result<L63Full> {
    static CELL: OnceLock<anyhow::Result<L63Full>> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let train = L63Run::generate(L63_N, L63_DT, TRAIN_SEED, CovariateSelector::Full, 1)?;
        let verif = L63Run::generate(L63_N, L63_DT, VERIF_SEED, CovariateSelector::Full, 1)?;
        let basis = l63_basis(&train, L63_ELL, 1)?;
        let features = basis.features(Points::new(verif.data.covariates(), 3))?;
        Ok(L63Full {
            train,
            verif,
            basis,
            features,
            elapsed: start.elapsed(),
        })
    })
}

fn full_ref() -> anyhow::Result<&'static L63Full> {
    l63_full().as_ref().map_err(|e| anyhow::anyhow!("{e:#}"))
}

/// Model, verification set and report for state component `c`.
fn l63_component(
    full: &L63Full,
    c: usize,
    indicator: bool,
) -> anyhow::Result<(ForecastModel, TimeSeriesDataset, SkillReport)> {
    let train = full.train.with_response(c)?;
    let verif = full.verif.with_response(c)?;
    let transform = if indicator {
        mean_threshold(&train)
    } else {
        ResponseTransform::Identity
    };
    let mut model = fit_kpcr(full.basis.clone(), &train, &l63_leads(), transform)?;
    if !indicator {
        model = model.with_error_model(&train)?;
    }
    let report = evaluate_with_features(&model, full.features.as_ref(), &verif, None)?;
    Ok((model, verif, report))
}

fn criterion_3() -> anyhow::Result<Outcome> {
    let full = full_ref()?;
    let start = Instant::now();
    let (_, _, report) = l63_component(full, 0, false)?;
    let runtime = full.elapsed + start.elapsed();
    let crossing = report.crossing_time(0.6);
    let pass = crossing.is_some_and(|t| (1.3..=2.3).contains(&t)) && runtime.as_secs_f64() < 900.0;
    let lambda_l = full.basis.eigenvalues()[L63_ELL - 1];
    Ok(outcome(
        pass,
        format!(
            "omega1 crosses 0.6 at tau={crossing:?} lambda_l={lambda_l:.2e} runtime={:.0}s",
            runtime.as_secs_f64()
        ),
    ))
}

fn criterion_4() -> anyhow::Result<Outcome> {
    let full = full_ref()?;
    let (model, verif, report) = l63_component(full, 0, false)?;
    let k = report.len() - 1;
    let q = report.lead_steps[k];
    let nrmse = report.normalized_rmse[k];
    let mut pred = model.predict_from_features(full.features.as_ref(), k)?;
    pred.truncate(verif.n() - q);
    let mean = pred.iter().sum::<f64>() / pred.len() as f64;
    let std = (pred.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / pred.len() as f64).sqrt();
    let ratio = std / model.response_stats().1;
    let pass = (0.8..=1.2).contains(&nrmse) && ratio <= 0.35;
    Ok(outcome(
        pass,
        format!(
            "tau={} normalized_rmse={nrmse:.3} forecast_std/train_std={ratio:.3}",
            report.lead_times[k]
        ),
    ))
}

fn criterion_5() -> anyhow::Result<Outcome> {
    let full = full_ref()?;
    let (_, _, report) = l63_component(full, 0, false)?;
    let mut worst: (f64, f64) = (0.0, 1.0);
    for k in 0..report.len() {
        let tau = report.lead_times[k];
        if !(0.5 - 1e-9..=4.0 + 1e-9).contains(&tau) {
            continue;
        }
        let ratio = report.estimated_error_rms[k].expect("error model fitted") / report.rmse[k];
        if (ratio - 1.0).abs() > (worst.1 - 1.0).abs() {
            worst = (tau, ratio);
        }
    }
    let pass = (worst.1 - 1.0).abs() <= 0.25;
    Ok(outcome(
        pass,
        format!("worst estimated/actual RMSE ratio {:.3} at tau={:.1}", worst.1, worst.0),
    ))
}

/// Normalized RMSE of omega2 at tau = 1 from x1 and the number of eigenpairs
/// used; `L63_ELL` is capped at the numerical rank of the partial-state kernel.
fn partial_nrmse_at_one(delays: usize) -> anyhow::Result<(f64, usize)> {
    let train = L63Run::generate(L63_N, L63_DT, TRAIN_SEED, CovariateSelector::Component(0), delays)?;
    let verif = L63Run::generate(L63_N, L63_DT, VERIF_SEED, CovariateSelector::Component(0), delays)?;
    let mut cfg = l63_config(L63_ELL, delays);
    cfg.truncate_to_rank = true;
    let basis = Arc::new(build_basis(train.data.covariates(), train.data.dim(), &cfg)?);
    let ell = basis.ell();
    let features = basis.features(Points::new(verif.data.covariates(), delays))?;
    let q = (1.0 / L63_DT).round() as usize;
    let model = fit_kpcr(basis, &train.with_response(1)?, &[q], ResponseTransform::Identity)?;
    let report = evaluate_with_features(&model, features.as_ref(), &verif.with_response(1)?, None)?;
    Ok((report.normalized_rmse[0], ell))
}

type Criterion = fn() -> anyhow::Result<Outcome>;

fn criterion_6() -> anyhow::Result<Outcome> {
    let full = full_ref()?;
    let (_, _, report) = l63_component(full, 1, false)?;
    let k = report
        .lead_steps
        .iter()
        .position(|&q| q == 100)
        .expect("tau = 1 is a lead");
    let observed = report.normalized_rmse[k];
    let (without, ell_without) = partial_nrmse_at_one(1)?;
    let (with, ell_with) = partial_nrmse_at_one(PARTIAL_DELAYS)?;
    let pass = without - with >= 0.1 && (with - observed).abs() <= 0.15;
    Ok(outcome(
        pass,
        format!(
            "omega2 at tau=1: x1 only {without:.3} (l={ell_without}), {PARTIAL_DELAYS} delays {with:.3} \
             (l={ell_with}), full state {observed:.3}"
        ),
    ))
}

fn criterion_8() -> anyhow::Result<Outcome> {
    let full = full_ref()?;
    let (_, _, report) = l63_component(full, 2, true)?;
    let horizon = report.crossing_time(0.8);
    let pass = horizon.is_none_or(|t| t > 2.0 + 1e-9);
    let at2 = report
        .lead_steps
        .iter()
        .position(|&q| q == 200)
        .map(|k| report.normalized_rmse[k]);
    Ok(outcome(
        pass,
        format!("chi3 first reaches 0.8 at tau={horizon:?}; normalized_rmse(tau=2)={at2:.3?}"),
    ))
}

/// Deterministic battery of the numerical invariants.
fn criterion_7() -> anyhow::Result<Outcome> {
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, value: f64, tol: f64| {
        if value.is_nan() || value > tol {
            failures.push(format!("{name}={value:.2e}>{tol:.0e}"));
        }
    };
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 40 + 10 * seed as usize;
        let pts: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let kernel = FittedKernel::fit(&KernelSpec::gaussian(Bandwidth::Fixed(0.3)), &pts, 2)?;
        let k = kernel.matrix();
        let (p, _, _) = markov_normalize(k.as_ref())?;
        let row_mean = (0..n)
            .map(|i| ((0..n).map(|j| p[(i, j)]).sum::<f64>() / n as f64 - 1.0).abs())
            .fold(0.0, f64::max);
        check("markov row mean", row_mean, 1e-10);
        let asym = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (p[(i, j)] - p[(j, i)]).abs())
            .fold(0.0, f64::max);
        check("symmetry", asym, 1e-12);
        let ell = 10;
        let (values, phis) = eigendecompose_with_tolerance(p.as_ref(), ell, 0.0)?;
        check("lambda_1", (values[0] - 1.0).abs(), 1e-8);
        let phi1: Vec<f64> = (0..n).map(|j| phis[(j, 0)]).collect();
        let spread = (phi1.iter().cloned().fold(f64::MIN, f64::max) - phi1.iter().cloned().fold(f64::MAX, f64::min))
            / phi1[0].abs();
        check("phi_1 spread", spread, 1e-6);
        let mut ortho: f64 = 0.0;
        let mut resid: f64 = 0.0;
        for a in 0..ell {
            for b in 0..ell {
                let dot = (0..n).map(|j| phis[(j, a)] * phis[(j, b)]).sum::<f64>() / n as f64;
                ortho = ortho.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
            }
            for i in 0..n {
                let pv = (0..n).map(|j| p[(i, j)] * phis[(j, a)]).sum::<f64>() / n as f64;
                resid = resid.max((pv - values[a] * phis[(i, a)]).abs());
            }
        }
        check("orthonormality", ortho, 1e-10);
        check("eigen residual", resid, 1e-8);

        let alpha = 0.5;
        let (pd, _, _, d) = diffusion_normalize(k.as_ref(), alpha)?;
        let balance = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (d[i] * pd[(i, j)] - d[j] * pd[(j, i)]).abs())
            .fold(0.0, f64::max);
        check("detailed balance", balance, 1e-10);
        let (etas, xis, xi_primes, _) = biorthogonal_decompose(k.as_ref(), alpha, ell)?;
        let mut bio: f64 = 0.0;
        let mut jres: f64 = 0.0;
        for a in 0..ell {
            for b in 0..ell {
                let dot = (0..n).map(|j| xi_primes[(j, a)] * xis[(j, b)]).sum::<f64>() / n as f64;
                bio = bio.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
            }
            for i in 0..n {
                let pv = (0..n).map(|j| pd[(i, j)] * xis[(j, a)]).sum::<f64>() / n as f64;
                jres = jres.max((pv - etas[a] * xis[(i, a)]).abs());
            }
        }
        check("biorthogonality", bio, 1e-8);
        check("J residual", jres, 1e-8);
    }

    // full rank: KPCR, hybrid and KRR agree and interpolate at q = 0
    let n = 30;
    let pts: Vec<f64> = (0..n)
        .flat_map(|j| [j as f64 / n as f64, ((j * 7) % n) as f64 / n as f64])
        .collect();
    let ys: Vec<f64> = pts.chunks(2).map(|c| (3.0 * c[0]).sin() + c[1]).collect();
    let ds = TimeSeriesDataset::new(pts.clone(), 2, ys.clone(), 0.1)?;
    let spec = KernelSpec::gaussian(Bandwidth::Fixed(0.5 / (n * n) as f64));
    let mut cfg = BasisConfig::new(spec, NormalizationMode::None, n);
    cfg.rank_tolerance = 0.0;
    let build = build_basis_full(&pts, 2, &cfg)?;
    let basis = Arc::new(build.basis);
    let model = fit_kpcr(basis.clone(), &ds, &[0, 2], ResponseTransform::Identity)?;
    let nk: &NormalizedKernel = basis.normalized_kernel();
    let scale = ys.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eta = 1e-9;
    let mut agree: f64 = 0.0;
    let mut interp: f64 = 0.0;
    for (j, x) in pts.chunks(2).enumerate() {
        let kpcr = model.predict_kpcr(x, 0)?;
        interp = interp.max((kpcr - ys[j]).abs() / scale);
        for lead in 0..2 {
            let a = model.predict_kpcr(x, lead)?;
            let h = model.predict_hybrid(x, lead, eta)?;
            let r = fit_predict_krr(
                nk,
                build.kernel_matrix.as_ref(),
                build.normalized_matrix.as_ref(),
                &ds,
                [0, 2][lead],
                eta,
                x,
            )?;
            agree = agree.max((a - h).abs().max((a - r).abs()) / scale);
        }
    }
    check("full-rank agreement", agree, 1e-6);
    check("interpolation", interp, 1e-6);

    // probabilities
    let prob = fit_kpcr(basis.clone(), &ds, &[0, 3], mean_threshold(&ds))?;
    let mut outside: f64 = 0.0;
    for x in (0..50).map(|i| [i as f64 / 25.0 - 0.5, 0.3]) {
        for lead in 0..2 {
            let v = prob.predict_probability(&x, lead)?;
            outside = outside.max((-v).max(v - 1.0).max(0.0));
        }
    }
    check("probability range", outside, 0.0);

    // RK4 global order
    let params = L63Params::default();
    let x0 = [1.0, 1.0, 1.0];
    let reference = *integrate_rk4(&params, x0, 0.01, 100, 64)?.last().unwrap();
    let err = |sub: usize| -> anyhow::Result<f64> {
        let s = *integrate_rk4(&params, x0, 0.01, 100, sub)?.last().unwrap();
        Ok(s.iter()
            .zip(&reference)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    };
    let factor = err(2)? / err(4)?;
    if factor < 12.0 {
        failures.push(format!("rk4 factor {factor:.1}<12"));
    }

    // model file round trip
    let mut bytes = Vec::new();
    let stored = StoredModel { model, params: vec![] };
    write_model(&mut bytes, &stored)?;
    let back = read_model(&mut bytes.as_slice())?;
    let same = pts.chunks(2).all(|x| {
        (0..2).all(|k| {
            let a = stored.model.predict_kpcr(x, k).map(f64::to_bits).ok();
            a.is_some() && a == back.model.predict_kpcr(x, k).map(f64::to_bits).ok()
        })
    });
    if !same {
        failures.push("model round trip not bit-exact".into());
    }

    let detail = if failures.is_empty() {
        format!("all invariants hold; rk4 factor {factor:.1}")
    } else {
        failures.join("; ")
    };
    Ok(outcome(failures.is_empty(), detail))
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(usize, &str, Criterion); 8] = [
        (1, "circle excess generalization error and U-shape", criterion_1),
        (2, "circle l=15 band and golden run", criterion_2),
        (7, "numerical invariants", criterion_7),
        (3, "L63 omega1 skill horizon", criterion_3),
        (4, "L63 mixing plateau", criterion_4),
        (5, "L63 error estimate calibration", criterion_5),
        (8, "L63 chi3 exceedance probability", criterion_8),
        (6, "L63 delay recovery", criterion_6),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let (status, detail) = match result {
            Ok(o) => (if o.pass { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => ("FAIL", format!("error: {e:#}")),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {id} [{status}] {name}: {detail} ({secs:.1}s)");
    }
    println!("acceptance: {failed} criteria failing");
    if failed > 0 && std::env::var_os("KAF_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
