//! Reference dynamical systems: rotation on the circle and Lorenz 63.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::TimeSeriesDataset;
use crate::error::{arg, Error, Result};

pub type State = [f64; 3];

/// Lorenz 63 parameters `(sigma, mu, beta)`; defaults are the classical `(10, 28, 8/3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L63Params {
    pub sigma: f64,
    pub mu: f64,
    pub beta: f64,
}

impl Default for L63Params {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            mu: 28.0,
            beta: 8.0 / 3.0,
        }
    }
}

/// Rotation `omega -> omega + alpha t (mod 2 pi)`; default `alpha = sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleParams {
    pub alpha: f64,
}

impl Default for CircleParams {
    fn default() -> Self {
        Self {
            alpha: core::f64::consts::SQRT_2,
        }
    }
}

impl CircleParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(arg("circle frequency must be finite and nonzero"));
        }
        Ok(Self { alpha })
    }
}

pub fn l63_vector_field(p: &L63Params, s: &State) -> State {
    [
        p.sigma * (s[1] - s[0]),
        s[0] * (p.mu - s[2]),
        s[0] * s[1] - p.beta * s[2],
    ]
}

fn axpy(a: f64, x: &State, y: &State) -> State {
    [y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2]]
}

fn rk4_step(p: &L63Params, s: &State, h: f64) -> State {
    let k1 = l63_vector_field(p, s);
    let k2 = l63_vector_field(p, &axpy(h / 2.0, &k1, s));
    let k3 = l63_vector_field(p, &axpy(h / 2.0, &k2, s));
    let k4 = l63_vector_field(p, &axpy(h, &k3, s));
    let mut out = *s;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Classical RK4 with internal step `dt_out / substeps`.
///
/// Returns `n_steps + 1` states sampled every `dt_out`, starting with `initial`.
pub fn integrate_rk4(
    p: &L63Params,
    initial: State,
    dt_out: f64,
    n_steps: usize,
    substeps: usize,
) -> Result<Vec<State>> {
    if !(dt_out > 0.0) || substeps == 0 {
        return Err(arg("output interval must be positive and substeps at least 1"));
    }
    let h = dt_out / substeps as f64;
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut s = initial;
    states.push(s);
    for step in 1..=n_steps {
        for _ in 0..substeps {
            s = rk4_step(p, &s, h);
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        states.push(s);
    }
    Ok(states)
}

/// Which part of the L63 state is used as covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateSelector {
    Full,
    /// Zero-based state component.
    Component(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct L63Config {
    pub params: L63Params,
    pub n: usize,
    pub dt: f64,
    pub spinup_time: f64,
    pub substeps: usize,
    pub seed: u64,
}

impl L63Config {
    pub fn new(n: usize, dt: f64, seed: u64) -> Self {
        Self {
            params: L63Params::default(),
            n,
            dt,
            spinup_time: 100.0,
            substeps: 10,
            seed,
        }
    }
}

/// Post-spinup L63 trajectory of `n` states from a seeded initial condition in `[-10, 10]^3`.
pub fn l63_trajectory(cfg: &L63Config) -> Result<Vec<State>> {
    if cfg.n == 0 {
        return Err(arg("trajectory length must be positive"));
    }
    if !(cfg.spinup_time >= 0.0) {
        return Err(arg("spinup time must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial: State = core::array::from_fn(|_| rng.random_range(-10.0..10.0));
    let spinup_steps = libm::round(cfg.spinup_time / cfg.dt) as usize;
    let mut states = integrate_rk4(&cfg.params, initial, cfg.dt, spinup_steps + cfg.n - 1, cfg.substeps)?;
    states.drain(..spinup_steps);
    Ok(states)
}

/// Builds a dataset from trajectory states with the given covariate and response component.
pub fn l63_dataset(
    states: &[State],
    dt: f64,
    covariate: CovariateSelector,
    response: usize,
) -> Result<TimeSeriesDataset> {
    if response > 2 {
        return Err(arg(format!("response component {response} out of range")));
    }
    let (dim, covariates) = match covariate {
        CovariateSelector::Full => (3, states.iter().flat_map(|s| s.iter().copied()).collect()),
        CovariateSelector::Component(c) if c < 3 => (1, states.iter().map(|s| s[c]).collect()),
        CovariateSelector::Component(c) => return Err(arg(format!("covariate component {c} out of range"))),
    };
    let responses = states.iter().map(|s| s[response]).collect();
    TimeSeriesDataset::new(covariates, dim, responses, dt)
}

pub fn generate_l63(cfg: &L63Config, covariate: CovariateSelector, response: usize) -> Result<TimeSeriesDataset> {
    l63_dataset(&l63_trajectory(cfg)?, cfg.dt, covariate, response)
}

/// Circle samples `x_j = cos(omega_j)`, `y_j = sin(omega_j)` with
/// `omega_j = omega0 + alpha (j - 1) dt mod 2 pi`.
pub fn generate_circle(p: &CircleParams, n: usize, dt: f64, omega0: f64) -> Result<TimeSeriesDataset> {
    if n == 0 {
        return Err(arg("sample count must be positive"));
    }
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for j in 0..n {
        let omega = circle_angle(p, omega0, j, dt);
        xs.push(libm::cos(omega));
        ys.push(libm::sin(omega));
    }
    TimeSeriesDataset::new(xs, 1, ys, dt)
}

/// Angle of the zero-based sample `j`, reduced to `[0, 2 pi)`.
pub fn circle_angle(p: &CircleParams, omega0: f64, j: usize, dt: f64) -> f64 {
    let r = libm::fmod(omega0 + p.alpha * j as f64 * dt, 2.0 * PI);
    if r < 0.0 {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Uniform angle in `[0, 2 pi)` from a seed.
pub fn random_angle(seed: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed).random_range(0.0..2.0 * PI)
}

/// Regression function `z = x sin(alpha tau)` and intrinsic error `sigma = cos^2(alpha tau) / 2`.
pub fn circle_oracle(p: &CircleParams, x: f64, tau: f64) -> Result<(f64, f64)> {
    if !(x.abs() <= 1.0) {
        return Err(arg(format!("circle covariate must lie in [-1, 1], got {x}")));
    }
    let phase = p.alpha * tau;
    let c = libm::cos(phase);
    Ok((x * libm::sin(phase), 0.5 * c * c))
}
