//! Lifespan sweeps and the time-scaling symmetry check.
//!
//! Everything here runs in double precision; the generic machinery underneath
//! is instantiated at `f64`.

use std::f64::consts::PI;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{loglog_fit, LogLogFit, NormReport, NormTracker, Observable};
use crate::littlewood_paley::bump_psi;
use crate::model::{from_dispersive, to_dispersive, Evolution, ModelError, SqgState, VorticityState, ZState};
use crate::spectral::{dealias, make_grid, Grid, SpectralError, SpectralField};
use crate::timestepper::{integrate, Control, Scheme, StepError, StepSize, StepperConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("{axis} axis has {found} uncensored records, at least {required} are needed")]
    TooFewRecords { axis: &'static str, found: usize, required: usize },
    #[error("the two runs live on different grids")]
    ResolutionMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Boussinesq,
    Sqg,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Boussinesq => "boussinesq",
            ModelKind::Sqg => "sqg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    GaussianPair,
    RandomBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    HNDoubling,
    BootstrapThreshold,
    HorizonReached,
    NumericalAbort,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::HNDoubling => "h_n_doubling",
            StopReason::BootstrapThreshold => "bootstrap_threshold",
            StopReason::HorizonReached => "horizon_reached",
            StopReason::NumericalAbort => "numerical_abort",
        }
    }

    /// Records that did not reach a threshold carry no lifespan information.
    pub fn is_censored(&self) -> bool {
        matches!(self, StopReason::HorizonReached | StopReason::NumericalAbort)
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub profile: Profile,
    pub epsilon: f64,
    pub n_regularity: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub enum InitialState {
    Boussinesq(ZState<f64>),
    Sqg(SqgState<f64>),
}

impl InitialState {
    pub fn model(&self) -> ModelKind {
        match self {
            InitialState::Boussinesq(_) => ModelKind::Boussinesq,
            InitialState::Sqg(_) => ModelKind::Sqg,
        }
    }

    pub fn grid(&self) -> &Grid<f64> {
        match self {
            InitialState::Boussinesq(z) => z.z_plus.grid(),
            InitialState::Sqg(s) => s.theta.grid(),
        }
    }

    pub fn kappa(&self) -> f64 {
        match self {
            InitialState::Boussinesq(z) => z.kappa,
            InitialState::Sqg(s) => s.kappa,
        }
    }

    /// `||u||_{H^n} + ||rho||_{H^n}`, or `||theta||_{H^n}` for SQG.
    pub fn energy_norm(&self, n: f64) -> f64 {
        match self {
            InitialState::Boussinesq(z) => z.energy_norm(n),
            InitialState::Sqg(s) => s.energy_norm(n),
        }
    }
}

/// `psi(|xi|/8) - psi(4|xi|)`, the sum of the annular cutoffs of bands -2..=3.
pub fn band_mask(r: f64) -> f64 {
    bump_psi(r / 8.0) - bump_psi(4.0 * r)
}

const GAUSSIAN_WIDTH: f64 = 1.5;

/// Masked Gaussian of width `GAUSSIAN_WIDTH` centred at `center`, built
/// directly from its continuous Fourier transform.
fn masked_gaussian(grid: &Grid<f64>, center: [f64; 2]) -> SpectralField<f64> {
    let l = grid.length();
    let w = GAUSSIAN_WIDTH;
    let norm = 2.0 * PI * w * w / (l * l);
    let mut f = SpectralField::from_fn(grid, |j1, j2| {
        let (x1, x2) = grid.xi(j1, j2);
        let r2 = x1 * x1 + x2 * x2;
        let amp = norm * (-0.5 * w * w * r2).exp() * band_mask(r2.sqrt());
        Complex::from_polar(amp, -(x1 * center[0] + x2 * center[1]))
    });
    zero_nyquist(&mut f);
    f
}

fn zero_nyquist(f: &mut SpectralField<f64>) {
    let grid = f.grid().clone();
    let n = grid.n();
    for (idx, c) in f.coeffs_mut().iter_mut().enumerate() {
        if grid.is_nyquist(idx % n) || grid.is_nyquist(idx / n) {
            *c = Complex::new(0.0, 0.0);
        }
    }
}

fn random_band(grid: &Grid<f64>, rng: &mut ChaCha8Rng) -> SpectralField<f64> {
    SpectralField::random(grid, rng, |r| band_mask(r) * (-r * r / 8.0).exp())
}

/// Mean-zero data supported in bands -2..=3 and rescaled so that its
/// combined `H^n` norm equals `spec.epsilon`.
pub fn make_initial_data(
    spec: &InitialSpec,
    model: ModelKind,
    kappa: f64,
    grid: &Grid<f64>,
) -> Result<InitialState, ExperimentError> {
    if !(spec.epsilon > 0.0 && spec.epsilon.is_finite()) {
        return Err(ExperimentError::InvalidParameter(format!(
            "epsilon must be positive, got {}",
            spec.epsilon
        )));
    }
    let l = grid.length();
    let a = [0.5 * l - GAUSSIAN_WIDTH, 0.5 * l];
    let b = [0.5 * l + GAUSSIAN_WIDTH, 0.5 * l];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (first, second) = match spec.profile {
        Profile::GaussianPair => {
            let ga = masked_gaussian(grid, a);
            let gb = masked_gaussian(grid, b);
            (&ga + &gb, &ga - &gb)
        }
        Profile::RandomBand => (random_band(grid, &mut rng), random_band(grid, &mut rng)),
    };
    let first = dealias(&first).with_zero_mean();
    let second = dealias(&second).with_zero_mean();
    let raw = match model {
        ModelKind::Boussinesq => InitialState::Boussinesq(to_dispersive(&VorticityState::new(first, second, kappa)?)?),
        ModelKind::Sqg => InitialState::Sqg(SqgState::new(first, kappa)?),
    };
    let scale = spec.epsilon / raw.energy_norm(spec.n_regularity);
    Ok(match raw {
        InitialState::Boussinesq(z) => {
            InitialState::Boussinesq(ZState::new(z.z_plus.scaled(scale), z.z_minus.scaled(scale), kappa)?)
        }
        InitialState::Sqg(s) => InitialState::Sqg(SqgState::new(s.theta.scaled(scale), kappa)?),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub model: ModelKind,
    pub epsilon: f64,
    pub kappa: f64,
    pub n_regularity: f64,
    pub t_star: f64,
    pub stop_reason: StopReason,
    pub seed: u64,
    pub grid_n: usize,
    pub length: f64,
    /// Mean step actually taken.
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Stop once `H^n` reaches this multiple of its initial value.
    pub h_n_factor: f64,
    /// Stop once the accumulated bootstrap norm reaches this value.
    pub bootstrap: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { h_n_factor: 2.0, bootstrap: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifespanConfig {
    pub n_regularity: f64,
    pub thresholds: Thresholds,
    pub horizon: f64,
    pub step: StepSize<f64>,
    pub diagnostic_stride: usize,
    pub nonlinear: bool,
}

/// `50 eps^{-4/3} kappa^{1/3}`, without the kappa factor when `kappa = 0`.
pub fn default_horizon(epsilon: f64, kappa: f64) -> f64 {
    let k = if kappa > 0.0 { kappa.cbrt() } else { 1.0 };
    50.0 * epsilon.powf(-4.0 / 3.0) * k
}

fn crossing(t0: f64, v0: f64, t1: f64, v1: f64, level: f64) -> f64 {
    if v1 == v0 {
        return t1;
    }
    t0 + (t1 - t0) * ((level - v0) / (v1 - v0)).clamp(0.0, 1.0)
}

fn run_lifespan<S>(state: S, seed: u64, config: &LifespanConfig) -> Result<SweepRecord, ExperimentError>
where
    S: Evolution<f64> + Observable<f64>,
{
    let grid = state.components()[0].grid().clone();
    let kappa = state.kappa();
    let epsilon = state.energy_norm(config.n_regularity);
    let h_level = config.thresholds.h_n_factor * epsilon;
    let b_level = config.thresholds.bootstrap;
    let mut tracker = NormTracker::new(config.n_regularity);
    let mut hit: Option<(f64, StopReason)> = None;
    let stepper = StepperConfig {
        scheme: Scheme::Ifrk4,
        step: config.step,
        t_end: config.horizon,
        diagnostic_stride: config.diagnostic_stride,
    };
    let outcome = integrate(state, &stepper, config.nonlinear, |s| {
        let prev = tracker.last().copied();
        let r = tracker.record(s);
        let Some(p) = prev else { return Control::Continue };
        let h = (r.sobolev_hn >= h_level).then(|| crossing(p.time, p.sobolev_hn, r.time, r.sobolev_hn, h_level));
        let b = (r.accumulated_bootstrap >= b_level)
            .then(|| crossing(p.time, p.accumulated_bootstrap, r.time, r.accumulated_bootstrap, b_level));
        hit = match (h, b) {
            (Some(th), Some(tb)) if tb < th => Some((tb, StopReason::BootstrapThreshold)),
            (Some(th), _) => Some((th, StopReason::HNDoubling)),
            (None, Some(tb)) => Some((tb, StopReason::BootstrapThreshold)),
            (None, None) => None,
        };
        if hit.is_some() {
            Control::Stop
        } else {
            Control::Continue
        }
    });
    let (t_star, stop_reason, steps, t_final) = match outcome {
        Ok(traj) => {
            let t_final = Evolution::time(&traj.state);
            match hit {
                Some((t, reason)) => (t, reason, traj.steps, t_final),
                None => (t_final, StopReason::HorizonReached, traj.steps, t_final),
            }
        }
        Err(StepError::NonFinite { .. }) => {
            let last = tracker.last().map_or(0.0, |r| r.time);
            (last, StopReason::NumericalAbort, 0, last)
        }
        Err(e) => return Err(e.into()),
    };
    let dt = match config.step {
        StepSize::Fixed(dt) => dt,
        StepSize::Cfl(_) if steps > 0 => t_final / steps as f64,
        StepSize::Cfl(_) => f64::NAN,
    };
    Ok(SweepRecord {
        model: ModelKind::Boussinesq,
        epsilon,
        kappa,
        n_regularity: config.n_regularity,
        t_star,
        stop_reason,
        seed,
        grid_n: grid.n(),
        length: grid.length(),
        dt,
    })
}

/// Integrates until the `H^n` norm doubles or the accumulated bootstrap norm
/// reaches its threshold, whichever comes first.
pub fn run_until_threshold(
    initial: &InitialState,
    seed: u64,
    config: &LifespanConfig,
) -> Result<SweepRecord, ExperimentError> {
    if !(config.horizon > 0.0 && config.horizon.is_finite()) {
        return Err(ExperimentError::InvalidParameter(format!(
            "horizon must be finite and positive, got {}",
            config.horizon
        )));
    }
    let mut record = match initial {
        InitialState::Boussinesq(z) => run_lifespan(z.clone(), seed, config)?,
        InitialState::Sqg(s) => run_lifespan(s.clone(), seed, config)?,
    };
    record.model = initial.model();
    Ok(record)
}

/// Output of a plain nonlinear run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub reports: Vec<NormReport<f64>>,
    pub final_state: InitialState,
    pub steps: usize,
    /// Largest `|E(t) - E(0)| / E(0)` over the reports, with `E` the `L^2`
    /// energy of the model.
    pub energy_drift: f64,
}

fn simulate_state<S>(state: S, stepper: &StepperConfig<f64>, n_regularity: f64) -> Result<(S, usize, Vec<NormReport<f64>>), ExperimentError>
where
    S: Evolution<f64> + Observable<f64>,
{
    let mut tracker = NormTracker::new(n_regularity);
    let traj = integrate(state, stepper, true, |s| {
        tracker.record(s);
        Control::Continue
    })?;
    Ok((traj.state, traj.steps, tracker.reports().to_vec()))
}

/// Integrates the full system to `stepper.t_end`, recording norms every
/// `stepper.diagnostic_stride` steps.
pub fn simulate(
    initial: &InitialState,
    stepper: &StepperConfig<f64>,
    n_regularity: f64,
) -> Result<Simulation, ExperimentError> {
    let (final_state, steps, reports) = match initial {
        InitialState::Boussinesq(z) => {
            let (s, n, r) = simulate_state(z.clone(), stepper, n_regularity)?;
            (InitialState::Boussinesq(s), n, r)
        }
        InitialState::Sqg(q) => {
            let (s, n, r) = simulate_state(q.clone(), stepper, n_regularity)?;
            (InitialState::Sqg(s), n, r)
        }
    };
    let e0 = reports[0].l2_energy;
    let energy_drift = reports.iter().map(|r| (r.l2_energy - e0).abs() / e0).fold(0.0, f64::max);
    Ok(Simulation { reports, final_state, steps, energy_drift })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub model: ModelKind,
    pub grid_n: usize,
    pub length: f64,
    pub dealias_fraction: f64,
    pub profile: Profile,
    pub n_regularity: f64,
    pub seed: u64,
    pub eps_axis: Vec<f64>,
    /// Gravity held fixed along the epsilon axis.
    pub eps_axis_kappa: f64,
    pub kappa_axis: Vec<f64>,
    /// Amplitude held fixed along the kappa axis.
    pub kappa_axis_eps: f64,
    pub thresholds: Thresholds,
    /// Multiplies [`default_horizon`].
    pub horizon_factor: f64,
    pub step: StepSize<f64>,
    pub diagnostic_stride: usize,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            model: ModelKind::Boussinesq,
            grid_n: 256,
            length: 20.0 * PI,
            dealias_fraction: 2.0 / 3.0,
            profile: Profile::GaussianPair,
            n_regularity: 3.5,
            seed: 0,
            eps_axis: vec![0.4, 0.28, 0.2, 0.14, 0.1],
            eps_axis_kappa: 1.0,
            kappa_axis: vec![1.0, 2.0, 4.0, 8.0],
            kappa_axis_eps: 0.3,
            thresholds: Thresholds::default(),
            horizon_factor: 1.0,
            step: StepSize::Cfl(0.5),
            diagnostic_stride: 10,
        }
    }
}

impl SweepPlan {
    /// The smaller profile: 128 points and three amplitudes, no kappa axis.
    pub fn quick() -> Self {
        SweepPlan {
            grid_n: 128,
            eps_axis: vec![0.4, 0.28, 0.2],
            kappa_axis: Vec::new(),
            ..SweepPlan::default()
        }
    }

    /// `(epsilon, kappa)` pairs in run order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self.eps_axis.iter().map(|&e| (e, self.eps_axis_kappa)).collect();
        for &k in &self.kappa_axis {
            let p = (self.kappa_axis_eps, k);
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
        pts
    }

    pub fn run_point(&self, epsilon: f64, kappa: f64) -> Result<SweepRecord, ExperimentError> {
        let grid = make_grid(self.grid_n, self.length, self.dealias_fraction)?;
        let spec = InitialSpec {
            profile: self.profile,
            epsilon,
            n_regularity: self.n_regularity,
            seed: self.seed,
        };
        let initial = make_initial_data(&spec, self.model, kappa, &grid)?;
        let config = LifespanConfig {
            n_regularity: self.n_regularity,
            thresholds: self.thresholds,
            horizon: self.horizon_factor * default_horizon(epsilon, kappa),
            step: self.step,
            diagnostic_stride: self.diagnostic_stride,
            nonlinear: true,
        };
        let mut record = run_until_threshold(&initial, self.seed, &config)?;
        record.epsilon = epsilon;
        Ok(record)
    }
}

/// Runs every point of the plan in parallel and returns the records ordered by
/// `(epsilon, kappa, seed)`.
pub fn lifespan_sweep(plan: &SweepPlan) -> Result<Vec<SweepRecord>, ExperimentError> {
    let points = plan.points();
    let mut records = points
        .par_iter()
        .map(|&(e, k)| plan.run_point(e, k))
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| {
        a.epsilon
            .total_cmp(&b.epsilon)
            .then(a.kappa.total_cmp(&b.kappa))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    /// Exponent of `T*` against epsilon.
    pub alpha_eps: f64,
    pub r_squared_eps: f64,
    /// Exponent of `T*` against kappa.
    pub beta_kappa: f64,
    pub r_squared_kappa: f64,
    /// Indices into the record set used for each fit.
    pub eps_records: Vec<usize>,
    pub kappa_records: Vec<usize>,
    /// Indices of censored records, excluded from both fits.
    pub censored: Vec<usize>,
}

pub const MIN_FIT_POINTS: usize = 4;

/// Log-log fit of `T*` along one axis, skipping censored records.
pub fn fit_axis(
    records: &[SweepRecord],
    select: impl Fn(&SweepRecord) -> Option<f64>,
    axis: &'static str,
) -> Result<(LogLogFit, Vec<usize>), ExperimentError> {
    let used: Vec<usize> = (0..records.len())
        .filter(|&i| !records[i].stop_reason.is_censored() && select(&records[i]).is_some())
        .collect();
    if used.len() < MIN_FIT_POINTS {
        return Err(ExperimentError::TooFewRecords {
            axis,
            found: used.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let xs: Vec<f64> = used.iter().map(|&i| select(&records[i]).expect("filtered")).collect();
    let ys: Vec<f64> = used.iter().map(|&i| records[i].t_star).collect();
    let fit = loglog_fit(&xs, &ys).map_err(|e| ExperimentError::InvalidParameter(e.to_string()))?;
    Ok((fit, used))
}

/// Fits `T* ~ eps^alpha` at fixed `kappa_fixed` and `T* ~ kappa^beta` at
/// fixed `eps_fixed`.
pub fn fit_scaling(records: &[SweepRecord], kappa_fixed: f64, eps_fixed: f64) -> Result<ScalingFit, ExperimentError> {
    let (a, eps_records) = fit_axis(records, |r| (r.kappa == kappa_fixed).then_some(r.epsilon), "epsilon")?;
    let (b, kappa_records) = fit_axis(records, |r| (r.epsilon == eps_fixed).then_some(r.kappa), "kappa")?;
    Ok(ScalingFit {
        alpha_eps: a.slope,
        r_squared_eps: a.r_squared,
        beta_kappa: b.slope,
        r_squared_kappa: b.r_squared,
        eps_records,
        kappa_records,
        censored: (0..records.len()).filter(|&i| records[i].stop_reason.is_censored()).collect(),
    })
}

fn run_fixed(z: ZState<f64>, dt: f64, t_end: f64) -> Result<ZState<f64>, ExperimentError> {
    let cfg = StepperConfig::fixed(Scheme::Ifrk4, dt, t_end, usize::MAX);
    Ok(integrate(z, &cfg, true, |_| Control::Continue)?.state)
}

/// Relative `L^2` mismatch between `kappa^-1 (u, rho)_A(T)` at gravity `kappa`
/// and `(u, rho)_B(kappa T)` at gravity one from data `kappa^-1 (u0, rho0)`.
/// Both runs use the same step, so the result is integrator error.
pub fn time_scaling_check(
    omega0: &SpectralField<f64>,
    rho0: &SpectralField<f64>,
    kappa: f64,
    t_horizon: f64,
    dt: f64,
) -> Result<f64, ExperimentError> {
    if !(kappa > 0.0) {
        return Err(ExperimentError::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    if !omega0.same_grid(rho0) {
        return Err(ExperimentError::ResolutionMismatch);
    }
    let a0 = to_dispersive(&VorticityState::new(omega0.clone(), rho0.clone(), kappa)?)?;
    let s = 1.0 / kappa;
    let b0 = to_dispersive(&VorticityState::new(omega0.scaled(s), rho0.scaled(s), 1.0)?)?;
    let a = from_dispersive(&run_fixed(a0, dt, t_horizon)?);
    let b = from_dispersive(&run_fixed(b0, dt, kappa * t_horizon)?);
    let diff = (&a.u[0].scaled(s) - &b.u[0]).l2_norm_sq()
        + (&a.u[1].scaled(s) - &b.u[1]).l2_norm_sq()
        + (&a.rho.scaled(s) - &b.rho).l2_norm_sq();
    let norm = b.u[0].l2_norm_sq() + b.u[1].l2_norm_sq() + b.rho.l2_norm_sq();
    Ok((diff / norm).sqrt())
}
