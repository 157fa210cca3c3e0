//! Classical RK4 and integrating-factor RK4 (Lawson form).
//!
//! The integrating-factor scheme treats the dispersive part exactly through the
//! diagonal propagator `e^{∓ i t Lambda_kappa}` and applies RK4 to the
//! nonlinearity in the rotating frame.

use rustfft::num_complex::Complex;
use thiserror::Error;

use crate::model::{Branch, Evolution};
use crate::scalar::Real;
use crate::spectral::{inverse_many, Grid, SpectralField, Symbol};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("non-finite value at t = {time}")]
    NonFinite { time: f64 },
    #[error("the integrating-factor scheme needs a diagonal linear part")]
    NoLinearStructure,
    #[error("invalid stepper configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    Ifrk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize<T> {
    Fixed(T),
    /// Adaptive step from [`cfl_dt`], refreshed at every diagnostic sample.
    Cfl(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig<T> {
    pub scheme: Scheme,
    pub step: StepSize<T>,
    pub t_end: T,
    pub diagnostic_stride: usize,
}

impl<T: Real> StepperConfig<T> {
    pub fn fixed(scheme: Scheme, dt: T, t_end: T, diagnostic_stride: usize) -> Self {
        StepperConfig {
            scheme,
            step: StepSize::Fixed(dt),
            t_end,
            diagnostic_stride,
        }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        match self.step {
            StepSize::Fixed(dt) if !(dt > T::zero() && dt.is_finite()) => {
                return Err(StepError::InvalidConfig(format!("dt must be > 0, got {dt}")));
            }
            StepSize::Cfl(s) if !(s > T::zero() && s < T::one()) => {
                return Err(StepError::InvalidConfig(format!(
                    "cfl_safety must lie in (0, 1), got {s}"
                )));
            }
            _ => {}
        }
        if !(self.t_end >= T::zero() && self.t_end.is_finite()) {
            return Err(StepError::InvalidConfig(format!(
                "t_end must be finite and >= 0, got {}",
                self.t_end
            )));
        }
        if self.diagnostic_stride == 0 {
            return Err(StepError::InvalidConfig("diagnostic_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Multiplies by `e^{-i t Lambda}` for [`Branch::Plus`] and `e^{+i t Lambda}`
/// for [`Branch::Minus`].
pub fn propagator<T: Real>(
    field: &SpectralField<T>,
    kappa: T,
    t: T,
    branch: Branch,
) -> SpectralField<T> {
    let table = PhaseTable::new(field.grid(), kappa, t);
    table.apply(field, branch)
}

/// Cached factors `e^{-i t Lambda(xi)}` on one grid.
#[derive(Debug, Clone)]
pub struct PhaseTable<T: Real> {
    grid: Grid<T>,
    kappa: T,
    t: T,
    factors: Vec<Complex<T>>,
}

impl<T: Real> PhaseTable<T> {
    pub fn new(grid: &Grid<T>, kappa: T, t: T) -> Self {
        let n = grid.n();
        let symbol = Symbol::Lambda(kappa);
        let mut factors = Vec::with_capacity(grid.len());
        for j2 in 0..n {
            for j1 in 0..n {
                let lambda = symbol.eval(grid, j1, j2).re;
                factors.push(Complex::from_polar(T::one(), -t * lambda));
            }
        }
        PhaseTable {
            grid: grid.clone(),
            kappa,
            t,
            factors,
        }
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn time(&self) -> T {
        self.t
    }

    /// Factors for the summed time `self.time() + other.time()`.
    pub fn compose(&self, other: &Self) -> Self {
        PhaseTable {
            grid: self.grid.clone(),
            kappa: self.kappa,
            t: self.t + other.t,
            factors: self.factors.iter().zip(&other.factors).map(|(a, b)| *a * *b).collect(),
        }
    }

    pub fn apply(&self, field: &SpectralField<T>, branch: Branch) -> SpectralField<T> {
        let mut out = field.clone();
        self.apply_in_place(&mut out, branch);
        out
    }

    pub fn apply_in_place(&self, field: &mut SpectralField<T>, branch: Branch) {
        debug_assert!(*field.grid() == self.grid);
        let coeffs = field.coeffs_mut();
        match branch {
            Branch::Plus => {
                for (c, f) in coeffs.iter_mut().zip(&self.factors) {
                    *c *= *f;
                }
            }
            Branch::Minus => {
                for (c, f) in coeffs.iter_mut().zip(&self.factors) {
                    *c *= f.conj();
                }
            }
        }
    }
}

fn check_finite<T: Real, S: Evolution<T>>(state: S) -> Result<S, StepError> {
    if state.components().iter().all(|f| f.is_finite()) {
        Ok(state)
    } else {
        Err(StepError::NonFinite {
            time: state.time().as_f64(),
        })
    }
}

fn combine<T: Real>(base: &[&SpectralField<T>], terms: &[(T, &[SpectralField<T>])]) -> Vec<SpectralField<T>> {
    base.iter()
        .enumerate()
        .map(|(i, b)| {
            let mut out = (*b).clone();
            for (a, k) in terms {
                out.axpy(*a, &k[i]);
            }
            out
        })
        .collect()
}

/// One classical RK4 step of the full (or linear-only) tendency.
pub fn step_rk4<T: Real, S: Evolution<T>>(state: &S, dt: T, nonlinear: bool) -> Result<S, StepError> {
    let half = T::lit(0.5) * dt;
    let t0 = state.time();
    let y = state.components();
    let k1 = state.tendency(nonlinear);
    let s2 = state.with_components(combine(&y, &[(half, &k1)]), t0 + half);
    let k2 = s2.tendency(nonlinear);
    let s3 = state.with_components(combine(&y, &[(half, &k2)]), t0 + half);
    let k3 = s3.tendency(nonlinear);
    let s4 = state.with_components(combine(&y, &[(dt, &k3)]), t0 + dt);
    let k4 = s4.tendency(nonlinear);
    let sixth = dt / T::lit(6.0);
    let third = dt / T::lit(3.0);
    let next = combine(&y, &[(sixth, &k1), (third, &k2), (third, &k3), (sixth, &k4)]);
    check_finite(state.with_components(next, t0 + dt))
}

/// Propagators for the half and full step of one integrating-factor step.
#[derive(Debug, Clone)]
pub struct IfPropagators<T: Real> {
    dt: T,
    half: PhaseTable<T>,
    full: PhaseTable<T>,
}

impl<T: Real> IfPropagators<T> {
    pub fn new(grid: &Grid<T>, kappa: T, dt: T) -> Self {
        IfPropagators {
            dt,
            half: PhaseTable::new(grid, kappa, T::lit(0.5) * dt),
            full: PhaseTable::new(grid, kappa, dt),
        }
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    fn matches(&self, kappa: T, dt: T) -> bool {
        self.dt == dt && self.full.kappa() == kappa
    }
}

fn propagate_all<T: Real>(
    table: &PhaseTable<T>,
    fields: &[SpectralField<T>],
    branches: &[Branch],
) -> Vec<SpectralField<T>> {
    fields
        .iter()
        .zip(branches)
        .map(|(f, b)| table.apply(f, *b))
        .collect()
}

/// One integrating-factor RK4 step with precomputed propagators.
pub fn step_ifrk4_with<T: Real, S: Evolution<T>>(
    state: &S,
    props: &IfPropagators<T>,
    nonlinear: bool,
) -> Result<S, StepError> {
    let branches = state.branches().ok_or(StepError::NoLinearStructure)?;
    let dt = props.dt;
    let t0 = state.time();
    let y: Vec<SpectralField<T>> = state.components().into_iter().cloned().collect();
    let ey_full = propagate_all(&props.full, &y, &branches);
    if !nonlinear {
        return check_finite(state.with_components(ey_full, t0 + dt));
    }
    let h2 = T::lit(0.5) * dt;
    let ey_half = propagate_all(&props.half, &y, &branches);
    let y_refs: Vec<&SpectralField<T>> = y.iter().collect();

    let a = state.nonlinear_tendency();
    let s2 = combine(&y_refs, &[(h2, &a)]);
    let s2 = state.with_components(propagate_all(&props.half, &s2, &branches), t0 + h2);
    let b = s2.nonlinear_tendency();

    let eh_refs: Vec<&SpectralField<T>> = ey_half.iter().collect();
    let s3 = state.with_components(combine(&eh_refs, &[(h2, &b)]), t0 + h2);
    let c = s3.nonlinear_tendency();

    let ec_half = propagate_all(&props.half, &c, &branches);
    let ef_refs: Vec<&SpectralField<T>> = ey_full.iter().collect();
    let s4 = state.with_components(combine(&ef_refs, &[(dt, &ec_half)]), t0 + dt);
    let d = s4.nonlinear_tendency();

    let ea_full = propagate_all(&props.full, &a, &branches);
    let bc: Vec<SpectralField<T>> = b.iter().zip(&c).map(|(x, z)| x + z).collect();
    let ebc_half = propagate_all(&props.half, &bc, &branches);
    let sixth = dt / T::lit(6.0);
    let third = dt / T::lit(3.0);
    let next = combine(&ef_refs, &[(sixth, &ea_full), (third, &ebc_half), (sixth, &d)]);
    check_finite(state.with_components(next, t0 + dt))
}

/// One integrating-factor RK4 step.
pub fn step_ifrk4<T: Real, S: Evolution<T>>(state: &S, dt: T, nonlinear: bool) -> Result<S, StepError> {
    let grid = state.components()[0].grid().clone();
    step_ifrk4_with(state, &IfPropagators::new(&grid, state.kappa(), dt), nonlinear)
}

/// `safety * dx / max(1, ||u||_inf)`, additionally capped by `safety / kappa` for RK4.
pub fn cfl_dt<T: Real, S: Evolution<T>>(state: &S, safety: T, scheme: Scheme) -> T {
    let u = state.velocity();
    let phys = inverse_many(&[&u[0], &u[1]]);
    let speed = phys[0]
        .iter()
        .zip(&phys[1])
        .map(|(a, b)| (*a * *a + *b * *b).sqrt())
        .fold(T::zero(), T::max);
    cfl_from_speed(u[0].grid().dx(), speed, state.kappa(), safety, scheme)
}

pub fn cfl_from_speed<T: Real>(dx: T, speed: T, kappa: T, safety: T, scheme: Scheme) -> T {
    let dt = safety * dx / speed.max(T::one());
    match scheme {
        Scheme::Rk4 if kappa > T::zero() => dt.min(safety / kappa),
        _ => dt,
    }
}

/// Whether an observer wants integration to go on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub state: S,
    pub steps: usize,
    pub stopped: bool,
}

/// Advances `state` to `config.t_end`, calling `observe` at the start, every
/// `diagnostic_stride` steps and at the final time.
pub fn integrate<T: Real, S: Evolution<T>>(
    state: S,
    config: &StepperConfig<T>,
    nonlinear: bool,
    mut observe: impl FnMut(&S) -> Control,
) -> Result<Trajectory<S>, StepError> {
    config.validate()?;
    let grid = state.components()[0].grid().clone();
    let kappa = state.kappa();
    let t_end = config.t_end;
    let mut props: Option<IfPropagators<T>> = None;
    let mut current = state;
    let mut steps = 0usize;
    if observe(&current) == Control::Stop {
        return Ok(Trajectory { state: current, steps, stopped: true });
    }
    let mut dt = match config.step {
        StepSize::Fixed(dt) => dt,
        StepSize::Cfl(s) => cfl_dt(&current, s, config.scheme),
    };
    let slack = T::lit(1e-9);
    while t_end - current.time() > slack * dt {
        let remaining = t_end - current.time();
        let last = remaining <= dt * (T::one() + slack);
        let h = if last { remaining } else { dt };
        let next = match config.scheme {
            Scheme::Rk4 => step_rk4(&current, h, nonlinear)?,
            Scheme::Ifrk4 => {
                if props.as_ref().is_none_or(|p| !p.matches(kappa, h)) {
                    props = Some(IfPropagators::new(&grid, kappa, h));
                }
                step_ifrk4_with(&current, props.as_ref().expect("built above"), nonlinear)?
            }
        };
        current = if last {
            next.with_components(next.components().into_iter().cloned().collect(), t_end)
        } else {
            next
        };
        steps += 1;
        if steps.is_multiple_of(config.diagnostic_stride) || last {
            if observe(&current) == Control::Stop {
                return Ok(Trajectory { state: current, steps, stopped: true });
            }
            if let StepSize::Cfl(s) = config.step {
                dt = cfl_dt(&current, s, config.scheme);
            }
        }
    }
    Ok(Trajectory { state: current, steps, stopped: false })
}

/// `||u||_{L^inf}` of a state's velocity.
pub fn max_speed<T: Real, S: Evolution<T>>(state: &S) -> T {
    let u = state.velocity();
    let phys = inverse_many(&[&u[0], &u[1]]);
    phys[0]
        .iter()
        .zip(&phys[1])
        .map(|(a, b)| (*a * *a + *b * *b).sqrt())
        .fold(T::zero(), T::max)
}
