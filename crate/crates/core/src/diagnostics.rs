//! Measured counterparts of the dispersive, Strichartz, bootstrap and product
//! estimates.

use rustfft::num_complex::Complex;
use thiserror::Error;

use crate::littlewood_paley::{
    besov_norm, bump_phi, lp_norm, project_band, sobolev_norm, BandRange,
    Exponent,
};
use crate::model::{from_dispersive, Branch, SqgState, ZState};
use crate::scalar::Real;
use crate::spectral::{
    apply_symbol, forward_many, gradient, inverse_many, inverse_transform, mode_of_index,
    perp_grad_inv_mod, Grid, SpectralField, Symbol,
};
use crate::timestepper::PhaseTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticError {
    #[error("sample window ends at t = {t_max}, beyond the wraparound limit {limit}")]
    WindowViolation { t_max: f64, limit: f64 },
    #[error("sample times must be positive and increasing")]
    BadTimes,
    #[error("{found} samples given, at least {required} needed")]
    TooFewSamples { found: usize, required: usize },
    #[error("(q, r) = ({q}, {r}) is not a 1/2-admissible pair")]
    Inadmissible { q: f64, r: f64 },
    #[error("kappa must be > 0")]
    InvalidKappa,
    #[error("report series is not sorted by time")]
    Unsorted,
    #[error("non-finite value in a report series")]
    NonFinite,
    #[error("a log-log fit needs at least two positive points")]
    DegenerateFit,
    #[error("inputs must be supported in max(|m1|, |m2|) < n/4")]
    NotBandLimited,
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits below this coefficient of determination are flagged.
pub const MIN_R_SQUARED: f64 = 0.98;

impl LogLogFit {
    pub fn flagged(&self) -> bool {
        !(self.r_squared >= MIN_R_SQUARED)
    }

    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<LogLogFit, DiagnosticError> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(DiagnosticError::DegenerateFit);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(DiagnosticError::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Trapezoid rule on possibly nonuniform nodes.
pub fn trapezoid<T: Real>(times: &[T], values: &[T]) -> T {
    let half = T::lit(0.5);
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| half * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// `m` points per decade on `[t_min, t_max]`, both ends included.
pub fn log_spaced_times(t_min: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
    let decades = (t_max / t_min).log10();
    let count = ((decades * per_decade as f64).ceil() as usize).max(1) + 1;
    (0..count)
        .map(|i| t_min * (t_max / t_min).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// Quadrature nodes resolving the `1/kappa` oscillation early on and growing
/// geometrically once the decay is slow.
pub fn dispersive_time_nodes(kappa: f64, horizon: f64) -> Vec<f64> {
    let s_end = kappa * horizon;
    let mut s = vec![0.0];
    let mut cur = 0.0;
    while cur < s_end {
        let step = if cur < 2.0 { 0.05 } else { 0.04 * cur };
        cur = (cur + step).min(s_end);
        s.push(cur);
    }
    s.into_iter().map(|x| x / kappa).collect()
}

/// `||f||_{L^inf}` of the trigonometric interpolant, refined from the best grid
/// maxima by Newton steps on the exact Fourier series.
pub fn sup_norm<T: Real>(field: &SpectralField<T>) -> T {
    sup_norm_from_samples(field, &inverse_transform(field))
}

fn sup_norm_from_samples<T: Real>(field: &SpectralField<T>, samples: &[T]) -> T {
    let grid = field.grid();
    let n = grid.n();
    let grid_max = samples.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    if grid_max == T::zero() {
        return grid_max;
    }
    let active: Vec<(usize, usize, Complex<f64>)> = field
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(idx, c)| {
            let (j1, j2) = (idx % n, idx / n);
            (c.re != T::zero() || c.im != T::zero()) && !grid.is_nyquist(j1) && !grid.is_nyquist(j2)
        })
        .map(|(idx, c)| (idx % n, idx / n, Complex::new(c.re.as_f64(), c.im.as_f64())))
        .collect();
    let dxi = grid.frequency_spacing().as_f64();
    let xi: Vec<f64> = (0..n).map(|j| mode_of_index(j, n) as f64 * dxi).collect();
    let dx = grid.dx().as_f64();

    let mut best = grid_max.as_f64();
    for (j1, j2) in local_maxima(samples, n, 4) {
        let mut x = [j1 as f64 * dx, j2 as f64 * dx];
        for _ in 0..10 {
            let d = taylor(&active, &xi, x, n);
            best = best.max(d.value.abs());
            let det = d.h11 * d.h22 - d.h12 * d.h12;
            let extremum = if d.value > 0.0 { d.h11 < 0.0 } else { d.h11 > 0.0 };
            let mut step = if det > 0.0 && extremum {
                [
                    -(d.h22 * d.g1 - d.h12 * d.g2) / det,
                    -(d.h11 * d.g2 - d.h12 * d.g1) / det,
                ]
            } else {
                let g2 = d.g1 * d.g1 + d.g2 * d.g2;
                if g2 == 0.0 {
                    break;
                }
                // Newton along the gradient when the curvature there points
                // the right way, plain ascent otherwise.
                let curv = d.g1 * d.g1 * d.h11 + 2.0 * d.g1 * d.g2 * d.h12 + d.g2 * d.g2 * d.h22;
                let s = if curv * d.value < 0.0 {
                    -g2 / curv
                } else {
                    d.value.signum() * 0.25 * dx / g2.sqrt()
                };
                [s * d.g1, s * d.g2]
            };
            let len = (step[0] * step[0] + step[1] * step[1]).sqrt();
            if len > dx {
                step = [step[0] * dx / len, step[1] * dx / len];
            }
            x = [x[0] + step[0], x[1] + step[1]];
            if len < 1e-9 * dx {
                break;
            }
        }
        best = best.max(taylor(&active, &xi, x, n).value.abs());
    }
    T::lit(best)
}

struct Local {
    value: f64,
    g1: f64,
    g2: f64,
    h11: f64,
    h12: f64,
    h22: f64,
}

fn taylor(active: &[(usize, usize, Complex<f64>)], xi: &[f64], x: [f64; 2], n: usize) -> Local {
    let e1: Vec<Complex<f64>> = (0..n).map(|j| Complex::from_polar(1.0, xi[j] * x[0])).collect();
    let e2: Vec<Complex<f64>> = (0..n).map(|j| Complex::from_polar(1.0, xi[j] * x[1])).collect();
    let mut out = Local {
        value: 0.0,
        g1: 0.0,
        g2: 0.0,
        h11: 0.0,
        h12: 0.0,
        h22: 0.0,
    };
    for &(j1, j2, c) in active {
        let t = c * e1[j1] * e2[j2];
        let (a, b) = (xi[j1], xi[j2]);
        out.value += t.re;
        out.g1 -= a * t.im;
        out.g2 -= b * t.im;
        out.h11 -= a * a * t.re;
        out.h12 -= a * b * t.re;
        out.h22 -= b * b * t.re;
    }
    out
}

/// Up to `count` largest local maxima of `|samples|` on the periodic grid.
fn local_maxima<T: Real>(samples: &[T], n: usize, count: usize) -> Vec<(usize, usize)> {
    let mut found: Vec<(T, usize, usize)> = Vec::new();
    for j2 in 0..n {
        for j1 in 0..n {
            let v = samples[j2 * n + j1].abs();
            let mut peak = true;
            'nb: for d2 in [n - 1, 0, 1] {
                for d1 in [n - 1, 0, 1] {
                    if d1 == 0 && d2 == 0 {
                        continue;
                    }
                    let w = samples[((j2 + d2) % n) * n + (j1 + d1) % n].abs();
                    if w > v {
                        peak = false;
                        break 'nb;
                    }
                }
            }
            if peak {
                found.push((v, j1, j2));
            }
        }
    }
    found.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    found.into_iter().take(count).map(|(_, a, b)| (a, b)).collect()
}

/// `P_k` applied to the Gaussian `g(2^k (x - center))` with
/// `g(x) = exp(-x_1^2 / (2 s_1^2) - x_2^2 / (2 s_2^2))`, sampled from its
/// transform on the lattice.
pub fn band_bump<T: Real>(grid: &Grid<T>, k: i32, sigma: [f64; 2], center: [f64; 2]) -> SpectralField<T> {
    let l = grid.length().as_f64();
    let scale = 2f64.powi(-k);
    let norm = 2.0 * std::f64::consts::PI * sigma[0] * sigma[1] * scale * scale / (l * l);
    SpectralField::from_fn(grid, |j1, j2| {
        if grid.is_nyquist(j1) || grid.is_nyquist(j2) {
            return Complex::new(T::zero(), T::zero());
        }
        let (a, b) = grid.xi(j1, j2);
        let (a, b) = (a.as_f64(), b.as_f64());
        let (e1, e2) = (a * scale * sigma[0], b * scale * sigma[1]);
        let eta = (a * a + b * b).sqrt() * scale;
        let amp = norm * (-(e1 * e1 + e2 * e2) / 2.0).exp() * bump_phi(eta);
        let phase = -(a * center[0] + b * center[1]);
        Complex::new(T::lit(amp * phase.cos()), T::lit(amp * phase.sin()))
    })
}

fn check_window<T: Real>(grid: &Grid<T>, kappa: f64, t_max: f64) -> Result<(), DiagnosticError> {
    if !(kappa > 0.0) {
        return Err(DiagnosticError::InvalidKappa);
    }
    let limit = grid.length().as_f64() / (4.0 * kappa);
    if t_max > limit * (1.0 + 1e-12) {
        return Err(DiagnosticError::WindowViolation { t_max, limit });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DecayFit {
    pub band: i32,
    pub kappa: f64,
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub sup_fit: LogLogFit,
    /// Exponent and samples of the optional `L^p` measurement.
    pub lp: Option<(f64, Vec<f64>, LogLogFit)>,
    /// `||e^{it Lambda} P_k f||_inf (kappa t)^{1/2} / (2^{2k} ||P_k f||_{L^1})`.
    pub constant_ratios: Vec<f64>,
    pub window: (f64, f64),
}

/// Free evolution `e^{i t Lambda_kappa} P_k f0` sampled at `times`.
pub fn linear_decay_fit<T: Real>(
    f0: &SpectralField<T>,
    kappa: f64,
    k: i32,
    times: &[f64],
    p: Option<f64>,
) -> Result<DecayFit, DiagnosticError> {
    if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DiagnosticError::BadTimes);
    }
    let (t_min, t_max) = (times[0], times[times.len() - 1]);
    check_window(f0.grid(), kappa, t_max)?;
    let required = ((8.0 * (t_max / t_min).log10()).ceil() as usize).max(8);
    if times.len() < required {
        return Err(DiagnosticError::TooFewSamples {
            found: times.len(),
            required,
        });
    }
    let piece = project_band(f0, k);
    let grid = piece.grid().clone();
    let l1 = lp_norm(&inverse_transform(&piece), &grid, Exponent::Finite(T::one())).as_f64();
    let kk = T::lit(kappa);
    let mut sup_norms = Vec::with_capacity(times.len());
    let mut lp_norms = Vec::new();
    for pair in times.chunks(2) {
        let evolved: Vec<SpectralField<T>> = pair
            .iter()
            .map(|&t| PhaseTable::new(&grid, kk, T::lit(t)).apply(&piece, Branch::Minus))
            .collect();
        let refs: Vec<&SpectralField<T>> = evolved.iter().collect();
        let samples = inverse_many(&refs);
        for (f, s) in evolved.iter().zip(&samples) {
            sup_norms.push(sup_norm_from_samples(f, s).as_f64());
            if let Some(p) = p {
                lp_norms.push(lp_norm(s, &grid, Exponent::Finite(T::lit(p))).as_f64());
            }
        }
    }
    let sup_fit = loglog_fit(times, &sup_norms)?;
    let lp = match p {
        Some(p) => {
            let fit = loglog_fit(times, &lp_norms)?;
            Some((p, lp_norms, fit))
        }
        None => None,
    };
    let weight = 2f64.powi(2 * k) * l1;
    let constant_ratios = times
        .iter()
        .zip(&sup_norms)
        .map(|(t, s)| s * (kappa * t).sqrt() / weight)
        .collect();
    Ok(DecayFit {
        band: k,
        kappa,
        times: times.to_vec(),
        sup_norms,
        sup_fit,
        lp,
        constant_ratios,
        window: (t_min, t_max),
    })
}

/// Largest relative spread of `||e^{i (s/kappa) Lambda_kappa} P_k f||_inf`
/// across `kappas` at each rescaled time `s`.
pub fn decay_collapse_residual<T: Real>(
    f0: &SpectralField<T>,
    k: i32,
    kappas: &[f64],
    scaled_times: &[f64],
) -> f64 {
    let piece = project_band(f0, k);
    let grid = piece.grid().clone();
    let mut worst: f64 = 0.0;
    for &s in scaled_times {
        let values: Vec<f64> = kappas
            .iter()
            .map(|&kappa| {
                let e = PhaseTable::new(&grid, T::lit(kappa), T::lit(s / kappa)).apply(&piece, Branch::Minus);
                sup_norm(&e).as_f64()
            })
            .collect();
        let hi = values.iter().cloned().fold(f64::MIN, f64::max);
        let lo = values.iter().cloned().fold(f64::MAX, f64::min);
        worst = worst.max((hi - lo) / hi);
    }
    worst
}

/// A pair with `1/q + 1/(2r) = 1/4`, `q >= 4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissiblePair {
    pub q: Exponent<f64>,
    pub r: Exponent<f64>,
}

fn reciprocal(e: Exponent<f64>) -> f64 {
    match e {
        Exponent::Finite(x) => 1.0 / x,
        Exponent::Infinite => 0.0,
    }
}

fn exponent_value(e: Exponent<f64>) -> f64 {
    match e {
        Exponent::Finite(x) => x,
        Exponent::Infinite => f64::INFINITY,
    }
}

impl AdmissiblePair {
    pub fn new(q: Exponent<f64>, r: Exponent<f64>) -> Result<Self, DiagnosticError> {
        let bad = DiagnosticError::Inadmissible {
            q: exponent_value(q),
            r: exponent_value(r),
        };
        let q_ok = match q {
            Exponent::Finite(x) => x >= 4.0,
            Exponent::Infinite => true,
        };
        let r_ok = match r {
            Exponent::Finite(x) => x >= 2.0,
            Exponent::Infinite => true,
        };
        if !(q_ok && r_ok) || (reciprocal(q) + 0.5 * reciprocal(r) - 0.25).abs() > 1e-12 {
            return Err(bad);
        }
        Ok(AdmissiblePair { q, r })
    }

    /// `(q, 2q/(q-4))`, with `(4, inf)` at the endpoint.
    pub fn from_q(q: f64) -> Result<Self, DiagnosticError> {
        if q == f64::INFINITY {
            return Self::new(Exponent::Infinite, Exponent::Finite(2.0));
        }
        if q == 4.0 {
            return Self::new(Exponent::Finite(4.0), Exponent::Infinite);
        }
        Self::new(Exponent::Finite(q), Exponent::Finite(2.0 * q / (q - 4.0)))
    }

    /// `kappa^{-1/q} 2^{4k/q}`.
    pub fn scaling(&self, kappa: f64, k: i32) -> f64 {
        let iq = reciprocal(self.q);
        kappa.powf(-iq) * 2f64.powf(4.0 * k as f64 * iq)
    }
}

fn space_norm<T: Real>(field: &SpectralField<T>, samples: Option<&[T]>, r: Exponent<f64>) -> f64 {
    match r {
        Exponent::Infinite => match samples {
            Some(s) => sup_norm_from_samples(field, s).as_f64(),
            None => sup_norm(field).as_f64(),
        },
        Exponent::Finite(2.0) => field.l2_norm().as_f64(),
        Exponent::Finite(r) => {
            let owned;
            let s = match samples {
                Some(s) => s,
                None => {
                    owned = inverse_transform(field);
                    &owned
                }
            };
            lp_norm(s, field.grid(), Exponent::Finite(T::lit(r))).as_f64()
        }
    }
}

fn time_norm(times: &[f64], values: &[f64], q: Exponent<f64>) -> f64 {
    match q {
        Exponent::Infinite => values.iter().cloned().fold(0.0, f64::max),
        Exponent::Finite(q) => {
            let powered: Vec<f64> = values.iter().map(|v| v.powf(q)).collect();
            trapezoid(times, &powered).powf(1.0 / q)
        }
    }
}

fn norms_along<T: Real>(fields: &[SpectralField<T>], r: Exponent<f64>) -> Vec<f64> {
    if r == Exponent::Finite(2.0) {
        return fields.iter().map(|f| f.l2_norm().as_f64()).collect();
    }
    let mut out = Vec::with_capacity(fields.len());
    for chunk in fields.chunks(2) {
        let refs: Vec<&SpectralField<T>> = chunk.iter().collect();
        let samples = inverse_many(&refs);
        for (f, s) in chunk.iter().zip(&samples) {
            out.push(space_norm(f, Some(s), r));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrichartzMeasurement {
    /// `||e^{it Lambda} P_k f||_{L^q_t L^r_x}` over `[0, horizon]`.
    pub lhs: f64,
    /// `||P_k f||_{L^2}`.
    pub data_norm: f64,
    /// `lhs / (kappa^{-1/q} 2^{4k/q} ||P_k f||_2)`.
    pub ratio: f64,
}

pub fn strichartz_ratio<T: Real>(
    f0: &SpectralField<T>,
    kappa: f64,
    pair: AdmissiblePair,
    k: i32,
    horizon: f64,
) -> Result<StrichartzMeasurement, DiagnosticError> {
    check_window(f0.grid(), kappa, horizon)?;
    let piece = project_band(f0, k);
    let times = dispersive_time_nodes(kappa, horizon);
    let grid = piece.grid().clone();
    let kk = T::lit(kappa);
    let mut values = Vec::with_capacity(times.len());
    for chunk in times.chunks(16) {
        let evolved: Vec<SpectralField<T>> = chunk
            .iter()
            .map(|&t| PhaseTable::new(&grid, kk, T::lit(t)).apply(&piece, Branch::Minus))
            .collect();
        values.extend(norms_along(&evolved, pair.r));
    }
    let lhs = time_norm(&times, &values, pair.q);
    let data_norm = piece.l2_norm().as_f64();
    let rhs = pair.scaling(kappa, k) * data_norm;
    Ok(StrichartzMeasurement {
        lhs,
        data_norm,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuhamelMeasurement {
    /// `||int_0^t e^{i(t-s)Lambda} P_k F(s) ds||_{L^q_t L^r_x}`.
    pub lhs: f64,
    /// `||P_k F||_{L^1_t L^2_x}`.
    pub forcing_norm: f64,
    pub ratio: f64,
}

/// Duhamel integral on a uniform grid of step `<= ds`, trapezoid in `s` with
/// the propagator applied exactly.
pub fn duhamel_strichartz_ratio<T: Real>(
    forcing: impl Fn(f64) -> SpectralField<T>,
    kappa: f64,
    pair: AdmissiblePair,
    k: i32,
    horizon: f64,
    ds: f64,
) -> Result<DuhamelMeasurement, DiagnosticError> {
    let probe = forcing(0.0);
    let grid = probe.grid().clone();
    check_window(&grid, kappa, horizon)?;
    let scale = T::lit(2f64.powi(-k));
    let band: Vec<T> = grid.modulus().iter().map(|&r| bump_phi(r * scale)).collect();
    let project = |f: SpectralField<T>| {
        let mut f = f;
        for (c, m) in f.coeffs_mut().iter_mut().zip(&band) {
            *c *= *m;
        }
        f
    };
    let first = project(probe);
    let steps = (horizon / ds).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let kk = T::lit(kappa);
    // Rotating-frame accumulator J(t) = int_0^t e^{-is Lambda} P_k F(s) ds, so
    // that the Duhamel term is e^{it Lambda} J(t). The frame table holds
    // e^{-it Lambda}; its conjugate rotates back.
    let step = PhaseTable::new(&grid, kk, T::lit(h));
    let mut frame = PhaseTable::new(&grid, kk, T::zero());
    let mut rotated_prev = first.clone();
    let mut accum = SpectralField::zeros(&grid);
    let mut forcing_l2 = vec![first.l2_norm().as_f64()];
    let mut times = vec![0.0];
    let mut values = vec![0.0];
    let half = T::lit(0.5 * h);
    let mut batch: Vec<SpectralField<T>> = Vec::new();
    let mut batch_times: Vec<f64> = Vec::new();
    for j in 1..=steps {
        let t = j as f64 * h;
        let fj = project(forcing(t));
        forcing_l2.push(fj.l2_norm().as_f64());
        frame = frame.compose(&step);
        let rotated = frame.apply(&fj, Branch::Plus);
        accum.axpy(half, &rotated_prev);
        accum.axpy(half, &rotated);
        rotated_prev = rotated;
        batch.push(frame.apply(&accum, Branch::Minus));
        batch_times.push(t);
        if batch.len() == 16 || j == steps {
            values.extend(norms_along(&batch, pair.r));
            times.append(&mut batch_times);
            batch.clear();
        }
    }
    let lhs = time_norm(&times, &values, pair.q);
    let grid_times: Vec<f64> = (0..=steps).map(|j| j as f64 * h).collect();
    let forcing_norm = trapezoid(&grid_times, &forcing_l2);
    let rhs = pair.scaling(kappa, k) * forcing_norm;
    Ok(DuhamelMeasurement {
        lhs,
        forcing_norm,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
    })
}

/// Quantities that the norm tracker samples along a trajectory.
pub trait Observable<T: Real> {
    fn time(&self) -> T;
    /// `||u||_{H^n} + ||rho||_{H^n}` (Boussinesq) or `||theta||_{H^n}` (SQG).
    fn energy_norm(&self, n: T) -> T;
    /// `B^1_{inf,1}` norm of the dispersive unknowns.
    fn bootstrap_density(&self) -> T;
    /// `||grad (u, rho)||_{L^inf}` or `||grad (u, theta)||_{L^inf}`.
    fn gradient_sup(&self) -> T;
    /// `||u||^2 + ||rho||^2` or `||theta||^2`.
    fn l2_energy(&self) -> T;
}

fn b1_inf_1<T: Real>(f: &SpectralField<T>) -> T {
    besov_norm(f, T::one(), Exponent::Infinite, Exponent::Finite(T::one()), false)
        .expect("valid exponents")
}

/// `sup |grad v| + sup |grad s|` for a vector field `v` and a scalar `s`.
fn gradient_sup_of<T: Real>(u: &[SpectralField<T>; 2], s: &SpectralField<T>) -> T {
    let [a, b] = gradient(&u[0]);
    let [c, d] = gradient(&u[1]);
    let [e, f] = gradient(s);
    let phys = inverse_many(&[&a, &b, &c, &d, &e, &f]);
    let mut gu = T::zero();
    let mut gs = T::zero();
    for i in 0..phys[0].len() {
        let v = phys[0][i] * phys[0][i] + phys[1][i] * phys[1][i] + phys[2][i] * phys[2][i] + phys[3][i] * phys[3][i];
        gu = gu.max(v);
        gs = gs.max(phys[4][i] * phys[4][i] + phys[5][i] * phys[5][i]);
    }
    gu.sqrt() + gs.sqrt()
}

impl<T: Real> Observable<T> for ZState<T> {
    fn time(&self) -> T {
        self.time
    }

    fn energy_norm(&self, n: T) -> T {
        let p = from_dispersive(self);
        let u = (sobolev_norm(&p.u[0], n).powi(2) + sobolev_norm(&p.u[1], n).powi(2)).sqrt();
        u + sobolev_norm(&p.rho, n)
    }

    fn bootstrap_density(&self) -> T {
        b1_inf_1(&self.z_plus) + b1_inf_1(&self.z_minus)
    }

    fn gradient_sup(&self) -> T {
        let p = from_dispersive(self);
        gradient_sup_of(&p.u, &p.rho)
    }

    fn l2_energy(&self) -> T {
        let p = from_dispersive(self);
        p.u[0].l2_norm_sq() + p.u[1].l2_norm_sq() + p.rho.l2_norm_sq()
    }
}

impl<T: Real> Observable<T> for SqgState<T> {
    fn time(&self) -> T {
        self.time
    }

    fn energy_norm(&self, n: T) -> T {
        sobolev_norm(&self.theta, n)
    }

    fn bootstrap_density(&self) -> T {
        b1_inf_1(&self.theta)
    }

    fn gradient_sup(&self) -> T {
        gradient_sup_of(&self.velocity(), &self.theta)
    }

    fn l2_energy(&self) -> T {
        self.theta.l2_norm_sq()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport<T> {
    pub time: T,
    pub sobolev_hn: T,
    pub besov_b1_inf_1: T,
    pub grad_linf: T,
    pub l2_energy: T,
    pub accumulated_bootstrap: T,
    pub accumulated_blowup: T,
}

/// Samples [`NormReport`]s and accumulates the time integrals by trapezoid.
#[derive(Debug, Clone)]
pub struct NormTracker<T> {
    n_regularity: T,
    reports: Vec<NormReport<T>>,
}

impl<T: Real> NormTracker<T> {
    pub fn new(n_regularity: T) -> Self {
        NormTracker {
            n_regularity,
            reports: Vec::new(),
        }
    }

    pub fn record<S: Observable<T>>(&mut self, state: &S) -> NormReport<T> {
        let mut r = NormReport {
            time: state.time(),
            sobolev_hn: state.energy_norm(self.n_regularity),
            besov_b1_inf_1: state.bootstrap_density(),
            grad_linf: state.gradient_sup(),
            l2_energy: state.l2_energy(),
            accumulated_bootstrap: T::zero(),
            accumulated_blowup: T::zero(),
        };
        if let Some(prev) = self.reports.last() {
            let half = T::lit(0.5) * (r.time - prev.time);
            r.accumulated_bootstrap = prev.accumulated_bootstrap + half * (prev.besov_b1_inf_1 + r.besov_b1_inf_1);
            r.accumulated_blowup = prev.accumulated_blowup + half * (prev.grad_linf + r.grad_linf);
        }
        self.reports.push(r);
        r
    }

    pub fn reports(&self) -> &[NormReport<T>] {
        &self.reports
    }

    pub fn last(&self) -> Option<&NormReport<T>> {
        self.reports.last()
    }
}

fn validate_series<T: Real>(reports: &[NormReport<T>]) -> Result<(), DiagnosticError> {
    if reports.windows(2).any(|w| !(w[1].time > w[0].time)) {
        return Err(DiagnosticError::Unsorted);
    }
    if reports.iter().any(|r| !r.time.is_finite() || !r.besov_b1_inf_1.is_finite() || !r.grad_linf.is_finite()) {
        return Err(DiagnosticError::NonFinite);
    }
    Ok(())
}

/// `int ||Z||_{B^1_{inf,1}} dt` over the report series.
pub fn bootstrap_norm<T: Real>(reports: &[NormReport<T>]) -> Result<T, DiagnosticError> {
    validate_series(reports)?;
    let t: Vec<T> = reports.iter().map(|r| r.time).collect();
    let b: Vec<T> = reports.iter().map(|r| r.besov_b1_inf_1).collect();
    Ok(trapezoid(&t, &b))
}

/// `int ||grad (u, rho)||_{L^inf} dt` over the report series.
pub fn accumulated_blowup<T: Real>(reports: &[NormReport<T>]) -> Result<T, DiagnosticError> {
    validate_series(reports)?;
    let t: Vec<T> = reports.iter().map(|r| r.time).collect();
    let g: Vec<T> = reports.iter().map(|r| r.grad_linf).collect();
    Ok(trapezoid(&t, &g))
}

/// Pointwise-in-time continuation functional `||grad (u, rho)||_{L^inf}`.
pub fn blowup_functional<T: Real, S: Observable<T>>(state: &S) -> T {
    state.gradient_sup()
}

fn max_mode<T: Real>(f: &SpectralField<T>) -> i64 {
    let n = f.grid().n();
    f.coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.re != T::zero() || c.im != T::zero())
        .map(|(i, _)| mode_of_index(i % n, n).abs().max(mode_of_index(i / n, n).abs()))
        .max()
        .unwrap_or(0)
}

/// `(||u.grad f||_{H^m} + ||u |grad| f||_{H^m}) /
/// (||g||_{H^m} ||f||_{B.^1_{inf,1}} + ||g||_{B.^0_{inf,1}} ||f||_{H^{m+1}})`
/// with `u = grad^perp |grad|^{-1} g`.
///
/// Inputs supported below a quarter of the grid make the products exact.
pub fn product_estimate_ratio<T: Real>(
    f: &SpectralField<T>,
    g: &SpectralField<T>,
    m: T,
) -> Result<T, DiagnosticError> {
    let n = f.grid().n() as i64;
    if 4 * max_mode(f).max(max_mode(g)) >= n {
        return Err(DiagnosticError::NotBandLimited);
    }
    let rhs = {
        let inf = Exponent::Infinite;
        let one = Exponent::Finite(T::one());
        let fb = besov_norm(f, T::one(), inf, one, true).expect("valid exponents");
        let gb = besov_norm(g, T::zero(), inf, one, true).expect("valid exponents");
        sobolev_norm(g, m) * fb + gb * sobolev_norm(f, m + T::one())
    };
    if rhs == T::zero() {
        return Ok(T::zero());
    }
    let u = perp_grad_inv_mod(g);
    let [f1, f2] = gradient(f);
    let mf = apply_symbol(f, Symbol::ModNabla(T::one())).expect("regular symbol");
    let phys = inverse_many(&[&u[0], &u[1], &f1, &f2, &mf]);
    let len = phys[0].len();
    let mut adv = Vec::with_capacity(len);
    let mut w1 = Vec::with_capacity(len);
    let mut w2 = Vec::with_capacity(len);
    for i in 0..len {
        adv.push(phys[0][i] * phys[2][i] + phys[1][i] * phys[3][i]);
        w1.push(phys[0][i] * phys[4][i]);
        w2.push(phys[1][i] * phys[4][i]);
    }
    let prods = forward_many(&[&adv, &w1, &w2], f.grid()).expect("grid-sized products");
    let lhs = sobolev_norm(&prods[0], m)
        + (sobolev_norm(&prods[1], m).powi(2) + sobolev_norm(&prods[2], m).powi(2)).sqrt();
    Ok(lhs / rhs)
}

/// `sum_k 2^{lk} ||P_k f||_2 / ||f||_{H^{l + delta}}`.
pub fn summation_ratio<T: Real>(f: &SpectralField<T>, l: T, delta: T) -> T {
    let denom = sobolev_norm(f, l + delta);
    if denom == T::zero() {
        return T::zero();
    }
    let two = T::lit(2.0);
    let sum: T = BandRange::for_grid(f.grid())
        .iter()
        .map(|k| two.powf(l * T::lit(k as f64)) * project_band(f, k).l2_norm())
        .sum();
    sum / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn fit_recovers_exact_power_law() {
        let xs: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-4.0 / 3.0)).collect();
        let fit = loglog_fit(&xs, &ys).unwrap();
        assert!((fit.slope + 4.0 / 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(!fit.flagged());
        assert!(loglog_fit(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn trapezoid_of_constant() {
        let t = [0.0, 0.3, 1.0, 2.5];
        let v = [2.0; 4];
        assert!((trapezoid(&t, &v) - 5.0f64).abs() < 1e-15);
    }

    #[test]
    fn log_spacing_density() {
        let t = log_spaced_times(5.0, 150.0, 8);
        assert_eq!(t[0], 5.0);
        assert!((t[t.len() - 1] - 150.0).abs() < 1e-12);
        assert!(t.len() as f64 >= 8.0 * (30f64).log10());
    }

    #[test]
    fn refined_sup_norm_finds_off_grid_peak() {
        let g = make_grid::<f64>(16, 2.0 * PI, 2.0 / 3.0).unwrap();
        // cos(x - 0.2) peaks between grid points.
        let f = SpectralField::from_fn(&g, |j1, j2| {
            let m = mode_of_index(j1, 16);
            if j2 == 0 && m.abs() == 1 {
                Complex::from_polar(0.5, -0.2 * m as f64)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        let grid_max = inverse_transform(&f).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!(grid_max < 0.999);
        assert!((sup_norm(&f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn admissible_pairs() {
        assert!(AdmissiblePair::from_q(4.0).is_ok());
        assert!(AdmissiblePair::from_q(f64::INFINITY).is_ok());
        assert!(AdmissiblePair::from_q(8.0).unwrap().r == Exponent::Finite(4.0));
        assert!(AdmissiblePair::new(Exponent::Finite(4.0), Exponent::Finite(2.0)).is_err());
        assert!(AdmissiblePair::new(Exponent::Finite(2.0), Exponent::Infinite).is_err());
    }

    #[test]
    fn energy_exponent_pair_gives_unit_ratio() {
        let g = make_grid::<f64>(64, 2.0 * PI * 10.0, 2.0 / 3.0).unwrap();
        let c = 10.0 * PI;
        let f = band_bump(&g, 0, [1.0, 1.0], [c, c]);
        let pair = AdmissiblePair::from_q(f64::INFINITY).unwrap();
        let m = strichartz_ratio(&f, 1.0, pair, 0, 5.0).unwrap();
        assert!((m.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_and_density_checks() {
        let g = make_grid::<f64>(32, 2.0 * PI * 4.0, 2.0 / 3.0).unwrap();
        let f = band_bump(&g, 0, [1.0, 1.0], [4.0 * PI, 4.0 * PI]);
        let limit = 2.0 * PI;
        let times = log_spaced_times(1.0, 2.0 * limit, 10);
        assert!(matches!(
            linear_decay_fit(&f, 1.0, 0, &times, None),
            Err(DiagnosticError::WindowViolation { .. })
        ));
        assert!(matches!(
            linear_decay_fit(&f, 1.0, 0, &[1.0, 2.0, 3.0], None),
            Err(DiagnosticError::TooFewSamples { .. })
        ));
        assert!(matches!(
            linear_decay_fit(&f, 1.0, 0, &[2.0, 1.0], None),
            Err(DiagnosticError::BadTimes)
        ));
    }

    #[test]
    fn zero_inputs_give_zero_ratios() {
        let g = make_grid::<f64>(32, 2.0 * PI, 2.0 / 3.0).unwrap();
        let z = SpectralField::zeros(&g);
        let f = SpectralField::cosine_mode(&g, 1, 2, 1.0);
        assert_eq!(product_estimate_ratio(&z, &f, 1.0).unwrap(), 0.0);
        assert_eq!(product_estimate_ratio(&f, &z, 1.0).unwrap(), 0.0);
        assert_eq!(summation_ratio(&z, 2.0, 0.5), 0.0);
        let wide = SpectralField::cosine_mode(&g, 9, 0, 1.0);
        assert_eq!(
            product_estimate_ratio(&wide, &f, 1.0).unwrap_err(),
            DiagnosticError::NotBandLimited
        );
    }

    #[test]
    fn bootstrap_of_constant_density() {
        let reports: Vec<NormReport<f64>> = [0.0, 0.5, 2.0]
            .iter()
            .map(|&t| NormReport {
                time: t,
                sobolev_hn: 1.0,
                besov_b1_inf_1: 3.0,
                grad_linf: 1.0,
                l2_energy: 1.0,
                accumulated_bootstrap: 0.0,
                accumulated_blowup: 0.0,
            })
            .collect();
        assert!((bootstrap_norm(&reports).unwrap() - 6.0).abs() < 1e-15);
        let mut bad = reports.clone();
        bad.swap(0, 1);
        assert_eq!(bootstrap_norm(&bad).unwrap_err(), DiagnosticError::Unsorted);
        bad = reports;
        bad[1].besov_b1_inf_1 = f64::NAN;
        assert_eq!(bootstrap_norm(&bad).unwrap_err(), DiagnosticError::NonFinite);
    }

    #[test]
    fn blowup_functional_of_rest_is_zero() {
        let g = make_grid::<f64>(16, 2.0 * PI, 2.0 / 3.0).unwrap();
        let z = ZState::new(SpectralField::zeros(&g), SpectralField::zeros(&g), 1.0).unwrap();
        assert_eq!(blowup_functional(&z), 0.0);
    }
}
