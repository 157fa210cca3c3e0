//! Periodic-box Fourier machinery.
//!
//! A [`GridSpec`] describes the square box `[0, L)^2` sampled on `n x n`
//! points. Fields are stored as Fourier coefficients in FFT order: flat index
//! `j2 * n + j1`, where `j1` runs along `x1` and maps to the integer mode
//! `m1 = j1` for `j1 < n/2` and `m1 = j1 - n` otherwise. The physical
//! wavevector is `xi = (2 pi / L) m`.
//!
//! The forward transform carries the `1/n^2` factor, so the `xi = 0`
//! coefficient is the field mean and `||f||_{L^2}^2 = L^2 sum |c_m|^2`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::scalar::Real;

pub const DEFAULT_DEALIAS_FRACTION: f64 = 2.0 / 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("resolution must be a power of two >= 8, got {0}")]
    InvalidResolution(usize),
    #[error("domain length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error("dealias fraction must lie in (0, 1], got {0}")]
    InvalidDealias(f64),
    #[error("sample array has {found} entries, grid expects {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("symbol with negative homogeneity applied to a field with nonzero mean")]
    NonzeroMean,
}

/// Coordinate axis of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

pub struct GridSpec<T: Real> {
    n: usize,
    length: T,
    dealias_fraction: T,
    wavenumbers: Vec<T>,
    modulus: Vec<T>,
    retained: Vec<bool>,
    fft_forward: Arc<dyn Fft<T>>,
    fft_inverse: Arc<dyn Fft<T>>,
}

/// Shared handle to a grid; fields keep one of these.
pub type Grid<T> = Arc<GridSpec<T>>;

impl<T: Real> fmt::Debug for GridSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("n", &self.n)
            .field("length", &self.length)
            .field("dealias_fraction", &self.dealias_fraction)
            .finish()
    }
}

impl<T: Real> PartialEq for GridSpec<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.length == other.length
            && self.dealias_fraction == other.dealias_fraction
    }
}

/// Builds a grid with `n` points per axis on a box of side `length`.
pub fn make_grid<T: Real>(
    n: usize,
    length: T,
    dealias_fraction: T,
) -> Result<Grid<T>, SpectralError> {
    if n < 8 || !n.is_power_of_two() {
        return Err(SpectralError::InvalidResolution(n));
    }
    if !(length > T::zero()) || !length.is_finite() {
        return Err(SpectralError::InvalidLength(length.as_f64()));
    }
    if !(dealias_fraction > T::zero() && dealias_fraction <= T::one()) {
        return Err(SpectralError::InvalidDealias(dealias_fraction.as_f64()));
    }
    let spacing = T::TAU() / length;
    let wavenumbers: Vec<T> = (0..n)
        .map(|j| T::lit(mode_of_index(j, n) as f64) * spacing)
        .collect();
    let cutoff = dealias_fraction.as_f64() * (n / 2) as f64;
    let mut modulus = Vec::with_capacity(n * n);
    let mut retained = Vec::with_capacity(n * n);
    for j2 in 0..n {
        for j1 in 0..n {
            let (k1, k2) = (wavenumbers[j1], wavenumbers[j2]);
            modulus.push((k1 * k1 + k2 * k2).sqrt());
            let m = mode_of_index(j1, n).abs().max(mode_of_index(j2, n).abs());
            retained.push(m as f64 <= cutoff);
        }
    }
    let mut planner = FftPlanner::new();
    Ok(Arc::new(GridSpec {
        n,
        length,
        dealias_fraction,
        wavenumbers,
        modulus,
        retained,
        fft_forward: planner.plan_fft_forward(n),
        fft_inverse: planner.plan_fft_inverse(n),
    }))
}

/// Integer mode carried by FFT index `j` on an `n`-point axis.
#[inline]
pub fn mode_of_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// FFT index holding integer mode `m` on an `n`-point axis.
#[inline]
pub fn index_of_mode(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

impl<T: Real> GridSpec<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn dealias_fraction(&self) -> T {
        self.dealias_fraction
    }

    /// Physical grid spacing `L / n`.
    pub fn dx(&self) -> T {
        self.length / T::lit(self.n as f64)
    }

    /// Lattice spacing in frequency, `2 pi / L`.
    pub fn frequency_spacing(&self) -> T {
        T::TAU() / self.length
    }

    /// Largest retained integer mode per axis.
    pub fn cutoff_mode(&self) -> i64 {
        (self.dealias_fraction.as_f64() * (self.n / 2) as f64).floor() as i64
    }

    /// Wavenumber `xi_j` along one axis for FFT index `j`.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> T {
        self.wavenumbers[j]
    }

    pub fn wavenumbers(&self) -> &[T] {
        &self.wavenumbers
    }

    #[inline]
    pub fn xi(&self, j1: usize, j2: usize) -> (T, T) {
        (self.wavenumbers[j1], self.wavenumbers[j2])
    }

    /// Table of `|xi|` in flat FFT order.
    pub fn modulus(&self) -> &[T] {
        &self.modulus
    }

    /// Dealiasing mask in flat FFT order.
    pub fn retained_mask(&self) -> &[bool] {
        &self.retained
    }

    #[inline]
    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// Flat index of the mode `-m` paired with flat index `idx`.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.n;
        let (j1, j2) = (idx % n, idx / n);
        ((n - j2) % n) * n + (n - j1) % n
    }

    /// Smallest nonzero `|xi|` on the lattice.
    pub fn min_modulus(&self) -> T {
        self.frequency_spacing()
    }

    /// Largest `|xi|` anywhere on the lattice (Nyquist corner).
    pub fn max_modulus(&self) -> T {
        self.frequency_spacing() * T::lit((self.n / 2) as f64) * T::SQRT_2()
    }

    /// Largest `|xi|` among dealiased modes.
    pub fn max_retained_modulus(&self) -> T {
        self.frequency_spacing() * T::lit(self.cutoff_mode() as f64) * T::SQRT_2()
    }

    /// Physical coordinate of sample index `j` along an axis.
    pub fn coordinate(&self, j: usize) -> T {
        self.dx() * T::lit(j as f64)
    }

    fn fft_rows(&self, buf: &mut [Complex<T>], inverse: bool, scratch: &mut Vec<Complex<T>>) {
        let plan = if inverse {
            &self.fft_inverse
        } else {
            &self.fft_forward
        };
        let need = plan.get_inplace_scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex::new(T::zero(), T::zero()));
        }
        plan.process_with_scratch(buf, &mut scratch[..need]);
    }

    /// Unnormalized 2D FFT in place.
    fn fft2(&self, buf: &mut [Complex<T>], inverse: bool) {
        let n = self.n;
        let mut scratch = Vec::new();
        let mut tmp = vec![Complex::new(T::zero(), T::zero()); n * n];
        self.fft_rows(buf, inverse, &mut scratch);
        transpose(buf, &mut tmp, n);
        self.fft_rows(&mut tmp, inverse, &mut scratch);
        transpose(&tmp, buf, n);
    }
}

fn transpose<T: Copy>(src: &[T], dst: &mut [T], n: usize) {
    const BLOCK: usize = 32;
    let b = BLOCK.min(n);
    for r0 in (0..n).step_by(b) {
        for c0 in (0..n).step_by(b) {
            for r in r0..r0 + b {
                for c in c0..c0 + b {
                    dst[c * n + r] = src[r * n + c];
                }
            }
        }
    }
}

/// One real scalar field held as Fourier coefficients.
#[derive(Clone)]
pub struct SpectralField<T: Real> {
    grid: Grid<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> fmt::Debug for SpectralField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField")
            .field("grid", &self.grid)
            .field("l2_norm", &self.l2_norm())
            .finish()
    }
}

#[inline]
fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs: vec![czero(); grid.len()],
        }
    }

    pub fn from_coeffs(grid: &Grid<T>, coeffs: Vec<Complex<T>>) -> Result<Self, SpectralError> {
        if coeffs.len() != grid.len() {
            return Err(SpectralError::SizeMismatch {
                expected: grid.len(),
                found: coeffs.len(),
            });
        }
        Ok(SpectralField {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Builds a field by evaluating `f(j1, j2)` at every FFT index.
    pub fn from_fn(grid: &Grid<T>, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let n = grid.n();
        let mut coeffs = Vec::with_capacity(grid.len());
        for j2 in 0..n {
            for j1 in 0..n {
                coeffs.push(f(j1, j2));
            }
        }
        SpectralField {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// The real field `amplitude * cos(xi . x)` for integer mode `(m1, m2)`.
    pub fn cosine_mode(grid: &Grid<T>, m1: i64, m2: i64, amplitude: T) -> Self {
        let mut field = Self::zeros(grid);
        let n = grid.n();
        let idx = index_of_mode(m2, n) * n + index_of_mode(m1, n);
        let conj = grid.conjugate_index(idx);
        let half = amplitude / T::lit(2.0);
        field.coeffs[idx] += Complex::new(half, T::zero());
        field.coeffs[conj] += Complex::new(half, T::zero());
        field
    }

    /// Random real mean-zero field with coefficient magnitudes shaped by
    /// `envelope(|xi|)`; Nyquist modes are left empty.
    pub fn random<R: Rng + ?Sized>(
        grid: &Grid<T>,
        rng: &mut R,
        mut envelope: impl FnMut(T) -> T,
    ) -> Self {
        let n = grid.n();
        let mut field = Self::zeros(grid);
        for idx in 0..grid.len() {
            let conj = grid.conjugate_index(idx);
            let (j1, j2) = (idx % n, idx / n);
            if idx == 0 || grid.is_nyquist(j1) || grid.is_nyquist(j2) || conj < idx {
                continue;
            }
            let amp = envelope(grid.modulus[idx]);
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = rng.gen_range(-1.0..1.0);
            let c = Complex::new(T::lit(re), T::lit(im)) * amp;
            field.coeffs[idx] = c;
            field.coeffs[conj] = c.conj();
        }
        field
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex<T>> {
        self.coeffs
    }

    /// Coefficient at integer mode `(m1, m2)`.
    pub fn coeff(&self, m1: i64, m2: i64) -> Complex<T> {
        let n = self.grid.n();
        self.coeffs[index_of_mode(m2, n) * n + index_of_mode(m1, n)]
    }

    /// The `xi = 0` coefficient, equal to the spatial mean.
    pub fn mean(&self) -> Complex<T> {
        self.coeffs[0]
    }

    /// True when the zero mode is exactly zero.
    pub fn is_mean_zero(&self) -> bool {
        self.coeffs[0] == czero()
    }

    pub fn with_zero_mean(mut self) -> Self {
        self.coeffs[0] = czero();
        self
    }

    /// `max |c(m) - conj c(-m)| / max |c|`; zero for an exactly real field.
    pub fn hermitian_defect(&self) -> T {
        let scale = self.max_abs_coeff();
        if scale == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        for idx in 0..self.coeffs.len() {
            let d = (self.coeffs[idx] - self.coeffs[self.grid.conjugate_index(idx)].conj()).norm();
            worst = worst.max(d);
        }
        worst / scale
    }

    /// Replaces the field by the real part of its physical representation.
    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        let orig = self.coeffs.clone();
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            *c = (orig[idx] + orig[self.grid.conjugate_index(idx)].conj()) * half;
        }
    }

    pub fn max_abs_coeff(&self) -> T {
        self.coeffs
            .iter()
            .fold(T::zero(), |acc, c| acc.max(c.norm()))
    }

    /// Sum of `|c_m|^2` weighted by `w(|xi|)`, times `L^2`.
    pub fn weighted_energy(&self, mut weight: impl FnMut(T) -> T) -> T {
        let l2 = self.grid.length * self.grid.length;
        let mut acc = T::zero();
        for (c, &k) in self.coeffs.iter().zip(self.grid.modulus.iter()) {
            acc += weight(k) * c.norm_sqr();
        }
        acc * l2
    }

    pub fn l2_norm_sq(&self) -> T {
        self.weighted_energy(|_| T::one())
    }

    /// Continuum `L^2` norm on the box via Parseval.
    pub fn l2_norm(&self) -> T {
        self.l2_norm_sq().sqrt()
    }

    /// `int f g dx` for two real fields.
    pub fn inner(&self, other: &Self) -> T {
        let l2 = self.grid.length * self.grid.length;
        let mut acc = T::zero();
        for (a, b) in self.coeffs.iter().zip(other.coeffs.iter()) {
            acc += a.re * b.re + a.im * b.im;
        }
        acc * l2
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: T, x: &Self) {
        for (y, xv) in self.coeffs.iter_mut().zip(x.coeffs.iter()) {
            *y += *xv * a;
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn scale(&mut self, a: T) {
        for c in self.coeffs.iter_mut() {
            *c *= a;
        }
    }

    /// Pointwise multiplication by a real radial weight `w(|xi|)`.
    pub fn radial_multiplier(&self, mut w: impl FnMut(T) -> T) -> Self {
        let mut out = self.clone();
        for (c, &k) in out.coeffs.iter_mut().zip(self.grid.modulus.iter()) {
            *c *= w(k);
        }
        out
    }

    /// Max-norm distance between coefficient arrays.
    pub fn max_coeff_diff(&self, other: &Self) -> T {
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }
}

impl<T: Real> Add for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn add(self, rhs: Self) -> SpectralField<T> {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl<T: Real> Sub for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn sub(self, rhs: Self) -> SpectralField<T> {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl<T: Real> AddAssign<&SpectralField<T>> for SpectralField<T> {
    fn add_assign(&mut self, rhs: &SpectralField<T>) {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a += *b;
        }
    }
}

impl<T: Real> SubAssign<&SpectralField<T>> for SpectralField<T> {
    fn sub_assign(&mut self, rhs: &SpectralField<T>) {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a -= *b;
        }
    }
}

impl<T: Real> Mul<T> for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn mul(self, rhs: T) -> SpectralField<T> {
        self.scaled(rhs)
    }
}

impl<T: Real> Neg for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn neg(self) -> SpectralField<T> {
        self.scaled(-T::one())
    }
}

/// Transforms real samples (row-major, `x1` fastest) into a spectral field.
pub fn forward_transform<T: Real>(
    samples: &[T],
    grid: &Grid<T>,
) -> Result<SpectralField<T>, SpectralError> {
    let zero = vec![T::zero(); samples.len()];
    Ok(forward_pair(samples, &zero, grid)?.0)
}

/// Transforms two real sample arrays with a single complex FFT.
///
/// The outputs are Hermitian by construction.
pub fn forward_pair<T: Real>(
    a: &[T],
    b: &[T],
    grid: &Grid<T>,
) -> Result<(SpectralField<T>, SpectralField<T>), SpectralError> {
    for s in [a, b] {
        if s.len() != grid.len() {
            return Err(SpectralError::SizeMismatch {
                expected: grid.len(),
                found: s.len(),
            });
        }
    }
    let mut buf: Vec<Complex<T>> = a.iter().zip(b).map(|(&x, &y)| Complex::new(x, y)).collect();
    grid.fft2(&mut buf, false);
    let norm = T::one() / T::lit(grid.len() as f64) * T::lit(0.5);
    let mut fa = Vec::with_capacity(buf.len());
    let mut fb = Vec::with_capacity(buf.len());
    for idx in 0..buf.len() {
        let c = buf[idx];
        let d = buf[grid.conjugate_index(idx)].conj();
        fa.push((c + d) * norm);
        // (c - d) / (2i)
        let e = c - d;
        fb.push(Complex::new(e.im, -e.re) * norm);
    }
    Ok((
        SpectralField {
            grid: grid.clone(),
            coeffs: fa,
        },
        SpectralField {
            grid: grid.clone(),
            coeffs: fb,
        },
    ))
}

/// Complex physical samples of a field; the imaginary part measures how far
/// the coefficients are from Hermitian symmetry.
pub fn inverse_transform_complex<T: Real>(field: &SpectralField<T>) -> Vec<Complex<T>> {
    let mut buf = field.coeffs.clone();
    field.grid.fft2(&mut buf, true);
    buf
}

/// Real physical samples of a field (real part of the inverse FFT).
pub fn inverse_transform<T: Real>(field: &SpectralField<T>) -> Vec<T> {
    inverse_transform_complex(field).into_iter().map(|c| c.re).collect()
}

/// Inverse transform of two real fields with one complex FFT.
pub fn inverse_pair<T: Real>(a: &SpectralField<T>, b: &SpectralField<T>) -> (Vec<T>, Vec<T>) {
    let mut buf: Vec<Complex<T>> = a
        .coeffs
        .iter()
        .zip(b.coeffs.iter())
        .map(|(x, y)| x + Complex::new(-y.im, y.re))
        .collect();
    a.grid.fft2(&mut buf, true);
    buf.into_iter().map(|c| (c.re, c.im)).unzip()
}

/// Inverse transforms a list of real fields, pairing them two per FFT.
pub fn inverse_many<T: Real>(fields: &[&SpectralField<T>]) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(fields.len());
    let mut chunks = fields.chunks(2);
    for chunk in &mut chunks {
        match chunk {
            [a, b] => {
                let (x, y) = inverse_pair(a, b);
                out.push(x);
                out.push(y);
            }
            [a] => out.push(inverse_transform(a)),
            _ => unreachable!(),
        }
    }
    out
}

/// Forward transforms a list of real sample arrays, two per FFT.
pub fn forward_many<T: Real>(
    samples: &[&[T]],
    grid: &Grid<T>,
) -> Result<Vec<SpectralField<T>>, SpectralError> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(2) {
        match chunk {
            [a, b] => {
                let (x, y) = forward_pair(a, b, grid)?;
                out.push(x);
                out.push(y);
            }
            [a] => out.push(forward_transform(a, grid)?),
            _ => unreachable!(),
        }
    }
    Ok(out)
}

/// Fourier multipliers used by the dynamics and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Symbol<T> {
    /// `-i xi_1 / |xi|`
    Riesz1,
    /// `-i xi_2 / |xi|`
    Riesz2,
    /// `|xi|^s`
    ModNabla(T),
    /// `i xi_j`
    Partial(Axis),
    /// `-|xi|^{-2}`
    InvLaplace,
    /// `kappa xi_1 / |xi|`
    Lambda(T),
}

impl<T: Real> Symbol<T> {
    /// Whether the symbol blows up at `xi = 0` and so needs mean-zero input.
    pub fn is_singular(&self) -> bool {
        match *self {
            Symbol::ModNabla(s) => s < T::zero(),
            Symbol::InvLaplace => true,
            _ => false,
        }
    }

    /// Multiplier value at FFT index `(j1, j2)`.
    ///
    /// Symbols of homogeneity `<= 0` vanish at `xi = 0` (except `|xi|^0`,
    /// which is the identity), and symbols odd in `xi_j` vanish on the
    /// Nyquist line of axis `j`, where `-m` and `m` coincide.
    pub fn eval(&self, grid: &GridSpec<T>, j1: usize, j2: usize) -> Complex<T> {
        let (k1, k2) = grid.xi(j1, j2);
        let k = grid.modulus[j2 * grid.n + j1];
        let zero = czero();
        let origin = k == T::zero();
        match *self {
            Symbol::Riesz1 => {
                if origin || grid.is_nyquist(j1) {
                    zero
                } else {
                    Complex::new(T::zero(), -k1 / k)
                }
            }
            Symbol::Riesz2 => {
                if origin || grid.is_nyquist(j2) {
                    zero
                } else {
                    Complex::new(T::zero(), -k2 / k)
                }
            }
            Symbol::ModNabla(s) => {
                if origin {
                    if s == T::zero() {
                        Complex::new(T::one(), T::zero())
                    } else {
                        zero
                    }
                } else {
                    Complex::new(k.powf(s), T::zero())
                }
            }
            Symbol::Partial(Axis::X1) => {
                if grid.is_nyquist(j1) {
                    zero
                } else {
                    Complex::new(T::zero(), k1)
                }
            }
            Symbol::Partial(Axis::X2) => {
                if grid.is_nyquist(j2) {
                    zero
                } else {
                    Complex::new(T::zero(), k2)
                }
            }
            Symbol::InvLaplace => {
                if origin {
                    zero
                } else {
                    Complex::new(-(k * k).recip(), T::zero())
                }
            }
            Symbol::Lambda(kappa) => {
                if origin || grid.is_nyquist(j1) {
                    zero
                } else {
                    Complex::new(kappa * k1 / k, T::zero())
                }
            }
        }
    }
}

/// Applies a Fourier multiplier pointwise on the lattice.
pub fn apply_symbol<T: Real>(
    field: &SpectralField<T>,
    symbol: Symbol<T>,
) -> Result<SpectralField<T>, SpectralError> {
    if symbol.is_singular() && !field.is_mean_zero() {
        return Err(SpectralError::NonzeroMean);
    }
    let grid = &field.grid;
    let n = grid.n();
    let mut out = field.clone();
    for j2 in 0..n {
        for j1 in 0..n {
            let idx = j2 * n + j1;
            out.coeffs[idx] = field.coeffs[idx] * symbol.eval(grid, j1, j2);
        }
    }
    Ok(out)
}

/// `grad^perp |grad|^{-1} f`, symbol `(-i xi_2/|xi|, i xi_1/|xi|)`.
pub fn perp_grad_inv_mod<T: Real>(field: &SpectralField<T>) -> [SpectralField<T>; 2] {
    let first = apply_symbol(field, Symbol::Riesz2).expect("degree-zero symbol");
    let second = -&apply_symbol(field, Symbol::Riesz1).expect("degree-zero symbol");
    [first, second]
}

/// Gradient `(d1 f, d2 f)`.
pub fn gradient<T: Real>(field: &SpectralField<T>) -> [SpectralField<T>; 2] {
    [
        apply_symbol(field, Symbol::Partial(Axis::X1)).expect("regular symbol"),
        apply_symbol(field, Symbol::Partial(Axis::X2)).expect("regular symbol"),
    ]
}

/// Zeroes every coefficient with `max(|m1|, |m2|) > fraction * n / 2`.
pub fn dealias<T: Real>(field: &SpectralField<T>) -> SpectralField<T> {
    let mut out = field.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place<T: Real>(field: &mut SpectralField<T>) {
    let grid = field.grid.clone();
    for (c, &keep) in field.coeffs.iter_mut().zip(grid.retained.iter()) {
        if !keep {
            *c = czero();
        }
    }
}

/// True when no coefficient outside the dealiased set is nonzero.
pub fn is_dealiased<T: Real>(field: &SpectralField<T>) -> bool {
    field
        .coeffs
        .iter()
        .zip(field.grid.retained.iter())
        .all(|(c, &keep)| keep || *c == czero())
}

/// Physical-space product of sample arrays.
pub fn pointwise_product<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
}
