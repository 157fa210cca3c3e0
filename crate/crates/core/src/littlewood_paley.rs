//! Dyadic frequency projections and the Besov and Sobolev norms built on them.
//!
//! The smooth cutoff is `psi(x) = g(2-|x|) / (g(2-|x|) + g(|x|-1))` on
//! `1 < |x| < 2` with `g(t) = exp(-1/t)` for `t > 0`, equal to one on
//! `[-1, 1]` and zero outside `[-2, 2]`. The annular profile is
//! `phi(x) = psi(x) - psi(2x)`, and `P_k` multiplies by `phi(2^-k |xi|)`.

use thiserror::Error;

use crate::scalar::Real;
use crate::spectral::{inverse_many, GridSpec, SpectralField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("integrability exponent must be >= 1, got {0}")]
    InvalidIntegrability(f64),
    #[error("summation exponent must be >= 1, got {0}")]
    InvalidSummation(f64),
}

#[inline]
fn smooth_step_kernel<T: Real>(t: T) -> T {
    if t > T::zero() {
        (-t.recip()).exp()
    } else {
        T::zero()
    }
}

/// The even bump `psi`.
pub fn bump_psi<T: Real>(x: T) -> T {
    let a = x.abs();
    if a <= T::one() {
        T::one()
    } else if a >= T::lit(2.0) {
        T::zero()
    } else {
        let up = smooth_step_kernel(T::lit(2.0) - a);
        let down = smooth_step_kernel(a - T::one());
        up / (up + down)
    }
}

/// The annular profile `phi(x) = psi(x) - psi(2x)`, supported in `1/2 < |x| < 2`.
pub fn bump_phi<T: Real>(x: T) -> T {
    bump_psi(x) - bump_psi(x + x)
}

/// Dyadic indices needed to tile a set of lattice radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandRange {
    pub k_min: i32,
    pub k_max: i32,
}

impl BandRange {
    /// Bands covering every radius in `[r_min, r_max]`: `2^k_min <= r_min`
    /// and `2^k_max >= r_max`.
    pub fn covering<T: Real>(r_min: T, r_max: T) -> Self {
        let k_min = r_min.log2().floor().as_f64() as i32;
        let k_max = r_max.log2().ceil().as_f64() as i32;
        BandRange { k_min, k_max }
    }

    /// Every nonzero radius on the lattice, Nyquist corner included.
    pub fn for_grid<T: Real>(grid: &GridSpec<T>) -> Self {
        Self::covering(grid.min_modulus(), grid.max_modulus())
    }

    /// Radii surviving the dealiasing cutoff.
    pub fn retained<T: Real>(grid: &GridSpec<T>) -> Self {
        Self::covering(grid.min_modulus(), grid.max_retained_modulus())
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.k_min..=self.k_max
    }

    pub fn len(&self) -> usize {
        (self.k_max - self.k_min + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[inline]
fn pow2<T: Real>(k: i32) -> T {
    T::lit(2.0).powi(k)
}

/// `P_k f`.
pub fn project_band<T: Real>(field: &SpectralField<T>, k: i32) -> SpectralField<T> {
    let scale = pow2::<T>(-k);
    field.radial_multiplier(|r| bump_phi(r * scale))
}

/// Low-frequency piece `psi(|xi|) f`, the `f * psi-check` of the
/// inhomogeneous norms.
pub fn low_frequency_part<T: Real>(field: &SpectralField<T>) -> SpectralField<T> {
    field.radial_multiplier(bump_psi)
}

/// Largest `|xi|` carrying a nonzero coefficient.
pub fn spectral_radius<T: Real>(field: &SpectralField<T>) -> T {
    let zero = T::zero();
    field
        .coeffs()
        .iter()
        .zip(field.grid().modulus())
        .filter(|(c, _)| c.re != zero || c.im != zero)
        .fold(zero, |acc, (_, &k)| acc.max(k))
}

/// Bands of the grid's full range that can intersect the field's support.
pub fn active_bands<T: Real>(field: &SpectralField<T>) -> BandRange {
    let full = BandRange::for_grid(field.grid());
    let radius = spectral_radius(field);
    if radius == T::zero() {
        return BandRange {
            k_min: full.k_min,
            k_max: full.k_min - 1,
        };
    }
    // phi(2^-k r) vanishes once 2^(k-1) >= r.
    let top = (radius.log2().floor().as_f64() as i32) + 1;
    BandRange {
        k_min: full.k_min,
        k_max: full.k_max.min(top),
    }
}

/// Integrability or summation exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Exponent<T> {
    fn validate_integrability(self) -> Result<Self, NormError> {
        match self {
            Exponent::Finite(p) if !(p >= T::one()) || !p.is_finite() => {
                Err(NormError::InvalidIntegrability(p.as_f64()))
            }
            e => Ok(e),
        }
    }

    fn validate_summation(self) -> Result<Self, NormError> {
        match self {
            Exponent::Finite(q) if !(q >= T::one()) || !q.is_finite() => {
                Err(NormError::InvalidSummation(q.as_f64()))
            }
            e => Ok(e),
        }
    }
}

/// Rectangle-rule `L^p` norm of physical samples on the box.
pub fn lp_norm<T: Real>(samples: &[T], grid: &GridSpec<T>, p: Exponent<T>) -> T {
    match p {
        Exponent::Infinite => samples.iter().fold(T::zero(), |a, &x| a.max(x.abs())),
        Exponent::Finite(p) => {
            let cell = grid.dx() * grid.dx();
            let two = T::lit(2.0);
            let sum: T = if p == two {
                samples.iter().map(|&x| x * x).sum()
            } else if p == T::one() {
                samples.iter().map(|&x| x.abs()).sum()
            } else {
                samples.iter().map(|&x| x.abs().powf(p)).sum()
            };
            (sum * cell).powf(p.recip())
        }
    }
}

/// `L^p` norms of `P_k f` for every band that can be nonzero.
pub fn band_lp_norms<T: Real>(field: &SpectralField<T>, p: Exponent<T>) -> Vec<(i32, T)> {
    let bands: Vec<i32> = active_bands(field).iter().collect();
    let pieces: Vec<SpectralField<T>> = bands.iter().map(|&k| project_band(field, k)).collect();
    let refs: Vec<&SpectralField<T>> = pieces.iter().collect();
    let samples = inverse_many(&refs);
    bands
        .into_iter()
        .zip(samples.iter())
        .map(|(k, s)| (k, lp_norm(s, field.grid(), p)))
        .collect()
}

/// `l^q` combination of `2^{sk} a_k`.
pub fn dyadic_sum<T: Real>(bands: &[(i32, T)], s: T, q: Exponent<T>) -> T {
    let weighted = bands.iter().map(|&(k, a)| T::lit(2.0).powf(s * T::lit(k as f64)) * a);
    match q {
        Exponent::Infinite => weighted.fold(T::zero(), T::max),
        Exponent::Finite(q) => {
            let sum: T = weighted.map(|w| w.powf(q)).sum();
            sum.powf(q.recip())
        }
    }
}

/// Besov norm `B^s_{p,q}` (or its homogeneous version) with the band sum
/// restricted to the grid's lattice.
pub fn besov_norm<T: Real>(
    field: &SpectralField<T>,
    s: T,
    p: Exponent<T>,
    q: Exponent<T>,
    homogeneous: bool,
) -> Result<T, NormError> {
    let p = p.validate_integrability()?;
    let q = q.validate_summation()?;
    let bands = band_lp_norms(field, p);
    let mut norm = dyadic_sum(&bands, s, q);
    if !homogeneous {
        let low = crate::spectral::inverse_transform(&low_frequency_part(field));
        norm += lp_norm(&low, field.grid(), p);
    }
    Ok(norm)
}

/// Inhomogeneous Sobolev norm `(sum (1+|xi|^2)^n |c|^2 L^2)^{1/2}`.
pub fn sobolev_norm<T: Real>(field: &SpectralField<T>, n: T) -> T {
    field
        .weighted_energy(|k| (T::one() + k * k).powf(n))
        .sqrt()
}

/// Homogeneous Sobolev norm `(sum |xi|^{2s} |c|^2 L^2)^{1/2}`.
pub fn homogeneous_sobolev_norm<T: Real>(field: &SpectralField<T>, s: T) -> T {
    let two_s = s + s;
    field
        .weighted_energy(|k| {
            if k == T::zero() {
                if s == T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            } else {
                k.powf(two_s)
            }
        })
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{inverse_transform, make_grid, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rustfft::num_complex::Complex;
    use std::f64::consts::PI;

    fn grid(n: usize, l: f64) -> Grid<f64> {
        make_grid(n, l, 2.0 / 3.0).unwrap()
    }

    #[test]
    fn psi_shape() {
        assert_eq!(bump_psi(0.5), 1.0);
        assert_eq!(bump_psi(1.0), 1.0);
        assert_eq!(bump_psi(3.0), 0.0);
        assert_eq!(bump_psi(2.0), 0.0);
        let v: f64 = bump_psi(1.5);
        // symmetric point of the mollifier: g(0.5)/(2 g(0.5)) = 1/2
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(v, bump_psi(-1.5));
        let w = bump_psi(1.25);
        let g = |t: f64| (-1.0 / t).exp();
        assert!((w - g(0.75) / (g(0.75) + g(0.25))).abs() < 1e-15);
        for i in 0..=400 {
            let x = -2.5 + 5.0 * i as f64 / 400.0;
            let y = bump_psi(x);
            assert!((0.0..=1.0).contains(&y));
            assert_eq!(y, bump_psi(-x));
        }
    }

    #[test]
    fn psi_is_smooth_on_fine_sample() {
        // First and second finite differences change by O(h) between
        // neighbouring points: no jumps in psi' or psi''.
        let h = 1e-4;
        let d1 = |x: f64| (bump_psi(x + h) - bump_psi(x - h)) / (2.0 * h);
        let d2 = |x: f64| (bump_psi(x + h) - 2.0 * bump_psi(x) + bump_psi(x - h)) / (h * h);
        let mut x = 0.9;
        while x < 2.1 {
            assert!((d1(x + h) - d1(x)).abs() < 1e-2, "psi' jumps at {x}");
            assert!((d2(x + h) - d2(x)).abs() < 0.5, "psi'' jumps at {x}");
            x += h;
        }
    }

    #[test]
    fn phi_is_one_at_one() {
        assert_eq!(bump_phi(1.0), 1.0);
        assert_eq!(bump_phi(0.0), 0.0);
        assert_eq!(bump_phi(2.0), 0.0);
        assert_eq!(bump_phi(0.5), 0.0);
    }

    #[test]
    fn telescoping_identity() {
        for &r in &[0.013, 0.5, 1.0, 1.7, 3.3, 100.0, 1234.5] {
            for kk in [3, 6, 12] {
                let sum: f64 = (-kk..=kk).map(|k| bump_phi(r * 2f64.powi(-k))).sum();
                let expected = bump_psi(r * 2f64.powi(-kk)) - bump_psi(r * 2f64.powi(kk + 1));
                assert!((sum - expected).abs() < 1e-14, "r={r} K={kk}");
            }
        }
    }

    #[test]
    fn band_range_invariants() {
        let g = grid(64, 20.0 * PI);
        let br = BandRange::for_grid(&g);
        assert!(2f64.powi(br.k_min) >= g.min_modulus() / 2.0);
        assert!(2f64.powi(br.k_min) <= g.min_modulus());
        assert!(2f64.powi(br.k_max) >= g.max_modulus());
        assert!(2f64.powi(br.k_max) <= 2.0 * g.max_modulus());
        let rr = BandRange::retained(&g);
        assert!(rr.k_max <= br.k_max);
    }

    #[test]
    fn partition_of_unity_on_lattice() {
        let g = grid(64, 20.0 * PI);
        let br = BandRange::for_grid(&g);
        for &r in g.modulus().iter().filter(|&&r| r > 0.0) {
            let s: f64 = br.iter().map(|k| bump_phi(r * 2f64.powi(-k))).sum();
            assert!((s - 1.0).abs() < 1e-12, "r = {r}");
        }
    }

    #[test]
    fn pure_mode_projection() {
        let g = grid(64, 2.0 * PI);
        let f = SpectralField::cosine_mode(&g, 4, 0, 1.0);
        let p = project_band(&f, 2);
        assert!(p.max_coeff_diff(&f) < 1e-15);
        let z = project_band(&SpectralField::cosine_mode(&g, 4, 0, 1.0), -1);
        assert_eq!(z.max_abs_coeff(), 0.0);
        // |xi| = 2^{k+3}
        let far = SpectralField::cosine_mode(&g, 16, 0, 1.0);
        assert_eq!(project_band(&far, 1).max_abs_coeff(), 0.0);
        // out-of-range index
        assert_eq!(project_band(&f, 40).max_abs_coeff(), 0.0);
    }

    #[test]
    fn band_sum_reconstructs_mean_free_part() {
        let g = grid(32, 9.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut f = SpectralField::random(&g, &mut rng, |_| 1.0);
        f.coeffs_mut()[0] = Complex::new(3.0, 0.0);
        let mut acc = SpectralField::zeros(&g);
        for k in BandRange::for_grid(&g).iter() {
            acc += &project_band(&f, k);
        }
        let mean_free = f.clone().with_zero_mean();
        assert!(acc.max_coeff_diff(&mean_free) < 1e-12 * f.max_abs_coeff());
    }

    #[test]
    fn almost_orthogonality() {
        let g = grid(64, 30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = SpectralField::random(&g, &mut rng, |_| 1.0);
        let br = BandRange::for_grid(&g);
        for k in br.iter() {
            for kp in br.iter() {
                if (k - kp).abs() >= 2 {
                    let pp = project_band(&project_band(&f, k), kp);
                    assert_eq!(pp.max_abs_coeff(), 0.0, "k={k} k'={kp}");
                }
            }
        }
    }

    #[test]
    fn besov_of_zero_field() {
        let g = grid(16, 1.0);
        let z = SpectralField::zeros(&g);
        for (s, p, q) in [
            (0.0, Exponent::Finite(2.0), Exponent::Finite(2.0)),
            (1.0, Exponent::Infinite, Exponent::Finite(1.0)),
            (-1.0, Exponent::Finite(1.0), Exponent::Infinite),
        ] {
            assert_eq!(besov_norm(&z, s, p, q, true).unwrap(), 0.0);
            assert_eq!(besov_norm(&z, s, p, q, false).unwrap(), 0.0);
        }
    }

    #[test]
    fn besov_rejects_bad_exponents() {
        let g = grid(16, 1.0);
        let z = SpectralField::zeros(&g);
        assert!(matches!(
            besov_norm(&z, 1.0, Exponent::Finite(0.5), Exponent::Infinite, true),
            Err(NormError::InvalidIntegrability(_))
        ));
        assert!(matches!(
            besov_norm(&z, 1.0, Exponent::Infinite, Exponent::Finite(0.0), true),
            Err(NormError::InvalidSummation(_))
        ));
    }

    #[test]
    fn b022_of_unit_mode_matches_l2() {
        let g = grid(64, 2.0 * PI);
        let a = 0.37;
        let f = SpectralField::cosine_mode(&g, 1, 0, a);
        let b = besov_norm(&f, 0.0, Exponent::Finite(2.0), Exponent::Finite(2.0), true).unwrap();
        // phi(1) = 1 and phi(1/2) = phi(2) = 0: only k = 0 contributes.
        assert!((b - f.l2_norm()).abs() < 1e-10 * f.l2_norm());
        let samples = inverse_transform(&f);
        let direct = lp_norm(&samples, &g, Exponent::Finite(2.0));
        assert!((direct - f.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn sobolev_examples() {
        let g = grid(32, 2.0 * PI);
        let f = SpectralField::cosine_mode(&g, 1, 0, 2.0);
        let l2 = f.l2_norm();
        for n in [0.0, 1.0, 3.5] {
            let expect = l2 * 2f64.powf(n / 2.0);
            assert!((sobolev_norm(&f, n) - expect).abs() < 1e-12 * expect);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let r = SpectralField::random(&g, &mut rng, |_| 1.0);
        assert!((sobolev_norm(&r, 0.0) - r.l2_norm()).abs() < 1e-12 * r.l2_norm());
        assert!((homogeneous_sobolev_norm(&r, 0.0) - r.l2_norm()).abs() < 1e-12 * r.l2_norm());
    }

    #[test]
    fn sobolev_matches_direct_sum() {
        let g = grid(32, 11.0);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = crate::spectral::dealias(&SpectralField::random(&g, &mut rng, |_| 1.0));
        let dk = 2.0 * PI / 11.0;
        let mut acc = 0.0;
        for j2 in 0..32usize {
            for j1 in 0..32usize {
                let m1 = if j1 < 16 { j1 as f64 } else { j1 as f64 - 32.0 };
                let m2 = if j2 < 16 { j2 as f64 } else { j2 as f64 - 32.0 };
                let k2 = (m1 * m1 + m2 * m2) * dk * dk;
                acc += (1.0 + k2).powf(3.5) * f.coeffs()[j2 * 32 + j1].norm_sqr() * 121.0;
            }
        }
        let expect = acc.sqrt();
        assert!((sobolev_norm(&f, 3.5) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn bernstein_constant_is_stable_across_bands() {
        // A point mass nearly saturates the inequality in every band.
        let g = grid(256, 40.0 * PI);
        let f = SpectralField::from_fn(&g, |_, _| Complex::new(1.0, 0.0)).with_zero_mean();
        let mut constants = Vec::new();
        for k in -2..=2 {
            let p = project_band(&f, k);
            let s = inverse_transform(&p);
            let sup = lp_norm(&s, &g, Exponent::Infinite);
            constants.push(sup / (2f64.powi(k) * p.l2_norm()));
        }
        let hi = constants.iter().cloned().fold(0.0, f64::max);
        let lo = constants.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 3.0, "{constants:?}");
    }

    #[test]
    fn sobolev_and_besov_22_are_comparable() {
        let g = grid(64, 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in [0.5, 1.0, 2.0, 3.5] {
            let f = SpectralField::random(&g, &mut rng, |k| (-k / 3.0).exp());
            let h = sobolev_norm(&f, n);
            let b = besov_norm(&f, n, Exponent::Finite(2.0), Exponent::Finite(2.0), false).unwrap();
            let ratio = h / b;
            assert!((0.25..=4.0).contains(&ratio), "n={n} ratio={ratio}");
        }
    }
}
