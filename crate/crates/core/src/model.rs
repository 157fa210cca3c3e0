//! The three formulations of the dynamics.
//!
//! * vorticity form `(omega, rho)`:
//!   `omega_t + u.grad omega = -kappa d1 rho`,
//!   `rho_t + u.grad rho = kappa d1 Lap^{-1} omega`, `u = grad^perp Lap^{-1} omega`;
//! * dispersive unknowns `Z± = |grad|^{-1} omega ± rho`, which diagonalize the
//!   linear part with symbol `∓ i Lambda_kappa`, `Lambda_kappa = kappa xi_1/|xi|`;
//! * dispersive SQG `theta_t + u.grad theta = kappa R1 theta`,
//!   `u = grad^perp |grad|^{-1} theta`.
//!
//! With `S = Z+ + Z-` and `D = Z+ - Z-` the velocity is
//! `u = -1/2 grad^perp |grad|^{-1} S`, and the quadratic terms read
//! `NL± = 1/4 |grad|^{-1} div(grad^perp|grad|^{-1}S |grad|S) ± 1/4 grad^perp|grad|^{-1}S . grad D`.
//! Substituting `u` into the transport terms gives `Z±_t = ∓ i Lambda Z± + NL±`.

use thiserror::Error;

use crate::littlewood_paley::homogeneous_sobolev_norm;
use crate::scalar::Real;
use crate::spectral::{
    apply_symbol, dealias_in_place, forward_many, gradient, inverse_many, perp_grad_inv_mod, Axis,
    SpectralField, Symbol,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("field `{0}` has nonzero mean")]
    NonzeroMean(&'static str),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("kappa must be finite and >= 0, got {0}")]
    InvalidKappa(f64),
}

/// Relative size of a zero-mode coefficient accepted as roundoff and pinned to zero.
const MEAN_TOLERANCE: f64 = 1e-12;

fn pin_mean<T: Real>(
    field: SpectralField<T>,
    name: &'static str,
) -> Result<SpectralField<T>, ModelError> {
    let scale = field.max_abs_coeff();
    if field.mean().norm() > T::lit(MEAN_TOLERANCE) * scale {
        return Err(ModelError::NonzeroMean(name));
    }
    Ok(field.with_zero_mean())
}

fn check_kappa<T: Real>(kappa: T) -> Result<(), ModelError> {
    if kappa >= T::zero() && kappa.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidKappa(kappa.as_f64()))
    }
}

/// Which exponential a dispersive unknown carries: `Plus` evolves linearly as
/// `e^{-i t Lambda}` (like `Z+` and `theta`), `Minus` as `e^{+i t Lambda}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    /// `∓1` so that the linear symbol is `sign * i Lambda`.
    pub fn sign<T: Real>(self) -> T {
        match self {
            Branch::Plus => -T::one(),
            Branch::Minus => T::one(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VorticityState<T: Real> {
    pub omega: SpectralField<T>,
    pub rho: SpectralField<T>,
    pub kappa: T,
    pub time: T,
}

#[derive(Debug, Clone)]
pub struct ZState<T: Real> {
    pub z_plus: SpectralField<T>,
    pub z_minus: SpectralField<T>,
    pub kappa: T,
    pub time: T,
}

#[derive(Debug, Clone)]
pub struct SqgState<T: Real> {
    pub theta: SpectralField<T>,
    pub kappa: T,
    pub time: T,
}

/// Velocity, density and vorticity reconstructed from a state.
#[derive(Debug, Clone)]
pub struct PrimitiveFields<T: Real> {
    pub u: [SpectralField<T>; 2],
    pub rho: SpectralField<T>,
    pub omega: SpectralField<T>,
}

impl<T: Real> VorticityState<T> {
    pub fn new(
        omega: SpectralField<T>,
        rho: SpectralField<T>,
        kappa: T,
    ) -> Result<Self, ModelError> {
        check_kappa(kappa)?;
        if !omega.same_grid(&rho) {
            return Err(ModelError::GridMismatch);
        }
        Ok(VorticityState {
            omega: pin_mean(omega, "omega")?,
            rho: pin_mean(rho, "rho")?,
            kappa,
            time: T::zero(),
        })
    }

    /// Velocity `grad^perp Lap^{-1} omega`.
    pub fn velocity(&self) -> [SpectralField<T>; 2] {
        let stream = apply_symbol(&self.omega, Symbol::InvLaplace).expect("mean-zero omega");
        let [d1, d2] = gradient(&stream);
        [-&d2, d1]
    }
}

impl<T: Real> ZState<T> {
    pub fn new(
        z_plus: SpectralField<T>,
        z_minus: SpectralField<T>,
        kappa: T,
    ) -> Result<Self, ModelError> {
        check_kappa(kappa)?;
        if !z_plus.same_grid(&z_minus) {
            return Err(ModelError::GridMismatch);
        }
        Ok(ZState {
            z_plus: pin_mean(z_plus, "z_plus")?,
            z_minus: pin_mean(z_minus, "z_minus")?,
            kappa,
            time: T::zero(),
        })
    }

    pub fn sum(&self) -> SpectralField<T> {
        &self.z_plus + &self.z_minus
    }

    pub fn difference(&self) -> SpectralField<T> {
        &self.z_plus - &self.z_minus
    }

    pub fn to_vorticity(&self) -> VorticityState<T> {
        let prim = from_dispersive(self);
        VorticityState {
            omega: prim.omega,
            rho: prim.rho,
            kappa: self.kappa,
            time: self.time,
        }
    }
}

impl<T: Real> SqgState<T> {
    pub fn new(theta: SpectralField<T>, kappa: T) -> Result<Self, ModelError> {
        check_kappa(kappa)?;
        Ok(SqgState {
            theta: pin_mean(theta, "theta")?,
            kappa,
            time: T::zero(),
        })
    }

    /// `grad^perp (-Lap)^{-1/2} theta`.
    pub fn velocity(&self) -> [SpectralField<T>; 2] {
        perp_grad_inv_mod(&self.theta)
    }
}

/// `Z± = |grad|^{-1} omega ± rho`.
pub fn to_dispersive<T: Real>(state: &VorticityState<T>) -> Result<ZState<T>, ModelError> {
    if !state.omega.is_mean_zero() {
        return Err(ModelError::NonzeroMean("omega"));
    }
    if !state.rho.is_mean_zero() {
        return Err(ModelError::NonzeroMean("rho"));
    }
    let a = apply_symbol(&state.omega, Symbol::ModNabla(-T::one()))
        .map_err(|_| ModelError::NonzeroMean("omega"))?;
    Ok(ZState {
        z_plus: &a + &state.rho,
        z_minus: &a - &state.rho,
        kappa: state.kappa,
        time: state.time,
    })
}

/// `u = -1/2 grad^perp |grad|^{-1} S`, `rho = D/2`, `omega = |grad| S / 2`.
pub fn from_dispersive<T: Real>(state: &ZState<T>) -> PrimitiveFields<T> {
    let half = T::lit(0.5);
    let s = state.sum();
    let [v1, v2] = perp_grad_inv_mod(&s);
    PrimitiveFields {
        u: [v1.scaled(-half), v2.scaled(-half)],
        rho: state.difference().scaled(half),
        omega: apply_symbol(&s, Symbol::ModNabla(T::one()))
            .expect("regular symbol")
            .scaled(half),
    }
}

/// `|LHS - RHS| / max(RHS, floor)` for
/// `||u||^2_{H^k} + ||rho||^2_{H^k} = 1/2 ||Z+||^2_{H^k} + 1/2 ||Z-||^2_{H^k}`.
pub fn energy_balance_residual<T: Real>(state: &ZState<T>, k: u32) -> T {
    let s = T::lit(k as f64);
    let prim = from_dispersive(state);
    let sq = |f: &SpectralField<T>| homogeneous_sobolev_norm(f, s).powi(2);
    let lhs = sq(&prim.u[0]) + sq(&prim.u[1]) + sq(&prim.rho);
    let half = T::lit(0.5);
    let rhs = half * (sq(&state.z_plus) + sq(&state.z_minus));
    (lhs - rhs).abs() / rhs.max(T::min_positive_value())
}

/// Dealiased `a.grad b` for vector `a` and the gradient of `b`, computed in
/// physical space.
fn transport_terms<T: Real>(
    velocity: &[SpectralField<T>; 2],
    scalars: &[&SpectralField<T>],
) -> Vec<SpectralField<T>> {
    let grid = velocity[0].grid().clone();
    let grads: Vec<[SpectralField<T>; 2]> = scalars.iter().map(|f| gradient(f)).collect();
    let mut refs: Vec<&SpectralField<T>> = vec![&velocity[0], &velocity[1]];
    for g in &grads {
        refs.push(&g[0]);
        refs.push(&g[1]);
    }
    let phys = inverse_many(&refs);
    let products: Vec<Vec<T>> = (0..scalars.len())
        .map(|i| {
            let (gx, gy) = (&phys[2 + 2 * i], &phys[3 + 2 * i]);
            phys[0]
                .iter()
                .zip(&phys[1])
                .zip(gx.iter().zip(gy))
                .map(|((&u1, &u2), (&a, &b))| u1 * a + u2 * b)
                .collect()
        })
        .collect();
    let slices: Vec<&[T]> = products.iter().map(|p| p.as_slice()).collect();
    let mut out = forward_many(&slices, &grid).expect("grid-sized products");
    for f in out.iter_mut() {
        dealias_in_place(f);
    }
    out
}

/// Quadratic part of the vorticity-form tendencies: `(-u.grad omega, -u.grad rho)`.
pub fn nonlinear_vorticity<T: Real>(
    state: &VorticityState<T>,
) -> (SpectralField<T>, SpectralField<T>) {
    let u = state.velocity();
    let mut terms = transport_terms(&u, &[&state.omega, &state.rho]);
    let d_rho = -&terms.pop().expect("two terms");
    let d_omega = -&terms.pop().expect("two terms");
    (d_omega.with_zero_mean(), d_rho.with_zero_mean())
}

/// Linear part `(-kappa d1 rho, kappa d1 Lap^{-1} omega)`.
pub fn linear_vorticity<T: Real>(
    state: &VorticityState<T>,
) -> (SpectralField<T>, SpectralField<T>) {
    let d1 = Symbol::Partial(Axis::X1);
    let d_omega = apply_symbol(&state.rho, d1).expect("regular").scaled(-state.kappa);
    let stream = apply_symbol(&state.omega, Symbol::InvLaplace).expect("mean-zero omega");
    let d_rho = apply_symbol(&stream, d1).expect("regular").scaled(state.kappa);
    (d_omega, d_rho)
}

/// Full tendencies `(omega_t, rho_t)` of the vorticity form.
pub fn rhs_vorticity<T: Real>(state: &VorticityState<T>) -> (SpectralField<T>, SpectralField<T>) {
    let (mut w, mut r) = nonlinear_vorticity(state);
    let (lw, lr) = linear_vorticity(state);
    w += &lw;
    r += &lr;
    (w, r)
}

/// `(NL+, NL-)`.
pub fn nonlinear_dispersive<T: Real>(state: &ZState<T>) -> (SpectralField<T>, SpectralField<T>) {
    let grid = state.z_plus.grid().clone();
    let s = state.sum();
    let d = state.difference();
    let [v1, v2] = perp_grad_inv_mod(&s);
    let w = apply_symbol(&s, Symbol::ModNabla(T::one())).expect("regular");
    let [d1, d2] = gradient(&d);
    let phys = inverse_many(&[&v1, &v2, &w, &d1, &d2]);
    let n = phys[0].len();
    let mut p1 = Vec::with_capacity(n);
    let mut p2 = Vec::with_capacity(n);
    let mut adv = Vec::with_capacity(n);
    for i in 0..n {
        let (a1, a2, ww) = (phys[0][i], phys[1][i], phys[2][i]);
        p1.push(a1 * ww);
        p2.push(a2 * ww);
        adv.push(a1 * phys[3][i] + a2 * phys[4][i]);
    }
    let mut prods = forward_many(&[&p1, &p2, &adv], &grid).expect("grid-sized products");
    for f in prods.iter_mut() {
        dealias_in_place(f);
    }
    let adv = prods.pop().expect("three products").with_zero_mean();
    let p2 = prods.pop().expect("three products");
    let p1 = prods.pop().expect("three products");
    let mut div = apply_symbol(&p1, Symbol::Partial(Axis::X1)).expect("regular");
    div += &apply_symbol(&p2, Symbol::Partial(Axis::X2)).expect("regular");
    // The zero mode of a divergence vanishes; pinning it keeps non-finite
    // values flowing to the integrator's abort check instead of panicking here.
    let flux = apply_symbol(&div.with_zero_mean(), Symbol::ModNabla(-T::one())).expect("mean pinned");
    let quarter = T::lit(0.25);
    let mut plus = flux.scaled(quarter);
    let mut minus = plus.clone();
    plus.axpy(quarter, &adv);
    minus.axpy(-quarter, &adv);
    (plus, minus)
}

/// `∓ i Lambda_kappa Z±`, i.e. `± kappa R1 Z±`.
pub fn linear_dispersive<T: Real>(state: &ZState<T>) -> (SpectralField<T>, SpectralField<T>) {
    let plus = apply_symbol(&state.z_plus, Symbol::Riesz1).expect("regular").scaled(state.kappa);
    let minus = apply_symbol(&state.z_minus, Symbol::Riesz1).expect("regular").scaled(-state.kappa);
    (plus, minus)
}

/// Full tendencies `(Z+_t, Z-_t)`.
pub fn rhs_dispersive<T: Real>(state: &ZState<T>) -> (SpectralField<T>, SpectralField<T>) {
    let (mut p, mut m) = nonlinear_dispersive(state);
    let (lp, lm) = linear_dispersive(state);
    p += &lp;
    m += &lm;
    (p, m)
}

/// `-u.grad theta`.
pub fn nonlinear_sqg<T: Real>(state: &SqgState<T>) -> SpectralField<T> {
    let u = state.velocity();
    let mut terms = transport_terms(&u, &[&state.theta]);
    (-&terms.pop().expect("one term")).with_zero_mean()
}

/// `kappa R1 theta`.
pub fn linear_sqg<T: Real>(state: &SqgState<T>) -> SpectralField<T> {
    apply_symbol(&state.theta, Symbol::Riesz1).expect("regular").scaled(state.kappa)
}

/// Full tendency `theta_t`.
pub fn rhs_sqg<T: Real>(state: &SqgState<T>) -> SpectralField<T> {
    let mut d = nonlinear_sqg(state);
    d += &linear_sqg(state);
    d
}

/// A state the time integrators can advance.
pub trait Evolution<T: Real>: Clone {
    fn components(&self) -> Vec<&SpectralField<T>>;

    /// Same physical parameters with new fields and time.
    fn with_components(&self, fields: Vec<SpectralField<T>>, time: T) -> Self;

    fn time(&self) -> T;

    fn kappa(&self) -> T;

    /// Full tendency, or only its linear part when `nonlinear` is false.
    fn tendency(&self, nonlinear: bool) -> Vec<SpectralField<T>>;

    fn nonlinear_tendency(&self) -> Vec<SpectralField<T>>;

    /// Diagonal linear structure, if the formulation has one.
    fn branches(&self) -> Option<Vec<Branch>>;

    fn velocity(&self) -> [SpectralField<T>; 2];
}

impl<T: Real> Evolution<T> for VorticityState<T> {
    fn components(&self) -> Vec<&SpectralField<T>> {
        vec![&self.omega, &self.rho]
    }

    fn with_components(&self, fields: Vec<SpectralField<T>>, time: T) -> Self {
        let [omega, rho]: [SpectralField<T>; 2] = fields.try_into().expect("two components");
        VorticityState {
            omega,
            rho,
            kappa: self.kappa,
            time,
        }
    }

    fn time(&self) -> T {
        self.time
    }

    fn kappa(&self) -> T {
        self.kappa
    }

    fn tendency(&self, nonlinear: bool) -> Vec<SpectralField<T>> {
        let (a, b) = if nonlinear {
            rhs_vorticity(self)
        } else {
            linear_vorticity(self)
        };
        vec![a, b]
    }

    fn nonlinear_tendency(&self) -> Vec<SpectralField<T>> {
        let (a, b) = nonlinear_vorticity(self);
        vec![a, b]
    }

    fn branches(&self) -> Option<Vec<Branch>> {
        None
    }

    fn velocity(&self) -> [SpectralField<T>; 2] {
        VorticityState::velocity(self)
    }
}

impl<T: Real> Evolution<T> for ZState<T> {
    fn components(&self) -> Vec<&SpectralField<T>> {
        vec![&self.z_plus, &self.z_minus]
    }

    fn with_components(&self, fields: Vec<SpectralField<T>>, time: T) -> Self {
        let [z_plus, z_minus]: [SpectralField<T>; 2] = fields.try_into().expect("two components");
        ZState {
            z_plus,
            z_minus,
            kappa: self.kappa,
            time,
        }
    }

    fn time(&self) -> T {
        self.time
    }

    fn kappa(&self) -> T {
        self.kappa
    }

    fn tendency(&self, nonlinear: bool) -> Vec<SpectralField<T>> {
        let (a, b) = if nonlinear {
            rhs_dispersive(self)
        } else {
            linear_dispersive(self)
        };
        vec![a, b]
    }

    fn nonlinear_tendency(&self) -> Vec<SpectralField<T>> {
        let (a, b) = nonlinear_dispersive(self);
        vec![a, b]
    }

    fn branches(&self) -> Option<Vec<Branch>> {
        Some(vec![Branch::Plus, Branch::Minus])
    }

    fn velocity(&self) -> [SpectralField<T>; 2] {
        from_dispersive(self).u
    }
}

impl<T: Real> Evolution<T> for SqgState<T> {
    fn components(&self) -> Vec<&SpectralField<T>> {
        vec![&self.theta]
    }

    fn with_components(&self, mut fields: Vec<SpectralField<T>>, time: T) -> Self {
        SqgState {
            theta: fields.pop().expect("one component"),
            kappa: self.kappa,
            time,
        }
    }

    fn time(&self) -> T {
        self.time
    }

    fn kappa(&self) -> T {
        self.kappa
    }

    fn tendency(&self, nonlinear: bool) -> Vec<SpectralField<T>> {
        if nonlinear {
            vec![rhs_sqg(self)]
        } else {
            vec![linear_sqg(self)]
        }
    }

    fn nonlinear_tendency(&self) -> Vec<SpectralField<T>> {
        vec![nonlinear_sqg(self)]
    }

    fn branches(&self) -> Option<Vec<Branch>> {
        Some(vec![Branch::Plus])
    }

    fn velocity(&self) -> [SpectralField<T>; 2] {
        SqgState::velocity(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dealias, inverse_transform, make_grid, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid() -> Grid<f64> {
        make_grid(32, 2.0 * PI * 3.0, 2.0 / 3.0).unwrap()
    }

    fn smooth_random(g: &Grid<f64>, rng: &mut ChaCha8Rng, amp: f64) -> SpectralField<f64> {
        dealias(&SpectralField::random(g, rng, |k| amp * (-k * k / 2.0).exp()))
    }

    #[test]
    fn pure_density_maps_to_opposite_unknowns() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = smooth_random(&g, &mut rng, 1.0);
        let s = VorticityState::new(SpectralField::zeros(&g), f.clone(), 1.0).unwrap();
        let z = to_dispersive(&s).unwrap();
        assert_eq!(z.z_plus.max_coeff_diff(&f), 0.0);
        assert_eq!(z.z_minus.max_coeff_diff(&(-&f)), 0.0);
    }

    #[test]
    fn inverse_modulus_halves_mode_at_two() {
        // L = 2 pi so |xi| = 2 for mode (2, 0).
        let g = make_grid(16, 2.0 * PI, 2.0 / 3.0).unwrap();
        let a = 0.8;
        let w = SpectralField::cosine_mode(&g, 2, 0, a);
        let s = VorticityState::new(w, SpectralField::zeros(&g), 1.0).unwrap();
        let z = to_dispersive(&s).unwrap();
        let expect = SpectralField::cosine_mode(&g, 2, 0, a / 2.0);
        assert!(z.z_plus.max_coeff_diff(&expect) < 1e-15);
        assert!(z.z_minus.max_coeff_diff(&expect) < 1e-15);
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let g = grid();
        let mut f = SpectralField::zeros(&g);
        f.coeffs_mut()[0].re = 1.0;
        assert_eq!(
            VorticityState::new(SpectralField::zeros(&g), f.clone(), 1.0).unwrap_err(),
            ModelError::NonzeroMean("rho")
        );
        let raw = VorticityState {
            omega: SpectralField::zeros(&g),
            rho: f,
            kappa: 1.0,
            time: 0.0,
        };
        assert!(to_dispersive(&raw).is_err());
        assert!(VorticityState::new(SpectralField::zeros(&g), SpectralField::zeros(&g), -1.0).is_err());
    }

    #[test]
    fn reconstruction_examples() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = smooth_random(&g, &mut rng, 1.0);
        let same = ZState::new(h.clone(), h.clone(), 1.0).unwrap();
        let p = from_dispersive(&same);
        assert_eq!(p.rho.max_abs_coeff(), 0.0);
        let grad_h = apply_symbol(&h, Symbol::ModNabla(1.0)).unwrap();
        assert!(p.omega.max_coeff_diff(&grad_h) < 1e-15);

        let opposite = ZState::new(h.clone(), -&h, 1.0).unwrap();
        let q = from_dispersive(&opposite);
        assert_eq!(q.u[0].max_abs_coeff(), 0.0);
        assert_eq!(q.u[1].max_abs_coeff(), 0.0);
        assert_eq!(q.omega.max_abs_coeff(), 0.0);
        assert!(q.rho.max_coeff_diff(&h) < 1e-16);
    }

    #[test]
    fn vorticity_equals_curl_of_reconstructed_velocity() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = ZState::new(
            smooth_random(&g, &mut rng, 1.0),
            smooth_random(&g, &mut rng, 1.0),
            2.0,
        )
        .unwrap();
        let p = from_dispersive(&z);
        let curl = &apply_symbol(&p.u[1], Symbol::Partial(Axis::X1)).unwrap()
            - &apply_symbol(&p.u[0], Symbol::Partial(Axis::X2)).unwrap();
        assert!(curl.max_coeff_diff(&p.omega) < 1e-11 * p.omega.max_abs_coeff());
        let div = &apply_symbol(&p.u[0], Symbol::Partial(Axis::X1)).unwrap()
            + &apply_symbol(&p.u[1], Symbol::Partial(Axis::X2)).unwrap();
        assert!(div.max_abs_coeff() < 1e-12 * p.omega.max_abs_coeff());
    }

    #[test]
    fn roundtrip_through_dispersive_unknowns() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = VorticityState::new(
            smooth_random(&g, &mut rng, 1.0),
            smooth_random(&g, &mut rng, 1.0),
            1.0,
        )
        .unwrap();
        let back = to_dispersive(&s).unwrap().to_vorticity();
        assert!(back.omega.max_coeff_diff(&s.omega) < 1e-12 * s.omega.max_abs_coeff());
        assert!(back.rho.max_coeff_diff(&s.rho) < 1e-12 * s.rho.max_abs_coeff());
        let u0 = s.velocity();
        let u1 = from_dispersive(&to_dispersive(&s).unwrap()).u;
        for c in 0..2 {
            assert!(u1[c].max_coeff_diff(&u0[c]) < 1e-12 * u0[c].max_abs_coeff());
        }
    }

    #[test]
    fn energy_balance_examples() {
        let g = grid();
        let zero = ZState::new(SpectralField::zeros(&g), SpectralField::zeros(&g), 1.0).unwrap();
        assert_eq!(energy_balance_residual(&zero, 0), 0.0);
        let single = ZState::new(
            SpectralField::cosine_mode(&g, 1, 2, 0.3),
            SpectralField::zeros(&g),
            1.0,
        )
        .unwrap();
        assert!(energy_balance_residual(&single, 0) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = ZState::new(
            smooth_random(&g, &mut rng, 1.0),
            smooth_random(&g, &mut rng, 1.0),
            1.0,
        )
        .unwrap();
        assert!(energy_balance_residual(&r, 3) < 1e-11);
    }

    #[test]
    fn vorticity_rhs_with_pure_density_mode() {
        let g = grid();
        let kappa = 1.7;
        let rho = SpectralField::cosine_mode(&g, 2, 1, 0.4);
        let s = VorticityState::new(SpectralField::zeros(&g), rho.clone(), kappa).unwrap();
        let (dw, dr) = rhs_vorticity(&s);
        let expect = apply_symbol(&rho, Symbol::Partial(Axis::X1)).unwrap().scaled(-kappa);
        assert!(dw.max_coeff_diff(&expect) < 1e-15);
        assert_eq!(dr.max_abs_coeff(), 0.0);
    }

    #[test]
    fn plane_wave_is_steady_for_euler_and_sqg() {
        let g = grid();
        let w = SpectralField::cosine_mode(&g, 3, -2, 1.3);
        let s = VorticityState::new(w.clone(), SpectralField::zeros(&g), 0.0).unwrap();
        let (dw, dr) = rhs_vorticity(&s);
        assert!(dw.max_abs_coeff() < 1e-14);
        assert!(dr.max_abs_coeff() < 1e-14);
        let q = SqgState::new(w, 0.0).unwrap();
        assert!(rhs_sqg(&q).max_abs_coeff() < 1e-14);
    }

    #[test]
    fn sqg_vertical_mode_is_steady() {
        let g = grid();
        let q = SqgState::new(SpectralField::cosine_mode(&g, 0, 3, 1.0), 5.0).unwrap();
        assert!(rhs_sqg(&q).max_abs_coeff() < 1e-14);
    }

    #[test]
    fn tendencies_are_mean_zero_and_real() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = VorticityState::new(
            smooth_random(&g, &mut rng, 1.0),
            smooth_random(&g, &mut rng, 1.0),
            1.3,
        )
        .unwrap();
        let (dw, dr) = rhs_vorticity(&s);
        let z = to_dispersive(&s).unwrap();
        let (dp, dm) = rhs_dispersive(&z);
        let q = SqgState::new(s.rho.clone(), 0.7).unwrap();
        for f in [&dw, &dr, &dp, &dm, &rhs_sqg(&q)] {
            assert!(f.is_mean_zero());
            assert!(f.hermitian_defect() < 1e-13);
        }
    }

    #[test]
    fn dispersive_rhs_matches_vorticity_rhs() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = VorticityState::new(
            smooth_random(&g, &mut rng, 1.0),
            smooth_random(&g, &mut rng, 1.0),
            2.1,
        )
        .unwrap();
        let (dw, dr) = rhs_vorticity(&s);
        let mapped = to_dispersive(&VorticityState {
            omega: dw,
            rho: dr,
            kappa: s.kappa,
            time: 0.0,
        })
        .unwrap();
        let (dp, dm) = rhs_dispersive(&to_dispersive(&s).unwrap());
        let scale = dp.max_abs_coeff().max(dm.max_abs_coeff());
        assert!(mapped.z_plus.max_coeff_diff(&dp) < 1e-10 * scale);
        assert!(mapped.z_minus.max_coeff_diff(&dm) < 1e-10 * scale);
    }

    #[test]
    fn symmetric_unknowns_give_equal_nonlinearity() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = smooth_random(&g, &mut rng, 1.0);
        let z = ZState::new(h.clone(), h, 0.0).unwrap();
        let (dp, dm) = rhs_dispersive(&z);
        assert!(dp.max_coeff_diff(&dm) < 1e-15);
        let zero = ZState::new(SpectralField::zeros(&g), SpectralField::zeros(&g), 3.0).unwrap();
        let (a, b) = rhs_dispersive(&zero);
        assert_eq!(a.max_abs_coeff() + b.max_abs_coeff(), 0.0);
    }

    #[test]
    fn tendencies_conserve_energy() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = VorticityState::new(
            smooth_random(&g, &mut rng, 1.0),
            smooth_random(&g, &mut rng, 1.0),
            1.0,
        )
        .unwrap();
        let u = s.velocity();
        let (dw, dr) = rhs_vorticity(&s);
        let ds = VorticityState { omega: dw, rho: dr.clone(), kappa: 1.0, time: 0.0 };
        let du = ds.velocity();
        let rate = u[0].inner(&du[0]) + u[1].inner(&du[1]) + s.rho.inner(&dr);
        let energy = u[0].l2_norm_sq() + u[1].l2_norm_sq() + s.rho.l2_norm_sq();
        assert!(rate.abs() < 1e-11 * energy, "{rate} vs {energy}");

        let q = SqgState::new(s.rho.clone(), 2.0).unwrap();
        let dq = rhs_sqg(&q);
        assert!(q.theta.inner(&dq).abs() < 1e-11 * q.theta.l2_norm_sq());

        let samples = inverse_transform(&dq);
        assert!(samples.iter().all(|x| x.is_finite()));
    }
}
