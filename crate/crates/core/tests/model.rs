use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stratsim::model::*;
use stratsim::spectral::{apply_symbol, dealias, make_grid, Axis, Grid, SpectralField, Symbol};

fn grid() -> Grid<f64> {
    make_grid(32, 4.0 * PI, 2.0 / 3.0).unwrap()
}

fn smooth(g: &Grid<f64>, seed: u64) -> SpectralField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = dealias(&SpectralField::random(g, &mut rng, |k| (-k * k / 2.0).exp()));
    f.scaled(g.length() / f.l2_norm())
}

fn rel(a: &SpectralField<f64>, b: &SpectralField<f64>) -> f64 {
    a.max_coeff_diff(b) / a.max_abs_coeff().max(b.max_abs_coeff()).max(f64::MIN_POSITIVE)
}

/// Finite-difference time derivative of the map (omega, rho) -> Z along the
/// vorticity-form flow, compared with the dispersive tendency.
#[test]
fn dispersive_tendency_is_the_derivative_of_the_mapped_flow() {
    let g = grid();
    let s = VorticityState::new(smooth(&g, 1), smooth(&g, 2), 1.7).unwrap();
    let (dw, dr) = rhs_vorticity(&s);
    let h = 1e-4;
    let shift = |sign: f64| {
        let moved = VorticityState::new(&s.omega + &dw.scaled(sign * h), &s.rho + &dr.scaled(sign * h), s.kappa).unwrap();
        to_dispersive(&moved).unwrap()
    };
    let (fwd, back) = (shift(1.0), shift(-1.0));
    let fd_plus = (&fwd.z_plus - &back.z_plus).scaled(0.5 / h);
    let (dp, _) = rhs_dispersive(&to_dispersive(&s).unwrap());
    // the map is linear, so the central difference is exact up to roundoff
    assert!(rel(&fd_plus, &dp) < 1e-9);
}

#[test]
fn linear_parts_are_the_riesz_rotation() {
    let g = grid();
    let z = ZState::new(smooth(&g, 3), smooth(&g, 4), 2.0).unwrap();
    let (lp, lm) = linear_dispersive(&z);
    let r = |f: &SpectralField<f64>| apply_symbol(f, Symbol::Riesz1).unwrap().scaled(2.0);
    assert!(rel(&lp, &r(&z.z_plus)) < 1e-15);
    assert!(rel(&lm, &r(&z.z_minus).scaled(-1.0)) < 1e-15);
}

#[test]
fn vorticity_linear_part_couples_through_the_horizontal_derivative() {
    let g = grid();
    let s = VorticityState::new(smooth(&g, 5), smooth(&g, 6), 3.0).unwrap();
    let (lw, lr) = linear_vorticity(&s);
    let d1 = |f: &SpectralField<f64>| apply_symbol(f, Symbol::Partial(Axis::X1)).unwrap();
    assert!(rel(&lw, &d1(&s.rho).scaled(-3.0)) < 1e-15);
    let inv = apply_symbol(&s.omega, Symbol::InvLaplace).unwrap();
    assert!(rel(&lr, &d1(&inv).scaled(3.0)) < 1e-15);
}

#[test]
fn reconstructed_velocity_is_divergence_free() {
    let g = grid();
    let z = ZState::new(smooth(&g, 7), smooth(&g, 8), 1.0).unwrap();
    let p = from_dispersive(&z);
    let div = &apply_symbol(&p.u[0], Symbol::Partial(Axis::X1)).unwrap()
        + &apply_symbol(&p.u[1], Symbol::Partial(Axis::X2)).unwrap();
    assert!(div.max_abs_coeff() < 1e-12 * p.u[0].max_abs_coeff());
}

#[test]
fn evolution_trait_round_trips_components() {
    let g = grid();
    let z = ZState::new(smooth(&g, 9), smooth(&g, 10), 1.0).unwrap();
    let comps: Vec<SpectralField<f64>> = z.components().into_iter().cloned().collect();
    let back = z.with_components(comps, 2.5);
    assert_eq!(back.z_plus.coeffs(), z.z_plus.coeffs());
    assert_eq!(Evolution::time(&back), 2.5);
    assert_eq!(z.branches(), Some(vec![Branch::Plus, Branch::Minus]));
    let v = VorticityState::new(smooth(&g, 1), smooth(&g, 2), 1.0).unwrap();
    assert_eq!(v.branches(), None);
}

#[test]
fn negative_kappa_is_rejected() {
    let g = grid();
    assert!(SqgState::new(smooth(&g, 1), -1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_balance_holds(seed in any::<u64>(), k in prop::sample::select(vec![0u32, 1, 3])) {
        let g = grid();
        let z = ZState::new(smooth(&g, seed), smooth(&g, seed ^ 0xabc), 1.0).unwrap();
        prop_assert!(energy_balance_residual(&z, k) < 1e-11);
    }

    #[test]
    fn formulations_commute(seed in any::<u64>(), kappa in 0.0f64..5.0) {
        let g = grid();
        let s = VorticityState::new(smooth(&g, seed), smooth(&g, seed.wrapping_add(1)), kappa).unwrap();
        let (dw, dr) = rhs_vorticity(&s);
        let mapped = to_dispersive(&VorticityState { omega: dw, rho: dr, kappa, time: 0.0 }).unwrap();
        let (dp, dm) = rhs_dispersive(&to_dispersive(&s).unwrap());
        prop_assert!(rel(&mapped.z_plus, &dp) < 1e-10);
        prop_assert!(rel(&mapped.z_minus, &dm) < 1e-10);
    }

    #[test]
    fn tendencies_stay_real_and_mean_free(seed in any::<u64>(), kappa in 0.0f64..5.0) {
        let g = grid();
        let z = ZState::new(smooth(&g, seed), smooth(&g, seed.wrapping_mul(3)), kappa).unwrap();
        let (dp, dm) = rhs_dispersive(&z);
        let dq = rhs_sqg(&SqgState::new(z.z_plus.clone(), kappa).unwrap());
        for f in [&dp, &dm, &dq] {
            prop_assert!(f.hermitian_defect() < 1e-12);
            prop_assert_eq!(f.mean().norm(), 0.0);
        }
    }

    #[test]
    fn dispersive_energy_is_conserved_by_the_tendency(seed in any::<u64>(), kappa in 0.0f64..5.0) {
        let g = grid();
        let z = ZState::new(smooth(&g, seed), smooth(&g, seed.wrapping_add(7)), kappa).unwrap();
        let (dp, dm) = rhs_dispersive(&z);
        let rate = z.z_plus.inner(&dp) + z.z_minus.inner(&dm);
        prop_assert!(rate.abs() < 1e-11 * (z.z_plus.l2_norm_sq() + z.z_minus.l2_norm_sq()));
    }

    #[test]
    fn roundtrip_through_unknowns(seed in any::<u64>()) {
        let g = grid();
        let s = VorticityState::new(smooth(&g, seed), smooth(&g, !seed), 1.0).unwrap();
        let p = from_dispersive(&to_dispersive(&s).unwrap());
        prop_assert!(rel(&p.omega, &s.omega) < 1e-12);
        prop_assert!(rel(&p.rho, &s.rho) < 1e-12);
        let u = s.velocity();
        prop_assert!(rel(&p.u[0], &u[0]) < 1e-12);
        prop_assert!(rel(&p.u[1], &u[1]) < 1e-12);
    }
}
