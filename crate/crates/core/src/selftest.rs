//! Quick battery of exact invariants, run by the `selftest` command.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::io::{decode_checkpoint, encode_checkpoint, Checkpoint};
use crate::littlewood_paley::{bump_phi, BandRange};
use crate::model::{
    energy_balance_residual, rhs_dispersive, rhs_sqg, rhs_vorticity, to_dispersive, Branch, SqgState,
    VorticityState, ZState,
};
use crate::spectral::{dealias, forward_transform, inverse_transform, make_grid, Grid, SpectralField};
use crate::timestepper::{integrate, propagator, Control, Scheme, StepperConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// Worst value seen.
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &'static str, value: f64, limit: f64) -> Self {
        CheckOutcome { name, value, limit, passed: value.is_finite() && value < limit }
    }
}

fn smooth(g: &Grid<f64>, rng: &mut ChaCha8Rng) -> SpectralField<f64> {
    let f = dealias(&SpectralField::random(g, rng, |k| (-k * k / 2.0).exp()));
    f.scaled(g.length() / f.l2_norm())
}

fn rel_diff(a: &SpectralField<f64>, b: &SpectralField<f64>) -> f64 {
    a.max_coeff_diff(b) / a.max_abs_coeff().max(b.max_abs_coeff()).max(f64::MIN_POSITIVE)
}

/// Runs every check on `samples` random states drawn from `seed`.
pub fn run_selftest(seed: u64, samples: usize) -> Vec<CheckOutcome> {
    let g = make_grid(32, 4.0 * PI, 2.0 / 3.0).expect("valid grid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roundtrip: f64 = 0.0;
    let mut parseval: f64 = 0.0;
    let mut hermitian: f64 = 0.0;
    let mut balance: f64 = 0.0;
    let mut commute: f64 = 0.0;
    let mut conserve: f64 = 0.0;
    let mut unitary: f64 = 0.0;
    let mut checkpoint_ok = true;
    for _ in 0..samples {
        let w = smooth(&g, &mut rng);
        let r = smooth(&g, &mut rng);
        let kappa = 0.5 + 2.0 * rand::Rng::gen::<f64>(&mut rng);

        let phys = inverse_transform(&w);
        let back = forward_transform(&phys, &g).expect("sizes match");
        roundtrip = roundtrip.max(rel_diff(&back, &w));
        let cell = g.dx() * g.dx();
        let l2_phys: f64 = phys.iter().map(|x| x * x).sum::<f64>() * cell;
        parseval = parseval.max((l2_phys / w.l2_norm_sq() - 1.0).abs());

        let s = VorticityState::new(w, r, kappa).expect("mean-zero data");
        let z = to_dispersive(&s).expect("mean-zero data");
        for k in [0, 1, 3] {
            balance = balance.max(energy_balance_residual(&z, k));
        }

        let (dw, dr) = rhs_vorticity(&s);
        let (dp, dm) = rhs_dispersive(&z);
        let dq = rhs_sqg(&SqgState::new(s.rho.clone(), kappa).expect("mean-zero data"));
        for f in [&dw, &dr, &dp, &dm, &dq] {
            hermitian = hermitian.max(f.hermitian_defect());
        }
        let mapped = to_dispersive(&VorticityState { omega: dw, rho: dr.clone(), kappa, time: 0.0 })
            .expect("tendencies are mean-zero");
        commute = commute.max(rel_diff(&mapped.z_plus, &dp)).max(rel_diff(&mapped.z_minus, &dm));

        let energy = 0.5 * (z.z_plus.l2_norm_sq() + z.z_minus.l2_norm_sq());
        let rate = 0.5 * (z.z_plus.inner(&dp) + z.z_minus.inner(&dm));
        conserve = conserve.max(rate.abs() / energy);

        let moved = propagator(&z.z_plus, kappa, 10.0, Branch::Plus);
        unitary = unitary.max((moved.l2_norm() / z.z_plus.l2_norm() - 1.0).abs());

        let bytes = encode_checkpoint(&Checkpoint::Dispersive(z.clone()));
        checkpoint_ok &= match decode_checkpoint(&bytes, g.dealias_fraction()) {
            Ok(Checkpoint::Dispersive(back)) => {
                back.z_plus.coeffs() == z.z_plus.coeffs() && back.z_minus.coeffs() == z.z_minus.coeffs()
            }
            _ => false,
        };
    }

    let range = BandRange::for_grid(&g);
    let partition = g
        .modulus()
        .iter()
        .filter(|&&r| r > 0.0)
        .map(|&r| {
            let total: f64 = (range.k_min - 1..=range.k_max + 1).map(|k| bump_phi(r * 2f64.powi(-k))).sum();
            (total - 1.0).abs()
        })
        .fold(0.0, f64::max);

    let kappa = 3.0;
    let a = smooth(&g, &mut rng);
    let b = smooth(&g, &mut rng);
    let t = 100.0 / kappa;
    let cfg = StepperConfig::fixed(Scheme::Ifrk4, 0.37, t, usize::MAX);
    let z = ZState::new(a.clone(), b.clone(), kappa).expect("mean-zero data");
    let linear = match integrate(z, &cfg, false, |_| Control::Continue) {
        Ok(out) => {
            let e = (&out.state.z_plus - &propagator(&a, kappa, t, Branch::Plus)).l2_norm()
                + (&out.state.z_minus - &propagator(&b, kappa, t, Branch::Minus)).l2_norm();
            e / (a.l2_norm() + b.l2_norm())
        }
        Err(_) => f64::INFINITY,
    };

    vec![
        CheckOutcome::new("transform roundtrip", roundtrip, 1e-12),
        CheckOutcome::new("parseval", parseval, 1e-12),
        CheckOutcome::new("hermitian symmetry of tendencies", hermitian, 1e-12),
        CheckOutcome::new("partition of unity", partition, 1e-12),
        CheckOutcome::new("energy balance", balance, 1e-11),
        CheckOutcome::new("formulation equivalence", commute, 1e-10),
        CheckOutcome::new("tendency energy conservation", conserve, 1e-11),
        CheckOutcome::new("propagator unitarity", unitary, 1e-13),
        CheckOutcome::new("linear integrating factor", linear, 1e-11),
        CheckOutcome::new("checkpoint roundtrip", if checkpoint_ok { 0.0 } else { 1.0 }, 0.5),
    ]
}
