use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stratsim::diagnostics::*;
use stratsim::littlewood_paley::Exponent;
use stratsim::model::{Branch, SqgState, ZState};
use stratsim::spectral::{make_grid, Grid, SpectralField};
use stratsim::timestepper::{integrate, propagator, Control, Scheme, StepperConfig};

fn dispersive_grid() -> Grid<f64> {
    make_grid(512, 100.0 * PI, 2.0 / 3.0).unwrap()
}

fn bump(g: &Grid<f64>, k: i32) -> SpectralField<f64> {
    let l = g.length();
    band_bump(g, k, [1.0, 2.0], [l / 2.0, l / 2.0])
}

#[test]
fn band_zero_decays_at_the_dispersive_rate() {
    let g = dispersive_grid();
    let times = log_spaced_times(5.0, 75.0, 12);
    let fit = linear_decay_fit(&bump(&g, 0), 1.0, 0, &times, Some(4.0)).unwrap();
    assert!((fit.sup_fit.slope + 0.5).abs() <= 0.05, "{:?}", fit.sup_fit);
    let (p, _, lp) = fit.lp.as_ref().unwrap();
    assert_eq!(*p, 4.0);
    assert!((lp.slope + 0.25).abs() <= 0.05, "{lp:?}");
    assert!(fit.constant_ratios.iter().all(|c| c.is_finite() && *c > 0.0));
    let spread = fit.constant_ratios.iter().cloned().fold(0.0, f64::max)
        / fit.constant_ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 3.0, "{spread}");
}

#[test]
fn decay_collapses_in_kappa_t() {
    let g = dispersive_grid();
    let scaled = log_spaced_times(5.0, 75.0, 8);
    let residual = decay_collapse_residual(&bump(&g, 0), 0, &[1.0, 2.0, 4.0], &scaled);
    assert!(residual < 0.05, "{residual}");
}

#[test]
fn decay_fit_rejects_bad_windows() {
    let g = make_grid(64, 20.0 * PI, 2.0 / 3.0).unwrap();
    let f = bump(&g, 0);
    let long = log_spaced_times(1.0, 100.0, 10);
    assert!(matches!(linear_decay_fit(&f, 1.0, 0, &long, None), Err(DiagnosticError::WindowViolation { .. })));
    let sparse = log_spaced_times(1.0, 10.0, 4);
    assert!(matches!(linear_decay_fit(&f, 1.0, 0, &sparse, None), Err(DiagnosticError::TooFewSamples { .. })));
}

#[test]
fn l4_strichartz_ratio_is_stable_in_kappa() {
    let g = dispersive_grid();
    let f = bump(&g, 0);
    let pair = AdmissiblePair::from_q(4.0).unwrap();
    let horizon = g.length() / 32.0;
    let ratios: Vec<f64> =
        [1.0, 2.0, 4.0, 8.0].iter().map(|&k| strichartz_ratio(&f, k, pair, 0, horizon).unwrap().ratio).collect();
    let mean = ratios.iter().sum::<f64>() / 4.0;
    for r in &ratios {
        assert!((r / mean - 1.0).abs() <= 0.2, "{ratios:?}");
    }
}

#[test]
fn energy_pair_has_unit_ratio() {
    let g = make_grid(128, 40.0 * PI, 2.0 / 3.0).unwrap();
    let pair = AdmissiblePair::from_q(f64::INFINITY).unwrap();
    let m = strichartz_ratio(&bump(&g, 0), 3.0, pair, 0, 5.0).unwrap();
    assert!((m.ratio - 1.0).abs() < 1e-12, "{m:?}");
}

#[test]
fn inadmissible_pairs_are_rejected() {
    assert!(matches!(
        AdmissiblePair::new(Exponent::Finite(2.0), Exponent::Finite(2.0)),
        Err(DiagnosticError::Inadmissible { .. })
    ));
    let p = AdmissiblePair::from_q(8.0).unwrap();
    assert_eq!(p.r, Exponent::Finite(4.0));
}

#[test]
fn resonant_forcing_grows_linearly() {
    let g = make_grid(128, 40.0 * PI, 2.0 / 3.0).unwrap();
    let base = stratsim::littlewood_paley::project_band(&bump(&g, 0), 0);
    let kappa = 2.0;
    let pair = AdmissiblePair::from_q(f64::INFINITY).unwrap();
    let horizon = 5.0;
    let m = duhamel_strichartz_ratio(|s| propagator(&base, kappa, s, Branch::Minus), kappa, pair, 0, horizon, 0.05)
        .unwrap();
    // F(s) = e^{+is kappa R1} g cancels the rotation, so the integral is horizon * P_0 g
    let expect = horizon * stratsim::littlewood_paley::project_band(&base, 0).l2_norm();
    assert!((m.lhs / expect - 1.0).abs() < 1e-6, "{m:?}");
    assert!((m.ratio - 1.0).abs() < 1e-6);
}

#[test]
fn zero_forcing_gives_zero() {
    let g = make_grid(32, 40.0 * PI, 2.0 / 3.0).unwrap();
    let pair = AdmissiblePair::from_q(4.0).unwrap();
    let m = duhamel_strichartz_ratio(|_| SpectralField::zeros(&g), 1.0, pair, 0, 5.0, 0.1).unwrap();
    assert_eq!(m.lhs, 0.0);
    assert_eq!(m.ratio, 0.0);
}

#[test]
fn linear_bootstrap_norm_grows_like_root_t() {
    let g = dispersive_grid();
    let theta = bump(&g, 0);
    let mut tracker = NormTracker::new(3.5);
    let times: Vec<f64> = (0..=150).map(|j| 0.5 * j as f64).collect();
    for &t in &times {
        let mut s = SqgState::new(propagator(&theta, 1.0, t, Branch::Plus), 1.0).unwrap();
        s.time = t;
        tracker.record(&s);
    }
    let reports = tracker.reports();
    let late: Vec<&NormReport<f64>> = reports.iter().filter(|r| r.time >= 5.0).collect();
    let density = loglog_fit(
        &late.iter().map(|r| r.time).collect::<Vec<_>>(),
        &late.iter().map(|r| r.besov_b1_inf_1).collect::<Vec<_>>(),
    )
    .unwrap();
    assert!((density.slope + 0.5).abs() < 0.1, "{density:?}");
    // increments of the time integral follow 2 c (sqrt(t2) - sqrt(t1))
    let c = density.intercept.exp();
    let (a, b) = (late[0], late[late.len() - 1]);
    let predicted = 2.0 * c * (b.time.sqrt() - a.time.sqrt());
    let measured = b.accumulated_bootstrap - a.accumulated_bootstrap;
    assert!((measured / predicted - 1.0).abs() < 0.1, "{measured} {predicted}");
    assert!((bootstrap_norm(reports).unwrap() - reports.last().unwrap().accumulated_bootstrap).abs() < 1e-12);
}

fn smooth(g: &Grid<f64>, seed: u64, amp: f64) -> SpectralField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = stratsim::spectral::dealias(&SpectralField::random(g, &mut rng, |k| (-k * k).exp()));
    f.scaled(amp * g.length() / f.l2_norm())
}

fn tracked_run(stride: usize) -> Vec<NormReport<f64>> {
    let g = make_grid(64, 8.0 * PI, 2.0 / 3.0).unwrap();
    let z = ZState::new(smooth(&g, 1, 0.5), smooth(&g, 2, 0.5), 1.0).unwrap();
    let mut tracker = NormTracker::new(3.5);
    let cfg = StepperConfig::fixed(Scheme::Ifrk4, 0.05, 10.0, stride);
    integrate(z, &cfg, true, |s| {
        tracker.record(s);
        Control::Continue
    })
    .unwrap();
    tracker.reports().to_vec()
}

#[test]
fn accumulated_norms_are_monotone_and_quadrature_converged() {
    let coarse = tracked_run(4);
    let fine = tracked_run(2);
    for w in fine.windows(2) {
        assert!(w[1].accumulated_bootstrap >= w[0].accumulated_bootstrap);
        assert!(w[1].accumulated_blowup >= w[0].accumulated_blowup);
    }
    for r in &fine {
        for v in [r.sobolev_hn, r.besov_b1_inf_1, r.grad_linf, r.l2_energy] {
            assert!(v.is_finite() && v >= 0.0);
        }
    }
    let (a, b) = (coarse.last().unwrap(), fine.last().unwrap());
    assert!((a.accumulated_bootstrap / b.accumulated_bootstrap - 1.0).abs() < 0.01);
    assert!((a.accumulated_blowup / b.accumulated_blowup - 1.0).abs() < 0.01);
    assert!((accumulated_blowup(&fine).unwrap() - b.accumulated_blowup).abs() < 1e-12);
}

#[test]
fn unsorted_series_is_rejected() {
    let mut reports = tracked_run(50);
    reports.swap(0, 1);
    assert!(matches!(bootstrap_norm(&reports), Err(DiagnosticError::Unsorted)));
    let mut reports = tracked_run(50);
    reports[1].besov_b1_inf_1 = f64::NAN;
    assert!(matches!(bootstrap_norm(&reports), Err(DiagnosticError::NonFinite)));
}

#[test]
fn separated_single_modes_give_a_finite_product_ratio() {
    let g = make_grid(128, 2.0 * PI, 2.0 / 3.0).unwrap();
    let f = SpectralField::cosine_mode(&g, 1, 1, 1.0);
    let h = SpectralField::cosine_mode(&g, 24, -5, 1.0);
    for m in [0.0, 1.0, 2.5] {
        let r = product_estimate_ratio(&f, &h, m).unwrap();
        assert!(r.is_finite() && r > 0.0 && r < 50.0, "{m} {r}");
    }
}

#[test]
fn product_ratio_needs_band_limited_input() {
    let g = make_grid(32, 2.0 * PI, 2.0 / 3.0).unwrap();
    let f = SpectralField::cosine_mode(&g, 9, 0, 1.0);
    assert!(matches!(product_estimate_ratio(&f, &f, 1.0), Err(DiagnosticError::NotBandLimited)));
}

#[test]
fn summation_ratio_is_bounded_on_random_fields() {
    let g = make_grid(64, 2.0 * PI, 2.0 / 3.0).unwrap();
    let worst = (0..20)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = SpectralField::random(&g, &mut rng, |k| (1.0 + k * k).powf(-1.0));
            summation_ratio(&f, 2.0, 0.5)
        })
        .fold(0.0, f64::max);
    assert!(worst.is_finite() && worst < 10.0, "{worst}");
}
