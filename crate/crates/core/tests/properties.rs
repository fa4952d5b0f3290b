use proptest::prelude::*;

use gkdv_core::io::{decode_snapshot, encode_snapshot};
use gkdv_core::{
    conserved_quantities, integrate_inner, make_grid, multisoliton_sum, q_profile, reflect,
    spectral_derivative, translate, Field, GridSpec, NormMode, SolitonFamily,
};

/// Closed-form ground state for p = 6, written out independently of the
/// library: `Q(x) = (7/2 sech^2(5x/2))^(1/5)`.
fn q6(x: f64) -> f64 {
    (3.5 / (2.5 * x).cosh().powi(2)).powf(0.2)
}

fn q6_prime(x: f64) -> f64 {
    -q6(x) * (2.5 * x).tanh()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Random trigonometric polynomial resolved on the grid.
fn trig_field(grid: GridSpec, coeffs: &[(f64, f64)]) -> Field {
    let l = grid.domain_length;
    Field::from_fn(grid, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(m, &(a, b))| {
                let k = 2.0 * std::f64::consts::PI * (m + 1) as f64 / l;
                a * (k * x).cos() + b * (k * x).sin()
            })
            .sum()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..12)
}

fn grid64() -> GridSpec {
    make_grid(64, 10.0, -5.0).unwrap()
}

proptest! {
    #[test]
    fn derivative_is_linear(f in coeffs(), g in coeffs(), a in -3.0..3.0f64, b in -3.0..3.0f64, order in 1u32..=3) {
        let grid = grid64();
        let (f, g) = (trig_field(grid, &f), trig_field(grid, &g));
        let mut comb = f.scaled(a);
        comb.axpy(b, &g);
        let lhs = spectral_derivative(&comb, order).unwrap();
        let mut rhs = spectral_derivative(&f, order).unwrap().scaled(a);
        rhs.axpy(b, &spectral_derivative(&g, order).unwrap());
        let scale = 1.0 + rhs.sup_norm();
        prop_assert!((&lhs - &rhs).sup_norm() < 1e-12 * scale);
    }

    #[test]
    fn derivative_is_skew(f in coeffs(), g in coeffs()) {
        let grid = grid64();
        let (f, g) = (trig_field(grid, &f), trig_field(grid, &g));
        let df = spectral_derivative(&f, 1).unwrap();
        let dg = spectral_derivative(&g, 1).unwrap();
        let lhs = integrate_inner(&df, Some(&g), NormMode::L2Inner).unwrap();
        let rhs = integrate_inner(&f, Some(&dg), NormMode::L2Inner).unwrap();
        prop_assert!((lhs + rhs).abs() < 1e-10);
    }

    #[test]
    fn parseval(f in coeffs()) {
        let grid = grid64();
        let field = trig_field(grid, &f);
        let norm = integrate_inner(&field, None, NormMode::L2Norm).unwrap();
        // Each cos/sin mode carries L/2 of energy.
        let modal: f64 = f.iter().map(|(a, b)| (a * a + b * b) * grid.domain_length / 2.0).sum();
        prop_assert!((norm * norm - modal).abs() < 1e-12 * (1.0 + modal));
    }

    #[test]
    fn translations_compose(f in coeffs(), s1 in -20.0..20.0f64, s2 in -20.0..20.0f64) {
        let field = trig_field(grid64(), &f);
        let twice = translate(&translate(&field, s1), s2);
        let once = translate(&field, s1 + s2);
        prop_assert!((&twice - &once).sup_norm() < 1e-11 * (1.0 + field.sup_norm()));
    }

    #[test]
    fn reflection_is_an_involution(f in coeffs()) {
        let field = trig_field(grid64(), &f);
        prop_assert!((&reflect(&reflect(&field)) - &field).sup_norm() < 1e-12);
    }

    #[test]
    fn snapshots_round_trip_bit_exact(values in prop::collection::vec(-1e300..1e300f64, 16), origin in -1e3..1e3f64) {
        let grid = make_grid(16, 7.0, origin).unwrap();
        let f = Field::new(grid, values).unwrap();
        let back = decode_snapshot(&encode_snapshot(&f)).unwrap();
        prop_assert_eq!(back.grid(), f.grid());
        prop_assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn ground_state_satisfies_its_ode() {
    let grid = make_grid(4096, 100.0, -50.0).unwrap();
    let q = q_profile(6, 1.0, &grid, 0.0).unwrap();
    let qxx = spectral_derivative(&q, 2).unwrap();
    let worst = q
        .values()
        .iter()
        .zip(qxx.values())
        .map(|(&q, &qxx)| (qxx - q + q.powi(6)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn mass_and_energy_match_line_quadrature() {
    let grid = make_grid(4096, 100.0, -50.0).unwrap();
    let q = q_profile(6, 1.0, &grid, 0.0).unwrap();
    let mass_oracle = simpson(|x| q6(x).powi(2), -50.0, 50.0, 400_000);
    let kinetic = simpson(|x| q6_prime(x).powi(2), -50.0, 50.0, 400_000);
    let potential = simpson(|x| q6(x).powi(7), -50.0, 50.0, 400_000);
    let energy_oracle = 0.5 * kinetic - potential / 7.0;
    let l2 = integrate_inner(&q, None, NormMode::L2Norm).unwrap();
    assert!((l2 * l2 - mass_oracle).abs() < 1e-8, "{} vs {mass_oracle}", l2 * l2);
    let (mass, energy) = conserved_quantities(&q, 6);
    assert!((mass - mass_oracle).abs() < 1e-8);
    assert!((energy - energy_oracle).abs() < 1e-8, "{energy} vs {energy_oracle}");
}

#[test]
fn separated_solitons_barely_overlap_and_interaction_decays() {
    let grid = make_grid(4096, 200.0, -100.0).unwrap();
    let fam = SolitonFamily::new(6, &[1.0, 2.0], &[0.0, -20.0]).unwrap();
    let pair = |t: f64| {
        let r1 = q_profile(6, 1.0, &grid, t).unwrap();
        let r2 = q_profile(6, 2.0, &grid, -20.0 + 2.0 * t).unwrap();
        (r1, r2)
    };
    let (r1, r2) = pair(0.0);
    let sum = multisoliton_sum(&fam, 0.0, &grid).unwrap();
    assert!((&sum - &(&r1 + &r2)).sup_norm() < 1e-15);
    assert!((r1.values()[2048] - q6(0.0)).abs() < 1e-12);
    assert!(r1.dot(&r2) < 1e-8 * r1.dot(&r1));
    // The faster soliton overtakes at t = 20; beyond that the overlap shrinks.
    let overlaps: Vec<f64> = (0..8).map(|i| {
        let (a, b) = pair(25.0 + 5.0 * i as f64);
        a.dot(&b)
    }).collect();
    assert!(overlaps.windows(2).all(|w| w[1] < w[0]), "{overlaps:?}");
}

#[test]
fn mass_scales_with_speed() {
    let grid = make_grid(4096, 200.0, -100.0).unwrap();
    let m1 = q_profile(6, 1.0, &grid, 0.0).unwrap().dot(&q_profile(6, 1.0, &grid, 0.0).unwrap());
    for &c in &[0.5, 2.0, 4.0] {
        let q = q_profile(6, c, &grid, 0.0).unwrap();
        let ratio = q.dot(&q) / m1;
        let expected = f64::powf(c, (5.0 - 6.0) / (2.0 * 5.0));
        assert!((ratio - expected).abs() < 1e-8, "c = {c}: {ratio} vs {expected}");
    }
}

#[test]
fn decay_rate_of_the_profile() {
    // log Q_c(x) + sqrt(c)|x| settles to a constant deep in the tail.
    for &c in &[1.0, 4.0] {
        let s = f64::sqrt(c);
        let g = |x: f64| gkdv_core::profiles::q_value(6, c, x).ln() + s * x.abs();
        let far = [10.0 / s, 15.0 / s, 20.0 / s, -20.0 / s];
        for w in far.windows(2) {
            assert!((g(w[0]) - g(w[1])).abs() < 1e-6, "c = {c}");
        }
    }
}
