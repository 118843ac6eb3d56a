use dalc::manipulator::{
    bundled_robots, Friction, ManipulatorParams, ManipulatorState, STANDARD_GRAVITY,
};
use dalc::rbf::{time_average_weights, RbfLattice, WeightMatrix};
use nalgebra::{DMatrix, Vector2};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

fn robot() -> impl Strategy<Value = ManipulatorParams> {
    (0usize..5).prop_map(|i| bundled_robots()[i])
}

fn angle() -> impl Strategy<Value = f64> {
    -std::f64::consts::PI..std::f64::consts::PI
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn coriolis_makes_mass_rate_skew(
        p in robot(),
        q in (angle(), angle()),
        qd in (-5.0..5.0f64, -5.0..5.0f64),
        x in (-10.0..10.0f64, -10.0..10.0f64),
    ) {
        let q = Vector2::new(q.0, q.1);
        let qd = Vector2::new(qd.0, qd.1);
        let x = Vector2::new(x.0, x.1);
        let n = p.mass_matrix_rate(&q, &qd) - 2.0 * p.coriolis_matrix(&q, &qd);
        prop_assert!(x.dot(&(n * x)).abs() <= 1e-10);
        // Equivalent form M' = C + C^T.
        let c = p.coriolis_matrix(&q, &qd);
        prop_assert!((p.mass_matrix_rate(&q, &qd) - c - c.transpose()).amax() <= 1e-12);
    }

    #[test]
    fn mass_matrix_is_symmetric_positive_definite(p in robot(), q in (angle(), angle())) {
        let m = p.mass_matrix(&Vector2::new(q.0, q.1));
        prop_assert_eq!(m[(0, 1)], m[(1, 0)]);
        // 2x2 Sylvester criterion.
        prop_assert!(m[(0, 0)] > 0.0);
        prop_assert!(m.determinant() > 0.0);
    }

    #[test]
    fn mass_rate_matches_central_difference(
        p in robot(),
        q in (angle(), angle()),
        qd in (-3.0..3.0f64, -3.0..3.0f64),
    ) {
        let q = Vector2::new(q.0, q.1);
        let qd = Vector2::new(qd.0, qd.1);
        let h = 1e-6;
        let fd = (p.mass_matrix(&(q + qd * h)) - p.mass_matrix(&(q - qd * h))) / (2.0 * h);
        prop_assert!((fd - p.mass_matrix_rate(&q, &qd)).amax() <= 1e-7);
    }

    #[test]
    fn forward_dynamics_inverts_inverse_dynamics(
        p in robot(),
        q in (angle(), angle()),
        qd in (-3.0..3.0f64, -3.0..3.0f64),
        acc in (-20.0..20.0f64, -20.0..20.0f64),
        fc in (0.0..1.0f64, 0.0..1.0f64),
    ) {
        let p = ManipulatorParams {
            friction: Friction { constant: [fc.0, fc.1], viscous: [fc.1, fc.0] },
            ..p
        };
        let s = ManipulatorState::new([q.0, q.1], [qd.0, qd.1]);
        let acc = Vector2::new(acc.0, acc.1);
        let tau = p.inverse_dynamics(&s, &acc);
        let back = p.forward_dynamics(&s, &tau).unwrap();
        prop_assert!((back - acc).amax() <= 1e-9 * (1.0 + acc.amax()));
    }

    #[test]
    fn regressor_entries_lie_in_unit_interval(
        z in proptest::collection::vec(-5.0..5.0f64, 4),
    ) {
        let lattice = RbfLattice::new(4, 4, &[[-1.2, 1.2]; 4], 0.8).unwrap();
        let s = lattice.regressor(&z).unwrap();
        prop_assert_eq!(s.len(), 256);
        for &v in s.iter() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        // Independent evaluation of one node.
        let k = 137;
        let d2: f64 = lattice.center(k).iter().zip(&z).map(|(c, x)| (x - c).powi(2)).sum();
        prop_assert!((s[k] - (-d2 / 0.64).exp()).abs() <= 1e-15);
    }

    #[test]
    fn lattice_output_is_linear_in_weights(
        z in proptest::collection::vec(-1.2..1.2f64, 4),
        a in -3.0..3.0f64,
    ) {
        let lattice = RbfLattice::new(4, 3, &[[-1.2, 1.2]; 4], 0.8).unwrap();
        let n = lattice.node_count();
        let w1 = WeightMatrix(DMatrix::from_fn(n, 2, |i, j| (i as f64 * 0.37 + j as f64).sin()));
        let w2 = WeightMatrix(DMatrix::from_fn(n, 2, |i, j| (i as f64 * 0.11 - j as f64).cos()));
        let mixed = WeightMatrix(&w1.0 * a + &w2.0);
        let lhs = lattice.evaluate(&mixed, &z).unwrap();
        let rhs = lattice.evaluate(&w1, &z).unwrap() * a + lattice.evaluate(&w2, &z).unwrap();
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }
}

#[test]
fn regressor_peaks_at_each_center() {
    let lattice = RbfLattice::new(2, 3, &[[-1.0, 1.0], [0.0, 2.0]], 0.5).unwrap();
    for k in 0..lattice.node_count() {
        let c = lattice.center(k).to_vec();
        let s = lattice.regressor(&c).unwrap();
        assert_eq!(s[k], 1.0);
    }
    // First dimension varies slowest.
    assert_eq!(lattice.center(1), &[-1.0, 1.0]);
    assert_eq!(lattice.center(3), &[0.0, 0.0]);
}

#[test]
fn average_of_a_linear_ramp_is_its_midpoint() {
    let samples: Vec<(f64, WeightMatrix)> = (0..=300)
        .map(|k| {
            let t = k as f64 * 0.1;
            (t, WeightMatrix(DMatrix::from_element(3, 2, t)))
        })
        .collect();
    let avg = time_average_weights(&samples, 20.0, 30.0).unwrap();
    for &v in avg.0.iter() {
        approx::assert_relative_eq!(v, 25.0, epsilon = 1e-9);
    }
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

/// `q'' = -M^-1 g` at `q = 0`, `q' = 0`, `tau = 0` in exact arithmetic on the
/// binary values of robot 1's parameters.
#[test]
fn free_fall_from_rest_matches_exact_rational_oracle() {
    let p = bundled_robots()[0];
    let two = BigRational::from_integer(BigInt::from(2));
    let (m1, m2, l1, l2, i1, i2, g) = (
        rat(p.m1),
        rat(p.m2),
        rat(p.l1),
        rat(p.l2),
        rat(p.i1),
        rat(p.i2),
        rat(STANDARD_GRAVITY),
    );
    let lc1 = &l1 / &two;
    let lc2 = &l2 / &two;
    assert_eq!(rat(p.lc1), lc1);
    assert_eq!(rat(p.lc2), lc2);

    // cos 0 = 1.
    let m11 = &m1 * &lc1 * &lc1 + &m2 * (&l1 * &l1 + &lc2 * &lc2 + &two * &l1 * &lc2) + &i1 + &i2;
    let m12 = &m2 * (&lc2 * &lc2 + &l1 * &lc2) + &i2;
    let m22 = &m2 * &lc2 * &lc2 + &i2;
    let g2 = &m2 * &lc2 * &g;
    let g1 = (&m1 * &lc2 + &m2 * &l1) * &g + &g2;
    let det = &m11 * &m22 - &m12 * &m12;
    assert!(!det.is_zero());
    let neg = -BigRational::one();
    let a1 = &neg * (&m22 * &g1 - &m12 * &g2) / &det;
    let a2 = &neg * (&m11 * &g2 - &m12 * &g1) / &det;

    let got = p
        .forward_dynamics(
            &ManipulatorState::new([0.0, 0.0], [0.0, 0.0]),
            &Vector2::zeros(),
        )
        .unwrap();
    for (x, exact) in got.iter().zip([a1, a2]) {
        let e = exact.to_f64().unwrap();
        assert!((x - e).abs() <= 1e-13 * e.abs(), "{x} vs {e}");
    }
}

#[test]
fn robot_one_m22_matches_hand_value() {
    let p = bundled_robots()[0];
    let m = p.mass_matrix(&Vector2::new(0.3, -1.1));
    assert!((m[(1, 1)] - 0.04084125).abs() <= 1e-12);
}
