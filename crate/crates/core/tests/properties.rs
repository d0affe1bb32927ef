//! Property tests for the algebraic invariants of the kernels.

use proptest::prelude::*;

use stoflow_core::*;

fn finite_coord() -> impl Strategy<Value = f64> {
    prop_oneof![
        -3.0f64..3.0,
        Just(0.0),
        Just(1.0),
        Just(-1.0),
        Just(0.5),
    ]
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(finite_coord(), n)
}

fn constant_form(n: usize, p: usize) -> impl Strategy<Value = TimeForm> {
    let entries = la::binomial(n, p);
    prop::collection::vec(finite_coord(), entries)
        .prop_map(move |table| TimeForm::constant(n, p, table).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    /// Swapping two argument vectors flips the sign of the evaluation
    /// exactly, not just approximately.
    #[test]
    fn evaluation_is_exactly_alternating(
        table in prop::collection::vec(finite_coord(), 3),
        x in vector(3),
        v1 in vector(3),
        v2 in vector(3),
    ) {
        let theta = TimeForm::constant(3, 2, table).unwrap();
        let plain = evaluate_form(&theta, 0.0, &x, &[&v1, &v2]).unwrap();
        let swapped = evaluate_form(&theta, 0.0, &x, &[&v2, &v1]).unwrap();
        prop_assert_eq!(plain, -swapped);
    }

    #[test]
    fn top_degree_evaluation_is_exactly_alternating(
        c in finite_coord(),
        x in vector(3),
        vs in prop::collection::vec(vector(3), 3),
    ) {
        let theta = TimeForm::constant(3, 3, vec![c]).unwrap();
        let plain = evaluate_form(&theta, 0.0, &x, &[&vs[0], &vs[1], &vs[2]]).unwrap();
        for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let mut order: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
            order.swap(a, b);
            let swapped = evaluate_form(&theta, 0.0, &x, &order).unwrap();
            prop_assert_eq!(plain, -swapped, "swap {} {}", a, b);
        }
    }

    /// Evaluation is linear in each argument slot.
    #[test]
    fn evaluation_is_multilinear(
        theta in constant_form(3, 2),
        x in vector(3),
        v in vector(3),
        w in vector(3),
        u in vector(3),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let combo: Vec<f64> = v.iter().zip(&w).map(|(p, q)| a * p + b * q).collect();
        let lhs = evaluate_form(&theta, 0.0, &x, &[&combo, &u]).unwrap();
        let rhs = a * evaluate_form(&theta, 0.0, &x, &[&v, &u]).unwrap()
            + b * evaluate_form(&theta, 0.0, &x, &[&w, &u]).unwrap();
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{} vs {}", lhs, rhs);
    }

    /// d(d(theta)) vanishes for smooth coefficient fields.
    #[test]
    fn exterior_derivative_squares_to_zero(
        coeffs in prop::collection::vec(-2.0f64..2.0, 6),
        x in vector(3),
    ) {
        // polynomial coefficients with nonconstant mixed terms
        let theta = TimeForm::new(3, 1, move |_, p, idx| {
            let k = idx[0];
            coeffs[k] * p[(k + 1) % 3] + coeffs[k + 3] * p[k] * p[(k + 2) % 3]
        })
        .unwrap();
        let dd = exterior_derivative(&exterior_derivative(&theta).unwrap()).unwrap();
        let basis: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let v = evaluate_form(&dd, 0.0, &x, &[&basis[0], &basis[1], &basis[2]]).unwrap();
        prop_assert!(v.abs() <= 1e-6, "d^2 residual {}", v);
    }

    /// Pulling back through the identity map is evaluation.
    #[test]
    fn identity_pullback_is_evaluation(
        theta in constant_form(2, 1),
        x in vector(2),
        v in vector(2),
    ) {
        let eye = la::identity(2);
        let pulled = pullback_value(&x, &eye, &theta, 0.0, &[&v]).unwrap();
        let direct = evaluate_form(&theta, 0.0, &x, &[&v]).unwrap();
        prop_assert_eq!(pulled, direct);
    }

    /// Left-point integral plus half the covariation is the midpoint
    /// integral, on every grid point.
    #[test]
    fn conversion_identity_holds_on_random_paths(
        seed in any::<u64>(),
        scale in 0.1f64..3.0,
    ) {
        let path = sample_brownian(1, 1.0, 128, seed).unwrap();
        let b = RealPath::driver(&path, 0);
        let y = RealPath::new(
            b.times().to_vec(),
            b.values().iter().map(|v| (scale * v).cos()).collect(),
        )
        .unwrap();
        let s = stratonovich_integral(&y, &b).unwrap();
        let i = ito_integral(&y, &b).unwrap();
        let q = quadratic_covariation(&y, &b).unwrap();
        for j in 0..=y.steps() {
            let lhs = i.value(j) + 0.5 * q.value(j);
            prop_assert!((lhs - s.value(j)).abs() <= 1e-12);
        }
    }

    /// Bridge refinement keeps every parent value bit-exactly.
    #[test]
    fn refinement_preserves_parent_values(
        seed in any::<u64>(),
        steps_pow in 3u32..7,
    ) {
        let steps = 1usize << steps_pow;
        let path = sample_brownian(2, 1.0, steps, seed).unwrap();
        let refined = refine_brownian(&path);
        for j in 0..=steps {
            for k in 0..2 {
                prop_assert_eq!(refined.value(2 * j, k), path.value(j, k));
            }
        }
    }
}
