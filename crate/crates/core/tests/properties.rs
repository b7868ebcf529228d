use proptest::prelude::*;

use tsd_core::lmi::{AssemblyOptions, Method, SubsystemLmis};
use tsd_core::memexpr::MembershipExpr;
use tsd_core::model::example22;

/// Fixture memberships with hand-derived `d/dx1`.
fn fixture_memberships() -> Vec<(&'static str, fn(f64) -> f64)> {
    vec![
        ("(1-cos(x1))/2", |x| x.sin() / 2.0),
        ("1-(1-cos(x1))/2", |x| -x.sin() / 2.0),
        ("sin(x1)^2", |x| (2.0 * x).sin()),
        ("1-sin(x1)^2", |x| -(2.0 * x).sin()),
        ("cos(x1)^2", |x| -(2.0 * x).sin()),
        ("1-cos(x1)^2", |x| (2.0 * x).sin()),
    ]
}

fn expr_source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u32..100_000).prop_map(|k| format!("{}", k as f64 / 1000.0)),
        Just("x1".to_string()),
        Just("x2".to_string()),
        Just("pi".to_string()),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", "/", "^"]), inner.clone())
                .prop_map(|(a, op, b)| format!("({a}){op}({b})")),
            (prop::sample::select(vec!["sin", "cos", "tan", "exp", "sqrt", "abs"]), inner.clone())
                .prop_map(|(f, a)| format!("{f}({a})")),
            inner.prop_map(|a| format!("-({a})")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn membership_time_derivative_matches_analytic(x1 in -4.0f64..4.0, x2 in -4.0f64..4.0, d1 in -3.0f64..3.0, d2 in -3.0f64..3.0) {
        for (src, dfdx1) in fixture_memberships() {
            let e = MembershipExpr::parse(src, 2).unwrap();
            let fd = e.eval_time_derivative(&[x1, x2], &[d1, d2], 1e-5).unwrap();
            let exact = dfdx1(x1) * d1;
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{src}: {fd} vs {exact}");
        }
    }

    #[test]
    fn printed_expressions_reparse_to_the_same_tree(src in expr_source(), x1 in -2.0f64..2.0, x2 in -2.0f64..2.0) {
        let a = MembershipExpr::parse(&src, 2).unwrap();
        let b = MembershipExpr::parse(&a.to_string(), 2).unwrap();
        prop_assert_eq!(a.ast(), b.ast());
        if let (Ok(va), Ok(vb)) = (a.eval(&[x1, x2]), b.eval(&[x1, x2])) {
            prop_assert!(va.to_bits() == vb.to_bits() || (va.is_nan() && vb.is_nan()));
        }
    }

    #[test]
    fn relaxed_instances_are_symmetric_and_affine(
        seed in proptest::collection::vec(-10.0f64..10.0, 64),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        sub in 0usize..2,
        shared in any::<bool>(),
    ) {
        let net = example22();
        let method = if shared { Method::Corollary1 } else { Method::Theorem1 };
        let ctx = SubsystemLmis::new(&net, sub, method, &AssemblyOptions::default()).unwrap();
        let n = ctx.catalog.len();
        let y1: Vec<f64> = (0..n).map(|p| seed[p % seed.len()]).collect();
        let y2: Vec<f64> = (0..n).map(|p| seed[(7 * p + 3) % seed.len()]).collect();
        let mix: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| alpha * a + beta * b).collect();
        let zero = vec![0.0; n];
        for inst in ctx.all_relaxed().unwrap() {
            let m = inst.eval(&mix);
            prop_assert_eq!(&m, &m.transpose());
            let expected = inst.eval(&y1) * alpha + inst.eval(&y2) * beta + inst.eval(&zero) * (1.0 - alpha - beta);
            let scale = m.abs().max().max(expected.abs().max()).max(1.0);
            prop_assert!((m - expected).abs().max() <= 1e-12 * scale * 64.0, "{}", inst.label);
        }
    }
}
