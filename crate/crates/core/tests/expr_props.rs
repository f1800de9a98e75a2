use hrigid::expr::{Arity, Expression, ScalarField, Var};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        (-5.0f64..5.0).prop_map(|v| format!("({v})")),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} * {b}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("exp({a} / 10)")),
            inner.clone().prop_map(|a| format!("abs({a})^1.5")),
            inner.prop_map(|a| format!("-{a}")),
        ]
    })
}

fn same(a: Result<f64, impl std::fmt::Debug>, b: Result<f64, impl std::fmt::Debug>) -> bool {
    match (a, b) {
        (Ok(a), Ok(b)) => a == b || (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #[test]
    fn display_reparses_to_same_values(src in expr(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let e = Expression::parse(&src).unwrap();
        let back = Expression::parse(&e.to_string()).unwrap();
        prop_assert!(same(e.eval(x, y), back.eval(x, y)));
    }

    #[test]
    fn rescaling_matches_scaled_arguments(src in expr(), c in 0.1f64..10.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let f = ScalarField::parse(&src, Arity::Two).unwrap();
        prop_assert!(same(f.rescaled(c).eval(x, y), f.eval(c * x, c * y)));
    }

    #[test]
    fn substitution_fixes_variable(src in expr(), y0 in -2.0f64..2.0, x in -2.0f64..2.0) {
        let e = Expression::parse(&src).unwrap();
        let s = e.substitute(Var::Y, y0);
        prop_assert!(!s.uses_var(Var::Y));
        prop_assert!(same(s.eval(x, 123.0), e.eval(x, y0)));
    }

    #[test]
    fn parser_never_panics(src in "[xy0-9+*/^() .a-z-]{0,24}") {
        let _ = Expression::parse(&src);
    }
}
