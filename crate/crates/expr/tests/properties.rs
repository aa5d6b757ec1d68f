use folcoh_expr::{evaluate, parse, BinOp, Constant, Constants, Env, Expr, ExprKind, Func};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000).prop_map(|n| Expr::bare(ExprKind::Number(n as f64))),
        (0.0f64..1e6).prop_map(|x| Expr::bare(ExprKind::Number(x))),
        (1e-300f64..1e-3).prop_map(|x| Expr::bare(ExprKind::Number(x))),
        prop::sample::select(vec!["x", "y", "t", "s_1"]).prop_map(|v| Expr::bare(ExprKind::Var(v.into()))),
        prop::sample::select(Constant::ALL.to_vec()).prop_map(|c| Expr::bare(ExprKind::Const(c))),
    ]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::bare(ExprKind::Neg(Box::new(e)))),
            (prop::sample::select(Func::ALL.to_vec()), inner.clone())
                .prop_map(|(f, e)| Expr::bare(ExprKind::Call(f, Box::new(e)))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| Expr::bare(ExprKind::Binary(op, Box::new(a), Box::new(b)))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_then_parse_is_identity(e in tree()) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert!(back.same_shape(&e), "{} reparsed as {}", text, back);
        prop_assert!(back.spans_nest());
    }

    #[test]
    fn binary_ops_match_host(a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let env = Env::new();
        let c = Constants::default();
        for (sym, host) in [('+', a + b), ('-', a - b), ('*', a * b), ('/', a / b)] {
            let src = format!("{:e} {} {:e}", a, sym, b);
            let got = evaluate(&parse(&src).unwrap(), &env, &c).unwrap();
            let ulps = (got.to_bits() as i64 - host.to_bits() as i64).abs();
            prop_assert!(ulps <= 1, "{} gave {} vs {}", src, got, host);
        }
    }

    #[test]
    fn evaluation_is_deterministic(e in tree(), x in -2.0f64..2.0) {
        let mut env = Env::new();
        for v in ["x", "y", "t", "s_1"] {
            env.insert(v.into(), x);
        }
        let c = Constants::default().with(Constant::Lambda, 2.5).with(Constant::Phi, 1.5);
        let a = evaluate(&e, &env, &c);
        let b = evaluate(&e, &env, &c);
        match (a, b) {
            (Ok(p), Ok(q)) => prop_assert!(p.to_bits() == q.to_bits() || (p.is_nan() && q.is_nan())),
            (Err(p), Err(q)) => prop_assert_eq!(p, q),
            _ => prop_assert!(false),
        }
    }
}

#[test]
fn lambda_matches_power_iteration_oracle() {
    // dominant eigenvalue of [[2,1],[1,1]] by power iteration
    let (mut u, mut v) = (1.0f64, 0.0f64);
    let mut rq = 0.0;
    for _ in 0..200 {
        let (a, b) = (2.0 * u + v, u + v);
        rq = (a * u + b * v) / (u * u + v * v);
        let n = (a * a + b * b).sqrt();
        u = a / n;
        v = b / n;
    }
    let lam = evaluate(&parse("(3 + sqrt(5))/2").unwrap(), &Env::new(), &Constants::default()).unwrap();
    assert!((lam - rq).abs() < 1e-14);
    let c = Constants::default().with(Constant::Lambda, lam);
    let v = evaluate(&parse("lambda").unwrap(), &Env::new(), &c).unwrap();
    assert!((v - 2.618_033_988_749_895).abs() < 1e-15);
}
