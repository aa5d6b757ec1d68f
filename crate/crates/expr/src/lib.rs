//! A small expression language for metric entries, frame components and
//! bump functions.
//!
//! ```
//! use folcoh_expr::{parse, evaluate, Constants, Env};
//! let e = parse("sin(pi*x)").unwrap();
//! let mut env = Env::new();
//! env.insert("x".into(), 0.5);
//! assert!((evaluate(&e, &env, &Constants::default()).unwrap() - 1.0).abs() < 1e-15);
//! ```

mod ast;
mod eval;
mod parse;

pub use ast::{BinOp, Constant, Expr, ExprKind, Func, Span};
pub use eval::{check_bindings, evaluate, Constants, Env};
pub use parse::parse;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: expected {}, found {found}", expected.join(" or "))]
    Syntax { pos: usize, expected: Vec<String>, found: String },
    #[error("unknown function '{name}' at bytes {}..{}", span.start, span.end)]
    UnknownFunction { name: String, span: Span },
    #[error("unbalanced parenthesis at byte {pos}")]
    UnbalancedParens { pos: usize },
    #[error("unbound name '{name}' at bytes {}..{}", span.start, span.end)]
    Unbound { name: String, span: Span },
    #[error("{func} undefined at {arg} (bytes {}..{})", span.start, span.end)]
    Domain { func: &'static str, arg: f64, span: Span },
}

/// Parse and evaluate in one step.
pub fn eval_str(src: &str, env: &Env, constants: &Constants) -> Result<f64, ExprError> {
    evaluate(&parse(src)?, env, constants)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(x: f64) -> Expr {
        Expr::bare(ExprKind::Number(x))
    }
    fn var(s: &str) -> Expr {
        Expr::bare(ExprKind::Var(s.into()))
    }
    fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::bare(ExprKind::Binary(op, Box::new(a), Box::new(b)))
    }
    fn neg(a: Expr) -> Expr {
        Expr::bare(ExprKind::Neg(Box::new(a)))
    }

    #[test]
    fn linear_shape() {
        let e = parse("2*t+1").unwrap();
        let want = bin(BinOp::Add, bin(BinOp::Mul, num(2.0), var("t")), num(1.0));
        assert!(e.same_shape(&want), "{}", e);
    }

    #[test]
    fn power_of_negated_product() {
        // unary minus binds tighter than '*', so the exponent is (-2)*t
        let e = parse("lambda^(-2*t)").unwrap();
        let lam = Expr::bare(ExprKind::Const(Constant::Lambda));
        let want = bin(BinOp::Pow, lam, bin(BinOp::Mul, neg(num(2.0)), var("t")));
        assert!(e.same_shape(&want), "{}", e);
    }

    #[test]
    fn power_binds_tighter_than_minus() {
        let e = parse("-x^2").unwrap();
        assert!(e.same_shape(&neg(bin(BinOp::Pow, var("x"), num(2.0)))));
        let e = parse("2^3^2").unwrap();
        assert!(e.same_shape(&bin(BinOp::Pow, num(2.0), bin(BinOp::Pow, num(3.0), num(2.0)))));
        let e = parse("2^-1").unwrap();
        assert!(e.same_shape(&bin(BinOp::Pow, num(2.0), neg(num(1.0)))));
    }

    #[test]
    fn missing_close_paren() {
        match parse("sin(pi*x") {
            Err(ExprError::Syntax { pos, expected, found }) => {
                assert_eq!(pos, 8);
                assert_eq!(expected, vec!["')'".to_string()]);
                assert_eq!(found, "end of input");
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn error_kinds() {
        assert!(matches!(parse(""), Err(ExprError::Syntax { pos: 0, .. })));
        assert!(matches!(parse("   "), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x)"), Err(ExprError::UnbalancedParens { pos: 1 })));
        assert!(matches!(parse(")"), Err(ExprError::UnbalancedParens { pos: 0 })));
        assert!(matches!(parse("tan(x)"), Err(ExprError::UnknownFunction { .. })));
        assert!(matches!(parse("1.e3"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("2 3"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x $ y"), Err(ExprError::Syntax { pos: 2, .. })));
    }

    #[test]
    fn evaluation_examples() {
        let mut env = Env::new();
        env.insert("x".into(), 0.5);
        let c = Constants::default();
        assert_eq!(eval_str("sin(pi*x)", &env, &c).unwrap(), 1.0);

        env.insert("t".into(), 0.0);
        let lam = (3.0 + 5f64.sqrt()) / 2.0;
        let c = Constants::default().with(Constant::Lambda, lam);
        assert_eq!(eval_str("lambda^(-2*t)", &env, &c).unwrap(), 1.0);
        assert_eq!(eval_str("lambda", &env, &c).unwrap(), lam);
    }

    #[test]
    fn evaluation_errors() {
        let env = Env::new();
        let c = Constants::default();
        assert!(matches!(eval_str("y+1", &env, &c), Err(ExprError::Unbound { .. })));
        assert!(matches!(eval_str("lambda", &env, &c), Err(ExprError::Unbound { .. })));
        match eval_str("1 + sqrt(0-4)", &env, &c) {
            Err(ExprError::Domain { func: "sqrt", span, .. }) => assert_eq!(span, Span::new(4, 13)),
            other => panic!("{:?}", other),
        }
        assert!(matches!(eval_str("log(0)", &env, &c), Err(ExprError::Domain { func: "log", .. })));
    }

    #[test]
    fn unicode_minus_and_exponents() {
        let env = Env::new();
        let c = Constants::default();
        assert_eq!(eval_str("3 \u{2212} 1.5e1", &env, &c).unwrap(), -12.0);
        assert_eq!(eval_str("2.5E-1*4", &env, &c).unwrap(), 1.0);
    }

    #[test]
    fn bindings_checked_against_coordinates() {
        let e = parse("x*y + t").unwrap();
        assert!(check_bindings(&e, &["x", "y", "t"]).is_ok());
        assert!(matches!(check_bindings(&e, &["x", "y"]), Err(ExprError::Unbound { .. })));
        assert_eq!(e.variables(), vec!["t", "x", "y"]);
    }

    #[test]
    fn spans_nest_with_parentheses() {
        let e = parse("(a + b) * -(c ^ (d))").unwrap();
        assert!(e.spans_nest());
        assert_eq!(e.span, Span::new(0, 20));
    }
}
