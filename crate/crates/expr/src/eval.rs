use std::collections::BTreeMap;

use crate::ast::{Constant, Expr, ExprKind, Func};
use crate::ExprError;

/// Values for the named constants. `pi` is always available; `lambda` and
/// `phi` are injected per case.
#[derive(Debug, Clone, PartialEq)]
pub struct Constants {
    values: BTreeMap<&'static str, f64>,
}

impl Default for Constants {
    fn default() -> Self {
        let mut values = BTreeMap::new();
        values.insert(Constant::Pi.name(), std::f64::consts::PI);
        Constants { values }
    }
}

impl Constants {
    pub fn with(mut self, c: Constant, value: f64) -> Self {
        self.values.insert(c.name(), value);
        self
    }

    pub fn get(&self, c: Constant) -> Option<f64> {
        self.values.get(c.name()).copied()
    }
}

pub type Env = BTreeMap<String, f64>;

pub fn evaluate(expr: &Expr, env: &Env, constants: &Constants) -> Result<f64, ExprError> {
    match &expr.kind {
        ExprKind::Number(x) => Ok(*x),
        ExprKind::Var(name) => env.get(name).copied().ok_or_else(|| ExprError::Unbound {
            name: name.clone(),
            span: expr.span,
        }),
        ExprKind::Const(c) => constants.get(*c).ok_or_else(|| ExprError::Unbound {
            name: c.name().to_string(),
            span: expr.span,
        }),
        ExprKind::Neg(e) => Ok(-evaluate(e, env, constants)?),
        ExprKind::Binary(op, a, b) => {
            let x = evaluate(a, env, constants)?;
            let y = evaluate(b, env, constants)?;
            Ok(op.apply(x, y))
        }
        ExprKind::Call(func, arg) => {
            let x = evaluate(arg, env, constants)?;
            match func {
                Func::Sin => Ok(x.sin()),
                Func::Cos => Ok(x.cos()),
                Func::Exp => Ok(x.exp()),
                Func::Abs => Ok(x.abs()),
                Func::Sqrt if x < 0.0 => Err(ExprError::Domain { func: "sqrt", arg: x, span: expr.span }),
                Func::Sqrt => Ok(x.sqrt()),
                Func::Log if x <= 0.0 => Err(ExprError::Domain { func: "log", arg: x, span: expr.span }),
                Func::Log => Ok(x.ln()),
            }
        }
    }
}

/// Fails on the first variable that is not one of `coords`.
pub fn check_bindings(expr: &Expr, coords: &[&str]) -> Result<(), ExprError> {
    fn walk(e: &Expr, coords: &[&str]) -> Result<(), ExprError> {
        if let ExprKind::Var(v) = &e.kind {
            if !coords.contains(&v.as_str()) {
                return Err(ExprError::Unbound { name: v.clone(), span: e.span });
            }
        }
        for c in e.children() {
            walk(c, coords)?;
        }
        Ok(())
    }
    walk(expr, coords)
}
