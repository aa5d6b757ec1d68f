use std::fmt;

/// Byte range `[start, end)` into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Log,
    Abs,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Exp, Func::Sqrt, Func::Log, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Named constants. Their values are supplied at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    Lambda,
    Phi,
}

impl Constant {
    pub const ALL: [Constant; 3] = [Constant::Pi, Constant::Lambda, Constant::Phi];

    pub fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::Lambda => "lambda",
            Constant::Phi => "phi",
        }
    }

    pub fn from_name(name: &str) -> Option<Constant> {
        Constant::ALL.iter().copied().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Number(f64),
    Var(String),
    Const(Constant),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Build a node with an empty span; handy for constructing trees in code.
    pub fn bare(kind: ExprKind) -> Self {
        Expr { kind, span: Span::default() }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Number(_) | ExprKind::Var(_) | ExprKind::Const(_) => vec![],
            ExprKind::Neg(e) | ExprKind::Call(_, e) => vec![e],
            ExprKind::Binary(_, a, b) => vec![a, b],
        }
    }

    /// Structural equality ignoring spans. Numbers compare bitwise.
    pub fn same_shape(&self, other: &Expr) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Number(a), ExprKind::Number(b)) => a.to_bits() == b.to_bits(),
            (ExprKind::Var(a), ExprKind::Var(b)) => a == b,
            (ExprKind::Const(a), ExprKind::Const(b)) => a == b,
            (ExprKind::Neg(a), ExprKind::Neg(b)) => a.same_shape(b),
            (ExprKind::Call(f, a), ExprKind::Call(g, b)) => f == g && a.same_shape(b),
            (ExprKind::Binary(o, a1, b1), ExprKind::Binary(p, a2, b2)) => {
                o == p && a1.same_shape(a2) && b1.same_shape(b2)
            }
            _ => false,
        }
    }

    /// True when every child span lies inside its parent's span.
    pub fn spans_nest(&self) -> bool {
        self.children()
            .iter()
            .all(|c| self.span.contains(&c.span) && c.spans_nest())
    }

    /// Variable names referenced by the expression, sorted and deduplicated.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        if let ExprKind::Var(v) = &self.kind {
            out.push(v.clone());
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    pub fn constants(&self) -> Vec<Constant> {
        let mut out = Vec::new();
        self.collect_consts(&mut out);
        out.dedup();
        out
    }

    fn collect_consts(&self, out: &mut Vec<Constant>) {
        if let ExprKind::Const(c) = &self.kind {
            if !out.contains(c) {
                out.push(*c);
            }
        }
        for c in self.children() {
            c.collect_consts(out);
        }
    }
}

/// Prints a fully parenthesized form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Number(x) => {
                if x.fract() == 0.0 && x.abs() < 1e15 {
                    write!(f, "{}", *x as i64)
                } else {
                    write!(f, "{:e}", x)
                }
            }
            ExprKind::Var(v) => write!(f, "{}", v),
            ExprKind::Const(c) => write!(f, "{}", c.name()),
            ExprKind::Neg(e) => write!(f, "(-{})", e),
            ExprKind::Call(func, e) => write!(f, "{}({})", func.name(), e),
            ExprKind::Binary(op, a, b) => write!(f, "({} {} {})", a, op.symbol(), b),
        }
    }
}
