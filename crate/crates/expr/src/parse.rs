use crate::ast::{BinOp, Constant, Expr, ExprKind, Func, Span};
use crate::ExprError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {}", x),
            Tok::Ident(s) => format!("identifier '{}'", s),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            i += 1;
            out.push(Token { tok, span: Span::new(start, i) });
            continue;
        }
        // U+2212 MINUS SIGN
        if src[i..].starts_with('\u{2212}') {
            i += '\u{2212}'.len_utf8();
            out.push(Token { tok: Tok::Minus, span: Span::new(start, i) });
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                let frac_start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i == frac_start {
                    return Err(ExprError::Syntax {
                        pos: i,
                        expected: vec!["digit".into()],
                        found: found_at(src, i),
                    });
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                let exp_start = j;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j == exp_start {
                    return Err(ExprError::Syntax {
                        pos: j,
                        expected: vec!["exponent digits".into()],
                        found: found_at(src, j),
                    });
                }
                i = j;
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                expected: vec!["number".into()],
                found: text.to_string(),
            })?;
            out.push(Token { tok: Tok::Num(value), span: Span::new(start, i) });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                span: Span::new(start, i),
            });
            continue;
        }
        return Err(ExprError::Syntax {
            pos: start,
            expected: vec!["number".into(), "identifier".into(), "'('".into(), "'-'".into()],
            found: found_at(src, start),
        });
    }
    out.push(Token { tok: Tok::End, span: Span::new(src.len(), src.len()) });
    Ok(out)
}

fn found_at(src: &str, pos: usize) -> String {
    match src[pos..].chars().next() {
        Some(c) => format!("'{}'", c),
        None => "end of input".into(),
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ExprError {
        let t = self.peek();
        ExprError::Syntax {
            pos: t.span.start,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        }
    }

    // expr := term (("+"|"-") term)*
    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            let span = lhs.span.join(rhs.span);
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    // term := unary (("*"|"/") unary)*
    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            let span = lhs.span.join(rhs.span);
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    // unary := "-" unary | power
    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek().tok == Tok::Minus {
            let start = self.bump().span.start;
            let inner = self.unary()?;
            let span = Span::new(start, inner.span.end);
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), span));
        }
        self.power()
    }

    // power := primary ("^" unary)?   (right associative through unary -> power)
    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            let span = base.span.join(exp.span);
            return Ok(Expr::new(ExprKind::Binary(BinOp::Pow, Box::new(base), Box::new(exp)), span));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        self.depth += 1;
        if self.depth > 512 {
            return Err(self.error(&["shallower nesting"]));
        }
        let out = self.primary_inner();
        self.depth -= 1;
        out
    }

    fn primary_inner(&mut self) -> Result<Expr, ExprError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::new(ExprKind::Number(x), t.span))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek().tok == Tok::LParen {
                    let func = Func::from_name(&name).ok_or_else(|| ExprError::UnknownFunction {
                        name: name.clone(),
                        span: t.span,
                    })?;
                    self.bump();
                    let arg = self.expr()?;
                    let close = self.expect_rparen()?;
                    return Ok(Expr::new(
                        ExprKind::Call(func, Box::new(arg)),
                        Span::new(t.span.start, close.end),
                    ));
                }
                if let Some(c) = Constant::from_name(&name) {
                    return Ok(Expr::new(ExprKind::Const(c), t.span));
                }
                Ok(Expr::new(ExprKind::Var(name), t.span))
            }
            Tok::LParen => {
                self.bump();
                let mut inner = self.expr()?;
                let close = self.expect_rparen()?;
                inner.span = Span::new(t.span.start, close.end);
                Ok(inner)
            }
            Tok::RParen => Err(ExprError::UnbalancedParens { pos: t.span.start }),
            _ => Err(self.error(&["number", "identifier", "'('", "'-'"])),
        }
    }

    fn expect_rparen(&mut self) -> Result<Span, ExprError> {
        if self.peek().tok == Tok::RParen {
            Ok(self.bump().span)
        } else {
            Err(self.error(&["')'"]))
        }
    }
}

/// Parse a scalar expression.
///
/// Precedence from tightest: `^` (right associative), unary minus, `*` `/`,
/// then `+` `-`. The empty string is a syntax error.
pub fn parse(src: &str) -> Result<Expr, ExprError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, depth: 0 };
    let e = p.expr()?;
    match p.peek().tok {
        Tok::End => Ok(e),
        Tok::RParen => Err(ExprError::UnbalancedParens { pos: p.peek().span.start }),
        _ => Err(p.error(&["operator", "end of input"])),
    }
}
