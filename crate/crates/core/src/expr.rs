//! Formulas for expression mechanisms: identifiers, the noise symbol `eps`,
//! `+ - * /`, unary minus, parentheses and the functions `exp`, `tanh`,
//! `sin`, `sigmoid`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {message}")]
pub struct ExprError {
    /// 1-based character column inside the formula.
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Tanh,
    Sin,
    Sigmoid,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        match s {
            "exp" => Some(Func::Exp),
            "tanh" => Some(Func::Tanh),
            "sin" => Some(Func::Sin),
            "sigmoid" => Some(Func::Sigmoid),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Sin => "sin",
            Func::Sigmoid => "sigmoid",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => libm::exp(x),
            Func::Tanh => libm::tanh(x),
            Func::Sin => libm::sin(x),
            Func::Sigmoid => sigmoid(x),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Eps,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            Tok::End => Ok(e),
            _ => Err(p.error("expected operator or end of formula")),
        }
    }

    /// Identifiers referenced by the formula, excluding `eps`.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                out.insert(v.clone());
            }
        });
        out
    }

    pub fn uses_eps(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, Expr::Eps));
        found
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Neg(a) | Expr::Call(_, a) => a.visit(f),
            Expr::Bin(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// The noise enters additively: either `eps` is absent (and is added
    /// implicitly) or the formula is `f + eps` / `eps + f` with `eps` absent
    /// from `f`.
    pub fn is_additive(&self) -> bool {
        if !self.uses_eps() {
            return true;
        }
        match self {
            Expr::Bin(BinOp::Add, a, b) => {
                (matches!(**a, Expr::Eps) && !b.uses_eps())
                    || (matches!(**b, Expr::Eps) && !a.uses_eps())
            }
            _ => false,
        }
    }

    /// Resolves identifiers to slots for fast evaluation.
    pub fn compile(&self, resolve: &impl Fn(&str) -> Option<usize>) -> Result<Compiled, String> {
        Ok(match self {
            Expr::Num(v) => Compiled::Num(*v),
            Expr::Var(name) => Compiled::Slot(resolve(name).ok_or_else(|| name.clone())?),
            Expr::Eps => Compiled::Eps,
            Expr::Neg(a) => Compiled::Neg(Box::new(a.compile(resolve)?)),
            Expr::Bin(op, a, b) => Compiled::Bin(
                *op,
                Box::new(a.compile(resolve)?),
                Box::new(b.compile(resolve)?),
            ),
            Expr::Call(f, a) => Compiled::Call(*f, Box::new(a.compile(resolve)?)),
        })
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, right_operand: bool) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Eps => f.write_str("eps"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                match **a {
                    Expr::Bin(..) => {
                        f.write_str("(")?;
                        a.fmt_prec(f, 0, false)?;
                        f.write_str(")")
                    }
                    _ => a.fmt_prec(f, 3, false),
                }
            }
            Expr::Bin(op, a, b) => {
                let prec = op.precedence();
                let wrap = prec < parent || (prec == parent && right_operand);
                if wrap {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, prec, false)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_prec(f, prec, true)?;
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 0, false)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

/// Slot-resolved formula.
#[derive(Debug, Clone, PartialEq)]
pub enum Compiled {
    Num(f64),
    Slot(usize),
    Eps,
    Neg(Box<Compiled>),
    Bin(BinOp, Box<Compiled>, Box<Compiled>),
    Call(Func, Box<Compiled>),
}

impl Compiled {
    pub fn eval(&self, slot: &impl Fn(usize) -> f64, eps: f64) -> f64 {
        match self {
            Compiled::Num(v) => *v,
            Compiled::Slot(i) => slot(*i),
            Compiled::Eps => eps,
            Compiled::Neg(a) => -a.eval(slot, eps),
            Compiled::Bin(op, a, b) => {
                let (x, y) = (a.eval(slot, eps), b.eval(slot, eps));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                }
            }
            Compiled::Call(func, a) => func.apply(a.eval(slot, eps)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| ExprError {
                column: col,
                message: format!("invalid number `{text}`"),
            })?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else if c == '(' {
            out.push((Tok::LParen, col));
            i += 1;
        } else if c == ')' {
            out.push((Tok::RParen, col));
            i += 1;
        } else {
            return Err(ExprError {
                column: col,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: &str) -> ExprError {
        ExprError {
            column: self.tokens[self.pos].1,
            message: message.to_string(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.bump();
                    if *self.peek() != Tok::LParen {
                        return Err(self.error(&format!("expected `(` after `{name}`")));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                self.bump();
                Ok(if name == "eps" {
                    Expr::Eps
                } else {
                    Expr::Var(name)
                })
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            _ => Err(self.error("expected number, identifier, function or `(`")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.error("expected `)`"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(src: &str, vars: &[(&str, f64)], eps: f64) -> f64 {
        let e = Expr::parse(src).unwrap();
        let c = e
            .compile(&|n| vars.iter().position(|(v, _)| *v == n))
            .unwrap();
        c.eval(&|i| vars[i].1, eps)
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(eval("1 + 2 * 3", &[], 0.0), 7.0);
        assert_eq!(eval("(1 + 2) * 3", &[], 0.0), 9.0);
        assert_eq!(eval("-A * 2", &[("A", 3.0)], 0.0), -6.0);
        assert_eq!(eval("8 / 4 / 2", &[], 0.0), 1.0);
        assert_eq!(eval("10 - 4 - 3", &[], 0.0), 3.0);
        assert_eq!(eval("tanh(0) + eps", &[], 0.25), 0.25);
        assert!((eval("sigmoid(0)", &[], 0.0) - 0.5).abs() < 1e-15);
        assert!((eval("exp(1)", &[], 0.0) - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(eval("2.5e1", &[], 0.0), 25.0);
    }

    #[test]
    fn additivity() {
        assert!(Expr::parse("tanh(2 * A)").unwrap().is_additive());
        assert!(Expr::parse("tanh(2 * A) + eps").unwrap().is_additive());
        assert!(Expr::parse("eps + A").unwrap().is_additive());
        assert!(!Expr::parse("A * eps").unwrap().is_additive());
        assert!(!Expr::parse("exp(eps) + A").unwrap().is_additive());
    }

    #[test]
    fn variables_exclude_eps() {
        let e = Expr::parse("A * D + sin(Q) + eps").unwrap();
        assert_eq!(
            e.variables().into_iter().collect::<Vec<_>>(),
            ["A", "D", "Q"]
        );
    }

    #[test]
    fn errors_carry_columns() {
        assert_eq!(Expr::parse("1 +").unwrap_err().column, 4);
        assert_eq!(Expr::parse("1 $ 2").unwrap_err().column, 3);
        assert_eq!(Expr::parse("tanh 2").unwrap_err().column, 6);
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("").is_err());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|v| Expr::Num(v as f64 / 8.0)),
            prop_oneof![Just("A"), Just("B"), Just("Q")].prop_map(|s| Expr::Var(s.to_string())),
            Just(Expr::Eps),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone(), 0..4u8).prop_map(|(a, b, op)| {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][op as usize];
                    Expr::Bin(op, Box::new(a), Box::new(b))
                }),
                (inner, 0..4u8).prop_map(|(a, f)| {
                    let f = [Func::Exp, Func::Tanh, Func::Sin, Func::Sigmoid][f as usize];
                    Expr::Call(f, Box::new(a))
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_round_trips(e in arb_expr()) {
            let printed = e.to_string();
            prop_assert_eq!(Expr::parse(&printed).unwrap(), e);
        }
    }
}
