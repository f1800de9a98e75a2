//! Closed-form expressions over the variables `x` and `y`.
//!
//! Grammar (EBNF), lowest precedence first:
//!
//! ```text
//! expr    = term , { ("+" | "-") , term } ;
//! term    = unary , { ("*" | "/") , unary } ;
//! unary   = "-" , unary | power ;
//! power   = atom , [ "^" , unary ] ;          (* right associative *)
//! atom    = number | "x" | "y" | "pi" | "e"
//!         | func , "(" , expr , ")"
//!         | "pow" , "(" , expr , "," , expr , ")"
//!         | "(" , expr , ")" ;
//! func    = "exp" | "ln" | "abs" | "sqrt" | "sin" | "cos" | "arctan" ;
//! number  = digits , [ "." , digits ] , [ ("e" | "E") , [ "+" | "-" ] , digits ] ;
//! ```
//!
//! `-x^2` parses as `-(x^2)`. Raising a negative base to a non-integer power
//! is a domain error; write `abs(x - d)^s` explicitly.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("parse error at offset {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("empty expression")]
    Empty,
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                Some(*offset)
            }
            ParseError::Empty => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error: {what} at ({x}, {y})")]
pub struct DomainError {
    pub what: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Abs,
    Sqrt,
    Sin,
    Cos,
    Arctan,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "arctan" => Func::Arctan,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Arctan => "arctan",
        }
    }
}

/// Syntax tree of a parsed expression. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Var(Var),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Box<Expression>),
}

impl Expression {
    pub fn parse(source: &str) -> Result<Expression, ParseError> {
        Parser::new(source)?.parse_all()
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, DomainError> {
        let fail = |what: &str| DomainError {
            what: what.to_string(),
            x,
            y,
        };
        let value = match self {
            Expression::Num(v) => *v,
            Expression::Var(Var::X) => x,
            Expression::Var(Var::Y) => y,
            Expression::Neg(inner) => -inner.eval(x, y)?,
            Expression::Binary(op, lhs, rhs) => {
                let a = lhs.eval(x, y)?;
                let b = rhs.eval(x, y)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(fail("division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => power(a, b).map_err(&fail)?,
                }
            }
            Expression::Call(func, arg) => {
                let a = arg.eval(x, y)?;
                match func {
                    Func::Exp => a.exp(),
                    Func::Ln => {
                        if a <= 0.0 {
                            return Err(fail("ln of non-positive value"));
                        }
                        a.ln()
                    }
                    Func::Abs => a.abs(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(fail("sqrt of negative value"));
                        }
                        a.sqrt()
                    }
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Arctan => a.atan(),
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(fail("non-finite result"))
        }
    }

    pub fn uses_var(&self, var: Var) -> bool {
        match self {
            Expression::Num(_) => false,
            Expression::Var(v) => *v == var,
            Expression::Neg(inner) | Expression::Call(_, inner) => inner.uses_var(var),
            Expression::Binary(_, a, b) => a.uses_var(var) || b.uses_var(var),
        }
    }

    /// Replaces every occurrence of `var` by the constant `value`.
    pub fn substitute(&self, var: Var, value: f64) -> Expression {
        match self {
            Expression::Num(v) => Expression::Num(*v),
            Expression::Var(v) if *v == var => Expression::Num(value),
            Expression::Var(v) => Expression::Var(*v),
            Expression::Neg(inner) => Expression::Neg(Box::new(inner.substitute(var, value))),
            Expression::Call(f, inner) => Expression::Call(*f, Box::new(inner.substitute(var, value))),
            Expression::Binary(op, a, b) => Expression::Binary(
                *op,
                Box::new(a.substitute(var, value)),
                Box::new(b.substitute(var, value)),
            ),
        }
    }

    /// Replaces every `x` by `cx * x` and every `y` by `cy * y`.
    pub fn scale_args(&self, cx: f64, cy: f64) -> Expression {
        match self {
            Expression::Num(v) => Expression::Num(*v),
            Expression::Var(v) => {
                let c = if *v == Var::X { cx } else { cy };
                Expression::Binary(
                    BinOp::Mul,
                    Box::new(Expression::Num(c)),
                    Box::new(Expression::Var(*v)),
                )
            }
            Expression::Neg(inner) => Expression::Neg(Box::new(inner.scale_args(cx, cy))),
            Expression::Call(f, inner) => Expression::Call(*f, Box::new(inner.scale_args(cx, cy))),
            Expression::Binary(op, a, b) => Expression::Binary(
                *op,
                Box::new(a.scale_args(cx, cy)),
                Box::new(b.scale_args(cx, cy)),
            ),
        }
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, &'static str> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err("non-integer power of negative base");
    }
    if base == 0.0 && exponent < 0.0 {
        return Err("negative power of zero");
    }
    Ok(base.powf(exponent))
}

impl FromStr for Expression {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expression::parse(s)
    }
}

// Fully parenthesized so that printing and re-parsing rebuilds the same tree
// (negative literals come back as a negation of the magnitude, same value).
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(-{})", -v)
            }
            Expression::Num(v) => write!(f, "{v}"),
            Expression::Var(Var::X) => f.write_str("x"),
            Expression::Var(Var::Y) => f.write_str("y"),
            Expression::Neg(inner) => write!(f, "(-{inner})"),
            Expression::Binary(BinOp::Pow, a, b) => write!(f, "pow({a}, {b})"),
            Expression::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => unreachable!(),
                };
                write!(f, "({a} {sym} {b})")
            }
            Expression::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

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
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        if ch.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match ch {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent part only if followed by digits, so `2e` stays an error
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    offset: start,
                    expected: "number".into(),
                    found: format!("`{text}`"),
                })?;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let found = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: "token".into(),
                    found: format!("`{found}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Parser, ParseError> {
        if src.trim().is_empty() {
            return Err(ParseError::Empty);
        }
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            expected: expected.to_string(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn parse_all(mut self) -> Result<Expression, ParseError> {
        let e = self.expr()?;
        if *self.peek() != Tok::End {
            return Err(self.error("operator or end of input"));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expression::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expression::Binary(
                BinOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expression::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "x" => Ok(Expression::Var(Var::X)),
                    "y" => Ok(Expression::Var(Var::Y)),
                    "pi" => Ok(Expression::Num(std::f64::consts::PI)),
                    "e" => Ok(Expression::Num(std::f64::consts::E)),
                    "pow" => {
                        self.expect(Tok::LParen, "`(`")?;
                        let a = self.expr()?;
                        self.expect(Tok::Comma, "`,`")?;
                        let b = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Expression::Binary(BinOp::Pow, Box::new(a), Box::new(b)))
                    }
                    other => match Func::from_name(other) {
                        Some(func) => {
                            self.expect(Tok::LParen, "`(`")?;
                            let arg = self.expr()?;
                            self.expect(Tok::RParen, "`)`")?;
                            Ok(Expression::Call(func, Box::new(arg)))
                        }
                        None => Err(ParseError::UnknownIdentifier {
                            name: other.to_string(),
                            offset,
                        }),
                    },
                }
            }
            _ => Err(self.error("operand")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Arity {
    One,
    Two,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("a one-variable field cannot reference `y`")]
    UsesY,
}

/// A function of one or two real variables backed by an [`Expression`].
///
/// One-variable fields ignore the second coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    expr: Expression,
    arity: Arity,
    source: String,
}

impl ScalarField {
    pub fn parse(source: &str, arity: Arity) -> Result<ScalarField, FieldError> {
        let expr = Expression::parse(source)?;
        ScalarField::from_expression(expr, arity, source.trim().to_string())
    }

    pub fn parse2(source: &str) -> Result<ScalarField, FieldError> {
        ScalarField::parse(source, Arity::Two)
    }

    pub fn parse1(source: &str) -> Result<ScalarField, FieldError> {
        ScalarField::parse(source, Arity::One)
    }

    pub fn from_expression(
        expr: Expression,
        arity: Arity,
        source: String,
    ) -> Result<ScalarField, FieldError> {
        if arity == Arity::One && expr.uses_var(Var::Y) {
            return Err(FieldError::UsesY);
        }
        Ok(ScalarField {
            expr,
            arity,
            source,
        })
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    /// Source text, used as the field's identifier in reports.
    pub fn source(&self) -> &str {
        &self.source
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> Result<f64, DomainError> {
        match self.arity {
            Arity::One => self.expr.eval(x, 0.0),
            Arity::Two => self.expr.eval(x, y),
        }
    }

    #[inline]
    pub fn eval1(&self, x: f64) -> Result<f64, DomainError> {
        self.expr.eval(x, 0.0)
    }

    /// The one-variable section `x ↦ f(x, y0)`.
    pub fn section_at_y(&self, y0: f64) -> ScalarField {
        ScalarField {
            expr: self.expr.substitute(Var::Y, y0),
            arity: Arity::One,
            source: format!("({})[y = {y0}]", self.source),
        }
    }

    /// The field `p ↦ f(c·p)`.
    pub fn rescaled(&self, c: f64) -> ScalarField {
        ScalarField {
            expr: self.expr.scale_args(c, c),
            arity: self.arity,
            source: format!("({})[scaled by {c}]", self.source),
        }
    }
}
