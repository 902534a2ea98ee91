//! Scalar field expressions over the macro variable `x`, the meso variable `y`
//! and the micro variable `z`.
//!
//! Grammar (standard infix, case-sensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'pi' | var | func '(' args ')' | '(' expr ')'
//! var     := ('x' | 'y' | 'z') digits
//! func    := sin | cos | exp | sqrt | abs | min | max
//! ```

use std::fmt;

use thiserror::Error;

/// The three scale variables a field may depend on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scale {
    X,
    Y,
    Z,
}

impl Scale {
    fn letter(self) -> char {
        match self {
            Scale::X => 'x',
            Scale::Y => 'y',
            Scale::Z => 'z',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Abstract syntax tree of a field expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    /// Variable of the given scale; the index is zero-based.
    Var(Scale, usize),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier '{name}' at position {position}")]
    UnknownIdentifier { position: usize, name: String },
    #[error("variable index exceeds dimension: '{name}' at position {position} (dimension {dimension})")]
    IndexOutOfRange {
        position: usize,
        name: String,
        dimension: usize,
    },
    #[error("empty expression")]
    Empty,
    #[error("expression '{expr}' evaluated to a non-finite value ({value}) at x={x:?}, y={y:?}, z={z:?}")]
    NonFinite {
        expr: String,
        value: f64,
        x: Vec<f64>,
        y: Vec<f64>,
        z: Vec<f64>,
    },
}

/// Parses `text` as an expression whose variables have indices in `1..=dimension`.
pub fn parse(text: &str, dimension: usize) -> Result<Expr, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Empty);
    }
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        dimension,
        end: text.chars().count() + 1,
    };
    let expr = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(ExprError::Syntax {
            position: tok.position,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    Ok(expr)
}

#[derive(Clone, Debug, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier '{s}'"),
            TokenKind::Op(c) => format!("operator '{c}'"),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
            TokenKind::Comma => "','".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokenKind,
    /// 1-based character position.
    position: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let position = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
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
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let literal: String = chars[start..i].iter().collect();
            let value = literal.parse::<f64>().map_err(|_| ExprError::Syntax {
                position,
                message: format!("malformed number '{literal}'"),
            })?;
            tokens.push(Token {
                kind: TokenKind::Number(value),
                position,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(chars[start..i].iter().collect()),
                position,
            });
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            ',' => TokenKind::Comma,
            _ => {
                return Err(ExprError::Syntax {
                    position,
                    message: format!("unexpected character '{c}'"),
                })
            }
        };
        tokens.push(Token { kind, position });
        i += 1;
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dimension: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn position(&self) -> usize {
        self.peek().map_or(self.end, |t| t.position)
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), ExprError> {
        let position = self.position();
        match self.next() {
            Some(tok) if tok.kind == kind => Ok(()),
            Some(tok) => Err(ExprError::Syntax {
                position,
                message: format!("expected {}, found {}", kind.describe(), tok.kind.describe()),
            }),
            None => Err(ExprError::Syntax {
                position,
                message: format!("expected {}, found end of input", kind.describe()),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if op == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if op == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            // right-associative: the exponent may itself be a power
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let position = self.position();
        let Some(tok) = self.next() else {
            return Err(ExprError::Syntax {
                position,
                message: "unexpected end of input".into(),
            });
        };
        match tok.kind {
            TokenKind::Number(v) => Ok(Expr::Num(v)),
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => self.identifier(name, tok.position),
            other => Err(ExprError::Syntax {
                position: tok.position,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn identifier(&mut self, name: String, position: usize) -> Result<Expr, ExprError> {
        if name == "pi" {
            return Ok(Expr::Pi);
        }
        if let Some(func) = Func::from_name(&name) {
            self.expect(TokenKind::LParen)?;
            let mut args = vec![self.expr()?];
            while matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                self.pos += 1;
                args.push(self.expr()?);
            }
            let close = self.position();
            self.expect(TokenKind::RParen)?;
            if args.len() != func.arity() {
                return Err(ExprError::Syntax {
                    position: close,
                    message: format!(
                        "{} expects {} argument(s), got {}",
                        func.name(),
                        func.arity(),
                        args.len()
                    ),
                });
            }
            return Ok(Expr::Call(func, args));
        }
        let mut chars = name.chars();
        let scale = match chars.next() {
            Some('x') => Some(Scale::X),
            Some('y') => Some(Scale::Y),
            Some('z') => Some(Scale::Z),
            _ => None,
        };
        let digits = chars.as_str();
        if let Some(scale) = scale {
            if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.dimension {
                    return Err(ExprError::IndexOutOfRange {
                        position,
                        name,
                        dimension: self.dimension,
                    });
                }
                return Ok(Expr::Var(scale, index - 1));
            }
        }
        Err(ExprError::UnknownIdentifier { position, name })
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Evaluates the tree with IEEE double semantics. Missing bindings read as NaN.
    pub fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(scale, i) => {
                let vals = match scale {
                    Scale::X => x,
                    Scale::Y => y,
                    Scale::Z => z,
                };
                vals.get(*i).copied().unwrap_or(f64::NAN)
            }
            Expr::Neg(e) => -e.eval(x, y, z),
            Expr::Binary(op, a, b) => {
                let a = a.eval(x, y, z);
                let b = b.eval(x, y, z);
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a / b,
                    BinaryOp::Pow => pow(a, b),
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(x, y, z);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                    Func::Min => {
                        let b = args[1].eval(x, y, z);
                        if a.is_nan() || b.is_nan() {
                            f64::NAN
                        } else {
                            a.min(b)
                        }
                    }
                    Func::Max => {
                        let b = args[1].eval(x, y, z);
                        if a.is_nan() || b.is_nan() {
                            f64::NAN
                        } else {
                            a.max(b)
                        }
                    }
                }
            }
        }
    }

    /// Like [`Expr::eval`] but reports NaN/Inf results as an error.
    pub fn eval_finite(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64, ExprError> {
        let value = self.eval(x, y, z);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(ExprError::NonFinite {
                expr: self.to_string(),
                value,
                x: x.to_vec(),
                y: y.to_vec(),
                z: z.to_vec(),
            })
        }
    }

    /// Whether any variable of `scale` occurs in the tree.
    pub fn uses(&self, scale: Scale) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Var(s, _) => *s == scale,
            Expr::Neg(e) => e.uses(scale),
            Expr::Binary(_, a, b) => a.uses(scale) || b.uses(scale),
            Expr::Call(_, args) => args.iter().any(|a| a.uses(scale)),
        }
    }

    /// Largest zero-based variable index used, if any.
    pub fn max_index(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Pi => None,
            Expr::Var(_, i) => Some(*i),
            Expr::Neg(e) => e.max_index(),
            Expr::Binary(_, a, b) => a.max_index().max(b.max_index()),
            Expr::Call(_, args) => args.iter().filter_map(Expr::max_index).max(),
        }
    }

    /// Replaces every variable of scale `from` with the same-index variable of scale `to`.
    pub fn rename(&self, from: Scale, to: Scale) -> Expr {
        match self {
            Expr::Var(s, i) if *s == from => Expr::Var(to, *i),
            Expr::Num(_) | Expr::Pi | Expr::Var(..) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.rename(from, to))),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.rename(from, to), b.rename(from, to)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.rename(from, to)).collect()),
        }
    }

    /// Replaces the variables of `scale` by the given values.
    pub fn substitute(&self, scale: Scale, values: &[f64]) -> Expr {
        match self {
            Expr::Var(s, i) if *s == scale => Expr::Num(values.get(*i).copied().unwrap_or(f64::NAN)),
            Expr::Num(_) | Expr::Pi | Expr::Var(..) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(scale, values))),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(scale, values), b.substitute(scale, values)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.substitute(scale, values)).collect()),
        }
    }

    /// Constant value when the tree contains no variables.
    pub fn constant_value(&self) -> Option<f64> {
        if self.uses(Scale::X) || self.uses(Scale::Y) || self.uses(Scale::Z) {
            None
        } else {
            Some(self.eval(&[], &[], &[]))
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// Fully parenthesized rendering. Reparsing gives a tree with the same values;
/// negative literals come back as `0 - v`, so parsed trees are fixed points.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(0-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Pi => write!(f, "pi"),
            Expr::Var(s, i) => write!(f, "{}{}", s.letter(), i + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => '+',
                    BinaryOp::Sub => '-',
                    BinaryOp::Mul => '*',
                    BinaryOp::Div => '/',
                    BinaryOp::Pow => '^',
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    #[test]
    fn parses_sine_of_scaled_micro_variable() {
        let e = parse("2 + sin(2*pi*z1)", 1).unwrap();
        let expected = Expr::binary(
            BinaryOp::Add,
            num(2.0),
            Expr::Call(
                Func::Sin,
                vec![Expr::binary(
                    BinaryOp::Mul,
                    Expr::binary(BinaryOp::Mul, num(2.0), Expr::Pi),
                    Expr::Var(Scale::Z, 0),
                )],
            ),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn incomplete_input_reports_position() {
        match parse("x1 +", 2) {
            Err(ExprError::Syntax { position, .. }) => assert_eq!(position, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_variable() {
        let err = parse("y3", 2).unwrap_err();
        assert!(matches!(err, ExprError::IndexOutOfRange { .. }));
        assert!(err.to_string().contains("variable index exceeds dimension"));
    }

    #[test]
    fn unknown_identifiers_and_functions() {
        assert!(matches!(parse("tan(x1)", 1), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("Pi", 1), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("w1", 1), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("x0", 1), Err(ExprError::IndexOutOfRange { .. })));
        assert!(matches!(parse("", 1), Err(ExprError::Empty)));
        assert!(matches!(parse("min(x1)", 1), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("(x1", 1), Err(ExprError::Syntax { position: 4, .. })));
        assert!(matches!(parse("x1 $ 2", 1), Err(ExprError::Syntax { position: 4, .. })));
    }

    #[test]
    fn evaluation_examples() {
        let e = parse("2 + sin(2*pi*y1)*sin(2*pi*z1)", 1).unwrap();
        assert!((e.eval(&[0.0], &[0.25], &[0.25]) - 3.0).abs() < 1e-15);
        assert_eq!(parse("5", 2).unwrap().eval(&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]), 5.0);
        assert_eq!(parse("y1^2 - y1*y1", 1).unwrap().eval(&[], &[0.7], &[]), 0.0);
    }

    #[test]
    fn precedence_and_associativity() {
        let e = |s: &str| parse(s, 1).unwrap().eval(&[], &[], &[]);
        assert_eq!(e("2^3^2"), 512.0);
        assert_eq!(e("8/4/2"), 1.0);
        assert_eq!(e("1-2-3"), -4.0);
        assert_eq!(e("-2^2"), -4.0);
        assert_eq!(e("2*-3"), -6.0);
        assert_eq!(e("min(3, max(1, 2))"), 2.0);
        assert_eq!(e("1.5e2 + .5"), 150.5);
        assert_eq!(e("sqrt(abs(-16))"), 4.0);
    }

    #[test]
    fn non_finite_results_are_flagged() {
        let e = parse("1/x1", 1).unwrap();
        assert!(e.eval(&[0.0], &[], &[]).is_infinite());
        assert!(matches!(e.eval_finite(&[0.0], &[], &[]), Err(ExprError::NonFinite { .. })));
        let s = parse("sqrt(x1)", 1).unwrap();
        assert!(s.eval_finite(&[-1.0], &[], &[]).is_err());
        assert_eq!(s.eval_finite(&[4.0], &[], &[]).unwrap(), 2.0);
    }

    #[test]
    fn scale_queries() {
        let e = parse("x1 + y2*cos(z1)", 2).unwrap();
        assert!(e.uses(Scale::X) && e.uses(Scale::Y) && e.uses(Scale::Z));
        assert_eq!(e.max_index(), Some(1));
        let r = e.rename(Scale::Z, Scale::Y);
        assert!(!r.uses(Scale::Z));
        assert_eq!(parse("2*pi", 1).unwrap().constant_value(), Some(2.0 * std::f64::consts::PI));
    }

    #[test]
    fn display_reparses() {
        for text in ["2 + sin(2*pi*z1)", "-x1^-2", "min(x1, y1) / (3 - z1)", "1e-7*x1"] {
            let e = parse(text, 1).unwrap();
            assert_eq!(parse(&e.to_string(), 1).unwrap(), e, "{text}");
        }
    }
}
