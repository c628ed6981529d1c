//! Parser and evaluator for the scalar arithmetic expressions that declare
//! covariate drift and diffusion coefficients, e.g. "-5*sin(5*t)" or
//! "3*(V3-V3^3-V4)".

use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
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
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "tan" => Self::Tan,
            "exp" => Self::Exp,
            "log" => Self::Log,
            "sqrt" => Self::Sqrt,
            "abs" => Self::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Tan => "tan",
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sqrt => "sqrt",
            Self::Abs => "abs",
        }
    }
}

/// Abstract syntax tree over literals, identifiers, arithmetic operators
/// and single-argument calls.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
}

impl std::error::Error for ParseError {}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: expected {}", self.offset, self.expected)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    Unbound { name: String },
    DivisionByZero { subexpr: String },
    LogDomain { subexpr: String },
    NonFinite { subexpr: String },
}

impl std::error::Error for EvalError {}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unbound { name } => write!(f, "unbound identifier {name:?}"),
            Self::DivisionByZero { subexpr } => write!(f, "division by zero in {subexpr:?}"),
            Self::LogDomain { subexpr } => {
                write!(f, "log of a non-positive value in {subexpr:?}")
            }
            Self::NonFinite { subexpr } => {
                write!(f, "non-finite intermediate value in {subexpr:?}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(source: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '+' => { out.push((i, Token::Plus)); i += 1; }
            '-' => { out.push((i, Token::Minus)); i += 1; }
            '*' => { out.push((i, Token::Star)); i += 1; }
            '/' => { out.push((i, Token::Slash)); i += 1; }
            '^' => { out.push((i, Token::Caret)); i += 1; }
            '(' => { out.push((i, Token::LParen)); i += 1; }
            ')' => { out.push((i, Token::RParen)); i += 1; }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut k = i + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        i = k;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError {
                    offset: start,
                    expected: format!("a numeric literal, found {text:?}"),
                })?;
                out.push((start, Token::Num(value)));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((start, Token::Ident(source[start..i].to_string())));
            }
            _ => {
                return Err(ParseError {
                    offset: i,
                    expected: format!("an operator, literal or identifier, found {c:?}"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    source_len: usize,
    _src: &'a str,
}

// Binding powers, matching the expression dialect of the model strings:
// ^ strongest and right-associative, then * /, then unary minus, then + -,
// so that "-5*sin(5*t)" is the negation of the whole product and "-2^2"
// is -(2^2).
const BP_ADD: (u8, u8) = (1, 2);
const BP_MUL: (u8, u8) = (3, 4);
const BP_NEG: u8 = 2;
const BP_POW: (u8, u8) = (7, 6);

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(o, _)| *o)
            .unwrap_or(self.source_len)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ParseError { offset: self.offset(), expected: "')'".into() }),
        }
    }

    fn parse_expr(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let mut lhs = match self.advance() {
            Some(Token::Num(v)) => Expr::Num(v),
            Some(Token::Ident(name)) => {
                if let Some(Token::LParen) = self.peek() {
                    let func = Func::parse(&name).ok_or_else(|| ParseError {
                        offset: self.offset(),
                        expected: format!(
                            "a known function (sin, cos, tan, exp, log, sqrt, abs), found {name:?}"
                        ),
                    })?;
                    self.pos += 1;
                    let arg = self.parse_expr(0)?;
                    self.expect_rparen()?;
                    Expr::Call(func, Box::new(arg))
                } else {
                    Expr::Var(name)
                }
            }
            Some(Token::Minus) => {
                let operand = self.parse_expr(BP_NEG)?;
                Expr::Neg(Box::new(operand))
            }
            Some(Token::LParen) => {
                let inner = self.parse_expr(0)?;
                self.expect_rparen()?;
                inner
            }
            _ => {
                return Err(ParseError {
                    offset: self.offset().saturating_sub(0),
                    expected: "a literal, identifier, '(' or unary '-'".into(),
                })
            }
        };

        loop {
            let op = match self.peek() {
                Some(Token::Plus) => (BinOp::Add, BP_ADD),
                Some(Token::Minus) => (BinOp::Sub, BP_ADD),
                Some(Token::Star) => (BinOp::Mul, BP_MUL),
                Some(Token::Slash) => (BinOp::Div, BP_MUL),
                Some(Token::Caret) => (BinOp::Pow, BP_POW),
                Some(Token::RParen) | None => break,
                Some(t) => {
                    return Err(ParseError {
                        offset: self.offset(),
                        expected: format!("an operator or end of input, found {t:?}"),
                    })
                }
            };
            let (bin, (lbp, rbp)) = op;
            if lbp < min_bp {
                break;
            }
            self.pos += 1;
            let rhs = self.parse_expr(rbp)?;
            lhs = Expr::Binary(bin, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }
}

/// Parses an expression string into its AST.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let tokens = lex(source)?;
    if tokens.is_empty() {
        return Err(ParseError { offset: 0, expected: "a non-empty expression".into() });
    }
    let mut p = Parser { tokens, pos: 0, source_len: source.len(), _src: source };
    let expr = p.parse_expr(0)?;
    if p.pos < p.tokens.len() {
        return Err(ParseError {
            offset: p.offset(),
            expected: "end of input".into(),
        });
    }
    Ok(expr)
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 9,
            Expr::Binary(BinOp::Pow, ..) => 7,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 3,
            Expr::Neg(_) => 2,
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        }
    }

    /// Evaluates against a variable lookup.
    pub fn eval<F: Fn(&str) -> Option<f64>>(&self, bind: &F) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(name) => bind(name)
                .ok_or_else(|| EvalError::Unbound { name: name.clone() })?,
            Expr::Neg(inner) => -inner.eval(bind)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(bind)?;
                let b = r.eval(bind)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero { subexpr: self.to_string() });
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(func, arg) => {
                let x = arg.eval(bind)?;
                match func {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(EvalError::LogDomain { subexpr: self.to_string() });
                        }
                        x.ln()
                    }
                    Func::Sqrt => x.sqrt(),
                    Func::Abs => x.abs(),
                }
            }
        };
        if !v.is_finite() {
            return Err(EvalError::NonFinite { subexpr: self.to_string() });
        }
        Ok(v)
    }

    /// Collects every identifier referenced by the tree.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(
            f: &mut fmt::Formatter<'_>,
            e: &Expr,
            needs_paren: bool,
        ) -> fmt::Result {
            if needs_paren {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                child(f, inner, inner.precedence() < self.precedence())
            }
            Expr::Binary(op, l, r) => {
                let p = self.precedence();
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                // left child of ^ is the non-associative side; for the
                // others the right side re-parenthesizes on ties
                let (lp, rp) = match op {
                    BinOp::Pow => (l.precedence() <= p, r.precedence() < p),
                    _ => (l.precedence() < p, r.precedence() <= p),
                };
                child(f, l, lp)?;
                f.write_str(sym)?;
                child(f, r, rp)
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn bind(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn eval_str(src: &str, vars: &[(&str, f64)]) -> Result<f64, EvalError> {
        let map = bind(vars);
        parse(src).unwrap().eval(&|name| map.get(name).copied())
    }

    #[test]
    fn drift_string_parse_tree() {
        let e = parse("-5*sin(5*t)").unwrap();
        let want = Expr::Neg(Box::new(Expr::Binary(
            BinOp::Mul,
            Box::new(Expr::Num(5.0)),
            Box::new(Expr::Call(
                Func::Sin,
                Box::new(Expr::Binary(
                    BinOp::Mul,
                    Box::new(Expr::Num(5.0)),
                    Box::new(Expr::Var("t".into())),
                )),
            )),
        )));
        assert_eq!(e, want);
    }

    #[test]
    fn precedence_examples() {
        // 1.5*V3-V4+0.5 groups as ((1.5*V3)-V4)+0.5
        let e = parse("1.5*V3-V4+0.5").unwrap();
        let v = e
            .eval(&|n| bind(&[("V3", 2.0), ("V4", 1.0)]).get(n).copied())
            .unwrap();
        assert_eq!(v, 2.5);
        // right-associative power
        assert_eq!(eval_str("2^3^2", &[]).unwrap(), 512.0);
        // unary minus below ^ and below * /
        assert_eq!(eval_str("-2^2", &[]).unwrap(), -4.0);
        assert_eq!(eval_str("2^-1", &[]).unwrap(), 0.5);
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_str("-5*sin(5*t)", &[("t", 0.0)]).unwrap(), 0.0);
        assert_eq!(
            eval_str("3*(V3-V3^3-V4)", &[("V3", 1.0), ("V4", 0.0)]).unwrap(),
            0.0
        );
        assert_eq!(eval_str("cos(t)", &[("t", 0.0)]).unwrap(), 1.0);
    }

    #[test]
    fn parse_errors_carry_offset() {
        assert!(parse("").is_err());
        let e = parse("sinh(x)").unwrap_err();
        assert!(e.expected.contains("known function"), "{e}");
        let e = parse("(1+2").unwrap_err();
        assert!(e.expected.contains("')'"));
        // no implicit multiplication
        let e = parse("5t").unwrap_err();
        assert!(e.offset == 1, "{e}");
        let e = parse("1+@").unwrap_err();
        assert_eq!(e.offset, 2);
    }

    #[test]
    fn eval_errors() {
        assert!(matches!(
            eval_str("x+1", &[]),
            Err(EvalError::Unbound { .. })
        ));
        match eval_str("1/(t-1)", &[("t", 1.0)]) {
            Err(EvalError::DivisionByZero { subexpr }) => {
                assert!(subexpr.contains("t-1"), "{subexpr}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            eval_str("log(0-2)", &[]),
            Err(EvalError::LogDomain { .. })
        ));
        assert!(matches!(
            eval_str("exp(10000)", &[]),
            Err(EvalError::NonFinite { .. })
        ));
    }

    #[test]
    fn variables_are_collected() {
        let e = parse("1.5*V3-V4+0.5*sin(t)").unwrap();
        let vars: Vec<String> = e.variables().into_iter().collect();
        assert_eq!(vars, vec!["V3".to_string(), "V4".into(), "t".into()]);
    }

    // Independent reference: compile to postfix, evaluate with an explicit
    // stack. Same primitive operations in the same order as Expr::eval,
    // so results must agree bitwise.
    #[derive(Clone, Debug)]
    enum Rpn {
        Push(f64),
        Load(String),
        Neg,
        Bin(BinOp),
        Fun(Func),
    }

    fn compile(e: &Expr, out: &mut Vec<Rpn>) {
        match e {
            Expr::Num(v) => out.push(Rpn::Push(*v)),
            Expr::Var(n) => out.push(Rpn::Load(n.clone())),
            Expr::Neg(i) => {
                compile(i, out);
                out.push(Rpn::Neg);
            }
            Expr::Binary(op, l, r) => {
                compile(l, out);
                compile(r, out);
                out.push(Rpn::Bin(*op));
            }
            Expr::Call(f, a) => {
                compile(a, out);
                out.push(Rpn::Fun(*f));
            }
        }
    }

    fn rpn_eval(prog: &[Rpn], vars: &HashMap<String, f64>) -> f64 {
        let mut stack: Vec<f64> = Vec::new();
        for op in prog {
            match op {
                Rpn::Push(v) => stack.push(*v),
                Rpn::Load(n) => stack.push(vars[n]),
                Rpn::Neg => {
                    let a = stack.pop().unwrap();
                    stack.push(-a);
                }
                Rpn::Bin(b) => {
                    let r = stack.pop().unwrap();
                    let l = stack.pop().unwrap();
                    stack.push(match b {
                        BinOp::Add => l + r,
                        BinOp::Sub => l - r,
                        BinOp::Mul => l * r,
                        BinOp::Div => l / r,
                        BinOp::Pow => l.powf(r),
                    });
                }
                Rpn::Fun(f) => {
                    let a = stack.pop().unwrap();
                    stack.push(match f {
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Tan => a.tan(),
                        Func::Exp => a.exp(),
                        Func::Log => a.ln(),
                        Func::Sqrt => a.sqrt(),
                        Func::Abs => a.abs(),
                    });
                }
            }
        }
        stack.pop().unwrap()
    }

    use proptest::prelude::*;

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(Expr::Num),
            prop_oneof![Just("t"), Just("V1"), Just("x_2")]
                .prop_map(|s| Expr::Var(s.to_string())),
        ];
        leaf.prop_recursive(5, 64, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), prop_oneof![
                    Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul),
                    Just(BinOp::Div), Just(BinOp::Pow)
                ])
                .prop_map(|(l, r, op)| Expr::Binary(op, Box::new(l), Box::new(r))),
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner, prop_oneof![
                    Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Abs)
                ])
                .prop_map(|(a, f)| Expr::Call(f, Box::new(a))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn print_parse_roundtrip(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse(&printed)
                .unwrap_or_else(|err| panic!("{printed:?}: {err}"));
            prop_assert_eq!(back, e);
        }

        #[test]
        fn eval_matches_stack_reference(e in arb_expr()) {
            let vars = bind(&[("t", 0.7), ("V1", -1.3), ("x_2", 2.9)]);
            let direct = e.eval(&|n| vars.get(n).copied());
            let mut prog = Vec::new();
            compile(&e, &mut prog);
            let reference = rpn_eval(&prog, &vars);
            match direct {
                Ok(v) => prop_assert_eq!(v.to_bits(), reference.to_bits()),
                Err(EvalError::DivisionByZero { .. }) => {
                    prop_assert!(prog.iter().any(|op| matches!(op, Rpn::Bin(BinOp::Div))))
                }
                Err(EvalError::LogDomain { .. }) => {
                    prop_assert!(prog.iter().any(|op| matches!(op, Rpn::Fun(Func::Log))))
                }
                // an overflowing intermediate stops eval immediately; the
                // plain-IEEE reference may carry inf onward and even land
                // finite again (e.g. inf^0 = 1), so no value is comparable
                Err(EvalError::NonFinite { .. }) => {}
                Err(EvalError::Unbound { .. }) => prop_assert!(false, "all vars are bound"),
            }
        }
    }
}
