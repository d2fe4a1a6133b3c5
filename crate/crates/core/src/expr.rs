//! A small arithmetic expression language used for kernels, sample
//! functions, densities and approach-path couplings.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr  := and ( ("||" | "or") and )*
//! and   := cmp ( ("&&" | "and") cmp )*
//! cmp   := sum ( ("<" | "<=" | ">" | ">=" | "==" | "!=") sum )*
//! sum   := prod ( ("+" | "-") prod )*
//! prod  := unary ( ("*" | "/") unary )*
//! unary := ("-" | "+") unary | power
//! power := atom ( "^" unary )?
//! atom  := number | name | name "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Comparisons evaluate to `1` or `0` and chain the way they read, so
//! `0 <= t <= 1/lambda` means `0 <= t && t <= 1/lambda`. `ind(c)` is `1` when
//! its argument is non-zero. Evaluation is total except for division by an
//! exact zero, which is reported as an error.
//!
//! Expressions are compiled to a postfix program, so evaluation and
//! formatting never recurse and long inputs cannot exhaust the stack.

use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Point, Result};

const MAX_NESTING: usize = 128;
const MAX_SOURCE_LEN: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Tan,
    Atan,
    Erf,
    Sign,
    Floor,
    Ind,
    Pow,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "atan" => Func::Atan,
            "erf" => Func::Erf,
            "sign" => Func::Sign,
            "floor" => Func::Floor,
            "ind" => Func::Ind,
            "pow" => Func::Pow,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Erf => "erf",
            Func::Sign => "sign",
            Func::Floor => "floor",
            Func::Ind => "ind",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Func::Pow => n == 2,
            Func::Min | Func::Max => n >= 1,
            _ => n == 1,
        }
    }

    fn apply(self, args: &[f64]) -> f64 {
        let x = args[0];
        match self {
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Atan => x.atan(),
            Func::Erf => libm::erf(x),
            Func::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Func::Floor => x.floor(),
            Func::Ind => truth(x),
            Func::Pow => x.powf(args[1]),
            Func::Min => args[1..].iter().fold(x, |m, &v| m.min(v)),
            Func::Max => args[1..].iter().fold(x, |m, &v| m.max(v)),
        }
    }
}

fn truth(x: f64) -> f64 {
    if x != 0.0 && !x.is_nan() {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Instr {
    Num(f64),
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Cmp(CmpOp),
    /// Chained comparison step: pops `a b`, pushes `(a op b)` then `b`.
    CmpKeep(CmpOp),
    Pop,
    And,
    Or,
    Call(Func, usize),
}

/// A compiled expression over a fixed, ordered list of variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    program: Vec<Instr>,
    vars: Vec<String>,
    source: String,
}

impl Expr {
    /// Parses `source`, resolving identifiers against `vars` (in order) and
    /// the constants `pi` and `e`.
    pub fn parse(source: &str, vars: &[&str]) -> Result<Expr> {
        if source.len() > MAX_SOURCE_LEN {
            return Err(parse_error(0, "expression too long"));
        }
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            vars,
            program: Vec::new(),
            depth: 0,
        };
        parser.parse_or()?;
        if let Some(tok) = parser.peek_token() {
            return Err(parse_error(tok.pos, "unexpected trailing input"));
        }
        Ok(Expr {
            program: parser.program,
            vars: vars.iter().map(|v| v.to_string()).collect(),
            source: source.to_string(),
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    /// The text the expression was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates with `values[i]` bound to the i-th variable.
    pub fn eval(&self, values: &[f64]) -> Result<f64> {
        debug_assert_eq!(values.len(), self.vars.len());
        let mut stack: SmallVec<[f64; 16]> = SmallVec::new();
        for instr in &self.program {
            match *instr {
                Instr::Num(v) => stack.push(v),
                Instr::Var(i) => stack.push(values[i]),
                Instr::Neg => {
                    let v = stack.pop().unwrap();
                    stack.push(-v);
                }
                Instr::Call(func, argc) => {
                    let at = stack.len() - argc;
                    let v = func.apply(&stack[at..]);
                    stack.truncate(at);
                    stack.push(v);
                }
                Instr::Pop => {
                    stack.pop();
                }
                Instr::CmpKeep(op) => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    stack.push(if op.apply(a, b) { 1.0 } else { 0.0 });
                    stack.push(b);
                }
                binary => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    let v = match binary {
                        Instr::Add => a + b,
                        Instr::Sub => a - b,
                        Instr::Mul => a * b,
                        Instr::Div => {
                            if b == 0.0 {
                                return Err(Error::DivisionByZero(self.point(values)));
                            }
                            a / b
                        }
                        Instr::Pow => a.powf(b),
                        Instr::Cmp(op) => {
                            if op.apply(a, b) {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Instr::And => truth(a) * truth(b),
                        Instr::Or => truth(truth(a) + truth(b)),
                        _ => unreachable!(),
                    };
                    stack.push(v);
                }
            }
        }
        Ok(stack[0])
    }

    fn point(&self, values: &[f64]) -> Point {
        Point(self.vars.iter().cloned().zip(values.iter().copied()).collect())
    }
}

/// Canonical, fully parenthesised form. Parsing it back yields an expression
/// that evaluates bit-identically.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut stack: Vec<String> = Vec::new();
        for instr in &self.program {
            match *instr {
                Instr::Num(v) => stack.push(format!("{v:?}")),
                Instr::Var(i) => stack.push(self.vars[i].clone()),
                Instr::Neg => {
                    let v = stack.pop().unwrap();
                    stack.push(format!("(-{v})"));
                }
                Instr::Call(func, argc) => {
                    let args = stack.split_off(stack.len() - argc);
                    stack.push(format!("{}({})", func.name(), args.join(", ")));
                }
                Instr::Pop => {
                    stack.pop();
                }
                Instr::CmpKeep(op) => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    stack.push(format!("({a} {} {b})", op.symbol()));
                    stack.push(b);
                }
                binary => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    let sym = match binary {
                        Instr::Add => "+",
                        Instr::Sub => "-",
                        Instr::Mul => "*",
                        Instr::Div => "/",
                        Instr::Pow => "^",
                        Instr::Cmp(op) => op.symbol(),
                        Instr::And => "&&",
                        Instr::Or => "||",
                        _ => unreachable!(),
                    };
                    stack.push(format!("({a} {sym} {b})"));
                }
            }
        }
        f.write_str(&stack[0])
    }
}

fn parse_error(position: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        position,
        message: message.into(),
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
    Cmp(CmpOp),
    And,
    Or,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
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
            let v: f64 = text
                .parse()
                .map_err(|_| parse_error(start, format!("malformed number '{text}'")))?;
            out.push(Token { tok: Tok::Num(v), pos: start });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            let tok = match word {
                "and" => Tok::And,
                "or" => Tok::Or,
                _ => Tok::Ident(word.to_string()),
            };
            out.push(Token { tok, pos: start });
            continue;
        }
        let next = bytes.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            (b'<', Some(b'=')) => (Tok::Cmp(CmpOp::Le), 2),
            (b'>', Some(b'=')) => (Tok::Cmp(CmpOp::Ge), 2),
            (b'=', Some(b'=')) => (Tok::Cmp(CmpOp::Eq), 2),
            (b'!', Some(b'=')) => (Tok::Cmp(CmpOp::Ne), 2),
            (b'&', Some(b'&')) => (Tok::And, 2),
            (b'|', Some(b'|')) => (Tok::Or, 2),
            (b'*', Some(b'*')) => (Tok::Caret, 2),
            (b'<', _) => (Tok::Cmp(CmpOp::Lt), 1),
            (b'>', _) => (Tok::Cmp(CmpOp::Gt), 1),
            (b'+', _) => (Tok::Plus, 1),
            (b'-', _) => (Tok::Minus, 1),
            (b'*', _) => (Tok::Star, 1),
            (b'/', _) => (Tok::Slash, 1),
            (b'^', _) => (Tok::Caret, 1),
            (b'(', _) => (Tok::LParen, 1),
            (b')', _) => (Tok::RParen, 1),
            (b',', _) => (Tok::Comma, 1),
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(parse_error(start, format!("unexpected character '{ch}'")));
            }
        };
        out.push(Token { tok, pos: start });
        i += len;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    vars: &'a [&'a str],
    program: Vec<Instr>,
    depth: usize,
}

impl Parser<'_> {
    fn peek_token(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek(&self) -> Option<&Tok> {
        self.peek_token().map(|t| &t.tok)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.pos)
            .or_else(|| self.tokens.last().map(|t| t.pos + 1))
            .unwrap_or(0)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(parse_error(self.here(), "expression nested too deeply"));
        }
        Ok(())
    }

    fn parse_or(&mut self) -> Result<()> {
        self.enter()?;
        self.parse_and()?;
        while self.eat(&Tok::Or) {
            self.parse_and()?;
            self.program.push(Instr::Or);
        }
        self.depth -= 1;
        Ok(())
    }

    fn parse_and(&mut self) -> Result<()> {
        self.parse_cmp()?;
        while self.eat(&Tok::And) {
            self.parse_cmp()?;
            self.program.push(Instr::And);
        }
        Ok(())
    }

    fn parse_cmp(&mut self) -> Result<()> {
        self.parse_sum()?;
        let mut ops = Vec::new();
        while let Some(Tok::Cmp(op)) = self.peek().cloned() {
            self.pos += 1;
            if let Some(prev) = ops.last().copied() {
                // the previous comparison keeps its right operand for this one
                self.program.push(Instr::CmpKeep(prev));
            }
            ops.push(op);
            self.parse_sum()?;
        }
        match ops.len() {
            0 => {}
            1 => self.program.push(Instr::Cmp(ops[0])),
            n => {
                self.program.push(Instr::CmpKeep(ops[n - 1]));
                self.program.push(Instr::Pop);
                for _ in 1..n {
                    self.program.push(Instr::And);
                }
            }
        }
        Ok(())
    }

    fn parse_sum(&mut self) -> Result<()> {
        self.parse_prod()?;
        loop {
            let instr = match self.peek() {
                Some(Tok::Plus) => Instr::Add,
                Some(Tok::Minus) => Instr::Sub,
                _ => return Ok(()),
            };
            self.pos += 1;
            self.parse_prod()?;
            self.program.push(instr);
        }
    }

    fn parse_prod(&mut self) -> Result<()> {
        self.parse_unary()?;
        loop {
            let instr = match self.peek() {
                Some(Tok::Star) => Instr::Mul,
                Some(Tok::Slash) => Instr::Div,
                _ => return Ok(()),
            };
            self.pos += 1;
            self.parse_unary()?;
            self.program.push(instr);
        }
    }

    fn parse_unary(&mut self) -> Result<()> {
        self.enter()?;
        if self.eat(&Tok::Minus) {
            self.parse_unary()?;
            self.program.push(Instr::Neg);
        } else if self.eat(&Tok::Plus) {
            self.parse_unary()?;
        } else {
            self.parse_power()?;
        }
        self.depth -= 1;
        Ok(())
    }

    fn parse_power(&mut self) -> Result<()> {
        self.parse_atom()?;
        if self.eat(&Tok::Caret) {
            self.parse_unary()?;
            self.program.push(Instr::Pow);
        }
        Ok(())
    }

    fn parse_atom(&mut self) -> Result<()> {
        let pos = self.here();
        let Some(tok) = self.peek().cloned() else {
            return Err(parse_error(pos, "unexpected end of expression"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => self.program.push(Instr::Num(v)),
            Tok::LParen => {
                self.parse_or()?;
                if !self.eat(&Tok::RParen) {
                    return Err(parse_error(self.here(), "expected ')'"));
                }
            }
            Tok::Ident(name) => {
                if self.eat(&Tok::LParen) {
                    let func = Func::lookup(&name)
                        .ok_or_else(|| parse_error(pos, format!("unknown function '{name}'")))?;
                    let mut argc = 0;
                    loop {
                        self.parse_or()?;
                        argc += 1;
                        if self.eat(&Tok::Comma) {
                            continue;
                        }
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        return Err(parse_error(self.here(), "expected ',' or ')'"));
                    }
                    if !func.arity_ok(argc) {
                        return Err(parse_error(
                            pos,
                            format!("wrong number of arguments ({argc}) for '{name}'"),
                        ));
                    }
                    self.program.push(Instr::Call(func, argc));
                } else if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    self.program.push(Instr::Var(i));
                } else {
                    let v = match name.as_str() {
                        "pi" => std::f64::consts::PI,
                        "e" => std::f64::consts::E,
                        _ => {
                            return Err(parse_error(pos, format!("unknown variable '{name}'")));
                        }
                    };
                    self.program.push(Instr::Num(v));
                }
            }
            _ => return Err(parse_error(pos, "expected a number, name or '('")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, vars: &[&str], values: &[f64]) -> f64 {
        Expr::parse(src, vars).unwrap().eval(values).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[], &[]), 7.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[], &[]), 512.0);
        assert_eq!(eval("-2 ^ 2", &[], &[]), -4.0);
        assert_eq!(eval("8 / 4 / 2", &[], &[]), 1.0);
        assert_eq!(eval("10 - 4 - 3", &[], &[]), 3.0);
        assert_eq!(eval("lambda^-2", &["lambda"], &[4.0]), 0.0625);
        assert_eq!(eval("2 ** 3", &[], &[]), 8.0);
    }

    #[test]
    fn chained_comparison_and_indicator() {
        let e = Expr::parse("ind(0 <= t <= 1/lambda)", &["lambda", "t"]).unwrap();
        assert_eq!(e.eval(&[2.0, 0.25]).unwrap(), 1.0);
        assert_eq!(e.eval(&[2.0, 0.5]).unwrap(), 1.0);
        assert_eq!(e.eval(&[2.0, 0.6]).unwrap(), 0.0);
        assert_eq!(e.eval(&[2.0, -0.1]).unwrap(), 0.0);
        assert_eq!(eval("1 < 2 < 3 < 4", &[], &[]), 1.0);
        assert_eq!(eval("1 < 3 < 2", &[], &[]), 0.0);
        assert_eq!(eval("t >= 0 && s >= 0", &["t", "s"], &[0.0, -1.0]), 0.0);
        assert_eq!(eval("t >= 0 or s >= 0", &["t", "s"], &[0.0, -1.0]), 1.0);
    }

    #[test]
    fn box_kernel_expression() {
        let e = Expr::parse(
            "lambda^2 * ind(0<=t<=1/lambda) * ind(0<=s<=1/lambda)",
            &["lambda", "t", "s"],
        )
        .unwrap();
        assert_eq!(e.eval(&[2.0, 0.25, 0.25]).unwrap(), 4.0);
    }

    #[test]
    fn gauss_expression_value() {
        let v = eval("(lambda/pi)*exp(-lambda*(t^2+s^2))", &["lambda", "t", "s"], &[1.0, 0.0, 0.0]);
        assert!((v - std::f64::consts::FRAC_1_PI).abs() < 1e-10);
    }

    #[test]
    fn division_by_zero_reports_point() {
        let e = Expr::parse("1/(t-t)", &["lambda", "t", "s"]).unwrap();
        match e.eval(&[3.0, 0.5, 0.25]) {
            Err(Error::DivisionByZero(p)) => {
                assert_eq!(p.0[0], ("lambda".to_string(), 3.0));
                assert_eq!(p.0[1], ("t".to_string(), 0.5));
            }
            other => panic!("expected division error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let cases = [
            ("1 +", 3),
            ("foo(1)", 0),
            ("t + q", 4),
            ("(1 + 2", 6),
            ("1 $ 2", 2),
            ("min()", 4),
            ("pow(1)", 0),
            ("1 2", 2),
        ];
        for (src, want) in cases {
            match Expr::parse(src, &["t"]) {
                Err(Error::Parse { position, .. }) => assert_eq!(position, want, "{src}"),
                other => panic!("{src}: expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let src = "(".repeat(10_000) + "1" + &")".repeat(10_000);
        assert!(matches!(Expr::parse(&src, &[]), Err(Error::Parse { .. })));
        let long = vec!["1"; 20_000].join("+");
        assert_eq!(eval(&long, &[], &[]), 20_000.0);
    }

    #[test]
    fn display_round_trips() {
        let src = "lambda^2*ind(0<=t<=1/lambda)*ind(0<=s<=1/lambda) - min(t, s, 0.1) + -e";
        let vars = ["lambda", "t", "s"];
        let e = Expr::parse(src, &vars).unwrap();
        let printed = e.to_string();
        let back = Expr::parse(&printed, &vars).unwrap();
        assert_eq!(back.to_string(), printed);
        for p in [[2.0, 0.25, 0.3], [5.0, 0.1, 0.2], [1.0, -1.0, 0.5]] {
            assert_eq!(e.eval(&p).unwrap().to_bits(), back.eval(&p).unwrap().to_bits());
        }
    }

    #[test]
    fn numbers() {
        assert_eq!(eval(".5", &[], &[]), 0.5);
        assert_eq!(eval("1e-3", &[], &[]), 1e-3);
        assert_eq!(eval("2.5E+2", &[], &[]), 250.0);
        assert!(Expr::parse("1.2.3", &[]).is_err());
    }
}
