//! Lexer and recursive-descent parser for program text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, ToPrimitive, Zero};

use crate::ast::{
    Affine, CmpOp, CompoundDistribution, Cond, Dist, Distribution, Event, Program, Rational,
    Statement, VarId,
};
use crate::kernel::parse_rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    /// Byte offsets into the source.
    pub start: usize,
    pub end: usize,
    /// One-based position of `start`.
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub expected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// Digits with an optional `.digits` or `/digits` tail.
    Num(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(s) => write!(f, "number `{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const KEYWORDS: [&str; 9] = [
    "skip", "fail", "observe", "if", "else", "in", "not", "and", "or",
];
// Longest first so `:=` wins over `:` and `<=` over `<`.
const SYMBOLS: [&str; 18] = [
    ":=", "+=", "+~", "!=", "<=", ">=", "~", ";", "{", "}", "(", ")", ",", "*", "+", "=", "<", ">",
];

struct Spanned {
    tok: Tok,
    span: SourceSpan,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = vec![];
    let mut line = 1;
    let mut line_start = 0;
    let mut chars = src.char_indices().peekable();
    let span_at = |start: usize, end: usize, line: usize, line_start: usize| SourceSpan {
        start,
        end,
        line,
        column: src[line_start..start].chars().count() + 1,
    };
    while let Some(&(i, c)) = chars.peek() {
        if c == '\n' {
            chars.next();
            line += 1;
            line_start = i + 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '#' {
            while chars.peek().is_some_and(|&(_, c)| c != '\n') {
                chars.next();
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut end = i;
            while let Some(&(j, c)) = chars.peek() {
                if c.is_alphanumeric() || c == '_' || c == '\'' {
                    end = j + c.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let word = &src[i..end];
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Sym(k),
                None => Tok::Ident(word.to_string()),
            };
            out.push(Spanned {
                tok,
                span: span_at(i, end, line, line_start),
            });
            continue;
        }
        if c.is_ascii_digit() {
            let digits_from = |k: usize| src[k..].bytes().take_while(u8::is_ascii_digit).count();
            let mut end = i + digits_from(i);
            if let Some(sep @ (b'.' | b'/')) = src.as_bytes().get(end).copied() {
                let tail = digits_from(end + 1);
                if tail == 0 {
                    let what = if sep == b'.' { "decimal point" } else { "`/`" };
                    return Err(ParseError {
                        span: span_at(i, end + 1, line, line_start),
                        message: format!("expected digits after {what}"),
                        expected: vec!["digit".into()],
                    });
                }
                end += 1 + tail;
            }
            while chars.peek().is_some_and(|&(j, _)| j < end) {
                chars.next();
            }
            out.push(Spanned {
                tok: Tok::Num(src[i..end].to_string()),
                span: span_at(i, end, line, line_start),
            });
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                for _ in 0..s.len() {
                    chars.next();
                }
                out.push(Spanned {
                    tok: Tok::Sym(s),
                    span: span_at(i, i + s.len(), line, line_start),
                });
            }
            None => {
                return Err(ParseError {
                    span: span_at(i, i + c.len_utf8(), line, line_start),
                    message: format!("unexpected character `{c}`"),
                    expected: vec![],
                })
            }
        }
    }
    let end = src.len();
    out.push(Spanned {
        tok: Tok::Eof,
        span: span_at(end, end, line, line_start),
    });
    Ok(out)
}

/// One argument of a distribution call.
enum Arg {
    Num(Rational, SourceSpan),
    Var {
        scale: Rational,
        var: VarId,
        span: SourceSpan,
    },
}

impl Arg {
    fn span(&self) -> SourceSpan {
        match self {
            Arg::Num(_, s) | Arg::Var { span: s, .. } => *s,
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    vars: Vec<String>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> &Spanned {
        let i = self.pos;
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        &self.toks[i]
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        Err(ParseError {
            span: self.span(),
            message: format!("expected {}, found {}", expected.join(" or "), self.peek()),
            expected,
        })
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(s) if *s == sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &'static str) -> PResult<()> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.error(&[sym])
        }
    }

    fn intern(&mut self, name: &str) -> VarId {
        match self.vars.iter().position(|n| n == name) {
            Some(i) => VarId(i),
            None => {
                self.vars.push(name.to_string());
                VarId(self.vars.len() - 1)
            }
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok((name, span))
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn rational(&mut self) -> PResult<(Rational, SourceSpan)> {
        match self.peek().clone() {
            Tok::Num(text) => {
                let span = self.bump().span;
                match parse_rational(&text) {
                    Some(r) => Ok((r, span)),
                    None => Err(ParseError {
                        span,
                        message: format!("zero denominator in `{text}`"),
                        expected: vec![],
                    }),
                }
            }
            _ => self.error(&["number"]),
        }
    }

    fn natural(&mut self) -> PResult<u64> {
        let (r, span) = self.rational()?;
        to_natural(&r, span)
    }

    fn program(&mut self) -> PResult<Statement> {
        let mut body = vec![];
        while *self.peek() != Tok::Eof {
            body.push(self.stmt()?);
        }
        Ok(Statement::Seq(body))
    }

    fn block(&mut self) -> PResult<Statement> {
        self.expect("{")?;
        let mut body = vec![];
        while !self.eat("}") {
            if *self.peek() == Tok::Eof {
                return self.error(&["`}`"]);
            }
            body.push(self.stmt()?);
        }
        Ok(Statement::Seq(body))
    }

    fn stmt(&mut self) -> PResult<Statement> {
        let s = match self.peek().clone() {
            Tok::Sym("skip") => {
                self.bump();
                Statement::Skip
            }
            Tok::Sym("fail") => {
                self.bump();
                Statement::Fail
            }
            Tok::Sym("observe") => {
                self.bump();
                match self.cond()? {
                    Cond::Sampled { value, dist } => Statement::ObserveFrom { value, dist },
                    c => Statement::Observe(c),
                }
            }
            Tok::Sym("if") => {
                self.bump();
                let cond = self.cond()?;
                let then = self.block()?;
                let els = if self.eat("else") {
                    self.block()?
                } else {
                    Statement::Skip
                };
                return Ok(Statement::If {
                    cond,
                    then: Box::new(then),
                    els: Box::new(els),
                });
            }
            Tok::Ident(name) => {
                self.bump();
                let target = self.intern(&name);
                match self.peek() {
                    Tok::Sym(op @ (":=" | "+=")) => {
                        let accumulate = *op == "+=";
                        self.bump();
                        let expr = self.affine()?;
                        Statement::Assign {
                            target,
                            expr,
                            accumulate,
                        }
                    }
                    Tok::Sym(op @ ("~" | "+~")) => {
                        let accumulate = *op == "+~";
                        self.bump();
                        let dist = self.dist()?;
                        Statement::Sample {
                            target,
                            dist,
                            accumulate,
                        }
                    }
                    _ => return self.error(&["`:=`", "`+=`", "`~`", "`+~`"]),
                }
            }
            _ => return self.error(&["statement"]),
        };
        self.expect(";")?;
        Ok(s)
    }

    fn affine(&mut self) -> PResult<Affine> {
        let mut coeffs: BTreeMap<VarId, Rational> = BTreeMap::new();
        let mut constant = Rational::zero();
        loop {
            match self.peek().clone() {
                Tok::Num(_) => {
                    let (c, _) = self.rational()?;
                    if self.eat("*") {
                        let (name, _) = self.ident()?;
                        // a zero term is dropped before it can allocate a variable
                        if !c.is_zero() {
                            let v = self.intern(&name);
                            *coeffs.entry(v).or_default() += c;
                        }
                    } else {
                        constant += c;
                    }
                }
                Tok::Ident(name) => {
                    self.bump();
                    let v = self.intern(&name);
                    *coeffs.entry(v).or_default() += Rational::one();
                }
                _ => return self.error(&["number", "identifier"]),
            }
            if !self.eat("+") {
                break;
            }
        }
        Ok(Affine { coeffs, constant }.normalized())
    }

    fn arg(&mut self) -> PResult<Arg> {
        match self.peek().clone() {
            Tok::Num(_) => {
                let (c, span) = self.rational()?;
                if self.eat("*") {
                    let (name, _) = self.ident()?;
                    let var = self.intern(&name);
                    Ok(Arg::Var {
                        scale: c,
                        var,
                        span,
                    })
                } else {
                    Ok(Arg::Num(c, span))
                }
            }
            Tok::Ident(name) => {
                let span = self.bump().span;
                let var = self.intern(&name);
                Ok(Arg::Var {
                    scale: Rational::one(),
                    var,
                    span,
                })
            }
            _ => self.error(&["number", "identifier"]),
        }
    }

    fn dist(&mut self) -> PResult<Dist> {
        let (name, name_span) = self.ident()?;
        self.expect("(")?;
        let mut args = vec![];
        if !self.eat(")") {
            loop {
                args.push(self.arg()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        build_dist(&name, name_span, args)
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        Some(match self.peek() {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return None,
        })
    }

    fn cond(&mut self) -> PResult<Cond> {
        let mut c = self.conj()?;
        while self.eat("or") {
            let rhs = self.conj()?;
            c = Cond::Or(Box::new(c), Box::new(rhs));
        }
        Ok(c)
    }

    fn conj(&mut self) -> PResult<Cond> {
        let mut c = self.unary()?;
        while self.eat("and") {
            let rhs = self.unary()?;
            c = Cond::And(Box::new(c), Box::new(rhs));
        }
        Ok(c)
    }

    fn unary(&mut self) -> PResult<Cond> {
        if self.eat("not") {
            return Ok(Cond::Not(Box::new(self.unary()?)));
        }
        if self.eat("(") {
            let c = self.cond()?;
            self.expect(")")?;
            return Ok(c);
        }
        match self.peek().clone() {
            Tok::Num(_) => {
                let value = self.natural()?;
                // `m < X` is accepted and stored as `X > m`
                if let Some(op) = self.cmp_op() {
                    self.bump();
                    let (name, _) = self.ident()?;
                    let var = self.intern(&name);
                    return Ok(Cond::Cmp {
                        var,
                        op: op.flipped(),
                        value,
                    });
                }
                if !self.eat("~") {
                    return self.error(&["`~`", "comparison"]);
                }
                let dist = self.dist()?;
                Ok(Cond::Sampled { value, dist })
            }
            Tok::Ident(name) => {
                self.bump();
                let var = self.intern(&name);
                if self.eat("in") {
                    self.expect("{")?;
                    let mut set = BTreeSet::new();
                    if !self.eat("}") {
                        loop {
                            set.insert(self.natural()?);
                            if self.eat("}") {
                                break;
                            }
                            self.expect(",")?;
                        }
                    }
                    return Ok(Cond::Event(Event::InSet { var, set }));
                }
                let Some(op) = self.cmp_op() else {
                    return self.error(&["`in`", "comparison"]);
                };
                self.bump();
                let value = self.natural()?;
                Ok(Cond::Cmp { var, op, value })
            }
            _ => self.error(&["condition"]),
        }
    }
}

fn to_natural(r: &Rational, span: SourceSpan) -> PResult<u64> {
    match r.is_integer().then(|| r.to_integer().to_u64()).flatten() {
        Some(n) => Ok(n),
        None => Err(ParseError {
            span,
            message: format!("expected a natural number, found {r}"),
            expected: vec!["natural".into()],
        }),
    }
}

fn build_dist(name: &str, span: SourceSpan, args: Vec<Arg>) -> PResult<Dist> {
    let arity = |n: usize| -> PResult<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(ParseError {
                span,
                message: format!("{name} takes {n} argument(s), got {}", args.len()),
                expected: vec![],
            })
        }
    };
    let num = |a: &Arg| -> PResult<Rational> {
        match a {
            Arg::Num(r, _) => Ok(r.clone()),
            Arg::Var { span, .. } => Err(ParseError {
                span: *span,
                message: format!("{name} needs a constant here"),
                expected: vec!["number".into()],
            }),
        }
    };
    let nat = |a: &Arg| to_natural(&num(a)?, a.span());
    // A bare variable argument, as in `Binomial(X, p)`.
    let plain_var = |a: &Arg| -> PResult<VarId> {
        match a {
            Arg::Var { scale, var, .. } if scale.is_one() => Ok(*var),
            _ => Err(ParseError {
                span: a.span(),
                message: format!("{name} needs a variable here"),
                expected: vec!["identifier".into()],
            }),
        }
    };
    let c = |d: Distribution| Ok(Dist::Const(d));
    let k = |d: CompoundDistribution| Ok(Dist::Compound(d));
    let is_var = |i: usize| matches!(args.get(i), Some(Arg::Var { .. }));
    match name {
        "Dirac" => {
            arity(1)?;
            c(Distribution::Dirac(num(&args[0])?))
        }
        "Bernoulli" => {
            arity(1)?;
            if is_var(0) {
                k(CompoundDistribution::Bernoulli {
                    var: plain_var(&args[0])?,
                })
            } else {
                c(Distribution::Bernoulli(num(&args[0])?))
            }
        }
        "Categorical" => {
            if args.is_empty() {
                return Err(ParseError {
                    span,
                    message: "Categorical needs at least one weight".into(),
                    expected: vec!["number".into()],
                });
            }
            c(Distribution::Categorical(
                args.iter().map(num).collect::<PResult<_>>()?,
            ))
        }
        "Binomial" | "NegBinomial" => {
            arity(2)?;
            let p = num(&args[1])?;
            let neg = name == "NegBinomial";
            if is_var(0) {
                let var = plain_var(&args[0])?;
                k(if neg {
                    CompoundDistribution::NegBinomial { var, p }
                } else {
                    CompoundDistribution::Binomial { var, p }
                })
            } else {
                let n = nat(&args[0])?;
                c(if neg {
                    Distribution::NegBinomial { r: n, p }
                } else {
                    Distribution::Binomial { n, p }
                })
            }
        }
        "UniformDisc" => {
            arity(2)?;
            c(Distribution::UniformDisc {
                lo: nat(&args[0])?,
                hi: nat(&args[1])?,
            })
        }
        "Geometric" => {
            arity(1)?;
            c(Distribution::Geometric(num(&args[0])?))
        }
        "Poisson" => {
            arity(1)?;
            match &args[0] {
                Arg::Var { scale, var, .. } => k(CompoundDistribution::Poisson {
                    scale: scale.clone(),
                    var: *var,
                }),
                Arg::Num(r, _) => c(Distribution::Poisson(r.clone())),
            }
        }
        "Exponential" => {
            arity(1)?;
            c(Distribution::Exponential(num(&args[0])?))
        }
        "Gamma" => {
            arity(2)?;
            c(Distribution::Gamma {
                shape: num(&args[0])?,
                rate: num(&args[1])?,
            })
        }
        "UniformCont" => {
            arity(2)?;
            c(Distribution::UniformCont {
                lo: num(&args[0])?,
                hi: num(&args[1])?,
            })
        }
        _ => Err(ParseError {
            span,
            message: format!("unknown distribution `{name}`"),
            expected: [
                "Dirac",
                "Bernoulli",
                "Categorical",
                "Binomial",
                "UniformDisc",
                "NegBinomial",
                "Geometric",
                "Poisson",
                "Exponential",
                "Gamma",
                "UniformCont",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }),
    }
}

/// Parses program text. Variables are numbered in order of first appearance
/// and the query defaults to the last assigned or sampled variable.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        vars: vec![],
    };
    let body = p.program()?;
    let mut program = Program {
        vars: p.vars,
        body,
        query: None,
    };
    program.query = program.default_query();
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::render;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn small_binomial_model() {
        let p = parse("X ~ Poisson(20); Y ~ Binomial(X, 0.1); observe Y = 2;").unwrap();
        assert_eq!(p.vars, vec!["X", "Y"]);
        let Statement::Seq(items) = &p.body else {
            panic!()
        };
        assert_eq!(items.len(), 3);
        assert_eq!(
            items[1],
            Statement::Sample {
                target: VarId(1),
                dist: Dist::Compound(CompoundDistribution::Binomial {
                    var: VarId(0),
                    p: q(1, 10)
                }),
                accumulate: false,
            }
        );
        assert_eq!(
            items[2],
            Statement::Observe(Cond::Cmp {
                var: VarId(1),
                op: CmpOp::Eq,
                value: 2
            })
        );
        assert_eq!(p.query, Some(VarId(1)));
    }

    #[test]
    fn empty_file() {
        let p = parse("").unwrap();
        assert_eq!(p.body, Statement::Seq(vec![]));
        assert!(p.vars.is_empty());
        assert_eq!(render(&p), "");
    }

    #[test]
    fn affine_assignment() {
        let p = parse("X := 2*X + 3*Y + 5;").unwrap();
        let Statement::Seq(items) = &p.body else {
            panic!()
        };
        let want = Affine {
            coeffs: BTreeMap::from([(VarId(0), q(2, 1)), (VarId(1), q(3, 1))]),
            constant: q(5, 1),
        };
        assert_eq!(
            items[0],
            Statement::Assign {
                target: VarId(0),
                expr: want,
                accumulate: false
            }
        );
    }

    #[test]
    fn zero_coefficients_are_dropped() {
        let p = parse("X := 0*Y + 1;").unwrap();
        assert_eq!(render(&p), "X := 1;\n");
    }

    #[test]
    fn decimal_literals_are_exact() {
        let p = parse("X := 0.1*Y + 3/6;").unwrap();
        let Statement::Seq(items) = &p.body else {
            panic!()
        };
        let Statement::Assign { expr, .. } = &items[0] else {
            panic!()
        };
        assert_eq!(expr.coeff(VarId(1)), q(1, 10));
        assert_eq!(expr.constant, q(1, 2));
        assert!(parse("X := 1/0;").is_err());
    }

    #[test]
    fn render_nests_blocks() {
        let src = "T ~ UniformDisc(1, 111); # prior\nif 1 < T { observe 4 ~ Poisson(L1); } else { L1 := 0.5*L1; }";
        let p = parse(src).unwrap();
        assert_eq!(
            render(&p),
            "T ~ UniformDisc(1, 111);\nif T > 1 {\n    observe 4 ~ Poisson(L1);\n} else {\n    L1 := 0.5*L1;\n}\n"
        );
        assert_eq!(parse(&render(&p)).unwrap(), p);
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("X ~ Poisson(1);\nY := ;").unwrap_err();
        assert_eq!((e.span.line, e.span.column), (2, 6));
        assert!(e.expected.contains(&"number".to_string()));
        let e = parse("X ~ Poisson(1.);").unwrap_err();
        assert_eq!(e.span.start, 12);
        let e = parse("X ~ Foo(1);").unwrap_err();
        assert!(e.message.contains("unknown distribution"));
        let e = parse("observe X = 1.5;").unwrap_err();
        assert_eq!(e.span.start, 12);
        let e = parse("if X = 1 { skip;").unwrap_err();
        assert_eq!(e.span.start, 16);
    }

    #[test]
    fn precedence_of_connectives() {
        let p = parse("if X = 1 or Y = 2 and not Z = 3 { skip; }").unwrap();
        let Statement::Seq(items) = &p.body else {
            panic!()
        };
        let Statement::If { cond, .. } = &items[0] else {
            panic!()
        };
        assert!(
            matches!(cond, Cond::Or(_, b) if matches!(**b, Cond::And(_, ref n) if matches!(**n, Cond::Not(_))))
        );
        assert_eq!(parse(&render(&p)).unwrap(), p);
    }
}
