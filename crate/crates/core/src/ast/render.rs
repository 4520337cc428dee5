use std::fmt::Write;

use num_traits::{One, Zero};

use crate::kernel::format_rational;

use super::{Affine, CompoundDistribution, Cond, Dist, Distribution, Event, Program, Statement};

/// Canonical text of a program: one statement per line, four-space
/// indentation inside blocks. Parsing the output gives back the same tree.
pub fn render(program: &Program) -> String {
    let mut out = String::new();
    let r = Renderer { program };
    r.block_lines(&program.body, 0, &mut out);
    out
}

struct Renderer<'a> {
    program: &'a Program,
}

const OR: u8 = 0;
const AND: u8 = 1;
const ATOM: u8 = 2;

impl Renderer<'_> {
    fn var(&self, v: super::VarId) -> &str {
        self.program
            .vars
            .get(v.0)
            .map(String::as_str)
            .unwrap_or("?")
    }

    fn block_lines(&self, s: &Statement, depth: usize, out: &mut String) {
        match s {
            Statement::Seq(items) => items.iter().for_each(|s| self.block_lines(s, depth, out)),
            s => self.stmt(s, depth, out),
        }
    }

    fn stmt(&self, s: &Statement, depth: usize, out: &mut String) {
        let pad = "    ".repeat(depth);
        match s {
            Statement::Seq(_) => self.block_lines(s, depth, out),
            Statement::Skip => writeln!(out, "{pad}skip;").unwrap(),
            Statement::Fail => writeln!(out, "{pad}fail;").unwrap(),
            Statement::Assign {
                target,
                expr,
                accumulate,
            } => {
                let op = if *accumulate { "+=" } else { ":=" };
                writeln!(
                    out,
                    "{pad}{} {op} {};",
                    self.var(*target),
                    self.affine(expr)
                )
                .unwrap()
            }
            Statement::Sample {
                target,
                dist,
                accumulate,
            } => {
                let op = if *accumulate { "+~" } else { "~" };
                writeln!(out, "{pad}{} {op} {};", self.var(*target), self.dist(dist)).unwrap()
            }
            Statement::Observe(c) => writeln!(out, "{pad}observe {};", self.cond(c, OR)).unwrap(),
            Statement::ObserveFrom { value, dist } => {
                writeln!(out, "{pad}observe {value} ~ {};", self.dist(dist)).unwrap()
            }
            Statement::If { cond, then, els } => {
                writeln!(out, "{pad}if {} {{", self.cond(cond, OR)).unwrap();
                self.block_lines(then, depth + 1, out);
                if **els == Statement::Skip {
                    writeln!(out, "{pad}}}").unwrap();
                } else {
                    writeln!(out, "{pad}}} else {{").unwrap();
                    self.block_lines(els, depth + 1, out);
                    writeln!(out, "{pad}}}").unwrap();
                }
            }
        }
    }

    fn affine(&self, a: &Affine) -> String {
        let mut terms: Vec<String> = a
            .coeffs
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(v, c)| {
                if c.is_one() {
                    self.var(*v).to_string()
                } else {
                    format!("{}*{}", format_rational(c), self.var(*v))
                }
            })
            .collect();
        if !a.constant.is_zero() || terms.is_empty() {
            terms.push(format_rational(&a.constant));
        }
        terms.join(" + ")
    }

    fn dist(&self, d: &Dist) -> String {
        let lit = format_rational;
        match d {
            Dist::Const(d) => {
                let args = match d {
                    Distribution::Dirac(a)
                    | Distribution::Bernoulli(a)
                    | Distribution::Geometric(a) => lit(a),
                    Distribution::Poisson(a) | Distribution::Exponential(a) => lit(a),
                    Distribution::Categorical(ps) => {
                        ps.iter().map(lit).collect::<Vec<_>>().join(", ")
                    }
                    Distribution::Binomial { n, p } | Distribution::NegBinomial { r: n, p } => {
                        format!("{n}, {}", lit(p))
                    }
                    Distribution::UniformDisc { lo, hi } => format!("{lo}, {hi}"),
                    Distribution::Gamma { shape, rate } => format!("{}, {}", lit(shape), lit(rate)),
                    Distribution::UniformCont { lo, hi } => format!("{}, {}", lit(lo), lit(hi)),
                };
                format!("{}({args})", d.name())
            }
            Dist::Compound(c) => match c {
                CompoundDistribution::Binomial { var, p } => {
                    format!("Binomial({}, {})", self.var(*var), lit(p))
                }
                CompoundDistribution::NegBinomial { var, p } => {
                    format!("NegBinomial({}, {})", self.var(*var), lit(p))
                }
                CompoundDistribution::Poisson { scale, var } if scale.is_one() => {
                    format!("Poisson({})", self.var(*var))
                }
                CompoundDistribution::Poisson { scale, var } => {
                    format!("Poisson({}*{})", lit(scale), self.var(*var))
                }
                CompoundDistribution::Bernoulli { var } => format!("Bernoulli({})", self.var(*var)),
            },
        }
    }

    fn event(&self, e: &Event) -> String {
        match e {
            Event::InSet { var, set } => {
                let items: Vec<String> = set.iter().map(u64::to_string).collect();
                format!("{} in {{{}}}", self.var(*var), items.join(", "))
            }
            Event::Complement(inner) => format!("not ({})", self.event(inner)),
        }
    }

    fn cond(&self, c: &Cond, prec: u8) -> String {
        let (text, own) = match c {
            Cond::Event(e) => (self.event(e), ATOM),
            Cond::Cmp { var, op, value } => {
                (format!("{} {} {value}", self.var(*var), op.symbol()), ATOM)
            }
            Cond::Sampled { value, dist } => (format!("{value} ~ {}", self.dist(dist)), ATOM),
            Cond::Not(a) => (format!("not {}", self.cond(a, ATOM)), ATOM),
            Cond::And(a, b) => (
                format!("{} and {}", self.cond(a, AND), self.cond(b, ATOM)),
                AND,
            ),
            Cond::Or(a, b) => (format!("{} or {}", self.cond(a, OR), self.cond(b, AND)), OR),
        };
        if own < prec {
            format!("({text})")
        } else {
            text
        }
    }
}
