use std::collections::BTreeSet;

use super::{CmpOp, Cond, Dist, Event, Program, Rational, Statement, VarId};

/// Name of the scratch variable introduced for `if m ~ D` and for the
/// fresh-variable form of observations. It is not a valid identifier in the
/// concrete syntax, so it cannot collide with user variables.
pub const TEMP_VAR: &str = "$tmp";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DesugarOptions {
    /// Expand every observation into a fresh sample plus `if … {skip} else {fail}`.
    pub naive_observe: bool,
}

/// Rewrites a program into the core subset: `+=`, comparisons, boolean
/// connectives and `if m ~ D` disappear. `+~` stays as an accumulating
/// sample. Idempotent.
pub fn desugar(program: &Program, opts: DesugarOptions) -> Program {
    let mut out = program.clone();
    let mut cx = Cx {
        vars: &mut out.vars,
        opts,
    };
    out.body = cx.stmt(&program.body);
    out
}

struct Cx<'a> {
    vars: &'a mut Vec<String>,
    opts: DesugarOptions,
}

fn cmp_event(var: VarId, op: CmpOp, m: u64) -> Event {
    let upto = |n: u64| -> BTreeSet<u64> { (0..n).collect() };
    let set = |s: BTreeSet<u64>| Event::InSet { var, set: s };
    match op {
        CmpOp::Eq => set(BTreeSet::from([m])),
        CmpOp::Lt => set(upto(m)),
        CmpOp::Le => set(upto(m + 1)),
        CmpOp::Gt => Event::Complement(Box::new(set(upto(m + 1)))),
        CmpOp::Ge => Event::Complement(Box::new(set(upto(m)))),
        CmpOp::Ne => Event::Complement(Box::new(set(BTreeSet::from([m])))),
    }
}

fn simplify(e: &Event) -> Event {
    match e {
        Event::Complement(inner) => match simplify(inner) {
            Event::Complement(x) => *x,
            x => Event::Complement(Box::new(x)),
        },
        x => x.clone(),
    }
}

/// The event a condition denotes when it needs no fresh variable.
fn as_event(c: &Cond) -> Option<Event> {
    match c {
        Cond::Event(e) => Some(simplify(e)),
        Cond::Cmp { var, op, value } => Some(cmp_event(*var, *op, *value)),
        Cond::Not(inner) => as_event(inner).map(|e| simplify(&Event::Complement(Box::new(e)))),
        _ => None,
    }
}

fn seq(items: Vec<Statement>) -> Statement {
    let mut flat = Vec::with_capacity(items.len());
    for s in items {
        match s {
            Statement::Seq(inner) => flat.extend(inner),
            s => flat.push(s),
        }
    }
    Statement::Seq(flat)
}

impl Cx<'_> {
    fn temp(&mut self) -> VarId {
        match self.vars.iter().position(|n| n == TEMP_VAR) {
            Some(i) => VarId(i),
            None => {
                self.vars.push(TEMP_VAR.to_string());
                VarId(self.vars.len() - 1)
            }
        }
    }

    fn stmt(&mut self, s: &Statement) -> Statement {
        match s {
            Statement::Skip => Statement::Skip,
            Statement::Fail => Statement::Fail,
            Statement::Seq(items) => seq(items.iter().map(|s| self.stmt(s)).collect()),
            Statement::Assign {
                target,
                expr,
                accumulate,
            } => {
                let mut expr = expr.clone();
                if *accumulate {
                    let c = expr.coeff(*target) + Rational::from_integer(1.into());
                    expr.coeffs.insert(*target, c);
                }
                Statement::Assign {
                    target: *target,
                    expr: expr.normalized(),
                    accumulate: false,
                }
            }
            Statement::Sample { .. } => s.clone(),
            Statement::If { cond, then, els } => {
                let then = self.stmt(then);
                let els = self.stmt(els);
                self.branch(cond, then, els)
            }
            Statement::Observe(c) => self.observe(c),
            Statement::ObserveFrom { value, dist } => {
                if self.opts.naive_observe {
                    self.observe_fresh(*value, dist)
                } else {
                    s.clone()
                }
            }
        }
    }

    fn observe_fresh(&mut self, value: u64, dist: &Dist) -> Statement {
        let t = self.temp();
        seq(vec![
            Statement::Sample {
                target: t,
                dist: dist.clone(),
                accumulate: false,
            },
            Statement::If {
                cond: Cond::Event(Event::InSet {
                    var: t,
                    set: BTreeSet::from([value]),
                }),
                then: Box::new(Statement::Skip),
                els: Box::new(Statement::Fail),
            },
        ])
    }

    fn observe(&mut self, c: &Cond) -> Statement {
        if self.opts.naive_observe {
            return self.branch(c, Statement::Skip, Statement::Fail);
        }
        if let Some(e) = as_event(c) {
            return Statement::Observe(Cond::Event(e));
        }
        match c {
            Cond::Sampled { value, dist } => Statement::ObserveFrom {
                value: *value,
                dist: dist.clone(),
            },
            Cond::And(a, b) => {
                let a = self.observe(a);
                let b = self.observe(b);
                seq(vec![a, b])
            }
            _ => self.branch(c, Statement::Skip, Statement::Fail),
        }
    }

    /// `if c {then} else {els}` with already-desugared branches.
    fn branch(&mut self, c: &Cond, then: Statement, els: Statement) -> Statement {
        match c {
            Cond::Event(Event::InSet { .. }) => Statement::If {
                cond: c.clone(),
                then: Box::new(then),
                els: Box::new(els),
            },
            Cond::Event(Event::Complement(e)) => {
                self.branch(&Cond::Event((**e).clone()), els, then)
            }
            Cond::Cmp { var, op, value } => {
                self.branch(&Cond::Event(cmp_event(*var, *op, *value)), then, els)
            }
            Cond::Sampled { value, dist } => {
                let t = self.temp();
                seq(vec![
                    Statement::Sample {
                        target: t,
                        dist: dist.clone(),
                        accumulate: false,
                    },
                    Statement::If {
                        cond: Cond::Event(Event::InSet {
                            var: t,
                            set: BTreeSet::from([*value]),
                        }),
                        then: Box::new(then),
                        els: Box::new(els),
                    },
                ])
            }
            Cond::Not(inner) => self.branch(inner, els, then),
            Cond::And(a, b) => {
                let inner = self.branch(b, then, els.clone());
                self.branch(a, inner, els)
            }
            Cond::Or(a, b) => {
                let inner = self.branch(b, then.clone(), els);
                self.branch(a, then, inner)
            }
        }
    }
}
