//! Abstract syntax, desugaring and static checks for the program language.
//!
//! One [`Statement`] type covers both the surface language and the core
//! subset; [`desugar`] removes the surface-only forms.

mod desugar;
mod render;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;

pub use desugar::{desugar, DesugarOptions, TEMP_VAR};
pub use render::render;
pub use validate::{
    classify_affine, classify_sample, degree_budget, validate, Support, SupportMap, Validation,
    ValidationError,
};

pub type Rational = BigRational;

/// Index into a program's variable table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Distributions with constant parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Distribution {
    Dirac(Rational),
    Bernoulli(Rational),
    Categorical(Vec<Rational>),
    Binomial {
        n: u64,
        p: Rational,
    },
    /// Uniform on the integers `lo..=hi`.
    UniformDisc {
        lo: u64,
        hi: u64,
    },
    /// Number of failures before the `r`-th success.
    NegBinomial {
        r: u64,
        p: Rational,
    },
    /// Number of failures before the first success.
    Geometric(Rational),
    Poisson(Rational),
    Exponential(Rational),
    Gamma {
        shape: Rational,
        rate: Rational,
    },
    UniformCont {
        lo: Rational,
        hi: Rational,
    },
}

impl Distribution {
    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Dirac(_) => "Dirac",
            Distribution::Bernoulli(_) => "Bernoulli",
            Distribution::Categorical(_) => "Categorical",
            Distribution::Binomial { .. } => "Binomial",
            Distribution::UniformDisc { .. } => "UniformDisc",
            Distribution::NegBinomial { .. } => "NegBinomial",
            Distribution::Geometric(_) => "Geometric",
            Distribution::Poisson(_) => "Poisson",
            Distribution::Exponential(_) => "Exponential",
            Distribution::Gamma { .. } => "Gamma",
            Distribution::UniformCont { .. } => "UniformCont",
        }
    }

    /// True for the distributions whose support is not contained in ℕ.
    pub fn is_continuous(&self) -> bool {
        match self {
            Distribution::Exponential(_)
            | Distribution::Gamma { .. }
            | Distribution::UniformCont { .. } => true,
            Distribution::Dirac(a) => !a.is_integer(),
            _ => false,
        }
    }

    /// True when the support is a finite set of naturals.
    pub fn is_finite(&self) -> bool {
        matches!(
            self,
            Distribution::Dirac(_)
                | Distribution::Bernoulli(_)
                | Distribution::Categorical(_)
                | Distribution::Binomial { .. }
                | Distribution::UniformDisc { .. }
        ) && !self.is_continuous()
    }
}

/// Distributions whose parameter is a program variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CompoundDistribution {
    Binomial {
        var: VarId,
        p: Rational,
    },
    NegBinomial {
        var: VarId,
        p: Rational,
    },
    /// `Poisson(scale · var)`.
    Poisson {
        scale: Rational,
        var: VarId,
    },
    Bernoulli {
        var: VarId,
    },
}

impl CompoundDistribution {
    pub fn var(&self) -> VarId {
        match self {
            CompoundDistribution::Binomial { var, .. }
            | CompoundDistribution::NegBinomial { var, .. }
            | CompoundDistribution::Poisson { var, .. }
            | CompoundDistribution::Bernoulli { var } => *var,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Dist {
    Const(Distribution),
    Compound(CompoundDistribution),
}

impl Dist {
    pub fn is_continuous(&self) -> bool {
        matches!(self, Dist::Const(d) if d.is_continuous())
    }
}

/// `X ∈ A` for a finite set of naturals, or the complement of an event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Event {
    InSet { var: VarId, set: BTreeSet<u64> },
    Complement(Box<Event>),
}

impl Event {
    pub fn var(&self) -> VarId {
        match self {
            Event::InSet { var, .. } => *var,
            Event::Complement(e) => e.var(),
        }
    }

    /// Largest listed value; bounds the derivative order the event needs.
    pub fn max_value(&self) -> u64 {
        match self {
            Event::InSet { set, .. } => set.iter().next_back().copied().unwrap_or(0),
            Event::Complement(e) => e.max_value(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    /// The operator with its operands swapped: `m < X` is `X > m`.
    pub fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            op => op,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Boolean conditions of the surface language. Only [`Cond::Event`] survives desugaring.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cond {
    Event(Event),
    Cmp {
        var: VarId,
        op: CmpOp,
        value: u64,
    },
    /// `m ~ D`: a fresh draw from `D` equals `m`.
    Sampled {
        value: u64,
        dist: Dist,
    },
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

/// `Σ coeffs[v]·v + constant` with nonnegative rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Affine {
    pub coeffs: BTreeMap<VarId, Rational>,
    pub constant: Rational,
}

impl Affine {
    pub fn coeff(&self, v: VarId) -> Rational {
        self.coeffs.get(&v).cloned().unwrap_or_default()
    }

    /// Drops zero coefficients.
    pub fn normalized(mut self) -> Self {
        self.coeffs.retain(|_, c| *c != Rational::default());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Statement {
    Skip,
    Seq(Vec<Statement>),
    /// `target := expr`, or `target += expr` when `accumulate` is set.
    Assign {
        target: VarId,
        expr: Affine,
        accumulate: bool,
    },
    /// `target ~ dist`, or `target +~ dist` when `accumulate` is set.
    Sample {
        target: VarId,
        dist: Dist,
        accumulate: bool,
    },
    If {
        cond: Cond,
        then: Box<Statement>,
        els: Box<Statement>,
    },
    Observe(Cond),
    /// `observe value ~ dist`.
    ObserveFrom {
        value: u64,
        dist: Dist,
    },
    Fail,
}

impl Statement {
    /// Calls `f` on every statement of the tree, parents before children.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Statement)) {
        f(self);
        match self {
            Statement::Seq(items) => items.iter().for_each(|s| s.walk(f)),
            Statement::If { then, els, .. } => {
                then.walk(f);
                els.walk(f);
            }
            _ => {}
        }
    }

    /// Number of leaf statements, not counting `Seq` wrappers.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |s| {
            if !matches!(s, Statement::Seq(_)) {
                n += 1;
            }
        });
        n
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    /// Variable names, indexed by [`VarId`].
    pub vars: Vec<String>,
    pub body: Statement,
    /// Variable whose posterior is reported; `None` only for programs without variables.
    pub query: Option<VarId>,
}

impl Program {
    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.vars[v.0]
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|n| n == name).map(VarId)
    }

    /// The variable assigned or sampled last in program text, ignoring the
    /// desugaring temporary.
    pub fn default_query(&self) -> Option<VarId> {
        let mut last = None;
        self.body.walk(&mut |s| match s {
            Statement::Assign { target, .. } | Statement::Sample { target, .. }
                if self.vars[target.0] != TEMP_VAR =>
            {
                last = Some(*target)
            }
            _ => {}
        });
        last.or_else(|| {
            (0..self.vars.len())
                .rev()
                .map(VarId)
                .find(|v| self.vars[v.0] != TEMP_VAR)
        })
    }

    /// The variable table position for `name`, allocating it if new.
    pub fn intern(&mut self, name: &str) -> VarId {
        match self.lookup(name) {
            Some(v) => v,
            None => {
                self.vars.push(name.to_string());
                VarId(self.vars.len() - 1)
            }
        }
    }
}
