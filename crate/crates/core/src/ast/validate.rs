use num_traits::{One, Zero};

use super::{
    CompoundDistribution, Cond, Dist, Distribution, Event, Program, Rational, Statement, VarId,
};

/// Whether a variable is supported on ℕ or on the nonnegative reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Support {
    DiscreteNat,
    ContinuousNonneg,
}

impl Support {
    fn join(self, other: Support) -> Support {
        if self == Support::ContinuousNonneg || other == Support::ContinuousNonneg {
            Support::ContinuousNonneg
        } else {
            Support::DiscreteNat
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMap(pub Vec<Support>);

impl SupportMap {
    pub fn all_discrete(nvars: usize) -> Self {
        SupportMap(vec![Support::DiscreteNat; nvars])
    }

    pub fn get(&self, v: VarId) -> Support {
        self.0[v.0]
    }

    pub fn is_discrete(&self, v: VarId) -> bool {
        self.get(v) == Support::DiscreteNat
    }

    /// Pointwise join of the classifications after an `if`.
    pub fn join(&self, other: &SupportMap) -> SupportMap {
        SupportMap(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.join(*b))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    /// Classification at the end of the program.
    pub support: SupportMap,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("event on `{var}`, which is not supported on the naturals at this point")]
    UnsupportedEvent { var: String },
    #[error("observation from a continuous distribution: {dist}")]
    ContinuousObservation { dist: String },
    #[error("`{dist}` needs a count parameter, but `{var}` is continuous at this point")]
    ContinuousCount { var: String, dist: String },
    #[error("invalid parameter for {dist}: {reason}")]
    InvalidParameter { dist: &'static str, reason: String },
}

/// Classification of `target` after `target ~ dist` (or `+~`).
pub fn classify_sample(
    support: &SupportMap,
    target: VarId,
    dist: &Dist,
    accumulate: bool,
) -> Support {
    let drawn = if dist.is_continuous() {
        Support::ContinuousNonneg
    } else {
        Support::DiscreteNat
    };
    if accumulate {
        drawn.join(support.get(target))
    } else {
        drawn
    }
}

/// Classification of the left-hand side after an affine assignment. Any
/// non-integer coefficient leaves ℕ, so it is treated as continuous.
pub fn classify_affine(
    support: &SupportMap,
    coeffs: impl IntoIterator<Item = (VarId, Rational)>,
    constant: &Rational,
) -> Support {
    let mut s = if constant.is_integer() {
        Support::DiscreteNat
    } else {
        Support::ContinuousNonneg
    };
    for (v, c) in coeffs {
        if c.is_zero() {
            continue;
        }
        if !c.is_integer() {
            s = Support::ContinuousNonneg;
        }
        s = s.join(support.get(v));
    }
    s
}

fn check_prob(dist: &'static str, p: &Rational) -> Result<(), ValidationError> {
    if p < &Rational::zero() || p > &Rational::one() {
        return Err(ValidationError::InvalidParameter {
            dist,
            reason: format!("probability {p} outside [0, 1]"),
        });
    }
    Ok(())
}

fn invalid(dist: &'static str, reason: impl Into<String>) -> ValidationError {
    ValidationError::InvalidParameter {
        dist,
        reason: reason.into(),
    }
}

fn check_distribution(d: &Distribution) -> Result<(), ValidationError> {
    let name = d.name();
    let zero = Rational::zero();
    match d {
        Distribution::Dirac(_) => {}
        Distribution::Bernoulli(p) | Distribution::Binomial { p, .. } => check_prob(name, p)?,
        Distribution::Categorical(ps) => {
            if ps.is_empty() {
                return Err(invalid(name, "no weights"));
            }
            for p in ps {
                check_prob(name, p)?;
            }
            let total: Rational = ps.iter().sum();
            if !total.is_one() {
                return Err(invalid(name, format!("weights sum to {total}, not 1")));
            }
        }
        Distribution::UniformDisc { lo, hi } => {
            if lo > hi {
                return Err(invalid(name, format!("empty range {lo}..{hi}")));
            }
        }
        Distribution::NegBinomial { p, .. } | Distribution::Geometric(p) => {
            check_prob(name, p)?;
            if p.is_zero() {
                return Err(invalid(name, "success probability must be positive"));
            }
        }
        Distribution::Poisson(l) => {
            if l < &zero {
                return Err(invalid(name, "negative rate"));
            }
        }
        Distribution::Exponential(l) => {
            if l <= &zero {
                return Err(invalid(name, "rate must be positive"));
            }
        }
        Distribution::Gamma { shape, rate } => {
            if shape <= &zero || rate <= &zero {
                return Err(invalid(name, "shape and rate must be positive"));
            }
        }
        Distribution::UniformCont { lo, hi } => {
            if lo > hi {
                return Err(invalid(name, format!("empty interval [{lo}, {hi}]")));
            }
        }
    }
    Ok(())
}

struct Checker<'a> {
    program: &'a Program,
    warnings: Vec<String>,
    /// Variables known to lie in [0, 1], as required by `Bernoulli(X)`.
    unit: Vec<bool>,
}

impl Checker<'_> {
    fn name(&self, v: VarId) -> Result<String, ValidationError> {
        self.program
            .vars
            .get(v.0)
            .cloned()
            .ok_or_else(|| ValidationError::UnknownVariable(v.to_string()))
    }

    fn dist(&mut self, support: &SupportMap, dist: &Dist) -> Result<(), ValidationError> {
        match dist {
            Dist::Const(d) => check_distribution(d),
            Dist::Compound(c) => {
                let v = c.var();
                let name = self.name(v)?;
                match c {
                    CompoundDistribution::Binomial { p, .. }
                    | CompoundDistribution::NegBinomial { p, .. } => {
                        let dname = if matches!(c, CompoundDistribution::Binomial { .. }) {
                            "Binomial"
                        } else {
                            "NegBinomial"
                        };
                        check_prob(dname, p)?;
                        if dname == "NegBinomial" && p.is_zero() {
                            return Err(invalid(dname, "success probability must be positive"));
                        }
                        if !support.is_discrete(v) {
                            return Err(ValidationError::ContinuousCount {
                                var: name,
                                dist: dname.into(),
                            });
                        }
                    }
                    CompoundDistribution::Poisson { scale, .. } => {
                        if scale < &Rational::zero() {
                            return Err(invalid("Poisson", "negative rate"));
                        }
                    }
                    CompoundDistribution::Bernoulli { .. } => {
                        if !self.unit[v.0] {
                            self.warnings.push(format!(
                                "Bernoulli({name}) requires {name} to lie in [0, 1]; this is not checked statically"
                            ));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn event(&self, support: &SupportMap, e: &Event) -> Result<(), ValidationError> {
        let v = e.var();
        let name = self.name(v)?;
        if !support.is_discrete(v) {
            return Err(ValidationError::UnsupportedEvent { var: name });
        }
        Ok(())
    }

    fn cond(&mut self, support: &SupportMap, c: &Cond) -> Result<(), ValidationError> {
        match c {
            Cond::Event(e) => self.event(support, e),
            Cond::Cmp { var, .. } => {
                let name = self.name(*var)?;
                if !support.is_discrete(*var) {
                    return Err(ValidationError::UnsupportedEvent { var: name });
                }
                Ok(())
            }
            Cond::Sampled { dist, .. } => {
                self.observed_dist(support, dist)?;
                self.dist(support, dist)
            }
            Cond::Not(a) => self.cond(support, a),
            Cond::And(a, b) | Cond::Or(a, b) => {
                self.cond(support, a)?;
                self.cond(support, b)
            }
        }
    }

    fn observed_dist(&self, _support: &SupportMap, dist: &Dist) -> Result<(), ValidationError> {
        if let Dist::Const(d) = dist {
            if d.is_continuous() {
                return Err(ValidationError::ContinuousObservation {
                    dist: d.name().into(),
                });
            }
        }
        Ok(())
    }

    fn stmt(&mut self, support: &mut SupportMap, s: &Statement) -> Result<(), ValidationError> {
        match s {
            Statement::Skip | Statement::Fail => {}
            Statement::Seq(items) => {
                for s in items {
                    self.stmt(support, s)?;
                }
            }
            Statement::Assign {
                target,
                expr,
                accumulate,
            } => {
                self.name(*target)?;
                for v in expr.coeffs.keys() {
                    self.name(*v)?;
                }
                let mut coeffs: Vec<(VarId, Rational)> =
                    expr.coeffs.iter().map(|(v, c)| (*v, c.clone())).collect();
                if *accumulate {
                    coeffs.push((*target, Rational::one()));
                }
                let s = classify_affine(support, coeffs.iter().cloned(), &expr.constant);
                support.0[target.0] = s;
                let self_only = coeffs.iter().all(|(v, c)| c.is_zero() || *v == *target);
                self.unit[target.0] = self_only
                    && self.unit[target.0]
                    && coeffs.iter().all(|(_, c)| c <= &Rational::one())
                    && expr.constant.is_zero();
            }
            Statement::Sample {
                target,
                dist,
                accumulate,
            } => {
                self.name(*target)?;
                self.dist(support, dist)?;
                support.0[target.0] = classify_sample(support, *target, dist, *accumulate);
                self.unit[target.0] = !*accumulate
                    && match dist {
                        Dist::Const(Distribution::Bernoulli(_))
                        | Dist::Compound(CompoundDistribution::Bernoulli { .. }) => true,
                        Dist::Const(Distribution::UniformCont { hi, .. }) => hi <= &Rational::one(),
                        Dist::Const(Distribution::Dirac(a)) => a <= &Rational::one(),
                        _ => false,
                    };
            }
            Statement::If { cond, then, els } => {
                self.cond(support, cond)?;
                let mut a = support.clone();
                let mut b = support.clone();
                let unit = self.unit.clone();
                self.stmt(&mut a, then)?;
                let unit_then = std::mem::replace(&mut self.unit, unit);
                self.stmt(&mut b, els)?;
                for (u, t) in self.unit.iter_mut().zip(unit_then) {
                    *u = *u && t;
                }
                *support = a.join(&b);
            }
            Statement::Observe(c) => self.cond(support, c)?,
            Statement::ObserveFrom { dist, .. } => {
                self.observed_dist(support, dist)?;
                self.dist(support, dist)?;
            }
        }
        Ok(())
    }
}

/// Checks the syntactic restrictions and classifies every variable's support.
pub fn validate(program: &Program) -> Result<Validation, ValidationError> {
    let mut support = SupportMap::all_discrete(program.nvars());
    let mut checker = Checker {
        program,
        warnings: vec![],
        unit: vec![false; program.nvars()],
    };
    checker.stmt(&mut support, &program.body)?;
    if let Some(q) = program.query {
        checker.name(q)?;
    }
    Ok(Validation {
        support,
        warnings: checker.warnings,
    })
}

fn cond_budget(c: &Cond) -> u64 {
    match c {
        Cond::Event(e) => e.max_value(),
        Cond::Cmp { value, .. } | Cond::Sampled { value, .. } => *value,
        Cond::Not(a) => cond_budget(a),
        Cond::And(a, b) | Cond::Or(a, b) => cond_budget(a) + cond_budget(b),
    }
}

/// Sum of all observed values and event maxima plus the requested output
/// order: an upper bound on the Taylor degree any evaluation needs.
pub fn degree_budget(program: &Program, query_order: u64, mass_order: u64) -> u64 {
    let mut d = 0;
    program.body.walk(&mut |s| match s {
        Statement::ObserveFrom { value, .. } => d += value,
        Statement::Observe(c) | Statement::If { cond: c, .. } => d += cond_budget(c),
        _ => {}
    });
    d + query_order.max(mass_order)
}
