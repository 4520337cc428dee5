use crate::ast::{
    classify_affine, classify_sample, CompoundDistribution, Cond, Dist, Distribution, Event,
    Program, Rational, Statement, SupportMap, VarId, TEMP_VAR,
};

use num_traits::{One, Zero};

use super::{GfError, GfProgram, Node, NodeData, NodeId, Rep};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranslateOptions {
    /// Use `e^t` coordinates for continuous variables. Without it their
    /// generating functions contain logarithms and lose precision.
    pub mgf: bool,
}

impl Default for TranslateOptions {
    fn default() -> Self {
        TranslateOptions { mgf: true }
    }
}

/// Translates a desugared program. Surface constructs that desugaring
/// removes are rejected with [`GfError::NotCore`].
pub fn translate(program: &Program, opts: TranslateOptions) -> Result<GfProgram, GfError> {
    let n = program.nvars();
    let mut b = Builder {
        program,
        nodes: Vec::new(),
        mgf: opts.mgf,
    };
    let mut support = SupportMap::all_discrete(n);
    let start = b.push(Node::One, vec![Rep::Pgf; n]);
    let root = b.stmt(&program.body, start, &mut support)?;
    Ok(GfProgram {
        nodes: b.nodes,
        root,
        vars: program.vars.clone(),
    })
}

struct Builder<'a> {
    program: &'a Program,
    nodes: Vec<NodeData>,
    mgf: bool,
}

impl Builder<'_> {
    fn reps(&self, support: &SupportMap) -> Vec<Rep> {
        (0..support.0.len())
            .map(|v| {
                if self.mgf && !support.is_discrete(VarId(v)) {
                    Rep::Mgf
                } else {
                    Rep::Pgf
                }
            })
            .collect()
    }

    fn is_zero(&self, id: NodeId) -> bool {
        self.nodes[id].node == Node::Zero
    }

    fn zero(&mut self, reps: Vec<Rep>) -> NodeId {
        self.nodes.push(NodeData {
            node: Node::Zero,
            reps,
        });
        self.nodes.len() - 1
    }

    /// Appends a node, folding away zero operands.
    fn push(&mut self, node: Node, reps: Vec<Rep>) -> NodeId {
        match node {
            Node::Add(a, b) if self.is_zero(a) => return b,
            Node::Add(a, b) if self.is_zero(b) => return a,
            Node::Sub(a, b) if self.is_zero(b) => return a,
            Node::Sub(a, b) if a == b => return self.zero(reps),
            Node::Add(..) | Node::Sub(..) | Node::One | Node::Zero => {}
            ref unary => {
                if unary.children().iter().any(|&c| self.is_zero(c)) {
                    return self.zero(reps);
                }
            }
        }
        self.nodes.push(NodeData { node, reps });
        self.nodes.len() - 1
    }

    fn discrete_var(&self, support: &SupportMap, v: VarId) -> Result<usize, GfError> {
        if support.is_discrete(v) {
            Ok(v.0)
        } else {
            Err(GfError::NotCore(format!(
                "event on continuous variable `{}`",
                self.program.name(v)
            )))
        }
    }

    /// Converts `id` from the coordinates of `from` to those of `to`.
    fn convert(&mut self, mut id: NodeId, from: &SupportMap, to: &SupportMap) -> NodeId {
        let (rf, rt) = (self.reps(from), self.reps(to));
        let mut reps = rf.clone();
        for v in 0..rf.len() {
            if rf[v] == Rep::Pgf && rt[v] == Rep::Mgf {
                reps[v] = Rep::Mgf;
                id = self.push(Node::ToMgf { child: id, var: v }, reps.clone());
            }
        }
        id
    }

    /// Runs both branches from their entry nodes and adds the results.
    fn branches(
        &mut self,
        then_entry: NodeId,
        then: &Statement,
        else_entry: NodeId,
        els: &Statement,
        support: &mut SupportMap,
    ) -> Result<NodeId, GfError> {
        let mut s1 = support.clone();
        let a = self.stmt(then, then_entry, &mut s1)?;
        let mut s2 = support.clone();
        let b = self.stmt(els, else_entry, &mut s2)?;
        if self.is_zero(a) {
            *support = s2;
            return Ok(b);
        }
        if self.is_zero(b) {
            *support = s1;
            return Ok(a);
        }
        let joined = s1.join(&s2);
        let a = self.convert(a, &s1, &joined);
        let b = self.convert(b, &s2, &joined);
        let reps = self.reps(&joined);
        *support = joined;
        Ok(self.push(Node::Add(a, b), reps))
    }

    fn observe_event(
        &mut self,
        ev: &Event,
        cur: NodeId,
        support: &SupportMap,
    ) -> Result<NodeId, GfError> {
        let reps = self.reps(support);
        match ev {
            Event::InSet { var, set } => {
                let k = self.discrete_var(support, *var)?;
                Ok(self.push(
                    Node::Slice {
                        child: cur,
                        var: k,
                        set: set.clone(),
                    },
                    reps,
                ))
            }
            Event::Complement(inner) => {
                let s = self.observe_event(inner, cur, support)?;
                Ok(self.push(Node::Sub(cur, s), reps))
            }
        }
    }

    fn stmt(
        &mut self,
        s: &Statement,
        cur: NodeId,
        support: &mut SupportMap,
    ) -> Result<NodeId, GfError> {
        if self.is_zero(cur) {
            return Ok(cur);
        }
        match s {
            Statement::Skip => Ok(cur),
            Statement::Fail => Ok(self.zero(self.reps(support))),
            Statement::Seq(items) => self.seq(items, cur, support),
            Statement::Assign {
                target,
                expr,
                accumulate,
            } => {
                let k = target.0;
                let mut coeffs: Vec<(usize, Rational)> = expr
                    .coeffs
                    .iter()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(v, c)| (v.0, c.clone()))
                    .collect();
                if *accumulate {
                    match coeffs.iter_mut().find(|(v, _)| *v == k) {
                        Some((_, c)) => *c += Rational::one(),
                        None => coeffs.push((k, Rational::one())),
                    }
                }
                if coeffs == [(k, Rational::one())] && expr.constant.is_zero() {
                    return Ok(cur);
                }
                let after = classify_affine(
                    support,
                    coeffs.iter().map(|(v, c)| (VarId(*v), c.clone())),
                    &expr.constant,
                );
                support.0[k] = after;
                let reps = self.reps(support);
                Ok(self.push(
                    Node::Affine {
                        child: cur,
                        var: k,
                        coeffs,
                        constant: expr.constant.clone(),
                    },
                    reps,
                ))
            }
            Statement::Sample {
                target,
                dist,
                accumulate,
            } => {
                let k = target.0;
                let before = self.reps(support);
                support.0[k] = classify_sample(support, *target, dist, *accumulate);
                let after = self.reps(support);
                let mut child = cur;
                if *accumulate && before[k] == Rep::Pgf && after[k] == Rep::Mgf {
                    child = self.push(Node::ToMgf { child, var: k }, after.clone());
                }
                let node = match dist {
                    Dist::Const(d) => Node::SampleConst {
                        child,
                        var: k,
                        dist: d.clone(),
                        accumulate: *accumulate,
                    },
                    Dist::Compound(c) => Node::SampleCompound {
                        child,
                        var: k,
                        dist: c.clone(),
                        accumulate: *accumulate,
                    },
                };
                Ok(self.push(node, after))
            }
            Statement::If { cond, then, els } => {
                let Cond::Event(ev) = cond else {
                    return Err(GfError::NotCore("non-event branch condition".into()));
                };
                match ev {
                    Event::Complement(inner) => {
                        let swapped = Statement::If {
                            cond: Cond::Event((**inner).clone()),
                            then: els.clone(),
                            els: then.clone(),
                        };
                        self.stmt(&swapped, cur, support)
                    }
                    Event::InSet { .. } => {
                        let inside = self.observe_event(ev, cur, support)?;
                        let reps = self.reps(support);
                        let outside = self.push(Node::Sub(cur, inside), reps);
                        self.branches(inside, then, outside, els, support)
                    }
                }
            }
            Statement::Observe(Cond::Event(ev)) => self.observe_event(ev, cur, support),
            Statement::Observe(_) => Err(GfError::NotCore("non-event observation".into())),
            Statement::ObserveFrom { value, dist } => {
                let reps = self.reps(support);
                match dist {
                    Dist::Const(d) => {
                        if d.is_continuous() {
                            return Err(GfError::NotCore(format!(
                                "observation from continuous {}",
                                d.name()
                            )));
                        }
                        Ok(self.push(
                            Node::Weight {
                                child: cur,
                                dist: d.clone(),
                                set: [*value].into(),
                                complement: false,
                            },
                            reps,
                        ))
                    }
                    Dist::Compound(CompoundDistribution::Bernoulli { .. }) if *value >= 2 => {
                        Ok(self.zero(reps))
                    }
                    Dist::Compound(c) => Ok(self.push(
                        Node::ObserveCompound {
                            child: cur,
                            value: *value,
                            dist: c.clone(),
                        },
                        reps,
                    )),
                }
            }
        }
    }

    fn seq(
        &mut self,
        items: &[Statement],
        mut cur: NodeId,
        support: &mut SupportMap,
    ) -> Result<NodeId, GfError> {
        let mut i = 0;
        while i < items.len() {
            if let Some((dist, set, then, els)) = self.mixture_pattern(&items[i..]) {
                // `$tmp ~ D; if $tmp ∈ A {..} else {..}`: the scratch value is
                // never read again, so the branches only need P[D ∈ A].
                let reps = self.reps(support);
                let w = |complement| Node::Weight {
                    child: cur,
                    dist: dist.clone(),
                    set: set.clone(),
                    complement,
                };
                let inside = self.push(w(false), reps.clone());
                let outside = self.push(w(true), reps);
                cur = self.branches(inside, then, outside, els, support)?;
                i += 2;
                continue;
            }
            cur = self.stmt(&items[i], cur, support)?;
            i += 1;
        }
        Ok(cur)
    }

    fn mixture_pattern<'s>(
        &self,
        items: &'s [Statement],
    ) -> Option<(
        &'s Distribution,
        &'s std::collections::BTreeSet<u64>,
        &'s Statement,
        &'s Statement,
    )> {
        let [Statement::Sample {
            target,
            dist: Dist::Const(d),
            accumulate: false,
        }, Statement::If {
            cond: Cond::Event(Event::InSet { var, set }),
            then,
            els,
        }, ..] = items
        else {
            return None;
        };
        if var != target || self.program.name(*target) != TEMP_VAR || d.is_continuous() {
            return None;
        }
        Some((d, set, then, els))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{desugar, DesugarOptions};
    use crate::parser::parse;

    fn build(src: &str) -> GfProgram {
        let p = desugar(&parse(src).unwrap(), DesugarOptions::default());
        translate(&p, TranslateOptions::default()).unwrap()
    }

    #[test]
    fn fail_everywhere_folds_to_zero() {
        let g = build("X ~ Poisson(2); fail; X := X + 1;");
        assert_eq!(g.nodes[g.root].node, Node::Zero);
    }

    #[test]
    fn sampled_test_becomes_weights() {
        let g = build("X ~ Poisson(2); if 1 ~ Bernoulli(0.3) { X := X + 1; }");
        assert!(g.nodes.iter().any(|n| matches!(
            n.node,
            Node::Weight {
                complement: true,
                ..
            }
        )));
        assert!(!g
            .nodes
            .iter()
            .any(|n| matches!(n.node, Node::SampleConst { var: 1, .. })));
    }

    #[test]
    fn continuous_branches_switch_coordinates() {
        let g = build("if X = 0 { L ~ Exponential(1); } else { L ~ Poisson(1); }");
        assert_eq!(g.output_reps(), &[Rep::Pgf, Rep::Mgf]);
        assert!(g
            .nodes
            .iter()
            .any(|n| matches!(n.node, Node::ToMgf { var: 1, .. })));
        let no_mgf = translate(
            &parse("L ~ Exponential(1);").unwrap(),
            TranslateOptions { mgf: false },
        )
        .unwrap();
        assert_eq!(no_mgf.output_reps(), &[Rep::Pgf]);
    }

    #[test]
    fn event_on_continuous_is_rejected() {
        let p = parse("L ~ Exponential(1); observe L = 0;").unwrap();
        assert!(matches!(
            translate(&p, TranslateOptions::default()),
            Err(GfError::NotCore(_))
        ));
    }
}
