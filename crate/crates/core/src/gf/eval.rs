//! Demand-driven evaluation of a translated program.
//!
//! Every node gets a static truncation: the coefficients its parents need,
//! derived from the requested output truncation by one pass from the root
//! towards the leaves. Evaluation then happens in two phases. Planning walks
//! the nodes from the root down and records, for each node, the expansion
//! points its parents ask for (sharing identical requests when memoization
//! is on). Execution walks the nodes upwards, computes each planned
//! expansion once and frees it as soon as its last consumer has run.

use std::rc::Rc;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::ast::{CompoundDistribution, Rational};
use crate::kernel::{KernelCtx, Scalar};
use crate::taylor::{TaylorPoly, Truncation};

use super::series::{inv_factorial, lah_numbers, probability_of, Ring};
use super::{GfError, GfProgram, Node, NodeId, Rep};

/// Where a variable's coordinate is anchored: `x = 0` extracts probability
/// masses, the unit point (`x = 1`, or `t = 0` for mgf coordinates) gives
/// moments and the total mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Zero,
    One,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalRequest {
    pub anchors: Vec<Anchor>,
    pub truncation: Truncation,
}

impl EvalRequest {
    /// Expansion in `var` alone up to `order`, every other variable at the unit point.
    pub fn marginal(nvars: usize, var: usize, anchor: Anchor, order: usize) -> Self {
        let mut anchors = vec![Anchor::One; nvars];
        anchors[var] = anchor;
        let mask: Vec<bool> = (0..nvars).map(|i| i == var).collect();
        EvalRequest {
            anchors,
            truncation: Truncation::masked(&mask, order),
        }
    }

    /// The total mass alone.
    pub fn evidence(nvars: usize) -> Self {
        EvalRequest {
            anchors: vec![Anchor::One; nvars],
            truncation: Truncation::full(nvars, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub ctx: KernelCtx,
    /// Share expansions requested at the same point by several consumers.
    pub memoize: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            ctx: KernelCtx::default(),
            memoize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    /// Node expansions computed.
    pub expansions: usize,
}

/// Taylor expansion of the program's final (unnormalized) generating
/// function at the requested point.
pub fn eval<T: Scalar>(
    gf: &GfProgram,
    req: &EvalRequest,
    opts: &EvalOptions,
) -> Result<TaylorPoly<T>, GfError> {
    eval_with_stats(gf, req, opts).map(|(p, _)| p)
}

struct Entry<T> {
    base: Vec<T>,
    children: Vec<(NodeId, usize)>,
    pending: usize,
    value: Option<Rc<TaylorPoly<T>>>,
}

pub fn eval_with_stats<T: Scalar>(
    gf: &GfProgram,
    req: &EvalRequest,
    opts: &EvalOptions,
) -> Result<(TaylorPoly<T>, EvalStats), GfError> {
    let n = gf.nvars();
    if req.anchors.len() != n || req.truncation.nvars() != n {
        return Err(GfError::BadRequest(format!(
            "expected {n} variables, got {} anchors and {} truncation limits",
            req.anchors.len(),
            req.truncation.nvars()
        )));
    }
    let root = gf.root;
    let root_base = gf.nodes[root]
        .reps
        .iter()
        .zip(&req.anchors)
        .enumerate()
        .map(|(i, (rep, anchor))| match (anchor, rep) {
            (Anchor::One, r) => Ok(r.unit()),
            (Anchor::Zero, Rep::Pgf) => Ok(T::zero()),
            (Anchor::Zero, Rep::Mgf) => Err(GfError::ContinuousAnchor {
                var: gf.vars()[i].clone(),
            }),
        })
        .collect::<Result<Vec<T>, _>>()?;
    let demand = demands(gf, &req.truncation);

    let mut entries: Vec<Vec<Entry<T>>> = (0..=root).map(|_| Vec::new()).collect();
    entries[root].push(Entry {
        base: root_base,
        children: vec![],
        pending: 1,
        value: None,
    });
    for id in (0..=root).rev() {
        for e in 0..entries[id].len() {
            let requests = child_bases(gf, id, &entries[id][e].base, &opts.ctx)?;
            let mut links = Vec::with_capacity(requests.len());
            for (c, base) in requests {
                let found = if opts.memoize {
                    entries[c].iter().position(|x| x.base == base)
                } else {
                    None
                };
                let idx = found.unwrap_or_else(|| {
                    entries[c].push(Entry {
                        base,
                        children: vec![],
                        pending: 0,
                        value: None,
                    });
                    entries[c].len() - 1
                });
                entries[c][idx].pending += 1;
                links.push((c, idx));
            }
            entries[id][e].children = links;
        }
    }

    let mut stats = EvalStats::default();
    for id in 0..=root {
        for e in 0..entries[id].len() {
            let links = std::mem::take(&mut entries[id][e].children);
            let inputs: Vec<Rc<TaylorPoly<T>>> = links
                .iter()
                .map(|&(c, i)| {
                    entries[c][i]
                        .value
                        .clone()
                        .expect("children are evaluated first")
                })
                .collect();
            let t = demand[id].as_ref().expect("planned nodes have a demand");
            let value = apply(gf, id, &entries[id][e].base, t, &inputs, &opts.ctx)?;
            stats.expansions += 1;
            drop(inputs);
            for (c, i) in links {
                let ent = &mut entries[c][i];
                ent.pending -= 1;
                if ent.pending == 0 {
                    ent.value = None;
                }
            }
            entries[id][e].value = Some(Rc::new(value));
        }
    }
    let out = entries[root][0].value.take().expect("root evaluated");
    let out = Rc::try_unwrap(out).unwrap_or_else(|rc| (*rc).clone());
    Ok((out, stats))
}

fn cap(mut t: Truncation) -> Truncation {
    let total = t.total;
    t.limits.iter_mut().for_each(|l| *l = (*l).min(total));
    t
}

fn join(a: &Truncation, b: &Truncation) -> Truncation {
    Truncation {
        total: a.total.max(b.total),
        limits: a
            .limits
            .iter()
            .zip(&b.limits)
            .map(|(x, y)| *x.max(y))
            .collect(),
    }
}

/// The truncation a node needs from its input(s) to produce `t`.
fn child_demand(node: &Node, t: &Truncation) -> Truncation {
    let mut d = t.clone();
    match node {
        Node::One | Node::Zero => {}
        Node::Add(..) | Node::Sub(..) | Node::Weight { .. } | Node::ToMgf { .. } => {}
        Node::SampleConst {
            var, accumulate, ..
        } => {
            if !accumulate {
                d.limits[*var] = 0;
            }
        }
        Node::SampleCompound {
            var,
            dist,
            accumulate,
            ..
        } => {
            let (k, j) = (*var, dist.var().0);
            if let CompoundDistribution::Bernoulli { .. } = dist {
                d.total += 1;
                d.limits[j] += 1;
                if !accumulate {
                    d.limits[k] = usize::from(j == k);
                }
            } else if !accumulate && j != k {
                d.limits[j] += t.limits[k];
                d.limits[k] = 0;
            } else if *accumulate && j != k {
                d.limits[j] += t.limits[k];
            }
        }
        Node::Affine { var, coeffs, .. } => {
            let k = *var;
            let lk = t.limits[k];
            d.limits[k] = 0;
            for (i, _) in coeffs {
                d.limits[*i] = if *i == k { lk } else { t.limits[*i] + lk };
            }
        }
        Node::Slice { var, set, .. } => {
            let m = set.iter().next_back().copied().unwrap_or(0) as usize;
            d.total += m;
            d.limits[*var] = m;
        }
        Node::ObserveCompound { value, dist, .. } => {
            let m = match dist {
                CompoundDistribution::Bernoulli { .. } => 1,
                _ => *value as usize,
            };
            d.total += m;
            d.limits[dist.var().0] += m;
        }
    }
    cap(d)
}

fn demands(gf: &GfProgram, out: &Truncation) -> Vec<Option<Truncation>> {
    let mut demand: Vec<Option<Truncation>> = vec![None; gf.root + 1];
    demand[gf.root] = Some(out.clone());
    for id in (0..=gf.root).rev() {
        let Some(t) = demand[id].clone() else {
            continue;
        };
        let node = &gf.nodes[id].node;
        let d = child_demand(node, &t);
        for c in node.children() {
            demand[c] = Some(match &demand[c] {
                Some(prev) => join(prev, &d),
                None => d.clone(),
            });
        }
    }
    demand
}

fn q<T: Scalar>(r: &Rational, ctx: &KernelCtx) -> T {
    T::from_rational(r, ctx)
}

fn unsupported(what: &str) -> GfError {
    GfError::NotCore(what.to_string())
}

/// `x_k^a` at a point, or `e^{a t}` for an mgf coordinate.
fn coord_power<T: Scalar>(rep: Rep, v: &T, a: &Rational, ctx: &KernelCtx) -> Result<T, GfError> {
    Ok(match rep {
        Rep::Pgf => v.pow_rational(a, ctx)?,
        Rep::Mgf => q::<T>(a, ctx).mul(v).exp()?,
    })
}

/// Value at the point of the generating function of a compound draw given
/// its parameter is 1, in the coordinate of `rep`; mgf coordinates use the
/// additive form of the Poisson exponent.
fn compound_factor<T: Scalar>(
    dist: &CompoundDistribution,
    e: &T,
    rep_param: Rep,
    ctx: &KernelCtx,
) -> Result<T, GfError> {
    let one = T::one();
    Ok(match dist {
        CompoundDistribution::Binomial { p, .. } => {
            let p: T = q(p, ctx);
            one.sub(&p).add(&p.mul(e))
        }
        CompoundDistribution::NegBinomial { p, .. } => {
            let p: T = q(p, ctx);
            p.div(&one.sub(&one.sub(&p).mul(e)))?
        }
        CompoundDistribution::Poisson { scale, .. } => {
            let u = q::<T>(scale, ctx).mul(&e.sub(&one));
            match rep_param {
                Rep::Pgf => u.exp()?,
                Rep::Mgf => u,
            }
        }
        CompoundDistribution::Bernoulli { .. } => unreachable!("handled separately"),
    })
}

/// Points at which the inputs of node `id` must be expanded so that the
/// node's output is expanded at `b`.
fn child_bases<T: Scalar>(
    gf: &GfProgram,
    id: NodeId,
    b: &[T],
    ctx: &KernelCtx,
) -> Result<Vec<(NodeId, Vec<T>)>, GfError> {
    let nd = &gf.nodes[id];
    let reps = &nd.reps;
    let creps = |c: NodeId| &gf.nodes[c].reps;
    let mut c = b.to_vec();
    let child = match &nd.node {
        Node::One | Node::Zero => return Ok(vec![]),
        Node::Add(x, y) | Node::Sub(x, y) => return Ok(vec![(*x, c.clone()), (*y, c)]),
        Node::Weight { child, .. } => *child,
        Node::ToMgf { child, var } => {
            c[*var] = b[*var].exp()?;
            *child
        }
        Node::SampleConst {
            child,
            var,
            accumulate,
            ..
        } => {
            if !accumulate {
                c[*var] = creps(*child)[*var].unit();
            }
            *child
        }
        Node::SampleCompound {
            child,
            var,
            dist,
            accumulate,
        } => {
            let (k, j) = (*var, dist.var().0);
            let cr = creps(*child);
            if let CompoundDistribution::Bernoulli { .. } = dist {
                if !accumulate {
                    c[k] = cr[k].unit();
                }
                return Ok(vec![(*child, c)]);
            }
            let e = match reps[k] {
                Rep::Pgf => b[k].clone(),
                Rep::Mgf => b[k].exp()?,
            };
            let rep_j = if j == k { cr[k] } else { reps[j] };
            let f = compound_factor(dist, &e, rep_j, ctx)?;
            let h = if *accumulate || j != k {
                match rep_j {
                    Rep::Pgf => b[j].mul(&f),
                    Rep::Mgf => b[j].add(&f),
                }
            } else {
                f
            };
            if !accumulate && j != k {
                c[k] = cr[k].unit();
            }
            c[j] = h;
            *child
        }
        Node::Affine {
            child, var, coeffs, ..
        } => {
            let k = *var;
            let cr = creps(*child);
            c[k] = cr[k].unit();
            for (i, a) in coeffs {
                let i = *i;
                if i == k {
                    c[k] = match cr[k] {
                        Rep::Pgf => coord_power(reps[k], &b[k], a, ctx)?,
                        Rep::Mgf => q::<T>(a, ctx).mul(&b[k]),
                    };
                } else {
                    c[i] = match (reps[i], reps[k]) {
                        (Rep::Pgf, rk) => b[i].mul(&coord_power(rk, &b[k], a, ctx)?),
                        (Rep::Mgf, Rep::Mgf) => b[i].add(&q::<T>(a, ctx).mul(&b[k])),
                        (Rep::Mgf, Rep::Pgf) => {
                            return Err(unsupported("continuous term in a discrete assignment"))
                        }
                    };
                }
            }
            *child
        }
        Node::Slice { child, var, .. } => {
            c[*var] = T::zero();
            *child
        }
        Node::ObserveCompound { child, dist, .. } => {
            let k = dist.var().0;
            match dist {
                CompoundDistribution::Binomial { p, .. } => {
                    c[k] = T::one().sub(&q(p, ctx)).mul(&b[k]);
                }
                CompoundDistribution::Poisson { scale, .. } => {
                    let l: T = q(scale, ctx);
                    c[k] = match reps[k] {
                        Rep::Pgf => l.neg().exp()?.mul(&b[k]),
                        Rep::Mgf => b[k].sub(&l),
                    };
                }
                CompoundDistribution::NegBinomial { p, .. } => {
                    c[k] = q::<T>(p, ctx).mul(&b[k]);
                }
                CompoundDistribution::Bernoulli { .. } => {}
            }
            *child
        }
    };
    Ok(vec![(child, c)])
}

/// `x_j ∂_j G` for a pgf coordinate, `∂_j G` for an mgf one: the generating
/// function weighted by the value of `X_j`.
fn value_weighted<T: Scalar>(
    g: &TaylorPoly<T>,
    j: usize,
    rep: Rep,
) -> Result<TaylorPoly<T>, GfError> {
    let d = g.derive(j)?;
    Ok(match rep {
        Rep::Pgf => TaylorPoly::var(j, d.base().to_vec(), d.truncation().clone())?.mul(&d)?,
        Rep::Mgf => d,
    })
}

fn apply<T: Scalar>(
    gf: &GfProgram,
    id: NodeId,
    b: &[T],
    t: &Truncation,
    inputs: &[Rc<TaylorPoly<T>>],
    ctx: &KernelCtx,
) -> Result<TaylorPoly<T>, GfError> {
    let nd = &gf.nodes[id];
    let reps = &nd.reps;
    let ring = Ring::new(b.to_vec(), t.clone());
    let td = child_demand(&nd.node, t);
    let input = |i: usize| inputs[i].restrict(&td);
    let creps = |c: NodeId| &gf.nodes[c].reps;
    Ok(match &nd.node {
        Node::One => ring.constant(T::one()),
        Node::Zero => ring.constant(T::zero()),
        Node::Add(..) => input(0)?.add(&input(1)?)?,
        Node::Sub(..) => input(0)?.sub(&input(1)?)?,
        Node::Weight {
            dist,
            set,
            complement,
            ..
        } => {
            let w: T = probability_of(dist, set, *complement, ctx)?;
            input(0)?.scale(&w)
        }
        Node::ToMgf { var, .. } => {
            let g = input(0)?;
            let h = ring.var(*var)?.exp()?.with_constant(g.base()[*var].clone());
            g.substitute(*var, &h)?
        }
        Node::SampleConst {
            var,
            dist,
            accumulate,
            ..
        } => {
            let k = *var;
            let series = ring.distribution(dist, reps[k], k, ctx)?;
            let g = input(0)?;
            let g = if *accumulate {
                g
            } else {
                g.recentre(k, &b[k], t)?
            };
            g.mul(&series)?
        }
        Node::SampleCompound {
            child,
            var,
            dist,
            accumulate,
        } => {
            let (k, j) = (*var, dist.var().0);
            let cr = creps(*child);
            let rep_j = if j == k { cr[k] } else { reps[j] };
            let g = input(0)?;
            let e_minus_1 = ring.coord_exp(reps[k], k)?.add_constant(&T::one().neg());
            if let CompoundDistribution::Bernoulli { .. } = dist {
                let weighted = value_weighted(&g, j, rep_j)?;
                if *accumulate {
                    let r = g.restrict(t)?;
                    let w = weighted.restrict(t)?;
                    return Ok(r.add(&e_minus_1.mul(&w)?)?);
                }
                let mut flat = t.clone();
                flat.limits[k] = 0;
                let r = g.restrict(&flat)?.recentre(k, &b[k], t)?;
                let w = weighted.restrict(&flat)?.recentre(k, &b[k], t)?;
                return Ok(r.add(&e_minus_1.mul(&w)?)?);
            }
            let e = ring.coord_exp(reps[k], k)?;
            let one = T::one();
            let f = match dist {
                CompoundDistribution::Binomial { p, .. } => {
                    let p: T = q(p, ctx);
                    e.scale(&p).add_constant(&one.sub(&p))
                }
                CompoundDistribution::NegBinomial { p, .. } => {
                    let p: T = q(p, ctx);
                    let den = e.scale(&one.sub(&p)).neg().add_constant(&one);
                    ring.constant(p).div(&den)?
                }
                CompoundDistribution::Poisson { scale, .. } => {
                    let u = e_minus_1.scale(&q(scale, ctx));
                    match rep_j {
                        Rep::Pgf => u.exp()?,
                        Rep::Mgf => u,
                    }
                }
                CompoundDistribution::Bernoulli { .. } => unreachable!(),
            };
            let h = if *accumulate || j != k {
                match rep_j {
                    Rep::Pgf => ring.var(j)?.mul(&f)?,
                    Rep::Mgf => ring.var(j)?.add(&f)?,
                }
            } else {
                f
            };
            let g = if !accumulate && j != k {
                g.recentre(k, &b[k], &td)?
            } else {
                g
            };
            let h = h.with_constant(g.base()[j].clone());
            g.substitute(j, &h)?
        }
        Node::Affine {
            child,
            var,
            coeffs,
            constant,
        } => {
            let k = *var;
            let cr = creps(*child);
            let g = input(0)?;
            let mut inner = td.clone();
            inner.limits[k] = t.limits[k];
            let a_k = coeffs.iter().find(|(i, _)| *i == k).map(|(_, a)| a);
            let mut base = g.base().to_vec();
            base[k] = b[k].clone();
            let mut f = match a_k {
                None => g.recentre(k, &b[k], &inner)?,
                Some(a) => {
                    let r = Ring::new(base, inner.clone());
                    let h = match cr[k] {
                        Rep::Pgf => r.power_of_coord(reps[k], k, a, ctx)?,
                        Rep::Mgf => r.var(k)?.scale(&q(a, ctx)),
                    };
                    g.substitute(k, &h.with_constant(g.base()[k].clone()))?
                }
            };
            for (i, a) in coeffs.iter().filter(|(i, _)| *i != k) {
                let i = *i;
                let mut base = f.base().to_vec();
                base[i] = b[i].clone();
                let r = Ring::new(base, inner.clone());
                let h = match reps[i] {
                    Rep::Pgf => r.var(i)?.mul(&r.power_of_coord(reps[k], k, a, ctx)?)?,
                    Rep::Mgf => r.var(i)?.add(&r.var(k)?.scale(&q(a, ctx)))?,
                };
                f = f.substitute(i, &h.with_constant(f.base()[i].clone()))?;
            }
            if !Zero::is_zero(constant) {
                let r = Ring::new(b.to_vec(), inner.clone());
                f = f.mul(&r.power_of_coord(reps[k], k, constant, ctx)?)?;
            }
            f.restrict(t)?
        }
        Node::Slice { var, set, .. } => {
            let k = *var;
            let g = input(0)?.slice(k, |e| set.contains(&(e as u64)));
            g.recentre(k, &b[k], t)?
        }
        Node::ObserveCompound { value, dist, .. } => {
            let k = dist.var().0;
            let m = *value;
            let g = input(0)?;
            let one = T::one();
            match dist {
                CompoundDistribution::Binomial { p, .. } => {
                    let p: T = q(p, ctx);
                    let s = g.coeff_shift(k, m as usize)?.restrict(t)?;
                    let h = ring.var(k)?.scale(&one.sub(&p));
                    let s = s.substitute(k, &h.with_constant(s.base()[k].clone()))?;
                    s.mul(&ring.var(k)?.scale(&p).powi(m)?)?
                }
                CompoundDistribution::Poisson { scale, .. } => {
                    let l: T = q(scale, ctx);
                    match reps[k] {
                        Rep::Pgf => {
                            let mut cur = g;
                            for _ in 0..m {
                                cur = value_weighted(&cur, k, Rep::Pgf)?.scale(&l);
                            }
                            let cur = cur.restrict(t)?;
                            let h = ring.var(k)?.scale(&l.neg().exp()?);
                            let cur = cur.substitute(k, &h.with_constant(cur.base()[k].clone()))?;
                            cur.scale(&q(&inv_factorial(m), ctx))
                        }
                        Rep::Mgf => {
                            let s = g.coeff_shift(k, m as usize)?.restrict(t)?.scale(&l.powi(m));
                            let h = ring.var(k)?.add_constant(&l.neg());
                            s.substitute(k, &h.with_constant(s.base()[k].clone()))?
                        }
                    }
                }
                CompoundDistribution::NegBinomial { p, .. } => {
                    let pr = p;
                    let p: T = q(p, ctx);
                    let lah = lah_numbers(m as usize);
                    let inner = Ring::new(g.base().to_vec(), t.clone());
                    let scale_all = num_traits::pow(<Rational as One>::one() - pr, m as usize)
                        * inv_factorial(m);
                    let mut fact = <Rational as One>::one();
                    let mut s = inner.constant(T::zero());
                    for (i, l) in lah.iter().enumerate() {
                        if i > 0 {
                            fact *= Rational::from_integer(BigInt::from(i));
                        }
                        if l.is_zero() {
                            continue;
                        }
                        let w =
                            &scale_all * Rational::from_integer(BigInt::from(l.clone())) * &fact;
                        let term = g.coeff_shift(k, i)?.restrict(t)?;
                        let xi = inner.power_of_coord(
                            Rep::Pgf,
                            k,
                            &Rational::from_integer(BigInt::from(i)),
                            ctx,
                        )?;
                        s = s.add(&term.mul(&xi)?.scale(&q(&w, ctx)))?;
                    }
                    let h = ring.var(k)?.scale(&p);
                    s.substitute(k, &h.with_constant(s.base()[k].clone()))?
                }
                CompoundDistribution::Bernoulli { .. } => {
                    let w = value_weighted(&g, k, reps[k])?.restrict(t)?;
                    if m == 1 {
                        w
                    } else {
                        g.restrict(t)?.sub(&w)?
                    }
                }
            }
        }
    })
}
