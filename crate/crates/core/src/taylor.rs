//! Multivariate truncated Taylor expansions.
//!
//! A [`TaylorPoly`] stores the Taylor coefficients `c_α = ∂^α G(w) / α!` of a
//! function around a base point `w`, for every multi-index with `|α| ≤ total`
//! and `α_i ≤ limits[i]`. Coefficients live in a dense row-major box whose
//! per-variable extents (`dims`) shrink to the actual degree when a factor is a
//! low-degree polynomial, so variables a value does not depend on cost nothing.

use std::cell::Cell;

use crate::kernel::{KernelError, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaylorError {
    #[error("variable index {index} out of range for {nvars} variables")]
    VarOutOfRange { index: usize, nvars: usize },
    #[error("operands are expanded at different points or truncations")]
    RingMismatch,
    #[error("cannot take {order} derivatives of an expansion truncated at degree {total}")]
    DegreeUnderflow { total: usize, order: usize },
    #[error("multi-index outside the truncation")]
    IndexOutOfRange,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Which multi-indices an expansion keeps: `|α| ≤ total` and `α_i ≤ limits[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Truncation {
    pub total: usize,
    pub limits: Vec<usize>,
}

impl Truncation {
    /// Every variable may reach the full total degree.
    pub fn full(nvars: usize, total: usize) -> Self {
        Truncation {
            total,
            limits: vec![total; nvars],
        }
    }

    /// Only the variables in `mask` carry derivatives.
    pub fn masked(mask: &[bool], total: usize) -> Self {
        Truncation {
            total,
            limits: mask.iter().map(|&m| if m { total } else { 0 }).collect(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.limits.len()
    }

    fn contains(&self, idx: &[usize]) -> bool {
        idx.iter().sum::<usize>() <= self.total && idx.iter().zip(&self.limits).all(|(a, l)| a <= l)
    }

    /// True when the per-variable limits are implied by the total degree.
    fn limits_implied(&self) -> bool {
        self.limits.iter().all(|&l| l == 0 || l >= self.total)
    }
}

/// Instrumentation for the complexity tests.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounters {
    /// Coefficient products performed by `mul`, `div` and the series recurrences.
    pub mul_terms: u64,
    /// Substitutions handled by the constant or single-monomial fast path.
    pub subst_fast: u64,
    /// Substitutions that needed the general Horner scheme.
    pub subst_horner: u64,
    /// Coefficient updates performed inside substitutions.
    pub subst_updates: u64,
}

thread_local! {
    static COUNTERS: Cell<OpCounters> = Cell::new(OpCounters::default());
}

pub fn op_counters() -> OpCounters {
    COUNTERS.with(|c| c.get())
}

pub fn reset_op_counters() {
    COUNTERS.with(|c| c.set(OpCounters::default()));
}

fn bump(f: impl FnOnce(&mut OpCounters)) {
    COUNTERS.with(|c| {
        let mut v = c.get();
        f(&mut v);
        c.set(v);
    });
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Visits every multi-index inside `dims` with degree at most `total`, in
/// row-major order: `(offset, index, degree)`.
fn for_each_index(dims: &[usize], total: usize, mut f: impl FnMut(usize, &[usize], usize)) {
    let n = dims.len();
    let st = strides(dims);
    let mut idx = vec![0usize; n];
    let (mut off, mut deg) = (0usize, 0usize);
    loop {
        f(off, &idx, deg);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] + 1 < dims[i] && deg < total {
                idx[i] += 1;
                off += st[i];
                deg += 1;
                break;
            }
            off -= idx[i] * st[i];
            deg -= idx[i];
            idx[i] = 0;
        }
    }
}

/// Nonzero coefficients flattened for the product loops.
struct Terms<T> {
    n: usize,
    offsets: Vec<usize>,
    degrees: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T> Terms<T> {
    fn idx(&self, t: usize) -> &[usize] {
        &self.indices[t * self.n..(t + 1) * self.n]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaylorPoly<T> {
    base: Vec<T>,
    trunc: Truncation,
    dims: Vec<usize>,
    coeffs: Vec<T>,
}

impl<T: Scalar> TaylorPoly<T> {
    fn with_dims(base: Vec<T>, trunc: Truncation, dims: Vec<usize>) -> Self {
        let dims: Vec<usize> = dims
            .iter()
            .zip(&trunc.limits)
            .map(|(&d, &l)| d.clamp(1, l.min(trunc.total) + 1))
            .collect();
        let size = dims.iter().product();
        TaylorPoly {
            base,
            trunc,
            dims,
            coeffs: vec![T::zero(); size],
        }
    }

    pub fn zero(base: Vec<T>, trunc: Truncation) -> Self {
        let n = base.len();
        assert_eq!(
            n,
            trunc.nvars(),
            "base point and truncation disagree on the variable count"
        );
        Self::with_dims(base, trunc, vec![1; n])
    }

    pub fn constant(c: T, base: Vec<T>, trunc: Truncation) -> Self {
        let mut p = Self::zero(base, trunc);
        p.coeffs[0] = c;
        p
    }

    /// Builds an expansion from a row-major coefficient box; entries beyond
    /// the truncation are dropped.
    pub fn from_dense(
        base: Vec<T>,
        trunc: Truncation,
        dims: Vec<usize>,
        coeffs: Vec<T>,
    ) -> Result<Self, TaylorError> {
        if base.len() != trunc.nvars()
            || dims.len() != base.len()
            || dims.iter().product::<usize>() != coeffs.len()
        {
            return Err(TaylorError::RingMismatch);
        }
        let src = TaylorPoly {
            base: base.clone(),
            trunc: Truncation::full(base.len(), usize::MAX / 2),
            dims: dims.clone(),
            coeffs,
        };
        let mut r = Self::with_dims(base, trunc, dims);
        r.accumulate(&src, false);
        Ok(r)
    }

    /// The coordinate function `x_i`.
    pub fn var(i: usize, base: Vec<T>, trunc: Truncation) -> Result<Self, TaylorError> {
        let n = base.len();
        if i >= n {
            return Err(TaylorError::VarOutOfRange { index: i, nvars: n });
        }
        let mut dims = vec![1; n];
        dims[i] = 2;
        let mut p = Self::with_dims(base, trunc, dims);
        p.coeffs[0] = p.base[i].clone();
        if p.dims[i] > 1 {
            p.coeffs[1] = T::one();
        }
        Ok(p)
    }

    /// `Σ_j coeffs[j] · (x_v − w_v)^j`.
    pub fn univariate(
        v: usize,
        coeffs: &[T],
        base: Vec<T>,
        trunc: Truncation,
    ) -> Result<Self, TaylorError> {
        let n = base.len();
        if v >= n {
            return Err(TaylorError::VarOutOfRange { index: v, nvars: n });
        }
        let mut dims = vec![1; n];
        dims[v] = coeffs.len().max(1);
        let mut p = Self::with_dims(base, trunc, dims);
        let stride = p.strides()[v];
        for (j, c) in coeffs.iter().take(p.dims[v]).enumerate() {
            p.coeffs[j * stride] = c.clone();
        }
        Ok(p)
    }

    /// A polynomial `Σ_j coeffs[j] x_v^j` given around 0, re-expanded at the base point.
    pub fn polynomial(
        v: usize,
        coeffs: &[T],
        base: Vec<T>,
        trunc: Truncation,
    ) -> Result<Self, TaylorError> {
        let shift = base.get(v).cloned().ok_or(TaylorError::VarOutOfRange {
            index: v,
            nvars: base.len(),
        })?;
        let mut c = coeffs.to_vec();
        taylor_shift(&mut c, &shift);
        Self::univariate(v, &c, base, trunc)
    }

    pub fn nvars(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[T] {
        &self.base
    }

    pub fn truncation(&self) -> &Truncation {
        &self.trunc
    }

    pub fn total(&self) -> usize {
        self.trunc.total
    }

    /// Extent of the stored box along each variable.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn depends_on(&self, v: usize) -> bool {
        self.dims[v] > 1
    }

    fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    pub fn constant_term(&self) -> &T {
        &self.coeffs[0]
    }

    /// The same expansion with its constant coefficient replaced.
    pub fn with_constant(mut self, c: T) -> Self {
        self.coeffs[0] = c;
        self
    }

    pub fn coefficient(&self, alpha: &[usize]) -> Result<T, TaylorError> {
        if alpha.len() != self.nvars() || !self.trunc.contains(alpha) {
            return Err(TaylorError::IndexOutOfRange);
        }
        if alpha.iter().zip(&self.dims).any(|(a, d)| a >= d) {
            return Ok(T::zero());
        }
        let off: usize = alpha.iter().zip(self.strides()).map(|(a, s)| a * s).sum();
        Ok(self.coeffs[off].clone())
    }

    /// `∂^α G(w) = α! · c_α`.
    pub fn derivative_value(&self, alpha: &[usize]) -> Result<T, TaylorError> {
        let mut c = self.coefficient(alpha)?;
        for &a in alpha {
            for j in 2..=a as u64 {
                c = c.mul(&T::from_u64(j));
            }
        }
        Ok(c)
    }

    /// Evaluates the truncated series at the displacement `delta = x − w`.
    pub fn eval_delta(&self, delta: &[T]) -> T {
        let mut acc = T::zero();
        for_each_index(&self.dims, self.trunc.total, |off, idx, _| {
            let mut term = self.coeffs[off].clone();
            for (d, &a) in delta.iter().zip(idx) {
                term = term.mul(&d.powi(a as u64));
            }
            acc.add_assign(&term);
        });
        acc
    }

    fn same_ring(&self, rhs: &Self) -> Result<(), TaylorError> {
        if self.trunc != rhs.trunc || self.base != rhs.base {
            return Err(TaylorError::RingMismatch);
        }
        Ok(())
    }

    fn terms(&self, target_strides: &[usize]) -> Terms<T> {
        let n = self.nvars();
        let mut t = Terms {
            n,
            offsets: vec![],
            degrees: vec![],
            indices: vec![],
            values: vec![],
        };
        for_each_index(&self.dims, self.trunc.total, |off, idx, deg| {
            let c = &self.coeffs[off];
            if !c.is_zero() {
                t.offsets
                    .push(idx.iter().zip(target_strides).map(|(a, s)| a * s).sum());
                t.degrees.push(deg);
                t.indices.extend_from_slice(idx);
                t.values.push(c.clone());
            }
        });
        t
    }

    /// Adds `factor · src` into `self`, re-indexing into `self`'s box.
    fn accumulate(&mut self, src: &Self, negate: bool) {
        let st = self.strides();
        let total = self.trunc.total;
        let dims = self.dims.clone();
        for_each_index(&src.dims, src.trunc.total, |off, idx, deg| {
            if deg > total || idx.iter().zip(&dims).any(|(a, d)| a >= d) {
                return;
            }
            let c = &src.coeffs[off];
            if c.is_zero() {
                return;
            }
            let o: usize = idx.iter().zip(&st).map(|(a, s)| a * s).sum();
            self.coeffs[o] = if negate {
                self.coeffs[o].sub(c)
            } else {
                self.coeffs[o].add(c)
            };
        });
    }

    fn max_dims(&self, rhs: &Self) -> Vec<usize> {
        self.dims
            .iter()
            .zip(&rhs.dims)
            .map(|(a, b)| *a.max(b))
            .collect()
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, TaylorError> {
        self.same_ring(rhs)?;
        let mut r = Self::with_dims(self.base.clone(), self.trunc.clone(), self.max_dims(rhs));
        r.accumulate(self, false);
        r.accumulate(rhs, false);
        Ok(r)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, TaylorError> {
        self.same_ring(rhs)?;
        let mut r = Self::with_dims(self.base.clone(), self.trunc.clone(), self.max_dims(rhs));
        r.accumulate(self, false);
        r.accumulate(rhs, true);
        Ok(r)
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut r = self.clone();
        for x in &mut r.coeffs {
            if !x.is_zero() {
                *x = x.mul(c);
            }
        }
        r
    }

    pub fn neg(&self) -> Self {
        let mut r = self.clone();
        for x in &mut r.coeffs {
            *x = x.neg();
        }
        r
    }

    pub fn add_constant(&self, c: &T) -> Self {
        let mut r = self.clone();
        r.coeffs[0] = r.coeffs[0].add(c);
        r
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, rhs: &Self) -> Result<Self, TaylorError> {
        self.same_ring(rhs)?;
        let dims: Vec<usize> = self
            .dims
            .iter()
            .zip(&rhs.dims)
            .map(|(a, b)| a + b - 1)
            .collect();
        let mut r = Self::with_dims(self.base.clone(), self.trunc.clone(), dims);
        let st = r.strides();
        let total = r.trunc.total;
        let check = !r.trunc.limits_implied();
        let (small, big) = if self.coeffs.len() <= rhs.coeffs.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut q = small.terms(&st);
        let mut order: Vec<usize> = (0..q.values.len()).collect();
        order.sort_by_key(|&t| q.degrees[t]);
        q = Terms {
            n: q.n,
            offsets: order.iter().map(|&t| q.offsets[t]).collect(),
            degrees: order.iter().map(|&t| q.degrees[t]).collect(),
            indices: order.iter().flat_map(|&t| q.idx(t).to_vec()).collect(),
            values: order.iter().map(|&t| q.values[t].clone()).collect(),
        };
        let p = big.terms(&st);
        let limits = r.trunc.limits.clone();
        let mut count = 0u64;
        for a in 0..p.values.len() {
            let room = total - p.degrees[a];
            let ai = p.idx(a);
            for b in 0..q.values.len() {
                if q.degrees[b] > room {
                    break;
                }
                if check
                    && ai
                        .iter()
                        .zip(q.idx(b))
                        .zip(&limits)
                        .any(|((x, y), l)| x + y > *l)
                {
                    continue;
                }
                let o = p.offsets[a] + q.offsets[b];
                r.coeffs[o].mul_add_assign(&p.values[a], &q.values[b]);
                count += 1;
            }
        }
        bump(|c| c.mul_terms += count);
        Ok(r)
    }

    pub fn powi(&self, n: u64) -> Result<Self, TaylorError> {
        let mut acc = Self::constant(T::one(), self.base.clone(), self.trunc.clone());
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Box for a result that is an infinite series in every variable the
    /// inputs depend on.
    fn series_dims(&self, other: Option<&Self>) -> Vec<usize> {
        (0..self.nvars())
            .map(|i| {
                let dep = self.dims[i] > 1 || other.is_some_and(|o| o.dims[i] > 1);
                if dep {
                    self.trunc.limits[i] + 1
                } else {
                    1
                }
            })
            .collect()
    }

    /// Runs `step(α, |α|, terms-of-g, r)` for each α of the result in
    /// row-major order, where earlier entries are final.
    fn recurrence(
        mut r: Self,
        g: &Self,
        mut step: impl FnMut(&mut Self, usize, usize, &[usize], &Terms<T>) -> Result<(), TaylorError>,
    ) -> Result<Self, TaylorError> {
        let st = r.strides();
        let terms = g.terms(&st);
        let dims = r.dims.clone();
        let mut err = None;
        for_each_index(&dims, r.trunc.total, |off, idx, deg| {
            if err.is_none() {
                if let Err(e) = step(&mut r, off, deg, idx, &terms) {
                    err = Some(e);
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(r),
        }
    }

    /// Σ over nonzero terms β of `g` with 0 < β ≤ α of `weight(β, α−β) · g_β · r_{α−β}`.
    fn conv(
        r: &Self,
        off: usize,
        idx: &[usize],
        terms: &Terms<T>,
        weight: impl Fn(usize, usize) -> Option<T>,
    ) -> (T, u64) {
        let deg: usize = idx.iter().sum();
        let mut acc = T::zero();
        let mut count = 0;
        for t in 0..terms.values.len() {
            let db = terms.degrees[t];
            if db == 0 || db > deg || terms.idx(t).iter().zip(idx).any(|(b, a)| b > a) {
                continue;
            }
            let prev = &r.coeffs[off - terms.offsets[t]];
            if prev.is_zero() {
                continue;
            }
            let term = terms.values[t].mul(prev);
            match weight(db, deg - db) {
                Some(w) => acc.mul_add_assign(&w, &term),
                None => acc.add_assign(&term),
            }
            count += 1;
        }
        (acc, count)
    }

    /// Series quotient `self / rhs`; requires a nonzero constant term in `rhs`.
    pub fn div(&self, rhs: &Self) -> Result<Self, TaylorError> {
        self.same_ring(rhs)?;
        let q0 = rhs.coeffs[0].clone();
        if q0.is_zero() {
            return Err(KernelError::DivisionByZero.into());
        }
        if rhs.dims.iter().all(|&d| d == 1) {
            let mut r = self.clone();
            for x in &mut r.coeffs {
                *x = x.div(&q0)?;
            }
            return Ok(r);
        }
        let mut num = Self::with_dims(
            self.base.clone(),
            self.trunc.clone(),
            self.series_dims(Some(rhs)),
        );
        num.accumulate(self, false);
        let numer = num.coeffs.clone();
        let mut count = 0;
        let r = Self::recurrence(num, rhs, |r, off, _deg, idx, terms| {
            let (s, c) = Self::conv(r, off, idx, terms, |_, _| None);
            count += c;
            r.coeffs[off] = numer[off].sub(&s).div(&q0)?;
            Ok(())
        })?;
        bump(|c| c.mul_terms += count);
        Ok(r)
    }

    pub fn exp(&self) -> Result<Self, TaylorError> {
        let f0 = self.coeffs[0].exp()?;
        let mut r = Self::with_dims(
            self.base.clone(),
            self.trunc.clone(),
            self.series_dims(None),
        );
        r.coeffs[0] = f0;
        let mut count = 0;
        let r = Self::recurrence(r, self, |r, off, deg, idx, terms| {
            if deg == 0 {
                return Ok(());
            }
            let (s, c) = Self::conv(r, off, idx, terms, |db, _| Some(T::from_u64(db as u64)));
            count += c;
            r.coeffs[off] = s.div_u64(deg as u64)?;
            Ok(())
        })?;
        bump(|c| c.mul_terms += count);
        Ok(r)
    }

    pub fn ln(&self) -> Result<Self, TaylorError> {
        let g0 = self.coeffs[0].clone();
        let f0 = g0.ln()?;
        let mut r = Self::with_dims(
            self.base.clone(),
            self.trunc.clone(),
            self.series_dims(None),
        );
        let mut g = r.clone();
        g.accumulate(self, false);
        r.coeffs[0] = f0;
        let mut count = 0;
        let r = Self::recurrence(r, self, |r, off, deg, idx, terms| {
            if deg == 0 {
                return Ok(());
            }
            let (s, c) = Self::conv(r, off, idx, terms, |_, rest| Some(T::from_u64(rest as u64)));
            count += c;
            r.coeffs[off] = g.coeffs[off].sub(&s.div_u64(deg as u64)?).div(&g0)?;
            Ok(())
        })?;
        bump(|c| c.mul_terms += count);
        Ok(r)
    }

    /// `self^e` for a real exponent; the constant term must be positive
    /// unless `e` is a natural number.
    pub fn pow(&self, e: &T) -> Result<Self, TaylorError> {
        let g0 = self.coeffs[0].clone();
        let f0 = g0.ln()?.mul(e).exp()?;
        let mut r = Self::with_dims(
            self.base.clone(),
            self.trunc.clone(),
            self.series_dims(None),
        );
        r.coeffs[0] = f0;
        let mut count = 0;
        let r = Self::recurrence(r, self, |r, off, deg, idx, terms| {
            if deg == 0 {
                return Ok(());
            }
            let (s, c) = Self::conv(r, off, idx, terms, |db, rest| {
                Some(
                    e.mul(&T::from_u64(db as u64))
                        .sub(&T::from_u64(rest as u64)),
                )
            });
            count += c;
            r.coeffs[off] = s.div(&g0.mul(&T::from_u64(deg as u64)))?;
            Ok(())
        })?;
        bump(|c| c.mul_terms += count);
        Ok(r)
    }

    /// `∂_i`, lowering the truncation by one.
    pub fn derive(&self, i: usize) -> Result<Self, TaylorError> {
        self.coeff_shift(i, 1)
    }

    /// `(1/d!) ∂_i^d`, lowering the truncation by `d`.
    pub fn coeff_shift(&self, i: usize, d: usize) -> Result<Self, TaylorError> {
        let n = self.nvars();
        if i >= n {
            return Err(TaylorError::VarOutOfRange { index: i, nvars: n });
        }
        if d == 0 {
            return Ok(self.clone());
        }
        if d > self.trunc.total || d > self.trunc.limits[i] {
            return Err(TaylorError::DegreeUnderflow {
                total: self.trunc.total.min(self.trunc.limits[i]),
                order: d,
            });
        }
        let total = self.trunc.total - d;
        let limits = self
            .trunc
            .limits
            .iter()
            .enumerate()
            .map(|(j, &l)| if j == i { l - d } else { l.min(total) })
            .collect();
        let trunc = Truncation { total, limits };
        let mut dims = self.dims.clone();
        dims[i] = dims[i].saturating_sub(d).max(1);
        let mut r = Self::with_dims(self.base.clone(), trunc, dims);
        if self.dims[i] <= d {
            return Ok(r);
        }
        // binom[j] = C(j + d, d)
        let mut binom = vec![T::one(); r.dims[i]];
        for j in 1..binom.len() {
            binom[j] = binom[j - 1]
                .mul(&T::from_u64((j + d) as u64))
                .div_u64(j as u64)?;
        }
        let src_st = self.strides();
        let dims = r.dims.clone();
        let coeffs = &mut r.coeffs;
        for_each_index(&dims, total, |off, idx, _| {
            let src: usize =
                idx.iter().zip(&src_st).map(|(a, s)| a * s).sum::<usize>() + d * src_st[i];
            let c = &self.coeffs[src];
            if !c.is_zero() {
                coeffs[off] = c.mul(&binom[idx[i]]);
            }
        });
        Ok(r)
    }

    /// Keeps only the given truncation (which must be contained in the current one).
    pub fn restrict(&self, trunc: &Truncation) -> Result<Self, TaylorError> {
        if trunc.nvars() != self.nvars()
            || trunc.total > self.trunc.total
            || trunc
                .limits
                .iter()
                .zip(&self.trunc.limits)
                .any(|(a, b)| a.min(&trunc.total) > b.min(&self.trunc.total))
        {
            return Err(TaylorError::RingMismatch);
        }
        if *trunc == self.trunc {
            return Ok(self.clone());
        }
        let mut r = Self::with_dims(self.base.clone(), trunc.clone(), self.dims.clone());
        r.accumulate(self, false);
        Ok(r)
    }

    /// Re-expresses the expansion at a base point with `w_v` replaced by
    /// `new_base`. Exact when the function is a polynomial in `x_v` of degree
    /// below `dims[v]`; the caller supplies a source with enough total degree.
    pub fn recentre(
        &self,
        v: usize,
        new_base: &T,
        trunc: &Truncation,
    ) -> Result<Self, TaylorError> {
        let shift = new_base.sub(&self.base[v]);
        let mut base = self.base.clone();
        base[v] = new_base.clone();
        let mut r = Self::with_dims(base, trunc.clone(), self.dims.clone());
        let m = self.dims[v];
        let src_st = self.strides();
        let dst_st = r.strides();
        let mut line = vec![T::zero(); m];
        let mut other_dims = self.dims.clone();
        other_dims[v] = 1;
        let total = trunc.total;
        let mut updates = 0u64;
        for_each_index(&other_dims, self.trunc.total, |_, idx, deg| {
            if deg > total {
                return;
            }
            let src: usize = idx.iter().zip(&src_st).map(|(a, s)| a * s).sum();
            let mut any = false;
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = self.coeffs[src + j * src_st[v]].clone();
                any |= !slot.is_zero();
            }
            if !any {
                return;
            }
            taylor_shift(&mut line, &shift);
            updates += (m * m) as u64;
            if idx.iter().zip(&r.dims).any(|(a, d)| a >= d) {
                return;
            }
            let o: usize = idx.iter().zip(&dst_st).map(|(a, s)| a * s).sum();
            for (j, c) in line.iter().enumerate().take(r.dims[v].min(total - deg + 1)) {
                r.coeffs[o + j * dst_st[v]] = c.clone();
            }
        });
        bump(|c| c.subst_updates += updates);
        Ok(r)
    }

    /// Keeps only the `x_v` exponents in `keep`; requires `w_v = 0` so that
    /// exponents and powers of `x_v` coincide.
    pub fn slice(&self, v: usize, keep: impl Fn(usize) -> bool) -> Self {
        let mut r = self.clone();
        let dims = self.dims.clone();
        for_each_index(&dims, self.trunc.total, |off, idx, _| {
            if !keep(idx[v]) {
                r.coeffs[off] = T::zero();
            }
        });
        r
    }

    /// `G(x[v ↦ w_v + s·(x_v − w_v)])`: multiplies each coefficient by `s^{α_v}`.
    pub fn scale_var(&self, v: usize, s: &T) -> Self {
        let mut r = self.clone();
        let st = self.strides();
        let pw: Vec<T> = std::iter::successors(Some(T::one()), |p| Some(p.mul(s)))
            .take(self.dims[v])
            .collect();
        for (off, c) in r.coeffs.iter_mut().enumerate() {
            let j = (off / st[v]) % self.dims[v];
            if j > 0 && !c.is_zero() {
                *c = c.mul(&pw[j]);
            }
        }
        r
    }

    /// Composition `x ↦ self(x[k ↦ h(x)])`, expanded in `h`'s ring. `self`
    /// must be expanded at `h`'s base point except for coordinate `k`, where
    /// its base must equal `h`'s constant term.
    pub fn substitute(&self, k: usize, h: &Self) -> Result<Self, TaylorError> {
        let n = self.nvars();
        if k >= n {
            return Err(TaylorError::VarOutOfRange { index: k, nvars: n });
        }
        if h.nvars() != n
            || self.base[k] != h.coeffs[0]
            || (0..n).any(|i| i != k && self.base[i] != h.base[i])
            || self.trunc.total < h.trunc.total
        {
            return Err(TaylorError::RingMismatch);
        }
        let trunc = h.trunc.clone();
        let total = trunc.total;
        let mut lin: Option<(usize, T)> = None;
        let mut nonconst = 0;
        let mut degree_one = true;
        for_each_index(&h.dims, total, |off, idx, deg| {
            if deg == 0 || h.coeffs[off].is_zero() {
                return;
            }
            nonconst += 1;
            if deg == 1 {
                let v = idx.iter().position(|&a| a == 1).expect("degree one index");
                lin = Some((v, h.coeffs[off].clone()));
            } else {
                degree_one = false;
            }
        });
        let base = h.base.clone();

        if nonconst == 0 || (nonconst == 1 && degree_one) {
            bump(|c| c.subst_fast += 1);
            let mut dims = self.dims.clone();
            dims[k] = 1;
            let lin = lin.filter(|_| nonconst == 1);
            if let Some((v, _)) = &lin {
                dims[*v] = if *v == k {
                    self.dims[k]
                } else {
                    self.dims[*v] + self.dims[k] - 1
                };
            }
            let mut r = Self::with_dims(base, trunc, dims);
            let rst = r.strides();
            let rdims = r.dims.clone();
            let limits = r.trunc.limits.clone();
            let pw: Vec<T> = match &lin {
                Some((_, c)) => std::iter::successors(Some(T::one()), |p| Some(p.mul(c)))
                    .take(self.dims[k])
                    .collect(),
                None => vec![T::one()],
            };
            let mut updates = 0u64;
            for_each_index(&self.dims, total, |off, idx, _| {
                let j = idx[k];
                if j >= pw.len() {
                    return;
                }
                let c = &self.coeffs[off];
                if c.is_zero() {
                    return;
                }
                let mut o = 0;
                for i in 0..n {
                    let mut a = if i == k { 0 } else { idx[i] };
                    if let Some((v, _)) = &lin {
                        if *v == i {
                            a += j;
                        }
                    }
                    if a >= rdims[i] || a > limits[i] {
                        return;
                    }
                    o += a * rst[i];
                }
                updates += 1;
                if j == 0 {
                    r.coeffs[o].add_assign(c);
                } else {
                    r.coeffs[o].mul_add_assign(c, &pw[j]);
                }
            });
            bump(|c| c.subst_updates += updates);
            return Ok(r);
        }

        bump(|c| c.subst_horner += 1);
        let q = h.add_constant(&h.coeffs[0].neg());
        let slices = self.dims[k].min(total + 1);
        let slice = |j: usize| -> Self {
            let mut dims = self.dims.clone();
            dims[k] = 1;
            let mut s = Self::with_dims(h.base.clone(), h.trunc.clone(), dims);
            let sst = s.strides();
            let pst = self.strides();
            let sdims = s.dims.clone();
            let limits = &s.trunc.limits;
            let mut other = self.dims.clone();
            other[k] = 1;
            for_each_index(&other, total, |_, idx, _| {
                if idx.iter().zip(&sdims).any(|(a, d)| a >= d)
                    || idx.iter().zip(limits).any(|(a, l)| a > l)
                {
                    return;
                }
                let o: usize = idx.iter().zip(&sst).map(|(a, s)| a * s).sum();
                let src: usize = idx.iter().zip(&pst).map(|(a, s)| a * s).sum();
                s.coeffs[o] = self.coeffs[src + j * pst[k]].clone();
            });
            s
        };
        let mut r = slice(slices - 1);
        for j in (0..slices - 1).rev() {
            let before = op_counters().mul_terms;
            r = q.mul(&r)?.add(&slice(j))?;
            let spent = op_counters().mul_terms - before;
            bump(|c| c.subst_updates += spent);
        }
        Ok(r)
    }
}

/// In-place Taylor shift: turns coefficients of `y^j` into those of `(y + s)^j`
/// re-expanded in `y`, i.e. `p(y) ↦ p(y + s)`.
fn taylor_shift<T: Scalar>(c: &mut [T], s: &T) {
    if s.is_zero() {
        return;
    }
    let m = c.len();
    for i in 0..m {
        for j in (i..m - 1).rev() {
            let t = c[j + 1].mul(s);
            c[j] = c[j].add(&t);
        }
    }
}
