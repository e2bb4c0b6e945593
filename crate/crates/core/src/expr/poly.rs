//! Exact multivariate polynomials over arbitrary-precision rationals.
//!
//! A [`Polynomial`] is a map from exponent vectors to nonzero rational
//! coefficients, stored in a `BTreeMap` keyed by the graded lexicographic
//! monomial order induced by the owning [`VarTable`]. The representation is
//! canonical: two polynomials are mathematically equal exactly when their
//! term maps are identical.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::error::ExprError;
use super::rational::RationalExpr;
use super::table::{same_table, VarTable};

/// Exponent vector, one entry per table variable.
///
/// Ordered graded-lexicographically: higher total degree first; ties broken
/// by comparing exponents starting from the greatest variable (the last
/// table index).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Box<[u32]>);

impl Monomial {
    pub fn unit(len: usize) -> Self {
        Monomial(vec![0; len].into_boxed_slice())
    }

    pub fn var(len: usize, idx: usize) -> Self {
        let mut e = vec![0; len];
        e[idx] = 1;
        Monomial(e.into_boxed_slice())
    }

    pub fn from_exponents(e: Vec<u32>) -> Self {
        Monomial(e.into_boxed_slice())
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn exponent(&self, idx: usize) -> u32 {
        self.0[idx]
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|&e| e as u64).sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Componentwise division; `None` if any exponent would go negative.
    fn div(&self, other: &Monomial) -> Option<Monomial> {
        debug_assert_eq!(self.0.len(), other.0.len());
        let mut out = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            if a < b {
                return None;
            }
            out.push(a - b);
        }
        Some(Monomial(out.into_boxed_slice()))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        debug_assert_eq!(self.0.len(), other.0.len());
        match self.total_degree().cmp(&other.total_degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        for i in (0..self.0.len()).rev() {
            match self.0[i].cmp(&other.0[i]) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical exact polynomial over a fixed variable table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    table: Arc<VarTable>,
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero(table: &Arc<VarTable>) -> Self {
        Polynomial {
            table: Arc::clone(table),
            terms: BTreeMap::new(),
        }
    }

    pub fn one(table: &Arc<VarTable>) -> Self {
        Self::constant(table, BigRational::one())
    }

    pub fn constant(table: &Arc<VarTable>, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::unit(table.len()), c);
        }
        Polynomial {
            table: Arc::clone(table),
            terms,
        }
    }

    pub fn from_int(table: &Arc<VarTable>, k: i64) -> Self {
        Self::constant(table, BigRational::from_integer(BigInt::from(k)))
    }

    pub fn var(table: &Arc<VarTable>, idx: usize) -> Self {
        assert!(idx < table.len(), "variable index out of range");
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::var(table.len(), idx), BigRational::one());
        Polynomial {
            table: Arc::clone(table),
            terms,
        }
    }

    pub fn from_terms(table: &Arc<VarTable>, it: impl IntoIterator<Item = (Monomial, BigRational)>) -> Self {
        let mut p = Self::zero(table);
        for (m, c) in it {
            p.add_term(m, c);
        }
        p
    }

    pub fn table(&self) -> &Arc<VarTable> {
        &self.table
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(c)` when the polynomial is the constant `c` (including zero).
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_unit().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn total_degree(&self) -> u64 {
        self.terms.keys().map(Monomial::total_degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, idx: usize) -> u32 {
        self.terms
            .keys()
            .map(|m| m.exponent(idx))
            .max()
            .unwrap_or(0)
    }

    /// Greatest monomial and its coefficient, or `None` for the zero
    /// polynomial.
    pub fn leading_term(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn support(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::new();
        for m in self.terms.keys() {
            for (i, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    s.insert(i);
                }
            }
        }
        s
    }

    pub fn depends_on(&self, idx: usize) -> bool {
        self.terms.keys().any(|m| m.exponent(idx) > 0)
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert!(same_table(&self.table, &other.table), "table mismatch");
        let mut out = self.clone();
        for (m, c) in other.terms.iter() {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        assert!(same_table(&self.table, &other.table), "table mismatch");
        let mut out = self.clone();
        for (m, c) in other.terms.iter() {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| (m.clone(), -c.clone()))
            .collect();
        Polynomial {
            table: Arc::clone(&self.table),
            terms,
        }
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert!(same_table(&self.table, &other.table), "table mismatch");
        let mut out = Self::zero(&self.table);
        for (m1, c1) in self.terms.iter() {
            for (m2, c2) in other.terms.iter() {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn mul_scalar(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Self::zero(&self.table);
        }
        let terms = self
            .terms
            .iter()
            .map(|(m, k)| (m.clone(), k * c))
            .collect();
        Polynomial {
            table: Arc::clone(&self.table),
            terms,
        }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Self::one(&self.table);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Partial derivative with respect to table variable `idx`.
    pub fn derivative(&self, idx: usize) -> Polynomial {
        let mut out = Self::zero(&self.table);
        for (m, c) in self.terms.iter() {
            let e = m.exponent(idx);
            if e == 0 {
                continue;
            }
            let mut exps = m.exponents().to_vec();
            exps[idx] -= 1;
            out.add_term(
                Monomial::from_exponents(exps),
                c * BigRational::from_integer(BigInt::from(e)),
            );
        }
        out
    }

    /// Exact polynomial division: `Some(q)` with `self = q * divisor`, or
    /// `None` when the division is not exact.
    pub fn exact_div(&self, divisor: &Polynomial) -> Option<Polynomial> {
        assert!(same_table(&self.table, &divisor.table), "table mismatch");
        assert!(!divisor.is_zero(), "division by zero polynomial");
        let mut rem = self.clone();
        let mut quot = Self::zero(&self.table);
        let (dm, dc) = divisor.leading_term().map(|(m, c)| (m.clone(), c.clone()))?;
        while !rem.is_zero() {
            let (rm, rc) = {
                let (m, c) = rem.leading_term().unwrap();
                (m.clone(), c.clone())
            };
            let m = rm.div(&dm)?;
            let c = rc / &dc;
            quot.add_term(m.clone(), c.clone());
            // rem -= (c * m) * divisor
            for (m2, c2) in divisor.terms.iter() {
                rem.add_term(m.mul(m2), -(&c * c2));
            }
        }
        Some(quot)
    }

    /// Simultaneous substitution of rational expressions for variables.
    /// Unbound variables are left alone.
    pub fn substitute(
        &self,
        bind: &BTreeMap<usize, RationalExpr>,
    ) -> Result<RationalExpr, ExprError> {
        let mut acc = RationalExpr::zero(&self.table);
        for (m, c) in self.terms.iter() {
            let mut t = RationalExpr::from_constant(&self.table, c.clone());
            for (i, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let base = match bind.get(&i) {
                    Some(r) => {
                        assert!(
                            same_table(&self.table, r.table()),
                            "substitution binding from a different table"
                        );
                        r.clone()
                    }
                    None => RationalExpr::var(&self.table, i),
                };
                t = t.mul(&base.pow_unsigned(e));
            }
            acc = acc.add(&t);
        }
        Ok(acc)
    }

    /// Exact evaluation. Every variable in the support must be bound.
    pub fn eval(&self, point: &BTreeMap<usize, BigRational>) -> Result<BigRational, ExprError> {
        let mut acc = BigRational::zero();
        for (m, c) in self.terms.iter() {
            let mut t = c.clone();
            for (i, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let x = point.get(&i).ok_or_else(|| ExprError::UnboundVariable {
                    name: self.table.name(i).to_string(),
                })?;
                for _ in 0..e {
                    t *= x;
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// View as a univariate polynomial in `idx`: coefficient of each power.
    pub fn by_powers_of(&self, idx: usize) -> BTreeMap<u32, Polynomial> {
        let mut out: BTreeMap<u32, Polynomial> = BTreeMap::new();
        for (m, c) in self.terms.iter() {
            let e = m.exponent(idx);
            let mut exps = m.exponents().to_vec();
            exps[idx] = 0;
            out.entry(e)
                .or_insert_with(|| Self::zero(&self.table))
                .add_term(Monomial::from_exponents(exps), c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    /// Split every term into (monomial over `group`, cofactor polynomial over
    /// the remaining variables). Used to match coefficients of, say, velocity
    /// monomials with position-dependent coefficients.
    pub fn group_by(&self, group: &BTreeSet<usize>) -> BTreeMap<Monomial, Polynomial> {
        let mut out: BTreeMap<Monomial, Polynomial> = BTreeMap::new();
        let len = self.table.len();
        for (m, c) in self.terms.iter() {
            let mut ge = vec![0u32; len];
            let mut re = vec![0u32; len];
            for (i, &e) in m.exponents().iter().enumerate() {
                if group.contains(&i) {
                    ge[i] = e;
                } else {
                    re[i] = e;
                }
            }
            out.entry(Monomial::from_exponents(ge))
                .or_insert_with(|| Self::zero(&self.table))
                .add_term(Monomial::from_exponents(re), c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    /// Rebase onto an extended table via the remap produced by the table.
    pub fn remap(&self, new_table: &Arc<VarTable>, to_new: &[usize]) -> Polynomial {
        let len = new_table.len();
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut exps = vec![0u32; len];
                for (i, &e) in m.exponents().iter().enumerate() {
                    if e > 0 {
                        exps[to_new[i]] = e;
                    }
                }
                (Monomial::from_exponents(exps), c.clone())
            })
            .collect();
        Polynomial {
            table: Arc::clone(new_table),
            terms,
        }
    }

    /// Move onto another table, matching variables by name. Fails when the
    /// support uses a variable the target table lacks.
    pub fn restrict_to(&self, target: &Arc<VarTable>) -> Result<Polynomial, ExprError> {
        let mut map: BTreeMap<usize, usize> = BTreeMap::new();
        for i in self.support() {
            let name = self.table.name(i);
            let j = target
                .index_of(name)
                .ok_or_else(|| ExprError::UnboundVariable {
                    name: name.to_string(),
                })?;
            map.insert(i, j);
        }
        let len = target.len();
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut exps = vec![0u32; len];
                for (i, &e) in m.exponents().iter().enumerate() {
                    if e > 0 {
                        exps[map[&i]] = e;
                    }
                }
                (Monomial::from_exponents(exps), c.clone())
            })
            .collect();
        Ok(Polynomial {
            table: Arc::clone(target),
            terms,
        })
    }

    /// Joint content normalization for a pair of polynomials: scale both by
    /// the same rational so that all coefficients are integers with overall
    /// gcd 1. Returns the scaled pair.
    pub(crate) fn normalize_content_pair(a: Polynomial, b: Polynomial) -> (Polynomial, Polynomial) {
        use num_integer::Integer;
        let mut denom_lcm = BigInt::one();
        let mut numer_gcd = BigInt::zero();
        for p in [&a, &b] {
            for c in p.terms.values() {
                denom_lcm = denom_lcm.lcm(c.denom());
            }
        }
        for p in [&a, &b] {
            for c in p.terms.values() {
                let int_num = c.numer() * (&denom_lcm / c.denom());
                numer_gcd = numer_gcd.gcd(&int_num);
            }
        }
        if numer_gcd.is_zero() {
            numer_gcd = BigInt::one();
        }
        let scale = BigRational::new(denom_lcm, numer_gcd);
        (a.mul_scalar(&scale), b.mul_scalar(&scale))
    }

    /// The largest monomial dividing every term (componentwise minimum of
    /// the exponent vectors); `None` for the zero polynomial.
    pub fn monomial_content(&self) -> Option<Monomial> {
        let mut it = self.terms.keys();
        let first = it.next()?;
        let mut exps = first.exponents().to_vec();
        for m in it {
            for (e, &o) in exps.iter_mut().zip(m.exponents()) {
                *e = (*e).min(o);
            }
            if exps.iter().all(|&e| e == 0) {
                break;
            }
        }
        Some(Monomial::from_exponents(exps))
    }

    /// Divide out a monomial that divides every term.
    pub fn divide_monomial(&self, m: &Monomial) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .map(|(k, c)| {
                (
                    k.div(m).expect("monomial divides every term"),
                    c.clone(),
                )
            })
            .collect();
        Polynomial {
            table: Arc::clone(&self.table),
            terms,
        }
    }

    /// `Some(lambda)` when `self == lambda * other` with `lambda` a nonzero
    /// rational; requires `other` nonzero.
    pub fn scalar_multiple_of(&self, other: &Polynomial) -> Option<BigRational> {
        if other.is_zero() || self.is_zero() {
            return None;
        }
        if self.terms.len() != other.terms.len() {
            return None;
        }
        let mut lambda: Option<BigRational> = None;
        for ((m1, c1), (m2, c2)) in self.terms.iter().zip(other.terms.iter()) {
            if m1 != m2 {
                return None;
            }
            let r = c1 / c2;
            match &lambda {
                None => lambda = Some(r),
                Some(l) if *l == r => {}
                _ => return None,
            }
        }
        lambda
    }
}

fn write_coeff(f: &mut fmt::Formatter<'_>, c: &BigRational) -> fmt::Result {
    write!(f, "{}", c)
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = if neg { -c.clone() } else { c.clone() };
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_unit() {
                write_coeff(f, &mag)?;
                continue;
            }
            let mut lead = true;
            if !mag.is_one() {
                write_coeff(f, &mag)?;
                lead = false;
            }
            for (i, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !lead {
                    write!(f, "*")?;
                }
                lead = false;
                write!(f, "{}", self.table.name(i))?;
                if e > 1 {
                    write!(f, "^{}", e)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table2() -> Arc<VarTable> {
        VarTable::for_lagrangian(2, &[]).unwrap()
    }

    fn q(t: &Arc<VarTable>, a: usize) -> Polynomial {
        Polynomial::var(t, t.position(a))
    }

    fn v(t: &Arc<VarTable>, a: usize) -> Polynomial {
        Polynomial::var(t, t.velocity(a))
    }

    #[test]
    fn grlex_order_prefers_degree_then_greatest_variable() {
        let t = table2();
        // variable order: q1 < q2 < v1 < v2
        let q1 = Monomial::var(4, 0);
        let q2 = Monomial::var(4, 1);
        let v1 = Monomial::var(4, 2);
        let q1q1 = Monomial::from_exponents(vec![2, 0, 0, 0]);
        assert!(q1 < q2);
        assert!(q2 < v1);
        assert!(v1 < q1q1); // degree wins
        let p = q(&t, 0).add(&v(&t, 0)).add(&q(&t, 1));
        let (lead, _) = p.leading_term().unwrap();
        assert_eq!(lead, &Monomial::var(4, 2)); // v1 is greatest
    }

    #[test]
    fn arithmetic_is_canonical() {
        let t = table2();
        let a = q(&t, 0).add(&v(&t, 1)); // q1 + v2
        let b = q(&t, 0).sub(&v(&t, 1)); // q1 - v2
        let prod = a.mul(&b);
        let expect = q(&t, 0).mul(&q(&t, 0)).sub(&v(&t, 1).mul(&v(&t, 1)));
        assert_eq!(prod, expect);
        assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn derivative_power_rule() {
        let t = table2();
        let p = q(&t, 0).pow(3); // q1^3
        let d = p.derivative(t.position(0));
        assert_eq!(d, q(&t, 0).pow(2).mul_scalar(&BigRational::from_integer(3.into())));
        assert!(p.derivative(t.velocity(1)).is_zero());
    }

    #[test]
    fn exact_division_round_trip() {
        let t = table2();
        let a = q(&t, 0).add(&v(&t, 0)); // q1 + v1
        let b = q(&t, 1).sub(&Polynomial::one(&t)); // q2 - 1
        let prod = a.mul(&b);
        assert_eq!(prod.exact_div(&b).unwrap(), a);
        assert_eq!(prod.exact_div(&a).unwrap(), b);
        assert!(q(&t, 0).exact_div(&b).is_none());
    }

    #[test]
    fn eval_and_unbound_error() {
        let t = table2();
        let p = q(&t, 0).mul(&v(&t, 1)); // q1*v2
        let mut pt = BTreeMap::new();
        pt.insert(t.position(0), BigRational::from_integer(3.into()));
        assert!(p.eval(&pt).is_err());
        pt.insert(t.velocity(1), BigRational::from_integer(5.into()));
        assert_eq!(p.eval(&pt).unwrap(), BigRational::from_integer(15.into()));
    }

    #[test]
    fn display_is_descending_with_signs() {
        let t = table2();
        let p = v(&t, 0)
            .mul(&v(&t, 0))
            .mul_scalar(&BigRational::new(1.into(), 2.into()))
            .sub(&q(&t, 0))
            .add(&Polynomial::from_int(&t, 3));
        assert_eq!(p.to_string(), "1/2*v1^2 - q1 + 3");
    }
}
