//! Rational expressions: quotients of polynomials in canonical form.
//!
//! The representation is a numerator/denominator pair of [`Polynomial`]s.
//! There is deliberately no full multivariate gcd: normalization cancels the
//! joint integer content, folds away a denominator that divides the numerator
//! as an exact scalar multiple, and fixes the sign so the denominator's
//! leading coefficient is positive. Equality therefore always goes through
//! the cross-multiplied numerator comparison `a*d - c*b == 0`, which is exact
//! regardless of shared polynomial factors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::error::ExprError;
use super::poly::{Monomial, Polynomial};
use super::table::{same_table, VarTable};

#[derive(Debug, Clone)]
pub struct RationalExpr {
    num: Polynomial,
    den: Polynomial,
}

impl RationalExpr {
    fn make(num: Polynomial, den: Polynomial) -> Self {
        debug_assert!(!den.is_zero(), "zero denominator");
        let (num, den) = normalize(num, den);
        RationalExpr { num, den }
    }

    pub fn zero(table: &Arc<VarTable>) -> Self {
        RationalExpr {
            num: Polynomial::zero(table),
            den: Polynomial::one(table),
        }
    }

    pub fn one(table: &Arc<VarTable>) -> Self {
        Self::from_int(table, 1)
    }

    pub fn from_int(table: &Arc<VarTable>, k: i64) -> Self {
        Self::make(Polynomial::from_int(table, k), Polynomial::one(table))
    }

    pub fn from_constant(table: &Arc<VarTable>, c: BigRational) -> Self {
        Self::make(Polynomial::constant(table, c), Polynomial::one(table))
    }

    pub fn var(table: &Arc<VarTable>, idx: usize) -> Self {
        RationalExpr {
            num: Polynomial::var(table, idx),
            den: Polynomial::one(table),
        }
    }

    pub fn from_poly(p: Polynomial) -> Self {
        let table = Arc::clone(p.table());
        Self::make(p, Polynomial::one(&table))
    }

    pub fn from_parts(num: Polynomial, den: Polynomial) -> Result<Self, ExprError> {
        if den.is_zero() {
            return Err(ExprError::SubstitutionZeroDenominator);
        }
        Ok(Self::make(num, den))
    }

    pub fn table(&self) -> &Arc<VarTable> {
        self.num.table()
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Structural constant detection: both parts constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        let n = self.num.as_constant()?;
        let d = self.den.as_constant()?;
        Some(n / d)
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().map_or(false, |c| c.is_one())
    }

    pub fn support(&self) -> BTreeSet<usize> {
        let mut s = self.num.support();
        s.extend(self.den.support());
        s
    }

    pub fn depends_on(&self, idx: usize) -> bool {
        self.num.depends_on(idx) || self.den.depends_on(idx)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(same_table(self.table(), other.table()), "table mismatch");
        if self.den == other.den {
            return Self::make(self.num.add(&other.num), self.den.clone());
        }
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        Self::make(num, self.den.mul(&other.den))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        RationalExpr {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert!(same_table(self.table(), other.table()), "table mismatch");
        // Cancel syntactically identical (or scalar-multiple) cross factors
        // before expanding: (a/b)*(b/c) = a/c.
        let mut n1 = self.num.clone();
        let mut d1 = self.den.clone();
        let mut n2 = other.num.clone();
        let mut d2 = other.den.clone();
        if !n1.is_zero() {
            if let Some(l) = n1.scalar_multiple_of(&d2) {
                n1 = Polynomial::constant(self.table(), l);
                d2 = Polynomial::one(self.table());
            }
        }
        if !n2.is_zero() {
            if let Some(l) = n2.scalar_multiple_of(&d1) {
                n2 = Polynomial::constant(self.table(), l);
                d1 = Polynomial::one(self.table());
            }
        }
        Self::make(n1.mul(&n2), d1.mul(&d2))
    }

    pub fn mul_scalar(&self, c: &BigRational) -> Self {
        Self::make(self.num.mul_scalar(c), self.den.clone())
    }

    pub fn recip(&self) -> Result<Self, ExprError> {
        if self.is_zero() {
            return Err(ExprError::SubstitutionZeroDenominator);
        }
        Ok(Self::make(self.den.clone(), self.num.clone()))
    }

    pub fn div(&self, other: &Self) -> Result<Self, ExprError> {
        Ok(self.mul(&other.recip()?))
    }

    /// Division that must succeed by construction (e.g. by a pivot already
    /// known to be nonzero).
    pub fn div_exact(&self, other: &Self) -> Self {
        self.div(other).expect("division by zero expression")
    }

    pub fn pow_unsigned(&self, e: u32) -> Self {
        let mut out = Self::one(self.table());
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn pow(&self, e: i32) -> Result<Self, ExprError> {
        if e >= 0 {
            Ok(self.pow_unsigned(e as u32))
        } else {
            Ok(self.recip()?.pow_unsigned(e.unsigned_abs()))
        }
    }

    /// Quotient-rule partial derivative with respect to variable `idx`.
    pub fn derivative(&self, idx: usize) -> Self {
        let num = self
            .num
            .derivative(idx)
            .mul(&self.den)
            .sub(&self.num.mul(&self.den.derivative(idx)));
        Self::make(num, self.den.mul(&self.den))
    }

    /// Simultaneous substitution. Errors when the substituted denominator
    /// collapses to zero.
    pub fn substitute(
        &self,
        bind: &BTreeMap<usize, RationalExpr>,
    ) -> Result<Self, ExprError> {
        let n = self.num.substitute(bind)?;
        let d = self.den.substitute(bind)?;
        if d.is_zero() {
            return Err(ExprError::SubstitutionZeroDenominator);
        }
        n.div(&d)
    }

    /// Exact evaluation at a rational point.
    pub fn eval(&self, point: &BTreeMap<usize, BigRational>) -> Result<BigRational, ExprError> {
        let d = self.den.eval(point)?;
        if d.is_zero() {
            return Err(ExprError::EvalZeroDenominator);
        }
        Ok(self.num.eval(point)? / d)
    }

    /// The denominator-cleared, content- and sign-normalized polynomial form:
    /// numerator with integer coefficients of gcd 1 and positive leading
    /// coefficient, over denominator 1. This is the canonical representative
    /// used for constraints (whose vanishing locus ignores denominators).
    pub fn constraint_form(&self) -> Self {
        let zero = Polynomial::zero(self.table());
        let (mut num, _) = Polynomial::normalize_content_pair(self.num.clone(), zero);
        if let Some((_, c)) = num.leading_term() {
            if c.is_negative() {
                num = num.neg();
            }
        }
        RationalExpr {
            num,
            den: Polynomial::one(self.table()),
        }
    }

    pub fn remap(&self, new_table: &Arc<VarTable>, to_new: &[usize]) -> Self {
        RationalExpr {
            num: self.num.remap(new_table, to_new),
            den: self.den.remap(new_table, to_new),
        }
    }

    pub fn restrict_to(&self, target: &Arc<VarTable>) -> Result<Self, ExprError> {
        Ok(RationalExpr {
            num: self.num.restrict_to(target)?,
            den: self.den.restrict_to(target)?,
        })
    }

    /// Structural identity of the canonical representation (stronger than
    /// `==`, which is mathematical equality).
    pub fn same_repr(&self, other: &Self) -> bool {
        self.num == other.num && self.den == other.den
    }
}

/// Canonicalize a numerator/denominator pair.
fn normalize(num: Polynomial, den: Polynomial) -> (Polynomial, Polynomial) {
    let table = Arc::clone(num.table());
    if num.is_zero() {
        return (num, Polynomial::one(&table));
    }
    // Fold a denominator that divides the numerator as a scalar multiple:
    // covers (q1+1)/(q1+1) -> 1 and 2*(x+y)/(x+y) -> 2.
    let (num, den) = match num.scalar_multiple_of(&den) {
        Some(l) => (
            Polynomial::constant(&table, l),
            Polynomial::one(&table),
        ),
        None => (num, den),
    };
    // Cancel the common monomial content: q1^2/q1 -> q1/1.
    let (num, den) = {
        let nm = num.monomial_content().expect("nonzero numerator");
        let dm = den.monomial_content().expect("nonzero denominator");
        let common = Monomial::from_exponents(
            nm.exponents()
                .iter()
                .zip(dm.exponents())
                .map(|(a, b)| (*a).min(*b))
                .collect(),
        );
        if common.is_unit() {
            (num, den)
        } else {
            (num.divide_monomial(&common), den.divide_monomial(&common))
        }
    };
    let (mut num, mut den) = Polynomial::normalize_content_pair(num, den);
    let lead_negative = den
        .leading_term()
        .map(|(_, c)| c.is_negative())
        .unwrap_or(false);
    if lead_negative {
        num = num.neg();
        den = den.neg();
    }
    (num, den)
}

impl PartialEq for RationalExpr {
    /// Mathematical equality via cross-multiplication.
    fn eq(&self, other: &Self) -> bool {
        self.num.mul(&other.den).sub(&other.num.mul(&self.den)).is_zero()
    }
}

impl fmt::Display for RationalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.as_constant().map_or(false, |c| c.is_one()) {
            return write!(f, "{}", self.num);
        }
        write!(f, "({})/({})", self.num, self.den)
    }
}

/// Scalar helpers used across the crate.
pub fn big(k: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(k))
}

pub fn big_ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table2() -> Arc<VarTable> {
        VarTable::for_lagrangian(2, &[]).unwrap()
    }

    fn qv(t: &Arc<VarTable>) -> (RationalExpr, RationalExpr, RationalExpr, RationalExpr) {
        (
            RationalExpr::var(t, t.position(0)),
            RationalExpr::var(t, t.position(1)),
            RationalExpr::var(t, t.velocity(0)),
            RationalExpr::var(t, t.velocity(1)),
        )
    }

    #[test]
    fn identical_factors_cancel_on_add() {
        let t = table2();
        let (q1, _, _, _) = qv(&t);
        let one = RationalExpr::one(&t);
        let den = q1.add(&one);
        // q1/(q1+1) + 1/(q1+1) == 1
        let s = q1.div_exact(&den).add(&one.div_exact(&den));
        assert!(s.same_repr(&one));
    }

    #[test]
    fn joint_content_and_sign_normalization() {
        let t = table2();
        let (q1, q2, _, _) = qv(&t);
        // (2 q1) / (-2 q2) -> num = -q1, den = q2
        let e = q1
            .mul_scalar(&big(2))
            .div_exact(&q2.mul_scalar(&big(-2)));
        assert_eq!(e.num().to_string(), "-q1");
        assert_eq!(e.den().to_string(), "q2");
    }

    #[test]
    fn equality_is_cross_multiplied() {
        let t = table2();
        let (q1, _, _, _) = qv(&t);
        let one = RationalExpr::one(&t);
        // (q1^2 - 1)/(q1 - 1) == q1 + 1 even though representations differ
        let a = q1
            .mul(&q1)
            .sub(&one)
            .div_exact(&q1.sub(&one));
        let b = q1.add(&one);
        assert_eq!(a, b);
        assert!(!a.same_repr(&b));
    }

    #[test]
    fn derivative_quotient_rule() {
        let t = table2();
        let (q1, _, _, _) = qv(&t);
        let one = RationalExpr::one(&t);
        // d/dq1 [ q1/(q1+1) ] = 1/(q1+1)^2
        let e = q1.div_exact(&q1.add(&one));
        let d = e.derivative(t.position(0));
        let expect = one.div_exact(&q1.add(&one).pow_unsigned(2));
        assert!(d.same_repr(&expect));
        // d/dq1 (1/q1) = -1/q1^2
        let inv = one.div_exact(&q1);
        let dinv = inv.derivative(t.position(0));
        assert!(dinv.same_repr(&one.neg().div_exact(&q1.pow_unsigned(2))));
    }

    #[test]
    fn substitution_and_zero_denominator() {
        let t = table2();
        let (q1, q2, v1, _) = qv(&t);
        // v1 - q2 with v1 -> p-like expression q1 + q2 gives q1
        let mut bind = BTreeMap::new();
        bind.insert(t.velocity(0), q1.add(&q2));
        let e = v1.sub(&q2);
        assert!(e.substitute(&bind).unwrap().same_repr(&q1));
        // 1/(q1) with q1 -> 0 errors
        let one = RationalExpr::one(&t);
        let inv = one.div_exact(&q1);
        let mut zero_bind = BTreeMap::new();
        zero_bind.insert(t.position(0), RationalExpr::zero(&t));
        assert_eq!(
            inv.substitute(&zero_bind),
            Err(ExprError::SubstitutionZeroDenominator)
        );
    }

    #[test]
    fn eval_exact() {
        let t = table2();
        let (_, _, v1, v2) = qv(&t);
        // (1/2)(v1 - v2)^2 at v = (3, 1) -> 2
        let e = v1.sub(&v2).pow_unsigned(2).mul_scalar(&big_ratio(1, 2));
        let mut pt = BTreeMap::new();
        pt.insert(t.velocity(0), big(3));
        pt.insert(t.velocity(1), big(1));
        assert_eq!(e.eval(&pt).unwrap(), big(2));
    }

    #[test]
    fn constraint_form_normalizes_sign_and_content() {
        let t = table2();
        let (q1, _, v1, _) = qv(&t);
        // (-2 v1 + 2 q1) / 3 -> v1 - q1
        let e = q1.sub(&v1).mul_scalar(&big_ratio(2, 3));
        let c = e.constraint_form();
        assert_eq!(c.to_string(), "v1 - q1");
    }
}
