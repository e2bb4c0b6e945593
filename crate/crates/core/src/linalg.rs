//! Linear algebra over the field of rational expressions.
//!
//! Matrices carry [`RationalExpr`] entries. Row reduction first clears
//! denominators row-wise, then runs fraction-free (Bareiss) forward
//! elimination over polynomials — every division in the sweep is an exact
//! polynomial division — and finally normalizes pivots to 1 and
//! back-substitutes. Rank, kernels, and solutions are *generic*: a pivot is
//! usable when it is not identically zero, which treats expressions as
//! invertible away from their vanishing locus. [`sample_rank_check`]
//! cross-checks that genericity at random exact rational points.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;
use rand_chacha::ChaCha8Rng;

use crate::expr::{big, Polynomial, RationalExpr, VarTable};
use crate::sampling;

/// Dense matrix of rational expressions.
#[derive(Debug, Clone)]
pub struct RfMatrix {
    table: Arc<VarTable>,
    rows: usize,
    cols: usize,
    entries: Vec<RationalExpr>,
}

impl RfMatrix {
    pub fn from_fn(
        table: &Arc<VarTable>,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> RationalExpr,
    ) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        RfMatrix {
            table: Arc::clone(table),
            rows,
            cols,
            entries,
        }
    }

    pub fn zero(table: &Arc<VarTable>, rows: usize, cols: usize) -> Self {
        Self::from_fn(table, rows, cols, |_, _| RationalExpr::zero(table))
    }

    pub fn identity(table: &Arc<VarTable>, n: usize) -> Self {
        Self::from_fn(table, n, n, |r, c| {
            if r == c {
                RationalExpr::one(table)
            } else {
                RationalExpr::zero(table)
            }
        })
    }

    pub fn from_rows(table: &Arc<VarTable>, rows: Vec<Vec<RationalExpr>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
        RfMatrix {
            table: Arc::clone(table),
            rows: nrows,
            cols: ncols,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    pub fn table(&self) -> &Arc<VarTable> {
        &self.table
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> &RationalExpr {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, e: RationalExpr) {
        self.entries[r * self.cols + c] = e;
    }

    pub fn row(&self, r: usize) -> &[RationalExpr] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(&self.table, self.cols, self.rows, |r, c| self.at(c, r).clone())
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        Self::from_fn(&self.table, self.rows, other.cols, |r, c| {
            let mut acc = RationalExpr::zero(&self.table);
            for k in 0..self.cols {
                acc = acc.add(&self.at(r, k).mul(other.at(k, c)));
            }
            acc
        })
    }

    pub fn mul_vec(&self, v: &[RationalExpr]) -> Vec<RationalExpr> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|r| {
                let mut acc = RationalExpr::zero(&self.table);
                for c in 0..self.cols {
                    acc = acc.add(&self.at(r, c).mul(&v[c]));
                }
                acc
            })
            .collect()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(&self.table, self.rows, self.cols, |r, c| {
            self.at(r, c).sub(other.at(r, c))
        })
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self::from_fn(&self.table, self.rows, self.cols, |r, k| {
            self.at(r, k).mul_scalar(c)
        })
    }

    pub fn map(&self, mut f: impl FnMut(&RationalExpr) -> RationalExpr) -> Self {
        Self::from_fn(&self.table, self.rows, self.cols, |r, c| f(self.at(r, c)))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(RationalExpr::is_zero)
    }

    /// Union of variable supports of all entries.
    pub fn support(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::new();
        for e in &self.entries {
            s.extend(e.support());
        }
        s
    }

    /// Evaluate every entry at an exact rational point.
    pub fn eval(
        &self,
        point: &std::collections::BTreeMap<usize, BigRational>,
    ) -> Result<Vec<Vec<BigRational>>, crate::expr::ExprError> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.at(r, c).eval(point)).collect())
            .collect()
    }
}

impl PartialEq for RfMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.entries.iter().zip(other.entries.iter()).all(|(a, b)| a == b)
    }
}

/// Clear denominators of one row: multiply through by the product of the
/// distinct denominators appearing in it (no gcd computation, only
/// syntactic deduplication).
fn clear_row(_table: &Arc<VarTable>, row: &[RationalExpr]) -> Vec<Polynomial> {
    let mut factors: Vec<Polynomial> = Vec::new();
    for e in row {
        let d = e.den();
        if d.as_constant().is_some() {
            continue;
        }
        if !factors.iter().any(|f| f == d) {
            factors.push(d.clone());
        }
    }
    row.iter()
        .map(|e| {
            let mut p = e.num().clone();
            let mut skipped_own = e.den().as_constant().is_some();
            // divide the constant denominator into the numerator coefficients
            if let Some(c) = e.den().as_constant() {
                p = p.mul_scalar(&(big(1) / c));
            }
            for f in &factors {
                if !skipped_own && f == e.den() {
                    skipped_own = true;
                    continue;
                }
                p = p.mul(f);
            }
            p
        })
        .collect()
}

struct Echelon {
    rows: Vec<Vec<Polynomial>>,
    /// (row, col) of each pivot, in order.
    pivots: Vec<(usize, usize)>,
    /// Parity of row swaps.
    swap_sign: i8,
    /// The final pivot polynomial (Bareiss determinant of the leading
    /// minor), if any pivot was found.
    last_pivot: Option<Polynomial>,
}

/// Fraction-free forward elimination. Pivots are chosen per column among the
/// remaining rows by lowest numerator total degree (ties: lowest row index).
/// Only columns `< col_limit` are eligible for pivoting.
fn bareiss(table: &Arc<VarTable>, mut rows: Vec<Vec<Polynomial>>, col_limit: usize) -> Echelon {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut swap_sign = 1i8;
    let mut prev = Polynomial::one(table);
    let mut last_pivot = None;
    let mut r0 = 0;
    for c in 0..col_limit.min(ncols) {
        let candidate = (r0..nrows)
            .filter(|&r| !rows[r][c].is_zero())
            .min_by_key(|&r| (rows[r][c].total_degree(), r));
        let Some(rp) = candidate else { continue };
        if rp != r0 {
            rows.swap(rp, r0);
            swap_sign = -swap_sign;
        }
        let pivot = rows[r0][c].clone();
        for r in r0 + 1..nrows {
            let factor = rows[r][c].clone();
            for k in 0..ncols {
                let v = pivot
                    .mul(&rows[r][k])
                    .sub(&factor.mul(&rows[r0][k]));
                rows[r][k] = v
                    .exact_div(&prev)
                    .expect("fraction-free elimination divides exactly");
            }
        }
        pivots.push((r0, c));
        prev = pivot.clone();
        last_pivot = Some(pivot);
        r0 += 1;
        if r0 == nrows {
            break;
        }
    }
    Echelon {
        rows,
        pivots,
        swap_sign,
        last_pivot,
    }
}

/// Result of reduced row echelon form.
#[derive(Debug, Clone)]
pub struct RrefResult {
    pub matrix: RfMatrix,
    pub pivots: Vec<usize>,
    pub rank: usize,
}

/// Internal: full RREF of cleared rows with pivoting restricted to the first
/// `col_limit` columns. Returns normalized rows (pivot entries are exactly 1)
/// and the pivot columns.
fn rref_rows(
    table: &Arc<VarTable>,
    cleared: Vec<Vec<Polynomial>>,
    col_limit: usize,
) -> (Vec<Vec<RationalExpr>>, Vec<usize>) {
    let ech = bareiss(table, cleared, col_limit);
    let ncols = ech.rows.first().map_or(0, Vec::len);
    let mut rows: Vec<Vec<RationalExpr>> = ech
        .rows
        .iter()
        .map(|r| r.iter().map(|p| RationalExpr::from_poly(p.clone())).collect())
        .collect();
    // normalize pivots to 1, then eliminate above
    for &(r, c) in ech.pivots.iter().rev() {
        let pivot = rows[r][c].clone();
        for k in 0..ncols {
            rows[r][k] = rows[r][k].div_exact(&pivot);
        }
        for up in 0..r {
            let factor = rows[up][c].clone();
            if factor.is_zero() {
                continue;
            }
            for k in 0..ncols {
                let delta = factor.mul(&rows[r][k]);
                rows[up][k] = rows[up][k].sub(&delta);
            }
        }
    }
    (rows, ech.pivots.iter().map(|&(_, c)| c).collect())
}

/// Reduced row echelon form over the rational-function field.
pub fn rref(a: &RfMatrix) -> RrefResult {
    let cleared = (0..a.rows).map(|r| clear_row(&a.table, a.row(r))).collect();
    let (rows, pivots) = rref_rows(&a.table, cleared, a.cols);
    let rank = pivots.len();
    RrefResult {
        matrix: RfMatrix::from_rows(&a.table, rows),
        pivots,
        rank,
    }
}

pub fn rank(a: &RfMatrix) -> usize {
    rref(a).rank
}

/// Basis of the right kernel. Vectors are cleared of denominators, reduced
/// to integer content 1, and sign-normalized so the first nonzero entry has
/// positive leading coefficient.
pub fn nullspace(a: &RfMatrix) -> Vec<Vec<RationalExpr>> {
    let r = rref(a);
    nullspace_from_rref(&a.table, &r, a.cols)
}

fn nullspace_from_rref(
    table: &Arc<VarTable>,
    r: &RrefResult,
    ncols: usize,
) -> Vec<Vec<RationalExpr>> {
    let pivot_set: BTreeSet<usize> = r.pivots.iter().copied().collect();
    let mut basis = Vec::new();
    for free in 0..ncols {
        if pivot_set.contains(&free) {
            continue;
        }
        let mut v = vec![RationalExpr::zero(table); ncols];
        v[free] = RationalExpr::one(table);
        for (i, &pc) in r.pivots.iter().enumerate() {
            v[pc] = r.matrix.at(i, free).neg();
        }
        basis.push(normalize_vector(table, v));
    }
    basis
}

/// Clear denominators (product of distinct denominators), reduce joint
/// integer content, and normalize the sign of the first nonzero entry.
pub fn normalize_vector(table: &Arc<VarTable>, v: Vec<RationalExpr>) -> Vec<RationalExpr> {
    let polys = clear_row(table, &v);
    use num_bigint::BigInt;
    use num_integer::Integer;
    use num_traits::One;
    let mut denom_lcm = BigInt::one();
    for p in &polys {
        for (_, c) in p.terms() {
            denom_lcm = denom_lcm.lcm(c.denom());
        }
    }
    let mut numer_gcd = BigInt::zero();
    for p in &polys {
        for (_, c) in p.terms() {
            let int_num = c.numer() * (&denom_lcm / c.denom());
            numer_gcd = numer_gcd.gcd(&int_num);
        }
    }
    if numer_gcd.is_zero() {
        numer_gcd = BigInt::one();
    }
    let mut scale = BigRational::new(denom_lcm, numer_gcd);
    // sign: first nonzero entry gets a positive leading coefficient
    if let Some(first) = polys.iter().find(|p| !p.is_zero()) {
        let scaled = first.mul_scalar(&scale);
        if let Some((_, c)) = scaled.leading_term() {
            if num_traits::Signed::is_negative(c) {
                scale = -scale;
            }
        }
    }
    polys
        .into_iter()
        .map(|p| RationalExpr::from_poly(p.mul_scalar(&scale)))
        .collect()
}

/// Outcome of solving `A x = b` generically.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// A genuine solution when the system is consistent (no residuals).
    pub particular: Option<Vec<RationalExpr>>,
    /// Pivot-variable solution with free variables set to zero. When
    /// residuals are present this satisfies `A x - b =` (combination of the
    /// residual expressions), which is the useful object on constraint
    /// surfaces where the residuals vanish.
    pub pivot_solution: Vec<RationalExpr>,
    /// Consistency residuals: expressions that must vanish for solvability,
    /// read off rows whose coefficient part eliminated to zero.
    pub residuals: Vec<RationalExpr>,
    pub kernel_basis: Vec<Vec<RationalExpr>>,
    pub rank: usize,
}

/// Solve `A x = b` over the rational-function field, reporting consistency
/// residuals instead of failing when `b` is not generically in the column
/// space.
pub fn solve(a: &RfMatrix, b: &[RationalExpr]) -> SolveResult {
    assert_eq!(a.rows, b.len(), "dimension mismatch");
    let table = &a.table;
    let cleared: Vec<Vec<Polynomial>> = (0..a.rows)
        .map(|r| {
            let mut row: Vec<RationalExpr> = a.row(r).to_vec();
            row.push(b[r].clone());
            clear_row(table, &row)
        })
        .collect();
    let (rows, pivots) = rref_rows(table, cleared, a.cols);
    let rank = pivots.len();
    let mut residuals = Vec::new();
    for row in rows.iter().skip(rank) {
        let last = &row[a.cols];
        if !last.is_zero() {
            residuals.push(last.constraint_form());
        }
    }
    let mut pivot_solution = vec![RationalExpr::zero(table); a.cols];
    for (i, &pc) in pivots.iter().enumerate() {
        pivot_solution[pc] = rows[i][a.cols].clone();
    }
    let rr = RrefResult {
        matrix: RfMatrix::from_rows(
            table,
            rows.iter()
                .map(|r| r[..a.cols].to_vec())
                .collect(),
        ),
        pivots: pivots.clone(),
        rank,
    };
    let kernel_basis = nullspace_from_rref(table, &rr, a.cols);
    SolveResult {
        particular: residuals.is_empty().then(|| pivot_solution.clone()),
        pivot_solution,
        residuals,
        kernel_basis,
        rank,
    }
}

/// Exact determinant of a square matrix.
pub fn determinant(a: &RfMatrix) -> RationalExpr {
    assert_eq!(a.rows, a.cols, "determinant of a non-square matrix");
    let table = &a.table;
    if a.rows == 0 {
        return RationalExpr::one(table);
    }
    // Track the clearing factor of each row so the polynomial determinant
    // can be rescaled back.
    let mut clear_factor = RationalExpr::one(table);
    let mut cleared = Vec::with_capacity(a.rows);
    for r in 0..a.rows {
        let row = a.row(r);
        let polys = clear_row(table, row);
        // factor = cleared_entry / original_entry for any nonzero entry
        if let Some(k) = (0..a.cols).find(|&k| !row[k].is_zero()) {
            let f = RationalExpr::from_poly(polys[k].clone()).div_exact(&row[k]);
            clear_factor = clear_factor.mul(&f);
        }
        cleared.push(polys);
    }
    let ech = bareiss(table, cleared, a.cols);
    if ech.pivots.len() < a.rows {
        return RationalExpr::zero(table);
    }
    let det_cleared = RationalExpr::from_poly(ech.last_pivot.expect("full rank"));
    let mut det = det_cleared.div_exact(&clear_factor);
    if ech.swap_sign < 0 {
        det = det.neg();
    }
    det
}

/// Numeric rank of an exact rational matrix by Gaussian elimination.
pub fn numeric_rank(mut m: Vec<Vec<BigRational>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| !m[r][c].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][c].clone();
        for r in rank + 1..rows {
            if m[r][c].is_zero() {
                continue;
            }
            let f = &m[r][c] / &pivot;
            for k in c..cols {
                let delta = &f * &m[rank][k];
                m[r][k] = &m[r][k] - &delta;
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Report of [`sample_rank_check`].
#[derive(Debug, Clone)]
pub struct RankCheckReport {
    pub generic_rank: usize,
    pub trials: u32,
    /// Points (as `(variable index, value)` pairs) where the evaluated rank
    /// dropped below the generic rank, with the observed rank.
    pub drops: Vec<(Vec<(usize, BigRational)>, usize)>,
    /// For square matrices of full generic rank: the determinant, when it is
    /// non-constant — its vanishing locus is where the rank drops, even if
    /// sampling never lands on it.
    pub vanishing_determinant: Option<RationalExpr>,
}

/// Evaluate the matrix at random exact rational points (resampling when a
/// denominator vanishes) and compare the numeric rank with the generic one.
pub fn sample_rank_check(a: &RfMatrix, trials: u32, rng: &mut ChaCha8Rng) -> RankCheckReport {
    let generic_rank = rank(a);
    let vars: Vec<usize> = a.support().into_iter().collect();
    let guards: Vec<&RationalExpr> = a.entries.iter().collect();
    let mut drops = Vec::new();
    for _ in 0..trials {
        let Some(pt) = sampling::point_avoiding_poles(&vars, &guards, rng) else {
            continue;
        };
        let m = a.eval(&pt).expect("poles were avoided");
        let nr = numeric_rank(m);
        if nr < generic_rank {
            drops.push((pt.into_iter().collect(), nr));
        }
    }
    let vanishing_determinant = if a.rows == a.cols && generic_rank == a.rows && a.rows > 0 {
        let det = determinant(a);
        (det.as_constant().is_none()).then_some(det)
    } else {
        None
    };
    RankCheckReport {
        generic_rank,
        trials,
        drops,
        vanishing_determinant,
    }
}
