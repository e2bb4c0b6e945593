//! Valence verification for transformations between constrained charts.
//!
//! A transformation of valence `c` satisfies `J^T (omega2 o Phi) J = c
//! omega1` on the source constraint surface, after both sides are
//! restricted to directions tangent to that surface. The module verifies a
//! given valence, searches for one, computes the ranks of the restricted
//! two-forms, and checks that the map carries the degenerate directions of
//! the source surface into those of the target.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::constraints::{surface_samples, weak_vanishing, SurfaceReducer, WeakOutcome};
use crate::expr::{ExprError, Polynomial, RationalExpr, VarTable};
use crate::linalg::{self, RfMatrix};
use crate::EngineSettings;

#[derive(Debug, Error)]
pub enum CanonicalError {
    #[error("shape mismatch: {what}")]
    Shape { what: String },
    #[error("two-form {which} is not antisymmetric at entry ({i}, {j})")]
    NotAntisymmetric { which: u8, i: usize, j: usize },
    #[error("degenerate transformation: generic Jacobian rank {rank} on a {dim}-dimensional chart")]
    DegenerateMap { rank: usize, dim: usize },
    #[error("the two-forms have different generic ranks: {rank1} vs {rank2}")]
    RankMismatch { rank1: usize, rank2: usize },
    #[error(
        "target constraint {index} does not vanish on the image of the source surface{}",
        if *.indeterminate { " (undecided)" } else { "" }
    )]
    IncompatibleConstraints { index: usize, indeterminate: bool },
    #[error("expression error: {0}")]
    Expr(#[from] ExprError),
}

/// A map between two charts over one variable table, each carrying a
/// two-form and an optional constraint surface.
#[derive(Debug, Clone)]
pub struct TransformationPair {
    pub table: Arc<VarTable>,
    /// Indices of the chart variables; both sides use these coordinates.
    pub chart: Vec<usize>,
    /// Image of each chart variable, as a function of the chart variables.
    pub map: Vec<RationalExpr>,
    pub omega1: RfMatrix,
    pub omega2: RfMatrix,
    pub constraints1: Vec<RationalExpr>,
    pub constraints2: Vec<RationalExpr>,
}

fn check_antisymmetric(omega: &RfMatrix, which: u8) -> Result<(), CanonicalError> {
    for i in 0..omega.rows() {
        for j in i..omega.cols() {
            if !omega.at(i, j).add(omega.at(j, i)).is_zero() {
                return Err(CanonicalError::NotAntisymmetric { which, i, j });
            }
        }
    }
    Ok(())
}

impl TransformationPair {
    pub fn new(
        table: &Arc<VarTable>,
        chart: Vec<usize>,
        map: Vec<RationalExpr>,
        omega1: RfMatrix,
        omega2: RfMatrix,
        constraints1: Vec<RationalExpr>,
        constraints2: Vec<RationalExpr>,
        settings: &EngineSettings,
    ) -> Result<Self, CanonicalError> {
        let m = chart.len();
        if map.len() != m {
            return Err(CanonicalError::Shape {
                what: format!("{} map components on a {}-dimensional chart", map.len(), m),
            });
        }
        for (label, omega) in [("first", &omega1), ("second", &omega2)] {
            if omega.rows() != m || omega.cols() != m {
                return Err(CanonicalError::Shape {
                    what: format!(
                        "{} two-form is {}x{} on a {}-dimensional chart",
                        label,
                        omega.rows(),
                        omega.cols(),
                        m
                    ),
                });
            }
        }
        check_antisymmetric(&omega1, 1)?;
        check_antisymmetric(&omega2, 2)?;

        let tp = TransformationPair {
            table: Arc::clone(table),
            chart,
            map,
            omega1,
            omega2,
            constraints1,
            constraints2,
        };

        let j = tp.jacobian();
        let jrank = linalg::rank(&j);
        if jrank != m {
            return Err(CanonicalError::DegenerateMap { rank: jrank, dim: m });
        }

        let r1 = linalg::rank(&tp.omega1);
        let r2 = linalg::rank(&tp.omega2);
        if r1 != r2 {
            return Err(CanonicalError::RankMismatch { rank1: r1, rank2: r2 });
        }

        let reducer = SurfaceReducer::new(table, &tp.constraints1);
        for (index, c2) in tp.constraints2.iter().enumerate() {
            let pushed = tp.pull_through(c2)?;
            match weak_vanishing(&pushed, &reducer, settings) {
                WeakOutcome::Holds => {}
                WeakOutcome::Fails { .. } => {
                    return Err(CanonicalError::IncompatibleConstraints {
                        index,
                        indeterminate: false,
                    })
                }
                WeakOutcome::Indeterminate { .. } => {
                    return Err(CanonicalError::IncompatibleConstraints {
                        index,
                        indeterminate: true,
                    })
                }
            }
        }

        Ok(tp)
    }

    fn binding(&self) -> BTreeMap<usize, RationalExpr> {
        self.chart
            .iter()
            .copied()
            .zip(self.map.iter().cloned())
            .collect()
    }

    /// Compose a target-side function with the map: `f o Phi`.
    pub fn pull_through(&self, f: &RationalExpr) -> Result<RationalExpr, ExprError> {
        f.substitute(&self.binding())
    }

    /// Jacobian `d map_i / d chart_j`.
    pub fn jacobian(&self) -> RfMatrix {
        RfMatrix::from_fn(&self.table, self.chart.len(), self.chart.len(), |i, j| {
            self.map[i].derivative(self.chart[j])
        })
    }

    /// The target two-form evaluated along the map.
    pub fn omega2_at_image(&self) -> Result<RfMatrix, ExprError> {
        let bind = self.binding();
        let mut out = RfMatrix::zero(&self.table, self.omega2.rows(), self.omega2.cols());
        for i in 0..self.omega2.rows() {
            for j in 0..self.omega2.cols() {
                out.set(i, j, self.omega2.at(i, j).substitute(&bind)?);
            }
        }
        Ok(out)
    }

    /// `J^T (omega2 o Phi) J`: the pulled-back two-form.
    pub fn pulled_back_form(&self) -> Result<RfMatrix, ExprError> {
        let j = self.jacobian();
        Ok(j.transpose().mul(&self.omega2_at_image()?).mul(&j))
    }

    /// Compose two transformations: `self` after `inner`. Source data comes
    /// from `inner`, target data from `self`; the middle chart is dropped.
    pub fn compose(
        &self,
        inner: &TransformationPair,
        settings: &EngineSettings,
    ) -> Result<TransformationPair, CanonicalError> {
        let map = self
            .map
            .iter()
            .map(|f| inner.pull_through(f))
            .collect::<Result<Vec<_>, _>>()?;
        TransformationPair::new(
            &self.table,
            inner.chart.clone(),
            map,
            inner.omega1.clone(),
            self.omega2.clone(),
            inner.constraints1.clone(),
            self.constraints2.clone(),
            settings,
        )
    }
}

/// Columns spanning the directions tangent to the constraint surface, as an
/// ambient-by-tangent matrix. The identity when there are no constraints.
pub fn tangent_basis(
    table: &Arc<VarTable>,
    chart: &[usize],
    constraints: &[RationalExpr],
) -> RfMatrix {
    let m = chart.len();
    if constraints.is_empty() {
        return RfMatrix::identity(table, m);
    }
    let g = RfMatrix::from_fn(table, constraints.len(), m, |k, j| {
        constraints[k].derivative(chart[j])
    });
    let cols = linalg::nullspace(&g);
    RfMatrix::from_fn(table, m, cols.len(), |i, j| cols[j][i].clone())
}

/// One non-vanishing entry of a restricted matrix equation.
#[derive(Debug, Clone)]
pub struct EntryFailure {
    pub row: usize,
    pub col: usize,
    pub residual: RationalExpr,
    pub indeterminate: bool,
}

/// Result of testing one valence value.
#[derive(Debug, Clone)]
pub struct ValenceCheck {
    pub valence: BigRational,
    /// All restricted entries vanish weakly.
    pub ok: bool,
    /// Some entry could not be decided (counts as not ok).
    pub indeterminate: bool,
    pub failures: Vec<EntryFailure>,
}

fn restricted_vanishing(
    table: &Arc<VarTable>,
    p: &RfMatrix,
    t: &RfMatrix,
    constraints: &[RationalExpr],
    settings: &EngineSettings,
) -> (bool, bool, Vec<EntryFailure>) {
    let r = t.transpose().mul(p).mul(t);
    let reducer = SurfaceReducer::new(table, constraints);
    let mut ok = true;
    let mut indeterminate = false;
    let mut failures = Vec::new();
    for i in 0..r.rows() {
        for j in 0..r.cols() {
            match weak_vanishing(r.at(i, j), &reducer, settings) {
                WeakOutcome::Holds => {}
                WeakOutcome::Fails { residual, .. } => {
                    ok = false;
                    failures.push(EntryFailure {
                        row: i,
                        col: j,
                        residual,
                        indeterminate: false,
                    });
                }
                WeakOutcome::Indeterminate { residual } => {
                    ok = false;
                    indeterminate = true;
                    failures.push(EntryFailure {
                        row: i,
                        col: j,
                        residual,
                        indeterminate: true,
                    });
                }
            }
        }
    }
    (ok, indeterminate, failures)
}

/// Test whether `J^T (omega2 o Phi) J - c omega1` vanishes weakly on the
/// source surface along its tangent directions.
pub fn valence_check(
    tp: &TransformationPair,
    c: &BigRational,
    settings: &EngineSettings,
) -> Result<ValenceCheck, CanonicalError> {
    let p = tp.pulled_back_form()?.sub(&tp.omega1.scale(c));
    let t = tangent_basis(&tp.table, &tp.chart, &tp.constraints1);
    let (ok, indeterminate, failures) =
        restricted_vanishing(&tp.table, &p, &t, &tp.constraints1, settings);
    Ok(ValenceCheck {
        valence: c.clone(),
        ok,
        indeterminate,
        failures,
    })
}

/// Outcome of the valence search.
#[derive(Debug, Clone, PartialEq)]
pub enum Valence {
    /// Every value works: both restricted forms vanish on the surface.
    Any,
    Constant(BigRational),
    NoneFound,
}

/// Search for a constant valence. Tries the symbolic ratio of matching
/// entries first, then a ratio sampled on the surface, and verifies any
/// candidate with [`valence_check`].
pub fn find_valence(
    tp: &TransformationPair,
    settings: &EngineSettings,
) -> Result<Valence, CanonicalError> {
    let table = &tp.table;
    let t = tangent_basis(table, &tp.chart, &tp.constraints1);
    let a = t.transpose().mul(&tp.pulled_back_form()?).mul(&t);
    let b = t.transpose().mul(&tp.omega1).mul(&t);
    let reducer = SurfaceReducer::new(table, &tp.constraints1);

    let a_red = reduce_matrix(&a, &reducer)?;
    let b_red = reduce_matrix(&b, &reducer)?;
    if a_red.is_zero() && b_red.is_zero() {
        return Ok(Valence::Any);
    }

    // Symbolic candidate: a constant ratio of matching nonzero entries.
    let mut candidate: Option<BigRational> = None;
    'outer: for i in 0..a_red.rows() {
        for j in 0..a_red.cols() {
            let (num, den) = (a_red.at(i, j), b_red.at(i, j));
            if den.is_zero() {
                continue;
            }
            if let Some(c) = num.div(den).ok().and_then(|r| r.as_constant()) {
                candidate = Some(c);
                break 'outer;
            }
        }
    }

    // Sampled candidate: ratio at a point of the surface.
    if candidate.is_none() {
        if let Some(pt) = surface_samples(&reducer, settings).into_iter().next() {
            'sample: for i in 0..a_red.rows() {
                for j in 0..a_red.cols() {
                    let Ok(dv) = b_red.at(i, j).eval(&pt) else {
                        continue;
                    };
                    if dv.is_zero() {
                        continue;
                    }
                    let Ok(nv) = a_red.at(i, j).eval(&pt) else {
                        continue;
                    };
                    candidate = Some(nv / dv);
                    break 'sample;
                }
            }
        }
    }

    // `A ~ 0` with `B` nonzero leaves only the degenerate value zero.
    if candidate.is_none() && a_red.is_zero() {
        candidate = Some(BigRational::zero());
    }

    match candidate {
        Some(c) => {
            let check = valence_check(tp, &c, settings)?;
            if check.ok {
                Ok(Valence::Constant(c))
            } else {
                Ok(Valence::NoneFound)
            }
        }
        None => Ok(Valence::NoneFound),
    }
}

fn reduce_matrix(m: &RfMatrix, reducer: &SurfaceReducer) -> Result<RfMatrix, ExprError> {
    let mut out = RfMatrix::zero(reducer.table(), m.rows(), m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            out.set(i, j, reducer.reduce(m.at(i, j))?);
        }
    }
    Ok(out)
}

/// Dimensions and ranks of a constrained chart with a two-form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankReport {
    /// Chart dimension.
    pub dim_ambient: usize,
    /// Dimension of the constraint surface (generic).
    pub dim_c: usize,
    /// Generic rank of the two-form restricted to the surface.
    pub rank_omega_c: usize,
    /// Degenerate directions within the surface.
    pub dim_ker: usize,
    /// Dimension of the reduced (quotient) space: equals `rank_omega_c`.
    pub dim_reduced: usize,
    /// Whether numeric ranks at sampled surface points agree with the
    /// generic rank; `None` when no sample point was found.
    pub numeric_consistent: Option<bool>,
}

/// Restrict a two-form to a constraint surface and measure its rank, both
/// generically and at sampled points.
pub fn reduced_ranks(
    table: &Arc<VarTable>,
    chart: &[usize],
    constraints: &[RationalExpr],
    omega: &RfMatrix,
    settings: &EngineSettings,
) -> Result<RankReport, CanonicalError> {
    let m = chart.len();
    let t = tangent_basis(table, chart, constraints);
    let dim_c = t.cols();
    let reducer = SurfaceReducer::new(table, constraints);
    let omega_c = reduce_matrix(&t.transpose().mul(omega).mul(&t), &reducer)?;
    let rank_omega_c = linalg::rank(&omega_c);

    let samples = surface_samples(&reducer, settings);
    let numeric_consistent = if samples.is_empty() {
        None
    } else {
        let mut consistent = true;
        for pt in &samples {
            let Ok(vals) = omega_c.eval(pt) else {
                consistent = false;
                break;
            };
            if numeric_rank(table, &vals) != rank_omega_c {
                consistent = false;
                break;
            }
        }
        Some(consistent)
    };

    Ok(RankReport {
        dim_ambient: m,
        dim_c,
        rank_omega_c,
        dim_ker: dim_c - rank_omega_c,
        dim_reduced: rank_omega_c,
        numeric_consistent,
    })
}

fn constant_matrix(table: &Arc<VarTable>, vals: &[Vec<BigRational>]) -> RfMatrix {
    RfMatrix::from_fn(table, vals.len(), vals.first().map_or(0, Vec::len), |i, j| {
        RationalExpr::from_poly(Polynomial::constant(table, vals[i][j].clone()))
    })
}

fn numeric_rank(table: &Arc<VarTable>, vals: &[Vec<BigRational>]) -> usize {
    linalg::rank(&constant_matrix(table, vals))
}

/// Sample-point verdicts for the kernel-invariance property: the map sends
/// degenerate surface directions of the source into those of the target.
#[derive(Debug, Clone)]
pub struct KernelInvarianceReport {
    /// Dimension of the source kernel that was pushed forward.
    pub kernel_dim: usize,
    pub samples_checked: usize,
    /// `Some(true)` when every pushed kernel vector is tangent to the
    /// target surface and degenerate for the target form at every sample;
    /// `None` when nothing could be sampled (and the kernel is nonzero).
    pub ok: Option<bool>,
}

/// Check that `J` carries `ker(omega1|C1)` into `ker(omega2|C2)` at sampled
/// surface points.
pub fn kernel_invariance_check(
    tp: &TransformationPair,
    settings: &EngineSettings,
) -> Result<KernelInvarianceReport, CanonicalError> {
    let table = &tp.table;
    let m = tp.chart.len();
    let t1 = tangent_basis(table, &tp.chart, &tp.constraints1);
    let reducer1 = SurfaceReducer::new(table, &tp.constraints1);
    let omega_c1 = reduce_matrix(&t1.transpose().mul(&tp.omega1).mul(&t1), &reducer1)?;
    let kernel = linalg::nullspace(&omega_c1);
    if kernel.is_empty() {
        return Ok(KernelInvarianceReport {
            kernel_dim: 0,
            samples_checked: 0,
            ok: Some(true),
        });
    }

    // Ambient representatives of the kernel directions, pushed forward.
    let jac = tp.jacobian();
    let pushed: Vec<Vec<RationalExpr>> = kernel
        .iter()
        .map(|k| jac.mul_vec(&t1.mul_vec(k)))
        .collect();

    // Target-side data along the image.
    let bind = tp.binding();
    let omega2_im = tp.omega2_at_image()?;
    let g2_im = if tp.constraints2.is_empty() {
        None
    } else {
        let g2 = RfMatrix::from_fn(table, tp.constraints2.len(), m, |k, j| {
            tp.constraints2[k].derivative(tp.chart[j])
        });
        let mut im = RfMatrix::zero(table, g2.rows(), g2.cols());
        for i in 0..g2.rows() {
            for j in 0..g2.cols() {
                im.set(i, j, g2.at(i, j).substitute(&bind)?);
            }
        }
        Some(im)
    };

    let samples = surface_samples(&reducer1, settings);
    if samples.is_empty() {
        return Ok(KernelInvarianceReport {
            kernel_dim: kernel.len(),
            samples_checked: 0,
            ok: None,
        });
    }

    let mut ok = true;
    'samples: for pt in &samples {
        let omega2_pt = constant_matrix(table, &omega2_im.eval(pt)?);
        // Numeric tangent frame of the target surface at the image point.
        let t2_pt = match &g2_im {
            None => RfMatrix::identity(table, m),
            Some(g) => {
                let gv = constant_matrix(table, &g.eval(pt)?);
                let cols = linalg::nullspace(&gv);
                RfMatrix::from_fn(table, m, cols.len(), |i, j| cols[j][i].clone())
            }
        };
        for w in &pushed {
            let w_pt: Vec<RationalExpr> = w
                .iter()
                .map(|e| {
                    e.eval(pt).map(|v| {
                        RationalExpr::from_poly(Polynomial::constant(table, v))
                    })
                })
                .collect::<Result<_, _>>()?;
            // Tangency to the target surface.
            if let Some(g) = &g2_im {
                let gv = constant_matrix(table, &g.eval(pt)?);
                if gv.mul_vec(&w_pt).iter().any(|e| !e.is_zero()) {
                    ok = false;
                    break 'samples;
                }
            }
            // Degeneracy against every tangent direction.
            let paired = t2_pt.transpose().mul(&omega2_pt).mul_vec(&w_pt);
            if paired.iter().any(|e| !e.is_zero()) {
                ok = false;
                break 'samples;
            }
        }
    }

    Ok(KernelInvarianceReport {
        kernel_dim: kernel.len(),
        samples_checked: samples.len(),
        ok: Some(ok),
    })
}

/// The standard two-form `sum dq_a ^ dp_a` on a `(q1..qk, p1..pk)` chart
/// ordering: entry `(a, k + a) = 1`.
pub fn standard_symplectic(table: &Arc<VarTable>, pairs: usize) -> RfMatrix {
    let mut omega = RfMatrix::zero(table, 2 * pairs, 2 * pairs);
    for a in 0..pairs {
        omega.set(a, pairs + a, RationalExpr::one(table));
        omega.set(pairs + a, a, RationalExpr::one(table).neg());
    }
    omega
}
