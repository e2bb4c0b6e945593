//! Exact symbolic kernel: variable tables, polynomials, rational
//! expressions, and the surface-syntax parser.
//!
//! Everything downstream (linear algebra, constraint chains, operator
//! checks) is built from [`RationalExpr`] values sharing a [`VarTable`]. All
//! arithmetic is exact over arbitrary-precision rationals; zero tests are
//! decision procedures, not numerical heuristics.

mod error;
mod parse;
mod poly;
mod rational;
mod table;

pub use error::ExprError;
pub use parse::parse;
pub use poly::{Monomial, Polynomial};
pub use rational::{big, big_ratio, RationalExpr};
pub use table::{same_table, Remap, TableError, VarInfo, VarKind, VarTable};
