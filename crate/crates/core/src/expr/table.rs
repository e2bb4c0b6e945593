//! Variable tables: the shared namespace behind every expression.
//!
//! A [`VarTable`] fixes an ordered list of named variables. Expressions store
//! exponent vectors indexed against one table, so the table also fixes the
//! monomial order: positions come first, then velocities, momenta,
//! multipliers, and finally free parameters; within a block, variables are
//! ordered by index. Tables are immutable; extending one (for example when
//! momenta are introduced) produces a fresh table together with a [`Remap`]
//! that rebases existing expressions.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

/// The role a variable plays. The variant order is load-bearing: it is the
/// block order of the global variable order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    /// Configuration coordinate `q_{i+1}`.
    Position(usize),
    /// Velocity coordinate `v_{i+1}`.
    Velocity(usize),
    /// Momentum coordinate `p_{i+1}`.
    Momentum(usize),
    /// Undetermined multiplier (used only for bookkeeping names).
    Multiplier(usize),
    /// Anything else: physical parameters and generic chart coordinates.
    Parameter(usize),
}

/// A single named variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("invalid variable name `{0}`")]
    InvalidName(String),
}

/// An ordered, immutable set of variables.
#[derive(Debug, PartialEq, Eq)]
pub struct VarTable {
    vars: Vec<VarInfo>,
    by_name: BTreeMap<String, usize>,
    dim: usize,
}

/// Index translation produced when a table is extended.
#[derive(Debug, Clone)]
pub struct Remap {
    /// `to_new[i]` is the index in the new table of old variable `i`.
    pub to_new: Vec<usize>,
    pub new_len: usize,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric())
}

impl VarTable {
    fn build(mut vars: Vec<VarInfo>, dim: usize) -> Result<Arc<Self>, TableError> {
        vars.sort_by(|a, b| a.kind.cmp(&b.kind));
        let mut by_name = BTreeMap::new();
        for (i, v) in vars.iter().enumerate() {
            if by_name.insert(v.name.clone(), i).is_some() {
                return Err(TableError::DuplicateName(v.name.clone()));
            }
        }
        Ok(Arc::new(VarTable { vars, by_name, dim }))
    }

    /// Table for an `n`-dimensional velocity phase space: `q1..qn`, `v1..vn`,
    /// plus named parameters.
    pub fn for_lagrangian(n: usize, params: &[&str]) -> Result<Arc<Self>, TableError> {
        let mut vars = Vec::with_capacity(2 * n + params.len());
        for a in 0..n {
            vars.push(VarInfo {
                name: format!("q{}", a + 1),
                kind: VarKind::Position(a),
            });
            vars.push(VarInfo {
                name: format!("v{}", a + 1),
                kind: VarKind::Velocity(a),
            });
        }
        for (i, p) in params.iter().enumerate() {
            if !valid_name(p) {
                return Err(TableError::InvalidName(p.to_string()));
            }
            vars.push(VarInfo {
                name: p.to_string(),
                kind: VarKind::Parameter(i),
            });
        }
        Self::build(vars, n)
    }

    /// Generic chart: every variable is treated as a plain parameter, kept in
    /// the given order.
    pub fn chart(names: &[&str]) -> Result<Arc<Self>, TableError> {
        let mut vars = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if !valid_name(name) {
                return Err(TableError::InvalidName(name.to_string()));
            }
            vars.push(VarInfo {
                name: name.to_string(),
                kind: VarKind::Parameter(i),
            });
        }
        Self::build(vars, 0)
    }

    /// Configuration dimension `n` (zero for generic charts).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn var(&self, i: usize) -> &VarInfo {
        &self.vars[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.vars[i].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    fn index_of_kind(&self, kind: VarKind) -> Option<usize> {
        self.vars.iter().position(|v| v.kind == kind)
    }

    /// Index of `q_{a+1}`; panics if out of range.
    pub fn position(&self, a: usize) -> usize {
        self.index_of_kind(VarKind::Position(a))
            .expect("position variable out of range")
    }

    /// Index of `v_{a+1}`; panics if out of range.
    pub fn velocity(&self, a: usize) -> usize {
        self.index_of_kind(VarKind::Velocity(a))
            .expect("velocity variable out of range")
    }

    /// Index of `p_{a+1}`, if momenta are present.
    pub fn momentum(&self, a: usize) -> Option<usize> {
        self.index_of_kind(VarKind::Momentum(a))
    }

    pub fn has_momenta(&self) -> bool {
        self.index_of_kind(VarKind::Momentum(0)).is_some()
    }

    /// All indices whose kind satisfies the predicate, in table order.
    pub fn indices_where(&self, pred: impl Fn(&VarKind) -> bool) -> Vec<usize> {
        (0..self.vars.len())
            .filter(|&i| pred(&self.vars[i].kind))
            .collect()
    }

    fn extend_with(
        self: &Arc<Self>,
        extra: Vec<VarInfo>,
    ) -> Result<(Arc<Self>, Remap), TableError> {
        let mut vars = self.vars.clone();
        vars.extend(extra);
        let new = Self::build(vars, self.dim)?;
        let to_new = self
            .vars
            .iter()
            .map(|v| new.index_of(&v.name).expect("old variable survives"))
            .collect();
        let remap = Remap {
            to_new,
            new_len: new.len(),
        };
        Ok((new, remap))
    }

    /// Add momenta `p1..pn` (one per position variable).
    pub fn extend_momenta(self: &Arc<Self>) -> Result<(Arc<Self>, Remap), TableError> {
        let extra = (0..self.dim)
            .map(|a| VarInfo {
                name: format!("p{}", a + 1),
                kind: VarKind::Momentum(a),
            })
            .collect();
        self.extend_with(extra)
    }

    /// Append extra parameters (internal names are allowed to bypass the
    /// surface syntax, e.g. for scratch shift variables).
    pub fn extend_parameters(
        self: &Arc<Self>,
        names: &[&str],
    ) -> Result<(Arc<Self>, Remap), TableError> {
        let base = self
            .vars
            .iter()
            .filter_map(|v| match v.kind {
                VarKind::Parameter(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let extra = names
            .iter()
            .enumerate()
            .map(|(i, name)| VarInfo {
                name: name.to_string(),
                kind: VarKind::Parameter(base + i),
            })
            .collect();
        self.extend_with(extra)
    }
}

/// True when two expressions may be combined: same table object or
/// structurally identical tables.
pub fn same_table(a: &Arc<VarTable>, b: &Arc<VarTable>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrangian_table_order() {
        let t = VarTable::for_lagrangian(2, &["m"]).unwrap();
        let names: Vec<_> = (0..t.len()).map(|i| t.name(i).to_string()).collect();
        assert_eq!(names, ["q1", "q2", "v1", "v2", "m"]);
        assert_eq!(t.dim(), 2);
        assert_eq!(t.position(1), 1);
        assert_eq!(t.velocity(0), 2);
        assert!(t.momentum(0).is_none());
    }

    #[test]
    fn momenta_sit_between_velocities_and_parameters() {
        let t = VarTable::for_lagrangian(2, &["m"]).unwrap();
        let (t2, remap) = t.extend_momenta().unwrap();
        let names: Vec<_> = (0..t2.len()).map(|i| t2.name(i).to_string()).collect();
        assert_eq!(names, ["q1", "q2", "v1", "v2", "p1", "p2", "m"]);
        // old `m` (index 4) moves past the momenta
        assert_eq!(remap.to_new[4], 6);
        assert_eq!(remap.to_new[0], 0);
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(matches!(
            VarTable::for_lagrangian(1, &["q1"]),
            Err(TableError::DuplicateName(_))
        ));
        let t = VarTable::for_lagrangian(1, &["p1"]).unwrap();
        assert!(t.extend_momenta().is_err());
    }

    #[test]
    fn chart_keeps_declaration_order() {
        let t = VarTable::chart(&["x", "y", "z"]).unwrap();
        assert_eq!(t.name(0), "x");
        assert_eq!(t.name(2), "z");
        assert_eq!(t.dim(), 0);
    }
}
