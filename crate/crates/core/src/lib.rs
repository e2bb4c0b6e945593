//! Exact constraint analysis for singular Lagrangian and Hamiltonian
//! systems.
//!
//! Given a velocity-quadratic Lagrangian `L = (1/2) v^T W(q) v + a(q)^T v -
//! V(q)` whose Hessian `W` may be degenerate, the crate computes the
//! associated geometry and dynamics symbolically: the Legendre map and
//! primary constraints, the Hamiltonian constraint chain with first/second
//! class splitting, the Lagrangian constraint chains with and without the
//! second-order-equation condition, the time-evolution operator connecting
//! the two sides, and valence checks for canonical transformations between
//! final constraint submanifolds. All computation is exact over
//! arbitrary-precision rationals; randomized numeric sampling (always at
//! exact rational points) is used only to cross-check generic-rank
//! assumptions and to certify weak vanishing where symbolic reduction alone
//! cannot decide.

pub mod canonical;
pub mod constraints;
pub mod evolution;
pub mod expr;
pub mod legendre;
pub mod linalg;
pub mod mechanics;
pub mod presymplectic;
pub mod sampling;

/// Shared knobs for the constraint algorithms and sampling cross-checks.
#[derive(Debug, Clone)]
pub struct EngineSettings {
    /// Hard cap on constraint generations before giving up.
    pub max_generations: u32,
    /// Number of random sample points for numeric cross-checks.
    pub trials: u32,
    /// Seed for all randomized sampling; identical seeds give byte-identical
    /// results.
    pub seed: u64,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            max_generations: 10,
            trials: 10,
            seed: 0,
        }
    }
}
