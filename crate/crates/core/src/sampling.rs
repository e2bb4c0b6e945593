//! Seeded random rational points for numeric cross-checks.
//!
//! Every randomized routine in the crate draws from a `ChaCha8Rng` seeded
//! from [`crate::EngineSettings::seed`], so runs are reproducible down to
//! the byte. Points are exact rationals with small numerators and
//! denominators; evaluation therefore stays exact.

use std::collections::BTreeMap;

use num_rational::BigRational;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::RationalExpr;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random rational in `[-12, 12]` with denominator 1..=4.
pub fn random_rational(rng: &mut ChaCha8Rng) -> BigRational {
    let num: i64 = rng.gen_range(-12..=12);
    let den: i64 = rng.gen_range(1..=4);
    BigRational::new(num.into(), den.into())
}

/// A random point for the given variable indices.
pub fn random_point(vars: &[usize], rng: &mut ChaCha8Rng) -> BTreeMap<usize, BigRational> {
    vars.iter()
        .map(|&i| (i, random_rational(rng)))
        .collect()
}

/// Sample a point at which every listed expression has a nonvanishing
/// denominator, retrying a bounded number of times.
pub fn point_avoiding_poles(
    vars: &[usize],
    guard: &[&RationalExpr],
    rng: &mut ChaCha8Rng,
) -> Option<BTreeMap<usize, BigRational>> {
    'attempt: for _ in 0..64 {
        let pt = random_point(vars, rng);
        for e in guard {
            match e.den().eval(&pt) {
                Ok(v) if !num_traits::Zero::is_zero(&v) => {}
                _ => continue 'attempt,
            }
        }
        return Some(pt);
    }
    None
}
