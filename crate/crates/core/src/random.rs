//! Seeded random instances for tests, the `verify` oracle run and the `gen`
//! command. All draws go through ChaCha8 so a seed fixes the output on every
//! platform.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::chain::{MarkovChain, ProbabilityVector, StochasticMatrix};
use crate::error::Result;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalized i.i.d. exponentials: a uniform draw from the open simplex.
pub fn random_simplex_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}

pub fn random_probability_vector<R: Rng>(rng: &mut R, n: usize) -> Result<ProbabilityVector> {
    ProbabilityVector::new(random_simplex_point(rng, n))
}

/// A row-stochastic matrix whose off-cycle entries are zero with probability
/// `sparsity`. The self-loops and the cycle `i → i+1` always carry mass, so
/// the chain is irreducible and aperiodic.
pub fn random_stochastic_matrix<R: Rng>(
    rng: &mut R,
    n: usize,
    sparsity: f64,
) -> Result<StochasticMatrix> {
    let rows = (0..n)
        .map(|i| {
            let mut row = random_simplex_point(rng, n);
            for (j, v) in row.iter_mut().enumerate() {
                let keep = j == i || j == (i + 1) % n;
                if !keep && rng.random::<f64>() < sparsity {
                    *v = 0.0;
                }
            }
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    StochasticMatrix::new(rows)
}

pub fn random_chain<R: Rng>(rng: &mut R, n: usize, sparsity: f64) -> Result<MarkovChain> {
    MarkovChain::new(random_stochastic_matrix(rng, n, sparsity)?)
}

/// Payoff entries in `[0, 1)`; with probability `tie_prob` an entry is
/// rounded to one decimal, which produces ties.
pub fn random_payoff<R: Rng>(rng: &mut R, n: usize, tie_prob: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.random();
            if rng.random::<f64>() < tie_prob {
                (v * 10.0).floor() / 10.0
            } else {
                v
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_a_seed() {
        let a = random_stochastic_matrix(&mut seeded_rng(7), 6, 0.5).unwrap();
        let b = random_stochastic_matrix(&mut seeded_rng(7), 6, 0.5).unwrap();
        assert_eq!(a, b);
        assert!(a.max_row_sum_error() < 1e-12);
        assert!(random_chain(&mut seeded_rng(3), 30, 0.9).is_ok());
    }
}
