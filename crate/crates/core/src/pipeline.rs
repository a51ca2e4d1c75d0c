//! End-to-end reduction at one radius: ν*, ν̄, `Q†`, `Q`, and at the radii
//! where the state count changes, the partition, Φ, Φ̂ and the KL rate.

use crate::chain::{check_radius, entropy, MarkovChain, ProbabilityVector, StochasticMatrix};
use crate::error::{Error, Result};
use crate::lift::{lift_reduced, partition_entropy, partition_occupancy, LiftedChain};
use crate::method2::{
    entropy_qdagger, occupancy_qdagger, reduce_entropy, reduce_occupancy, reduction_thresholds,
    threshold_index, Method, QDagger, ReducedVector,
};
use crate::waterfill::{max_entropy, support_sets, waterfill_with};

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResult {
    pub method: Method,
    pub radius: f64,
    pub nu_star: ProbabilityVector,
    pub reduced: ReducedVector,
    pub q_dagger: QDagger,
    pub q: StochasticMatrix,
    /// `Σ ℓᵢν*ᵢ` for occupancy, `H(ν*)` in nats for entropy.
    pub objective: f64,
    /// Present only at radius 0 and at thresholds.
    pub lifted: Option<LiftedChain>,
}

impl ReductionResult {
    pub fn reduced_size(&self) -> usize {
        self.reduced.nu_bar.len()
    }
}

/// Settings shared by every radius of a run.
#[derive(Debug, Clone)]
pub struct Reducer<'a> {
    chain: &'a MarkovChain,
    method: Method,
    ell: Vec<f64>,
    allow_ties: bool,
    thresholds: Vec<f64>,
}

impl<'a> Reducer<'a> {
    /// `ell` defaults to μ; it is ignored by the entropy method.
    pub fn new(
        chain: &'a MarkovChain,
        method: Method,
        ell: Option<Vec<f64>>,
        allow_ties: bool,
    ) -> Result<Self> {
        let ell = ell.unwrap_or_else(|| chain.mu().entries().to_vec());
        if ell.len() != chain.n() {
            return Err(Error::DimensionMismatch {
                expected: chain.n(),
                got: ell.len(),
            });
        }
        let thresholds = reduction_thresholds(chain.mu(), &ell, method)?;
        Ok(Self {
            chain,
            method,
            ell,
            allow_ties,
            thresholds,
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// The threshold matching `radius`, if any (radius 0 matches itself).
    pub fn lift_point(&self, radius: f64) -> Option<f64> {
        if radius == 0.0 {
            return Some(0.0);
        }
        threshold_index(radius, &self.thresholds).map(|k| self.thresholds[k])
    }

    /// Reduces at `radius`. When `radius` matches a threshold it is snapped
    /// to the computed value and the lifted chain is included.
    pub fn at(&self, radius: f64) -> Result<ReductionResult> {
        let radius = check_radius(radius)?;
        let snapped = self.lift_point(radius);
        let radius = snapped.unwrap_or(radius);
        let mu = self.chain.mu();
        let (nu_star, q_dagger, reduced, objective) = match self.method {
            Method::Occupancy => {
                let supports = support_sets(&self.ell)?;
                let sol = waterfill_with(mu, &self.ell, &supports, radius)?;
                let q = occupancy_qdagger(mu, &self.ell, radius)?;
                let red = reduce_occupancy(&sol.per_state)?;
                (sol.per_state, q, red, sol.payoff)
            }
            Method::Entropy => {
                let sol = max_entropy(mu, radius)?;
                let q = entropy_qdagger(mu, radius, self.allow_ties)?;
                let red = reduce_entropy(&sol.per_state)?;
                let h = entropy(&sol.per_state);
                (sol.per_state, q, red, h)
            }
        };
        let lifted = match snapped {
            Some(_) => Some(self.lift(&nu_star)?),
            None => None,
        };
        Ok(ReductionResult {
            method: self.method,
            radius,
            q: q_dagger.reduced()?,
            nu_star,
            reduced,
            q_dagger,
            objective,
            lifted,
        })
    }

    fn lift(&self, nu_star: &ProbabilityVector) -> Result<LiftedChain> {
        let (p, mu) = (self.chain.p(), self.chain.mu());
        match self.method {
            Method::Occupancy => {
                let supports = support_sets(&self.ell)?;
                let f = partition_occupancy(nu_star, &supports)?;
                lift_reduced(p, mu, mu.entries(), nu_star, f)
            }
            Method::Entropy => {
                let f = partition_entropy(nu_star)?;
                lift_reduced(p, mu, nu_star.entries(), nu_star, f)
            }
        }
    }

    /// Results at radius 0 and at every threshold, each with its lifted chain.
    pub fn at_thresholds(&self) -> Result<Vec<ReductionResult>> {
        std::iter::once(0.0)
            .chain(self.thresholds.iter().copied())
            .map(|r| self.at(r))
            .collect()
    }
}
