//! Water-filling applied row by row to the transition matrix, followed by the
//! removal of zero columns.

use crate::chain::{check_radius, MarkovChain, StochasticMatrix};
use crate::error::{Error, Result};
use crate::waterfill::{fill_drain, support_sets, SupportPartition};

/// Entries at or below this magnitude count as zero when reducing.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Method1Result {
    pub phi_dagger: StochasticMatrix,
    pub phi: StochasticMatrix,
    pub alphas: Vec<f64>,
    pub r_max_rows: Vec<f64>,
    /// `Σᵢ μᵢ Σⱼ ℓⱼ Φ†ᵢⱼ`.
    pub payoff: f64,
    /// 0-based indices of the states that survive the reduction.
    pub kept_states: Vec<usize>,
    pub supports: SupportPartition,
}

/// Per-row saturation radii `2(1 − Σ_{j∈𝒳⁰} Pᵢⱼ)`.
pub fn row_saturation(p: &StochasticMatrix, supports: &SupportPartition) -> Vec<f64> {
    p.rows()
        .map(|row| {
            let top: f64 = supports.x_top.iter().map(|&j| row[j]).sum();
            (2.0 * (1.0 - top)).max(0.0)
        })
        .collect()
}

/// Per-row budgets `αᵢ = min(R, R_max,i)`.
pub fn row_budgets(p: &StochasticMatrix, supports: &SupportPartition, radius: f64) -> Vec<f64> {
    row_saturation(p, supports)
        .into_iter()
        .map(|rm| radius.min(rm))
        .collect()
}

/// Budgets used by [`approximate_rows`].
///
/// Below `R_sat = Σᵢ μᵢ R_max,i` these are [`row_budgets`]. From `R_sat` on,
/// every row is saturated: that allocation meets the coupled constraint
/// `Σᵢ αᵢμᵢ ≤ R` and already attains the largest payoff `ℓ_max`.
pub fn coupled_budgets(chain: &MarkovChain, supports: &SupportPartition, radius: f64) -> Vec<f64> {
    let r_max_rows = row_saturation(chain.p(), supports);
    let r_sat: f64 = chain.mu().iter().zip(&r_max_rows).map(|(m, r)| m * r).sum();
    if radius >= r_sat - ZERO_TOL {
        r_max_rows
    } else {
        r_max_rows.into_iter().map(|rm| radius.min(rm)).collect()
    }
}

/// Builds Φ† by water-filling every row of P with its budget, then reduces it.
pub fn approximate_rows(chain: &MarkovChain, ell: &[f64], radius: f64) -> Result<Method1Result> {
    let p = chain.p();
    let n = p.n();
    if ell.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ell.len(),
        });
    }
    let radius = check_radius(radius)?;
    let supports = support_sets(ell)?;
    let r_max_rows = row_saturation(p, &supports);
    let alphas = coupled_budgets(chain, &supports, radius);

    let rows: Vec<Vec<f64>> = p
        .rows()
        .zip(&alphas)
        .map(|(row, &a)| fill_drain(row, &supports, a))
        .collect();
    let phi_dagger = StochasticMatrix::with_labels(rows, p.labels().to_vec())?;

    let payoff = chain
        .mu()
        .iter()
        .zip(phi_dagger.rows())
        .map(|(m, row)| m * row.iter().zip(ell).map(|(q, l)| q * l).sum::<f64>())
        .sum();
    let kept_states = kept_columns(&phi_dagger);
    let phi = reduce(&phi_dagger)?;
    Ok(Method1Result {
        phi_dagger,
        phi,
        alphas,
        r_max_rows,
        payoff,
        kept_states,
        supports,
    })
}

/// Indices of columns with at least one entry above [`ZERO_TOL`].
pub fn kept_columns(m: &StochasticMatrix) -> Vec<usize> {
    (0..m.ncols())
        .filter(|&j| (0..m.n()).any(|i| m.get(i, j).abs() > ZERO_TOL))
        .collect()
}

/// Drops every all-zero column and the row with the same index. Surviving
/// states keep their labels.
pub fn reduce(phi_dagger: &StochasticMatrix) -> Result<StochasticMatrix> {
    let kept = kept_columns(phi_dagger);
    let mut rows = Vec::with_capacity(kept.len());
    for &i in &kept {
        let row: Vec<f64> = kept.iter().map(|&j| phi_dagger.get(i, j)).collect();
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ZERO_TOL {
            return Err(Error::NotReducible { row: i, sum });
        }
        rows.push(row);
    }
    let labels = kept
        .iter()
        .map(|&i| phi_dagger.labels()[i].clone())
        .collect();
    StochasticMatrix::with_labels(rows, labels)
}
