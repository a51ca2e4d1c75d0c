//! Partition functions, KL-optimal aggregation of P onto the reduced space,
//! and the lifted chain on the original space.

use crate::chain::{ProbabilityVector, StochasticMatrix};
use crate::error::{Error, Result};
use crate::method2::{group_equal, ZERO_MASS_TOL};
use crate::waterfill::SupportPartition;

/// Largest row-sum deviation accepted from an aggregation before it is
/// reported as inconsistent; accepted rows are renormalized.
pub const AGGREGATE_TOL: f64 = 1e-9;

/// Surjective map φ from the original states onto `0..target_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionFunction {
    map: Vec<usize>,
    groups: Vec<Vec<usize>>,
}

impl PartitionFunction {
    /// Builds φ from a 0-based map; every target in `0..max+1` needs a preimage.
    pub fn new(map: Vec<usize>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::EmptyInput);
        }
        let size = map.iter().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); size];
        for (i, &k) in map.iter().enumerate() {
            groups[k].push(i);
        }
        if let Some(k) = groups.iter().position(Vec::is_empty) {
            return Err(Error::EmptyGroup(k));
        }
        Ok(Self { map, groups })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
            groups: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    /// φ with 1-based targets, as printed in reports.
    pub fn map_one_based(&self) -> Vec<usize> {
        self.map.iter().map(|k| k + 1).collect()
    }

    /// Preimages ψ(k), each sorted by state index.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn target_size(&self) -> usize {
        self.groups.len()
    }

    pub fn source_size(&self) -> usize {
        self.map.len()
    }

    /// Sums `values` over each group.
    pub fn group_sums(&self, values: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&i| values[i]).sum())
            .collect()
    }
}

/// Occupancy partition: the top set and every state with zero mass map to
/// the first target; each other state gets its own target in index order.
pub fn partition_occupancy(
    nu: &ProbabilityVector,
    supports: &SupportPartition,
) -> Result<PartitionFunction> {
    if supports.n() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: nu.len(),
            got: supports.n(),
        });
    }
    let mut next = 1;
    let map = (0..nu.len())
        .map(|i| {
            if supports.contains_top(i) || nu[i] <= ZERO_MASS_TOL {
                0
            } else {
                next += 1;
                next - 1
            }
        })
        .collect();
    PartitionFunction::new(map)
}

/// Entropy partition: equal entries of ν* share a target; targets are
/// numbered by first occurrence.
pub fn partition_entropy(nu: &ProbabilityVector) -> Result<PartitionFunction> {
    let mut map = vec![0; nu.len()];
    for (k, g) in group_equal(nu.entries()).iter().enumerate() {
        for &i in g {
            map[i] = k;
        }
    }
    PartitionFunction::new(map)
}

fn check_size(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `Φ_kl = Σ_{i∈ψ(k)} Σ_{j∈ψ(l)} wᵢ Pᵢⱼ / ν̄_k`.
///
/// The weights are μ for occupancy and ν* for entropy reduction. Rows whose
/// sums miss one by more than [`AGGREGATE_TOL`] are reported as
/// [`Error::NonStochasticResult`].
pub fn aggregate(
    p: &StochasticMatrix,
    weights: &[f64],
    phi: &PartitionFunction,
    nu_bar: &ProbabilityVector,
) -> Result<StochasticMatrix> {
    let n = p.n();
    check_size(n, weights.len())?;
    check_size(n, phi.source_size())?;
    let m = phi.target_size();
    check_size(m, nu_bar.len())?;
    if let Some(k) = (0..m).find(|&k| nu_bar[k] <= 0.0) {
        return Err(Error::ZeroGroupMass(k));
    }
    let mut rows = vec![vec![0.0; m]; m];
    for (i, row) in p.rows().enumerate() {
        let k = phi.map[i];
        // The ratio is formed first so that an unmerged state reproduces its row exactly.
        let w = weights[i] / nu_bar[k];
        if w == 0.0 {
            continue;
        }
        for (j, &pij) in row.iter().enumerate() {
            rows[k][phi.map[j]] += w * pij;
        }
    }
    for (k, row) in rows.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > AGGREGATE_TOL {
            return Err(Error::NonStochasticResult { row: k, sum });
        }
    }
    StochasticMatrix::with_labels(rows, nu_bar.labels().to_vec())
}

/// Lifts Φ back to the original space:
/// `Φ̂ᵢⱼ = μⱼ / μ(ψ(φ(j))) · Φ_{φ(i)φ(j)}`.
pub fn lift_chain(
    phi_reduced: &StochasticMatrix,
    mu: &ProbabilityVector,
    phi: &PartitionFunction,
) -> Result<StochasticMatrix> {
    let n = mu.len();
    check_size(n, phi.source_size())?;
    check_size(phi.target_size(), phi_reduced.n())?;
    let group_mass = phi.group_sums(mu.entries());
    if let Some(k) = group_mass.iter().position(|&m| m <= 0.0) {
        return Err(Error::ZeroGroupMass(k));
    }
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (a, b) = (phi.map[i], phi.map[j]);
                    let share = if phi.groups[b].len() == 1 {
                        1.0
                    } else {
                        mu[j] / group_mass[b]
                    };
                    share * phi_reduced.get(a, b)
                })
                .collect()
        })
        .collect();
    StochasticMatrix::with_labels(rows, mu.labels().to_vec())
}

/// `Σᵢⱼ μᵢ Pᵢⱼ log(Pᵢⱼ / Φ̂ᵢⱼ)` in nats; `+∞` when Φ̂ misses a transition of P
/// on the support of μ.
pub fn kl_rate_lifted(
    p: &StochasticMatrix,
    mu: &ProbabilityVector,
    phi_hat: &StochasticMatrix,
) -> Result<f64> {
    check_size(p.n(), mu.len())?;
    check_size(p.n(), phi_hat.n())?;
    let mut acc = 0.0;
    for (i, (row, hat)) in p.rows().zip(phi_hat.rows()).enumerate() {
        if mu[i] == 0.0 {
            continue;
        }
        for (&pij, &qij) in row.iter().zip(hat) {
            if pij == 0.0 {
                continue;
            }
            if qij <= 0.0 {
                return Ok(f64::INFINITY);
            }
            acc += mu[i] * pij * (pij / qij).ln();
        }
    }
    Ok(acc.max(0.0))
}

/// Φ over the reduced space, its lift Φ̂, and the divergence rate of P from Φ̂.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedChain {
    pub partition: PartitionFunction,
    pub phi: StochasticMatrix,
    pub phi_hat: StochasticMatrix,
    pub kl_rate: f64,
}

/// Aggregates, lifts and scores in one step; ν̄ is the group sum of ν*.
pub fn lift_reduced(
    p: &StochasticMatrix,
    mu: &ProbabilityVector,
    weights: &[f64],
    nu_star: &ProbabilityVector,
    partition: PartitionFunction,
) -> Result<LiftedChain> {
    let sums = partition.group_sums(nu_star.entries());
    let labels = partition
        .groups()
        .iter()
        .map(|g| {
            g.iter()
                .map(|&i| mu.labels()[i].as_str())
                .collect::<Vec<_>>()
                .join("+")
        })
        .collect();
    let nu_bar = ProbabilityVector::with_labels(sums, labels)?;
    let phi = aggregate(p, weights, &partition, &nu_bar)?;
    let phi_hat = lift_chain(&phi, mu, &partition)?;
    let kl_rate = kl_rate_lifted(p, mu, &phi_hat)?;
    Ok(LiftedChain {
        partition,
        phi,
        phi_hat,
        kl_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waterfill::support_sets;
    use approx::assert_abs_diff_eq;

    fn p() -> StochasticMatrix {
        StochasticMatrix::new(vec![
            vec![0.4, 0.2, 0.3, 0.1],
            vec![0.3, 0.5, 0.1, 0.1],
            vec![0.2, 0.3, 0.4, 0.1],
            vec![0.6, 0.2, 0.1, 0.1],
        ])
        .unwrap()
    }

    fn mu() -> ProbabilityVector {
        pv(&[0.34, 0.32, 0.24, 0.1])
    }

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    fn assert_rows(m: &StochasticMatrix, expected: &[&[f64]], tol: f64) {
        assert_eq!(m.n(), expected.len());
        for (i, row) in expected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_abs_diff_eq!(m.get(i, j), *v, epsilon = tol);
            }
        }
    }

    #[test]
    fn occupancy_partitions() {
        let s = support_sets(mu().entries()).unwrap();
        let f = partition_occupancy(&pv(&[0.44, 0.32, 0.24, 0.0]), &s).unwrap();
        assert_eq!(f.map_one_based(), [1, 2, 3, 1]);
        let f = partition_occupancy(&pv(&[0.68, 0.32, 0.0, 0.0]), &s).unwrap();
        assert_eq!(f.map_one_based(), [1, 2, 1, 1]);
        let f = partition_occupancy(&mu(), &s).unwrap();
        assert_eq!(f, PartitionFunction::identity(4));
    }

    #[test]
    fn entropy_partitions() {
        let f = partition_entropy(&pv(&[0.32, 0.32, 0.24, 0.12])).unwrap();
        assert_eq!(f.map_one_based(), [1, 1, 2, 3]);
        let f = partition_entropy(&pv(&[0.26, 0.26, 0.24, 0.24])).unwrap();
        assert_eq!(f.map_one_based(), [1, 1, 2, 2]);
        assert_eq!(partition_entropy(&mu()).unwrap(), PartitionFunction::identity(4));
    }

    #[test]
    fn partition_requires_surjectivity() {
        assert!(matches!(
            PartitionFunction::new(vec![0, 2]),
            Err(Error::EmptyGroup(1))
        ));
    }

    #[test]
    fn aggregate_occupancy_example() {
        let f = PartitionFunction::new(vec![0, 1, 2, 0]).unwrap();
        let nu_bar = pv(&[0.44, 0.32, 0.24]);
        let phi = aggregate(&p(), mu().entries(), &f, &nu_bar).unwrap();
        assert_rows(
            &phi,
            &[&[0.5455, 0.2, 0.2545], &[0.4, 0.5, 0.1], &[0.3, 0.3, 0.4]],
            5e-5,
        );
        assert_abs_diff_eq!(phi.get(0, 0), 0.24 / 0.44, epsilon = 1e-12);
        assert_abs_diff_eq!(phi.get(0, 2), 0.112 / 0.44, epsilon = 1e-12);
    }

    #[test]
    fn aggregate_entropy_example() {
        let f = PartitionFunction::new(vec![0, 0, 1, 1]).unwrap();
        let nu = [0.26, 0.26, 0.24, 0.24];
        let phi = aggregate(&p(), &nu, &f, &pv(&[0.52, 0.48])).unwrap();
        assert_rows(&phi, &[&[0.7, 0.3], &[0.65, 0.35]], 1e-12);
    }

    #[test]
    fn aggregate_identity_and_inconsistent() {
        let id = PartitionFunction::identity(4);
        let phi = aggregate(&p(), mu().entries(), &id, &mu()).unwrap();
        assert_rows(&phi, &p().to_rows().iter().map(Vec::as_slice).collect::<Vec<_>>(), 1e-12);
        let f = PartitionFunction::new(vec![0, 1, 2, 0]).unwrap();
        assert!(matches!(
            aggregate(&p(), mu().entries(), &f, &pv(&[0.5, 0.3, 0.2])),
            Err(Error::NonStochasticResult { .. })
        ));
    }

    #[test]
    fn lift_examples() {
        let id = PartitionFunction::identity(4);
        assert_eq!(lift_chain(&p(), &mu(), &id).unwrap(), p());

        let phi = StochasticMatrix::new(vec![vec![0.7, 0.2, 0.1], vec![0.5, 0.4, 0.1], vec![0.8, 0.1, 0.1]])
            .unwrap();
        let f = PartitionFunction::new(vec![0, 0, 1, 2]).unwrap();
        let hat = lift_chain(&phi, &mu(), &f).unwrap();
        assert_abs_diff_eq!(hat.get(0, 0), 0.34 / 0.66 * 0.7, epsilon = 1e-15);
        assert!(hat.max_row_sum_error() < 1e-12);
    }

    #[test]
    fn kl_rate_examples() {
        assert_eq!(kl_rate_lifted(&p(), &mu(), &p()).unwrap(), 0.0);
        let hat = StochasticMatrix::new(vec![
            vec![0.5, 0.2, 0.3, 0.0],
            vec![0.3, 0.5, 0.1, 0.1],
            vec![0.2, 0.3, 0.4, 0.1],
            vec![0.6, 0.2, 0.1, 0.1],
        ])
        .unwrap();
        assert_eq!(kl_rate_lifted(&p(), &mu(), &hat).unwrap(), f64::INFINITY);
    }

    #[test]
    fn lifted_occupancy_at_second_threshold() {
        let nu = pv(&[0.68, 0.32, 0.0, 0.0]);
        let s = support_sets(mu().entries()).unwrap();
        let f = partition_occupancy(&nu, &s).unwrap();
        let lc = lift_reduced(&p(), &mu(), mu().entries(), &nu, f).unwrap();
        assert_rows(&lc.phi, &[&[0.7647, 0.2353], &[0.5, 0.5]], 5e-5);
        assert!(lc.phi_hat.max_row_sum_error() < 1e-12);
        // Within group 1 the lifted mass is proportional to μ.
        for i in 0..4 {
            let r = lc.phi_hat.get(i, 2) / lc.phi_hat.get(i, 3);
            assert_abs_diff_eq!(r, 2.4, epsilon = 1e-12);
        }
        assert!(lc.kl_rate.is_finite() && lc.kl_rate > 0.0);
    }
}
