//! `Q†` operators for occupancy and maximum-entropy reduction, the reduced
//! vector ν̄, and the radii at which the reduced state count changes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::{check_radius, default_labels, ProbabilityVector, StochasticMatrix, PROB_TOL};
use crate::error::{Error, Result};
use crate::waterfill::{max_entropy, support_sets, waterfill_with, SupportPartition, TIE_TOL};

/// Masses at or below this are treated as zero when reducing ν*.
pub const ZERO_MASS_TOL: f64 = 1e-12;

/// Tolerance for matching a user-supplied radius against a threshold.
pub const THRESHOLD_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Occupancy,
    Entropy,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "occupancy" => Ok(Method::Occupancy),
            "entropy" => Ok(Method::Entropy),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?} (expected occupancy or entropy)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Occupancy => "occupancy",
            Method::Entropy => "entropy",
        })
    }
}

/// The linear operator with `μ·Q† = ν*`.
///
/// Column `c` produces the total mass of the states in `column_states[c]`,
/// which share one value of ν*. Occupancy columns are single states in
/// index order; entropy columns are the groups of equal μ in descending μ.
#[derive(Debug, Clone, PartialEq)]
pub struct QDagger {
    pub matrix: StochasticMatrix,
    pub radius: f64,
    pub method: Method,
    pub column_states: Vec<Vec<usize>>,
    mu: ProbabilityVector,
}

impl QDagger {
    /// `μ·Q†`: the mass produced by each column.
    pub fn column_masses(&self) -> Vec<f64> {
        self.matrix
            .left_mul(self.mu.entries())
            .expect("rows match μ")
    }

    /// Expands `μ·Q†` back to one value per state.
    pub fn per_state(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.mu.len()];
        for (mass, states) in self.column_masses().into_iter().zip(&self.column_states) {
            let each = mass / states.len() as f64;
            for &i in states {
                out[i] = each;
            }
        }
        out
    }

    /// The reduced operator `Q` with `μ·Q = ν̄`.
    ///
    /// Occupancy drops the all-zero columns. Entropy sums the columns whose
    /// states end up at the same level, ordered by their smallest state index.
    pub fn reduced(&self) -> Result<StochasticMatrix> {
        let n = self.matrix.n();
        let rows_of = |cols: &[Vec<usize>]| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| {
                    cols.iter()
                        .map(|cs| cs.iter().map(|&c| self.matrix.get(i, c)).sum())
                        .collect()
                })
                .collect()
        };
        let labels = self.mu.labels();
        match self.method {
            Method::Occupancy => {
                let kept: Vec<usize> = (0..self.matrix.ncols())
                    .filter(|&c| (0..n).any(|i| self.matrix.get(i, c).abs() > ZERO_MASS_TOL))
                    .collect();
                let cols: Vec<Vec<usize>> = kept.iter().map(|&c| vec![c]).collect();
                let col_labels = kept.iter().map(|&c| labels[c].clone()).collect();
                StochasticMatrix::relaxed(rows_of(&cols), labels.to_vec(), col_labels)
            }
            Method::Entropy => {
                let per_state = self.per_state();
                let groups = group_equal(&per_state);
                let col_of_state: Vec<usize> = {
                    let mut v = vec![0; n];
                    for (c, states) in self.column_states.iter().enumerate() {
                        for &i in states {
                            v[i] = c;
                        }
                    }
                    v
                };
                let mut cols: Vec<Vec<usize>> = Vec::with_capacity(groups.len());
                for g in &groups {
                    let mut cs: Vec<usize> = g.iter().map(|&i| col_of_state[i]).collect();
                    cs.sort_unstable();
                    cs.dedup();
                    cols.push(cs);
                }
                let col_labels = groups.iter().map(|g| join_labels(labels, g)).collect();
                StochasticMatrix::relaxed(rows_of(&cols), labels.to_vec(), col_labels)
            }
        }
    }
}

fn join_labels(labels: &[String], group: &[usize]) -> String {
    group
        .iter()
        .map(|&i| labels[i].as_str())
        .collect::<Vec<_>>()
        .join("+")
}

/// Groups equal entries (within [`TIE_TOL`] of the group's first entry),
/// ordered by first occurrence.
pub(crate) fn group_equal(values: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|g| (values[g[0]] - v).abs() <= TIE_TOL)
        {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

/// `Q†` of the occupancy (linear payoff) water-filling, kept at `n × n`.
pub fn occupancy_qdagger(mu: &ProbabilityVector, ell: &[f64], radius: f64) -> Result<QDagger> {
    if ell.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: ell.len(),
        });
    }
    let radius = check_radius(radius)?;
    let supports = support_sets(ell)?;
    let nu = waterfill_with(mu, ell, &supports, radius)?.per_state;
    let matrix = occupancy_matrix(mu.entries(), nu.entries(), &supports, radius);
    let labels = mu.labels().to_vec();
    Ok(QDagger {
        matrix: StochasticMatrix::relaxed(matrix, labels.clone(), labels)?,
        radius,
        method: Method::Occupancy,
        column_states: (0..mu.len()).map(|i| vec![i]).collect(),
        mu: mu.clone(),
    })
}

fn occupancy_matrix(
    mu: &[f64],
    nu: &[f64],
    supports: &SupportPartition,
    radius: f64,
) -> Vec<Vec<f64>> {
    let n = mu.len();
    let mut q = vec![vec![0.0; n]; n];
    let set_col = |q: &mut Vec<Vec<f64>>, j: usize, f: &dyn Fn(usize) -> f64| {
        for (i, row) in q.iter_mut().enumerate() {
            row[j] = f(i);
        }
    };

    if supports.is_degenerate() {
        for (i, row) in q.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        return q;
    }

    let top_mass: f64 = supports.x_top.iter().map(|&i| mu[i]).sum();
    let drainable = 1.0 - top_mass;
    let half = (radius / 2.0).min(drainable);
    let saturated = half >= drainable - ZERO_MASS_TOL;
    let top = &supports.x_top;

    // Top-set columns.
    let gain = half / top.len() as f64;
    for &j in top {
        if saturated {
            if mu[j] > 0.0 {
                let target = mu[j] + drainable / top.len() as f64;
                q[j][j] = target / mu[j];
            } else {
                let target = nu[j];
                set_col(&mut q, j, &|_| target);
            }
        } else {
            set_col(&mut q, j, &|i| if i == j { 1.0 + gain } else { gain });
        }
    }
    if saturated {
        return q;
    }

    // Drain sets: exhausted ones keep zero columns, the active one carries the
    // remaining drain, later ones are identity columns.
    let sets = supports.drain_order();
    let mut cumulative = 0.0;
    let mut drained: Vec<usize> = Vec::new();
    let mut active_seen = false;
    for set in sets {
        if active_seen {
            for &j in set {
                q[j][j] = 1.0;
            }
            continue;
        }
        let mass: f64 = set.iter().map(|&i| mu[i]).sum();
        cumulative += mass;
        if cumulative - half <= ZERO_MASS_TOL {
            drained.extend_from_slice(set);
            continue;
        }
        active_seen = true;
        let size = set.len() as f64;
        let already = cumulative - mass;
        let share = (half - already) / size;
        let clipped = set.iter().any(|&i| mu[i] < share - PROB_TOL);
        if !clipped {
            for &j in set {
                set_col(&mut q, j, &|i| {
                    if i == j {
                        1.0 - half / size
                    } else if drained.contains(&i) {
                        (1.0 - half) / size
                    } else {
                        -half / size
                    }
                });
            }
        } else {
            let remaining = cumulative - half;
            let in_d = |i: usize| drained.contains(&i) || set.contains(&i);
            for &j in set {
                let scale = nu[j] / remaining;
                set_col(&mut q, j, &|i| {
                    scale * (if in_d(i) { 1.0 } else { 0.0 } - half)
                });
            }
        }
    }
    q
}

/// Groups states by equal μ, in descending μ.
fn descending_groups(mu: &ProbabilityVector, allow_ties: bool) -> Result<Vec<Vec<usize>>> {
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| mu[b].total_cmp(&mu[a]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if (mu[g[0]] - mu[i]).abs() <= TIE_TOL => {
                if !allow_ties {
                    let (a, b) = (g[0].min(i), g[0].max(i));
                    return Err(Error::TiedStationaryMass(a, b));
                }
                g.push(i);
            }
            _ => groups.push(vec![i]),
        }
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    Ok(groups)
}

/// `Q†` of the maximum-entropy water-filling.
///
/// Columns are the groups of equal μ in descending order. Tied μ values are
/// rejected with [`Error::TiedStationaryMass`] unless `allow_ties` is set, in
/// which case each tie forms one multi-state group from the start.
pub fn entropy_qdagger(mu: &ProbabilityVector, radius: f64, allow_ties: bool) -> Result<QDagger> {
    let radius = check_radius(radius)?;
    let groups = descending_groups(mu, allow_ties)?;
    let n = mu.len();
    let nf = n as f64;
    let u = 1.0 / nf;
    let sol = max_entropy(mu, radius)?;
    let half = sol.alpha / 2.0;
    let m = groups.len();
    let value = |g: &[usize]| mu[g[0]];
    let mut q = vec![vec![0.0; m]; n];

    if sol.alpha >= sol.r_uniform - PROB_TOL {
        for (c, g) in groups.iter().enumerate() {
            let v = g.len() as f64 / nf;
            for row in q.iter_mut() {
                row[c] = v;
            }
        }
    } else {
        // Upper block: leading groups whose common level has reached the next group.
        let mut upper = 1;
        let mut mass = value(&groups[0]) * groups[0].len() as f64;
        let mut size = groups[0].len() as f64;
        while upper < m && value(&groups[upper]) > u + TIE_TOL {
            let level = (mass - half) / size;
            if level > value(&groups[upper]) + TIE_TOL {
                break;
            }
            mass += value(&groups[upper]) * groups[upper].len() as f64;
            size += groups[upper].len() as f64;
            upper += 1;
        }
        // Lower block, symmetric from the bottom.
        let mut lower = 1;
        let last = m - 1;
        let mut lmass = value(&groups[last]) * groups[last].len() as f64;
        let mut lsize = groups[last].len() as f64;
        while lower < m - upper && value(&groups[last - lower]) < u - TIE_TOL {
            let level = (lmass + half) / lsize;
            if level < value(&groups[last - lower]) - TIE_TOL {
                break;
            }
            lmass += value(&groups[last - lower]) * groups[last - lower].len() as f64;
            lsize += groups[last - lower].len() as f64;
            lower += 1;
        }
        let in_upper: Vec<bool> = indicator(n, groups[..upper].iter());
        let in_lower: Vec<bool> = indicator(n, groups[m - lower..].iter());
        for (c, g) in groups.iter().enumerate() {
            let gs = g.len() as f64;
            if c < upper && value(g) > u + TIE_TOL {
                for (i, row) in q.iter_mut().enumerate() {
                    row[c] = (f(in_upper[i]) - half) * gs / size;
                }
            } else if c >= m - lower && value(g) < u - TIE_TOL {
                for (i, row) in q.iter_mut().enumerate() {
                    row[c] = (f(in_lower[i]) + half) * gs / lsize;
                }
            } else {
                for &i in g {
                    q[i][c] = 1.0;
                }
            }
        }
    }

    let col_labels = groups.iter().map(|g| join_labels(mu.labels(), g)).collect();
    Ok(QDagger {
        matrix: StochasticMatrix::relaxed(q, mu.labels().to_vec(), col_labels)?,
        radius,
        method: Method::Entropy,
        column_states: groups,
        mu: mu.clone(),
    })
}

fn f(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn indicator<'a>(n: usize, groups: impl Iterator<Item = &'a Vec<usize>>) -> Vec<bool> {
    let mut v = vec![false; n];
    for g in groups {
        for &i in g {
            v[i] = true;
        }
    }
    v
}

/// ν̄ together with the original states behind each of its entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedVector {
    pub nu_bar: ProbabilityVector,
    /// `index_map[k]` lists the 0-based original states merged into entry `k`.
    pub index_map: Vec<Vec<usize>>,
}

/// Restriction of ν* to its nonzero entries, order preserved.
pub fn reduce_occupancy(nu: &ProbabilityVector) -> Result<ReducedVector> {
    let kept: Vec<usize> = (0..nu.len()).filter(|&i| nu[i] > ZERO_MASS_TOL).collect();
    let values = kept.iter().map(|&i| nu[i]).collect();
    let labels = kept.iter().map(|&i| nu.labels()[i].clone()).collect();
    Ok(ReducedVector {
        nu_bar: ProbabilityVector::with_labels(values, labels)?,
        index_map: kept.into_iter().map(|i| vec![i]).collect(),
    })
}

/// Sums equal entries of ν* into one entry per group, ordered by first occurrence.
pub fn reduce_entropy(nu: &ProbabilityVector) -> Result<ReducedVector> {
    let groups = group_equal(nu.entries());
    let values = groups.iter().map(|g| nu.mass(g)).collect();
    let labels = groups.iter().map(|g| join_labels(nu.labels(), g)).collect();
    Ok(ReducedVector {
        nu_bar: ProbabilityVector::with_labels(values, labels)?,
        index_map: groups,
    })
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= TIE_TOL);
    v
}

/// Radii `2·C_k` at which the k-th drain set is exhausted (the last one is
/// the saturation radius), capped at 2.
pub fn occupancy_thresholds(mu: &ProbabilityVector, supports: &SupportPartition) -> Vec<f64> {
    let mut cumulative = 0.0;
    let mut out = Vec::new();
    for set in supports.drain_order() {
        cumulative += mu.mass(set);
        let r = 2.0 * cumulative;
        if r > ZERO_MASS_TOL && r <= 2.0 + TIE_TOL {
            out.push(r.min(2.0));
        }
    }
    sorted_unique(out)
}

/// Radii at which two water levels of the entropy solution meet, ending
/// with the radius `Σ|μᵢ − 1/n|` at which the solution becomes uniform.
pub fn entropy_thresholds(mu: &ProbabilityVector) -> Vec<f64> {
    let n = mu.len();
    let u = 1.0 / n as f64;
    let groups = descending_groups(mu, true).expect("ties allowed");
    let vals: Vec<(f64, f64)> = groups
        .iter()
        .map(|g| (mu[g[0]], g.len() as f64))
        .collect();
    let r_uniform: f64 = mu.iter().map(|m| (m - u).abs()).sum();
    if r_uniform <= PROB_TOL {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (g, &(v, _)) in vals.iter().enumerate() {
        if v > u + TIE_TOL && g > 0 {
            let r: f64 = vals[..g].iter().map(|&(w, s)| s * (w - v)).sum();
            out.push(2.0 * r);
        }
        if v < u - TIE_TOL && g + 1 < vals.len() {
            let r: f64 = vals[g + 1..].iter().map(|&(w, s)| s * (v - w)).sum();
            out.push(2.0 * r);
        }
    }
    out.retain(|&r| r < r_uniform - TIE_TOL && r > ZERO_MASS_TOL);
    out.push(r_uniform.min(2.0));
    sorted_unique(out)
}

/// Thresholds of either method; `ell` is only used by occupancy.
pub fn reduction_thresholds(
    mu: &ProbabilityVector,
    ell: &[f64],
    method: Method,
) -> Result<Vec<f64>> {
    match method {
        Method::Occupancy => {
            if ell.len() != mu.len() {
                return Err(Error::DimensionMismatch {
                    expected: mu.len(),
                    got: ell.len(),
                });
            }
            Ok(occupancy_thresholds(mu, &support_sets(ell)?))
        }
        Method::Entropy => Ok(entropy_thresholds(mu)),
    }
}

/// Position of `radius` in `thresholds`, within [`THRESHOLD_MATCH_TOL`].
pub fn threshold_index(radius: f64, thresholds: &[f64]) -> Option<usize> {
    thresholds
        .iter()
        .position(|t| (t - radius).abs() <= THRESHOLD_MATCH_TOL)
}

/// Labels `"1".."k"` for a reduced space of size `k`.
pub fn reduced_labels(k: usize) -> Vec<String> {
    default_labels(k)
}
