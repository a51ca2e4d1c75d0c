//! Support sets of a payoff vector and the water-filling maximizers over the
//! total-variation ball.
//!
//! The linear problem `max Σ ℓᵢνᵢ s.t. ‖ν − μ‖_TV ≤ R` moves `α/2` of mass onto
//! the top set and drains the same amount from the bottom set upward.
//! [`max_entropy`] solves the entropy problem, where the payoff `−log ν` is
//! evaluated at the solution, by clipping μ between two water levels.

use crate::chain::{check_radius, ProbabilityVector};
use crate::error::{Error, Result};

/// Absolute tolerance under which two payoff values count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Tolerance for deciding that a drained set is fully exhausted.
pub(crate) const EXHAUST_TOL: f64 = 1e-12;

/// Ordered disjoint support sets induced by a payoff vector.
///
/// Index sets are 0-based and sorted by state index.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPartition {
    /// Argmax of ℓ.
    pub x_top: Vec<usize>,
    /// Argmin of ℓ; empty when ℓ is constant.
    pub x_bot: Vec<usize>,
    /// Intermediate sets in ascending ℓ order.
    pub x_k: Vec<Vec<usize>>,
    pub level_top: f64,
    pub level_bot: Option<f64>,
    pub levels_k: Vec<f64>,
    pub r: usize,
    n: usize,
}

impl SupportPartition {
    pub fn n(&self) -> usize {
        self.n
    }

    /// True when ℓ is constant (every state is in the top set).
    pub fn is_degenerate(&self) -> bool {
        self.x_bot.is_empty()
    }

    /// Sets in the order mass is drained: the bottom set, then 𝒳₁, 𝒳₂, ….
    pub fn drain_order(&self) -> Vec<&[usize]> {
        let mut out = Vec::with_capacity(self.r + 1);
        if !self.x_bot.is_empty() {
            out.push(self.x_bot.as_slice());
        }
        out.extend(self.x_k.iter().map(Vec::as_slice));
        out
    }

    /// Every set from lowest to highest payoff, top set last.
    pub fn ascending_sets(&self) -> Vec<&[usize]> {
        let mut out = self.drain_order();
        out.push(&self.x_top);
        out
    }

    /// Top set first, then the intermediate sets in descending payoff, then
    /// the bottom set (the order of the aggregated view).
    pub fn descending_sets(&self) -> Vec<&[usize]> {
        let mut out = self.ascending_sets();
        out.reverse();
        out
    }

    pub fn contains_top(&self, i: usize) -> bool {
        self.x_top.binary_search(&i).is_ok()
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    Ok(())
}

/// Groups the states by payoff value.
///
/// A state joins the current group when its value is within [`TIE_TOL`] of
/// the group's first (smallest) value.
pub fn support_sets(ell: &[f64]) -> Result<SupportPartition> {
    check_finite(ell)?;
    let n = ell.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ell[a].total_cmp(&ell[b]).then(a.cmp(&b)));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut levels: Vec<f64> = Vec::new();
    for i in order {
        match levels.last() {
            Some(&lv) if (ell[i] - lv).abs() <= TIE_TOL => groups.last_mut().unwrap().push(i),
            _ => {
                groups.push(vec![i]);
                levels.push(ell[i]);
            }
        }
    }
    for g in &mut groups {
        g.sort_unstable();
    }

    let x_top = groups.pop().unwrap();
    let level_top = levels.pop().unwrap();
    if groups.is_empty() {
        return Ok(SupportPartition {
            x_top,
            x_bot: Vec::new(),
            x_k: Vec::new(),
            level_top,
            level_bot: None,
            levels_k: Vec::new(),
            r: 0,
            n,
        });
    }
    let x_bot = groups.remove(0);
    let level_bot = levels.remove(0);
    Ok(SupportPartition {
        x_top,
        x_bot,
        r: groups.len(),
        x_k: groups,
        level_top,
        level_bot: Some(level_bot),
        levels_k: levels,
        n,
    })
}

/// Saturation radius `2(1 − μ(𝒳⁰))`.
pub fn r_max(mu: &ProbabilityVector, supports: &SupportPartition) -> f64 {
    (2.0 * (1.0 - mu.mass(&supports.x_top))).max(0.0)
}

/// Mass held by each support set.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedMass {
    pub top: f64,
    pub bot: f64,
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    pub supports: SupportPartition,
    pub aggregated: AggregatedMass,
    pub per_state: ProbabilityVector,
    pub alpha: f64,
    pub r_max: f64,
    pub payoff: f64,
}

/// Removes `amount` from `set`: an equal share per state clipped at zero,
/// then any residual from the states in index order.
fn drain_set(nu: &mut [f64], set: &[usize], amount: f64) {
    let share = amount / set.len() as f64;
    let mut residual = amount;
    for &i in set {
        let take = share.min(nu[i]);
        nu[i] -= take;
        residual -= take;
    }
    for &i in set {
        if residual <= 0.0 {
            break;
        }
        let take = residual.min(nu[i]);
        nu[i] -= take;
        residual -= take;
    }
}

/// Moves `alpha/2` of mass from the drain sets (in order) onto the top set.
///
/// `base` must be a probability row; the caller guarantees
/// `alpha ≤ 2(1 − base(𝒳⁰))`.
pub(crate) fn fill_drain(base: &[f64], supports: &SupportPartition, alpha: f64) -> Vec<f64> {
    let mut nu = base.to_vec();
    let half = alpha / 2.0;
    if half <= 0.0 {
        return nu;
    }
    let gain = half / supports.x_top.len() as f64;
    for &i in &supports.x_top {
        nu[i] += gain;
    }
    let mut remaining = half;
    for set in supports.drain_order() {
        if remaining <= 0.0 {
            break;
        }
        let mass: f64 = set.iter().map(|&i| nu[i]).sum();
        if remaining >= mass - EXHAUST_TOL {
            for &i in set {
                nu[i] = 0.0;
            }
            remaining = (remaining - mass).max(0.0);
        } else {
            drain_set(&mut nu, set, remaining);
            remaining = 0.0;
        }
    }
    nu
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes `Σ ℓᵢνᵢ` over the TV ball of radius `radius` around μ.
pub fn waterfill(mu: &ProbabilityVector, ell: &[f64], radius: f64) -> Result<WaterfillSolution> {
    if ell.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: ell.len(),
        });
    }
    let radius = check_radius(radius)?;
    let supports = support_sets(ell)?;
    waterfill_with(mu, ell, &supports, radius)
}

/// [`waterfill`] with precomputed support sets.
pub fn waterfill_with(
    mu: &ProbabilityVector,
    ell: &[f64],
    supports: &SupportPartition,
    radius: f64,
) -> Result<WaterfillSolution> {
    let radius = check_radius(radius)?;
    let rmax = r_max(mu, supports);
    let alpha = radius.min(rmax);
    let nu = fill_drain(mu.entries(), supports, alpha);
    let per_state = ProbabilityVector::with_labels(nu, mu.labels().to_vec())?;
    let mass = |s: &[usize]| per_state.mass(s);
    let aggregated = AggregatedMass {
        top: mass(&supports.x_top),
        bot: mass(&supports.x_bot),
        k: supports.x_k.iter().map(|s| mass(s)).collect(),
    };
    Ok(WaterfillSolution {
        payoff: dot(ell, per_state.entries()),
        supports: supports.clone(),
        aggregated,
        per_state,
        alpha,
        r_max: rmax,
    })
}

/// Solution of the entropy problem over the TV ball.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntropySolution {
    pub per_state: ProbabilityVector,
    pub alpha: f64,
    /// Radius at which the solution becomes uniform: `Σ |μᵢ − 1/n|`.
    pub r_uniform: f64,
    /// Upper water level: states above it are lowered to it.
    pub hi: f64,
    /// Lower water level: states below it are raised to it.
    pub lo: f64,
}

/// Level `h` with `Σ (vᵢ − h)⁺ = amount`, for `v` sorted descending.
fn level_from_above(sorted_desc: &[f64], amount: f64) -> f64 {
    let mut acc = 0.0;
    for (k, &v) in sorted_desc.iter().enumerate() {
        acc += v;
        let h = (acc - amount) / (k + 1) as f64;
        match sorted_desc.get(k + 1) {
            Some(&next) if h < next => continue,
            _ => return h,
        }
    }
    unreachable!("non-empty input")
}

/// Maximizes entropy over the TV ball: `νᵢ = clamp(μᵢ, lo, hi)` with both
/// levels moving `α/2` of mass, `α = min(R, Σ|μᵢ − 1/n|)`.
pub fn max_entropy(mu: &ProbabilityVector, radius: f64) -> Result<MaxEntropySolution> {
    let radius = check_radius(radius)?;
    let n = mu.len();
    let u = 1.0 / n as f64;
    let r_uniform: f64 = mu.iter().map(|m| (m - u).abs()).sum();
    let alpha = radius.min(r_uniform);
    if alpha >= r_uniform {
        return Ok(MaxEntropySolution {
            per_state: ProbabilityVector::with_labels(vec![u; n], mu.labels().to_vec())?,
            alpha,
            r_uniform,
            hi: u,
            lo: u,
        });
    }
    let half = alpha / 2.0;
    let mut desc = mu.entries().to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let hi = level_from_above(&desc, half);
    let neg: Vec<f64> = desc.iter().rev().map(|v| -v).collect();
    let lo = -level_from_above(&neg, half);
    let nu = mu.iter().map(|m| m.clamp(lo, hi)).collect();
    Ok(MaxEntropySolution {
        per_state: ProbabilityVector::with_labels(nu, mu.labels().to_vec())?,
        alpha,
        r_uniform,
        hi,
        lo,
    })
}
