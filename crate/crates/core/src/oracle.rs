//! Brute-force verifiers for the closed forms on small instances: an exact
//! dense simplex for the linear problems and a grid search for entropy.

use crate::chain::{check_radius, entropy_of, MarkovChain, ProbabilityVector};
use crate::error::{Error, Result};
use crate::method1::approximate_rows;
use crate::waterfill::{max_entropy, waterfill};

/// Largest state count accepted by the single-vector LP oracles.
pub const MAX_LP_STATES: usize = 8;
/// Largest state count accepted by the coupled whole-matrix LP.
pub const MAX_COUPLED_STATES: usize = 5;
/// Largest state count accepted by the entropy grid search.
pub const MAX_GRID_STATES: usize = 4;
/// Coarsest mesh accepted by the entropy grid search.
pub const MAX_MESH: f64 = 1e-3;

const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub oracle_value: f64,
    pub closed_form_value: f64,
    /// `oracle_value − closed_form_value`.
    pub gap: f64,
    pub argmax_witness: Vec<f64>,
}

impl OracleReport {
    fn new(oracle_value: f64, closed_form_value: f64, argmax_witness: Vec<f64>) -> Self {
        Self {
            oracle_value,
            closed_form_value,
            gap: oracle_value - closed_form_value,
            argmax_witness,
        }
    }
}

/// Solves `max cᵀx s.t. Ax ≤ b, x ≥ 0` with `b ≥ 0` by the tableau simplex
/// method under Bland's rule, starting from the slack basis.
///
/// Returns the optimal value and point, or `None` when the problem is unbounded.
pub fn simplex_max(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<(f64, Vec<f64>)> {
    let nv = c.len();
    let m = a.len();
    let width = nv + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for (i, row) in a.iter().enumerate() {
        debug_assert!(b[i] >= 0.0, "origin must be feasible");
        t[i][..nv].copy_from_slice(row);
        t[i][nv + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    // Objective row stores −c so that a negative entry marks an improving column.
    for (j, &cj) in c.iter().enumerate() {
        t[m][j] = -cj;
    }
    let mut basis: Vec<usize> = (nv..nv + m).collect();

    while let Some(enter) = (0..nv + m).find(|&j| t[m][j] < -PIVOT_TOL) {
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let aij = t[i][enter];
            if aij > PIVOT_TOL {
                let ratio = t[i][width - 1] / aij;
                let better = ratio < best - PIVOT_TOL
                    || ((ratio - best).abs() <= PIVOT_TOL
                        && leave.is_some_and(|l| basis[i] < basis[l]));
                if leave.is_none() || better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let r = leave?;
        let pivot = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[enter];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        basis[r] = enter;
    }

    let mut x = vec![0.0; nv];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < nv {
            x[bv] = t[i][width - 1];
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Some((value, x))
}

/// Maximizes `Σ ℓᵢνᵢ` over probability vectors `ν = base + p − q` with
/// `Σ wₖ(pₖ + qₖ) ≤ budget`, where the blocks of `base` are separate
/// probability rows. Returns the optimum value and the optimal point.
fn tv_lp(base_rows: &[&[f64]], ell: &[f64], weights: &[f64], budget: f64) -> (f64, Vec<Vec<f64>>) {
    let rows = base_rows.len();
    let n = ell.len();
    let nv = 2 * rows * n;
    let p_idx = |r: usize, j: usize| r * n + j;
    let q_idx = |r: usize, j: usize| rows * n + r * n + j;

    let mut c = vec![0.0; nv];
    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut offset = 0.0;
    for (r, base) in base_rows.iter().enumerate() {
        for j in 0..n {
            c[p_idx(r, j)] = weights[r] * ell[j];
            c[q_idx(r, j)] = -weights[r] * ell[j];
            offset += weights[r] * ell[j] * base[j];
            // ν ≥ 0.
            let mut row = vec![0.0; nv];
            row[q_idx(r, j)] = 1.0;
            row[p_idx(r, j)] = -1.0;
            a.push(row);
            b.push(base[j]);
        }
        // Mass is conserved: Σp − Σq = 0 as two inequalities.
        let mut up = vec![0.0; nv];
        for j in 0..n {
            up[p_idx(r, j)] = 1.0;
            up[q_idx(r, j)] = -1.0;
        }
        let down = up.iter().map(|v| -v).collect();
        a.push(up);
        b.push(0.0);
        a.push(down);
        b.push(0.0);
    }
    let mut budget_row = vec![0.0; nv];
    for r in 0..rows {
        for j in 0..n {
            budget_row[p_idx(r, j)] = weights[r];
            budget_row[q_idx(r, j)] = weights[r];
        }
    }
    a.push(budget_row);
    b.push(budget.max(0.0));

    let (value, x) = simplex_max(&c, &a, &b).expect("feasible region is bounded");
    let points = base_rows
        .iter()
        .enumerate()
        .map(|(r, base)| {
            (0..n)
                .map(|j| (base[j] + x[p_idx(r, j)] - x[q_idx(r, j)]).max(0.0))
                .collect()
        })
        .collect();
    (value + offset, points)
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn check_size(n: usize, max: usize) -> Result<()> {
    if n > max {
        return Err(Error::TooLarge { size: n, max });
    }
    Ok(())
}

/// Exact maximum of `Σ ℓᵢνᵢ` over the TV ball of radius `radius` around μ,
/// against the water-filling payoff.
pub fn lp_tv_ball_max(ell: &[f64], mu: &ProbabilityVector, radius: f64) -> Result<OracleReport> {
    check_size(mu.len(), MAX_LP_STATES)?;
    check_len(mu.len(), ell.len())?;
    let radius = check_radius(radius)?;
    let (value, mut pts) = tv_lp(&[mu.entries()], ell, &[1.0], radius);
    let closed = waterfill(mu, ell, radius)?.payoff;
    Ok(OracleReport::new(value, closed, pts.remove(0)))
}

/// Exact maximum of `Σⱼ ℓⱼqⱼ` over rows `q` with `‖q − p_row‖_TV ≤ alpha`,
/// against the water-filling of that row.
pub fn lp_row_max(ell: &[f64], p_row: &ProbabilityVector, alpha: f64) -> Result<OracleReport> {
    lp_tv_ball_max(ell, p_row, alpha)
}

/// Grid search for the largest entropy in the TV ball.
///
/// All coordinates but the last two range over multiples of `mesh`; the last
/// two share the remaining mass and are placed exactly, as close to an even
/// split as the remaining budget allows. Every candidate lies in the ball,
/// so the search never exceeds the true maximum.
pub fn grid_entropy_max(mu: &ProbabilityVector, radius: f64, mesh: f64) -> Result<OracleReport> {
    let n = mu.len();
    check_size(n, MAX_GRID_STATES)?;
    if !(mesh > 0.0 && mesh <= MAX_MESH) {
        return Err(Error::InvalidArgument(format!(
            "mesh {mesh} must lie in (0, {MAX_MESH}]"
        )));
    }
    let radius = check_radius(radius)?;
    let closed = entropy_of(max_entropy(mu, radius)?.per_state.entries());
    if n == 1 {
        return Ok(OracleReport::new(0.0, closed, vec![1.0]));
    }
    let steps = (1.0 / mesh).round() as usize;
    let free = n - 2;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut ks = vec![0usize; free];
    let mut x = vec![0.0; n];
    loop {
        let used: usize = ks.iter().sum();
        if used <= steps {
            let mut spent = 0.0;
            for (i, &k) in ks.iter().enumerate() {
                x[i] = k as f64 * mesh;
                spent += (x[i] - mu[i]).abs();
            }
            let rest = (1.0 - used as f64 * mesh).max(0.0);
            let budget = radius - spent;
            if let Some(a) = place_pair(mu[n - 2], mu[n - 1], rest, budget) {
                x[n - 2] = a;
                x[n - 1] = rest - a;
                let h = entropy_of(&x);
                if h > best.0 {
                    best = (h, x.clone());
                }
            }
        }
        // Odometer over the free coordinates.
        let mut pos = 0;
        loop {
            if pos == free {
                return Ok(OracleReport::new(best.0, closed, best.1));
            }
            ks[pos] += 1;
            if ks[..=pos].iter().sum::<usize>() <= steps {
                break;
            }
            ks[pos] = 0;
            pos += 1;
        }
    }
}

/// Best first coordinate `x ∈ [0, m]` of the pair `(x, m − x)` subject to
/// `|x − a| + |m − x − c| ≤ budget`.
fn place_pair(a: f64, c: f64, m: f64, budget: f64) -> Option<f64> {
    let d = m - c;
    let slack = 1e-15;
    if budget < -slack || (a - d).abs() > budget + slack {
        return None;
    }
    let budget = budget.max(0.0);
    let lo = ((a + d - budget) / 2.0).max(0.0);
    let hi = ((a + d + budget) / 2.0).min(m);
    if lo > hi + slack {
        return None;
    }
    Some((m / 2.0).clamp(lo, hi.max(lo)))
}

/// Exact value of the whole-matrix problem with the coupled constraint
/// `Σᵢⱼ μᵢ|Φᵢⱼ − Pᵢⱼ| ≤ R`, against the row-wise construction. The witness is
/// the optimal Φ flattened row-major.
pub fn coupled_method1_report(
    chain: &MarkovChain,
    ell: &[f64],
    radius: f64,
) -> Result<OracleReport> {
    let n = chain.n();
    check_size(n, MAX_COUPLED_STATES)?;
    check_len(n, ell.len())?;
    let radius = check_radius(radius)?;
    let rows: Vec<&[f64]> = chain.p().rows().collect();
    let (value, pts) = tv_lp(&rows, ell, chain.mu().entries(), radius);
    let closed = approximate_rows(chain, ell, radius)?.payoff;
    Ok(OracleReport::new(value, closed, pts.concat()))
}
