//! Probability vectors, stochastic matrices, the stationary-distribution solver
//! and the three discrepancy functionals (total variation, entropy, KL).

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-sum tolerance accepted when ingesting data; rows are renormalized afterwards.
pub const INGEST_TOL: f64 = 1e-9;

/// Tolerance for probability identities once values are inside the library.
pub const PROB_TOL: f64 = 1e-12;

/// State labels `"1"..="n"`, matching the 1-based indexing used in reports.
pub fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

fn check_labels(labels: &[String], len: usize) -> Result<()> {
    if labels.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: labels.len(),
        });
    }
    let mut seen = HashSet::with_capacity(len);
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

/// Validates one probability row and renormalizes it to sum exactly to one.
fn normalize_row(mut row: Vec<f64>, row_index: usize) -> Result<Vec<f64>> {
    if row.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (i, v) in row.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i, value: *v });
        }
        if *v < 0.0 {
            if *v < -INGEST_TOL {
                return Err(Error::NegativeProbability { index: i, value: *v });
            }
            *v = 0.0;
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > INGEST_TOL {
        return Err(Error::NonStochastic {
            row: row_index,
            sum,
        });
    }
    // Rows already stochastic up to rounding are kept bit-for-bit, so that
    // normalization is idempotent and exact decimal inputs survive.
    if (sum - 1.0).abs() > row.len() as f64 * f64::EPSILON {
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(row)
}

/// A nonnegative vector summing to one, with one label per state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    entries: Vec<f64>,
    labels: Vec<String>,
}

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let labels = default_labels(entries.len());
        Self::with_labels(entries, labels)
    }

    pub fn with_labels(entries: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        let entries = normalize_row(entries, 0)?;
        check_labels(&labels, entries.len())?;
        Ok(Self { entries, labels })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().copied()
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    /// Total mass on a set of indices.
    pub fn mass(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.entries[i]).sum()
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.entries[i]
    }
}

/// Dense row-major matrix whose rows are probability vectors.
///
/// A `relaxed` matrix skips the stochasticity and squareness checks; it holds
/// the `Q`/`Q†` operators, which carry negative entries and may be rectangular.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    labels: Vec<String>,
    col_labels: Vec<String>,
    relaxed: bool,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let labels = default_labels(rows.len());
        Self::with_labels(rows, labels)
    }

    pub fn with_labels(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        check_labels(&labels, n)?;
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            let row = normalize_row(row, i).map_err(|e| match e {
                Error::NonFinite { value, .. } => Error::NonFinite { index: i, value },
                Error::NegativeProbability { value, .. } => {
                    Error::NegativeProbability { index: i, value }
                }
                other => other,
            })?;
            data.extend(row);
        }
        Ok(Self {
            rows: n,
            cols: n,
            data,
            col_labels: labels.clone(),
            labels,
            relaxed: false,
        })
    }

    /// Builds an unchecked operator matrix (entries only need to be finite).
    pub fn relaxed(
        rows: Vec<Vec<f64>>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<Self> {
        let r = rows.len();
        let c = col_labels.len();
        if row_labels.len() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: row_labels.len(),
            });
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { index: j, value: *v });
                }
            }
            data.extend(row);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
            labels: row_labels,
            col_labels,
            relaxed: true,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
            labels: default_labels(n),
            col_labels: default_labels(n),
            relaxed: false,
        }
    }

    /// Number of rows (the state count for a square chain).
    pub fn n(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        self.rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Row vector times matrix: `v · M`.
    pub fn left_mul(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (vi, row) in v.iter().zip(self.rows()) {
            if *vi == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(row) {
                *o += vi * m;
            }
        }
        Ok(out)
    }

    /// Relabels states by `perm`: row/column `k` of the result is state `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if self.relaxed || perm.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: perm.len(),
            });
        }
        let rows = perm
            .iter()
            .map(|&i| perm.iter().map(|&j| self.get(i, j)).collect())
            .collect();
        let labels = perm.iter().map(|&i| self.labels[i].clone()).collect();
        Self::with_labels(rows, labels)
    }
}

/// `Ξ = Φ − P`: each row is a finite signed measure with zero total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SignedMatrix {
    pub fn difference(phi: &StochasticMatrix, p: &StochasticMatrix) -> Result<Self> {
        if phi.n() != p.n() || phi.ncols() != p.ncols() {
            return Err(Error::DimensionMismatch {
                expected: p.n(),
                got: phi.n(),
            });
        }
        let data = phi.data.iter().zip(&p.data).map(|(a, b)| a - b).collect();
        Ok(Self { n: p.n(), data })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn positive_part(&self, i: usize) -> f64 {
        self.row(i).iter().map(|x| x.max(0.0)).sum()
    }

    pub fn negative_part(&self, i: usize) -> f64 {
        self.row(i).iter().map(|x| (-x).max(0.0)).sum()
    }

    /// Total variation of row `i`: positive plus negative part.
    pub fn row_tv(&self, i: usize) -> f64 {
        self.row(i).iter().map(|x| x.abs()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    /// Converts a quantity measured in nats to this base.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Natural => nats,
            LogBase::Two => nats / std::f64::consts::LN_2,
        }
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" | "ln" | "natural" => Ok(LogBase::Natural),
            "2" | "bits" => Ok(LogBase::Two),
            other => Err(Error::InvalidArgument(format!(
                "unknown log base {other:?} (expected e or 2)"
            ))),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogBase::Natural => f.write_str("e"),
            LogBase::Two => f.write_str("2"),
        }
    }
}

fn same_len(a: &ProbabilityVector, b: &ProbabilityVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// `Σ |νᵢ − μᵢ|`, a metric with range `[0, 2]`.
pub fn tv_distance(nu: &ProbabilityVector, mu: &ProbabilityVector) -> Result<f64> {
    same_len(nu, mu)?;
    Ok(nu.iter().zip(mu.iter()).map(|(a, b)| (a - b).abs()).sum())
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn entropy(nu: &ProbabilityVector) -> f64 {
    entropy_of(nu.entries())
}

pub fn entropy_in(nu: &ProbabilityVector, base: LogBase) -> f64 {
    base.from_nats(entropy(nu))
}

pub(crate) fn entropy_of(values: &[f64]) -> f64 {
    -values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Relative entropy `D(ν‖μ)` in nats; `+∞` when ν is not absolutely continuous
/// with respect to μ.
pub fn kl_divergence(nu: &ProbabilityVector, mu: &ProbabilityVector) -> Result<f64> {
    same_len(nu, mu)?;
    let mut acc = 0.0;
    for (a, b) in nu.iter().zip(mu.iter()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += a * (a / b).ln();
    }
    Ok(acc.max(0.0))
}

/// Adjacency reachability over the positive-entry graph of `p`.
fn reachable(p: &StochasticMatrix, start: usize, reverse: bool) -> Vec<bool> {
    let n = p.n();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for (v, s) in seen.iter_mut().enumerate() {
            let w = if reverse { p.get(v, u) } else { p.get(u, v) };
            if w > 0.0 && !*s {
                *s = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn check_irreducible(p: &StochasticMatrix) -> Result<()> {
    for (dir, reverse) in [("reach", false), ("be reached from", true)] {
        let seen = reachable(p, 0, reverse);
        if let Some(bad) = seen.iter().position(|s| !s) {
            return Err(Error::NotIrreducible(format!(
                "state {} cannot {dir} state {}",
                p.labels()[0],
                p.labels()[bad]
            )));
        }
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible chain, from BFS levels: the gcd of
/// `level(u) + 1 − level(v)` over all edges `u → v`.
pub fn period(p: &StochasticMatrix) -> usize {
    let n = p.n();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if p.get(u, v) > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0;
    for u in 0..n {
        if level[u] == usize::MAX {
            continue;
        }
        for v in 0..n {
            if p.get(u, v) > 0.0 && level[v] != usize::MAX {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g.max(1)
}

fn residual_inf(p: &StochasticMatrix, mu: &[f64]) -> f64 {
    let mp = p.left_mul(mu).expect("square");
    mp.iter()
        .zip(mu)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Solves `μ = μP`, `Σμ = 1` for an irreducible chain.
///
/// The augmented linear system is solved by LU with a few rounds of iterative
/// refinement; power iteration is the fallback when the factorization fails.
pub fn stationary_distribution(p: &StochasticMatrix) -> Result<ProbabilityVector> {
    if p.is_relaxed() {
        let (row, sum) = p
            .rows()
            .enumerate()
            .map(|(i, r)| (i, r.iter().sum::<f64>()))
            .max_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
            .unwrap_or((0, f64::NAN));
        return Err(Error::NonStochastic { row, sum });
    }
    let n = p.n();
    if n == 1 {
        return ProbabilityVector::with_labels(vec![1.0], p.labels().to_vec());
    }
    check_irreducible(p)?;
    let d = period(p);
    if d > 1 {
        log::warn!("chain is periodic with period {d}; the stationary distribution is not a limit");
    }

    // Rows 0..n-1 hold (Pᵀ − I); the last row enforces normalization.
    let a = DMatrix::from_fn(n, n, |r, c| {
        if r == n - 1 {
            1.0
        } else {
            p.get(c, r) - if r == c { 1.0 } else { 0.0 }
        }
    });
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut mu: Vec<f64> = match lu.solve(&b) {
        Some(x) => {
            let mut x = x;
            for _ in 0..3 {
                let r = &b - &a * &x;
                if r.amax() <= 1e-16 {
                    break;
                }
                match lu.solve(&r) {
                    Some(dx) => x += dx,
                    None => break,
                }
            }
            x.iter().copied().collect()
        }
        None => vec![1.0 / n as f64; n],
    };
    clean(&mut mu);

    if residual_inf(p, &mu) > PROB_TOL {
        for _ in 0..100_000 {
            let next = p.left_mul(&mu)?;
            mu = next;
            clean(&mut mu);
            if residual_inf(p, &mu) <= PROB_TOL {
                break;
            }
        }
        let res = residual_inf(p, &mu);
        if res > PROB_TOL {
            log::warn!("stationary residual {res:e} exceeds {PROB_TOL:e}");
        }
    }
    ProbabilityVector::with_labels(mu, p.labels().to_vec())
}

fn clean(mu: &mut [f64]) {
    for v in mu.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = mu.iter().sum();
    if s > 0.0 {
        for v in mu.iter_mut() {
            *v /= s;
        }
    }
}

/// A transition matrix paired with its invariant distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    p: StochasticMatrix,
    mu: ProbabilityVector,
}

impl MarkovChain {
    pub fn new(p: StochasticMatrix) -> Result<Self> {
        let mu = stationary_distribution(&p)?;
        Ok(Self { p, mu })
    }

    pub fn p(&self) -> &StochasticMatrix {
        &self.p
    }

    pub fn mu(&self) -> &ProbabilityVector {
        &self.mu
    }

    pub fn n(&self) -> usize {
        self.p.n()
    }
}

/// Validates a radius: negative or NaN is an error, values above 2 are clamped.
pub fn check_radius(r: f64) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::InvalidRadius(r));
    }
    if r > 2.0 {
        log::warn!("radius {r} exceeds the TV diameter; clamping to 2");
        return Ok(2.0);
    }
    Ok(r)
}
