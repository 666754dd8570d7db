//! Indicator weights from three-point pairwise judgments.
//!
//! Judgments `C[i][j] ∈ {0, 1, 2}` are turned into a ratio matrix with the
//! range method, `H[i][j] = base^((R_i − R_j) / (R_max − R_min))` where `R_i`
//! is the row sum (diagonal included). The principal eigenvector of `H` gives
//! the weights and the consistency ratio `CR = CI / RI` checks the judgments.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default range-method base.
pub const DEFAULT_BASE: f64 = 9.0;
/// Default power-iteration tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Power-iteration cap.
pub const MAX_ITERATIONS: usize = 10_000;

/// Average random consistency index for orders 1..=9.
pub const RANDOM_INDEX: [f64; 9] = [0.0, 0.0, 0.52, 0.89, 1.12, 1.26, 1.36, 1.41, 1.45];

/// Consistency ratio below which a judgment matrix is accepted.
pub const CR_THRESHOLD: f64 = 0.1;

const JUDGMENTS_5X5: &str = include_str!("../fixtures/judgments5x5.txt");
const JUDGMENTS_4X4: &str = include_str!("../fixtures/judgments4x4.txt");
const H_5X5: &str = include_str!("../fixtures/h5x5.txt");

/// Square matrix of three-point scale judgments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgmentMatrix {
    entries: Vec<Vec<u8>>,
}

impl JudgmentMatrix {
    pub fn new(entries: Vec<Vec<u8>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(Error::validation("judgment matrix is empty"));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(format!(
                    "judgment matrix is not square: row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 2 {
                    return Err(Error::validation(format!(
                        "entry ({}, {}) = {v} is not a three-point value (0, 1 or 2)",
                        i + 1,
                        j + 1
                    )));
                }
            }
            if row[i] != 1 {
                return Err(Error::validation(format!(
                    "diagonal entry ({0}, {0}) must be 1",
                    i + 1
                )));
            }
        }
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i][j] + entries[j][i] != 2 {
                    return Err(Error::validation(format!(
                        "entries ({a}, {b}) = {} and ({b}, {a}) = {} are not complementary",
                        entries[i][j],
                        entries[j][i],
                        a = i + 1,
                        b = j + 1
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Five-indicator judgments: accuracy, completeness, consistency,
    /// timeliness, buyer utility.
    pub fn satisfaction_fixture() -> Self {
        JUDGMENTS_5X5.parse().expect("bundled 5x5 fixture is valid")
    }

    /// Quality-only judgments (the 5x5 fixture without the utility indicator).
    pub fn quality_fixture() -> Self {
        JUDGMENTS_4X4.parse().expect("bundled 4x4 fixture is valid")
    }

    pub fn order(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<u8>] {
        &self.entries
    }

    /// Row sums including the diagonal.
    pub fn row_sums(&self) -> Vec<u32> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|&v| v as u32).sum())
            .collect()
    }

    /// Drops indicator `index` (row and column).
    pub fn without(&self, index: usize) -> Result<Self> {
        if index >= self.order() {
            return Err(Error::validation(format!(
                "indicator {index} out of range for order {}",
                self.order()
            )));
        }
        let entries = self
            .entries
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != index)
                    .map(|(_, &v)| v)
                    .collect()
            })
            .collect();
        Self::new(entries)
    }

    /// Applies the same permutation to rows and columns.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.order();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::validation("not a permutation of the indicators"));
        }
        let entries = perm
            .iter()
            .map(|&i| perm.iter().map(|&j| self.entries[i][j]).collect())
            .collect();
        Self::new(entries)
    }
}

impl FromStr for JudgmentMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rows = parse_grid(s, |tok| {
            tok.parse::<u8>()
                .map_err(|_| Error::Parse(format!("`{tok}` is not an integer judgment")))
        })?;
        Self::new(rows)
    }
}

/// Square matrix of positive ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMatrix {
    entries: Vec<Vec<f64>>,
}

impl RatioMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(Error::validation("ratio matrix is empty"));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(format!(
                    "ratio matrix is not square: row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some((j, v)) = row.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::validation(format!(
                    "entry ({}, {}) = {v} is not a positive ratio",
                    i + 1,
                    j + 1
                )));
            }
            if (row[i] - 1.0).abs() > 1e-12 {
                return Err(Error::validation(format!(
                    "diagonal entry ({0}, {0}) must be 1",
                    i + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    /// The published two-decimal ratio matrix for the five satisfaction
    /// indicators. It is kept verbatim; it is not the exact range-method
    /// result for [`JudgmentMatrix::satisfaction_fixture`].
    pub fn published_fixture() -> Self {
        H_5X5.parse().expect("bundled ratio fixture is valid")
    }

    pub fn order(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.entries
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl FromStr for RatioMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rows = parse_grid(s, |tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{tok}` is not a number")))
        })?;
        Self::new(rows)
    }
}

fn parse_grid<T>(s: &str, mut cell: impl FnMut(&str) -> Result<T>) -> Result<Vec<Vec<T>>> {
    s.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(|line| {
            line.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(&mut cell)
                .collect()
        })
        .collect()
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::validation("weight vector is empty"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::validation(format!("weight {w} is negative or not finite")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// Normalizes a positive vector to unit sum.
    pub fn normalized(raw: &[f64]) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::validation("cannot normalize a vector with non-positive sum"));
        }
        Self::new(raw.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Rounded copy for display. Never feed this back into computations.
    pub fn rounded(&self, decimals: i32) -> Vec<f64> {
        let scale = 10f64.powi(decimals);
        self.weights.iter().map(|w| (w * scale).round() / scale).collect()
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, w) in self.weights.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w:.4}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub lambda_max: f64,
    pub ci: f64,
    pub cr: f64,
    pub ri: f64,
    pub passed: bool,
}

/// Range-method ratio matrix from three-point judgments.
pub fn range_transform(j: &JudgmentMatrix, base: f64) -> Result<RatioMatrix> {
    if !(base.is_finite() && base > 0.0) {
        return Err(Error::validation(format!("range base {base} must be positive")));
    }
    let n = j.order();
    if n < 2 {
        return Err(Error::validation("range method needs at least two indicators"));
    }
    let sums = j.row_sums();
    let max = *sums.iter().max().expect("n >= 2");
    let min = *sums.iter().min().expect("n >= 2");
    if max == min {
        return RatioMatrix::new(vec![vec![1.0; n]; n]);
    }
    let range = (max - min) as f64;
    let entries = sums
        .iter()
        .map(|&ri| {
            sums.iter()
                .map(|&rj| base.powf((ri as f64 - rj as f64) / range))
                .collect()
        })
        .collect();
    RatioMatrix::new(entries)
}

/// Principal eigenvalue and unit-sum eigenvector by power iteration from the
/// uniform vector. Stops once `‖H·w − λ·w‖∞ ≤ tol·λ`.
pub fn principal_eigenpair(h: &RatioMatrix, tol: f64) -> Result<(f64, WeightVector)> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::validation(format!("tolerance {tol} must be positive")));
    }
    let n = h.order();
    let mut w = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let hw = h.mul_vec(&w);
        // sum(w) == 1, so sum(H·w) is the Rayleigh-style estimate of λ.
        let lambda: f64 = hw.iter().sum();
        residual = hw
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0, f64::max);
        if residual <= tol * lambda {
            return Ok((lambda, WeightVector::normalized(&w)?));
        }
        w = hw.iter().map(|x| x / lambda).collect();
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {MAX_ITERATIONS} iterations (residual {residual:e})"
    )))
}

/// CI and CR for an order-`n` matrix with principal eigenvalue `lambda_max`.
pub fn consistency_check(lambda_max: f64, n: usize) -> Result<ConsistencyReport> {
    if n == 0 || n > RANDOM_INDEX.len() {
        return Err(Error::Unsupported(format!(
            "no random consistency index for order {n} (supported: 1..=9)"
        )));
    }
    let ri = RANDOM_INDEX[n - 1];
    let ci = if n == 1 {
        0.0
    } else {
        (lambda_max - n as f64) / (n as f64 - 1.0)
    };
    let cr = if ri == 0.0 { 0.0 } else { ci / ri };
    Ok(ConsistencyReport {
        lambda_max,
        ci,
        cr,
        ri,
        passed: cr < CR_THRESHOLD,
    })
}

/// Weights for a judgment matrix: range transform, eigenvector, consistency.
/// An inconsistent matrix is reported, not rejected.
pub fn derive_weights(j: &JudgmentMatrix, base: f64) -> Result<(WeightVector, ConsistencyReport)> {
    let h = range_transform(j, base)?;
    weights_from_ratios(&h)
}

/// Eigenvector weights and consistency for an explicit ratio matrix.
pub fn weights_from_ratios(h: &RatioMatrix) -> Result<(WeightVector, ConsistencyReport)> {
    let (lambda, w) = principal_eigenpair(h, DEFAULT_TOL)?;
    let report = consistency_check(lambda, h.order())?;
    Ok((w, report))
}
