//! Score matrices, double-centred kernels and the rank embedding.
//!
//! For a sample `x` of length `N` the score matrix holds the sign of every
//! pairwise comparison, the kernel removes its row, column and grand means
//! (row and column means use divisor `N - 1`, the grand mean `N^2 - N`), and
//! the embedding is the vector of kernel column sums. For untied data the
//! embedding is `(2 r_n - N - 1) / (N - 1)` where `r_n` is the rank of `x_n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a tied pair `x_k == x_l` (with `k != l`) is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TiePolicy {
    /// Tied pairs score 0, so the score matrix is antisymmetric and the
    /// embedding sums to zero.
    #[default]
    #[serde(rename = "kemeny")]
    KemenyZero,
    /// Tied pairs score +1 in both directions (the `>=` reading of the score
    /// rule). Kept for fidelity experiments; the embedding no longer sums to
    /// zero when ties are present.
    #[serde(rename = "paper")]
    PaperLiteral,
}

impl TiePolicy {
    #[inline]
    fn score(self, a: f64, b: f64) -> i8 {
        match self {
            TiePolicy::KemenyZero => (a > b) as i8 - (a < b) as i8,
            TiePolicy::PaperLiteral => {
                if a >= b {
                    1
                } else {
                    -1
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TiePolicy::KemenyZero => "kemeny",
            TiePolicy::PaperLiteral => "paper",
        }
    }
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "kemeny" | "kemeny-zero" => Ok(TiePolicy::KemenyZero),
            "paper" | "paper-literal" => Ok(TiePolicy::PaperLiteral),
            other => Err(format!("unknown tie policy `{other}` (expected kemeny or paper)")),
        }
    }
}

/// Hollow `N x N` matrix of pairwise comparison scores in `{-1, 0, +1}`,
/// stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreMatrix {
    n: usize,
    entries: Vec<i8>,
    policy: TiePolicy,
}

impl ScoreMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn policy(&self) -> TiePolicy {
        self.policy
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> i8 {
        self.entries[k * self.n + l]
    }

    pub fn row(&self, k: usize) -> &[i8] {
        &self.entries[k * self.n..(k + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.entries
    }

    /// Nested-row copy, mostly for tests and debugging output.
    pub fn to_rows(&self) -> Vec<Vec<i8>> {
        self.entries.chunks(self.n).map(<[i8]>::to_vec).collect()
    }
}

/// Double-centred score matrix together with the means that were removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredKernel {
    n: usize,
    entries: Vec<f64>,
    pub row_means: Vec<f64>,
    pub col_means: Vec<f64>,
    pub grand_mean: f64,
}

impl CenteredKernel {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[k * self.n + l]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Column sums in row order `k = 0..N`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for row in self.entries.chunks(self.n) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }
}

/// Rank embedding of one variable: the column sums of its centred kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankEmbedding {
    pub n: usize,
    pub values: Vec<f64>,
    /// Index sets (size >= 2) of observations sharing one raw value, ordered
    /// by that value.
    pub tie_groups: Vec<Vec<usize>>,
    pub policy: TiePolicy,
}

impl RankEmbedding {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn has_ties(&self) -> bool {
        !self.tie_groups.is_empty()
    }

    /// True when every value is exactly zero (an all-tied sample under
    /// [`TiePolicy::KemenyZero`]).
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Largest admissible magnitude, `(N - 1) / 2`.
    pub fn bound(&self) -> f64 {
        (self.n as f64 - 1.0) / 2.0
    }
}

fn validate(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::SampleTooSmall {
            needed: 2,
            got: x.len(),
        });
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput { index });
    }
    Ok(())
}

pub fn score_matrix(x: &[f64], policy: TiePolicy) -> Result<ScoreMatrix> {
    validate(x)?;
    let n = x.len();
    let mut entries = vec![0i8; n * n];
    for (k, &xk) in x.iter().enumerate() {
        let row = &mut entries[k * n..(k + 1) * n];
        for (l, &xl) in x.iter().enumerate() {
            if k != l {
                row[l] = policy.score(xk, xl);
            }
        }
    }
    Ok(ScoreMatrix { n, entries, policy })
}

/// Row, column and grand means from integer row/column sums.
struct Means {
    row: Vec<f64>,
    col: Vec<f64>,
    grand: f64,
}

impl Means {
    fn from_sums(row_sums: &[i64], col_sums: &[i64]) -> Self {
        let n = row_sums.len();
        let off = (n - 1) as f64;
        let total: i64 = row_sums.iter().sum();
        Means {
            row: row_sums.iter().map(|&s| s as f64 / off).collect(),
            col: col_sums.iter().map(|&s| s as f64 / off).collect(),
            grand: total as f64 / ((n * n - n) as f64),
        }
    }
}

pub fn center_kernel(c: &ScoreMatrix) -> CenteredKernel {
    let n = c.n;
    let mut row_sums = vec![0i64; n];
    let mut col_sums = vec![0i64; n];
    for k in 0..n {
        for (l, &v) in c.row(k).iter().enumerate() {
            row_sums[k] += v as i64;
            col_sums[l] += v as i64;
        }
    }
    let means = Means::from_sums(&row_sums, &col_sums);

    let mut entries = Vec::with_capacity(n * n);
    for k in 0..n {
        let rk = means.row[k];
        for (l, &v) in c.row(k).iter().enumerate() {
            entries.push(v as f64 - rk - means.col[l] + means.grand);
        }
    }
    CenteredKernel {
        n,
        entries,
        row_means: means.row,
        col_means: means.col,
        grand_mean: means.grand,
    }
}

/// Rank embedding of `x`.
///
/// Scores are recomputed on the fly instead of materialising the `N x N`
/// matrices, but each column is accumulated in the same order and with the
/// same arithmetic as [`center_kernel`] followed by
/// [`CenteredKernel::column_sums`], so the two routes agree bit for bit.
pub fn embed(x: &[f64], policy: TiePolicy) -> Result<RankEmbedding> {
    validate(x)?;
    let n = x.len();

    let mut row_sums = vec![0i64; n];
    let mut col_sums = vec![0i64; n];
    for (k, &xk) in x.iter().enumerate() {
        for (l, &xl) in x.iter().enumerate() {
            if k != l {
                let s = policy.score(xk, xl) as i64;
                row_sums[k] += s;
                col_sums[l] += s;
            }
        }
    }
    let means = Means::from_sums(&row_sums, &col_sums);

    let mut values = vec![0.0; n];
    for (k, &xk) in x.iter().enumerate() {
        let rk = means.row[k];
        for (l, &xl) in x.iter().enumerate() {
            let s = if k == l { 0 } else { policy.score(xk, xl) };
            values[l] += s as f64 - rk - means.col[l] + means.grand;
        }
    }

    Ok(RankEmbedding {
        n,
        values,
        tie_groups: tie_groups(x),
        policy,
    })
}

fn tie_groups(x: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));

    let mut groups = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        // `==` rather than total_cmp so that -0.0 and 0.0 tie, as they do in the scores.
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            let mut group = order[start..end].to_vec();
            group.sort_unstable();
            groups.push(group);
        }
        start = end;
    }
    groups
}
