//! Independent reference implementations used by the integration tests.
//! Everything here is written the slow, obvious way on purpose.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense evaluation of the embedding straight from its definition: build the
/// score matrix, double-centre it with off-diagonal means, sum each column.
pub fn naive_embedding(x: &[f64], paper_ties: bool) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0f64; n]; n];
    for k in 0..n {
        for l in 0..n {
            if k == l {
                continue;
            }
            c[k][l] = if x[k] > x[l] {
                1.0
            } else if x[k] < x[l] {
                -1.0
            } else if paper_ties {
                1.0
            } else {
                0.0
            };
        }
    }
    let off = (n - 1) as f64;
    let r: Vec<f64> = (0..n).map(|k| (0..n).map(|l| c[k][l]).sum::<f64>() / off).collect();
    let col: Vec<f64> = (0..n).map(|l| (0..n).map(|k| c[k][l]).sum::<f64>() / off).collect();
    let g = c.iter().flatten().sum::<f64>() / (n * n - n) as f64;
    (0..n)
        .map(|l| (0..n).map(|k| c[k][l] - r[k] - col[l] + g).sum())
        .collect()
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Closed form for untied data: `(2 r - N - 1) / (N - 1)`.
pub fn untied_embedding(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    average_ranks(x)
        .into_iter()
        .map(|r| (2.0 * r - n - 1.0) / (n - 1.0))
        .collect()
}

/// Textbook Spearman for untied data.
pub fn spearman_textbook(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman_ranked_pearson(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Solves the normal equations `(X'X) b = X'y` by Gaussian elimination with
/// partial pivoting. `cols[j]` is column `j` of `X`.
pub fn normal_equations(cols: &[Vec<f64>], y: &[f64], w: Option<&[f64]>) -> Vec<f64> {
    let p = cols.len();
    let n = y.len();
    let wt = |i: usize| w.map_or(1.0, |w| w[i]);
    let mut a = vec![vec![0.0; p + 1]; p];
    for r in 0..p {
        for c in 0..p {
            a[r][c] = (0..n).map(|i| wt(i) * cols[r][i] * cols[c][i]).sum();
        }
        a[r][p] = (0..n).map(|i| wt(i) * cols[r][i] * y[i]).sum();
    }
    for k in 0..p {
        let piv = (k..p)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        a.swap(k, piv);
        for i in k + 1..p {
            let f = a[i][k] / a[k][k];
            for j in k..=p {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    let mut b = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|j| a[k][j] * b[j]).sum();
        b[k] = (a[k][p] - s) / a[k][k];
    }
    b
}

pub fn normals<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Values on a small integer grid, so ties are common.
pub fn tied<R: Rng>(rng: &mut R, n: usize, levels: u32) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..levels) as f64).collect()
}

pub fn is_untied(x: &[f64]) -> bool {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[0] < w[1])
}
