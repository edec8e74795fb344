//! Correlation estimator and moment-weighted quasi-likelihood quantities.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rank_kernel::{embed, RankEmbedding, TiePolicy};

/// Per-variable moments `mu_r = sum_n e_n^r / (N - 1)` for `r = 2, 3, 4`,
/// with the per-observation contributions `e_n^r` kept for the Hessian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSet {
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    #[serde(skip)]
    pub per_obs: Vec<[f64; 3]>,
}

impl MomentSet {
    /// Builds the moments from explicit per-observation contributions.
    ///
    /// Panics if fewer than two rows are given.
    pub fn from_per_obs(per_obs: Vec<[f64; 3]>) -> Self {
        assert!(per_obs.len() >= 2, "moments need at least two observations");
        let off = (per_obs.len() - 1) as f64;
        let mut sums = [0.0; 3];
        for row in &per_obs {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        MomentSet {
            mu2: sums[0] / off,
            mu3: sums[1] / off,
            mu4: sums[2] / off,
            per_obs,
        }
    }

    pub fn n(&self) -> usize {
        self.per_obs.len()
    }

    fn is_zero(&self) -> bool {
        self.per_obs.iter().all(|r| r.iter().all(|v| *v == 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaWeights {
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl LambdaWeights {
    /// Weights that reduce the weighted moment sum to the plain estimator.
    pub const PLAIN: LambdaWeights = LambdaWeights {
        lambda2: 1.0,
        lambda3: 0.0,
        lambda4: 0.0,
    };

    pub fn new(lambda2: f64, lambda3: f64, lambda4: f64) -> Self {
        LambdaWeights {
            lambda2,
            lambda3,
            lambda4,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.lambda2, self.lambda3, self.lambda4]
    }
}

/// 3x3 matrix indexed by moment order `r, s` in `{2, 3, 4}` (offset by 2).
pub type Hessian = [[f64; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationFit {
    pub rho_hat: f64,
    pub n: usize,
    pub s2_x: f64,
    pub s2_y: f64,
    pub lambda: LambdaWeights,
    pub hessian: Hessian,
    pub fisher_info: f64,
    /// `+-inf` when `|rho_hat| = 1`; serialised as `null` in that case.
    pub t_stat: f64,
    pub p_value: f64,
    pub dof: usize,
    pub policy: TiePolicy,
}

pub fn central_moments(e: &RankEmbedding) -> MomentSet {
    let per_obs = e
        .values
        .iter()
        .map(|&v| {
            let v2 = v * v;
            [v2, v2 * v, v2 * v2]
        })
        .collect();
    MomentSet::from_per_obs(per_obs)
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

/// Rank correlation with its t test on `N - 2` degrees of freedom and the
/// quasi-likelihood diagnostics (fitted weights, Hessian, information).
pub fn correlate(x: &[f64], y: &[f64], policy: TiePolicy) -> Result<CorrelationFit> {
    check_lengths(x.len(), y.len())?;
    if x.len() < 3 {
        return Err(Error::SampleTooSmall {
            needed: 3,
            got: x.len(),
        });
    }
    let ex = embed(x, policy)?;
    let ey = embed(y, policy)?;
    correlate_embeddings(&ex, &ey)
}

/// Same as [`correlate`] for precomputed embeddings.
pub fn correlate_embeddings(ex: &RankEmbedding, ey: &RankEmbedding) -> Result<CorrelationFit> {
    check_lengths(ex.n, ey.n)?;
    let n = ex.n;
    if n < 3 {
        return Err(Error::SampleTooSmall { needed: 3, got: n });
    }
    let mx = central_moments(ex);
    let my = central_moments(ey);
    let (s2_x, s2_y) = (mx.mu2, my.mu2);
    if s2_x == 0.0 {
        return Err(Error::DegenerateVariable("x".into()));
    }
    if s2_y == 0.0 {
        return Err(Error::DegenerateVariable("y".into()));
    }

    let cross: f64 = ex.values.iter().zip(&ey.values).map(|(a, b)| a * b).sum();
    let rho_hat = (cross / (n - 1) as f64 / (s2_x * s2_y).sqrt()).clamp(-1.0, 1.0);

    let dof = n - 2;
    let (t_stat, p_value) = t_test(rho_hat, dof);

    let lambda = fit_lambda(&mx, &my)?;
    let (hessian, fisher_info) = hessian_and_info(&mx, &my)?;

    Ok(CorrelationFit {
        rho_hat,
        n,
        s2_x,
        s2_y,
        lambda,
        hessian,
        fisher_info,
        t_stat,
        p_value,
        dof,
        policy: ex.policy,
    })
}

/// Two-sided test of zero correlation against `t_dof`.
pub fn t_test(rho: f64, dof: usize) -> (f64, f64) {
    if rho.abs() >= 1.0 {
        return (rho.signum() * f64::INFINITY, 0.0);
    }
    let t = rho * (dof as f64 / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("dof >= 1");
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    (t, p)
}

pub fn ql_loss(mx: &MomentSet, my: &MomentSet, w: &LambdaWeights) -> Result<f64> {
    check_lengths(mx.n(), my.n())?;
    let lam = w.as_array();
    Ok(mx
        .per_obs
        .iter()
        .zip(&my.per_obs)
        .map(|(px, py)| (0..3).map(|r| lam[r] * (px[r] + py[r])).sum::<f64>())
        .sum())
}

fn centred_columns(per_obs: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let n = per_obs.len() as f64;
    let mut mean = [0.0; 3];
    for row in per_obs {
        for r in 0..3 {
            mean[r] += row[r];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    per_obs
        .iter()
        .map(|row| [row[0] - mean[0], row[1] - mean[1], row[2] - mean[2]])
        .collect()
}

/// Fits the moment weights with `lambda2 = 1` and `(lambda3, lambda4)`
/// minimising the sample variance of the per-observation weighted
/// contribution `sum_r lambda_r (x_n^r + y_n^r)`.
///
/// Falls back to [`LambdaWeights::PLAIN`] when the 2x2 normal equations are
/// singular.
pub fn fit_lambda(mx: &MomentSet, my: &MomentSet) -> Result<LambdaWeights> {
    check_lengths(mx.n(), my.n())?;
    if mx.is_zero() && my.is_zero() {
        return Err(Error::DegenerateVariable("x,y".into()));
    }
    let combined: Vec<[f64; 3]> = mx
        .per_obs
        .iter()
        .zip(&my.per_obs)
        .map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
        .collect();
    let c = centred_columns(&combined);

    let dot = |i: usize, j: usize| c.iter().map(|row| row[i] * row[j]).sum::<f64>();
    let (g33, g34, g44) = (dot(1, 1), dot(1, 2), dot(2, 2));
    let (h3, h4) = (-dot(1, 0), -dot(2, 0));

    let det = g33 * g44 - g34 * g34;
    if g33 <= 0.0 || g44 <= 0.0 || det <= 1e-12 * g33 * g44 {
        return Ok(LambdaWeights::PLAIN);
    }
    let lambda3 = (h3 * g44 - g34 * h4) / det;
    let lambda4 = (g33 * h4 - g34 * h3) / det;
    if !(lambda3.is_finite() && lambda4.is_finite()) {
        return Ok(LambdaWeights::PLAIN);
    }
    Ok(LambdaWeights::new(1.0, lambda3, lambda4))
}

/// Hessian of the log quasi-likelihood in the moment weights and the
/// empirical information `lambda' H lambda` at the fitted weights.
///
/// `H_rs = 1/2 sum_n 1/2 (x~_rn y~_sn + x~_sn y~_rn)` where `~` denotes
/// per-observation contributions centred on their column means. For
/// independent variables the quadratic form can come out negative; the
/// information is then reported as zero.
pub fn hessian_and_info(mx: &MomentSet, my: &MomentSet) -> Result<(Hessian, f64)> {
    check_lengths(mx.n(), my.n())?;
    let n = mx.n();
    if n < 3 {
        return Err(Error::SampleTooSmall { needed: 3, got: n });
    }
    let cx = centred_columns(&mx.per_obs);
    let cy = centred_columns(&my.per_obs);
    let constant = |raw: &MomentSet, c: &[[f64; 3]]| {
        !raw.is_zero() && c.iter().all(|r| r.iter().all(|v| *v == 0.0))
    };
    if constant(mx, &cx) {
        return Err(Error::DegenerateVariable("x".into()));
    }
    if constant(my, &cy) {
        return Err(Error::DegenerateVariable("y".into()));
    }

    let mut h: Hessian = [[0.0; 3]; 3];
    for r in 0..3 {
        for s in r..3 {
            let v = 0.25
                * cx.iter()
                    .zip(&cy)
                    .map(|(a, b)| a[r] * b[s] + a[s] * b[r])
                    .sum::<f64>();
            h[r][s] = v;
            h[s][r] = v;
        }
    }

    let lambda = match fit_lambda(mx, my) {
        Ok(l) => l,
        Err(Error::DegenerateVariable(_)) => LambdaWeights::PLAIN,
        Err(e) => return Err(e),
    };
    let lam = lambda.as_array();
    let mut q = 0.0;
    for r in 0..3 {
        for s in 0..3 {
            q += lam[r] * h[r][s] * lam[s];
        }
    }
    Ok((h, q.max(0.0)))
}

/// Variance proxy `1 / (N I(rho))`.
pub fn variance_bound(fit: &CorrelationFit) -> Result<f64> {
    if !(fit.fisher_info > 0.0) || !fit.fisher_info.is_finite() {
        return Err(Error::SingularInformation);
    }
    Ok(1.0 / (fit.n as f64 * fit.fisher_info))
}

/// Plain Pearson product-moment correlation, used as the non-robust baseline.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x.len(), y.len())?;
    let n = x.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateVariable("x".into()));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateVariable("y".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
