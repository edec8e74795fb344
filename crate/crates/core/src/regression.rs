//! Linear models on rank embeddings: ordinary, inverse-variance weighted and
//! two-stage least squares. The link is always the identity; embeddings are
//! centred, so no intercept column is used.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::PivotedQr;
use crate::rank_kernel::{embed, TiePolicy};

/// Floor applied to estimated per-observation variances.
pub const SIGMA2_FLOOR: f64 = 1e-12;

/// Embedded design: one embedding column per predictor plus the response.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignEmbedding {
    pub n: usize,
    pub p: usize,
    pub columns: DMatrix<f64>,
    pub response: DVector<f64>,
}

impl DesignEmbedding {
    /// Embeds raw predictor columns and a raw response.
    ///
    /// Constant predictors are rejected up front since their embedding is
    /// identically zero.
    pub fn from_raw<C: AsRef<[f64]>>(
        predictors: &[C],
        response: &[f64],
        policy: TiePolicy,
    ) -> Result<Self> {
        let n = response.len();
        let p = predictors.len();
        for col in predictors {
            if col.as_ref().len() != n {
                return Err(Error::LengthMismatch {
                    left: col.as_ref().len(),
                    right: n,
                });
            }
        }
        if n <= p {
            return Err(Error::Underdetermined { n, p });
        }
        let mut columns = DMatrix::zeros(n, p);
        for (j, col) in predictors.iter().enumerate() {
            let col = col.as_ref();
            if col.iter().all(|v| *v == col[0]) {
                return Err(Error::SingularDesign(format!("predictor column {j} is constant")));
            }
            let e = embed(col, policy)?;
            columns.set_column(j, &DVector::from_vec(e.values));
        }
        let response = DVector::from_vec(embed(response, policy)?.values);
        Ok(DesignEmbedding {
            n,
            p,
            columns,
            response,
        })
    }

    /// Wraps columns that are already embedded (or generated directly in
    /// embedding space).
    pub fn from_embeddings(columns: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        let p = columns.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                left: bad.len(),
                right: n,
            });
        }
        if n <= p {
            return Err(Error::Underdetermined { n, p });
        }
        let flat: Vec<f64> = columns.into_iter().flatten().collect();
        Ok(DesignEmbedding {
            n,
            p,
            columns: DMatrix::from_vec(n, p, flat),
            response: DVector::from_vec(response),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `s^2 (X'WX)^-1` with `W = I` for the unweighted fit.
    pub cov_beta: Vec<Vec<f64>>,
    /// Godambe sandwich `(X'WX)^-1 X'W diag(u^2) W X (X'WX)^-1`.
    pub cov_sandwich: Vec<Vec<f64>>,
    pub s2: f64,
    pub weights: Option<Vec<f64>>,
    pub sigma2_by_obs: Option<Vec<f64>>,
}

impl RegressionFit {
    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|u| u * u).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IVFit {
    pub beta_2sls: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Trace of the instrument projection; equals the instrument rank.
    pub projection_trace: f64,
    /// Smallest first-stage F over the regressors.
    pub first_stage_f: f64,
    pub first_stage_f_by_column: Vec<f64>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn design_qr(x: &DMatrix<f64>) -> Result<PivotedQr> {
    PivotedQr::new(x).map_err(|e| Error::SingularDesign(e.to_string()))
}

/// `G^-1 (sum_n s_n x_n x_n') G^-1` for observation scales `s_n`.
fn sandwich(x: &DMatrix<f64>, scale: impl Fn(usize) -> f64, g_inv: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x.ncols();
    let mut meat = DMatrix::zeros(p, p);
    for i in 0..x.nrows() {
        let row = x.row(i);
        meat += row.transpose() * row * scale(i);
    }
    symmetrize(g_inv * meat * g_inv)
}

/// Unweighted fit `(X'X)^-1 X'Y` with homoscedastic and sandwich covariances.
pub fn fit_ql(d: &DesignEmbedding) -> Result<RegressionFit> {
    if d.n <= d.p {
        return Err(Error::Underdetermined { n: d.n, p: d.p });
    }
    let qr = design_qr(&d.columns)?;
    let beta = qr.solve(&d.response);
    let residuals = &d.response - &d.columns * &beta;
    let s2 = residuals.norm_squared() / (d.n - d.p) as f64;
    let g_inv = symmetrize(qr.gram_inverse());
    let cov = &g_inv * s2;
    let sand = sandwich(&d.columns, |i| residuals[i] * residuals[i], &g_inv);
    Ok(RegressionFit {
        beta: beta.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
        cov_beta: to_rows(&cov),
        cov_sandwich: to_rows(&sand),
        s2,
        weights: None,
        sigma2_by_obs: None,
    })
}

/// Default bin count for [`estimate_sigma2`]: `max(2, floor(sqrt(N)))`.
pub fn default_bins(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(2)
}

/// Per-observation variances from binned residuals.
///
/// Observations are ordered by fitted value and cut into `bins` contiguous
/// groups; each observation gets its group's residual variance (divisor
/// `size - 1`), floored at [`SIGMA2_FLOOR`]. When a bin would hold fewer than
/// two observations the count drops to [`default_bins`].
pub fn estimate_sigma2(fit: &RegressionFit, d: &DesignEmbedding, bins: usize) -> Result<Vec<f64>> {
    let n = d.n;
    if fit.residuals.len() != n {
        return Err(Error::LengthMismatch {
            left: fit.residuals.len(),
            right: n,
        });
    }
    if fit.beta.len() != d.p {
        return Err(Error::LengthMismatch {
            left: fit.beta.len(),
            right: d.p,
        });
    }
    if n < 4 {
        return Err(Error::SampleTooSmall { needed: 4, got: n });
    }
    if bins < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 bins, got {bins}")));
    }
    let bins = if 2 * bins > n { default_bins(n) } else { bins };

    let fitted = &d.columns * DVector::from_column_slice(&fit.beta);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fitted[a].total_cmp(&fitted[b]).then(a.cmp(&b)));

    let mut sigma2 = vec![0.0; n];
    for b in 0..bins {
        let group = &order[b * n / bins..(b + 1) * n / bins];
        let m = group.len() as f64;
        let mean = group.iter().map(|&i| fit.residuals[i]).sum::<f64>() / m;
        let var = group
            .iter()
            .map(|&i| (fit.residuals[i] - mean).powi(2))
            .sum::<f64>()
            / (m - 1.0);
        for &i in group {
            sigma2[i] = var.max(SIGMA2_FLOOR);
        }
    }
    Ok(sigma2)
}

/// Weighted fit `(X'WX)^-1 X'WY` with `W = diag(1 / sigma2)`.
pub fn fit_weighted(d: &DesignEmbedding, sigma2: &[f64]) -> Result<RegressionFit> {
    if sigma2.len() != d.n {
        return Err(Error::LengthMismatch {
            left: sigma2.len(),
            right: d.n,
        });
    }
    if d.n <= d.p {
        return Err(Error::Underdetermined { n: d.n, p: d.p });
    }
    if let Some(index) = sigma2.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::NonPositiveVariance { index });
    }
    let weights: Vec<f64> = sigma2.iter().map(|s| 1.0 / s).collect();
    if let Some(index) = weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::NonPositiveVariance { index });
    }

    let mut xw = d.columns.clone();
    let mut yw = d.response.clone();
    for (i, w) in weights.iter().enumerate() {
        let sw = w.sqrt();
        xw.row_mut(i).scale_mut(sw);
        yw[i] *= sw;
    }
    let qr = design_qr(&xw)?;
    let beta = qr.solve(&yw);
    let residuals = &d.response - &d.columns * &beta;
    let s2 = residuals
        .iter()
        .zip(&weights)
        .map(|(u, w)| w * u * u)
        .sum::<f64>()
        / (d.n - d.p) as f64;
    let g_inv = symmetrize(qr.gram_inverse());
    let cov = &g_inv * s2;
    let sand = sandwich(
        &d.columns,
        |i| (weights[i] * residuals[i]).powi(2),
        &g_inv,
    );
    Ok(RegressionFit {
        beta: beta.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
        cov_beta: to_rows(&cov),
        cov_sandwich: to_rows(&sand),
        s2,
        weights: Some(weights),
        sigma2_by_obs: Some(sigma2.to_vec()),
    })
}

/// Relative projected norm below which a regressor counts as orthogonal to
/// the instrument space.
const MIN_PROJECTED_R2: f64 = 1e-14;

/// Two-stage least squares `(X'P_Z X)^-1 X'P_Z Y` on embeddings.
pub fn fit_2sls(d: &DesignEmbedding, z: &DMatrix<f64>) -> Result<IVFit> {
    if z.nrows() != d.n {
        return Err(Error::LengthMismatch {
            left: z.nrows(),
            right: d.n,
        });
    }
    let q = z.ncols();
    if q < d.p {
        return Err(Error::Underidentified {
            instruments: q,
            regressors: d.p,
        });
    }
    if d.n <= q {
        return Err(Error::Underdetermined { n: d.n, p: q });
    }
    let zqr = PivotedQr::new(z).map_err(|e| Error::SingularInstruments(e.to_string()))?;
    let basis = zqr.q();
    let projected = basis * (basis.transpose() * &d.columns);
    let projection_trace = basis.norm_squared();

    let mut first_stage_f_by_column = Vec::with_capacity(d.p);
    for j in 0..d.p {
        let total = d.columns.column(j).norm_squared();
        if total == 0.0 {
            return Err(Error::SingularDesign(format!("regressor column {j} is identically zero")));
        }
        let r2 = (projected.column(j).norm_squared() / total).min(1.0);
        if r2 < MIN_PROJECTED_R2 {
            return Err(Error::SingularInstruments(format!(
                "regressor column {j} is orthogonal to the instruments"
            )));
        }
        let f = (r2 / q as f64) / ((1.0 - r2) / (d.n - q) as f64);
        first_stage_f_by_column.push(f);
    }

    let xqr = PivotedQr::new(&projected)
        .map_err(|e| Error::SingularInstruments(format!("projected regressors: {e}")))?;
    let beta = xqr.solve(&d.response);
    let residuals = &d.response - &d.columns * &beta;
    let first_stage_f = first_stage_f_by_column
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(IVFit {
        beta_2sls: beta.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
        projection_trace,
        first_stage_f,
        first_stage_f_by_column,
    })
}
