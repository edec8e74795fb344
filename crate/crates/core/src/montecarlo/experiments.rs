use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde_json::json;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::generator::{check_eps, contaminate, Generator, GeneratorKind};
use super::schedule::{lane, replicate_rng, Schedule};
use super::{ClaimCheck, Series, SimReport, Summary, Threshold, Thresholds};
use crate::error::{Error, Result};
use crate::estimators::{correlate, pearson, variance_bound};
use crate::rank_kernel::TiePolicy;
use crate::regression::{default_bins, estimate_sigma2, fit_2sls, fit_ql, fit_weighted, DesignEmbedding};

/// Experiment names accepted by [`super::simulate`].
pub const EXPERIMENTS: [&str; 6] = [
    "unbiasedness",
    "null-calibration",
    "rate-check",
    "breakdown",
    "weak-iv",
    "hetero-recovery",
];

const MIN_UNBIASEDNESS_REPS: usize = 1000;

/// Runs experiments with one set of thresholds on one schedule.
#[derive(Debug, Clone, Default)]
pub struct Harness {
    pub thresholds: Thresholds,
    pub schedule: Schedule,
}

fn rho_or_nan(x: &[f64], y: &[f64]) -> f64 {
    correlate(x, y, TiePolicy::KemenyZero)
        .map(|f| f.rho_hat)
        .unwrap_or(f64::NAN)
}

fn require_reps(reps: usize, min: usize) -> Result<()> {
    if reps < min {
        return Err(Error::InvalidConfig(format!("need at least {min} replicates, got {reps}")));
    }
    Ok(())
}

/// Population Spearman correlation of a Gaussian copula.
pub fn grade_correlation(rho: f64) -> f64 {
    6.0 / PI * (rho / 2.0).asin()
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
/// Non-finite values are dropped; `+-inf` map to CDF values `1` and `0`.
pub fn ks_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = if *x == f64::INFINITY {
            1.0
        } else if *x == f64::NEG_INFINITY {
            0.0
        } else {
            cdf(*x)
        };
        d = d.max((i + 1) as f64 / m - f).max(f - i as f64 / m);
    }
    d
}

impl Harness {
    pub fn new(thresholds: Thresholds, schedule: Schedule) -> Harness {
        Harness {
            thresholds,
            schedule,
        }
    }

    fn report(
        &self,
        experiment: &str,
        mut config: serde_json::Value,
        replicates: usize,
        series: Vec<Series>,
        diagnostics: BTreeMap<String, f64>,
        claim_checks: Vec<ClaimCheck>,
    ) -> SimReport {
        config["thresholds"] = serde_json::to_value(&self.thresholds).expect("thresholds serialize");
        SimReport {
            experiment: experiment.to_string(),
            config,
            replicates,
            series,
            diagnostics,
            claim_checks,
        }
    }

    pub fn run_unbiasedness(&self, g: &Generator, reps: usize) -> Result<SimReport> {
        let GeneratorKind::GaussianCopula { rho } = g.kind else {
            return Err(Error::InvalidConfig("unbiasedness needs a gaussian_copula generator".into()));
        };
        require_reps(reps, MIN_UNBIASEDNESS_REPS)?;
        let target = grade_correlation(rho);
        let ln = lane("unbiasedness", 0);
        let draws = self.schedule.map(reps, |r| {
            let mut rng = replicate_rng(g.seed, ln, r);
            let (x, y) = g.pair(&mut rng).expect("copula generator");
            match correlate(&x, &y, TiePolicy::KemenyZero) {
                Ok(fit) => (fit.rho_hat, variance_bound(&fit).unwrap_or(f64::NAN)),
                Err(_) => (f64::NAN, f64::NAN),
            }
        });
        let series = Series::new("rho_hat", Some(target), draws.iter().map(|d| d.0).collect());
        let bounds = Series::new("variance_bound", None, draws.iter().map(|d| d.1).collect());
        let s = &series.summary;
        let mc_se = s.sd / (s.count as f64).sqrt();
        let mut diag = BTreeMap::new();
        diag.insert("target".into(), target);
        diag.insert("bias".into(), s.bias);
        diag.insert("mc_se".into(), mc_se);
        diag.insert("bias_over_se".into(), s.bias / mc_se);
        // information-based bound against the observed spread; reported only
        diag.insert("empirical_variance".into(), s.sd * s.sd);
        diag.insert("median_variance_bound".into(), bounds.summary.median);
        diag.insert("finite_bound_share".into(), bounds.summary.count as f64 / reps as f64);
        let claim = ClaimCheck::new(
            "abs(mean(rho_hat) - grade correlation)",
            s.bias.abs(),
            Threshold::AtMost {
                value: self.thresholds.unbiasedness_tol,
            },
        );
        Ok(self.report(
            "unbiasedness",
            json!({"generator": g, "reps": reps}),
            reps,
            vec![series, bounds],
            diag,
            vec![claim],
        ))
    }

    /// Independent Gaussian pairs of size `n`; compares the t statistics with
    /// the t law on `n - 2` degrees of freedom.
    pub fn run_null_calibration(&self, n: usize, reps: usize, seed: u64) -> Result<SimReport> {
        require_reps(reps, 1)?;
        let g = Generator::new(GeneratorKind::GaussianCopula { rho: 0.0 }, n, seed)?;
        let ln = lane("null-calibration", 0);
        let t = self.schedule.map(reps, |r| {
            let mut rng = replicate_rng(seed, ln, r);
            let (x, y) = g.pair(&mut rng).expect("copula generator");
            correlate(&x, &y, TiePolicy::KemenyZero)
                .map(|f| f.t_stat)
                .unwrap_or(f64::NAN)
        });
        let dof = (n - 2) as f64;
        let law = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let ks = ks_distance(&t, |v| law.cdf(v));
        let mut diag = BTreeMap::new();
        diag.insert("ks_distance".into(), ks);
        diag.insert("dof".into(), dof);
        let claim = ClaimCheck::new(
            format!("KS distance of t_stat to t_{}", n - 2),
            ks,
            Threshold::Below {
                value: self.thresholds.ks_max,
            },
        );
        Ok(self.report(
            "null-calibration",
            json!({"generator": g, "reps": reps}),
            reps,
            vec![Series::new("t_stat", None, t)],
            diag,
            vec![claim],
        ))
    }

    /// sd of rho_hat at each grid size; each adjacent pair is checked against
    /// the square-root law `sd(n) / sd(m) = sqrt(m / n)`.
    pub fn run_rate_check(&self, g: &Generator, n_grid: &[usize], reps: usize) -> Result<SimReport> {
        require_reps(reps, 2)?;
        if n_grid.len() < 2 {
            return Err(Error::InvalidConfig("rate check needs at least two sample sizes".into()));
        }
        let mut series = Vec::new();
        let mut diag = BTreeMap::new();
        for (i, &n) in n_grid.iter().enumerate() {
            let gi = g.with_n(n)?;
            let ln = lane("rate-check", i as u64);
            let est = self.schedule.map(reps, |r| {
                let mut rng = replicate_rng(gi.seed, ln, r);
                match gi.pair(&mut rng) {
                    Ok((x, y)) => rho_or_nan(&x, &y),
                    Err(_) => f64::NAN,
                }
            });
            let s = Series::new(format!("rho_hat n={n}"), None, est);
            diag.insert(format!("sd n={n}"), s.summary.sd);
            series.push(s);
        }
        let tol = self.thresholds.rate_tolerance;
        let mut claims = Vec::new();
        for w in 0..n_grid.len() - 1 {
            let (a, b) = (n_grid[w], n_grid[w + 1]);
            let expected = (b as f64 / a as f64).sqrt();
            let threshold = Threshold::Within {
                lo: expected * (1.0 - tol),
                hi: expected * (1.0 + tol),
            };
            let claim = format!("sd(n={a}) / sd(n={b})");
            let (sa, sb) = (series[w].summary.sd, series[w + 1].summary.sd);
            if !(sa > 0.0 && sb > 0.0 && sa.is_finite() && sb.is_finite()) {
                claims.push(ClaimCheck::skipped(claim, threshold));
                continue;
            }
            diag.insert(format!("ratio {a}/{b}"), sa / sb);
            claims.push(ClaimCheck::new(claim, sa / sb, threshold));
        }
        Ok(self.report(
            "rate-check",
            json!({"generator": g, "reps": reps, "n_grid": n_grid}),
            reps,
            series,
            diag,
            claims,
        ))
    }

    /// Median absolute shift of the rank estimator and of Pearson when a
    /// fraction `eps` of a clean sample is replaced by outliers. The clean
    /// samples are shared across the grid.
    pub fn run_breakdown(&self, g: &Generator, eps_grid: &[f64], reps: usize) -> Result<SimReport> {
        let GeneratorKind::ContaminatedGaussian { rho, magnitude, .. } = g.kind else {
            return Err(Error::InvalidConfig("breakdown needs a contaminated_gaussian generator".into()));
        };
        require_reps(reps, 1)?;
        for &eps in eps_grid {
            check_eps(eps)?;
        }
        let clean = Generator::new(GeneratorKind::GaussianCopula { rho }, g.n, g.seed)?;
        let clean_lane = lane("breakdown", 0);
        let mut series = Vec::new();
        let mut diag = BTreeMap::new();
        let mut claims = Vec::new();
        for (i, &eps) in eps_grid.iter().enumerate() {
            let ln = lane("breakdown", 1 + i as u64);
            let shifts = self.schedule.map(reps, |r| {
                let (x, y) = clean
                    .pair(&mut replicate_rng(g.seed, clean_lane, r))
                    .expect("copula generator");
                let d = contaminate(&mut replicate_rng(g.seed, ln, r), x, y, eps, magnitude);
                let rank_c = rho_or_nan(&d.x, &d.y);
                let rank = (rank_c - rho_or_nan(&d.clean_x, &d.clean_y)).abs();
                let p_clean = pearson(&d.clean_x, &d.clean_y).unwrap_or(f64::NAN);
                let p_cont = pearson(&d.x, &d.y).unwrap_or(f64::NAN);
                (rank_c, rank, (p_cont - p_clean).abs())
            });
            let nonfinite = shifts.iter().filter(|s| !s.0.is_finite()).count();
            let rank = Series::new(format!("rank shift eps={eps}"), Some(0.0), shifts.iter().map(|s| s.1).collect());
            let pear = Series::new(format!("pearson shift eps={eps}"), Some(0.0), shifts.iter().map(|s| s.2).collect());
            let (rm, pm) = (rank.summary.median, pear.summary.median);
            diag.insert(format!("median rank shift eps={eps}"), rm);
            diag.insert(format!("median pearson shift eps={eps}"), pm);
            diag.insert(format!("non-finite rank estimates eps={eps}"), nonfinite as f64);
            if eps > 0.0 && eps < 0.5 {
                claims.push(ClaimCheck::new(
                    format!("median rank shift below median pearson shift at eps={eps}"),
                    rm,
                    Threshold::Below { value: pm },
                ));
                claims.push(ClaimCheck::new(
                    format!("non-finite rank estimates at eps={eps}"),
                    nonfinite as f64,
                    Threshold::AtMost { value: 0.0 },
                ));
            }
            series.push(rank);
            series.push(pear);
        }
        Ok(self.report(
            "breakdown",
            json!({"generator": g, "reps": reps, "eps_grid": eps_grid}),
            reps,
            series,
            diag,
            claims,
        ))
    }

    /// Embedding OLS against 2SLS with the embedded instrument.
    pub fn run_weak_iv(&self, g: &Generator, reps: usize) -> Result<SimReport> {
        if !matches!(g.kind, GeneratorKind::WeakIv { .. }) {
            return Err(Error::InvalidConfig("weak-iv needs a weak_iv generator".into()));
        }
        require_reps(reps, 1)?;
        let ln = lane("weak-iv", 0);
        let draws = self.schedule.map(reps, |r| {
            let mut rng = replicate_rng(g.seed, ln, r);
            let Ok(d) = g.weak_iv(&mut rng) else {
                return (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
            };
            let beta = d.beta;
            let z = DMatrix::from_column_slice(g.n, 1, &d.instrument);
            let Ok(design) = DesignEmbedding::from_embeddings(vec![d.regressor], d.response) else {
                return (beta, f64::NAN, f64::NAN, f64::NAN);
            };
            let ql = fit_ql(&design).map(|f| f.beta[0]).unwrap_or(f64::NAN);
            let (iv, f) = fit_2sls(&design, &z)
                .map(|f| (f.beta_2sls[0], f.first_stage_f))
                .unwrap_or((f64::NAN, f64::NAN));
            (beta, ql, iv, f)
        });
        let beta = draws.iter().map(|d| d.0).find(|b| b.is_finite()).unwrap_or(f64::NAN);
        let ql = Series::new("beta_ql", Some(beta), draws.iter().map(|d| d.1).collect());
        let iv = Series::new("beta_2sls", Some(beta), draws.iter().map(|d| d.2).collect());
        let fs: Vec<f64> = draws.iter().map(|d| d.3).collect();
        let f_summary = Summary::compute(&fs, None);
        let weak = fs.iter().filter(|f| f.is_finite() && **f < self.thresholds.weak_f).count();
        let mut diag = BTreeMap::new();
        diag.insert("true_beta".into(), beta);
        diag.insert("median_first_stage_f".into(), f_summary.median);
        diag.insert("weak_share".into(), weak as f64 / f_summary.count.max(1) as f64);
        diag.insert("mse_ql".into(), ql.summary.mse);
        diag.insert("mse_2sls".into(), iv.summary.mse);
        diag.insert("bias_ql".into(), ql.summary.bias);
        diag.insert("bias_2sls".into(), iv.summary.bias);
        let claim = ClaimCheck::new(
            "mse(beta_ql) <= mse(beta_2sls)",
            ql.summary.mse,
            Threshold::AtMost {
                value: iv.summary.mse,
            },
        );
        Ok(self.report(
            "weak-iv",
            json!({"generator": g, "reps": reps}),
            reps,
            vec![ql, iv, Series::new("first_stage_f", None, fs)],
            diag,
            vec![claim],
        ))
    }

    /// Unweighted against binned-variance weighted fits under heteroscedastic
    /// noise. `bins` defaults to `floor(sqrt(n))`.
    pub fn run_hetero_recovery(&self, g: &Generator, reps: usize, bins: Option<usize>) -> Result<SimReport> {
        let GeneratorKind::HeteroLinear { beta, .. } = g.kind else {
            return Err(Error::InvalidConfig("hetero-recovery needs a hetero_linear generator".into()));
        };
        require_reps(reps, 1)?;
        let bins = bins.unwrap_or_else(|| default_bins(g.n));
        let ln = lane("hetero-recovery", 0);
        let draws = self.schedule.map(reps, |r| {
            let mut rng = replicate_rng(g.seed, ln, r);
            let mut fit = || -> Result<(f64, f64)> {
                let d = g.hetero_linear(&mut rng)?;
                let design = DesignEmbedding::from_embeddings(vec![d.predictor], d.response)?;
                let ols = fit_ql(&design)?;
                let s2 = estimate_sigma2(&ols, &design, bins)?;
                let w = fit_weighted(&design, &s2)?;
                Ok((ols.beta[0], w.beta[0]))
            };
            fit().unwrap_or((f64::NAN, f64::NAN))
        });
        let ql = Series::new("beta_ql", Some(beta), draws.iter().map(|d| d.0).collect());
        let wt = Series::new("beta_weighted", Some(beta), draws.iter().map(|d| d.1).collect());
        let ratio = wt.summary.mse / ql.summary.mse;
        let mut diag = BTreeMap::new();
        diag.insert("mse_ql".into(), ql.summary.mse);
        diag.insert("mse_weighted".into(), wt.summary.mse);
        diag.insert("mse_ratio".into(), ratio);
        diag.insert("bins".into(), bins as f64);
        let claim = ClaimCheck::new(
            "mse(beta_weighted) / mse(beta_ql)",
            ratio,
            Threshold::AtMost {
                value: self.thresholds.hetero_mse_ratio,
            },
        );
        Ok(self.report(
            "hetero-recovery",
            json!({"generator": g, "reps": reps, "bins": bins}),
            reps,
            vec![ql, wt],
            diag,
            vec![claim],
        ))
    }
}
