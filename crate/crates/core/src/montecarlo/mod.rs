//! Seeded simulation experiments with machine-readable reports.
//!
//! Every experiment is a pure function of its configuration and master seed.
//! Replicate `r` draws from its own ChaCha stream, so the output is the same
//! under [`Schedule::Sequential`] and [`Schedule::Parallel`].

mod experiments;
pub mod generator;
pub mod schedule;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use experiments::{Harness, EXPERIMENTS};
pub use generator::{Generator, GeneratorKind};
pub use schedule::Schedule;

use crate::error::{Error, Result};

/// Summary statistics over the finite entries of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub bias: f64,
    pub mse: f64,
    pub median: f64,
}

impl Summary {
    /// `sd` uses divisor `count - 1`. `bias` and `mse` are taken against
    /// `target`, or against zero when there is none.
    pub fn compute(values: &[f64], target: Option<f64>) -> Summary {
        let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let count = finite.len();
        let t = target.unwrap_or(0.0);
        if count == 0 {
            return Summary {
                count,
                mean: f64::NAN,
                sd: f64::NAN,
                bias: f64::NAN,
                mse: f64::NAN,
                median: f64::NAN,
            };
        }
        let c = count as f64;
        let mean = finite.iter().sum::<f64>() / c;
        let sd = if count > 1 {
            (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (c - 1.0)).sqrt()
        } else {
            0.0
        };
        let mse = finite.iter().map(|v| (v - t).powi(2)).sum::<f64>() / c;
        finite.sort_by(f64::total_cmp);
        let median = if count % 2 == 1 {
            finite[count / 2]
        } else {
            0.5 * (finite[count / 2 - 1] + finite[count / 2])
        };
        Summary {
            count,
            mean,
            sd,
            bias: mean - t,
            mse,
            median,
        }
    }
}

/// One column of per-replicate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<f64>,
    pub summary: Summary,
}

impl Series {
    pub fn new(label: impl Into<String>, target: Option<f64>, estimates: Vec<f64>) -> Series {
        let summary = Summary::compute(&estimates, target);
        Series {
            label: label.into(),
            target,
            estimates,
            summary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    /// observed <= value
    AtMost { value: f64 },
    /// observed < value
    Below { value: f64 },
    /// lo <= observed <= hi
    Within { lo: f64, hi: f64 },
}

impl Threshold {
    pub fn holds(&self, observed: f64) -> bool {
        match *self {
            Threshold::AtMost { value } => observed <= value,
            Threshold::Below { value } => observed < value,
            Threshold::Within { lo, hi } => lo <= observed && observed <= hi,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Threshold::AtMost { value } => write!(f, "<= {value}"),
            Threshold::Below { value } => write!(f, "< {value}"),
            Threshold::Within { lo, hi } => write!(f, "in [{lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheck {
    pub claim: String,
    pub observed: f64,
    pub threshold: Threshold,
    pub pass: bool,
    /// Set when the check could not be evaluated (a degenerate configuration).
    /// Skipped checks count as passing.
    pub skipped: bool,
}

impl ClaimCheck {
    pub fn new(claim: impl Into<String>, observed: f64, threshold: Threshold) -> ClaimCheck {
        ClaimCheck {
            claim: claim.into(),
            observed,
            threshold,
            pass: threshold.holds(observed),
            skipped: false,
        }
    }

    pub fn skipped(claim: impl Into<String>, threshold: Threshold) -> ClaimCheck {
        ClaimCheck {
            claim: claim.into(),
            observed: f64::NAN,
            threshold,
            pass: true,
            skipped: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub experiment: String,
    pub config: Value,
    pub replicates: usize,
    pub series: Vec<Series>,
    pub diagnostics: BTreeMap<String, f64>,
    pub claim_checks: Vec<ClaimCheck>,
}

impl SimReport {
    pub fn all_pass(&self) -> bool {
        self.claim_checks.iter().all(|c| c.pass)
    }

    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }

    /// Canonical JSON. Per-replicate arrays are dropped unless asked for.
    pub fn to_json(&self, include_replicates: bool) -> String {
        let mut out = self.clone();
        if !include_replicates {
            for s in &mut out.series {
                s.estimates.clear();
            }
        }
        crate::report::to_canonical_json(&out).expect("report serializes")
    }

    /// Flat CSV: a `replicate` column plus one column per series. Series of
    /// different lengths leave trailing cells empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replicate");
        for s in &self.series {
            out.push(',');
            out.push_str(&s.label.replace(',', ";"));
        }
        out.push('\n');
        let rows = self.series.iter().map(|s| s.estimates.len()).max().unwrap_or(0);
        for r in 0..rows {
            out.push_str(&r.to_string());
            for s in &self.series {
                out.push(',');
                if let Some(v) = s.estimates.get(r) {
                    if v.is_finite() {
                        out.push_str(&format!("{v:.16e}"));
                    } else {
                        out.push_str("NaN");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Claim thresholds. Echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Largest admissible |mean(rho_hat) - target|.
    pub unbiasedness_tol: f64,
    /// KS distance must fall strictly below this.
    pub ks_max: f64,
    /// Relative tolerance around the expected sd ratio.
    pub rate_tolerance: f64,
    /// Weighted mse must not exceed this multiple of the unweighted mse.
    pub hetero_mse_ratio: f64,
    /// First-stage F below which an instrument counts as weak.
    pub weak_f: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            unbiasedness_tol: 0.01,
            ks_max: 0.02,
            rate_tolerance: 0.15,
            hetero_mse_ratio: 1.05,
            weak_f: 10.0,
        }
    }
}

/// Settings for [`simulate`]. Absent fields take experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub eps_grid: Option<Vec<f64>>,
    pub generator: Option<GeneratorKind>,
    pub bins: Option<usize>,
    pub thresholds: Thresholds,
}

/// Runs a named experiment.
pub fn simulate(name: &str, cfg: &SimConfig, schedule: Schedule) -> Result<SimReport> {
    let h = Harness {
        thresholds: cfg.thresholds.clone(),
        schedule,
    };
    let seed = cfg.seed;
    let kind = |default: GeneratorKind| cfg.generator.unwrap_or(default);
    match name {
        "unbiasedness" => {
            let g = Generator::new(kind(GeneratorKind::GaussianCopula { rho: 0.5 }), cfg.n.unwrap_or(30), seed)?;
            h.run_unbiasedness(&g, cfg.reps.unwrap_or(20_000))
        }
        "null-calibration" => h.run_null_calibration(cfg.n.unwrap_or(20), cfg.reps.unwrap_or(10_000), seed),
        "rate-check" => {
            let grid = cfg.n_grid.clone().unwrap_or_else(|| vec![25, 100, 400]);
            let n0 = grid.first().copied().unwrap_or(25);
            let g = Generator::new(kind(GeneratorKind::GaussianCopula { rho: 0.5 }), n0, seed)?;
            h.run_rate_check(&g, &grid, cfg.reps.unwrap_or(4_000))
        }
        "breakdown" => {
            let g = Generator::new(
                kind(GeneratorKind::ContaminatedGaussian {
                    rho: 0.5,
                    eps: 0.0,
                    magnitude: 1e6,
                }),
                cfg.n.unwrap_or(100),
                seed,
            )?;
            let eps = cfg.eps_grid.clone().unwrap_or_else(|| vec![0.1, 0.2, 0.3, 0.45]);
            h.run_breakdown(&g, &eps, cfg.reps.unwrap_or(2_000))
        }
        "weak-iv" => {
            let g = Generator::new(
                kind(GeneratorKind::WeakIv {
                    pi_strength: 0.15,
                    endogeneity: 0.5,
                }),
                cfg.n.unwrap_or(200),
                seed,
            )?;
            h.run_weak_iv(&g, cfg.reps.unwrap_or(2_000))
        }
        "hetero-recovery" => {
            let g = Generator::new(
                kind(GeneratorKind::HeteroLinear {
                    beta: 0.5,
                    noise_exponent: 1.0,
                }),
                cfg.n.unwrap_or(200),
                seed,
            )?;
            h.run_hetero_recovery(&g, cfg.reps.unwrap_or(2_000), cfg.bins)
        }
        other => Err(Error::UnknownExperiment(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_basics() {
        let s = Summary::compute(&[1.0, 2.0, f64::NAN, 4.0], Some(2.0));
        assert_eq!(s.count, 3);
        assert!((s.mean - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.median, 2.0);
        assert!((s.mse - 5.0 / 3.0).abs() < 1e-15);
        assert!((s.bias - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn thresholds() {
        assert!(Threshold::Below { value: 1.0 }.holds(0.5));
        assert!(!Threshold::Below { value: 1.0 }.holds(1.0));
        assert!(Threshold::AtMost { value: 1.0 }.holds(1.0));
        assert!(Threshold::Within { lo: 1.7, hi: 2.3 }.holds(2.0));
        assert!(!Threshold::Within { lo: 1.7, hi: 2.3 }.holds(f64::NAN));
    }

    #[test]
    fn unknown_experiment() {
        let e = simulate("nope", &SimConfig::default(), Schedule::Sequential).unwrap_err();
        assert_eq!(e, Error::UnknownExperiment("nope".into()));
    }

    #[test]
    fn config_parses_partial_json() {
        let cfg: SimConfig = serde_json::from_str(
            r#"{"seed": 3, "reps": 50, "generator": {"kind": "gaussian_copula", "rho": 0.2},
                "thresholds": {"ks_max": 0.05}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.generator, Some(GeneratorKind::GaussianCopula { rho: 0.2 }));
        assert_eq!(cfg.thresholds.ks_max, 0.05);
        assert_eq!(cfg.thresholds.weak_f, 10.0);
    }
}
