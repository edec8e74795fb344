//! Seeded data generators for the simulation experiments.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rank_kernel::{embed, TiePolicy};

/// Scale of the heteroscedastic noise, `sigma_n = SCALE * (FLOOR + |x_n|)^gamma`.
pub const HETERO_NOISE_SCALE: f64 = 0.5;
pub const HETERO_NOISE_FLOOR: f64 = 0.1;
/// Structural coefficient and noise scale of the weak-instrument model.
pub const WEAK_IV_BETA: f64 = 1.0;
pub const WEAK_IV_NOISE_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Bivariate normal with Pearson correlation `rho`.
    GaussianCopula { rho: f64 },
    /// Gaussian copula rounded onto `levels` equiprobable values per margin.
    DiscretizedCopula { rho: f64, levels: usize },
    /// Gaussian copula with a fraction `eps` of points replaced by discordant
    /// outliers around `(magnitude, -magnitude)`.
    ContaminatedGaussian { rho: f64, eps: f64, magnitude: f64 },
    /// `y = beta x + sigma(x) e` with the predictor and the model both in
    /// embedding space; `sigma` grows as `|x|^noise_exponent`.
    HeteroLinear { beta: f64, noise_exponent: f64 },
    /// Endogenous regressor `x* = pi z + v`, response linear in the
    /// regressor embedding with error correlated with `v`.
    WeakIv { pi_strength: f64, endogeneity: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub n: usize,
    pub seed: u64,
}

/// Clean pair together with its contaminated copy.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminatedDraw {
    pub clean_x: Vec<f64>,
    pub clean_y: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub contaminated: Vec<usize>,
}

/// Single-predictor linear model already expressed in embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDraw {
    pub predictor: Vec<f64>,
    pub response: Vec<f64>,
    pub sigma: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvDraw {
    pub regressor: Vec<f64>,
    pub instrument: Vec<f64>,
    pub response: Vec<f64>,
    pub beta: f64,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&v) {
        return Err(Error::InvalidConfig(format!("{name} = {v} must lie in [-1, 1]")));
    }
    Ok(())
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidConfig(format!("{name} must be finite")));
    }
    Ok(())
}

impl GeneratorKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GeneratorKind::GaussianCopula { rho } => check_unit("rho", rho),
            GeneratorKind::DiscretizedCopula { rho, levels } => {
                check_unit("rho", rho)?;
                if levels < 2 {
                    return Err(Error::InvalidConfig(format!("levels = {levels} must be >= 2")));
                }
                Ok(())
            }
            GeneratorKind::ContaminatedGaussian {
                rho,
                eps,
                magnitude,
            } => {
                check_unit("rho", rho)?;
                check_eps(eps)?;
                check_finite("magnitude", magnitude)
            }
            GeneratorKind::HeteroLinear {
                beta,
                noise_exponent,
            } => {
                check_finite("beta", beta)?;
                check_finite("noise_exponent", noise_exponent)
            }
            GeneratorKind::WeakIv {
                pi_strength,
                endogeneity,
            } => {
                check_finite("pi_strength", pi_strength)?;
                check_unit("endogeneity", endogeneity)
            }
        }
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::InvalidConfig(format!(
            "contamination fraction {eps} must lie in [0, 0.5]"
        )));
    }
    Ok(())
}

fn normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R, n: usize, rho: f64) -> (Vec<f64>, Vec<f64>) {
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        x.push(a);
        y.push(rho * a + s * b);
    }
    (x, y)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn discretize(v: f64, levels: usize) -> f64 {
    ((std_normal_cdf(v) * levels as f64).floor() as usize).min(levels - 1) as f64
}

impl Generator {
    pub fn new(kind: GeneratorKind, n: usize, seed: u64) -> Result<Self> {
        kind.validate()?;
        if n < 3 {
            return Err(Error::InvalidConfig(format!("sample size {n} must be >= 3")));
        }
        Ok(Generator { kind, n, seed })
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Generator::new(self.kind, n, self.seed)
    }

    /// Bivariate sample for the copula generators. For the contaminated
    /// generator this is the contaminated sample.
    pub fn pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.kind {
            GeneratorKind::GaussianCopula { rho } => Ok(gaussian_pair(rng, self.n, rho)),
            GeneratorKind::DiscretizedCopula { rho, levels } => {
                let (x, y) = gaussian_pair(rng, self.n, rho);
                Ok((
                    x.into_iter().map(|v| discretize(v, levels)).collect(),
                    y.into_iter().map(|v| discretize(v, levels)).collect(),
                ))
            }
            GeneratorKind::ContaminatedGaussian { .. } => {
                let d = self.contaminated(rng)?;
                Ok((d.x, d.y))
            }
            _ => Err(Error::InvalidConfig(format!(
                "{:?} does not produce a bivariate sample",
                self.kind
            ))),
        }
    }

    /// Clean Gaussian pair plus a copy with `round(eps n)` observations
    /// replaced by outliers `(M (1 + u/10), -M (1 + v/10))`, `u, v ~ U(0, 1)`.
    pub fn contaminated<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ContaminatedDraw> {
        let GeneratorKind::ContaminatedGaussian {
            rho,
            eps,
            magnitude,
        } = self.kind
        else {
            return Err(Error::InvalidConfig("expected a contaminated generator".into()));
        };
        let (clean_x, clean_y) = gaussian_pair(rng, self.n, rho);
        Ok(contaminate(rng, clean_x, clean_y, eps, magnitude))
    }

    pub fn hetero_linear<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LinearDraw> {
        let GeneratorKind::HeteroLinear {
            beta,
            noise_exponent,
        } = self.kind
        else {
            return Err(Error::InvalidConfig("expected a hetero_linear generator".into()));
        };
        let raw = normals(rng, self.n);
        let predictor = embed(&raw, TiePolicy::KemenyZero)?.values;
        let sigma: Vec<f64> = predictor
            .iter()
            .map(|x| HETERO_NOISE_SCALE * (HETERO_NOISE_FLOOR + x.abs()).powf(noise_exponent))
            .collect();
        let response = predictor
            .iter()
            .zip(&sigma)
            .map(|(x, s)| beta * x + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(LinearDraw {
            predictor,
            response,
            sigma,
            beta,
        })
    }

    pub fn weak_iv<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<IvDraw> {
        let GeneratorKind::WeakIv {
            pi_strength,
            endogeneity,
        } = self.kind
        else {
            return Err(Error::InvalidConfig("expected a weak_iv generator".into()));
        };
        let n = self.n;
        let z = normals(rng, n);
        let v = normals(rng, n);
        let w = normals(rng, n);
        let latent: Vec<f64> = z.iter().zip(&v).map(|(z, v)| pi_strength * z + v).collect();
        let regressor = embed(&latent, TiePolicy::KemenyZero)?.values;
        let instrument = embed(&z, TiePolicy::KemenyZero)?.values;
        let s = (1.0 - endogeneity * endogeneity).sqrt();
        let response = (0..n)
            .map(|i| {
                let e = endogeneity * v[i] + s * w[i];
                WEAK_IV_BETA * regressor[i] + WEAK_IV_NOISE_SCALE * e
            })
            .collect();
        Ok(IvDraw {
            regressor,
            instrument,
            response,
            beta: WEAK_IV_BETA,
        })
    }
}

/// Replaces `round(eps n)` randomly chosen observations by discordant outliers.
pub fn contaminate<R: Rng + ?Sized>(
    rng: &mut R,
    clean_x: Vec<f64>,
    clean_y: Vec<f64>,
    eps: f64,
    magnitude: f64,
) -> ContaminatedDraw {
    let n = clean_x.len();
    let m = ((eps * n as f64).round() as usize).min(n);
    let mut contaminated = rand::seq::index::sample(rng, n, m).into_vec();
    contaminated.sort_unstable();
    let mut x = clean_x.clone();
    let mut y = clean_y.clone();
    for &i in &contaminated {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        x[i] = magnitude * (1.0 + 0.1 * u);
        y[i] = -magnitude * (1.0 + 0.1 * v);
    }
    ContaminatedDraw {
        clean_x,
        clean_y,
        x,
        y,
        contaminated,
    }
}
