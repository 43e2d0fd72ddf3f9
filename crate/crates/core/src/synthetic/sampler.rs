use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation radius of the truncated Gaussian design.
const TRUNCATION: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SamplerKind {
    /// i.i.d. `Uniform(-sqrt 3, sqrt 3)` coordinates.
    UniformScaled,
    /// Standard normal truncated to `[-6, 6]`, rescaled to unit second moment.
    GaussianTruncatedScaled,
    /// Equicorrelated standard normals with correlation `rho` in `[0, 1)`.
    CorrelatedGaussian { rho: f64 },
}

impl SamplerKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" | "uniform_scaled" => Ok(SamplerKind::UniformScaled),
            "gaussian" | "gaussian_truncated_scaled" => Ok(SamplerKind::GaussianTruncatedScaled),
            other => {
                let rho = other
                    .strip_prefix("correlated:")
                    .and_then(|r| r.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidParams(format!("unknown sampler `{other}`")))?;
                Ok(SamplerKind::CorrelatedGaussian { rho })
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            SamplerKind::UniformScaled => "uniform".into(),
            SamplerKind::GaussianTruncatedScaled => "gaussian".into(),
            SamplerKind::CorrelatedGaussian { rho } => format!("correlated:{rho}"),
        }
    }
}

/// Second moment of a standard normal conditioned on `|Z| <= c`.
fn truncated_second_moment(c: f64) -> f64 {
    let pdf = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mass = statrs::function::erf::erf(c / std::f64::consts::SQRT_2);
    1.0 - 2.0 * c * pdf / mass
}

/// Draws i.i.d. feature rows with unit per-coordinate second moment.
#[derive(Clone, Debug)]
pub struct FeatureSampler {
    kind: SamplerKind,
    d: usize,
    rng: ChaCha8Rng,
}

impl FeatureSampler {
    pub fn new(kind: SamplerKind, d: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParams(
                "feature dimension must be >= 1".into(),
            ));
        }
        if let SamplerKind::CorrelatedGaussian { rho } = kind {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::InvalidParams(format!(
                    "equicorrelation must lie in [0, 1), got {rho}"
                )));
            }
        }
        Ok(Self {
            kind,
            d,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn uniform(d: usize, seed: u64) -> Self {
        Self::new(SamplerKind::UniformScaled, d, seed).expect("d >= 1")
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Draw an `n x d` design matrix.
    pub fn sample(&mut self, n: usize) -> Array2<f64> {
        let d = self.d;
        match self.kind {
            SamplerKind::UniformScaled => {
                let a = 3f64.sqrt();
                Array2::from_shape_fn((n, d), |_| self.rng.random_range(-a..a))
            }
            SamplerKind::GaussianTruncatedScaled => {
                let scale = 1.0 / truncated_second_moment(TRUNCATION).sqrt();
                Array2::from_shape_fn((n, d), |_| loop {
                    let z: f64 = self.rng.sample(StandardNormal);
                    if z.abs() <= TRUNCATION {
                        break z * scale;
                    }
                })
            }
            SamplerKind::CorrelatedGaussian { rho } => {
                let (shared, own) = (rho.sqrt(), (1.0 - rho).sqrt());
                let mut x = Array2::zeros((n, d));
                for mut row in x.rows_mut() {
                    let z0: f64 = self.rng.sample(StandardNormal);
                    for v in row.iter_mut() {
                        let z: f64 = self.rng.sample(StandardNormal);
                        *v = shared * z0 + own * z;
                    }
                }
                x
            }
        }
    }
}
