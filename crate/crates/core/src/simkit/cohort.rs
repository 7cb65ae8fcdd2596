use serde::{Deserialize, Serialize};

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, unit_f64};

pub const NOISE_LOW: f64 = 0.0;
pub const NOISE_HIGH: f64 = 100.0;

const Z1_STREAM: u64 = 1 << 32;
const Z2_STREAM: u64 = (1 << 32) + 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleTarget {
    pub mean: f64,
    pub sd: f64,
}

/// Mixing coefficients for `X2 = X1 + b*Z1`, `X3 = X2 + c*Z2`, and the affine
/// targets the three causal genes are mapped to.
///
/// `rescale_targets = None` keeps the raw mixed variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationParams {
    pub b: f64,
    pub c: f64,
    pub rescale_targets: Option<[RescaleTarget; 3]>,
}

impl Default for CorrelationParams {
    fn default() -> Self {
        Self { b: 0.8, c: 0.75, rescale_targets: Some(Self::DEFAULT_TARGETS) }
    }
}

impl CorrelationParams {
    /// X1 keeps the uniform scale (mapping it onto a mean of 43.9 with sd 26.4
    /// would push the lower end below zero); X2 and X3 move to the reference
    /// expression levels.
    pub const DEFAULT_TARGETS: [RescaleTarget; 3] = [
        RescaleTarget { mean: 50.0, sd: 28.867_513_459_481_287 },
        RescaleTarget { mean: 166.3, sd: 67.2 },
        RescaleTarget { mean: 278.3, sd: 92.4 },
    ];

    pub fn unscaled() -> Self {
        Self { rescale_targets: None, ..Self::default() }
    }

    /// Population correlations (X1,X2), (X1,X3), (X2,X3).
    pub fn theoretical_correlations(&self) -> [f64; 3] {
        let b2 = self.b * self.b;
        let c2 = self.c * self.c;
        [1.0 / (1.0 + b2).sqrt(), 1.0 / (1.0 + b2 + c2).sqrt(), (1.0 + b2).sqrt() / (1.0 + b2 + c2).sqrt()]
    }

    /// Population mean and sd of the raw mixtures X1, X2, X3.
    fn raw_moments(&self) -> [(f64, f64); 3] {
        let mu = (NOISE_LOW + NOISE_HIGH) / 2.0;
        let sd = (NOISE_HIGH - NOISE_LOW) / 12f64.sqrt();
        let b2 = self.b * self.b;
        let c2 = self.c * self.c;
        [
            (mu, sd),
            (mu * (1.0 + self.b), sd * (1.0 + b2).sqrt()),
            (mu * (1.0 + self.b + self.c), sd * (1.0 + b2 + c2).sqrt()),
        ]
    }

    /// (scale, shift) per causal gene so that `scale * raw + shift` hits the target.
    fn affine_maps(&self) -> Result<[(f64, f64); 3]> {
        let Some(targets) = self.rescale_targets else {
            return Ok([(1.0, 0.0); 3]);
        };
        let raw = self.raw_moments();
        let mut maps = [(1.0, 0.0); 3];
        for (k, (t, (rm, rs))) in targets.iter().zip(raw).enumerate() {
            if !t.mean.is_finite() || !t.sd.is_finite() {
                return Err(Error::Parameter(format!("rescale target for X{} is not finite", k + 1)));
            }
            if t.sd <= 0.0 {
                return Err(Error::Parameter(format!("rescale sd for X{} must be positive", k + 1)));
            }
            let scale = t.sd / rs;
            let shift = t.mean - scale * rm;
            // the smallest raw value X_k can take is NOISE_LOW times the mixing weights
            let weights = [1.0, 1.0 + self.b, 1.0 + self.b + self.c][k];
            let lowest = scale * NOISE_LOW * weights + shift;
            if lowest < 0.0 {
                return Err(Error::Parameter(format!(
                    "rescale target for X{} maps part of the support below zero",
                    k + 1
                )));
            }
            maps[k] = (scale, shift);
        }
        Ok(maps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) || !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Parameter(format!(
                "mixing coefficients must be positive and finite, got b={} c={}",
                self.b, self.c
            )));
        }
        self.affine_maps().map(|_| ())
    }
}

fn uniform_column(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream);
    (0..n).map(|_| NOISE_LOW + (NOISE_HIGH - NOISE_LOW) * unit_f64(&mut rng)).collect()
}

/// Generates an `n` by `p` cohort. Column `j` (0-based) of the noise block and
/// the X1/Z1/Z2 drivers each read their own random stream, so growing `p`
/// leaves existing columns untouched.
pub fn gen_cohort(n: usize, p: usize, params: &CorrelationParams, seed: u64) -> Result<ExpressionMatrix> {
    if p < 3 {
        return Err(Error::Dimension(format!("need at least 3 genes, got {p}")));
    }
    if n < 2 {
        return Err(Error::Dimension(format!("need at least 2 patients, got {n}")));
    }
    params.validate()?;
    let maps = params.affine_maps()?;

    let x1 = uniform_column(seed, 0, n);
    let z1 = uniform_column(seed, Z1_STREAM, n);
    let z2 = uniform_column(seed, Z2_STREAM, n);
    let x2: Vec<f64> = x1.iter().zip(&z1).map(|(a, z)| a + params.b * z).collect();
    let x3: Vec<f64> = x2.iter().zip(&z2).map(|(a, z)| a + params.c * z).collect();

    let mut columns = Vec::with_capacity(p);
    for (raw, (scale, shift)) in [x1, x2, x3].into_iter().zip(maps) {
        columns.push(raw.into_iter().map(|v| (scale * v + shift).max(0.0)).collect());
    }
    for j in 3..p {
        columns.push(uniform_column(seed, j as u64, n));
    }
    let ids = (1..=p).map(|j| format!("X{j}")).collect();
    ExpressionMatrix::from_columns(ids, columns)
}
