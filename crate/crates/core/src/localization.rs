//! Data-driven enclosing ball and noise-variance bound.
//!
//! With `2m` samples in file order, `D = (1/2m) Σ_i ||y_{2i} - y_{2i-1}||²`
//! estimates `tr Cov(Vφ) + Kσ²`. The ball is centred at the sample mean with
//! radius `8 √((K+1)(K+2) D)`, and `D/(K-2)` bounds `σ²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist2, Simplex};
use crate::sampler::SampleSet;

/// Which denominator turns `D` into the variance bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDenominator {
    /// `K - 2`.
    #[default]
    Statement,
    /// `K - 3`, the more conservative variant.
    Proof,
}

impl NoiseDenominator {
    fn value(self, k: usize) -> i64 {
        match self {
            Self::Statement => k as i64 - 2,
            Self::Proof => k as i64 - 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationBall {
    #[serde(rename = "K")]
    pub k: usize,
    pub p: Vec<f64>,
    #[serde(rename = "R")]
    pub radius: f64,
    /// `None` when the denominator is not positive.
    #[serde(rename = "R_n")]
    pub noise_bound: Option<f64>,
    #[serde(rename = "D")]
    pub d_stat: f64,
    pub m: usize,
}

impl LocalizationBall {
    /// Ball with explicit centre and radius; the noise fields are filled in
    /// from a supplied bound.
    pub fn from_parts(p: Vec<f64>, radius: f64, noise_bound: Option<f64>) -> Self {
        Self {
            k: p.len(),
            p,
            radius,
            noise_bound,
            d_stat: 0.0,
            m: 0,
        }
    }

    pub fn noise_bound(&self) -> Result<f64> {
        self.noise_bound.ok_or(Error::NoiseBoundUndefined {
            k: self.k,
            denominator: self.k as i64 - 2,
        })
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        dist2(x, &self.p).sqrt() <= self.radius * (1.0 + 1e-12)
    }

    pub fn contains_simplex(&self, s: &Simplex) -> bool {
        s.vertices().all(|v| self.contains_point(v))
    }
}

pub fn localize(samples: &SampleSet) -> Result<LocalizationBall> {
    localize_with(samples, NoiseDenominator::Statement)
}

pub fn localize_with(samples: &SampleSet, denom: NoiseDenominator) -> Result<LocalizationBall> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "localization needs at least 2 samples, got {n}"
        )));
    }
    let k = samples.dim();
    let m = n / 2;
    let mut p = vec![0.0; k];
    for y in samples.iter() {
        for (pi, yi) in p.iter_mut().zip(y) {
            *pi += yi;
        }
    }
    p.iter_mut().for_each(|x| *x /= n as f64);
    let pair_sq: Vec<f64> = (0..m)
        .map(|i| dist2(samples.point(2 * i + 1), samples.point(2 * i)))
        .collect();
    let d_stat = crate::metrics::pairwise_sum(&pair_sq) / (2 * m) as f64;
    let kf = k as f64;
    let radius = 8.0 * ((kf + 1.0) * (kf + 2.0) * d_stat).sqrt();
    let den = denom.value(k);
    let noise_bound = (den > 0).then(|| d_stat / den as f64);
    Ok(LocalizationBall {
        k,
        p,
        radius,
        noise_bound,
        d_stat,
        m,
    })
}

/// `ceil(1000 (K+1)(K+2) ln(6/δ))`, the required number of pairs `m`.
pub fn min_samples_localize(k: usize, delta: f64) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfidence(delta));
    }
    let kf = k as f64;
    Ok((1000.0 * (kf + 1.0) * (kf + 2.0) * (6.0 / delta).ln()).ceil() as u64)
}
