//! Quadrature realisations of `f_S * G_σ`.
//!
//! The smoothed density is replaced by an equal-weight Gaussian mixture
//! centred at `Vφ_j` for frozen Dirichlet draws `φ_j`. All evaluation is done
//! in the log domain so far tails compare correctly instead of underflowing.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Simplex, SimplexFrame};
use crate::rng::{CounterStream, Stream};
use crate::sampler::NoisyModel;

/// Frozen Dirichlet weights, `quad x (K+1)` row-major.
#[derive(Clone, Debug)]
pub struct QuadratureSet {
    k: usize,
    pub quad: usize,
    pub seed: u64,
    weights: Vec<f64>,
}

impl QuadratureSet {
    pub fn new(k: usize, quad: usize, seed: u64) -> Self {
        assert!(quad >= 1);
        let cs = CounterStream::new(seed, k + 1);
        let mut weights = vec![0.0; quad * (k + 1)];
        for (j, w) in weights.chunks_exact_mut(k + 1).enumerate() {
            cs.item(j as u64).dirichlet_uniform(w);
        }
        Self {
            k,
            quad,
            seed,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.k + 1)
    }

    /// Mixture centres `Vφ_j` for the given simplex.
    pub fn centers(&self, s: &Simplex) -> Vec<f64> {
        assert_eq!(s.dim(), self.k);
        let mut out = vec![0.0; self.quad * self.k];
        for (w, c) in self.weights().zip(out.chunks_exact_mut(self.k)) {
            s.point_from_weights(w, c);
        }
        out
    }
}

/// Equal-weight isotropic Gaussian mixture.
#[derive(Clone, Debug)]
pub struct Mixture {
    k: usize,
    centers: Vec<f64>,
    sigma: f64,
    inv_two_var: f64,
    log_norm: f64,
}

impl Mixture {
    pub fn new(model: &NoisyModel, quad: &QuadratureSet) -> Result<Self> {
        if model.sigma == 0.0 {
            return Err(Error::UnsupportedNoiseless);
        }
        if model.dim() != quad.dim() {
            return Err(Error::DimMismatch {
                expected: quad.dim(),
                actual: model.dim(),
            });
        }
        let k = model.dim();
        let s2 = model.sigma * model.sigma;
        Ok(Self {
            k,
            centers: quad.centers(&model.simplex),
            sigma: model.sigma,
            inv_two_var: 0.5 / s2,
            log_norm: -(quad.quad as f64).ln() - 0.5 * k as f64 * (2.0 * PI * s2).ln(),
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        // Streaming log-sum-exp: one exponential per centre.
        let mut top = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for c in self.centers.chunks_exact(self.k) {
            let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            let e = -d2 * self.inv_two_var;
            if e > top {
                acc = acc * (top - e).exp() + 1.0;
                top = e;
            } else {
                acc += (e - top).exp();
            }
        }
        self.log_norm + top + acc.ln()
    }

    /// Draw one point: a uniformly chosen centre plus `σ g`.
    pub fn sample_into(&self, s: &mut Stream, out: &mut [f64]) {
        let j = s.below(self.len() as u64) as usize;
        s.fill_normal(out);
        for (o, c) in out.iter_mut().zip(&self.centers[j * self.k..(j + 1) * self.k]) {
            *o = c + self.sigma * *o;
        }
    }
}

/// Pointwise density of one hypothesis: a quadrature mixture for `σ > 0`,
/// the exact uniform density for `σ = 0`.
#[derive(Clone, Debug)]
pub enum HypothesisDensity {
    Smoothed(Mixture),
    Uniform {
        simplex: Simplex,
        frame: SimplexFrame,
        log_inv_vol: f64,
    },
}

impl HypothesisDensity {
    pub fn new(model: &NoisyModel, quad: &QuadratureSet) -> Result<Self> {
        if model.sigma > 0.0 {
            return Ok(Self::Smoothed(Mixture::new(model, quad)?));
        }
        let frame = model.simplex.frame()?;
        Ok(Self::Uniform {
            simplex: model.simplex.clone(),
            frame,
            log_inv_vol: -model.simplex.volume().ln(),
        })
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            Self::Smoothed(m) => m.log_density(x),
            Self::Uniform {
                frame, log_inv_vol, ..
            } => {
                if frame.contains(x) {
                    *log_inv_vol
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample_into(&self, s: &mut Stream, w: &mut [f64], out: &mut [f64]) {
        match self {
            Self::Smoothed(m) => m.sample_into(s, out),
            Self::Uniform { simplex, .. } => {
                s.dirichlet_uniform(w);
                simplex.point_from_weights(w, out);
            }
        }
    }
}

/// `(1/quad) Σ_j N(x; Vφ_j, σ²I)`.
pub fn noisy_density(model: &NoisyModel, x: &[f64], quad: &QuadratureSet) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(Error::DimMismatch {
            expected: model.dim(),
            actual: x.len(),
        });
    }
    Ok(Mixture::new(model, quad)?.log_density(x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(a: f64, b: f64) -> Simplex {
        Simplex::new(vec![vec![a], vec![b]]).unwrap()
    }

    #[test]
    fn noiseless_density_is_unsupported() {
        let m = NoisyModel::new(Simplex::standard(2), 0.0).unwrap();
        let q = QuadratureSet::new(2, 10, 1);
        assert!(matches!(
            noisy_density(&m, &[0.2, 0.2], &q),
            Err(Error::UnsupportedNoiseless)
        ));
    }

    #[test]
    fn huge_sigma_collapses_to_a_gaussian() {
        let s = Simplex::standard(2);
        let sigma = 50.0;
        let m = NoisyModel::new(s.clone(), sigma).unwrap();
        let q = QuadratureSet::new(2, 500, 4);
        let c = s.centroid();
        let got = noisy_density(&m, &c, &q).unwrap();
        let want = 1.0 / (2.0 * PI * sigma * sigma);
        assert!((got / want - 1.0).abs() < 0.01);
    }

    #[test]
    fn far_tail_log_density_is_finite() {
        let m = NoisyModel::new(interval(0.0, 1.0), 0.01).unwrap();
        let q = QuadratureSet::new(1, 100, 2);
        let mix = Mixture::new(&m, &q).unwrap();
        let l = mix.log_density(&[5.0]);
        assert!(l.is_finite() && l < -1e4);
    }
}
