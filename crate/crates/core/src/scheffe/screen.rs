//! Cheap pre-selection of hypotheses before the tournament.
//!
//! Three filters of increasing cost, all computed on the localization half
//! of the data: a moment discrepancy (mean and covariance in closed form), a
//! histogram TV against synthetic samples, and the average log-likelihood
//! under a quadrature density. Synthetic draws and quadrature weights are
//! shared by all hypotheses so that scores differ only through the
//! hypotheses themselves.

use std::cmp::Ordering;

use crate::geometry::Simplex;
use crate::rng::{derive_seed, CounterStream};
use crate::sampler::{NoisyModel, SampleSet};
use crate::scheffe::density::{HypothesisDensity, QuadratureSet};

pub struct Screen {
    k: usize,
    mean: Vec<f64>,
    /// Row-major `K x K` sample covariance.
    cov: Vec<f64>,
    bins: usize,
    lo: Vec<f64>,
    width: Vec<f64>,
    data_hist: Vec<f64>,
    /// Shared draws: `L x (K+1)` weights and `L x K` normals.
    weights: Vec<f64>,
    normals: Vec<f64>,
    data: SampleSet,
    quad: QuadratureSet,
}

impl Screen {
    pub fn new(data: &SampleSet, synthetic: usize, quad: usize, seed: u64) -> Self {
        let k = data.dim();
        let n = data.len() as f64;
        let mut mean = vec![0.0; k];
        for y in data.iter() {
            for (m, v) in mean.iter_mut().zip(y) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut cov = vec![0.0; k * k];
        for y in data.iter() {
            for r in 0..k {
                for c in 0..k {
                    cov[r * k + c] += (y[r] - mean[r]) * (y[c] - mean[c]);
                }
            }
        }
        cov.iter_mut().for_each(|c| *c /= (n - 1.0).max(1.0));

        let bins = ((n / 8.0).powf(1.0 / k as f64).floor() as usize).clamp(4, 64);
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        for y in data.iter() {
            for j in 0..k {
                lo[j] = lo[j].min(y[j]);
                hi[j] = hi[j].max(y[j]);
            }
        }
        let width: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| ((h - l) * (1.0 + 1e-9)).max(1e-12) / bins as f64)
            .collect();

        let cs = CounterStream::new(derive_seed(seed, "screen", &[]), (k + 1) + 2 * k.div_ceil(2));
        let mut weights = vec![0.0; synthetic * (k + 1)];
        let mut normals = vec![0.0; synthetic * k];
        for (t, (w, g)) in weights
            .chunks_exact_mut(k + 1)
            .zip(normals.chunks_exact_mut(k))
            .enumerate()
        {
            let mut s = cs.item(t as u64);
            s.dirichlet_uniform(w);
            s.fill_normal(g);
        }

        let mut screen = Self {
            k,
            mean,
            cov,
            bins,
            lo,
            width,
            data_hist: Vec::new(),
            weights,
            normals,
            data: data.clone(),
            quad: QuadratureSet::new(k, quad.max(1), derive_seed(seed, "screen.quad", &[])),
        };
        let mut hist = vec![0.0; screen.cells()];
        for y in data.iter() {
            hist[screen.cell(y)] += 1.0 / n;
        }
        screen.data_hist = hist;
        screen
    }

    fn cells(&self) -> usize {
        self.bins.pow(self.k as u32) + 1
    }

    /// Histogram cell of `x`; the last cell collects everything outside.
    fn cell(&self, x: &[f64]) -> usize {
        let mut idx = 0usize;
        for j in 0..self.k {
            let t = (x[j] - self.lo[j]) / self.width[j];
            if !(t >= 0.0) || t >= self.bins as f64 {
                return self.cells() - 1;
            }
            idx = idx * self.bins + t as usize;
        }
        idx
    }

    pub fn data_mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn data_cov(&self) -> &[f64] {
        &self.cov
    }

    /// `||c - μ̂||² + ||Cov_S + σ²I - Ĉ||_F`.
    pub fn moment_score(&self, m: &SimplexMoments, sigma: f64) -> f64 {
        let k = self.k;
        let dm: f64 = m.centroid.iter().zip(&self.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        let mut fro = 0.0;
        for r in 0..k {
            for c in 0..k {
                let mut v = m.cov[r * k + c] - self.cov[r * k + c];
                if r == c {
                    v += sigma * sigma;
                }
                fro += v * v;
            }
        }
        dm + fro.sqrt()
    }

    /// Histogram TV between the data and synthetic draws from `(s, σ)`.
    pub fn hist_tv(&self, s: &Simplex, sigma: f64, scratch: &mut Vec<f64>) -> f64 {
        let k = self.k;
        scratch.clear();
        scratch.resize(self.cells(), 0.0);
        let l = self.normals.len() / k;
        let inv = 1.0 / l as f64;
        let mut x = vec![0.0; k];
        for (w, g) in self.weights.chunks_exact(k + 1).zip(self.normals.chunks_exact(k)) {
            s.point_from_weights(w, &mut x);
            for (xi, gi) in x.iter_mut().zip(g) {
                *xi += sigma * gi;
            }
            scratch[self.cell(&x)] += inv;
        }
        0.5 * scratch
            .iter()
            .zip(&self.data_hist)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

impl Screen {
    /// Mean log-density of the data under `(s, σ)`; `-inf` when a noiseless
    /// hypothesis misses a data point.
    pub fn log_likelihood(&self, s: &Simplex, sigma: f64) -> f64 {
        let model = NoisyModel {
            simplex: s.clone(),
            sigma,
        };
        let Ok(d) = HypothesisDensity::new(&model, &self.quad) else {
            return f64::NEG_INFINITY;
        };
        let mut total = 0.0;
        for y in self.data.iter() {
            total += d.log_density(y);
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total / self.data.len() as f64
    }
}

/// Closed-form first and second moments of the uniform density on a simplex.
pub struct SimplexMoments {
    pub centroid: Vec<f64>,
    pub cov: Vec<f64>,
}

impl SimplexMoments {
    /// `Cov = Σ_i (v_i - c)(v_i - c)ᵀ / ((K+1)(K+2))`.
    pub fn of(s: &Simplex) -> Self {
        let k = s.dim();
        let c = s.centroid();
        let mut cov = vec![0.0; k * k];
        for v in s.vertices() {
            for r in 0..k {
                for q in 0..k {
                    cov[r * k + q] += (v[r] - c[r]) * (v[q] - c[q]);
                }
            }
        }
        let scale = 1.0 / ((k as f64 + 1.0) * (k as f64 + 2.0));
        cov.iter_mut().for_each(|x| *x *= scale);
        Self { centroid: c, cov }
    }
}

/// Indices of the `keep` smallest scores, ordered by (score, index).
pub fn smallest(scores: &[f64], keep: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let cmp = |a: &usize, b: &usize| -> Ordering { scores[*a].total_cmp(&scores[*b]).then(a.cmp(b)) };
    if keep < idx.len() {
        idx.select_nth_unstable_by(keep, cmp);
        idx.truncate(keep);
    }
    idx.sort_by(cmp);
    idx
}
