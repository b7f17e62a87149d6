//! Distances between simplex densities.
//!
//! For uniform densities `f_j = 1{S_j}/V_j` with overlap volume `I`, and
//! `V_1 ≤ V_2` without loss of generality, `|f_1 - f_2|` equals `1/V_1` on
//! `S_1 \ S_2`, `1/V_2` on `S_2 \ S_1` and `1/V_1 - 1/V_2` on the overlap, so
//!
//! ```text
//! ∫|f_1 - f_2| = (V_1 - I)/V_1 + (V_2 - I)/V_2 + I (1/V_1 - 1/V_2)
//!              = 2 (1 - I/V_2),
//! ```
//!
//! giving `TV = 1 - I / max(V_1, V_2)`. Squaring the same three pieces gives
//! the ℓ2 expression used by [`l2_uniform`]. `I` is estimated by sampling
//! the smaller simplex and counting hits in the other one.

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::error::{Error, Result};
use crate::geometry::Simplex;
use crate::rng::{derive_seed, Stream};
use crate::sampler::NoisyModel;
use crate::scheffe::density::{HypothesisDensity, QuadratureSet};

/// Default Monte-Carlo size for overlap estimates.
pub const DEFAULT_MC: usize = 100_000;
/// Log-ratio clamp, matching density ratios in `[1e-300, 1e300]`.
const LOG_RATIO_CLAMP: f64 = 690.775_527_898_213_7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexAssignment {
    /// `permutation[i]` is the vertex of the second simplex matched to vertex `i`.
    pub permutation: Vec<usize>,
    pub cost: f64,
}

/// Overlap estimate: volumes and `I` with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct Overlap {
    pub vol1: f64,
    pub vol2: f64,
    pub intersection: f64,
    pub intersection_se: f64,
}

fn check_pair(s1: &Simplex, s2: &Simplex) -> Result<()> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimMismatch {
            expected: s1.dim(),
            actual: s2.dim(),
        });
    }
    s1.check_nondegenerate()?;
    s2.check_nondegenerate()
}

fn check_mc(mc: usize) -> Result<()> {
    if mc < 1000 {
        return Err(Error::InvalidConfig(format!(
            "Monte-Carlo size must be at least 1000, got {mc}"
        )));
    }
    Ok(())
}

pub fn overlap(s1: &Simplex, s2: &Simplex, mc: usize, seed: u64) -> Result<Overlap> {
    check_pair(s1, s2)?;
    let (vol1, vol2) = (s1.volume(), s2.volume());
    let (small, big, v_small) = if vol1 <= vol2 {
        (s1, s2, vol1)
    } else {
        (s2, s1, vol2)
    };
    let frame = big.frame()?;
    let k = s1.dim();
    let mut rng = Stream::derived(seed, "overlap", &[]);
    let mut w = vec![0.0; k + 1];
    let mut x = vec![0.0; k];
    let mut hits = 0usize;
    for _ in 0..mc {
        rng.dirichlet_uniform(&mut w);
        small.point_from_weights(&w, &mut x);
        hits += usize::from(frame.contains(&x));
    }
    let f = hits as f64 / mc as f64;
    Ok(Overlap {
        vol1,
        vol2,
        intersection: v_small * f,
        intersection_se: v_small * (f * (1.0 - f) / mc as f64).sqrt(),
    })
}

pub fn tv_uniform(s1: &Simplex, s2: &Simplex, mc: usize, seed: u64) -> Result<DistanceEstimate> {
    check_mc(mc)?;
    let o = overlap(s1, s2, mc, seed)?;
    let vmax = o.vol1.max(o.vol2);
    Ok(DistanceEstimate {
        value: (1.0 - o.intersection / vmax).clamp(0.0, 1.0),
        std_error: o.intersection_se / vmax,
        mc_samples: mc,
        seed,
    })
}

pub fn l2_uniform(s1: &Simplex, s2: &Simplex, mc: usize, seed: u64) -> Result<DistanceEstimate> {
    check_mc(mc)?;
    let o = overlap(s1, s2, mc, seed)?;
    let (v1, v2, i) = (o.vol1, o.vol2, o.intersection);
    let sq = (v1 - i) / (v1 * v1) + (v2 - i) / (v2 * v2) + i * (1.0 / v1 - 1.0 / v2).powi(2);
    let value = sq.max(0.0).sqrt();
    // d(value)/dI = -1 / (V1 V2 value).
    let std_error = if value > 0.0 {
        o.intersection_se / (v1 * v2 * value)
    } else {
        0.0
    };
    Ok(DistanceEstimate {
        value,
        std_error,
        mc_samples: mc,
        seed,
    })
}

/// Minimum over vertex bijections of `Σ_i ||v_i - w_π(i)||_1`.
pub fn vertex_l1(s1: &Simplex, s2: &Simplex) -> Result<VertexAssignment> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimMismatch {
            expected: s1.dim(),
            actual: s2.dim(),
        });
    }
    let n = s1.dim() + 1;
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = s1
                .vertex(i)
                .iter()
                .zip(s2.vertex(j))
                .map(|(a, b)| (a - b).abs())
                .sum();
        }
    }
    let permutation = assignment::solve(n, &cost);
    let total = assignment::total(n, &cost, &permutation);
    Ok(VertexAssignment {
        permutation,
        cost: total,
    })
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Fixed-order pairwise summation.
pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn shared_quadrature(m1: &NoisyModel, m2: &NoisyModel, quad: usize, seed: u64) -> Result<QuadratureSet> {
    if m1.dim() != m2.dim() {
        return Err(Error::DimMismatch {
            expected: m1.dim(),
            actual: m2.dim(),
        });
    }
    if quad < 1000 {
        return Err(Error::InvalidConfig(format!(
            "quadrature size must be at least 1000, got {quad}"
        )));
    }
    Ok(QuadratureSet::new(m1.dim(), quad, derive_seed(seed, "quadrature", &[])))
}

/// Monte-Carlo TV between the quadrature densities of two noisy models.
///
/// Points are drawn from the balanced mixture `h = (f̂_1 + f̂_2)/2`; the
/// integrand `|f̂_1 - f̂_2| / (2h)` equals `|tanh((log f̂_1 - log f̂_2)/2)|`.
/// Both models share one set of Dirichlet weights, so identical models give
/// exactly zero.
pub fn tv_noisy_mc(
    m1: &NoisyModel,
    m2: &NoisyModel,
    mc: usize,
    quad: usize,
    seed: u64,
) -> Result<DistanceEstimate> {
    check_mc(mc)?;
    match (m1.sigma == 0.0, m2.sigma == 0.0) {
        (true, true) => return tv_uniform(&m1.simplex, &m2.simplex, mc, seed),
        (true, false) | (false, true) => return Err(Error::UnsupportedNoiseless),
        _ => {}
    }
    let q = shared_quadrature(m1, m2, quad, seed)?;
    let d1 = HypothesisDensity::new(m1, &q)?;
    let d2 = HypothesisDensity::new(m2, &q)?;
    let k = m1.dim();
    let mut rng = Stream::derived(seed, "tv_noisy", &[]);
    let mut w = vec![0.0; k + 1];
    let mut x = vec![0.0; k];
    let mut vals = Vec::with_capacity(mc);
    for _ in 0..mc {
        let from = if rng.next_u64() >> 63 == 0 { &d1 } else { &d2 };
        from.sample_into(&mut rng, &mut w, &mut x);
        let diff = d1.log_density(&x) - d2.log_density(&x);
        vals.push((0.5 * diff).tanh().abs());
    }
    let (value, std_error) = mean_se(&vals);
    Ok(DistanceEstimate {
        value,
        std_error,
        mc_samples: mc,
        seed,
    })
}

/// Monte-Carlo `KL(f̂_1 || f̂_2)` with points drawn from `f̂_1`.
pub fn kl_noisy_mc(
    m1: &NoisyModel,
    m2: &NoisyModel,
    mc: usize,
    quad: usize,
    seed: u64,
) -> Result<DistanceEstimate> {
    if m2.sigma == 0.0 {
        return Err(Error::UnsupportedNoiseless);
    }
    check_mc(mc)?;
    let q = shared_quadrature(m1, m2, quad, seed)?;
    let d1 = HypothesisDensity::new(m1, &q)?;
    let d2 = HypothesisDensity::new(m2, &q)?;
    let k = m1.dim();
    let mut rng = Stream::derived(seed, "kl_noisy", &[]);
    let mut w = vec![0.0; k + 1];
    let mut x = vec![0.0; k];
    let mut vals = Vec::with_capacity(mc);
    for _ in 0..mc {
        d1.sample_into(&mut rng, &mut w, &mut x);
        let diff = d1.log_density(&x) - d2.log_density(&x);
        vals.push(diff.clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP));
    }
    let (value, std_error) = mean_se(&vals);
    Ok(DistanceEstimate {
        value,
        std_error,
        mc_samples: mc,
        seed,
    })
}
