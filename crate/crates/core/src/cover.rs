//! Ball covers, candidate simplices and the noise-level grid.
//!
//! The theoretical cover of a radius-`R` ball at spacing `ε` needs
//! `(1 + cR/ε)^{2K}` uniformly drawn points and every `(K+1)`-subset of them.
//! Both counts explode beyond `K = 2`, so each stage takes a budget and
//! records whether it was the budget rather than the theory that stopped it.

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{geometry_summary, summary_is_isoperimetric, Simplex};
use crate::localization::LocalizationBall;
use crate::rng::Stream;

/// Base `c` in `(1 + cR/ε)^{2K}`; 4 is the conservative count.
pub const DEFAULT_COVER_BASE: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverSpec {
    pub epsilon: f64,
    pub alpha: f64,
    pub point_budget: usize,
    pub tuple_budget: usize,
    pub seed: u64,
    #[serde(default = "default_base")]
    pub base: f64,
}

fn default_base() -> f64 {
    DEFAULT_COVER_BASE
}

impl CoverSpec {
    pub fn new(epsilon: f64, alpha: f64, point_budget: usize, tuple_budget: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            epsilon,
            alpha,
            point_budget,
            tuple_budget,
            seed,
            base: DEFAULT_COVER_BASE,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0,1), got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.point_budget == 0 || self.tuple_budget == 0 {
            return Err(Error::InvalidConfig("budgets must be at least 1".into()));
        }
        if !(self.base > 0.0) {
            return Err(Error::InvalidConfig(format!("cover base must be positive, got {}", self.base)));
        }
        Ok(())
    }

    /// Cover spacing `α ε / (K+1)`.
    pub fn cover_spacing(&self, k: usize) -> f64 {
        self.alpha * self.epsilon / (k as f64 + 1.0)
    }
}

/// `vol^{1/K} / (5 (K+1) θ̄)`.
pub fn alpha_for_volume(vol: f64, k: usize, theta_hi: f64) -> f64 {
    vol.powf(1.0 / k as f64) / (5.0 * (k as f64 + 1.0) * theta_hi)
}

/// Volume proxy used when none is supplied: a simplex `1/64` of the ball
/// radius across, `(R/64)^K / K!`.
pub fn default_vol_floor(ball: &LocalizationBall) -> f64 {
    let k = ball.k;
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    (ball.radius / 64.0).powi(k as i32) / fact
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverPoints {
    pub points: Vec<Vec<f64>>,
    /// Theoretical point count before budgeting.
    pub target: f64,
    pub truncated: bool,
}

/// Uniform point in the closed ball `B(p, R)`.
pub fn uniform_in_ball(rng: &mut Stream, p: &[f64], r: f64, out: &mut [f64]) {
    let k = p.len();
    loop {
        rng.fill_normal(out);
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let rad = r * rng.uniform().powf(1.0 / k as f64);
            for (o, c) in out.iter_mut().zip(p) {
                *o = c + rad * *o / norm;
            }
            return;
        }
    }
}

pub fn cover_sphere(ball: &LocalizationBall, eps_cov: f64, spec: &CoverSpec) -> Result<CoverPoints> {
    if !(eps_cov > 0.0) {
        return Err(Error::InvalidConfig(format!("cover spacing must be positive, got {eps_cov}")));
    }
    let k = ball.k;
    let target = (1.0 + spec.base * ball.radius / eps_cov).powi(2 * k as i32);
    if eps_cov >= ball.radius {
        return Ok(CoverPoints {
            points: vec![ball.p.clone()],
            target: 1.0,
            truncated: false,
        });
    }
    let (count, truncated) = if target > spec.point_budget as f64 {
        (spec.point_budget, true)
    } else {
        (target.ceil() as usize, false)
    };
    let mut rng = Stream::derived(spec.seed, "cover", &[]);
    let mut points = Vec::with_capacity(count);
    points.push(ball.p.clone());
    let mut x = vec![0.0; k];
    while points.len() < count {
        uniform_in_ball(&mut rng, &ball.p, ball.radius, &mut x);
        points.push(x.clone());
    }
    Ok(CoverPoints {
        points,
        target,
        truncated,
    })
}

/// `{0, ε/√K, 2ε/√K, …}` up to and including the first point `≥ √R_n`.
pub fn noise_grid(r_n: f64, epsilon: f64, k: usize) -> Vec<f64> {
    let top = r_n.max(0.0).sqrt();
    let step = epsilon / (k as f64).sqrt();
    let mut out = vec![0.0];
    let mut i = 0u32;
    while out[out.len() - 1] < top {
        i += 1;
        out.push(f64::from(i) * step);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub simplex: Arc<Simplex>,
    pub sigma: f64,
}

impl Hypothesis {
    pub fn new(simplex: Simplex, sigma: f64) -> Self {
        Self {
            simplex: Arc::new(simplex),
            sigma,
        }
    }

    pub fn model(&self) -> crate::sampler::NoisyModel {
        crate::sampler::NoisyModel {
            simplex: (*self.simplex).clone(),
            sigma: self.sigma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateFamily {
    pub hypotheses: Vec<Hypothesis>,
    pub cover_points_used: usize,
    pub truncated: bool,
}

impl CandidateFamily {
    pub fn from_hypotheses(hypotheses: Vec<Hypothesis>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(Self {
            hypotheses,
            cover_points_used: 0,
            truncated: false,
        })
    }

    #[allow(non_snake_case)]
    pub fn M(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }
}

/// `C(n, r)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All `r`-subsets of `0..n` in lexicographic order.
fn all_tuples(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - r {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `count` distinct random `r`-subsets of `0..n`, in draw order.
pub(crate) fn random_tuples(n: usize, r: usize, count: usize, rng: &mut Stream) -> Vec<Vec<usize>> {
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let max_attempts = count.saturating_mul(20).max(1000);
    let mut attempts = 0;
    while out.len() < count && attempts < max_attempts {
        attempts += 1;
        let mut t: Vec<usize> = Vec::with_capacity(r);
        while t.len() < r {
            let c = rng.below(n as u64) as usize;
            if !t.contains(&c) {
                t.push(c);
            }
        }
        t.sort_unstable();
        if seen.insert(t.clone()) {
            out.push(t);
        }
    }
    out
}

/// Simplex from the selected points if it passes all filters.
pub(crate) fn admissible(
    vertices: Vec<Vec<f64>>,
    theta_lo: f64,
    theta_hi: f64,
    vol_floor: f64,
) -> Option<Simplex> {
    let s = Simplex::from_rows(vertices).ok()?;
    let g = geometry_summary(&s).ok()?;
    (g.volume >= vol_floor && summary_is_isoperimetric(&g, s.dim(), theta_lo, theta_hi)).then_some(s)
}

/// Noise grid for a ball; when the bound is undefined (K ≤ 2) `2D/K` is
/// used instead, since `E D ≥ Kσ²`.
pub fn ball_noise_grid(ball: &LocalizationBall, epsilon: f64) -> Vec<f64> {
    let r_n = ball
        .noise_bound
        .unwrap_or(2.0 * ball.d_stat / ball.k as f64);
    noise_grid(r_n, epsilon, ball.k)
}

pub fn enumerate_candidates(
    points: &CoverPoints,
    ball: &LocalizationBall,
    spec: &CoverSpec,
    theta_lo: f64,
    theta_hi: f64,
    vol_floor: f64,
) -> Result<CandidateFamily> {
    let sigmas = ball_noise_grid(ball, spec.epsilon);
    enumerate_candidates_with_sigmas(points, spec, theta_lo, theta_hi, vol_floor, &sigmas)
}

pub fn enumerate_candidates_with_sigmas(
    points: &CoverPoints,
    spec: &CoverSpec,
    theta_lo: f64,
    theta_hi: f64,
    vol_floor: f64,
    sigmas: &[f64],
) -> Result<CandidateFamily> {
    let n = points.points.len();
    let k = points.points.first().map_or(0, Vec::len);
    if n < k + 1 || k == 0 {
        return Err(Error::InsufficientCover {
            needed: k + 1,
            got: n,
        });
    }
    let total = binomial(n, k + 1);
    let (tuples, tuple_trunc) = if total > spec.tuple_budget as u128 {
        let mut rng = Stream::derived(spec.seed, "tuples", &[]);
        (random_tuples(n, k + 1, spec.tuple_budget, &mut rng), true)
    } else {
        (all_tuples(n, k + 1), false)
    };
    let simplices: Vec<Simplex> = tuples
        .par_iter()
        .filter_map(|t| {
            let verts = t.iter().map(|&i| points.points[i].clone()).collect();
            admissible(verts, theta_lo, theta_hi, vol_floor)
        })
        .collect();
    let mut hypotheses = Vec::with_capacity(simplices.len() * sigmas.len());
    for s in simplices {
        let s = Arc::new(s);
        for &sigma in sigmas {
            hypotheses.push(Hypothesis {
                simplex: Arc::clone(&s),
                sigma,
            });
        }
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyFamily);
    }
    Ok(CandidateFamily {
        hypotheses,
        cover_points_used: n,
        truncated: points.truncated || tuple_trunc,
    })
}

/// Log of `(R_n √K / ε) (1 + 2(K+1)R/(αε))^{K(K+1)}`.
pub fn family_size_bound(ball: &LocalizationBall, epsilon: f64, alpha: f64, k: usize) -> Result<f64> {
    let r_n = ball.noise_bound()?;
    Ok(log_family_size(r_n, ball.radius, epsilon, alpha, k))
}

pub fn log_family_size(r_n: f64, radius: f64, epsilon: f64, alpha: f64, k: usize) -> f64 {
    let kf = k as f64;
    (r_n * kf.sqrt() / epsilon).ln()
        + kf * (kf + 1.0) * (2.0 * (kf + 1.0) * radius / (alpha * epsilon)).ln_1p()
}
