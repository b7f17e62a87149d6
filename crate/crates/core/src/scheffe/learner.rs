//! The full learner: localize, quantize, screen, select.
//!
//! The data are split by index parity. The even half localizes the simplex
//! and drives candidate generation; the odd half is reserved for the
//! tournament so that selection is independent of how candidates were made.
//!
//! Two candidate generators are available:
//!
//! * [`Strategy::Cover`] enumerates simplices on random points of the
//!   localization ball, as in the theory, subject to point and tuple budgets.
//! * [`Strategy::Seeded`] starts from a greedy extreme-point simplex and
//!   repeatedly perturbs its vertices inside shrinking local balls. It is a
//!   heuristic that spends the same candidate budget far more efficiently
//!   for K ≥ 2, and feeds the same screening and tournament stages.

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{
    admissible, alpha_for_volume, ball_noise_grid, cover_sphere, default_vol_floor,
    enumerate_candidates_with_sigmas, uniform_in_ball, CandidateFamily, CoverSpec, Hypothesis,
    DEFAULT_COVER_BASE,
};
use crate::error::{Error, Result};
use crate::geometry::{dist2, Simplex};
use crate::localization::{localize_with, LocalizationBall, NoiseDenominator};
use crate::rng::{derive_seed, Stream};
use crate::sampler::SampleSet;
use crate::scheffe::screen::{smallest, Screen, SimplexMoments};
use crate::scheffe::tournament::{scheffe_select, TournamentOutcome};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `Cover` for K = 1, `Seeded` otherwise.
    #[default]
    Auto,
    Cover,
    Seeded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub point_budget: usize,
    pub tuple_budget: usize,
    /// Quadrature size per hypothesis in the tournament.
    pub quad_size: usize,
    /// Monte-Carlo draws per hypothesis for Scheffé-set masses.
    pub mc_mass: usize,
    /// Hypotheses entering the tournament.
    pub selection_budget: usize,
    /// Hypotheses passed from the moment filter to the histogram filter.
    pub screen_budget: usize,
    /// Synthetic draws per hypothesis in the histogram filter.
    pub screen_samples: usize,
    /// Hypotheses passed from the histogram filter to the likelihood filter.
    pub likelihood_budget: usize,
    /// Quadrature size of the likelihood filter.
    pub screen_quad: usize,
    pub strategy: Strategy,
    /// Subdivisions of the noise grid spacing `ε/√K`; the default 4 keeps
    /// the σ quantization error from dominating the shape error.
    pub sigma_subdivision: usize,
    pub refine_rounds: usize,
    /// Perturbation points per vertex in each refinement round.
    pub local_points: usize,
    /// Simplices carried between refinement rounds.
    pub beam: usize,
    pub vol_floor: Option<f64>,
    pub alpha: Option<f64>,
    pub cover_base: f64,
    pub noise_denominator: NoiseDenominator,
    pub seed: u64,
    /// When non-empty, replaces candidate generation entirely.
    pub forced_candidates: Vec<Hypothesis>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            delta: 0.1,
            theta_lo: 5.0,
            theta_hi: 5.0,
            point_budget: 5000,
            tuple_budget: 200_000,
            quad_size: 512,
            mc_mass: 1000,
            selection_budget: 16,
            screen_budget: 2000,
            screen_samples: 1000,
            likelihood_budget: 48,
            screen_quad: 256,
            strategy: Strategy::Auto,
            sigma_subdivision: 4,
            refine_rounds: 6,
            local_points: 8,
            beam: 4,
            vol_floor: None,
            alpha: None,
            cover_base: DEFAULT_COVER_BASE,
            noise_denominator: NoiseDenominator::Statement,
            seed: 0,
            forced_candidates: Vec::new(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0,1), got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if !(self.theta_lo > 0.0 && self.theta_hi > 0.0) {
            return bad("isoperimetric constants must be positive".into());
        }
        if self.point_budget == 0
            || self.tuple_budget == 0
            || self.quad_size == 0
            || self.mc_mass == 0
            || self.selection_budget == 0
            || self.screen_budget == 0
            || self.screen_samples == 0
            || self.likelihood_budget == 0
            || self.screen_quad == 0
            || self.beam == 0
            || self.sigma_subdivision == 0
        {
            return bad("budgets and sample sizes must be positive".into());
        }
        if let Some(v) = self.vol_floor {
            if !(v >= 0.0) {
                return bad(format!("vol_floor must be nonnegative, got {v}"));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return bad(format!("alpha must be positive, got {a}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnResult {
    pub simplex: Simplex,
    pub sigma: f64,
    pub tournament: TournamentOutcome,
    pub ball: LocalizationBall,
    pub finalists: Vec<Hypothesis>,
    /// Hypotheses scored by the moment filter.
    pub candidates_considered: usize,
    pub truncated: bool,
    pub strategy: Strategy,
}

struct Pool {
    entries: Vec<(f64, Hypothesis)>,
    seen: HashSet<Vec<u64>>,
}

impl Pool {
    fn new() -> Self {
        Self {
            entries: Vec::new(),
            seen: HashSet::new(),
        }
    }

    fn key(h: &Hypothesis) -> Vec<u64> {
        let mut k: Vec<u64> = h.simplex.flat().iter().map(|x| x.to_bits()).collect();
        k.push(h.sigma.to_bits());
        k
    }

    fn insert(&mut self, score: f64, h: Hypothesis) {
        if self.seen.insert(Self::key(&h)) {
            self.entries.push((score, h));
        }
    }

    fn best(&self, count: usize) -> Vec<Hypothesis> {
        let scores: Vec<f64> = self.entries.iter().map(|e| e.0).collect();
        smallest(&scores, count)
            .into_iter()
            .map(|i| self.entries[i].1.clone())
            .collect()
    }
}

/// Moment, histogram and likelihood filters; survivors enter `pool` scored
/// by negative mean log-likelihood.
fn screen_into(
    screen: &Screen,
    simplices: &[Arc<Simplex>],
    sigmas: &[f64],
    cfg: &LearnerConfig,
    pool: &mut Pool,
) -> usize {
    let moments: Vec<SimplexMoments> = simplices.par_iter().map(|s| SimplexMoments::of(s)).collect();
    let ns = sigmas.len();
    let scores: Vec<f64> = (0..simplices.len() * ns)
        .into_par_iter()
        .map(|t| screen.moment_score(&moments[t / ns], sigmas[t % ns]))
        .collect();
    let chosen = smallest(&scores, cfg.screen_budget);
    let tvs: Vec<f64> = chosen
        .par_iter()
        .map_init(Vec::new, |buf, &t| {
            screen.hist_tv(&simplices[t / ns], sigmas[t % ns], buf)
        })
        .collect();
    let finalists: Vec<usize> = smallest(&tvs, cfg.likelihood_budget)
        .into_iter()
        .map(|i| chosen[i])
        .collect();
    let nll: Vec<f64> = finalists
        .par_iter()
        .map(|&t| -screen.log_likelihood(&simplices[t / ns], sigmas[t % ns]))
        .collect();
    for (&t, score) in finalists.iter().zip(nll) {
        pool.insert(
            score,
            Hypothesis {
                simplex: Arc::clone(&simplices[t / ns]),
                sigma: sigmas[t % ns],
            },
        );
    }
    scores.len()
}

/// Greedy extreme points: repeatedly take the points farthest from the
/// affine hull of those already chosen, replacing each extreme point by the
/// mean of its nearest 0.5% of the data for robustness to noise.
pub fn extreme_point_seed(data: &SampleSet) -> Option<Simplex> {
    let k = data.dim();
    let n = data.len();
    let top = (n / 200).max(1);
    let mut mean = vec![0.0; k];
    for y in data.iter() {
        for (m, v) in mean.iter_mut().zip(y) {
            *m += v / n as f64;
        }
    }
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    // Orthonormal basis of the chosen points' directions from the first.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for step in 0..=k {
        let origin = if step == 0 { &mean } else { &chosen[0] };
        let resid: Vec<f64> = data
            .iter()
            .map(|y| {
                let mut d: Vec<f64> = y.iter().zip(origin).map(|(a, b)| a - b).collect();
                for b in &basis {
                    let c: f64 = d.iter().zip(b).map(|(x, y)| x * y).sum();
                    d.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
                d.iter().map(|x| x * x).sum::<f64>()
            })
            .collect();
        let far = smallest(&resid.iter().map(|r| -r).collect::<Vec<_>>(), 1)[0];
        let near: Vec<f64> = data.iter().map(|y| dist2(y, data.point(far))).collect();
        let idx = smallest(&near, top);
        let mut v = vec![0.0; k];
        for &i in &idx {
            for (vj, yj) in v.iter_mut().zip(data.point(i)) {
                *vj += yj / idx.len() as f64;
            }
        }
        if step > 0 {
            let mut d: Vec<f64> = v.iter().zip(&chosen[0]).map(|(a, b)| a - b).collect();
            for b in &basis {
                let c: f64 = d.iter().zip(b).map(|(x, y)| x * y).sum();
                d.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                basis.push(d.iter().map(|x| x / norm).collect());
            }
        }
        chosen.push(v);
    }
    let s = Simplex::from_rows(chosen).ok()?;
    (!s.is_degenerate()).then_some(s)
}

fn in_ball(s: &Simplex, ball: &LocalizationBall) -> bool {
    ball.contains_simplex(s)
}

/// Product of per-vertex local covers plus homothetic rescalings.
fn local_candidates(
    base: &Simplex,
    rho: f64,
    scales: &[f64],
    cfg: &LearnerConfig,
    per_base_budget: usize,
    rng: &mut Stream,
) -> Vec<Vec<Vec<f64>>> {
    let k = base.dim();
    let mut covers: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k + 1);
    let mut x = vec![0.0; k];
    for v in base.vertices() {
        let mut pts = vec![v.to_vec()];
        for _ in 0..cfg.local_points {
            uniform_in_ball(rng, v, rho, &mut x);
            pts.push(x.clone());
        }
        covers.push(pts);
    }
    let per = cfg.local_points + 1;
    let full = (per as f64).powi(k as i32 + 1);
    let mut out = Vec::new();
    if full <= per_base_budget as f64 {
        let total = per.pow(k as u32 + 1);
        for mut code in 0..total {
            let mut verts = Vec::with_capacity(k + 1);
            for cover in &covers {
                verts.push(cover[code % per].clone());
                code /= per;
            }
            out.push(verts);
        }
    } else {
        out.push(base.to_rows());
        for _ in 1..per_base_budget {
            let verts = covers
                .iter()
                .map(|c| c[rng.below(per as u64) as usize].clone())
                .collect();
            out.push(verts);
        }
    }
    for &c in scales {
        out.push(base.scale_about_centroid(c).to_rows());
    }
    out
}

fn filter_simplices(
    raw: Vec<Vec<Vec<f64>>>,
    ball: &LocalizationBall,
    cfg: &LearnerConfig,
    vol_floor: f64,
) -> Vec<Arc<Simplex>> {
    raw.into_par_iter()
        .filter_map(|v| admissible(v, cfg.theta_lo, cfg.theta_hi, vol_floor))
        .filter(|s| in_ball(s, ball))
        .map(Arc::new)
        .collect()
}

pub fn learn(data: &SampleSet, cfg: &LearnerConfig) -> Result<LearnResult> {
    cfg.validate()?;
    if data.len() < 4 {
        return Err(Error::InvalidConfig(format!(
            "learning needs at least 4 samples, got {}",
            data.len()
        )));
    }
    let k = data.dim();
    let (half_a, half_b) = data.split_parity();
    let ball = localize_with(&half_a, cfg.noise_denominator)?;
    let sigmas = ball_noise_grid(&ball, cfg.epsilon / cfg.sigma_subdivision as f64);
    let vol_floor = cfg.vol_floor.unwrap_or_else(|| default_vol_floor(&ball));
    let screen = Screen::new(
        &half_a,
        cfg.screen_samples,
        cfg.screen_quad,
        derive_seed(cfg.seed, "learn.screen", &[]),
    );
    let mut pool = Pool::new();
    let mut considered = 0usize;
    let mut truncated = false;

    let strategy = match cfg.strategy {
        Strategy::Auto if k == 1 => Strategy::Cover,
        Strategy::Auto => Strategy::Seeded,
        s => s,
    };

    if !cfg.forced_candidates.is_empty() {
        if cfg.forced_candidates.iter().any(|h| h.simplex.dim() != k) {
            return Err(Error::DimMismatch {
                expected: k,
                actual: cfg.forced_candidates[0].simplex.dim(),
            });
        }
        for h in &cfg.forced_candidates {
            pool.insert(-screen.log_likelihood(&h.simplex, h.sigma), h.clone());
        }
        considered = cfg.forced_candidates.len();
    } else {
        match strategy {
            Strategy::Cover | Strategy::Auto => {
                let alpha = cfg
                    .alpha
                    .unwrap_or_else(|| alpha_for_volume(vol_floor, k, cfg.theta_hi));
                let spec = CoverSpec {
                    epsilon: cfg.epsilon,
                    alpha,
                    point_budget: cfg.point_budget,
                    tuple_budget: cfg.tuple_budget,
                    seed: derive_seed(cfg.seed, "learn.cover", &[]),
                    base: cfg.cover_base,
                };
                spec.validate()?;
                let pts = cover_sphere(&ball, spec.cover_spacing(k), &spec)?;
                let fam = enumerate_candidates_with_sigmas(
                    &pts,
                    &spec,
                    cfg.theta_lo,
                    cfg.theta_hi,
                    vol_floor,
                    &[0.0],
                )?;
                truncated = fam.truncated;
                let simplices: Vec<Arc<Simplex>> =
                    fam.hypotheses.into_iter().map(|h| h.simplex).collect();
                considered += screen_into(&screen, &simplices, &sigmas, cfg, &mut pool);
            }
            Strategy::Seeded => {
                let seed_simplex = extreme_point_seed(&half_a).ok_or(Error::EmptyFamily)?;
                let rho0 = 0.5 * seed_simplex.l_max();
                let mut best = vec![seed_simplex];
                let mut rng = Stream::derived(cfg.seed, "learn.refine", &[]);
                let per_base = (cfg.tuple_budget / (cfg.beam * cfg.refine_rounds.max(1))).max(1);
                for round in 0..=cfg.refine_rounds {
                    let shrink = 0.5f64.powi(round as i32);
                    let rho = rho0 * shrink;
                    let scales: Vec<f64> = [-0.4, -0.2, -0.1, 0.1, 0.2]
                        .iter()
                        .map(|d| 1.0 + d * shrink)
                        .collect();
                    let mut raw = Vec::new();
                    for b in &best {
                        raw.extend(local_candidates(b, rho, &scales, cfg, per_base, &mut rng));
                    }
                    let simplices = filter_simplices(raw, &ball, cfg, vol_floor);
                    considered +=
                        screen_into(&screen, &simplices, &sigmas, cfg, &mut pool);
                    best = distinct_simplices(&pool, cfg.beam);
                    if best.is_empty() {
                        break;
                    }
                }
                truncated = true;
            }
        }
    }

    let finalists = pool.best(cfg.selection_budget);
    let family = CandidateFamily {
        hypotheses: finalists.clone(),
        cover_points_used: 0,
        truncated,
    };
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let tournament = scheffe_select(
        &family,
        &half_b,
        cfg.quad_size,
        cfg.mc_mass,
        derive_seed(cfg.seed, "learn.tournament", &[]),
    )?;
    let win = &finalists[tournament.winner];
    Ok(LearnResult {
        simplex: (*win.simplex).clone(),
        sigma: win.sigma,
        tournament,
        ball,
        finalists,
        candidates_considered: considered,
        truncated,
        strategy,
    })
}

/// The best-scoring `count` distinct simplices in the pool.
fn distinct_simplices(pool: &Pool, count: usize) -> Vec<Simplex> {
    let mut out: Vec<Simplex> = Vec::with_capacity(count);
    for h in pool.best(pool.entries.len().min(count * 64)) {
        if out.iter().all(|s| {
            s.vertices()
                .zip(h.simplex.vertices())
                .any(|(a, b)| dist2(a, b) > 0.0)
        }) {
            out.push((*h.simplex).clone());
            if out.len() == count {
                break;
            }
        }
    }
    out
}
