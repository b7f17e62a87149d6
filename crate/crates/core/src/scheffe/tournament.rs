//! Round-robin Scheffé tournament.
//!
//! For each pair `i < j` the set `A_ij = {x : f̂_i(x) > f̂_j(x)}` is scored by
//! how well each hypothesis predicts the empirical mass of `A_ij`. The
//! hypothesis with the most duel wins is returned.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{CandidateFamily, Hypothesis};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, hash_f64s, CounterStream};
use crate::sampler::SampleSet;
use crate::scheffe::density::{HypothesisDensity, QuadratureSet};

pub const DEFAULT_QUAD: usize = 4000;
pub const DEFAULT_MC_MASS: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuelRecord {
    pub i: usize,
    pub j: usize,
    /// `P̂_i(A_ij)` and `P̂_j(A_ij)`.
    pub mass_i: f64,
    pub mass_j: f64,
    /// Empirical mass `μ_n(A_ij)`.
    pub empirical: f64,
    pub disc_i: f64,
    pub disc_j: f64,
}

impl DuelRecord {
    pub fn winner(&self) -> usize {
        if self.disc_i <= self.disc_j {
            self.i
        } else {
            self.j
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TournamentOutcome {
    pub winner: usize,
    pub wins: Vec<usize>,
    pub duels: Vec<DuelRecord>,
    pub n_used: usize,
}

/// Seed for a hypothesis' own sample stream, a function of its content so
/// that identical hypotheses draw identical samples.
fn hypothesis_seed(seed: u64, h: &Hypothesis) -> u64 {
    let mut key = h.simplex.flat().to_vec();
    key.push(h.sigma);
    hash_f64s(derive_seed(seed, "mass", &[]), &key)
}

/// `mc` draws from the generative model of `h`.
fn hypothesis_samples(h: &Hypothesis, mc: usize, seed: u64) -> Vec<f64> {
    let k = h.simplex.dim();
    let cs = CounterStream::new(hypothesis_seed(seed, h), (k + 1) + 2 * k.div_ceil(2));
    let mut out = vec![0.0; mc * k];
    let mut w = vec![0.0; k + 1];
    let mut g = vec![0.0; k];
    for (t, x) in out.chunks_exact_mut(k).enumerate() {
        let mut s = cs.item(t as u64);
        s.dirichlet_uniform(&mut w);
        s.fill_normal(&mut g);
        h.simplex.point_from_weights(&w, x);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi += h.sigma * gi;
        }
    }
    out
}

pub fn scheffe_select(
    family: &CandidateFamily,
    data: &SampleSet,
    quad_size: usize,
    mc_mass: usize,
    seed: u64,
) -> Result<TournamentOutcome> {
    let hyps = &family.hypotheses;
    let m = hyps.len();
    if m == 0 {
        return Err(Error::EmptyFamily);
    }
    let n = data.len();
    if n == 0 {
        return Err(Error::InvalidConfig("tournament needs at least one data point".into()));
    }
    let k = data.dim();
    if let Some(bad) = hyps.iter().find(|h| h.simplex.dim() != k) {
        return Err(Error::DimMismatch {
            expected: k,
            actual: bad.simplex.dim(),
        });
    }
    if m == 1 {
        return Ok(TournamentOutcome {
            winner: 0,
            wins: vec![0],
            duels: Vec::new(),
            n_used: n,
        });
    }
    if quad_size == 0 || mc_mass == 0 {
        return Err(Error::InvalidConfig("quadrature and mass sizes must be positive".into()));
    }

    let quad = QuadratureSet::new(k, quad_size, derive_seed(seed, "quadrature", &[]));
    let densities: Vec<HypothesisDensity> = hyps
        .iter()
        .map(|h| HypothesisDensity::new(&h.model(), &quad))
        .collect::<Result<_>>()?;

    // Evaluation points: the data, then each hypothesis' mass sample.
    let mut points = data.flat().to_vec();
    let own: Vec<Vec<f64>> = hyps
        .par_iter()
        .map(|h| hypothesis_samples(h, mc_mass, seed))
        .collect();
    for s in &own {
        points.extend_from_slice(s);
    }
    let total = points.len() / k;
    // logd[h * total + p] = log f̂_h(point p).
    let logd: Vec<f64> = densities
        .par_iter()
        .flat_map_iter(|d| points.chunks_exact(k).map(move |x| d.log_density(x)))
        .collect();
    let row = |h: usize| &logd[h * total..(h + 1) * total];
    let block = |p: usize| n + p * mc_mass..n + (p + 1) * mc_mass;

    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let duels: Vec<DuelRecord> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (li, lj) = (row(i), row(j));
            let frac = |range: std::ops::Range<usize>| {
                let len = range.len() as f64;
                range.filter(|&p| li[p] > lj[p]).count() as f64 / len
            };
            let empirical = frac(0..n);
            let mass_i = frac(block(i));
            let mass_j = frac(block(j));
            DuelRecord {
                i,
                j,
                mass_i,
                mass_j,
                empirical,
                disc_i: (mass_i - empirical).abs(),
                disc_j: (mass_j - empirical).abs(),
            }
        })
        .collect();

    let mut wins = vec![0usize; m];
    for d in &duels {
        wins[d.winner()] += 1;
    }
    let winner = argmax_first(&wins);
    Ok(TournamentOutcome {
        winner,
        wins,
        duels,
        n_used: n,
    })
}

fn argmax_first(v: &[usize]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `ceil(ln(3M²/δ) / (2ε²))`.
pub fn min_samples_select(m: usize, epsilon: f64, delta: f64) -> Result<u64> {
    if m == 0 || !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "need M >= 1 and epsilon, delta in (0,1); got M={m}, epsilon={epsilon}, delta={delta}"
        )));
    }
    let mf = m as f64;
    Ok(((3.0 * mf * mf / delta).ln() / (2.0 * epsilon * epsilon)).ceil() as u64)
}

/// End-to-end sample-size expression with its explicit constant 50.
/// Reported alongside runs; the learner itself sizes selection with
/// [`min_samples_select`].
pub fn pipeline_sample_bound(
    r_n: f64,
    radius: f64,
    k: usize,
    epsilon: f64,
    delta: f64,
    theta_hi: f64,
    volume: f64,
) -> f64 {
    let kf = k as f64;
    let a = (30.0 * r_n * kf.sqrt() / (delta * epsilon)).ln();
    let b = 2.0
        * (kf + 1.0).powi(2)
        * (100.0 * radius * theta_hi * (kf + 1.0) / (epsilon * volume.powf(1.0 / kf))).ln_1p();
    50.0 * (a + b) / (epsilon * epsilon)
}
