//! Hypothesis families for minimax lower bounds and empirical risk.
//!
//! Three constructions are provided:
//!
//! * [`fano_family`]: translates `Δ_K + t_j` packed in a small ball.
//! * [`assouad_family`]: bit-coded vertex perturbations of `Δ_K`, either one
//!   shared `K`-bit code (`tv` mode) or one sign bit per off-diagonal vertex
//!   coordinate (`vertex_l1` mode, lazily decoded).
//! * [`lecam_pair`]: a simplex and its shift along the altitude of its
//!   largest facet.
//!
//! [`empirical_minimax`] runs a learner on every member and reports the
//! worst mean error next to the rates the lower bounds predict.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{geometry_summary, inward_facet_normal, Simplex};
use crate::metrics::tv_uniform;
use crate::rng::{derive_seed, Stream};
use crate::sampler::{sample, NoisyModel};
use crate::scheffe::{learn, LearnerConfig};

/// Proposal budget of the Fano rejection packing.
pub const FANO_PROPOSALS: usize = 1_000_000;
/// Consecutive rejections after which the packing restarts from scratch.
const FANO_RESTART: usize = 20_000;
/// Codes evaluated when a bit-coded family is too large to enumerate.
pub const DEFAULT_CODE_SUBSAMPLE: usize = 64;
/// Largest `K` for which the `tv`-mode family is materialized.
pub const MAX_TV_MODE_K: usize = 12;
/// Monte-Carlo size for the per-trial TV error.
pub const RISK_MC: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    FanoTranslate,
    AssouadBits,
    LecamPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssouadMode {
    VertexL1,
    Tv,
}

/// Decoder for the bit-coded families.
///
/// In `Tv` mode a code `b ∈ {0,1}^K` gives `v_0 = 0` and
/// `v_i = e_i − ζ Σ_{j≠i} b_j e_j`. In `VertexL1` mode the code holds one bit
/// per off-diagonal coordinate, row-major over `(i, j)` with `j ≠ i`, and
/// `v_i^j = ζ (1 − 2 b_i^j)` while `v_i^i = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitCode {
    pub k: usize,
    pub zeta: f64,
    pub mode: AssouadMode,
}

impl BitCode {
    pub fn code_len(&self) -> usize {
        match self.mode {
            AssouadMode::Tv => self.k,
            AssouadMode::VertexL1 => self.k * (self.k - 1),
        }
    }

    fn check_len(&self, code: &[bool]) -> Result<()> {
        if code.len() != self.code_len() {
            return Err(Error::DimMismatch {
                expected: self.code_len(),
                actual: code.len(),
            });
        }
        Ok(())
    }

    pub fn decode(&self, code: &[bool]) -> Result<Simplex> {
        self.check_len(code)?;
        let k = self.k;
        let mut rows = vec![vec![0.0; k]];
        for i in 0..k {
            let mut v = vec![0.0; k];
            v[i] = 1.0;
            match self.mode {
                AssouadMode::Tv => {
                    for j in (0..k).filter(|&j| j != i) {
                        if code[j] {
                            v[j] = -self.zeta;
                        }
                    }
                }
                AssouadMode::VertexL1 => {
                    let row = &code[i * (k - 1)..(i + 1) * (k - 1)];
                    for (slot, j) in (0..k).filter(|&j| j != i).enumerate() {
                        v[j] = if row[slot] { -self.zeta } else { self.zeta };
                    }
                }
            }
            rows.push(v);
        }
        Simplex::new(rows)
    }

    /// Inverse of [`decode`](Self::decode) on its image. In `VertexL1` mode
    /// this is the sign map: bit `(i, j)` is set when `x_i^j < 0`.
    pub fn encode(&self, s: &Simplex) -> Result<Vec<bool>> {
        if s.dim() != self.k {
            return Err(Error::DimMismatch {
                expected: self.k,
                actual: s.dim(),
            });
        }
        let k = self.k;
        Ok(match self.mode {
            AssouadMode::Tv => (0..k)
                .map(|j| {
                    let other = if j == 0 { 1 } else { 0 };
                    k > 1 && s.vertex(other + 1)[j] < 0.0
                })
                .collect(),
            AssouadMode::VertexL1 => psi(s)
                .into_iter()
                .enumerate()
                .filter(|(idx, _)| idx / k != idx % k)
                .map(|(_, b)| b)
                .collect(),
        })
    }

    /// All codes at Hamming distance one from `code`.
    pub fn neighbors(&self, code: &[bool]) -> Vec<Vec<bool>> {
        (0..code.len())
            .map(|i| {
                let mut c = code.to_vec();
                c[i] = !c[i];
                c
            })
            .collect()
    }

    pub fn random_code(&self, rng: &mut Stream) -> Vec<bool> {
        (0..self.code_len()).map(|_| rng.next_u64() >> 63 == 1).collect()
    }

    /// Every code when there are at most `limit` of them, otherwise `limit`
    /// distinct random codes.
    pub fn codes(&self, limit: usize, seed: u64) -> Vec<Vec<bool>> {
        let len = self.code_len();
        if len < usize::BITS as usize && (1usize << len) <= limit {
            return (0..1usize << len)
                .map(|m| (0..len).map(|b| (m >> b) & 1 == 1).collect())
                .collect();
        }
        let mut rng = Stream::derived(seed, "assouad.codes", &[self.k as u64]);
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(limit);
        while out.len() < limit {
            let c = self.random_code(&mut rng);
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
        out
    }
}

/// The sign map on `K × K` vertex coordinates of `x_1..x_K`: entry
/// `(i, j)` is `(1 − sign(x_i^j)·1{i≠j})/2` rounded to a bit, so diagonal
/// entries and zero coordinates read as unset.
pub fn psi(s: &Simplex) -> Vec<bool> {
    let k = s.dim();
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        let v = s.vertex(i + 1);
        for (j, &x) in v.iter().enumerate() {
            out.push(i != j && x < 0.0);
        }
    }
    out
}

pub fn bits_to_string(code: &[bool]) -> String {
    code.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn bits_from_str(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::InvalidConfig(format!("bad code character {other:?}"))),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisFamily {
    pub members: Vec<Simplex>,
    pub construction: Construction,
    pub zeta: f64,
    pub codes: Option<Vec<String>>,
    /// Translation vectors for `fano_translate` and `lecam_pair`.
    pub shifts: Option<Vec<Vec<f64>>>,
    /// Decoder of bit-coded families; members hold a code subsample when
    /// the family is too large to enumerate.
    pub decoder: Option<BitCode>,
    /// Pairwise TV lower bound implied by the construction, when known.
    pub tv_lower_bound: Option<f64>,
}

impl HypothesisFamily {
    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Exact TV between `Δ_K` and `Δ_K + d`.
///
/// The intersection is `{x ≥ max(0, d), Σx ≤ min(1, 1 + Σd)}`, a scaled copy
/// of `Δ_K` with side `s = min(1, 1 + Σd) − Σ max(0, d_i)`, so the overlap
/// fraction is `max(0, s)^K`.
pub fn standard_translate_tv(d: &[f64]) -> f64 {
    let sum: f64 = d.iter().sum();
    let pos: f64 = d.iter().map(|x| x.max(0.0)).sum();
    let side = (1.0f64).min(1.0 + sum) - pos;
    1.0 - side.max(0.0).powi(d.len() as i32)
}

/// `||b||² / (2σ²)`: KL between two Gaussians with common covariance `σ²I`
/// and means `b` apart, which bounds the KL of the smoothed translates.
pub fn kl_shift_bound(b: &[f64], sigma: f64) -> f64 {
    b.iter().map(|x| x * x).sum::<f64>() / (2.0 * sigma * sigma)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn uniform_ball(rng: &mut Stream, k: usize, radius: f64, out: &mut [f64]) {
    rng.fill_normal(out);
    let r = norm(out);
    let scale = radius * rng.uniform().powf(1.0 / k as f64) / r;
    out.iter_mut().for_each(|x| *x *= scale);
}

/// Translates `Δ_K + t_j` with `||t_j|| ≤ ζ/K`, pairwise `||t_j − t_k|| ≥
/// ζ/(2K)` and pairwise exact TV `≥ ζ/2`, found by rejection sampling.
pub fn fano_family(k: usize, zeta: f64, m: usize, seed: u64) -> Result<HypothesisFamily> {
    fano_family_with_budget(k, zeta, m, seed, FANO_PROPOSALS)
}

pub fn fano_family_with_budget(
    k: usize,
    zeta: f64,
    m: usize,
    seed: u64,
    budget: usize,
) -> Result<HypothesisFamily> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if !(zeta > 0.0 && zeta <= 0.5) {
        return Err(Error::InvalidConfig(format!("zeta must lie in (0, 1/2], got {zeta}")));
    }
    if m < 2 {
        return Err(Error::InvalidConfig(format!("M must be at least 2, got {m}")));
    }
    let kf = k as f64;
    let radius = zeta / kf;
    let sep = zeta / (2.0 * kf);
    let mut rng = Stream::derived(seed, "fano", &[k as u64, m as u64]);
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut best = 0;
    let mut since_accept = 0;
    let mut t = vec![0.0; k];
    let mut diff = vec![0.0; k];
    for _ in 0..budget {
        uniform_ball(&mut rng, k, radius, &mut t);
        let ok = accepted.iter().all(|u| {
            diff.iter_mut()
                .zip(&t)
                .zip(u)
                .for_each(|((d, a), b)| *d = a - b);
            norm(&diff) >= sep && standard_translate_tv(&diff) >= zeta / 2.0
        });
        if ok {
            accepted.push(t.clone());
            best = best.max(accepted.len());
            since_accept = 0;
            if accepted.len() == m {
                break;
            }
        } else {
            since_accept += 1;
            if since_accept >= FANO_RESTART {
                accepted.clear();
                since_accept = 0;
            }
        }
    }
    if accepted.len() < m {
        return Err(Error::PackingBudgetExceeded {
            achieved: best,
            requested: m,
            proposals: budget,
        });
    }
    let base = Simplex::standard(k);
    Ok(HypothesisFamily {
        members: accepted.iter().map(|t| base.translate(t)).collect(),
        construction: Construction::FanoTranslate,
        zeta,
        codes: None,
        shifts: Some(accepted),
        decoder: None,
        tv_lower_bound: Some(zeta / 2.0),
    })
}

/// Bit-coded perturbations of `Δ_K`.
///
/// `Tv` mode materializes all `2^K` members (`K ≤ 12`). `VertexL1` mode keeps
/// the decoder and holds every code when there are at most
/// [`DEFAULT_CODE_SUBSAMPLE`] of them, otherwise a fixed random subsample.
pub fn assouad_family(k: usize, zeta: f64, mode: AssouadMode) -> Result<HypothesisFamily> {
    if !(zeta >= 0.0 && zeta.is_finite()) {
        return Err(Error::InvalidConfig(format!("zeta must be non-negative, got {zeta}")));
    }
    let decoder = BitCode { k, zeta, mode };
    let codes = match mode {
        AssouadMode::Tv => {
            if k == 0 || k > MAX_TV_MODE_K {
                return Err(Error::UnsupportedDimension {
                    k,
                    what: "materialized tv-mode family",
                });
            }
            decoder.codes(usize::MAX, 0)
        }
        AssouadMode::VertexL1 => {
            if k < 2 {
                return Err(Error::UnsupportedDimension {
                    k,
                    what: "vertex-l1 bit family",
                });
            }
            decoder.codes(DEFAULT_CODE_SUBSAMPLE, derive_seed(zeta.to_bits(), "assouad", &[]))
        }
    };
    let members = codes
        .iter()
        .map(|c| decoder.decode(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(HypothesisFamily {
        members,
        construction: Construction::AssouadBits,
        zeta,
        codes: Some(codes.iter().map(|c| bits_to_string(c)).collect()),
        shifts: None,
        decoder: Some(decoder),
        tv_lower_bound: None,
    })
}

/// `{S, S + ζu}` with `u` the unit inward normal of the largest facet.
/// The reported TV lower bound is `Kζ/h` with altitude `h = K·Vol/A_max`.
pub fn lecam_pair(s: &Simplex, zeta: f64) -> Result<HypothesisFamily> {
    s.check_nondegenerate()?;
    if !(zeta >= 0.0 && zeta.is_finite()) {
        return Err(Error::InvalidConfig(format!("zeta must be non-negative, got {zeta}")));
    }
    let (skip, a_max) = s.largest_facet();
    let u = inward_facet_normal(s, skip);
    let shift: Vec<f64> = u.iter().map(|x| zeta * x).collect();
    let h = altitude(s);
    let k = s.dim() as f64;
    debug_assert!(a_max > 0.0);
    Ok(HypothesisFamily {
        members: vec![s.clone(), s.translate(&shift)],
        construction: Construction::LecamPair,
        zeta,
        codes: None,
        shifts: Some(vec![vec![0.0; s.dim()], shift]),
        decoder: None,
        tv_lower_bound: Some(k * zeta / h),
    })
}

/// `1 − (1 − ζ/h)^K`. The overlap of the pair lies in the part of `S` at
/// distance at least `ζ` from the largest facet, a homothetic copy with
/// ratio `1 − ζ/h`, so this bounds the pair's TV from below without the
/// second-order slack of `Kζ/h`.
pub fn lecam_tv_floor(k: usize, zeta: f64, h: f64) -> f64 {
    1.0 - (1.0 - zeta / h).max(0.0).powi(k as i32)
}

/// Altitude onto the largest facet, `K·Vol/A_max`.
pub fn altitude(s: &Simplex) -> f64 {
    s.dim() as f64 * s.volume() / s.largest_facet().1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub member_id: usize,
    pub trial: usize,
    pub tv_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberRisk {
    pub member_id: usize,
    pub mean: f64,
    pub std_error: f64,
}

/// Lower-bound rates solved for `ε` at the given `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundColumns {
    /// From `n ≳ K³σ²/ε²`.
    pub eps_noise: f64,
    /// From `n ≳ K/ε`.
    pub eps_dimension: f64,
    /// From `n ≳ σ²θ̄²/ε²`.
    pub eps_facet: f64,
    /// From `n ≳ σ²θ̄²/(ε² Vol^{2/K})`.
    pub eps_facet_volume: f64,
    /// Effective `θ̄ = A_max / Vol^{(K-1)/K}` of the first member.
    pub theta_hi_eff: f64,
}

impl BoundColumns {
    pub fn new(s: &Simplex, sigma: f64, n: usize) -> Result<Self> {
        let g = geometry_summary(s)?;
        let k = s.dim() as f64;
        let nf = n as f64;
        let theta = g.a_max / g.volume.powf((k - 1.0) / k);
        let eps_facet = sigma * theta / nf.sqrt();
        Ok(Self {
            eps_noise: (k.powi(3) * sigma * sigma / nf).sqrt(),
            eps_dimension: k / nf,
            eps_facet,
            eps_facet_volume: eps_facet / g.volume.powf(1.0 / k),
            theta_hi_eff: theta,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxReport {
    pub construction: Construction,
    pub zeta: f64,
    pub sigma: f64,
    pub n: usize,
    pub trials: usize,
    pub rows: Vec<RiskRow>,
    pub members: Vec<MemberRisk>,
    pub worst_member: usize,
    pub max_risk: f64,
    pub max_risk_se: f64,
    pub bounds: BoundColumns,
}

/// Runs `learner` on `trials` fresh sample sets per member and reports the
/// largest mean TV error between the learned and true simplices.
pub fn empirical_minimax(
    family: &HypothesisFamily,
    sigma: f64,
    n: usize,
    trials: usize,
    learner: &LearnerConfig,
    seed: u64,
) -> Result<MinimaxReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let cells: Vec<(usize, usize)> = (0..family.len())
        .flat_map(|m| (0..trials).map(move |t| (m, t)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(m, t)| {
            let idx = [m as u64, t as u64];
            let truth = &family.members[m];
            let model = NoisyModel::new(truth.clone(), sigma)?;
            let data = sample(&model, n, derive_seed(seed, "minimax.sample", &idx));
            let cfg = LearnerConfig {
                seed: derive_seed(seed, "minimax.learn", &idx),
                ..learner.clone()
            };
            let fit = learn(&data, &cfg)?;
            let tv = tv_uniform(
                &fit.simplex,
                truth,
                RISK_MC,
                derive_seed(seed, "minimax.tv", &idx),
            )?;
            Ok(RiskRow {
                member_id: m,
                trial: t,
                tv_error: tv.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let members: Vec<MemberRisk> = rows
        .chunks(trials)
        .enumerate()
        .map(|(member_id, chunk)| {
            let (mean, std_error) = mean_se(chunk.iter().map(|r| r.tv_error));
            MemberRisk {
                member_id,
                mean,
                std_error,
            }
        })
        .collect();
    let worst = members
        .iter()
        .fold(0, |best, m| if m.mean > members[best].mean { m.member_id } else { best });
    Ok(MinimaxReport {
        construction: family.construction,
        zeta: family.zeta,
        sigma,
        n,
        trials,
        max_risk: members[worst].mean,
        max_risk_se: members[worst].std_error,
        worst_member: worst,
        rows,
        members,
        bounds: BoundColumns::new(&family.members[0], sigma, n)?,
    })
}

fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
