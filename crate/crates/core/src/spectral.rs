//! Characteristic functions of uniform simplex densities.
//!
//! For the standard simplex `Δ_K = conv{0, e_1, …, e_K}` with density
//! `K! 1_Δ`, the Hermite–Genocchi formula gives
//!
//! ```text
//! F_Δ(ω) = ∫ K! 1_Δ(x) e^{-iωᵀx} dx = K! i^K · e^{-it}[0, ω_1, …, ω_K],
//! ```
//!
//! a divided difference of `t ↦ e^{-it}` on the nodes `{0, ω_1, …, ω_K}`.
//! Expanding it over distinct nodes yields the partial-fraction closed form,
//! which cancels catastrophically when nodes nearly coincide. The stable
//! path evaluates the divided-difference table directly: node clusters of
//! small spread use a Taylor series in complete homogeneous polynomials,
//! wide intervals use the two-term recurrence, which only divides by large
//! gaps.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Simplex;
use crate::metrics::{l2_uniform, pairwise_sum};
use crate::rng::Stream;
use crate::sampler::NoisyModel;

pub type ComplexValue = Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);
/// Intervals of the divided-difference table narrower than this are summed
/// as a Taylor series about their midpoint.
const TAYLOR_SPREAD: f64 = 2.0;
const TAYLOR_TERMS: usize = 32;
/// Largest closed-form summand magnitude (times `K!`) accepted before the
/// stable path takes over; bounds the cancellation loss to about 1e-12.
const CLOSED_FORM_MAX_TERM: f64 = 1e4;

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

fn i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => I,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I,
    }
}

/// `e^{-it}`.
#[inline]
fn cis_neg(t: f64) -> Complex64 {
    Complex64::new(t.cos(), -t.sin())
}

/// Divided difference of `e^{-it}` on nodes within `TAYLOR_SPREAD` of each
/// other: `Σ_{n≥m} (-i)^n e^{-ic}/n! · h_{n-m}(x - c)`.
fn dd_taylor(nodes: &[f64]) -> Complex64 {
    let m = nodes.len() - 1;
    let (lo, hi) = nodes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let c = 0.5 * (lo + hi);
    // Complete homogeneous polynomials h_p of the shifted nodes.
    let mut h = [0.0f64; TAYLOR_TERMS];
    h[0] = 1.0;
    for &x in nodes {
        let y = x - c;
        for p in 1..TAYLOR_TERMS {
            h[p] += y * h[p - 1];
        }
    }
    // coef = (-i)^n / n!, starting at n = m.
    let mut coef = Complex64::new(1.0, 0.0);
    for n in 1..=m {
        coef *= -I / n as f64;
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (p, hp) in h.iter().enumerate() {
        sum += coef * *hp;
        coef *= -I / (m + p + 1) as f64;
    }
    cis_neg(c) * sum
}

/// Divided difference of `e^{-it}` on arbitrary (possibly repeated) nodes.
pub fn exp_divided_difference(nodes: &[f64]) -> Complex64 {
    let mut x = nodes.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    // table[i] holds the divided difference on x[i..=i+len].
    let mut table: Vec<Complex64> = x.iter().map(|&t| cis_neg(t)).collect();
    for len in 1..n {
        for i in 0..n - len {
            let j = i + len;
            let gap = x[j] - x[i];
            table[i] = if gap <= TAYLOR_SPREAD {
                dd_taylor(&x[i..=j])
            } else {
                (table[i + 1] - table[i]) / gap
            };
        }
    }
    table[0]
}

/// Partial-fraction closed form, or `None` when any pole is too close or
/// the summands are too large for an accurate sum.
pub fn cf_closed_form(omega: &[f64]) -> Option<Complex64> {
    let k = omega.len();
    let scale = 1.0 + omega.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let tol = 1e-6 * scale;
    let mut sum = Complex64::new(0.0, 0.0);
    let kf = factorial(k);
    for (l, &wl) in omega.iter().enumerate() {
        let mut den = wl;
        if wl.abs() <= tol {
            return None;
        }
        for (j, &wj) in omega.iter().enumerate() {
            if j != l {
                if (wj - wl).abs() <= tol {
                    return None;
                }
                den *= wj - wl;
            }
        }
        // 1 - e^{-iω}, with 1 - cos ω written as 2 sin²(ω/2) to keep its
        // relative accuracy at small ω.
        let half = (0.5 * wl).sin();
        let term = Complex64::new(2.0 * half * half, wl.sin()) / den;
        if term.norm() * kf > CLOSED_FORM_MAX_TERM {
            return None;
        }
        sum += term;
    }
    Some(sum * kf / i_pow(k))
}

/// Literal `k`-step recursion from the sinc base case. Accurate only when
/// every partial frequency stays away from zero; used as a cross-check.
pub fn cf_recursion(omega: &[f64]) -> Complex64 {
    let k = omega.len();
    if omega.iter().all(|&w| w == 0.0) {
        return Complex64::new(1.0, 0.0);
    }
    // The standard simplex is exchangeable: move a nonzero entry last.
    let mut w = omega.to_vec();
    if w[k - 1] == 0.0 {
        let pos = w.iter().position(|&x| x != 0.0).unwrap();
        w.swap(pos, k - 1);
    }
    let wk = w[k - 1];
    if k == 1 {
        return (Complex64::new(1.0, 0.0) - cis_neg(wk)) / (I * wk);
    }
    let head = &w[..k - 1];
    let shifted: Vec<f64> = head.iter().map(|x| x - wk).collect();
    (k as f64 / (I * wk)) * (cf_recursion(head) - cis_neg(wk) * cf_recursion(&shifted))
}

fn cf_standard_unchecked(omega: &[f64]) -> Complex64 {
    if omega.iter().all(|&w| w == 0.0) {
        return Complex64::new(1.0, 0.0);
    }
    if let Some(v) = cf_closed_form(omega) {
        return v;
    }
    let k = omega.len();
    let mut nodes = Vec::with_capacity(k + 1);
    nodes.push(0.0);
    nodes.extend_from_slice(omega);
    exp_divided_difference(&nodes) * factorial(k) * i_pow(k)
}

/// Characteristic function of the uniform density on `Δ_K`.
pub fn cf_standard(k: usize, omega: &[f64]) -> Result<Complex64> {
    if omega.len() != k || k == 0 {
        return Err(Error::DimMismatch {
            expected: k,
            actual: omega.len(),
        });
    }
    Ok(cf_standard_unchecked(omega))
}

/// `F_S(ω) = e^{-iωᵀv_0} F_Δ(Θᵀω)`.
pub fn cf_simplex(s: &Simplex, omega: &[f64]) -> Result<Complex64> {
    if omega.len() != s.dim() {
        return Err(Error::DimMismatch {
            expected: s.dim(),
            actual: omega.len(),
        });
    }
    s.check_nondegenerate()?;
    Ok(cf_simplex_unchecked(s, omega))
}

fn cf_simplex_unchecked(s: &Simplex, omega: &[f64]) -> Complex64 {
    let v0 = s.vertex(0);
    let proj: Vec<f64> = (1..=s.dim())
        .map(|j| {
            s.vertex(j)
                .iter()
                .zip(v0)
                .zip(omega)
                .map(|((a, b), w)| (a - b) * w)
                .sum()
        })
        .collect();
    let phase: f64 = v0.iter().zip(omega).map(|(a, w)| a * w).sum();
    if phase == 0.0 {
        return cf_standard_unchecked(&proj);
    }
    cis_neg(phase) * cf_standard_unchecked(&proj)
}

/// CF of `f_S * G_σ`: the simplex CF times `e^{-σ²||ω||²/2}`.
pub fn cf_noisy(m: &NoisyModel, omega: &[f64]) -> Result<Complex64> {
    let base = cf_simplex(&m.simplex, omega)?;
    if m.sigma == 0.0 {
        return Ok(base);
    }
    let w2: f64 = omega.iter().map(|w| w * w).sum();
    Ok(base * (-0.5 * m.sigma * m.sigma * w2).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    ClosedFormQuadrature,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub alpha: f64,
    pub in_band_energy: f64,
    pub out_band_energy: f64,
    pub total_energy: f64,
    /// `out_band / total`.
    pub normalized_tail: f64,
    pub method: TailMethod,
}

pub fn default_grid(k: usize) -> usize {
    match k {
        1 => 2048,
        2 => 512,
        _ => 128,
    }
}

/// Spectral energy of `f_S` inside and outside the box `||ω||_∞ < α`.
///
/// The total `∫|F_S|² = (2π)^K ∫f_S² = (2π)^K / Vol(S)` is exact, the
/// in-band part is a tensor trapezoid rule with `grid` nodes per axis.
pub fn tail_energy(s: &Simplex, alpha: f64, grid: usize) -> Result<TailReport> {
    let k = s.dim();
    if k > 3 {
        return Err(Error::UnsupportedDimension {
            k,
            what: "tensor quadrature of the spectrum (use the Monte-Carlo mode)",
        });
    }
    check_alpha(alpha)?;
    if grid < 2 {
        return Err(Error::InvalidConfig("quadrature grid needs at least 2 nodes".into()));
    }
    s.check_nondegenerate()?;
    let h = 2.0 * alpha / (grid - 1) as f64;
    let node = |t: usize| -alpha + h * t as f64;
    let weight = |t: usize| if t == 0 || t == grid - 1 { 0.5 * h } else { h };
    let total_nodes = grid.pow(k as u32);
    let mut omega = vec![0.0; k];
    let mut slab = Vec::with_capacity(grid);
    let mut partial = Vec::with_capacity(total_nodes / grid);
    for outer in 0..total_nodes / grid {
        slab.clear();
        let mut w_outer = 1.0;
        let mut code = outer;
        for axis in 1..k {
            let t = code % grid;
            code /= grid;
            omega[axis] = node(t);
            w_outer *= weight(t);
        }
        for t in 0..grid {
            omega[0] = node(t);
            slab.push(weight(t) * cf_simplex_unchecked(s, &omega).norm_sqr());
        }
        partial.push(w_outer * pairwise_sum(&slab));
    }
    let in_band = pairwise_sum(&partial);
    Ok(report(s, alpha, in_band, TailMethod::ClosedFormQuadrature))
}

/// Monte-Carlo version of [`tail_energy`] for any K.
pub fn tail_energy_mc(s: &Simplex, alpha: f64, mc: usize, seed: u64) -> Result<TailReport> {
    check_alpha(alpha)?;
    s.check_nondegenerate()?;
    let k = s.dim();
    let mut rng = Stream::derived(seed, "tail", &[]);
    let mut omega = vec![0.0; k];
    let vals: Vec<f64> = (0..mc.max(1))
        .map(|_| {
            for w in omega.iter_mut() {
                *w = rng.uniform_range(-alpha, alpha);
            }
            cf_simplex_unchecked(s, &omega).norm_sqr()
        })
        .collect();
    let box_vol = (2.0 * alpha).powi(k as i32);
    let in_band = box_vol * pairwise_sum(&vals) / vals.len() as f64;
    Ok(report(s, alpha, in_band, TailMethod::MonteCarlo))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

fn report(s: &Simplex, alpha: f64, in_band: f64, method: TailMethod) -> TailReport {
    let total = (2.0 * PI).powi(s.dim() as i32) / s.volume();
    let out = (total - in_band).max(0.0);
    TailReport {
        alpha,
        in_band_energy: in_band,
        out_band_energy: out,
        total_energy: total,
        normalized_tail: out / total,
        method,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverabilityReport {
    pub sigma: f64,
    pub snr: f64,
    /// `||f_1 - f_2||_2` and its standard error.
    pub l2_plain: f64,
    pub l2_plain_se: f64,
    /// `||(f_1 - f_2) * G_σ||_2` and its standard error.
    pub l2_smoothed: f64,
    pub l2_smoothed_se: f64,
    /// `l2_plain / l2_smoothed`.
    pub ratio: f64,
    /// `exp(c K / SNR²)` for the supplied constant.
    pub envelope: f64,
    pub c: f64,
}

/// `||(f_1 - f_2) * G_σ||_2` by Monte Carlo in the frequency domain:
/// with `ω ~ N(0, I/(2σ²))`,
/// `||·||² = (2π)^{-K} (π/σ²)^{K/2} E|F_1(ω) - F_2(ω)|²`.
///
/// The frequency draws depend only on `seed`, not on `σ`, so sweeps over σ
/// reuse the same standard normals.
pub fn smoothed_l2(s1: &Simplex, s2: &Simplex, sigma: f64, mc: usize, seed: u64) -> Result<(f64, f64)> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimMismatch {
            expected: s1.dim(),
            actual: s2.dim(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::UnsupportedNoiseless);
    }
    s1.check_nondegenerate()?;
    s2.check_nondegenerate()?;
    let k = s1.dim();
    let mut rng = Stream::derived(seed, "smoothed_l2", &[]);
    let scale = 1.0 / (2f64.sqrt() * sigma);
    let mut omega = vec![0.0; k];
    let vals: Vec<f64> = (0..mc.max(2))
        .map(|_| {
            rng.fill_normal(&mut omega);
            omega.iter_mut().for_each(|w| *w *= scale);
            (cf_simplex_unchecked(s1, &omega) - cf_simplex_unchecked(s2, &omega)).norm_sqr()
        })
        .collect();
    let n = vals.len() as f64;
    let mean = pairwise_sum(&vals) / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let kf = k as f64;
    let c = (2.0 * PI).powf(-kf) * (PI / (sigma * sigma)).powf(0.5 * kf);
    let sq = c * mean;
    let sq_se = c * (var / n).sqrt();
    let value = sq.max(0.0).sqrt();
    let se = if value > 0.0 { sq_se / (2.0 * value) } else { 0.0 };
    Ok((value, se))
}

pub fn recoverability_check(
    s1: &Simplex,
    s2: &Simplex,
    sigma: f64,
    mc: usize,
    seed: u64,
) -> Result<RecoverabilityReport> {
    recoverability_check_with(s1, s2, sigma, mc, seed, 1.0)
}

/// As [`recoverability_check`] with an explicit envelope constant `c`.
pub fn recoverability_check_with(
    s1: &Simplex,
    s2: &Simplex,
    sigma: f64,
    mc: usize,
    seed: u64,
    c: f64,
) -> Result<RecoverabilityReport> {
    let plain = l2_uniform(s1, s2, mc, seed)?;
    let (smooth, smooth_se) = smoothed_l2(s1, s2, sigma, mc, seed)?;
    let snr = crate::geometry::snr(s1, sigma);
    Ok(RecoverabilityReport {
        sigma,
        snr,
        l2_plain: plain.value,
        l2_plain_se: plain.std_error,
        l2_smoothed: smooth,
        l2_smoothed_se: smooth_se,
        ratio: plain.value / smooth,
        envelope: (c * s1.dim() as f64 / (snr * snr)).exp(),
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn sinc_zero_at_two_pi() {
        let v = cf_standard(1, &[2.0 * PI]).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn value_at_origin_is_exactly_one() {
        for k in 1..=5 {
            assert_eq!(cf_standard(k, &vec![0.0; k]).unwrap(), Complex64::new(1.0, 0.0));
        }
        let s = Simplex::new(vec![vec![0.3, 1.0], vec![2.0, -1.0], vec![0.5, 0.7]]).unwrap();
        assert_eq!(cf_simplex(&s, &[0.0, 0.0]).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn paths_agree_at_distinct_nodes() {
        let w = [1.3, -0.7, 2.1];
        let closed = cf_closed_form(&w).unwrap();
        let rec = cf_recursion(&w);
        let nodes = [0.0, 1.3, -0.7, 2.1];
        let dd = exp_divided_difference(&nodes) * 6.0 * i_pow(3);
        assert!(close(closed, rec, 1e-12));
        assert!(close(closed, dd, 1e-12));
    }

    #[test]
    fn nearly_coincident_nodes_are_continuous() {
        let a = cf_standard(2, &[1.0, 1.0]).unwrap();
        let b = cf_standard(2, &[1.0, 1.0 + 1e-9]).unwrap();
        let c = cf_standard(2, &[1.0, 1.0 + 1e-3]).unwrap();
        assert!(close(a, b, 1e-9));
        assert!(close(a, c, 1e-3));
        // On the diagonal F(ω, ω) = 2 ∫_0^1 s e^{-iωs} ds.
        let w: f64 = 1.0;
        let exact = 2.0 * ((cis_neg(w) * (1.0 + I * w)) - 1.0) / (w * w);
        assert!(close(a, exact, 1e-13));
    }

    #[test]
    fn modulus_bounded_by_one() {
        let mut rng = Stream::new(3);
        for _ in 0..200 {
            let w: Vec<f64> = (0..4).map(|_| rng.uniform_range(-30.0, 30.0)).collect();
            let v = cf_standard(4, &w).unwrap();
            assert!(v.norm() < 1.0);
        }
    }

    #[test]
    fn translation_is_a_phase() {
        let s = Simplex::standard(2);
        let b = [0.4, -1.1];
        let w = [0.9, 2.3];
        let a = cf_simplex(&s, &w).unwrap();
        let t = cf_simplex(&s.translate(&b), &w).unwrap();
        let phase = cis_neg(b[0] * w[0] + b[1] * w[1]);
        assert!(close(t, a * phase, 1e-13));
    }

    #[test]
    fn noisy_cf_is_damped() {
        let m = NoisyModel::new(Simplex::standard(2), 0.5).unwrap();
        let w = [1.0, 2.0];
        let base = cf_simplex(&m.simplex, &w).unwrap();
        let noisy = cf_noisy(&m, &w).unwrap();
        assert!(close(noisy, base * (-0.125 * 5.0f64).exp(), 1e-15));
    }

    #[test]
    fn quadrature_limited_to_three_dimensions() {
        assert!(matches!(
            tail_energy(&Simplex::standard(4), 5.0, 8),
            Err(Error::UnsupportedDimension { k: 4, .. })
        ));
        assert!(tail_energy_mc(&Simplex::standard(4), 5.0, 100, 1).is_ok());
    }
}
