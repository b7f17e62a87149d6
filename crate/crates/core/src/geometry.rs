//! Simplex representation and geometric functionals.
//!
//! A K-simplex is stored as K+1 vertices in R^K. `Θ` denotes the K×K matrix
//! whose columns are `v_i - v_0` for i = 1..K.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative degeneracy threshold: `|det Θ| < DEGENERACY_TOL * l_max^K`.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Barycentric weights at or above `-MEMBERSHIP_TOL` count as inside.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    dim: usize,
    /// Row-major `(dim + 1) x dim`.
    coords: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub volume: f64,
    pub a_max: f64,
    pub l_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

impl Simplex {
    /// Build a simplex, rejecting malformed or degenerate vertex sets.
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let s = Self::from_rows(vertices)?;
        s.check_nondegenerate()?;
        Ok(s)
    }

    /// Build a simplex checking only shape and finiteness.
    pub fn from_rows(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let n = vertices.len();
        if n < 2 {
            return Err(Error::MalformedSimplex(format!(
                "need at least 2 vertices, got {n}"
            )));
        }
        let dim = n - 1;
        let mut coords = Vec::with_capacity(n * dim);
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::MalformedSimplex(format!(
                    "vertex {i} has {} coordinates, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::MalformedSimplex(format!(
                    "vertex {i} has a non-finite coordinate"
                )));
            }
            coords.extend_from_slice(v);
        }
        Ok(Self { dim, coords })
    }

    /// Build from a flat row-major buffer of `(dim + 1) * dim` values.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() != (dim + 1) * dim {
            return Err(Error::MalformedSimplex(format!(
                "flat buffer of length {} does not hold {} vertices in R^{dim}",
                coords.len(),
                dim + 1
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::MalformedSimplex("non-finite coordinate".into()));
        }
        Ok(Self { dim, coords })
    }

    /// The standard simplex conv{0, e_1, ..., e_K}.
    pub fn standard(dim: usize) -> Self {
        let mut coords = vec![0.0; (dim + 1) * dim];
        for i in 0..dim {
            coords[(i + 1) * dim + i] = 1.0;
        }
        Self { dim, coords }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.vertices().map(<[f64]>::to_vec).collect()
    }

    /// Columns `v_i - v_0`, i = 1..K.
    pub fn theta(&self) -> DMatrix<f64> {
        let k = self.dim;
        let v0 = self.vertex(0);
        DMatrix::from_fn(k, k, |r, c| self.vertex(c + 1)[r] - v0[r])
    }

    pub fn det_theta(&self) -> f64 {
        self.theta().determinant()
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for v in self.vertices() {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi;
            }
        }
        let n = (self.dim + 1) as f64;
        c.iter_mut().for_each(|x| *x /= n);
        c
    }

    /// Longest edge length.
    pub fn l_max(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..=self.dim {
            for j in (i + 1)..=self.dim {
                best = best.max(dist2(self.vertex(i), self.vertex(j)));
            }
        }
        best.sqrt()
    }

    fn degeneracy_threshold(&self) -> f64 {
        DEGENERACY_TOL * self.l_max().powi(self.dim as i32)
    }

    pub fn is_degenerate(&self) -> bool {
        let det = self.det_theta().abs();
        !(det >= self.degeneracy_threshold()) || det == 0.0
    }

    pub fn check_nondegenerate(&self) -> Result<()> {
        let det = self.det_theta().abs();
        let tol = self.degeneracy_threshold();
        if det == 0.0 || !(det >= tol) {
            return Err(Error::DegenerateSimplex { det, tol });
        }
        Ok(())
    }

    /// Lebesgue measure `|det Θ| / K!` (no degeneracy check).
    pub fn volume(&self) -> f64 {
        self.det_theta().abs() / factorial(self.dim)
    }

    /// (K-1)-measure of the facet opposite vertex `skip`. For K = 1 the
    /// facet is a point and is given counting measure 1.
    pub fn facet_measure(&self, skip: usize) -> f64 {
        let k = self.dim;
        if k == 1 {
            return 1.0;
        }
        let idx: Vec<usize> = (0..=k).filter(|&i| i != skip).collect();
        let base = self.vertex(idx[0]);
        let g = DMatrix::from_fn(k, k - 1, |r, c| self.vertex(idx[c + 1])[r] - base[r]);
        let gram = g.transpose() * &g;
        gram.determinant().max(0.0).sqrt() / factorial(k - 1)
    }

    /// Index and measure of the largest facet.
    pub fn largest_facet(&self) -> (usize, f64) {
        (0..=self.dim)
            .map(|i| (i, self.facet_measure(i)))
            .fold((0, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            })
    }

    pub fn translate(&self, b: &[f64]) -> Self {
        assert_eq!(b.len(), self.dim);
        let mut coords = self.coords.clone();
        for row in coords.chunks_exact_mut(self.dim) {
            for (x, bi) in row.iter_mut().zip(b) {
                *x += bi;
            }
        }
        Self {
            dim: self.dim,
            coords,
        }
    }

    /// Image under `x -> A x + b` with `A` given row-major.
    pub fn affine(&self, a: &[f64], b: &[f64]) -> Self {
        let k = self.dim;
        assert_eq!(a.len(), k * k);
        assert_eq!(b.len(), k);
        let mut coords = Vec::with_capacity(self.coords.len());
        for v in self.vertices() {
            coords.extend(affine_point(a, b, v));
        }
        Self { dim: k, coords }
    }

    /// Homothety about the centroid by factor `c`.
    pub fn scale_about_centroid(&self, c: f64) -> Self {
        let g = self.centroid();
        let mut coords = self.coords.clone();
        for row in coords.chunks_exact_mut(self.dim) {
            for (x, gi) in row.iter_mut().zip(&g) {
                *x = gi + c * (*x - gi);
            }
        }
        Self {
            dim: self.dim,
            coords,
        }
    }

    /// Same vertex set, listed in the given order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.dim + 1);
        let mut coords = Vec::with_capacity(self.coords.len());
        for &i in order {
            coords.extend_from_slice(self.vertex(i));
        }
        Self {
            dim: self.dim,
            coords,
        }
    }

    /// Point `Σ w_i v_i` for a weight vector `w` of length K+1.
    pub fn point_from_weights(&self, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.dim + 1);
        out.iter_mut().for_each(|x| *x = 0.0);
        for (wi, v) in w.iter().zip(self.vertices()) {
            for (o, vj) in out.iter_mut().zip(v) {
                *o += wi * vj;
            }
        }
    }

    pub fn frame(&self) -> Result<SimplexFrame> {
        SimplexFrame::new(self)
    }

    pub fn summary(&self) -> Result<GeometrySummary> {
        geometry_summary(self)
    }
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn affine_point(a: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let k = x.len();
    (0..k)
        .map(|r| b[r] + (0..k).map(|c| a[r * k + c] * x[c]).sum::<f64>())
        .collect()
}

/// Precomputed inverse of `Θ` for repeated barycentric queries.
#[derive(Clone, Debug)]
pub struct SimplexFrame {
    dim: usize,
    origin: Vec<f64>,
    /// Row-major `Θ^{-1}`.
    inv: Vec<f64>,
}

impl SimplexFrame {
    pub fn new(s: &Simplex) -> Result<Self> {
        s.check_nondegenerate()?;
        let k = s.dim();
        let inv = s.theta().try_inverse().ok_or(Error::DegenerateSimplex {
            det: 0.0,
            tol: s.degeneracy_threshold(),
        })?;
        let mut flat = Vec::with_capacity(k * k);
        for r in 0..k {
            for c in 0..k {
                flat.push(inv[(r, c)]);
            }
        }
        Ok(Self {
            dim: k,
            origin: s.vertex(0).to_vec(),
            inv: flat,
        })
    }

    /// Barycentric weights `φ` with `V φ = x`, `Σ φ = 1`.
    pub fn barycentric_into(&self, x: &[f64], out: &mut [f64]) {
        let k = self.dim;
        let mut rest = 0.0;
        for r in 0..k {
            let row = &self.inv[r * k..(r + 1) * k];
            let w: f64 = row
                .iter()
                .zip(x.iter().zip(&self.origin))
                .map(|(a, (xi, oi))| a * (xi - oi))
                .sum();
            out[r + 1] = w;
            rest += w;
        }
        out[0] = 1.0 - rest;
    }

    pub fn barycentric(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim + 1];
        self.barycentric_into(x, &mut out);
        out
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        let k = self.dim;
        let mut rest = 0.0;
        for r in 0..k {
            let row = &self.inv[r * k..(r + 1) * k];
            let w: f64 = row
                .iter()
                .zip(x.iter().zip(&self.origin))
                .map(|(a, (xi, oi))| a * (xi - oi))
                .sum();
            if w < -MEMBERSHIP_TOL {
                return false;
            }
            rest += w;
        }
        1.0 - rest >= -MEMBERSHIP_TOL
    }
}

pub fn geometry_summary(s: &Simplex) -> Result<GeometrySummary> {
    s.check_nondegenerate()?;
    let theta = s.theta();
    let sv = theta.clone().svd(false, false).singular_values;
    let lambda_max = sv.max();
    let lambda_min = sv.min();
    Ok(GeometrySummary {
        volume: theta.determinant().abs() / factorial(s.dim()),
        a_max: s.largest_facet().1,
        l_max: s.l_max(),
        lambda_min,
        lambda_max,
    })
}

/// (θ̲, θ̄)-isoperimetricity: `a_max ≤ θ̄ vol^{(K-1)/K}` and
/// `l_max ≤ θ̲ K vol^{1/K}`.
pub fn is_isoperimetric(s: &Simplex, theta_lo: f64, theta_hi: f64) -> Result<bool> {
    let g = geometry_summary(s)?;
    Ok(summary_is_isoperimetric(&g, s.dim(), theta_lo, theta_hi))
}

pub(crate) fn summary_is_isoperimetric(
    g: &GeometrySummary,
    k: usize,
    theta_lo: f64,
    theta_hi: f64,
) -> bool {
    let kf = k as f64;
    let facet_ok = g.a_max <= theta_hi * g.volume.powf((kf - 1.0) / kf);
    let diam_ok = g.l_max <= theta_lo * kf * g.volume.powf(1.0 / kf);
    facet_ok && diam_ok
}

pub fn barycentric(s: &Simplex, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != s.dim() {
        return Err(Error::DimMismatch {
            expected: s.dim(),
            actual: x.len(),
        });
    }
    Ok(s.frame()?.barycentric(x))
}

pub fn contains(s: &Simplex, x: &[f64]) -> Result<bool> {
    Ok(barycentric(s, x)?.iter().all(|&w| w >= -MEMBERSHIP_TOL))
}

/// `L_max / (K σ)`; infinite when `σ = 0`.
pub fn snr(s: &Simplex, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return f64::INFINITY;
    }
    s.l_max() / (s.dim() as f64 * sigma)
}

/// Unit inward normal of the facet opposite `skip`.
pub fn inward_facet_normal(s: &Simplex, skip: usize) -> Vec<f64> {
    let k = s.dim();
    if k == 1 {
        let other = s.vertex(1 - skip)[0];
        let me = s.vertex(skip)[0];
        return vec![(me - other).signum()];
    }
    let idx: Vec<usize> = (0..=k).filter(|&i| i != skip).collect();
    let base = DVector::from_column_slice(s.vertex(idx[0]));
    let edges = DMatrix::from_fn(k, k - 1, |r, c| s.vertex(idx[c + 1])[r] - base[r]);
    // Normal = component of (apex - base) orthogonal to the facet span.
    let apex = DVector::from_column_slice(s.vertex(skip)) - &base;
    let q = edges.qr().q();
    let proj = &q * (q.transpose() * &apex);
    let n = apex - proj;
    let norm = n.norm();
    n.iter().map(|x| x / norm).collect()
}

impl Serialize for Simplex {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SimplexJson {
            dim: self.dim,
            vertices: self.to_rows(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Simplex {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = SimplexJson::deserialize(de)?;
        if raw.vertices.len() != raw.dim + 1 {
            return Err(serde::de::Error::custom(format!(
                "dim {} requires {} vertices, got {}",
                raw.dim,
                raw.dim + 1,
                raw.vertices.len()
            )));
        }
        Simplex::from_rows(raw.vertices).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct SimplexJson {
    dim: usize,
    vertices: Vec<Vec<f64>>,
}
