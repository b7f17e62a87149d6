//! Draws from `y = Vφ + σg` with `φ ~ Dirichlet(1, …, 1)` and `g ~ N(0, I_K)`.
//!
//! Every sample index owns a fixed block of the ChaCha8 keystream (see
//! [`CounterStream`]), so a parallel fill and a serial loop produce the same
//! bits, and sample `i` does not depend on `n`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Simplex;
use crate::harness::Provenance;
use crate::rng::CounterStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyModel {
    pub simplex: Simplex,
    pub sigma: f64,
}

impl NoisyModel {
    pub fn new(simplex: Simplex, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {sigma}")));
        }
        simplex.check_nondegenerate()?;
        Ok(Self { simplex, sigma })
    }

    pub fn dim(&self) -> usize {
        self.simplex.dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    dim: usize,
    /// Row-major `n x dim`.
    points: Vec<f64>,
    pub seed: u64,
    pub model_tag: Option<NoisyModel>,
}

impl SampleSet {
    pub fn from_flat(dim: usize, points: Vec<f64>, seed: u64) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(Error::InvalidConfig(format!(
                "cannot split {} values into points of dimension {dim}",
                points.len()
            )));
        }
        Ok(Self {
            dim,
            points,
            seed,
            model_tag: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], seed: u64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        Self::from_flat(dim, rows.concat(), seed)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.points
    }

    /// Rows with even / odd 0-based index.
    pub fn split_parity(&self) -> (SampleSet, SampleSet) {
        let mut even = Vec::new();
        let mut odd = Vec::new();
        for (i, p) in self.iter().enumerate() {
            if i % 2 == 0 {
                even.extend_from_slice(p);
            } else {
                odd.extend_from_slice(p);
            }
        }
        let mk = |points: Vec<f64>| SampleSet {
            dim: self.dim,
            points,
            seed: self.seed,
            model_tag: self.model_tag.clone(),
        };
        (mk(even), mk(odd))
    }

    pub fn map_points(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> SampleSet {
        let points: Vec<f64> = self.iter().flat_map(f).collect();
        SampleSet {
            dim: self.dim,
            points,
            seed: self.seed,
            model_tag: None,
        }
    }
}

fn draws_per_item(k: usize) -> usize {
    (k + 1) + 2 * k.div_ceil(2)
}

/// `count` uniform Dirichlet weight vectors of length `k_plus_1`.
pub fn dirichlet_uniform(k_plus_1: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(k_plus_1 >= 2, "need at least two weights");
    let cs = CounterStream::new(seed, k_plus_1);
    (0..count)
        .map(|i| {
            let mut w = vec![0.0; k_plus_1];
            cs.item(i as u64).dirichlet_uniform(&mut w);
            w
        })
        .collect()
}

/// Same draws as [`sample`], also returning the noiseless points `Vφ_i`.
pub fn sample_with_latent(model: &NoisyModel, n: usize, seed: u64) -> (SampleSet, Vec<f64>) {
    let k = model.dim();
    let cs = CounterStream::new(seed, draws_per_item(k));
    let mut noisy = vec![0.0; n * k];
    let mut clean = vec![0.0; n * k];
    noisy
        .par_chunks_mut(k)
        .zip(clean.par_chunks_mut(k))
        .enumerate()
        .for_each_init(
            || (vec![0.0; k + 1], vec![0.0; k]),
            |(w, g), (i, (y, x))| {
                let mut s = cs.item(i as u64);
                s.dirichlet_uniform(w);
                s.fill_normal(g);
                model.simplex.point_from_weights(w, x);
                for ((yj, xj), gj) in y.iter_mut().zip(x.iter()).zip(g.iter()) {
                    *yj = xj + model.sigma * gj;
                }
            },
        );
    let set = SampleSet {
        dim: k,
        points: noisy,
        seed,
        model_tag: Some(model.clone()),
    };
    (set, clean)
}

pub fn sample(model: &NoisyModel, n: usize, seed: u64) -> SampleSet {
    sample_with_latent(model, n, seed).0
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    schema: u32,
    seed: u64,
    n: usize,
    model: Option<NoisyModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

/// Path of the metadata file written next to a samples CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_samples(path: &Path, set: &SampleSet) -> Result<()> {
    write_samples_with(path, set, None)
}

/// As [`write_samples`], with a provenance comment line at the top of the
/// CSV and a copy in the sidecar.
pub fn write_samples_with(path: &Path, set: &SampleSet, provenance: Option<&Provenance>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    if let Some(p) = provenance {
        writeln!(out, "{}", p.csv_comment())?;
    }
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (0..set.dim).map(|j| format!("x{j}")).collect();
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(set.dim);
    for p in set.iter() {
        row.clear();
        row.extend(p.iter().map(|x| format!("{x:?}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    let side = Sidecar {
        schema: 1,
        seed: set.seed,
        n: set.len(),
        model: set.model_tag.clone(),
        provenance: provenance.cloned(),
    };
    let mut f = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer_pretty(&mut f, &side)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Read a samples CSV; the sidecar, when present, supplies seed and model.
pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let dim = r.headers()?.len();
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: rec.len(),
            });
        }
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!("not a number in {}: {field:?}", path.display()))
            })?;
            points.push(v);
        }
    }
    let mut set = SampleSet::from_flat(dim, points, 0)?;
    let side = sidecar_path(path);
    if side.exists() {
        let meta: Sidecar = serde_json::from_reader(File::open(side)?)?;
        set.seed = meta.seed;
        set.model_tag = meta.model;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::contains;

    #[test]
    fn weights_are_on_the_simplex() {
        for w in dirichlet_uniform(5, 1000, 3) {
            assert!(w.iter().all(|&x| x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_samples_stay_inside() {
        let m = NoisyModel::new(Simplex::standard(3), 0.0).unwrap();
        let set = sample(&m, 2000, 11);
        for p in set.iter() {
            assert!(contains(&m.simplex, p).unwrap());
        }
    }

    #[test]
    fn prefix_stability() {
        let m = NoisyModel::new(Simplex::standard(2), 0.3).unwrap();
        let a = sample(&m, 50, 9);
        let b = sample(&m, 80, 9);
        assert_eq!(a.flat(), &b.flat()[..100]);
    }

    #[test]
    fn parity_split() {
        let set = SampleSet::from_flat(1, vec![0.0, 1.0, 2.0, 3.0, 4.0], 0).unwrap();
        let (e, o) = set.split_parity();
        assert_eq!(e.flat(), &[0.0, 2.0, 4.0]);
        assert_eq!(o.flat(), &[1.0, 3.0]);
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(NoisyModel::new(Simplex::standard(2), -0.1).is_err());
    }
}
