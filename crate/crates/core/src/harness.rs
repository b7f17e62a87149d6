//! Experiment configs, sweeps and report files.
//!
//! Every trial draws its data and learner seed from the master seed through
//! [`derive_seed`] with a stage label and the `(axis index, trial)` pair, so
//! rows can be recomputed independently and in any order. Rows are collected
//! in axis-major, trial-minor order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{snr, Simplex};
use crate::metrics::{l2_uniform, tv_uniform, vertex_l1};
use crate::rng::derive_seed;
use crate::sampler::{sample, NoisyModel};
use crate::scheffe::{learn, LearnerConfig};

pub const SCHEMA: u32 = 1;
/// Monte-Carlo size of the per-trial TV and ℓ2 errors.
pub const ERROR_MC: usize = 20_000;

/// Build tag embedded in every output file.
pub fn build_tag() -> String {
    match option_env!("SIMPLEX_PAC_BUILD_TAG") {
        Some(tag) => tag.to_string(),
        None => format!("simplex-pac-v{}", env!("CARGO_PKG_VERSION")),
    }
}

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub build: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new<T: Serialize>(config: &T, seed: u64) -> Result<Self> {
        Ok(Self {
            build: build_tag(),
            config_hash: config_hash(config)?,
            seed,
        })
    }

    /// Comment line prepended to CSV outputs.
    pub fn csv_comment(&self) -> String {
        format!(
            "# build={} config_hash={} seed={}",
            self.build, self.config_hash, self.seed
        )
    }
}

/// Process exit code for an error: 2 for configuration errors, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidConfidence(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "K")]
    pub k: usize,
    /// True simplex; `Δ_K` when absent.
    pub simplex: Option<Simplex>,
    pub n: Option<usize>,
    pub n_sweep: Option<Vec<usize>>,
    pub sigma: Option<f64>,
    pub sigma_sweep: Option<Vec<f64>>,
    /// Alternative to `sigma_sweep`: SNR values converted through
    /// `σ = L_max / (K·SNR)`.
    pub snr_sweep: Option<Vec<f64>>,
    pub epsilon: f64,
    pub delta: f64,
    pub theta_hi: f64,
    pub theta_lo: f64,
    /// Learner budgets; the four fields above override its copies.
    pub learner: LearnerConfig,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Record wall-clock time per trial. Off by default so that reports are
    /// byte-identical across runs.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let l = LearnerConfig::default();
        Self {
            k: 2,
            simplex: None,
            n: Some(2000),
            n_sweep: None,
            sigma: Some(0.05),
            sigma_sweep: None,
            snr_sweep: None,
            epsilon: l.epsilon,
            delta: l.delta,
            theta_hi: l.theta_hi,
            theta_lo: l.theta_lo,
            learner: l,
            trials: 1,
            seed: 0,
            output: None,
            timing: false,
        }
    }
}

/// One point of the sweep axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisPoint {
    pub n: usize,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    None,
    N,
    Sigma,
}

impl ExperimentConfig {
    /// Parses a config. The default `n` and `sigma` only apply when the
    /// file does not sweep that axis.
    pub fn from_json(text: &str) -> Result<Self> {
        let bad = |e: serde_json::Error| Error::InvalidConfig(e.to_string());
        let raw: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
        let mut cfg: Self = serde_json::from_value(raw.clone()).map_err(bad)?;
        let has = |key: &str| raw.get(key).is_some_and(|v| !v.is_null());
        if has("n_sweep") && !has("n") {
            cfg.n = None;
        }
        if (has("sigma_sweep") || has("snr_sweep")) && !has("sigma") {
            cfg.sigma = None;
        }
        Ok(cfg)
    }

    pub fn truth(&self) -> Simplex {
        self.simplex.clone().unwrap_or_else(|| Simplex::standard(self.k))
    }

    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            theta_hi: self.theta_hi,
            theta_lo: self.theta_lo,
            ..self.learner.clone()
        }
    }

    pub fn axis(&self) -> SweepAxis {
        if self.n_sweep.is_some() {
            SweepAxis::N
        } else if self.sigma_sweep.is_some() || self.snr_sweep.is_some() {
            SweepAxis::Sigma
        } else {
            SweepAxis::None
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if let Some(s) = &self.simplex {
            if s.dim() != self.k {
                return bad(format!("simplex has dimension {}, K = {}", s.dim(), self.k));
            }
            if let Err(e) = s.check_nondegenerate() {
                return bad(e.to_string());
            }
        }
        let sweeps = [
            self.n_sweep.is_some(),
            self.sigma_sweep.is_some(),
            self.snr_sweep.is_some(),
        ];
        if sweeps.iter().filter(|&&b| b).count() > 1 {
            return bad("exactly one sweep axis is allowed per run".into());
        }
        match (&self.n, &self.n_sweep) {
            (Some(_), Some(_)) => return bad("give either n or n_sweep, not both".into()),
            (None, None) => return bad("n or n_sweep is required".into()),
            _ => {}
        }
        let sigma_axis = self.sigma_sweep.is_some() || self.snr_sweep.is_some();
        if self.sigma.is_some() && sigma_axis {
            return bad("give either sigma or a sigma/snr sweep, not both".into());
        }
        if self.sigma.is_none() && !sigma_axis {
            return bad("sigma, sigma_sweep or snr_sweep is required".into());
        }
        for list in [self.n_sweep.as_ref().map(Vec::len), self.sigma_sweep.as_ref().map(Vec::len), self.snr_sweep.as_ref().map(Vec::len)]
            .into_iter()
            .flatten()
        {
            if list == 0 {
                return bad("sweep lists must be non-empty".into());
            }
        }
        let ns: Vec<usize> = self.n.iter().copied().chain(self.n_sweep.iter().flatten().copied()).collect();
        if ns.iter().any(|&n| n < 2) {
            return bad("sample sizes must be at least 2".into());
        }
        let sigmas = self.sigma.iter().chain(self.sigma_sweep.iter().flatten());
        for &s in sigmas {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("sigma must be finite and nonnegative, got {s}"));
            }
        }
        for &r in self.snr_sweep.iter().flatten() {
            if !(r > 0.0) {
                return bad(format!("SNR values must be positive, got {r}"));
            }
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        self.learner_config().validate()
    }

    /// The sweep points in configuration order.
    pub fn points(&self) -> Vec<AxisPoint> {
        let truth = self.truth();
        let sigmas: Vec<f64> = if let Some(v) = &self.sigma_sweep {
            v.clone()
        } else if let Some(v) = &self.snr_sweep {
            v.iter()
                .map(|r| truth.l_max() / (self.k as f64 * r))
                .collect()
        } else {
            vec![self.sigma.unwrap_or(0.0)]
        };
        let ns: Vec<usize> = match (&self.n_sweep, self.n) {
            (Some(v), _) => v.clone(),
            (None, Some(n)) => vec![n],
            (None, None) => Vec::new(),
        };
        ns.iter()
            .flat_map(|&n| sigmas.iter().map(move |&sigma| AxisPoint { n, sigma }))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub n: usize,
    pub sigma: f64,
    pub snr: f64,
    pub tv_error: f64,
    pub l2_error: f64,
    pub vertex_l1_error: f64,
    pub runtime_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub iqr: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let q1 = quantile(values, 0.25);
        let q3 = quantile(values, 0.75);
        Self {
            median: quantile(values, 0.5),
            iqr: q3 - q1,
        }
    }
}

/// Linear-interpolation quantile of the sorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub n: usize,
    pub sigma: f64,
    pub snr: f64,
    pub trials: usize,
    pub tv_error: Spread,
    pub l2_error: Spread,
    pub vertex_l1_error: Spread,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub axis: SweepAxis,
    pub rows: Vec<TrialRow>,
    pub summary: Vec<PointSummary>,
}

fn run_trial(
    truth: &Simplex,
    learner: &LearnerConfig,
    point: AxisPoint,
    trial: usize,
    seed: u64,
    label: &str,
    idx: &[u64],
    timing: bool,
) -> Result<TrialRow> {
    let start = Instant::now();
    let model = NoisyModel::new(truth.clone(), point.sigma)?;
    let data = sample(&model, point.n, derive_seed(seed, &format!("{label}.sample"), idx));
    let cfg = LearnerConfig {
        seed: derive_seed(seed, &format!("{label}.learn"), idx),
        ..learner.clone()
    };
    let fit = learn(&data, &cfg)?;
    let err_seed = derive_seed(seed, &format!("{label}.error"), idx);
    let tv = tv_uniform(&fit.simplex, truth, ERROR_MC, err_seed)?;
    let l2 = l2_uniform(&fit.simplex, truth, ERROR_MC, err_seed)?;
    let vl1 = vertex_l1(&fit.simplex, truth)?;
    Ok(TrialRow {
        trial,
        n: point.n,
        sigma: point.sigma,
        snr: snr(truth, point.sigma),
        tv_error: tv.value,
        l2_error: l2.value,
        vertex_l1_error: vl1.cost,
        runtime_ms: if timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        },
    })
}

fn run_points(
    cfg: &ExperimentConfig,
    points: &[AxisPoint],
    label: &str,
) -> Result<(Vec<TrialRow>, Vec<PointSummary>)> {
    let truth = cfg.truth();
    let learner = cfg.learner_config();
    let cells: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(p, t)| {
            run_trial(
                &truth,
                &learner,
                points[p],
                t,
                cfg.seed,
                label,
                &[p as u64, t as u64],
                cfg.timing,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = rows
        .chunks(cfg.trials)
        .zip(points)
        .map(|(chunk, pt)| {
            let col = |f: fn(&TrialRow) -> f64| chunk.iter().map(f).collect::<Vec<_>>();
            PointSummary {
                n: pt.n,
                sigma: pt.sigma,
                snr: snr(&truth, pt.sigma),
                trials: chunk.len(),
                tv_error: Spread::of(&col(|r| r.tv_error)),
                l2_error: Spread::of(&col(|r| r.l2_error)),
                vertex_l1_error: Spread::of(&col(|r| r.vertex_l1_error)),
            }
        })
        .collect();
    Ok((rows, summary))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (rows, summary) = run_points(cfg, &cfg.points(), "experiment")?;
    Ok(ExperimentReport {
        provenance: Provenance::new(cfg, cfg.seed)?,
        axis: cfg.axis(),
        rows,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub provenance: Provenance,
    pub rows: Vec<TrialRow>,
    /// Sweep points ordered by increasing SNR.
    pub curve: Vec<PointSummary>,
    pub noiseless: PointSummary,
    /// Median TV error is non-increasing along the curve.
    pub monotone: bool,
    /// Scanning from the highest SNR down, the first SNR whose median TV
    /// error exceeds twice the noiseless median.
    pub knee_snr: Option<f64>,
    pub sqrt_k: f64,
    /// Whether the knee lies in `[√K/4, 4√K]`.
    pub knee_in_range: Option<bool>,
    /// Whether the sweep has SNR values on both sides of `√K`.
    pub spans_sqrt_k: bool,
}

/// Runs a σ sweep plus a noiseless baseline at the same `n` and locates the
/// SNR below which the error departs from the noiseless regime.
pub fn sweep_phase_transition(cfg: &ExperimentConfig) -> Result<PhaseReport> {
    cfg.validate()?;
    if cfg.n_sweep.is_some() {
        return Err(Error::InvalidConfig(
            "phase sweeps need a sigma or snr axis and a single n".into(),
        ));
    }
    let points = cfg.points();
    let (rows, summary) = run_points(cfg, &points, "phase")?;
    let n = points[0].n;
    let (_, base) = run_points(cfg, &[AxisPoint { n, sigma: 0.0 }], "phase.noiseless")?;
    let noiseless = base.into_iter().next().expect("one baseline point");

    let mut curve = summary;
    curve.sort_by(|a, b| a.snr.total_cmp(&b.snr));
    let monotone = curve
        .windows(2)
        .all(|w| w[1].tv_error.median <= w[0].tv_error.median);
    let threshold = 2.0 * noiseless.tv_error.median;
    let knee_snr = curve
        .iter()
        .rev()
        .find(|p| p.tv_error.median > threshold)
        .map(|p| p.snr);
    let sqrt_k = (cfg.k as f64).sqrt();
    let knee_in_range = knee_snr.map(|r| r >= sqrt_k / 4.0 && r <= 4.0 * sqrt_k);
    let spans_sqrt_k = curve.iter().any(|p| p.snr < sqrt_k) && curve.iter().any(|p| p.snr > sqrt_k);
    Ok(PhaseReport {
        provenance: Provenance::new(cfg, cfg.seed)?,
        rows,
        curve,
        noiseless,
        monotone,
        knee_snr,
        sqrt_k,
        knee_in_range,
        spans_sqrt_k,
    })
}

/// `results.csv` → `results.summary.json`.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

pub fn rows_to_csv(rows: &[TrialRow], provenance: &Provenance) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "{}", provenance.csv_comment())?;
    let mut w = csv::Writer::from_writer(buf);
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Pretty JSON with a leading `"schema": 1` field.
pub fn to_schema_json<T: Serialize>(body: &T) -> Result<String> {
    let mut out = serde_json::Map::new();
    out.insert("schema".into(), SCHEMA.into());
    match serde_json::to_value(body)? {
        serde_json::Value::Object(m) => out.extend(m),
        other => {
            out.insert("data".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(out))?;
    s.push('\n');
    Ok(s)
}

fn experiment_summary_json(report: &ExperimentReport) -> Result<String> {
    #[derive(Serialize)]
    struct Body<'a> {
        provenance: &'a Provenance,
        axis: SweepAxis,
        points: &'a [PointSummary],
    }
    to_schema_json(&Body {
        provenance: &report.provenance,
        axis: report.axis,
        points: &report.summary,
    })
}

fn phase_summary_json(report: &PhaseReport) -> Result<String> {
    #[derive(Serialize)]
    struct Body<'a> {
        provenance: &'a Provenance,
        curve: &'a [PointSummary],
        noiseless: &'a PointSummary,
        monotone: bool,
        knee_snr: Option<f64>,
        sqrt_k: f64,
        knee_in_range: Option<bool>,
        spans_sqrt_k: bool,
    }
    to_schema_json(&Body {
        provenance: &report.provenance,
        curve: &report.curve,
        noiseless: &report.noiseless,
        monotone: report.monotone,
        knee_snr: report.knee_snr,
        sqrt_k: report.sqrt_k,
        knee_in_range: report.knee_in_range,
        spans_sqrt_k: report.spans_sqrt_k,
    })
}

/// Writes the trial CSV and its summary JSON; returns both paths.
pub fn write_experiment(report: &ExperimentReport, csv_path: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::write(csv_path, rows_to_csv(&report.rows, &report.provenance)?)?;
    let json = summary_path(csv_path);
    fs::write(&json, experiment_summary_json(report)?)?;
    Ok((csv_path.to_path_buf(), json))
}

pub fn write_phase(report: &PhaseReport, csv_path: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::write(csv_path, rows_to_csv(&report.rows, &report.provenance)?)?;
    let json = summary_path(csv_path);
    fs::write(&json, phase_summary_json(report)?)?;
    Ok((csv_path.to_path_buf(), json))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentConfig {
        ExperimentConfig {
            k: 1,
            n: Some(400),
            sigma: Some(0.0),
            learner: LearnerConfig {
                quad_size: 64,
                mc_mass: 1000,
                selection_budget: 4,
                ..LearnerConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(Spread::of(&v).iqr, 1.5);
    }

    #[test]
    fn two_sweep_axes_rejected() {
        let cfg = ExperimentConfig {
            n: None,
            n_sweep: Some(vec![100, 200]),
            sigma: None,
            sigma_sweep: Some(vec![0.1, 0.2]),
            ..ExperimentConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn scalar_and_sweep_rejected() {
        let cfg = ExperimentConfig {
            n_sweep: Some(vec![100]),
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn invalid_numbers_rejected() {
        for cfg in [
            ExperimentConfig { k: 0, ..quick() },
            ExperimentConfig { trials: 0, ..quick() },
            ExperimentConfig { sigma: Some(-1.0), ..quick() },
            ExperimentConfig { epsilon: 2.0, ..quick() },
            ExperimentConfig { n: Some(1), ..quick() },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        let err = ExperimentConfig::from_json(r#"{"K": 2, "bogus": 1}"#).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn sweeps_displace_scalar_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"K": 1, "sigma_sweep": [0.1, 0.2]}"#).unwrap();
        assert_eq!(cfg.sigma, None);
        assert_eq!(cfg.n, Some(2000));
        cfg.validate().unwrap();
        let cfg = ExperimentConfig::from_json(r#"{"n_sweep": [100, 200]}"#).unwrap();
        assert_eq!(cfg.n, None);
        cfg.validate().unwrap();
        let both = ExperimentConfig::from_json(r#"{"sigma": 0.1, "snr_sweep": [1.0]}"#).unwrap();
        assert!(both.validate().is_err());
    }

    #[test]
    fn snr_sweep_converts_to_sigma() {
        let cfg = ExperimentConfig {
            sigma: None,
            snr_sweep: Some(vec![1.0, 2.0]),
            ..ExperimentConfig::default()
        };
        let pts = cfg.points();
        let l = 2f64.sqrt();
        assert!((pts[0].sigma - l / 2.0).abs() < 1e-15);
        assert!((pts[1].sigma - l / 4.0).abs() < 1e-15);
    }

    #[test]
    fn n_sweep_row_count() {
        let cfg = ExperimentConfig {
            n: None,
            n_sweep: Some(vec![200, 300, 400]),
            trials: 2,
            ..quick()
        };
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 6);
        assert_eq!(rep.summary.len(), 3);
        assert_eq!(rep.axis, SweepAxis::N);
    }

    #[test]
    fn csv_starts_with_provenance() {
        let rep = run_experiment(&quick()).unwrap();
        let csv = String::from_utf8(rows_to_csv(&rep.rows, &rep.provenance).unwrap()).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# build="));
        assert_eq!(
            lines.next().unwrap(),
            "trial,n,sigma,snr,tv_error,l2_error,vertex_l1_error,runtime_ms"
        );
    }

    #[test]
    fn schema_json_leads_with_schema() {
        let s = to_schema_json(&serde_json::json!({"a": 1})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema"], 1);
        assert!(s.trim_start().starts_with("{\n  \"schema\": 1"));
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = config_hash(&quick()).unwrap();
        let b = config_hash(&ExperimentConfig { seed: 1, ..quick() }).unwrap();
        assert_eq!(a.len(), 64);
        assert_ne!(a, b);
        assert_eq!(a, config_hash(&quick()).unwrap());
    }
}
