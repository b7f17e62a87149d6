use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use simplex_pac::cover::{
    alpha_for_volume, ball_noise_grid, cover_sphere, default_vol_floor, enumerate_candidates,
    family_size_bound, CoverSpec,
};
use simplex_pac::harness::{
    self, exit_code, run_experiment, summary_path, sweep_phase_transition, to_schema_json,
    write_experiment, write_phase, ExperimentConfig, Provenance,
};
use simplex_pac::localization::{localize_with, NoiseDenominator};
use simplex_pac::metrics::{tv_uniform, vertex_l1};
use simplex_pac::minimax::{
    assouad_family, empirical_minimax, fano_family, lecam_pair, AssouadMode, HypothesisFamily,
};
use simplex_pac::rng::Stream;
use simplex_pac::sampler::{read_samples, sample, write_samples_with, NoisyModel};
use simplex_pac::scheffe::{learn, LearnerConfig};
use simplex_pac::spectral::{
    cf_noisy, cf_recursion, cf_simplex, default_grid, recoverability_check, tail_energy,
    tail_energy_mc, ComplexValue,
};
use simplex_pac::{Error, Result, Simplex};

#[derive(Debug, Parser)]
#[command(name = "simplex-pac", version, about = "Learn simplices from noisy samples")]
struct Cli {
    /// Master seed; overrides the seed of a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path. JSON commands print to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config: learner settings, or an experiment for `experiment`/`phase`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct SimplexArg {
    /// Dimension of the standard simplex used when `--simplex` is absent.
    #[arg(long = "K", default_value_t = 2)]
    k: usize,
    /// Simplex JSON file: {"dim": K, "vertices": [[..], ..]}.
    #[arg(long)]
    simplex: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Denominator {
    Statement,
    Proof,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConstructionArg {
    Fano,
    Assouad,
    Lecam,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Tv,
    VertexL1,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw noisy samples from a simplex and write them as CSV.
    Generate {
        #[command(flatten)]
        simplex: SimplexArg,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Localization ball and noise-variance bound of a samples file.
    Localize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Denominator::Statement)]
        denominator: Denominator,
    },
    /// Ball cover and candidate family for a samples file.
    Cover {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 5.0)]
        theta_lo: f64,
        #[arg(long, default_value_t = 5.0)]
        theta_hi: f64,
        #[arg(long, default_value_t = 5000)]
        point_budget: usize,
        #[arg(long, default_value_t = 200_000)]
        tuple_budget: usize,
        #[arg(long)]
        vol_floor: Option<f64>,
        #[arg(long, value_enum, default_value_t = Denominator::Statement)]
        denominator: Denominator,
        /// Include every candidate hypothesis in the output.
        #[arg(long)]
        list: bool,
    },
    /// Run the learner on a samples file.
    Learn {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Characteristic function values, or a recoverability comparison.
    Spectrum {
        #[command(flatten)]
        simplex: SimplexArg,
        /// Frequency as comma-separated coordinates; repeatable.
        #[arg(long, value_delimiter = ';')]
        omega: Vec<String>,
        /// Additional random frequencies with N(0, scale²) coordinates.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 5.0)]
        scale: f64,
        /// Noise level for the smoothed characteristic function.
        #[arg(long)]
        sigma: Option<f64>,
        /// Second simplex for a smoothed-versus-plain ℓ2 comparison.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Noise levels of the comparison.
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 20_000)]
        mc: usize,
    },
    /// Out-of-band spectral energy.
    Tail {
        #[command(flatten)]
        simplex: SimplexArg,
        #[arg(long, value_delimiter = ',', default_value = "20,40,80")]
        alpha: Vec<f64>,
        /// Trapezoid nodes per axis.
        #[arg(long)]
        grid: Option<usize>,
        /// Use Monte Carlo with this many draws instead of quadrature.
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Lower-bound families and empirical minimax risk.
    Minimax {
        #[arg(long, value_enum, default_value_t = ConstructionArg::Fano)]
        construction: ConstructionArg,
        #[command(flatten)]
        simplex: SimplexArg,
        #[arg(long, default_value_t = 0.3)]
        zeta: f64,
        #[arg(long = "M", default_value_t = 8)]
        m: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Tv)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.3)]
        sigma: f64,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Write the family only, without running the learner.
        #[arg(long)]
        family_only: bool,
    },
    /// Run an experiment config.
    Experiment,
    /// Run a noise sweep and locate the phase transition.
    Phase,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn read_config_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))
}

fn load_learner(cli: &Cli) -> Result<LearnerConfig> {
    let mut cfg = match &cli.config {
        Some(p) => serde_json::from_str(&read_config_text(p)?).map_err(|e| bad(e.to_string()))?,
        None => LearnerConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_experiment(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| bad("--config is required"))?;
    let mut cfg = ExperimentConfig::from_json(&read_config_text(path)?)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_simplex(arg: &SimplexArg) -> Result<Simplex> {
    match &arg.simplex {
        Some(p) => {
            let s: Simplex =
                serde_json::from_str(&read_config_text(p)?).map_err(|e| bad(e.to_string()))?;
            s.check_nondegenerate()?;
            Ok(s)
        }
        None if arg.k == 0 => Err(bad("K must be at least 1")),
        None => Ok(Simplex::standard(arg.k)),
    }
}

fn require_out(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| bad("--out is required for this command"))
}

/// Provenance over the subcommand, seed and config, excluding `--out`.
fn provenance(cli: &Cli, config: &Value) -> Result<Provenance> {
    let seed = cli.seed.unwrap_or(0);
    Provenance::new(&(format!("{:?}", cli.command), seed, config), seed)
}

fn emit(cli: &Cli, prov: &Provenance, mut body: Value) -> Result<()> {
    if let Value::Object(m) = &mut body {
        let mut out = serde_json::Map::new();
        out.insert("provenance".into(), serde_json::to_value(prov)?);
        out.append(m);
        body = Value::Object(out);
    }
    let text = to_schema_json(&body)?;
    match &cli.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_omega(text: &str, k: usize) -> Result<Vec<f64>> {
    let v = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad(format!("bad frequency {text:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != k {
        return Err(Error::DimMismatch {
            expected: k,
            actual: v.len(),
        });
    }
    Ok(v)
}

fn complex_json(z: ComplexValue) -> Value {
    json!({"re": z.re, "im": z.im, "abs": z.norm()})
}

fn family_json(f: &HypothesisFamily) -> Result<Value> {
    Ok(serde_json::to_value(f)?)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate { simplex, sigma, n } => {
            let s = load_simplex(simplex)?;
            let model = NoisyModel::new(s, *sigma)?;
            let seed = cli.seed.unwrap_or(0);
            let mut set = sample(&model, *n, seed);
            set.model_tag = Some(model);
            let prov = provenance(cli, &Value::Null)?;
            write_samples_with(require_out(cli)?, &set, Some(&prov))
        }
        Command::Localize { input, denominator } => {
            let data = read_samples(input)?;
            let ball = localize_with(&data, denom(*denominator))?;
            let prov = provenance(cli, &Value::Null)?;
            emit(cli, &prov, json!({"ball": ball}))
        }
        Command::Cover {
            input,
            epsilon,
            alpha,
            theta_lo,
            theta_hi,
            point_budget,
            tuple_budget,
            vol_floor,
            denominator,
            list,
        } => {
            let data = read_samples(input)?;
            let k = data.dim();
            let ball = localize_with(&data, denom(*denominator))?;
            let floor = vol_floor.unwrap_or_else(|| default_vol_floor(&ball));
            let alpha = alpha.unwrap_or_else(|| alpha_for_volume(floor, k, *theta_hi));
            let spec = CoverSpec::new(
                *epsilon,
                alpha,
                *point_budget,
                *tuple_budget,
                cli.seed.unwrap_or(0),
            )?;
            let spacing = spec.cover_spacing(k);
            let points = cover_sphere(&ball, spacing, &spec)?;
            let family = enumerate_candidates(&points, &ball, &spec, *theta_lo, *theta_hi, floor)?;
            let bound = family_size_bound(&ball, *epsilon, alpha, k).ok();
            let mut body = json!({
                "ball": ball,
                "spec": spec,
                "vol_floor": floor,
                "spacing": spacing,
                "cover_points": points.points.len(),
                "cover_target": points.target,
                "sigma_grid": ball_noise_grid(&ball, *epsilon),
                "M": family.M(),
                "truncated": family.truncated,
                "log_family_size_bound": bound,
            });
            if *list {
                body["hypotheses"] = serde_json::to_value(&family.hypotheses)?;
            }
            let prov = provenance(cli, &Value::Null)?;
            emit(cli, &prov, body)
        }
        Command::Learn { input, epsilon } => {
            let mut cfg = load_learner(cli)?;
            if let Some(e) = epsilon {
                cfg.epsilon = *e;
                cfg.validate()?;
            }
            let data = read_samples(input)?;
            let fit = learn(&data, &cfg)?;
            let mut body = json!({"config": cfg, "result": fit});
            if let Some(model) = &data.model_tag {
                let tv = tv_uniform(&fit.simplex, &model.simplex, harness::ERROR_MC, cfg.seed)?;
                let vl1 = vertex_l1(&fit.simplex, &model.simplex)?;
                body["truth"] = json!({
                    "model": model,
                    "tv_error": tv,
                    "vertex_l1_error": vl1.cost,
                    "sigma_error": (fit.sigma - model.sigma).abs(),
                });
            }
            let prov = provenance(cli, &serde_json::to_value(&cfg)?)?;
            emit(cli, &prov, body)
        }
        Command::Spectrum {
            simplex,
            omega,
            random,
            scale,
            sigma,
            compare,
            sigmas,
            mc,
        } => {
            let s = load_simplex(simplex)?;
            let k = s.dim();
            let prov = provenance(cli, &Value::Null)?;
            if let Some(other) = compare {
                let o = load_simplex(&SimplexArg {
                    k,
                    simplex: Some(other.clone()),
                })?;
                let reports = sigmas
                    .iter()
                    .map(|&sg| recoverability_check(&s, &o, sg, *mc, cli.seed.unwrap_or(0)))
                    .collect::<Result<Vec<_>>>()?;
                return emit(cli, &prov, json!({"simplex": s, "compare": o, "recoverability": reports}));
            }
            let mut freqs = omega
                .iter()
                .filter(|t| !t.trim().is_empty())
                .map(|t| parse_omega(t, k))
                .collect::<Result<Vec<_>>>()?;
            let mut rng = Stream::derived(cli.seed.unwrap_or(0), "cli.spectrum", &[]);
            for _ in 0..*random {
                let mut w = vec![0.0; k];
                rng.fill_normal(&mut w);
                w.iter_mut().for_each(|x| *x *= scale);
                freqs.push(w);
            }
            if freqs.is_empty() {
                freqs.push(vec![0.0; k]);
            }
            let standard = s == Simplex::standard(k);
            let model = sigma.map(|sg| NoisyModel::new(s.clone(), sg)).transpose()?;
            let mut values = Vec::with_capacity(freqs.len());
            for w in &freqs {
                let mut entry = json!({"omega": w, "cf": complex_json(cf_simplex(&s, w)?)});
                if standard {
                    entry["recursion"] = complex_json(cf_recursion(w));
                }
                if let Some(m) = &model {
                    entry["cf_noisy"] = complex_json(cf_noisy(m, w)?);
                }
                values.push(entry);
            }
            emit(cli, &prov, json!({"simplex": s, "sigma": sigma, "values": values}))
        }
        Command::Tail {
            simplex,
            alpha,
            grid,
            mc,
        } => {
            let s = load_simplex(simplex)?;
            let reports = alpha
                .iter()
                .map(|&a| match mc {
                    Some(m) => tail_energy_mc(&s, a, *m, cli.seed.unwrap_or(0)),
                    None => tail_energy(&s, a, grid.unwrap_or_else(|| default_grid(s.dim()))),
                })
                .collect::<Result<Vec<_>>>()?;
            let prov = provenance(cli, &Value::Null)?;
            emit(cli, &prov, json!({"simplex": s, "tails": reports}))
        }
        Command::Minimax {
            construction,
            simplex,
            zeta,
            m,
            mode,
            sigma,
            n,
            trials,
            family_only,
        } => {
            let seed = cli.seed.unwrap_or(0);
            let k = simplex.k;
            let family = match construction {
                ConstructionArg::Fano => fano_family(k, *zeta, *m, seed)?,
                ConstructionArg::Assouad => assouad_family(
                    k,
                    *zeta,
                    match mode {
                        ModeArg::Tv => AssouadMode::Tv,
                        ModeArg::VertexL1 => AssouadMode::VertexL1,
                    },
                )?,
                ConstructionArg::Lecam => lecam_pair(&load_simplex(simplex)?, *zeta)?,
            };
            if *family_only {
                let prov = provenance(cli, &Value::Null)?;
                return emit(cli, &prov, json!({"family": family_json(&family)?}));
            }
            let cfg = load_learner(cli)?;
            let prov = provenance(cli, &serde_json::to_value(&cfg)?)?;
            let report = empirical_minimax(&family, *sigma, *n, *trials, &cfg, seed)?;
            let out = require_out(cli)?;
            let mut csv = format!("{}\nmember_id,trial,tv_error\n", prov.csv_comment());
            for r in &report.rows {
                csv.push_str(&format!("{},{},{:?}\n", r.member_id, r.trial, r.tv_error));
            }
            fs::write(out, csv)?;
            let body = json!({
                "provenance": prov,
                "family": family_json(&family)?,
                "sigma": report.sigma,
                "n": report.n,
                "trials": report.trials,
                "members": report.members,
                "worst_member": report.worst_member,
                "max_risk": report.max_risk,
                "max_risk_se": report.max_risk_se,
                "bounds": report.bounds,
            });
            fs::write(summary_path(out), to_schema_json(&body)?)?;
            Ok(())
        }
        Command::Experiment => {
            let cfg = load_experiment(cli)?;
            let out = output_for(cli, &cfg)?;
            let report = run_experiment(&cfg)?;
            write_experiment(&report, &out)?;
            Ok(())
        }
        Command::Phase => {
            let cfg = load_experiment(cli)?;
            let out = output_for(cli, &cfg)?;
            let report = sweep_phase_transition(&cfg)?;
            write_phase(&report, &out)?;
            if report.knee_in_range == Some(false) {
                eprintln!(
                    "warning: knee at SNR {:.3} lies outside [{:.3}, {:.3}]",
                    report.knee_snr.unwrap_or(f64::NAN),
                    report.sqrt_k / 4.0,
                    4.0 * report.sqrt_k
                );
            }
            Ok(())
        }
    }
}

fn output_for(cli: &Cli, cfg: &ExperimentConfig) -> Result<PathBuf> {
    cli.out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| bad("--out or an `output` config field is required"))
}

fn denom(d: Denominator) -> NoiseDenominator {
    match d {
        Denominator::Statement => NoiseDenominator::Statement,
        Denominator::Proof => NoiseDenominator::Proof,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
