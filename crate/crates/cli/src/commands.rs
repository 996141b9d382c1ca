use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use npvi_core::baselines::{hmc_sample, laplace_diagonal, map_estimate, write_samples_csv, DiagonalGaussian, PosteriorSamples};
use npvi_core::math::stream_rng;
use npvi_core::mixture::format_f64;
use npvi_core::models::*;
use npvi_core::{fit, FitResult, LogJointModel, MixtureApproximation, ParameterVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use crate::config::{read_json, EngineConfig, ExperimentConfig, ModelConfig, SynthConfig};
use crate::{write_atomic, CliError, GridArgs, RunArgs};

/// Covariate rows and activation rows.
pub type Panel = (Vec<Vec<f64>>, Vec<Vec<f64>>);

pub enum BuiltModel {
    Plain(Box<dyn LogJointModel>),
    Logistic { model: LogisticModel, test: Option<DatasetTable> },
    Tlsa { model: TlsaModel, test: Option<Panel> },
}

impl BuiltModel {
    pub fn as_model(&self) -> &dyn LogJointModel {
        match self {
            BuiltModel::Plain(m) => m.as_ref(),
            BuiltModel::Logistic { model, .. } => model,
            BuiltModel::Tlsa { model, .. } => model,
        }
    }
}

pub enum EngineOutput {
    Npv(FitResult),
    Map(ParameterVector),
    Laplace(DiagonalGaussian),
    Hmc(PosteriorSamples),
}

impl EngineOutput {
    /// Draws used for predictions; point estimates give a single draw.
    pub fn predictive_samples(&self, count: usize, seed: u64) -> Vec<ParameterVector> {
        match self {
            EngineOutput::Npv(r) => r.mixture.sample(count, seed),
            EngineOutput::Map(p) => vec![p.clone()],
            EngineOutput::Laplace(g) => g.sample(count, seed),
            EngineOutput::Hmc(s) => s.samples.clone(),
        }
    }

    fn diagnostics(&self) -> String {
        match self {
            EngineOutput::Npv(r) => {
                format!("converged={};outer_iterations={};final_l2={}", r.converged, r.outer_iterations, format_f64(r.final_l2()))
            }
            EngineOutput::Map(_) | EngineOutput::Laplace(_) => String::new(),
            EngineOutput::Hmc(s) => format!("acceptance_rate={}", format_f64(s.acceptance_rate)),
        }
    }
}

fn load_experiment(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg: ExperimentConfig = read_json(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = Some(o.clone());
    }
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    Ok(cfg)
}

fn output_dir(dir: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    dir.clone().ok_or_else(|| CliError::Usage("no output directory: pass --out or set output_dir".into()))
}

fn read_table(path: &Path) -> Result<DatasetTable, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(DatasetTable::read_csv(file)?)
}

pub fn build_model(cfg: &ExperimentConfig, split: Option<f64>) -> Result<BuiltModel, CliError> {
    let table = match (&cfg.data, cfg.model.needs_data()) {
        (Some(p), true) => Some(read_table(p)?),
        (None, true) => return Err(CliError::Usage("this model needs a dataset: set `data` or pass --data".into())),
        _ => None,
    };
    let (train, test) = match (table, split) {
        (Some(t), Some(f)) => {
            let (a, b) = t.split(f)?;
            (Some(a), Some(b))
        }
        (t, _) => (t, None),
    };
    Ok(match &cfg.model {
        ModelConfig::Gaussian { mean, variance } => BuiltModel::Plain(Box::new(gaussian_target(mean.clone(), variance.clone())?)),
        ModelConfig::StandardNormal { dim } => {
            if *dim == 0 {
                return Err(CliError::Usage("standard_normal needs dim >= 1".into()));
            }
            BuiltModel::Plain(Box::new(GaussianTarget::standard(*dim)))
        }
        ModelConfig::Bimodal => BuiltModel::Plain(Box::new(GaussianMixtureTarget::symmetric_bimodal())),
        ModelConfig::TMixture { spec } => {
            BuiltModel::Plain(Box::new(t_mixture_target(spec.clone().unwrap_or_else(TMixtureSpec::canonical))?))
        }
        ModelConfig::Logistic { a, b } => {
            let train = train.expect("data checked above");
            if train.labels().is_none() {
                return Err(CliError::Usage("logistic data needs a `label` column".into()));
            }
            let mut spec = LogisticModelSpec::new(train);
            spec.a = *a;
            spec.b = *b;
            BuiltModel::Logistic { model: logistic_log_joint(&spec)?, test }
        }
        ModelConfig::Tlsa { sources, grid_side, tau, sigma_w2, rho } => {
            let train = train.expect("data checked above");
            let voxels = unit_grid(*grid_side);
            let split_rows = |t: DatasetTable| -> Result<Panel, CliError> {
                let u = t.activations().ok_or_else(|| CliError::Usage("TLSA data needs voxel columns v1..vV".into()))?.to_vec();
                if u.first().map_or(0, |r| r.len()) != voxels.len() {
                    return Err(CliError::Usage(format!("TLSA data must have {} voxel columns for grid_side {grid_side}", voxels.len())));
                }
                Ok((t.covariates, u))
            };
            let (x, u) = split_rows(train)?;
            let mut spec = TlsaModelSpec::new(*sources, voxels.clone(), x, u);
            spec.tau = *tau;
            spec.sigma_w2 = *sigma_w2;
            spec.rho = *rho;
            let test = test.map(split_rows).transpose()?;
            BuiltModel::Tlsa { model: tlsa_log_joint(spec)?, test }
        }
    })
}

pub fn run_engine(model: &dyn LogJointModel, engine: &EngineConfig, seed: u64) -> Result<(EngineOutput, f64), CliError> {
    let start = Instant::now();
    let out = match engine {
        EngineConfig::Npv(c) => {
            let mut c = c.clone();
            c.init.seed = seed;
            EngineOutput::Npv(fit(&model, &c)?)
        }
        EngineConfig::Map { restarts } => EngineOutput::Map(map_estimate(&model, *restarts, seed)?),
        EngineConfig::Laplace { restarts } => {
            let map = map_estimate(&model, *restarts, seed)?;
            EngineOutput::Laplace(laplace_diagonal(&model, &map)?)
        }
        EngineConfig::Hmc(c) => {
            let mut c = c.clone();
            c.seed = seed;
            EngineOutput::Hmc(hmc_sample(&model, &c)?)
        }
    };
    Ok((out, start.elapsed().as_secs_f64()))
}

fn json_array(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format_f64(*x)).collect();
    format!("[{}]", items.join(","))
}

fn manifest(command: &str, cfg: &serde_json::Value, extra: serde_json::Value) -> Result<Vec<u8>, CliError> {
    let mut m = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
    });
    if let (Some(m), Some(e)) = (m.as_object_mut(), extra.as_object()) {
        m.extend(e.clone());
    }
    let mut s = serde_json::to_string_pretty(&m).map_err(npvi_core::Error::from)?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn cmd_fit(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_experiment(args)?;
    let out = output_dir(&cfg.output_dir)?;
    let engine = cfg.engine.clone().ok_or_else(|| CliError::Usage("fit needs an `engine` section".into()))?;
    let model = build_model(&cfg, cfg.split)?;
    let (result, secs) = run_engine(model.as_model(), &engine, cfg.seed)?;
    let mut outputs = vec!["result.json"];
    let mut converged = serde_json::Value::Null;
    match &result {
        EngineOutput::Npv(r) => {
            write_atomic(&out, "result.json", format!("{}\n", r.mixture.to_json()).as_bytes())?;
            let mut trace = String::from("iteration,l2\n");
            for (i, v) in r.l2_trace.iter().enumerate() {
                let _ = writeln!(trace, "{i},{}", format_f64(*v));
            }
            write_atomic(&out, "trace.csv", trace.as_bytes())?;
            outputs.push("trace.csv");
            converged = json!(r.converged);
            info!("npv finished after {} outer iterations, L2 = {}", r.outer_iterations, r.final_l2());
        }
        EngineOutput::Map(p) => {
            write_atomic(&out, "result.json", format!("{{\"point\":{}}}\n", json_array(p)).as_bytes())?;
        }
        EngineOutput::Laplace(g) => {
            let text = format!("{{\"mean\":{},\"variances\":{}}}\n", json_array(&g.mean), json_array(&g.variances));
            write_atomic(&out, "result.json", text.as_bytes())?;
        }
        EngineOutput::Hmc(s) => {
            let mut buf = Vec::new();
            write_samples_csv(&s.samples, &mut buf)?;
            write_atomic(&out, "samples.csv", &buf)?;
            let text = format!("{{\"acceptance_rate\":{},\"kept_samples\":{}}}\n", format_f64(s.acceptance_rate), s.samples.len());
            write_atomic(&out, "result.json", text.as_bytes())?;
            outputs.push("samples.csv");
        }
    }
    outputs.push("manifest.json");
    let echo = serde_json::to_value(&cfg).map_err(npvi_core::Error::from)?;
    let m = manifest(
        "fit",
        &echo,
        json!({ "engine": engine.label(), "seed": cfg.seed, "wall_time_seconds": secs, "converged": converged, "outputs": outputs }),
    )?;
    write_atomic(&out, "manifest.json", &m)?;
    Ok(())
}

pub struct MetricRow {
    pub engine: String,
    pub metric: &'static str,
    pub value: f64,
    pub wall_time: f64,
    pub diagnostics: String,
}

fn score(model: &BuiltModel, output: &EngineOutput, cfg: &ExperimentConfig) -> Result<(&'static str, f64), CliError> {
    let samples = output.predictive_samples(cfg.predictive_samples, cfg.seed);
    match model {
        BuiltModel::Logistic { test: Some(test), .. } => {
            Ok(("test_log_likelihood", logistic_test_log_likelihood(&samples, test, cfg.estimator)?))
        }
        BuiltModel::Tlsa { model, test: Some((x, u)) } => {
            let pred = tlsa_reconstruct(model, &samples, x)?;
            let n = (u.len() * u.first().map_or(0, |r| r.len())) as f64;
            let mse = pred.iter().flatten().zip(u.iter().flatten()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
            Ok(("heldout_mse", mse))
        }
        _ => Err(CliError::Usage("compare needs a data-backed model (logistic or tlsa) with a train/test split".into())),
    }
}

pub fn cmd_compare(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_experiment(args)?;
    let out = output_dir(&cfg.output_dir)?;
    if cfg.engines.len() < 2 {
        return Err(CliError::Usage("compare needs at least two entries in `engines`".into()));
    }
    if !cfg.model.needs_data() {
        return Err(CliError::Usage("compare needs a data-backed model (logistic or tlsa)".into()));
    }
    let model = build_model(&cfg, Some(cfg.split.unwrap_or(0.5)))?;
    let results: Vec<Result<MetricRow, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .engines
            .iter()
            .map(|engine| {
                let (model, cfg) = (&model, &cfg);
                s.spawn(move || -> Result<MetricRow, CliError> {
                    let (output, secs) = run_engine(model.as_model(), engine, cfg.seed)?;
                    let (metric, value) = score(model, &output, cfg)?;
                    Ok(MetricRow { engine: engine.label(), metric, value, wall_time: secs, diagnostics: output.diagnostics() })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("engine thread panicked")).collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("engine,metric,value,wall_time_seconds,diagnostics\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.engine, r.metric, format_f64(r.value), format_f64(r.wall_time), r.diagnostics);
    }
    write_atomic(&out, "metrics.csv", csv.as_bytes())?;
    let echo = serde_json::to_value(&cfg).map_err(npvi_core::Error::from)?;
    let m = manifest("compare", &echo, json!({ "seed": cfg.seed, "outputs": ["metrics.csv", "manifest.json"] }))?;
    write_atomic(&out, "manifest.json", &m)?;
    Ok(())
}

pub fn cmd_synth_data(args: &RunArgs) -> Result<(), CliError> {
    let mut cfg: SynthConfig = read_json(&args.config)?;
    if let Some(s) = args.seed {
        *cfg.seed_mut() = s;
    }
    if let Some(o) = &args.out {
        *cfg.output_dir_mut() = Some(o.clone());
    }
    let out = output_dir(cfg.output_dir_mut())?;
    let (table, truth) = match &cfg {
        SynthConfig::Logistic { rows, covariates, alpha, weights, seed, .. } => {
            let (t, w) = synth_logistic(*seed, *rows, *covariates, weights.as_deref(), *alpha)?;
            (t, format!("{{\"weights\":{}}}\n", json_array(&w)))
        }
        SynthConfig::Tlsa { rows, covariates, sources, grid_side, tau, sigma_w2, rho, seed, .. } => {
            if *rows == 0 || *covariates == 0 || *grid_side == 0 {
                return Err(CliError::Usage("rows, covariates and grid_side must be positive".into()));
            }
            let voxels = unit_grid(*grid_side);
            // separate seeds for truth, noise and covariates
            let mut rng = stream_rng(3 * seed + 2, 0);
            let x: Vec<Vec<f64>> = (0..*rows).map(|_| (0..*covariates).map(|_| rng.sample(StandardNormal)).collect()).collect();
            let truth = TlsaParams::sample_prior(3 * seed, *covariates, *sources, 2, *sigma_w2, *rho)?;
            let mut spec = TlsaModelSpec::new(*sources, voxels.clone(), x.clone(), vec![vec![0.0; voxels.len()]; *rows]);
            spec.tau = *tau;
            let u = synth_tlsa(3 * seed + 1, &spec, &truth)?;
            let rows_json = |m: &[Vec<f64>]| m.iter().map(|r| json_array(r)).collect::<Vec<_>>().join(",");
            let text = format!(
                "{{\"weights\":[{}],\"centers\":[{}],\"widths\":{}}}\n",
                rows_json(&truth.weights),
                rows_json(&truth.centers),
                json_array(&truth.widths)
            );
            (DatasetTable::new(x, Targets::Activations(u))?, text)
        }
    };
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_atomic(&out, "data.csv", &buf)?;
    write_atomic(&out, "truth.json", truth.as_bytes())?;
    let echo = serde_json::to_value(&cfg).map_err(npvi_core::Error::from)?;
    let m = manifest("synth-data", &echo, json!({ "outputs": ["data.csv", "truth.json", "manifest.json"] }))?;
    write_atomic(&out, "manifest.json", &m)?;
    Ok(())
}

fn parse_bounds(s: &str) -> Result<[f64; 4], CliError> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("bad bound `{t}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let b = match v.as_slice() {
        [lo, hi] => [*lo, *hi, *lo, *hi],
        [a, b, c, d] => [*a, *b, *c, *d],
        _ => return Err(CliError::Usage("bounds must be `lo,hi` or `xlo,xhi,ylo,yhi`".into())),
    };
    if !b.iter().all(|x| x.is_finite()) || b[0] >= b[1] || b[2] >= b[3] {
        return Err(CliError::Usage(format!("invalid bounds {b:?}")));
    }
    Ok(b)
}

pub fn cmd_density_grid(args: &GridArgs) -> Result<(), CliError> {
    if args.resolution < 16 {
        return Err(CliError::Usage(format!("resolution must be at least 16, got {}", args.resolution)));
    }
    let b = parse_bounds(&args.bounds)?;
    let text = std::fs::read_to_string(&args.approx).map_err(|e| CliError::io(&args.approx, e))?;
    let q = MixtureApproximation::from_json(&text)?;
    if q.dim() != 2 {
        return Err(CliError::Usage(format!("density-grid needs a two-dimensional mixture, got dimension {}", q.dim())));
    }
    let r = args.resolution;
    let at = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (r - 1) as f64;
    let mut csv = String::from("x,y,density\n");
    for j in 0..r {
        let y = at(b[2], b[3], j);
        for i in 0..r {
            let x = at(b[0], b[1], i);
            let _ = writeln!(csv, "{},{},{}", format_f64(x), format_f64(y), format_f64(q.log_density(&[x, y]).exp()));
        }
    }
    write_atomic(&args.out, "density.csv", csv.as_bytes())?;
    Ok(())
}
