use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use mortcast::agestruct::{peak_age, solve_simple, AgeGrid, SimpleModelParams};
use mortcast::dataio::{
    parse_canonical, parse_wonder, write_output, write_plot_csv, ObservationBatch, OutputFormat, PlotRow,
    RunMetadata, RunOutput, StepRecord, SCHEMA_VERSION,
};
use mortcast::overdose::{fit_overdose, CoarseAgeBins, OverdoseFit, YearPrediction, PARAM_NAMES};
use mortcast::twin::run_twin;
use serde::Serialize;

use crate::config::{self, FitFileConfig, SimulateConfig, TwinFileConfig};
use crate::error::CliError;
use crate::{Cli, Command, CommonArgs, Format};

/// Runs one command and returns the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Twin(args) => cmd_twin(args),
        Command::Fit(args) => cmd_fit(args, false),
        Command::Forecast(args) => cmd_fit(args, true),
    }
}

fn output_format(f: Format) -> OutputFormat {
    match f {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    }
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn metadata<C: Serialize>(command: &str, seed: u64, cfg: &C, provenance: Vec<String>) -> Result<RunMetadata, CliError> {
    let (text, hash) = config::fingerprint(cfg)?;
    Ok(RunMetadata {
        command: command.to_owned(),
        seed,
        config_hash: hash,
        config: text,
        data_provenance: provenance,
        version: env!("CARGO_PKG_VERSION").to_owned(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| mortcast::Error::Serialization(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn cmd_simulate(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg: SimulateConfig = config::load(args.config.as_deref())?;
    if args.seed.is_some() || args.ensemble_size.is_some() || args.data.is_some() {
        warn!("simulate is deterministic and reads no data; --seed, --ensemble-size and --data are ignored");
    }
    let params = SimpleModelParams::new(cfg.mu, cfg.lambda)?;
    let grid = AgeGrid::new(0.0, cfg.delta_a, cfg.n_a)?;
    if !(cfg.peak_step > 0.0) || !(cfg.peak_horizon >= 0.0) || cfg.times.iter().any(|t| !(*t >= 0.0)) {
        return Err(CliError::Config("times must be nonnegative and peak_step positive".into()));
    }
    prepare_out(&args.out)?;

    let profiles: Vec<Vec<f64>> = cfg
        .times
        .iter()
        .map(|&t| grid.ages().map(|a| solve_simple(&params, a, t)).collect())
        .collect::<Result<_, _>>()?;
    let n_peaks = (cfg.peak_horizon / cfg.peak_step).round() as usize;
    let mut peaks = Vec::with_capacity(n_peaks);
    for k in 1..=n_peaks {
        let t = k as f64 * cfg.peak_step;
        let a = peak_age(t, &params)?;
        peaks.push((t, a, solve_simple(&params, a, t)?));
    }

    let ext = args.format.extension();
    let profile_path = args.out.join(format!("profiles.{ext}"));
    let peak_path = args.out.join(format!("peak_ages.{ext}"));
    match args.format {
        Format::Csv => {
            let mut s = String::from("age");
            for t in &cfg.times {
                s.push_str(&format!(",n_t{t}"));
            }
            s.push('\n');
            for (j, a) in grid.ages().enumerate() {
                s.push_str(&a.to_string());
                for p in &profiles {
                    s.push_str(&format!(",{}", p[j]));
                }
                s.push('\n');
            }
            write_text(&profile_path, &s)?;
            let mut s = String::from("time,peak_age,peak_density\n");
            for (t, a, n) in &peaks {
                s.push_str(&format!("{t},{a},{n}\n"));
            }
            write_text(&peak_path, &s)?;
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Profiles<'a> {
                ages: Vec<f64>,
                times: &'a [f64],
                density: &'a [Vec<f64>],
            }
            #[derive(Serialize)]
            struct Peak {
                time: f64,
                peak_age: f64,
                peak_density: f64,
            }
            write_json(
                &profile_path,
                &Profiles {
                    ages: grid.ages().collect(),
                    times: &cfg.times,
                    density: &profiles,
                },
            )?;
            let list: Vec<Peak> = peaks
                .iter()
                .map(|&(time, peak_age, peak_density)| Peak {
                    time,
                    peak_age,
                    peak_density,
                })
                .collect();
            write_json(&peak_path, &list)?;
        }
    }
    let meta_path = args.out.join("simulate_metadata.json");
    write_json(&meta_path, &metadata("simulate", 0, &cfg, vec!["closed-form model; no input data".into()])?)?;
    Ok(vec![profile_path, peak_path, meta_path])
}

pub fn cmd_twin(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg: TwinFileConfig = config::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = args.ensemble_size {
        cfg.ensemble_size = m;
    }
    if args.data.is_some() {
        warn!("the twin experiment generates its own observations; --data is ignored");
    }
    let core = cfg.to_core();
    core.validate()?;
    prepare_out(&args.out)?;
    let result = run_twin::<f64>(&core)?;

    let run = RunOutput {
        schema_version: SCHEMA_VERSION,
        metadata: metadata("twin", cfg.seed, &cfg, vec!["synthetic observations from the closed-form truth".into()])?,
        parameter_names: vec!["mu".into(), "lambda".into()],
        predicted_len: 0,
        records: result
            .trajectory
            .iter()
            .map(|p| StepRecord {
                time: p.time,
                parameter_mean: vec![p.mu, p.lambda],
                parameter_sd: vec![p.mu_sd, p.lambda_sd],
                predicted_mean: None,
                predicted_sd: None,
            })
            .collect(),
    };
    let run_path = args.out.join(format!("twin.{}", args.format.extension()));
    write_output(&run, output_format(args.format), &run_path)?;

    let bands_path = args.out.join("twin_bands.csv");
    let mut s = String::from("time,assimilated,mu,mu_lo,mu_hi,lambda,lambda_lo,lambda_hi,mu_true,lambda_true\n");
    for p in &result.trajectory {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            p.time,
            p.assimilated,
            p.mu,
            p.mu - 3.0 * p.mu_sd,
            p.mu + 3.0 * p.mu_sd,
            p.lambda,
            p.lambda - 3.0 * p.lambda_sd,
            p.lambda + 3.0 * p.lambda_sd,
            cfg.truth_mu,
            cfg.truth_lambda
        ));
    }
    write_text(&bands_path, &s)?;

    let density_path = args.out.join("twin_density.csv");
    let mut s = String::from("age,mean,sd,truth\n");
    for (j, a) in result.ages.iter().enumerate() {
        s.push_str(&format!(
            "{a},{},{},{}\n",
            result.final_density_mean[j], result.final_density_sd[j], result.final_truth[j]
        ));
    }
    write_text(&density_path, &s)?;
    if let Some(last) = result.trajectory.last() {
        info!("t = {}: mu = {} ± {}, lambda = {} ± {}", last.time, last.mu, last.mu_sd, last.lambda, last.lambda_sd);
    }
    Ok(vec![run_path, bands_path, density_path])
}

/// Observation batches from a file or directory, with provenance lines.
/// Directories contribute every `.txt` file (WONDER exports) and every
/// `.csv` file with the canonical header.
pub fn load_observations(path: &Path) -> Result<(Vec<ObservationBatch>, Vec<String>), CliError> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| CliError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("txt" | "csv")))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_owned()]
    };
    let mut batches: Vec<ObservationBatch> = Vec::new();
    let mut provenance = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| CliError::io(&f, e))?;
        let is_csv = f.extension().and_then(|e| e.to_str()) == Some("csv");
        let parsed = if is_csv {
            if !text.trim_start_matches('\u{feff}').starts_with("year,bin_low") {
                continue;
            }
            parse_canonical(text.as_bytes())
        } else {
            parse_wonder(text.as_bytes())
        }
        .map_err(|e| match e {
            mortcast::Error::Parse { line, message } => mortcast::Error::Parse {
                line,
                message: format!("{}: {message}", f.display()),
            },
            other => other,
        })?;
        for b in parsed {
            if batches.iter().any(|x| x.year == b.year) {
                return Err(CliError::Config(format!("year {} appears in more than one input file", b.year)));
            }
            batches.push(b);
        }
        provenance.push(format!("{} sha256:{}", f.display(), config::file_digest(&f)?));
    }
    if batches.is_empty() {
        return Err(CliError::Config(format!("no observation files found at {}", path.display())));
    }
    batches.sort_by_key(|b| b.year);
    Ok((batches, provenance))
}

fn cmd_fit(args: &CommonArgs, forecast: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg: FitFileConfig = config::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = args.ensemble_size {
        cfg.ensemble_size = m;
    }
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    let mut settings = cfg.to_settings()?;
    if !forecast {
        settings.forecast_years = 0;
    }
    let data = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::Config("no observation data given (use --data or the `data` key)".into()))?;
    let (obs, provenance) = load_observations(&data)?;
    prepare_out(&args.out)?;
    info!(
        "assimilating {}-{} with {} members, dt = {}",
        obs[0].year,
        obs[obs.len() - 1].year,
        settings.ensemble_size,
        settings.delta_t
    );
    let fit = fit_overdose(&settings, &obs)?;
    for (from, to) in &fit.moved_edges {
        info!("coarse edge {from} moved to {to} to match the age grid");
    }
    if fit.clamped > 0 {
        warn!("{} predicted bin means were negative and are reported as 0", fit.clamped);
    }

    let command = if forecast { "forecast" } else { "fit" };
    let predicted: Vec<&YearPrediction<f64>> =
        fit.predictions.iter().chain(if forecast { &fit.forecasts[..] } else { &[] }).collect();
    let run = run_output(command, &cfg, provenance, &fit, &predicted)?;
    let run_path = args.out.join(format!("{command}.{}", args.format.extension()));
    write_output(&run, output_format(args.format), &run_path)?;

    let (rows, band): (Vec<&YearPrediction<f64>>, f64) = if forecast {
        let mut v: Vec<&YearPrediction<f64>> = fit.predictions.last().into_iter().collect();
        v.extend(&fit.forecasts);
        (v, 2.0)
    } else {
        (fit.predictions.iter().collect(), 3.0)
    };
    let plot_path = args.out.join(format!("{command}_plot.csv"));
    write_plot_csv(&plot_rows(&rows, band), &plot_path)?;
    Ok(vec![run_path, plot_path])
}

fn run_output(
    command: &str,
    cfg: &FitFileConfig,
    provenance: Vec<String>,
    fit: &OverdoseFit<f64>,
    predicted: &[&YearPrediction<f64>],
) -> Result<RunOutput, CliError> {
    let records = fit
        .parameters
        .iter()
        .map(|p| {
            let pred = predicted.iter().find(|y| y.time == p.time);
            StepRecord {
                time: p.time,
                parameter_mean: p.mean.to_vec(),
                parameter_sd: p.sd.to_vec(),
                predicted_mean: pred.map(|y| y.mean.clone()),
                predicted_sd: pred.map(|y| y.sd.clone()),
            }
        })
        .collect();
    Ok(RunOutput {
        schema_version: SCHEMA_VERSION,
        metadata: metadata(command, cfg.seed, cfg, provenance)?,
        parameter_names: PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
        predicted_len: CoarseAgeBins::default().len(),
        records,
    })
}

fn plot_rows(years: &[&YearPrediction<f64>], band: f64) -> Vec<PlotRow> {
    let bins = CoarseAgeBins::default();
    let mids = bins.midpoints();
    let mut rows = Vec::new();
    for y in years {
        for (l, w) in bins.edges().windows(2).enumerate() {
            rows.push(PlotRow {
                year: y.year,
                age_low: w[0],
                age_high: w[1],
                age_mid: mids[l],
                observed: y.observed.as_ref().and_then(|o| o[l]),
                predicted_mean: y.mean[l],
                predicted_sd: y.sd[l],
                band,
            });
        }
    }
    rows
}
