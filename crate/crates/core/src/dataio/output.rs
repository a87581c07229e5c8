use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version of the JSON layout of [`RunOutput`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Everything needed to rerun a command bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub command: String,
    pub seed: u64,
    /// SHA-256 of `config`, hex encoded.
    pub config_hash: String,
    /// The effective configuration, TOML encoded.
    pub config: String,
    /// Input files with their SHA-256 digests, or a note for generated data.
    pub data_provenance: Vec<String>,
    pub version: String,
}

/// Estimates after one filter step. `predicted_*` are present only at
/// steps where a year of deaths was predicted; units are persons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub parameter_mean: Vec<f64>,
    pub parameter_sd: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_sd: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub schema_version: u32,
    pub metadata: RunMetadata,
    pub parameter_names: Vec<String>,
    /// Number of predicted-death slots per record that carries predictions.
    pub predicted_len: usize,
    pub records: Vec<StepRecord>,
}

impl RunOutput {
    pub fn validate(&self) -> Result<()> {
        let p = self.parameter_names.len();
        for (i, r) in self.records.iter().enumerate() {
            if i > 0 && !(r.time > self.records[i - 1].time) {
                return Err(Error::config(format!("record times must increase, {} follows {}", r.time, self.records[i - 1].time)));
            }
            if r.parameter_mean.len() != p || r.parameter_sd.len() != p {
                return Err(Error::config(format!("record at t = {} does not carry {p} parameters", r.time)));
            }
            let lens = [r.predicted_mean.as_ref().map(Vec::len), r.predicted_sd.as_ref().map(Vec::len)];
            if lens.iter().flatten().any(|&l| l != self.predicted_len) || lens[0].is_some() != lens[1].is_some() {
                return Err(Error::config(format!("record at t = {} has malformed predictions", r.time)));
            }
        }
        Ok(())
    }
}

/// Writes `run` to `path`. CSV has a header and one row per record:
/// `time`, `<name>_mean`, `<name>_sd` per parameter, then
/// `pred_mean_<l>`, `pred_sd_<l>` per slot (empty where absent).
pub fn write_output(run: &RunOutput, format: OutputFormat, path: &Path) -> Result<()> {
    run.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, run).map_err(|e| Error::Serialization(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        OutputFormat::Csv => {
            let mut c = csv::Writer::from_writer(&mut w);
            let mut header = vec!["time".to_owned()];
            for n in &run.parameter_names {
                header.push(format!("{n}_mean"));
                header.push(format!("{n}_sd"));
            }
            for l in 0..run.predicted_len {
                header.push(format!("pred_mean_{l}"));
                header.push(format!("pred_sd_{l}"));
            }
            c.write_record(&header).map_err(|e| csv_error(path, e))?;
            for r in &run.records {
                let mut row = vec![r.time.to_string()];
                for (m, s) in r.parameter_mean.iter().zip(&r.parameter_sd) {
                    row.push(m.to_string());
                    row.push(s.to_string());
                }
                for l in 0..run.predicted_len {
                    for v in [&r.predicted_mean, &r.predicted_sd] {
                        row.push(v.as_ref().map(|v| v[l].to_string()).unwrap_or_default());
                    }
                }
                c.write_record(&row).map_err(|e| csv_error(path, e))?;
            }
            c.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_output_json(path: &Path) -> Result<RunOutput> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let run: RunOutput =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Serialization(e.to_string()))?;
    if run.schema_version != SCHEMA_VERSION {
        return Err(Error::Serialization(format!(
            "{} has schema version {}, expected {SCHEMA_VERSION}",
            path.display(),
            run.schema_version
        )));
    }
    Ok(run)
}

/// One age bin of one year in the plot-data file. `band` is the number of
/// standard deviations the plotted band spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub year: i32,
    pub age_low: f64,
    pub age_high: f64,
    pub age_mid: f64,
    pub observed: Option<u64>,
    pub predicted_mean: f64,
    pub predicted_sd: f64,
    pub band: f64,
}

pub fn write_plot_csv(rows: &[PlotRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut c = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        c.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    c.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serialization(format!("{}: {other:?}", path.display())),
    }
}
