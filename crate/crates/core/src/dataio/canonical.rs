use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::batch::{bin_index, ObservationBatch};
use super::read_text;
use crate::error::{Error, Result};
use crate::overdose::CoarseAgeBins;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    year: i32,
    bin_low: f64,
    bin_high: f64,
    /// Empty for suppressed counts.
    deaths: Option<u64>,
}

/// Reads the `year,bin_low,bin_high,deaths` schema. An empty `deaths`
/// field (or the word `Suppressed`) marks a suppressed count.
pub fn parse_canonical<R: Read>(reader: R) -> Result<Vec<ObservationBatch>> {
    let text = read_text(reader)?.replace("Suppressed", "");
    let bins = CoarseAgeBins::default();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut years: BTreeMap<i32, (ObservationBatch, Vec<bool>)> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let idx = bin_index(&bins, row.bin_low, row.bin_high).ok_or_else(|| {
            Error::parse(line, format!("[{}, {}) is not one of the 22 coarse bins", row.bin_low, row.bin_high))
        })?;
        let entry = years
            .entry(row.year)
            .or_insert_with(|| (ObservationBatch::new(row.year), vec![false; bins.len()]));
        if std::mem::replace(&mut entry.1[idx], true) {
            return Err(Error::parse(line, format!("bin [{}, {}) repeated for {}", row.bin_low, row.bin_high, row.year)));
        }
        entry.0.deaths[idx] = row.deaths;
    }
    Ok(years.into_values().map(|(b, _)| b).collect())
}

pub fn write_canonical<W: Write>(batches: &[ObservationBatch], writer: W) -> Result<()> {
    let bins = CoarseAgeBins::default();
    let mut w = csv::Writer::from_writer(writer);
    for b in batches {
        for (i, &deaths) in b.deaths.iter().enumerate() {
            w.serialize(Row {
                year: b.year,
                bin_low: bins.edges()[i],
                bin_high: bins.edges()[i + 1],
                deaths,
            })
            .map_err(|e| Error::Serialization(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::io("<canonical output>", e))
}
