use std::io::Read;

use log::warn;
use serde::{Deserialize, Serialize};

use super::read_text;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationSeries {
    pub rows: Vec<(i32, f64)>,
}

impl PopulationSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Least-squares line `persons = n0 + slope * (year - origin)`.
    pub fn linear_fit(&self, origin: f64) -> Option<(f64, f64)> {
        if self.rows.len() < 2 {
            return None;
        }
        let n = self.rows.len() as f64;
        let xs: Vec<f64> = self.rows.iter().map(|r| r.0 as f64 - origin).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = self.rows.iter().map(|r| r.1).sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&self.rows).map(|(x, r)| (x - mx) * (r.1 - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        Some((my - slope * mx, slope))
    }
}

/// Reads `year,population` rows; a non-numeric first line is taken as a
/// header.
pub fn parse_population<R: Read>(reader: R) -> Result<PopulationSeries> {
    let text = read_text(reader)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(i32, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::parse(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let Ok(year) = rec[0].parse::<i32>() else {
            if line == 1 {
                continue;
            }
            return Err(Error::parse(line, format!("invalid year {:?}", &rec[0])));
        };
        let persons: f64 = rec[1]
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid population {:?}", &rec[1])))?;
        if !(persons > 0.0) || !persons.is_finite() {
            return Err(Error::parse(line, format!("population must be positive, got {persons}")));
        }
        if let Some(&(prev, _)) = rows.last() {
            if year <= prev {
                return Err(Error::parse(line, format!("year {year} does not follow {prev}")));
            }
        }
        rows.push((year, persons));
    }
    if rows.is_empty() {
        warn!("population file has no rows");
    }
    Ok(PopulationSeries { rows })
}
