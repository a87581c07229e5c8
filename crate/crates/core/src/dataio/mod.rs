//! File formats: CDC WONDER exports, a canonical per-bin CSV, population
//! series, and the run outputs written by the command-line tool.

mod batch;
mod canonical;
mod output;
mod population;
mod wonder;

pub use batch::{bin_index, ObservationBatch};
pub use canonical::{parse_canonical, write_canonical};
pub use output::{
    read_output_json, write_output, write_plot_csv, OutputFormat, PlotRow, RunMetadata, RunOutput, StepRecord,
    SCHEMA_VERSION,
};
pub use population::{parse_population, PopulationSeries};
pub use wonder::{parse_wonder, write_wonder};

use std::io::Read;

use crate::error::{Error, Result};

/// Reads a whole text stream, dropping a leading byte-order mark.
pub(crate) fn read_text<R: Read>(mut reader: R) -> Result<String> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<input stream>", e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::parse(0, format!("input is not UTF-8: {e}")))?;
    Ok(text.strip_prefix('\u{feff}').map(str::to_owned).unwrap_or(text))
}
