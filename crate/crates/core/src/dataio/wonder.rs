use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use log::warn;

use super::batch::{bin_index, ObservationBatch};
use super::read_text;
use crate::error::{Error, Result};
use crate::overdose::CoarseAgeBins;

/// Parses a tab-separated CDC WONDER export grouped by year and five-year
/// age group. Columns are located by header name; the trailing notes block
/// after the `---` line is ignored. Rows for "Not Stated" ages are skipped.
pub fn parse_wonder<R: Read>(reader: R) -> Result<Vec<ObservationBatch>> {
    let text = read_text(reader)?;
    let bins = CoarseAgeBins::default();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (header_line, header) = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((n, l)) => break (n, split_row(l)),
            None => return Err(Error::parse(1, "empty WONDER export")),
        }
    };
    let find = |pred: &dyn Fn(&str) -> bool| header.iter().position(|h| pred(&h.to_ascii_lowercase()));
    let year_col = find(&|h| h == "year")
        .or_else(|| find(&|h| h == "year code"))
        .ok_or_else(|| Error::parse(header_line, "no Year column in header"))?;
    let age_col = find(&|h| h.contains("age group") && !h.ends_with("code"))
        .or_else(|| find(&|h| h.contains("age group")))
        .ok_or_else(|| Error::parse(header_line, "no age group column in header"))?;
    let deaths_col =
        find(&|h| h == "deaths").ok_or_else(|| Error::parse(header_line, "no Deaths column in header"))?;
    let notes_col = find(&|h| h == "notes");

    let mut years: BTreeMap<i32, (ObservationBatch, Vec<bool>)> = BTreeMap::new();
    for (line, raw) in lines {
        if raw.trim_start().trim_start_matches('"').starts_with("---") {
            break;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let row = split_row(raw);
        let cell = |c: usize| row.get(c).map(String::as_str).unwrap_or("");
        let is_total = notes_col.is_some_and(|c| cell(c).eq_ignore_ascii_case("total"));
        let year_text = cell(year_col);
        if year_text.is_empty() {
            if is_total {
                continue;
            }
            return Err(Error::parse(line, "row has no year"));
        }
        let year: i32 = year_text
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid year {year_text:?}")))?;
        let entry = years
            .entry(year)
            .or_insert_with(|| (ObservationBatch::new(year), vec![false; bins.len()]));
        let deaths = parse_count(cell(deaths_col), line)?;

        let age = cell(age_col);
        if is_total && age.is_empty() {
            entry.0.reported_total = deaths;
            continue;
        }
        let Some((low, high)) = parse_age_label(age) else {
            if is_not_stated(age) {
                warn!("line {line}: skipping deaths with age not stated in {year}");
                continue;
            }
            return Err(Error::parse(line, format!("unknown age group {age:?}")));
        };
        let idx = bin_index(&bins, low, high)
            .ok_or_else(|| Error::parse(line, format!("age group {age:?} is not one of the 22 coarse bins")))?;
        if std::mem::replace(&mut entry.1[idx], true) {
            return Err(Error::parse(line, format!("age group {age:?} repeated for {year}")));
        }
        entry.0.deaths[idx] = deaths;
    }

    let mut out = Vec::with_capacity(years.len());
    for (year, (batch, seen)) in years {
        let missing = seen.iter().filter(|s| !**s).count();
        if missing > 0 {
            warn!("{year}: {missing} age groups absent from the export, treated as unreported");
        }
        if let Some(total) = batch.reported_total {
            if batch.known_total() > total {
                return Err(Error::parse(
                    0,
                    format!("{year}: bin counts sum to {} but the total row reports {total}", batch.known_total()),
                ));
            }
        }
        out.push(batch);
    }
    Ok(out)
}

/// Writes batches in the WONDER layout read by [`parse_wonder`], with one
/// total row per year and a short notes block.
pub fn write_wonder(batches: &[ObservationBatch], notes: &[&str]) -> String {
    let bins = CoarseAgeBins::default();
    let mut s = String::from(
        "\"Notes\"\t\"Year\"\t\"Year Code\"\t\"Five-Year Age Groups\"\t\"Five-Year Age Groups Code\"\t\"Deaths\"\n",
    );
    for b in batches {
        for (i, d) in b.deaths.iter().enumerate() {
            let (label, code) = age_label(bins.edges()[i], bins.edges()[i + 1]);
            let deaths = d.map_or_else(|| "Suppressed".to_owned(), |v| v.to_string());
            let _ = writeln!(s, "\t\"{0}\"\t\"{0}\"\t\"{label}\"\t\"{code}\"\t{deaths}", b.year);
        }
        if let Some(total) = b.reported_total {
            let _ = writeln!(s, "\"Total\"\t\"{0}\"\t\"{0}\"\t\t\t{total}", b.year);
        }
    }
    s.push_str("\"---\"\n");
    for n in notes {
        let _ = writeln!(s, "\"{}\"", n.replace('"', "'"));
    }
    s
}

fn split_row(line: &str) -> Vec<String> {
    line.split('\t').map(|c| c.trim().trim_matches('"').trim().to_owned()).collect()
}

fn parse_count(text: &str, line: usize) -> Result<Option<u64>> {
    if text.eq_ignore_ascii_case("suppressed") {
        return Ok(None);
    }
    text.replace(',', "")
        .parse()
        .map(Some)
        .map_err(|_| Error::parse(line, format!("invalid death count {text:?}")))
}

fn is_not_stated(label: &str) -> bool {
    let l = label.to_ascii_lowercase();
    l == "not stated" || l == "ns"
}

/// `"< 1 year"`, `"1-4 years"`, `"100+ years"` and their code forms
/// `"1-4"`, `"100+"` map to age windows `[low, high)`.
fn parse_age_label(label: &str) -> Option<(f64, f64)> {
    let l = label.trim();
    let l = l
        .strip_suffix(" years")
        .or_else(|| l.strip_suffix(" year"))
        .unwrap_or(l)
        .trim();
    if let Some(rest) = l.strip_prefix('<') {
        let hi: f64 = rest.trim().parse().ok()?;
        return Some((0.0, hi));
    }
    if let Some(lo) = l.strip_suffix('+') {
        let lo: f64 = lo.trim().parse().ok()?;
        return Some((lo, 120.0));
    }
    let (lo, hi) = l.split_once('-')?;
    let lo: f64 = lo.trim().parse().ok()?;
    let hi: f64 = hi.trim().parse().ok()?;
    Some((lo, hi + 1.0))
}

fn age_label(low: f64, high: f64) -> (String, String) {
    if low == 0.0 {
        (format!("< {high} year"), "1".to_owned())
    } else if high >= 120.0 {
        (format!("{low}+ years"), format!("{low}+"))
    } else {
        let hi = high - 1.0;
        (format!("{low}-{hi} years"), format!("{low}-{hi}"))
    }
}
