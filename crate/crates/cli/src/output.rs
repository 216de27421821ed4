use std::fs;
use std::path::Path;

use bridgesens::data::format_number;
use bridgesens::gcomp::{DrawRecord, SweepTable};
use serde::Serialize;

use crate::CliError;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(bridgesens::Error::from)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<String>]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header.iter().map(AsRef::as_ref)).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn draw_rows(draws: &[DrawRecord]) -> Vec<Vec<String>> {
    draws
        .iter()
        .map(|d| {
            let mut r = vec![d.chain.to_string(), d.draw.to_string()];
            r.extend(d.values().iter().map(|&v| format_number(v)));
            r
        })
        .collect()
}

pub fn sweep_rows(table: &SweepTable) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.overlay.map(format_number).unwrap_or_default()];
            row.extend(
                [
                    r.value,
                    r.si_center,
                    r.lower,
                    r.upper,
                    r.half_width,
                    r.lower_credible,
                    r.upper_credible,
                    r.nie_mean,
                ]
                .map(format_number),
            );
            row
        })
        .collect()
}
