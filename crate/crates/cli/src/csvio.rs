//! CSV ingestion: comma-separated, UTF-8, dot decimals, one observation
//! per row, dimension inferred from the column count, optional single
//! header row.

use crate::CliError;
use pptube::cumulant::DataMatrix;
use std::path::Path;

pub fn read_data(path: &Path, header: bool) -> Result<DataMatrix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_data(&text, header, &path.display().to_string())
}

pub fn parse_data(text: &str, header: bool, source: &str) -> Result<DataMatrix, CliError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 && header {
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in trimmed.split(',') {
            let value: f64 = field.trim().parse().map_err(|_| {
                CliError::Usage(format!(
                    "{source}: line {}: cannot parse '{field}' as a number",
                    idx + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::Usage(format!(
                    "{source}: line {}: non-finite value",
                    idx + 1
                )));
            }
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::Usage(format!(
                    "{source}: line {}: expected {w} columns, found {}",
                    idx + 1,
                    row.len()
                )));
            }
            _ => {}
        }
        rows.push(row);
    }
    let q = width.unwrap_or(0);
    if q < 2 {
        return Err(CliError::Usage(format!(
            "{source}: need at least 2 columns, found {q}"
        )));
    }
    if rows.len() < 5 {
        return Err(CliError::Usage(format!(
            "{source}: need at least 5 observations, found {}",
            rows.len()
        )));
    }
    DataMatrix::from_rows(&rows).map_err(CliError::from)
}
