//! Dataset files: header `X1,...,Xd,Y`, one observation per row.

use std::path::Path;

use monosindex::Sample;

use crate::error::CliError;

fn check_header(header: &csv::StringRecord) -> Result<usize, CliError> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let d = names.len().saturating_sub(1);
    let expected: Vec<String> = (1..=d).map(|j| format!("X{j}")).chain(std::iter::once("Y".into())).collect();
    if d < 2 || names != expected {
        return Err(CliError::Data(format!("header must be X1,...,Xd,Y with d >= 2, got '{}'", names.join(","))));
    }
    Ok(d)
}

pub fn parse_dataset(reader: impl std::io::Read, origin: &str) -> Result<Sample, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::Data(format!("{origin}: {e}")))?.clone();
    let d = check_header(&header).map_err(|e| CliError::Data(format!("{origin}: {e}")))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| CliError::Data(format!("{origin}: {e}")))?;
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Data(format!("{origin}: line {line}, column {}: '{field}' is not a number", j + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!("{origin}: line {line}, column {}: value is not finite", j + 1)));
            }
            if j < d {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    if ys.len() < d + 1 {
        return Err(CliError::Data(format!("{origin}: need at least {} data rows, got {}", d + 1, ys.len())));
    }
    Sample::from_flat(d, xs, ys).map_err(|e| CliError::Data(format!("{origin}: {e}")))
}

pub fn read_dataset(path: &Path) -> Result<Sample, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    parse_dataset(file, &path.display().to_string())
}
