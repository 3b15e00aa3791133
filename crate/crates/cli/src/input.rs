use std::path::Path;

use penfit_core::{Dataset, FamilyKind, Response};

use crate::errors::{CliError, CliResult};

/// A dataset read from CSV together with the response family that was either
/// requested or inferred from the response values.
pub struct LoadedData {
    pub dataset: Dataset,
    pub family: FamilyKind,
}

pub fn parse_family(name: &str) -> CliResult<FamilyKind> {
    match name {
        "gaussian" => Ok(FamilyKind::Gaussian),
        "binomial" => Ok(FamilyKind::Binomial),
        "cox" => Ok(FamilyKind::Cox),
        other => Err(CliError::usage(format!(
            "unknown family \"{other}\"; expected gaussian, binomial, or cox"
        ))),
    }
}

fn column_index(headers: &[String], name: &str, role: &str) -> CliResult<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::data(format!("{role} column \"{name}\" not found in the header")))
}

fn parse_cell(raw: &str, column: &str, row: usize) -> CliResult<f64> {
    if raw.is_empty() {
        return Err(CliError::data(format!(
            "missing value in column \"{column}\", data row {row}"
        )));
    }
    raw.parse::<f64>().map_err(|_| {
        CliError::data(format!(
            "cannot parse \"{raw}\" as a number in column \"{column}\", data row {row}"
        ))
    })
}

fn parse_binary(values: &[f64], column: &str) -> CliResult<Vec<u8>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(CliError::data(format!(
                    "column \"{column}\" must contain only 0 and 1; found {v} in data row {}",
                    i + 1
                )))
            }
        })
        .collect()
}

/// Read a CSV with a header row into a standardized dataset. Every column
/// except the response columns becomes a feature, in file order. The family
/// is inferred when not given: a status column means cox, a 0/1 response
/// means binomial, anything else gaussian.
pub fn load_dataset(
    path: &Path,
    y: &str,
    status: Option<&str>,
    family: Option<FamilyKind>,
    unpenalized: &[String],
) -> CliResult<LoadedData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    for (i, h) in headers.iter().enumerate() {
        if headers[..i].contains(h) {
            return Err(CliError::data(format!(
                "duplicate column name \"{h}\" in {}",
                path.display()
            )));
        }
    }

    let y_ix = column_index(&headers, y, "response")?;
    let status_ix = match status {
        Some(name) => Some(column_index(&headers, name, "status")?),
        None => None,
    };
    if status_ix == Some(y_ix) {
        return Err(CliError::usage(
            "--y and --status must name different columns".to_string(),
        ));
    }

    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(CliError::data(format!(
                "data row {} has {} fields but the header has {}",
                r + 1,
                record.len(),
                headers.len()
            )));
        }
        for (c, raw) in record.iter().enumerate() {
            cells[c].push(parse_cell(raw, &headers[c], r + 1)?);
        }
    }
    if cells[y_ix].is_empty() {
        return Err(CliError::data(format!("{} contains no data rows", path.display())));
    }

    let family = match (family, status_ix) {
        (Some(FamilyKind::Cox), None) => {
            return Err(CliError::usage(
                "--family cox requires a --status column".to_string(),
            ));
        }
        (Some(f), Some(_)) if f != FamilyKind::Cox => {
            return Err(CliError::usage(format!(
                "--status only applies to survival data, not --family {f:?}"
            )));
        }
        (Some(f), _) => f,
        (None, Some(_)) => FamilyKind::Cox,
        (None, None) => {
            if cells[y_ix].iter().all(|&v| v == 0.0 || v == 1.0) {
                FamilyKind::Binomial
            } else {
                FamilyKind::Gaussian
            }
        }
    };

    let response = match family {
        FamilyKind::Gaussian => Response::Continuous(cells[y_ix].clone()),
        FamilyKind::Binomial => Response::Binary(parse_binary(&cells[y_ix], y)?),
        FamilyKind::Cox => {
            let status_ix = status_ix.expect("checked above");
            Response::Survival {
                time: cells[y_ix].clone(),
                status: parse_binary(&cells[status_ix], &headers[status_ix])?,
            }
        }
    };

    let feature_ix: Vec<usize> = (0..headers.len())
        .filter(|&c| c != y_ix && Some(c) != status_ix)
        .collect();
    if feature_ix.is_empty() {
        return Err(CliError::data(
            "no feature columns remain after removing the response".to_string(),
        ));
    }
    let names: Vec<String> = feature_ix.iter().map(|&c| headers[c].clone()).collect();
    let mut penalized = vec![true; feature_ix.len()];
    for name in unpenalized {
        let j = names.iter().position(|n| n == name).ok_or_else(|| {
            CliError::data(format!("unpenalized column \"{name}\" is not a feature column"))
        })?;
        penalized[j] = false;
    }
    let columns: Vec<Vec<f64>> = feature_ix.iter().map(|&c| cells[c].clone()).collect();

    let dataset = Dataset::from_columns(columns, response, penalized, Some(names))?;
    Ok(LoadedData { dataset, family })
}
