//! CSV datasets: header row, comma separated, categorical columns one-hot
//! encoded.

use std::collections::BTreeSet;
use std::path::Path;

use cde_core::linalg::Matrix;
use cde_core::Dataset;

use crate::error::{HarnessError, Result};

/// Cell texts treated as missing.
const MISSING: [&str; 5] = ["", "NA", "?", "NaN", "nan"];

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let wrap = |source| HarnessError::Csv { path: path.to_path_buf(), source };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(wrap)?;
    let header: Vec<String> = rdr.headers().map_err(wrap)?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(wrap)?;
        rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
    }
    Ok(Table { header, rows })
}

fn is_missing(cell: &str) -> bool {
    MISSING.contains(&cell)
}

/// `Some(values)` when every present cell parses as a finite number;
/// missing cells are `None`.
fn numeric_column(table: &Table, j: usize) -> Option<Vec<Option<f64>>> {
    table
        .rows
        .iter()
        .map(|r| {
            let cell = r[j].as_str();
            if is_missing(cell) {
                Some(None)
            } else {
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
            }
        })
        .collect()
}

fn column_index(table: &Table, path: &Path, name: &str) -> Result<usize> {
    table
        .header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| HarnessError::invalid(format!("{}: no column named {name:?}", path.display())))
}

fn target_values(table: &Table, path: &Path, target: &str) -> Result<(usize, Vec<f64>)> {
    let t = column_index(table, path, target)?;
    let col = numeric_column(table, t)
        .ok_or_else(|| HarnessError::invalid(format!("{}: target {target:?} is not numeric", path.display())))?;
    let y = col
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| HarnessError::invalid(format!("{}: target missing in data row {}", path.display(), i + 1)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((t, y))
}

/// Loads `path` with `target` as the response. Numeric columns pass
/// through; any other column becomes one indicator per observed category
/// (sorted). Missing cells are an error unless `impute` is set, in which
/// case numeric gaps take the column mean and every column with gaps gains
/// a `<name>_missing` indicator.
pub fn load_csv_dataset(path: &Path, target: &str, impute: bool) -> Result<Dataset> {
    let table = read_table(path)?;
    if table.rows.len() < 2 {
        return Err(HarnessError::invalid(format!("{}: need at least 2 data rows", path.display())));
    }
    let (t, y) = target_values(&table, path, target)?;
    let n = table.rows.len();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for (j, name) in table.header.iter().enumerate() {
        if j == t {
            continue;
        }
        let missing: Vec<bool> = table.rows.iter().map(|r| is_missing(&r[j])).collect();
        let n_missing = missing.iter().filter(|&&m| m).count();
        if n_missing > 0 && !impute {
            let row = missing.iter().position(|&m| m).unwrap() + 1;
            return Err(HarnessError::invalid(format!(
                "{}: missing value in column {name:?}, data row {row} (set impute to fill)",
                path.display()
            )));
        }
        match numeric_column(&table, j) {
            Some(col) => {
                if n_missing == n {
                    return Err(HarnessError::invalid(format!("{}: column {name:?} has no values", path.display())));
                }
                let mean = col.iter().flatten().sum::<f64>() / (n - n_missing) as f64;
                columns.push(col.iter().map(|v| v.unwrap_or(mean)).collect());
                names.push(name.clone());
            }
            None => {
                let cats: BTreeSet<&str> =
                    table.rows.iter().map(|r| r[j].as_str()).filter(|c| !is_missing(c)).collect();
                for cat in cats {
                    columns.push(table.rows.iter().map(|r| if r[j] == cat { 1.0 } else { 0.0 }).collect());
                    names.push(format!("{name}={cat}"));
                }
            }
        }
        if n_missing > 0 {
            columns.push(missing.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect());
            names.push(format!("{name}_missing"));
        }
    }
    let d = columns.len();
    let mut data = vec![0.0; n * d];
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            data[i * d + j] = *v;
        }
    }
    Ok(Dataset::new(Matrix::from_vec(n, d, data)?, y, names)?)
}

/// The response column alone, for scoring against held-out outcomes.
pub fn load_csv_target(path: &Path, target: &str) -> Result<Vec<f64>> {
    let table = read_table(path)?;
    if table.rows.is_empty() {
        return Err(HarnessError::invalid(format!("{}: no data rows", path.display())));
    }
    Ok(target_values(&table, path, target)?.1)
}

/// Number of data rows (header excluded).
pub fn count_rows(path: &Path) -> Result<usize> {
    Ok(read_table(path)?.rows.len())
}

/// The last header column, used when a dataset is named without a target.
pub fn last_column(path: &Path) -> Result<String> {
    let table = read_table(path)?;
    table
        .header
        .last()
        .cloned()
        .ok_or_else(|| HarnessError::invalid(format!("{}: empty header", path.display())))
}
