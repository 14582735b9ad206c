//! CSV ingestion: datasets, importance files, vote files and per-entity values.
//!
//! Every file is RFC 4180 CSV with a header row. Line numbers in errors are
//! 1-based file lines.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Trim};

use super::CliError;
use crate::apportion::Entity;
use crate::pipeline::ImportanceVector;
use crate::trees::Dataset;

struct Table {
    headers: Vec<String>,
    /// `(line, cells)`
    records: Vec<(u64, StringRecord)>,
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let file = File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .trim(Trim::All)
        .from_reader(file);
    let csv_error = |e: csv::Error| CliError::Csv {
        path: path.to_path_buf(),
        line: e.position().map(|p| p.line()),
        message: e.to_string(),
    };
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::EmptyFile(path.to_path_buf()));
    }
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        records.push((line, record));
    }
    if records.is_empty() {
        return Err(CliError::EmptyFile(path.to_path_buf()));
    }
    Ok(Table { headers, records })
}

/// Text column with at most two distinct values: sorted values map to 0 and 1.
fn binary_encoding(values: &BTreeSet<&str>) -> Option<BTreeMap<String, f64>> {
    (values.len() <= 2).then(|| {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.to_string(), i as f64))
            .collect()
    })
}

fn parse_column(path: &Path, table: &Table, column: usize) -> Result<Vec<f64>, CliError> {
    let name = &table.headers[column];
    let cells: Vec<(u64, &str)> = table
        .records
        .iter()
        .map(|(line, r)| (*line, r.get(column).unwrap_or("")))
        .collect();
    if let Some((line, _)) = cells.iter().find(|(_, c)| c.is_empty()) {
        return Err(CliError::MissingValue {
            path: path.to_path_buf(),
            line: *line,
            column: name.clone(),
        });
    }
    let numeric: Option<Vec<f64>> = cells.iter().map(|(_, c)| c.parse::<f64>().ok()).collect();
    if let Some(values) = numeric {
        if let Some((line, cell)) = cells
            .iter()
            .zip(&values)
            .find(|(_, v)| !v.is_finite())
            .map(|(c, _)| c)
        {
            return Err(CliError::InvalidNumber {
                path: path.to_path_buf(),
                line: *line,
                value: cell.to_string(),
            });
        }
        return Ok(values);
    }
    let distinct: BTreeSet<&str> = cells.iter().map(|(_, c)| *c).collect();
    let encoding = binary_encoding(&distinct).ok_or_else(|| CliError::NonNumericFeature {
        path: path.to_path_buf(),
        column: name.clone(),
        distinct: distinct.len(),
    })?;
    log::info!(
        "column {name:?} encoded as {}",
        encoding
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(cells.iter().map(|(_, c)| encoding[*c]).collect())
}

/// Reads a dataset with a binary target column. Text columns with two
/// distinct values are encoded in sorted order (`Female` = 0, `Male` = 1;
/// `No` = 0, `Yes` = 1); a numeric target with two values other than 0/1
/// maps the smaller to 0.
pub fn load_dataset(path: &Path, target: &str) -> Result<Dataset, CliError> {
    let table = read_table(path)?;
    let target_idx = table
        .headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| CliError::MissingColumn {
            path: path.to_path_buf(),
            column: target.to_string(),
        })?;

    let mut feature_names = Vec::new();
    let mut columns = Vec::new();
    for c in 0..table.headers.len() {
        if c != target_idx {
            feature_names.push(table.headers[c].clone());
            columns.push(parse_column(path, &table, c)?);
        }
    }

    let raw_target = parse_column(path, &table, target_idx).map_err(|e| match e {
        CliError::NonNumericFeature { path, column, .. } => {
            CliError::NonBinaryTarget { path, column }
        }
        other => other,
    })?;
    let levels: BTreeSet<u64> = raw_target.iter().map(|v| v.to_bits()).collect();
    if levels.len() > 2 {
        return Err(CliError::NonBinaryTarget {
            path: path.to_path_buf(),
            column: target.to_string(),
        });
    }
    let already_binary = raw_target.iter().all(|&v| v == 0.0 || v == 1.0);
    let low = raw_target.iter().copied().fold(f64::INFINITY, f64::min);
    let labels: Vec<u8> = raw_target
        .iter()
        .map(|&v| {
            if already_binary {
                v as u8
            } else {
                u8::from(v != low)
            }
        })
        .collect();
    if !already_binary {
        log::info!("target {target:?} encoded with {low} as 0");
    }

    let rows = (0..labels.len())
        .map(|r| columns.iter().map(|col| col[r]).collect())
        .collect();
    Dataset::new(feature_names, rows, labels).map_err(|source| CliError::Dataset {
        path: path.to_path_buf(),
        source,
    })
}

fn two_column_records(path: &Path) -> Result<Vec<(u64, String, String)>, CliError> {
    let table = read_table(path)?;
    if table.headers.len() != 2 {
        return Err(CliError::Csv {
            path: path.to_path_buf(),
            line: Some(1),
            message: format!("expected 2 columns, found {}", table.headers.len()),
        });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(table.records.len());
    for (line, record) in table.records {
        let name = record.get(0).unwrap_or("").to_string();
        if name.is_empty() {
            return Err(CliError::MissingValue {
                path: path.to_path_buf(),
                line,
                column: table.headers[0].clone(),
            });
        }
        if !seen.insert(name.clone()) {
            return Err(CliError::DuplicateFeature {
                path: path.to_path_buf(),
                line,
                feature: name,
            });
        }
        out.push((line, name, record.get(1).unwrap_or("").to_string()));
    }
    Ok(out)
}

fn parse_real(path: &Path, line: u64, cell: &str) -> Result<f64, CliError> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::InvalidNumber {
            path: path.to_path_buf(),
            line,
            value: cell.to_string(),
        })
}

/// Reads `feature,importance` rows in file order.
pub fn load_importances(path: &Path) -> Result<ImportanceVector, CliError> {
    let mut entries = Vec::new();
    for (line, name, cell) in two_column_records(path)? {
        let value = parse_real(path, line, &cell)?;
        if value < 0.0 {
            return Err(CliError::NegativeImportance {
                path: path.to_path_buf(),
                line,
                feature: name,
                value,
            });
        }
        entries.push((name, value));
    }
    ImportanceVector::new(entries).map_err(CliError::Pipeline)
}

/// Reads `entity,votes` rows with non-negative integer votes.
pub fn load_votes(path: &Path) -> Result<Vec<Entity>, CliError> {
    two_column_records(path)?
        .into_iter()
        .map(|(line, name, cell)| {
            cell.parse::<u64>()
                .map(|v| Entity::new(name, v))
                .map_err(|_| CliError::InvalidNumber {
                    path: path.to_path_buf(),
                    line,
                    value: cell,
                })
        })
        .collect()
}

/// Reads `entity,value` rows, e.g. global attribution magnitudes or
/// correlation coefficients.
pub fn load_values(path: &Path) -> Result<Vec<(String, f64)>, CliError> {
    two_column_records(path)?
        .into_iter()
        .map(|(line, name, cell)| Ok((name, parse_real(path, line, &cell)?)))
        .collect()
}

pub(crate) fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn dataset_with_binary_text_columns() {
        let f = file(
            "Age,Gender,Polyuria,class\n\
             40,Male,No,Positive\n\
             58,Female,Yes,Positive\n\
             41,Male,No,Negative\n\
             45,Female,Yes,Negative\n",
        );
        let d = load_dataset(f.path(), "class").unwrap();
        assert_eq!(d.feature_names(), ["Age", "Gender", "Polyuria"]);
        assert_eq!(d.column(1), vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(d.column(2), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(d.target(), [1, 1, 0, 0]);
    }

    #[test]
    fn numeric_dataset_parses_directly() {
        let f = file("a,b,y\n1.5,2,0\n-3,4e2,1\n");
        let d = load_dataset(f.path(), "y").unwrap();
        assert_eq!(d.rows(), [vec![1.5, 2.0], vec![-3.0, 400.0]]);
        assert_eq!(d.target(), [0, 1]);
    }

    #[test]
    fn numeric_target_is_remapped() {
        let f = file("a,y\n1,2\n2,4\n3,2\n");
        assert_eq!(load_dataset(f.path(), "y").unwrap().target(), [0, 1, 0]);
    }

    #[test]
    fn dataset_errors() {
        let f = file("a,b\n1,0\n2,1\n");
        assert!(matches!(
            load_dataset(f.path(), "y"),
            Err(CliError::MissingColumn { column, .. }) if column == "y"
        ));
        let f = file("a,y\nred,0\ngreen,1\nblue,0\n");
        assert!(matches!(
            load_dataset(f.path(), "y"),
            Err(CliError::NonNumericFeature { distinct: 3, .. })
        ));
        let f = file("a,y\n1,0\n2,1\n3,2\n");
        assert!(matches!(
            load_dataset(f.path(), "y"),
            Err(CliError::NonBinaryTarget { .. })
        ));
        let f = file("a,y\n1,0\n,1\n");
        assert!(matches!(
            load_dataset(f.path(), "y"),
            Err(CliError::MissingValue { line: 3, .. })
        ));
        let f = file("");
        assert!(matches!(
            load_dataset(f.path(), "y"),
            Err(CliError::EmptyFile(_))
        ));
        let f = file("a,y\n");
        assert!(matches!(
            load_dataset(f.path(), "y"),
            Err(CliError::EmptyFile(_))
        ));
    }

    #[test]
    fn importance_file() {
        let f = file("feature,importance\nmean radius,0.25\nmean texture,0.75\n");
        let v = load_importances(f.path()).unwrap();
        assert_eq!(
            v.iter().collect::<Vec<_>>(),
            [("mean radius", 0.25), ("mean texture", 0.75)]
        );

        let f = file("feature,importance\na,0.5\na,0.1\n");
        assert!(matches!(
            load_importances(f.path()),
            Err(CliError::DuplicateFeature { line: 3, .. })
        ));
        let f = file("feature,importance\na,-0.5\n");
        assert!(matches!(
            load_importances(f.path()),
            Err(CliError::NegativeImportance { line: 2, .. })
        ));
        let f = file("feature,importance\na,abc\n");
        assert!(matches!(
            load_importances(f.path()),
            Err(CliError::InvalidNumber { line: 2, .. })
        ));
        let f = file("feature,importance\n");
        assert!(matches!(
            load_importances(f.path()),
            Err(CliError::EmptyFile(_))
        ));
    }

    #[test]
    fn vote_file() {
        let f = file("entity,votes\nA,5\nB,3\n");
        assert_eq!(
            load_votes(f.path()).unwrap(),
            vec![Entity::new("A", 5), Entity::new("B", 3)]
        );
        let f = file("entity,votes\nA,-5\n");
        assert!(matches!(
            load_votes(f.path()),
            Err(CliError::InvalidNumber { .. })
        ));
    }
}
