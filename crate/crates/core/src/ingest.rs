//! CSV ingestion of multi-class classification tables.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub drop_missing: bool,
    pub standardize: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            drop_missing: true,
            standardize: true,
        }
    }
}

/// Dense feature matrix with contiguous integer labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTable {
    /// Row-major `n x d`.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub column_names: Vec<String>,
    /// Original label strings, indexed by code.
    pub class_names: Vec<String>,
}

impl ClassificationTable {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.column_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Degenerate("table has no rows".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Degenerate("fewer than 2 classes".into()));
        }
        if self.features.len() != self.labels.len() {
            return Err(Error::Degenerate("feature/label row count mismatch".into()));
        }
        let mut seen = vec![false; self.num_classes];
        for (row, &l) in self.features.iter().zip(&self.labels) {
            if l >= self.num_classes {
                return Err(Error::Degenerate(format!("label {l} out of range")));
            }
            seen[l] = true;
            if row.len() != self.dim() || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Degenerate("malformed feature row".into()));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Degenerate("a class has no rows".into()));
        }
        Ok(())
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim(),
        "" | "NA" | "N/A" | "NaN" | "nan" | "?" | "null" | "NULL"
    )
}

fn parse_num(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

enum ColumnKind {
    Numeric,
    Categorical(Vec<String>),
}

pub fn load_csv_classification(
    path: &Path,
    label_column: &str,
    options: IngestOptions,
) -> Result<ClassificationTable> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let feature_idx: Vec<usize> = (0..headers.len()).filter(|&i| i != label_idx).collect();

    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let cells: Vec<String> = rec.iter().map(|c| c.trim().to_string()).collect();
        if cells.len() != headers.len() || is_missing(&cells[label_idx]) {
            continue;
        }
        rows.push(cells);
    }

    // Column typing uses non-missing cells only.
    let kind_of = |rows: &[Vec<String>], j: usize| -> ColumnKind {
        let numeric = rows
            .iter()
            .filter(|r| !is_missing(&r[j]))
            .all(|r| parse_num(&r[j]).is_some());
        if numeric {
            ColumnKind::Numeric
        } else {
            let mut levels: Vec<String> = Vec::new();
            for r in rows {
                let v = if is_missing(&r[j]) { "<missing>" } else { r[j].as_str() };
                if !levels.iter().any(|l| l == v) {
                    levels.push(v.to_string());
                }
            }
            ColumnKind::Categorical(levels)
        }
    };

    if options.drop_missing {
        rows.retain(|r| feature_idx.iter().all(|&j| !is_missing(&r[j])));
        // A column that is numeric apart from a few junk tokens stays
        // unparsable; drop those rows too so typing stays numeric.
        let numeric_like: Vec<usize> = feature_idx
            .iter()
            .copied()
            .filter(|&j| {
                let parsed = rows.iter().filter(|r| parse_num(&r[j]).is_some()).count();
                parsed * 2 > rows.len()
            })
            .collect();
        rows.retain(|r| numeric_like.iter().all(|&j| parse_num(&r[j]).is_some()));
    }

    if rows.is_empty() {
        return Err(Error::Degenerate("zero rows after cleaning".into()));
    }

    let kinds: Vec<ColumnKind> = feature_idx.iter().map(|&j| kind_of(&rows, j)).collect();

    let mut column_names = Vec::new();
    for (&j, kind) in feature_idx.iter().zip(&kinds) {
        match kind {
            ColumnKind::Numeric => column_names.push(headers[j].clone()),
            ColumnKind::Categorical(levels) => {
                for l in levels {
                    column_names.push(format!("{}={}", headers[j], l));
                }
            }
        }
    }

    let means: Vec<f64> = feature_idx
        .iter()
        .map(|&j| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| parse_num(&r[j])).collect();
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();

    let mut class_names: Vec<String> = Vec::new();
    let mut codes: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(rows.len());
    let mut features = Vec::with_capacity(rows.len());
    for r in &rows {
        let key = r[label_idx].clone();
        let next = codes.len();
        let code = *codes.entry(key.clone()).or_insert_with(|| {
            class_names.push(key);
            next
        });
        labels.push(code);

        let mut row = Vec::with_capacity(column_names.len());
        for ((&j, kind), mean) in feature_idx.iter().zip(&kinds).zip(&means) {
            match kind {
                ColumnKind::Numeric => row.push(parse_num(&r[j]).unwrap_or(*mean)),
                ColumnKind::Categorical(levels) => {
                    let v = if is_missing(&r[j]) { "<missing>" } else { r[j].as_str() };
                    for l in levels {
                        row.push(if l == v { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        features.push(row);
    }

    if class_names.len() < 2 {
        return Err(Error::Degenerate("fewer than 2 classes after cleaning".into()));
    }

    if options.standardize {
        standardize_columns(&mut features);
    }

    let table = ClassificationTable {
        features,
        labels,
        num_classes: class_names.len(),
        column_names,
        class_names,
    };
    table.validate()?;
    Ok(table)
}

/// In-place z-scoring with the sample (n-1) standard deviation. Constant
/// columns become all zeros.
pub fn standardize_columns(features: &mut [Vec<f64>]) {
    let n = features.len();
    if n == 0 {
        return;
    }
    let d = features[0].len();
    for j in 0..d {
        let mean = features.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = if n > 1 {
            features.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let sd = var.sqrt();
        let constant = !(sd > 0.0) || features.iter().all(|r| r[j] == features[0][j]);
        for r in features.iter_mut() {
            r[j] = if constant { 0.0 } else { (r[j] - mean) / sd };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    fn raw() -> IngestOptions {
        IngestOptions {
            drop_missing: true,
            standardize: false,
        }
    }

    #[test]
    fn labels_coded_by_first_appearance() {
        let f = csv_file("x,label\n1,cat\n2,dog\n3,cat\n4,dog\n");
        let t = load_csv_classification(f.path(), "label", raw()).unwrap();
        assert_eq!(t.num_classes, 2);
        assert_eq!(t.labels, vec![0, 1, 0, 1]);
        assert_eq!(t.class_names, vec!["cat", "dog"]);

        let f = csv_file("x,label\n1,zebra\n2,ant\n");
        let t = load_csv_classification(f.path(), "label", raw()).unwrap();
        assert_eq!(t.class_names, vec!["zebra", "ant"]);
    }

    #[test]
    fn missing_rows_dropped() {
        let f = csv_file("x,y,label\n1,2,a\nNA,3,b\n4,5,b\n6,7,a\n");
        let t = load_csv_classification(f.path(), "label", raw()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.features[1], vec![4.0, 5.0]);
    }

    #[test]
    fn missing_kept_is_imputed() {
        let f = csv_file("x,label\n1,a\nNA,b\n3,b\n");
        let opts = IngestOptions {
            drop_missing: false,
            standardize: false,
        };
        let t = load_csv_classification(f.path(), "label", opts).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.features[1], vec![2.0]);
    }

    #[test]
    fn standardize_three_values() {
        // mean 2, sample sd sqrt(((1)^2 + 0 + 1^2)/2) = 1
        let f = csv_file("v,label\n1,a\n2,b\n3,a\n");
        let t = load_csv_classification(f.path(), "label", IngestOptions::default()).unwrap();
        let col: Vec<f64> = t.features.iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn categorical_columns_one_hot() {
        let f = csv_file("color,size,label\nred,1,a\nblue,2,b\nred,3,a\n");
        let t = load_csv_classification(f.path(), "label", raw()).unwrap();
        assert_eq!(t.column_names, vec!["color=red", "color=blue", "size"]);
        assert_eq!(t.features[1], vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn constant_column_standardizes_to_zero() {
        let f = csv_file("c,v,label\n5,1,a\n5,2,b\n5,4,a\n");
        let t = load_csv_classification(f.path(), "label", IngestOptions::default()).unwrap();
        assert!(t.features.iter().all(|r| r[0] == 0.0));
        let col: Vec<f64> = t.features.iter().map(|r| r[1]).collect();
        let mean = col.iter().sum::<f64>() / 3.0;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        assert!(mean.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_paths() {
        let missing = Path::new("/definitely/not/here.csv");
        assert!(matches!(
            load_csv_classification(missing, "label", raw()),
            Err(Error::MissingFile(_))
        ));
        let f = csv_file("x,label\n1,a\n2,b\n");
        assert!(matches!(
            load_csv_classification(f.path(), "class", raw()),
            Err(Error::MissingColumn(_))
        ));
        let f = csv_file("x,label\n1,a\n2,a\n");
        assert!(load_csv_classification(f.path(), "label", raw()).is_err());
        let f = csv_file("x,label\nNA,a\n?,b\n");
        assert!(load_csv_classification(f.path(), "label", raw()).is_err());
    }

    #[test]
    fn loading_is_deterministic() {
        let f = csv_file("x,y,label\n0.1,3,a\n0.7,-2,b\n1.3,8,c\n-4,0.5,a\n");
        let a = load_csv_classification(f.path(), "label", IngestOptions::default()).unwrap();
        let b = load_csv_classification(f.path(), "label", IngestOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
