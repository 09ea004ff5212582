use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chem::{parse_smiles, MolecularGraph};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub smiles: String,
    pub target: f64,
    pub id: Option<String>,
}

/// A row that could not be used, with its 1-based data line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub line: usize,
    pub smiles: String,
    pub reason: String,
}

/// Parsed records. `graphs[i]` belongs to `records[i]`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub graphs: Vec<MolecularGraph>,
    pub rejected: Vec<Rejection>,
}

impl Dataset {
    /// Parses every record; failures are logged and kept in `rejected`.
    pub fn from_records(records: Vec<Record>) -> Result<Self, HarnessError> {
        let mut ds = Dataset {
            records: Vec::new(),
            graphs: Vec::new(),
            rejected: Vec::new(),
        };
        for (i, rec) in records.into_iter().enumerate() {
            ds.push(i + 1, rec);
        }
        if ds.records.is_empty() {
            return Err(HarnessError::EmptyDataset);
        }
        Ok(ds)
    }

    fn push(&mut self, line: usize, rec: Record) {
        let parsed = if rec.target.is_finite() {
            parse_smiles(&rec.smiles).map_err(|e| e.to_string())
        } else {
            Err(format!("non-finite target {}", rec.target))
        };
        match parsed {
            Ok(g) => {
                self.graphs.push(g);
                self.records.push(rec);
            }
            Err(reason) => {
                log::warn!("rejected row {line} ({}): {reason}", rec.smiles);
                self.rejected.push(Rejection {
                    line,
                    smiles: rec.smiles,
                    reason,
                });
            }
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.target).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            graphs: indices.iter().map(|&i| self.graphs[i].clone()).collect(),
            rejected: Vec::new(),
        }
    }
}

/// Reads a CSV with header columns `smiles`, `target` and optional `id`.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, HarnessError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::io(path, e))?;
    let headers = reader.headers().map_err(|e| HarnessError::io(path, e))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let smiles_col = column("smiles").ok_or_else(|| HarnessError::MissingColumn("smiles".into()))?;
    let target_col = column("target").ok_or_else(|| HarnessError::MissingColumn("target".into()))?;
    let id_col = column("id");

    let mut ds = Dataset {
        records: Vec::new(),
        graphs: Vec::new(),
        rejected: Vec::new(),
    };
    for (i, row) in reader.records().enumerate() {
        let line = i + 1;
        let row = row.map_err(|e| HarnessError::io(path, e))?;
        let smiles = row.get(smiles_col).unwrap_or("").to_string();
        let target = match row.get(target_col).unwrap_or("").parse::<f64>() {
            Ok(t) => t,
            Err(e) => {
                let reason = format!("unreadable target: {e}");
                log::warn!("rejected row {line} ({smiles}): {reason}");
                ds.rejected.push(Rejection { line, smiles, reason });
                continue;
            }
        };
        let id = id_col.and_then(|c| row.get(c)).filter(|s| !s.is_empty()).map(str::to_string);
        ds.push(line, Record { smiles, target, id });
    }
    if ds.records.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    Ok(ds)
}

/// Writes records as `smiles,target,id`.
pub fn write_csv(path: impl AsRef<Path>, records: &[Record]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    w.write_record(["smiles", "target", "id"]).map_err(|e| HarnessError::io(path, e))?;
    for r in records {
        w.write_record([r.smiles.as_str(), &r.target.to_string(), r.id.as_deref().unwrap_or("")])
            .map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_valid_rows() {
        let f = write("smiles,target\nCCO,1.0\nc1ccccc1,2.5\nCN,0\n");
        let ds = load_csv(f.path()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.targets(), vec![1.0, 2.5, 0.0]);
    }

    #[test]
    fn stereo_row_is_rejected_and_reported() {
        let f = write("smiles,target,id\nCCO,1,a\nC[C@H](N)O,2,b\nCC,3,c\n");
        let ds = load_csv(f.path()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.rejected.len(), 1);
        assert_eq!(ds.rejected[0].line, 2);
        assert_eq!(ds.records[1].id.as_deref(), Some("c"));
    }

    #[test]
    fn duplicates_are_kept() {
        let f = write("smiles,target\nCCO,1\nCCO,1\n");
        assert_eq!(load_csv(f.path()).unwrap().len(), 2);
    }

    #[test]
    fn nan_target_is_rejected() {
        let f = write("smiles,target\nCCO,NaN\nCC,1\n");
        let ds = load_csv(f.path()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.rejected.len(), 1);
    }

    #[test]
    fn missing_column_and_empty() {
        let f = write("smiles,value\nCCO,1\n");
        assert!(matches!(load_csv(f.path()), Err(HarnessError::MissingColumn(c)) if c == "target"));
        let f = write("smiles,target\n");
        assert!(matches!(load_csv(f.path()), Err(HarnessError::EmptyDataset)));
        assert!(matches!(load_csv("/nonexistent/x.csv"), Err(HarnessError::Io { .. })));
    }
}
