use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Num(v) => format!("{v}"),
            Value::Int(v) => v.to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

/// One CSV file: `#`-prefixed metadata, a header row, data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(file_name: impl Into<String>, columns: Vec<String>) -> Self {
        Table {
            file_name: file_name.into(),
            meta: Vec::new(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    /// First non-finite cell as (row, column name).
    fn non_finite(&self) -> Option<(usize, &str)> {
        self.rows.iter().enumerate().find_map(|(i, row)| {
            row.iter().enumerate().find_map(|(j, v)| match v {
                Value::Num(x) if !x.is_finite() => Some((i, self.columns[j].as_str())),
                _ => None,
            })
        })
    }

    pub fn render(&self, header: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in header.iter().chain(&self.meta) {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Value::render))
                .expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
        out
    }
}

/// Writes every table into `dir`. Nothing is written unless every table is
/// well-formed and finite.
pub fn write_tables(
    dir: &Path,
    header: &[(String, String)],
    tables: &[Table],
) -> Result<Vec<PathBuf>, CliError> {
    for t in tables {
        assert!(
            t.rows.iter().all(|r| r.len() == t.columns.len()),
            "ragged table {}",
            t.file_name
        );
        if let Some((row, col)) = t.non_finite() {
            return Err(CliError::Numerical {
                point: format!("{} row {} column `{col}`", t.file_name, row + 1),
                source: coopnet::Error::InvalidParameter {
                    name: "output",
                    value: f64::NAN,
                    reason: "non-finite value",
                },
            });
        }
    }
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::with_capacity(tables.len());
    for t in tables {
        let path = dir.join(&t.file_name);
        fs::write(&path, t.render(header)).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}
