use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Provenance of a dataset; written to a JSON sidecar next to the CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub index: Option<usize>,
    pub seed: Option<u64>,
    /// Center of the input law for this dataset.
    pub chi: Option<f64>,
    pub simulator: Option<String>,
    pub generator: Option<String>,
}

/// Paired inputs `X` (n x d_x) and outputs `Y` (n x d_y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    #[serde(default)]
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> Result<Self> {
        check_dim(x.len(), y.len())?;
        if let (Some(x0), Some(y0)) = (x.first(), y.first()) {
            for row in &x {
                check_dim(x0.len(), row.len())?;
            }
            for row in &y {
                check_dim(y0.len(), row.len())?;
            }
        }
        if x.iter().chain(&y).flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset entries must be finite"));
        }
        Ok(Self { x, y, meta: DatasetMeta::default() })
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[Vec<f64>] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn y_dim(&self) -> usize {
        self.y.first().map_or(0, Vec::len)
    }

    /// Outputs stacked into one vector `(Y_1, ..., Y_n)`.
    pub fn stacked_y(&self) -> Vec<f64> {
        self.y.iter().flatten().copied().collect()
    }

    /// CSV text with header `x1..,y1..`, LF line endings.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let header: Vec<String> = (1..=self.x_dim())
            .map(|i| format!("x{i}"))
            .chain((1..=self.y_dim()).map(|i| format!("y{i}")))
            .collect();
        w.write_record(&header).expect("in-memory write");
        for (x, y) in self.x.iter().zip(&self.y) {
            w.write_record(x.iter().chain(y).map(|v| v.to_string())).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }

    pub fn from_csv_str(text: &str, path: &Path) -> Result<Self> {
        let fmt = |message: String| Error::Format { path: path.to_path_buf(), message };
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| fmt(e.to_string()))?.clone();
        let x_cols: Vec<usize> = header.iter().enumerate().filter(|(_, h)| h.starts_with('x')).map(|(i, _)| i).collect();
        let y_cols: Vec<usize> = header.iter().enumerate().filter(|(_, h)| h.starts_with('y')).map(|(i, _)| i).collect();
        if x_cols.is_empty() || y_cols.is_empty() || x_cols.len() + y_cols.len() != header.len() {
            return Err(fmt(format!("expected x.. and y.. columns, got header {:?}", header.iter().collect::<Vec<_>>())));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| fmt(e.to_string()))?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| fmt(format!("row {}: column {}: {e}", line + 2, i + 1)))
            };
            xs.push(x_cols.iter().map(|&i| parse(i)).collect::<Result<Vec<_>>>()?);
            ys.push(y_cols.iter().map(|&i| parse(i)).collect::<Result<Vec<_>>>()?);
        }
        Dataset::new(xs, ys).map_err(|e| fmt(e.to_string()))
    }

    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    /// Writes `<path>` and its JSON sidecar.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        fs::write(csv_path, self.to_csv_string()).map_err(|e| Error::io(csv_path, e))?;
        let side = Self::sidecar_path(csv_path);
        let json = serde_json::to_string_pretty(&self.meta).expect("metadata serializes");
        fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
    }

    /// Reads a dataset CSV; the sidecar is optional.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let mut ds = Self::from_csv_str(&text, csv_path)?;
        let side = Self::sidecar_path(csv_path);
        if side.exists() {
            let meta = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            ds.meta = serde_json::from_str(&meta).map_err(|e| Error::Format { path: side, message: e.to_string() })?;
        }
        Ok(ds)
    }
}
