use crate::error::{invalid, Error, Result};
use crate::numeric::Nats;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// Entropy values by level (rows) and parameter cell (columns).
#[derive(Clone, Debug, Default)]
pub struct EntropyGrid {
    columns: Vec<String>,
    rows: BTreeMap<usize, BTreeMap<String, Nats>>,
    methods: BTreeMap<String, String>,
    headline: Option<String>,
}

/// JSON sidecar of an exported grid.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct GridManifest {
    pub csv: String,
    pub columns: Vec<String>,
    pub levels: Vec<usize>,
    pub headline: String,
    pub methods: BTreeMap<String, String>,
}

fn format_nats(v: Nats) -> String {
    if v.0.is_finite() {
        format!("{}", v.0)
    } else if v.0 < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

impl EntropyGrid {
    pub fn new() -> EntropyGrid {
        EntropyGrid::default()
    }

    pub fn insert(&mut self, d: usize, column: &str, value: Nats, method: &str) {
        if !self.columns.iter().any(|c| c == column) {
            self.columns.push(column.into());
        }
        self.methods.insert(column.into(), method.into());
        self.rows.entry(d).or_default().insert(column.into(), value);
    }

    pub fn get(&self, d: usize, column: &str) -> Option<Nats> {
        self.rows.get(&d)?.get(column).copied()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn levels(&self) -> Vec<usize> {
        self.rows.keys().copied().collect()
    }

    pub fn set_headline(&mut self, column: &str) -> Result<()> {
        if !self.columns.iter().any(|c| c == column) {
            return invalid(format!("unknown grid column `{column}`"));
        }
        self.headline = Some(column.into());
        Ok(())
    }

    /// Writes `<stem>.csv` (column `d`, then one column per cell) and `<stem>.json`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<GridManifest> {
        let headline = self.headline.clone().ok_or_else(|| Error::InvalidParameter("grid has no headline cell".into()))?;
        fs::create_dir_all(dir)?;
        let csv_name = format!("{stem}.csv");
        let mut w = csv::Writer::from_path(dir.join(&csv_name)).map_err(|e| Error::Io(e.into()))?;
        let mut header = vec!["d".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
        for (d, row) in &self.rows {
            let mut rec = vec![d.to_string()];
            rec.extend(self.columns.iter().map(|c| row.get(c).map(|v| format_nats(*v)).unwrap_or_default()));
            w.write_record(&rec).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        let manifest =
            GridManifest { csv: csv_name, columns: self.columns.clone(), levels: self.levels(), headline, methods: self.methods.clone() };
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }
}
