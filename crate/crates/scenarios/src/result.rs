//! Scenario results and their on-disk layout.
//!
//! A run directory holds `manifest.json` (config snapshot and provenance) and
//! one comma-separated file per table whose first line is the header
//! `name [unit],...`. Floats are written in shortest round-trip form, so
//! reading a table back gives bit-identical values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use photocount_core::dynamics::SolverStats;
use photocount_core::wigner::WignerGrid;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Result, ScenarioError};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Real(Vec<f64>),
    Text(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Real(v) => v.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    /// `1` for dimensionless columns.
    pub unit: String,
    pub data: ColumnData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), columns: Vec::new() }
    }

    pub fn real(mut self, name: &str, unit: &str, data: Vec<f64>) -> Self {
        self.columns.push(Column { name: name.into(), unit: unit.into(), data: ColumnData::Real(data) });
        self
    }

    pub fn text(mut self, name: &str, data: Vec<String>) -> Self {
        self.columns.push(Column { name: name.into(), unit: "1".into(), data: ColumnData::Text(data) });
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.name == name).and_then(|c| match &c.data {
            ColumnData::Real(v) => Some(v.as_slice()),
            ColumnData::Text(_) => None,
        })
    }

    pub fn text_column(&self, name: &str) -> Option<&[String]> {
        self.columns.iter().find(|c| c.name == name).and_then(|c| match &c.data {
            ColumnData::Text(v) => Some(v.as_slice()),
            ColumnData::Real(_) => None,
        })
    }

    pub fn unit(&self, name: &str) -> Option<&str> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.unit.as_str())
    }

    fn check(&self) -> Result<()> {
        let n = self.rows();
        for c in &self.columns {
            if c.data.len() != n {
                return Err(ScenarioError::Io(format!("table {}: column {} has {} rows, expected {n}", self.name, c.name, c.data.len())));
            }
            if c.name.contains([',', '[', ']', '\n']) || c.unit.contains([',', '[', ']', '\n']) {
                return Err(ScenarioError::Io(format!("table {}: invalid column header {} [{}]", self.name, c.name, c.unit)));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        self.check()?;
        let mut s = String::new();
        let header: Vec<String> = self.columns.iter().map(|c| format!("{} [{}]", c.name, c.unit)).collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for r in 0..self.rows() {
            for (i, c) in self.columns.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                match &c.data {
                    ColumnData::Real(v) => write!(s, "{}", v[r]).unwrap(),
                    ColumnData::Text(v) => s.push_str(&v[r].replace([',', '\n'], ";")),
                }
            }
            s.push('\n');
        }
        Ok(s)
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Self> {
        let bad = |m: String| ScenarioError::Io(format!("table {name}: {m}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let mut heads = Vec::new();
        for h in header.split(',') {
            let (n, u) = h.split_once(" [").ok_or_else(|| bad(format!("header `{h}` lacks a unit")))?;
            let u = u.strip_suffix(']').ok_or_else(|| bad(format!("header `{h}` lacks a unit")))?;
            heads.push((n.to_string(), u.to_string()));
        }
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); heads.len()];
        for (i, line) in lines.enumerate() {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != heads.len() {
                return Err(bad(format!("row {i} has {} cells, expected {}", parts.len(), heads.len())));
            }
            for (c, p) in parts.into_iter().enumerate() {
                cells[c].push(p.to_string());
            }
        }
        let columns = heads
            .into_iter()
            .zip(cells)
            .map(|((name, unit), vals)| {
                let nums: std::result::Result<Vec<f64>, _> = vals.iter().map(|v| v.parse::<f64>()).collect();
                let data = match nums {
                    Ok(v) => ColumnData::Real(v),
                    Err(_) => ColumnData::Text(vals),
                };
                Column { name, unit, data }
            })
            .collect();
        Ok(Self { name: name.into(), columns })
    }
}

/// Wigner grid attached to a result, with the provenance of its state.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerRecord {
    pub name: String,
    pub grid: WignerGrid,
    pub provenance: String,
}

const WIGNER_MAGIC: &str = "# photocount wigner grid v1";

fn csv_row(tag: &str, v: impl Iterator<Item = f64>) -> String {
    let mut s = String::from(tag);
    for x in v {
        write!(s, ",{x}").unwrap();
    }
    s
}

impl WignerRecord {
    /// Header lines with the grid spec and provenance, then `x`, `p` and one
    /// `w` line per x index (row-major W).
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let one_line = |s: &str| s.replace('\n', " ");
        let mut s = String::new();
        writeln!(s, "{WIGNER_MAGIC}").unwrap();
        writeln!(
            s,
            "# grid: x_min={} x_max={} nx={} p_min={} p_max={} np={}",
            g.x[0],
            g.x[g.x.len() - 1],
            g.x.len(),
            g.p[0],
            g.p[g.p.len() - 1],
            g.p.len()
        )
        .unwrap();
        writeln!(s, "# convention: {}", photocount_core::wigner::ALPHA_CONVENTION).unwrap();
        writeln!(s, "# provenance: {}", one_line(&self.provenance)).unwrap();
        writeln!(s, "# note: {}", one_line(&g.note)).unwrap();
        for a in &g.annotations {
            writeln!(s, "# annotation: {}", one_line(a)).unwrap();
        }
        writeln!(s, "{}", csv_row("x", g.x.iter().copied())).unwrap();
        writeln!(s, "{}", csv_row("p", g.p.iter().copied())).unwrap();
        for row in g.w.rows() {
            writeln!(s, "{}", csv_row("w", row.iter().copied())).unwrap();
        }
        s
    }

    pub fn from_text(name: &str, text: &str) -> Result<Self> {
        let bad = |m: &str| ScenarioError::Io(format!("wigner {name}: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(WIGNER_MAGIC) {
            return Err(bad("missing header"));
        }
        let (mut provenance, mut note, mut annotations) = (String::new(), String::new(), Vec::new());
        let (mut x, mut p, mut rows) = (Vec::new(), Vec::new(), Vec::new());
        let parse = |rest: &str| -> Result<Vec<f64>> { rest.split(',').map(|v| v.parse::<f64>().map_err(|_| bad("bad number"))).collect() };
        for line in lines {
            if let Some(v) = line.strip_prefix("# provenance: ") {
                provenance = v.to_string();
            } else if let Some(v) = line.strip_prefix("# note: ") {
                note = v.to_string();
            } else if let Some(v) = line.strip_prefix("# annotation: ") {
                annotations.push(v.to_string());
            } else if line.starts_with('#') {
                continue;
            } else if let Some(v) = line.strip_prefix("x,") {
                x = parse(v)?;
            } else if let Some(v) = line.strip_prefix("p,") {
                p = parse(v)?;
            } else if let Some(v) = line.strip_prefix("w,") {
                rows.push(parse(v)?);
            } else if !line.is_empty() {
                return Err(bad("unexpected line"));
            }
        }
        if rows.len() != x.len() || rows.iter().any(|r| r.len() != p.len()) {
            return Err(bad("W shape does not match the axes"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let w = Array2::from_shape_vec((x.len(), p.len()), flat).map_err(|_| bad("W shape"))?;
        Ok(Self { name: name.into(), grid: WignerGrid { x, p, w, note, annotations }, provenance })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit: String,
    pub version: String,
    pub scenario: String,
    pub workers: usize,
    /// Seconds; excluded from payload tables.
    pub wall_time: f64,
    pub solver_stats: SolverStats,
    pub simulations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub name: String,
    pub file: String,
    pub columns: Vec<(String, String)>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ScenarioConfig,
    pub provenance: Provenance,
    pub tables: Vec<TableEntry>,
    pub wigner: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    /// Merged configuration the run used.
    pub config: ScenarioConfig,
    pub tables: Vec<Table>,
    pub wigner: Vec<WignerRecord>,
    pub provenance: Provenance,
    /// Human-readable findings and warnings.
    pub notes: Vec<String>,
}

impl ScenarioResult {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes the run directory, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let io = |e: std::io::Error, p: &Path| ScenarioError::Io(format!("{}: {e}", p.display()));
        fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
        let mut entries = Vec::new();
        for t in &self.tables {
            let file = format!("{}.csv", t.name);
            let path = dir.join(&file);
            fs::write(&path, t.to_csv()?).map_err(|e| io(e, &path))?;
            entries.push(TableEntry {
                name: t.name.clone(),
                file,
                columns: t.columns.iter().map(|c| (c.name.clone(), c.unit.clone())).collect(),
                rows: t.rows(),
            });
        }
        let mut wigner = Vec::new();
        for w in &self.wigner {
            let file = format!("wigner_{}.txt", w.name);
            let path = dir.join(&file);
            fs::write(&path, w.to_text()).map_err(|e| io(e, &path))?;
            wigner.push(file);
        }
        let manifest = Manifest {
            config: self.config.clone(),
            provenance: self.provenance.clone(),
            tables: entries,
            wigner,
            notes: self.notes.clone(),
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| ScenarioError::Io(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| io(e, &path))?;
        Ok(dir.to_path_buf())
    }

    /// Reads a run directory written by [`ScenarioResult::write`].
    pub fn read(dir: &Path) -> Result<Self> {
        let io = |e: std::io::Error, p: &Path| ScenarioError::Io(format!("{}: {e}", p.display()));
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| io(e, &path))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        let mut tables = Vec::new();
        for e in &m.tables {
            let p = dir.join(&e.file);
            tables.push(Table::from_csv(&e.name, &fs::read_to_string(&p).map_err(|err| io(err, &p))?)?);
        }
        let mut wigner = Vec::new();
        for f in &m.wigner {
            let p = dir.join(f);
            let name = f.trim_start_matches("wigner_").trim_end_matches(".txt");
            wigner.push(WignerRecord::from_text(name, &fs::read_to_string(&p).map_err(|err| io(err, &p))?)?);
        }
        Ok(Self { config: m.config, tables, wigner, provenance: m.provenance, notes: m.notes })
    }
}
