//! Flow tables and labour vectors: parsing, validation and serialization.
//!
//! Two flow-table formats are accepted:
//!
//! - CSV, first line `;name1;…;nameN`, then one line `nameI;f_i1;…;f_iN`
//!   per sector. The delimiter (`;` or `,`) is detected from the header.
//!   Row label order defines sector order; the header may list the same
//!   names in a different order.
//! - JSON, `{ "sectors": [...], "flows": [[...], ...], "labour": [...]?, "units": "..."? }`.
//!
//! Numbers are kept in full double precision. Rounding happens only in
//! [`write_report`] for the human table.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::EntropyReport;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("malformed input at line {line}: {message}")]
    MalformedInput { line: usize, message: String },
    #[error("table is not square: {rows} rows, {columns} columns")]
    NonSquare { rows: usize, columns: usize },
    #[error("row label `{0}` does not appear in the header")]
    LabelMismatch(String),
    #[error("negative flow {value} in cell ({row}, {column})")]
    NegativeFlow {
        row: String,
        column: String,
        value: f64,
    },
    #[error("non-finite value in cell ({row}, {column})")]
    NonFiniteValue { row: String, column: String },
    #[error("duplicate sector label `{0}`")]
    DuplicateLabel(String),
    #[error("empty sector label at position {0}")]
    EmptyLabel(usize),
    #[error("no value given for sector `{0}`")]
    MissingSector(String),
    #[error("unknown sector `{0}`")]
    UnknownSector(String),
    #[error("negative value {value} for sector `{sector}`")]
    NegativeValue { sector: String, value: f64 },
    #[error("non-finite value for sector `{0}`")]
    NonFiniteEntry(String),
    #[error("all entries are zero; no probability normalization exists")]
    AllZero,
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("unsupported file format for `{0}` (expected .csv or .json)")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = TableError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorLabel {
    pub id: usize,
    pub name: String,
}

/// Square table of nonnegative cross-sectoral flows, row `i` holding the
/// deliveries of sector `i` to every sector `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMatrix {
    labels: Vec<SectorLabel>,
    values: Vec<f64>,
    units: Option<String>,
}

impl FlowMatrix {
    /// Builds a validated matrix from sector names and rows.
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let labels = make_labels(names)?;
        let n = labels.len();
        if rows.len() != n {
            return Err(TableError::NonSquare {
                rows: rows.len(),
                columns: n,
            });
        }
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(TableError::NonSquare {
                    rows: n,
                    columns: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                check_flow(v, &labels[i].name, &labels[j].name)?;
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            labels,
            values,
            units: None,
        })
    }

    /// Convenience constructor with generated labels `S1..Sn`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let names = (1..=rows.len()).map(|i| format!("S{i}")).collect();
        Self::new(names, rows)
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = Some(units.into());
        self
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[SectorLabel] {
        &self.labels
    }

    pub fn names(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.name.clone()).collect()
    }

    pub fn units(&self) -> Option<&str> {
        self.units.as_deref()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n().max(1))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Submatrix on the given sector ids (in the given order), labels kept
    /// and ids renumbered contiguously.
    pub fn submatrix(&self, keep: &[usize]) -> FlowMatrix {
        let labels = keep
            .iter()
            .enumerate()
            .map(|(id, &old)| SectorLabel {
                id,
                name: self.labels[old].name.clone(),
            })
            .collect();
        let mut values = Vec::with_capacity(keep.len() * keep.len());
        for &i in keep {
            for &j in keep {
                values.push(self.get(i, j));
            }
        }
        FlowMatrix {
            labels,
            values,
            units: self.units.clone(),
        }
    }

    /// Copy with every diagonal (intra-sector) flow set to zero.
    pub fn without_diagonal(&self) -> FlowMatrix {
        let mut out = self.clone();
        let n = self.n();
        for i in 0..n {
            out.values[i * n + i] = 0.0;
        }
        out
    }

    /// Copy with every flow strictly below `threshold` set to zero.
    pub fn pruned_below(&self, threshold: f64) -> FlowMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            if *v < threshold {
                *v = 0.0;
            }
        }
        out
    }

    /// Appends one sector with the given outgoing row and incoming column.
    /// `corner` is the new sector's own diagonal flow.
    pub(crate) fn bordered(
        &self,
        name: &str,
        new_row: &[f64],
        new_column: &[f64],
        corner: f64,
    ) -> Result<FlowMatrix> {
        let n = self.n();
        if new_row.len() != n {
            return Err(TableError::LengthMismatch {
                expected: n,
                found: new_row.len(),
            });
        }
        if new_column.len() != n {
            return Err(TableError::LengthMismatch {
                expected: n,
                found: new_column.len(),
            });
        }
        let mut names = self.names();
        names.push(name.to_string());
        let mut rows: Vec<Vec<f64>> = self
            .rows()
            .zip(new_column)
            .map(|(r, &c)| {
                let mut r = r.to_vec();
                r.push(c);
                r
            })
            .collect();
        let mut last = new_row.to_vec();
        last.push(corner);
        rows.push(last);
        let mut out = FlowMatrix::new(names, rows)?;
        out.units = self.units.clone();
        Ok(out)
    }
}

fn make_labels(names: Vec<String>) -> Result<Vec<SectorLabel>> {
    let mut seen = HashSet::new();
    names
        .into_iter()
        .enumerate()
        .map(|(id, name)| {
            if name.trim().is_empty() {
                return Err(TableError::EmptyLabel(id));
            }
            if !seen.insert(name.clone()) {
                return Err(TableError::DuplicateLabel(name));
            }
            Ok(SectorLabel { id, name })
        })
        .collect()
}

fn check_flow(v: f64, row: &str, column: &str) -> Result<()> {
    if !v.is_finite() {
        return Err(TableError::NonFiniteValue {
            row: row.to_string(),
            column: column.to_string(),
        });
    }
    if v < 0.0 {
        return Err(TableError::NegativeFlow {
            row: row.to_string(),
            column: column.to_string(),
            value: v,
        });
    }
    Ok(())
}

/// Direct labour requirements `ℓ_i`, aligned to a flow table's sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabourVector {
    values: Vec<f64>,
}

impl LabourVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(TableError::NonFiniteEntry(format!("#{}", i + 1)));
            }
            if v < 0.0 {
                return Err(TableError::NegativeValue {
                    sector: format!("#{}", i + 1),
                    value: v,
                });
            }
        }
        if !values.iter().any(|&v| v > 0.0) {
            return Err(TableError::AllZero);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Normalized allocation `π_i = ℓ_i / Σ_j ℓ_j`.
    pub fn distribution(&self) -> Vec<f64> {
        let total: f64 = self.values.iter().sum();
        self.values.iter().map(|v| v / total).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("csv") | Some("txt") => Ok(Self::Csv),
            Some("json") => Ok(Self::Json),
            _ => Err(TableError::UnknownFormat(path.display().to_string())),
        }
    }
}

/// A parsed flow table together with the optional labour vector that the
/// JSON format may carry.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTable {
    pub flows: FlowMatrix,
    pub labour: Option<LabourVector>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FlowDocument {
    sectors: Vec<String>,
    flows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labour: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<String>,
}

pub fn parse_flow_table(source: impl Read, format: TableFormat) -> Result<FlowMatrix> {
    parse_flow_document(source, format).map(|t| t.flows)
}

pub fn parse_flow_document(mut source: impl Read, format: TableFormat) -> Result<FlowTable> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    match format {
        TableFormat::Csv => Ok(FlowTable {
            flows: parse_flow_csv(&text)?,
            labour: None,
        }),
        TableFormat::Json => parse_flow_json(&text),
    }
}

pub fn read_flow_file(path: &Path) -> Result<FlowTable> {
    let format = TableFormat::from_path(path)?;
    let file = std::fs::File::open(path)?;
    parse_flow_document(file, format)
}

fn detect_delimiter(header: &str) -> u8 {
    // The header's first cell is empty, so a well-formed header starts
    // with its delimiter.
    match header.trim_start().as_bytes().first() {
        Some(b';') => b';',
        Some(b',') => b',',
        _ => {
            if header.matches(';').count() >= header.matches(',').count() {
                b';'
            } else {
                b','
            }
        }
    }
}

fn parse_number(cell: &str, row: &str, column: &str, line: usize) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| TableError::MalformedInput {
        line,
        message: format!("cannot parse `{cell}` as a number in cell ({row}, {column})"),
    })?;
    check_flow(v, row, column)?;
    Ok(v)
}

fn parse_flow_csv(text: &str) -> Result<FlowMatrix> {
    let header_line = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .ok_or(TableError::MalformedInput {
            line: 1,
            message: "empty input".into(),
        })?;
    let delimiter = detect_delimiter(header_line);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
        None => {
            return Err(TableError::MalformedInput {
                line: 1,
                message: "empty input".into(),
            })
        }
    };
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if columns.is_empty() {
        return Err(TableError::MalformedInput {
            line: 1,
            message: "header lists no sectors".into(),
        });
    }
    make_labels(columns.clone())?;
    let column_index: HashMap<&str, usize> = columns
        .iter()
        .enumerate()
        .map(|(j, c)| (c.as_str(), j))
        .collect();

    let mut row_names = Vec::new();
    let mut raw_rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != columns.len() + 1 {
            return Err(TableError::NonSquare {
                rows: columns.len(),
                columns: record.len().saturating_sub(1),
            });
        }
        let name = record[0].to_string();
        if !column_index.contains_key(name.as_str()) {
            if name.is_empty() {
                return Err(TableError::EmptyLabel(row_names.len()));
            }
            return Err(TableError::LabelMismatch(name));
        }
        let values = record
            .iter()
            .skip(1)
            .zip(&columns)
            .map(|(cell, column)| parse_number(cell, &name, column, line))
            .collect::<Result<Vec<f64>>>()?;
        row_names.push(name);
        raw_rows.push(values);
    }
    if row_names.len() != columns.len() {
        return Err(TableError::NonSquare {
            rows: row_names.len(),
            columns: columns.len(),
        });
    }
    make_labels(row_names.clone())?;
    // Columns are permuted into row order.
    let order: Vec<usize> = row_names
        .iter()
        .map(|name| column_index[name.as_str()])
        .collect();
    let rows = raw_rows
        .into_iter()
        .map(|r| order.iter().map(|&j| r[j]).collect())
        .collect();
    FlowMatrix::new(row_names, rows)
}

fn csv_error(e: csv::Error, fallback_line: usize) -> TableError {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    TableError::MalformedInput {
        line,
        message: e.to_string(),
    }
}

fn parse_flow_json(text: &str) -> Result<FlowTable> {
    let doc: FlowDocument = serde_json::from_str(text)?;
    let mut flows = FlowMatrix::new(doc.sectors, doc.flows)?;
    flows.units = doc.units;
    let labour = match doc.labour {
        Some(values) => {
            if values.len() != flows.n() {
                return Err(TableError::LengthMismatch {
                    expected: flows.n(),
                    found: values.len(),
                });
            }
            let values = check_sector_values(values, &flows.names())?;
            Some(LabourVector::new(values)?)
        }
        None => None,
    };
    Ok(FlowTable { flows, labour })
}

fn check_sector_values(values: Vec<f64>, names: &[String]) -> Result<Vec<f64>> {
    for (v, name) in values.iter().zip(names) {
        if !v.is_finite() {
            return Err(TableError::NonFiniteEntry(name.clone()));
        }
        if *v < 0.0 {
            return Err(TableError::NegativeValue {
                sector: name.clone(),
                value: *v,
            });
        }
    }
    Ok(values)
}

/// Reads one nonnegative value per sector, keyed by sector name, and
/// aligns them to `labels`. Accepts a JSON object `{"A": 90, ...}` or
/// lines `name;value` (`,` also accepted as delimiter).
pub fn parse_sector_values(mut source: impl Read, labels: &[SectorLabel]) -> Result<Vec<f64>> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let pairs: Vec<(String, f64)> = if text.trim_start().starts_with('{') {
        let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text)?;
        map.into_iter()
            .map(|(k, v)| {
                let x = v.as_f64().ok_or_else(|| TableError::MalformedInput {
                    line: 1,
                    message: format!("value for `{k}` is not a number"),
                })?;
                Ok((k, x))
            })
            .collect::<Result<_>>()?
    } else {
        let mut pairs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let delimiter = if line.contains(';') { ';' } else { ',' };
            let (name, value) =
                line.split_once(delimiter)
                    .ok_or_else(|| TableError::MalformedInput {
                        line: idx + 1,
                        message: "expected `name;value`".into(),
                    })?;
            let value = value.trim();
            let x: f64 = value.parse().map_err(|_| TableError::MalformedInput {
                line: idx + 1,
                message: format!("cannot parse `{value}` as a number"),
            })?;
            pairs.push((name.trim().to_string(), x));
        }
        pairs
    };

    let index: HashMap<&str, usize> = labels.iter().map(|l| (l.name.as_str(), l.id)).collect();
    let mut values: Vec<Option<f64>> = vec![None; labels.len()];
    for (name, x) in pairs {
        let &i = index
            .get(name.as_str())
            .ok_or_else(|| TableError::UnknownSector(name.clone()))?;
        if values[i].is_some() {
            return Err(TableError::DuplicateLabel(name));
        }
        if !x.is_finite() {
            return Err(TableError::NonFiniteEntry(name));
        }
        if x < 0.0 {
            return Err(TableError::NegativeValue {
                sector: name,
                value: x,
            });
        }
        values[i] = Some(x);
    }
    values
        .into_iter()
        .zip(labels)
        .map(|(v, l)| v.ok_or_else(|| TableError::MissingSector(l.name.clone())))
        .collect()
}

pub fn parse_labour_vector(source: impl Read, labels: &[SectorLabel]) -> Result<LabourVector> {
    LabourVector::new(parse_sector_values(source, labels)?)
}

/// Writes a flow table in full precision. `parse_flow_table` on the output
/// reproduces `flows` exactly.
pub fn write_flow_table(
    flows: &FlowMatrix,
    labour: Option<&LabourVector>,
    format: TableFormat,
) -> String {
    match format {
        TableFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .delimiter(b';')
                .from_writer(Vec::new());
            let header = std::iter::once(String::new()).chain(flows.names());
            w.write_record(header).expect("in-memory write");
            for (l, row) in flows.labels().iter().zip(flows.rows()) {
                let record =
                    std::iter::once(l.name.clone()).chain(row.iter().map(|v| format!("{v:?}")));
                w.write_record(record).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
        TableFormat::Json => {
            let doc = FlowDocument {
                sectors: flows.names(),
                flows: flows.to_rows(),
                labour: labour.map(|l| l.values().to_vec()),
                units: flows.units.clone(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("flow document serializes");
            s.push('\n');
            s
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Table,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Table => "table",
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// Layout of the human table.
pub const TABLE_HEADER: &str = "label                n    [bits]      [%]";

/// One line of the human table: bits to three decimals, percentage to two.
pub fn format_table_row(label: &str, n: usize, bits: f64, percent: Option<f64>) -> String {
    let percent = percent.map_or_else(|| "-".to_string(), |p| format!("{p:.2}"));
    format!("{label:<16} {n:>5} {bits:>9.3} {percent:>8}")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    /// Include the per-sector conditional entropies in the human table.
    pub rows: bool,
}

pub fn write_report(report: &EntropyReport, format: ReportFormat) -> String {
    write_reports(
        std::slice::from_ref(report),
        format,
        WriteOptions::default(),
    )
}

pub fn write_reports(
    reports: &[EntropyReport],
    format: ReportFormat,
    options: WriteOptions,
) -> String {
    match format {
        ReportFormat::Table => {
            let mut out = String::new();
            for r in reports {
                if let Some(m) = &r.manifest {
                    let _ = writeln!(out, "# manifest: {}", m.to_json_line());
                }
            }
            out.push_str(TABLE_HEADER);
            out.push('\n');
            for r in reports {
                out.push_str(&format_table_row(&r.label, r.n, r.h_rate_bits, r.h_percent));
                out.push('\n');
            }
            for r in reports {
                if let Some(h0) = r.h_initial_bits {
                    let _ = writeln!(out, "H(s0) [bits]      {h0:.3}");
                }
                if let Some(h1) = r.h_cond_avg_bits {
                    let _ = writeln!(out, "H(s1|s0) [bits]   {h1:.3}");
                }
                if options.rows {
                    out.push_str("sector               H(s1|s0=i) [bits]\n");
                    for row in &r.h_cond_rows {
                        let _ = writeln!(out, "{:<20} {:>17.3}", row.sector, row.bits);
                    }
                }
            }
            out
        }
        ReportFormat::Csv => {
            let mut out = String::new();
            for r in reports {
                if let Some(m) = &r.manifest {
                    let _ = writeln!(out, "# manifest: {}", m.to_json_line());
                }
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "label",
                "n",
                "h_rate_bits",
                "h_percent",
                "h_initial_bits",
                "h_cond_avg_bits",
                "solver",
                "residual",
            ])
            .expect("in-memory write");
            let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:?}"));
            for r in reports {
                w.write_record([
                    r.label.clone(),
                    r.n.to_string(),
                    format!("{:?}", r.h_rate_bits),
                    opt(r.h_percent),
                    opt(r.h_initial_bits),
                    opt(r.h_cond_avg_bits),
                    r.solver.method.clone(),
                    format!("{:?}", r.solver.residual),
                ])
                .expect("in-memory write");
            }
            out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
            out
        }
        ReportFormat::Json => {
            let mut s = if reports.len() == 1 {
                serde_json::to_string_pretty(&reports[0])
            } else {
                serde_json::to_string_pretty(reports)
            }
            .expect("report serializes");
            s.push('\n');
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> Result<FlowMatrix> {
        parse_flow_table(text.as_bytes(), TableFormat::Csv)
    }

    fn labels(names: &[&str]) -> Vec<SectorLabel> {
        names
            .iter()
            .enumerate()
            .map(|(id, n)| SectorLabel {
                id,
                name: n.to_string(),
            })
            .collect()
    }

    #[test]
    fn parses_three_sector_csv() {
        let f = csv(";A;B;C\nA;0;2;2\nB;1;0;1\nC;3;1;0\n").unwrap();
        assert_eq!(f.n(), 3);
        assert_eq!(f.names(), vec!["A", "B", "C"]);
        assert_eq!(
            f.to_rows(),
            vec![
                vec![0.0, 2.0, 2.0],
                vec![1.0, 0.0, 1.0],
                vec![3.0, 1.0, 0.0]
            ]
        );
    }

    #[test]
    fn parses_single_sector_csv() {
        let f = csv(";X\nX;5\n").unwrap();
        assert_eq!(f.n(), 1);
        assert_eq!(f.to_rows(), vec![vec![5.0]]);
    }

    #[test]
    fn comma_dialect_is_detected() {
        let f = csv(",A,B\nA,1.5,2\nB,0,3e2\n").unwrap();
        assert_eq!(f.to_rows(), vec![vec![1.5, 2.0], vec![0.0, 300.0]]);
    }

    #[test]
    fn columns_follow_row_order() {
        let f = csv(";B;A\nA;1;2\nB;3;4\n").unwrap();
        assert_eq!(f.names(), vec!["A", "B"]);
        // cell (A, A) is the second header column of row A
        assert_eq!(f.to_rows(), vec![vec![2.0, 1.0], vec![4.0, 3.0]]);
    }

    #[test]
    fn negative_flow_names_the_cell() {
        let err = csv(";A;B;C\nA;0;-2;2\nB;1;0;1\nC;3;1;0\n").unwrap_err();
        match err {
            TableError::NegativeFlow { row, column, value } => {
                assert_eq!((row.as_str(), column.as_str(), value), ("A", "B", -2.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_cells() {
        for bad in ["NaN", "inf", "-inf"] {
            let text = format!(";A;B\nA;0;{bad}\nB;1;0\n");
            assert!(
                matches!(csv(&text), Err(TableError::NonFiniteValue { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn rejects_shape_and_label_problems() {
        assert!(matches!(
            csv(";A;B\nA;0;1\n"),
            Err(TableError::NonSquare { .. })
        ));
        assert!(matches!(
            csv(";A;B\nA;0;1;2\nB;1;0\n"),
            Err(TableError::NonSquare { .. })
        ));
        assert!(matches!(
            csv(";A;A\nA;0;1\nA;1;0\n"),
            Err(TableError::DuplicateLabel(_))
        ));
        assert!(matches!(
            csv(";A;B\nA;0;1\nC;1;0\n"),
            Err(TableError::LabelMismatch(_))
        ));
        assert!(matches!(
            csv(";A;B\nA;0;x\nB;1;0\n"),
            Err(TableError::MalformedInput { .. })
        ));
        assert!(matches!(csv(""), Err(TableError::MalformedInput { .. })));
    }

    #[test]
    fn json_with_labour_and_units() {
        let text = r#"{"sectors":["A","B"],"flows":[[0,1],[2,0]],"labour":[3,1],"units":"MUSD"}"#;
        let t = parse_flow_document(text.as_bytes(), TableFormat::Json).unwrap();
        assert_eq!(t.flows.units(), Some("MUSD"));
        assert_eq!(t.labour.unwrap().values(), &[3.0, 1.0]);

        let bad = r#"{"sectors":["A","B"],"flows":[[0,1],[2,0]],"labour":[3]}"#;
        assert!(matches!(
            parse_flow_document(bad.as_bytes(), TableFormat::Json),
            Err(TableError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn labour_vector_examples() {
        let abc = labels(&["A", "B", "C"]);
        let l = parse_labour_vector(r#"{"A":90,"B":5,"C":5}"#.as_bytes(), &abc).unwrap();
        assert_eq!(l.values(), &[90.0, 5.0, 5.0]);

        let l = parse_labour_vector("C;5\nA;90\nB;5\n".as_bytes(), &abc).unwrap();
        assert_eq!(l.values(), &[90.0, 5.0, 5.0]);

        let err = parse_labour_vector(r#"{"A":1,"B":1}"#.as_bytes(), &abc).unwrap_err();
        assert!(matches!(err, TableError::MissingSector(ref s) if s == "C"));

        let err = parse_labour_vector(r#"{"A":0,"B":0,"C":0}"#.as_bytes(), &abc).unwrap_err();
        assert!(matches!(err, TableError::AllZero));

        let err = parse_labour_vector(r#"{"A":1,"B":1,"C":1,"D":1}"#.as_bytes(), &abc).unwrap_err();
        assert!(matches!(err, TableError::UnknownSector(ref s) if s == "D"));

        let err = parse_labour_vector(r#"{"A":1,"B":-1,"C":1}"#.as_bytes(), &abc).unwrap_err();
        assert!(matches!(err, TableError::NegativeValue { .. }));
    }

    #[test]
    fn table_rows_match_published_layout() {
        let log30 = 30f64.log2();
        let row = format_table_row("AUS 1968", 30, 2.540, Some(100.0 * 2.540 / log30));
        let cells: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cells, vec!["AUS", "1968", "30", "2.540", "51.76"]);

        let row = format_table_row("KOR 1975", 346, 1.858, Some(100.0 * 1.858 / 346f64.log2()));
        let cells: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cells, vec!["KOR", "1975", "346", "1.858", "22.03"]);

        let row = format_table_row("max", 4, 2.0, Some(100.0));
        assert!(row.ends_with("4     2.000   100.00"), "{row}");

        let row = format_table_row("one", 1, 0.0, None);
        assert!(row.trim_end().ends_with('-'));
    }

    #[test]
    fn prune_and_diagonal_helpers() {
        let f = FlowMatrix::from_rows(vec![vec![5.0, 0.001], vec![2.0, 1.0]]).unwrap();
        assert_eq!(
            f.without_diagonal().to_rows(),
            vec![vec![0.0, 0.001], vec![2.0, 0.0]]
        );
        assert_eq!(
            f.pruned_below(0.01).to_rows(),
            vec![vec![5.0, 0.0], vec![2.0, 1.0]]
        );
        let sub = f.submatrix(&[1]);
        assert_eq!(sub.names(), vec!["S2"]);
        assert_eq!(sub.labels()[0].id, 0);
        assert_eq!(sub.to_rows(), vec![vec![1.0]]);
    }
}
