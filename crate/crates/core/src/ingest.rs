//! Reading raw CSV data into a [`BinaryDataset`] by a per-variable
//! dichotomization config (1 = the risky side), and writing datasets back out
//! in a canonical all-binary form.
//!
//! Config format (JSON):
//!
//! ```json
//! {
//!   "response": { "column": "progressed", "rule": { "type": "binary" } },
//!   "variables": [
//!     { "column": "pky",  "rule": { "type": "threshold", "value": 30, "direction": ">" } },
//!     { "column": "vtm",  "rule": { "type": "categories", "risky": ["none"] } },
//!     { "column": "snp1", "rule": { "type": "dummies", "levels": ["1", "2"] } }
//!   ]
//! }
//! ```
//!
//! Thresholds are strict. `dummies` expands one column into one indicator per
//! level, named `<name>_<level>` and screened as a group.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LpsError, Result};
use crate::patterns::BinaryDataset;

/// Cell values treated as missing.
pub const MISSING_TOKENS: [&str; 4] = ["", "NA", ".", "NaN"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = ">")]
    Above,
    #[serde(rename = "<")]
    Below,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Rule {
    /// Cell must already be 0 or 1.
    #[default]
    Binary,
    /// 1 when the value is strictly above (or below) `value`.
    Threshold { value: f64, direction: Direction },
    /// 1 when the cell equals one of the listed categories.
    Categories { risky: Vec<String> },
    /// One indicator per listed level; other values give all zeros.
    Dummies { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub column: String,
    /// Name in the dataset; defaults to the column name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub rule: Rule,
    /// Free-text description of the coding; generated from the rule if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Variables with the same group label are screened together.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSpec {
    pub column: String,
    #[serde(default)]
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutpointConfig {
    pub response: ResponseSpec,
    pub variables: Vec<VariableSpec>,
}

impl CutpointConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::io::read_to_string(open_named(path)?)?)
    }

    fn validate(&self) -> Result<()> {
        if self.variables.is_empty() {
            return Err(LpsError::Ingest("config lists no variables".into()));
        }
        if matches!(self.response.rule, Rule::Dummies { .. }) {
            return Err(LpsError::Ingest("the response cannot use a dummies rule".into()));
        }
        for v in &self.variables {
            match &v.rule {
                Rule::Threshold { value, .. } if !value.is_finite() => {
                    return Err(LpsError::Ingest(format!("threshold for `{}` is not finite", v.column)));
                }
                Rule::Categories { risky } if risky.is_empty() => {
                    return Err(LpsError::Ingest(format!("no risky categories for `{}`", v.column)));
                }
                Rule::Dummies { levels } if levels.is_empty() => {
                    return Err(LpsError::Ingest(format!("no dummy levels for `{}`", v.column)));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Dataset plus the number of rows dropped for missing values.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: BinaryDataset,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell)
}

fn parse_number(cell: &str, column: &str, row: usize) -> Result<f64> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| !v.is_nan())
        .ok_or_else(|| LpsError::Ingest(format!("row {row}, column `{column}`: cannot parse `{cell}` as a number")))
}

fn code_binary(cell: &str, column: &str, row: usize) -> Result<u8> {
    match parse_number(cell, column, row)? {
        0.0 => Ok(0),
        1.0 => Ok(1),
        _ => Err(LpsError::Ingest(format!("row {row}, column `{column}`: expected 0 or 1, got `{cell}`"))),
    }
}

/// Codes one cell; `Dummies` yields one value per level.
fn code_cell(rule: &Rule, cell: &str, column: &str, row: usize, out: &mut Vec<u8>) -> Result<()> {
    match rule {
        Rule::Binary => out.push(code_binary(cell, column, row)?),
        Rule::Threshold { value, direction } => {
            let v = parse_number(cell, column, row)?;
            out.push(match direction {
                Direction::Above => (v > *value) as u8,
                Direction::Below => (v < *value) as u8,
            });
        }
        Rule::Categories { risky } => out.push(risky.iter().any(|r| r == cell) as u8),
        Rule::Dummies { levels } => out.extend(levels.iter().map(|l| (l == cell) as u8)),
    }
    Ok(())
}

fn default_note(rule: &Rule) -> String {
    match rule {
        Rule::Binary => "1 = 1".into(),
        Rule::Threshold { value, direction: Direction::Above } => format!("1 = value > {value}"),
        Rule::Threshold { value, direction: Direction::Below } => format!("1 = value < {value}"),
        Rule::Categories { risky } => format!("1 = one of {}", risky.join("|")),
        Rule::Dummies { .. } => String::new(),
    }
}

/// Reads CSV (header row required) and codes it by `config`.
pub fn ingest_reader<R: Read>(input: R, config: &CutpointConfig) -> Result<Ingested> {
    config.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let header: HashMap<String, usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let locate = |c: &str| {
        header.get(c).copied().ok_or_else(|| LpsError::Ingest(format!("column `{c}` not found in CSV header")))
    };
    let y_col = locate(&config.response.column)?;
    let var_cols: Vec<usize> = config.variables.iter().map(|v| locate(&v.column)).collect::<Result<_>>()?;

    // names, notes and groups of the coded attributes
    let mut names = Vec::new();
    let mut notes = Vec::new();
    let mut groups = Vec::new();
    let mut group_ids: HashMap<String, usize> = HashMap::new();
    for (k, v) in config.variables.iter().enumerate() {
        let base = v.name.clone().unwrap_or_else(|| v.column.clone());
        let label = v.group.clone().unwrap_or_else(|| format!("\u{0}{k}"));
        let next = group_ids.len();
        let g = *group_ids.entry(label).or_insert(next);
        match &v.rule {
            Rule::Dummies { levels } => {
                for l in levels {
                    names.push(format!("{base}_{l}"));
                    notes.push(v.note.clone().unwrap_or_else(|| format!("1 = level {l}")));
                    groups.push(g);
                }
            }
            rule => {
                names.push(base);
                notes.push(v.note.clone().unwrap_or_else(|| default_note(rule)));
                groups.push(g);
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
        return Err(LpsError::Ingest(format!("duplicate variable name `{dup}`")));
    }

    let p = names.len();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    let mut row_buf = Vec::with_capacity(p);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2; // 1-based, after the header
        rows_read += 1;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        if is_missing(cell(y_col)) || var_cols.iter().any(|&c| is_missing(cell(c))) {
            rows_dropped += 1;
            continue;
        }
        row_buf.clear();
        for (v, &c) in config.variables.iter().zip(&var_cols) {
            code_cell(&v.rule, cell(c), &v.column, row, &mut row_buf)?;
        }
        let mut yv = Vec::with_capacity(1);
        code_cell(&config.response.rule, cell(y_col), &config.response.column, row, &mut yv)?;
        x.extend_from_slice(&row_buf);
        y.push(yv[0]);
    }
    if rows_dropped > 0 {
        log::info!("dropped {rows_dropped} of {rows_read} rows with missing values");
    }
    if y.is_empty() {
        return Err(LpsError::Ingest(format!("no rows left after dropping {rows_dropped} with missing values")));
    }
    let data = BinaryDataset::from_flat(y.len(), p, x, y, names)?
        .with_coding_notes(notes)?
        .with_groups(groups)?;
    Ok(Ingested { data, rows_read, rows_dropped })
}

pub fn ingest(csv_path: &Path, config: &CutpointConfig) -> Result<Ingested> {
    ingest_reader(open_named(csv_path)?, config)
}

fn open_named(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

/// Name of the response column in canonical CSV output.
pub const CANONICAL_RESPONSE: &str = "y";

/// Writes the attributes and response as 0/1 columns (response last).
pub fn write_canonical<W: Write>(data: &BinaryDataset, out: W) -> Result<()> {
    if data.var_names().iter().any(|n| n == CANONICAL_RESPONSE) {
        return Err(LpsError::Ingest(format!("a variable is named `{CANONICAL_RESPONSE}`")));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = data.var_names().iter().map(String::as_str).collect();
    header.push(CANONICAL_RESPONSE);
    w.write_record(&header)?;
    let mut rec: Vec<&str> = Vec::with_capacity(data.p() + 1);
    for (row, &yi) in data.rows().zip(data.y()) {
        rec.clear();
        rec.extend(row.iter().map(|&v| if v == 1 { "1" } else { "0" }));
        rec.push(if yi == 1 { "1" } else { "0" });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Pass-through config that reads [`write_canonical`] output back into the
/// same dataset (names, coding notes and groups included).
pub fn canonical_config(data: &BinaryDataset) -> CutpointConfig {
    CutpointConfig {
        response: ResponseSpec { column: CANONICAL_RESPONSE.into(), rule: Rule::Binary },
        variables: data
            .var_names()
            .iter()
            .zip(data.coding_notes())
            .zip(data.groups())
            .map(|((name, note), g)| VariableSpec {
                column: name.clone(),
                name: None,
                rule: Rule::Binary,
                note: Some(note.clone()),
                group: Some(g.to_string()),
            })
            .collect(),
    }
}

/// Reads canonical CSV with every non-response column passed through as binary.
pub fn read_canonical<R: Read>(input: R) -> Result<BinaryDataset> {
    let mut buf = String::new();
    let mut input = input;
    input.read_to_string(&mut buf)?;
    let header = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(buf.as_bytes())
        .headers()?
        .clone();
    let variables = header
        .iter()
        .filter(|h| *h != CANONICAL_RESPONSE)
        .map(|h| VariableSpec { column: h.to_string(), name: None, rule: Rule::Binary, note: None, group: None })
        .collect();
    let cfg = CutpointConfig {
        response: ResponseSpec { column: CANONICAL_RESPONSE.into(), rule: Rule::Binary },
        variables,
    };
    Ok(ingest_reader(buf.as_bytes(), &cfg)?.data)
}
