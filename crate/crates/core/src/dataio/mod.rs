//! Table ingestion with one-hot encoding, train/test splitting and model
//! persistence.

mod persist;

pub use persist::{load_model, model_from_str, model_to_string, save_model, FORMAT_VERSION};

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{BopnnError, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// One source (pre-encoding) feature column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Categories in first-appearance order; empty for numeric columns.
    #[serde(default)]
    pub categories: Vec<String>,
}

impl ColumnSchema {
    /// Number of encoded columns this source column expands to.
    pub fn width(&self) -> usize {
        match self.kind {
            ColumnKind::Numeric => 1,
            ColumnKind::Categorical => self.categories.len(),
        }
    }
}

/// Per-column z-score statistics taken from a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub means: Array1<f64>,
    /// Sample standard deviations; zero-variance columns are stored as 1.
    pub sds: Array1<f64>,
}

impl ZScore {
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows() as f64;
        let means = x
            .mean_axis(Axis(0))
            .unwrap_or_else(|| Array1::zeros(x.ncols()));
        let sds = if x.nrows() < 2 {
            Array1::ones(x.ncols())
        } else {
            let centred = x - &means;
            centred
                .map_axis(Axis(0), |c| (c.dot(&c) / (n - 1.0)).sqrt())
                .mapv(|s| if s > 0.0 { s } else { 1.0 })
        };
        ZScore { means, sds }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.means) / &self.sds
    }
}

/// Everything needed to turn raw rows into model inputs and labels back
/// into class names.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub schema: Vec<ColumnSchema>,
    pub class_names: Vec<String>,
    pub target: String,
    pub scaling: Option<ZScore>,
}

impl Encoding {
    /// Encoded dimension.
    pub fn width(&self) -> usize {
        self.schema.iter().map(ColumnSchema::width).sum()
    }

    /// Names of the encoded columns; one-hot columns read `name=category`.
    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for col in &self.schema {
            match col.kind {
                ColumnKind::Numeric => out.push(col.name.clone()),
                ColumnKind::Categorical => {
                    out.extend(col.categories.iter().map(|c| format!("{}={}", col.name, c)))
                }
            }
        }
        out
    }

    /// Maps an encoded (unscaled) row back to source values: numeric columns
    /// print their value, categorical columns the category whose indicator is set.
    pub fn decode_row(&self, row: &[f64]) -> Result<Vec<String>> {
        if row.len() != self.width() {
            return Err(BopnnError::DimensionMismatch {
                expected: self.width(),
                actual: row.len(),
            });
        }
        let mut pos = 0;
        let mut out = Vec::with_capacity(self.schema.len());
        for col in &self.schema {
            match col.kind {
                ColumnKind::Numeric => out.push(row[pos].to_string()),
                ColumnKind::Categorical => {
                    let group = &row[pos..pos + col.width()];
                    let hit = group.iter().position(|&v| v == 1.0).ok_or_else(|| {
                        BopnnError::SchemaMismatch(format!("no indicator set for {}", col.name))
                    })?;
                    out.push(col.categories[hit].clone());
                }
            }
            pos += col.width();
        }
        Ok(out)
    }

    fn encode_value(
        &self,
        col: &ColumnSchema,
        raw: &str,
        row: usize,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        match col.kind {
            ColumnKind::Numeric => {
                let v = parse_number(raw).ok_or_else(|| BopnnError::ParseError {
                    row,
                    column: col.name.clone(),
                    message: format!("expected a number, found {raw:?}"),
                })?;
                out.push(v);
            }
            ColumnKind::Categorical => {
                let hit = col
                    .categories
                    .iter()
                    .position(|c| c == raw)
                    .ok_or_else(|| {
                        BopnnError::SchemaMismatch(format!(
                            "unknown category {raw:?} in column {}",
                            col.name
                        ))
                    })?;
                out.extend((0..col.categories.len()).map(|i| if i == hit { 1.0 } else { 0.0 }));
            }
        }
        Ok(())
    }
}

/// Encoded feature matrix with labels in `0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub encoding: Encoding,
}

impl LabeledDataset {
    pub fn new(x: Array2<f64>, y: Vec<usize>, encoding: Encoding) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(BopnnError::DimensionMismatch {
                expected: x.nrows(),
                actual: y.len(),
            });
        }
        if x.ncols() != encoding.width() {
            return Err(BopnnError::DimensionMismatch {
                expected: encoding.width(),
                actual: x.ncols(),
            });
        }
        let k = encoding.class_names.len();
        if let Some(&bad) = y.iter().find(|&&c| c >= k) {
            return Err(BopnnError::IndexOutOfRange { index: bad, dim: k });
        }
        Ok(LabeledDataset { x, y, encoding })
    }

    /// Dataset with anonymous numeric columns `x1..xd` and classes `1..K`.
    pub fn from_arrays(x: Array2<f64>, y: Vec<usize>) -> Result<Self> {
        let k = y.iter().copied().max().map_or(0, |m| m + 1);
        let encoding = Encoding {
            schema: (0..x.ncols())
                .map(|j| ColumnSchema {
                    name: format!("x{}", j + 1),
                    kind: ColumnKind::Numeric,
                    categories: Vec::new(),
                })
                .collect(),
            class_names: (1..=k).map(|c| c.to_string()).collect(),
            target: "class".into(),
            scaling: None,
        };
        Self::new(x, y, encoding)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.encoding.class_names.len()
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.encoding.schema
    }

    pub fn class_names(&self) -> &[String] {
        &self.encoding.class_names
    }

    /// Rows in the given order, sharing this dataset's encoding.
    pub fn select(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            x: self.x.select(Axis(0), rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            encoding: self.encoding.clone(),
        }
    }

    /// Z-scores this dataset with its own statistics and records them.
    pub fn standardized(&self) -> LabeledDataset {
        let z = ZScore::fit(&self.x);
        let mut out = self.clone();
        out.x = z.apply(&self.x);
        out.encoding.scaling = Some(z);
        out
    }

    /// Applies another dataset's recorded scaling to this one.
    pub fn scaled_like(&self, reference: &Encoding) -> LabeledDataset {
        let mut out = self.clone();
        if let Some(z) = &reference.scaling {
            out.x = z.apply(&self.x);
        }
        out.encoding.scaling = reference.scaling.clone();
        out
    }
}

fn parse_number(raw: &str) -> Option<f64> {
    raw.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn reader_for(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let delim = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("tsv") => b'\t',
        _ => b',',
    };
    csv::ReaderBuilder::new()
        .delimiter(delim)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(e, 0))
}

fn csv_error(e: csv::Error, fallback_row: usize) -> BopnnError {
    if let csv::ErrorKind::Io(io) = e.kind() {
        return BopnnError::Io(io.to_string());
    }
    let row = e
        .position()
        .map(|p| p.record() as usize)
        .unwrap_or(fallback_row);
    BopnnError::ParseError {
        row,
        column: String::new(),
        message: e.to_string(),
    }
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_raw(path: &Path) -> Result<RawTable> {
    let mut rdr = reader_for(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(e, 0))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(e, i + 1))?;
        let row: Vec<String> = rec.iter().map(str::to_owned).collect();
        for (j, v) in row.iter().enumerate() {
            if v.is_empty() {
                return Err(BopnnError::MissingValue {
                    row: i + 1,
                    column: header[j].clone(),
                });
            }
        }
        rows.push(row);
    }
    Ok(RawTable { header, rows })
}

fn first_appearance(values: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for v in values {
        if !seen.contains_key(&v) {
            seen.insert(v.clone(), out.len());
            out.push(v);
        }
    }
    out
}

/// Reads a CSV (or `.tsv`) table with a header row.
///
/// The target column is `target` when given, otherwise the last column, and
/// is label-encoded in first-appearance order. Feature columns in
/// `declared_categoricals`, or holding any non-numeric value, are one-hot
/// encoded with one indicator per category; the rest pass through.
pub fn load_table(
    path: impl AsRef<Path>,
    target: Option<&str>,
    declared_categoricals: &[String],
) -> Result<LabeledDataset> {
    let raw = read_raw(path.as_ref())?;
    if raw.rows.len() < 2 {
        return Err(BopnnError::DegenerateInput(format!(
            "table needs at least 2 data rows, found {}",
            raw.rows.len()
        )));
    }
    let target_idx = match target {
        Some(name) => raw
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BopnnError::UnknownTarget(name.to_owned()))?,
        None => raw
            .header
            .len()
            .checked_sub(1)
            .ok_or_else(|| BopnnError::UnknownTarget("<last>".into()))?,
    };
    for name in declared_categoricals {
        if !raw.header.contains(name) {
            return Err(BopnnError::SchemaMismatch(format!(
                "declared categorical column {name:?} not in header"
            )));
        }
    }

    let mut schema = Vec::new();
    for (j, name) in raw.header.iter().enumerate() {
        if j == target_idx {
            continue;
        }
        let declared = declared_categoricals.contains(name);
        let numeric = !declared && raw.rows.iter().all(|r| parse_number(&r[j]).is_some());
        schema.push(if numeric {
            ColumnSchema {
                name: name.clone(),
                kind: ColumnKind::Numeric,
                categories: Vec::new(),
            }
        } else {
            ColumnSchema {
                name: name.clone(),
                kind: ColumnKind::Categorical,
                categories: first_appearance(raw.rows.iter().map(|r| r[j].clone())),
            }
        });
    }
    let class_names = first_appearance(raw.rows.iter().map(|r| r[target_idx].clone()));
    let encoding = Encoding {
        schema,
        class_names,
        target: raw.header[target_idx].clone(),
        scaling: None,
    };
    let (x, y) = encode_rows(&raw, &encoding)?;
    let y = y.expect("target column present");
    LabeledDataset::new(x, y, encoding)
}

/// Rows of a table encoded against an existing encoding (e.g. a saved
/// model's). Columns are matched by header name; the target column is
/// optional. Scaling is not applied.
pub fn load_table_with_encoding(
    path: impl AsRef<Path>,
    encoding: &Encoding,
) -> Result<(Array2<f64>, Option<Vec<usize>>)> {
    let raw = read_raw(path.as_ref())?;
    if raw.rows.is_empty() {
        return Err(BopnnError::DegenerateInput("table has no data rows".into()));
    }
    encode_rows(&raw, encoding)
}

fn encode_rows(raw: &RawTable, encoding: &Encoding) -> Result<(Array2<f64>, Option<Vec<usize>>)> {
    let position = |name: &str| raw.header.iter().position(|h| h == name);
    let cols: Vec<usize> = encoding
        .schema
        .iter()
        .map(|c| {
            position(&c.name)
                .ok_or_else(|| BopnnError::SchemaMismatch(format!("missing column {:?}", c.name)))
        })
        .collect::<Result<_>>()?;
    let target_col = position(&encoding.target);

    let d = encoding.width();
    let mut data = Vec::with_capacity(raw.rows.len() * d);
    let mut labels = target_col.map(|_| Vec::with_capacity(raw.rows.len()));
    for (i, row) in raw.rows.iter().enumerate() {
        for (col, &j) in encoding.schema.iter().zip(&cols) {
            encoding.encode_value(col, &row[j], i + 1, &mut data)?;
        }
        if let (Some(t), Some(labels)) = (target_col, labels.as_mut()) {
            let c = encoding
                .class_names
                .iter()
                .position(|n| *n == row[t])
                .ok_or_else(|| {
                    BopnnError::SchemaMismatch(format!("unknown class label {:?}", row[t]))
                })?;
            labels.push(c);
        }
    }
    let x = Array2::from_shape_vec((raw.rows.len(), d), data)
        .map_err(|e| BopnnError::DegenerateInput(e.to_string()))?;
    Ok((x, labels))
}

/// Number of train/test repetitions for a dataset of `n` points.
pub fn repetitions_for(n: usize) -> usize {
    match n {
        0..=499 => 50,
        500..=999 => 20,
        1000..=4999 => 10,
        _ => 5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPlan {
    pub train_fraction: f64,
    pub repetitions: usize,
    pub train_cap: usize,
    pub test_cap: usize,
}

impl SplitPlan {
    pub fn for_n(n: usize) -> Self {
        SplitPlan {
            train_fraction: 0.7,
            repetitions: repetitions_for(n),
            train_cap: 7000,
            test_cap: 3000,
        }
    }
}

/// Stream offset so split shuffles never coincide with bag streams.
const SPLIT_STREAM: u64 = 0x5350_4C49_5400_0000;

/// Row indices of repetition `rep`: shuffle keyed by `(seed, rep)`, cut at
/// `floor(train_fraction * n)`, then cap each side.
pub fn split_indices(
    n: usize,
    plan: &SplitPlan,
    rep: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut perm: Vec<usize> = (0..n).collect();
    SplitMix64::stream(seed, SPLIT_STREAM + rep as u64).shuffle(&mut perm);
    let n_train = ((n as f64 * plan.train_fraction) + 1e-9).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(BopnnError::TooSmall { n });
    }
    let mut test = perm.split_off(n_train);
    perm.truncate(plan.train_cap);
    test.truncate(plan.test_cap);
    Ok((perm, test))
}

pub fn split(
    ds: &LabeledDataset,
    plan: &SplitPlan,
    rep: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(ds.n(), plan, rep, seed)?;
    Ok((ds.select(&train), ds.select(&test)))
}
