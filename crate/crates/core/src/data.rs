//! Dataset ingestion: CSV loading against an explicit column schema, one-hot
//! encoding, standardization, seeded shuffling and synthetic inputs.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

impl FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "numeric" => Ok(ColumnKind::Numeric),
            "categorical" => Ok(ColumnKind::Categorical),
            other => Err(Error::input(format!(
                "unknown column kind `{other}` (expected `numeric` or `categorical`)"
            ))),
        }
    }
}

/// One column kind per CSV column, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema(pub Vec<ColumnKind>);

impl Schema {
    /// Parses one `numeric` / `categorical` token per non-empty line.
    /// Lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let kinds = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, l)| {
                l.parse::<ColumnKind>()
                    .map_err(|e| Error::input(format!("schema line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if kinds.is_empty() {
            return Err(Error::input("schema declares no columns"));
        }
        Ok(Schema(kinds))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    /// Levels in first-appearance order; `codes[row]` indexes into `levels`.
    Categorical { levels: Vec<String>, codes: Vec<usize> },
}

impl RawColumn {
    fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical { codes, .. } => codes.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<RawColumn>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, RawColumn::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Strip quote characters and collapse runs of whitespace in every field.
    pub preclean: bool,
}

fn clean_field(field: &str) -> String {
    field
        .chars()
        .filter(|c| *c != '\'' && *c != '"')
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses CSV text according to `schema`.
pub fn parse_csv(text: &str, schema: &Schema, opts: CsvOptions) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut columns: Vec<RawColumn> = schema
        .0
        .iter()
        .map(|k| match k {
            ColumnKind::Numeric => RawColumn::Numeric(Vec::new()),
            ColumnKind::Categorical => RawColumn::Categorical {
                levels: Vec::new(),
                codes: Vec::new(),
            },
        })
        .collect();
    let first_line = if opts.has_header { 2 } else { 1 };
    for (idx, record) in reader.records().enumerate() {
        let line = first_line + idx;
        let record =
            record.map_err(|e| Error::input(format!("line {line}: malformed CSV: {e}")))?;
        if record.len() != schema.len() {
            return Err(Error::input(format!(
                "line {line}: expected {} columns, found {}",
                schema.len(),
                record.len()
            )));
        }
        for (col, (field, column)) in record.iter().zip(columns.iter_mut()).enumerate() {
            let field = if opts.preclean {
                clean_field(field)
            } else {
                field.trim().to_owned()
            };
            match column {
                RawColumn::Numeric(values) => {
                    let v: f64 = field.parse().map_err(|_| {
                        Error::input(format!(
                            "line {line}, column {}: cannot parse `{field}` as a number",
                            col + 1
                        ))
                    })?;
                    values.push(v);
                }
                RawColumn::Categorical { levels, codes } => {
                    let code = match levels.iter().position(|l| *l == field) {
                        Some(c) => c,
                        None => {
                            levels.push(field);
                            levels.len() - 1
                        }
                    };
                    codes.push(code);
                }
            }
        }
    }
    Ok(RawTable { columns })
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, opts: CsvOptions) -> Result<RawTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_csv(&text, schema, opts).map_err(|e| match e {
        Error::Input(msg) => Error::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnOrigin {
    /// Index of the numeric column in the raw table.
    Numeric(usize),
    /// Indicator for `level` of the categorical raw column `group`.
    OneHot { group: usize, level: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub column_meta: Vec<ColumnOrigin>,
    pub standardized: bool,
}

impl Dataset {
    /// Wraps plain numeric rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::input("rows have differing dimensions"));
        }
        Ok(Dataset {
            column_meta: (0..dim).map(ColumnOrigin::Numeric).collect(),
            rows,
            standardized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.column_meta.len()
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[c])
    }
}

/// Replaces each categorical column with one indicator column per level.
pub fn one_hot(table: &RawTable) -> Dataset {
    let n = table.n_rows();
    let mut column_meta = Vec::new();
    for (c, col) in table.columns.iter().enumerate() {
        match col {
            RawColumn::Numeric(_) => column_meta.push(ColumnOrigin::Numeric(c)),
            RawColumn::Categorical { levels, .. } => column_meta
                .extend((0..levels.len()).map(|level| ColumnOrigin::OneHot { group: c, level })),
        }
    }
    let rows = (0..n)
        .map(|row| {
            let mut out = Vec::with_capacity(column_meta.len());
            for col in &table.columns {
                match col {
                    RawColumn::Numeric(values) => out.push(values[row]),
                    RawColumn::Categorical { levels, codes } => {
                        out.extend((0..levels.len()).map(|l| f64::from(u8::from(codes[row] == l))))
                    }
                }
            }
            out
        })
        .collect();
    Dataset {
        rows,
        column_meta,
        standardized: false,
    }
}

/// Centers every column and divides by its population standard deviation.
/// Constant columns are centered and left unscaled.
pub fn standardize(mut ds: Dataset) -> Dataset {
    let n = ds.len();
    if n == 0 {
        ds.standardized = true;
        return ds;
    }
    for c in 0..ds.dim() {
        let mean = ds.column(c).sum::<f64>() / n as f64;
        let var = ds.column(c).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        for row in &mut ds.rows {
            row[c] = (row[c] - mean) / scale;
        }
    }
    ds.standardized = true;
    ds
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fisher-Yates shuffle of the rows driven by a seeded generator.
pub fn permute(mut ds: Dataset, seed: u64) -> Dataset {
    ds.rows.shuffle(&mut rng_from_seed(seed));
    ds
}

/// `n` i.i.d. standard normal vectors of dimension `dim`.
pub fn synth_gaussian(n: usize, dim: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || dim == 0 {
        return Err(Error::input("synthetic data needs n >= 1 and dim >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let rows = (0..n)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    Dataset::from_rows(rows)
}
