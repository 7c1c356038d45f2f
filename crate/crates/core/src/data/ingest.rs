//! CSV ingestion: filtering, missing values, label and group binarization,
//! one-hot encoding, seeded splitting and train-fitted standardization.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use super::{Dataset, DatasetId, GroupCounts, Role, Standardizer};
use crate::error::{Error, Result};

/// A set of accepted raw values. Deserializes from a string, a number, or a
/// list of either.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValueSet(pub Vec<String>);

impl ValueSet {
    pub fn one(v: impl Into<String>) -> Self {
        ValueSet(vec![v.into()])
    }

    pub fn contains(&self, raw: &str) -> bool {
        self.0.iter().any(|c| {
            c == raw
                || matches!(
                    (c.parse::<f64>(), raw.parse::<f64>()),
                    (Ok(x), Ok(y)) if x == y
                )
        })
    }
}

impl<'de> Deserialize<'de> for ValueSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        fn scalar(v: &serde_json::Value) -> Option<String> {
            match v {
                serde_json::Value::String(s) => Some(s.clone()),
                serde_json::Value::Number(n) => Some(n.to_string()),
                serde_json::Value::Bool(b) => Some(b.to_string()),
                _ => None,
            }
        }
        let value = serde_json::Value::deserialize(deserializer)?;
        let out = match &value {
            serde_json::Value::Array(items) => items.iter().map(scalar).collect::<Option<Vec<_>>>(),
            other => scalar(other).map(|s| vec![s]),
        };
        out.map(ValueSet)
            .ok_or_else(|| D::Error::custom("expected a string, a number, or a list of them"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvFormat {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_true")]
    pub has_header: bool,
    /// Column names for headerless files; overrides the header otherwise.
    #[serde(default)]
    pub column_names: Option<Vec<String>>,
    /// Lines dropped before parsing.
    #[serde(default)]
    pub skip_lines: usize,
    /// Lines starting with this character are ignored.
    #[serde(default)]
    pub comment: Option<char>,
}

impl Default for CsvFormat {
    fn default() -> Self {
        CsvFormat {
            delimiter: ',',
            has_header: true,
            column_names: None,
            skip_lines: 0,
            comment: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// Keeps a row only when `row[column] <op> value` holds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: String,
    pub op: FilterOp,
    pub value: ValueSet,
}

impl RowFilter {
    fn keeps(&self, raw: &str) -> bool {
        let numeric = |f: fn(f64, f64) -> bool| {
            let target = self.value.0.first().and_then(|t| t.parse::<f64>().ok());
            match (raw.parse::<f64>(), target) {
                (Ok(x), Some(t)) => f(x, t),
                _ => false,
            }
        };
        match self.op {
            FilterOp::Eq => self.value.contains(raw),
            FilterOp::Ne => !self.value.contains(raw),
            FilterOp::Lt => numeric(|x, t| x < t),
            FilterOp::Le => numeric(|x, t| x <= t),
            FilterOp::Gt => numeric(|x, t| x > t),
            FilterOp::Ge => numeric(|x, t| x >= t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop every row with a missing value in a used column.
    #[default]
    DropRows,
    /// Drop feature columns that contain a missing value anywhere.
    DropColumns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSpec {
    /// Seeded shuffle into train/val/test.
    Fractions { train: f64, val: f64, test: f64 },
    /// The test split comes from a separate file; the main file is shuffled
    /// into train/val.
    Predefined { test_file: PathBuf, val_fraction: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub label_column: String,
    /// Raw values mapped to `y = 1`.
    #[serde(default)]
    pub positive_label: Option<ValueSet>,
    /// Numeric labels: `y = 1` iff value > threshold (or <= when
    /// `label_positive_below` is set).
    #[serde(default)]
    pub label_threshold: Option<f64>,
    #[serde(default)]
    pub label_positive_below: bool,
    pub sensitive_column: String,
    /// Numeric attributes: `a = 1` iff value > threshold.
    #[serde(default)]
    pub sensitive_threshold: Option<f64>,
    /// Categorical attributes: raw values mapped to `a = 1`.
    #[serde(default)]
    pub sensitive_value: Option<ValueSet>,
    #[serde(default)]
    pub include_sensitive: bool,
    /// Feature columns; defaults to every column except label, sensitive
    /// attribute and `exclude`.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    #[serde(default)]
    pub exclude: Vec<String>,
    /// Columns one-hot encoded even if their values parse as numbers.
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub filters: Vec<RowFilter>,
    #[serde(default)]
    pub missing: MissingPolicy,
    #[serde(default = "default_na_values")]
    pub na_values: Vec<String>,
    #[serde(default)]
    pub format: CsvFormat,
    #[serde(default = "default_split")]
    pub split: SplitSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub suggested_l2: Option<f64>,
}

fn default_delimiter() -> char {
    ','
}
fn default_true() -> bool {
    true
}
fn default_na_values() -> Vec<String> {
    vec!["".into(), "?".into(), "NA".into(), "N/A".into()]
}
fn default_split() -> SplitSpec {
    SplitSpec::Fractions {
        train: 0.6,
        val: 0.2,
        test: 0.2,
    }
}
pub(crate) fn default_seed() -> u64 {
    42
}

impl IngestConfig {
    /// Minimal config: label and sensitive columns, both already 0/1.
    pub fn new(label_column: impl Into<String>, sensitive_column: impl Into<String>) -> Self {
        IngestConfig {
            name: None,
            label_column: label_column.into(),
            positive_label: None,
            label_threshold: None,
            label_positive_below: false,
            sensitive_column: sensitive_column.into(),
            sensitive_threshold: None,
            sensitive_value: None,
            include_sensitive: false,
            features: None,
            exclude: Vec::new(),
            categorical: Vec::new(),
            filters: Vec::new(),
            missing: MissingPolicy::default(),
            na_values: default_na_values(),
            format: CsvFormat::default(),
            split: default_split(),
            seed: default_seed(),
            suggested_l2: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Where raw data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Preset { id: DatasetId, dir: PathBuf },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitGroupCounts {
    pub train: GroupCounts,
    pub val: GroupCounts,
    pub test: GroupCounts,
}

/// Positive-label rate per sensitive group over all retained rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPositiveRates {
    pub a1: Option<f64>,
    pub a0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetadata {
    pub dataset: String,
    pub seed: u64,
    pub sizes: SplitSizes,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub group_positive_rates: GroupPositiveRates,
    pub group_counts: SplitGroupCounts,
    pub rows_total: usize,
    pub rows_dropped: usize,
    pub dropped_columns: Vec<String>,
    pub suggested_l2: Option<f64>,
    pub standardization: Standardizer,
}

#[derive(Debug, Clone)]
pub struct LoadedSplits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub metadata: SplitMetadata,
}

struct RawTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path, format: &CsvFormat) -> Result<RawTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let body: String = text
        .lines()
        .skip(format.skip_lines)
        .map(|l| format!("{l}\n"))
        .collect();
    if !format.delimiter.is_ascii() || !format.comment.map_or(true, |c| c.is_ascii()) {
        return Err(Error::Config(format!(
            "delimiter {:?} and comment {:?} must be ASCII",
            format.delimiter, format.comment
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter as u8)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(format.comment.map(|c| c as u8))
        .from_reader(body.as_bytes());

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let fields: Vec<String> = rec.iter().map(str::to_owned).collect();
        if fields.iter().all(String::is_empty) {
            continue;
        }
        records.push(fields);
    }
    let mut records = records.into_iter();
    let file_header = if format.has_header {
        records.next()
    } else {
        None
    };
    let headers = match (&format.column_names, file_header) {
        (Some(names), _) => names.clone(),
        (None, Some(h)) => h,
        (None, None) => {
            let width = records.clone().next().map_or(0, |r| r.len());
            (0..width).map(|i| format!("c{i}")).collect()
        }
    };
    let mut rows = Vec::new();
    for (i, mut row) in records.enumerate() {
        // Trailing delimiters produce empty fields beyond the schema.
        while row.len() > headers.len() && row.last().is_some_and(String::is_empty) {
            row.pop();
        }
        if row.len() != headers.len() {
            return Err(Error::RaggedRow {
                row: i + 1,
                found: row.len(),
                expected: headers.len(),
            });
        }
        rows.push(row);
    }
    Ok(RawTable { headers, rows })
}

/// Loads, encodes, splits and standardizes a dataset.
///
/// For presets `config` may be `None`, in which case the built-in config
/// is used. Plain files require a config.
pub fn load_dataset(source: &DataSource, config: Option<&IngestConfig>) -> Result<LoadedSplits> {
    let (main_path, base_dir, cfg, name) = match source {
        DataSource::Preset { id, dir } => {
            let cfg = config.cloned().unwrap_or_else(|| id.config());
            (dir.join(id.main_file()), dir.clone(), cfg, id.name().to_string())
        }
        DataSource::File(path) => {
            let cfg = config.cloned().ok_or_else(|| {
                Error::Config("an ingestion config is required for plain CSV files".into())
            })?;
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let name = cfg.name.clone().unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into())
            });
            (path.clone(), dir, cfg, name)
        }
    };
    let main = read_table(&main_path, &cfg.format)?;
    let test = match &cfg.split {
        SplitSpec::Predefined { test_file, .. } => {
            let path = if test_file.is_absolute() {
                test_file.clone()
            } else {
                base_dir.join(test_file)
            };
            Some(read_table(&path, &cfg.format)?)
        }
        SplitSpec::Fractions { .. } => None,
    };
    build_splits(main, test, &cfg, cfg.name.clone().unwrap_or(name))
}

fn column_index(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn binarize(
    raw: &str,
    column: &str,
    values: Option<&ValueSet>,
    threshold: Option<f64>,
    below: bool,
) -> Result<u8> {
    if let Some(t) = threshold {
        let v: f64 = raw.parse().map_err(|_| Error::NonNumeric {
            column: column.to_string(),
            value: raw.to_string(),
        })?;
        return Ok(u8::from((v > t) != below));
    }
    if let Some(set) = values {
        return Ok(u8::from(set.contains(raw)));
    }
    match raw.parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(0),
        Ok(v) if v == 1.0 => Ok(1),
        _ => Err(Error::NonBinary {
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

enum Encoding {
    Numeric,
    OneHot(Vec<String>),
}

fn build_splits(
    main: RawTable,
    test: Option<RawTable>,
    cfg: &IngestConfig,
    name: String,
) -> Result<LoadedSplits> {
    let headers = main.headers;
    if let Some(t) = &test {
        if t.headers != headers {
            return Err(Error::Config("test file columns differ from main file".into()));
        }
    }
    let label_idx = column_index(&headers, &cfg.label_column)?;
    let sens_idx = column_index(&headers, &cfg.sensitive_column)?;
    let filter_idx = cfg
        .filters
        .iter()
        .map(|f| column_index(&headers, &f.column))
        .collect::<Result<Vec<_>>>()?;

    let mut feature_idx: Vec<usize> = match &cfg.features {
        Some(cols) => cols
            .iter()
            .map(|c| column_index(&headers, c))
            .collect::<Result<_>>()?,
        None => {
            for c in &cfg.exclude {
                column_index(&headers, c)?;
            }
            (0..headers.len())
                .filter(|&i| i != label_idx && i != sens_idx)
                .filter(|&i| !cfg.exclude.contains(&headers[i]))
                .collect()
        }
    };
    feature_idx.retain(|&i| i != label_idx && i != sens_idx);
    if cfg.include_sensitive {
        feature_idx.push(sens_idx);
        feature_idx.sort_unstable();
    }

    // Main rows first, then predefined test rows.
    let mut rows: Vec<(bool, Vec<String>)> = main
        .rows
        .into_iter()
        .map(|r| (false, r))
        .chain(test.into_iter().flat_map(|t| t.rows).map(|r| (true, r)))
        .collect();
    let rows_total = rows.len();

    rows.retain(|(_, r)| {
        cfg.filters
            .iter()
            .zip(&filter_idx)
            .all(|(f, &i)| f.keeps(&r[i]))
    });

    let is_na = |v: &str| cfg.na_values.iter().any(|na| na == v);
    let mut dropped_columns = Vec::new();
    if cfg.missing == MissingPolicy::DropColumns {
        feature_idx.retain(|&c| {
            let keep = !rows.iter().any(|(_, r)| is_na(&r[c]));
            if !keep {
                dropped_columns.push(headers[c].clone());
            }
            keep
        });
    }
    rows.retain(|(_, r)| {
        !is_na(&r[label_idx])
            && !is_na(&r[sens_idx])
            && feature_idx.iter().all(|&c| !is_na(&r[c]))
    });
    let rows_dropped = rows_total - rows.len();
    if rows.is_empty() {
        return Err(Error::Config("no rows left after filtering".into()));
    }

    let mut y = Vec::with_capacity(rows.len());
    let mut a = Vec::with_capacity(rows.len());
    for (_, r) in &rows {
        y.push(binarize(
            &r[label_idx],
            &cfg.label_column,
            cfg.positive_label.as_ref(),
            cfg.label_threshold,
            cfg.label_positive_below,
        )?);
        a.push(binarize(
            &r[sens_idx],
            &cfg.sensitive_column,
            cfg.sensitive_value.as_ref(),
            cfg.sensitive_threshold,
            false,
        )?);
    }

    let encodings: Vec<Encoding> = feature_idx
        .iter()
        .map(|&c| {
            let forced = cfg.categorical.contains(&headers[c]);
            let numeric = !forced && rows.iter().all(|(_, r)| r[c].parse::<f64>().is_ok());
            if numeric {
                Encoding::Numeric
            } else {
                let cats: BTreeSet<&str> = rows.iter().map(|(_, r)| r[c].as_str()).collect();
                Encoding::OneHot(cats.into_iter().map(str::to_owned).collect())
            }
        })
        .collect();
    let mut feature_names = Vec::new();
    for (&c, enc) in feature_idx.iter().zip(&encodings) {
        match enc {
            Encoding::Numeric => feature_names.push(headers[c].clone()),
            Encoding::OneHot(cats) => {
                feature_names.extend(cats.iter().map(|v| format!("{}={}", headers[c], v)))
            }
        }
    }
    let d = feature_names.len();
    let mut x = Vec::with_capacity(rows.len() * d);
    for (_, r) in &rows {
        for (&c, enc) in feature_idx.iter().zip(&encodings) {
            match enc {
                // Parse checked when choosing the encoding.
                Encoding::Numeric => x.push(r[c].parse::<f64>().unwrap_or(f64::NAN)),
                Encoding::OneHot(cats) => {
                    x.extend(cats.iter().map(|v| if *v == r[c] { 1.0 } else { 0.0 }))
                }
            }
        }
    }

    let is_test: Vec<bool> = rows.iter().map(|(t, _)| *t).collect();
    let (train_idx, val_idx, test_idx) = split_indices(&is_test, &cfg.split, cfg.seed)?;

    let mut all_counts = GroupCounts::default();
    for (&yi, &ai) in y.iter().zip(&a) {
        all_counts.0[ai as usize][yi as usize] += 1;
    }

    let gather = |idx: &[usize]| -> (Vec<f64>, Vec<u8>, Vec<u8>) {
        let mut m = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            m.extend_from_slice(&x[i * d..(i + 1) * d]);
        }
        (
            m,
            idx.iter().map(|&i| y[i]).collect(),
            idx.iter().map(|&i| a[i]).collect(),
        )
    };
    let (x_tr, y_tr, a_tr) = gather(&train_idx);
    let (x_va, y_va, a_va) = gather(&val_idx);
    let (x_te, y_te, a_te) = gather(&test_idx);
    if y_tr.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let stats = Standardizer::fit(&x_tr, d)?;

    let counts_of = |ys: &[u8], as_: &[u8]| {
        let mut c = GroupCounts::default();
        for (&yi, &ai) in ys.iter().zip(as_) {
            c.0[ai as usize][yi as usize] += 1;
        }
        c
    };
    let group_counts = SplitGroupCounts {
        train: counts_of(&y_tr, &a_tr),
        val: counts_of(&y_va, &a_va),
        test: counts_of(&y_te, &a_te),
    };
    for (role, counts) in [
        (Role::Train, group_counts.train),
        (Role::Val, group_counts.val),
        (Role::Test, group_counts.test),
    ] {
        // An explicitly empty split (fraction 0) is allowed.
        if counts.total() == 0 {
            continue;
        }
        for ai in 0..2u8 {
            for yi in 0..2u8 {
                if counts.get(ai, yi) == 0 {
                    return Err(Error::EmptySubgroup {
                        split: role.to_string(),
                        a: ai,
                        y: yi,
                    });
                }
            }
        }
    }

    let train = Dataset::new(
        Role::Train,
        feature_names.clone(),
        stats.transform(&x_tr),
        y_tr,
        a_tr,
    )?;
    let val = Dataset::new(Role::Val, feature_names.clone(), stats.transform(&x_va), y_va, a_va)?;
    let test = Dataset::new(Role::Test, feature_names.clone(), stats.transform(&x_te), y_te, a_te)?;

    let metadata = SplitMetadata {
        dataset: name,
        seed: cfg.seed,
        sizes: SplitSizes {
            train: train.len(),
            val: val.len(),
            test: test.len(),
        },
        n_features: d,
        feature_names,
        group_positive_rates: GroupPositiveRates {
            a1: all_counts.positive_rate(1),
            a0: all_counts.positive_rate(0),
        },
        group_counts,
        rows_total,
        rows_dropped,
        dropped_columns,
        suggested_l2: cfg.suggested_l2,
        standardization: stats,
    };
    Ok(LoadedSplits {
        train,
        val,
        test,
        metadata,
    })
}

/// Returns sorted (train, val, test) row indices.
///
/// Split sizes round to the nearest integer: `round(f_train * n)` training
/// rows, `round(f_val * n)` validation rows, the rest for test.
pub(crate) fn split_indices(
    is_test: &[bool],
    spec: &SplitSpec,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val, mut test) = match spec {
        SplitSpec::Fractions {
            train: ft,
            val: fv,
            test: fte,
        } => {
            let fracs = [*ft, *fv, *fte];
            if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) || (ft + fv + fte - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "split fractions {fracs:?} must lie in [0,1] and sum to 1"
                )));
            }
            if is_test.iter().any(|&t| t) {
                return Err(Error::Config("fractional split given rows from a test file".into()));
            }
            let n = is_test.len();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let n_train = ((ft * n as f64).round() as usize).min(n);
            let n_val = ((fv * n as f64).round() as usize).min(n - n_train);
            let test = idx.split_off(n_train + n_val);
            let val = idx.split_off(n_train);
            (idx, val, test)
        }
        SplitSpec::Predefined { val_fraction, .. } => {
            if !(0.0..1.0).contains(val_fraction) {
                return Err(Error::Config(format!(
                    "val_fraction {val_fraction} must lie in [0, 1)"
                )));
            }
            let mut pool: Vec<usize> = (0..is_test.len()).filter(|&i| !is_test[i]).collect();
            let test: Vec<usize> = (0..is_test.len()).filter(|&i| is_test[i]).collect();
            pool.shuffle(&mut rng);
            let n_train = (((1.0 - val_fraction) * pool.len() as f64).round() as usize).min(pool.len());
            let val = pool.split_off(n_train);
            (pool, val, test)
        }
    };
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok((train, val, test))
}
