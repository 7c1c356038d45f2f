//! Standardized splits on disk: `train.csv`, `val.csv`, `test.csv` with
//! columns `y,a,<features...>`, plus `metadata.json`.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Dataset, LoadedSplits, Role, SplitMetadata};
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const METADATA_FILE: &str = "metadata.json";

pub fn split_file(role: Role) -> String {
    format!("{role}.csv")
}

pub fn dataset_to_csv(data: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["y".to_string(), "a".to_string()];
    header.extend(data.feature_names().iter().cloned());
    w.write_record(&header)?;
    let labels = data.labels();
    let mut record = Vec::with_capacity(header.len());
    for i in 0..data.len() {
        record.clear();
        record.push(labels[i].to_string());
        record.push(data.sensitive()[i].to_string());
        record.extend(data.row(i).iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Internal(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

pub fn dataset_from_csv(role: Role, text: &str) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.len() < 2 || header[0] != "y" || header[1] != "a" {
        return Err(Error::Config(format!(
            "{role} split must start with columns y,a"
        )));
    }
    let names = header[2..].to_vec();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut sensitive = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                row: row + 1,
                found: rec.len(),
                expected: header.len(),
            });
        }
        let parse_bit = |col: &str, v: &str| -> Result<u8> {
            match v {
                "0" => Ok(0),
                "1" => Ok(1),
                _ => Err(Error::NonBinary {
                    column: col.to_string(),
                    value: v.to_string(),
                }),
            }
        };
        labels.push(parse_bit("y", &rec[0])?);
        sensitive.push(parse_bit("a", &rec[1])?);
        for (j, v) in rec.iter().enumerate().skip(2) {
            features.push(v.parse::<f64>().map_err(|_| Error::NonNumeric {
                column: header[j].clone(),
                value: v.to_string(),
            })?);
        }
    }
    Dataset::new(role, names, features, labels, sensitive)
}

/// Writes the three splits and metadata; returns the written paths.
pub fn write_prepared(dir: &Path, splits: &LoadedSplits) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for data in [&splits.train, &splits.val, &splits.test] {
        let path = dir.join(split_file(data.role()));
        write_atomic(&path, dataset_to_csv(data)?.as_bytes())?;
        written.push(path);
    }
    let path = dir.join(METADATA_FILE);
    let mut json = serde_json::to_string_pretty(&splits.metadata)?;
    json.push('\n');
    write_atomic(&path, json.as_bytes())?;
    written.push(path);
    Ok(written)
}

pub fn read_prepared(dir: &Path) -> Result<LoadedSplits> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
    };
    let metadata: SplitMetadata = serde_json::from_str(&read(METADATA_FILE)?)?;
    let train = dataset_from_csv(Role::Train, &read(&split_file(Role::Train))?)?;
    let val = dataset_from_csv(Role::Val, &read(&split_file(Role::Val))?)?;
    let test = dataset_from_csv(Role::Test, &read(&split_file(Role::Test))?)?;
    for d in [&train, &val, &test] {
        if d.feature_names() != metadata.feature_names.as_slice() {
            return Err(Error::Config(format!(
                "{} split features do not match metadata",
                d.role()
            )));
        }
    }
    Ok(LoadedSplits {
        train,
        val,
        test,
        metadata,
    })
}
