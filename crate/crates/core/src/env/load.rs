//! Dataset ingestion: delimited text and IDX containers.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledExample};
use crate::error::{Error, Result};

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

pub fn load_csv(path: &Path, label: &LabelColumn) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, label)
}

/// Parses comma-separated rows. A header row is required when the label
/// column is given by name and detected otherwise (a first row whose
/// features are not all numeric).
pub fn parse_csv(text: &str, label: &LabelColumn) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = reader.records().peekable();

    let label_idx = match label {
        LabelColumn::Index(i) => {
            if let Some(Ok(first)) = rows.peek() {
                let numeric = first
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != *i)
                    .all(|(_, f)| f.parse::<f64>().is_ok());
                if !numeric {
                    rows.next();
                }
            }
            *i
        }
        LabelColumn::Name(name) => {
            let header = rows
                .next()
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    msg: "missing header row".into(),
                })?
                .map_err(csv_error)?;
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    msg: format!("no column named {name:?}"),
                })?
        }
    };

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut examples = Vec::new();
    let mut width = None;
    for row in rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if label_idx >= row.len() {
            return Err(Error::Parse {
                line,
                msg: format!("row has {} fields, label column is {label_idx}", row.len()),
            });
        }
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(Error::Parse {
                line,
                msg: format!(
                    "expected {} fields, found {}",
                    width.unwrap_or(0),
                    row.len()
                ),
            });
        }
        let mut x = Vec::with_capacity(row.len() - 1);
        for (j, field) in row.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("non-numeric feature {field:?} in column {j}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite feature in column {j}"),
                });
            }
            x.push(v);
        }
        let next = ids.len();
        let label = *ids.entry(row[label_idx].to_string()).or_insert(next);
        examples.push(LabeledExample { x, label });
    }
    Ok(Dataset {
        examples,
        classes: ids.len(),
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let img = fs::read(images).map_err(|e| Error::io(images, e))?;
    let lab = fs::read(labels).map_err(|e| Error::io(labels, e))?;
    parse_idx(&img, &lab)
}

/// Decodes unsigned-byte IDX image and label containers; pixels become `v/255`.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let (img_dims, pixels) = idx_body(images, "images")?;
    let (lab_dims, raw_labels) = idx_body(labels, "labels")?;
    if img_dims.len() < 2 {
        return Err(Error::Format(
            "image file must have at least 2 dimensions".into(),
        ));
    }
    if lab_dims.len() != 1 {
        return Err(Error::Format(
            "label file must have exactly 1 dimension".into(),
        ));
    }
    let n = img_dims[0];
    if lab_dims[0] != n {
        return Err(Error::Format(format!(
            "{n} images but {} labels",
            lab_dims[0]
        )));
    }
    let width: usize = img_dims[1..].iter().product();
    let mut ids: HashMap<u8, usize> = HashMap::new();
    let mut dense: Vec<u8> = Vec::new();
    // Keep numeric labels as class ids; MNIST digits stay 0..9.
    for &l in raw_labels {
        if !ids.contains_key(&l) {
            ids.insert(l, 0);
            dense.push(l);
        }
    }
    dense.sort_unstable();
    for (i, l) in dense.iter().enumerate() {
        ids.insert(*l, i);
    }
    let examples = pixels
        .chunks_exact(width.max(1))
        .zip(raw_labels)
        .map(|(px, l)| LabeledExample {
            x: px.iter().map(|&p| f64::from(p) / 255.0).collect(),
            label: ids[l],
        })
        .collect();
    Ok(Dataset {
        examples,
        classes: dense.len(),
    })
}

fn idx_body<'a>(bytes: &'a [u8], what: &str) -> Result<(Vec<usize>, &'a [u8])> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Format(format!("{what}: not an IDX file")));
    }
    if bytes[2] != 0x08 {
        return Err(Error::Format(format!(
            "{what}: element type 0x{:02x} unsupported, expected unsigned bytes",
            bytes[2]
        )));
    }
    let ndim = bytes[3] as usize;
    let header = 4 + 4 * ndim;
    if ndim == 0 || bytes.len() < header {
        return Err(Error::Format(format!("{what}: truncated header")));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("{what}: dimensions overflow")))?;
    let body = &bytes[header..];
    if body.len() != expected {
        return Err(Error::Format(format!(
            "{what}: expected {expected} data bytes, found {}",
            body.len()
        )));
    }
    Ok((dims, body))
}
