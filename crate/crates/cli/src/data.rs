//! Dataset ingestion: IDX image/label pairs (optionally gzipped) and CSV
//! tables with a header row.

use std::io::Read;
use std::path::Path;

use flate2::read::MultiGzDecoder;
use paralens::train::Dataset;
use paralens::{Scalar, Shape, Tensor};

use crate::error::DataError;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const CLASSES: usize = 10;

/// Reads a file, inflating it when it starts with the gzip signature.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>, DataError> {
    let raw = std::fs::read(path).map_err(|e| DataError::Io(e.to_string()))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| DataError::Io(format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], word: usize) -> Result<u32, DataError> {
    let at = 4 * word;
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("four bytes")))
        .ok_or(DataError::TruncatedFile {
            expected: at + 4,
            found: bytes.len(),
        })
}

fn payload(bytes: &[u8], header: usize, n: usize) -> Result<&[u8], DataError> {
    let expected = header + n;
    if bytes.len() < expected {
        return Err(DataError::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    Ok(&bytes[header..expected])
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, DataError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DataError::BadMagic {
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 1)? as usize;
    let rows = be_u32(bytes, 2)? as usize;
    let cols = be_u32(bytes, 3)? as usize;
    let pixels = payload(bytes, 16, count * rows * cols)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(DataError::BadMagic {
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 1)? as usize;
    Ok(payload(bytes, 8, count)?.to_vec())
}

/// Pixels scaled by 1/255 into flat `rows·cols` vectors; labels one-hot of
/// width ten.
pub fn idx_dataset(
    images: &IdxImages,
    labels: &[u8],
    limit: Option<usize>,
) -> Result<Dataset<f64>, DataError> {
    if images.count != labels.len() {
        return Err(DataError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        });
    }
    let n = limit.map_or(images.count, |l| l.min(images.count));
    let size = images.rows * images.cols;
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for (i, &label) in labels.iter().take(n).enumerate() {
        if label as usize >= CLASSES {
            return Err(DataError::BadLabel { index: i, label });
        }
        let px = &images.pixels[i * size..(i + 1) * size];
        inputs.push(Tensor::from_vec(
            px.iter().map(|&v| f64::from(v) / 255.0).collect(),
        ));
        let mut hot = vec![0.0; CLASSES];
        hot[label as usize] = 1.0;
        targets.push(Tensor::from_vec(hot));
    }
    Dataset::new(inputs, targets).map_err(|e| DataError::Io(e.to_string()))
}

pub fn load_idx(
    images: &Path,
    labels: &Path,
    limit: Option<usize>,
) -> Result<Dataset<f64>, (String, DataError)> {
    let tag = |p: &Path| p.display().to_string();
    let im = read_bytes(images)
        .and_then(|b| parse_idx_images(&b))
        .map_err(|e| (tag(images), e))?;
    let lb = read_bytes(labels)
        .and_then(|b| parse_idx_labels(&b))
        .map_err(|e| (tag(labels), e))?;
    idx_dataset(&im, &lb, limit).map_err(|e| (tag(images), e))
}

/// A CSV table: the header names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_csv(path: &Path) -> Result<Table, DataError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::Csv(e.to_string()))?;
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(DataError::Csv("header row is required".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>().map_err(|_| {
                    DataError::Csv(format!("row {}, column `{}`: `{f}` is not a number", i + 2, header[j]))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Splits each row into input and the trailing `label_columns` labels. Over
/// Z2 every entry must be 0 or 1.
pub fn table_dataset<S: Scalar>(t: &Table, label_columns: usize) -> Result<Dataset<S>, DataError> {
    let width = t.header.len();
    if label_columns == 0 || label_columns >= width {
        return Err(DataError::Csv(format!(
            "{label_columns} label column(s) leave no input among {width} columns"
        )));
    }
    let boolean = S::KIND == paralens::ScalarKind::Z2;
    let split = width - label_columns;
    let mut inputs = Vec::with_capacity(t.rows.len());
    let mut labels = Vec::with_capacity(t.rows.len());
    for (i, row) in t.rows.iter().enumerate() {
        if boolean && row.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(DataError::Csv(format!("row {}: boolean data must be 0 or 1", i + 2)));
        }
        let conv = |v: &[f64]| v.iter().map(|&x| S::from_f64(x)).collect::<Vec<S>>();
        inputs.push(Tensor::new(Shape::vector(split), conv(&row[..split])).expect("width checked"));
        labels.push(Tensor::new(Shape::vector(label_columns), conv(&row[split..])).expect("width checked"));
    }
    Dataset::new(inputs, labels).map_err(|e| DataError::Csv(e.to_string()))
}

pub fn load_csv<S: Scalar>(path: &Path, label_columns: usize) -> Result<Dataset<S>, DataError> {
    table_dataset(&read_csv(path)?, label_columns)
}
