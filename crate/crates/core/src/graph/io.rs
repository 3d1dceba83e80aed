use std::collections::BTreeSet;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which CSV column carries the class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetFormat {
    /// Comma separated numeric rows, optional header.
    Csv { label_column: LabelColumn },
    /// Big-endian idx tensor; `labels` points at the matching idx label file.
    Idx { labels: Option<PathBuf> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadOptions {
    /// Total size of a per-class stratified subsample.
    pub limit: Option<usize>,
    pub seed: u64,
}

/// Loads a dataset from disk and optionally draws a stratified subsample.
pub fn load_dataset<T: Real>(
    path: impl AsRef<Path>,
    format: &DatasetFormat,
    opts: LoadOptions,
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let data = match format {
        DatasetFormat::Csv { label_column } => {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&name, file, *label_column)?
        }
        DatasetFormat::Idx { labels } => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let labels = match labels {
                Some(p) => Some(std::fs::read(p).map_err(|e| Error::io(p, e))?),
                None => None,
            };
            parse_idx(&name, &bytes, labels.as_deref())?
        }
    };
    match opts.limit {
        Some(limit) => stratified_subsample(&data, limit, opts.seed),
        None => Ok(data),
    }
}

pub(crate) fn parse_csv<T: Real, R: Read>(
    name: &str,
    reader: R,
    label_column: LabelColumn,
) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut features = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut width: Option<usize> = None;
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            offset: e.position().map_or(0, |p| p.byte()),
            message: e.to_string(),
        })?;
        let offset = rec.position().map_or(0, |p| p.byte());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let label_idx = match label_column {
            LabelColumn::Last => Some(rec.len().saturating_sub(1)),
            LabelColumn::Index(i) => Some(i),
            LabelColumn::None => None,
        };
        if let Some(li) = label_idx {
            if li >= rec.len() {
                return Err(Error::Parse {
                    offset,
                    message: format!("label column {li} missing in row of {} fields", rec.len()),
                });
            }
        }
        let parsed: Vec<Option<f64>> = rec
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != label_idx)
            .map(|(_, f)| f.parse::<f64>().ok())
            .collect();
        if parsed.iter().any(Option::is_none) {
            if first {
                // header row
                first = false;
                continue;
            }
            return Err(Error::Parse {
                offset,
                message: "non-numeric feature value".into(),
            });
        }
        first = false;
        let w = parsed.len();
        match width {
            None => width = Some(w),
            Some(prev) if prev != w => {
                return Err(Error::Parse {
                    offset,
                    message: format!("row has {w} features, expected {prev}"),
                })
            }
            _ => {}
        }
        features.extend(parsed.into_iter().map(|v| T::of(v.unwrap_or_default())));
        if let Some(li) = label_idx {
            raw_labels.push(rec[li].to_string());
        }
    }
    let dim = width.ok_or_else(|| Error::Structure("csv contains no data rows".into()))?;
    let labels = match label_column {
        LabelColumn::None => None,
        _ => Some(encode_labels(&raw_labels)),
    };
    Dataset::new(name, features, dim, labels, None)
}

// Integer labels are used as-is; anything else maps sorted distinct strings
// to 0..K.
fn encode_labels(raw: &[String]) -> Vec<usize> {
    let ints: Option<Vec<usize>> = raw.iter().map(|s| s.parse::<usize>().ok()).collect();
    if let Some(ints) = ints {
        return ints;
    }
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    let lookup: Vec<&str> = distinct.into_iter().collect();
    raw.iter()
        .map(|s| lookup.binary_search(&s.as_str()).expect("label present"))
        .collect()
}

struct IdxTensor {
    dims: Vec<usize>,
    type_code: u8,
    values: Vec<f64>,
}

fn read_idx(bytes: &[u8]) -> Result<IdxTensor> {
    let truncated = |offset: usize, what: &str| Error::Parse {
        offset: offset as u64,
        message: format!("truncated idx data: {what}"),
    };
    if bytes.len() < 4 {
        return Err(truncated(bytes.len(), "magic number"));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad idx magic {:02x}{:02x}", bytes[0], bytes[1]),
        });
    }
    let type_code = bytes[2];
    let ndims = bytes[3] as usize;
    let elem = match type_code {
        0x08 | 0x09 => 1,
        0x0B => 2,
        0x0C | 0x0D => 4,
        0x0E => 8,
        other => {
            return Err(Error::Parse {
                offset: 2,
                message: format!("unknown idx type code 0x{other:02x}"),
            })
        }
    };
    let mut pos = 4;
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        let b = bytes.get(pos..pos + 4).ok_or_else(|| truncated(pos, "dimension sizes"))?;
        dims.push(u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize);
        pos += 4;
    }
    let count: usize = dims.iter().product();
    let need = count * elem;
    let body = bytes
        .get(pos..pos + need)
        .ok_or_else(|| truncated(bytes.len(), "element data"))?;
    let values = body
        .chunks_exact(elem)
        .map(|c| match type_code {
            0x08 => c[0] as f64,
            0x09 => c[0] as i8 as f64,
            0x0B => i16::from_be_bytes([c[0], c[1]]) as f64,
            0x0C => i32::from_be_bytes([c[0], c[1], c[2], c[3]]) as f64,
            0x0D => f32::from_be_bytes([c[0], c[1], c[2], c[3]]) as f64,
            _ => f64::from_be_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]),
        })
        .collect();
    Ok(IdxTensor {
        dims,
        type_code,
        values,
    })
}

pub(crate) fn parse_idx<T: Real>(
    name: &str,
    images: &[u8],
    labels: Option<&[u8]>,
) -> Result<Dataset<T>> {
    let img = read_idx(images)?;
    if img.dims.is_empty() {
        return Err(Error::Structure("idx image tensor has no dimensions".into()));
    }
    let n = img.dims[0];
    let dim = img.dims[1..].iter().product::<usize>().max(1);
    let scale = if img.type_code == 0x08 { 1.0 / 255.0 } else { 1.0 };
    let features = img.values.iter().map(|&v| T::of(v * scale)).collect();
    let labels = match labels {
        Some(bytes) => {
            let lab = read_idx(bytes)?;
            if lab.dims.len() != 1 {
                return Err(Error::Structure(format!(
                    "idx label tensor has {} dimensions, expected 1",
                    lab.dims.len()
                )));
            }
            if lab.dims[0] != n {
                return Err(Error::Structure(format!(
                    "{} labels for {n} images",
                    lab.dims[0]
                )));
            }
            Some(lab.values.iter().map(|&v| v as usize).collect())
        }
        None => None,
    };
    Dataset::new(name, features, dim, labels, None)
}

/// Per-class uniform subsample of total size `limit`, allocated in proportion
/// to class sizes (largest remainder). Unlabeled data is sampled uniformly.
pub(crate) fn stratified_subsample<T: Real>(
    data: &Dataset<T>,
    limit: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    let n = data.n();
    if limit >= n {
        return Ok(data.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = match data.labels() {
        None => index::sample(&mut rng, n, limit).into_vec(),
        Some(labels) => {
            let k = data.num_classes();
            let mut members = vec![Vec::new(); k];
            for (i, &y) in labels.iter().enumerate() {
                members[y].push(i);
            }
            let exact: Vec<f64> = members
                .iter()
                .map(|m| limit as f64 * m.len() as f64 / n as f64)
                .collect();
            let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
            let mut short = limit - quota.iter().sum::<usize>();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| {
                let ra = exact[a] - exact[a].floor();
                let rb = exact[b] - exact[b].floor();
                rb.total_cmp(&ra).then(a.cmp(&b))
            });
            for &c in order.iter().cycle().take(k * 2) {
                if short == 0 {
                    break;
                }
                if quota[c] < members[c].len() {
                    quota[c] += 1;
                    short -= 1;
                }
            }
            let mut keep = Vec::with_capacity(limit);
            for (c, m) in members.iter().enumerate() {
                let picks = index::sample(&mut rng, m.len(), quota[c].min(m.len()));
                keep.extend(picks.into_iter().map(|p| m[p]));
            }
            keep
        }
    };
    keep.sort_unstable();
    data.subset(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_bytes(type_code: u8, dims: &[u32], payload: &[u8]) -> Vec<u8> {
        let mut b = vec![0, 0, type_code, dims.len() as u8];
        for d in dims {
            b.extend_from_slice(&d.to_be_bytes());
        }
        b.extend_from_slice(payload);
        b
    }

    #[test]
    fn csv_with_string_labels() {
        let d: Dataset<f64> = parse_csv("t", "1,0,a\n0,1,b\n1,1,a\n".as_bytes(), LabelColumn::Last).unwrap();
        assert_eq!((d.n(), d.dim(), d.num_classes()), (3, 2, 2));
        assert_eq!(d.labels().unwrap(), &[0, 1, 0]);
    }

    #[test]
    fn csv_header_is_skipped() {
        let d: Dataset<f64> =
            parse_csv("t", "x,y,label\n1,2,0\n3,4,1\n".as_bytes(), LabelColumn::Last).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn csv_label_column_override() {
        let d: Dataset<f64> =
            parse_csv("t", "2,1.5,0.5\n0,2.5,3.5\n".as_bytes(), LabelColumn::Index(0)).unwrap();
        assert_eq!(d.labels().unwrap(), &[2, 0]);
        assert_eq!(d.row(0), &[1.5, 0.5]);
        assert_eq!(d.num_classes(), 3);
    }

    #[test]
    fn csv_bad_value_reports_offset() {
        let err = parse_csv::<f64, _>("t", "1,2,0\n3,oops,1\n".as_bytes(), LabelColumn::Last).unwrap_err();
        match err {
            Error::Parse { offset, .. } => assert_eq!(offset, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_ragged_row_is_parse_error() {
        let err = parse_csv::<f64, _>("t", "1,2,0\n3,1\n".as_bytes(), LabelColumn::Last).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn idx_images_shape_and_scaling() {
        let img = idx_bytes(0x08, &[2, 2, 2], &[0, 255, 51, 102, 1, 2, 3, 4]);
        let lab = idx_bytes(0x08, &[2], &[3, 7]);
        let d: Dataset<f64> = parse_idx("t", &img, Some(&lab)).unwrap();
        assert_eq!((d.n(), d.dim()), (2, 4));
        assert_eq!(d.row(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(d.labels().unwrap(), &[3, 7]);
        assert_eq!(d.num_classes(), 8);
    }

    #[test]
    fn idx_truncated_payload() {
        let img = idx_bytes(0x08, &[2, 2, 2], &[0, 1, 2]);
        assert!(matches!(parse_idx::<f64>("t", &img, None), Err(Error::Parse { .. })));
    }

    #[test]
    fn idx_label_count_mismatch_is_structural() {
        let img = idx_bytes(0x08, &[2, 1, 1], &[0, 1]);
        let lab = idx_bytes(0x08, &[3], &[0, 1, 2]);
        assert!(matches!(parse_idx::<f64>("t", &img, Some(&lab)), Err(Error::Structure(_))));
    }

    #[test]
    fn limit_draws_equal_counts_per_class() {
        let labels: Vec<usize> = (0..100).map(|i| i % 10).collect();
        let feats: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let d = Dataset::new("t", feats, 1, Some(labels), None).unwrap();
        for seed in 0..5 {
            let s = stratified_subsample(&d, 30, seed).unwrap();
            assert_eq!(s.n(), 30);
            let mut counts = [0usize; 10];
            for &y in s.labels().unwrap() {
                counts[y] += 1;
            }
            assert_eq!(counts, [3; 10]);
        }
    }
}
