//! Dataset ingestion and generation.
//!
//! Matrix CSV layout: the first line is `l1,l2`; every following line is
//! `label,e11,e12,...,e1l2,e21,...` with entries in row-major order. Values
//! are written with 17 significant digits so a write/load cycle is lossless.
//!
//! PGM directories hold one subdirectory per class; classes are numbered in
//! lexicographic order of the subdirectory names and pixels are scaled by
//! `1/maxval`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CrpError, Result};
use crate::kronlin::Matrix;
use crate::stats::{Dataset, LabeledMatrix};

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| CrpError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut records = reader.records();
    let line_of = |r: &csv::StringRecord| r.position().map_or(0, |p| p.line());
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        CrpError::parse(path, line, e.to_string())
    };

    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => return Err(CrpError::parse(path, 1, "missing 'l1,l2' header")),
    };
    let dims: Vec<usize> = header
        .iter()
        .map(|f| f.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| {
            CrpError::parse(path, 1, format!("malformed header {:?}", header.as_slice()))
        })?;
    let (rows, cols) = match dims[..] {
        [r, c] if r > 0 && c > 0 => (r, c),
        _ => {
            return Err(CrpError::parse(
                path,
                1,
                "header must be two positive integers 'l1,l2'",
            ))
        }
    };

    let mut samples = Vec::new();
    for record in records {
        let record = record.map_err(csv_err)?;
        let line = line_of(&record);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != rows * cols + 1 {
            return Err(CrpError::parse(
                path,
                line,
                format!(
                    "expected {} fields, found {}",
                    rows * cols + 1,
                    record.len()
                ),
            ));
        }
        let label: usize = record[0].parse().map_err(|_| {
            CrpError::parse(
                path,
                line,
                format!("label {:?} is not a non-negative integer", &record[0]),
            )
        })?;
        let mut values = Vec::with_capacity(rows * cols);
        for field in record.iter().skip(1) {
            let x: f64 = field
                .parse()
                .map_err(|_| CrpError::parse(path, line, format!("invalid number {field:?}")))?;
            if !x.is_finite() {
                return Err(CrpError::parse(
                    path,
                    line,
                    format!("non-finite value {field:?}"),
                ));
            }
            values.push(x);
        }
        samples.push(LabeledMatrix::new(
            Matrix::from_row_slice(rows, cols, &values),
            label,
        ));
    }
    if samples.is_empty() {
        return Err(CrpError::EmptyDataset);
    }
    Dataset::from_samples(rows, cols, samples)
}

pub fn write_matrix_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => CrpError::io(path, e),
        other => CrpError::io(path, std::io::Error::other(format!("{other:?}"))),
    };
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(io)?;
    let (rows, cols) = d.dims();
    w.write_record([rows.to_string(), cols.to_string()])
        .map_err(io)?;
    for s in d.samples() {
        let mut record = Vec::with_capacity(rows * cols + 1);
        record.push(s.label.to_string());
        for i in 0..rows {
            for j in 0..cols {
                record.push(format!("{:.16e}", s.data[(i, j)]));
            }
        }
        w.write_record(&record).map_err(io)?;
    }
    w.flush().map_err(|e| CrpError::io(path, e))
}

/// Gray image from a binary (`P5`) or ASCII (`P2`) PGM, scaled to `[0, 1]`.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let err = |msg: &str| CrpError::parse(path, 0, msg.to_string());
    let mut pos = 0usize;

    let token = |pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = token(&mut pos).ok_or_else(|| err("empty file"))?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => {
            return Err(err(&format!(
                "unsupported image format {other:?}; expected P2 or P5 PGM"
            )))
        }
    };
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        *slot = token(&mut pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(&format!("bad {name} in PGM header")))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(err(
            "PGM dimensions and maxval must be positive, maxval ≤ 65535",
        ));
    }
    let scale = 1.0 / maxval as f64;
    let count = width * height;
    let mut pixels = Vec::with_capacity(count);

    if binary {
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let bpp = if maxval < 256 { 1 } else { 2 };
        let raster = bytes
            .get(pos..pos + count * bpp)
            .ok_or_else(|| err("truncated PGM raster"))?;
        for chunk in raster.chunks_exact(bpp) {
            let v = if bpp == 1 {
                chunk[0] as usize
            } else {
                u16::from_be_bytes([chunk[0], chunk[1]]) as usize
            };
            pixels.push(v);
        }
    } else {
        for _ in 0..count {
            let v: usize = token(&mut pos)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err("truncated or malformed ASCII PGM raster"))?;
            pixels.push(v);
        }
    }
    if pixels.iter().any(|&v| v > maxval) {
        return Err(err("pixel value exceeds maxval"));
    }
    Ok(Matrix::from_row_iterator(
        height,
        width,
        pixels.into_iter().map(|v| v as f64 * scale),
    ))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CrpError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| CrpError::io(dir, e)))
        .collect::<Result<_>>()?;
    entries.retain(|p| {
        !p.file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with('.'))
    });
    entries.sort();
    Ok(entries)
}

pub fn load_pgm_dir(root: impl AsRef<Path>) -> Result<Dataset> {
    let root = root.as_ref();
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    let mut samples = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    for (label, dir) in class_dirs.iter().enumerate() {
        for file in sorted_entries(dir)?.into_iter().filter(|p| p.is_file()) {
            let bytes = fs::read(&file).map_err(|e| CrpError::io(&file, e))?;
            let image = parse_pgm(&bytes, &file)?;
            match dims {
                None => dims = Some(image.shape()),
                Some(d) if d != image.shape() => {
                    return Err(CrpError::Dimension(format!(
                        "{} is {}x{}, expected {}x{}",
                        file.display(),
                        image.nrows(),
                        image.ncols(),
                        d.0,
                        d.1
                    )))
                }
                Some(_) => {}
            }
            samples.push(LabeledMatrix::new(image, label));
        }
    }
    let (rows, cols) = dims.ok_or(CrpError::EmptyDataset)?;
    Dataset::new(rows, cols, class_dirs.len(), samples)
}

/// Mean over non-overlapping `r1 × r2` blocks.
pub fn block_downsample(x: &Matrix, r1: usize, r2: usize) -> Result<Matrix> {
    let (rows, cols) = x.shape();
    if r1 == 0 || r2 == 0 || rows % r1 != 0 || cols % r2 != 0 {
        return Err(CrpError::Dimension(format!(
            "{rows}x{cols} is not divisible into {r1}x{r2} blocks"
        )));
    }
    let area = (r1 * r2) as f64;
    Ok(Matrix::from_fn(rows / r1, cols / r2, |i, j| {
        x.view((i * r1, j * r2), (r1, r2)).sum() / area
    }))
}

pub fn downsample_dataset(d: &Dataset, r1: usize, r2: usize) -> Result<Dataset> {
    let (rows, cols) = d.dims();
    // validate once so an empty dataset still reports bad factors
    block_downsample(&Matrix::zeros(rows, cols), r1, r2)?;
    let samples = d
        .samples()
        .iter()
        .map(|s| {
            Ok(LabeledMatrix::new(
                block_downsample(&s.data, r1, r2)?,
                s.label,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(rows / r1, cols / r2, d.classes(), samples)
}

/// Synthetic classes: each class mean is a random rank-`pattern_rank` matrix
/// of unit Frobenius norm, and samples add i.i.d. Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub l1: usize,
    pub l2: usize,
    pub pattern_rank: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

const NOISE_STREAM_BASE: u64 = 1 << 32;

pub fn synth_dataset(spec: &SynthSpec) -> Result<Dataset> {
    let SynthSpec {
        classes,
        per_class,
        l1,
        l2,
        pattern_rank,
        noise_sigma,
        seed,
    } = *spec;
    if classes == 0 || per_class == 0 || l1 == 0 || l2 == 0 {
        return Err(CrpError::Config(
            "synthetic dataset counts must be positive".into(),
        ));
    }
    if pattern_rank == 0 || pattern_rank > l1.min(l2) {
        return Err(CrpError::Config(format!(
            "pattern rank {pattern_rank} must lie in 1..={}",
            l1.min(l2)
        )));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(CrpError::Config(format!(
            "noise sigma {noise_sigma} must be non-negative"
        )));
    }

    let mut samples = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        let mut mean = Matrix::zeros(l1, l2);
        for _ in 0..pattern_rank {
            let a = Matrix::from_fn(l1, 1, |_, _| StandardNormal.sample(&mut rng));
            let b = Matrix::from_fn(l2, 1, |_, _| StandardNormal.sample(&mut rng));
            mean += a * b.transpose();
        }
        mean /= mean.norm();

        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(NOISE_STREAM_BASE + class as u64);
        for _ in 0..per_class {
            let noise = Matrix::from_fn(l1, l2, |_, _| {
                let z: f64 = StandardNormal.sample(&mut noise_rng);
                z * noise_sigma
            });
            samples.push(LabeledMatrix::new(&mean + noise, class));
        }
    }
    Dataset::new(l1, l2, classes, samples)
}
