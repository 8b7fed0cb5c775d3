//! Dataset ingestion (CSV, binary PGM directories) and PGM output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Parses a decimal literal such as `-5.10` or `1.2e-3` exactly.
fn parse_decimal(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(p) => (&s[..p], s[p + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut num: BigInt = if all.is_empty() {
        BigInt::zero()
    } else {
        all.parse().ok()?
    };
    if neg {
        num = -num;
    }
    let scale_exp = exp - i32::try_from(frac_part.len()).ok()?;
    let ten = BigInt::from(10);
    let value = if scale_exp >= 0 {
        BigRational::from_integer(num * ten.pow(scale_exp.unsigned_abs()))
    } else {
        BigRational::new(num, ten.pow(scale_exp.unsigned_abs()))
    };
    Some(value)
}

/// Loads a headerless numeric CSV, multiplying every cell by `scale`. Each
/// scaled value must be an exact integer.
pub fn load_csv(path: impl AsRef<Path>, scale: u64, skip_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    if scale == 0 {
        return Err(Error::Config("scale must be positive".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(skip_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let factor = BigRational::from_integer(BigInt::from(scale));
    let mut rows: Vec<Vec<i64>> = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let mut values = Vec::with_capacity(rec.len());
        for (col, cell) in rec.iter().enumerate() {
            let v = parse_decimal(cell).ok_or_else(|| {
                Error::format(
                    path,
                    format!("row {row}, column {col}: {cell:?} is not numeric"),
                )
            })?;
            let scaled = v * &factor;
            let as_int = scaled
                .is_integer()
                .then(|| scaled.to_integer().to_i64())
                .flatten()
                .ok_or_else(|| Error::Quantization {
                    row,
                    col,
                    value: cell.to_string(),
                    scale,
                })?;
            values.push(as_int);
        }
        if let Some(first) = rows.first() {
            if first.len() != values.len() {
                return Err(Error::format(
                    path,
                    format!(
                        "row {row} has {} cells, expected {}",
                        values.len(),
                        first.len()
                    ),
                ));
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::format(path, "no data rows"));
    }
    Dataset::from_rows(&rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// A decoded 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Decodes a binary (P5) PGM with maxval 255.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token()?;
    if magic != "P5" {
        return Err(Error::format(
            path,
            format!("expected P5 magic, found {magic:?}"),
        ));
    }
    let mut number = |what: &str| -> Result<usize> {
        let t = token()?;
        t.parse::<usize>()
            .map_err(|_| Error::format(path, format!("bad {what} {t:?}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(Error::format(
            path,
            format!("maxval must be 255, found {maxval}"),
        ));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = pos + 1;
    let len = width * height;
    if bytes.len() < start + len {
        return Err(Error::format(
            path,
            format!(
                "raster has {} bytes, expected {len}",
                bytes.len().saturating_sub(start)
            ),
        ));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: bytes[start..start + len].to_vec(),
    })
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

pub fn write_pgm(path: impl AsRef<Path>, image: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    if image.pixels.len() != image.width * image.height {
        return Err(Error::ShapeMismatch(format!(
            "{} pixels for a {}x{} image",
            image.pixels.len(),
            image.width,
            image.height
        )));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_pgm(image))
        .map_err(|e| Error::io(path, e))
}

/// Images loaded from a directory, flattened row-major into samples.
#[derive(Debug, Clone)]
pub struct ImageSet {
    pub dataset: Dataset,
    pub width: usize,
    pub height: usize,
    pub files: Vec<PathBuf>,
}

/// Loads every `*.pgm` in `dir` in lexicographic filename order.
pub fn load_pgm_dir(dir: impl AsRef<Path>) -> Result<ImageSet> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::format(dir, "no .pgm files found"));
    }
    let mut dims: Option<(usize, usize)> = None;
    let mut values = Vec::new();
    for f in &files {
        let img = read_pgm(f)?;
        match dims {
            None => dims = Some((img.width, img.height)),
            Some(d) if d != (img.width, img.height) => {
                return Err(Error::format(
                    f,
                    format!(
                        "image is {}x{}, expected {}x{}",
                        img.width, img.height, d.0, d.1
                    ),
                ));
            }
            _ => {}
        }
        values.extend(img.pixels.iter().map(|&p| i64::from(p)));
    }
    let (width, height) = dims.expect("at least one file");
    let dataset = Dataset::new(files.len(), width * height, values)?;
    Ok(ImageSet {
        dataset,
        width,
        height,
        files,
    })
}
