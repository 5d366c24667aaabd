//! File formats: headerless CSV matrices, 8-bit binary PGM images, ORL-style
//! face directories and the visual dumps written by the harness.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use ndarray::{Array2, ArrayView2, ArrayView3, Axis};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::solver::fmt_num;

/// Reads a comma-separated matrix without header.
pub fn read_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        if cols.is_some_and(|c| c != rec.len()) {
            return Err(Error::Data(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                line + 1,
                rec.len(),
                cols.unwrap_or(0)
            )));
        }
        cols = Some(rec.len());
        for field in rec.iter() {
            data.push(field.parse::<f64>().map_err(|_| {
                Error::Data(format!(
                    "{}: row {}: cannot parse '{field}'",
                    path.display(),
                    line + 1
                ))
            })?);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Data(format!("{} is empty", path.display())))?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Data(e.to_string()))
}

/// Writes a matrix as headerless CSV with 17 significant digits.
pub fn write_csv_matrix(path: &Path, m: ArrayView2<'_, f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for row in m.rows() {
        w.write_record(row.iter().map(|&v| fmt_num(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a grayscale PNM image into `[0, 1]`.
pub fn read_pgm(path: &Path) -> Result<Array2<f64>> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = img.to_luma32f();
    Array2::from_shape_vec((h, w), gray.into_raw().into_iter().map(f64::from).collect())
        .map_err(|e| Error::Data(e.to_string()))
}

/// Writes `[0, 1]` data as a binary 8-bit PGM (values are clamped).
pub fn write_pgm(path: &Path, img: ArrayView2<'_, f64>) -> Result<()> {
    let (h, w) = img.dim();
    let bytes: Vec<u8> = img
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let file = BufWriter::new(File::create(path)?);
    PnmEncoder::new(file)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&bytes, w as u32, h as u32, ExtendedColorType::L8)?;
    Ok(())
}

/// Affine rescale of all entries to `[0, 1]`; constant input maps to 0.
pub fn normalize01(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let (lo, hi) = m
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi > lo {
        m.mapv(|v| (v - lo) / (hi - lo))
    } else {
        Array2::zeros(m.raw_dim())
    }
}

/// Face images loaded as matrix columns.
#[derive(Debug, Clone)]
pub struct FaceSet {
    /// One flattened image (row-major) per column, values in `[0, 1]`.
    pub data: Array2<f64>,
    pub height: usize,
    pub width: usize,
    pub files: Vec<PathBuf>,
}

/// Loads every `*.pgm` below `dir` (sorted by path); all images must share
/// one size.
pub fn load_face_dir(dir: &Path) -> Result<FaceSet> {
    let mut files: Vec<PathBuf> = WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            p.extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!("no .pgm files under {}", dir.display())));
    }
    let first = read_pgm(&files[0])?;
    let (height, width) = first.dim();
    let mut data = Array2::zeros((height * width, files.len()));
    for (j, path) in files.iter().enumerate() {
        let img = if j == 0 { first.clone() } else { read_pgm(path)? };
        if img.dim() != (height, width) {
            return Err(Error::Data(format!(
                "{} is {:?}, expected {:?}",
                path.display(),
                img.dim(),
                (height, width)
            )));
        }
        data.column_mut(j)
            .iter_mut()
            .zip(img.iter())
            .for_each(|(d, v)| *d = *v);
    }
    Ok(FaceSet {
        data,
        height,
        width,
        files,
    })
}

/// Writes each column of `b` as a `height×width` PGM scaled to `[0, 255]`
/// (`basis_000.pgm`, ...). Returns the written paths.
pub fn dump_basis_images(
    dir: &Path,
    b: ArrayView2<'_, f64>,
    height: usize,
    width: usize,
) -> Result<Vec<PathBuf>> {
    if b.nrows() != height * width {
        return Err(Error::Shape(format!(
            "basis has {} rows, image is {height}x{width}",
            b.nrows()
        )));
    }
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (j, col) in b.axis_iter(Axis(1)).enumerate() {
        let img = Array2::from_shape_vec((height, width), col.to_vec())
            .map_err(|e| Error::Shape(e.to_string()))?;
        let path = dir.join(format!("basis_{j:03}.pgm"));
        write_pgm(&path, normalize01(img.view()).view())?;
        out.push(path);
    }
    Ok(out)
}

/// Tiles a filter stack into one image, each filter normalized to
/// `[0, 1]`, separated by one-pixel gaps.
pub fn filter_mosaic(filters: ArrayView3<'_, f64>) -> Array2<f64> {
    let (p, h, w) = filters.dim();
    let cols = (p as f64).sqrt().ceil().max(1.0) as usize;
    let rows = p.div_ceil(cols).max(1);
    let mut out = Array2::zeros((rows * (h + 1) + 1, cols * (w + 1) + 1));
    for (idx, f) in filters.outer_iter().enumerate() {
        let (r, c) = (idx / cols, idx % cols);
        let tile = normalize01(f);
        let (oi, oj) = (1 + r * (h + 1), 1 + c * (w + 1));
        out.slice_mut(ndarray::s![oi..oi + h, oj..oj + w]).assign(&tile);
    }
    out
}

/// `filter,nonzeros,total,fraction` per coefficient image.
pub fn write_sparsity_report(path: &Path, coeffs: ArrayView3<'_, f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "filter,nonzeros,total,fraction")?;
    for (j, v) in coeffs.outer_iter().enumerate() {
        let nnz = v.iter().filter(|x| **x != 0.0).count();
        writeln!(w, "{j},{nnz},{},{}", v.len(), fmt_num(nnz as f64 / v.len() as f64))?;
    }
    Ok(())
}

/// Kernel written scaled so that its maximum maps to 255.
pub fn write_kernel_pgm(path: &Path, k: ArrayView2<'_, f64>) -> Result<()> {
    let max = k.iter().cloned().fold(0.0f64, f64::max);
    let scaled = if max > 0.0 {
        k.mapv(|v| v / max)
    } else {
        Array2::zeros(k.raw_dim())
    };
    write_pgm(path, scaled.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn csv_roundtrip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = arr2(&[[0.1, 1.0 / 3.0], [-2.5e-300, 7.0]]);
        write_csv_matrix(&p, m.view()).unwrap();
        assert_eq!(read_csv_matrix(&p).unwrap(), m);
    }

    #[test]
    fn csv_ragged_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, "1,2\n3\n").unwrap();
        assert!(matches!(read_csv_matrix(&p), Err(Error::Data(_))));
        std::fs::write(&p, "1,x\n").unwrap();
        assert!(read_csv_matrix(&p).is_err());
    }

    #[test]
    fn pgm_roundtrip_8bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let img = Array2::from_shape_fn((3, 4), |(i, j)| (i * 4 + j) as f64 * 20.0 / 255.0);
        write_pgm(&p, img.view()).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..2], b"P5");
        let back = read_pgm(&p).unwrap();
        for (a, b) in img.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn face_dir_and_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("s1");
        std::fs::create_dir_all(&sub).unwrap();
        for k in 0..3 {
            let img = Array2::from_elem((2, 3), k as f64 / 4.0);
            write_pgm(&sub.join(format!("{k}.pgm")), img.view()).unwrap();
        }
        let set = load_face_dir(dir.path()).unwrap();
        assert_eq!(set.data.dim(), (6, 3));
        assert_eq!((set.height, set.width), (2, 3));
        assert!((set.data[[0, 2]] - 0.5).abs() < 1e-2);
        let paths = dump_basis_images(&dir.path().join("out"), set.data.view(), 2, 3).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(load_face_dir(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn mosaic_shape() {
        let f = ndarray::Array3::from_shape_fn((5, 3, 3), |(a, b, c)| (a + b * c) as f64);
        let m = filter_mosaic(f.view());
        assert_eq!(m.dim(), (2 * 4 + 1, 3 * 4 + 1));
        assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
