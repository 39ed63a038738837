//! IDX image/label decoding (the MNIST container format): big-endian magic
//! and dimension header, unsigned-byte payload, decoded bit-exactly.

use std::path::Path;

use ndarray::Array2;

use super::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::stats::LabeledTrainingSet;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::format(format!("file truncated while reading {what}")));
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

struct IdxImages {
    count: usize,
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

fn parse_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_be_u32(bytes, 0, "images magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(format!("bad images magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}")));
    }
    let count = read_be_u32(bytes, 4, "image count")? as usize;
    let rows = read_be_u32(bytes, 8, "row count")? as usize;
    let cols = read_be_u32(bytes, 12, "column count")? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(Error::format(format!(
            "image payload is {} bytes, header implies {}",
            bytes.len() - 16.min(bytes.len()),
            expected - 16
        )));
    }
    Ok(IdxImages { count, rows, cols, pixels: bytes[16..].to_vec() })
}

fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_be_u32(bytes, 0, "labels magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(format!("bad labels magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}")));
    }
    let count = read_be_u32(bytes, 4, "label count")? as usize;
    if bytes.len() != 8 + count {
        return Err(Error::format(format!(
            "label payload is {} bytes, header implies {count}",
            bytes.len() - 8.min(bytes.len())
        )));
    }
    Ok(bytes[8..].to_vec())
}

/// Loads an IDX image/label pair and keeps only the two requested digits;
/// the first digit of the pair becomes class 0. Images are vectorized
/// row-major into length `rows·cols` sample vectors of raw pixel values.
///
/// The loaded samples land in the training pool; the test pools start
/// empty (MNIST ships its test partition as a second file pair).
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    digit_pair: (u8, u8),
) -> Result<Dataset> {
    let images_bytes = std::fs::read(images_path.as_ref())?;
    let labels_bytes = std::fs::read(labels_path.as_ref())?;
    let images = parse_images(&images_bytes)?;
    let labels = parse_labels(&labels_bytes)?;
    if labels.len() != images.count {
        return Err(Error::format(format!(
            "{} labels for {} images",
            labels.len(),
            images.count
        )));
    }

    let p = images.rows * images.cols;
    let (d0, d1) = digit_pair;
    let mut class0: Vec<f64> = Vec::new();
    let mut class1: Vec<f64> = Vec::new();
    let mut n0 = 0usize;
    let mut n1 = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        let dst = if label == d0 {
            n0 += 1;
            &mut class0
        } else if label == d1 {
            n1 += 1;
            &mut class1
        } else {
            continue;
        };
        let start = i * p;
        dst.extend(images.pixels[start..start + p].iter().map(|&b| b as f64));
    }
    if n0 == 0 || n1 == 0 {
        return Err(Error::invalid(format!(
            "digit pair ({d0}, {d1}) not present in the label file (found {n0} and {n1})"
        )));
    }

    let train = LabeledTrainingSet::new(
        Array2::from_shape_vec((n0, p), class0).expect("row-major fill"),
        Array2::from_shape_vec((n1, p), class1).expect("row-major fill"),
    )?;
    Ok(Dataset {
        train,
        test0: Array2::zeros((0, p)),
        test1: Array2::zeros((0, p)),
        meta: DatasetMeta {
            name: format!("idx-{d0}-{d1}"),
            source: format!(
                "{} + {}",
                images_path.as_ref().display(),
                labels_path.as_ref().display()
            ),
            dim: p,
            scaling: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_images(path: &Path, count: u32, rows: u32, cols: u32, pixels: &[u8]) {
        let mut f = std::fs::File::create(path).unwrap();
        f.write_all(&IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&count.to_be_bytes()).unwrap();
        f.write_all(&rows.to_be_bytes()).unwrap();
        f.write_all(&cols.to_be_bytes()).unwrap();
        f.write_all(pixels).unwrap();
    }

    fn write_labels(path: &Path, labels: &[u8]) {
        let mut f = std::fs::File::create(path).unwrap();
        f.write_all(&LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(labels).unwrap();
    }

    #[test]
    fn four_image_fixture_splits_by_digit() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("images");
        let lab = dir.path().join("labels");
        // 4 images of 2x2, pixel value = 10·index + offset
        let pixels: Vec<u8> = (0..16).map(|i| (i * 3) as u8).collect();
        write_images(&img, 4, 2, 2, &pixels);
        write_labels(&lab, &[1, 7, 1, 7]);

        let ds = load_idx(&img, &lab, (1, 7)).unwrap();
        assert_eq!(ds.train.n0(), 2);
        assert_eq!(ds.train.n1(), 2);
        assert_eq!(ds.dim(), 4);
        // first class-0 row is image 0, row-major
        assert_eq!(
            ds.train.class0().row(0).to_vec(),
            vec![0.0, 3.0, 6.0, 9.0]
        );
        // swapped pair flips the class mapping
        let ds = load_idx(&img, &lab, (7, 1)).unwrap();
        assert_eq!(ds.train.class0().row(0).to_vec(), vec![12.0, 15.0, 18.0, 21.0]);
    }

    #[test]
    fn absent_digits_are_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("images");
        let lab = dir.path().join("labels");
        write_images(&img, 4, 2, 2, &[0u8; 16]);
        write_labels(&lab, &[1, 7, 1, 7]);
        assert!(matches!(load_idx(&img, &lab, (3, 5)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn big_endian_header_gives_mnist_dimension() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("images");
        let lab = dir.path().join("labels");
        write_images(&img, 2, 28, 28, &[7u8; 2 * 784]);
        write_labels(&lab, &[0, 9]);
        let ds = load_idx(&img, &lab, (0, 9)).unwrap();
        assert_eq!(ds.dim(), 784);
    }

    #[test]
    fn bad_magic_and_truncation_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("images");
        let lab = dir.path().join("labels");

        std::fs::write(&img, 0x0000_0801u32.to_be_bytes()).unwrap(); // wrong magic
        write_labels(&lab, &[1, 7]);
        assert!(matches!(load_idx(&img, &lab, (1, 7)), Err(Error::Format(_))));

        write_images(&img, 4, 2, 2, &[0u8; 10]); // payload shorter than header claims
        assert!(matches!(load_idx(&img, &lab, (1, 7)), Err(Error::Format(_))));

        write_images(&img, 2, 2, 2, &[0u8; 8]);
        write_labels(&lab, &[1, 7, 1]); // count mismatch with images
        assert!(matches!(load_idx(&img, &lab, (1, 7)), Err(Error::Format(_))));
    }
}
