//! Dataset ingestion: IDX files (the MNIST-family container) and the
//! synthetic ground-truth-recovery benchmark.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// One example: features in [0, 1], and optionally a class label and/or a
/// reconstruction target (for image tasks the target is the features).
#[derive(Debug, Clone, PartialEq)]
pub struct DataExample {
    pub features: Vec<f64>,
    pub label: Option<usize>,
    pub target: Option<Vec<f64>>,
}

/// Requested sizes for the train/validation/test splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// A split dataset plus the facts the harness derives from it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<DataExample>,
    pub val: Vec<DataExample>,
    pub test: Vec<DataExample>,
    pub feature_dim: usize,
    /// Number of classes (max label + 1) when labels are present.
    pub classes: Option<usize>,
}

/// Tracks the byte offset while reading so parse errors can name it.
struct OffsetReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> OffsetReader<R> {
    fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    fn read_exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::IdxParse {
                offset: self.offset,
                message: format!("unexpected end of file while reading {what}"),
            }),
            Err(e) => Err(e.into()),
        }
    }

    fn read_u32_be(&mut self, what: &str) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.read_exact(&mut buf, what)?;
        Ok(u32::from_be_bytes(buf))
    }
}

/// Raw IDX image file: (images as flat u8 rows, rows, cols).
pub fn load_idx_images(path: &Path) -> Result<(Vec<Vec<u8>>, usize, usize)> {
    let mut r = OffsetReader::new(BufReader::new(File::open(path)?));
    let magic = r.read_u32_be("image magic number")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxParse {
            offset: 0,
            message: format!("bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"),
        });
    }
    let count = r.read_u32_be("image count")? as usize;
    let rows = r.read_u32_be("row count")? as usize;
    let cols = r.read_u32_be("column count")? as usize;
    let mut images = Vec::with_capacity(count);
    let mut buf = vec![0u8; rows * cols];
    for i in 0..count {
        r.read_exact(&mut buf, &format!("pixels of image {i}"))?;
        images.push(buf.clone());
    }
    Ok((images, rows, cols))
}

/// Raw IDX label file.
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let mut r = OffsetReader::new(BufReader::new(File::open(path)?));
    let magic = r.read_u32_be("label magic number")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::IdxParse {
            offset: 0,
            message: format!("bad label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"),
        });
    }
    let count = r.read_u32_be("label count")? as usize;
    let mut labels = vec![0u8; count];
    r.read_exact(&mut labels, "label bytes")?;
    Ok(labels)
}

/// Writes an IDX image file (bit-exact counterpart of [`load_idx_images`]).
pub fn write_idx_images(path: &Path, images: &[Vec<u8>], rows: usize, cols: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    w.write_all(&(images.len() as u32).to_be_bytes())?;
    w.write_all(&(rows as u32).to_be_bytes())?;
    w.write_all(&(cols as u32).to_be_bytes())?;
    for (i, image) in images.iter().enumerate() {
        if image.len() != rows * cols {
            return Err(Error::Config(format!(
                "image {i} has {} pixels, expected {}",
                image.len(),
                rows * cols
            )));
        }
        w.write_all(image)?;
    }
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)?;
    Ok(())
}

/// Loads paired IDX image/label files, scales pixels to [0, 1], shuffles
/// deterministically by seed, and splits. Every example carries both its
/// label and a reconstruction target equal to its features.
pub fn load_idx_dataset(
    images_path: &Path,
    labels_path: &Path,
    splits: SplitSizes,
    seed: u64,
) -> Result<Dataset> {
    let (images, rows, cols) = load_idx_images(images_path)?;
    let labels = load_idx_labels(labels_path)?;
    if images.len() != labels.len() {
        return Err(Error::Config(format!(
            "image count {} does not match label count {}",
            images.len(),
            labels.len()
        )));
    }
    if splits.total() > images.len() {
        return Err(Error::Config(format!(
            "splits need {} examples but the files hold {}",
            splits.total(),
            images.len()
        )));
    }
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let make = |idx: &[usize]| -> Vec<DataExample> {
        idx.iter()
            .map(|&i| {
                let features: Vec<f64> = images[i].iter().map(|&p| p as f64 / 255.0).collect();
                DataExample {
                    target: Some(features.clone()),
                    label: Some(labels[i] as usize),
                    features,
                }
            })
            .collect()
    };
    let train = make(&order[..splits.train]);
    let val = make(&order[splits.train..splits.train + splits.val]);
    let test = make(&order[splits.train + splits.val..splits.total()]);
    let classes = labels.iter().copied().max().map(|m| m as usize + 1);
    Ok(Dataset {
        train,
        val,
        test,
        feature_dim: rows * cols,
        classes,
    })
}

/// Synthetic ground-truth-recovery benchmark.
///
/// Features are i.i.d. Uniform[0,1] (so every feature is marginally
/// identically distributed); the binary label depends on the informative
/// features only: 1 when their sum exceeds half their count. Bayes-optimal
/// accuracy from the informative features alone is therefore 1.
pub fn make_synthetic(
    n: usize,
    informative: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<DataExample>> {
    if informative.is_empty() || informative.len() >= n {
        return Err(Error::Config(format!(
            "need 0 < |informative| < n, got {} of {n}",
            informative.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in informative {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        if seen[i] {
            return Err(Error::Config(format!("duplicate informative index {i}")));
        }
        seen[i] = true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let threshold = informative.len() as f64 / 2.0;
    Ok((0..samples)
        .map(|_| {
            let features: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let label = usize::from(synthetic_sum(&features, informative) > threshold);
            DataExample {
                target: Some(features.clone()),
                label: Some(label),
                features,
            }
        })
        .collect())
}

/// The labeling statistic: sum of the informative features.
pub fn synthetic_sum(features: &[f64], informative: &[usize]) -> f64 {
    informative.iter().map(|&i| features[i]).sum()
}

/// Splits an example list in order (callers shuffle beforehand if needed).
pub fn split_examples(
    mut examples: Vec<DataExample>,
    splits: SplitSizes,
) -> Result<(Vec<DataExample>, Vec<DataExample>, Vec<DataExample>)> {
    if splits.total() > examples.len() {
        return Err(Error::Config(format!(
            "splits need {} examples but only {} were generated",
            splits.total(),
            examples.len()
        )));
    }
    let test = examples.split_off(splits.train + splits.val);
    let val = examples.split_off(splits.train);
    examples.truncate(splits.train);
    Ok((examples, val, test.into_iter().take(splits.test).collect()))
}
