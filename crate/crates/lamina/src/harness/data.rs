use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// A labelled dataset: flattened rows scaled to [0, 1] plus class indices.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            images: self.images.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// Deterministic subset: the first `n` entries of a seeded permutation.
    pub fn subset(&self, n: usize, rng: &mut Rng) -> Result<Dataset> {
        if n > self.len() {
            return Err(Error::Config(format!(
                "subset of {n} requested from a dataset of {}",
                self.len()
            )));
        }
        let perm = rng.permutation(self.len());
        Ok(self.select(&perm[..n]))
    }
}

struct ByteReader {
    bytes: Vec<u8>,
    offset: usize,
}

impl ByteReader {
    fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(ByteReader { bytes, offset: 0 })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::Format {
                offset: self.offset as u64,
                message: format!(
                    "truncated file: needed {n} bytes for {what}, {} remain",
                    self.bytes.len() - self.offset
                ),
            });
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parse a big-endian IDX image file into a `[count, rows·cols]` matrix with
/// pixels scaled to [0, 1].
pub fn load_idx_images(path: &Path) -> Result<Matrix> {
    let mut r = ByteReader::open(path)?;
    let magic = r.read_u32("image magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let count = r.read_u32("image count")? as usize;
    let rows = r.read_u32("image rows")? as usize;
    let cols = r.read_u32("image cols")? as usize;
    let pixels = r.take(count * rows * cols, "pixel data")?;
    let data: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    Matrix::new(count, rows * cols, data)
}

/// Parse a big-endian IDX label file.
pub fn load_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let mut r = ByteReader::open(path)?;
    let magic = r.read_u32("label magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let count = r.read_u32("label count")? as usize;
    let labels = r.take(count, "label data")?;
    Ok(labels.iter().map(|&b| b as usize).collect())
}

/// Load a matching image/label pair, validating that the counts agree.
pub fn load_idx_pair(images: &Path, labels: &Path) -> Result<Dataset> {
    let images_m = load_idx_images(images)?;
    let labels_v = load_idx_labels(labels)?;
    if images_m.rows() != labels_v.len() {
        return Err(Error::Format {
            offset: 4,
            message: format!(
                "{} images but {} labels",
                images_m.rows(),
                labels_v.len()
            ),
        });
    }
    let classes = labels_v.iter().copied().max().map_or(0, |m| m + 1);
    Ok(Dataset {
        images: images_m,
        labels: labels_v,
        classes,
    })
}

/// Load the four canonical files under `dir`: train/t10k images and labels.
pub fn load_mnist_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train = load_idx_pair(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    let test = load_idx_pair(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    Ok((train, test))
}

/// Well-separated gaussian class blobs, shuffled; linearly separable for
/// small noise relative to the center spread.
pub fn synthetic_blobs(
    n: usize,
    features: usize,
    classes: usize,
    noise_std: f64,
    rng: &mut Rng,
) -> Dataset {
    let mut centers = Vec::with_capacity(classes);
    let mut center_rng = rng.child("centers");
    for _ in 0..classes {
        centers.push(center_rng.gaussian(1, features, 0.0, 3.0));
    }
    let mut images = Matrix::zeros(n, features);
    let mut labels = Vec::with_capacity(n);
    let mut noise_rng = rng.child("noise");
    let order = rng.child("order").permutation(n);
    for (row, &slot) in order.iter().enumerate() {
        let class = slot % classes;
        labels.push(class);
        for j in 0..features {
            let v = centers[class].get(0, j) + noise_rng.normal(0.0, noise_std);
            images.set(row, j, v);
        }
    }
    Dataset {
        images,
        labels,
        classes,
    }
}
