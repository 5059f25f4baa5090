//! Desk-scale datasets: a deterministic synthetic spiral generator, an IDX
//! image-file ingester, and seeded epoch batching.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::Sample;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub num_classes: usize,
    pub name: String,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    /// Copies the samples at `indices`, in order.
    pub fn gather(&self, indices: &[usize]) -> Vec<Sample> {
        indices.iter().map(|&i| self.samples[i].clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Domain("dataset needs at least 2 classes".into()));
        }
        for s in &self.samples {
            if s.label >= self.num_classes {
                return Err(Error::Domain(format!(
                    "label {} out of range for {} classes",
                    s.label, self.num_classes
                )));
            }
        }
        Ok(())
    }
}

/// Interleaved spiral arms: class c draws radius r ~ U[0.2, 1] and sits at
/// angle 4πr + 2πc/C, with N(0, σ²) noise added to each coordinate.
/// Deterministic per seed.
pub fn gen_spirals(
    n_per_class: usize,
    num_classes: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::Domain("n_per_class must be at least 1".into()));
    }
    if num_classes < 2 {
        return Err(Error::Domain("num_classes must be at least 2".into()));
    }
    if noise_sigma < 0.0 {
        return Err(Error::Domain("noise_sigma must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_per_class * num_classes);
    let two_pi = 2.0 * std::f64::consts::PI;
    for class in 0..num_classes {
        let phase = two_pi * class as f64 / num_classes as f64;
        for _ in 0..n_per_class {
            let r = 0.2 + 0.8 * rng.gen::<f64>();
            let theta = 2.0 * two_pi * r + phase;
            let n1: f64 = StandardNormal.sample(&mut rng);
            let n2: f64 = StandardNormal.sample(&mut rng);
            samples.push(Sample::new(
                vec![
                    r * theta.cos() + noise_sigma * n1,
                    r * theta.sin() + noise_sigma * n2,
                ],
                class,
            ));
        }
    }
    Ok(Dataset {
        samples,
        num_classes,
        name: "spirals".into(),
        split: Split::Train,
    })
}

fn read_be_u32(cursor: &mut Cursor<&[u8]>, what: &str) -> Result<u32> {
    cursor.read_u32::<BigEndian>().map_err(|_| {
        Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("truncated IDX file while reading {what}"),
        ))
    })
}

/// Loads an IDX image/label file pair (big-endian magic and dimensions,
/// row-major unsigned bytes). Pixels are scaled to [0, 1]; at most `limit`
/// samples are kept when given.
pub fn load_idx_images(
    image_path: &Path,
    label_path: &Path,
    limit: Option<usize>,
) -> Result<Dataset> {
    let image_bytes = fs::read(image_path)?;
    let label_bytes = fs::read(label_path)?;

    let mut img = Cursor::new(image_bytes.as_slice());
    let magic = read_be_u32(&mut img, "image magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "bad image magic 0x{magic:08x} (expected 0x{IDX_IMAGES_MAGIC:08x})"
        )));
    }
    let count = read_be_u32(&mut img, "image count")? as usize;
    let rows = read_be_u32(&mut img, "image rows")? as usize;
    let cols = read_be_u32(&mut img, "image cols")? as usize;

    let mut lab = Cursor::new(label_bytes.as_slice());
    let label_magic = read_be_u32(&mut lab, "label magic")?;
    if label_magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "bad label magic 0x{label_magic:08x} (expected 0x{IDX_LABELS_MAGIC:08x})"
        )));
    }
    let label_count = read_be_u32(&mut lab, "label count")? as usize;
    if label_count != count {
        return Err(Error::Format(format!(
            "image/label count mismatch: {count} images vs {label_count} labels"
        )));
    }

    let take = limit.map_or(count, |l| l.min(count));
    let pixels_per_image = rows * cols;
    let mut samples = Vec::with_capacity(take);
    let mut pixel_buf = vec![0u8; pixels_per_image];
    let mut max_label = 0usize;
    for _ in 0..take {
        img.read_exact(&mut pixel_buf).map_err(|_| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "truncated IDX image data",
            ))
        })?;
        let mut label_byte = [0u8; 1];
        lab.read_exact(&mut label_byte).map_err(|_| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "truncated IDX label data",
            ))
        })?;
        let label = label_byte[0] as usize;
        max_label = max_label.max(label);
        samples.push(Sample::new(
            pixel_buf.iter().map(|&b| b as f64 / 255.0).collect(),
            label,
        ));
    }

    let name = image_path
        .file_stem()
        .map_or_else(|| "idx".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(Dataset {
        samples,
        num_classes: (max_label + 1).max(2),
        name,
        split: Split::Train,
    })
}

/// Seeded shuffle of the dataset indices, chunked into batches of
/// `batch_size` (the last batch may be smaller). Every sample appears in
/// exactly one batch.
pub fn epoch_batches(ds: &Dataset, batch_size: usize, epoch_seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Domain("batch_size must be at least 1".into()));
    }
    let mut indices: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
    indices.shuffle(&mut rng);
    Ok(indices.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spirals_deterministic_and_labelled() {
        let a = gen_spirals(20, 3, 0.1, 7).unwrap();
        let b = gen_spirals(20, 3, 0.1, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 60);
        assert_eq!(a.feature_dim(), 2);
        a.validate().unwrap();
        // Different seed, different points.
        let c = gen_spirals(20, 3, 0.1, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_spirals_have_bounded_radius() {
        let ds = gen_spirals(50, 2, 0.0, 3).unwrap();
        for s in &ds.samples {
            let r = (s.features[0].powi(2) + s.features[1].powi(2)).sqrt();
            assert!((0.2..=1.0 + 1e-12).contains(&r), "radius {r}");
        }
    }

    #[test]
    fn spirals_rejects_degenerate_parameters() {
        assert!(gen_spirals(0, 2, 0.0, 1).is_err());
        assert!(gen_spirals(5, 1, 0.0, 1).is_err());
        assert!(gen_spirals(5, 2, -0.1, 1).is_err());
    }

    #[test]
    fn epoch_batches_sizes_and_coverage() {
        let ds = gen_spirals(5, 2, 0.0, 1).unwrap();
        let batches = epoch_batches(&ds, 4, 11).unwrap();
        let sizes: Vec<usize> = batches.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn epoch_batches_deterministic_per_seed() {
        let ds = gen_spirals(10, 2, 0.0, 1).unwrap();
        assert_eq!(
            epoch_batches(&ds, 3, 5).unwrap(),
            epoch_batches(&ds, 3, 5).unwrap()
        );
        assert_ne!(
            epoch_batches(&ds, 3, 5).unwrap(),
            epoch_batches(&ds, 3, 6).unwrap()
        );
    }

    proptest! {
        #[test]
        fn epoch_batches_partition_property(n in 1usize..200, batch in 1usize..40, seed: u64) {
            let samples = (0..n).map(|i| Sample::new(vec![i as f64], i % 2)).collect();
            let ds = Dataset { samples, num_classes: 2, name: "p".into(), split: Split::Train };
            let batches = epoch_batches(&ds, batch, seed).unwrap();
            // all but the last are full
            for b in batches.iter().take(batches.len().saturating_sub(1)) {
                prop_assert_eq!(b.len(), batch.min(n));
            }
            let mut all: Vec<usize> = batches.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    // ---- IDX fixtures ----

    fn idx_image_bytes(images: &[[u8; 4]]) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        for img in images {
            bytes.extend_from_slice(img);
        }
        bytes
    }

    fn idx_label_bytes(labels: &[u8]) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        bytes.extend_from_slice(labels);
        bytes
    }

    fn write_pair(dir: &tempfile::TempDir, images: &[u8], labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let ip = dir.path().join("images.idx");
        let lp = dir.path().join("labels.idx");
        fs::write(&ip, images).unwrap();
        fs::write(&lp, labels).unwrap();
        (ip, lp)
    }

    #[test]
    fn idx_round_trip_exact_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let images = [[0u8, 51, 102, 255], [255, 204, 153, 0]];
        let (ip, lp) = write_pair(&dir, &idx_image_bytes(&images), &idx_label_bytes(&[7, 2]));
        let ds = load_idx_images(&ip, &lp, None).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.feature_dim(), 4);
        assert_eq!(
            ds.samples[0].features,
            vec![0.0, 51.0 / 255.0, 102.0 / 255.0, 1.0]
        );
        assert_eq!(
            ds.samples[1].features,
            vec![1.0, 204.0 / 255.0, 153.0 / 255.0, 0.0]
        );
        assert_eq!(ds.samples[0].label, 7);
        assert_eq!(ds.samples[1].label, 2);
        assert_eq!(ds.num_classes, 8);
    }

    #[test]
    fn idx_limit_truncates() {
        let dir = tempfile::tempdir().unwrap();
        let images = [[1u8, 2, 3, 4], [5, 6, 7, 8], [9, 10, 11, 12]];
        let (ip, lp) = write_pair(&dir, &idx_image_bytes(&images), &idx_label_bytes(&[0, 1, 1]));
        let ds = load_idx_images(&ip, &lp, Some(2)).unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn idx_wrong_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        // Label magic in the image slot.
        let mut bad = idx_image_bytes(&[[0u8; 4]]);
        bad[..4].copy_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        let (ip, lp) = write_pair(&dir, &bad, &idx_label_bytes(&[0]));
        assert!(matches!(
            load_idx_images(&ip, &lp, None),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn idx_count_mismatch_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_pair(
            &dir,
            &idx_image_bytes(&[[0u8; 4], [1u8; 4]]),
            &idx_label_bytes(&[0]),
        );
        assert!(matches!(
            load_idx_images(&ip, &lp, None),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn idx_truncated_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut truncated = idx_image_bytes(&[[0u8; 4], [1u8; 4]]);
        truncated.truncate(truncated.len() - 3);
        let (ip, lp) = write_pair(&dir, &truncated, &idx_label_bytes(&[0, 1]));
        assert!(matches!(load_idx_images(&ip, &lp, None), Err(Error::Io(_))));
    }
}
