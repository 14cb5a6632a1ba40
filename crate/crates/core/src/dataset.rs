//! Image-block corpus ingestion and the repeated 90/10 train/test protocol.
//!
//! A corpus root holds two subdirectories, `authentic/` and `spliced/`, of
//! 8-bit grayscale 128x128 blocks in PGM or PNG format. Files that do not
//! meet that contract are skipped and listed in a [`LoadReport`].

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const BLOCK_SIZE: usize = 128;
pub const AUTHENTIC_DIR: &str = "authentic";
pub const SPLICED_DIR: &str = "spliced";
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.9;
pub const MIN_SPLIT_SIZE: usize = 10;
const CLASS_PRESENCE_RETRIES: usize = 100;

/// Ground truth of a block. Authentic blocks carry label 1, spliced blocks 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Forged = 0,
    Authentic = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Forged),
            1 => Some(Label::Authentic),
            _ => None,
        }
    }

    /// SVM sign convention: authentic is the positive class.
    pub fn sign(self) -> f64 {
        match self {
            Label::Authentic => 1.0,
            Label::Forged => -1.0,
        }
    }

    pub fn is_authentic(self) -> bool {
        self == Label::Authentic
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Authentic => f.write_str("authentic"),
            Label::Forged => f.write_str("forged"),
        }
    }
}

/// Anything that can take part in a split.
pub trait Sample {
    fn id(&self) -> &str;
    fn label(&self) -> Label;
}

/// A validated 128x128 grayscale block.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBlock {
    id: String,
    pixels: Matrix<u8>,
    label: Label,
}

impl ImageBlock {
    pub fn new(id: impl Into<String>, pixels: Matrix<u8>, label: Label) -> Result<Self> {
        if pixels.shape() != (BLOCK_SIZE, BLOCK_SIZE) {
            return Err(Error::Shape(format!(
                "block must be {BLOCK_SIZE}x{BLOCK_SIZE}, got {}x{}",
                pixels.rows(),
                pixels.cols()
            )));
        }
        Ok(ImageBlock {
            id: id.into(),
            pixels,
            label,
        })
    }

    pub fn pixels(&self) -> &Matrix<u8> {
        &self.pixels
    }
}

impl Sample for ImageBlock {
    fn id(&self) -> &str {
        &self.id
    }

    fn label(&self) -> Label {
        self.label
    }
}

/// Id and label only; what the training stage needs once features exist.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleKey {
    pub id: String,
    pub label: Label,
}

impl Sample for SampleKey {
    fn id(&self) -> &str {
        &self.id
    }

    fn label(&self) -> Label {
        self.label
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rejected: Vec<Rejection>,
}

impl LoadReport {
    pub fn is_empty(&self) -> bool {
        self.rejected.is_empty()
    }

    /// One `REJECTED <path> <reason>` line per skipped file.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.rejected {
            out.push_str(&format!("REJECTED {} {}\n", r.path.display(), r.reason));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub blocks: Vec<ImageBlock>,
    pub report: LoadReport,
}

/// Decodes a single 8-bit grayscale 128x128 PGM or PNG file.
pub fn read_block_pixels(path: &Path) -> std::result::Result<Matrix<u8>, String> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let format = match ext.as_deref() {
        Some("png") => image::ImageFormat::Png,
        Some("pgm") => image::ImageFormat::Pnm,
        _ => return Err("unsupported format (expected .pgm or .png)".to_string()),
    };
    let bytes = fs::read(path).map_err(|e| format!("unreadable: {e}"))?;
    let img = image::load_from_memory_with_format(&bytes, format).map_err(|e| format!("decode failed: {e}"))?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => return Err(format!("not 8-bit grayscale ({:?})", other.color())),
    };
    let (w, h) = gray.dimensions();
    if (w as usize, h as usize) != (BLOCK_SIZE, BLOCK_SIZE) {
        return Err(format!("wrong dimensions {w}x{h}"));
    }
    Matrix::from_vec(BLOCK_SIZE, BLOCK_SIZE, gray.into_raw()).map_err(|e| e.to_string())
}

fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("{}", dir.display()), e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(format!("{}", dir.display()), e))?;
        let path = entry.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every valid block under `root/authentic` and `root/spliced`.
///
/// Blocks are ordered by id, which is `<subdir>/<file name>`.
pub fn load_corpus(root: &Path) -> Result<Corpus> {
    let mut blocks = Vec::new();
    let mut report = LoadReport::default();
    for (sub, label) in [(AUTHENTIC_DIR, Label::Authentic), (SPLICED_DIR, Label::Forged)] {
        let dir = root.join(sub);
        if !dir.is_dir() {
            return Err(Error::CorpusLayout(format!("missing subdirectory {}", dir.display())));
        }
        for path in list_files(&dir)? {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            match read_block_pixels(&path) {
                Ok(pixels) => blocks.push(ImageBlock::new(format!("{sub}/{name}"), pixels, label)?),
                Err(reason) => report.rejected.push(Rejection { path, reason }),
            }
        }
    }
    blocks.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Corpus { blocks, report })
}

/// One run of the train/test protocol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    pub run_index: usize,
    pub seed: u64,
    /// Ids in corpus order.
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Mixes a base seed with run and attempt indices (splitmix64 finalizer).
pub fn derive_seed(seed: u64, run_index: usize, attempt: usize) -> u64 {
    let mut z = seed
        ^ (run_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (attempt as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Training-set size for a corpus of `n` items.
pub fn train_size(n: usize, train_fraction: f64) -> usize {
    (train_fraction * n as f64).round() as usize
}

/// Splits with the default 90% training fraction.
pub fn make_splits<S: Sample>(corpus: &[S], seed: u64, runs: usize) -> Result<Vec<SplitPlan>> {
    make_splits_with_fraction(corpus, seed, runs, DEFAULT_TRAIN_FRACTION)
}

/// Produces `runs` uniform random splits, run indices starting at 1.
///
/// When the corpus has both classes and the test set has room for two items,
/// each test set is required to contain both; a split that does not is redrawn with the next derived sub-seed.
pub fn make_splits_with_fraction<S: Sample>(
    corpus: &[S],
    seed: u64,
    runs: usize,
    train_fraction: f64,
) -> Result<Vec<SplitPlan>> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be >= 1".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = corpus.len();
    let n_train = train_size(n, train_fraction);
    if n < MIN_SPLIT_SIZE || n_train == 0 || n_train >= n {
        return Err(Error::SplitTooSmall(n));
    }
    // a one-item test set cannot hold both classes; skip the retry there
    let both_classes = n - n_train >= 2
        && corpus.iter().any(|s| s.label().is_authentic())
        && corpus.iter().any(|s| !s.label().is_authentic());

    let mut plans = Vec::with_capacity(runs);
    for run_index in 1..=runs {
        let mut chosen = None;
        for attempt in 0..CLASS_PRESENCE_RETRIES {
            let sub_seed = derive_seed(seed, run_index, attempt);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed));
            let mut is_train = vec![false; n];
            for &i in &order[..n_train] {
                is_train[i] = true;
            }
            let test_has_both = {
                let mut seen = HashSet::new();
                for (i, s) in corpus.iter().enumerate() {
                    if !is_train[i] {
                        seen.insert(s.label());
                    }
                }
                seen.len() == 2
            };
            if !both_classes || test_has_both {
                chosen = Some((sub_seed, is_train));
                break;
            }
        }
        let (sub_seed, is_train) = chosen.ok_or(Error::ClassPresence(CLASS_PRESENCE_RETRIES))?;
        let mut train_ids = Vec::with_capacity(n_train);
        let mut test_ids = Vec::with_capacity(n - n_train);
        for (i, s) in corpus.iter().enumerate() {
            if is_train[i] {
                train_ids.push(s.id().to_string());
            } else {
                test_ids.push(s.id().to_string());
            }
        }
        plans.push(SplitPlan {
            run_index,
            seed: sub_seed,
            train_ids,
            test_ids,
        });
    }
    Ok(plans)
}
