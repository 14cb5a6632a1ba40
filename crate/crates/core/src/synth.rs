//! Synthetic 128×128 grayscale blocks for tests and the self-test.
//!
//! Authentic blocks are smooth periodic textures with mild noise. Spliced
//! blocks start from such a texture and get a rectangle from a different
//! texture pasted in with hard edges.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{derive_seed, Label, AUTHENTIC_DIR, BLOCK_SIZE, SPLICED_DIR};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn smooth_texture(rng: &mut impl Rng) -> Matrix<f64> {
    let base = rng.gen_range(60.0..190.0);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.01..0.08),
                rng.gen_range(0.01..0.08),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(5.0..25.0),
            )
        })
        .collect();
    Matrix::from_fn(BLOCK_SIZE, BLOCK_SIZE, |r, c| {
        let mut v = base;
        for &(fr, fc, phase, amp) in &waves {
            v += amp * (fr * r as f64 + fc * c as f64 + phase).sin();
        }
        v + rng.gen_range(-3.0..3.0)
    })
}

fn to_bytes(m: &Matrix<f64>) -> Matrix<u8> {
    m.map(|&v| v.round().clamp(0.0, 255.0) as u8)
}

/// One synthetic block of the given class.
///
/// Some authentic blocks carry a natural step edge and some spliced blocks
/// get a smooth patch instead of a textured one, so the classes overlap.
pub fn synthetic_block(label: Label, rng: &mut impl Rng) -> Matrix<u8> {
    let mut m = smooth_texture(rng);
    match label {
        Label::Authentic => {
            if rng.gen_bool(0.3) {
                let shift = rng.gen_range(-40.0..40.0);
                let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let mid = BLOCK_SIZE as f64 / 2.0;
                for r in 0..BLOCK_SIZE {
                    for c in 0..BLOCK_SIZE {
                        if a * (r as f64 - mid) + b * (c as f64 - mid) > 0.0 {
                            m[(r, c)] += shift;
                        }
                    }
                }
            }
        }
        Label::Forged => {
            let h = rng.gen_range(24..80);
            let w = rng.gen_range(24..80);
            let top = rng.gen_range(0..BLOCK_SIZE - h);
            let left = rng.gen_range(0..BLOCK_SIZE - w);
            if rng.gen_bool(0.5) {
                let level = rng.gen_range(20.0..235.0);
                let cell = rng.gen_range(2..6);
                let contrast = rng.gen_range(5.0..45.0);
                for r in top..top + h {
                    for c in left..left + w {
                        let checker = if ((r / cell) + (c / cell)) % 2 == 0 { 1.0 } else { -1.0 };
                        m[(r, c)] = level + contrast * checker + rng.gen_range(-12.0..12.0);
                    }
                }
            } else {
                let donor = smooth_texture(rng);
                for r in top..top + h {
                    for c in left..left + w {
                        m[(r, c)] = donor[(r, c)];
                    }
                }
            }
        }
    }
    to_bytes(&m)
}

/// Writes a block as a binary PGM file.
pub fn write_pgm(path: &Path, pixels: &Matrix<u8>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let encoder = PnmEncoder::new(BufWriter::new(file)).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
    encoder
        .write_image(
            pixels.as_slice(),
            pixels.cols() as u32,
            pixels.rows() as u32,
            ExtendedColorType::L8,
        )
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Creates `root/authentic` and `root/spliced` with the requested number of
/// blocks each. Output depends only on the arguments.
pub fn write_synthetic_corpus(root: &Path, authentic: usize, spliced: usize, seed: u64) -> Result<()> {
    for (dir, label, count) in [
        (AUTHENTIC_DIR, Label::Authentic, authentic),
        (SPLICED_DIR, Label::Forged, spliced),
    ] {
        let sub = root.join(dir);
        fs::create_dir_all(&sub).map_err(|e| Error::io(sub.display().to_string(), e))?;
        for i in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, label.as_u8() as usize, i));
            let block = synthetic_block(label, &mut rng);
            write_pgm(&sub.join(format!("{dir}_{i:04}.pgm")), &block)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_corpus;

    #[test]
    fn corpus_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        write_synthetic_corpus(dir.path(), 3, 2, 9).unwrap();
        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus.blocks.len(), 5);
        assert!(corpus.report.is_empty());
        let again = tempfile::tempdir().unwrap();
        write_synthetic_corpus(again.path(), 3, 2, 9).unwrap();
        let twin = load_corpus(again.path()).unwrap();
        assert_eq!(corpus.blocks, twin.blocks);
    }
}
