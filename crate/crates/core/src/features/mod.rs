//! Per-tool texture descriptors of an image block.
//!
//! | tool         | length | contents                                             |
//! |--------------|--------|------------------------------------------------------|
//! | `WAVELET`    | 48     | Haar subband magnitude stats of image + residual     |
//! | `GLCM_EDGE`  | 96     | 6 co-occurrence stats x 4 offsets x 4 edge maps      |
//! | `RUN_LENGTH` | 220    | 11 run stats x 4 directions x 4 sources + 44 moments |

pub mod glcm;
pub mod run_length;
pub mod wavelet;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::dataset::{ImageBlock, Label, Sample, SampleKey};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{parse_scalar, Scalar};

pub use glcm::{edge_images, glcm, glcm_stats, EdgeMaps, Glcm, GlcmStats};
pub use run_length::{run_length_matrix, Direction, RunLengthMatrix};
pub use wavelet::{haar_dwt2, haar_idwt2, HaarLevel, HaarPyramid};

pub const WAVELET_LEVELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tool {
    Wavelet,
    GlcmEdge,
    RunLength,
}

impl Tool {
    pub const ALL: [Tool; 3] = [Tool::Wavelet, Tool::GlcmEdge, Tool::RunLength];

    pub fn tag(self) -> &'static str {
        match self {
            Tool::Wavelet => "WAVELET",
            Tool::GlcmEdge => "GLCM_EDGE",
            Tool::RunLength => "RUN_LENGTH",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Tool::Wavelet => wavelet::wavelet_arity(WAVELET_LEVELS),
            Tool::GlcmEdge => glcm::glcm_edge_arity(),
            Tool::RunLength => run_length::run_length_arity(),
        }
    }

    /// Column heading in the result tables.
    pub fn column(self) -> &'static str {
        match self {
            Tool::Wavelet => "DWT",
            Tool::GlcmEdge => "EdgeGLCM",
            Tool::RunLength => "RunLength",
        }
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            Tool::Wavelet => "wavelet",
            Tool::GlcmEdge => "glcm_edge",
            Tool::RunLength => "run_length",
        }
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Tool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tool::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| Error::parse("tool tag", format!("unknown tool `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector<T> {
    pub tool: Tool,
    pub block_id: String,
    pub values: Vec<T>,
}

/// Uniform binning of `[0, 255]` into `levels` bins; values on a bin edge
/// go to the lower bin.
pub fn quantize_value(v: u8, levels: usize) -> u8 {
    let scaled = v as usize * levels;
    let bin = scaled.div_ceil(255).saturating_sub(1);
    bin.min(levels - 1) as u8
}

pub fn quantize(m: &Matrix<u8>, levels: usize) -> Matrix<u8> {
    assert!((1..=256).contains(&levels), "levels must be in 1..=256");
    m.map(|&v| quantize_value(v, levels))
}

pub fn wavelet_features<T: Scalar>(block: &ImageBlock) -> FeatureVector<T> {
    let values =
        wavelet::wavelet_statistics(block.pixels(), WAVELET_LEVELS).expect("128x128 blocks are divisible by 8");
    FeatureVector {
        tool: Tool::Wavelet,
        block_id: block.id().to_string(),
        values,
    }
}

pub fn glcm_edge_features<T: Scalar>(block: &ImageBlock) -> FeatureVector<T> {
    let values = glcm::glcm_edge_statistics(block.pixels()).expect("block is at least 2x2");
    FeatureVector {
        tool: Tool::GlcmEdge,
        block_id: block.id().to_string(),
        values,
    }
}

pub fn run_length_features<T: Scalar>(block: &ImageBlock) -> FeatureVector<T> {
    let values = run_length::run_length_statistics(block.pixels()).expect("block is at least 2x2");
    FeatureVector {
        tool: Tool::RunLength,
        block_id: block.id().to_string(),
        values,
    }
}

/// Descriptor of one tool computed straight from pixels.
pub fn pixel_features<T: Scalar>(tool: Tool, pixels: &Matrix<u8>) -> Result<Vec<T>> {
    match tool {
        Tool::Wavelet => wavelet::wavelet_statistics(pixels, WAVELET_LEVELS),
        Tool::GlcmEdge => glcm::glcm_edge_statistics(pixels),
        Tool::RunLength => run_length::run_length_statistics(pixels),
    }
}

pub fn tool_features<T: Scalar>(tool: Tool, block: &ImageBlock) -> FeatureVector<T> {
    match tool {
        Tool::Wavelet => wavelet_features(block),
        Tool::GlcmEdge => glcm_edge_features(block),
        Tool::RunLength => run_length_features(block),
    }
}

/// Feature rows of one tool for a whole corpus, in corpus order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable<T> {
    pub tool: Tool,
    pub keys: Vec<SampleKey>,
    pub values: Matrix<T>,
}

impl<T: Scalar> FeatureTable<T> {
    pub fn from_vectors(tool: Tool, blocks: &[ImageBlock], vectors: Vec<FeatureVector<T>>) -> Result<Self> {
        let keys = blocks
            .iter()
            .map(|b| SampleKey {
                id: b.id().to_string(),
                label: b.label(),
            })
            .collect();
        let rows: Vec<Vec<T>> = vectors
            .into_iter()
            .map(|v| {
                debug_assert_eq!(v.tool, tool);
                v.values
            })
            .collect();
        let values = if rows.is_empty() {
            Matrix::from_vec(0, tool.arity(), Vec::new())?
        } else {
            Matrix::from_rows(rows)?
        };
        Ok(FeatureTable { tool, keys, values })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.keys.iter().map(|k| k.label).collect()
    }

    /// `block_id,label,f0,...,fK` then one row per block.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "block_id,label")?;
        for j in 0..self.values.cols() {
            write!(w, ",f{j}")?;
        }
        writeln!(w)?;
        for (key, row) in self.keys.iter().zip(self.values.iter_rows()) {
            write!(w, "{},{}", key.id, key.label.as_u8())?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(tool: Tool, r: R) -> Result<Self> {
        let ctx = format!("{} feature CSV", tool.tag());
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(&ctx, "missing header"))?
            .map_err(|e| Error::io(&ctx, e))?;
        let cols = header.split(',').count().saturating_sub(2);
        if !header.starts_with("block_id,label") || cols != tool.arity() {
            return Err(Error::parse(
                &ctx,
                format!("expected {} feature columns, header has {cols}", tool.arity()),
            ));
        }
        let mut keys = Vec::new();
        let mut data = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(&ctx, e))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or_default().to_string();
            let label = fields
                .next()
                .and_then(|l| l.parse::<u8>().ok())
                .and_then(Label::from_u8)
                .ok_or_else(|| Error::parse(&ctx, format!("bad label on row {}", n + 1)))?;
            let before = data.len();
            for f in fields {
                data.push(parse_scalar::<T>(f).map_err(|m| Error::parse(&ctx, m))?);
            }
            if data.len() - before != cols {
                return Err(Error::parse(&ctx, format!("row {} has wrong arity", n + 1)));
            }
            keys.push(SampleKey { id, label });
        }
        let values = Matrix::from_vec(keys.len(), cols, data)?;
        Ok(FeatureTable { tool, keys, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(f: impl Fn(usize, usize) -> u8) -> ImageBlock {
        ImageBlock::new("t/x.pgm", Matrix::from_fn(128, 128, f), Label::Authentic).unwrap()
    }

    #[test]
    fn quantization_edges_go_low() {
        assert_eq!(quantize_value(0, 16), 0);
        assert_eq!(quantize_value(255, 16), 15);
        assert_eq!(quantize_value(15, 16), 0);
        assert_eq!(quantize_value(16, 16), 1);
        // 85 sits exactly on the first edge of 3 bins
        assert_eq!(quantize_value(85, 3), 0);
        assert_eq!(quantize_value(86, 3), 1);
        assert_eq!(quantize_value(170, 3), 1);
        assert_eq!(quantize_value(171, 3), 2);
    }

    #[test]
    fn arities() {
        assert_eq!(Tool::Wavelet.arity(), 48);
        assert_eq!(Tool::GlcmEdge.arity(), 96);
        assert_eq!(Tool::RunLength.arity(), 220);
    }

    #[test]
    fn constant_block_features() {
        let b = block(|_, _| 100);
        let w = wavelet_features::<f64>(&b);
        assert_eq!(w.values.len(), 48);
        for level in 0..3 {
            let base = level * 8;
            assert!(w.values[base] > 0.0, "LL mean at level {level}");
            assert!(w.values[base + 2..base + 8].iter().all(|&v| v == 0.0));
        }
        // residual image is identically zero
        assert!(w.values[24..].iter().all(|&v| v == 0.0));

        let g = glcm_edge_features::<f64>(&b);
        assert_eq!(g.values.len(), 96);
        for chunk in g.values.chunks(6) {
            assert_eq!(chunk[0], 0.0, "contrast");
            assert_eq!(chunk[2], 1.0, "energy");
            assert_eq!(chunk[4], 0.0, "entropy");
        }

        let r = run_length_features::<f64>(&b);
        assert_eq!(r.values.len(), 220);
        // RP of the image source at 0 degrees
        assert_eq!(r.values[4], 128.0 / 16384.0);
        assert!(r.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn two_valued_block_is_finite() {
        let b = block(|r, c| if (r / 8 + c / 8) % 2 == 0 { 0 } else { 255 });
        for tool in Tool::ALL {
            let v = tool_features::<f64>(tool, &b);
            assert_eq!(v.values.len(), tool.arity());
            assert!(v.values.iter().all(|x| x.is_finite()), "{tool}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let blocks = vec![block(|r, c| (r * 3 + c * 5) as u8), block(|_, _| 4)];
        let vectors = blocks.iter().map(wavelet_features::<f64>).collect();
        let table = FeatureTable::from_vectors(Tool::Wavelet, &blocks, vectors).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with("block_id,label,f0,f1,"));
        assert!(header.lines().next().unwrap().ends_with(",f47"));
        let back = FeatureTable::<f64>::read_csv(Tool::Wavelet, &buf[..]).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn csv_arity_mismatch_rejected() {
        let csv = "block_id,label,f0\nx,1,0.5\n";
        assert!(FeatureTable::<f64>::read_csv(Tool::Wavelet, csv.as_bytes()).is_err());
    }
}
