//! Datasets: the synthetic 2-D pipeline distribution, CSV vectors, grayscale
//! images and their augmentation.

mod augment;
mod csv;
mod glyph;
mod pgm;
mod pipeline;

pub use augment::{augment_noise, dequantize, quantize, resize_bilinear};
pub use csv::{load_csv, parse_csv, write_csv};
pub use glyph::{draw_glyph, gen_glyph_dataset, glyph_family, GlyphFamily};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, save_pgm, GrayImage};
pub use pipeline::{gen_pipeline_dataset, PipelineSample};

use crate::error::{Error, Result};
use crate::ndcore::Tensor;

/// Equal-length finite points stored as the rows of a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    points: Tensor,
    provenance: String,
}

impl Dataset {
    pub fn new(points: Tensor, provenance: impl Into<String>) -> Result<Self> {
        if points.shape().len() != 2 {
            return Err(Error::invalid("dataset points must be a matrix"));
        }
        Ok(Dataset {
            points,
            provenance: provenance.into(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], provenance: impl Into<String>) -> Result<Self> {
        Dataset::new(Tensor::from_rows(rows)?, provenance)
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &Tensor {
        &self.points
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Rows `idx`, in order.
    pub fn select(&self, idx: &[usize]) -> Result<Tensor> {
        let d = self.dim();
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            if i >= self.len() {
                return Err(Error::invalid(format!("row {i} out of range")));
            }
            out.extend_from_slice(self.row(i));
        }
        Tensor::matrix(idx.len(), d, out)
    }
}
