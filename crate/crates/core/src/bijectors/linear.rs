use super::{check_batch, Bijector, Mapped};
use crate::error::{Error, Result};
use crate::linalg;
use crate::ndcore::{NodeId, Tape, Tensor};

/// `y = A·x` for a fixed non-singular matrix `A`.
#[derive(Clone, Debug)]
pub struct FixedLinear {
    matrix: Tensor,
    matrix_t: Tensor,
    inverse_t: Tensor,
    log_abs_det: f64,
}

/// Matrices with `|det| <= SINGULAR_DET` are rejected.
const SINGULAR_DET: f64 = 1e-12;

impl FixedLinear {
    pub fn new(matrix: Tensor) -> Result<Self> {
        let n = matrix.rows();
        if matrix.shape() != [n, n] {
            return Err(Error::shape("fixed_linear", matrix.shape(), &[n, n]));
        }
        let singular = || Error::invalid("fixed_linear: matrix is singular");
        let (log_abs_det, _) = linalg::log_abs_det(matrix.data(), n).ok_or_else(singular)?;
        if log_abs_det <= SINGULAR_DET.ln() {
            return Err(singular());
        }
        let inv = linalg::inverse(matrix.data(), n).ok_or_else(singular)?;
        let inverse_t = Tensor::matrix(n, n, inv)?.transpose()?;
        Ok(FixedLinear {
            matrix_t: matrix.transpose()?,
            matrix,
            inverse_t,
            log_abs_det,
        })
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = Tensor::zeros(&[n, n]);
        for (i, &d) in diag.iter().enumerate() {
            m.data_mut()[i * n + i] = d;
        }
        FixedLinear::new(m)
    }

    /// Counter-clockwise planar rotation.
    pub fn rotation_degrees(degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        FixedLinear::new(Tensor::matrix(2, 2, vec![c, -s, s, c]).expect("2x2"))
            .expect("rotations are non-singular")
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    /// `A⁻¹` as a row-major matrix.
    pub fn inverse_matrix(&self) -> Tensor {
        self.inverse_t.transpose().expect("square")
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }
}

impl Bijector for FixedLinear {
    fn dim(&self) -> usize {
        self.matrix.rows()
    }

    fn name(&self) -> &'static str {
        "fixed_linear"
    }

    fn forward_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        _params: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        let mt = tape.constant(self.matrix_t.clone());
        let y = tape.matmul(x, mt)?;
        Ok((y, tape.scalar(self.log_abs_det)))
    }

    fn inverse(&self, y: &Tensor) -> Result<Mapped> {
        check_batch(self.name(), y, self.dim())?;
        let x = y.matmul(&self.inverse_t)?;
        Ok((x, vec![-self.log_abs_det; y.rows()]))
    }
}
