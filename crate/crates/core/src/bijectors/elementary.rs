//! Parameter-free elementwise and low-dimensional bijectors.

use super::{check_batch, Bijector, Mapped};
use crate::error::{Error, Result};
use crate::ndcore::{NodeId, Tape, Tensor};

fn domain(bijector: &'static str, row: usize, detail: String) -> Error {
    Error::Domain {
        bijector,
        row,
        detail,
    }
}

/// `y₁ = x₁·(1 + x₂/d)`, `y₂ = x₂` on the half-plane `x₂ > −d`.
///
/// `ln|det J| = ln(1 + x₂/d)`.
#[derive(Clone, Debug)]
pub struct NonlinearShear2D {
    divisor: f64,
}

impl NonlinearShear2D {
    pub fn new(divisor: f64) -> Result<Self> {
        if !(divisor > 0.0 && divisor.is_finite()) {
            return Err(Error::invalid("shear divisor must be positive"));
        }
        Ok(NonlinearShear2D { divisor })
    }

    pub fn divisor(&self) -> f64 {
        self.divisor
    }

    fn check(&self, t: &Tensor) -> Result<()> {
        for i in 0..t.rows() {
            let x2 = t.get(i, 1);
            if x2 <= -self.divisor {
                return Err(domain(
                    "nonlinear_shear_2d",
                    i,
                    format!("x2 = {x2} must exceed {}", -self.divisor),
                ));
            }
        }
        Ok(())
    }
}

impl Bijector for NonlinearShear2D {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> &'static str {
        "nonlinear_shear_2d"
    }

    fn forward_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        _params: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        self.check(tape.value(x)?)?;
        let x1 = tape.slice_cols(x, 0, 1)?;
        let x2 = tape.slice_cols(x, 1, 2)?;
        let frac = tape.scale(x2, 1.0 / self.divisor)?;
        let one = tape.scalar(1.0);
        let factor = tape.add(frac, one)?;
        let y1 = tape.mul(x1, factor)?;
        let y = tape.concat_cols(y1, x2)?;
        let ld = tape.log(factor)?;
        Ok((y, ld))
    }

    fn inverse(&self, y: &Tensor) -> Result<Mapped> {
        check_batch(self.name(), y, 2)?;
        self.check(y)?;
        let inv = 1.0 / self.divisor;
        let mut out = Vec::with_capacity(y.len());
        let mut ld = Vec::with_capacity(y.rows());
        for i in 0..y.rows() {
            let (y1, y2) = (y.get(i, 0), y.get(i, 1));
            let factor = y2 * inv + 1.0;
            out.push(y1 / factor);
            out.push(y2);
            ld.push(-factor.ln());
        }
        Ok((Tensor::matrix(y.rows(), 2, out)?, ld))
    }
}

/// `y = c·x²` on `x > 0`; `ln|det J| = ln(2c·x)`.
#[derive(Clone, Debug)]
pub struct SquareScale1D {
    coefficient: f64,
}

impl SquareScale1D {
    pub fn new(coefficient: f64) -> Result<Self> {
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return Err(Error::invalid("square-scale coefficient must be positive"));
        }
        Ok(SquareScale1D { coefficient })
    }

    /// Diameter → disc area.
    pub fn disc_area() -> Self {
        SquareScale1D {
            coefficient: std::f64::consts::FRAC_PI_4,
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }
}

fn check_positive(name: &'static str, t: &Tensor) -> Result<()> {
    for (i, &v) in t.data().iter().enumerate() {
        if v <= 0.0 {
            return Err(domain(name, i, format!("value {v} must be positive")));
        }
    }
    Ok(())
}

impl Bijector for SquareScale1D {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> &'static str {
        "square_scale_1d"
    }

    fn forward_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        _params: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        check_positive(self.name(), tape.value(x)?)?;
        let sq = tape.mul(x, x)?;
        let y = tape.scale(sq, self.coefficient)?;
        let slope = tape.scale(x, 2.0 * self.coefficient)?;
        let ld = tape.log(slope)?;
        Ok((y, ld))
    }

    fn inverse(&self, y: &Tensor) -> Result<Mapped> {
        check_batch(self.name(), y, 1)?;
        check_positive(self.name(), y)?;
        let x: Vec<f64> = y
            .data()
            .iter()
            .map(|&a| (a / self.coefficient).sqrt())
            .collect();
        let ld = x
            .iter()
            .map(|&d| -(2.0 * self.coefficient * d).ln())
            .collect();
        Ok((Tensor::matrix(y.rows(), 1, x)?, ld))
    }
}

/// Logit of a slightly shrunk unit interval:
/// `x′ = ε + (1 − 2ε)·x`, `y = ln(x′ / (1 − x′))`.
///
/// The domain is the open interval on which `0 < x′ < 1`, which contains
/// `[0, 1]` with a margin of `ε / (1 − 2ε)` on each side.
#[derive(Clone, Debug)]
pub struct LogitSquash {
    dim: usize,
    eps: f64,
}

impl LogitSquash {
    pub const DEFAULT_EPS: f64 = 0.05;

    pub fn new(dim: usize, eps: f64) -> Result<Self> {
        if dim == 0 || !(eps > 0.0 && eps < 0.5) {
            return Err(Error::invalid(
                "logit squash needs dim > 0 and 0 < eps < 0.5",
            ));
        }
        Ok(LogitSquash { dim, eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl Bijector for LogitSquash {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &'static str {
        "logit_squash"
    }

    fn forward_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        _params: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        let xv = tape.value(x)?;
        let cols = xv.cols();
        let a = 1.0 - 2.0 * self.eps;
        for (k, &v) in xv.data().iter().enumerate() {
            let xp = self.eps + a * v;
            if !(xp > 0.0 && xp < 1.0) {
                return Err(domain(
                    "logit_squash",
                    k / cols,
                    format!("value {v} maps outside the open unit interval"),
                ));
            }
        }
        let shrunk = tape.scale(x, 1.0 - 2.0 * self.eps)?;
        let eps = tape.scalar(self.eps);
        let xp = tape.add(shrunk, eps)?;
        let one = tape.scalar(1.0);
        let rest = tape.sub(one, xp)?;
        let log_xp = tape.log(xp)?;
        let log_rest = tape.log(rest)?;
        let y = tape.sub(log_xp, log_rest)?;
        let both = tape.add(log_xp, log_rest)?;
        let s = tape.row_sums(both)?;
        let c = tape.scalar(self.dim as f64 * (1.0 - 2.0 * self.eps).ln());
        let ld = tape.sub(c, s)?;
        Ok((y, ld))
    }

    fn inverse(&self, y: &Tensor) -> Result<Mapped> {
        check_batch(self.name(), y, self.dim)?;
        let c = self.dim as f64 * (1.0 - 2.0 * self.eps).ln();
        let mut out = Vec::with_capacity(y.len());
        let mut ld = Vec::with_capacity(y.rows());
        for i in 0..y.rows() {
            let mut s = 0.0;
            for &v in y.row(i) {
                let xp = 1.0 / (1.0 + (-v).exp());
                out.push((xp - self.eps) / (1.0 - 2.0 * self.eps));
                // ln x′ + ln(1 − x′) = −softplus(−v) − softplus(v)
                s -= softplus(-v) + softplus(v);
            }
            ld.push(-(c - s));
        }
        Ok((Tensor::matrix(y.rows(), self.dim, out)?, ld))
    }
}

fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shear_example() {
        let b = NonlinearShear2D::new(40.0).unwrap();
        let (y, ld) = b.forward_point(&[1.0, 40.0]).unwrap();
        assert_eq!(y, vec![2.0, 40.0]);
        assert!((ld - 2f64.ln()).abs() < 1e-15);
        let (x, ild) = b.inverse_point(&y).unwrap();
        assert_eq!(x, vec![1.0, 40.0]);
        assert!((ild + ld).abs() < 1e-15);
    }

    #[test]
    fn shear_domain() {
        let b = NonlinearShear2D::new(40.0).unwrap();
        let x = Tensor::matrix(2, 2, vec![0.0, 0.0, 1.0, -40.0]).unwrap();
        match b.forward(&x) {
            Err(Error::Domain { row, .. }) => assert_eq!(row, 1),
            other => panic!("{other:?}"),
        }
        assert!(b.inverse_point(&[1.0, -41.0]).is_err());
        assert!(NonlinearShear2D::new(0.0).is_err());
    }

    #[test]
    fn disc_inverse() {
        let b = SquareScale1D::disc_area();
        let a = 9.0 * std::f64::consts::PI;
        let (d, ld) = b.inverse_point(&[a]).unwrap();
        assert!((d[0] - 6.0).abs() < 1e-12);
        assert!((ld + (3.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
        assert!(b.forward_point(&[0.0]).is_err());
        assert!(b.forward_point(&[-1.0]).is_err());
        assert!(b.inverse_point(&[0.0]).is_err());
    }

    #[test]
    fn logit_values() {
        let b = LogitSquash::new(1, 0.05).unwrap();
        let (y, _) = b.forward_point(&[0.0]).unwrap();
        assert!((y[0] - (0.05f64 / 0.95).ln()).abs() < 1e-15);
        assert!((y[0] + 2.944439).abs() < 1e-6);
        let (_, ld) = b.forward_point(&[0.5]).unwrap();
        assert!((ld - 3.6f64.ln()).abs() < 1e-12);
        let (x, ild) = b.inverse_point(&[y[0]]).unwrap();
        assert!(x[0].abs() < 1e-15);
        assert!(ild.is_finite());
        assert!(b.forward_point(&[1.5]).is_err());
        assert!(LogitSquash::new(1, 0.5).is_err());
    }
}
