//! Learned invertible linear mixing, `y = P·L·U·x`.
//!
//! `P` is a fixed permutation, `L` unit lower-triangular and `U` upper
//! triangular with diagonal `sign ⊙ exp(log_diag)`. The determinant is the
//! product of `U`'s diagonal, so `ln|det| = Σ log_diag` regardless of `x`,
//! and the map stays invertible under any parameter update.

use super::{check_batch, Bijector, Mapped};
use crate::error::{Error, Result};
use crate::linalg;
use crate::ndcore::{NodeId, Tape, Tensor};
use crate::par;
use crate::rng::CounterRng;

#[derive(Clone, Debug)]
pub struct LuLinear {
    dim: usize,
    perm: Vec<usize>,
    sign: Vec<f64>,
    /// `lower` (strict lower triangle used), `upper` (strict upper triangle
    /// used), `log_diag` (`[1, dim]`).
    params: Vec<Tensor>,
}

impl LuLinear {
    pub fn identity(dim: usize) -> Self {
        LuLinear {
            dim,
            perm: (0..dim).collect(),
            sign: vec![1.0; dim],
            params: vec![
                Tensor::zeros(&[dim, dim]),
                Tensor::zeros(&[dim, dim]),
                Tensor::zeros(&[1, dim]),
            ],
        }
    }

    /// Factorizes a random orthogonal matrix into `P·L·U`.
    pub fn random_orthogonal(dim: usize, rng: &mut CounterRng) -> Self {
        let q = linalg::random_orthogonal(dim, rng);
        let f = linalg::plu(&q, dim).expect("orthogonal matrices are non-singular");
        let mut lower = vec![0.0; dim * dim];
        let mut upper = vec![0.0; dim * dim];
        let mut sign = vec![0.0; dim];
        let mut log_diag = vec![0.0; dim];
        for i in 0..dim {
            for j in 0..dim {
                if j < i {
                    lower[i * dim + j] = f.lower[i * dim + j];
                } else if j > i {
                    upper[i * dim + j] = f.upper[i * dim + j];
                }
            }
            let d = f.upper[i * dim + i];
            sign[i] = d.signum();
            log_diag[i] = d.abs().ln();
        }
        LuLinear {
            dim,
            perm: f.perm,
            sign,
            params: vec![
                Tensor::matrix(dim, dim, lower).expect("square"),
                Tensor::matrix(dim, dim, upper).expect("square"),
                Tensor::matrix(1, dim, log_diag).expect("row"),
            ],
        }
    }

    pub fn from_params(
        dim: usize,
        perm: Vec<usize>,
        sign: Vec<f64>,
        params: Vec<Tensor>,
    ) -> Result<Self> {
        let mut seen = vec![false; dim];
        for &p in &perm {
            if p >= dim || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid("lu_linear: perm is not a permutation"));
            }
        }
        if perm.len() != dim || sign.len() != dim || sign.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::invalid("lu_linear: bad perm or sign length"));
        }
        if params.len() != 3
            || params[0].shape() != [dim, dim]
            || params[1].shape() != [dim, dim]
            || params[2].shape() != [1, dim]
        {
            return Err(Error::invalid("lu_linear: bad parameter shapes"));
        }
        Ok(LuLinear {
            dim,
            perm,
            sign,
            params,
        })
    }

    /// Perturbs every trainable entry by `N(0, std²)` (tests and audits).
    pub fn randomize(&mut self, std: f64, rng: &mut CounterRng) {
        for p in &mut self.params {
            for v in p.data_mut() {
                *v += rng.normal() * std;
            }
        }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn sign(&self) -> &[f64] {
        &self.sign
    }

    pub fn log_abs_det(&self) -> f64 {
        let mut acc = 0.0;
        for &v in self.params[2].data() {
            acc += v;
        }
        acc
    }

    fn unit_lower(&self) -> Vec<f64> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                l[i * n + j] = self.params[0].data()[i * n + j];
            }
            l[i * n + i] = 1.0;
        }
        l
    }

    fn upper(&self) -> Vec<f64> {
        let n = self.dim;
        let mut u = vec![0.0; n * n];
        for i in 0..n {
            u[i * n + i] = self.sign[i] * self.params[2].data()[i].exp();
            for j in i + 1..n {
                u[i * n + j] = self.params[1].data()[i * n + j];
            }
        }
        u
    }

    /// The materialized `P·L·U` matrix.
    pub fn matrix(&self) -> Tensor {
        let n = self.dim;
        let lu = linalg::matmul_square(&self.unit_lower(), &self.upper(), n);
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n..(i + 1) * n].copy_from_slice(&lu[self.perm[i] * n..(self.perm[i] + 1) * n]);
        }
        Tensor::matrix(n, n, w).expect("square")
    }

    fn masks(&self) -> (Tensor, Tensor) {
        let n = self.dim;
        let mut lo = Tensor::zeros(&[n, n]);
        let mut up = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in 0..n {
                if j < i {
                    lo.data_mut()[i * n + j] = 1.0;
                } else if j > i {
                    up.data_mut()[i * n + j] = 1.0;
                }
            }
        }
        (lo, up)
    }
}

impl Bijector for LuLinear {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &'static str {
        "lu_linear"
    }

    fn params(&self) -> Vec<&Tensor> {
        self.params.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.params.iter_mut().collect()
    }

    fn forward_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        params: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        let [lower, upper, log_diag] = params else {
            return Err(Error::invalid("lu_linear expects 3 parameter nodes"));
        };
        let n = self.dim;
        let (lo_mask, up_mask) = self.masks();
        let lo_mask = tape.constant(lo_mask);
        let up_mask = tape.constant(up_mask);
        let eye = tape.constant(Tensor::eye(n));

        let l = tape.mul(*lower, lo_mask)?;
        let l = tape.add(l, eye)?;

        let sign = tape.constant(Tensor::matrix(1, n, self.sign.clone())?);
        let diag = tape.exp(*log_diag)?;
        let diag = tape.mul(diag, sign)?;
        let ones = tape.constant(Tensor::full(&[n, 1], 1.0));
        let spread = tape.matmul(ones, diag)?;
        let d = tape.mul(spread, eye)?;
        let u = tape.mul(*upper, up_mask)?;
        let u = tape.add(u, d)?;

        // rows: y = P·L·U·x  <=>  Y = X·Uᵀ·Lᵀ then permute columns
        let ut = tape.transpose(u)?;
        let lt = tape.transpose(l)?;
        let h = tape.matmul(x, ut)?;
        let h = tape.matmul(h, lt)?;
        let y = tape.gather_cols(h, &self.perm)?;
        let ld = tape.sum(*log_diag)?;
        Ok((y, ld))
    }

    fn inverse(&self, y: &Tensor) -> Result<Mapped> {
        check_batch(self.name(), y, self.dim)?;
        let n = self.dim;
        let l = self.unit_lower();
        let u = self.upper();
        let perm = &self.perm;
        let mut out = y.data().to_vec();
        par::for_each_row(&mut out, n, y.rows() * n * n, |_, row| {
            let mut v = vec![0.0; n];
            for (i, &p) in perm.iter().enumerate() {
                v[p] = row[i];
            }
            // L·w = v
            for i in 0..n {
                let mut acc = v[i];
                for j in 0..i {
                    acc -= l[i * n + j] * v[j];
                }
                v[i] = acc;
            }
            // U·x = w
            for i in (0..n).rev() {
                let mut acc = v[i];
                for j in i + 1..n {
                    acc -= u[i * n + j] * v[j];
                }
                v[i] = acc / u[i * n + i];
            }
            row.copy_from_slice(&v);
        });
        let x = Tensor::matrix(y.rows(), n, out)?;
        Ok((x, vec![-self.log_abs_det(); y.rows()]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_init() {
        let b = LuLinear::identity(3);
        let x = [0.3, -1.2, 2.5];
        let (y, ld) = b.forward_point(&x).unwrap();
        assert_eq!(y, x.to_vec());
        assert_eq!(ld, 0.0);
    }

    #[test]
    fn forward_matches_materialized_matrix() {
        let mut rng = CounterRng::new(9);
        let mut b = LuLinear::random_orthogonal(5, &mut rng);
        b.randomize(0.3, &mut rng);
        let w = b.matrix();
        let x = Tensor::matrix(4, 5, rng.normals(20)).unwrap();
        let (y, _) = b.forward(&x).unwrap();
        let expect = x.matmul(&w.transpose().unwrap()).unwrap();
        assert!(y.max_abs_diff(&expect) < 1e-12);
        let (back, _) = b.inverse(&y).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn orthogonal_init_reconstructs() {
        let mut rng = CounterRng::new(4);
        let b = LuLinear::random_orthogonal(4, &mut rng);
        assert!(b.log_abs_det().abs() < 1e-12);
        let w = b.matrix();
        let wwt = w.matmul(&w.transpose().unwrap()).unwrap();
        assert!(wwt.max_abs_diff(&Tensor::eye(4)) < 1e-12);
    }

    #[test]
    fn bad_parts_rejected() {
        let t = || {
            vec![
                Tensor::zeros(&[2, 2]),
                Tensor::zeros(&[2, 2]),
                Tensor::zeros(&[1, 2]),
            ]
        };
        assert!(LuLinear::from_params(2, vec![0, 0], vec![1.0, 1.0], t()).is_err());
        assert!(LuLinear::from_params(2, vec![0, 1], vec![1.0, 0.5], t()).is_err());
        assert!(LuLinear::from_params(2, vec![1, 0], vec![1.0, -1.0], t()).is_ok());
    }
}
