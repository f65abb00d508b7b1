//! Independent reference computations shared by the integration tests. None
//! of these call into the code paths they are used to check.

#![allow(dead_code)]

use nflow::bijectors::{AffineCoupling, Chain, Layer, LuLinear};
use nflow::ndcore::Tensor;
use nflow::rng::CounterRng;

/// Entry-by-entry triple loop.
pub fn matmul_oracle(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i * k + t] * b[t * m + j];
            }
            out[i * m + j] = s;
        }
    }
    out
}

/// Laplace expansion along the first row.
pub fn cofactor_det(a: &[f64], n: usize) -> f64 {
    if n == 1 {
        return a[0];
    }
    let mut det = 0.0;
    for col in 0..n {
        let minor: Vec<f64> = (1..n)
            .flat_map(|r| (0..n).filter(move |&c| c != col).map(move |c| (r, c)))
            .map(|(r, c)| a[r * n + c])
            .collect();
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * a[col] * cofactor_det(&minor, n - 1);
    }
    det
}

/// Mean NLL of the maximum-likelihood full-covariance Gaussian, in closed
/// form: `(d/2)·ln(2π) + ½·ln det Σ̂ + d/2` per point.
pub fn gaussian_baseline_nll(x: &Tensor) -> f64 {
    let (n, d) = (x.rows(), x.cols());
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += (x.get(i, a) - mean[a]) * (x.get(i, b) - mean[b]) / n as f64;
            }
        }
    }
    let det = cofactor_det(&cov, d);
    0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() + 0.5 * det.ln() + 0.5 * d as f64
}

/// Per-column sample mean and (population) standard deviation.
pub fn column_stats(x: &Tensor) -> Vec<(f64, f64)> {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| {
            let m = (0..x.rows()).map(|i| x.get(i, j)).sum::<f64>() / n;
            let v = (0..x.rows())
                .map(|i| (x.get(i, j) - m).powi(2))
                .sum::<f64>()
                / n;
            (m, v.sqrt())
        })
        .collect()
}

pub fn correlation(x: &Tensor) -> f64 {
    let s = column_stats(x);
    let n = x.rows() as f64;
    let cov = (0..x.rows())
        .map(|i| (x.get(i, 0) - s[0].0) * (x.get(i, 1) - s[1].0))
        .sum::<f64>()
        / n;
    cov / (s[0].1 * s[1].1)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Central finite difference of a scalar function of one flattened argument.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut CounterRng) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| scale * (2.0 * rng.uniform() - 1.0))
        .collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// A coupling stack with small random conditioner outputs and, when
/// `lu` is set, randomized LU mixing layers between couplings.
pub fn random_chain(dim: usize, couplings: usize, lu: bool, seed: u64) -> Chain {
    let mut rng = CounterRng::new(seed);
    let mut steps: Vec<Layer> = Vec::new();
    for k in 0..couplings {
        let mut c = AffineCoupling::alternating(dim, k, 16, &mut rng).unwrap();
        c.randomize_output(0.03, &mut rng);
        steps.push(c.into());
        if lu {
            let mut l = LuLinear::random_orthogonal(dim, &mut rng);
            l.randomize(0.1, &mut rng);
            steps.push(l.into());
        }
    }
    Chain::new(steps).unwrap()
}

/// `ln|det|` of the central-difference Jacobian, evaluated one point at a
/// time and reduced with the cofactor expansion.
pub fn fd_log_det<B: nflow::bijectors::Bijector>(b: &B, x: &[f64], h: f64) -> f64 {
    let d = x.len();
    let mut jac = vec![0.0; d * d];
    for j in 0..d {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[j] += h;
        m[j] -= h;
        let (yp, _) = b.forward_point(&p).unwrap();
        let (ym, _) = b.forward_point(&m).unwrap();
        for i in 0..d {
            jac[i * d + j] = (yp[i] - ym[i]) / (2.0 * h);
        }
    }
    cofactor_det(&jac, d).abs().ln()
}

/// A random instance of every bijector kind that exists in dimension `dim`.
pub fn all_kinds(dim: usize, seed: u64) -> Vec<(&'static str, Layer)> {
    use nflow::bijectors::{FixedLinear, LogitSquash, NonlinearShear2D, SquareScale1D};
    let mut rng = CounterRng::new(seed);
    let mut out: Vec<(&'static str, Layer)> = Vec::new();
    let mut m = random_matrix(dim, dim, 1.0, &mut rng);
    for i in 0..dim {
        m.data_mut()[i * dim + i] += 2.0;
    }
    out.push(("fixed_linear", FixedLinear::new(m).unwrap().into()));
    let mut lu = LuLinear::random_orthogonal(dim, &mut rng);
    lu.randomize(0.3, &mut rng);
    out.push(("lu_linear", lu.into()));
    out.push(("logit_squash", LogitSquash::new(dim, 0.05).unwrap().into()));
    if dim >= 2 {
        let mut c = AffineCoupling::alternating(dim, seed as usize, 16, &mut rng).unwrap();
        c.randomize_output(0.5, &mut rng);
        out.push(("affine_coupling", c.into()));
    }
    if dim == 2 {
        out.push((
            "nonlinear_shear",
            NonlinearShear2D::new(40.0).unwrap().into(),
        ));
    }
    if dim == 1 {
        out.push(("square_scale", SquareScale1D::disc_area().into()));
    }
    out
}

/// A point inside the domain of `kind`.
pub fn domain_point(kind: &str, dim: usize, rng: &mut CounterRng) -> Vec<f64> {
    (0..dim)
        .map(|_| match kind {
            "logit_squash" => 0.02 + 0.96 * rng.uniform(),
            "square_scale" => 0.5 + 5.0 * rng.uniform(),
            "nonlinear_shear" => 20.0 * rng.uniform() - 10.0,
            _ => 4.0 * rng.uniform() - 2.0,
        })
        .collect()
}
