//! Small dense linear algebra on row-major `n × n` slices.

use crate::rng::CounterRng;

/// `A = P·L·U` with `P` given as a row permutation: `(P·v)[i] = v[perm[i]]`.
#[derive(Clone, Debug)]
pub struct PluFactors {
    pub perm: Vec<usize>,
    /// Unit lower triangle (diagonal stored as 1).
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Number of row swaps performed.
    pub swaps: usize,
}

/// LU with partial pivoting. Returns `None` when a pivot is exactly zero.
pub fn plu(a: &[f64], n: usize) -> Option<PluFactors> {
    let mut u = a.to_vec();
    let mut l = vec![0.0; n * n];
    // rows[i] = which original row currently sits at position i
    let mut rows: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| u[i * n + k].abs().total_cmp(&u[j * n + k].abs()))
            .unwrap_or(k);
        if u[p * n + k] == 0.0 {
            return None;
        }
        if p != k {
            swaps += 1;
            rows.swap(p, k);
            for j in 0..n {
                u.swap(p * n + j, k * n + j);
                l.swap(p * n + j, k * n + j);
            }
        }
        for i in k + 1..n {
            let f = u[i * n + k] / u[k * n + k];
            l[i * n + k] = f;
            u[i * n + k] = 0.0;
            for j in k + 1..n {
                u[i * n + j] -= f * u[k * n + j];
            }
        }
    }
    for i in 0..n {
        l[i * n + i] = 1.0;
    }
    // (rows-permuted A) = L·U, so A = P·L·U with P·v placing v[i] at rows[i].
    let mut perm = vec![0; n];
    for (i, &r) in rows.iter().enumerate() {
        perm[r] = i;
    }
    Some(PluFactors {
        perm,
        lower: l,
        upper: u,
        swaps,
    })
}

/// `ln|det A|` and the sign of `det A`; `None` if singular.
pub fn log_abs_det(a: &[f64], n: usize) -> Option<(f64, f64)> {
    let f = plu(a, n)?;
    let mut log = 0.0;
    let mut sign = if f.swaps % 2 == 0 { 1.0 } else { -1.0 };
    for i in 0..n {
        let d = f.upper[i * n + i];
        log += d.abs().ln();
        if d < 0.0 {
            sign = -sign;
        }
    }
    Some((log, sign))
}

/// Gauss–Jordan inverse with partial pivoting; `None` if singular.
pub fn inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i * n + k].abs().total_cmp(&m[j * n + k].abs()))?;
        if m[p * n + k] == 0.0 {
            return None;
        }
        for j in 0..n {
            m.swap(p * n + j, k * n + j);
            inv.swap(p * n + j, k * n + j);
        }
        let d = m[k * n + k];
        for j in 0..n {
            m[k * n + j] /= d;
            inv[k * n + j] /= d;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = m[i * n + k];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                m[i * n + j] -= f * m[k * n + j];
                inv[i * n + j] -= f * inv[k * n + j];
            }
        }
    }
    Some(inv)
}

/// Row-major product of two `n × n` matrices.
pub fn matmul_square(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Random orthogonal matrix: modified Gram–Schmidt on a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut CounterRng) -> Vec<f64> {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..n).map(|_| rng.normals(n)).collect();
        let mut ok = true;
        for j in 0..n {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let (cj, ck) = (&mut rest[0], &done[k]);
                let dot: f64 = cj.iter().zip(ck).map(|(a, b)| a * b).sum();
                for (a, b) in cj.iter_mut().zip(ck) {
                    *a -= dot * b;
                }
            }
            let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|v| *v /= norm);
        }
        if ok {
            let mut q = vec![0.0; n * n];
            for (j, c) in cols.iter().enumerate() {
                for i in 0..n {
                    q[i * n + j] = c[i];
                }
            }
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(f: &PluFactors, n: usize) -> Vec<f64> {
        let lu = matmul_square(&f.lower, &f.upper, n);
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = lu[f.perm[i] * n + j];
            }
        }
        out
    }

    #[test]
    fn plu_reconstructs() {
        let mut rng = CounterRng::new(5);
        for n in 1..6 {
            let a = rng.normals(n * n);
            let f = plu(&a, n).unwrap();
            let r = reconstruct(&f, n);
            for (x, y) in a.iter().zip(&r) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn det_and_inverse() {
        let a = [0.0, 2.0, 3.0, 1.0];
        let (log, sign) = log_abs_det(&a, 2).unwrap();
        assert!((log - 6f64.ln()).abs() < 1e-15);
        assert_eq!(sign, -1.0);
        let inv = inverse(&a, 2).unwrap();
        let p = matmul_square(&a, &inv, 2);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        assert!(inverse(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
        assert!(log_abs_det(&[0.0; 4], 2).is_none());
    }

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = CounterRng::new(1);
        let q = random_orthogonal(5, &mut rng);
        let mut qt = vec![0.0; 25];
        for i in 0..5 {
            for j in 0..5 {
                qt[j * 5 + i] = q[i * 5 + j];
            }
        }
        let p = matmul_square(&q, &qt, 5);
        for i in 0..5 {
            for j in 0..5 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i * 5 + j] - e).abs() < 1e-12);
            }
        }
    }
}
