//! Numerical self-checks of a chain: inverse round-trip error and agreement
//! of the analytic log-determinant with a finite-difference Jacobian.

use crate::bijectors::Bijector;
use crate::error::{Error, Result};
use crate::linalg;
use crate::ndcore::Tensor;
use crate::par;

/// Central-difference step used by [`audit`].
pub const JACOBIAN_STEP: f64 = 1e-5;

/// Relative error with a unit floor, `|a − b| / max(1, |b|)`, so values near
/// zero are compared absolutely.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Central-difference Jacobian at `x`, row-major `[dim, dim]`, with
/// `J[i][j] = ∂fᵢ/∂xⱼ`.
pub fn numerical_jacobian<B: Bijector + ?Sized>(b: &B, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let d = x.len();
    let mut probes = Vec::with_capacity(2 * d * d);
    for j in 0..d {
        for sign in [1.0, -1.0] {
            let mut p = x.to_vec();
            p[j] += sign * h;
            probes.extend(p);
        }
    }
    let (y, _) = b.forward(&Tensor::matrix(2 * d, d, probes)?)?;
    let mut jac = vec![0.0; d * d];
    for j in 0..d {
        let (plus, minus) = (y.row(2 * j), y.row(2 * j + 1));
        for i in 0..d {
            jac[i * d + j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// `ln|det J|` of the finite-difference Jacobian via pivoted LU.
pub fn numerical_log_det<B: Bijector + ?Sized>(b: &B, x: &[f64], h: f64) -> Result<f64> {
    let jac = numerical_jacobian(b, x, h)?;
    linalg::log_abs_det(&jac, x.len())
        .map(|(ld, _)| ld)
        .ok_or_else(|| Error::invalid("finite-difference Jacobian is singular"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub probes: usize,
    /// `max |x − inverse(forward(x))|` over all probe coordinates.
    pub max_round_trip: f64,
    /// Largest [`relative_error`] between analytic and numerical log-dets.
    pub max_log_det_error: f64,
    /// Probe index attaining `max_log_det_error`.
    pub worst_probe: usize,
}

impl AuditReport {
    pub fn passes(&self, round_trip_tol: f64, log_det_tol: f64) -> bool {
        self.max_round_trip < round_trip_tol && self.max_log_det_error < log_det_tol
    }
}

/// Runs both checks over the rows of `probes`. A probe whose numerical
/// Jacobian is singular counts as an infinite log-det error.
pub fn audit<B: Bijector + Sync + ?Sized>(b: &B, probes: &Tensor) -> Result<AuditReport> {
    let (z, ld) = b.forward(probes)?;
    let (back, _) = b.inverse(&z)?;
    let max_round_trip = back.max_abs_diff(probes);
    let errs = par::map_range(probes.rows(), |i| {
        let jac = numerical_jacobian(b, probes.row(i), JACOBIAN_STEP)?;
        Ok::<f64, Error>(match linalg::log_abs_det(&jac, probes.cols()) {
            Some((num, _)) => relative_error(ld[i], num),
            None => f64::INFINITY,
        })
    });
    let mut worst = (0.0, 0);
    for (i, e) in errs.into_iter().enumerate() {
        let e: f64 = e?;
        if e > worst.0 || e.is_nan() {
            worst = (e, i);
        }
    }
    Ok(AuditReport {
        probes: probes.rows(),
        max_round_trip,
        max_log_det_error: worst.0,
        worst_probe: worst.1,
    })
}
