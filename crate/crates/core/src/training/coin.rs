use crate::error::{Error, Result};

/// Likelihood table of a Bernoulli parameter on a regular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CoinTable {
    pub p_hat: f64,
    /// `(p, L(p))` for every grid point in increasing `p`.
    pub rows: Vec<(f64, f64)>,
}

/// `L(p) = p^s (1−p)^(t−s)` on `{step, 2·step, …} ∩ (0, 1)`; ties go to the
/// smallest `p`.
///
/// When `1/step` is an integer `n`, `p = k/n` is handled as a rational and
/// `L = k^s (n−k)^(t−s) / n^t` is formed in integers and divided once, which
/// gives the correctly rounded value of the exact likelihood.
pub fn coin_mle(successes: u64, trials: u64, grid_step: f64) -> Result<CoinTable> {
    if successes > trials {
        return Err(Error::invalid("successes exceed trials"));
    }
    if !(grid_step > 0.0 && grid_step < 1.0) {
        return Err(Error::invalid("grid step must be in (0, 1)"));
    }
    let inv = 1.0 / grid_step;
    let n = inv.round();
    let rational = (inv - n).abs() < 1e-9 * n;
    let fails = trials - successes;

    let rows: Vec<(f64, f64)> = if rational {
        let n = n as u64;
        (1..n)
            .map(|k| {
                let p = k as f64 / n as f64;
                (
                    p,
                    exact_likelihood(k, n, successes, fails)
                        .unwrap_or_else(|| float_likelihood(p, successes, fails)),
                )
            })
            .collect()
    } else {
        let mut out = Vec::new();
        let mut k = 1u64;
        loop {
            let p = k as f64 * grid_step;
            if p >= 1.0 {
                break;
            }
            out.push((p, float_likelihood(p, successes, fails)));
            k += 1;
        }
        out
    };
    let mut best = rows[0];
    for &r in &rows[1..] {
        if r.1 > best.1 {
            best = r;
        }
    }
    Ok(CoinTable {
        p_hat: best.0,
        rows,
    })
}

fn exact_likelihood(k: u64, n: u64, s: u64, f: u64) -> Option<f64> {
    const EXACT: u128 = 1 << 53;
    let pow = |b: u64, e: u64| -> Option<u128> {
        let mut acc: u128 = 1;
        for _ in 0..e {
            acc = acc.checked_mul(b as u128)?;
        }
        Some(acc)
    };
    let num = pow(k, s)?.checked_mul(pow(n - k, f)?)?;
    let den = pow(n, s + f)?;
    (num <= EXACT && den <= EXACT).then(|| num as f64 / den as f64)
}

fn float_likelihood(p: f64, s: u64, f: u64) -> f64 {
    p.powf(s as f64) * (1.0 - p).powf(f as f64)
}
