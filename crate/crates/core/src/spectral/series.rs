//! Eigenvalue series: the resolvent deviation series, partial sums of
//! `Σ λ_n^{-α}`, and growth exponents of eigenfunction sup-norms.
//!
//! Tail estimates assume Weyl growth `λ_n ≈ c·n` in two dimensions, with `c`
//! fitted on the last quarter of the computed eigenvalues. They are reported
//! for context and never asserted.

use serde::{Deserialize, Serialize};

use super::eigen::EigenSystem;
use crate::discretization::{DofMap, Mesh};
use crate::error::{Error, Result};
use crate::harness::fit::fit_loglog_slope;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    /// `(Σ_{n≤k} |1/(λ̃_n+1) − 1/(λ_n+1)|^r)^{1/r}`, the maximum for `r = ∞`.
    pub value: f64,
    pub terms: usize,
    /// Estimated contribution of `n > k` to the `r`-th power sum.
    pub tail_estimate: f64,
}

/// Weyl constant `c` in `λ_n ≈ c·n`, from the last quarter of positive values.
fn weyl_constant(values: &[f64]) -> Option<f64> {
    let k = values.len();
    let start = (3 * k / 4).max(1);
    let ratios: Vec<f64> = (start..k)
        .filter(|&i| values[i] > 0.0)
        .map(|i| values[i] / (i + 1) as f64)
        .collect();
    (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
}

pub fn deviation_series(lambda: &[f64], lambda_tilde: &[f64], r: f64) -> Result<SeriesValue> {
    if lambda.len() != lambda_tilde.len() {
        return Err(Error::SizeMismatch {
            expected: lambda.len(),
            found: lambda_tilde.len(),
        });
    }
    if !(r >= 1.0) {
        return Err(Error::InvalidParameter(format!("series exponent r = {r} must be ≥ 1")));
    }
    let terms: Vec<f64> = lambda
        .iter()
        .zip(lambda_tilde)
        .map(|(&l, &lt)| (1.0 / (lt + 1.0) - 1.0 / (l + 1.0)).abs())
        .collect();
    let k = terms.len();
    let value = super::schatten::schatten_norm(&terms, r);
    // Tail: relative deviation frozen at its last computed level q,
    // term_n ≈ q/(c n), summed from k+1 to ∞.
    let tail_estimate = match (r.is_finite(), weyl_constant(lambda), k) {
        (true, Some(c), k) if k > 0 && r > 1.0 => {
            let l = lambda[k - 1];
            let q = if l.abs() > 0.0 { (lambda_tilde[k - 1] - l).abs() / l.abs() } else { 0.0 };
            (q / c).powf(r) * (k as f64).powf(1.0 - r) / (r - 1.0)
        }
        _ => 0.0,
    };
    Ok(SeriesValue {
        value,
        terms: k,
        tail_estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CStarReport {
    pub alpha: f64,
    pub partial: f64,
    /// Partial sums after each nonzero eigenvalue.
    pub partial_sums: Vec<f64>,
    /// Fitted exponent of the increments `λ_n^{-α}` against `n`.
    pub increment_decay: Option<f64>,
    /// Set when the increments do not decay faster than `1/n`, or `α ≤ 1`.
    pub non_summable: bool,
    pub tail_estimate: f64,
}

/// Partial sums of `Σ_{λ_n ≠ 0} λ_n^{-α}`.
pub fn cstar_partial(lambda: &[f64], alpha: f64) -> CStarReport {
    let scale = lambda.iter().fold(0.0f64, |m, &l| m.max(l.abs())).max(1.0);
    let nonzero: Vec<f64> = lambda.iter().copied().filter(|&l| l.abs() > 1e-10 * scale).collect();
    let mut sums = Vec::with_capacity(nonzero.len());
    let mut s = 0.0;
    for &l in &nonzero {
        s += l.powf(-alpha);
        sums.push(s);
    }
    let increment_decay = (nonzero.len() >= 6)
        .then(|| {
            let start = nonzero.len() / 2;
            let ns: Vec<f64> = (start..nonzero.len()).map(|i| (i + 1) as f64).collect();
            let inc: Vec<f64> = nonzero[start..].iter().map(|l| l.powf(-alpha)).collect();
            fit_loglog_slope(&ns, &inc).ok().map(|f| f.slope)
        })
        .flatten();
    let non_summable = alpha <= 1.0 || increment_decay.is_some_and(|d| d >= -1.0);
    let tail_estimate = match weyl_constant(&nonzero) {
        Some(c) if !non_summable => c.powf(-alpha) * (nonzero.len() as f64).powf(1.0 - alpha) / (alpha - 1.0),
        _ => f64::INFINITY,
    };
    CStarReport {
        alpha,
        partial: s,
        partial_sums: sums,
        increment_decay,
        non_summable,
        tail_estimate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyPFit {
    /// Fitted exponent of `‖ψ_n‖_∞` against `λ_n`.
    pub gamma_p1: f64,
    /// Fitted exponent of `‖∇ψ_n‖_∞` against `λ_n`.
    pub gamma_p2: f64,
    pub r_squared: (f64, f64),
    /// Eigenpair indices used (zero-based, inclusive).
    pub range: (usize, usize),
}

/// Fits sup-norm growth of eigenfunctions and their gradients over the
/// eigenpairs `range.0..=range.1` with `λ_n ≠ 0`.
pub fn property_p_fit(system: &EigenSystem, mesh: &Mesh, dofs: &DofMap, range: (usize, usize)) -> Result<PropertyPFit> {
    let (lo, hi) = range;
    if hi >= system.len() || lo > hi {
        return Err(Error::InvalidParameter(format!(
            "range {lo}..={hi} outside the {} computed pairs",
            system.len()
        )));
    }
    let scale = system.values.iter().fold(0.0f64, |m, &l| m.max(l.abs())).max(1.0);
    let mut lams = Vec::new();
    let mut amp = Vec::new();
    let mut grad = Vec::new();
    for n in lo..=hi {
        let l = system.values[n];
        if l.abs() <= 1e-10 * scale {
            continue;
        }
        let u = dofs.extend(&system.vector(n));
        let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gsup = (0..mesh.element_count())
            .map(|e| {
                let t = mesh.triangles[e];
                let g = mesh.gradients[e];
                let gx: f64 = (0..3).map(|k| u[t[k]] * g[k][0]).sum();
                let gy: f64 = (0..3).map(|k| u[t[k]] * g[k][1]).sum();
                gx.hypot(gy)
            })
            .fold(0.0, f64::max);
        lams.push(l);
        amp.push(sup);
        grad.push(gsup);
    }
    if lams.len() < 3 {
        return Err(Error::TooFewPoints { usable: lams.len() });
    }
    let f1 = fit_loglog_slope(&lams, &amp)?;
    let f2 = fit_loglog_slope(&lams, &grad)?;
    Ok(PropertyPFit {
        gamma_p1: f1.slope,
        gamma_p2: f2.slope,
        r_squared: (f1.r_squared, f2.r_squared),
        range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_arithmetic() {
        let v = deviation_series(&[1.0, 2.0], &[1.0, 3.0], 2.0).unwrap();
        assert!((v.value - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(deviation_series(&[1.0, 2.0], &[1.0, 2.0], 3.0).unwrap().value, 0.0);
        let inf = deviation_series(&[1.0, 2.0, 5.0], &[1.5, 2.0, 5.0], f64::INFINITY).unwrap();
        assert!((inf.value - (0.5 - 0.4)).abs() < 1e-15);
        assert!(deviation_series(&[1.0], &[1.0, 2.0], 2.0).is_err());
    }

    #[test]
    fn cstar_single_value_and_weyl_sequences() {
        let one = cstar_partial(&[4.0], 2.0);
        assert!((one.partial - 1.0 / 16.0).abs() < 1e-15);
        let lin: Vec<f64> = (1..=200).map(|n| 5.0 * n as f64).collect();
        let ok = cstar_partial(&lin, 2.0);
        assert!(!ok.non_summable);
        assert!((ok.increment_decay.unwrap() + 2.0).abs() < 1e-9);
        let bad = cstar_partial(&lin, 0.9);
        assert!(bad.non_summable);
        // Zero eigenvalues are skipped.
        assert_eq!(cstar_partial(&[0.0, 1.0], 1.5).partial, 1.0);
    }
}
