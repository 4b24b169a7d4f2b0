//! Least-squares slope fits on log–log data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values below this are treated as numerical zero and dropped from fits.
pub const NUMERICAL_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Indices of input points excluded by the floor.
    pub excluded: Vec<usize>,
}

/// Fits `log y = slope·log x + intercept`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::SizeMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        if x > 0.0 && y >= NUMERICAL_FLOOR && x.is_finite() && y.is_finite() {
            pts.push((x.ln(), y.ln()));
        } else {
            excluded.push(i);
        }
    }
    if pts.len() < 3 {
        return Err(Error::TooFewPoints { usable: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_power_laws() {
        let xs = [0.1, 0.05, 0.025, 0.0125];
        let f1 = fit_loglog_slope(&xs, &xs).unwrap();
        assert!((f1.slope - 1.0).abs() < 1e-12 && (f1.r_squared - 1.0).abs() < 1e-12);
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!((fit_loglog_slope(&xs, &ys).unwrap().slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_square_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..8).map(|k| 0.2 * 0.5f64.powi(k)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sqrt() * (1.0 + rng.random_range(-0.01..0.01))).collect();
        let f = fit_loglog_slope(&xs, &ys).unwrap();
        assert!((f.slope - 0.5).abs() < 0.05);
    }

    #[test]
    fn floor_and_count() {
        let f = fit_loglog_slope(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 9.0, 16.0]).unwrap();
        assert_eq!(f.excluded, vec![1]);
        assert!(matches!(fit_loglog_slope(&[1.0, 2.0, 3.0], &[1.0, 1e-14, 2.0]), Err(Error::TooFewPoints { usable: 2 })));
    }
}
