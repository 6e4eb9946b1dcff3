//! Ordinary least-squares line fits.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub rms_residual: f64,
}

pub fn least_squares_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "abscissa and ordinate lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "a line fit needs at least 2 points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample in line fit".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        rms_residual: (ss / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_degenerate_input() {
        assert!(least_squares_line(&[1.0], &[2.0]).is_err());
        assert!(least_squares_line(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(least_squares_line(&[1.0, 2.0], &[2.0]).is_err());
        assert!(least_squares_line(&[1.0, f64::NAN], &[2.0, 3.0]).is_err());
    }

    proptest! {
        #[test]
        fn exact_lines_are_recovered(a in -5.0f64..5.0, b in -5.0f64..5.0, n in 3usize..40) {
            let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.37 - 2.0).collect();
            let y: Vec<f64> = x.iter().map(|xi| a * xi + b).collect();
            let fit = least_squares_line(&x, &y).unwrap();
            prop_assert!((fit.slope - a).abs() < 1e-10);
            prop_assert!((fit.intercept - b).abs() < 1e-10);
            prop_assert!(fit.rms_residual < 1e-10);
        }
    }
}
