use std::f64::consts::PI;

use num_complex::Complex64;

use super::rational::RationalFunction;
use super::NumericError;

/// Sampled frequency response over an ascending grid of angular frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseTable {
    pub omega: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl ResponseTable {
    pub fn new(omega: Vec<f64>, values: Vec<Complex64>) -> Result<Self, NumericError> {
        check_grid(&omega)?;
        if values.len() != omega.len() {
            return Err(NumericError::Dimension(format!(
                "{} values for {} frequencies",
                values.len(),
                omega.len()
            )));
        }
        Ok(ResponseTable { omega, values })
    }

    pub fn sample(rf: &RationalFunction, omega: &[f64]) -> Result<Self, NumericError> {
        let values = omega.iter().map(|&w| rf.at_jw(w)).collect::<Result<Vec<_>, _>>()?;
        Self::new(omega.to_vec(), values)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn freq_hz(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w / (2.0 * PI)).collect()
    }
}

pub(crate) fn check_grid(omega: &[f64]) -> Result<(), NumericError> {
    if omega.is_empty() {
        return Err(NumericError::InvalidGrid("empty".into()));
    }
    if omega.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(NumericError::InvalidGrid("frequencies must be positive and finite".into()));
    }
    if omega.windows(2).any(|p| p[1] <= p[0]) {
        return Err(NumericError::InvalidGrid("frequencies must be strictly ascending".into()));
    }
    Ok(())
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Logarithmic grid specified in hertz, returned in rad/s.
pub fn hz_log_grid(f_lo: f64, f_hi: f64, n: usize) -> Vec<f64> {
    log_grid(f_lo, f_hi, n).into_iter().map(|f| 2.0 * PI * f).collect()
}
