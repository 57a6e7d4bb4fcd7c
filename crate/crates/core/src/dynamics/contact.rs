//! Contact matrix `C = (1 - γ) I + γ ρ 1ᵀ`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SPECTRAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactMatrix {
    pub gamma: f64,
    pub rho: Vec<f64>,
}

impl ContactMatrix {
    /// Builds the matrix for mixing factor `gamma` and group populations.
    pub fn new(gamma: f64, populations: &[f64]) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidConfig(format!("mixing factor {gamma} outside [0, 1]")));
        }
        let total: f64 = populations.iter().sum();
        if populations.is_empty() || populations.iter().any(|&p| !(p > 0.0)) || !total.is_finite() {
            return Err(Error::InvalidConfig("populations must be positive".into()));
        }
        let c = ContactMatrix {
            gamma,
            rho: populations.iter().map(|p| p / total).collect(),
        };
        c.check_spectrum()?;
        Ok(c)
    }

    pub fn size(&self) -> usize {
        self.rho.len()
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        let own = if a == b { 1.0 - self.gamma } else { 0.0 };
        own + self.gamma * self.rho[a]
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        (0..n).map(|a| (0..n).map(|b| self.entry(a, b)).collect()).collect()
    }

    /// `C x` in `O(n)`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let sum: f64 = x.iter().sum();
        for (a, o) in out.iter_mut().enumerate() {
            *o = (1.0 - self.gamma) * x[a] + self.gamma * self.rho[a] * sum;
        }
    }

    /// Columns sum to one and `C ρ = ρ`; the remaining eigenvalues equal `1 - γ`.
    fn check_spectrum(&self) -> Result<()> {
        let n = self.size();
        let mut out = vec![0.0; n];
        self.apply(&self.rho, &mut out);
        let drift = out.iter().zip(&self.rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let column = (0..n)
            .map(|b| ((0..n).map(|a| self.entry(a, b)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        if drift > SPECTRAL_TOL || column > SPECTRAL_TOL {
            return Err(Error::Numerical(format!(
                "contact matrix violates spectral invariants (drift {drift:e}, column {column:e})"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_mixing() {
        let c = ContactMatrix::new(0.0, &[1.0, 3.0]).unwrap();
        assert_eq!(c.dense(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let c = ContactMatrix::new(1.0, &[5.0, 5.0]).unwrap();
        assert_eq!(c.dense(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(ContactMatrix::new(1.5, &[1.0]).is_err());
        assert!(ContactMatrix::new(-0.1, &[1.0]).is_err());
    }

    #[test]
    fn apply_matches_dense_product() {
        let c = ContactMatrix::new(0.8, &[3.0, 1.0, 2.0]).unwrap();
        let x = [0.3, 2.0, -1.0];
        let mut out = [0.0; 3];
        c.apply(&x, &mut out);
        for (a, row) in c.dense().iter().enumerate() {
            let expect: f64 = row.iter().zip(&x).map(|(m, v)| m * v).sum();
            assert!((out[a] - expect).abs() < 1e-15);
        }
    }
}
