//! Factorised severity mechanism `P(S=1|V,A,T,W) = f0(T) g(V,A) h^V(W) f1(A,T)`.

mod estimate;
mod waning;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, STATES};

pub use estimate::{
    estimate_f0, estimate_g0, estimate_gv, fit_factorization, impute_unidentified, mean_h, EstimationOptions,
    Weighting,
};
pub use waning::{
    fit_waning, EfficacyPeriod, LogisticShape, WaningCurve, SECOND_DOSE_EFFICACY, SEVERITY_FULL_EFFICACY,
};

/// The four factors of the severity mechanism for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityFactorization {
    /// Time dependence `f0(t)`.
    pub f0: Vec<f64>,
    /// Risk factors `g(v, a)`, indexed `[a][v]`.
    pub g: Vec<[f64; STATES]>,
    /// `false` where `g(v, a)` could not be estimated and was imputed.
    pub identified: Vec<[bool; STATES]>,
    pub waning: WaningCurve,
    /// Correction factor `f1(a, t)`, all ones for the factual strategy.
    pub f1: Vec<Vec<f64>>,
}

impl SeverityFactorization {
    pub fn new(f0: Vec<f64>, g: Vec<[f64; STATES]>, waning: WaningCurve) -> Self {
        let f1 = vec![vec![1.0; f0.len()]; g.len()];
        let identified = vec![[true; STATES]; g.len()];
        SeverityFactorization {
            f0,
            g,
            identified,
            waning,
            f1,
        }
    }

    pub fn weeks(&self) -> usize {
        self.f0.len()
    }

    pub fn age_groups(&self) -> usize {
        self.g.len()
    }

    pub fn with_f1(mut self, f1: Vec<Vec<f64>>) -> Result<Self> {
        if f1.len() != self.g.len() || f1.iter().any(|r| r.len() != self.f0.len()) {
            return Err(Error::InvalidConfig("correction factor shape does not match factorisation".into()));
        }
        self.f1 = f1;
        Ok(self)
    }

    pub fn with_waning(mut self, waning: WaningCurve) -> Self {
        self.waning = waning;
        self
    }

    /// `P(S=1 | v, a, t, w)`.
    pub fn probability(&self, v: usize, a: usize, t: usize, w: usize) -> f64 {
        self.f0[t] * self.g[a][v] * self.waning.h(v, w as f64) * self.f1[a][t]
    }
}
