//! Student-t observation model and the unnormalised log posterior.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::prior::{log_prior, Layout, PriorSpec};
use crate::data::ObservedDataset;
use crate::dynamics::{infectability_table, DynamicsParams, ModelConfig, Seeding, Simulator, CHANGE_POINTS, CHANGE_POINT_SPACING};
use crate::severity::WaningCurve;
use crate::{Error, Result};

/// Degrees of freedom of the observation noise.
pub const STUDENT_DF: f64 = 4.0;

/// `log StudentT(x | ν = 4, μ, σ)` with `σ = κ sqrt(μ + 1)`.
pub fn case_log_likelihood(observed: f64, modelled: f64, kappa: f64) -> f64 {
    let sigma = kappa * (modelled.max(0.0) + 1.0).sqrt();
    let nu = STUDENT_DF;
    let r = (observed - modelled) / sigma;
    ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln() - sigma.ln()
        - (nu + 1.0) / 2.0 * (r * r / nu).ln_1p()
}

/// Sum of [`case_log_likelihood`] over all observed `(a, t)` cells.
pub fn log_likelihood(observed: &[Vec<f64>], modelled: &[Vec<f64>], kappa: f64) -> f64 {
    observed
        .iter()
        .zip(modelled)
        .flat_map(|(o, m)| o.iter().zip(m))
        .map(|(&o, &m)| case_log_likelihood(o, m, kappa))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Multiplier of the log likelihood; `0` skips simulation and samples the prior.
    pub likelihood_weight: f64,
    /// Holds `κ` at this value instead of sampling it.
    pub fixed_kappa: Option<f64>,
    pub anchor_day: f64,
    pub spacing: f64,
    pub change_points: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            likelihood_weight: 1.0,
            fixed_kappa: None,
            anchor_day: 21.0,
            spacing: CHANGE_POINT_SPACING,
            change_points: CHANGE_POINTS,
        }
    }
}

/// Everything needed to evaluate the log posterior of one dataset.
#[derive(Debug, Clone)]
pub struct PosteriorModel {
    pub simulator: Simulator,
    /// Factual infectability under regular waning, `[a][t]`.
    pub infectability: Vec<Vec<f64>>,
    pub observed: Vec<Vec<f64>>,
    pub populations: Vec<f64>,
    pub layout: Layout,
    pub prior: PriorSpec,
    pub options: ModelOptions,
}

/// Log posterior split into its parts; `modelled` is `None` when not simulated.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub modelled: Option<Vec<Vec<f64>>>,
}

impl Evaluation {
    pub fn log_posterior(&self, weight: f64) -> f64 {
        if weight == 0.0 {
            self.log_prior
        } else {
            self.log_prior + weight * self.log_likelihood
        }
    }
}

impl PosteriorModel {
    pub fn new(
        data: &ObservedDataset,
        config: ModelConfig,
        waning: &WaningCurve,
        prior: PriorSpec,
        options: ModelOptions,
    ) -> Result<Self> {
        prior.validate()?;
        if !(options.likelihood_weight >= 0.0 && options.likelihood_weight.is_finite()) {
            return Err(Error::InvalidConfig("likelihood weight must be finite and non-negative".into()));
        }
        if let Some(k) = options.fixed_kappa {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidConfig(format!("fixed κ {k} must be positive")));
            }
        }
        let infectability = infectability_table(&data.cohorts, waning, config.protection);
        let first: Vec<f64> = data.cases.iter().map(|c| c[0]).collect();
        let populations = data.populations();
        let simulator = Simulator::new(config, populations.clone(), data.weeks(), Seeding::from_first_week(&first))?;
        Ok(PosteriorModel {
            simulator,
            infectability,
            observed: data.cases.clone(),
            layout: Layout {
                groups: data.age_groups(),
                change_points: options.change_points,
                weeks: data.weeks(),
            },
            populations,
            prior,
            options,
        })
    }

    pub fn with_kappa(&self) -> bool {
        self.options.fixed_kappa.is_none()
    }

    pub fn decode(&self, theta: &[f64]) -> (DynamicsParams, Vec<f64>, f64) {
        let (params, sigma, kappa) = self.layout.decode(theta, self.options.anchor_day, self.options.spacing);
        (params, sigma, self.options.fixed_kappa.unwrap_or(kappa))
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        log_prior(theta, &self.layout, &self.prior, &self.populations, self.with_kappa())
    }

    /// Modelled reported cases for `theta`; numerical failure yields `None`.
    pub fn modelled_cases(&self, theta: &[f64]) -> Option<Vec<Vec<f64>>> {
        let (params, _, _) = self.decode(theta);
        self.simulator
            .run(&params, &self.infectability)
            .ok()
            .map(|s| s.weekly_cases)
    }

    pub fn likelihood_from_cases(&self, modelled: &[Vec<f64>], theta: &[f64]) -> f64 {
        let (_, _, kappa) = self.decode(theta);
        let ll = log_likelihood(&self.observed, modelled, kappa);
        if ll.is_nan() {
            f64::NEG_INFINITY
        } else {
            ll
        }
    }

    pub fn evaluate(&self, theta: &[f64]) -> Evaluation {
        let log_prior = self.log_prior(theta);
        if self.options.likelihood_weight == 0.0 || log_prior == f64::NEG_INFINITY {
            return Evaluation {
                log_prior,
                log_likelihood: 0.0,
                modelled: None,
            };
        }
        match self.modelled_cases(theta) {
            Some(m) => Evaluation {
                log_prior,
                log_likelihood: self.likelihood_from_cases(&m, theta),
                modelled: Some(m),
            },
            None => Evaluation {
                log_prior,
                log_likelihood: f64::NEG_INFINITY,
                modelled: None,
            },
        }
    }

    /// Unnormalised log posterior; `-∞` outside the support or on numerical failure.
    pub fn log_posterior(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta).log_posterior(self.options.likelihood_weight)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Continuous, StudentsT};

    #[test]
    fn matches_statrs_student_t() {
        for (o, m, k) in [(10.0, 12.0, 1.0), (0.0, 300.0, 0.5), (1e4, 9e3, 3.0)] {
            let s = k * (m + 1.0f64).sqrt();
            let d = StudentsT::new(m, s, 4.0).unwrap();
            assert!((case_log_likelihood(o, m, k) - d.ln_pdf(o)).abs() < 1e-10);
        }
    }

    #[test]
    fn vanishing_kappa_diverges() {
        assert!(case_log_likelihood(10.0, 12.0, 1e-300) < -1e5);
    }

    #[test]
    fn doubling_observations_lowers_likelihood() {
        let obs = vec![vec![100.0, 200.0, 150.0]];
        let fit = obs.clone();
        let doubled: Vec<Vec<f64>> = obs.iter().map(|r| r.iter().map(|x| 2.0 * x).collect()).collect();
        assert!(log_likelihood(&doubled, &fit, 1.0) < log_likelihood(&obs, &fit, 1.0));
        assert!((log_likelihood(&doubled, &doubled, 1.0) - log_likelihood(&obs, &fit, 1.0)).abs() > 0.0);
    }
}
