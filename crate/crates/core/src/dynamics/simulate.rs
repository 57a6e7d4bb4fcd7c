//! Daily discrete renewal recursion.

use log::warn;
use serde::{Deserialize, Serialize};

use super::contact::ContactMatrix;
use super::params::{generation_kernel, DynamicsParams, GENERATION_MEAN, GENERATION_SD, KERNEL_LEN, PROTECTION, REPORTING_DELAY};
use crate::severity::WaningCurve;
use crate::strategy::CohortTable;
use crate::{Error, Result, DOSES, STATES};

/// Days simulated before the window: the reporting window of week 0 reaches back
/// `REPORTING_DELAY + 7` days, which also covers the kernel support.
pub const PRE_WINDOW_DAYS: usize = REPORTING_DELAY + 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub gamma: f64,
    pub kernel: [f64; KERNEL_LEN],
    pub protection: [f64; DOSES],
    pub reporting_delay: usize,
    /// Multiply transmission by `S_a / D_a`.
    pub depletion: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            gamma: 0.8,
            kernel: generation_kernel(GENERATION_MEAN, GENERATION_SD).expect("default kernel"),
            protection: PROTECTION,
            reporting_delay: REPORTING_DELAY,
            depletion: true,
        }
    }
}

impl ModelConfig {
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidConfig(format!("mixing factor {gamma} outside [0, 1]")));
        }
        self.gamma = gamma;
        Ok(self)
    }
}

/// Daily exposures before the window, oldest day first, `[a][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeding {
    pub daily: Vec<Vec<f64>>,
}

impl Seeding {
    /// Constant daily exposures such that the first modelled week reproduces
    /// `first_week_cases`; the reporting window spans eight days.
    pub fn from_first_week(first_week_cases: &[f64]) -> Self {
        Seeding {
            daily: first_week_cases
                .iter()
                .map(|&c| vec![c / 8.0; PRE_WINDOW_DAYS])
                .collect(),
        }
    }
}

/// `Infectability = Unv + Σ_v Vacc^v (1 - μ^v W^v_eff)`.
pub fn infectability(fractions: [f64; STATES], w_eff: [f64; DOSES], protection: [f64; DOSES]) -> f64 {
    fractions[0]
        + (0..DOSES)
            .map(|i| fractions[i + 1] * (1.0 - protection[i] * w_eff[i]))
            .sum::<f64>()
}

/// Infectability per `[a][t]` for the cohorts of a strategy. `W^v_eff` is the
/// mass-weighted mean of `VE_norm` over waning times.
pub fn infectability_table(cohorts: &CohortTable, waning: &WaningCurve, protection: [f64; DOSES]) -> Vec<Vec<f64>> {
    let m = cohorts.weeks();
    let ve: Vec<f64> = (0..m).map(|w| waning.ve_norm(w as f64)).collect();
    (0..cohorts.age_groups())
        .map(|a| {
            (0..m)
                .map(|t| {
                    let mut fractions = [0.0; STATES];
                    let mut w_eff = [0.0; DOSES];
                    for v in 0..STATES {
                        let mass = cohorts.masses(a, v, t);
                        fractions[v] = mass.iter().sum();
                        if v > 0 && fractions[v] > 0.0 {
                            w_eff[v - 1] =
                                mass.iter().zip(&ve).map(|(p, e)| p * e).sum::<f64>() / fractions[v];
                        }
                    }
                    infectability(fractions, w_eff, protection)
                })
                .collect()
        })
        .collect()
}

/// Trajectory of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicState {
    pub weeks: usize,
    /// Daily exposures incl. influx, `[a][PRE_WINDOW_DAYS + day]`.
    pub exposures: Vec<Vec<f64>>,
    /// Susceptibles at the start of each window day and after the last, `[a][day]`.
    pub susceptibles: Vec<Vec<f64>>,
    /// Daily influx `h_a(day)`, `[a][day]`.
    pub influx: Vec<Vec<f64>>,
    /// Modelled reported cases `Ĉ_a(t)`.
    pub weekly_cases: Vec<Vec<f64>>,
    /// Exposures during week `t`.
    pub weekly_exposures: Vec<Vec<f64>>,
    /// Weekly exposures over susceptibles at the week start.
    pub infection_probability: Vec<Vec<f64>>,
}

impl EpidemicState {
    /// Exposures on window day `day` (negative for the seeded days).
    pub fn exposure(&self, a: usize, day: i64) -> f64 {
        self.exposures[a][(day + PRE_WINDOW_DAYS as i64) as usize]
    }

    pub fn cumulative_infections(&self, a: usize) -> f64 {
        self.weekly_exposures[a].iter().sum()
    }
}

/// Renewal simulator for fixed populations, contact structure and seeding.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub config: ModelConfig,
    pub contact: ContactMatrix,
    pub populations: Vec<f64>,
    pub weeks: usize,
    pub seeding: Seeding,
}

impl Simulator {
    pub fn new(config: ModelConfig, populations: Vec<f64>, weeks: usize, seeding: Seeding) -> Result<Self> {
        let contact = ContactMatrix::new(config.gamma, &populations)?;
        if seeding.daily.len() != populations.len()
            || seeding.daily.iter().any(|s| s.len() != PRE_WINDOW_DAYS || s.iter().any(|&x| !(x >= 0.0)))
        {
            return Err(Error::InvalidConfig(format!(
                "seeding needs {PRE_WINDOW_DAYS} non-negative days per age group"
            )));
        }
        if config.reporting_delay + 7 > PRE_WINDOW_DAYS {
            return Err(Error::InvalidConfig("reporting delay longer than the seeded period".into()));
        }
        Ok(Simulator {
            config,
            contact,
            populations,
            weeks,
            seeding,
        })
    }

    pub fn age_groups(&self) -> usize {
        self.populations.len()
    }

    /// Runs the recursion over all window days.
    ///
    /// `S(d + 1) = S(d) - (E(d) - h(d))`: imported infections do not deplete the
    /// susceptible pool, so `Σ E + S = D + Σ h` holds on every day.
    pub fn run(&self, params: &DynamicsParams, infectability: &[Vec<f64>]) -> Result<EpidemicState> {
        let n = self.age_groups();
        let m = self.weeks;
        let days = 7 * m;
        params.validate(n, m)?;
        if infectability.len() != n || infectability.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidConfig("infectability table does not match window".into()));
        }
        let kernel = &self.config.kernel;
        let mut exposures: Vec<Vec<f64>> = self
            .seeding
            .daily
            .iter()
            .map(|s| {
                let mut e = Vec::with_capacity(PRE_WINDOW_DAYS + days);
                e.extend_from_slice(s);
                e
            })
            .collect();
        let mut susceptibles: Vec<Vec<f64>> = self
            .populations
            .iter()
            .map(|&d| {
                let mut s = Vec::with_capacity(days + 1);
                s.push(d);
                s
            })
            .collect();
        let influx: Vec<Vec<f64>> = params
            .ages
            .iter()
            .map(|p| (0..days).map(|d| p.influx[d / 7] / 7.0).collect())
            .collect();

        let mut sqrt_r = vec![0.0; n];
        let mut pressure = vec![0.0; n];
        let mut mixed = vec![0.0; n];
        for d in 0..days {
            let t = d / 7;
            let now = PRE_WINDOW_DAYS + d;
            for a in 0..n {
                let r_eff = params.base_reproduction(a, d as f64) * infectability[a][t];
                sqrt_r[a] = r_eff.max(0.0).sqrt();
                let past: f64 = (0..KERNEL_LEN).map(|tau| exposures[a][now - 1 - tau] * kernel[tau]).sum();
                pressure[a] = sqrt_r[a] * past;
            }
            self.contact.apply(&pressure, &mut mixed);
            for a in 0..n {
                let s = susceptibles[a][d];
                let share = if self.config.depletion { s / self.populations[a] } else { 1.0 };
                let e = sqrt_r[a] * mixed[a] * share + influx[a][d];
                let next = s - (e - influx[a][d]);
                if !e.is_finite() || e < 0.0 || next < -1e-9 * self.populations[a] {
                    return Err(Error::Numerical(format!(
                        "group {a}, day {d}: exposures {e}, susceptibles {next}"
                    )));
                }
                exposures[a].push(e);
                susceptibles[a].push(next);
            }
        }

        let delay = self.config.reporting_delay;
        let weekly_cases = exposures
            .iter()
            .map(|e| {
                (0..m)
                    .map(|t| {
                        // days 7t - delay - 7 ..= 7t - delay
                        let last = PRE_WINDOW_DAYS + 7 * t - delay;
                        e[last - 7..=last].iter().sum()
                    })
                    .collect()
            })
            .collect();
        let weekly_exposures: Vec<Vec<f64>> = exposures
            .iter()
            .map(|e| {
                (0..m)
                    .map(|t| e[PRE_WINDOW_DAYS + 7 * t..PRE_WINDOW_DAYS + 7 * t + 7].iter().sum())
                    .collect()
            })
            .collect();
        let infection_probability = weekly_exposures
            .iter()
            .zip(&susceptibles)
            .map(|(w, s)| {
                (0..m)
                    .map(|t| if s[7 * t] > 0.0 { w[t] / s[7 * t] } else { 0.0 })
                    .collect()
            })
            .collect();
        Ok(EpidemicState {
            weeks: m,
            exposures,
            susceptibles,
            influx,
            weekly_cases,
            weekly_exposures,
            infection_probability,
        })
    }
}

/// Correction factor `f1(a, t)` with the cells whose factual probability vanished.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionFactor {
    pub f1: Vec<Vec<f64>>,
    pub flagged: Vec<(usize, usize)>,
}

/// Ratio of counterfactual to factual weekly infection probabilities. Cells with a
/// zero factual probability and a positive counterfactual one are set to 1 and flagged.
pub fn correction_factor(factual: &EpidemicState, counterfactual: &EpidemicState) -> Result<CorrectionFactor> {
    if factual.infection_probability.len() != counterfactual.infection_probability.len()
        || factual.weeks != counterfactual.weeks
    {
        return Err(Error::InvalidConfig("runs cover different groups or windows".into()));
    }
    let mut flagged = Vec::new();
    let f1 = factual
        .infection_probability
        .iter()
        .zip(&counterfactual.infection_probability)
        .enumerate()
        .map(|(a, (p, q))| {
            p.iter()
                .zip(q)
                .enumerate()
                .map(|(t, (&p, &q))| {
                    if p > 0.0 {
                        q / p
                    } else {
                        if q > 0.0 {
                            flagged.push((a, t));
                        }
                        1.0
                    }
                })
                .collect()
        })
        .collect();
    if !flagged.is_empty() {
        warn!("{} correction factors with zero factual infection probability set to 1", flagged.len());
    }
    Ok(CorrectionFactor { f1, flagged })
}
