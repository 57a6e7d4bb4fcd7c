//! Synthetic bundles generated from known severity factors and dynamics parameters.
//!
//! Dose counts follow per-group campaigns; the factual joint is reconstructed from them
//! exactly as for observed data. Severe counts are the exact expectations
//! `stratum population * f0(t) g(v,a) E[h^v(W)]`. Reported cases are the modelled
//! `Ĉ_a(t)`, optionally perturbed by Student-t noise and rounded.

use std::fs::File;
use std::path::Path;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use super::{
    israel_age_groups, save_dataset, validate_groups, AgeGroup, Calendar, ObservedDataset, SevereStratum,
};
use crate::dynamics::{infectability_table, ChangePoint, DynamicsParams, ModelConfig, Seeding, Simulator};
use crate::severity::{SeverityFactorization, WaningCurve};
use crate::{Error, Result, DOSES, STATES};

/// Vaccination campaign of one age group, weeks zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    /// First week of first doses.
    pub start: usize,
    /// Number of weeks over which first doses are spread evenly.
    pub duration: usize,
    /// Final uptake of dose 1, 2, 3 as fractions of the group.
    pub uptake: [f64; DOSES],
    /// Earliest week of third doses; boosters follow second doses by at least 12 weeks.
    pub booster_start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub start: NaiveDate,
    pub weeks: usize,
    pub groups: Vec<AgeGroup>,
    /// True risk factors `g(v, a)`, `[a][v]`.
    pub g: Vec<[f64; STATES]>,
    /// True time dependence `f0(t)`.
    pub f0: Vec<f64>,
    pub waning: WaningCurve,
    pub model: ModelConfig,
    pub params: DynamicsParams,
    /// Reported cases of the first week; seeds the simulation.
    pub initial_cases: Vec<f64>,
    pub campaigns: Vec<Campaign>,
    /// Scale `κ` of Student-t case noise; `None` keeps exact modelled cases.
    pub case_noise: Option<f64>,
}

/// Ground truth stored next to a synthetic bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub spec: SyntheticSpec,
    /// `R_base,a` at the middle of every week, `[a][t]`.
    pub r_base: Vec<Vec<f64>>,
    /// Noise-free modelled cases `[a][t]`.
    pub modelled_cases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SyntheticBundle {
    pub data: ObservedDataset,
    pub truth: SyntheticTruth,
}

fn two_waves(weeks: usize, base: f64, waves: &[(f64, f64, f64)]) -> Vec<f64> {
    (0..weeks)
        .map(|t| {
            let t = t as f64;
            base + waves
                .iter()
                .map(|&(peak, centre, width)| peak * (-((t - centre) / width).powi(2)).exp())
                .sum::<f64>()
        })
        .collect()
}

fn with_effects(weeks: usize, anchor_day: f64, r0: &[f64], effects: &[(usize, f64)], influx: &[f64]) -> DynamicsParams {
    let mut p = DynamicsParams::constant(r0, weeks, anchor_day);
    for (a, age) in p.ages.iter_mut().enumerate() {
        for &(n, effect) in effects {
            age.change_points[n] = ChangePoint {
                effect,
                length_raw: 4.0,
                shift: 0.0,
            };
        }
        age.influx = vec![influx[a]; weeks];
    }
    p
}

/// Weekly influx whose daily mean is `per_million` per million inhabitants.
fn daily_influx(groups: &[AgeGroup], per_million: f64) -> Vec<f64> {
    groups.iter().map(|g| 7.0 * per_million * g.population / 1e6).collect()
}

impl SyntheticSpec {
    /// Two groups, 30 weeks: small enough for full posterior sampling in minutes.
    pub fn desk() -> Self {
        let weeks = 30;
        let groups = vec![AgeGroup::new("0-59", 800_000.0), AgeGroup::new("60-69", 200_000.0)];
        let influx = daily_influx(&groups, 0.1);
        SyntheticSpec {
            name: "desk".into(),
            start: NaiveDate::from_ymd_opt(2021, 1, 3).expect("valid date"),
            weeks,
            g: vec![[0.12, 0.06, 0.025, 0.012], [1.0, 0.45, 0.12, 0.06]],
            f0: two_waves(weeks, 2e-5, &[(2e-4, 4.0, 3.0), (1.2e-4, 22.0, 3.0)]),
            waning: WaningCurve::regular(),
            model: ModelConfig::default(),
            params: with_effects(
                weeks,
                10.0,
                &[1.2, 1.2],
                &[(1, -0.15), (2, 0.35), (4, 0.5), (6, 0.45), (8, -0.4)],
                &influx,
            ),
            initial_cases: vec![1500.0, 300.0],
            campaigns: vec![
                Campaign {
                    start: 6,
                    duration: 8,
                    uptake: [0.7, 0.65, 0.3],
                    booster_start: 22,
                },
                Campaign {
                    start: 1,
                    duration: 5,
                    uptake: [0.9, 0.85, 0.5],
                    booster_start: 19,
                },
            ],
            groups,
            case_noise: Some(1.0),
        }
    }

    /// Nine Israel-format age groups over 53 weeks starting 2020-12-20.
    pub fn israel() -> Self {
        let weeks = 53;
        let groups = israel_age_groups();
        let g0 = [0.03, 0.08, 0.15, 0.3, 0.6, 1.0, 1.8, 3.2, 4.5];
        let ratio = [1.0, 0.45, 0.12, 0.06];
        let uptake = [
            [0.40, 0.35, 0.20],
            [0.80, 0.75, 0.50],
            [0.82, 0.78, 0.55],
            [0.86, 0.82, 0.62],
            [0.88, 0.85, 0.70],
            [0.90, 0.88, 0.78],
            [0.95, 0.93, 0.85],
            [0.93, 0.90, 0.82],
            [0.90, 0.86, 0.76],
        ];
        let starts = [9, 6, 5, 4, 2, 0, 0, 0, 0];
        let durations = [10, 8, 8, 6, 6, 5, 4, 4, 4];
        let boosters = [36, 35, 35, 34, 34, 32, 32, 32, 32];
        let influx = daily_influx(&groups, 0.1);
        SyntheticSpec {
            name: "israel".into(),
            start: NaiveDate::from_ymd_opt(2020, 12, 20).expect("valid date"),
            weeks,
            g: g0.iter().map(|&g| ratio.map(|r| g * r)).collect(),
            f0: two_waves(weeks, 1e-5, &[(4e-4, 3.0, 4.0), (5e-4, 37.0, 5.0)]),
            waning: WaningCurve::regular(),
            model: ModelConfig::default(),
            params: with_effects(
                weeks,
                21.0,
                &[1.2; 9],
                &[(0, -0.2), (2, 0.15), (4, 0.2), (6, 0.4), (7, 0.25), (9, -0.4)],
                &influx,
            ),
            initial_cases: groups.iter().map(|g| 0.002 * g.population).collect(),
            campaigns: (0..9)
                .map(|a| Campaign {
                    start: starts[a],
                    duration: durations[a],
                    uptake: uptake[a],
                    booster_start: boosters[a],
                })
                .collect(),
            groups,
            case_noise: Some(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_groups(&self.groups)?;
        let n = self.groups.len();
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.weeks == 0 {
            return bad("synthetic window needs at least one week".into());
        }
        if self.g.len() != n || self.initial_cases.len() != n || self.campaigns.len() != n {
            return bad("per-group tables must have one entry per age group".into());
        }
        if self.f0.len() != self.weeks {
            return bad("f0 must have one value per week".into());
        }
        if self.g.iter().flatten().chain(&self.f0).any(|&x| !(x.is_finite() && x > 0.0)) {
            return bad("risk factors and f0 must be positive".into());
        }
        let max_risk = self.f0.iter().cloned().fold(0.0, f64::max)
            * self.g.iter().flatten().cloned().fold(0.0, f64::max)
            * self.waning.h(1, 1e6).max(self.waning.h(3, 1e6));
        if max_risk > 1.0 {
            return bad(format!("severe-case probability can reach {max_risk}"));
        }
        for (c, g) in self.campaigns.iter().zip(&self.groups) {
            let u = c.uptake;
            if !(0.0 <= u[2] && u[2] <= u[1] && u[1] <= u[0] && u[0] <= 1.0) || c.duration == 0 {
                return bad(format!("invalid campaign for {}", g.label));
            }
        }
        if self.initial_cases.iter().zip(&self.groups).any(|(&c, g)| !(c >= 0.0 && c <= g.population)) {
            return bad("initial cases must lie in [0, population]".into());
        }
        self.params.validate(n, self.weeks)
    }

    /// Dose counts `[a][dose][t]` of the campaigns; doses beyond the window are dropped.
    fn dose_counts(&self) -> Vec<[Vec<f64>; DOSES]> {
        let m = self.weeks;
        self.campaigns
            .iter()
            .zip(&self.groups)
            .map(|(c, g)| {
                let mut first = vec![0.0; m];
                let per_week = c.uptake[0] * g.population / c.duration as f64;
                for t in c.start..(c.start + c.duration).min(m) {
                    first[t] = per_week;
                }
                let shift = |src: &[f64], by: usize, ratio: f64| {
                    let mut out = vec![0.0; m];
                    for t in 0..m.saturating_sub(by) {
                        out[t + by] = src[t] * ratio;
                    }
                    out
                };
                let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
                let second = shift(&first, 3, ratio(c.uptake[1], c.uptake[0]));
                let booster_shift = 12.max(c.booster_start.saturating_sub(c.start + 3));
                let third = shift(&second, booster_shift, ratio(c.uptake[2], c.uptake[1]));
                [first, second, third]
            })
            .collect()
    }
}

/// Generates a dataset and its ground truth. Deterministic in `seed`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticBundle> {
    spec.validate()?;
    let n = spec.groups.len();
    let m = spec.weeks;
    let calendar = Calendar::new(spec.start, m);
    let empty_severe = vec![std::array::from_fn(|_| vec![SevereStratum::default(); m]); n];
    let doses = spec.dose_counts();
    let mut data = ObservedDataset::from_parts(
        calendar,
        spec.groups.clone(),
        vec![vec![0.0; m]; n],
        empty_severe,
        doses.clone(),
    )?;

    let truth_fact = SeverityFactorization::new(spec.f0.clone(), spec.g.clone(), spec.waning);
    let h = spec.waning.h_table(m);
    let severe = (0..n)
        .map(|a| {
            let pop = spec.groups[a].population;
            std::array::from_fn(|v| {
                (0..m)
                    .map(|t| {
                        let mass = data.cohorts.masses(a, v, t);
                        let stratum: f64 = mass.iter().sum();
                        let expected: f64 = mass
                            .iter()
                            .enumerate()
                            .map(|(w, p)| p * truth_fact.f0[t] * truth_fact.g[a][v] * h[v][w])
                            .sum();
                        SevereStratum::new(pop * expected, pop * stratum)
                    })
                    .collect()
            })
        })
        .collect();

    let sim = Simulator::new(
        spec.model.clone(),
        data.populations(),
        m,
        Seeding::from_first_week(&spec.initial_cases),
    )?;
    let inf = infectability_table(&data.cohorts, &spec.waning, spec.model.protection);
    let run = sim.run(&spec.params, &inf)?;
    let mut cases = run.weekly_cases.clone();
    if let Some(kappa) = spec.case_noise {
        if !(kappa > 0.0) {
            return Err(Error::InvalidConfig(format!("case noise scale {kappa} must be positive")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t4 = StudentT::new(4.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for (a, row) in cases.iter_mut().enumerate() {
            let pop = spec.groups[a].population;
            for c in row.iter_mut() {
                let noisy = *c + kappa * (*c + 1.0).sqrt() * t4.sample(&mut rng);
                *c = noisy.round().clamp(0.0, pop);
            }
        }
    }
    let r_base = (0..n)
        .map(|a| (0..m).map(|t| spec.params.base_reproduction(a, 7.0 * t as f64 + 3.0)).collect())
        .collect();

    data.cases = cases;
    data.severe = severe;
    let data = ObservedDataset::from_parts(data.calendar, data.groups, data.cases, data.severe, doses)?;
    Ok(SyntheticBundle {
        data,
        truth: SyntheticTruth {
            spec: spec.clone(),
            r_base,
            modelled_cases: run.weekly_cases,
        },
    })
}

pub const TRUTH_FILE: &str = "truth.json";

/// Writes the CSV bundle and `truth.json` into `dir`.
pub fn save_bundle(dir: &Path, bundle: &SyntheticBundle) -> Result<()> {
    save_dataset(dir, &bundle.data)?;
    let path = dir.join(TRUTH_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(file, &bundle.truth)?;
    Ok(())
}

pub fn load_truth(dir: &Path) -> Result<SyntheticTruth> {
    let path = dir.join(TRUTH_FILE);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_reader(file)?)
}
