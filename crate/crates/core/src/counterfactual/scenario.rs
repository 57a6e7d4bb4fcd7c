//! Scenario families and their evaluation over posterior draws.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profiles::{profile_risk, risk_ranking, DiseaseProfile, FLAT_UPTAKE_CAPS};
use super::target::target_function;
use crate::data::ObservedDataset;
use crate::dynamics::{correction_factor, infectability_table, ModelConfig, Seeding, Simulator};
use crate::inference::PosteriorSample;
use crate::severity::{SeverityFactorization, WaningCurve};
use crate::stats::{quantile, Interval};
use crate::strategy::{
    boost_uptake, generate_ranked, generate_ranked_with_caps, generate_uniform, AllocationStrategy, CohortTable,
};
use crate::{Error, Result, STATES};

/// Number of posterior draws propagated through every scenario.
pub const MAX_DRAWS: usize = 1000;

/// Time-axis multiplier of the fast-waning scenario.
pub const FAST_WANING_SCALE: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StrategyKind {
    Factual,
    Uniform,
    ElderlyFirst,
    YoungFirst,
    RiskRanked,
    RiskRankedReversed,
    /// `doses` extra doses for age group `group` (index).
    UptakeBoost { group: usize, doses: f64 },
    Custom(AllocationStrategy),
}

impl StrategyKind {
    /// The six allocation strategies compared in the main analysis.
    pub fn main_set() -> Vec<StrategyKind> {
        vec![
            StrategyKind::Factual,
            StrategyKind::Uniform,
            StrategyKind::ElderlyFirst,
            StrategyKind::YoungFirst,
            StrategyKind::RiskRanked,
            StrategyKind::RiskRankedReversed,
        ]
    }

    pub fn name(&self) -> String {
        match self {
            StrategyKind::Factual => "Factual".into(),
            StrategyKind::Uniform => "Uniform".into(),
            StrategyKind::ElderlyFirst => "ElderlyFirst".into(),
            StrategyKind::YoungFirst => "YoungFirst".into(),
            StrategyKind::RiskRanked => "RiskRanked".into(),
            StrategyKind::RiskRankedReversed => "RiskRankedReversed".into(),
            StrategyKind::UptakeBoost { group, .. } => format!("UptakeBoost[{group}]"),
            StrategyKind::Custom(s) => s.label.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WaningScenario {
    Regular,
    NoWaning,
    Fast,
}

impl WaningScenario {
    pub const ALL: [WaningScenario; 3] = [WaningScenario::NoWaning, WaningScenario::Regular, WaningScenario::Fast];

    pub fn name(&self) -> &'static str {
        match self {
            WaningScenario::Regular => "regular",
            WaningScenario::NoWaning => "noWaning",
            WaningScenario::Fast => "fast",
        }
    }

    pub fn curve(&self, regular: &WaningCurve) -> WaningCurve {
        match self {
            WaningScenario::Regular => *regular,
            WaningScenario::NoWaning => regular.without_waning(),
            WaningScenario::Fast => regular.with_scale(FAST_WANING_SCALE * regular.scale).expect("positive scale"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub strategy: StrategyKind,
    pub profile: DiseaseProfile,
    pub waning: WaningScenario,
}

impl ScenarioSpec {
    pub fn new(strategy: StrategyKind) -> Self {
        ScenarioSpec {
            strategy,
            profile: DiseaseProfile::Covid,
            waning: WaningScenario::Regular,
        }
    }

    pub fn with_profile(mut self, profile: DiseaseProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn with_waning(mut self, waning: WaningScenario) -> Self {
        self.waning = waning;
        self
    }

    pub fn strategies() -> Vec<ScenarioSpec> {
        StrategyKind::main_set().into_iter().map(ScenarioSpec::new).collect()
    }

    /// Factual baseline plus one scenario per age group receiving `doses` extra doses.
    pub fn uptake(groups: usize, doses: f64) -> Vec<ScenarioSpec> {
        std::iter::once(ScenarioSpec::new(StrategyKind::Factual))
            .chain((0..groups).map(|group| ScenarioSpec::new(StrategyKind::UptakeBoost { group, doses })))
            .collect()
    }

    pub fn profiles() -> Vec<ScenarioSpec> {
        DiseaseProfile::ALL
            .iter()
            .flat_map(|&p| StrategyKind::main_set().into_iter().map(move |s| ScenarioSpec::new(s).with_profile(p)))
            .collect()
    }

    pub fn waning() -> Vec<ScenarioSpec> {
        WaningScenario::ALL
            .iter()
            .flat_map(|&w| StrategyKind::main_set().into_iter().map(move |s| ScenarioSpec::new(s).with_waning(w)))
            .collect()
    }
}

/// Posterior draws of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub strategy: String,
    pub profile: DiseaseProfile,
    pub waning: WaningScenario,
    /// Multiplier applied to the profile's risk factors.
    pub risk_scale: f64,
    /// Counterfactual weekly infections per draw, `[draw][a][t]`.
    pub infections: Vec<Vec<Vec<f64>>>,
    /// Expected severe cases per draw, `[draw][a][t]`.
    pub severe: Vec<Vec<Vec<f64>>>,
    /// Correction factors per draw, `[draw][a][t]`.
    pub f1: Vec<Vec<Vec<f64>>>,
    /// Cells whose factual infection probability vanished, summed over draws.
    pub flagged_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Infections,
    Severe,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Infections => "infections",
            Metric::Severe => "severe",
        }
    }
}

impl ScenarioResult {
    pub fn label(&self) -> String {
        let mut label = self.strategy.clone();
        if self.profile != DiseaseProfile::Covid {
            label.push_str(&format!("/{}", self.profile.name()));
        }
        if self.waning != WaningScenario::Regular {
            label.push_str(&format!("/{}", self.waning.name()));
        }
        label
    }

    fn cells(&self, metric: Metric) -> &[Vec<Vec<f64>>] {
        match metric {
            Metric::Infections => &self.infections,
            Metric::Severe => &self.severe,
        }
    }

    /// Per-draw totals over `weeks`, restricted to `group` if given.
    pub fn totals(&self, metric: Metric, weeks: &[usize], group: Option<usize>) -> Vec<f64> {
        self.cells(metric)
            .iter()
            .map(|draw| {
                draw.iter()
                    .enumerate()
                    .filter(|(a, _)| group.is_none_or(|g| g == *a))
                    .map(|(_, row)| weeks.iter().map(|&t| row[t]).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    pub fn interval(&self, metric: Metric, weeks: &[usize], group: Option<usize>) -> Interval {
        Interval::from_samples(&self.totals(metric, weeks, group))
    }

    /// Bands per `[a][t]`.
    pub fn weekly_bands(&self, metric: Metric) -> Vec<Vec<Interval>> {
        let cells = self.cells(metric);
        let Some(first) = cells.first() else {
            return Vec::new();
        };
        (0..first.len())
            .map(|a| {
                (0..first[a].len())
                    .map(|t| Interval::from_samples(&cells.iter().map(|d| d[a][t]).collect::<Vec<_>>()))
                    .collect()
            })
            .collect()
    }
}

/// At most `max` draws, evenly spaced over the input.
pub fn thin_draws(samples: &[PosteriorSample], max: usize) -> Vec<PosteriorSample> {
    if samples.len() < max {
        warn!("only {} posterior draws available, {max} requested", samples.len());
    }
    if samples.len() <= max {
        return samples.to_vec();
    }
    (0..max).map(|i| samples[i * samples.len() / max].clone()).collect()
}

/// Pushes strategies through the renewal model and the severity mechanism for a fixed
/// set of posterior draws. The factual run of each draw uses regular waning.
pub struct Evaluator<'d> {
    pub data: &'d ObservedDataset,
    /// COVID-19 factorisation with `f1 = 1` and regular waning.
    pub severity: SeverityFactorization,
    pub simulator: Simulator,
    pub draws: Vec<PosteriorSample>,
    factual_probability: Vec<Vec<Vec<f64>>>,
}

struct DrawRun {
    f1: Vec<Vec<f64>>,
    infections: Vec<Vec<f64>>,
    flagged: usize,
}

impl<'d> Evaluator<'d> {
    pub fn new(
        data: &'d ObservedDataset,
        severity: SeverityFactorization,
        config: ModelConfig,
        samples: &[PosteriorSample],
        max_draws: usize,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("no posterior draws to evaluate".into()));
        }
        if severity.weeks() != data.weeks() || severity.age_groups() != data.age_groups() {
            return Err(Error::InvalidConfig("severity factors do not match the dataset".into()));
        }
        let first: Vec<f64> = data.cases.iter().map(|c| c[0]).collect();
        let simulator = Simulator::new(config, data.populations(), data.weeks(), Seeding::from_first_week(&first))?;
        let draws = thin_draws(samples, max_draws);
        let infectability = infectability_table(&data.cohorts, &severity.waning, simulator.config.protection);
        let factual_probability = draws
            .par_iter()
            .map(|s| simulator.run(&s.params, &infectability).map(|r| r.infection_probability))
            .collect::<Result<Vec<_>>>()?;
        info!("evaluator ready with {} draws", draws.len());
        Ok(Evaluator {
            data,
            severity,
            simulator,
            draws,
            factual_probability,
        })
    }

    pub fn labels(&self) -> Vec<String> {
        self.data.groups.iter().map(|g| g.label.clone()).collect()
    }

    fn run_draws(&self, strategy: &AllocationStrategy, waning: &WaningCurve) -> Result<Vec<DrawRun>> {
        let infectability = infectability_table(&strategy.cohorts(), waning, self.simulator.config.protection);
        self.draws
            .par_iter()
            .zip(&self.factual_probability)
            .map(|(s, factual)| {
                let run = self.simulator.run(&s.params, &infectability)?;
                let mut reference = run.clone();
                reference.infection_probability = factual.clone();
                let cf = correction_factor(&reference, &run)?;
                Ok(DrawRun {
                    f1: cf.f1,
                    infections: run.weekly_exposures,
                    flagged: cf.flagged.len(),
                })
            })
            .collect()
    }

    fn severe_draws(&self, cohorts: &CohortTable, g: &[[f64; STATES]], waning: WaningCurve, runs: &[DrawRun]) -> Result<Vec<Vec<Vec<f64>>>> {
        let mut severity = self.severity.clone().with_waning(waning);
        severity.g = g.to_vec();
        let weights = target_function(cohorts, &severity, &self.data.populations())?;
        Ok(runs
            .iter()
            .map(|r| {
                weights
                    .iter()
                    .zip(&r.f1)
                    .map(|(w, f)| w.iter().zip(f).map(|(w, f)| w * f).collect())
                    .collect()
            })
            .collect())
    }

    /// Risk factors of `profile`, rescaled so that the median total severe cases under
    /// the Uniform strategy equal those of COVID-19. Returns the factors and the scale.
    pub fn profile_risk(&self, profile: DiseaseProfile) -> Result<(Vec<[f64; STATES]>, f64)> {
        let populations = self.data.populations();
        let raw = profile_risk(profile, &self.severity, &self.labels(), &populations)?;
        if profile == DiseaseProfile::Covid {
            return Ok((raw, 1.0));
        }
        let uniform = generate_uniform(&self.data.factual, &self.data.groups)?;
        let cohorts = uniform.cohorts();
        let runs = self.run_draws(&uniform, &self.severity.waning)?;
        let median_total = |g: &[[f64; STATES]]| -> Result<f64> {
            let draws = self.severe_draws(&cohorts, g, self.severity.waning, &runs)?;
            let totals: Vec<f64> = draws.iter().map(|d| d.iter().flatten().sum()).collect();
            Ok(quantile(&totals, 0.5))
        };
        let target = median_total(&self.severity.g)?;
        let current = median_total(&raw)?;
        if !(current > 0.0 && target.is_finite()) {
            return Err(Error::Numerical(format!("cannot normalise the {} profile", profile.name())));
        }
        let scale = target / current;
        Ok((raw.iter().map(|g| g.map(|x| x * scale)).collect(), scale))
    }

    /// The allocation strategy of `kind` under the risk factors `g`.
    pub fn strategy(&self, kind: &StrategyKind, profile: DiseaseProfile, g: &[[f64; STATES]]) -> Result<AllocationStrategy> {
        let data = self.data;
        let n = data.age_groups();
        let ranked = |ranking: Vec<usize>, label: &str| -> Result<AllocationStrategy> {
            if profile == DiseaseProfile::Covid {
                generate_ranked(&data.factual, &ranking, &data.groups, label)
            } else {
                generate_ranked_with_caps(&data.factual, &ranking, &data.groups, &vec![FLAT_UPTAKE_CAPS; n], label)
            }
        };
        match kind {
            StrategyKind::Factual => Ok(data.factual.clone().with_label("Factual")),
            StrategyKind::Uniform => generate_uniform(&data.factual, &data.groups),
            StrategyKind::ElderlyFirst => generate_ranked(&data.factual, &(0..n).rev().collect::<Vec<_>>(), &data.groups, "ElderlyFirst"),
            StrategyKind::YoungFirst => generate_ranked(&data.factual, &(0..n).collect::<Vec<_>>(), &data.groups, "YoungFirst"),
            StrategyKind::RiskRanked | StrategyKind::RiskRankedReversed => {
                let label = kind.name();
                match risk_ranking(g) {
                    None => Ok(generate_uniform(&data.factual, &data.groups)?.with_label(label)),
                    Some(mut order) => {
                        if *kind == StrategyKind::RiskRankedReversed {
                            order.reverse();
                        }
                        ranked(order, &label)
                    }
                }
            }
            StrategyKind::UptakeBoost { group, doses } => boost_uptake(&data.factual, &data.groups, *group, *doses),
            StrategyKind::Custom(s) => {
                if s.weeks != data.weeks() || s.age_groups() != n {
                    return Err(Error::InvalidConfig(format!("strategy {} does not match the dataset", s.label)));
                }
                s.validate()?;
                Ok(s.clone())
            }
        }
    }

    /// Evaluates `strategy` under precomputed risk factors and a waning scenario.
    pub fn evaluate_strategy(
        &self,
        strategy: &AllocationStrategy,
        g: &[[f64; STATES]],
        waning: WaningScenario,
    ) -> Result<ScenarioResult> {
        let curve = waning.curve(&self.severity.waning);
        let runs = self.run_draws(strategy, &curve)?;
        let severe = self.severe_draws(&strategy.cohorts(), g, curve, &runs)?;
        let flagged_cells = runs.iter().map(|r| r.flagged).sum();
        let (f1, infections) = runs.into_iter().map(|r| (r.f1, r.infections)).unzip();
        Ok(ScenarioResult {
            strategy: strategy.label.clone(),
            profile: DiseaseProfile::Covid,
            waning,
            risk_scale: 1.0,
            infections,
            severe,
            f1,
            flagged_cells,
        })
    }

    pub fn evaluate(&self, spec: &ScenarioSpec) -> Result<ScenarioResult> {
        let (g, scale) = self.profile_risk(spec.profile)?;
        let strategy = self.strategy(&spec.strategy, spec.profile, &g)?;
        let mut result = self.evaluate_strategy(&strategy, &g, spec.waning)?;
        result.profile = spec.profile;
        result.risk_scale = scale;
        Ok(result)
    }

    /// Evaluates several scenarios, sharing the profile normalisation.
    pub fn evaluate_all(&self, specs: &[ScenarioSpec]) -> Result<Vec<ScenarioResult>> {
        let mut risks: Vec<(DiseaseProfile, (Vec<[f64; STATES]>, f64))> = Vec::new();
        specs
            .iter()
            .map(|spec| {
                let (g, scale) = match risks.iter().find(|(p, _)| *p == spec.profile) {
                    Some((_, r)) => r.clone(),
                    None => {
                        let r = self.profile_risk(spec.profile)?;
                        risks.push((spec.profile, r.clone()));
                        r
                    }
                };
                let strategy = self.strategy(&spec.strategy, spec.profile, &g)?;
                let mut result = self.evaluate_strategy(&strategy, &g, spec.waning)?;
                result.profile = spec.profile;
                result.risk_scale = scale;
                info!("evaluated {}", result.label());
                Ok(result)
            })
            .collect()
    }
}
