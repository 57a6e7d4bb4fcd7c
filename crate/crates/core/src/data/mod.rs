//! Dataset schema, CSV loading and synthetic bundles.
//!
//! A dataset covers `m` consecutive weeks anchored at a calendar date; week `t` spans
//! window days `7t .. 7t + 6`. Severe cases are stored as `(count, stratum population)`
//! pairs so that empty strata stay representable.

mod io;
pub mod synthetic;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::strategy::{reconstruct_factual, AllocationStrategy, CohortTable};
use crate::{Error, Result, DOSES, STATES};

pub use io::{load_dataset, save_dataset};

/// Age-group labels of the Israel-format data.
pub const ISRAEL_AGE_LABELS: [&str; 9] = [
    "0-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70-79", "80-89", "90+",
];

/// Population per age group used by the Israel-format presets (total 9,291,000).
pub const ISRAEL_POPULATION: [f64; 9] = [
    3_288_000.0,
    1_336_000.0,
    1_233_000.0,
    1_113_000.0,
    862_000.0,
    737_000.0,
    493_000.0,
    191_000.0,
    38_000.0,
];

/// Label of the reference age group whose unvaccinated risk factor is fixed to one.
pub const REFERENCE_AGE_LABEL: &str = "60-69";

const CLOSURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeGroup {
    pub label: String,
    pub population: f64,
}

impl AgeGroup {
    pub fn new(label: impl Into<String>, population: f64) -> Self {
        AgeGroup {
            label: label.into(),
            population,
        }
    }
}

pub fn israel_age_groups() -> Vec<AgeGroup> {
    ISRAEL_AGE_LABELS
        .iter()
        .zip(ISRAEL_POPULATION)
        .map(|(l, p)| AgeGroup::new(*l, p))
        .collect()
}

pub fn total_population(groups: &[AgeGroup]) -> f64 {
    groups.iter().map(|g| g.population).sum()
}

pub fn validate_groups(groups: &[AgeGroup]) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::InvalidData("no age groups".into()));
    }
    for (i, g) in groups.iter().enumerate() {
        if !(g.population.is_finite() && g.population > 0.0) {
            return Err(Error::InvalidData(format!(
                "age group {} has non-positive population {}",
                g.label, g.population
            )));
        }
        if groups[..i].iter().any(|o| o.label == g.label) {
            return Err(Error::InvalidData(format!("duplicate age group {}", g.label)));
        }
    }
    Ok(())
}

/// Weekly calendar of the analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub start: NaiveDate,
    pub weeks: usize,
}

impl Calendar {
    pub fn new(start: NaiveDate, weeks: usize) -> Self {
        Calendar { start, weeks }
    }

    pub fn days(&self) -> usize {
        7 * self.weeks
    }

    pub fn week_start(&self, t: usize) -> NaiveDate {
        self.start + Duration::days(7 * t as i64)
    }

    /// Week containing `date`, if it falls inside the window.
    pub fn week_of(&self, date: NaiveDate) -> Option<usize> {
        let days = (date - self.start).num_days();
        if days < 0 {
            return None;
        }
        let t = (days / 7) as usize;
        (t < self.weeks).then_some(t)
    }

    /// Day offset of `date` relative to the window start.
    pub fn day_offset(&self, date: NaiveDate) -> i64 {
        (date - self.start).num_days()
    }

    /// Weeks whose first day lies in `[from, to]`.
    pub fn weeks_between(&self, from: NaiveDate, to: NaiveDate) -> Vec<usize> {
        (0..self.weeks)
            .filter(|&t| {
                let d = self.week_start(t);
                d >= from && d <= to
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SevereStratum {
    pub count: f64,
    pub population: f64,
}

impl SevereStratum {
    pub fn new(count: f64, population: f64) -> Self {
        SevereStratum { count, population }
    }

    /// Empirical weekly severe-case probability, `None` for an empty stratum.
    pub fn probability(&self) -> Option<f64> {
        (self.population > 0.0).then(|| self.count / self.population)
    }
}

/// Observed weekly data for one analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedDataset {
    pub calendar: Calendar,
    pub groups: Vec<AgeGroup>,
    /// Reported cases `C_a(t)`, indexed `[a][t]`.
    pub cases: Vec<Vec<f64>>,
    /// Severe-case strata, indexed `[a][v][t]`.
    pub severe: Vec<[Vec<SevereStratum>; STATES]>,
    /// Newly administered doses, indexed `[a][dose][t]` with `dose` zero-based.
    pub doses: Vec<[Vec<f64>; DOSES]>,
    /// Factual joint of vaccination weeks reconstructed from `doses`.
    pub factual: AllocationStrategy,
    /// Vaccination cohorts of `factual`: stratum masses per waning time.
    pub cohorts: CohortTable,
}

impl ObservedDataset {
    /// Builds a dataset from raw tables, deriving the factual strategy and cohort table.
    pub fn from_parts(
        calendar: Calendar,
        groups: Vec<AgeGroup>,
        cases: Vec<Vec<f64>>,
        severe: Vec<[Vec<SevereStratum>; STATES]>,
        doses: Vec<[Vec<f64>; DOSES]>,
    ) -> Result<Self> {
        validate_groups(&groups)?;
        let n = groups.len();
        let m = calendar.weeks;
        if m == 0 {
            return Err(Error::InvalidData("no observations".into()));
        }
        if cases.len() != n || severe.len() != n || doses.len() != n {
            return Err(Error::InvalidData("table dimensions do not match age groups".into()));
        }
        for a in 0..n {
            let label = &groups[a].label;
            let pop = groups[a].population;
            if cases[a].len() != m {
                return Err(Error::InvalidData(format!("cases for {label} do not cover {m} weeks")));
            }
            for (t, &c) in cases[a].iter().enumerate() {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::InvalidData(format!("negative cases for {label} week {}", t + 1)));
                }
                if c > pop {
                    return Err(Error::InvalidData(format!(
                        "cases {c} exceed population {pop} for {label} week {}",
                        t + 1
                    )));
                }
            }
            for v in 0..STATES {
                if severe[a][v].len() != m {
                    return Err(Error::InvalidData(format!("severe strata for {label} do not cover {m} weeks")));
                }
                for s in &severe[a][v] {
                    if !(s.count >= 0.0 && s.population >= 0.0) || s.count > s.population {
                        return Err(Error::InvalidData(format!(
                            "invalid severe stratum {:?} for {label} with {v} doses",
                            s
                        )));
                    }
                }
            }
            for i in 0..DOSES {
                if doses[a][i].len() != m {
                    return Err(Error::InvalidData(format!("dose counts for {label} do not cover {m} weeks")));
                }
                if doses[a][i].iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                    return Err(Error::InvalidData(format!("negative dose count for {label}")));
                }
            }
            let totals: Vec<f64> = (0..DOSES).map(|i| doses[a][i].iter().sum()).collect();
            if totals[0] > pop * (1.0 + CLOSURE_TOL) {
                return Err(Error::InvalidData(format!("more first doses than people in {label}")));
            }
        }

        let marginals: Vec<[Vec<f64>; DOSES]> = (0..n)
            .map(|a| {
                let pop = groups[a].population;
                std::array::from_fn(|i| doses[a][i].iter().map(|x| x / pop).collect())
            })
            .collect();
        let factual = reconstruct_factual(&marginals, m, "Factual")?;
        let cohorts = factual.cohorts();
        let dataset = ObservedDataset {
            calendar,
            groups,
            cases,
            severe,
            doses,
            factual,
            cohorts,
        };
        dataset.check_closure()?;
        Ok(dataset)
    }

    pub fn age_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn weeks(&self) -> usize {
        self.calendar.weeks
    }

    pub fn populations(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.population).collect()
    }

    pub fn total_population(&self) -> f64 {
        total_population(&self.groups)
    }

    pub fn group_index(&self, label: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.label == label)
    }

    /// Fractions `[Unv, Vacc^1, Vacc^2, Vacc^3]` of age group `a` in week `t`, computed
    /// from cumulative dose counts.
    pub fn vaccination_fractions(&self, a: usize, t: usize) -> [f64; STATES] {
        let pop = self.groups[a].population;
        let cum: [f64; DOSES] =
            std::array::from_fn(|i| self.doses[a][i][..=t].iter().sum::<f64>() / pop);
        [1.0 - cum[0], cum[0] - cum[1], cum[1] - cum[2], cum[2]]
    }

    /// Waning-time distribution `P(W = w | v, a, t)` for `w = 0..=t`; `None` when the
    /// stratum has no vaccinated mass.
    pub fn waning_distribution(&self, v: usize, a: usize, t: usize) -> Option<Vec<f64>> {
        let mass = self.cohorts.masses(a, v, t);
        let total: f64 = mass.iter().sum();
        (total > 0.0).then(|| mass.iter().map(|x| x / total).collect())
    }

    fn check_closure(&self) -> Result<()> {
        for a in 0..self.age_groups() {
            for t in 0..self.weeks() {
                let f = self.vaccination_fractions(a, t);
                if f.iter().any(|&x| x < -CLOSURE_TOL) {
                    return Err(Error::InvalidData(format!(
                        "{}: more later doses than earlier doses by week {}",
                        self.groups[a].label,
                        t + 1
                    )));
                }
                let sum: f64 = f.iter().sum();
                if (sum - 1.0).abs() > CLOSURE_TOL {
                    return Err(Error::InvalidData(format!(
                        "{}: vaccination fractions sum to {sum} in week {}",
                        self.groups[a].label,
                        t + 1
                    )));
                }
            }
        }
        Ok(())
    }
}
