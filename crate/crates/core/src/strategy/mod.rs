//! Vaccine allocation strategies as per-age joint distributions over dose weeks.

mod generate;
mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::AgeGroup;
use crate::{Error, Result, DOSES, STATES};

pub use generate::{
    boost_uptake, generate_ranked, generate_ranked_with_caps, generate_uniform, pair_doses,
    reconstruct_factual, DoseBudget, BOOSTER_CAP_RELAXATION, MIN_BOOSTER_GAP, TARGET_SECOND_GAP,
};
pub use io::{read_strategy, write_strategy, StrategyHeader};

const MASS_TOL: f64 = 1e-9;

/// Weeks of the first, second and third dose. The value `m` (window length) means
/// the dose is never received inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DoseTimes(pub [u32; DOSES]);

impl DoseTimes {
    pub fn never(m: usize) -> Self {
        DoseTimes([m as u32; DOSES])
    }

    pub fn week(&self, dose: usize) -> usize {
        self.0[dose] as usize
    }

    /// Vaccination state `v` at week `t`: number of doses received by then.
    pub fn state_at(&self, t: usize) -> usize {
        self.0.iter().take_while(|&&ti| ti as usize <= t).count()
    }

    /// State and waning time (weeks since the last received dose) at week `t`.
    pub fn state_and_waning(&self, t: usize) -> (usize, usize) {
        match self.state_at(t) {
            0 => (0, 0),
            v => (v, t - self.week(v - 1)),
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.0[0] <= self.0[1] && self.0[1] <= self.0[2]
    }
}

/// Joint distribution `P(T1, T2, T3 | A)` for every age group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationStrategy {
    pub label: String,
    pub weeks: usize,
    pub per_age: Vec<BTreeMap<DoseTimes, f64>>,
}

impl AllocationStrategy {
    pub fn new(label: impl Into<String>, weeks: usize, per_age: Vec<BTreeMap<DoseTimes, f64>>) -> Self {
        AllocationStrategy {
            label: label.into(),
            weeks,
            per_age,
        }
    }

    /// Nobody vaccinated in any of `groups` age groups.
    pub fn unvaccinated(label: impl Into<String>, weeks: usize, groups: usize) -> Self {
        let per_age = (0..groups)
            .map(|_| BTreeMap::from([(DoseTimes::never(weeks), 1.0)]))
            .collect();
        Self::new(label, weeks, per_age)
    }

    pub fn age_groups(&self) -> usize {
        self.per_age.len()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `P(T_dose = t | a)` for `t < m`; the remainder is the never-vaccinated mass.
    pub fn marginal(&self, a: usize, dose: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.weeks];
        for (times, &p) in &self.per_age[a] {
            let t = times.week(dose);
            if t < self.weeks {
                out[t] += p;
            }
        }
        out
    }

    pub fn marginals(&self, a: usize) -> [Vec<f64>; DOSES] {
        std::array::from_fn(|i| self.marginal(a, i))
    }

    /// Fraction of age group `a` receiving dose `dose` within the window.
    pub fn uptake(&self, a: usize, dose: usize) -> f64 {
        self.per_age[a]
            .iter()
            .filter(|(times, _)| times.week(dose) < self.weeks)
            .map(|(_, p)| p)
            .sum()
    }

    /// Mass that never receives a first dose.
    pub fn never_mass(&self, a: usize) -> f64 {
        self.per_age[a]
            .get(&DoseTimes::never(self.weeks))
            .copied()
            .unwrap_or(0.0)
    }

    /// Person-doses of `dose` administered per week, summed over age groups.
    pub fn weekly_doses(&self, groups: &[AgeGroup], dose: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.weeks];
        for (a, g) in groups.iter().enumerate() {
            for (times, &p) in &self.per_age[a] {
                let t = times.week(dose);
                if t < self.weeks {
                    out[t] += p * g.population;
                }
            }
        }
        out
    }

    /// Checks non-negativity, normalisation and monotone dosing of every age group.
    pub fn validate(&self) -> Result<()> {
        for (a, joint) in self.per_age.iter().enumerate() {
            let mut total = 0.0;
            for (times, &p) in joint {
                if !(p.is_finite() && p >= -MASS_TOL) {
                    return Err(Error::InvalidData(format!("{}: negative mass {p} in group {a}", self.label)));
                }
                if !times.is_monotone() || times.0.iter().any(|&t| t as usize > self.weeks) {
                    return Err(Error::InvalidData(format!(
                        "{}: invalid dose weeks {:?} in group {a}",
                        self.label, times.0
                    )));
                }
                total += p;
            }
            if (total - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidData(format!(
                    "{}: group {a} mass sums to {total}",
                    self.label
                )));
            }
        }
        Ok(())
    }

    /// Smallest gap between second and third dose over the support, if any booster is given.
    pub fn min_booster_gap(&self) -> Option<usize> {
        self.per_age
            .iter()
            .flat_map(|j| j.iter())
            .filter(|(times, &p)| p > 0.0 && times.week(2) < self.weeks)
            .map(|(times, _)| times.week(2) - times.week(1))
            .min()
    }

    pub fn cohorts(&self) -> CohortTable {
        CohortTable::from_strategy(self)
    }
}

/// Mass of each vaccination stratum split by waning time: `[a][v][t][w]`.
///
/// For `v = 0` only `w = 0` is populated. Entries are probabilities within the age group.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortTable {
    weeks: usize,
    mass: Vec<[Vec<Vec<f64>>; STATES]>,
}

impl CohortTable {
    pub fn from_strategy(strategy: &AllocationStrategy) -> Self {
        let m = strategy.weeks;
        let mass = strategy
            .per_age
            .iter()
            .map(|joint| {
                let mut table: [Vec<Vec<f64>>; STATES] =
                    std::array::from_fn(|v| (0..m).map(|t| vec![0.0; if v == 0 { 1 } else { t + 1 }]).collect());
                for (times, &p) in joint {
                    if p == 0.0 {
                        continue;
                    }
                    for t in 0..m {
                        let (v, w) = times.state_and_waning(t);
                        table[v][t][w] += p;
                    }
                }
                table
            })
            .collect();
        CohortTable { weeks: m, mass }
    }

    pub fn weeks(&self) -> usize {
        self.weeks
    }

    pub fn age_groups(&self) -> usize {
        self.mass.len()
    }

    /// Masses of stratum `(a, v, t)` by waning time `w = 0..=t`.
    pub fn masses(&self, a: usize, v: usize, t: usize) -> &[f64] {
        &self.mass[a][v][t]
    }

    /// `Vacc^v_a(t)` (or `Unv_a(t)` for `v = 0`).
    pub fn fraction(&self, a: usize, v: usize, t: usize) -> f64 {
        self.mass[a][v][t].iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_and_waning_follow_last_dose() {
        let m = 10;
        let times = DoseTimes([1, 4, 10]);
        assert_eq!(times.state_and_waning(0), (0, 0));
        assert_eq!(times.state_and_waning(1), (1, 0));
        assert_eq!(times.state_and_waning(3), (1, 2));
        assert_eq!(times.state_and_waning(4), (2, 0));
        assert_eq!(times.state_and_waning(9), (2, 5));
        assert_eq!(DoseTimes::never(m).state_at(m - 1), 0);
    }

    #[test]
    fn cohort_fractions_close_per_week() {
        let mut joint = BTreeMap::new();
        joint.insert(DoseTimes([0, 3, 6]), 0.25);
        joint.insert(DoseTimes([1, 4, 8]), 0.25);
        joint.insert(DoseTimes([2, 8, 8]), 0.2);
        joint.insert(DoseTimes::never(8), 0.3);
        let s = AllocationStrategy::new("x", 8, vec![joint]);
        s.validate().unwrap();
        let c = s.cohorts();
        for t in 0..8 {
            let total: f64 = (0..STATES).map(|v| c.fraction(0, v, t)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert_eq!(c.masses(0, 3, 7), &[0.0, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0][..]);
        assert!((c.fraction(0, 2, 7) - 0.25).abs() < 1e-15);
        assert_eq!(s.min_booster_gap(), Some(3));
    }

    #[test]
    fn validate_rejects_non_monotone_support() {
        let mut joint = BTreeMap::new();
        joint.insert(DoseTimes([3, 1, 5]), 1.0);
        let s = AllocationStrategy::new("bad", 5, vec![joint]);
        assert!(s.validate().is_err());
    }
}
