//! Matched-week estimators of `g(0,a)`, `g(v,a)` and `f0(t)`.
//!
//! Ratios of time averages use, for every week, the same weight in numerator and
//! denominator and only weeks where both strata are populated. On noise-free data
//! generated from the factorisation the estimators are therefore exact.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{SeverityFactorization, WaningCurve};
use crate::data::{ObservedDataset, REFERENCE_AGE_LABEL};
use crate::{Error, Result, STATES};

/// Weights of the expectation over weeks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Stratum population of the numerator stratum.
    #[default]
    PersonCount,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationOptions {
    pub weighting: Weighting,
    pub reference: String,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        EstimationOptions {
            weighting: Weighting::PersonCount,
            reference: REFERENCE_AGE_LABEL.to_string(),
        }
    }
}

fn weight(weighting: Weighting, population: f64) -> f64 {
    match weighting {
        Weighting::PersonCount => population,
        Weighting::Uniform => 1.0,
    }
}

/// `E_{W|v,a,t}[h^v(W)]` under the dataset's waning-time distribution.
pub fn mean_h(data: &ObservedDataset, waning: &WaningCurve, v: usize, a: usize, t: usize) -> Option<f64> {
    if v == 0 {
        return Some(1.0);
    }
    let mass = data.cohorts.masses(a, v, t);
    let total: f64 = mass.iter().sum();
    (total > 0.0).then(|| {
        mass.iter()
            .enumerate()
            .map(|(w, p)| p * waning.h(v, w as f64))
            .sum::<f64>()
            / total
    })
}

/// `g(0, a)` relative to the reference group.
pub fn estimate_g0(data: &ObservedDataset, options: &EstimationOptions) -> Result<Vec<f64>> {
    let reference = data
        .group_index(&options.reference)
        .ok_or_else(|| Error::Estimation(format!("reference age group {} not in dataset", options.reference)))?;
    (0..data.age_groups())
        .map(|a| {
            let (mut num, mut den) = (0.0, 0.0);
            for t in 0..data.weeks() {
                let s = data.severe[a][0][t];
                if let (Some(p), Some(q)) = (s.probability(), data.severe[reference][0][t].probability()) {
                    let w = weight(options.weighting, s.population);
                    num += w * p;
                    den += w * q;
                }
            }
            if den > 0.0 {
                Ok(num / den)
            } else {
                Err(Error::Estimation(format!(
                    "no unvaccinated severe-case exposure shared by {} and {}",
                    data.groups[a].label, options.reference
                )))
            }
        })
        .collect()
}

/// `g(v, a)` for `v = 1..3`, `None` where no week has both strata populated.
/// Index 0 of every row repeats `g0`.
pub fn estimate_gv(
    data: &ObservedDataset,
    waning: &WaningCurve,
    g0: &[f64],
    options: &EstimationOptions,
) -> Result<Vec<[Option<f64>; STATES]>> {
    if g0.len() != data.age_groups() {
        return Err(Error::Estimation("one g0 value per age group required".into()));
    }
    Ok((0..data.age_groups())
        .map(|a| {
            std::array::from_fn(|v| {
                if v == 0 {
                    return Some(g0[a]);
                }
                let (mut num, mut den) = (0.0, 0.0);
                for t in 0..data.weeks() {
                    let s = data.severe[a][v][t];
                    let (Some(p), Some(q), Some(hbar)) =
                        (s.probability(), data.severe[a][0][t].probability(), mean_h(data, waning, v, a, t))
                    else {
                        continue;
                    };
                    let w = weight(options.weighting, s.population);
                    num += w * p / hbar;
                    den += w * q;
                }
                (den > 0.0).then(|| num / den * g0[a])
            })
        })
        .collect())
}

/// Replaces unidentified `g(v, a)` by `g(0, a) r_v`, with `r_v` the population-weighted
/// mean of `g(v, a') / g(0, a')` over identified groups (1 if none).
pub fn impute_unidentified(
    data: &ObservedDataset,
    g: &[[Option<f64>; STATES]],
) -> (Vec<[f64; STATES]>, Vec<[bool; STATES]>) {
    let pops = data.populations();
    let mut ratio = [1.0; STATES];
    for (v, r) in ratio.iter_mut().enumerate().skip(1) {
        let (mut num, mut den) = (0.0, 0.0);
        for (a, row) in g.iter().enumerate() {
            if let (Some(gv), Some(g0)) = (row[v], row[0]) {
                if g0 > 0.0 {
                    num += pops[a] * gv / g0;
                    den += pops[a];
                }
            }
        }
        if den > 0.0 {
            *r = num / den;
        } else {
            warn!("no age group identifies g({v}, a); using g({v}, a) = g(0, a)");
        }
    }
    let identified = g.iter().map(|row| row.map(|x| x.is_some())).collect();
    let values = g
        .iter()
        .enumerate()
        .map(|(a, row)| {
            std::array::from_fn(|v| match row[v] {
                Some(x) => x,
                None => {
                    warn!("g({v}, {}) unidentified, imputed", data.groups[a].label);
                    row[0].unwrap_or(0.0) * ratio[v]
                }
            })
        })
        .collect();
    (values, identified)
}

/// `f0(t)`: person-weighted mean of `P(S=1|v,a,t) / (g(v,a) E[h^v(W)])` over strata.
pub fn estimate_f0(data: &ObservedDataset, g: &[[f64; STATES]], waning: &WaningCurve) -> Result<Vec<f64>> {
    (0..data.weeks())
        .map(|t| {
            let (mut num, mut den) = (0.0, 0.0);
            for a in 0..data.age_groups() {
                for v in 0..STATES {
                    let s = data.severe[a][v][t];
                    let (Some(p), Some(hbar)) = (s.probability(), mean_h(data, waning, v, a, t)) else {
                        continue;
                    };
                    if g[a][v] <= 0.0 {
                        continue;
                    }
                    num += s.population * p / (g[a][v] * hbar);
                    den += s.population;
                }
            }
            if den > 0.0 {
                Ok(num / den)
            } else {
                Err(Error::Estimation(format!("week {} has no severe-case exposure", t + 1)))
            }
        })
        .collect()
}

/// Full pipeline `g0 -> g(v,a) -> f0` under the factual strategy (`f1 = 1`).
pub fn fit_factorization(
    data: &ObservedDataset,
    waning: &WaningCurve,
    options: &EstimationOptions,
) -> Result<SeverityFactorization> {
    let g0 = estimate_g0(data, options)?;
    let gv = estimate_gv(data, waning, &g0, options)?;
    let (g, identified) = impute_unidentified(data, &gv);
    let f0 = estimate_f0(data, &g, waning)?;
    let mut fact = SeverityFactorization::new(f0, g, *waning);
    fact.identified = identified;
    Ok(fact)
}
