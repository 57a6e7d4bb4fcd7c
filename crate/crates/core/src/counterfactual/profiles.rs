//! Alternative age-risk profiles of the unvaccinated severe-case risk.

use serde::{Deserialize, Serialize};

use crate::data::ISRAEL_AGE_LABELS;
use crate::severity::SeverityFactorization;
use crate::{Error, Result, STATES};

/// Relative severe risk of the unvaccinated by age in the 1918 influenza pandemic,
/// a W-shaped curve peaking in young adults. Approximate digitisation of the Kentucky
/// excess-mortality curve in Viboud et al. 2013 (J Infect Dis 207:721), aggregated to
/// the Israel-format age groups.
pub const SPANISH_FLU_SHAPE: [f64; 9] = [0.35, 1.0, 0.95, 0.55, 0.35, 0.3, 0.4, 0.5, 0.6];

/// Uptake caps `[dose 1, dose 2, dose 3]` of ranked strategies under non-COVID profiles.
pub const FLAT_UPTAKE_CAPS: [f64; 3] = [0.9, 0.9, 0.925];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiseaseProfile {
    Covid,
    FlatRisk,
    SpanishFlu,
}

impl DiseaseProfile {
    pub const ALL: [DiseaseProfile; 3] = [DiseaseProfile::Covid, DiseaseProfile::FlatRisk, DiseaseProfile::SpanishFlu];

    pub fn name(&self) -> &'static str {
        match self {
            DiseaseProfile::Covid => "COVID-19",
            DiseaseProfile::FlatRisk => "FlatRisk",
            DiseaseProfile::SpanishFlu => "SpanishFlu",
        }
    }
}

/// Population-weighted mean of `g(v, a) / g(0, a)` over groups with identified values.
/// Falls back to one when no group identifies `v`.
pub fn vaccine_ratios(severity: &SeverityFactorization, populations: &[f64]) -> [f64; STATES] {
    std::array::from_fn(|v| {
        if v == 0 {
            return 1.0;
        }
        let (num, den) = severity
            .g
            .iter()
            .zip(&severity.identified)
            .zip(populations)
            .filter(|((g, id), _)| id[v] && id[0] && g[0] > 0.0)
            .fold((0.0, 0.0), |(n, d), ((g, _), &p)| (n + p * g[v] / g[0], d + p));
        if den > 0.0 {
            num / den
        } else {
            log::warn!("no age group identifies the dose-{v} risk ratio; using 1");
            1.0
        }
    })
}

/// Unnormalised risk factors `g(v, a)` of a profile. Non-COVID profiles combine an
/// age shape with the age-constant vaccine ratios of the COVID estimate.
pub fn profile_risk(
    profile: DiseaseProfile,
    covid: &SeverityFactorization,
    labels: &[String],
    populations: &[f64],
) -> Result<Vec<[f64; STATES]>> {
    let shape: Vec<f64> = match profile {
        DiseaseProfile::Covid => return Ok(covid.g.clone()),
        DiseaseProfile::FlatRisk => vec![1.0; labels.len()],
        DiseaseProfile::SpanishFlu => {
            if labels.len() != ISRAEL_AGE_LABELS.len() || labels.iter().zip(ISRAEL_AGE_LABELS).any(|(l, r)| l != r) {
                return Err(Error::InvalidConfig(format!(
                    "the SpanishFlu profile is defined for the age groups {ISRAEL_AGE_LABELS:?}"
                )));
            }
            SPANISH_FLU_SHAPE.to_vec()
        }
    };
    let ratios = vaccine_ratios(covid, populations);
    Ok(shape.iter().map(|&s| ratios.map(|r| s * r)).collect())
}

/// Ranking by unvaccinated risk, highest first; ties keep the group order.
/// `None` when all groups share the same risk.
pub fn risk_ranking(g: &[[f64; STATES]]) -> Option<Vec<usize>> {
    if g.iter().all(|x| x[0] == g[0][0]) {
        return None;
    }
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&i, &j| g[j][0].total_cmp(&g[i][0]));
    Some(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::severity::WaningCurve;

    #[test]
    fn ratios_are_population_weighted() {
        let mut s = SeverityFactorization::new(vec![1.0], vec![[1.0, 0.5, 0.2, 0.1], [2.0, 0.4, 0.4, 0.2]], WaningCurve::regular());
        let r = vaccine_ratios(&s, &[1.0, 3.0]);
        assert!((r[1] - (0.5 + 3.0 * 0.2) / 4.0).abs() < 1e-15);
        s.identified[0][3] = false;
        s.identified[1][3] = false;
        assert_eq!(vaccine_ratios(&s, &[1.0, 3.0])[3], 1.0);
    }

    #[test]
    fn ranking_ties_and_order() {
        assert_eq!(risk_ranking(&[[1.0; 4], [1.0; 4]]), None);
        let g = [[0.5, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0], [0.5, 0.0, 0.0, 0.0]];
        assert_eq!(risk_ranking(&g), Some(vec![1, 0, 2]));
    }

    #[test]
    fn spanish_flu_needs_israel_groups() {
        let s = SeverityFactorization::new(vec![1.0], vec![[1.0; 4]; 2], WaningCurve::regular());
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(profile_risk(DiseaseProfile::SpanishFlu, &s, &labels, &[1.0, 1.0]).is_err());
        let flat = profile_risk(DiseaseProfile::FlatRisk, &s, &labels, &[1.0, 1.0]).unwrap();
        assert_eq!(flat[0], flat[1]);
    }
}
