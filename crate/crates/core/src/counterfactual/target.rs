//! Expected number of severe cases under an allocation strategy.

use crate::severity::SeverityFactorization;
use crate::strategy::CohortTable;
use crate::{Error, Result, STATES};

/// Expected severe cases per `[a][t]`:
/// `D_a f0(t) f1(a,t) Σ_v g(v,a) Σ_w P(V=v, W=w | a, t) h^v(w)`,
/// where `v` counts the doses received by week `t` and `w` is the time since the
/// most recent one.
pub fn target_function(cohorts: &CohortTable, severity: &SeverityFactorization, populations: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = cohorts.weeks();
    if severity.weeks() != m || severity.age_groups() != cohorts.age_groups() || populations.len() != cohorts.age_groups() {
        return Err(Error::InvalidConfig("strategy, severity factors and populations disagree in shape".into()));
    }
    let h = severity.waning.h_table(m);
    Ok((0..cohorts.age_groups())
        .map(|a| {
            (0..m)
                .map(|t| {
                    let risk: f64 = (0..STATES)
                        .map(|v| {
                            let mix: f64 = cohorts
                                .masses(a, v, t)
                                .iter()
                                .zip(&h[v])
                                .map(|(p, hw)| p * hw)
                                .sum();
                            severity.g[a][v] * mix
                        })
                        .sum();
                    populations[a] * severity.f0[t] * severity.f1[a][t] * risk
                })
                .collect()
        })
        .collect())
}

/// Total of [`target_function`] over all ages and weeks.
pub fn total_severe(cohorts: &CohortTable, severity: &SeverityFactorization, populations: &[f64]) -> Result<f64> {
    Ok(target_function(cohorts, severity, populations)?.iter().flatten().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::severity::WaningCurve;
    use crate::strategy::{AllocationStrategy, DoseTimes};
    use std::collections::BTreeMap;

    #[test]
    fn unvaccinated_population_reduces_to_f0_g0() {
        let s = AllocationStrategy::unvaccinated("none", 3, 1);
        let sev = SeverityFactorization::new(vec![0.1, 0.2, 0.3], vec![[2.0, 1.0, 0.5, 0.2]], WaningCurve::regular());
        let y = target_function(&s.cohorts(), &sev, &[100.0]).unwrap();
        for (t, f0) in [0.1, 0.2, 0.3].iter().enumerate() {
            assert!((y[0][t] - 100.0 * f0 * 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_cohort_uses_time_since_last_dose() {
        let mut joint = BTreeMap::new();
        joint.insert(DoseTimes([0, 2, 4]), 1.0);
        let s = AllocationStrategy::new("one", 4, vec![joint]);
        let w = WaningCurve::regular();
        let sev = SeverityFactorization::new(vec![1.0; 4], vec![[1.0, 0.5, 0.2, 0.1]], w);
        let y = target_function(&s.cohorts(), &sev, &[1.0]).unwrap();
        assert!((y[0][0] - 0.5).abs() < 1e-15);
        assert!((y[0][1] - 0.5 * w.h(1, 1.0)).abs() < 1e-15);
        assert!((y[0][2] - 0.2).abs() < 1e-15);
        assert!((y[0][3] - 0.2 * w.h(2, 1.0)).abs() < 1e-15);
    }
}
