//! Greedy generators for factual, uniform, ranked and uptake-boost strategies.
//!
//! All generators share one pairing rule: a second dose in week `t2` is matched to the
//! first-dose cohort `t2 - 3`, then `t2 - 4`, and so on (never sooner than three weeks);
//! a third dose in week `t3` is matched to second-dose cohorts with `t2 <= t3 - 12`,
//! earliest cohort first.

use std::collections::BTreeMap;

use super::{AllocationStrategy, DoseTimes};
use crate::data::AgeGroup;
use crate::{Error, Result, DOSES};

/// Preferred gap in weeks between first and second dose (also the minimum).
pub const TARGET_SECOND_GAP: usize = 3;
/// Minimum gap in weeks between second and third dose.
pub const MIN_BOOSTER_GAP: usize = 12;
/// Absolute relaxation of the booster uptake cap for ranked strategies.
pub const BOOSTER_CAP_RELAXATION: f64 = 0.025;

// Residual mass below this fraction of the group total counts as fully allocated.
const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Cohort {
    t1: usize,
    t2: usize,
    remaining: f64,
}

/// Pairs weekly dose masses of one age group into a joint distribution.
///
/// Masses may be probabilities or person counts; `total` is the group total in the same
/// unit and the never-vaccinated mass is `total - sum(first)`.
pub fn pair_doses(
    first: &[f64],
    second: &[f64],
    third: &[f64],
    total: f64,
) -> Result<BTreeMap<DoseTimes, f64>> {
    let m = first.len();
    if second.len() != m || third.len() != m {
        return Err(Error::InvalidData("dose marginals of unequal length".into()));
    }
    let tol = REL_TOL * total.max(1.0);
    let mut waiting = first.to_vec();
    let mut cohorts: Vec<Cohort> = Vec::new();
    for t2 in 0..m {
        let mut need = second[t2];
        for gap in TARGET_SECOND_GAP..=t2 {
            if need <= 0.0 {
                break;
            }
            let t1 = t2 - gap;
            let take = need.min(waiting[t1]);
            if take > 0.0 {
                waiting[t1] -= take;
                need -= take;
                cohorts.push(Cohort { t1, t2, remaining: take });
            }
        }
        if need > tol {
            return Err(Error::Infeasible(format!(
                "{need} second doses in week {} have no first dose at least {TARGET_SECOND_GAP} weeks earlier",
                t2 + 1
            )));
        }
    }
    // Earliest second-dose cohort first, ties by earliest first dose.
    cohorts.sort_by_key(|c| (c.t2, c.t1));

    let mut joint = BTreeMap::new();
    let mut add = |times: DoseTimes, p: f64| {
        if p > 0.0 {
            *joint.entry(times).or_insert(0.0) += p;
        }
    };
    for t3 in 0..m {
        let mut need = third[t3];
        for c in cohorts.iter_mut() {
            if need <= 0.0 || c.t2 + MIN_BOOSTER_GAP > t3 {
                break;
            }
            let take = need.min(c.remaining);
            if take > 0.0 {
                c.remaining -= take;
                need -= take;
                add(DoseTimes([c.t1 as u32, c.t2 as u32, t3 as u32]), take);
            }
        }
        if need > tol {
            return Err(Error::Infeasible(format!(
                "{need} third doses in week {} have no second dose at least {MIN_BOOSTER_GAP} weeks earlier",
                t3 + 1
            )));
        }
    }
    let never = m as u32;
    for c in &cohorts {
        add(DoseTimes([c.t1 as u32, c.t2 as u32, never]), c.remaining);
    }
    for (t1, &p) in waiting.iter().enumerate() {
        add(DoseTimes([t1 as u32, never, never]), p);
    }
    let given: f64 = first.iter().sum();
    let rest = total - given;
    if rest < -tol {
        return Err(Error::Infeasible(format!("first doses {given} exceed group total {total}")));
    }
    add(DoseTimes::never(m), rest.max(0.0));
    Ok(joint)
}

/// Reconstructs the factual joint from per-age marginals `P(T_i = t | a)`.
pub fn reconstruct_factual(
    marginals: &[[Vec<f64>; DOSES]],
    weeks: usize,
    label: &str,
) -> Result<AllocationStrategy> {
    let per_age = marginals
        .iter()
        .enumerate()
        .map(|(a, m)| {
            if m.iter().any(|d| d.len() != weeks) {
                return Err(Error::InvalidData(format!("marginals of group {a} do not cover {weeks} weeks")));
            }
            pair_doses(&m[0], &m[1], &m[2], 1.0)
                .map_err(|e| Error::Infeasible(format!("group {a}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AllocationStrategy::new(label, weeks, per_age))
}

/// Weekly person-dose budgets and per-age uptake of a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct DoseBudget {
    /// Person-doses per week, indexed `[dose][t]`.
    pub per_week: [Vec<f64>; DOSES],
    /// Uptake fraction per age group and dose, `[a][dose]`.
    pub uptake: Vec<[f64; DOSES]>,
}

impl DoseBudget {
    pub fn of(strategy: &AllocationStrategy, groups: &[AgeGroup]) -> Self {
        DoseBudget {
            per_week: std::array::from_fn(|i| strategy.weekly_doses(groups, i)),
            uptake: (0..groups.len())
                .map(|a| std::array::from_fn(|i| strategy.uptake(a, i)))
                .collect(),
        }
    }

    /// Caps used by ranked strategies: factual uptake for doses one and two, relaxed
    /// booster uptake for dose three.
    pub fn ranked_caps(&self) -> Vec<[f64; DOSES]> {
        self.uptake
            .iter()
            .map(|u| [u[0], u[1], (u[2] + BOOSTER_CAP_RELAXATION).min(1.0)])
            .collect()
    }
}

/// Same vaccination-time distribution for every age group, conserving weekly totals.
pub fn generate_uniform(factual: &AllocationStrategy, groups: &[AgeGroup]) -> Result<AllocationStrategy> {
    check_groups(factual, groups)?;
    let total: f64 = groups.iter().map(|g| g.population).sum();
    let budget = DoseBudget::of(factual, groups);
    let shares: [Vec<f64>; DOSES] =
        std::array::from_fn(|i| budget.per_week[i].iter().map(|b| b / total).collect());
    let joint = pair_doses(&shares[0], &shares[1], &shares[2], 1.0)
        .map_err(|e| Error::Infeasible(format!("uniform allocation: {e}")))?;
    Ok(AllocationStrategy::new(
        "Uniform",
        factual.weeks,
        vec![joint; groups.len()],
    ))
}

/// Ranked allocation: each week's doses go to the highest-ranked group that still has
/// uptake room, spilling over to the next group within the same week. Each dose first
/// fills every group up to the uptake of the doses that follow it, in rank order.
pub fn generate_ranked(
    factual: &AllocationStrategy,
    ranking: &[usize],
    groups: &[AgeGroup],
    label: &str,
) -> Result<AllocationStrategy> {
    let caps = DoseBudget::of(factual, groups).ranked_caps();
    generate_ranked_with_caps(factual, ranking, groups, &caps, label)
}

#[derive(Debug, Default, Clone)]
struct GroupState {
    waiting: Vec<f64>,
    cohorts: Vec<Cohort>,
    boosted: BTreeMap<DoseTimes, f64>,
    given: [f64; DOSES],
}

/// Ranked allocation with explicit per-age uptake caps (fractions, `[a][dose]`).
pub fn generate_ranked_with_caps(
    factual: &AllocationStrategy,
    ranking: &[usize],
    groups: &[AgeGroup],
    caps: &[[f64; DOSES]],
    label: &str,
) -> Result<AllocationStrategy> {
    check_groups(factual, groups)?;
    let n = groups.len();
    let mut seen = vec![false; n];
    if ranking.len() != n || ranking.iter().any(|&a| a >= n || std::mem::replace(&mut seen[a], true)) {
        return Err(Error::InvalidConfig(format!("ranking {ranking:?} is not a permutation of {n} groups")));
    }
    if caps.len() != n || caps.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::InvalidConfig("uptake caps must lie in [0, 1] for every group".into()));
    }
    let m = factual.weeks;
    let budget = DoseBudget::of(factual, groups);
    let total: f64 = groups.iter().map(|g| g.population).sum();
    let tol = REL_TOL * total;
    // Tier `k` of a group: people who will receive `k + 1` doses. Dose `d` fills tiers
    // `DOSES - 1` down to `d`, so people owed later doses are vaccinated first and every
    // later weekly budget stays placeable.
    let tier_room = |state: &GroupState, a: usize, dose: usize, tier: usize| {
        let cap = caps[a][..=tier].iter().copied().fold(1.0, f64::min);
        (cap * groups[a].population - state.given[dose]).max(0.0)
    };

    let mut states = vec![
        GroupState {
            waiting: vec![0.0; m],
            ..Default::default()
        };
        n
    ];
    for t in 0..m {
        let mut left = budget.per_week[0][t];
        for tier in (0..DOSES).rev() {
            for &a in ranking {
                if left <= 0.0 {
                    break;
                }
                let s = &mut states[a];
                let take = left.min(tier_room(s, a, 0, tier));
                if take > 0.0 {
                    s.waiting[t] += take;
                    s.given[0] += take;
                    left -= take;
                }
            }
        }
        if left > tol {
            return Err(Error::Infeasible(format!("{left} first doses in week {} exceed all caps", t + 1)));
        }

        let mut left = budget.per_week[1][t];
        for tier in (1..DOSES).rev() {
            for &a in ranking {
                let s = &mut states[a];
                let mut r = tier_room(s, a, 1, tier);
                for gap in TARGET_SECOND_GAP..=t {
                    if left <= 0.0 || r <= 0.0 {
                        break;
                    }
                    let t1 = t - gap;
                    let take = left.min(r).min(s.waiting[t1]);
                    if take > 0.0 {
                        s.waiting[t1] -= take;
                        s.given[1] += take;
                        s.cohorts.push(Cohort { t1, t2: t, remaining: take });
                        left -= take;
                        r -= take;
                    }
                }
            }
        }
        if left > tol {
            return Err(Error::Infeasible(format!(
                "{left} second doses in week {} cannot be placed under the uptake caps",
                t + 1
            )));
        }

        let mut left = budget.per_week[2][t];
        for &a in ranking {
            let s = &mut states[a];
            let mut r = tier_room(s, a, 2, 2);
            s.cohorts.sort_by_key(|c| (c.t2, c.t1));
            for c in s.cohorts.iter_mut() {
                if left <= 0.0 || r <= 0.0 || c.t2 + MIN_BOOSTER_GAP > t {
                    break;
                }
                let take = left.min(r).min(c.remaining);
                if take > 0.0 {
                    c.remaining -= take;
                    *s.boosted
                        .entry(DoseTimes([c.t1 as u32, c.t2 as u32, t as u32]))
                        .or_insert(0.0) += take;
                    s.given[2] += take;
                    left -= take;
                    r -= take;
                }
            }
        }
        if left > tol {
            return Err(Error::Infeasible(format!(
                "{left} third doses in week {} cannot be placed under the uptake caps",
                t + 1
            )));
        }
    }

    let never = m as u32;
    let per_age = states
        .into_iter()
        .zip(groups)
        .map(|(s, g)| {
            let pop = g.population;
            let mut joint: BTreeMap<DoseTimes, f64> = BTreeMap::new();
            let mut add = |times: DoseTimes, count: f64| {
                if count > 0.0 {
                    *joint.entry(times).or_insert(0.0) += count / pop;
                }
            };
            for (times, count) in s.boosted {
                add(times, count);
            }
            for c in &s.cohorts {
                add(DoseTimes([c.t1 as u32, c.t2 as u32, never]), c.remaining);
            }
            for (t1, &w) in s.waiting.iter().enumerate() {
                add(DoseTimes([t1 as u32, never, never]), w);
            }
            add(DoseTimes::never(m), pop - s.given[0]);
            joint
        })
        .collect();
    Ok(AllocationStrategy::new(label, m, per_age))
}

/// Gives `extra_doses` additional doses to group `target`, as `extra_doses / 3`
/// previously unvaccinated people receiving all three doses. Each dose's weekly counts
/// in the group are scaled by one constant factor.
pub fn boost_uptake(
    factual: &AllocationStrategy,
    groups: &[AgeGroup],
    target: usize,
    extra_doses: f64,
) -> Result<AllocationStrategy> {
    check_groups(factual, groups)?;
    if target >= groups.len() {
        return Err(Error::InvalidConfig(format!("no age group with index {target}")));
    }
    if !(extra_doses.is_finite() && extra_doses >= 0.0) {
        return Err(Error::InvalidConfig(format!("invalid number of extra doses {extra_doses}")));
    }
    let label = format!("Uptake+{}", groups[target].label);
    if extra_doses == 0.0 {
        return Ok(factual.clone().with_label(label));
    }
    let pop = groups[target].population;
    let persons = extra_doses / DOSES as f64;
    let unvaccinated = factual.never_mass(target) * pop;
    if persons > unvaccinated {
        return Err(Error::Infeasible(format!(
            "{extra_doses} extra doses need {persons} unvaccinated people but group {} has {unvaccinated}",
            groups[target].label
        )));
    }
    let marginals = factual.marginals(target);
    let scaled: Vec<Vec<f64>> = marginals
        .iter()
        .enumerate()
        .map(|(i, marginal)| {
            let given: f64 = marginal.iter().sum::<f64>() * pop;
            if given <= 0.0 {
                return Err(Error::Infeasible(format!(
                    "group {} has no factual dose {} to scale",
                    groups[target].label,
                    i + 1
                )));
            }
            let factor = 1.0 + persons / given;
            Ok(marginal.iter().map(|p| p * factor).collect())
        })
        .collect::<Result<_>>()?;
    let joint = pair_doses(&scaled[0], &scaled[1], &scaled[2], 1.0)?;
    let mut out = factual.clone().with_label(label);
    out.per_age[target] = joint;
    Ok(out)
}

fn check_groups(strategy: &AllocationStrategy, groups: &[AgeGroup]) -> Result<()> {
    if strategy.age_groups() != groups.len() {
        return Err(Error::InvalidConfig(format!(
            "strategy has {} age groups but {} populations were given",
            strategy.age_groups(),
            groups.len()
        )));
    }
    Ok(())
}
