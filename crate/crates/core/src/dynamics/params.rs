//! Parameters of the renewal model and the base reproduction number.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::{Error, Result};

pub const KERNEL_LEN: usize = 11;
pub const GENERATION_MEAN: f64 = 4.0;
pub const GENERATION_SD: f64 = 1.5;
pub const REPORTING_DELAY: usize = 6;
/// Protection against infection directly after dose 1, 2 and 3.
pub const PROTECTION: [f64; 3] = [0.70, 0.90, 0.95];
pub const CHANGE_POINTS: usize = 10;
pub const CHANGE_POINT_SPACING: f64 = 21.0;

/// Generation-interval weights `g(τ)`, `τ = 0..=10`, summing to one.
pub fn generation_kernel(mean: f64, sd: f64) -> Result<[f64; KERNEL_LEN]> {
    if !(mean > 0.0 && sd > 0.0) {
        return Err(Error::InvalidConfig(format!("invalid generation interval ({mean}, {sd})")));
    }
    let shape = (mean / sd).powi(2);
    let rate = mean / (sd * sd);
    let dist = Gamma::new(shape, rate).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut g: [f64; KERNEL_LEN] = std::array::from_fn(|t| dist.cdf(t as f64 + 1.0) - dist.cdf(t as f64));
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= total);
    Ok(g)
}

/// One logistic change point of `log R_base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    /// Effect `Δγ` on `log R_base` once the transition is complete.
    pub effect: f64,
    /// Unconstrained transition length `l†`; the length in days is `softplus(l†)`.
    pub length_raw: f64,
    /// Offset `Δd` in days from the nominal date.
    pub shift: f64,
}

impl ChangePoint {
    pub fn length(&self) -> f64 {
        softplus(self.length_raw)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Parameters of one age group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeDynamics {
    pub r0: f64,
    pub change_points: Vec<ChangePoint>,
    /// Weekly external influx `h*_a(t)`.
    pub influx: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub ages: Vec<AgeDynamics>,
    /// Day offset of change point 0 from the window start.
    pub anchor_day: f64,
    pub spacing: f64,
}

impl DynamicsParams {
    /// Constant `R_base = r0[a]`, no influx.
    pub fn constant(r0: &[f64], weeks: usize, anchor_day: f64) -> Self {
        DynamicsParams {
            ages: r0
                .iter()
                .map(|&r| AgeDynamics {
                    r0: r,
                    change_points: vec![
                        ChangePoint {
                            effect: 0.0,
                            length_raw: 4.0,
                            shift: 0.0
                        };
                        CHANGE_POINTS
                    ],
                    influx: vec![0.0; weeks],
                })
                .collect(),
            anchor_day,
            spacing: CHANGE_POINT_SPACING,
        }
    }

    pub fn age_groups(&self) -> usize {
        self.ages.len()
    }

    /// Nominal date of change point `n` before its shift.
    pub fn nominal_day(&self, n: usize) -> f64 {
        self.anchor_day + self.spacing * n as f64
    }

    /// `R_base,a(day) = R0 exp(Σ_n Δγ_n σ(4 (day - d_n) / l_n))`.
    pub fn base_reproduction(&self, a: usize, day: f64) -> f64 {
        let p = &self.ages[a];
        let exponent: f64 = p
            .change_points
            .iter()
            .enumerate()
            .map(|(n, cp)| {
                let d = self.nominal_day(n) + cp.shift;
                cp.effect / (1.0 + (-4.0 / cp.length() * (day - d)).exp())
            })
            .sum();
        p.r0 * exponent.exp()
    }

    pub fn validate(&self, groups: usize, weeks: usize) -> Result<()> {
        if self.ages.len() != groups {
            return Err(Error::InvalidConfig(format!(
                "parameters for {} groups, dataset has {groups}",
                self.ages.len()
            )));
        }
        for (a, p) in self.ages.iter().enumerate() {
            if !(p.r0.is_finite() && p.r0 >= 0.0) {
                return Err(Error::InvalidConfig(format!("group {a}: invalid R0 {}", p.r0)));
            }
            if p.influx.len() != weeks || p.influx.iter().any(|&h| !(h.is_finite() && h >= 0.0)) {
                return Err(Error::InvalidConfig(format!("group {a}: influx must be {weeks} non-negative values")));
            }
            if p.change_points.iter().any(|c| !(c.effect.is_finite() && c.length_raw.is_finite() && c.shift.is_finite())) {
                return Err(Error::InvalidConfig(format!("group {a}: non-finite change point")));
            }
        }
        Ok(())
    }
}
