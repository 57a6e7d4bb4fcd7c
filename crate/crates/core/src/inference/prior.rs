//! Priors and the unconstrained parameter layout.
//!
//! Per age group the coordinates are `log R0`, the log-levels `L_0..L_{K-1}` of
//! `R_base` after each change point, `log σ`, the raw lengths `l†_n`, the date shifts
//! `Δd_n` and `log h*_t` for every week. A single `log κ` closes the vector.
//! Change-point effects are level differences, `Δγ_n = L_n - L_{n-1}` with
//! `L_{-1} = log R0`, so the effects form a Gaussian random walk on the log scale.

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal, Weibull};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::dynamics::{AgeDynamics, ChangePoint, DynamicsParams};
use crate::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub log_r0_mean: f64,
    pub log_r0_sd: f64,
    /// Half-Cauchy scale of the change-point step size `σ_Δγ`.
    pub step_scale: f64,
    pub length_mean: f64,
    pub length_sd: f64,
    pub shift_sd: f64,
    pub influx_shape: f64,
    /// Mean external influx per million inhabitants per day.
    pub influx_per_million: f64,
    pub kappa_scale: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            log_r0_mean: 1.0,
            log_r0_sd: 1.0,
            step_scale: 0.5,
            length_mean: 4.0,
            length_sd: 1.0,
            shift_sd: 3.5,
            influx_shape: 0.3,
            influx_per_million: 0.1,
            kappa_scale: 30.0,
        }
    }
}

impl PriorSpec {
    /// Weibull scale of the weekly influx `h*_a(t)` so that its mean is
    /// `7 * influx_per_million * population / 1e6`.
    pub fn influx_scale(&self, population: f64) -> f64 {
        7.0 * self.influx_per_million * population / 1e6 / gamma(1.0 + 1.0 / self.influx_shape)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.log_r0_sd,
            self.step_scale,
            self.length_sd,
            self.shift_sd,
            self.influx_shape,
            self.influx_per_million,
            self.kappa_scale,
        ];
        if positive.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::InvalidConfig("prior scales must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) fn normal_lpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Half-Cauchy density of `exp(y)` including the Jacobian of `y = log x`.
pub(crate) fn log_half_cauchy_lpdf(y: f64, scale: f64) -> f64 {
    let x = y.exp();
    (2.0 / (std::f64::consts::PI * scale)).ln() - (x / scale).powi(2).ln_1p() + y
}

/// Weibull density of `exp(y)` including the Jacobian.
pub(crate) fn log_weibull_lpdf(y: f64, shape: f64, scale: f64) -> f64 {
    let z = shape * (y - scale.ln());
    shape.ln() + z - z.exp()
}

/// Positions of the parameter blocks inside the coordinate vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub groups: usize,
    pub change_points: usize,
    pub weeks: usize,
}

impl Layout {
    pub fn per_group(&self) -> usize {
        3 * self.change_points + 2 + self.weeks
    }

    pub fn len(&self) -> usize {
        self.groups * self.per_group() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn base(&self, a: usize) -> usize {
        a * self.per_group()
    }

    pub fn log_r0(&self, a: usize) -> usize {
        self.base(a)
    }

    pub fn level(&self, a: usize, n: usize) -> usize {
        self.base(a) + 1 + n
    }

    pub fn log_sigma(&self, a: usize) -> usize {
        self.base(a) + 1 + self.change_points
    }

    pub fn length_raw(&self, a: usize, n: usize) -> usize {
        self.base(a) + 2 + self.change_points + n
    }

    pub fn shift(&self, a: usize, n: usize) -> usize {
        self.base(a) + 2 + 2 * self.change_points + n
    }

    pub fn log_influx(&self, a: usize, t: usize) -> usize {
        self.base(a) + 2 + 3 * self.change_points + t
    }

    pub fn log_kappa(&self) -> usize {
        self.groups * self.per_group()
    }

    /// Level block of group `a`: `log R0` followed by all levels.
    pub fn level_block(&self, a: usize) -> std::ops::Range<usize> {
        self.log_r0(a)..self.level(a, self.change_points)
    }

    /// Dynamics parameters, step sizes `σ_a` and `κ` encoded by `theta`.
    pub fn decode(&self, theta: &[f64], anchor_day: f64, spacing: f64) -> (DynamicsParams, Vec<f64>, f64) {
        let k = self.change_points;
        let ages = (0..self.groups)
            .map(|a| {
                let mut prev = theta[self.log_r0(a)];
                let change_points = (0..k)
                    .map(|n| {
                        let level = theta[self.level(a, n)];
                        let cp = ChangePoint {
                            effect: level - prev,
                            length_raw: theta[self.length_raw(a, n)],
                            shift: theta[self.shift(a, n)],
                        };
                        prev = level;
                        cp
                    })
                    .collect();
                AgeDynamics {
                    r0: theta[self.log_r0(a)].exp(),
                    change_points,
                    influx: (0..self.weeks).map(|t| theta[self.log_influx(a, t)].exp()).collect(),
                }
            })
            .collect();
        let sigma = (0..self.groups).map(|a| theta[self.log_sigma(a)].exp()).collect();
        let params = DynamicsParams {
            ages,
            anchor_day,
            spacing,
        };
        (params, sigma, theta[self.log_kappa()].exp())
    }

    /// Inverse of [`Layout::decode`]; influx values must be positive.
    pub fn encode(&self, params: &DynamicsParams, sigma: &[f64], kappa: f64) -> Result<Vec<f64>> {
        if params.ages.len() != self.groups || sigma.len() != self.groups {
            return Err(Error::InvalidConfig("parameters do not match layout".into()));
        }
        let mut theta = vec![0.0; self.len()];
        for (a, p) in params.ages.iter().enumerate() {
            if p.change_points.len() != self.change_points || p.influx.len() != self.weeks {
                return Err(Error::InvalidConfig("parameters do not match layout".into()));
            }
            if p.r0 <= 0.0 || p.influx.iter().any(|&h| h <= 0.0) || sigma[a] <= 0.0 {
                return Err(Error::InvalidConfig("R0, influx and σ must be positive to encode".into()));
            }
            theta[self.log_r0(a)] = p.r0.ln();
            let mut level = p.r0.ln();
            for (n, cp) in p.change_points.iter().enumerate() {
                level += cp.effect;
                theta[self.level(a, n)] = level;
                theta[self.length_raw(a, n)] = cp.length_raw;
                theta[self.shift(a, n)] = cp.shift;
            }
            theta[self.log_sigma(a)] = sigma[a].ln();
            for (t, h) in p.influx.iter().enumerate() {
                theta[self.log_influx(a, t)] = h.ln();
            }
        }
        theta[self.log_kappa()] = kappa.ln();
        Ok(theta)
    }
}

/// Log prior density of the coordinate vector (with Jacobians of log transforms).
pub fn log_prior(theta: &[f64], layout: &Layout, prior: &PriorSpec, populations: &[f64], with_kappa: bool) -> f64 {
    let mut lp = 0.0;
    for (a, &pop) in populations.iter().enumerate() {
        let log_r0 = theta[layout.log_r0(a)];
        lp += normal_lpdf(log_r0, prior.log_r0_mean, prior.log_r0_sd);
        let log_sigma = theta[layout.log_sigma(a)];
        lp += log_half_cauchy_lpdf(log_sigma, prior.step_scale);
        let sigma = log_sigma.exp();
        let mut prev = log_r0;
        for n in 0..layout.change_points {
            let level = theta[layout.level(a, n)];
            lp += normal_lpdf(level, prev, sigma);
            prev = level;
            lp += normal_lpdf(theta[layout.length_raw(a, n)], prior.length_mean, prior.length_sd);
            lp += normal_lpdf(theta[layout.shift(a, n)], 0.0, prior.shift_sd);
        }
        let scale = prior.influx_scale(pop);
        for t in 0..layout.weeks {
            lp += log_weibull_lpdf(theta[layout.log_influx(a, t)], prior.influx_shape, scale);
        }
    }
    if with_kappa {
        lp += log_half_cauchy_lpdf(theta[layout.log_kappa()], prior.kappa_scale);
    }
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp
    }
}

/// One draw from the prior in coordinate space.
pub fn sample_prior<R: Rng + ?Sized>(rng: &mut R, layout: &Layout, prior: &PriorSpec, populations: &[f64]) -> Vec<f64> {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let half_cauchy = |scale: f64, rng: &mut R| {
        let c = Cauchy::new(0.0, scale).expect("positive scale");
        loop {
            let x: f64 = c.sample(rng).abs();
            if x > 0.0 && x.is_finite() {
                return x;
            }
        }
    };
    let mut theta = vec![0.0; layout.len()];
    for (a, &pop) in populations.iter().enumerate() {
        let log_r0 = prior.log_r0_mean + prior.log_r0_sd * std.sample(rng);
        theta[layout.log_r0(a)] = log_r0;
        let sigma = half_cauchy(prior.step_scale, rng);
        theta[layout.log_sigma(a)] = sigma.ln();
        let mut level = log_r0;
        for n in 0..layout.change_points {
            level += sigma * std.sample(rng);
            theta[layout.level(a, n)] = level;
            theta[layout.length_raw(a, n)] = prior.length_mean + prior.length_sd * std.sample(rng);
            theta[layout.shift(a, n)] = prior.shift_sd * std.sample(rng);
        }
        let weibull = Weibull::new(prior.influx_scale(pop), prior.influx_shape).expect("valid Weibull");
        for t in 0..layout.weeks {
            let h: f64 = weibull.sample(rng);
            theta[layout.log_influx(a, t)] = h.max(f64::MIN_POSITIVE).ln();
        }
    }
    theta[layout.log_kappa()] = half_cauchy(prior.kappa_scale, rng).ln();
    theta
}
