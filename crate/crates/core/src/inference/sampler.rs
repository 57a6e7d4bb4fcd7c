//! Adaptive Metropolis-within-Gibbs with the multi-start chain-selection protocol.
//!
//! Every coordinate gets a Gaussian random-walk proposal with its own log step size,
//! adapted towards an acceptance rate of 0.44 after each batch of sweeps. Block moves
//! shift a suffix of the level chain `log R0, L_0, .., L_{K-1}` by a common offset:
//! the full chain rescales `R_base` of a group, a suffix starting at `L_n` changes
//! the single effect `Δγ_n`. Both directions are strongly correlated under the
//! random-walk prior and stall single-site updates.
//! Adaptation stops before the draw phase, so the retained draws come from a
//! fixed, reversible kernel.

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::PosteriorModel;
use super::prior::sample_prior;
use crate::dynamics::DynamicsParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub init_sweeps: usize,
    /// Chains retained after the initialisation phase.
    pub keep: usize,
    pub tune_sweeps: usize,
    pub draws: usize,
    pub seed: u64,
    /// Sweeps per adaptation batch.
    pub batch: usize,
    pub target_acceptance: f64,
    pub max_init_tries: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 8,
            init_sweeps: 150,
            keep: 2,
            tune_sweeps: 500,
            draws: 500,
            seed: 0,
            batch: 25,
            target_acceptance: 0.44,
            max_init_tries: 1000,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.keep == 0 || self.keep > self.chains {
            return Err(Error::InvalidConfig(format!(
                "need 0 < keep ({}) <= chains ({})",
                self.keep, self.chains
            )));
        }
        if self.batch == 0 || !(0.0 < self.target_acceptance && self.target_acceptance < 1.0) {
            return Err(Error::InvalidConfig("invalid adaptation settings".into()));
        }
        Ok(())
    }
}

/// One retained posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub chain: usize,
    pub draw: usize,
    pub params: DynamicsParams,
    /// Change-point step size per age group.
    pub sigma: Vec<f64>,
    pub kappa: f64,
    pub log_posterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: usize,
    pub kept: bool,
    /// Log posterior at the end of the initialisation phase; `-∞` if no finite start was
    /// found (stored as `null`, read back as NaN).
    #[serde(deserialize_with = "crate::stats::null_as_nan")]
    pub init_log_posterior: f64,
    /// Acceptance rate of single-site proposals during the draw phase, or during
    /// initialisation for discarded chains.
    #[serde(deserialize_with = "crate::stats::null_as_nan")]
    pub acceptance_rate: f64,
    /// Log posterior after every sweep, all phases.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRun {
    pub samples: Vec<PosteriorSample>,
    pub chains: Vec<ChainReport>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Full,
    PriorOnly,
    Kappa,
}

struct Chain<'m> {
    id: usize,
    model: &'m PosteriorModel,
    rng: ChaCha8Rng,
    theta: Vec<f64>,
    log_prior: f64,
    log_likelihood: f64,
    modelled: Option<Vec<Vec<f64>>>,
    kinds: Vec<Kind>,
    log_steps: Vec<f64>,
    blocks: Vec<std::ops::Range<usize>>,
    block_steps: Vec<f64>,
    accepted: Vec<u32>,
    block_accepted: Vec<u32>,
    batches: usize,
    sweeps_in_batch: usize,
    phase_accepted: u64,
    phase_proposed: u64,
    trace: Vec<f64>,
}

impl<'m> Chain<'m> {
    fn start(id: usize, model: &'m PosteriorModel, config: &SamplerConfig) -> Option<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(id as u64);
        let layout = model.layout;
        for _ in 0..config.max_init_tries.max(1) {
            let mut theta = sample_prior(&mut rng, &layout, &model.prior, &model.populations);
            if let Some(k) = model.options.fixed_kappa {
                theta[layout.log_kappa()] = k.ln();
            }
            let eval = model.evaluate(&theta);
            if !eval.log_posterior(model.options.likelihood_weight).is_finite() {
                continue;
            }
            let mut kinds = vec![Kind::Full; layout.len()];
            let mut log_steps = vec![0.05f64.ln(); layout.len()];
            for a in 0..layout.groups {
                kinds[layout.log_sigma(a)] = Kind::PriorOnly;
                log_steps[layout.log_sigma(a)] = 0.3f64.ln();
                for n in 0..layout.change_points {
                    log_steps[layout.length_raw(a, n)] = 0.5f64.ln();
                    log_steps[layout.shift(a, n)] = 0.0;
                }
                for t in 0..layout.weeks {
                    log_steps[layout.log_influx(a, t)] = 0.0;
                }
            }
            kinds[layout.log_kappa()] = Kind::Kappa;
            log_steps[layout.log_kappa()] = 0.1f64.ln();
            if model.options.likelihood_weight == 0.0 {
                kinds.iter_mut().for_each(|k| *k = Kind::PriorOnly);
            }
            let blocks: Vec<std::ops::Range<usize>> = (0..layout.groups)
                .flat_map(|a| {
                    let end = layout.level_block(a).end;
                    std::iter::once(layout.log_r0(a)..end)
                        .chain((0..layout.change_points).map(move |n| layout.level(a, n)..end))
                })
                .collect();
            let nb = blocks.len();
            return Some(Chain {
                id,
                model,
                rng,
                theta,
                log_prior: eval.log_prior,
                log_likelihood: eval.log_likelihood,
                modelled: eval.modelled,
                kinds,
                log_steps,
                blocks,
                block_steps: vec![0.02f64.ln(); nb],
                accepted: vec![0; layout.len()],
                block_accepted: vec![0; nb],
                batches: 0,
                sweeps_in_batch: 0,
                phase_accepted: 0,
                phase_proposed: 0,
                trace: Vec::new(),
            });
        }
        None
    }

    fn weight(&self) -> f64 {
        self.model.options.likelihood_weight
    }

    fn log_posterior(&self) -> f64 {
        if self.weight() == 0.0 {
            self.log_prior
        } else {
            self.log_prior + self.weight() * self.log_likelihood
        }
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Metropolis step on the proposal already written to `theta`, reverting on rejection.
    fn accept_or_revert(&mut self, kind: Kind, saved: &[(usize, f64)]) -> bool {
        let w = self.weight();
        let current = self.log_posterior();
        let log_prior = self.model.log_prior(&self.theta);
        let (log_likelihood, modelled) = match kind {
            Kind::PriorOnly => (self.log_likelihood, None),
            Kind::Kappa => {
                let m = self.modelled.as_ref().expect("likelihood evaluated");
                (self.model.likelihood_from_cases(m, &self.theta), None)
            }
            Kind::Full => {
                if log_prior == f64::NEG_INFINITY {
                    (f64::NEG_INFINITY, None)
                } else {
                    match self.model.modelled_cases(&self.theta) {
                        Some(m) => (self.model.likelihood_from_cases(&m, &self.theta), Some(m)),
                        None => (f64::NEG_INFINITY, None),
                    }
                }
            }
        };
        let proposed = if w == 0.0 { log_prior } else { log_prior + w * log_likelihood };
        let u: f64 = self.rng.random();
        if proposed.is_finite() && u.ln() < proposed - current {
            self.log_prior = log_prior;
            self.log_likelihood = log_likelihood;
            if modelled.is_some() {
                self.modelled = modelled;
            }
            true
        } else {
            for &(i, x) in saved {
                self.theta[i] = x;
            }
            false
        }
    }

    fn sweep(&mut self, adapt: bool, config: &SamplerConfig) {
        let layout = self.model.layout;
        for i in 0..layout.len() {
            if i == layout.log_kappa() && self.model.options.fixed_kappa.is_some() {
                continue;
            }
            let saved = [(i, self.theta[i])];
            self.theta[i] += self.log_steps[i].exp() * self.normal();
            let ok = self.accept_or_revert(self.kinds[i], &saved);
            self.accepted[i] += ok as u32;
            self.phase_accepted += ok as u64;
            self.phase_proposed += 1;
        }
        for b in 0..self.blocks.len() {
            let delta = self.block_steps[b].exp() * self.normal();
            let block = self.blocks[b].clone();
            let saved: Vec<(usize, f64)> = block.clone().map(|i| (i, self.theta[i])).collect();
            for i in block {
                self.theta[i] += delta;
            }
            let kind = if self.weight() == 0.0 { Kind::PriorOnly } else { Kind::Full };
            let ok = self.accept_or_revert(kind, &saved);
            self.block_accepted[b] += ok as u32;
        }
        self.trace.push(self.log_posterior());
        self.sweeps_in_batch += 1;
        if self.sweeps_in_batch == config.batch {
            if adapt {
                self.batches += 1;
                let delta = (1.0 / (self.batches as f64).sqrt()).min(0.3);
                let n = config.batch as f64;
                let target = config.target_acceptance;
                let shift = |steps: &mut [f64], acc: &[u32]| {
                    for (s, &k) in steps.iter_mut().zip(acc) {
                        *s += if k as f64 / n > target { delta } else { -delta };
                        *s = s.clamp(-12.0, 3.0);
                    }
                };
                shift(&mut self.log_steps, &self.accepted);
                shift(&mut self.block_steps, &self.block_accepted);
            }
            self.sweeps_in_batch = 0;
            self.accepted.iter_mut().for_each(|k| *k = 0);
            self.block_accepted.iter_mut().for_each(|k| *k = 0);
        }
    }

    fn sample(&self, draw: usize) -> PosteriorSample {
        let (params, sigma, kappa) = self.model.decode(&self.theta);
        PosteriorSample {
            chain: self.id,
            draw,
            params,
            sigma,
            kappa,
            log_posterior: self.log_posterior(),
        }
    }
}

/// Indices of the `keep` chains with the highest log posterior; ties favour the lower id.
pub fn select_chains(log_posteriors: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..log_posteriors.len()).collect();
    order.sort_by(|&i, &j| log_posteriors[j].total_cmp(&log_posteriors[i]).then(i.cmp(&j)));
    let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
    kept.sort_unstable();
    kept
}

/// Runs the multi-start protocol: `chains` initialisation runs, the best `keep`
/// continue through tuning and drawing. Deterministic for a given seed.
pub fn sample_posterior(model: &PosteriorModel, config: &SamplerConfig) -> Result<PosteriorRun> {
    config.validate()?;
    let started: Vec<Option<Chain>> = (0..config.chains)
        .into_par_iter()
        .map(|id| {
            let mut chain = Chain::start(id, model, config)?;
            for _ in 0..config.init_sweeps {
                chain.sweep(true, config);
            }
            Some(chain)
        })
        .collect();
    let failed: Vec<usize> = (0..config.chains).filter(|&i| started[i].is_none()).collect();
    if failed.len() == config.chains {
        return Err(Error::Numerical(format!(
            "no chain found a finite log posterior within {} prior draws",
            config.max_init_tries
        )));
    }
    if !failed.is_empty() {
        warn!("chains {failed:?} failed to initialise");
    }
    let init_lp: Vec<f64> = started
        .iter()
        .map(|c| c.as_ref().map_or(f64::NEG_INFINITY, |c| c.log_posterior()))
        .collect();
    let keep = config.keep.min(config.chains - failed.len());
    let kept = select_chains(&init_lp, keep);
    info!("kept chains {kept:?} with log posterior {:?}", kept.iter().map(|&i| init_lp[i]).collect::<Vec<_>>());

    let mut reports: Vec<ChainReport> = started
        .iter()
        .enumerate()
        .map(|(id, c)| ChainReport {
            chain: id,
            kept: false,
            init_log_posterior: init_lp[id],
            acceptance_rate: c
                .as_ref()
                .map_or(f64::NAN, |c| c.phase_accepted as f64 / c.phase_proposed.max(1) as f64),
            trace: c.as_ref().map(|c| c.trace.clone()).unwrap_or_default(),
        })
        .collect();
    let mut continuing: Vec<Chain> = started
        .into_iter()
        .enumerate()
        .filter_map(|(id, c)| if kept.contains(&id) { c } else { None })
        .collect();
    let results: Vec<(usize, f64, Vec<f64>, Vec<PosteriorSample>)> = continuing
        .par_iter_mut()
        .map(|chain| {
            for _ in 0..config.tune_sweeps {
                chain.sweep(true, config);
            }
            chain.phase_accepted = 0;
            chain.phase_proposed = 0;
            let mut draws = Vec::with_capacity(config.draws);
            for d in 0..config.draws {
                chain.sweep(false, config);
                draws.push(chain.sample(d));
            }
            let rate = chain.phase_accepted as f64 / chain.phase_proposed.max(1) as f64;
            (chain.id, rate, chain.trace.clone(), draws)
        })
        .collect();
    let mut samples = Vec::with_capacity(keep * config.draws);
    for (id, rate, trace, draws) in results {
        reports[id].kept = true;
        reports[id].acceptance_rate = rate;
        reports[id].trace = trace;
        samples.extend(draws);
    }
    Ok(PosteriorRun {
        samples,
        chains: reports,
    })
}

/// Potential scale reduction of split chains (Gelman et al. 2013).
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[c.len() - h..]]
        })
        .filter(|h| h.len() >= 2)
        .collect();
    if halves.len() < 2 {
        return f64::NAN;
    }
    let n = halves[0].len().min(halves.iter().map(|h| h.len()).min().unwrap_or(0)) as f64;
    let means: Vec<f64> = halves.iter().map(|h| crate::stats::mean(h)).collect();
    let within = crate::stats::mean(&halves.iter().map(|h| crate::stats::variance(h)).collect::<Vec<_>>());
    let between = n * crate::stats::variance(&means);
    if within <= 0.0 {
        return if between <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * within + between / n) / within).sqrt()
}
