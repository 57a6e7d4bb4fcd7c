//! Bayesian inference of the renewal-model parameters from reported cases.

mod likelihood;
mod prior;
mod sampler;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

pub use likelihood::{case_log_likelihood, log_likelihood, Evaluation, ModelOptions, PosteriorModel, STUDENT_DF};
pub use prior::{log_prior, sample_prior, Layout, PriorSpec};
pub use sampler::{sample_posterior, select_chains, split_rhat, ChainReport, PosteriorRun, PosteriorSample, SamplerConfig};

use crate::stats::{effective_sample_size, Interval};
use crate::{Error, Result};

/// `R_base` per `[a][t]`, evaluated at the middle of each week.
pub fn r_base_table(params: &crate::dynamics::DynamicsParams, weeks: usize) -> Vec<Vec<f64>> {
    (0..params.age_groups())
        .map(|a| (0..weeks).map(|t| params.base_reproduction(a, (7 * t + 3) as f64)).collect())
        .collect()
}

/// Posterior bands of `R_base` per `[a][t]`.
pub fn r_base_bands(samples: &[PosteriorSample], weeks: usize) -> Vec<Vec<Interval>> {
    let tables: Vec<Vec<Vec<f64>>> = samples.iter().map(|s| r_base_table(&s.params, weeks)).collect();
    cell_bands(&tables)
}

fn cell_bands(tables: &[Vec<Vec<f64>>]) -> Vec<Vec<Interval>> {
    let Some(first) = tables.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|a| {
            (0..first[a].len())
                .map(|t| Interval::from_samples(&tables.iter().map(|x| x[a][t]).collect::<Vec<_>>()))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveBands {
    /// Bands of the modelled cases `Ĉ_a(t)`.
    pub modelled: Vec<Vec<Interval>>,
    /// Bands of new observations including Student-t noise.
    pub observed: Vec<Vec<Interval>>,
}

/// Simulates every sample under the factual strategy and summarises `Ĉ` per cell.
pub fn posterior_predictive(model: &PosteriorModel, samples: &[PosteriorSample], seed: u64) -> Result<PredictiveBands> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("posterior predictive needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = StudentT::new(STUDENT_DF).expect("positive degrees of freedom");
    let mut modelled = Vec::with_capacity(samples.len());
    let mut observed = Vec::with_capacity(samples.len());
    for s in samples {
        let state = match model.simulator.run(&s.params, &model.infectability) {
            Ok(state) => state,
            Err(e) => {
                warn!("sample {}/{} skipped: {e}", s.chain, s.draw);
                continue;
            }
        };
        let noisy = state
            .weekly_cases
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| c + s.kappa * (c + 1.0).sqrt() * noise.sample(&mut rng))
                    .collect()
            })
            .collect();
        modelled.push(state.weekly_cases);
        observed.push(noisy);
    }
    if modelled.is_empty() {
        return Err(Error::Numerical("no sample could be simulated".into()));
    }
    Ok(PredictiveBands {
        modelled: cell_bands(&modelled),
        observed: cell_bands(&observed),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedInterval {
    pub name: String,
    #[serde(flatten)]
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub draws: usize,
    pub parameters: Vec<NamedInterval>,
    /// `R_base` bands per `[a][t]`.
    pub r_base: Vec<Vec<Interval>>,
    /// Largest split-R̂ over `log R0` and `κ`; NaN if undefined.
    #[serde(deserialize_with = "crate::stats::null_as_nan")]
    pub max_rhat: f64,
    /// Smallest per-chain effective sample size of the same quantities, summed over chains.
    #[serde(deserialize_with = "crate::stats::null_as_nan")]
    pub min_ess: f64,
    pub chains: Vec<ChainReport>,
}

pub fn summarize(run: &PosteriorRun, labels: &[String], weeks: usize) -> PosteriorSummary {
    let mut parameters = Vec::new();
    let mut scalars: Vec<(String, Box<dyn Fn(&PosteriorSample) -> f64>)> = Vec::new();
    for (a, label) in labels.iter().enumerate() {
        scalars.push((format!("R0[{label}]"), Box::new(move |s: &PosteriorSample| s.params.ages[a].r0)));
        scalars.push((format!("sigma[{label}]"), Box::new(move |s: &PosteriorSample| s.sigma[a])));
    }
    scalars.push(("kappa".into(), Box::new(|s: &PosteriorSample| s.kappa)));
    let chain_ids: Vec<usize> = run.chains.iter().filter(|c| c.kept).map(|c| c.chain).collect();
    let mut max_rhat = f64::NAN;
    let mut min_ess = f64::NAN;
    for (name, f) in &scalars {
        let values: Vec<f64> = run.samples.iter().map(|s| f(s)).collect();
        parameters.push(NamedInterval {
            name: name.clone(),
            interval: Interval::from_samples(&values),
        });
        if name.starts_with("sigma") {
            continue;
        }
        let per_chain: Vec<Vec<f64>> = chain_ids
            .iter()
            .map(|&c| run.samples.iter().filter(|s| s.chain == c).map(|s| f(s)).collect())
            .collect();
        let rhat = split_rhat(&per_chain);
        let ess: f64 = per_chain.iter().map(|c| effective_sample_size(c)).sum();
        max_rhat = if max_rhat.is_nan() { rhat } else { max_rhat.max(rhat) };
        min_ess = if min_ess.is_nan() { ess } else { min_ess.min(ess) };
    }
    PosteriorSummary {
        draws: run.samples.len(),
        parameters,
        r_base: r_base_bands(&run.samples, weeks),
        max_rhat,
        min_ess,
        chains: run.chains.clone(),
    }
}

/// One JSON object per line.
pub fn write_samples(path: &Path, samples: &[PosteriorSample]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_samples(path: &Path) -> Result<Vec<PosteriorSample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        samples.push(s);
    }
    if samples.is_empty() {
        return Err(Error::NoObservations { path: path.to_path_buf() });
    }
    Ok(samples)
}
