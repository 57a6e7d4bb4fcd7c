//! Pipeline steps. Every figure is written next to the CSV table it is drawn from.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use counterfact::counterfactual::{
    israel_waves, wave_rows, weekly_rows, whole_window, write_rows, DiseaseProfile, Evaluator, Metric,
    ScenarioResult, ScenarioSpec, StrategyKind, Wave, WaveRow, ALL_AGES,
};
use counterfact::data::synthetic::{generate_synthetic, load_truth, save_bundle, SyntheticSpec, TRUTH_FILE};
use counterfact::data::{load_dataset, ObservedDataset, ISRAEL_AGE_LABELS};
use counterfact::dynamics::ModelConfig;
use counterfact::inference::{
    posterior_predictive, read_samples, sample_posterior, summarize, write_samples, ModelOptions, PosteriorModel,
    PosteriorSummary, PriorSpec, SamplerConfig,
};
use counterfact::severity::{fit_factorization, EstimationOptions, SeverityFactorization, WaningCurve};
use counterfact::stats::Interval;
use counterfact::strategy::write_strategy;

use crate::config::check_mixing;
use crate::error::{CliError, CliResult};
use crate::plot::{band_chart, bar_chart, Bar, BarGroup, BandPanel};

pub const FIT_MANIFEST: &str = "fit.json";
pub const POSTERIOR_FILE: &str = "posterior.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RECOVERY_FILE: &str = "recovery.json";
pub const REPORT_FILE: &str = "report.md";
/// Relative tolerance for counting a week as recovered in synthetic fits.
pub const RECOVERY_REL_TOL: f64 = 0.10;

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(counterfact::Error::from)?;
    write_text(path, &(text + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text).map_err(counterfact::Error::from)?)
}

fn labels(data: &ObservedDataset) -> Vec<String> {
    data.groups.iter().map(|g| g.label.clone()).collect()
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub start: String,
    pub weeks: usize,
    pub groups: Vec<String>,
    pub populations: Vec<f64>,
    pub cases: Vec<f64>,
    /// Administered doses per group, `[a][dose]`.
    pub doses: Vec<[f64; 3]>,
    /// Risk factors `g(v, a)` of which some were imputed.
    pub imputed: Vec<String>,
}

/// Validates a dataset and writes the reconstructed factual strategy and severity factors.
pub fn ingest(data_dir: &Path, out: &Path) -> CliResult<IngestSummary> {
    let data = load_dataset(data_dir)?;
    create_dir(out)?;
    let labels = labels(&data);
    write_strategy(&out.join("factual_strategy.csv"), &data.factual, &labels, data.calendar.start)?;
    let severity = fit_factorization(&data, &WaningCurve::regular(), &EstimationOptions::default())?;
    write_json(&out.join("severity.json"), &severity)?;
    let mut imputed = Vec::new();
    for (label, flags) in labels.iter().zip(&severity.identified) {
        for (v, ok) in flags.iter().enumerate() {
            if !ok {
                imputed.push(format!("g({v},{label})"));
            }
        }
    }
    let summary = IngestSummary {
        start: data.calendar.start.to_string(),
        weeks: data.weeks(),
        groups: labels,
        populations: data.populations(),
        cases: data.cases.iter().map(|c| c.iter().sum()).collect(),
        doses: data.doses.iter().map(|d| std::array::from_fn(|i| d[i].iter().sum())).collect(),
        imputed,
    };
    write_json(&out.join("ingest.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Two groups over 30 weeks.
    Desk,
    /// Nine Israel-format groups over 53 weeks.
    Israel,
}

pub fn synth(preset: Preset, seed: u64, out: &Path) -> CliResult<()> {
    let spec = match preset {
        Preset::Desk => SyntheticSpec::desk(),
        Preset::Israel => SyntheticSpec::israel(),
    };
    let bundle = generate_synthetic(&spec, seed)?;
    create_dir(out)?;
    save_bundle(out, &bundle)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Provenance of a fit; later steps read the data location and mixing factor from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub data: PathBuf,
    pub mixing: f64,
    pub anchor_day: f64,
    pub sampler: SamplerConfig,
    pub groups: Vec<String>,
    pub weeks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub within: usize,
    pub cells: usize,
    pub rel_tol: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PredictiveRow {
    age_label: String,
    week: usize,
    date: String,
    observed: f64,
    median: f64,
    lo95: f64,
    hi95: f64,
    predictive_lo95: f64,
    predictive_hi95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct RBaseRow {
    age_label: String,
    week: usize,
    date: String,
    median: f64,
    lo95: f64,
    hi95: f64,
    truth: Option<f64>,
}

pub struct FitRequest {
    pub data: PathBuf,
    pub out: PathBuf,
    pub mixing: f64,
    pub anchor_day: Option<f64>,
    pub sampler: SamplerConfig,
}

pub struct FitOutcome {
    pub summary: PosteriorSummary,
    pub recovery: Option<Recovery>,
}

pub fn fit(req: &FitRequest) -> CliResult<FitOutcome> {
    let gamma = check_mixing(req.mixing)?;
    let data = load_dataset(&req.data)?;
    let truth = if req.data.join(TRUTH_FILE).exists() {
        Some(load_truth(&req.data)?)
    } else {
        None
    };
    let default_options = ModelOptions::default();
    // A synthetic bundle carries the change-point anchor it was generated with.
    let anchor_day = req
        .anchor_day
        .or(truth.as_ref().map(|t| t.spec.params.anchor_day))
        .unwrap_or(default_options.anchor_day);
    let options = ModelOptions {
        anchor_day,
        ..default_options
    };
    let model = PosteriorModel::new(
        &data,
        ModelConfig::default().with_gamma(gamma)?,
        &WaningCurve::regular(),
        PriorSpec::default(),
        options,
    )?;
    info!(
        "sampling {} chains ({} init, {} tune, {} draws sweeps)",
        req.sampler.chains, req.sampler.init_sweeps, req.sampler.tune_sweeps, req.sampler.draws
    );
    let run = sample_posterior(&model, &req.sampler)?;
    create_dir(&req.out)?;
    write_samples(&req.out.join(POSTERIOR_FILE), &run.samples)?;
    let labels = labels(&data);
    let summary = summarize(&run, &labels, data.weeks());
    write_json(&req.out.join(SUMMARY_FILE), &summary)?;

    let bands = posterior_predictive(&model, &run.samples, req.sampler.seed)?;
    let mut rows = Vec::new();
    let mut panels = Vec::new();
    for (a, label) in labels.iter().enumerate() {
        for t in 0..data.weeks() {
            let (m, o) = (bands.modelled[a][t], bands.observed[a][t]);
            rows.push(PredictiveRow {
                age_label: label.clone(),
                week: t + 1,
                date: data.calendar.week_start(t).to_string(),
                observed: data.cases[a][t],
                median: m.median,
                lo95: m.lo95,
                hi95: m.hi95,
                predictive_lo95: o.lo95,
                predictive_hi95: o.hi95,
            });
        }
        panels.push(BandPanel {
            title: label.clone(),
            lo: bands.observed[a].iter().map(|i| i.lo95).collect(),
            median: bands.modelled[a].iter().map(|i| i.median).collect(),
            hi: bands.observed[a].iter().map(|i| i.hi95).collect(),
            observed: Some(data.cases[a].clone()),
        });
    }
    write_rows(&req.out.join("predictive.csv"), &rows)?;
    write_text(
        &req.out.join("predictive.svg"),
        &band_chart("Posterior predictive weekly cases", "cases", &panels),
    )?;

    let truth_r = truth.as_ref().map(|t| &t.r_base);
    let mut r_rows = Vec::new();
    let mut r_panels = Vec::new();
    let mut within = 0;
    let mut cells = 0;
    for (a, label) in labels.iter().enumerate() {
        for (t, i) in summary.r_base[a].iter().enumerate() {
            let truth = truth_r.map(|r| r[a][t]);
            if let Some(x) = truth {
                cells += 1;
                if ((i.median - x) / x).abs() <= RECOVERY_REL_TOL {
                    within += 1;
                }
            }
            r_rows.push(RBaseRow {
                age_label: label.clone(),
                week: t + 1,
                date: data.calendar.week_start(t).to_string(),
                median: i.median,
                lo95: i.lo95,
                hi95: i.hi95,
                truth,
            });
        }
        r_panels.push(BandPanel {
            title: label.clone(),
            lo: summary.r_base[a].iter().map(|i| i.lo95).collect(),
            median: summary.r_base[a].iter().map(|i| i.median).collect(),
            hi: summary.r_base[a].iter().map(|i| i.hi95).collect(),
            observed: truth_r.map(|r| r[a].clone()),
        });
    }
    write_rows(&req.out.join("r_base.csv"), &r_rows)?;
    write_text(&req.out.join("r_base.svg"), &band_chart("Base reproduction number", "R_base", &r_panels))?;

    let recovery = truth.is_some().then(|| Recovery {
        within,
        cells,
        rel_tol: RECOVERY_REL_TOL,
        share: within as f64 / cells.max(1) as f64,
    });
    if let Some(r) = &recovery {
        write_json(&req.out.join(RECOVERY_FILE), r)?;
    }
    let manifest = FitManifest {
        data: req.data.clone(),
        mixing: gamma,
        anchor_day,
        sampler: req.sampler.clone(),
        groups: labels,
        weeks: data.weeks(),
    };
    write_json(&req.out.join(FIT_MANIFEST), &manifest)?;
    Ok(FitOutcome { summary, recovery })
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Factual, Uniform, ElderlyFirst, YoungFirst, RiskRanked, RiskRankedReversed.
    Strategies,
    /// Extra doses for one age group at a time.
    Uptake,
    /// COVID-19, flat and Spanish-flu risk profiles.
    Profiles,
    /// No, regular and fast waning.
    Waning,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Strategies => "strategies",
            Family::Uptake => "uptake",
            Family::Profiles => "profiles",
            Family::Waning => "waning",
        }
    }

    pub fn parse(name: &str) -> CliResult<Self> {
        <Family as clap::ValueEnum>::from_str(name, true)
            .map_err(|_| CliError::Config(format!("unknown scenario {name:?}")))
    }
}

/// Averted cases when one group receives extra doses, relative to the factual strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub age_label: String,
    pub doses: f64,
    pub metric: String,
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
}

/// Machine-readable result of one scenario family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub family: Family,
    pub mixing: f64,
    pub draws: usize,
    pub waves: Vec<Wave>,
    pub rows: Vec<WaveRow>,
    pub impact: Vec<ImpactRow>,
}

pub struct EvaluateRequest {
    pub out: PathBuf,
    pub data: Option<PathBuf>,
    pub families: Vec<Family>,
    pub doses: f64,
    pub mixing: Option<f64>,
    pub max_draws: usize,
    pub waves: Vec<Wave>,
}

pub fn record_path(out: &Path, family: Family) -> PathBuf {
    out.join(format!("scenario_{}.json", family.name()))
}

fn load_manifest(out: &Path) -> CliResult<FitManifest> {
    let path = out.join(FIT_MANIFEST);
    if !path.exists() {
        return Err(CliError::Missing(format!(
            "no fit in {}; run `counterfact fit --out {}` first",
            out.display(),
            out.display()
        )));
    }
    read_json(&path)
}

/// Reporting windows: configured ones, else the Israeli waves overlapping the data,
/// else the whole window.
fn resolve_waves(configured: &[Wave], data: &ObservedDataset) -> Vec<Wave> {
    if !configured.is_empty() {
        return configured.to_vec();
    }
    let overlapping: Vec<Wave> = israel_waves()
        .into_iter()
        .filter(|w| !w.weeks(&data.calendar).is_empty())
        .collect();
    if overlapping.is_empty() {
        vec![whole_window(&data.calendar)]
    } else {
        overlapping
    }
}

fn specs(family: Family, data: &ObservedDataset, doses: f64) -> Vec<ScenarioSpec> {
    match family {
        Family::Strategies => ScenarioSpec::strategies(),
        Family::Uptake => ScenarioSpec::uptake(data.age_groups(), doses),
        Family::Profiles => {
            let israel = data.groups.iter().map(|g| g.label.as_str()).eq(ISRAEL_AGE_LABELS);
            if !israel {
                warn!("Spanish-flu profile needs the Israeli age groups; skipped");
            }
            ScenarioSpec::profiles()
                .into_iter()
                .filter(|s| israel || s.profile != DiseaseProfile::SpanishFlu)
                .collect()
        }
        Family::Waning => ScenarioSpec::waning(),
    }
}

fn impact_rows(specs: &[ScenarioSpec], results: &[ScenarioResult], data: &ObservedDataset) -> Vec<ImpactRow> {
    let Some(factual) = specs.iter().position(|s| s.strategy == StrategyKind::Factual).map(|i| &results[i]) else {
        return Vec::new();
    };
    let weeks: Vec<usize> = (0..data.weeks()).collect();
    let mut rows = Vec::new();
    for (spec, boosted) in specs.iter().zip(results) {
        let StrategyKind::UptakeBoost { group, doses } = spec.strategy else {
            continue;
        };
        for metric in [Metric::Infections, Metric::Severe] {
            // Draws are shared between scenarios, so differences are paired.
            let averted: Vec<f64> = factual
                .totals(metric, &weeks, None)
                .iter()
                .zip(boosted.totals(metric, &weeks, None))
                .map(|(f, b)| f - b)
                .collect();
            let i = Interval::from_samples(&averted);
            rows.push(ImpactRow {
                age_label: data.groups[group].label.clone(),
                doses,
                metric: metric.name().into(),
                median: i.median,
                lo95: i.lo95,
                hi95: i.hi95,
            });
        }
    }
    rows
}

fn wave_chart(record: &EvaluationRecord, metric: &str) -> String {
    let groups = record
        .waves
        .iter()
        .map(|w| BarGroup {
            label: w.name.clone(),
            bars: record
                .rows
                .iter()
                .filter(|r| r.wave == w.name && r.metric == metric && r.age_label == ALL_AGES)
                .map(|r| Bar {
                    series: r.strategy.clone(),
                    median: r.median,
                    lo: r.lo95,
                    hi: r.hi95,
                })
                .collect(),
        })
        .filter(|g| !g.bars.is_empty())
        .collect::<Vec<_>>();
    bar_chart(
        &format!("Cumulative {metric} per 100k ({} scenarios)", record.family.name()),
        "per 100k",
        &groups,
    )
}

fn impact_chart(rows: &[ImpactRow], metric: &str) -> String {
    let groups: Vec<BarGroup> = rows
        .iter()
        .filter(|r| r.metric == metric)
        .map(|r| BarGroup {
            label: r.age_label.clone(),
            bars: vec![Bar {
                series: format!("averted {metric}"),
                median: r.median,
                lo: r.lo95,
                hi: r.hi95,
            }],
        })
        .collect();
    let doses = rows.first().map_or(0.0, |r| r.doses);
    bar_chart(
        &format!("Averted {metric} from {doses:.0} extra doses per age group"),
        "averted cases",
        &groups,
    )
}

pub fn evaluate(req: &EvaluateRequest) -> CliResult<Vec<EvaluationRecord>> {
    if req.families.is_empty() {
        return Err(CliError::Config("no scenario selected".into()));
    }
    let manifest = load_manifest(&req.out)?;
    let mixing = check_mixing(req.mixing.unwrap_or(manifest.mixing))?;
    if mixing != manifest.mixing {
        return Err(CliError::Config(format!(
            "posterior in {} was fitted with mixing {}; fit again with --mixing {mixing} into another directory",
            req.out.display(),
            manifest.mixing
        )));
    }
    let data_dir = req.data.clone().unwrap_or_else(|| manifest.data.clone());
    let data = load_dataset(&data_dir)?;
    if labels(&data) != manifest.groups || data.weeks() != manifest.weeks {
        return Err(CliError::Config(format!(
            "{} does not match the fitted dataset",
            data_dir.display()
        )));
    }
    let posterior = req.out.join(POSTERIOR_FILE);
    if !posterior.exists() {
        return Err(CliError::Missing(format!("{} not found; run `counterfact fit` first", posterior.display())));
    }
    let samples = read_samples(&posterior)?;
    let severity: SeverityFactorization =
        fit_factorization(&data, &WaningCurve::regular(), &EstimationOptions::default())?;
    let evaluator = Evaluator::new(&data, severity, ModelConfig::default().with_gamma(mixing)?, &samples, req.max_draws)?;
    let waves = resolve_waves(&req.waves, &data);

    let mut records = Vec::new();
    for &family in &req.families {
        info!("evaluating {} scenarios", family.name());
        let specs = specs(family, &data, req.doses);
        let results = evaluator.evaluate_all(&specs)?;
        let flagged: usize = results.iter().map(|r| r.flagged_cells).sum();
        if flagged > 0 {
            warn!("{flagged} cells with vanishing factual infection probability were held at f1 = 1");
        }
        let rows: Vec<WaveRow> = results
            .iter()
            .flat_map(|r| wave_rows(r, &data.calendar, &data.groups, &waves))
            .collect();
        let weekly: Vec<_> = results
            .iter()
            .flat_map(|r| weekly_rows(r, &data.calendar, &data.groups))
            .collect();
        let impact = if family == Family::Uptake {
            impact_rows(&specs, &results, &data)
        } else {
            Vec::new()
        };
        let name = family.name();
        write_rows(&req.out.join(format!("scenario_{name}.csv")), &rows)?;
        write_rows(&req.out.join(format!("scenario_{name}_weekly.csv")), &weekly)?;
        let record = EvaluationRecord {
            family,
            mixing,
            draws: evaluator.draws.len(),
            waves: waves.clone(),
            rows,
            impact,
        };
        for metric in [Metric::Infections, Metric::Severe] {
            let metric = metric.name();
            write_text(&req.out.join(format!("scenario_{name}_{metric}.svg")), &wave_chart(&record, metric))?;
        }
        if family == Family::Uptake {
            write_rows(&req.out.join("scenario_uptake_impact.csv"), &record.impact)?;
            write_text(&req.out.join("scenario_uptake_impact.svg"), &impact_chart(&record.impact, "severe"))?;
        }
        write_json(&record_path(&req.out, family), &record)?;
        records.push(record);
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

const ALL_FAMILIES: [Family; 4] = [Family::Strategies, Family::Uptake, Family::Profiles, Family::Waning];

fn fmt(x: f64) -> String {
    if x.abs() >= 100.0 {
        format!("{x:.0}")
    } else if x.abs() >= 1.0 {
        format!("{x:.2}")
    } else {
        format!("{x:.3}")
    }
}

fn interval_cell(median: f64, lo: f64, hi: f64) -> String {
    format!("{} ({} to {})", fmt(median), fmt(lo), fmt(hi))
}

/// Collates fit provenance, diagnostics and every evaluated scenario into `report.md`.
pub fn report(out: &Path) -> CliResult<PathBuf> {
    let manifest = load_manifest(out)?;
    let records: Vec<EvaluationRecord> = ALL_FAMILIES
        .iter()
        .map(|&f| record_path(out, f))
        .filter(|p| p.exists())
        .map(|p| read_json(&p))
        .collect::<CliResult<_>>()?;
    if records.is_empty() {
        return Err(CliError::Missing(format!(
            "no scenario results in {}; run `counterfact evaluate --out {}` first",
            out.display(),
            out.display()
        )));
    }
    let summary: PosteriorSummary = read_json(&out.join(SUMMARY_FILE))?;
    let mut md = String::new();
    md.push_str("# Counterfactual vaccine allocation report\n\n## Configuration\n\n");
    let s = &manifest.sampler;
    md.push_str(&format!(
        "| setting | value |\n|---|---|\n| data | `{}` |\n| age groups | {} |\n| weeks | {} |\n| mixing factor | {} |\n| change-point anchor (day) | {} |\n| seed | {} |\n| chains (kept) | {} ({}) |\n| sweeps init / tune / draws | {} / {} / {} |\n\n",
        manifest.data.display(),
        manifest.groups.join(", "),
        manifest.weeks,
        manifest.mixing,
        manifest.anchor_day,
        s.seed,
        s.chains,
        s.keep,
        s.init_sweeps,
        s.tune_sweeps,
        s.draws
    ));

    md.push_str("## Posterior\n\n");
    md.push_str(&format!(
        "{} draws; largest split R-hat {}; smallest effective sample size {}.\n\n",
        summary.draws,
        fmt(summary.max_rhat),
        fmt(summary.min_ess)
    ));
    md.push_str("| parameter | median (95% interval) |\n|---|---|\n");
    for p in &summary.parameters {
        md.push_str(&format!(
            "| {} | {} |\n",
            p.name,
            interval_cell(p.interval.median, p.interval.lo95, p.interval.hi95)
        ));
    }
    md.push_str("\n| chain | kept | log posterior after init | acceptance |\n|---|---|---|---|\n");
    for c in &summary.chains {
        md.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            c.chain,
            if c.kept { "yes" } else { "no" },
            fmt(c.init_log_posterior),
            if c.kept { fmt(c.acceptance_rate) } else { "-".into() }
        ));
    }
    md.push_str("\n![posterior predictive](predictive.svg)\n\n![base reproduction number](r_base.svg)\n\n");
    let recovery = out.join(RECOVERY_FILE);
    if recovery.exists() {
        let r: Recovery = read_json(&recovery)?;
        md.push_str(&format!(
            "Synthetic recovery: posterior median of R_base within {:.0}% of the truth in {} of {} age-weeks ({:.1}%).\n\n",
            100.0 * r.rel_tol,
            r.within,
            r.cells,
            100.0 * r.share
        ));
    }

    for record in &records {
        let name = record.family.name();
        md.push_str(&format!(
            "## Scenarios: {name}\n\nMixing factor {}, {} posterior draws. Cumulative cases per 100k, all ages.\n\n",
            record.mixing, record.draws
        ));
        for metric in ["severe", "infections"] {
            md.push_str(&format!("### {metric}\n\n| scenario |"));
            for w in &record.waves {
                md.push_str(&format!(" {} |", w.name));
            }
            md.push_str("\n|---|");
            md.push_str(&"---|".repeat(record.waves.len()));
            md.push('\n');
            let mut strategies: Vec<&str> = Vec::new();
            for r in &record.rows {
                if !strategies.contains(&r.strategy.as_str()) {
                    strategies.push(&r.strategy);
                }
            }
            for strategy in strategies {
                md.push_str(&format!("| {strategy} |"));
                for w in &record.waves {
                    let cell = record
                        .rows
                        .iter()
                        .find(|r| {
                            r.strategy == strategy && r.wave == w.name && r.metric == metric && r.age_label == ALL_AGES
                        })
                        .map_or("-".to_string(), |r| interval_cell(r.median, r.lo95, r.hi95));
                    md.push_str(&format!(" {cell} |"));
                }
                md.push('\n');
            }
            md.push_str(&format!("\n![{metric}](scenario_{name}_{metric}.svg)\n\n"));
        }
        if !record.impact.is_empty() {
            md.push_str("### Averted cases over the whole window\n\n| age group | averted severe | averted infections |\n|---|---|---|\n");
            for severe in record.impact.iter().filter(|r| r.metric == "severe") {
                let infections = record
                    .impact
                    .iter()
                    .find(|r| r.metric == "infections" && r.age_label == severe.age_label)
                    .map_or("-".to_string(), |r| interval_cell(r.median, r.lo95, r.hi95));
                md.push_str(&format!(
                    "| {} | {} | {} |\n",
                    severe.age_label,
                    interval_cell(severe.median, severe.lo95, severe.hi95),
                    infections
                ));
            }
            md.push_str("\n![averted severe cases](scenario_uptake_impact.svg)\n\n");
        }
    }
    let path = out.join(REPORT_FILE);
    write_text(&path, &md)?;
    Ok(path)
}
