//! Acceptance criteria. Each test prints one `ACCEPTANCE <n> PASS|FAIL` line.
//!
//! Criterion 8 needs the real Israeli data and hours of sampling; it is ignored by
//! default and reads the dataset directory from `COUNTERFACT_ISRAEL_DATA`.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use counterfact::counterfactual::{
    israel_waves, target_function, whole_window, DiseaseProfile, Evaluator, Metric, ScenarioSpec, StrategyKind,
    WaningScenario, FLAT_UPTAKE_CAPS, MAX_DRAWS,
};
use counterfact::data::synthetic::{generate_synthetic, SyntheticBundle, SyntheticSpec};
use counterfact::data::{load_dataset, ObservedDataset, ISRAEL_POPULATION, REFERENCE_AGE_LABEL};
use counterfact::dynamics::{
    infectability_table, ContactMatrix, ModelConfig, Seeding, Simulator, CHANGE_POINTS,
};
use counterfact::inference::{
    posterior_predictive, r_base_bands, sample_posterior, sample_prior, Layout, ModelOptions, PosteriorModel,
    PosteriorRun, PosteriorSample, PriorSpec, SamplerConfig,
};
use counterfact::severity::{fit_factorization, EstimationOptions, SeverityFactorization, WaningCurve};
use counterfact::strategy::{
    generate_ranked, generate_ranked_with_caps, generate_uniform, AllocationStrategy, DoseBudget, DoseTimes,
    BOOSTER_CAP_RELAXATION, MIN_BOOSTER_GAP,
};
use counterfact::{DOSES, STATES};

const TARGET_INSTANCES: usize = 200;
const TARGET_REL_TOL: f64 = 1e-12;
const TARGET_BUDGET: Duration = Duration::from_secs(30);
const SPECTRUM_TOL: f64 = 1e-10;
const SPECTRUM_BUDGET: Duration = Duration::from_secs(1);
const F1_TOL: f64 = 1e-12;
const ROUND_TRIP_TOL: f64 = 1e-6;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(10);
const CONSERVATION_DRAWS: usize = 50;
const CONSERVATION_TOL: f64 = 1e-9;
const CONSERVATION_BUDGET: Duration = Duration::from_secs(10);
const RECOVERY_REL_TOL: f64 = 0.10;
const RECOVERY_MIN_SHARE: f64 = 0.80;
const RECOVERY_BUDGET: Duration = Duration::from_secs(600);
const BUDGET_TOL: f64 = 1e-9;
const CAP_TOL: f64 = 1e-12;
const GENERATOR_BUDGET: Duration = Duration::from_secs(30);
const REFERENCE_REL_TOL: f64 = 0.15;
const WANING_BUDGET: Duration = Duration::from_secs(120);
const PROFILE_TOL: f64 = 1e-6;

fn report(n: usize, name: &str, pass: bool, detail: String) {
    println!("ACCEPTANCE {n:>2} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

struct DeskFit {
    bundle: SyntheticBundle,
    model: PosteriorModel,
    run: PosteriorRun,
    elapsed: Duration,
}

/// Full sampling protocol on the desk preset; shared by criteria 6 and 9.
fn desk_fit() -> &'static DeskFit {
    static FIT: OnceLock<DeskFit> = OnceLock::new();
    FIT.get_or_init(|| {
        let spec = SyntheticSpec::desk();
        let bundle = generate_synthetic(&spec, 1).expect("desk preset");
        let options = ModelOptions {
            anchor_day: spec.params.anchor_day,
            ..ModelOptions::default()
        };
        let model = PosteriorModel::new(&bundle.data, spec.model.clone(), &spec.waning, PriorSpec::default(), options)
            .expect("model");
        let start = Instant::now();
        let run = sample_posterior(&model, &SamplerConfig { seed: 1, ..SamplerConfig::default() }).expect("sampling");
        DeskFit {
            bundle,
            model,
            run,
            elapsed: start.elapsed(),
        }
    })
}

fn israel_bundle() -> &'static SyntheticBundle {
    static BUNDLE: OnceLock<SyntheticBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| generate_synthetic(&SyntheticSpec::israel(), 7).expect("israel preset"))
}

/// Draws around the generating parameters. They stand in for a posterior where running
/// the sampler on nine groups would take hours.
fn israel_ensemble(draws: usize) -> Vec<PosteriorSample> {
    let truth = &israel_bundle().truth.spec.params;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    (0..draws)
        .map(|d| {
            let mut params = truth.clone();
            for age in &mut params.ages {
                age.r0 *= (0.02 * (rng.random::<f64>() - 0.5)).exp();
                for cp in &mut age.change_points {
                    cp.effect += 0.02 * (rng.random::<f64>() - 0.5);
                }
            }
            PosteriorSample {
                chain: 0,
                draw: d,
                params,
                sigma: vec![0.1; truth.age_groups()],
                kappa: 1.0,
                log_posterior: 0.0,
            }
        })
        .collect()
}

fn israel_factorization(data: &ObservedDataset) -> SeverityFactorization {
    fit_factorization(data, &WaningCurve::regular(), &EstimationOptions::default()).expect("factorisation")
}

// ---------------------------------------------------------------------------
// 1. Target function against brute-force enumeration
// ---------------------------------------------------------------------------

/// `h^v(w)` written out from the logistic waning shape.
fn oracle_h(curve: &WaningCurve, v: usize, w: usize) -> f64 {
    if v == 0 {
        return 1.0;
    }
    let norm = if curve.no_waning {
        1.0
    } else {
        let l = |x: f64| 1.0 / (1.0 + ((x - curve.shape.midpoint) / curve.shape.slope).exp());
        l(w as f64 / curve.scale) / l(0.0)
    };
    let ve0 = curve.full_efficacy[v - 1];
    (1.0 - ve0 * norm) / (1.0 - ve0)
}

fn brute_force(strategy: &AllocationStrategy, sev: &SeverityFactorization, pops: &[f64]) -> f64 {
    let m = strategy.weeks as u32;
    let mut total = 0.0;
    for (a, joint) in strategy.per_age.iter().enumerate() {
        for t1 in 0..=m {
            for t2 in 0..=m {
                for t3 in 0..=m {
                    let Some(&p) = joint.get(&DoseTimes([t1, t2, t3])) else {
                        continue;
                    };
                    for t in 0..m {
                        let doses = [t1, t2, t3];
                        let v = doses.iter().filter(|&&d| d <= t).count();
                        let risk = if v == 0 {
                            sev.g[a][0]
                        } else {
                            let w = (t - doses[v - 1]) as usize;
                            sev.g[a][v] * oracle_h(&sev.waning, v, w)
                        };
                        total += pops[a] * p * sev.f0[t as usize] * sev.f1[a][t as usize] * risk;
                    }
                }
            }
        }
    }
    total
}

fn random_instance(rng: &mut ChaCha8Rng) -> (AllocationStrategy, SeverityFactorization, Vec<f64>) {
    let m = rng.random_range(1..=4usize);
    let n = rng.random_range(1..=3usize);
    let per_age = (0..n)
        .map(|_| {
            let mut joint = BTreeMap::new();
            for _ in 0..rng.random_range(1..=6) {
                let mut t = [0u32; DOSES];
                for x in &mut t {
                    *x = rng.random_range(0..=m as u32);
                }
                t.sort_unstable();
                *joint.entry(DoseTimes(t)).or_insert(0.0) += rng.random::<f64>() + 0.01;
            }
            let total: f64 = joint.values().sum();
            joint.values_mut().for_each(|p| *p /= total);
            joint
        })
        .collect();
    let strategy = AllocationStrategy::new("random", m, per_age);
    let base = WaningCurve::regular();
    let mut waning = if rng.random_bool(0.2) {
        base.without_waning()
    } else {
        base.with_scale(rng.random_range(0.3..3.0)).unwrap()
    };
    waning.full_efficacy = [rng.random_range(0.3..0.8), rng.random_range(0.5..0.9), rng.random_range(0.6..0.97)];
    let f0 = (0..m).map(|_| rng.random_range(1e-5..1e-2)).collect();
    let g = (0..n).map(|_| std::array::from_fn(|_| rng.random_range(0.01..5.0))).collect();
    let f1 = (0..n).map(|_| (0..m).map(|_| rng.random_range(0.2..2.0)).collect()).collect();
    let sev = SeverityFactorization::new(f0, g, waning).with_f1(f1).unwrap();
    let pops = (0..n).map(|_| rng.random_range(1e3..1e7)).collect();
    (strategy, sev, pops)
}

#[test]
fn criterion_01_target_function_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..TARGET_INSTANCES {
        let (strategy, sev, pops) = random_instance(&mut rng);
        strategy.validate().unwrap();
        let fast: f64 = target_function(&strategy.cohorts(), &sev, &pops).unwrap().iter().flatten().sum();
        let oracle = brute_force(&strategy, &sev, &pops);
        worst = worst.max(((fast - oracle) / oracle).abs());
    }
    let elapsed = start.elapsed();
    report(
        1,
        "target function matches brute-force enumeration",
        worst < TARGET_REL_TOL && elapsed < TARGET_BUDGET,
        format!("{TARGET_INSTANCES} instances, max rel err {worst:.2e} (tol {TARGET_REL_TOL:.0e}), {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// 2. Contact matrix spectrum
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_contact_spectrum() {
    let start = Instant::now();
    let total: f64 = ISRAEL_POPULATION.iter().sum();
    let rho: Vec<f64> = ISRAEL_POPULATION.iter().map(|p| p / total).collect();
    let mut worst_eig: f64 = 0.0;
    let mut worst_vec: f64 = 0.0;
    for k in 0..=10 {
        let gamma = k as f64 / 10.0;
        let c = ContactMatrix::new(gamma, &ISRAEL_POPULATION).unwrap();
        let dense = c.dense();
        let n = dense.len();
        let m = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
        let lambda_max = m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst_eig = worst_eig.max((lambda_max - 1.0).abs());
        // Eigenvector of eigenvalue 1: Cρ = ρ, and for γ > 0 power iteration from a
        // generic positive start converges to the direction of ρ.
        let mut out = vec![0.0; n];
        c.apply(&rho, &mut out);
        let fixed = out.iter().zip(&rho).map(|(x, r)| (x - r).abs()).fold(0.0, f64::max);
        worst_vec = worst_vec.max(fixed);
        if gamma > 0.0 {
            let mut x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
            for _ in 0..2000 {
                c.apply(&x, &mut out);
                let s: f64 = out.iter().sum();
                x = out.iter().map(|v| v / s).collect();
            }
            let dev = x.iter().zip(&rho).map(|(x, r)| (x - r).abs()).fold(0.0, f64::max);
            worst_vec = worst_vec.max(dev);
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        "contact matrix has leading eigenvalue 1 with eigenvector ρ",
        worst_eig < SPECTRUM_TOL && worst_vec < SPECTRUM_TOL && elapsed < SPECTRUM_BUDGET,
        format!("|λmax-1| {worst_eig:.1e}, eigenvector dev {worst_vec:.1e} (tol {SPECTRUM_TOL:.0e}), {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// 3. Factorisation anchors
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_factorization_anchors() {
    let bundle = israel_bundle();
    let data = &bundle.data;
    let fact = israel_factorization(data);
    let reference = data.group_index(REFERENCE_AGE_LABEL).unwrap();
    let g_ref = fact.g[reference][0];
    let h0: Vec<f64> = (1..STATES).map(|v| fact.waning.h(v, 0.0)).collect();
    let draws = israel_ensemble(20);
    let eval = Evaluator::new(data, fact.clone(), ModelConfig::default(), &draws, MAX_DRAWS).unwrap();
    let result = eval.evaluate(&ScenarioSpec::new(StrategyKind::Factual)).unwrap();
    let f1_dev = result.f1.iter().flatten().flatten().map(|f| (f - 1.0).abs()).fold(0.0, f64::max);
    let pass = g_ref == 1.0 && h0.iter().all(|&h| h == 1.0) && f1_dev < F1_TOL;
    report(
        3,
        "g(0,60-69)=1, h(0)=1, f1=1 under the factual strategy",
        pass,
        format!("g_ref {g_ref}, h(0) {h0:?}, max |f1-1| {f1_dev:.1e} (tol {F1_TOL:.0e})"),
    );
}

// ---------------------------------------------------------------------------
// 4. Estimator round trip
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_estimator_round_trip() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for spec in [SyntheticSpec::desk(), SyntheticSpec::israel()] {
        let spec = SyntheticSpec {
            case_noise: None,
            ..spec
        };
        let bundle = generate_synthetic(&spec, 3).unwrap();
        let fit =
            fit_factorization(&bundle.data, &spec.waning, &EstimationOptions::default()).unwrap();
        let reference = bundle.data.group_index(REFERENCE_AGE_LABEL).unwrap();
        let scale = spec.g[reference][0];
        for (a, g) in spec.g.iter().enumerate() {
            for v in 0..STATES {
                worst = worst.max((fit.g[a][v] - g[v] / scale).abs() / (g[v] / scale));
            }
        }
        for (t, f0) in spec.f0.iter().enumerate() {
            worst = worst.max((fit.f0[t] - f0 * scale).abs() / (f0 * scale));
        }
    }
    let elapsed = start.elapsed();
    report(
        4,
        "noise-free estimator round trip recovers f0 and g",
        worst < ROUND_TRIP_TOL && elapsed < ROUND_TRIP_BUDGET,
        format!("max rel err {worst:.1e} (tol {ROUND_TRIP_TOL:.0e}), {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// 5. Simulator conservation
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_conservation() {
    let start = Instant::now();
    let bundle = israel_bundle();
    let data = &bundle.data;
    let pops = data.populations();
    let first: Vec<f64> = data.cases.iter().map(|c| c[0]).collect();
    let sim = Simulator::new(ModelConfig::default(), pops.clone(), data.weeks(), Seeding::from_first_week(&first)).unwrap();
    let inf = infectability_table(&data.cohorts, &WaningCurve::regular(), ModelConfig::default().protection);
    let layout = Layout {
        groups: pops.len(),
        change_points: CHANGE_POINTS,
        weeks: data.weeks(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut checked, mut rejected) = (0, 0);
    let mut worst: f64 = 0.0;
    while checked < CONSERVATION_DRAWS {
        let theta = sample_prior(&mut rng, &layout, &PriorSpec::default(), &pops);
        let (params, _, _) = layout.decode(&theta, 21.0, 21.0);
        // Prior draws with explosive growth are rejected by the simulator; they are
        // not conservation failures.
        let Ok(state) = sim.run(&params, &inf) else {
            rejected += 1;
            continue;
        };
        for a in 0..pops.len() {
            let mut exposures = 0.0;
            let mut influx = 0.0;
            for d in 0..7 * data.weeks() {
                exposures += state.exposure(a, d as i64);
                influx += state.influx[a][d];
                let lhs = exposures + state.susceptibles[a][d + 1];
                let rhs = pops[a] + influx;
                worst = worst.max((lhs - rhs).abs() / rhs);
            }
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    report(
        5,
        "exposures + susceptibles = population + influx",
        worst < CONSERVATION_TOL && elapsed < CONSERVATION_BUDGET,
        format!("{checked} draws ({rejected} numerically rejected), max rel err {worst:.1e} (tol {CONSERVATION_TOL:.0e}), {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// 6. Posterior recovery at desk scale
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_posterior_recovery() {
    let fit = desk_fit();
    let weeks = fit.bundle.data.weeks();
    let bands = r_base_bands(&fit.run.samples, weeks);
    let mut within = 0;
    let mut cells = 0;
    for (a, row) in bands.iter().enumerate() {
        for (t, band) in row.iter().enumerate() {
            let truth = fit.bundle.truth.r_base[a][t];
            cells += 1;
            if ((band.median - truth) / truth).abs() <= RECOVERY_REL_TOL {
                within += 1;
            }
        }
    }
    let share = within as f64 / cells as f64;
    report(
        6,
        "posterior median R_base within 10% of truth",
        share >= RECOVERY_MIN_SHARE && fit.elapsed < RECOVERY_BUDGET && fit.run.samples.len() == 1000,
        format!(
            "{within}/{cells} group-weeks ({:.0}%, need {:.0}%), {} draws, {:.1?}",
            100.0 * share,
            100.0 * RECOVERY_MIN_SHARE,
            fit.run.samples.len(),
            fit.elapsed
        ),
    );
}

/// Supporting check on the same posterior: predictive bands cover the observations.
#[test]
fn desk_posterior_predictive_calibration() {
    let fit = desk_fit();
    let bands = posterior_predictive(&fit.model, &fit.run.samples, 3).unwrap();
    let mut inside = 0;
    let mut total = 0;
    for (a, row) in bands.observed.iter().enumerate() {
        for (t, band) in row.iter().enumerate() {
            total += 1;
            inside += band.contains(fit.bundle.data.cases[a][t]) as usize;
        }
    }
    let share = inside as f64 / total as f64;
    println!("predictive coverage {inside}/{total}");
    assert!(share >= 0.9, "{share}");
}

// ---------------------------------------------------------------------------
// 7. Strategy generator constraints
// ---------------------------------------------------------------------------

fn booster_gap_ok(s: &AllocationStrategy) -> bool {
    s.per_age.iter().flatten().all(|(times, &p)| {
        p == 0.0 || times.week(2) >= s.weeks || times.week(2) >= times.week(1) + MIN_BOOSTER_GAP
    })
}

#[test]
fn criterion_07_strategy_constraints() {
    let start = Instant::now();
    // The real dataset is not redistributable; the Israel-format surrogate has the same
    // groups, window and campaign structure.
    let data = &israel_bundle().data;
    let groups = &data.groups;
    let n = groups.len();
    let factual_budget = DoseBudget::of(&data.factual, groups);
    let covid_caps = factual_budget.ranked_caps();
    let flat_caps = vec![FLAT_UPTAKE_CAPS; n];
    let risk: Vec<usize> = (0..n).rev().collect();
    let mut cases: Vec<(AllocationStrategy, Option<&Vec<[f64; DOSES]>>)> = vec![
        (generate_uniform(&data.factual, groups).unwrap(), None),
        (generate_ranked(&data.factual, &risk, groups, "ElderlyFirst").unwrap(), Some(&covid_caps)),
        (generate_ranked(&data.factual, &(0..n).collect::<Vec<_>>(), groups, "YoungFirst").unwrap(), Some(&covid_caps)),
    ];
    let flu_order = [1usize, 2, 8, 7, 3, 6, 0, 4, 5];
    cases.push((
        generate_ranked_with_caps(&data.factual, &flu_order, groups, &flat_caps, "RiskRanked/SpanishFlu").unwrap(),
        Some(&flat_caps),
    ));
    let reversed: Vec<usize> = flu_order.iter().rev().copied().collect();
    cases.push((
        generate_ranked_with_caps(&data.factual, &reversed, groups, &flat_caps, "RiskRankedReversed/SpanishFlu")
            .unwrap(),
        Some(&flat_caps),
    ));
    let mut budget_err: f64 = 0.0;
    let mut cap_excess: f64 = 0.0;
    let mut gap_ok = true;
    for (s, caps) in &cases {
        s.validate().unwrap();
        let b = DoseBudget::of(s, groups);
        for i in 0..DOSES {
            for (x, y) in b.per_week[i].iter().zip(&factual_budget.per_week[i]) {
                budget_err = budget_err.max((x - y).abs());
            }
        }
        if let Some(caps) = caps {
            for a in 0..n {
                for i in 0..DOSES {
                    cap_excess = cap_excess.max(b.uptake[a][i] - caps[a][i]);
                }
            }
        }
        gap_ok &= booster_gap_ok(s);
    }
    let relaxation_ok = covid_caps
        .iter()
        .zip(&factual_budget.uptake)
        .all(|(c, u)| c[2] == (u[2] + BOOSTER_CAP_RELAXATION).min(1.0));
    let elapsed = start.elapsed();
    report(
        7,
        "generated strategies conserve budgets, respect caps and booster gap",
        budget_err < BUDGET_TOL && cap_excess < CAP_TOL && gap_ok && relaxation_ok && elapsed < GENERATOR_BUDGET,
        format!(
            "{} strategies, budget err {budget_err:.1e} person-doses, cap excess {cap_excess:.1e}, gap ≥ {MIN_BOOSTER_GAP} {gap_ok}, {elapsed:.2?}",
            cases.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Published reference numbers on the real data
// ---------------------------------------------------------------------------

#[test]
#[ignore = "needs the real Israeli dataset (COUNTERFACT_ISRAEL_DATA) and hours of sampling"]
fn criterion_08_reference_numbers_on_real_data() {
    let dir = std::env::var("COUNTERFACT_ISRAEL_DATA").expect("COUNTERFACT_ISRAEL_DATA must point to the dataset");
    let data = load_dataset(std::path::Path::new(&dir)).unwrap();
    let waning = WaningCurve::regular();
    let model =
        PosteriorModel::new(&data, ModelConfig::default(), &waning, PriorSpec::default(), ModelOptions::default()).unwrap();
    let run = sample_posterior(&model, &SamplerConfig::default()).unwrap();
    let fact = fit_factorization(&data, &waning, &EstimationOptions::default()).unwrap();
    let eval = Evaluator::new(&data, fact, ModelConfig::default(), &run.samples, MAX_DRAWS).unwrap();
    let results = eval.evaluate_all(&ScenarioSpec::strategies()).unwrap();
    let waves = israel_waves();
    let per100k = |label: &str, wave: usize, metric: Metric| {
        let r = results.iter().find(|r| r.strategy == label).unwrap();
        let weeks = waves[wave].weeks(&data.calendar);
        r.interval(metric, &weeks, None).median * 1e5 / data.total_population()
    };
    let close = |x: f64, target: f64| ((x - target) / target).abs() <= REFERENCE_REL_TOL;
    let (ef3, fa3) = (per100k("ElderlyFirst", 0, Metric::Severe), per100k("Factual", 0, Metric::Severe));
    let (ef4, fa4) = (per100k("ElderlyFirst", 1, Metric::Severe), per100k("Factual", 1, Metric::Severe));
    let labels: Vec<&str> = results.iter().map(|r| r.strategy.as_str()).collect();
    let lowest = |wave: usize, metric: Metric| {
        labels
            .iter()
            .copied()
            .min_by(|a, b| per100k(a, wave, metric).total_cmp(&per100k(b, wave, metric)))
            .unwrap()
    };
    let mut by_infections_w4: Vec<&str> = labels.clone();
    by_infections_w4.sort_by(|a, b| per100k(b, 1, Metric::Infections).total_cmp(&per100k(a, 1, Metric::Infections)));
    let ordering = lowest(0, Metric::Severe) == "ElderlyFirst"
        && lowest(1, Metric::Severe) == "ElderlyFirst"
        && lowest(0, Metric::Infections) == "YoungFirst"
        && by_infections_w4[..2].contains(&"YoungFirst");
    report(
        8,
        "ElderlyFirst vs Factual severe cases per 100k and strategy orderings",
        close(ef3, 177.0) && close(fa3, 184.0) && close(ef4, 84.0) && close(fa4, 126.0) && ordering,
        format!("third {ef3:.0} vs {fa3:.0} (177 vs 184), fourth {ef4:.0} vs {fa4:.0} (84 vs 126), ordering {ordering}"),
    );
}

// ---------------------------------------------------------------------------
// 9. Waning monotonicity
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_waning_monotonicity() {
    let fit = desk_fit();
    let start = Instant::now();
    let data = &fit.bundle.data;
    let fact = fit_factorization(data, &fit.bundle.truth.spec.waning, &EstimationOptions::default())
        .unwrap();
    let eval = Evaluator::new(data, fact, fit.bundle.truth.spec.model.clone(), &fit.run.samples, MAX_DRAWS).unwrap();
    let weeks = whole_window(&data.calendar).weeks(&data.calendar);
    let mut violations = Vec::new();
    for strategy in StrategyKind::main_set() {
        let specs: Vec<ScenarioSpec> = [WaningScenario::NoWaning, WaningScenario::Regular, WaningScenario::Fast]
            .iter()
            .map(|&w| ScenarioSpec::new(strategy.clone()).with_waning(w))
            .collect();
        let results = eval.evaluate_all(&specs).unwrap();
        for metric in [Metric::Infections, Metric::Severe] {
            let medians: Vec<f64> = results.iter().map(|r| r.interval(metric, &weeks, None).median).collect();
            if !(medians[0] <= medians[1] && medians[1] <= medians[2]) {
                violations.push(format!("{} {}: {medians:?}", strategy.name(), metric.name()));
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        9,
        "noWaning ≤ regular ≤ fast for infections and severe cases",
        violations.is_empty() && elapsed < WANING_BUDGET,
        format!("6 strategies × 2 metrics, violations {violations:?}, {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// 10. Disease-profile normalisation
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_profile_normalization() {
    let data = &israel_bundle().data;
    let fact = israel_factorization(data);
    let draws = israel_ensemble(40);
    let eval = Evaluator::new(data, fact, ModelConfig::default(), &draws, MAX_DRAWS).unwrap();
    let weeks: Vec<usize> = (0..data.weeks()).collect();
    let uniform_total = |p: DiseaseProfile| {
        let r = eval.evaluate(&ScenarioSpec::new(StrategyKind::Uniform).with_profile(p)).unwrap();
        r.interval(Metric::Severe, &weeks, None).median
    };
    let covid = uniform_total(DiseaseProfile::Covid);
    let flat = uniform_total(DiseaseProfile::FlatRisk);
    let flu = uniform_total(DiseaseProfile::SpanishFlu);
    let dev = ((flat - covid) / covid).abs().max(((flu - covid) / covid).abs());
    let flat_uniform = eval.evaluate(&ScenarioSpec::new(StrategyKind::Uniform).with_profile(DiseaseProfile::FlatRisk)).unwrap();
    let flat_ranked =
        eval.evaluate(&ScenarioSpec::new(StrategyKind::RiskRanked).with_profile(DiseaseProfile::FlatRisk)).unwrap();
    let identical = flat_uniform.severe == flat_ranked.severe && flat_uniform.infections == flat_ranked.infections;
    report(
        10,
        "profiles match COVID under Uniform; FlatRisk RiskRanked ≡ Uniform",
        dev < PROFILE_TOL && identical,
        format!("COVID {covid:.3}, FlatRisk {flat:.3}, SpanishFlu {flu:.3}, rel dev {dev:.1e} (tol {PROFILE_TOL:.0e}), bitwise identical {identical}"),
    );
}
