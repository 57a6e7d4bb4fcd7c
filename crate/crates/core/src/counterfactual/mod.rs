//! Counterfactual severe-case incidence under alternative allocation strategies.

mod profiles;
mod scenario;
mod summary;
mod target;

pub use profiles::{profile_risk, risk_ranking, vaccine_ratios, DiseaseProfile, FLAT_UPTAKE_CAPS, SPANISH_FLU_SHAPE};
pub use scenario::{
    thin_draws, Evaluator, Metric, ScenarioResult, ScenarioSpec, StrategyKind, WaningScenario, FAST_WANING_SCALE,
    MAX_DRAWS,
};
pub use summary::{israel_waves, wave_rows, weekly_rows, whole_window, write_rows, Wave, WaveRow, WeeklyRow, ALL_AGES};
pub use target::{target_function, total_severe};
