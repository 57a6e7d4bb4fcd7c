//! Wave-level summaries of scenario results.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::scenario::{Metric, ScenarioResult};
use crate::data::{AgeGroup, Calendar};
use crate::{Error, Result};

/// Label of rows aggregating all age groups.
pub const ALL_AGES: &str = "all";

/// A range of weeks identified by the dates of their first days (inclusive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wave {
    pub name: String,
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl Wave {
    pub fn new(name: &str, from: NaiveDate, to: NaiveDate) -> Self {
        Wave {
            name: name.into(),
            from,
            to,
        }
    }

    pub fn weeks(&self, calendar: &Calendar) -> Vec<usize> {
        calendar.weeks_between(self.from, self.to)
    }
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// Third and fourth Israeli waves and the whole 2021 window.
pub fn israel_waves() -> Vec<Wave> {
    vec![
        Wave::new("third", date(2020, 12, 20), date(2021, 4, 11)),
        Wave::new("fourth", date(2021, 6, 20), date(2021, 11, 7)),
        Wave::new("whole", date(2020, 12, 20), date(2021, 12, 25)),
    ]
}

/// One wave covering the full window of `calendar`.
pub fn whole_window(calendar: &Calendar) -> Wave {
    Wave::new("whole", calendar.start, calendar.week_start(calendar.weeks.saturating_sub(1)))
}

/// Cumulative incidence per 100k. Rows for all ages are relative to the total
/// population, per-age rows to the group's population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveRow {
    pub strategy: String,
    pub wave: String,
    pub age_label: String,
    pub metric: String,
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
}

pub fn wave_rows(result: &ScenarioResult, calendar: &Calendar, groups: &[AgeGroup], waves: &[Wave]) -> Vec<WaveRow> {
    let total: f64 = groups.iter().map(|g| g.population).sum();
    let mut rows = Vec::new();
    for wave in waves {
        let weeks = wave.weeks(calendar);
        if weeks.is_empty() {
            continue;
        }
        for metric in [Metric::Infections, Metric::Severe] {
            let targets = std::iter::once((None, ALL_AGES.to_string(), total))
                .chain(groups.iter().enumerate().map(|(a, g)| (Some(a), g.label.clone(), g.population)));
            for (group, age_label, population) in targets {
                let per = 1e5 / population;
                let totals: Vec<f64> = result.totals(metric, &weeks, group).iter().map(|x| x * per).collect();
                let i = crate::stats::Interval::from_samples(&totals);
                rows.push(WaveRow {
                    strategy: result.label(),
                    wave: wave.name.clone(),
                    age_label,
                    metric: metric.name().into(),
                    median: i.median,
                    lo95: i.lo95,
                    hi95: i.hi95,
                });
            }
        }
    }
    rows
}

/// Weekly bands per age group, counts not rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyRow {
    pub strategy: String,
    pub age_label: String,
    pub week: usize,
    pub date: NaiveDate,
    pub metric: String,
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
}

/// Rows use one-based weeks.
pub fn weekly_rows(result: &ScenarioResult, calendar: &Calendar, groups: &[AgeGroup]) -> Vec<WeeklyRow> {
    let mut rows = Vec::new();
    for metric in [Metric::Infections, Metric::Severe] {
        for (a, band) in result.weekly_bands(metric).iter().enumerate() {
            for (t, i) in band.iter().enumerate() {
                rows.push(WeeklyRow {
                    strategy: result.label(),
                    age_label: groups[a].label.clone(),
                    week: t + 1,
                    date: calendar.week_start(t),
                    metric: metric.name().into(),
                    median: i.median,
                    lo95: i.lo95,
                    hi95: i.hi95,
                });
            }
        }
    }
    rows
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let to_err = |e: csv::Error| Error::Malformed {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    for r in rows {
        w.serialize(r).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
