//! CSV bundle: `population.csv`, `cases.csv`, `severe.csv`, `vaccinations.csv`.
//!
//! Weeks are identified by the ISO date of their first day. The window starts at the
//! earliest week in `cases.csv`; weeks must be seven days apart. Missing severe or
//! vaccination rows mean zero.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{AgeGroup, Calendar, ObservedDataset, SevereStratum};
use crate::{Error, Result, DOSES, STATES};

pub const POPULATION_FILE: &str = "population.csv";
pub const CASES_FILE: &str = "cases.csv";
pub const SEVERE_FILE: &str = "severe.csv";
pub const VACCINATIONS_FILE: &str = "vaccinations.csv";

#[derive(Debug, Serialize, Deserialize)]
struct PopulationRow {
    age_label: String,
    population: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CasesRow {
    week: NaiveDate,
    age_label: String,
    cases: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SevereRow {
    week: NaiveDate,
    age_label: String,
    doses: usize,
    severe_count: f64,
    stratum_population: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct VaccinationRow {
    week: NaiveDate,
    age_label: String,
    dose_number: usize,
    count: f64,
}

fn malformed(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads all rows of `path`, paired with their line numbers.
fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<(u64, T)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.deserialize::<T>() {
        match record {
            Ok(row) => rows.push(row),
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(malformed(path, line, e.to_string()));
            }
        }
    }
    // header occupies line 1
    Ok(rows.into_iter().enumerate().map(|(i, r)| (i as u64 + 2, r)).collect())
}

struct Index<'a> {
    path: &'a Path,
    groups: &'a BTreeMap<String, usize>,
    calendar: Calendar,
}

impl Index<'_> {
    fn locate(&self, line: u64, week: NaiveDate, label: &str) -> Result<(usize, usize)> {
        let a = *self
            .groups
            .get(label)
            .ok_or_else(|| malformed(self.path, line, format!("unknown age group {label}")))?;
        let offset = self.calendar.day_offset(week);
        if offset % 7 != 0 {
            return Err(malformed(self.path, line, format!("{week} is not a week start of the window")));
        }
        let t = self
            .calendar
            .week_of(week)
            .ok_or_else(|| malformed(self.path, line, format!("week {week} outside the window")))?;
        Ok((a, t))
    }
}

pub fn load_dataset(dir: &Path) -> Result<ObservedDataset> {
    let path = dir.join(POPULATION_FILE);
    let mut groups = Vec::new();
    let mut by_label = BTreeMap::new();
    for (line, row) in read_rows::<PopulationRow>(&path)? {
        if !(row.population.is_finite() && row.population > 0.0) {
            return Err(malformed(&path, line, "population must be positive"));
        }
        if by_label.insert(row.age_label.clone(), groups.len()).is_some() {
            return Err(malformed(&path, line, format!("duplicate age group {}", row.age_label)));
        }
        groups.push(AgeGroup::new(row.age_label, row.population));
    }
    if groups.is_empty() {
        return Err(Error::NoObservations { path });
    }
    let n = groups.len();

    let path = dir.join(CASES_FILE);
    let case_rows = read_rows::<CasesRow>(&path)?;
    if case_rows.is_empty() {
        return Err(Error::NoObservations { path });
    }
    let weeks: BTreeSet<NaiveDate> = case_rows.iter().map(|(_, r)| r.week).collect();
    let start = *weeks.first().expect("non-empty");
    let end = *weeks.last().expect("non-empty");
    let m = ((end - start).num_days() / 7) as usize + 1;
    let calendar = Calendar::new(start, m);
    let index = Index {
        path: &path,
        groups: &by_label,
        calendar,
    };
    let mut cases = vec![vec![f64::NAN; m]; n];
    for (line, row) in &case_rows {
        let (a, t) = index.locate(*line, row.week, &row.age_label)?;
        if !(row.cases.is_finite() && row.cases >= 0.0) {
            return Err(malformed(&path, *line, "cases must be non-negative"));
        }
        if !cases[a][t].is_nan() {
            return Err(malformed(&path, *line, "duplicate row"));
        }
        cases[a][t] = row.cases;
    }
    for (a, row) in cases.iter().enumerate() {
        if let Some(t) = row.iter().position(|c| c.is_nan()) {
            return Err(Error::InvalidData(format!(
                "{}: no cases for {} in week {}",
                path.display(),
                groups[a].label,
                calendar.week_start(t)
            )));
        }
    }

    let path = dir.join(SEVERE_FILE);
    let index = Index { path: &path, ..index };
    let mut severe: Vec<[Vec<SevereStratum>; STATES]> =
        vec![std::array::from_fn(|_| vec![SevereStratum::default(); m]); n];
    for (line, row) in read_rows::<SevereRow>(&path)? {
        let (a, t) = index.locate(line, row.week, &row.age_label)?;
        if row.doses >= STATES {
            return Err(malformed(&path, line, format!("doses must be below {STATES}")));
        }
        if !(row.severe_count >= 0.0 && row.stratum_population >= 0.0) || row.severe_count > row.stratum_population {
            return Err(malformed(&path, line, "severe count must lie in [0, stratum_population]"));
        }
        severe[a][row.doses][t] = SevereStratum::new(row.severe_count, row.stratum_population);
    }

    let path = dir.join(VACCINATIONS_FILE);
    let index = Index { path: &path, ..index };
    let mut doses: Vec<[Vec<f64>; DOSES]> = vec![std::array::from_fn(|_| vec![0.0; m]); n];
    for (line, row) in read_rows::<VaccinationRow>(&path)? {
        let (a, t) = index.locate(line, row.week, &row.age_label)?;
        if !(1..=DOSES).contains(&row.dose_number) {
            return Err(malformed(&path, line, format!("dose_number must be in 1..={DOSES}")));
        }
        if !(row.count.is_finite() && row.count >= 0.0) {
            return Err(malformed(&path, line, "count must be non-negative"));
        }
        doses[a][row.dose_number - 1][t] += row.count;
    }

    ObservedDataset::from_parts(calendar, groups, cases, severe, doses)
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| malformed(path, 0, e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| malformed(path, 0, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `data` as a CSV bundle into `dir` (created if missing).
pub fn save_dataset(dir: &Path, data: &ObservedDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cal = data.calendar;
    let groups = &data.groups;
    write_rows(
        &dir.join(POPULATION_FILE),
        groups.iter().map(|g| PopulationRow {
            age_label: g.label.clone(),
            population: g.population,
        }),
    )?;
    write_rows(
        &dir.join(CASES_FILE),
        (0..cal.weeks).flat_map(|t| {
            groups.iter().enumerate().map(move |(a, g)| CasesRow {
                week: cal.week_start(t),
                age_label: g.label.clone(),
                cases: data.cases[a][t],
            })
        }),
    )?;
    write_rows(
        &dir.join(SEVERE_FILE),
        (0..cal.weeks).flat_map(|t| {
            groups.iter().enumerate().flat_map(move |(a, g)| {
                (0..STATES).map(move |v| {
                    let s = data.severe[a][v][t];
                    SevereRow {
                        week: cal.week_start(t),
                        age_label: g.label.clone(),
                        doses: v,
                        severe_count: s.count,
                        stratum_population: s.population,
                    }
                })
            })
        }),
    )?;
    write_rows(
        &dir.join(VACCINATIONS_FILE),
        (0..cal.weeks).flat_map(|t| {
            groups.iter().enumerate().flat_map(move |(a, g)| {
                (0..DOSES)
                    .filter(move |&i| data.doses[a][i][t] > 0.0)
                    .map(move |i| VaccinationRow {
                        week: cal.week_start(t),
                        age_label: g.label.clone(),
                        dose_number: i + 1,
                        count: data.doses[a][i][t],
                    })
            })
        }),
    )
}
