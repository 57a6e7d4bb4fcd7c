//! Strategy files: a CSV of `(age_label, t1, t2, t3, mass)` rows with one-based weeks
//! (sentinel `M + 1`) and a JSON header next to it.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{AllocationStrategy, DoseTimes};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyHeader {
    pub label: String,
    pub weeks: usize,
    pub start: NaiveDate,
    pub age_labels: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    age_label: String,
    t1: u32,
    t2: u32,
    t3: u32,
    mass: f64,
}

fn header_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `strategy` to `path` and its header to `path` with a `.json` extension.
pub fn write_strategy(
    path: &Path,
    strategy: &AllocationStrategy,
    age_labels: &[String],
    start: NaiveDate,
) -> Result<()> {
    if age_labels.len() != strategy.age_groups() {
        return Err(Error::InvalidConfig("one label per age group required".into()));
    }
    let header = StrategyHeader {
        label: strategy.label.clone(),
        weeks: strategy.weeks,
        start,
        age_labels: age_labels.to_vec(),
    };
    let hpath = header_path(path);
    let file = File::create(&hpath).map_err(|e| Error::io(&hpath, e))?;
    serde_json::to_writer_pretty(file, &header)?;

    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for (label, joint) in age_labels.iter().zip(&strategy.per_age) {
        for (times, &mass) in joint {
            let [t1, t2, t3] = times.0.map(|t| t + 1);
            w.serialize(Row {
                age_label: label.clone(),
                t1,
                t2,
                t3,
                mass,
            })
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_strategy(path: &Path) -> Result<(StrategyHeader, AllocationStrategy)> {
    let hpath = header_path(path);
    let file = File::open(&hpath).map_err(|e| Error::io(&hpath, e))?;
    let header: StrategyHeader = serde_json::from_reader(file)?;
    let m = header.weeks as u32;
    let mut per_age = vec![BTreeMap::new(); header.age_labels.len()];
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| malformed(path, line, e.to_string()))?;
        let a = header
            .age_labels
            .iter()
            .position(|l| *l == row.age_label)
            .ok_or_else(|| malformed(path, line, format!("unknown age group {}", row.age_label)))?;
        let times = [row.t1, row.t2, row.t3];
        if times.iter().any(|&t| t == 0 || t > m + 1) {
            return Err(malformed(path, line, format!("week outside 1..={}", m + 1)));
        }
        let key = DoseTimes(times.map(|t| t - 1));
        if per_age[a].insert(key, row.mass).is_some() {
            return Err(malformed(path, line, "duplicate support point".into()));
        }
    }
    let strategy = AllocationStrategy::new(header.label.clone(), header.weeks, per_age);
    strategy.validate()?;
    Ok((header, strategy))
}

fn malformed(path: &Path, line: u64, message: String) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    malformed(path, line, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let mut joint = BTreeMap::new();
        joint.insert(DoseTimes([0, 3, 15]), 0.1 + 0.2);
        joint.insert(DoseTimes::never(20), 1.0 - (0.1 + 0.2));
        let s = AllocationStrategy::new("x", 20, vec![joint.clone(), joint]);
        let labels = vec!["a".to_string(), "b".to_string()];
        let start = NaiveDate::from_ymd_opt(2020, 12, 20).unwrap();
        write_strategy(&path, &s, &labels, start).unwrap();
        let (h, back) = read_strategy(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(h.start, start);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("a,1,4,16,"));
        assert!(text.contains("a,21,21,21,"));
    }
}
