//! Time series and the `time,station,value` CSV format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An immutable series of finite values over strictly increasing integer
/// ticks. The benchmark interprets values as wave height and ticks as hours,
/// but nothing in the crate depends on units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    times: Vec<i64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "times/values length mismatch: {} vs {}",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "timestamps must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in series".into()));
        }
        Ok(TimeSeries { times, values })
    }

    /// Series over ticks 0..n.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let times = (0..values.len() as i64).collect();
        TimeSeries::new(times, values)
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First `ceil(fraction * len)` points; used to carve training windows.
    pub fn head_fraction(&self, fraction: f64) -> TimeSeries {
        let n = ((self.len() as f64) * fraction).ceil() as usize;
        let n = n.clamp(1, self.len());
        TimeSeries {
            times: self.times[..n].to_vec(),
            values: self.values[..n].to_vec(),
        }
    }

    pub fn tail_from(&self, start: usize) -> TimeSeries {
        TimeSeries {
            times: self.times[start..].to_vec(),
            values: self.values[start..].to_vec(),
        }
    }

    pub fn same_timestamps(&self, other: &TimeSeries) -> bool {
        self.times == other.times
    }
}

/// Map of station id to series; the unit of exchange between models,
/// metrics and ensembles. BTreeMap keeps iteration deterministic.
pub type StationSeries = BTreeMap<String, TimeSeries>;

/// Restrict every station to its first `fraction` of ticks.
pub fn head_fraction(map: &StationSeries, fraction: f64) -> StationSeries {
    map.iter()
        .map(|(k, v)| (k.clone(), v.head_fraction(fraction)))
        .collect()
}

/// Render as `time,station,value` CSV.
pub fn to_csv(map: &StationSeries) -> String {
    let mut out = String::from("time,station,value\n");
    for (station, series) in map {
        for (t, v) in series.times().iter().zip(series.values()) {
            let _ = writeln!(out, "{t},{station},{v}");
        }
    }
    out
}

pub fn write_csv(path: &Path, map: &StationSeries) -> Result<()> {
    std::fs::write(path, to_csv(map))?;
    Ok(())
}

/// Parse the `time,station,value` format.
pub fn from_csv(text: &str) -> Result<StationSeries> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "time,station,value" => {}
        other => {
            return Err(Error::Parse(format!(
                "expected header 'time,station,value', got {other:?}"
            )))
        }
    }
    let mut acc: BTreeMap<String, Vec<(i64, f64)>> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (t, s, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(s), Some(v)) => (t, s, v),
            _ => return Err(Error::Parse(format!("bad CSV row {}: '{line}'", i + 2))),
        };
        let t: i64 = t
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: bad time: {e}", i + 2)))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: bad value: {e}", i + 2)))?;
        acc.entry(s.trim().to_string()).or_default().push((t, v));
    }
    let mut out = StationSeries::new();
    for (station, mut rows) in acc {
        rows.sort_by_key(|r| r.0);
        let (times, values) = rows.into_iter().unzip();
        out.insert(station, TimeSeries::new(times, values)?);
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<StationSeries> {
    from_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_times() {
        assert!(TimeSeries::new(vec![0, 0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![1, 0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![0], vec![f64::NAN]).is_err());
        assert!(TimeSeries::new(vec![0, 1], vec![1.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut map = StationSeries::new();
        map.insert(
            "st00".into(),
            TimeSeries::new(vec![0, 1, 2], vec![0.5, 1.25, -3.0]).unwrap(),
        );
        map.insert(
            "st01".into(),
            TimeSeries::new(vec![0, 1, 2], vec![2.0, 2.0, 2.0]).unwrap(),
        );
        let text = to_csv(&map);
        assert!(text.starts_with("time,station,value\n"));
        assert_eq!(from_csv(&text).unwrap(), map);
    }

    #[test]
    fn head_fraction_keeps_at_least_one_point() {
        let s = TimeSeries::from_values(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.head_fraction(0.7).len(), 3);
        assert_eq!(s.head_fraction(0.0).len(), 1);
        assert_eq!(s.head_fraction(1.0).len(), 4);
    }
}
