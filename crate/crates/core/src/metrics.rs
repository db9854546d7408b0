//! Error metrics: RMSE, MAE, dynamic time warping, and the mean-over-stations
//! fitness used for calibration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{StationSeries, TimeSeries};

/// Result of a quality assessment over a set of stations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub metric_name: String,
    /// Aggregate value (arithmetic mean of `per_station`).
    pub value: f64,
    pub per_station: BTreeMap<String, f64>,
}

fn check_aligned(predicted: &TimeSeries, observed: &TimeSeries) -> Result<()> {
    if predicted.is_empty() || observed.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    if predicted.len() != observed.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} vs {}",
            predicted.len(),
            observed.len()
        )));
    }
    Ok(())
}

/// Root mean squared pointwise error.
pub fn rmse(predicted: &TimeSeries, observed: &TimeSeries) -> Result<f64> {
    check_aligned(predicted, observed)?;
    let n = predicted.len() as f64;
    let ss: f64 = predicted
        .values()
        .iter()
        .zip(observed.values())
        .map(|(p, o)| (p - o) * (p - o))
        .sum();
    Ok((ss / n).sqrt())
}

/// Mean absolute pointwise error.
pub fn mae(predicted: &TimeSeries, observed: &TimeSeries) -> Result<f64> {
    check_aligned(predicted, observed)?;
    let n = predicted.len() as f64;
    let sum: f64 = predicted
        .values()
        .iter()
        .zip(observed.values())
        .map(|(p, o)| (p - o).abs())
        .sum();
    Ok(sum / n)
}

/// Classic dynamic time warping distance: absolute-difference local cost,
/// full O(n·m) table, step set {match, insert, delete}, no window
/// constraint, no normalization.
pub fn dtw(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    let (xs, ys) = (a.values(), b.values());
    let m = ys.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for x in xs {
        cur[0] = f64::INFINITY;
        for (j, y) in ys.iter().enumerate() {
            let cost = (x - y).abs();
            cur[j + 1] = cost + prev[j + 1].min(cur[j]).min(prev[j]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Mean RMSE over stations; the calibration fitness.
pub fn station_fitness(
    predictions: &StationSeries,
    observations: &StationSeries,
) -> Result<QualityReport> {
    let pred_keys: Vec<_> = predictions.keys().collect();
    let obs_keys: Vec<_> = observations.keys().collect();
    if pred_keys != obs_keys {
        return Err(Error::InvalidInput(format!(
            "station key sets differ: {pred_keys:?} vs {obs_keys:?}"
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidInput("no stations".into()));
    }
    let mut per_station = BTreeMap::new();
    for (station, pred) in predictions {
        per_station.insert(station.clone(), rmse(pred, &observations[station])?);
    }
    let value = per_station.values().sum::<f64>() / per_station.len() as f64;
    Ok(QualityReport {
        metric_name: "rmse".into(),
        value,
        per_station,
    })
}
