//! Trend detection over GPS message timing.
//!
//! Genuine satellite signals jitter with atmospheric conditions; a
//! counterfeit source tends to emit on an artificially constant interval.
//! The detector measures the coefficient of variation of inter-arrival
//! intervals and flags near-zero variation.

use std::collections::VecDeque;

use thiserror::Error;

use crate::telemetry::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovReading {
    pub cov: f64,
    /// True when the timing is suspiciously constant.
    pub indicator: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrendError {
    #[error("inter-arrival intervals have zero mean")]
    ZeroMeanInterval,
}

/// Coefficient of variation (population stddev / mean) of the inter-arrival
/// intervals of `samples` (message timestamps in seconds).
///
/// Returns `None` below `min_samples` timestamps. The indicator is true iff
/// CoV < `cov_threshold`. Multiplying all intervals by a positive constant
/// leaves the CoV unchanged, so the check detects shape, not scale.
pub fn interval_constancy(
    samples: &[f64],
    min_samples: usize,
    cov_threshold: f64,
) -> Result<Option<CovReading>, TrendError> {
    if samples.len() < min_samples.max(2) {
        return Ok(None);
    }
    let intervals: Vec<f64> = samples.windows(2).map(|w| w[1] - w[0]).collect();
    let n = intervals.len() as f64;
    let mean = intervals.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(TrendError::ZeroMeanInterval);
    }
    let var = intervals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let cov = var.sqrt() / mean;
    Ok(Some(CovReading { cov, indicator: cov < cov_threshold }))
}

/// Rolling detector fed by the live GPS message stream. Reconstructs a
/// message clock from reported intervals and raises on the rising edge of
/// the constancy indicator, so one burst yields one detection.
#[derive(Debug, Clone)]
pub struct TrendDetector {
    min_samples: usize,
    cov_threshold: f64,
    clock_s: f64,
    samples: VecDeque<(Timestamp, f64)>,
    active: bool,
}

/// A rising-edge detection with the evidence that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendDetection {
    pub cov: f64,
    pub first: Timestamp,
    pub last: Timestamp,
    pub sample_count: usize,
}

impl TrendDetector {
    pub fn new(min_samples: usize, cov_threshold: f64) -> Self {
        TrendDetector {
            min_samples,
            cov_threshold,
            clock_s: 0.0,
            samples: VecDeque::new(),
            active: false,
        }
    }

    /// Feeds one reported inter-message interval observed at `ts`.
    pub fn push_interval(&mut self, ts: Timestamp, interval_s: f64) -> Option<TrendDetection> {
        if !interval_s.is_finite() || interval_s <= 0.0 {
            return None;
        }
        self.clock_s += interval_s;
        self.samples.push_back((ts, self.clock_s));
        while self.samples.len() > self.min_samples * 2 {
            self.samples.pop_front();
        }
        let clock: Vec<f64> = self.samples.iter().map(|(_, c)| *c).collect();
        let reading =
            interval_constancy(&clock, self.min_samples, self.cov_threshold).ok().flatten()?;
        let was_active = self.active;
        self.active = reading.indicator;
        if reading.indicator && !was_active {
            Some(TrendDetection {
                cov: reading.cov,
                first: self.samples.front().unwrap().0,
                last: ts,
                sample_count: self.samples.len(),
            })
        } else {
            None
        }
    }
}
