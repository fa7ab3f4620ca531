//! Fixed binning for the five distribution dimensions.
//!
//! * activity type: 15 bins, one per code
//! * start / end time: 24 hourly bins, 24:00 folded into the last bin
//! * duration: 29 half-hour bins, the last one open-ended at 14 h
//! * chain length: lengths 1..=12 plus an overflow bin for 13 or more

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ActivityType, MinuteOfDay, MINUTES_PER_DAY};
use crate::stats::divergence::{DivergenceError, Distribution};

pub const TIME_BINS: usize = 24;
pub const DURATION_BIN_MINUTES: u32 = 30;
pub const DURATION_BINS: usize = 29;
/// Longest chain length with its own bin.
pub const L_MAX: usize = 12;
pub const LENGTH_BINS: usize = L_MAX + 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BinError {
    #[error("time {0} outside 0..=1440")]
    TimeOutOfRange(i64),
    #[error("duration {0} must be at least one minute")]
    NonPositiveDuration(i64),
    #[error("chain length must be at least 1")]
    ZeroLength,
}

pub fn bin_time(t: MinuteOfDay) -> usize {
    bin_time_minutes(t.minutes() as i64).expect("MinuteOfDay is in range")
}

pub fn bin_time_minutes(t: i64) -> Result<usize, BinError> {
    if !(0..=MINUTES_PER_DAY as i64).contains(&t) {
        return Err(BinError::TimeOutOfRange(t));
    }
    Ok(((t / 60) as usize).min(TIME_BINS - 1))
}

pub fn bin_duration(minutes: i64) -> Result<usize, BinError> {
    if minutes < 1 {
        return Err(BinError::NonPositiveDuration(minutes));
    }
    Ok(((minutes / DURATION_BIN_MINUTES as i64) as usize).min(DURATION_BINS - 1))
}

pub fn bin_length(length: usize) -> Result<usize, BinError> {
    if length == 0 {
        return Err(BinError::ZeroLength);
    }
    Ok(length.min(LENGTH_BINS) - 1)
}

/// Representative chain length of a length bin; the overflow bin maps to 13.
pub fn length_of_bin(bin: usize) -> usize {
    bin + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramKind {
    ActivityType,
    TimeOfDay,
    Duration,
    ChainLength,
}

impl HistogramKind {
    pub fn bins(self) -> usize {
        match self {
            HistogramKind::ActivityType => ActivityType::COUNT,
            HistogramKind::TimeOfDay => TIME_BINS,
            HistogramKind::Duration => DURATION_BINS,
            HistogramKind::ChainLength => LENGTH_BINS,
        }
    }

    /// Bin boundaries. The final edge is an exclusive upper bound one past the
    /// largest representable value.
    pub fn edges(self) -> Vec<u32> {
        let n = self.bins() as u32;
        match self {
            HistogramKind::ActivityType => (1..=n + 1).collect(),
            HistogramKind::TimeOfDay => (0..n)
                .map(|k| k * 60)
                .chain(std::iter::once(MINUTES_PER_DAY as u32 + 1))
                .collect(),
            HistogramKind::Duration => (0..n)
                .map(|k| k * DURATION_BIN_MINUTES)
                .chain(std::iter::once(MINUTES_PER_DAY as u32 + 1))
                .collect(),
            HistogramKind::ChainLength => (1..=n)
                .chain(std::iter::once(MINUTES_PER_DAY as u32 + 1))
                .collect(),
        }
    }

    pub fn label(self, bin: usize) -> String {
        match self {
            HistogramKind::ActivityType => ActivityType::ALL[bin].label().to_string(),
            HistogramKind::TimeOfDay => format!("{:02}:00", bin),
            HistogramKind::Duration => {
                let lo = bin as u32 * DURATION_BIN_MINUTES;
                if bin + 1 == DURATION_BINS {
                    format!("{lo}+")
                } else {
                    format!("{lo}-{}", lo + DURATION_BIN_MINUTES)
                }
            }
            HistogramKind::ChainLength => {
                if bin + 1 == LENGTH_BINS {
                    format!("{}+", LENGTH_BINS)
                } else {
                    (bin + 1).to_string()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub kind: HistogramKind,
    pub bin_edges: Vec<u32>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(kind: HistogramKind) -> Self {
        Histogram {
            kind,
            bin_edges: kind.edges(),
            counts: vec![0; kind.bins()],
        }
    }

    pub fn add(&mut self, bin: usize) {
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn distribution(&self) -> Result<Distribution, DivergenceError> {
        Distribution::from_counts(&self.counts)
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.bins()).map(|b| self.kind.label(b)).collect()
    }

    /// Checks arity against the kind and strictly increasing edges.
    pub fn is_well_formed(&self) -> bool {
        self.counts.len() == self.kind.bins()
            && self.bin_edges.len() == self.counts.len() + 1
            && self.bin_edges.windows(2).all(|w| w[0] < w[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_bins() {
        assert_eq!(bin_time(MinuteOfDay::new(0).unwrap()), 0);
        assert_eq!(bin_time(MinuteOfDay::new(510).unwrap()), 8);
        assert_eq!(bin_time(MinuteOfDay::new(1439).unwrap()), 23);
        assert_eq!(bin_time(MinuteOfDay::new(1440).unwrap()), 23);
        assert!(bin_time_minutes(1441).is_err());
        assert!(bin_time_minutes(-1).is_err());
    }

    #[test]
    fn duration_bins() {
        assert_eq!(bin_duration(29).unwrap(), 0);
        assert_eq!(bin_duration(30).unwrap(), 1);
        assert_eq!(bin_duration(839).unwrap(), 27);
        assert_eq!(bin_duration(840).unwrap(), 28);
        assert_eq!(bin_duration(900).unwrap(), 28);
        assert!(bin_duration(0).is_err());
        assert!(bin_duration(-5).is_err());
    }

    #[test]
    fn length_bins() {
        assert_eq!(bin_length(1).unwrap(), 0);
        assert_eq!(bin_length(12).unwrap(), 11);
        assert_eq!(bin_length(13).unwrap(), 12);
        assert_eq!(bin_length(15).unwrap(), 12);
        assert!(bin_length(0).is_err());
    }

    #[test]
    fn edges_and_labels() {
        for kind in [
            HistogramKind::ActivityType,
            HistogramKind::TimeOfDay,
            HistogramKind::Duration,
            HistogramKind::ChainLength,
        ] {
            assert!(Histogram::new(kind).is_well_formed());
        }
        let h = Histogram::new(HistogramKind::ChainLength);
        assert_eq!(h.labels().last().unwrap(), "13+");
        assert_eq!(h.labels().len(), 13);
        assert_eq!(HistogramKind::Duration.label(28), "840+");
        assert_eq!(HistogramKind::Duration.label(1), "30-60");
        assert_eq!(HistogramKind::TimeOfDay.label(8), "08:00");
    }
}
