//! Chain-length feedback: tracks the running length histogram of generated
//! chains and steers the next prompt toward the most under-represented length.
//!
//! Only chain length is fed back. Type and timing distributions are left to
//! the model.

use serde::{Deserialize, Serialize};

use crate::domain::{chain_length, ActivityChain};
use crate::stats::histogram::{bin_length, length_of_bin, LENGTH_BINS};
use crate::stats::Distribution;

pub const DEFAULT_WARMUP: u64 = 20;
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackState {
    pub target_length_dist: Distribution,
    /// Counts per length bin (lengths 1..=12, then the 13+ overflow).
    pub generated_length_counts: Vec<u64>,
    pub chains_seen: u64,
    pub enabled: bool,
    pub warmup: u64,
    pub epsilon: f64,
}

/// What the next prompt should say about chain length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Guidance {
    /// Aim for about this many activities.
    TargetLength { length: usize, overflow: bool },
    /// Generated lengths already track the target; restate the common lengths.
    Neutral { common: Vec<(usize, u32)> },
}

impl Guidance {
    pub fn target_length(&self) -> Option<usize> {
        match self {
            Guidance::TargetLength { length, .. } => Some(*length),
            Guidance::Neutral { .. } => None,
        }
    }

    pub fn text(&self) -> String {
        match self {
            Guidance::TargetLength {
                length,
                overflow: false,
            } => format!("Feedback on chain length: aim for a chain of about {length} activities today."),
            Guidance::TargetLength {
                length,
                overflow: true,
            } => format!(
                "Feedback on chain length: aim for a chain of about {length} or more activities today."
            ),
            Guidance::Neutral { common } => {
                let parts: Vec<String> = common
                    .iter()
                    .map(|(len, pct)| format!("{len} activities ({pct}%)"))
                    .collect();
                format!(
                    "Feedback on chain length: recent chains match the typical distribution; keep the chain length typical, most commonly {}.",
                    parts.join(", ")
                )
            }
        }
    }
}

impl FeedbackState {
    pub fn new(target_length_dist: Distribution, enabled: bool) -> Self {
        FeedbackState {
            generated_length_counts: vec![0; target_length_dist.arity()],
            target_length_dist,
            chains_seen: 0,
            enabled,
            warmup: DEFAULT_WARMUP,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn record_chain(&mut self, chain: &ActivityChain) {
        self.record_length(chain_length(chain));
    }

    pub fn record_length(&mut self, length: usize) {
        let Ok(bin) = bin_length(length) else {
            return;
        };
        let last = self.generated_length_counts.len() - 1;
        self.generated_length_counts[bin.min(last)] += 1;
        self.chains_seen += 1;
    }

    pub fn generated_fraction(&self, bin: usize) -> f64 {
        if self.chains_seen == 0 {
            0.0
        } else {
            self.generated_length_counts[bin] as f64 / self.chains_seen as f64
        }
    }

    /// `target - generated` per length bin.
    pub fn deficits(&self) -> Vec<f64> {
        (0..self.generated_length_counts.len())
            .map(|b| self.target_length_dist.get(b) - self.generated_fraction(b))
            .collect()
    }

    /// Guidance for the next generation, or `None` while disabled or warming up.
    /// Picks the length with the largest deficit above `epsilon`, preferring
    /// the shorter length on ties.
    pub fn next_guidance(&self) -> Option<Guidance> {
        if !self.enabled || self.chains_seen < self.warmup {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for (bin, d) in self.deficits().into_iter().enumerate() {
            if d > self.epsilon && best.is_none_or(|(_, b)| d > b) {
                best = Some((bin, d));
            }
        }
        Some(match best {
            Some((bin, _)) => Guidance::TargetLength {
                length: length_of_bin(bin),
                overflow: bin + 1 == LENGTH_BINS,
            },
            None => {
                let mut ranked: Vec<(usize, f64)> = self
                    .target_length_dist
                    .probabilities()
                    .iter()
                    .enumerate()
                    .map(|(b, &p)| (length_of_bin(b), p))
                    .collect();
                ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                Guidance::Neutral {
                    common: ranked
                        .into_iter()
                        .take(3)
                        .filter(|(_, p)| *p > 0.0)
                        .map(|(len, p)| (len, (p * 100.0).round() as u32))
                        .collect(),
                }
            }
        })
    }

    /// Length distribution of generated chains so far.
    pub fn generated_distribution(&self) -> Option<Distribution> {
        Distribution::from_counts(&self.generated_length_counts).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Activity, ActivityType};

    fn chain_of(len: usize) -> ActivityChain {
        let acts = (0..len)
            .map(|i| Activity::new(ActivityType::Home, i as u16 * 10, i as u16 * 10 + 5))
            .collect();
        ActivityChain::new("a", acts)
    }

    fn uniform_3_4() -> Distribution {
        let mut p = vec![0.0; LENGTH_BINS];
        p[2] = 0.5;
        p[3] = 0.5;
        Distribution::new(p).unwrap()
    }

    #[test]
    fn record_increments() {
        let mut s = FeedbackState::new(uniform_3_4(), true);
        s.record_chain(&chain_of(3));
        assert_eq!(s.generated_length_counts[2], 1);
        assert_eq!(s.chains_seen, 1);
        s.record_chain(&chain_of(3));
        assert_eq!(s.generated_length_counts[2], 2);
        s.record_chain(&chain_of(15));
        assert_eq!(s.generated_length_counts[12], 1);
        assert_eq!(s.chains_seen, 3);
    }

    #[test]
    fn names_largest_deficit() {
        let mut s = FeedbackState::new(uniform_3_4(), true);
        for _ in 0..30 {
            s.record_length(3);
        }
        // deficit(4) = 0.5 - 0 = 0.5, deficit(3) = 0.5 - 1 = -0.5
        let g = s.next_guidance().unwrap();
        assert_eq!(g.target_length(), Some(4));
        assert!(g.text().contains("aim for a chain of about 4 activities today"));
    }

    #[test]
    fn warmup_and_disabled() {
        let mut s = FeedbackState::new(uniform_3_4(), true);
        for _ in 0..19 {
            s.record_length(3);
        }
        assert_eq!(s.next_guidance(), None);
        s.record_length(3);
        assert!(s.next_guidance().is_some());
        s.enabled = false;
        assert_eq!(s.next_guidance(), None);
    }

    #[test]
    fn neutral_within_epsilon() {
        let mut s = FeedbackState::new(uniform_3_4(), true);
        for _ in 0..15 {
            s.record_length(3);
            s.record_length(4);
        }
        let g = s.next_guidance().unwrap();
        assert_eq!(g.target_length(), None);
        assert_eq!(
            g.text(),
            "Feedback on chain length: recent chains match the typical distribution; keep the chain length typical, most commonly 3 activities (50%), 4 activities (50%)."
        );
    }

    #[test]
    fn ties_prefer_shorter() {
        let mut s = FeedbackState::new(uniform_3_4(), true);
        for _ in 0..20 {
            s.record_length(1);
        }
        assert_eq!(s.next_guidance().unwrap().target_length(), Some(3));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn order_independent_and_never_names_surplus(mut lengths in proptest::collection::vec(1usize..16, 20..80)) {
                let target = Distribution::from_counts(&[1, 2, 5, 6, 5, 3, 2, 1, 1, 1, 0, 0, 1]).unwrap();
                let mut a = FeedbackState::new(target.clone(), true);
                lengths.iter().for_each(|&l| a.record_length(l));
                lengths.reverse();
                let mut b = FeedbackState::new(target, true);
                lengths.iter().for_each(|&l| b.record_length(l));
                prop_assert_eq!(&a.generated_length_counts, &b.generated_length_counts);
                if let Some(Guidance::TargetLength { length, .. }) = a.next_guidance() {
                    prop_assert!(a.deficits()[bin_length(length).unwrap()] > 0.0);
                }
            }
        }
    }
}
