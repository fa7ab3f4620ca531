//! Empirical distributions, binning and the Jensen-Shannon divergence.

pub mod diary;
pub mod divergence;
pub mod histogram;
pub mod reference;

pub use diary::{ingest_diary, read_diary, write_diary, Diary, IngestReport, DIARY_HEADER};
pub use divergence::{jsd, jsd_bernoulli, jsd_counts, kl_divergence, DivergenceError, Distribution};
pub use histogram::{
    bin_duration, bin_length, bin_time, Histogram, HistogramKind, LENGTH_BINS, L_MAX,
};
pub use reference::{
    aggregate, chains_to_stats, Dimension, HouseholdRoles, ObservedChain, ReferenceStats,
    RelationPair, StatsBundle, StatsError,
};
