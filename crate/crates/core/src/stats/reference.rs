//! Reference statistics: the empirical distributions that feed prompts, drive
//! the length feedback target and serve as the evaluation baseline.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    ActivityChain, ActivityType, AgentId, HouseholdId, Relationship, SocioProfile,
};
use crate::record::ChainRecord;
use crate::stats::divergence::{DivergenceError, Distribution};
use crate::stats::histogram::{
    bin_duration, bin_length, bin_time, Histogram, HistogramKind, L_MAX,
};

pub const STATS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no usable records")]
    NoUsableRecords,
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown agent {0}: no profile supplied")]
    UnknownAgent(AgentId),
    #[error("invalid reference statistics: {0}")]
    Invalid(String),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Relation pairs tracked for joint participation rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationPair {
    #[serde(rename = "head-spouse")]
    HeadSpouse,
    #[serde(rename = "head-child")]
    HeadChild,
    /// Any co-participant at all.
    #[serde(rename = "any")]
    Any,
}

impl RelationPair {
    pub const ALL: [RelationPair; 3] = [
        RelationPair::HeadSpouse,
        RelationPair::HeadChild,
        RelationPair::Any,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RelationPair::HeadSpouse => "head-spouse",
            RelationPair::HeadChild => "head-child",
            RelationPair::Any => "any",
        }
    }

    /// The two roles of a specific pair; `None` for [`RelationPair::Any`].
    pub fn roles(self) -> Option<(Relationship, Relationship)> {
        match self {
            RelationPair::HeadSpouse => Some((Relationship::Head, Relationship::Spouse)),
            RelationPair::HeadChild => Some((Relationship::Head, Relationship::Child)),
            RelationPair::Any => None,
        }
    }

    /// The specific pair linking two roles, if tracked.
    pub fn between(a: Relationship, b: Relationship) -> Option<RelationPair> {
        use Relationship::*;
        match (a, b) {
            (Head, Spouse) | (Spouse, Head) => Some(RelationPair::HeadSpouse),
            (Head, Child) | (Child, Head) => Some(RelationPair::HeadChild),
            _ => None,
        }
    }
}

impl fmt::Display for RelationPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-activity-type participation tallies for one relation pair. An activity
/// is eligible when its owner holds one role of the pair and the household has
/// someone in the other role; it participates when it names such a member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointTally {
    pub eligible: Vec<u64>,
    pub participating: Vec<u64>,
}

impl Default for JointTally {
    fn default() -> Self {
        JointTally {
            eligible: vec![0; ActivityType::COUNT],
            participating: vec![0; ActivityType::COUNT],
        }
    }
}

impl JointTally {
    /// Participation rate in `[0, 1]`; `None` with no eligible activities.
    pub fn rate(&self, t: ActivityType) -> Option<f64> {
        let e = self.eligible[t.index()];
        (e > 0).then(|| self.participating[t.index()] as f64 / e as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeTiming {
    pub activity_type: ActivityType,
    pub start_hist: Histogram,
    pub end_hist: Histogram,
    pub duration_hist: Histogram,
}

/// Distributions for one population slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsBundle {
    pub chains: u64,
    pub activities: u64,
    pub type_hist: Histogram,
    pub start_hist: Histogram,
    pub end_hist: Histogram,
    pub duration_hist: Histogram,
    pub length_hist: Histogram,
    pub type_dist: Distribution,
    pub length_dist: Distribution,
    pub timing_by_type: Vec<TypeTiming>,
    pub joint_rates: BTreeMap<RelationPair, JointTally>,
}

impl StatsBundle {
    pub fn timing(&self, t: ActivityType) -> &TypeTiming {
        &self.timing_by_type[t.index()]
    }

    pub fn joint_rate(&self, pair: RelationPair, t: ActivityType) -> Option<f64> {
        self.joint_rates.get(&pair).and_then(|j| j.rate(t))
    }

    /// Histogram for one evaluation dimension.
    pub fn dimension(&self, dim: Dimension) -> &Histogram {
        match dim {
            Dimension::Type => &self.type_hist,
            Dimension::Start => &self.start_hist,
            Dimension::End => &self.end_hist,
            Dimension::Duration => &self.duration_hist,
            Dimension::Length => &self.length_hist,
        }
    }

    fn check(&self) -> Result<(), StatsError> {
        let bad = |m: String| Err(StatsError::Invalid(m));
        for dim in Dimension::ALL {
            let h = self.dimension(dim);
            if !h.is_well_formed() || h.kind != dim.kind() {
                return bad(format!("{dim} histogram malformed"));
            }
        }
        if self.type_hist.total() != self.activities || self.length_hist.total() != self.chains {
            return bad("histogram totals disagree with counts".into());
        }
        self.type_dist.check()?;
        self.length_dist.check()?;
        if self.type_dist.arity() != ActivityType::COUNT || self.length_dist.arity() != L_MAX + 1 {
            return bad("distribution arity".into());
        }
        if self.timing_by_type.len() != ActivityType::COUNT {
            return bad("timing_by_type must list all 15 types".into());
        }
        for j in self.joint_rates.values() {
            if j.eligible.len() != ActivityType::COUNT
                || j.participating.len() != ActivityType::COUNT
                || j.participating.iter().zip(&j.eligible).any(|(p, e)| p > e)
            {
                return bad("joint rate outside [0,1]".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Type,
    Start,
    End,
    Duration,
    Length,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Type,
        Dimension::Start,
        Dimension::End,
        Dimension::Duration,
        Dimension::Length,
    ];

    pub fn kind(self) -> HistogramKind {
        match self {
            Dimension::Type => HistogramKind::ActivityType,
            Dimension::Start | Dimension::End => HistogramKind::TimeOfDay,
            Dimension::Duration => HistogramKind::Duration,
            Dimension::Length => HistogramKind::ChainLength,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Type => "type",
            Dimension::Start => "start",
            Dimension::End => "end",
            Dimension::Duration => "duration",
            Dimension::Length => "length",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStats {
    pub schema_version: u32,
    pub l_max: usize,
    pub overall: StatsBundle,
    /// Slices keyed by group tag, e.g. `student` or `worker`.
    #[serde(default)]
    pub per_group: BTreeMap<String, StatsBundle>,
}

impl ReferenceStats {
    pub fn type_dist(&self) -> &Distribution {
        &self.overall.type_dist
    }

    pub fn length_dist(&self) -> &Distribution {
        &self.overall.length_dist
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if self.schema_version != STATS_SCHEMA_VERSION {
            return Err(StatsError::Invalid(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.l_max != L_MAX {
            return Err(StatsError::Invalid(format!("l_max must be {L_MAX}")));
        }
        self.overall.check()?;
        for b in self.per_group.values() {
            b.check()?;
        }
        Ok(())
    }

    pub fn load(reader: impl Read) -> Result<Self, StatsError> {
        let stats: ReferenceStats = serde_json::from_reader(reader)?;
        stats.validate()?;
        Ok(stats)
    }

    pub fn save(&self, writer: impl Write) -> Result<(), StatsError> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

/// One chain together with what the statistics need to know about its owner.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedChain {
    pub household_id: HouseholdId,
    pub relationship: Relationship,
    pub tags: BTreeSet<String>,
    pub chain: ActivityChain,
}

#[derive(Debug, Clone)]
struct BundleAccumulator {
    chains: u64,
    activities: u64,
    type_hist: Histogram,
    start_hist: Histogram,
    end_hist: Histogram,
    duration_hist: Histogram,
    length_hist: Histogram,
    timing: Vec<TypeTiming>,
    joint: BTreeMap<RelationPair, JointTally>,
}

impl BundleAccumulator {
    fn new() -> Self {
        BundleAccumulator {
            chains: 0,
            activities: 0,
            type_hist: Histogram::new(HistogramKind::ActivityType),
            start_hist: Histogram::new(HistogramKind::TimeOfDay),
            end_hist: Histogram::new(HistogramKind::TimeOfDay),
            duration_hist: Histogram::new(HistogramKind::Duration),
            length_hist: Histogram::new(HistogramKind::ChainLength),
            timing: ActivityType::ALL
                .iter()
                .map(|&t| TypeTiming {
                    activity_type: t,
                    start_hist: Histogram::new(HistogramKind::TimeOfDay),
                    end_hist: Histogram::new(HistogramKind::TimeOfDay),
                    duration_hist: Histogram::new(HistogramKind::Duration),
                })
                .collect(),
            joint: RelationPair::ALL
                .iter()
                .map(|&p| (p, JointTally::default()))
                .collect(),
        }
    }

    fn add(&mut self, obs: &ObservedChain, roles: &HouseholdRoles) {
        let chain = &obs.chain;
        self.chains += 1;
        self.length_hist
            .add(bin_length(chain.len()).expect("validated chains are non-empty"));
        let present = roles.roles_in(&obs.household_id);
        for a in &chain.activities {
            let t = a.activity_type.index();
            let sb = bin_time(a.start);
            let eb = bin_time(a.end);
            let db = bin_duration(a.duration()).expect("validated activities have positive duration");
            self.activities += 1;
            self.type_hist.add(t);
            self.start_hist.add(sb);
            self.end_hist.add(eb);
            self.duration_hist.add(db);
            let timing = &mut self.timing[t];
            timing.start_hist.add(sb);
            timing.end_hist.add(eb);
            timing.duration_hist.add(db);

            let any = self.joint.get_mut(&RelationPair::Any).expect("all pairs present");
            any.eligible[t] += 1;
            if a.is_joint() {
                any.participating[t] += 1;
            }
            for pair in [RelationPair::HeadSpouse, RelationPair::HeadChild] {
                let (r1, r2) = pair.roles().expect("specific pair");
                let other = if obs.relationship == r1 {
                    r2
                } else if obs.relationship == r2 {
                    r1
                } else {
                    continue;
                };
                if !present.contains(&other) {
                    continue;
                }
                let tally = self.joint.get_mut(&pair).expect("all pairs present");
                tally.eligible[t] += 1;
                let names_other = a
                    .participants
                    .iter()
                    .any(|p| roles.role(&obs.household_id, p) == Some(other));
                if names_other {
                    tally.participating[t] += 1;
                }
            }
        }
    }

    fn finish(self) -> Result<StatsBundle, StatsError> {
        Ok(StatsBundle {
            chains: self.chains,
            activities: self.activities,
            type_dist: self.type_hist.distribution()?,
            length_dist: self.length_hist.distribution()?,
            type_hist: self.type_hist,
            start_hist: self.start_hist,
            end_hist: self.end_hist,
            duration_hist: self.duration_hist,
            length_hist: self.length_hist,
            timing_by_type: self.timing,
            joint_rates: self.joint,
        })
    }
}

/// Household composition as seen in the data: owners and named participants.
#[derive(Debug, Default, Clone)]
pub struct HouseholdRoles {
    roles: HashMap<(HouseholdId, AgentId), Relationship>,
    present: HashMap<HouseholdId, BTreeSet<Relationship>>,
}

impl HouseholdRoles {
    pub fn insert(&mut self, household: &HouseholdId, agent: &AgentId, role: Relationship) {
        self.roles
            .insert((household.clone(), agent.clone()), role);
        self.present.entry(household.clone()).or_default().insert(role);
    }

    pub fn role(&self, household: &HouseholdId, agent: &AgentId) -> Option<Relationship> {
        self.roles.get(&(household.clone(), agent.clone())).copied()
    }

    fn roles_in(&self, household: &HouseholdId) -> BTreeSet<Relationship> {
        self.present.get(household).cloned().unwrap_or_default()
    }
}

/// Aggregates observed chains into reference statistics. `roles` must know
/// every owner and every participant that should count toward joint rates.
pub fn aggregate(
    observed: &[ObservedChain],
    roles: &HouseholdRoles,
) -> Result<ReferenceStats, StatsError> {
    if observed.is_empty() {
        return Err(StatsError::NoUsableRecords);
    }
    let mut overall = BundleAccumulator::new();
    let mut groups: BTreeMap<String, BundleAccumulator> = BTreeMap::new();
    for obs in observed {
        overall.add(obs, roles);
        for tag in &obs.tags {
            groups
                .entry(tag.clone())
                .or_insert_with(BundleAccumulator::new)
                .add(obs, roles);
        }
    }
    Ok(ReferenceStats {
        schema_version: STATS_SCHEMA_VERSION,
        l_max: L_MAX,
        overall: overall.finish()?,
        per_group: groups
            .into_iter()
            .map(|(k, v)| Ok((k, v.finish()?)))
            .collect::<Result<_, StatsError>>()?,
    })
}

/// Builds the role table for a set of chain records from agent profiles.
pub fn roles_from_records(
    records: &[ChainRecord],
    profiles: &HashMap<AgentId, SocioProfile>,
) -> Result<HouseholdRoles, StatsError> {
    let mut roles = HouseholdRoles::default();
    for rec in records {
        let ids = std::iter::once(&rec.owner)
            .chain(rec.activities.iter().flat_map(|a| a.participants.iter()));
        for id in ids {
            let p = profiles
                .get(id)
                .ok_or_else(|| StatsError::UnknownAgent(id.clone()))?;
            roles.insert(&rec.household_id, id, p.household_relationship);
        }
    }
    Ok(roles)
}

/// Statistics of in-memory chains. Group slices come from profile tags.
pub fn chains_to_stats(
    records: &[ChainRecord],
    profiles: &HashMap<AgentId, SocioProfile>,
) -> Result<ReferenceStats, StatsError> {
    if records.is_empty() {
        return Err(StatsError::NoUsableRecords);
    }
    let roles = roles_from_records(records, profiles)?;
    let observed = records
        .iter()
        .map(|rec| {
            let p = profiles
                .get(&rec.owner)
                .ok_or_else(|| StatsError::UnknownAgent(rec.owner.clone()))?;
            Ok(ObservedChain {
                household_id: rec.household_id.clone(),
                relationship: p.household_relationship,
                tags: p.group_tags().into_iter().map(String::from).collect(),
                chain: rec.to_chain(),
            })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    aggregate(&observed, &roles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Activity, EmploymentStatus, StudentStatus};

    fn profile(id: &str, rel: Relationship, student: bool, worker: bool) -> SocioProfile {
        SocioProfile {
            agent_id: id.into(),
            gender: "male".into(),
            age: 30,
            education: "high school".into(),
            student_status: if student {
                StudentStatus::Student
            } else {
                StudentStatus::NonStudent
            },
            employment_status: if worker {
                EmploymentStatus::Employed
            } else {
                EmploymentStatus::Unemployed
            },
            household_relationship: rel,
            income_level: "low".into(),
            has_driver_license: true,
            location_descriptor: "Orange County".into(),
        }
    }

    fn two_diaries() -> (Vec<ChainRecord>, HashMap<AgentId, SocioProfile>) {
        let a = ActivityChain::new(
            "a",
            vec![
                Activity::new(ActivityType::Home, 0, 480),
                Activity::new(ActivityType::Work, 480, 1020),
                Activity::new(ActivityType::Home, 1020, 1440),
            ],
        );
        let b = ActivityChain::new("b", vec![Activity::new(ActivityType::Home, 0, 1440)]);
        let records = vec![
            ChainRecord::from_chain(&a, &"h1".into()),
            ChainRecord::from_chain(&b, &"h2".into()),
        ];
        let profiles = [
            profile("a", Relationship::Head, false, true),
            profile("b", Relationship::Head, true, false),
        ]
        .into_iter()
        .map(|p| (p.agent_id.clone(), p))
        .collect();
        (records, profiles)
    }

    #[test]
    fn two_diary_distributions() {
        let (records, profiles) = two_diaries();
        let stats = chains_to_stats(&records, &profiles).unwrap();
        let len = stats.length_dist();
        assert_eq!(len.get(0), 0.5);
        assert_eq!(len.get(2), 0.5);
        assert_eq!(len.probabilities().iter().sum::<f64>(), 1.0);
        assert_eq!(stats.type_dist().get(ActivityType::Home.index()), 0.75);
        assert_eq!(stats.type_dist().get(ActivityType::Work.index()), 0.25);
        assert_eq!(stats.overall.type_hist.total(), 4);
        assert_eq!(stats.overall.duration_hist.counts[28], 1);
        assert_eq!(
            stats.per_group.keys().collect::<Vec<_>>(),
            vec!["student", "worker"]
        );
        assert!(stats.validate().is_ok());
    }

    #[test]
    fn only_students_gives_student_slice() {
        let (records, mut profiles) = two_diaries();
        profiles.insert("a".into(), profile("a", Relationship::Head, true, false));
        let stats = chains_to_stats(&records, &profiles).unwrap();
        assert_eq!(stats.per_group.keys().collect::<Vec<_>>(), vec!["student"]);
    }

    #[test]
    fn empty_input_is_an_error() {
        let err = chains_to_stats(&[], &HashMap::new()).unwrap_err();
        assert_eq!(err.to_string(), "no usable records");
    }

    #[test]
    fn joint_rates_follow_relationships() {
        let head = ActivityChain::new(
            "h",
            vec![
                Activity::new(ActivityType::Home, 0, 1100),
                Activity::new(ActivityType::BuyMeals, 1110, 1170).with_participants(["s"]),
                Activity::new(ActivityType::Home, 1180, 1440),
            ],
        );
        let spouse = ActivityChain::new(
            "s",
            vec![
                Activity::new(ActivityType::Home, 0, 1100),
                Activity::new(ActivityType::BuyMeals, 1110, 1170),
                Activity::new(ActivityType::Home, 1180, 1440),
            ],
        );
        let records = vec![
            ChainRecord::from_chain(&head, &"x".into()),
            ChainRecord::from_chain(&spouse, &"x".into()),
        ];
        let profiles: HashMap<_, _> = [
            profile("h", Relationship::Head, false, true),
            profile("s", Relationship::Spouse, false, true),
        ]
        .into_iter()
        .map(|p| (p.agent_id.clone(), p))
        .collect();
        let stats = chains_to_stats(&records, &profiles).unwrap();
        let o = &stats.overall;
        assert_eq!(o.joint_rate(RelationPair::HeadSpouse, ActivityType::BuyMeals), Some(0.5));
        assert_eq!(o.joint_rate(RelationPair::HeadSpouse, ActivityType::Home), Some(0.0));
        assert_eq!(o.joint_rate(RelationPair::HeadChild, ActivityType::BuyMeals), None);
        assert_eq!(o.joint_rate(RelationPair::Any, ActivityType::BuyMeals), Some(0.5));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let (records, profiles) = two_diaries();
        let stats = chains_to_stats(&records, &profiles).unwrap();
        let mut buf = Vec::new();
        stats.save(&mut buf).unwrap();
        let back = ReferenceStats::load(buf.as_slice()).unwrap();
        assert_eq!(back, stats);

        let mut broken = stats.clone();
        broken.overall.length_hist.counts[0] += 1;
        assert!(broken.validate().is_err());
    }
}
