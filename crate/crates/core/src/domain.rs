//! Core vocabulary shared by every other module: activity types, time of day,
//! socio-demographic profiles, households, activities and activity chains.
//!
//! A chain covers a single day. Times are minutes since midnight in `0..=1440`
//! and a chain never crosses midnight. Gaps between consecutive activities are
//! legal and stand for travel, which is not modelled explicitly.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MINUTES_PER_DAY: u16 = 1440;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("activity code {0} out of range 1..15")]
    ActivityCodeOutOfRange(i64),
    #[error("time '{0}' is not a valid HH:MM time of day")]
    BadTime(String),
    #[error("minute {0} outside 0..=1440")]
    MinuteOutOfRange(i64),
    #[error("unknown household relationship '{0}'")]
    UnknownRelationship(String),
    #[error("unknown student status '{0}'")]
    UnknownStudentStatus(String),
    #[error("unknown employment status '{0}'")]
    UnknownEmploymentStatus(String),
    #[error("household {household} is invalid: {reason}")]
    InvalidHousehold { household: String, reason: String },
}

/// The fifteen aggregated activity categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActivityType {
    Home,
    Work,
    School,
    Caregiving,
    BuyGoods,
    BuyServices,
    BuyMeals,
    GeneralErrands,
    Recreational,
    Exercise,
    VisitFriends,
    HealthCare,
    Religious,
    SomethingElse,
    DropOffPickUp,
}

impl ActivityType {
    pub const COUNT: usize = 15;

    pub const ALL: [ActivityType; 15] = [
        ActivityType::Home,
        ActivityType::Work,
        ActivityType::School,
        ActivityType::Caregiving,
        ActivityType::BuyGoods,
        ActivityType::BuyServices,
        ActivityType::BuyMeals,
        ActivityType::GeneralErrands,
        ActivityType::Recreational,
        ActivityType::Exercise,
        ActivityType::VisitFriends,
        ActivityType::HealthCare,
        ActivityType::Religious,
        ActivityType::SomethingElse,
        ActivityType::DropOffPickUp,
    ];

    pub fn code(self) -> u8 {
        self.index() as u8 + 1
    }

    /// Zero-based position, `code() - 1`.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: i64) -> Result<Self, DomainError> {
        if (1..=15).contains(&code) {
            Ok(Self::ALL[(code - 1) as usize])
        } else {
            Err(DomainError::ActivityCodeOutOfRange(code))
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ActivityType::Home => "Home",
            ActivityType::Work => "Work",
            ActivityType::School => "School",
            ActivityType::Caregiving => "Caregiving",
            ActivityType::BuyGoods => "Buy goods",
            ActivityType::BuyServices => "Buy services",
            ActivityType::BuyMeals => "Buy meals",
            ActivityType::GeneralErrands => "General errands",
            ActivityType::Recreational => "Recreational",
            ActivityType::Exercise => "Exercise",
            ActivityType::VisitFriends => "Visit friends",
            ActivityType::HealthCare => "Health care",
            ActivityType::Religious => "Religious",
            ActivityType::SomethingElse => "Something else",
            ActivityType::DropOffPickUp => "Drop off/Pick up",
        }
    }
}

impl fmt::Display for ActivityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for ActivityType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for ActivityType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = i64::deserialize(d)?;
        ActivityType::from_code(code).map_err(serde::de::Error::custom)
    }
}

/// Minutes since midnight, `0..=1440`. 1440 is only meaningful as an end time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MinuteOfDay(u16);

impl MinuteOfDay {
    pub const MIDNIGHT: MinuteOfDay = MinuteOfDay(0);
    pub const END_OF_DAY: MinuteOfDay = MinuteOfDay(MINUTES_PER_DAY);

    pub fn new(minutes: i64) -> Result<Self, DomainError> {
        if (0..=MINUTES_PER_DAY as i64).contains(&minutes) {
            Ok(MinuteOfDay(minutes as u16))
        } else {
            Err(DomainError::MinuteOutOfRange(minutes))
        }
    }

    /// Saturating constructor for arithmetic that may leave the day.
    pub fn clamped(minutes: i64) -> Self {
        MinuteOfDay(minutes.clamp(0, MINUTES_PER_DAY as i64) as u16)
    }

    pub fn minutes(self) -> u16 {
        self.0
    }

    pub fn hhmm(self) -> String {
        format!("{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl fmt::Display for MinuteOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hhmm())
    }
}

impl FromStr for MinuteOfDay {
    type Err = DomainError;

    /// Accepts `H:MM` or `HH:MM`; minutes must be two digits below 60.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DomainError::BadTime(s.to_string());
        let t = s.trim();
        let (h, m) = t.split_once(':').ok_or_else(bad)?;
        if h.is_empty() || h.len() > 2 || m.len() != 2 {
            return Err(bad());
        }
        if !h.bytes().all(|b| b.is_ascii_digit()) || !m.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let h: i64 = h.parse().map_err(|_| bad())?;
        let m: i64 = m.parse().map_err(|_| bad())?;
        if m >= 60 || h > 24 || (h == 24 && m != 0) {
            return Err(bad());
        }
        MinuteOfDay::new(h * 60 + m)
    }
}

impl Serialize for MinuteOfDay {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.hhmm())
    }
}

impl<'de> Deserialize<'de> for MinuteOfDay {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Opaque agent identifier.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        AgentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_string())
    }
}

impl From<String> for AgentId {
    fn from(s: String) -> Self {
        AgentId(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HouseholdId(pub String);

impl HouseholdId {
    pub fn new(id: impl Into<String>) -> Self {
        HouseholdId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for HouseholdId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for HouseholdId {
    fn from(s: &str) -> Self {
        HouseholdId(s.to_string())
    }
}

impl From<String> for HouseholdId {
    fn from(s: String) -> Self {
        HouseholdId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relationship {
    Head,
    Spouse,
    Child,
    Other,
}

impl Relationship {
    pub fn label(self) -> &'static str {
        match self {
            Relationship::Head => "head",
            Relationship::Spouse => "spouse",
            Relationship::Child => "child",
            Relationship::Other => "other",
        }
    }
}

impl fmt::Display for Relationship {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Relationship {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "head" => Ok(Relationship::Head),
            "spouse" => Ok(Relationship::Spouse),
            "child" => Ok(Relationship::Child),
            "other" => Ok(Relationship::Other),
            _ => Err(DomainError::UnknownRelationship(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudentStatus {
    Student,
    NonStudent,
}

impl StudentStatus {
    pub fn label(self) -> &'static str {
        match self {
            StudentStatus::Student => "student",
            StudentStatus::NonStudent => "non-student",
        }
    }
}

impl FromStr for StudentStatus {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "student" => Ok(StudentStatus::Student),
            "non-student" | "nonstudent" | "not a student" => Ok(StudentStatus::NonStudent),
            _ => Err(DomainError::UnknownStudentStatus(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmploymentStatus {
    Employed,
    Unemployed,
    Retired,
    NotInLaborForce,
}

impl EmploymentStatus {
    pub fn label(self) -> &'static str {
        match self {
            EmploymentStatus::Employed => "employed",
            EmploymentStatus::Unemployed => "unemployed",
            EmploymentStatus::Retired => "retired",
            EmploymentStatus::NotInLaborForce => "not-in-labor-force",
        }
    }
}

impl FromStr for EmploymentStatus {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "employed" => Ok(EmploymentStatus::Employed),
            "unemployed" => Ok(EmploymentStatus::Unemployed),
            "retired" => Ok(EmploymentStatus::Retired),
            "not-in-labor-force" | "not in labor force" => Ok(EmploymentStatus::NotInLaborForce),
            _ => Err(DomainError::UnknownEmploymentStatus(s.to_string())),
        }
    }
}

/// Group tags used for evaluation slices.
pub const TAG_STUDENT: &str = "student";
pub const TAG_WORKER: &str = "worker";

/// The nine-attribute socio-demographic record of one agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocioProfile {
    pub agent_id: AgentId,
    pub gender: String,
    pub age: u32,
    pub education: String,
    pub student_status: StudentStatus,
    pub employment_status: EmploymentStatus,
    pub household_relationship: Relationship,
    pub income_level: String,
    pub has_driver_license: bool,
    pub location_descriptor: String,
}

impl SocioProfile {
    /// Slice tags derived from the profile, sorted.
    pub fn group_tags(&self) -> Vec<&'static str> {
        let mut tags = Vec::new();
        if self.student_status == StudentStatus::Student {
            tags.push(TAG_STUDENT);
        }
        if self.employment_status == EmploymentStatus::Employed {
            tags.push(TAG_WORKER);
        }
        tags
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Household {
    pub household_id: HouseholdId,
    pub members: Vec<SocioProfile>,
}

impl Household {
    /// Checks the roster invariants: non-empty, distinct ids, exactly one head.
    pub fn new(household_id: HouseholdId, members: Vec<SocioProfile>) -> Result<Self, DomainError> {
        let hh = Household {
            household_id,
            members,
        };
        hh.check()?;
        Ok(hh)
    }

    pub fn check(&self) -> Result<(), DomainError> {
        let invalid = |reason: &str| DomainError::InvalidHousehold {
            household: self.household_id.0.clone(),
            reason: reason.to_string(),
        };
        if self.members.is_empty() {
            return Err(invalid("no members"));
        }
        let ids: BTreeSet<_> = self.members.iter().map(|m| &m.agent_id).collect();
        if ids.len() != self.members.len() {
            return Err(invalid("duplicate agent ids"));
        }
        let heads = self
            .members
            .iter()
            .filter(|m| m.household_relationship == Relationship::Head)
            .count();
        if heads != 1 {
            return Err(invalid(&format!("expected exactly one head, found {heads}")));
        }
        Ok(())
    }

    pub fn member(&self, id: &AgentId) -> Option<&SocioProfile> {
        self.members.iter().find(|m| &m.agent_id == id)
    }

    pub fn contains(&self, id: &AgentId) -> bool {
        self.member(id).is_some()
    }

    /// Members in generation order: head, spouse, children by age descending,
    /// then everyone else. Ties keep roster order.
    pub fn coordination_order(&self) -> Vec<&SocioProfile> {
        let rank = |r: Relationship| match r {
            Relationship::Head => 0,
            Relationship::Spouse => 1,
            Relationship::Child => 2,
            Relationship::Other => 3,
        };
        let mut order: Vec<(usize, &SocioProfile)> = self.members.iter().enumerate().collect();
        order.sort_by(|(ia, a), (ib, b)| {
            rank(a.household_relationship)
                .cmp(&rank(b.household_relationship))
                .then_with(|| {
                    if a.household_relationship == Relationship::Child {
                        b.age.cmp(&a.age)
                    } else {
                        std::cmp::Ordering::Equal
                    }
                })
                .then(ia.cmp(ib))
        });
        order.into_iter().map(|(_, p)| p).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Activity {
    pub activity_type: ActivityType,
    pub start: MinuteOfDay,
    pub end: MinuteOfDay,
    /// Household co-participants, never including the chain owner.
    pub participants: BTreeSet<AgentId>,
}

impl Activity {
    pub fn new(activity_type: ActivityType, start: u16, end: u16) -> Self {
        Activity {
            activity_type,
            start: MinuteOfDay::clamped(start as i64),
            end: MinuteOfDay::clamped(end as i64),
            participants: BTreeSet::new(),
        }
    }

    pub fn with_participants<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<AgentId>,
    {
        self.participants = ids.into_iter().map(Into::into).collect();
        self
    }

    pub fn duration(&self) -> i64 {
        self.end.minutes() as i64 - self.start.minutes() as i64
    }

    pub fn is_joint(&self) -> bool {
        !self.participants.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivityChain {
    pub owner: AgentId,
    pub activities: Vec<Activity>,
}

impl ActivityChain {
    pub fn new(owner: impl Into<AgentId>, activities: Vec<Activity>) -> Self {
        ActivityChain {
            owner: owner.into(),
            activities,
        }
    }

    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    /// Joint claims as `(activity index, partner)` pairs.
    pub fn joint_claims(&self) -> impl Iterator<Item = (usize, &AgentId)> {
        self.activities
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.participants.iter().map(move |p| (i, p)))
    }
}

pub fn chain_length(chain: &ActivityChain) -> usize {
    chain.activities.len()
}

/// One structural problem found by [`validate_chain`]. Activity positions are
/// zero-based; `Display` renders them one-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyChain,
    OwnerNotInHousehold { owner: AgentId },
    ReversedTimes { index: usize },
    OutOfDay { index: usize },
    Overlap { first: usize, second: usize },
    ForeignParticipant { index: usize, participant: AgentId },
    SelfParticipant { index: usize },
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::EmptyChain => "empty_chain",
            Violation::OwnerNotInHousehold { .. } => "owner_not_in_household",
            Violation::ReversedTimes { .. } => "reversed_times",
            Violation::OutOfDay { .. } => "out_of_day",
            Violation::Overlap { .. } => "overlap",
            Violation::ForeignParticipant { .. } => "foreign_participant",
            Violation::SelfParticipant { .. } => "self_participant",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyChain => write!(f, "chain has no activities"),
            Violation::OwnerNotInHousehold { owner } => {
                write!(f, "owner {owner} is not a household member")
            }
            Violation::ReversedTimes { index } => {
                write!(f, "activity {} does not end after it starts", index + 1)
            }
            Violation::OutOfDay { index } => {
                write!(f, "activity {} lies outside 00:00-24:00", index + 1)
            }
            Violation::Overlap { first, second } => write!(
                f,
                "overlap between activities {} and {}",
                first + 1,
                second + 1
            ),
            Violation::ForeignParticipant { index, participant } => write!(
                f,
                "activity {} names {participant}, who is not a household member",
                index + 1
            ),
            Violation::SelfParticipant { index } => {
                write!(f, "activity {} lists the owner as a participant", index + 1)
            }
        }
    }
}

/// Checks every chain invariant and returns all violations found. An empty
/// vector means the chain is valid.
pub fn validate_chain(chain: &ActivityChain, household: &Household) -> Vec<Violation> {
    validate_chain_with(chain, |id| household.contains(id))
}

/// Same as [`validate_chain`] with household membership supplied as a predicate.
pub fn validate_chain_with(
    chain: &ActivityChain,
    is_member: impl Fn(&AgentId) -> bool,
) -> Vec<Violation> {
    let mut out = Vec::new();
    if chain.activities.is_empty() {
        out.push(Violation::EmptyChain);
    }
    if !is_member(&chain.owner) {
        out.push(Violation::OwnerNotInHousehold {
            owner: chain.owner.clone(),
        });
    }
    for (i, a) in chain.activities.iter().enumerate() {
        if a.start >= a.end {
            out.push(Violation::ReversedTimes { index: i });
        }
        if a.start.minutes() >= MINUTES_PER_DAY || a.end.minutes() > MINUTES_PER_DAY {
            out.push(Violation::OutOfDay { index: i });
        }
        for p in &a.participants {
            if p == &chain.owner {
                out.push(Violation::SelfParticipant { index: i });
            } else if !is_member(p) {
                out.push(Violation::ForeignParticipant {
                    index: i,
                    participant: p.clone(),
                });
            }
        }
    }
    for (i, w) in chain.activities.windows(2).enumerate() {
        if w[0].end > w[1].start {
            out.push(Violation::Overlap {
                first: i,
                second: i + 1,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn profile(id: &str, rel: Relationship, age: u32) -> SocioProfile {
        SocioProfile {
            agent_id: id.into(),
            gender: "female".into(),
            age,
            education: "bachelor".into(),
            student_status: StudentStatus::NonStudent,
            employment_status: EmploymentStatus::Employed,
            household_relationship: rel,
            income_level: "middle".into(),
            has_driver_license: true,
            location_descriptor: "Los Angeles County".into(),
        }
    }

    fn household() -> Household {
        Household::new(
            "hh1".into(),
            vec![
                profile("h1", Relationship::Head, 40),
                profile("h2", Relationship::Spouse, 38),
            ],
        )
        .unwrap()
    }

    #[test]
    fn activity_codes_round_trip() {
        for (i, t) in ActivityType::ALL.iter().enumerate() {
            assert_eq!(t.code() as usize, i + 1);
            assert_eq!(ActivityType::from_code(t.code() as i64).unwrap(), *t);
        }
        assert_eq!(ActivityType::from_code(7).unwrap().label(), "Buy meals");
        assert_eq!(ActivityType::from_code(15).unwrap().label(), "Drop off/Pick up");
        assert!(ActivityType::from_code(0).is_err());
        assert_eq!(
            ActivityType::from_code(16).unwrap_err().to_string(),
            "activity code 16 out of range 1..15"
        );
    }

    #[test]
    fn time_parsing() {
        assert_eq!("08:30".parse::<MinuteOfDay>().unwrap().minutes(), 510);
        assert_eq!("8:30".parse::<MinuteOfDay>().unwrap().minutes(), 510);
        assert_eq!("24:00".parse::<MinuteOfDay>().unwrap().minutes(), 1440);
        for bad in ["24:01", "25:00", "12:60", "1230", "12:3", "", "ab:cd", "-1:00"] {
            assert!(bad.parse::<MinuteOfDay>().is_err(), "{bad}");
        }
        assert_eq!(MinuteOfDay::new(1110).unwrap().hhmm(), "18:30");
    }

    #[test]
    fn canonical_chain_is_valid() {
        let chain = ActivityChain::new(
            "h1",
            vec![
                Activity::new(ActivityType::Home, 0, 480),
                Activity::new(ActivityType::Work, 510, 1020),
                Activity::new(ActivityType::Home, 1050, 1440),
            ],
        );
        assert!(validate_chain(&chain, &household()).is_empty());
        assert_eq!(chain_length(&chain), 3);
    }

    #[test]
    fn overlap_is_reported() {
        let chain = ActivityChain::new(
            "h1",
            vec![
                Activity::new(ActivityType::Home, 0, 600),
                Activity::new(ActivityType::Work, 540, 1020),
            ],
        );
        let v = validate_chain(&chain, &household());
        assert_eq!(v, vec![Violation::Overlap { first: 0, second: 1 }]);
        assert_eq!(v[0].to_string(), "overlap between activities 1 and 2");
    }

    #[test]
    fn foreign_participant_is_reported() {
        let chain = ActivityChain::new(
            "h1",
            vec![Activity::new(ActivityType::Work, 480, 1020).with_participants(["x9"])],
        );
        let v = validate_chain(&chain, &household());
        assert_eq!(
            v,
            vec![Violation::ForeignParticipant {
                index: 0,
                participant: "x9".into()
            }]
        );
    }

    #[test]
    fn all_violations_are_collected() {
        let chain = ActivityChain::new(
            "zz",
            vec![
                Activity::new(ActivityType::Home, 600, 500).with_participants(["zz"]),
                Activity::new(ActivityType::Work, 400, 1440),
            ],
        );
        let codes: Vec<_> = validate_chain(&chain, &household())
            .iter()
            .map(Violation::code)
            .collect();
        assert_eq!(
            codes,
            vec!["owner_not_in_household", "reversed_times", "self_participant", "overlap"]
        );
        let empty = ActivityChain::new("h1", vec![]);
        assert_eq!(validate_chain(&empty, &household()), vec![Violation::EmptyChain]);
    }

    #[test]
    fn household_invariants() {
        let two_heads = Household::new(
            "x".into(),
            vec![
                profile("a", Relationship::Head, 30),
                profile("b", Relationship::Head, 30),
            ],
        );
        assert!(two_heads.is_err());
        assert!(Household::new("x".into(), vec![]).is_err());
        let dup = Household::new(
            "x".into(),
            vec![
                profile("a", Relationship::Head, 30),
                profile("a", Relationship::Child, 3),
            ],
        );
        assert!(dup.is_err());
    }

    #[test]
    fn coordination_order_is_head_spouse_children_by_age() {
        let hh = Household::new(
            "x".into(),
            vec![
                profile("c_young", Relationship::Child, 4),
                profile("o", Relationship::Other, 70),
                profile("s", Relationship::Spouse, 40),
                profile("c_old", Relationship::Child, 12),
                profile("h", Relationship::Head, 41),
            ],
        )
        .unwrap();
        let ids: Vec<_> = hh
            .coordination_order()
            .iter()
            .map(|p| p.agent_id.0.clone())
            .collect();
        assert_eq!(ids, vec!["h", "s", "c_old", "c_young", "o"]);
    }
}
