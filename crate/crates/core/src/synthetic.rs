//! Synthetic populations and travel diaries.
//!
//! Stand-ins for survey and activity-model data: a seeded population
//! generator and a diary generator with two parameter variants that differ
//! slightly in activity mix, timing and chain length. Joint activities in the
//! generated diaries are always reciprocated by every named member.

use std::collections::BTreeMap;

use rand::Rng;

use crate::domain::{
    Activity, ActivityChain, ActivityType, AgentId, EmploymentStatus, Household, HouseholdId, Relationship,
    SocioProfile, StudentStatus, TAG_STUDENT, TAG_WORKER,
};
use crate::household::build_context;
use crate::sampler::{rng_for, sample_day, sample_length, sample_weighted, DayInputs};
use crate::stats::histogram::{Histogram, HistogramKind};
use crate::stats::reference::{JointTally, TypeTiming};
use crate::stats::{Diary, Distribution, ObservedChain, RelationPair, StatsBundle};

const COUNTIES: [&str; 6] = [
    "Los Angeles County",
    "Orange County",
    "Riverside County",
    "San Bernardino County",
    "Ventura County",
    "Imperial County",
];
const INCOME: [&str; 3] = ["low income", "mid income", "high income"];
const ADULT_EDUCATION: [(&str, f64); 4] = [
    ("high school", 0.3),
    ("some college", 0.28),
    ("bachelor", 0.27),
    ("graduate", 0.15),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiaryVariant {
    /// Household travel survey flavour.
    Survey,
    /// Activity-based model output flavour: slightly later, longer, fewer
    /// joint activities.
    Model,
}

impl DiaryVariant {
    pub fn label(self) -> &'static str {
        match self {
            DiaryVariant::Survey => "survey",
            DiaryVariant::Model => "model",
        }
    }
}

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn household_sizes<R: Rng + ?Sized>(rng: &mut R, households: usize, agents: usize) -> Vec<usize> {
    let weights = [28.0, 34.0, 16.0, 14.0, 8.0];
    let mut sizes: Vec<usize> = (0..households)
        .map(|_| sample_weighted(rng, &weights).expect("positive weights") + 1)
        .collect();
    let mut total: usize = sizes.iter().sum();
    while total < agents {
        let i = rng.random_range(0..households);
        if sizes[i] < 5 {
            sizes[i] += 1;
            total += 1;
        }
    }
    while total > agents {
        let i = rng.random_range(0..households);
        if sizes[i] > 1 {
            sizes[i] -= 1;
            total -= 1;
        }
    }
    sizes
}

struct Person {
    relationship: Relationship,
    age: u32,
    gender: &'static str,
}

fn profile<R: Rng + ?Sized>(
    rng: &mut R,
    id: String,
    p: Person,
    income: &str,
    county: &str,
) -> SocioProfile {
    let age = p.age;
    let student = match age {
        5..=17 => true,
        18..=22 => rng.random_bool(0.6),
        23..=30 => rng.random_bool(0.1),
        _ => false,
    };
    let employment = match age {
        0..=15 => EmploymentStatus::NotInLaborForce,
        16..=17 if rng.random_bool(0.15) => EmploymentStatus::Employed,
        16..=17 => EmploymentStatus::NotInLaborForce,
        18..=64 => match rng.random_range(0..100) {
            0..=71 => EmploymentStatus::Employed,
            72..=77 => EmploymentStatus::Unemployed,
            _ => EmploymentStatus::NotInLaborForce,
        },
        _ if rng.random_bool(0.8) => EmploymentStatus::Retired,
        _ => EmploymentStatus::Employed,
    };
    let education = match age {
        0..=14 => "less than high school".to_string(),
        15..=18 => "high school".to_string(),
        _ => {
            let w: Vec<f64> = ADULT_EDUCATION.iter().map(|e| e.1).collect();
            ADULT_EDUCATION[sample_weighted(rng, &w).expect("weights")].0.to_string()
        }
    };
    let license = match age {
        0..=15 => false,
        16..=17 => rng.random_bool(0.5),
        _ => rng.random_bool(0.92),
    };
    SocioProfile {
        agent_id: AgentId::new(id),
        gender: p.gender.to_string(),
        age,
        education,
        student_status: if student {
            StudentStatus::Student
        } else {
            StudentStatus::NonStudent
        },
        employment_status: employment,
        household_relationship: p.relationship,
        income_level: income.to_string(),
        has_driver_license: license,
        location_descriptor: county.to_string(),
    }
}

/// `households` households holding exactly `agents` people (clamped to the
/// feasible range of 1 to 5 members per household). Ids are
/// `{prefix}{n:04}` for households and `{household}-{k}` for members.
pub fn generate_population(households: usize, agents: usize, seed: u64, prefix: &str) -> Vec<Household> {
    let mut rng = rng_for(seed, &["population", prefix]);
    let agents = agents.clamp(households, households * 5);
    let sizes = household_sizes(&mut rng, households, agents);
    sizes
        .iter()
        .enumerate()
        .map(|(h, &size)| {
            let hid = format!("{prefix}{:04}", h + 1);
            let county = pick(&mut rng, &COUNTIES);
            let income = pick(&mut rng, &INCOME);
            let head_age = rng.random_range(24..=82u32);
            let head_gender = pick(&mut rng, &["female", "male"]);
            let mut people = vec![Person {
                relationship: Relationship::Head,
                age: head_age,
                gender: head_gender,
            }];
            for k in 1..size {
                let spouse = k == 1 && rng.random_bool(0.75);
                let child_possible = head_age >= 20;
                let person = if spouse {
                    Person {
                        relationship: Relationship::Spouse,
                        age: (head_age as i64 + rng.random_range(-5..=5)).max(20) as u32,
                        gender: if head_gender == "female" { "male" } else { "female" },
                    }
                } else if child_possible && rng.random_bool(0.85) {
                    Person {
                        relationship: Relationship::Child,
                        age: rng.random_range(1..=(head_age - 18).min(25)),
                        gender: pick(&mut rng, &["female", "male"]),
                    }
                } else {
                    Person {
                        relationship: Relationship::Other,
                        age: rng.random_range(18..=85),
                        gender: pick(&mut rng, &["female", "male"]),
                    }
                };
                people.push(person);
            }
            let members = people
                .into_iter()
                .enumerate()
                .map(|(k, p)| profile(&mut rng, format!("{hid}-{}", k + 1), p, income, county))
                .collect();
            Household {
                household_id: HouseholdId::new(hid),
                members,
            }
        })
        .collect()
}

/// (mean hour, sd hours) start components and (mean minutes, sd minutes)
/// duration per activity type, for the survey variant.
fn timing_params(t: ActivityType) -> (&'static [(f64, f64, f64)], (f64, f64)) {
    use ActivityType::*;
    match t {
        Home => (&[(12.0, 6.0, 1.0)], (300.0, 200.0)),
        Work => (&[(8.0, 1.4, 1.0)], (510.0, 80.0)),
        School => (&[(7.9, 0.6, 1.0)], (400.0, 50.0)),
        Caregiving => (&[(14.0, 4.0, 1.0)], (90.0, 60.0)),
        BuyGoods => (&[(14.5, 3.5, 1.0)], (35.0, 25.0)),
        BuyServices => (&[(12.0, 3.0, 1.0)], (45.0, 30.0)),
        BuyMeals => (&[(12.2, 1.2, 0.45), (18.6, 1.2, 0.55)], (60.0, 25.0)),
        GeneralErrands => (&[(13.0, 3.5, 1.0)], (30.0, 20.0)),
        Recreational => (&[(15.5, 3.5, 1.0)], (120.0, 60.0)),
        Exercise => (&[(8.0, 2.0, 0.5), (17.5, 1.5, 0.5)], (70.0, 25.0)),
        VisitFriends => (&[(16.0, 3.5, 1.0)], (120.0, 70.0)),
        HealthCare => (&[(11.0, 2.5, 1.0)], (70.0, 40.0)),
        Religious => (&[(10.0, 2.5, 1.0)], (100.0, 35.0)),
        SomethingElse => (&[(13.0, 4.0, 1.0)], (60.0, 40.0)),
        DropOffPickUp => (&[(7.6, 0.7, 0.5), (15.2, 1.2, 0.5)], (10.0, 6.0)),
    }
}

fn type_weight(t: ActivityType) -> f64 {
    use ActivityType::*;
    match t {
        Home => 0.0,
        Work => 8.0,
        School => 3.0,
        Caregiving => 3.0,
        BuyGoods => 12.0,
        BuyServices => 5.0,
        BuyMeals => 11.0,
        GeneralErrands => 8.0,
        Recreational => 9.0,
        Exercise => 6.0,
        VisitFriends => 6.0,
        HealthCare => 3.0,
        Religious => 2.0,
        SomethingElse => 4.0,
        DropOffPickUp => 10.0,
    }
}

fn gaussian(x: f64, mean: f64, sd: f64) -> f64 {
    (-0.5 * ((x - mean) / sd).powi(2)).exp()
}

fn histogram_from(kind: HistogramKind, weight: impl Fn(usize) -> f64) -> Histogram {
    let mut h = Histogram::new(kind);
    for (b, c) in h.counts.iter_mut().enumerate() {
        *c = (weight(b) * 1000.0).round() as u64;
    }
    h
}

/// Length-bin weights (lengths 1..=12, then 13+) per group.
fn length_weights(group: &str, variant: DiaryVariant) -> [f64; 13] {
    let mut w = match group {
        TAG_WORKER => [3.0, 2.0, 30.0, 14.0, 17.0, 11.0, 8.0, 6.0, 4.0, 2.0, 1.5, 1.0, 0.5],
        TAG_STUDENT => [3.0, 1.0, 33.0, 15.0, 17.0, 11.0, 8.0, 5.0, 3.0, 2.0, 1.0, 0.5, 0.5],
        _ => [14.0, 3.0, 24.0, 15.0, 14.0, 10.0, 8.0, 5.0, 3.0, 2.0, 1.0, 0.5, 0.5],
    };
    if variant == DiaryVariant::Model {
        w[0] *= 0.8;
        w[2] *= 1.1;
        w[4] *= 0.9;
        w[7] *= 1.15;
    }
    w
}

/// Reference-shaped bundle encoding the variant's generating parameters.
/// Only type, timing and length fields are meaningful.
pub fn prior_bundle(variant: DiaryVariant, group: &str) -> StatsBundle {
    let (hour_shift, duration_scale) = match variant {
        DiaryVariant::Survey => (0.0, 1.0),
        DiaryVariant::Model => (0.35, 1.08),
    };
    let timing_by_type: Vec<TypeTiming> = ActivityType::ALL
        .iter()
        .map(|&t| {
            let (starts, (dmean, dsd)) = timing_params(t);
            let start_hist = histogram_from(HistogramKind::TimeOfDay, |b| {
                starts
                    .iter()
                    .map(|&(m, sd, w)| w * gaussian(b as f64 + 0.5, m + hour_shift, sd))
                    .sum()
            });
            let duration_hist = histogram_from(HistogramKind::Duration, |b| {
                let centre = if b == 28 { 900.0 } else { b as f64 * 30.0 + 15.0 };
                gaussian(centre, dmean * duration_scale, dsd * duration_scale)
            });
            TypeTiming {
                activity_type: t,
                start_hist,
                end_hist: Histogram::new(HistogramKind::TimeOfDay),
                duration_hist,
            }
        })
        .collect();
    let type_hist = histogram_from(HistogramKind::ActivityType, |b| {
        let t = ActivityType::ALL[b];
        let w = type_weight(t);
        match (variant, t) {
            (DiaryVariant::Model, ActivityType::BuyGoods) => w * 0.8,
            (DiaryVariant::Model, ActivityType::Recreational) => w * 1.25,
            (DiaryVariant::Model, ActivityType::DropOffPickUp) => w * 0.85,
            _ => w,
        }
    });
    let length_hist = histogram_from(HistogramKind::ChainLength, |b| length_weights(group, variant)[b]);
    StatsBundle {
        chains: 0,
        activities: 0,
        type_dist: type_hist.distribution().expect("positive weights"),
        length_dist: length_hist.distribution().expect("positive weights"),
        type_hist,
        start_hist: Histogram::new(HistogramKind::TimeOfDay),
        end_hist: Histogram::new(HistogramKind::TimeOfDay),
        duration_hist: Histogram::new(HistogramKind::Duration),
        length_hist,
        timing_by_type,
        joint_rates: RelationPair::ALL
            .iter()
            .map(|&p| (p, JointTally::default()))
            .collect::<BTreeMap<_, _>>(),
    }
}

/// Probability that an activity of type `t` names a later household member
/// related by `pair`.
pub fn joint_rate(variant: DiaryVariant, pair: RelationPair, t: ActivityType) -> f64 {
    use ActivityType::*;
    let base = match (pair, t) {
        (RelationPair::HeadSpouse, BuyMeals) => 0.35,
        (RelationPair::HeadSpouse, Recreational | VisitFriends) => 0.3,
        (RelationPair::HeadSpouse, Religious) => 0.4,
        (RelationPair::HeadSpouse, BuyGoods) => 0.15,
        (RelationPair::HeadSpouse, Exercise | GeneralErrands | SomethingElse) => 0.1,
        (RelationPair::HeadSpouse, HealthCare) => 0.05,
        (RelationPair::HeadChild, DropOffPickUp) => 0.35,
        (RelationPair::HeadChild, Religious) => 0.35,
        (RelationPair::HeadChild, BuyMeals | Recreational) => 0.25,
        (RelationPair::HeadChild, VisitFriends) => 0.2,
        (RelationPair::HeadChild, BuyGoods | HealthCare) => 0.1,
        (RelationPair::Any, BuyMeals | Recreational | Religious) => 0.12,
        (RelationPair::Any, DropOffPickUp | VisitFriends) => 0.08,
        _ => 0.0,
    };
    match variant {
        DiaryVariant::Survey => base,
        DiaryVariant::Model => base * 0.85,
    }
}

fn group_of(profile: &SocioProfile) -> &'static str {
    let tags = profile.group_tags();
    if tags.contains(&TAG_WORKER) {
        TAG_WORKER
    } else if tags.contains(&TAG_STUDENT) {
        TAG_STUDENT
    } else {
        "other"
    }
}

/// One diary day for every member of every household, generated in
/// coordination order so that joint activities are reciprocated.
pub fn generate_diary(households: &[Household], variant: DiaryVariant, seed: u64) -> Diary {
    let bundles: BTreeMap<&str, StatsBundle> = [TAG_WORKER, TAG_STUDENT, "other"]
        .into_iter()
        .map(|g| (g, prior_bundle(variant, g)))
        .collect();
    let mut diary = Diary::default();
    for hh in households {
        let mut committed: Vec<ActivityChain> = Vec::new();
        for member in hh.coordination_order() {
            let mut rng = rng_for(seed, &["diary", variant.label(), member.agent_id.as_str()]);
            let bundle = &bundles[group_of(member)];
            let length = sample_length(&mut rng, bundle.length_dist.probabilities());
            let anchors = build_context(&committed, hh, &member.agent_id).anchors;
            let booked: Vec<Activity> = committed.iter().flat_map(|c| c.activities.iter().cloned()).collect();
            let draw = sample_day(
                &mut rng,
                &DayInputs {
                    profile: member,
                    household: hh,
                    bundle,
                    length,
                    anchors: &anchors,
                    booked: &booked,
                    hallucination_rate: 0.0,
                },
                |pair, t| joint_rate(variant, pair, t),
            );
            committed.push(draw.chain);
        }
        // Anchors that could not be placed leave one-sided claims; strip them.
        let claims: Vec<(usize, usize, AgentId)> = committed
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| {
                c.joint_claims()
                    .map(move |(ai, p)| (ci, ai, p.clone()))
                    .collect::<Vec<_>>()
            })
            .collect();
        for (ci, ai, partner) in claims {
            let claim = &committed[ci].activities[ai];
            let partner_chain = committed.iter().find(|c| c.owner == partner);
            let owner = committed[ci].owner.clone();
            if crate::household::match_claim(&owner, claim, partner_chain, 0).is_err() {
                committed[ci].activities[ai].participants.remove(&partner);
            }
        }
        for chain in committed {
            let p = hh.member(&chain.owner).expect("member of household");
            diary.roles.insert(&hh.household_id, &p.agent_id, p.household_relationship);
            diary.chains.push(ObservedChain {
                household_id: hh.household_id.clone(),
                relationship: p.household_relationship,
                tags: p.group_tags().into_iter().map(String::from).collect(),
                chain,
            });
        }
    }
    diary
}

/// Point-mass length distribution on `length` over the length bins.
pub fn point_mass_length(length: usize) -> Distribution {
    let bin = crate::stats::bin_length(length).expect("length >= 1");
    Distribution::point_mass(crate::stats::LENGTH_BINS, bin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_chain;

    #[test]
    fn population_has_requested_size() {
        let pop = generate_population(200, 500, 11, "g");
        assert_eq!(pop.len(), 200);
        assert_eq!(pop.iter().map(|h| h.members.len()).sum::<usize>(), 500);
        for h in &pop {
            h.check().unwrap();
        }
        assert_eq!(pop, generate_population(200, 500, 11, "g"));
    }

    #[test]
    fn diary_chains_are_valid_and_reciprocated() {
        let pop = generate_population(40, 100, 3, "r");
        let diary = generate_diary(&pop, DiaryVariant::Survey, 3);
        assert_eq!(diary.chains.len(), 100);
        let mut claims = 0;
        for obs in &diary.chains {
            let hh = pop.iter().find(|h| h.household_id == obs.household_id).unwrap();
            assert!(validate_chain(&obs.chain, hh).is_empty());
            claims += obs.chain.joint_claims().count();
        }
        assert!(claims > 0);
        let records: Vec<_> = diary
            .chains
            .iter()
            .map(|o| crate::record::ChainRecord::from_chain(&o.chain, &o.household_id))
            .collect();
        let audit = crate::household::audit_consistency(&records, 0);
        assert_eq!(audit.inconsistent, 0);
    }
}
