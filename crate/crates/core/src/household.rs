//! Household coordination: retrieval of already-generated member schedules,
//! joint-claim matching, the snap / regenerate / demote repair ladder, and the
//! consistency audit over a finished chain store.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{validate_chain, Activity, ActivityChain, ActivityType, AgentId, Household, MinuteOfDay};
use crate::record::ChainRecord;

pub const DEFAULT_TOLERANCE: u16 = 15;
pub const DEFAULT_SNAP_WINDOW: u16 = 60;
pub const DEFAULT_REGENERATE_ATTEMPTS: u32 = 2;

/// A joint activity that earlier members already committed to with the agent
/// being generated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub activity_type: ActivityType,
    pub start: MinuteOfDay,
    pub end: MinuteOfDay,
    pub required_participants: BTreeSet<AgentId>,
}

impl Anchor {
    pub fn describe(&self) -> String {
        let with: Vec<&str> = self.required_participants.iter().map(AgentId::as_str).collect();
        format!(
            "{} from {} to {} with participants [{}]",
            self.activity_type,
            self.start,
            self.end,
            with.join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberDigest {
    pub agent_id: AgentId,
    pub relationship: String,
    pub activities: Vec<Activity>,
}

impl MemberDigest {
    pub fn render(&self) -> String {
        let acts: Vec<String> = self
            .activities
            .iter()
            .map(|a| {
                let mut s = format!("{} {}-{}", a.activity_type, a.start, a.end);
                if a.is_joint() {
                    let with: Vec<&str> = a.participants.iter().map(AgentId::as_str).collect();
                    s.push_str(&format!(" with {}", with.join(", ")));
                }
                s
            })
            .collect();
        format!("- {} ({}): {}", self.agent_id, self.relationship, acts.join("; "))
    }
}

/// Retrieved coordination context for the next household member.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseholdContext {
    pub member_summaries: Vec<MemberDigest>,
    pub anchors: Vec<Anchor>,
}

impl HouseholdContext {
    pub fn is_empty(&self) -> bool {
        self.member_summaries.is_empty() && self.anchors.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.member_summaries.is_empty() {
            out.push_str("No other household members have been scheduled yet.");
        } else {
            out.push_str("Household members already scheduled:\n");
            let lines: Vec<String> = self.member_summaries.iter().map(MemberDigest::render).collect();
            out.push_str(&lines.join("\n"));
        }
        if !self.anchors.is_empty() {
            out.push_str("\nPre-established joint activities involving this agent:\n");
            let lines: Vec<String> = self.anchors.iter().map(|a| format!("- {}", a.describe())).collect();
            out.push_str(&lines.join("\n"));
        }
        out
    }
}

/// Context for `next_member` from the chains already committed for its
/// household. Anchors are the committed joint claims naming `next_member`;
/// claims with an identical window are merged.
pub fn build_context(
    committed: &[ActivityChain],
    household: &Household,
    next_member: &AgentId,
) -> HouseholdContext {
    let mut ctx = HouseholdContext::default();
    for chain in committed {
        if &chain.owner == next_member {
            continue;
        }
        let relationship = household
            .member(&chain.owner)
            .map(|p| p.household_relationship.label().to_string())
            .unwrap_or_else(|| "member".into());
        ctx.member_summaries.push(MemberDigest {
            agent_id: chain.owner.clone(),
            relationship,
            activities: chain.activities.clone(),
        });
        for a in &chain.activities {
            if !a.participants.contains(next_member) {
                continue;
            }
            if let Some(existing) = ctx.anchors.iter_mut().find(|x| {
                x.activity_type == a.activity_type && x.start == a.start && x.end == a.end
            }) {
                existing.required_participants.insert(chain.owner.clone());
            } else {
                ctx.anchors.push(Anchor {
                    activity_type: a.activity_type,
                    start: a.start,
                    end: a.end,
                    required_participants: [chain.owner.clone()].into(),
                });
            }
        }
    }
    ctx.anchors.sort_by_key(|a| (a.start, a.end, a.activity_type));
    ctx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchReason {
    PartnerChainMissing,
    TypeMismatch,
    TimeMismatch,
    NotReciprocated,
}

impl fmt::Display for MismatchReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MismatchReason::PartnerChainMissing => "partner chain missing",
            MismatchReason::TypeMismatch => "type mismatch",
            MismatchReason::TimeMismatch => "time mismatch",
            MismatchReason::NotReciprocated => "partner does not reciprocate participant",
        })
    }
}

fn within(a: MinuteOfDay, b: MinuteOfDay, tolerance: u16) -> bool {
    (a.minutes() as i32 - b.minutes() as i32).unsigned_abs() <= tolerance as u32
}

/// Checks one joint claim of `owner` against the partner's chain: some partner
/// activity must share the type, start and end within `tolerance` minutes, and
/// name `owner` as a participant. Failing conditions are checked in that order.
pub fn match_claim(
    owner: &AgentId,
    claim: &Activity,
    partner_chain: Option<&ActivityChain>,
    tolerance: u16,
) -> Result<(), MismatchReason> {
    let partner = partner_chain.ok_or(MismatchReason::PartnerChainMissing)?;
    let same_type: Vec<&Activity> = partner
        .activities
        .iter()
        .filter(|a| a.activity_type == claim.activity_type)
        .collect();
    if same_type.is_empty() {
        return Err(MismatchReason::TypeMismatch);
    }
    let timed: Vec<&Activity> = same_type
        .into_iter()
        .filter(|a| within(a.start, claim.start, tolerance) && within(a.end, claim.end, tolerance))
        .collect();
    if timed.is_empty() {
        return Err(MismatchReason::TimeMismatch);
    }
    if timed.iter().any(|a| a.participants.contains(owner)) {
        Ok(())
    } else {
        Err(MismatchReason::NotReciprocated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconcilePolicy {
    pub tolerance: u16,
    /// Largest endpoint offset that snapping may close.
    pub snap_window: u16,
    pub regenerate_attempts: u32,
}

impl Default for ReconcilePolicy {
    fn default() -> Self {
        ReconcilePolicy {
            tolerance: DEFAULT_TOLERANCE,
            snap_window: DEFAULT_SNAP_WINDOW,
            regenerate_attempts: DEFAULT_REGENERATE_ATTEMPTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Repair {
    /// An activity of `owner` moved onto the partner's window.
    Snap {
        owner: AgentId,
        activity_index: usize,
        partner: AgentId,
        minutes: u16,
    },
    Regenerate { attempt: u32 },
    /// `partner` stripped from `owner`'s activity.
    Demote {
        owner: AgentId,
        activity_index: usize,
        partner: AgentId,
    },
}

impl Repair {
    pub fn kind(&self) -> &'static str {
        match self {
            Repair::Snap { .. } => "snap",
            Repair::Regenerate { .. } => "regenerate",
            Repair::Demote { .. } => "demote",
        }
    }
}

impl fmt::Display for Repair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Repair::Snap { minutes, .. } => write!(f, "snap {minutes}min"),
            Repair::Regenerate { attempt } => write!(f, "regenerate attempt {attempt}"),
            Repair::Demote { owner, activity_index, partner } => {
                write!(f, "demote {partner} from {owner} activity {}", activity_index + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Issue {
    /// The new chain's activity names a committed member who does not match.
    Claim { index: usize, partner: usize },
    /// A committed member's activity names the new agent and finds no match.
    Anchor { member: usize, index: usize },
}

fn find_issues(chain: &ActivityChain, committed: &[ActivityChain], tol: u16) -> Vec<Issue> {
    let mut issues = Vec::new();
    for (index, a) in chain.activities.iter().enumerate() {
        for p in &a.participants {
            if let Some(partner) = committed.iter().position(|c| &c.owner == p) {
                if match_claim(&chain.owner, a, Some(&committed[partner]), tol).is_err() {
                    issues.push(Issue::Claim { index, partner });
                }
            }
        }
    }
    for (member, c) in committed.iter().enumerate() {
        for (index, a) in c.activities.iter().enumerate() {
            if a.participants.contains(&chain.owner)
                && match_claim(&c.owner, a, Some(chain), tol).is_err()
            {
                issues.push(Issue::Anchor { member, index });
            }
        }
    }
    issues
}

fn offset(a: &Activity, b: &Activity) -> u16 {
    let ds = (a.start.minutes() as i32 - b.start.minutes() as i32).unsigned_abs();
    let de = (a.end.minutes() as i32 - b.end.minutes() as i32).unsigned_abs();
    ds.max(de) as u16
}

/// Index in `chain` of the activity closest to `target` that shares its type,
/// names `partner`, and lies within `window` minutes on both endpoints.
fn snap_candidate(chain: &ActivityChain, target: &Activity, partner: &AgentId, window: u16) -> Option<usize> {
    chain
        .activities
        .iter()
        .enumerate()
        .filter(|(_, a)| {
            a.activity_type == target.activity_type
                && a.participants.contains(partner)
                && offset(a, target) <= window
        })
        .min_by_key(|(i, a)| (offset(a, target), *i))
        .map(|(i, _)| i)
}

fn try_snap(
    chain: &mut ActivityChain,
    index: usize,
    window: &Activity,
    household: &Household,
) -> Option<u16> {
    let minutes = offset(&chain.activities[index], window);
    let mut moved = chain.clone();
    moved.activities[index].start = window.start;
    moved.activities[index].end = window.end;
    if validate_chain(&moved, household).is_empty() {
        *chain = moved;
        Some(minutes)
    } else {
        None
    }
}

fn snap_pass(
    chain: &mut ActivityChain,
    committed: &[ActivityChain],
    household: &Household,
    policy: &ReconcilePolicy,
    log: &mut Vec<Repair>,
) {
    for issue in find_issues(chain, committed, policy.tolerance) {
        // Earlier snaps in this pass may already have fixed this one.
        let still_open = find_issues(chain, committed, policy.tolerance).contains(&issue);
        if !still_open {
            continue;
        }
        let (index, target) = match issue {
            Issue::Claim { index, partner } => {
                let claim = chain.activities[index].clone();
                let partner_chain = &committed[partner];
                let Some(j) = snap_candidate(
                    partner_chain,
                    &claim,
                    &chain.owner,
                    policy.snap_window,
                ) else {
                    continue;
                };
                (index, partner_chain.activities[j].clone())
            }
            Issue::Anchor { member, index } => {
                let source = &committed[member];
                let target = source.activities[index].clone();
                let Some(i) = snap_candidate(chain, &target, &source.owner, policy.snap_window)
                else {
                    continue;
                };
                (i, target)
            }
        };
        let partner = match issue {
            Issue::Claim { partner, .. } => committed[partner].owner.clone(),
            Issue::Anchor { member, .. } => committed[member].owner.clone(),
        };
        if let Some(minutes) = try_snap(chain, index, &target, household) {
            log.push(Repair::Snap {
                owner: chain.owner.clone(),
                activity_index: index,
                partner,
                minutes,
            });
        }
    }
}

/// Repairs the joint claims between a freshly generated `chain` and the
/// already committed members of its household.
///
/// Claims naming members that are not yet generated are left alone; they
/// become anchors for those members. The ladder per round is: snap activities
/// that miss the partner window by at most `snap_window`, then ask
/// `regenerate` for a fresh chain (given the full anchor list and the attempt
/// number) up to `regenerate_attempts` times, then strip every remaining
/// unmatched partner, on either side. `committed` may be modified by demotion.
pub fn reconcile(
    chain: ActivityChain,
    committed: &mut [ActivityChain],
    household: &Household,
    policy: &ReconcilePolicy,
    regenerate: &mut dyn FnMut(&[Anchor], u32) -> Option<ActivityChain>,
) -> (ActivityChain, Vec<Repair>) {
    let mut log = Vec::new();
    let mut current = chain;
    let mut attempt = 0;
    loop {
        snap_pass(&mut current, committed, household, policy, &mut log);
        if find_issues(&current, committed, policy.tolerance).is_empty() {
            return (current, log);
        }
        if attempt >= policy.regenerate_attempts {
            break;
        }
        attempt += 1;
        let anchors = build_context(committed, household, &current.owner).anchors;
        match regenerate(&anchors, attempt) {
            Some(fresh)
                if fresh.owner == current.owner && validate_chain(&fresh, household).is_empty() =>
            {
                log.push(Repair::Regenerate { attempt });
                current = fresh;
            }
            _ => log.push(Repair::Regenerate { attempt }),
        }
    }

    // Demotion only removes participants, so this reaches a fixed point.
    loop {
        let issues = find_issues(&current, committed, policy.tolerance);
        let Some(issue) = issues.first().copied() else {
            break;
        };
        match issue {
            Issue::Claim { index, partner } => {
                let partner_id = committed[partner].owner.clone();
                current.activities[index].participants.remove(&partner_id);
                log.push(Repair::Demote {
                    owner: current.owner.clone(),
                    activity_index: index,
                    partner: partner_id,
                });
            }
            Issue::Anchor { member, index } => {
                committed[member].activities[index]
                    .participants
                    .remove(&current.owner);
                log.push(Repair::Demote {
                    owner: committed[member].owner.clone(),
                    activity_index: index,
                    partner: current.owner.clone(),
                });
            }
        }
    }
    (current, log)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimAudit {
    pub owner: AgentId,
    pub activity_index: usize,
    pub partner: AgentId,
    pub matched: bool,
    pub reason: Option<MismatchReason>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyAudit {
    pub consistent: u64,
    pub inconsistent: u64,
    pub per_claim: Vec<ClaimAudit>,
}

impl ConsistencyAudit {
    pub fn total(&self) -> u64 {
        self.consistent + self.inconsistent
    }

    /// Fraction of consistent claims; 1.0 when there are no claims at all.
    pub fn consistency_rate(&self) -> f64 {
        if self.total() == 0 {
            1.0
        } else {
            self.consistent as f64 / self.total() as f64
        }
    }

    pub fn summary(&self) -> AuditSummary {
        AuditSummary {
            consistent: self.consistent,
            inconsistent: self.inconsistent,
            consistency_rate: self.consistency_rate(),
        }
    }

    /// `owner,activity_index,partner,matched,reason`, one row per claim.
    pub fn write_csv(&self, writer: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["owner", "activity_index", "partner", "matched", "reason"])?;
        for c in &self.per_claim {
            w.write_record([
                c.owner.as_str(),
                &c.activity_index.to_string(),
                c.partner.as_str(),
                if c.matched { "true" } else { "false" },
                &c.reason.map(|r| r.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub consistent: u64,
    pub inconsistent: u64,
    pub consistency_rate: f64,
}

/// Audits every joint claim in a chain store, once per claim from the
/// owner's side. Partners are looked up within the claim's household.
pub fn audit_consistency(records: &[ChainRecord], tolerance: u16) -> ConsistencyAudit {
    let chains: Vec<ActivityChain> = records.iter().map(ChainRecord::to_chain).collect();
    let mut by_member: HashMap<(&str, &str), usize> = HashMap::new();
    for (i, rec) in records.iter().enumerate() {
        by_member.insert((rec.household_id.as_str(), rec.owner.as_str()), i);
    }
    let mut audit = ConsistencyAudit::default();
    for (rec, chain) in records.iter().zip(&chains) {
        for (index, partner) in chain.joint_claims() {
            let partner_chain = by_member
                .get(&(rec.household_id.as_str(), partner.as_str()))
                .map(|&i| &chains[i]);
            let outcome = match_claim(
                &chain.owner,
                &chain.activities[index],
                partner_chain,
                tolerance,
            );
            if outcome.is_ok() {
                audit.consistent += 1;
            } else {
                audit.inconsistent += 1;
            }
            audit.per_claim.push(ClaimAudit {
                owner: chain.owner.clone(),
                activity_index: index,
                partner: partner.clone(),
                matched: outcome.is_ok(),
                reason: outcome.err(),
            });
        }
    }
    audit
}
