//! Prompt assembly.
//!
//! The system prompt has five labelled sections (task, statistics, guidelines,
//! few-shot examples, retrieval feedback) followed by the output-format
//! contract. Templates live in `templates/<version>/` and use `{{name}}`
//! placeholders. Rendering is deterministic: identical inputs give
//! byte-identical prompts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ActivityType, AgentId, Household, SocioProfile, TAG_STUDENT, TAG_WORKER};
use crate::household::HouseholdContext;
use crate::stats::histogram::HistogramKind;
use crate::stats::reference::{ObservedChain, RelationPair, ReferenceStats};
use crate::stats::Diary;

pub const TEMPLATE_VERSION: &str = "v1";
pub const NO_FEEDBACK: &str = "no feedback available";
pub const FEW_SHOT_K: usize = 3;
pub const MIN_FEW_SHOT: usize = 2;

const SYSTEM_TEMPLATE: &str = include_str!("../templates/v1/system.txt");
const TASK_TEXT: &str = include_str!("../templates/v1/task.txt");
const GUIDELINES_TEXT: &str = include_str!("../templates/v1/guidelines.txt");
const OUTPUT_FORMAT_TEXT: &str = include_str!("../templates/v1/output_format.txt");
const USER_TEMPLATE: &str = include_str!("../templates/v1/user.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("at least {MIN_FEW_SHOT} few-shot examples are required, got {0}")]
    TooFewExamples(usize),
    #[error("template placeholder {{{{{0}}}}} left unfilled")]
    UnfilledPlaceholder(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Task,
    Statistics,
    Guidelines,
    FewShot,
    RagFeedback,
}

impl Section {
    pub const ORDER: [Section; 5] = [
        Section::Task,
        Section::Statistics,
        Section::Guidelines,
        Section::FewShot,
        Section::RagFeedback,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub sections: Vec<(Section, String)>,
}

impl PromptBundle {
    pub fn section(&self, s: Section) -> Option<&str> {
        self.sections
            .iter()
            .find(|(k, _)| *k == s)
            .map(|(_, v)| v.as_str())
    }

    /// Whitespace-split token proxy over system and user text.
    pub fn token_estimate(&self) -> usize {
        self.system_text.split_whitespace().count() + self.user_text.split_whitespace().count()
    }

    /// Same bundle with a corrective note appended to the user message.
    pub fn with_retry_note(&self, reason: &str) -> PromptBundle {
        let mut b = self.clone();
        b.user_text.push_str(&format!(
            "\n\nYour previous reply was rejected ({reason}). Reply again with only the JSON array."
        ));
        b
    }

    /// Same bundle with an explicit request to honor anchors, used when
    /// regenerating a chain whose joint claims did not line up.
    pub fn with_anchor_note(&self, anchors: &[crate::household::Anchor]) -> PromptBundle {
        let mut b = self.clone();
        if !anchors.is_empty() {
            let lines: Vec<String> = anchors.iter().map(|a| format!("- {}", a.describe())).collect();
            b.user_text.push_str(&format!(
                "\n\nThe previous chain did not match the household schedule. It must contain exactly these joint activities:\n{}",
                lines.join("\n")
            ));
        } else {
            b.user_text.push_str(
                "\n\nThe previous chain named household members in activities they do not share. Only list participants for activities they also have.",
            );
        }
        b
    }
}

fn fill(template: &str, values: &BTreeMap<&str, String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() + 512);
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after
            .find("}}")
            .ok_or_else(|| PromptError::UnfilledPlaceholder(after.chars().take(20).collect()))?;
        let name = &after[..close];
        let value = values
            .get(name)
            .ok_or_else(|| PromptError::UnfilledPlaceholder(name.to_string()))?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// One natural-language paragraph naming all nine attributes.
pub fn render_profile(p: &SocioProfile) -> String {
    let license = if p.has_driver_license {
        "holds a driver license"
    } else {
        "does not hold a driver license"
    };
    format!(
        "The agent is {} years old. Gender: {}. Education level: {}. Student status: {}. Employment status: {}. Household relationship: {}. Income level: {}. The agent {}. Location: {}.",
        p.age,
        p.gender,
        p.education,
        p.student_status.label(),
        p.employment_status.label(),
        p.household_relationship.label(),
        p.income_level,
        license,
        p.location_descriptor
    )
}

fn pct(x: f64) -> u32 {
    (x * 100.0).round() as u32
}

fn modal_bin(counts: &[u64]) -> Option<usize> {
    let max = *counts.iter().max()?;
    (max > 0).then(|| counts.iter().position(|&c| c == max).expect("max present"))
}

/// Verbalized statistics: type shares, typical timing per type, and joint
/// participation rates, all rounded to whole percent.
pub fn render_statistics(stats: &ReferenceStats) -> String {
    let o = &stats.overall;
    let mut lines = Vec::new();

    let shares: Vec<String> = ActivityType::ALL
        .iter()
        .filter_map(|&t| {
            let p = pct(o.type_dist.get(t.index()));
            (p >= 1).then(|| format!("{t} {p}%"))
        })
        .collect();
    lines.push(format!("Activity type frequencies: {}.", shares.join(", ")));

    let mut timing = Vec::new();
    for &t in &ActivityType::ALL {
        let tt = o.timing(t);
        if tt.start_hist.total() == 0 || pct(o.type_dist.get(t.index())) < 1 {
            continue;
        }
        let (Some(sb), Some(db)) = (modal_bin(&tt.start_hist.counts), modal_bin(&tt.duration_hist.counts))
        else {
            continue;
        };
        timing.push(format!(
            "{t} usually starts {:02}:00-{:02}:00 and lasts {} min",
            sb,
            (sb + 1) % 24,
            HistogramKind::Duration.label(db)
        ));
    }
    lines.push(format!("Typical timing: {}.", timing.join("; ")));

    let mut joint = Vec::new();
    for pair in [RelationPair::HeadSpouse, RelationPair::HeadChild] {
        let (a, b) = pair.roles().expect("specific pair");
        let parts: Vec<String> = ActivityType::ALL
            .iter()
            .filter_map(|&t| {
                let r = o.joint_rate(pair, t)?;
                (pct(r) >= 1).then(|| format!("{t} {}%", pct(r)))
            })
            .collect();
        if !parts.is_empty() {
            joint.push(format!("{a} with {b}: {}", parts.join(", ")));
        }
    }
    if joint.is_empty() {
        lines.push("Household coordination probabilities: joint activities are rare.".into());
    } else {
        lines.push(format!(
            "Household coordination probabilities (share of activities done together): {}.",
            joint.join("; ")
        ));
    }
    lines.join("\n")
}

/// A reference chain rendered for the few-shot section, with participants
/// written as relationship labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub group: String,
    pub text: String,
}

/// Slice group used to pick few-shot examples: student, worker or other.
pub fn example_group(tags: &[&str]) -> &'static str {
    if tags.contains(&TAG_STUDENT) {
        TAG_STUDENT
    } else if tags.contains(&TAG_WORKER) {
        TAG_WORKER
    } else {
        "other"
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FewShotPool {
    examples: Vec<FewShotExample>,
}

impl FewShotPool {
    pub fn new(examples: Vec<FewShotExample>) -> Self {
        FewShotPool { examples }
    }

    pub fn from_diary(diary: &Diary) -> Self {
        let examples = diary
            .chains
            .iter()
            .map(|obs| FewShotExample {
                group: example_group(&obs.tags.iter().map(String::as_str).collect::<Vec<_>>())
                    .to_string(),
                text: render_example(obs, |id| {
                    diary
                        .roles
                        .role(&obs.household_id, id)
                        .map(|r| r.label().to_string())
                }),
            })
            .collect();
        FewShotPool { examples }
    }

    /// Two canonical chains, used when no reference diary is available.
    pub fn builtin() -> Self {
        FewShotPool {
            examples: vec![
                FewShotExample {
                    group: TAG_WORKER.into(),
                    text: r#"[{"type":1,"start":"00:00","end":"07:40","participants":[]},{"type":2,"start":"08:15","end":"17:05","participants":[]},{"type":5,"start":"17:30","end":"18:05","participants":[]},{"type":1,"start":"18:25","end":"24:00","participants":[]}]"#.into(),
                },
                FewShotExample {
                    group: "other".into(),
                    text: r#"[{"type":1,"start":"00:00","end":"10:10","participants":[]},{"type":12,"start":"10:30","end":"11:20","participants":[]},{"type":7,"start":"18:30","end":"19:30","participants":["spouse"]},{"type":1,"start":"19:45","end":"24:00","participants":[]}]"#.into(),
                },
                FewShotExample {
                    group: TAG_STUDENT.into(),
                    text: r#"[{"type":1,"start":"00:00","end":"07:35","participants":[]},{"type":3,"start":"07:50","end":"15:00","participants":[]},{"type":9,"start":"15:30","end":"17:00","participants":[]},{"type":1,"start":"17:15","end":"24:00","participants":[]}]"#.into(),
                },
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// First `k` examples of the profile's group, topped up from the start of
    /// the pool when the group has fewer than [`MIN_FEW_SHOT`].
    pub fn select(&self, profile: &SocioProfile, k: usize) -> Vec<FewShotExample> {
        let group = example_group(&profile.group_tags());
        let mut picked: Vec<FewShotExample> = self
            .examples
            .iter()
            .filter(|e| e.group == group)
            .take(k)
            .cloned()
            .collect();
        if picked.len() < MIN_FEW_SHOT {
            for e in &self.examples {
                if picked.len() >= MIN_FEW_SHOT.max(k.min(self.examples.len())) {
                    break;
                }
                if !picked.contains(e) {
                    picked.push(e.clone());
                }
            }
        }
        picked
    }
}

fn render_example(obs: &ObservedChain, role: impl Fn(&AgentId) -> Option<String>) -> String {
    let items: Vec<serde_json::Value> = obs
        .chain
        .activities
        .iter()
        .map(|a| {
            let participants: Vec<String> = a
                .participants
                .iter()
                .map(|p| role(p).unwrap_or_else(|| "member".into()))
                .collect();
            serde_json::json!({
                "type": a.activity_type.code(),
                "start": a.start.hhmm(),
                "end": a.end.hhmm(),
                "participants": participants,
            })
        })
        .collect();
    // serde_json sorts object keys; rebuild in wire order.
    let parts: Vec<String> = items
        .iter()
        .map(|v| {
            format!(
                r#"{{"type":{},"start":{},"end":{},"participants":{}}}"#,
                v["type"], v["start"], v["end"], v["participants"]
            )
        })
        .collect();
    format!("[{}]", parts.join(","))
}

fn render_members(household: Option<&Household>, owner: &AgentId) -> String {
    match household {
        None => "none listed".into(),
        Some(hh) => {
            let parts: Vec<String> = hh
                .members
                .iter()
                .filter(|m| &m.agent_id != owner)
                .map(|m| format!("{} ({}, age {})", m.agent_id, m.household_relationship, m.age))
                .collect();
            if parts.is_empty() {
                "none (lives alone)".into()
            } else {
                parts.join(", ")
            }
        }
    }
}

/// Assembles the system and user messages for one agent.
pub fn build_prompt(
    profile: &SocioProfile,
    household: Option<&Household>,
    stats: &ReferenceStats,
    guidance: Option<&str>,
    household_context: Option<&HouseholdContext>,
    few_shot: &[FewShotExample],
) -> Result<PromptBundle, PromptError> {
    if few_shot.len() < MIN_FEW_SHOT {
        return Err(PromptError::TooFewExamples(few_shot.len()));
    }
    let task = TASK_TEXT.trim_end().to_string();
    let statistics = render_statistics(stats);
    let guidelines = GUIDELINES_TEXT.trim_end().to_string();
    let few_shot_text = few_shot
        .iter()
        .enumerate()
        .map(|(i, e)| format!("Example {} ({}):\n{}", i + 1, e.group, e.text))
        .collect::<Vec<_>>()
        .join("\n");
    let mut feedback_parts = Vec::new();
    if let Some(g) = guidance {
        feedback_parts.push(g.to_string());
    }
    if let Some(ctx) = household_context {
        feedback_parts.push(ctx.render());
    }
    let rag_feedback = if feedback_parts.is_empty() {
        NO_FEEDBACK.to_string()
    } else {
        feedback_parts.join("\n")
    };

    let sections = vec![
        (Section::Task, task),
        (Section::Statistics, statistics),
        (Section::Guidelines, guidelines),
        (Section::FewShot, few_shot_text),
        (Section::RagFeedback, rag_feedback),
    ];
    let mut values: BTreeMap<&str, String> = BTreeMap::new();
    for (s, text) in &sections {
        let key = match s {
            Section::Task => "task",
            Section::Statistics => "statistics",
            Section::Guidelines => "guidelines",
            Section::FewShot => "few_shot",
            Section::RagFeedback => "rag_feedback",
        };
        values.insert(key, text.clone());
    }
    values.insert("output_format", OUTPUT_FORMAT_TEXT.trim_end().to_string());
    let system_text = fill(SYSTEM_TEMPLATE, &values)?.trim_end().to_string();

    let alignment = match household_context {
        Some(ctx) if !ctx.anchors.is_empty() => {
            let lines: Vec<String> = ctx
                .anchors
                .iter()
                .map(|a| {
                    let ids: Vec<String> = a
                        .required_participants
                        .iter()
                        .map(|p| format!("\"{p}\""))
                        .collect();
                    format!(
                        "- include a {} activity from {} to {} with participants [{}]",
                        a.activity_type,
                        a.start,
                        a.end,
                        ids.join(", ")
                    )
                })
                .collect();
            format!(
                "Align with the household's pre-established joint activities:\n{}\n",
                lines.join("\n")
            )
        }
        _ => String::new(),
    };
    let mut user_values: BTreeMap<&str, String> = BTreeMap::new();
    user_values.insert("agent_id", profile.agent_id.to_string());
    user_values.insert("profile", render_profile(profile));
    user_values.insert("members", render_members(household, &profile.agent_id));
    user_values.insert("alignment", alignment);
    let user_text = fill(USER_TEMPLATE, &user_values)?.trim_end().to_string();

    Ok(PromptBundle {
        system_text,
        user_text,
        sections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{EmploymentStatus, Relationship, StudentStatus};

    pub(crate) fn sample_profile() -> SocioProfile {
        SocioProfile {
            agent_id: "p1".into(),
            gender: "female".into(),
            age: 34,
            education: "bachelor".into(),
            student_status: StudentStatus::NonStudent,
            employment_status: EmploymentStatus::Employed,
            household_relationship: Relationship::Head,
            income_level: "mid income".into(),
            has_driver_license: true,
            location_descriptor: "Los Angeles County".into(),
        }
    }

    #[test]
    fn profile_names_all_attributes() {
        let text = render_profile(&sample_profile());
        for v in [
            "female",
            "34",
            "bachelor",
            "non-student",
            "employed",
            "head",
            "mid income",
            "holds a driver license",
            "Los Angeles County",
        ] {
            assert!(text.contains(v), "missing {v} in {text}");
        }
        assert_eq!(text, render_profile(&sample_profile()));
    }

    #[test]
    fn profiles_differing_in_age_differ_only_in_age_clause() {
        let a = render_profile(&sample_profile());
        let mut p = sample_profile();
        p.age = 35;
        let b = render_profile(&p);
        assert_ne!(a, b);
        assert_eq!(a.replace("34 years", "35 years"), b);
    }

    #[test]
    fn child_without_license() {
        let mut p = sample_profile();
        p.age = 9;
        p.household_relationship = Relationship::Child;
        p.has_driver_license = false;
        p.student_status = StudentStatus::Student;
        assert!(render_profile(&p).contains("does not hold a driver license"));
    }

    #[test]
    fn fill_rejects_unknown_placeholder() {
        let values = BTreeMap::new();
        assert_eq!(
            fill("a {{x}} b", &values),
            Err(PromptError::UnfilledPlaceholder("x".into()))
        );
        let mut values = BTreeMap::new();
        values.insert("x", "1".to_string());
        assert_eq!(fill("a {{x}} b {json}", &values).unwrap(), "a 1 b {json}");
    }

    #[test]
    fn pool_selection_prefers_group_then_tops_up() {
        let pool = FewShotPool::builtin();
        let mut p = sample_profile();
        let picked = pool.select(&p, 3);
        assert_eq!(picked.len(), 3);
        assert_eq!(picked[0].group, "worker");
        p.student_status = StudentStatus::Student;
        p.employment_status = EmploymentStatus::NotInLaborForce;
        assert_eq!(pool.select(&p, 3)[0].group, "student");
    }
}
