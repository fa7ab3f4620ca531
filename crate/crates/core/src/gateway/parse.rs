use std::collections::BTreeSet;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::domain::{
    validate_chain, Activity, ActivityChain, ActivityType, AgentId, Household, MinuteOfDay,
    Relationship, Violation,
};

/// Why a reply could not be turned into a chain. `Display` is the stable,
/// machine-readable reason fed back into retry prompts.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no JSON array of activities found")]
    NoArray,
    #[error("{0}")]
    Schema(String),
    #[error("{}", join_violations(.0))]
    Semantic(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ParseError {
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::NoArray => "not_parseable",
            ParseError::Schema(_) => "schema",
            ParseError::Semantic(_) => "semantic",
        }
    }
}

fn looks_like_chain(v: &Value) -> bool {
    match v.as_array() {
        Some(items) => items.first().is_none_or(Value::is_object),
        None => false,
    }
}

/// The first well-formed JSON array in `text` whose elements are objects.
/// An empty array counts only when it is the first `[` in the text, so the
/// `[]` of a truncated reply's participant list is not mistaken for a chain.
/// Surrounding prose and code fences are ignored.
pub fn extract_array(text: &str) -> Option<Vec<Value>> {
    for (n, (i, _)) in text.match_indices('[').enumerate() {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(v)) = stream.next() {
            let empty = v.as_array().is_some_and(Vec::is_empty);
            if looks_like_chain(&v) && (n == 0 || !empty) {
                return match v {
                    Value::Array(items) => Some(items),
                    _ => None,
                };
            }
        }
    }
    None
}

fn field<'a>(obj: &'a Map<String, Value>, n: usize, name: &str) -> Result<&'a Value, ParseError> {
    obj.get(name)
        .ok_or_else(|| ParseError::Schema(format!("activity {n} missing field '{name}'")))
}

fn time_field(obj: &Map<String, Value>, n: usize, name: &str) -> Result<MinuteOfDay, ParseError> {
    let v = field(obj, n, name)?;
    let s = v
        .as_str()
        .ok_or_else(|| ParseError::Schema(format!("activity {n} field '{name}' must be an HH:MM string")))?;
    s.parse::<MinuteOfDay>()
        .map_err(|_| ParseError::Schema(format!("activity {n} field '{name}' is not a valid HH:MM time: '{s}'")))
}

fn resolve_participant(
    raw: &str,
    household: &Household,
    owner: &AgentId,
) -> Option<AgentId> {
    let id = AgentId::new(raw.trim());
    if household.contains(&id) {
        return Some(id);
    }
    // Relationship labels resolve when they name exactly one other member.
    let rel: Relationship = raw.trim().parse().ok()?;
    let mut matches = household
        .members
        .iter()
        .filter(|m| m.household_relationship == rel && &m.agent_id != owner);
    let first = matches.next()?;
    matches.next().is_none().then(|| first.agent_id.clone())
}

fn parse_activity(
    value: &Value,
    n: usize,
    household: &Household,
    owner: &AgentId,
) -> Result<Activity, ParseError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ParseError::Schema(format!("activity {n} is not an object")))?;
    let code = field(obj, n, "type")?
        .as_i64()
        .ok_or_else(|| ParseError::Schema(format!("activity {n} field 'type' must be an integer")))?;
    let activity_type =
        ActivityType::from_code(code).map_err(|e| ParseError::Schema(e.to_string()))?;
    let start = time_field(obj, n, "start")?;
    let end = time_field(obj, n, "end")?;
    let mut participants = BTreeSet::new();
    match obj.get("participants") {
        None | Some(Value::Null) => {}
        Some(Value::Array(items)) => {
            for item in items {
                let raw = item.as_str().ok_or_else(|| {
                    ParseError::Schema(format!("activity {n} participants must be strings"))
                })?;
                let id = resolve_participant(raw, household, owner)
                    .unwrap_or_else(|| AgentId::new(raw.trim()));
                if &id != owner {
                    participants.insert(id);
                }
            }
        }
        Some(_) => {
            return Err(ParseError::Schema(format!(
                "activity {n} field 'participants' must be a list"
            )))
        }
    }
    Ok(Activity {
        activity_type,
        start,
        end,
        participants,
    })
}

/// Turns a model reply into a validated chain for `owner`.
///
/// Participants may be given as member ids or as relationship labels that
/// identify a single member; the owner listing themself is dropped.
pub fn parse_completion(
    text: &str,
    household: &Household,
    owner: &AgentId,
) -> Result<ActivityChain, ParseError> {
    let items = extract_array(text).ok_or(ParseError::NoArray)?;
    let activities = items
        .iter()
        .enumerate()
        .map(|(i, v)| parse_activity(v, i + 1, household, owner))
        .collect::<Result<Vec<_>, _>>()?;
    let chain = ActivityChain::new(owner.clone(), activities);
    let violations = validate_chain(&chain, household);
    if violations.is_empty() {
        Ok(chain)
    } else {
        Err(ParseError::Semantic(violations))
    }
}
