//! Canonical chain records and the activity wire schema.
//!
//! An activity on the wire is
//! `{"type":<1..15>,"start":"HH:MM","end":"HH:MM","participants":[ids]}` and a
//! chain-store line is `{"owner":..,"household_id":..,"activities":[..]}`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{Activity, ActivityChain, ActivityType, AgentId, HouseholdId, MinuteOfDay};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireActivity {
    #[serde(rename = "type")]
    pub activity_type: ActivityType,
    pub start: MinuteOfDay,
    pub end: MinuteOfDay,
    #[serde(default)]
    pub participants: Vec<AgentId>,
}

impl From<&Activity> for WireActivity {
    fn from(a: &Activity) -> Self {
        WireActivity {
            activity_type: a.activity_type,
            start: a.start,
            end: a.end,
            participants: a.participants.iter().cloned().collect(),
        }
    }
}

impl From<WireActivity> for Activity {
    fn from(w: WireActivity) -> Self {
        Activity {
            activity_type: w.activity_type,
            start: w.start,
            end: w.end,
            participants: w.participants.into_iter().collect::<BTreeSet<_>>(),
        }
    }
}

// Activities serialize in their wire form.
impl Serialize for Activity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WireActivity::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Activity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        WireActivity::deserialize(d).map(Activity::from)
    }
}

/// One line of the chain store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRecord {
    pub owner: AgentId,
    pub household_id: HouseholdId,
    pub activities: Vec<WireActivity>,
}

impl ChainRecord {
    pub fn from_chain(chain: &ActivityChain, household_id: &HouseholdId) -> Self {
        ChainRecord {
            owner: chain.owner.clone(),
            household_id: household_id.clone(),
            activities: chain.activities.iter().map(WireActivity::from).collect(),
        }
    }

    pub fn to_chain(&self) -> ActivityChain {
        ActivityChain {
            owner: self.owner.clone(),
            activities: self.activities.iter().cloned().map(Activity::from).collect(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("chain record serializes")
    }
}

/// Encodes a chain's activities as the bare wire array an LLM is asked to emit.
pub fn encode_wire_array(chain: &ActivityChain) -> String {
    let wire: Vec<WireActivity> = chain.activities.iter().map(WireActivity::from).collect();
    serde_json::to_string(&wire).expect("wire activities serialize")
}
