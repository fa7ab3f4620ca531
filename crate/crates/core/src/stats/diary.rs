//! Travel-diary CSV ingestion.
//!
//! One row per activity:
//!
//! ```text
//! household_id,agent_id,relationship,group_tags,activity_code,start,end,participants
//! h001,h001-1,head,worker,1,00:00,07:30,
//! h001,h001-1,head,worker,7,18:30,19:30,h001-2
//! ```
//!
//! `group_tags` and `participants` are `;`-separated lists. Rows of one agent
//! form that agent's chain in file order.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::Serialize;

use crate::domain::{
    validate_chain_with, Activity, ActivityChain, ActivityType, AgentId, HouseholdId,
    MinuteOfDay, Relationship,
};
use crate::stats::reference::{aggregate, HouseholdRoles, ObservedChain, ReferenceStats, StatsError};

pub const DIARY_HEADER: [&str; 8] = [
    "household_id",
    "agent_id",
    "relationship",
    "group_tags",
    "activity_code",
    "start",
    "end",
    "participants",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRow {
    /// One-based line number in the file, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedChain {
    pub household_id: HouseholdId,
    pub agent_id: AgentId,
    pub reason: String,
}

/// Parsed diary contents.
#[derive(Debug, Clone, Default)]
pub struct Diary {
    pub chains: Vec<ObservedChain>,
    pub roles: HouseholdRoles,
    pub skipped_rows: Vec<SkippedRow>,
    pub skipped_chains: Vec<SkippedChain>,
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub stats: ReferenceStats,
    pub chains_used: usize,
    pub skipped_rows: Vec<SkippedRow>,
    pub skipped_chains: Vec<SkippedChain>,
}

impl IngestReport {
    pub fn skip_count(&self) -> usize {
        self.skipped_rows.len() + self.skipped_chains.len()
    }
}

struct Row {
    household_id: HouseholdId,
    agent_id: AgentId,
    relationship: Relationship,
    tags: BTreeSet<String>,
    activity: Activity,
}

fn split_list(field: &str) -> impl Iterator<Item = &str> {
    field.split(';').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_row(rec: &csv::StringRecord) -> Result<Row, String> {
    let field = |i: usize| rec.get(i).unwrap_or("").trim();
    if rec.len() != DIARY_HEADER.len() {
        return Err(format!("expected {} fields, found {}", DIARY_HEADER.len(), rec.len()));
    }
    if field(0).is_empty() || field(1).is_empty() {
        return Err("missing household_id or agent_id".into());
    }
    let relationship: Relationship = field(2).parse().map_err(|e| format!("{e}"))?;
    let code: i64 = field(4)
        .parse()
        .map_err(|_| format!("activity_code '{}' is not an integer", field(4)))?;
    let activity_type = ActivityType::from_code(code).map_err(|e| e.to_string())?;
    let start: MinuteOfDay = field(5).parse().map_err(|e| format!("start: {e}"))?;
    let end: MinuteOfDay = field(6).parse().map_err(|e| format!("end: {e}"))?;
    Ok(Row {
        household_id: HouseholdId::new(field(0)),
        agent_id: AgentId::new(field(1)),
        relationship,
        tags: split_list(field(3)).map(String::from).collect(),
        activity: Activity {
            activity_type,
            start,
            end,
            participants: split_list(field(7)).map(AgentId::new).collect(),
        },
    })
}

/// Reads a diary file. Bad rows and structurally invalid chains are skipped
/// and reported; a wrong header is a schema error.
pub fn read_diary(reader: impl Read) -> Result<Diary, StatsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != DIARY_HEADER {
        return Err(StatsError::Schema(format!(
            "expected header '{}', found '{}'",
            DIARY_HEADER.join(","),
            got.join(",")
        )));
    }

    let mut diary = Diary::default();
    // (household, agent) -> index into `pending`, in first-appearance order.
    let mut index: HashMap<(HouseholdId, AgentId), usize> = HashMap::new();
    let mut pending: Vec<ObservedChain> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                diary.skipped_rows.push(SkippedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let row = match parse_row(&rec) {
            Ok(r) => r,
            Err(reason) => {
                diary.skipped_rows.push(SkippedRow { line, reason });
                continue;
            }
        };
        diary
            .roles
            .insert(&row.household_id, &row.agent_id, row.relationship);
        let key = (row.household_id.clone(), row.agent_id.clone());
        let slot = *index.entry(key).or_insert_with(|| {
            pending.push(ObservedChain {
                household_id: row.household_id.clone(),
                relationship: row.relationship,
                tags: row.tags.clone(),
                chain: ActivityChain::new(row.agent_id.clone(), Vec::new()),
            });
            pending.len() - 1
        });
        pending[slot].chain.activities.push(row.activity);
    }

    let members: HashMap<&HouseholdId, BTreeSet<&AgentId>> =
        pending.iter().fold(HashMap::new(), |mut acc, obs| {
            acc.entry(&obs.household_id).or_default().insert(&obs.chain.owner);
            acc
        });
    let mut kept = Vec::with_capacity(pending.len());
    for obs in &pending {
        let roster = &members[&obs.household_id];
        let violations = validate_chain_with(&obs.chain, |id| roster.contains(id));
        if violations.is_empty() {
            kept.push(obs.clone());
        } else {
            diary.skipped_chains.push(SkippedChain {
                household_id: obs.household_id.clone(),
                agent_id: obs.chain.owner.clone(),
                reason: violations
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            });
        }
    }
    diary.chains = kept;
    Ok(diary)
}

pub fn ingest_diary(reader: impl Read) -> Result<IngestReport, StatsError> {
    let diary = read_diary(reader)?;
    if diary.chains.is_empty() {
        return Err(StatsError::NoUsableRecords);
    }
    let stats = aggregate(&diary.chains, &diary.roles)?;
    Ok(IngestReport {
        stats,
        chains_used: diary.chains.len(),
        skipped_rows: diary.skipped_rows,
        skipped_chains: diary.skipped_chains,
    })
}

/// Writes observed chains as diary rows.
pub fn write_diary(writer: impl Write, chains: &[ObservedChain]) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DIARY_HEADER)?;
    for obs in chains {
        let tags = obs.tags.iter().cloned().collect::<Vec<_>>().join(";");
        for a in &obs.chain.activities {
            let participants = a
                .participants
                .iter()
                .map(AgentId::as_str)
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                obs.household_id.as_str(),
                obs.chain.owner.as_str(),
                obs.relationship.label(),
                &tags,
                &a.activity_type.code().to_string(),
                &a.start.hhmm(),
                &a.end.hhmm(),
                &participants,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "household_id,agent_id,relationship,group_tags,activity_code,start,end,participants
h1,a,head,worker,1,00:00,08:00,
h1,a,head,worker,2,08:00,17:00,
h1,a,head,worker,1,17:00,24:00,
h2,b,head,,1,00:00,24:00,
";

    #[test]
    fn two_diaries() {
        let report = ingest_diary(TWO.as_bytes()).unwrap();
        let len = report.stats.length_dist();
        assert_eq!((len.get(0), len.get(2)), (0.5, 0.5));
        assert_eq!(report.stats.type_dist().get(0), 0.75);
        assert_eq!(report.stats.type_dist().get(1), 0.25);
        assert_eq!(report.skip_count(), 0);
    }

    #[test]
    fn empty_and_bad_header() {
        let header_only = DIARY_HEADER.join(",") + "\n";
        assert_eq!(
            ingest_diary(header_only.as_bytes()).unwrap_err().to_string(),
            "no usable records"
        );
        let err = ingest_diary("a,b,c\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, StatsError::Schema(_)));
    }

    #[test]
    fn bad_rows_and_chains_are_skipped() {
        let text = format!(
            "{}\n{}",
            DIARY_HEADER.join(","),
            "h1,a,head,,1,00:00,08:00,
h1,a,head,,16,08:00,09:00,
h1,a,head,,2,08:30,17:00,
h2,b,head,,1,00:00,12:00,
h2,b,head,,5,11:00,13:00,zz
h3,c,head,,1,00:00,24:00,
"
        );
        let report = ingest_diary(text.as_bytes()).unwrap();
        assert_eq!(report.skipped_rows.len(), 1);
        assert_eq!(report.skipped_rows[0].line, 3);
        assert!(report.skipped_rows[0].reason.contains("16"));
        assert_eq!(report.skipped_chains.len(), 1);
        assert_eq!(report.skipped_chains[0].agent_id.as_str(), "b");
        assert_eq!(report.chains_used, 2);
    }
}
