//! Population roster CSV: one row per agent, grouped into households by
//! `household_id` in first-appearance order.
//!
//! ```text
//! household_id,agent_id,gender,age,education,student_status,employment_status,relationship,income_level,driver_license,location
//! h0001,h0001-1,female,34,bachelor,non-student,employed,head,mid income,true,Los Angeles County
//! ```

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AgentId, DomainError, EmploymentStatus, Household, HouseholdId, Relationship, SocioProfile,
    StudentStatus,
};

#[derive(Debug, Error)]
pub enum RosterError {
    #[error("roster line {line}: {source}")]
    Row { line: u64, source: csv::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Household(#[from] DomainError),
    #[error("agent {0} appears more than once")]
    DuplicateAgent(AgentId),
    #[error("roster is empty")]
    Empty,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RosterRow {
    household_id: HouseholdId,
    agent_id: AgentId,
    gender: String,
    age: u32,
    education: String,
    student_status: StudentStatus,
    employment_status: EmploymentStatus,
    relationship: Relationship,
    income_level: String,
    driver_license: bool,
    location: String,
}

impl RosterRow {
    fn into_parts(self) -> (HouseholdId, SocioProfile) {
        (
            self.household_id,
            SocioProfile {
                agent_id: self.agent_id,
                gender: self.gender,
                age: self.age,
                education: self.education,
                student_status: self.student_status,
                employment_status: self.employment_status,
                household_relationship: self.relationship,
                income_level: self.income_level,
                has_driver_license: self.driver_license,
                location_descriptor: self.location,
            },
        )
    }

    fn from_profile(household_id: &HouseholdId, p: &SocioProfile) -> Self {
        RosterRow {
            household_id: household_id.clone(),
            agent_id: p.agent_id.clone(),
            gender: p.gender.clone(),
            age: p.age,
            education: p.education.clone(),
            student_status: p.student_status,
            employment_status: p.employment_status,
            relationship: p.household_relationship,
            income_level: p.income_level.clone(),
            driver_license: p.has_driver_license,
            location: p.location_descriptor.clone(),
        }
    }
}

pub fn read_roster(reader: impl Read) -> Result<Vec<Household>, RosterError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut order: Vec<Household> = Vec::new();
    let mut index: HashMap<HouseholdId, usize> = HashMap::new();
    let mut seen = std::collections::HashSet::new();
    for (i, row) in rdr.deserialize::<RosterRow>().enumerate() {
        let row = row.map_err(|source| RosterError::Row {
            line: i as u64 + 2,
            source,
        })?;
        let (hid, profile) = row.into_parts();
        if !seen.insert(profile.agent_id.clone()) {
            return Err(RosterError::DuplicateAgent(profile.agent_id));
        }
        let slot = *index.entry(hid.clone()).or_insert_with(|| {
            order.push(Household {
                household_id: hid,
                members: Vec::new(),
            });
            order.len() - 1
        });
        order[slot].members.push(profile);
    }
    if order.is_empty() {
        return Err(RosterError::Empty);
    }
    for hh in &order {
        hh.check()?;
    }
    Ok(order)
}

pub fn write_roster(writer: impl Write, households: &[Household]) -> Result<(), RosterError> {
    let mut w = csv::Writer::from_writer(writer);
    for hh in households {
        for m in &hh.members {
            w.serialize(RosterRow::from_profile(&hh.household_id, m))?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Agent id to profile, across all households.
pub fn profile_index(households: &[Household]) -> HashMap<AgentId, SocioProfile> {
    households
        .iter()
        .flat_map(|h| h.members.iter().map(|m| (m.agent_id.clone(), m.clone())))
        .collect()
}
