use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use crate::domain::{AgentId, Household};
use crate::sampler::rng_for;

use super::PipelineError;

/// A household selected for generation. Only `sampled` members count toward
/// the requested sample size; the rest ride along because coordination needs
/// complete households.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledHousehold {
    pub household: Household,
    pub sampled: BTreeSet<AgentId>,
}

/// Seeded uniform sample of `n` agents, expanded to their whole households.
/// Households keep roster order.
pub fn sample_agents(
    roster: &[Household],
    n: usize,
    seed: u64,
) -> Result<Vec<SampledHousehold>, PipelineError> {
    let population: usize = roster.iter().map(|h| h.members.len()).sum();
    if n == 0 {
        return Err(PipelineError::Sample("sample size must be at least 1".into()));
    }
    if n > population {
        return Err(PipelineError::Sample(format!(
            "sample size {n} exceeds population of {population} agents"
        )));
    }
    let mut agents: Vec<(usize, &AgentId)> = roster
        .iter()
        .enumerate()
        .flat_map(|(i, h)| h.members.iter().map(move |m| (i, &m.agent_id)))
        .collect();
    let mut rng = rng_for(seed, &["sample"]);
    agents.shuffle(&mut rng);
    let mut picked: Vec<BTreeSet<AgentId>> = vec![BTreeSet::new(); roster.len()];
    for (i, id) in agents.into_iter().take(n) {
        picked[i].insert(id.clone());
    }
    Ok(roster
        .iter()
        .zip(picked)
        .filter(|(_, s)| !s.is_empty())
        .map(|(h, sampled)| SampledHousehold {
            household: h.clone(),
            sampled,
        })
        .collect())
}

/// Every household, every member sampled.
pub fn whole_roster(roster: &[Household]) -> Vec<SampledHousehold> {
    roster
        .iter()
        .map(|h| SampledHousehold {
            household: h.clone(),
            sampled: h.members.iter().map(|m| m.agent_id.clone()).collect(),
        })
        .collect()
}
