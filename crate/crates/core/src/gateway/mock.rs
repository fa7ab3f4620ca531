use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Activity, SocioProfile, TAG_STUDENT, TAG_WORKER};
use crate::record::encode_wire_array;
use crate::sampler::{rng_for, sample_day, sample_length, DayDraw, DayInputs};
use crate::stats::{Distribution, ReferenceStats, StatsBundle};

use super::{ChainBackend, GatewayError, GenerationRequest, RawCompletion};

fn default_compliance() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockConfig {
    #[serde(default)]
    pub seed: u64,
    /// Probability that a pre-established joint activity is not honored: the
    /// reply still claims the partner, but at a shifted time.
    #[serde(default)]
    pub hallucination_rate: f64,
    /// Probability that a length target in the guidance is followed.
    #[serde(default = "default_compliance")]
    pub guidance_compliance: f64,
    /// Length-bin distribution used instead of the reference lengths.
    #[serde(default)]
    pub length_bias: Option<Distribution>,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            seed: 0,
            hallucination_rate: 0.0,
            guidance_compliance: default_compliance(),
            length_bias: None,
        }
    }
}

impl MockConfig {
    pub fn check(&self) -> Result<(), GatewayError> {
        for (name, v) in [
            ("hallucination_rate", self.hallucination_rate),
            ("guidance_compliance", self.guidance_compliance),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(GatewayError::Config(format!("{name} {v} outside [0, 1]")));
            }
        }
        if let Some(bias) = &self.length_bias {
            bias.check()
                .map_err(|e| GatewayError::Config(format!("length_bias: {e}")))?;
        }
        Ok(())
    }
}

/// Deterministic sampler standing in for an LLM. Output depends only on the
/// seed, the agent id, the attempt and regeneration numbers, and the
/// structured request inputs.
#[derive(Debug, Clone)]
pub struct MockBackend {
    config: MockConfig,
    stats: Arc<ReferenceStats>,
}

impl MockBackend {
    pub fn new(config: MockConfig, stats: Arc<ReferenceStats>) -> Result<Self, GatewayError> {
        config.check()?;
        Ok(MockBackend { config, stats })
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    fn bundle_for(&self, profile: &SocioProfile) -> &StatsBundle {
        let tags = profile.group_tags();
        [TAG_WORKER, TAG_STUDENT]
            .iter()
            .filter(|t| tags.contains(t))
            .find_map(|t| self.stats.per_group.get(*t))
            .unwrap_or(&self.stats.overall)
    }

    pub fn draw(&self, req: &GenerationRequest<'_>) -> DayDraw {
        let profile = req.profile;
        let attempt = req.attempt.to_string();
        let regen = req.regeneration.to_string();
        let mut rng = rng_for(
            self.config.seed,
            &[profile.agent_id.as_str(), &attempt, &regen],
        );
        let bundle = self.bundle_for(profile);

        let guided = req
            .guidance
            .and_then(|g| g.target_length())
            .filter(|_| rng.random_bool(self.config.guidance_compliance));
        let length = match guided {
            Some(n) => n,
            None => {
                let dist = self.config.length_bias.as_ref().unwrap_or(&bundle.length_dist);
                sample_length(&mut rng, dist.probabilities())
            }
        };

        let anchors = req.context.map(|c| c.anchors.as_slice()).unwrap_or_default();
        let booked: Vec<Activity> = req
            .context
            .map(|c| c.member_summaries.iter().flat_map(|m| m.activities.iter().cloned()).collect())
            .unwrap_or_default();
        let joint = &self.stats.overall;
        sample_day(
            &mut rng,
            &DayInputs {
                profile,
                household: req.household,
                bundle,
                length,
                anchors,
                booked: &booked,
                hallucination_rate: self.config.hallucination_rate,
            },
            |pair, t| joint.joint_rate(pair, t).unwrap_or(0.0),
        )
    }
}

impl ChainBackend for MockBackend {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<RawCompletion, GatewayError> {
        let draw = self.draw(req);
        Ok(RawCompletion {
            text: encode_wire_array(&draw.chain),
            usage: None,
            latency: Duration::ZERO,
            attempts: 1,
        })
    }
}
