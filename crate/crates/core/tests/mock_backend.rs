mod common;

use std::sync::Arc;

use chainsynth::feedback::Guidance;
use chainsynth::gateway::{ChainBackend, GenerationRequest, MockBackend, MockConfig};
use chainsynth::household::{build_context, match_claim, MismatchReason};
use chainsynth::prompt::{build_prompt, FewShotPool, FEW_SHOT_K};
use chainsynth::synthetic::point_mass_length;
use chainsynth::{chain_length, Activity, ActivityChain, ActivityType};

fn head_chain(hid: &str) -> ActivityChain {
    let spouse = format!("{hid}-2");
    ActivityChain::new(
        format!("{hid}-1"),
        vec![
            Activity::new(ActivityType::Home, 0, 480),
            Activity::new(ActivityType::Work, 510, 1020),
            Activity::new(ActivityType::BuyMeals, 1080, 1140).with_participants([spouse.as_str()]),
            Activity::new(ActivityType::Recreational, 1170, 1260).with_participants([spouse.as_str()]),
            Activity::new(ActivityType::Home, 1290, 1440),
        ],
    )
}

#[test]
fn phantom_fraction_tracks_hallucination_rate() {
    let stats = Arc::new(common::stats());
    let hh = common::family("m1");
    let committed = vec![head_chain("m1")];
    let spouse = &hh.members[1];
    let ctx = build_context(&committed, &hh, &spouse.agent_id);
    assert_eq!(ctx.anchors.len(), 2);
    let shots = FewShotPool::builtin().select(spouse, FEW_SHOT_K);
    let prompt = build_prompt(spouse, Some(&hh), &stats, None, Some(&ctx), &shots).unwrap();

    let h = 0.3;
    let (mut honored, mut phantom, mut failed_claims) = (0usize, 0usize, 0usize);
    for seed in 0..1500u64 {
        let mock = MockBackend::new(
            MockConfig {
                seed,
                hallucination_rate: h,
                ..MockConfig::default()
            },
            stats.clone(),
        )
        .unwrap();
        let req = GenerationRequest {
            prompt: &prompt,
            profile: spouse,
            household: &hh,
            guidance: None,
            context: Some(&ctx),
            attempt: 0,
            regeneration: 0,
        };
        let draw = mock.draw(&req);
        honored += draw.anchors_honored;
        phantom += draw.anchors_phantom;
        // A phantom still names the head, but at a time the head's chain lacks.
        for (i, p) in draw.chain.joint_claims() {
            if p == &committed[0].owner {
                if let Err(r) = match_claim(&spouse.agent_id, &draw.chain.activities[i], Some(&committed[0]), 15) {
                    assert_eq!(r, MismatchReason::TimeMismatch);
                    failed_claims += 1;
                }
            }
        }
    }
    let rate = phantom as f64 / (honored + phantom) as f64;
    assert!((rate - h).abs() <= 0.03, "phantom rate {rate}");
    assert_eq!(failed_claims, phantom);
}

#[test]
fn mock_is_deterministic_and_seed_sensitive() {
    let stats = Arc::new(common::stats());
    let hh = common::family("m2");
    let p = &hh.members[0];
    let shots = FewShotPool::builtin().select(p, FEW_SHOT_K);
    let prompt = build_prompt(p, Some(&hh), &stats, None, None, &shots).unwrap();
    let req = GenerationRequest {
        prompt: &prompt,
        profile: p,
        household: &hh,
        guidance: None,
        context: None,
        attempt: 0,
        regeneration: 0,
    };
    let mk = |seed| MockBackend::new(MockConfig { seed, ..MockConfig::default() }, stats.clone()).unwrap();
    let a = mk(1).generate(&req).unwrap().text;
    assert_eq!(a, mk(1).generate(&req).unwrap().text);
    let differs = (2..20).any(|s| mk(s).generate(&req).unwrap().text != a);
    assert!(differs);
    let retry = GenerationRequest { attempt: 1, ..req };
    let b = mk(1).generate(&retry).unwrap().text;
    let c = mk(1).generate(&retry).unwrap().text;
    assert_eq!(b, c);
}

#[test]
fn compliant_mock_follows_length_guidance() {
    let stats = Arc::new(common::stats());
    let hh = common::family("m3");
    let p = &hh.members[0];
    let shots = FewShotPool::builtin().select(p, FEW_SHOT_K);
    let prompt = build_prompt(p, Some(&hh), &stats, None, None, &shots).unwrap();
    let mock = MockBackend::new(
        MockConfig {
            seed: 3,
            length_bias: Some(point_mass_length(3)),
            ..MockConfig::default()
        },
        stats,
    )
    .unwrap();
    for target in [3usize, 5, 7] {
        let g = Guidance::TargetLength {
            length: target,
            overflow: false,
        };
        let req = GenerationRequest {
            prompt: &prompt,
            profile: p,
            household: &hh,
            guidance: Some(&g),
            context: None,
            attempt: 0,
            regeneration: 0,
        };
        assert_eq!(chain_length(&mock.draw(&req).chain), target);
    }
}
