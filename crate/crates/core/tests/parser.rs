mod common;

use std::collections::BTreeSet;

use chainsynth::gateway::parse_completion;
use chainsynth::record::encode_wire_array;
use chainsynth::{Activity, ActivityChain, ActivityType, AgentId};
use proptest::prelude::*;

#[derive(Debug, serde::Deserialize)]
struct Expected {
    file: String,
    outcome: String,
    detail: String,
}

fn expectations() -> Vec<Expected> {
    let path = common::test_fixtures().join("replies/expected.csv");
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn reply_corpus_outcomes_are_stable() {
    let hh = common::family("h1");
    let owner = AgentId::new("h1-1");
    let expected = expectations();
    assert_eq!(expected.len(), 20);
    for e in &expected {
        let text = std::fs::read_to_string(common::test_fixtures().join("replies").join(&e.file)).unwrap();
        match parse_completion(&text, &hh, &owner) {
            Ok(chain) => {
                assert_eq!(e.outcome, "ok", "{} parsed but expected {}", e.file, e.outcome);
                assert_eq!(chain.len().to_string(), e.detail, "{}", e.file);
                assert!(chainsynth::validate_chain(&chain, &hh).is_empty());
            }
            Err(err) => {
                assert_eq!(err.kind(), e.outcome, "{}: {err}", e.file);
                assert_eq!(err.to_string(), e.detail, "{}", e.file);
            }
        }
    }
}

#[test]
fn participant_labels_and_self_listing() {
    let hh = common::family("h1");
    let owner = AgentId::new("h1-1");
    let read = |f: &str| std::fs::read_to_string(common::test_fixtures().join("replies").join(f)).unwrap();

    let chain = parse_completion(&read("04_role_label.txt"), &hh, &owner).unwrap();
    assert_eq!(
        chain.activities[1].participants,
        BTreeSet::from([AgentId::new("h1-2")])
    );
    let chain = parse_completion(&read("05_self_listed.txt"), &hh, &owner).unwrap();
    assert!(chain.activities[0].participants.is_empty());
    assert_eq!(
        chain.activities[1].participants,
        BTreeSet::from([AgentId::new("h1-3")])
    );
    let chain = parse_completion(&read("09_bracket_prose_first.txt"), &hh, &owner).unwrap();
    assert_eq!(chain.activities[1].activity_type, ActivityType::Religious);
}

prop_compose! {
    fn valid_chain()(
        cuts in proptest::collection::btree_set(1u16..1440, 1..14),
        codes in proptest::collection::vec(1i64..=15, 15),
        joint in proptest::collection::vec(0u8..4, 15),
    ) -> ActivityChain {
        let mut edges: Vec<u16> = vec![0];
        edges.extend(cuts);
        edges.push(1440);
        let activities = edges
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let a = Activity::new(ActivityType::from_code(codes[i]).unwrap(), w[0], w[1]);
                match joint[i] {
                    1 => a.with_participants(["h1-2"]),
                    2 => a.with_participants(["h1-2", "h1-3"]),
                    _ => a,
                }
            })
            .collect();
        ActivityChain::new("h1-1", activities)
    }
}

proptest! {
    #[test]
    fn canonical_encoding_round_trips(chain in valid_chain()) {
        let hh = common::family("h1");
        let text = encode_wire_array(&chain);
        let back = parse_completion(&text, &hh, &chain.owner).unwrap();
        prop_assert_eq!(&back, &chain);
        prop_assert_eq!(encode_wire_array(&back), text);
    }
}
