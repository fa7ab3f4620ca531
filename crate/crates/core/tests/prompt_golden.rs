//! Golden prompt files. Regenerate with `UPDATE_GOLDEN=1 cargo test --test prompt_golden`.

mod common;

use std::path::PathBuf;

use chainsynth::household::build_context;
use chainsynth::prompt::{build_prompt, FewShotPool, PromptBundle, Section, FEW_SHOT_K};
use chainsynth::{Activity, ActivityChain, ActivityType};

fn golden_dir() -> PathBuf {
    common::test_fixtures().join("golden")
}

fn check_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}; run with UPDATE_GOLDEN=1", path.display()));
    assert!(expected == actual, "{name} differs from golden file; rerun with UPDATE_GOLDEN=1 if intended");
}

fn spouse_prompt() -> PromptBundle {
    let hh = common::family("g1");
    let head = ActivityChain::new(
        "g1-1",
        vec![
            Activity::new(ActivityType::Home, 0, 450),
            Activity::new(ActivityType::Work, 480, 1020),
            Activity::new(ActivityType::BuyMeals, 1110, 1170).with_participants(["g1-2", "g1-3"]),
            Activity::new(ActivityType::Home, 1190, 1440),
        ],
    );
    let spouse = &hh.members[1];
    let ctx = build_context(&[head], &hh, &spouse.agent_id);
    let stats = common::stats();
    let shots = FewShotPool::builtin().select(spouse, FEW_SHOT_K);
    build_prompt(
        spouse,
        Some(&hh),
        &stats,
        Some("Feedback on chain length: aim for a chain of about 5 activities today."),
        Some(&ctx),
        &shots,
    )
    .unwrap()
}

#[test]
fn spouse_prompt_matches_golden() {
    let p = spouse_prompt();
    check_golden("spouse_system.txt", &p.system_text);
    check_golden("spouse_user.txt", &p.user_text);
}

#[test]
fn first_member_prompt_matches_golden() {
    let hh = common::family("g2");
    let stats = common::stats();
    let head = &hh.members[0];
    let shots = FewShotPool::builtin().select(head, FEW_SHOT_K);
    let p = build_prompt(head, Some(&hh), &stats, None, None, &shots).unwrap();
    check_golden("head_system.txt", &p.system_text);
    check_golden("head_user.txt", &p.user_text);
}

#[test]
fn sections_appear_in_order() {
    let p = spouse_prompt();
    let mut last = 0;
    for s in Section::ORDER {
        let text = p.section(s).unwrap();
        let first_line = text.lines().next().unwrap();
        let at = p.system_text[last..]
            .find(first_line)
            .unwrap_or_else(|| panic!("{s:?} missing or out of order"));
        last += at + first_line.len();
    }
    let feedback = p.section(Section::RagFeedback).unwrap();
    assert!(feedback.contains("g1-1"));
    assert!(p.user_text.contains("Buy meals"));
}
