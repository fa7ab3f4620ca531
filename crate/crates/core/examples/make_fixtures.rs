//! Regenerates the bundled fixtures.
//!
//! ```text
//! cargo run -p chainsynth --example make_fixtures [OUT_DIR]
//! ```
//!
//! OUT_DIR defaults to the workspace `fixtures/` directory. Output is fully
//! determined by the seeds below.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use chainsynth::roster::write_roster;
use chainsynth::stats::{ingest_diary, write_diary};
use chainsynth::synthetic::{generate_diary, generate_population, DiaryVariant};

const DIARY_SEED: u64 = 2017;
const ROSTER_SEED: u64 = 500;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    fs::create_dir_all(&out)?;

    let diary_people = generate_population(120, 300, DIARY_SEED, "s");
    write_roster(File::create(out.join("diary_roster.csv"))?, &diary_people)?;
    let survey = generate_diary(&diary_people, DiaryVariant::Survey, DIARY_SEED);
    write_diary(BufWriter::new(File::create(out.join("diaries.csv"))?), &survey.chains)?;
    let model = generate_diary(&diary_people, DiaryVariant::Model, DIARY_SEED + 1);
    write_diary(
        BufWriter::new(File::create(out.join("diaries_model.csv"))?),
        &model.chains,
    )?;

    let report = ingest_diary(File::open(out.join("diaries.csv"))?)?;
    report.stats.save(BufWriter::new(File::create(out.join("stats.json"))?))?;

    let roster = generate_population(200, 500, ROSTER_SEED, "g");
    write_roster(File::create(out.join("roster.csv"))?, &roster)?;

    println!(
        "wrote fixtures to {} ({} diary chains, {} roster agents)",
        out.display(),
        report.chains_used,
        roster.iter().map(|h| h.members.len()).sum::<usize>()
    );
    Ok(())
}
