//! Seeded day sampler: draws activity types and timing from reference
//! statistics and lays them out as a valid single-day chain around a set of
//! fixed windows. Shared by the mock backend and the synthetic fixtures.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{
    Activity, ActivityChain, ActivityType, Household, MinuteOfDay, SocioProfile, MINUTES_PER_DAY,
    TAG_STUDENT, TAG_WORKER,
};
use crate::household::Anchor;
use crate::stats::histogram::{length_of_bin, LENGTH_BINS};
use crate::stats::{RelationPair, StatsBundle};

/// Sampled times fall on this grid (minutes).
pub const GRID: u16 = 5;
/// Earliest start of the first out-of-home activity.
pub const DAY_OPEN: u16 = 15;
/// Latest end of the last out-of-home activity.
pub const DAY_CLOSE: u16 = 1425;
const MIN_DURATION: u16 = 10;
const MIN_GAP: u16 = 5;
/// Probability that a worker's (student's) first out-of-home activity is Work
/// (School).
const PRIMARY_ACTIVITY_RATE: f64 = 0.9;

/// FNV-1a over the seed and the given parts, separated so that
/// `["ab","c"]` and `["a","bc"]` differ.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    };
    feed(&seed.to_le_bytes());
    for p in parts {
        feed(&[0xff]);
        feed(p.as_bytes());
    }
    h
}

pub fn rng_for(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, parts))
}

/// Index drawn proportionally to `weights`; `None` if all are zero.
pub fn sample_weighted<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    WeightedIndex::new(weights).ok().map(|w| w.sample(rng))
}

fn sample_counts<R: Rng + ?Sized>(rng: &mut R, counts: &[u64]) -> Option<usize> {
    let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    sample_weighted(rng, &w)
}

/// Chain length drawn from a length-bin distribution. The overflow bin
/// yields 13 to 15.
pub fn sample_length<R: Rng + ?Sized>(rng: &mut R, probabilities: &[f64]) -> usize {
    match sample_weighted(rng, probabilities) {
        Some(bin) if bin + 1 == LENGTH_BINS => length_of_bin(bin) + rng.random_range(0..3),
        Some(bin) => length_of_bin(bin),
        None => 1,
    }
}

/// Out-of-home activity type drawn from the bundle's type frequencies.
/// Home and the `exclude`d types are never drawn.
pub fn sample_type<R: Rng + ?Sized>(
    rng: &mut R,
    bundle: &StatsBundle,
    exclude: &[ActivityType],
) -> ActivityType {
    let weights = |src: &[u64]| -> Vec<f64> {
        ActivityType::ALL
            .iter()
            .map(|t| {
                if *t == ActivityType::Home || exclude.contains(t) {
                    0.0
                } else {
                    src[t.index()] as f64
                }
            })
            .collect()
    };
    let w = weights(&bundle.type_hist.counts);
    let idx = sample_weighted(rng, &w).unwrap_or_else(|| {
        let flat = weights(&[1; ActivityType::COUNT]);
        sample_weighted(rng, &flat).expect("at least one type allowed")
    });
    ActivityType::ALL[idx]
}

/// An out-of-home activity before layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Planned {
    pub activity_type: ActivityType,
    pub desired_start: u16,
    pub duration: u16,
}

/// Desired start and duration for an activity of type `t`, drawn from the
/// type's own histograms (falling back to the bundle totals).
pub fn sample_timing<R: Rng + ?Sized>(rng: &mut R, bundle: &StatsBundle, t: ActivityType) -> Planned {
    let timing = bundle.timing(t);
    let start_bin = sample_counts(rng, &timing.start_hist.counts)
        .or_else(|| sample_counts(rng, &bundle.start_hist.counts))
        .unwrap_or(9);
    let duration_bin = sample_counts(rng, &timing.duration_hist.counts)
        .or_else(|| sample_counts(rng, &bundle.duration_hist.counts))
        .unwrap_or(2);
    let desired_start = start_bin as u16 * 60 + rng.random_range(0..12u16) * GRID;
    let duration = if duration_bin >= 28 {
        840 + rng.random_range(0..=24u16) * GRID
    } else {
        (duration_bin as u16 * 30 + rng.random_range(0..6u16) * GRID).max(MIN_DURATION)
    };
    Planned {
        activity_type: t,
        desired_start,
        duration,
    }
}

#[derive(Debug)]
struct Segment {
    start: u16,
    end: u16,
    items: Vec<Planned>,
}

impl Segment {
    fn capacity(&self) -> usize {
        let len = self.end.saturating_sub(self.start);
        if len < MIN_GAP {
            0
        } else {
            ((len - MIN_GAP) / (MIN_DURATION + MIN_GAP)) as usize
        }
    }

    fn room(&self) -> isize {
        self.capacity() as isize - self.items.len() as isize
    }

    /// Durations shrunk proportionally (on the grid, never below the
    /// minimum) until everything fits with gaps.
    fn fitted_durations(&self) -> Vec<u16> {
        let n = self.items.len() as u16;
        let avail = (self.end - self.start).saturating_sub((n + 1) * MIN_GAP);
        let total: u32 = self.items.iter().map(|p| p.duration as u32).sum();
        let mut d: Vec<u16> = if total <= avail as u32 {
            self.items.iter().map(|p| p.duration).collect()
        } else {
            let scale = avail as f64 / total as f64;
            self.items
                .iter()
                .map(|p| ((p.duration as f64 * scale / GRID as f64).floor() as u16 * GRID).max(MIN_DURATION))
                .collect()
        };
        while d.iter().map(|&x| x as u32).sum::<u32>() > avail as u32 {
            let (i, _) = d.iter().enumerate().max_by_key(|&(i, &x)| (x, std::cmp::Reverse(i))).expect("non-empty");
            if d[i] <= MIN_DURATION {
                break;
            }
            d[i] -= GRID.min(d[i] - MIN_DURATION);
        }
        d
    }

    fn place(&mut self) -> Vec<Activity> {
        self.items.sort_by_key(|p| p.desired_start);
        let durations = self.fitted_durations();
        let mut cursor = self.start;
        let mut out = Vec::with_capacity(self.items.len());
        for (i, item) in self.items.iter().enumerate() {
            let tail: u16 = durations[i + 1..].iter().map(|d| d + MIN_GAP).sum::<u16>() + MIN_GAP;
            let earliest = cursor + MIN_GAP;
            let latest = self.end.saturating_sub(tail + durations[i]).max(earliest);
            let start = item.desired_start.clamp(earliest, latest);
            let end = start + durations[i];
            out.push(Activity::new(item.activity_type, start, end));
            cursor = end;
        }
        out
    }
}

/// Lays out a day: `fixed` windows are kept exactly, `planned` activities are
/// fitted into the free time around them (dropped only when no room is left),
/// and the day is framed by Home at both ends. A `target_len` of 2 without
/// fixed windows ends the day on the out-of-home activity instead.
///
/// `fixed` must be non-overlapping and lie within `DAY_OPEN..=DAY_CLOSE`.
pub fn compose_day<R: Rng + ?Sized>(
    rng: &mut R,
    target_len: usize,
    mut fixed: Vec<Activity>,
    planned: Vec<Planned>,
) -> Vec<Activity> {
    if fixed.is_empty() && planned.is_empty() {
        return vec![Activity::new(ActivityType::Home, 0, MINUTES_PER_DAY)];
    }
    fixed.sort_by_key(|a| (a.start, a.end));

    let mut segments = Vec::with_capacity(fixed.len() + 1);
    let mut prev = DAY_OPEN;
    for f in &fixed {
        segments.push(Segment {
            start: prev,
            end: f.start.minutes().max(prev),
            items: Vec::new(),
        });
        prev = f.end.minutes();
    }
    segments.push(Segment {
        start: prev,
        end: DAY_CLOSE.max(prev),
        items: Vec::new(),
    });

    for p in planned {
        let home = segments
            .iter()
            .position(|s| p.desired_start < s.end)
            .unwrap_or(segments.len() - 1);
        segments[home].items.push(p);
    }
    // Move overflow to the roomiest segment; drop what fits nowhere.
    for i in 0..segments.len() {
        while segments[i].room() < 0 {
            let item = segments[i].items.pop().expect("over capacity means non-empty");
            let (best, room) = segments
                .iter()
                .enumerate()
                .map(|(j, s)| (j, s.room()))
                .max_by_key(|&(j, r)| (r, std::cmp::Reverse(j)))
                .expect("at least one segment");
            if room > 0 && best != i {
                segments[best].items.push(item);
            }
        }
    }

    let mut middle: Vec<Activity> = fixed;
    for s in &mut segments {
        middle.extend(s.place());
    }
    middle.sort_by_key(|a| (a.start, a.end));
    if middle.is_empty() {
        return vec![Activity::new(ActivityType::Home, 0, MINUTES_PER_DAY)];
    }

    let travel = |rng: &mut R| rng.random_range(1..=6u16) * GRID;
    let first_start = middle[0].start.minutes();
    let home_end = first_start.saturating_sub(travel(rng)).max(GRID.min(first_start - 1));
    let mut day = Vec::with_capacity(middle.len() + 2);
    day.push(Activity::new(ActivityType::Home, 0, home_end));
    day.extend(middle);

    let single = target_len == 2 && day.len() == 2;
    let last = day.last_mut().expect("non-empty");
    if single && last.participants.is_empty() {
        last.end = MinuteOfDay::clamped(MINUTES_PER_DAY.into());
    } else {
        let last_end = last.end.minutes();
        let home_start = (last_end + travel(rng)).min(MINUTES_PER_DAY - GRID);
        day.push(Activity::new(ActivityType::Home, home_start, MINUTES_PER_DAY));
    }
    day
}

fn overlaps(a: &Activity, b: &Activity) -> bool {
    a.start < b.end && b.start < a.end
}

/// Inputs for drawing one person's day.
#[derive(Debug, Clone, Copy)]
pub struct DayInputs<'a> {
    pub profile: &'a SocioProfile,
    pub household: &'a Household,
    pub bundle: &'a StatsBundle,
    pub length: usize,
    /// Joint activities already committed by earlier household members.
    pub anchors: &'a [Anchor],
    /// Activities of earlier members; a later member they already name over
    /// an overlapping window is not claimed again.
    pub booked: &'a [Activity],
    /// Probability that an anchor is reproduced at a shifted time instead of
    /// its committed window.
    pub hallucination_rate: f64,
}

/// A sampled day together with what the sampler decided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayDraw {
    pub chain: ActivityChain,
    pub anchors_honored: usize,
    pub anchors_phantom: usize,
    pub anchors_dropped: usize,
    pub forward_claims: usize,
}

/// Draws one day of `length` activities (more when anchors need the room).
///
/// Anchors become fixed windows naming their required participants; with
/// probability `hallucination_rate` an anchor is shifted by 20 to 180 minutes
/// while still naming the partner, and anchors that would overlap an earlier
/// one are dropped. Every other out-of-home activity may name members who come
/// later in the household's generation order, with probability
/// `joint_rate(pair, type)`.
pub fn sample_day<R: Rng + ?Sized>(
    rng: &mut R,
    inputs: &DayInputs<'_>,
    joint_rate: impl Fn(RelationPair, ActivityType) -> f64,
) -> DayDraw {
    let profile = inputs.profile;
    let bundle = inputs.bundle;
    let mut draw = DayDraw {
        chain: ActivityChain::new(profile.agent_id.clone(), Vec::new()),
        anchors_honored: 0,
        anchors_phantom: 0,
        anchors_dropped: 0,
        forward_claims: 0,
    };

    // Every anchor draws its phantom decision up front; honored anchors are
    // placed before shifted ones so a phantom never displaces them.
    let decisions: Vec<Option<(u16, bool)>> = inputs
        .anchors
        .iter()
        .map(|_| {
            rng.random_bool(inputs.hallucination_rate)
                .then(|| (rng.random_range(4..=36u16) * GRID, rng.random_bool(0.5)))
        })
        .collect();
    let window = |anchor: &Anchor, start: u16, end: u16| Activity {
        activity_type: anchor.activity_type,
        start: MinuteOfDay::clamped(start.into()),
        end: MinuteOfDay::clamped(end.into()),
        participants: anchor.required_participants.clone(),
    };
    let fits = |fixed: &[Activity], a: &Activity| {
        a.start.minutes() >= DAY_OPEN
            && a.end.minutes() <= DAY_CLOSE
            && a.start < a.end
            && !fixed.iter().any(|f| overlaps(f, a))
    };
    let mut fixed: Vec<Activity> = Vec::new();
    for (anchor, _) in inputs.anchors.iter().zip(&decisions).filter(|(_, d)| d.is_none()) {
        let candidate = window(anchor, anchor.start.minutes(), anchor.end.minutes());
        if fits(&fixed, &candidate) {
            draw.anchors_honored += 1;
            fixed.push(candidate);
        } else {
            draw.anchors_dropped += 1;
        }
    }
    for (anchor, &(shift, go_later)) in inputs
        .anchors
        .iter()
        .zip(&decisions)
        .filter_map(|(a, d)| d.as_ref().map(|d| (a, d)))
    {
        let (start, end) = (anchor.start.minutes(), anchor.end.minutes());
        let later = window(anchor, start + shift, end + shift);
        let earlier = (start >= shift).then(|| window(anchor, start - shift, end - shift));
        let options = if go_later { [Some(later), earlier] } else { [earlier, Some(later)] };
        match options.into_iter().flatten().find(|c| fits(&fixed, c)) {
            Some(candidate) => {
                draw.anchors_phantom += 1;
                fixed.push(candidate);
            }
            None => draw.anchors_dropped += 1,
        }
    }

    let length = inputs.length;
    let free = if length <= 1 && fixed.is_empty() {
        0
    } else if length == 2 && fixed.is_empty() {
        1
    } else {
        length.saturating_sub(2 + fixed.len())
    };
    let tags = profile.group_tags();
    let mut planned: Vec<Planned> = Vec::with_capacity(free);
    for i in 0..free {
        let t = if i == 0 && tags.contains(&TAG_WORKER) && rng.random_bool(PRIMARY_ACTIVITY_RATE) {
            ActivityType::Work
        } else if i == 0 && tags.contains(&TAG_STUDENT) && rng.random_bool(PRIMARY_ACTIVITY_RATE) {
            ActivityType::School
        } else {
            let prev: Vec<ActivityType> = planned.last().map(|p| p.activity_type).into_iter().collect();
            sample_type(rng, bundle, &prev)
        };
        planned.push(sample_timing(rng, bundle, t));
    }

    let fixed_windows = fixed.clone();
    let mut activities = compose_day(rng, length, fixed, planned);

    let order = inputs.household.coordination_order();
    let later: Vec<&SocioProfile> = order
        .iter()
        .skip_while(|m| m.agent_id != profile.agent_id)
        .skip(1)
        .copied()
        .collect();
    for a in activities.iter_mut() {
        if a.activity_type == ActivityType::Home || fixed_windows.contains(a) {
            continue;
        }
        for member in &later {
            let taken = inputs
                .booked
                .iter()
                .any(|b| b.participants.contains(&member.agent_id) && overlaps(b, a));
            if taken {
                continue;
            }
            let pair = RelationPair::between(profile.household_relationship, member.household_relationship)
                .unwrap_or(RelationPair::Any);
            let rate = joint_rate(pair, a.activity_type).clamp(0.0, 1.0);
            if rate > 0.0 && rng.random_bool(rate) {
                a.participants.insert(member.agent_id.clone());
                draw.forward_claims += 1;
            }
        }
    }
    draw.chain.activities = activities;
    draw
}
