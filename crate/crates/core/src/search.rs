//! Enumeration of generic train tracks and of fold sequences returning to
//! an isomorphic track.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::folding::{apply_fold, Chirality, FoldMove, FoldingSequence, Relabeling};
use crate::track::{BranchId, End, HalfBranch, Switch, TrainTrack};
use crate::io::InputDocument;
use crate::pipeline::{analyze, DEFAULT_TOLERANCE};

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub max_switches: usize,
    pub max_folds: usize,
    pub seed: u64,
    /// Tracks with at most this many switches are enumerated exhaustively.
    pub exhaustive_switches: usize,
    /// Random tracks drawn per switch count above the exhaustive range.
    pub random_tracks: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_switches: 4, max_folds: 6, seed: 0, exhaustive_switches: 4, random_tracks: 200 }
    }
}

/// A sequence passing the search gates.
#[derive(Clone, Debug)]
pub struct Found {
    pub sequence: FoldingSequence,
    pub wall_bearing: bool,
    pub infinitesimal: bool,
    pub spectral_radius: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SearchSummary {
    pub tracks: usize,
    pub candidates: usize,
    pub rejected: BTreeMap<String, usize>,
    pub found: Vec<Found>,
}

/// Generic track from a perfect matching of the `3 * switches` slot points;
/// point `3 s + k` is slot `k` of switch `s`.
fn track_from_matching(switches: usize, partner: &[usize]) -> Option<TrainTrack> {
    let mut slots = vec![vec![HalfBranch::new(BranchId(0), End::Start); 3]; switches];
    let mut next = 0u32;
    for p in 0..partner.len() {
        let q = partner[p];
        if p < q {
            slots[p / 3][p % 3] = HalfBranch::new(BranchId(next), End::Start);
            slots[q / 3][q % 3] = HalfBranch::new(BranchId(next), End::Finish);
            next += 1;
        }
    }
    let t = TrainTrack::from_slots(vec![Switch::generic(); switches], slots, next as usize).ok()?;
    (t.is_connected() && t.validate().is_valid()).then_some(t)
}

fn matchings(points: usize, partner: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let Some(p) = partner.iter().position(|&x| x == usize::MAX) else {
        out.push(partner.clone());
        return;
    };
    for q in p + 1..points {
        if partner[q] == usize::MAX {
            partner[p] = q;
            partner[q] = p;
            matchings(points, partner, out);
            partner[p] = usize::MAX;
            partner[q] = usize::MAX;
        }
    }
}

fn dedupe(tracks: impl IntoIterator<Item = TrainTrack>) -> Vec<TrainTrack> {
    let mut seen = BTreeSet::new();
    tracks.into_iter().filter(|t| seen.insert(t.canonical_code())).collect()
}

/// Every valid connected generic track with `switches` switches, one per
/// isomorphism class.
pub fn enumerate_tracks(switches: usize) -> Vec<TrainTrack> {
    if switches == 0 || switches % 2 == 1 {
        return Vec::new();
    }
    let points = 3 * switches;
    let mut all = Vec::new();
    matchings(points, &mut vec![usize::MAX; points], &mut all);
    let tracks: Vec<TrainTrack> =
        all.par_iter().filter_map(|m| track_from_matching(switches, m)).collect();
    dedupe(tracks)
}

/// Up to `count` distinct valid tracks drawn from uniformly random matchings.
pub fn random_tracks(switches: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<TrainTrack> {
    if switches == 0 || switches % 2 == 1 {
        return Vec::new();
    }
    let points = 3 * switches;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut attempts = 0;
    while out.len() < count && attempts < count * 50 {
        attempts += 1;
        let mut order: Vec<usize> = (0..points).collect();
        order.shuffle(rng);
        let mut partner = vec![0; points];
        for pair in order.chunks(2) {
            partner[pair[0]] = pair[1];
            partner[pair[1]] = pair[0];
        }
        if let Some(t) = track_from_matching(switches, &partner) {
            if seen.insert(t.canonical_code()) {
                out.push(t);
            }
        }
    }
    out
}

fn relabeling_key(moves: &[FoldMove], rel: &Relabeling, auto: &[BranchId]) -> Vec<u32> {
    let mut key: Vec<u32> = moves
        .iter()
        .flat_map(|m| [u32::from(m.chirality == Chirality::Right), auto[m.pivot.index()].0])
        .collect();
    // conjugate the relabeling by the automorphism
    let n = auto.len();
    let mut inv = vec![0usize; n];
    for (b, a) in auto.iter().enumerate() {
        inv[a.index()] = b;
    }
    key.extend((0..n).map(|b| auto[rel.branch_map[inv[b]].index()].0));
    key
}

/// Fold sequences of length `1 ..= max_folds` from `track` ending on a
/// track isomorphic to it, one per orbit under automorphisms of `track`.
pub fn fold_sequences(track: &TrainTrack, max_folds: usize) -> Vec<FoldingSequence> {
    let autos: Vec<Vec<BranchId>> =
        track.isomorphisms_to(track).into_iter().map(|i| i.branch_map).collect();
    let code = track.canonical_code();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut stack: Vec<(TrainTrack, Vec<FoldMove>)> = vec![(track.clone(), Vec::new())];
    while let Some((current, moves)) = stack.pop() {
        if !moves.is_empty() && current.canonical_code() == code {
            for iso in current.isomorphisms_to(track) {
                let rel = Relabeling { branch_map: iso.branch_map, switch_map: iso.switch_map };
                let key = autos.iter().map(|a| relabeling_key(&moves, &rel, a)).min().unwrap_or_default();
                if seen.insert(key) {
                    out.push(FoldingSequence { initial: track.clone(), moves: moves.clone(), relabeling: rel });
                }
            }
        }
        if moves.len() == max_folds {
            continue;
        }
        for b in current.branch_ids().collect::<Vec<_>>().into_iter().rev() {
            for ch in [Chirality::Right, Chirality::Left] {
                let mv = FoldMove { chirality: ch, pivot: b };
                if let Ok((next, _)) = apply_fold(&current, mv) {
                    if next.validate().is_valid() {
                        let mut m = moves.clone();
                        m.push(mv);
                        stack.push((next, m));
                    }
                }
            }
        }
    }
    out
}

/// Runs the full analysis on a candidate. Input-class failures become the
/// rejection reason; internal failures are tagged `internal:`.
pub fn screen(seq: &FoldingSequence) -> Result<Found, String> {
    match analyze(seq, DEFAULT_TOLERANCE) {
        Ok(a) => Ok(Found {
            sequence: seq.clone(),
            wall_bearing: !a.walls.walls.is_empty(),
            infinitesimal: a.collapse.is_some(),
            spectral_radius: a.certificate.rho.value,
        }),
        Err(e) if e.is_internal() => Err(format!("internal: {e}")),
        Err(e) => Err(kind(&e)),
    }
}

fn kind(e: &crate::Error) -> String {
    let s = format!("{e:?}");
    s.split(['(', ' ', '{']).next().unwrap_or("").to_string()
}

/// Runs the search, returning sequences that pass the gates ordered by
/// switch count, fold count, and discovery order.
pub fn search(config: &SearchConfig) -> SearchSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tracks = Vec::new();
    for v in (2..=config.max_switches).step_by(2) {
        if v <= config.exhaustive_switches {
            tracks.extend(enumerate_tracks(v));
        } else {
            tracks.extend(random_tracks(v, config.random_tracks, &mut rng));
        }
    }
    let per_track: Vec<Vec<Result<Found, String>>> = tracks
        .par_iter()
        .map(|t| fold_sequences(t, config.max_folds).iter().map(screen).collect())
        .collect();
    let mut summary = SearchSummary { tracks: tracks.len(), ..Default::default() };
    for results in per_track {
        for r in results {
            summary.candidates += 1;
            match r {
                Ok(f) => summary.found.push(f),
                Err(reason) => *summary.rejected.entry(reason).or_default() += 1,
            }
        }
    }
    summary.found.sort_by_key(|f| (f.sequence.initial.switch_count(), f.sequence.moves.len()));
    summary
}

/// The search result as documents, named by size and index and tagged
/// with whether walls and infinitesimal branches occur.
pub fn search_fixtures(config: &SearchConfig) -> Vec<InputDocument> {
    search(config)
        .found
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let name = format!(
                "search-s{}-f{}-{i:04}",
                f.sequence.initial.switch_count(),
                f.sequence.moves.len()
            );
            let notes = format!(
                "walls: {}; infinitesimal: {}",
                if f.wall_bearing { "yes" } else { "no" },
                if f.infinitesimal { "yes" } else { "no" }
            );
            InputDocument::from_sequence(&f.sequence, Some(name), Some(notes))
        })
        .collect()
}
