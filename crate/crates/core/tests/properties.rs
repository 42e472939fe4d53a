//! Randomized invariants of folding, relabeling and the document format.

mod common;

use std::sync::OnceLock;

use num_traits::ToPrimitive;
use proptest::prelude::*;
use ttforge::folding::{apply_fold, Chirality, FoldMove};
use ttforge::io::{parse_input, to_canonical_string, InputDocument};
use ttforge::matrix::TransitionMatrix;
use ttforge::search::{enumerate_tracks, search, Found, SearchConfig};
use ttforge::track::{BranchId, End, HalfBranch, TrainTrack};

fn tracks() -> &'static [TrainTrack] {
    static TRACKS: OnceLock<Vec<TrainTrack>> = OnceLock::new();
    TRACKS.get_or_init(|| {
        let mut t = enumerate_tracks(2);
        t.extend(enumerate_tracks(4));
        t
    })
}

fn found() -> &'static [Found] {
    static FOUND: OnceLock<Vec<Found>> = OnceLock::new();
    FOUND.get_or_init(|| search(&SearchConfig { max_switches: 4, max_folds: 5, ..Default::default() }).found)
}

fn chirality(left: bool) -> Chirality {
    if left {
        Chirality::Left
    } else {
        Chirality::Right
    }
}

/// The same track with switches and branches renamed.
fn renamed(t: &TrainTrack, switch_perm: &[usize], branch_perm: &[usize]) -> TrainTrack {
    let mut switches = t.switches().to_vec();
    let mut slots = vec![Vec::new(); t.switch_count()];
    for s in t.switch_ids() {
        switches[switch_perm[s.index()]] = t.switch(s).clone();
        slots[switch_perm[s.index()]] = t
            .slots(s)
            .iter()
            .map(|h| HalfBranch::new(BranchId(branch_perm[h.branch.index()] as u32), h.end))
            .collect();
    }
    TrainTrack::from_slots(switches, slots, t.branch_count()).unwrap()
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_folds_keep_tracks_valid(
        pick in any::<prop::sample::Index>(),
        moves in prop::collection::vec((any::<bool>(), any::<prop::sample::Index>()), 1..12),
    ) {
        let mut t = pick.get(tracks()).clone();
        let chi = t.euler_characteristic();
        let patches = t.trace_patches().unwrap().len();
        for (left, idx) in moves {
            let pivot = BranchId(idx.index(t.branch_count()) as u32);
            let Ok((next, step)) = apply_fold(&t, FoldMove { chirality: chirality(left), pivot }) else { continue };
            prop_assert!(next.validate().is_valid(), "{:?}", next.validate().messages());
            prop_assert_eq!(next.euler_characteristic(), chi);
            prop_assert_eq!(next.trace_patches().unwrap().len(), patches);
            let e = step.matrix();
            for (b, image) in step.images.iter().enumerate() {
                prop_assert!(next.is_train_path(image.steps()).unwrap());
                prop_assert_eq!(e.column_sum(b).to_usize(), Some(image.len()));
            }
            t = next;
        }
    }

    #[test]
    fn canonical_code_ignores_names(
        pick in any::<prop::sample::Index>(),
        switch_order in permutation(4),
        branch_order in permutation(6),
    ) {
        let t = pick.get(tracks());
        // restricting a permutation of 0..N to values below n permutes 0..n
        let restrict = |p: &[usize], n: usize| p.iter().copied().filter(|&v| v < n).collect::<Vec<_>>();
        let r = renamed(t, &restrict(&switch_order, t.switch_count()), &restrict(&branch_order, t.branch_count()));
        prop_assert_eq!(r.canonical_code(), t.canonical_code());
        prop_assert!(!t.isomorphisms_to(&r).is_empty());
    }

    #[test]
    fn folds_with_disjoint_pivots_commute(
        pick in any::<prop::sample::Index>(),
        first in (any::<bool>(), any::<prop::sample::Index>()),
        second in (any::<bool>(), any::<prop::sample::Index>()),
    ) {
        let t = pick.get(tracks());
        let n = t.branch_count();
        let p = FoldMove { chirality: chirality(first.0), pivot: BranchId(first.1.index(n) as u32) };
        let q = FoldMove { chirality: chirality(second.0), pivot: BranchId(second.1.index(n) as u32) };
        let ends = |b: BranchId| {
            let br = t.branch(b);
            [br.end(End::Start).switch, br.end(End::Finish).switch]
        };
        prop_assume!(ends(p.pivot).iter().all(|s| !ends(q.pivot).contains(s)));
        let (Ok((tp, ep)), Ok((tq, eq))) = (apply_fold(t, p), apply_fold(t, q)) else { return Ok(()) };
        let (tpq, eq2) = apply_fold(&tp, q).unwrap();
        let (tqp, ep2) = apply_fold(&tq, p).unwrap();
        prop_assert_eq!(&tpq, &tqp);
        let pq: TransitionMatrix = eq2.matrix().mul(&ep.matrix());
        let qp: TransitionMatrix = ep2.matrix().mul(&eq.matrix());
        prop_assert_eq!(pq, qp);
    }

    #[test]
    fn column_sums_are_image_lengths(pick in any::<prop::sample::Index>()) {
        let f = pick.get(found());
        let c = f.sequence.check().unwrap();
        let m = c.transition_matrix();
        for b in c.track().branch_ids() {
            let image = c.branch_image_path(b).unwrap();
            prop_assert!(c.track().is_train_path(image.steps()).unwrap());
            prop_assert_eq!(m.column_sum(b.index()).to_usize(), Some(image.len()));
        }
    }

    #[test]
    fn documents_round_trip(pick in any::<prop::sample::Index>(), name in "[a-z]{0,8}") {
        let f = pick.get(found());
        let doc = InputDocument::from_sequence(&f.sequence, Some(name), None);
        let text = to_canonical_string(&doc);
        let parsed = parse_input(&text, true).unwrap();
        prop_assert_eq!(to_canonical_string(&parsed), text);
        prop_assert_eq!(parsed.to_sequence().unwrap(), f.sequence.clone());
    }

    #[test]
    fn fold_matrix_is_product_of_elementary_matrices(pick in any::<prop::sample::Index>()) {
        let f = pick.get(found());
        let c = f.sequence.check().unwrap();
        let n = c.track().branch_count();
        // oracle: multiply the elementary matrices in i128
        let mut acc: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| i128::from(i == j)).collect()).collect();
        for t in c.transitions() {
            let e = common::to_i128(&t.matrix());
            acc = (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| e[i][k] * acc[k][j]).sum()).collect()).collect();
        }
        prop_assert_eq!(common::to_i128(&c.fold_product()), acc);
    }
}
