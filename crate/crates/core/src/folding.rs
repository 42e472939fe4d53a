//! Folds, elementary transitions and folding sequences.
//!
//! A fold is named by its pivot: a branch that is small at both ends. In a
//! left fold the pivot occupies the `small_left` slot at both of its
//! switches, in a right fold the `small_right` slot. Writing the slots of the
//! pivot's start switch `x` and finish switch `y` as `[a, p, c]` and
//! `[d, p, b]` (left) the fold produces `x = [p, a, b]`, `y = [p, d, c]`;
//! for a right fold `[a, c, p]`, `[d, b, p]` become `[p, b, a]`, `[p, c, d]`.
//! The pivot becomes large at both ends and the half-branches `c` and `b`
//! trade switches, picking up one traversal of the pivot each.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TransitionMatrix;
use crate::track::{
    BranchId, DirectedBranch, Direction, End, HalfBranch, SwitchId, TrainPath, TrainTrack, LARGE,
    SMALL_LEFT, SMALL_RIGHT,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chirality {
    Left,
    Right,
}

impl Chirality {
    pub fn flipped(self) -> Chirality {
        match self {
            Chirality::Left => Chirality::Right,
            Chirality::Right => Chirality::Left,
        }
    }

    fn slot(self) -> usize {
        match self {
            Chirality::Left => SMALL_LEFT,
            Chirality::Right => SMALL_RIGHT,
        }
    }
}

impl fmt::Display for Chirality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Chirality::Left => "left",
            Chirality::Right => "right",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct FoldMove {
    pub chirality: Chirality,
    pub pivot: BranchId,
}

impl FoldMove {
    pub fn new(chirality: Chirality, pivot: u32) -> Self {
        FoldMove { chirality, pivot: BranchId(pivot) }
    }
}

/// Identification of the last track of a sequence with the first:
/// `branch_map[b]` and `switch_map[s]` give the images in the initial track.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Relabeling {
    pub branch_map: Vec<BranchId>,
    pub switch_map: Vec<SwitchId>,
}

impl Relabeling {
    pub fn identity(branches: usize, switches: usize) -> Self {
        Relabeling {
            branch_map: (0..branches as u32).map(BranchId).collect(),
            switch_map: (0..switches as u32).map(SwitchId).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldingSequence {
    pub initial: TrainTrack,
    pub moves: Vec<FoldMove>,
    pub relabeling: Relabeling,
}

/// Image of every branch of the pre-fold track as a train path in the
/// post-fold track. Branch ids are shared between the two tracks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElementaryTransition {
    pub fold: FoldMove,
    pub images: Vec<TrainPath>,
}

impl ElementaryTransition {
    pub fn matrix(&self) -> TransitionMatrix {
        let n = self.images.len();
        let mut m = TransitionMatrix::zeros(n);
        for (col, path) in self.images.iter().enumerate() {
            for (row, count) in path.branch_counts(n).into_iter().enumerate() {
                if count > 0 {
                    m.set(row, col, count.into());
                }
            }
        }
        m
    }

    /// Substitutes every step of `path` by its image.
    pub fn push_forward(&self, path: &TrainPath) -> TrainPath {
        let mut out = Vec::new();
        for step in path.steps() {
            let img = &self.images[step.branch.index()];
            match step.direction {
                Direction::Forward => out.extend_from_slice(img.steps()),
                Direction::Backward => out.extend(img.reversed().0),
            }
        }
        TrainPath(out)
    }
}

fn slot_name(slot: usize) -> &'static str {
    match slot {
        LARGE => "large",
        SMALL_LEFT => "small_left",
        SMALL_RIGHT => "small_right",
        _ => "?",
    }
}

/// Applies one fold, returning the folded track and the images of the
/// pre-fold branches.
pub fn apply_fold(track: &TrainTrack, mv: FoldMove) -> Result<(TrainTrack, ElementaryTransition)> {
    let p = mv.pivot;
    if !track.contains_branch(p) {
        return Err(crate::track::TrackError::UnknownBranch(p).into());
    }
    let start = track.attachment(HalfBranch::new(p, End::Start));
    let finish = track.attachment(HalfBranch::new(p, End::Finish));
    let x = start.switch;
    let y = finish.switch;
    let describe = || {
        format!(
            "pivot {} runs from {} slot {} to {} slot {}",
            p,
            x,
            slot_name(start.slot),
            y,
            slot_name(finish.slot)
        )
    };
    if !track.switch(x).is_generic() || !track.switch(y).is_generic() {
        return Err(Error::NotFoldable {
            pivot: p,
            diagnostic: format!("{}; folds need generic switches", describe()),
        });
    }
    if x == y {
        return Err(Error::NotFoldable {
            pivot: p,
            diagnostic: format!("{}; pivot is a loop", describe()),
        });
    }
    let want = mv.chirality.slot();
    if start.slot != want || finish.slot != want {
        return Err(Error::NotFoldable {
            pivot: p,
            diagnostic: format!(
                "{}; a {} fold needs the pivot in slot {} at both ends",
                describe(),
                mv.chirality,
                slot_name(want)
            ),
        });
    }

    let other_small = SMALL_LEFT + SMALL_RIGHT - want;
    let a = track.half_at(x, LARGE);
    let c = track.half_at(x, other_small);
    let d = track.half_at(y, LARGE);
    let b = track.half_at(y, other_small);
    let ph_start = HalfBranch::new(p, End::Start);
    let ph_finish = HalfBranch::new(p, End::Finish);

    let mut slots: Vec<Vec<HalfBranch>> = track.switch_ids().map(|s| track.slots(s).to_vec()).collect();
    slots[x.index()] = match mv.chirality {
        Chirality::Left => vec![ph_start, a, b],
        Chirality::Right => vec![ph_start, b, a],
    };
    slots[y.index()] = match mv.chirality {
        Chirality::Left => vec![ph_finish, d, c],
        Chirality::Right => vec![ph_finish, c, d],
    };
    let folded = TrainTrack::from_slots(track.switches().to_vec(), slots, track.branch_count())?;

    let forward = DirectedBranch::forward(p);
    let backward = DirectedBranch::backward(p);
    let mut prefix: Vec<Option<DirectedBranch>> = vec![None; track.branch_count()];
    let mut suffix: Vec<Option<DirectedBranch>> = vec![None; track.branch_count()];
    // c moves from x to y, b from y to x; p runs forward from x to y
    for (half, old_to_new, new_to_old) in [(c, forward, backward), (b, backward, forward)] {
        match half.end {
            End::Start => prefix[half.branch.index()] = Some(old_to_new),
            End::Finish => suffix[half.branch.index()] = Some(new_to_old),
        }
    }
    let images = track
        .branch_ids()
        .map(|br| {
            let mut steps = Vec::with_capacity(3);
            steps.extend(prefix[br.index()]);
            steps.push(DirectedBranch::forward(br));
            steps.extend(suffix[br.index()]);
            TrainPath(steps)
        })
        .collect();
    Ok((folded, ElementaryTransition { fold: mv, images }))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SequenceStage {
    Initial,
    Fold,
    Relabeling,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceFailure {
    /// Index of the first offending layer: `0` for the initial track, `k`
    /// for the track produced by move `k`, `n` for the relabeling.
    pub layer: usize,
    pub stage: SequenceStage,
    pub message: String,
}

impl fmt::Display for SequenceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stage = match self.stage {
            SequenceStage::Initial => "initial track",
            SequenceStage::Fold => "fold",
            SequenceStage::Relabeling => "relabeling",
        };
        write!(f, "layer {} ({stage}): {}", self.layer, self.message)
    }
}

impl From<SequenceFailure> for Error {
    fn from(f: SequenceFailure) -> Self {
        Error::InvalidSequence { layer: f.layer, reason: format!("{f}") }
    }
}

#[derive(Clone, Debug)]
pub struct SequenceReport {
    pub layers: Vec<TrainTrack>,
    pub failure: Option<SequenceFailure>,
    /// Set when there are no moves: the monodromy acts by a permutation.
    pub permutation_only: bool,
}

impl SequenceReport {
    pub fn is_valid(&self) -> bool {
        self.failure.is_none()
    }
}

/// A folding sequence that passed every check, with its layer tracks.
#[derive(Clone, Debug)]
pub struct CheckedSequence {
    sequence: FoldingSequence,
    layers: Vec<TrainTrack>,
    transitions: Vec<ElementaryTransition>,
    /// For each branch of the final track, whether the relabeling exchanges
    /// its ends.
    end_flips: Vec<bool>,
}

/// Checks every fold and the relabeling, reporting the first failure.
pub fn check_sequence(seq: &FoldingSequence) -> SequenceReport {
    match CheckedSequence::new(seq.clone()) {
        Ok(c) => SequenceReport {
            permutation_only: seq.moves.is_empty(),
            layers: c.layers,
            failure: None,
        },
        Err((layers, failure)) => SequenceReport {
            layers,
            failure: Some(failure),
            permutation_only: seq.moves.is_empty(),
        },
    }
}

impl FoldingSequence {
    pub fn check(&self) -> std::result::Result<CheckedSequence, SequenceFailure> {
        CheckedSequence::new(self.clone()).map_err(|(_, f)| f)
    }
}

/// Checks that `relabeling` is a slot-preserving isomorphism from `last`
/// onto `first`; returns the per-branch end flips.
pub fn check_relabeling(
    last: &TrainTrack,
    first: &TrainTrack,
    relabeling: &Relabeling,
) -> std::result::Result<Vec<bool>, String> {
    let nb = last.branch_count();
    let ns = last.switch_count();
    if relabeling.branch_map.len() != nb || relabeling.switch_map.len() != ns {
        return Err(format!(
            "relabeling covers {} branches and {} switches, track has {nb} and {ns}",
            relabeling.branch_map.len(),
            relabeling.switch_map.len()
        ));
    }
    let mut hit = vec![false; nb];
    for (b, img) in relabeling.branch_map.iter().enumerate() {
        if img.index() >= nb || std::mem::replace(&mut hit[img.index()], true) {
            return Err(format!("branch map is not a bijection at b{b} -> {img}"));
        }
    }
    let mut hit = vec![false; ns];
    for (s, img) in relabeling.switch_map.iter().enumerate() {
        if img.index() >= ns || std::mem::replace(&mut hit[img.index()], true) {
            return Err(format!("switch map is not a bijection at v{s} -> {img}"));
        }
    }
    let mut flips: Vec<Option<bool>> = vec![None; nb];
    for s in last.switch_ids() {
        let t = relabeling.switch_map[s.index()];
        let (from, to) = (last.switch(s), first.switch(t));
        if from.angles() != to.angles() || from.is_generic() != to.is_generic() {
            return Err(format!("switch {s} and its image {t} have different angle data"));
        }
        for (k, h) in last.slots(s).iter().enumerate() {
            let g = first.half_at(t, k);
            let img = relabeling.branch_map[h.branch.index()];
            if img != g.branch {
                return Err(format!(
                    "slot {k} of {s} holds {} which maps to {img}, but slot {k} of {t} holds {}",
                    h.branch, g.branch
                ));
            }
            let flip = h.end != g.end;
            match flips[h.branch.index()] {
                None => flips[h.branch.index()] = Some(flip),
                Some(prev) if prev == flip => {}
                Some(_) => {
                    return Err(format!("ends of {} are not mapped consistently", h.branch))
                }
            }
        }
    }
    Ok(flips.into_iter().map(|f| f.unwrap_or(false)).collect())
}

impl CheckedSequence {
    fn new(
        sequence: FoldingSequence,
    ) -> std::result::Result<Self, (Vec<TrainTrack>, SequenceFailure)> {
        let mut layers = vec![sequence.initial.clone()];
        let fail = |layers: Vec<TrainTrack>, layer, stage, message| {
            Err((layers, SequenceFailure { layer, stage, message }))
        };
        let report = sequence.initial.validate();
        if !report.is_valid() {
            return fail(layers, 0, SequenceStage::Initial, report.messages().join("; "));
        }
        if !sequence.initial.is_generic() {
            return fail(
                layers,
                0,
                SequenceStage::Initial,
                "folding sequences need a generic initial track".into(),
            );
        }
        let mut transitions = Vec::with_capacity(sequence.moves.len());
        for (k, mv) in sequence.moves.iter().enumerate() {
            let current = layers.last().expect("at least one layer");
            match apply_fold(current, *mv) {
                Ok((next, et)) => {
                    let report = next.validate();
                    if !report.is_valid() {
                        let msg = report.messages().join("; ");
                        return fail(layers, k + 1, SequenceStage::Fold, msg);
                    }
                    layers.push(next);
                    transitions.push(et);
                }
                Err(e) => return fail(layers, k + 1, SequenceStage::Fold, e.to_string()),
            }
        }
        let last = layers.last().expect("at least one layer");
        let end_flips = match check_relabeling(last, &sequence.initial, &sequence.relabeling) {
            Ok(f) => f,
            Err(msg) => {
                let n = sequence.moves.len();
                return fail(layers, n, SequenceStage::Relabeling, msg);
            }
        };
        Ok(CheckedSequence { sequence, layers, transitions, end_flips })
    }

    pub fn sequence(&self) -> &FoldingSequence {
        &self.sequence
    }

    /// Tracks `τ_0, …, τ_n`.
    pub fn layers(&self) -> &[TrainTrack] {
        &self.layers
    }

    pub fn transitions(&self) -> &[ElementaryTransition] {
        &self.transitions
    }

    pub fn end_flips(&self) -> &[bool] {
        &self.end_flips
    }

    pub fn fold_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_permutation_only(&self) -> bool {
        self.transitions.is_empty()
    }

    /// The invariant track `τ = τ_n`.
    pub fn track(&self) -> &TrainTrack {
        self.layers.last().expect("at least one layer")
    }

    /// The branch of `τ_0` identified with branch `b` of `τ`, traversed in
    /// the direction matching the forward direction of `b`.
    pub fn relabeled(&self, b: BranchId) -> DirectedBranch {
        let img = self.sequence.relabeling.branch_map[b.index()];
        if self.end_flips[b.index()] {
            DirectedBranch::backward(img)
        } else {
            DirectedBranch::forward(img)
        }
    }

    /// `E_n ⋯ E_1`, indexed by branches of `τ_n` (rows) and `τ_0` (columns).
    pub fn fold_product(&self) -> TransitionMatrix {
        let n = self.track().branch_count();
        self.transitions
            .iter()
            .fold(TransitionMatrix::identity(n), |acc, t| t.matrix().mul(&acc))
    }

    /// Transition matrix of the monodromy on `τ`: column `b` counts the
    /// branches passed over by the image of `b`.
    pub fn transition_matrix(&self) -> TransitionMatrix {
        let prod = self.fold_product();
        let n = prod.size();
        let mut m = TransitionMatrix::zeros(n);
        for b in 0..n {
            let src = self.sequence.relabeling.branch_map[b].index();
            for r in 0..n {
                m.set(r, b, prod.get(r, src).clone());
            }
        }
        m
    }

    /// The train path in `τ` traversed by the image of branch `b`.
    pub fn branch_image_path(&self, b: BranchId) -> Result<TrainPath> {
        if !self.track().contains_branch(b) {
            return Err(crate::track::TrackError::UnknownBranch(b).into());
        }
        let start = TrainPath::single(self.relabeled(b));
        Ok(self.transitions.iter().fold(start, |path, t| t.push_forward(&path)))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::track::tests::opt_track;

    pub(crate) fn opt_sequence() -> FoldingSequence {
        FoldingSequence {
            initial: opt_track(),
            moves: vec![FoldMove::new(Chirality::Left, 1), FoldMove::new(Chirality::Right, 2)],
            relabeling: Relabeling {
                branch_map: vec![BranchId(1), BranchId(2), BranchId(0)],
                switch_map: vec![SwitchId(0), SwitchId(1)],
            },
        }
    }

    /// Composes the two elementary matrices and the relabeling by hand.
    fn opt_matrix_oracle() -> TransitionMatrix {
        // first fold: branch 2 is carried over pivot 1 twice
        let e1 = TransitionMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 2], vec![0, 0, 1]]);
        // second fold: branch 0 is carried over pivot 2 twice
        let e2 = TransitionMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 0], vec![2, 0, 1]]);
        // column b of M is column branch_map[b] of e2 * e1
        let p = TransitionMatrix::from_rows(&[vec![0, 0, 1], vec![1, 0, 0], vec![0, 1, 0]]);
        e2.mul(&e1).mul(&p)
    }

    #[test]
    fn opt_sequence_is_valid_with_three_layers() {
        let report = check_sequence(&opt_sequence());
        assert!(report.is_valid(), "{:?}", report.failure);
        assert_eq!(report.layers.len(), 3);
        assert!(!report.permutation_only);
    }

    #[test]
    fn first_opt_fold() {
        let (t1, et) = apply_fold(&opt_track(), FoldMove::new(Chirality::Left, 1)).unwrap();
        assert!(t1.validate().is_valid());
        assert_eq!(t1.canonical_code(), opt_track().canonical_code());
        let e = et.matrix();
        assert_eq!(e, TransitionMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 2], vec![0, 0, 1]]));
        // pivot row gains three: the two small halves and the large branch
        // on the far side each cross it once; here two of them are branch 2
        let pivot_row: u32 = (0..3).map(|c| u32::try_from(e.get(1, c)).unwrap()).sum();
        assert_eq!(pivot_row, 3);
        for (b, img) in et.images.iter().enumerate() {
            assert!(t1.is_train_path(img.steps()).unwrap(), "image of b{b}");
        }
    }

    #[test]
    fn opt_transition_matrix_matches_hand_composition() {
        let c = opt_sequence().check().unwrap();
        let m = c.transition_matrix();
        assert_eq!(m, opt_matrix_oracle());
        assert_eq!(m, TransitionMatrix::from_rows(&[vec![0, 0, 1], vec![1, 2, 0], vec![0, 1, 2]]));
        let p = m.charpoly();
        let (q, r) = p.div_rem_monic(&crate::matrix::Polynomial::from_i64(&[1, -3, 1]));
        assert!(r.is_zero());
        assert_eq!(q, crate::matrix::Polynomial::from_i64(&[-1, 1]));
    }

    #[test]
    fn image_paths_agree_with_columns() {
        let c = opt_sequence().check().unwrap();
        let m = c.transition_matrix();
        for b in c.track().branch_ids() {
            let path = c.branch_image_path(b).unwrap();
            assert!(c.track().is_train_path(path.steps()).unwrap());
            let counts = path.branch_counts(3);
            for r in 0..3 {
                assert_eq!(*m.get(r, b.index()), counts[r].into());
            }
            assert_eq!(m.column_sum(b.index()), (path.len() as u64).into());
        }
        assert_eq!(c.branch_image_path(BranchId(0)).unwrap().len(), 1);
    }

    #[test]
    fn fold_on_large_branch_is_rejected() {
        let err = apply_fold(&opt_track(), FoldMove::new(Chirality::Left, 0)).unwrap_err();
        match err {
            Error::NotFoldable { diagnostic, .. } => assert!(diagnostic.contains("large")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn wrong_chirality_is_rejected() {
        assert!(matches!(
            apply_fold(&opt_track(), FoldMove::new(Chirality::Right, 1)),
            Err(Error::NotFoldable { .. })
        ));
    }

    #[test]
    fn corrupted_relabeling_is_rejected() {
        let mut seq = opt_sequence();
        seq.relabeling.branch_map.swap(0, 1);
        let report = check_sequence(&seq);
        let f = report.failure.unwrap();
        assert_eq!(f.stage, SequenceStage::Relabeling);
        assert_eq!(f.layer, 2);
    }

    #[test]
    fn empty_sequence_is_permutation_only() {
        let t = opt_track();
        let seq = FoldingSequence {
            relabeling: Relabeling::identity(3, 2),
            initial: t,
            moves: vec![],
        };
        let report = check_sequence(&seq);
        assert!(report.is_valid());
        assert!(report.permutation_only);
        let c = seq.check().unwrap();
        assert_eq!(c.transition_matrix(), TransitionMatrix::identity(3));
        assert!(c.transition_matrix().is_permutation());
    }
}
