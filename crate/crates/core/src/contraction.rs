//! Collapsing each infinitesimal path to a single switch, and certifying
//! that the induced map on the collapsed track is irreducible.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::folding::CheckedSequence;
use crate::matrix::{spectral_radius, Polynomial, SpectralEstimate, TransitionMatrix};
use crate::track::{Angle, BranchId, DirectedBranch, HalfBranch, Switch, SwitchId, TrainPath, TrainTrack};
use crate::walls::{dynamic_infinitesimal, permutation_cycles, BranchClassification, InfinitesimalPath};

/// The collapsed track and its identification with the original.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contraction {
    pub tau_hat: TrainTrack,
    /// Original branch of each branch of the collapsed track.
    pub kept: Vec<BranchId>,
    /// Collapsed branch of each original branch, if not infinitesimal.
    pub branch_map: Vec<Option<BranchId>>,
    /// Collapsed switch of each original switch.
    pub switch_map: Vec<SwitchId>,
    /// Switch of the collapsed track replacing each infinitesimal path.
    pub collapsed: Vec<SwitchId>,
}

impl Contraction {
    /// Drops infinitesimal steps and renames the rest.
    pub fn contract_path(&self, path: &[DirectedBranch]) -> TrainPath {
        TrainPath(
            path.iter()
                .filter_map(|d| {
                    self.branch_map[d.branch.index()]
                        .map(|b| DirectedBranch { branch: b, direction: d.direction })
                })
                .collect(),
        )
    }
}

/// Half-branches around the collapsed switch of `path` in counterclockwise
/// order, with the angle following each. The walk runs around the boundary
/// of a neighbourhood of the path; an angle is zero when any corner passed
/// on the way is a cusp.
fn collapsed_cycle(
    track: &TrainTrack,
    cls: &BranchClassification,
    path: &InfinitesimalPath,
) -> Result<Vec<(HalfBranch, Angle)>> {
    let start = path.boundary[0];
    let expected: usize = path
        .switches
        .iter()
        .map(|&s| track.slots(s).iter().filter(|h| !cls.is_infinitesimal(h.branch)).count())
        .sum();
    let limit = 4 * track.branch_count() + 8;
    let mut cycle = Vec::new();
    let mut steps = 0;
    let mut h = start;
    loop {
        let mut cur = track.attachment(h);
        let mut angle = Angle::Pi;
        let next = loop {
            let sw = track.switch(cur.switch);
            if sw.angles()[cur.slot] == Angle::Zero {
                angle = Angle::Zero;
            }
            let g = track.half_at(cur.switch, (cur.slot + 1) % sw.valence());
            if !cls.is_infinitesimal(g.branch) {
                break g;
            }
            cur = track.attachment(g.opposite());
            steps += 1;
            if steps > limit {
                return Err(Error::AngleStructureViolation(
                    "walk around an infinitesimal path does not close".into(),
                ));
            }
        };
        cycle.push((h, angle));
        if next == start || cycle.len() > limit {
            break;
        }
        h = next;
    }
    if cycle.len() != expected {
        return Err(Error::AngleStructureViolation(format!(
            "collapsed switch has {} half-branches, expected {expected}",
            cycle.len()
        )));
    }
    Ok(cycle)
}

/// Builds the collapsed track. Kept switches come first in their original
/// order, then one switch per infinitesimal path; kept branches keep their
/// relative order.
pub fn build_tau_hat(
    track: &TrainTrack,
    cls: &BranchClassification,
    paths: &[InfinitesimalPath],
) -> Result<Contraction> {
    let kept: Vec<BranchId> = track.branch_ids().filter(|b| !cls.is_infinitesimal(*b)).collect();
    let mut branch_map = vec![None; track.branch_count()];
    for (k, b) in kept.iter().enumerate() {
        branch_map[b.index()] = Some(BranchId(k as u32));
    }
    let mut on_path: BTreeMap<SwitchId, usize> = BTreeMap::new();
    for (a, p) in paths.iter().enumerate() {
        for &s in &p.switches {
            on_path.insert(s, a);
        }
    }
    let plain: Vec<SwitchId> = track.switch_ids().filter(|s| !on_path.contains_key(s)).collect();
    let mut switch_map = vec![SwitchId(0); track.switch_count()];
    for (k, &s) in plain.iter().enumerate() {
        switch_map[s.index()] = SwitchId(k as u32);
    }
    let collapsed: Vec<SwitchId> =
        (0..paths.len()).map(|a| SwitchId((plain.len() + a) as u32)).collect();
    for (&s, &a) in &on_path {
        switch_map[s.index()] = collapsed[a];
    }
    let rename = |h: HalfBranch| -> HalfBranch {
        HalfBranch::new(branch_map[h.branch.index()].expect("kept branch"), h.end)
    };
    let mut switches = Vec::new();
    let mut slots = Vec::new();
    for &s in &plain {
        if track.slots(s).iter().any(|h| cls.is_infinitesimal(h.branch)) {
            return Err(Error::AngleStructureViolation(format!(
                "{s} meets an infinitesimal branch but lies on no infinitesimal path"
            )));
        }
        switches.push(track.switch(s).clone());
        slots.push(track.slots(s).iter().map(|&h| rename(h)).collect());
    }
    for (a, p) in paths.iter().enumerate() {
        let cycle = collapsed_cycle(track, cls, p)?;
        let pis = cycle.iter().filter(|(_, ang)| *ang == Angle::Pi).count();
        if pis != 2 {
            return Err(Error::AngleStructureViolation(format!(
                "collapsed switch {} has {pis} angles of π, expected 2",
                collapsed[a]
            )));
        }
        switches.push(Switch::general(cycle.iter().map(|x| x.1).collect()));
        slots.push(cycle.iter().map(|x| rename(x.0)).collect());
    }
    let tau_hat = TrainTrack::from_slots(switches, slots, kept.len())?;
    Ok(Contraction { tau_hat, kept, branch_map, switch_map, collapsed })
}

/// Checks that a collapsed track's angle data is admissible: every switch
/// has exactly two π angles and the track validates.
pub fn check_angles(tau_hat: &TrainTrack) -> Result<()> {
    for s in tau_hat.switch_ids() {
        let pis = tau_hat.switch(s).pi_count();
        if pis != 2 {
            return Err(Error::AngleStructureViolation(format!(
                "{s} has {pis} angles of π, expected 2"
            )));
        }
    }
    let report = tau_hat.validate();
    if !report.is_valid() {
        return Err(Error::AngleStructureViolation(report.messages().join("; ")));
    }
    Ok(())
}

fn canonical_cycle<T: Ord + Clone>(v: Vec<T>) -> Vec<T> {
    (0..v.len())
        .map(|r| {
            let mut w = v.clone();
            w.rotate_left(r);
            w
        })
        .min()
        .unwrap_or(v)
}

/// Boundary steps of a patch, each with the corner angle that follows it.
type MarkedBoundary = Vec<(DirectedBranch, Angle)>;

/// The boundary of an original patch as seen in the collapsed track:
/// infinitesimal steps are dropped and the corners around them merged, a
/// merged corner being a cusp if any of its parts is.
fn contract_boundary(contraction: &Contraction, p: &crate::track::Patch) -> MarkedBoundary {
    let n = p.boundary.len();
    let Some(first) = (0..n).find(|&i| contraction.branch_map[p.boundary[i].branch.index()].is_some()) else {
        return Vec::new();
    };
    let mut out: MarkedBoundary = Vec::new();
    for k in 0..n {
        let i = (first + k) % n;
        let d = p.boundary[i];
        let angle = p.corners[i].angle;
        match contraction.branch_map[d.branch.index()] {
            Some(b) => out.push((DirectedBranch { branch: b, direction: d.direction }, angle)),
            None => {
                let last = out.last_mut().expect("starts on a kept step");
                if angle == Angle::Zero {
                    last.1 = Angle::Zero;
                }
            }
        }
    }
    out
}

fn marked(p: &crate::track::Patch) -> MarkedBoundary {
    p.boundary.iter().copied().zip(p.corners.iter().map(|c| c.angle)).collect()
}

/// Matches patches of the original track, with infinitesimal branches
/// erased from their boundaries, against patches of the collapsed track.
/// Boundaries must agree step by step, cusps included. Returns the number
/// of patches.
pub fn verify_patch_correspondence(track: &TrainTrack, contraction: &Contraction) -> Result<usize> {
    let mut original: Vec<MarkedBoundary> = track
        .trace_patches()?
        .iter()
        .map(|p| canonical_cycle(contract_boundary(contraction, p)))
        .collect();
    let mut collapsed: Vec<MarkedBoundary> =
        contraction.tau_hat.trace_patches()?.iter().map(|p| canonical_cycle(marked(p))).collect();
    if original.iter().any(Vec::is_empty) {
        return Err(Error::AngleStructureViolation(
            "a patch boundary consists only of infinitesimal branches".into(),
        ));
    }
    original.sort();
    collapsed.sort();
    if original != collapsed {
        let cusps = |v: &[MarkedBoundary]| {
            let mut c: Vec<usize> =
                v.iter().map(|b| b.iter().filter(|x| x.1 == Angle::Zero).count()).collect();
            c.sort_unstable();
            c
        };
        return Err(Error::AngleStructureViolation(format!(
            "patches do not correspond: {} patches with cusps {:?} before, {} with cusps {:?} after",
            original.len(),
            cusps(&original),
            collapsed.len(),
            cusps(&collapsed)
        )));
    }
    Ok(original.len())
}

/// Images of the kept branches under the induced map, as train paths in the
/// collapsed track.
pub fn induced_branch_map(seq: &CheckedSequence, contraction: &Contraction) -> Result<Vec<TrainPath>> {
    let mut out = Vec::with_capacity(contraction.kept.len());
    for (k, &b) in contraction.kept.iter().enumerate() {
        let full = seq.branch_image_path(b)?;
        let path = contraction.contract_path(full.steps());
        if path.is_empty() {
            return Err(Error::PathInvalid(format!(
                "image of collapsed branch b{k} runs only over infinitesimal branches"
            )));
        }
        if !contraction.tau_hat.is_train_path(path.steps())? {
            return Err(Error::PathInvalid(format!(
                "image of collapsed branch b{k} is not a train path in the collapsed track"
            )));
        }
        out.push(path);
    }
    Ok(out)
}

/// Counting matrix of a branch map: column `b` counts the branches the
/// image of `b` passes over.
pub fn count_matrix(images: &[TrainPath]) -> TransitionMatrix {
    let n = images.len();
    let mut m = TransitionMatrix::zeros(n);
    for (col, path) in images.iter().enumerate() {
        for (row, count) in path.branch_counts(n).into_iter().enumerate() {
            if count > 0 {
                m.set(row, col, count.into());
            }
        }
    }
    m
}

/// Evidence that the collapsed matrix is irreducible with the same growth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IrreducibilityCertificate {
    pub base: usize,
    /// Breadth-first parents of a spanning tree reaching every vertex from
    /// the base.
    pub out_tree: Vec<usize>,
    /// Breadth-first parents of a spanning tree reaching the base from
    /// every vertex.
    pub in_tree: Vec<usize>,
    pub rho: SpectralEstimate,
    pub rho_hat: SpectralEstimate,
}

pub fn certify(
    m: &TransitionMatrix,
    m_hat: &TransitionMatrix,
    tolerance: f64,
) -> Result<IrreducibilityCertificate> {
    if m_hat.size() == 0 {
        return Err(Error::NotIrreducible("collapsed matrix is empty".into()));
    }
    let g = m_hat.digraph();
    let tree = |reverse: bool| -> Result<Vec<usize>> {
        g.reach_tree(0, reverse)
            .into_iter()
            .enumerate()
            .map(|(v, p)| {
                p.ok_or_else(|| {
                    Error::NotIrreducible(format!(
                        "vertex {v} {} vertex 0 in the collapsed digraph",
                        if reverse { "does not reach" } else { "is not reached from" }
                    ))
                })
            })
            .collect()
    };
    let out_tree = tree(false)?;
    let in_tree = tree(true)?;
    let rho = spectral_radius(m, tolerance * 1e-3);
    let rho_hat = spectral_radius(m_hat, tolerance * 1e-3);
    if (rho.value - rho_hat.value).abs() > tolerance {
        return Err(Error::NotIrreducible(format!(
            "spectral radii differ: {} before, {} after",
            rho.value, rho_hat.value
        )));
    }
    if rho.value <= 1.0 + tolerance {
        return Err(Error::NotIrreducible(format!("spectral radius {} is not above 1", rho.value)));
    }
    Ok(IrreducibilityCertificate { base: 0, out_tree, in_tree, rho, rho_hat })
}

/// Checks that the collapsed matrix has no infinitesimal branches left.
pub fn check_idempotent(m_hat: &TransitionMatrix) -> Result<()> {
    let left: Vec<usize> =
        dynamic_infinitesimal(m_hat).iter().enumerate().filter(|x| *x.1).map(|x| x.0).collect();
    if !left.is_empty() {
        return Err(Error::NotIrreducible(format!(
            "collapsed track still has infinitesimal branches {left:?}"
        )));
    }
    Ok(())
}

/// Checks `charpoly(M) = charpoly(M̂) · ∏ (x^k − 1)` over the cycles of the
/// permutation on infinitesimal branches, by exact division. Returns the
/// cycle lengths.
pub fn check_charpoly_factorization(
    m: &TransitionMatrix,
    m_hat: &TransitionMatrix,
    infinitesimal: &[bool],
) -> Result<Vec<usize>> {
    let lengths: Vec<usize> = permutation_cycles(m, infinitesimal).iter().map(Vec::len).collect();
    let p = m.charpoly();
    let (q, r) = p.div_rem_monic(&m_hat.charpoly());
    let expected = lengths.iter().fold(Polynomial::one(), |acc, &k| acc.mul(&Polynomial::cycle(k)));
    if !r.is_zero() || q != expected {
        return Err(Error::LemmaViolation(format!(
            "characteristic polynomial {p} is not the collapsed one times {expected} (quotient {q}, remainder {r})"
        )));
    }
    Ok(lengths)
}
