//! Layered triangulations built from folding sequences, their edge
//! coloring, the flow graph on edge classes, and the branch path graph.
//!
//! Each fold attaches one tetrahedron. Its bottom edge is dual to the pivot
//! before the fold, its top edge is dual to the pivot after the fold, and
//! its four side edges are dual to the branches around the pivot, listed as
//! `[large at start, other small at start, large at finish, other small at
//! finish]`. Positions `0, 2` and `1, 3` are opposite in the quadrilateral.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folding::{CheckedSequence, Chirality};
use crate::graph::Digraph;
use crate::matrix::TransitionMatrix;
use crate::track::{BranchId, End, HalfBranch, TrainTrack, LARGE, SMALL_LEFT, SMALL_RIGHT};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeColor {
    Red,
    Blue,
}

impl EdgeColor {
    pub fn of(chirality: Chirality) -> EdgeColor {
        match chirality {
            Chirality::Left => EdgeColor::Blue,
            Chirality::Right => EdgeColor::Red,
        }
    }

    pub fn other(self) -> EdgeColor {
        match self {
            EdgeColor::Red => EdgeColor::Blue,
            EdgeColor::Blue => EdgeColor::Red,
        }
    }
}

impl fmt::Display for EdgeColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeColor::Red => "red",
            EdgeColor::Blue => "blue",
        })
    }
}

/// Side positions that are opposite each other in a tetrahedron.
pub const OPPOSITE_SIDES: [(usize, usize); 2] = [(0, 2), (1, 3)];

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tetrahedron {
    pub chirality: Chirality,
    pub bottom: usize,
    pub top: usize,
    pub sides: [usize; 4],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeClass {
    pub id: usize,
    pub color: EdgeColor,
    /// Tetrahedron whose top edge lies in this class.
    pub creator: usize,
    /// Tetrahedron whose bottom edge lies in this class.
    pub destroyer: usize,
    /// `(tetrahedron, side position)` pairs.
    pub side_incidences: Vec<(usize, usize)>,
}

/// Tetrahedra and colored edge classes of the quotient triangulation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triangulation {
    tetrahedra: Vec<Tetrahedron>,
    classes: Vec<EdgeClass>,
}

impl Triangulation {
    /// Builds the quotient view from tetrahedron incidences and class colors.
    /// Every class must be the top of exactly one tetrahedron and the bottom
    /// of exactly one.
    pub fn new(tetrahedra: Vec<Tetrahedron>, colors: Vec<EdgeColor>) -> Result<Self> {
        let n = colors.len();
        let mut creator = vec![None; n];
        let mut destroyer = vec![None; n];
        let mut sides = vec![Vec::new(); n];
        let bad = |m: String| Err(Error::NonPseudoAnosovInput(m));
        for (t, tet) in tetrahedra.iter().enumerate() {
            for e in tet.sides.iter().chain([&tet.bottom, &tet.top]) {
                if *e >= n {
                    return bad(format!("tetrahedron {t} refers to missing edge class {e}"));
                }
            }
            if creator[tet.top].replace(t).is_some() {
                return bad(format!("edge class {} is the top of two tetrahedra", tet.top));
            }
            if destroyer[tet.bottom].replace(t).is_some() {
                return bad(format!("edge class {} is the bottom of two tetrahedra", tet.bottom));
            }
            for (pos, &e) in tet.sides.iter().enumerate() {
                sides[e].push((t, pos));
            }
        }
        let mut classes = Vec::with_capacity(n);
        for (id, color) in colors.into_iter().enumerate() {
            let creator = match creator[id] {
                Some(c) => c,
                None => return bad(format!("edge class {id} is never created")),
            };
            let destroyer = match destroyer[id] {
                Some(d) => d,
                None => return bad(format!("edge class {id} is never destroyed")),
            };
            classes.push(EdgeClass {
                id,
                color,
                creator,
                destroyer,
                side_incidences: std::mem::take(&mut sides[id]),
            });
        }
        Ok(Triangulation { tetrahedra, classes })
    }

    pub fn tetrahedra(&self) -> &[Tetrahedron] {
        &self.tetrahedra
    }

    pub fn classes(&self) -> &[EdgeClass] {
        &self.classes
    }

    pub fn color(&self, class: usize) -> EdgeColor {
        self.classes[class].color
    }

    /// Replaces the color of one class; used to probe the veering check.
    pub fn with_color(&self, class: usize, color: EdgeColor) -> Triangulation {
        let mut t = self.clone();
        t.classes[class].color = color;
        t
    }

    /// Replaces the chirality of one tetrahedron.
    pub fn with_chirality(&self, tet: usize, chirality: Chirality) -> Triangulation {
        let mut t = self.clone();
        t.tetrahedra[tet].chirality = chirality;
        t
    }

    /// Checks the coloring: each class has its destroyer's color, opposite
    /// sides agree, adjacent sides differ.
    pub fn verify_veering(&self) -> Result<()> {
        for (t, tet) in self.tetrahedra.iter().enumerate() {
            let bottom = self.color(tet.bottom);
            if bottom != EdgeColor::of(tet.chirality) {
                return Err(Error::VeeringViolation(format!(
                    "tetrahedron {t}: bottom class {} is {bottom} but the fold is {}",
                    tet.bottom, tet.chirality
                )));
            }
            let c: Vec<EdgeColor> = tet.sides.iter().map(|&e| self.color(e)).collect();
            for (i, j) in OPPOSITE_SIDES {
                if c[i] != c[j] {
                    return Err(Error::VeeringViolation(format!(
                        "tetrahedron {t}: opposite sides {} and {} have colors {} and {}",
                        tet.sides[i], tet.sides[j], c[i], c[j]
                    )));
                }
            }
            if c[0] == c[1] {
                return Err(Error::VeeringViolation(format!(
                    "tetrahedron {t}: adjacent sides {} and {} are both {}",
                    tet.sides[0], tet.sides[1], c[0]
                )));
            }
        }
        Ok(())
    }

    /// Side positions of `tet` colored opposite to its bottom edge.
    pub fn flow_sides(&self, tet: usize) -> Vec<usize> {
        let t = &self.tetrahedra[tet];
        let bottom = self.color(t.bottom);
        (0..4).filter(|&i| self.color(t.sides[i]) != bottom).collect()
    }

    /// The flow graph: every tetrahedron contributes edges into its top from
    /// its bottom and from the two sides colored opposite to the bottom.
    pub fn flow_graph(&self) -> Result<FlowGraph> {
        let mut g = Digraph::new(self.classes.len());
        for (t, tet) in self.tetrahedra.iter().enumerate() {
            let sides = self.flow_sides(t);
            if sides.len() != 2 {
                return Err(Error::VeeringViolation(format!(
                    "tetrahedron {t} has {} sides colored opposite to its bottom",
                    sides.len()
                )));
            }
            g.add_edge(tet.bottom, tet.top, BigUint::one());
            for i in sides {
                g.add_edge(tet.sides[i], tet.top, BigUint::one());
            }
        }
        Ok(FlowGraph { graph: g })
    }

    /// `above(t)`: the tetrahedron whose bottom is the top of `t`.
    pub fn above(&self, tet: usize) -> usize {
        self.classes[self.tetrahedra[tet].top].destroyer
    }

    /// `below(t)`: the tetrahedron whose top is the bottom of `t`.
    pub fn below(&self, tet: usize) -> usize {
        self.classes[self.tetrahedra[tet].bottom].creator
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowGraph {
    pub graph: Digraph,
}

impl FlowGraph {
    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> BigUint {
        self.graph.total_multiplicity()
    }
}

/// The triangulation before the quotient: one edge per branch of `τ_0` and
/// one per tetrahedron top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutView {
    /// `layer_edges[k][b]`: the cut edge dual to branch `b` of `τ_k`.
    pub layer_edges: Vec<Vec<usize>>,
    pub tetrahedra: Vec<CutTetrahedron>,
    pub edge_count: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct CutTetrahedron {
    pub chirality: Chirality,
    pub pivot: BranchId,
    pub bottom: usize,
    pub top: usize,
    pub sides: [usize; 4],
}

/// Side branches of the fold at `pivot` in the pre-fold track.
pub fn side_branches(track: &TrainTrack, pivot: BranchId, chirality: Chirality) -> [BranchId; 4] {
    let x = track.attachment(HalfBranch::new(pivot, End::Start)).switch;
    let y = track.attachment(HalfBranch::new(pivot, End::Finish)).switch;
    let other = match chirality {
        Chirality::Left => SMALL_RIGHT,
        Chirality::Right => SMALL_LEFT,
    };
    [
        track.half_at(x, LARGE).branch,
        track.half_at(x, other).branch,
        track.half_at(y, LARGE).branch,
        track.half_at(y, other).branch,
    ]
}

/// One tetrahedron per fold, with per-layer duality between branches and
/// cut edges.
pub fn build_layers(seq: &CheckedSequence) -> CutView {
    let nb = seq.track().branch_count();
    let mut layer_edges = vec![(0..nb).collect::<Vec<usize>>()];
    let mut tetrahedra = Vec::with_capacity(seq.fold_count());
    let mut next = nb;
    for (k, t) in seq.transitions().iter().enumerate() {
        let before = &seq.layers()[k];
        let prev = layer_edges.last().expect("layer zero exists").clone();
        let pivot = t.fold.pivot;
        let sides = side_branches(before, pivot, t.fold.chirality).map(|b| prev[b.index()]);
        let mut cur = prev.clone();
        cur[pivot.index()] = next;
        tetrahedra.push(CutTetrahedron {
            chirality: t.fold.chirality,
            pivot,
            bottom: prev[pivot.index()],
            top: next,
            sides,
        });
        next += 1;
        layer_edges.push(cur);
    }
    CutView { layer_edges, tetrahedra, edge_count: next }
}

/// The quotient triangulation together with the cut view it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredTriangulation {
    pub cut: CutView,
    /// Edge class of every cut edge.
    pub class_of_cut: Vec<usize>,
    pub triangulation: Triangulation,
}

impl LayeredTriangulation {
    /// Class dual to branch `b` of layer `k`.
    pub fn class_at(&self, layer: usize, b: BranchId) -> usize {
        self.class_of_cut[self.cut.layer_edges[layer][b.index()]]
    }

    pub fn layer_count(&self) -> usize {
        self.cut.layer_edges.len()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Identifies the last layer with the first through the relabeling and
/// colors each class by the chirality of the fold that destroys it. Class
/// `i` is the top edge of tetrahedron `i`.
pub fn quotient(seq: &CheckedSequence, cut: CutView) -> Result<LayeredTriangulation> {
    let n = cut.layer_edges.len() - 1;
    let mut parent: Vec<usize> = (0..cut.edge_count).collect();
    for (b, img) in seq.sequence().relabeling.branch_map.iter().enumerate() {
        let a = find(&mut parent, cut.layer_edges[n][b]);
        let c = find(&mut parent, cut.layer_edges[0][img.index()]);
        parent[a] = c;
    }
    let mut class_of_root = vec![usize::MAX; cut.edge_count];
    for (t, tet) in cut.tetrahedra.iter().enumerate() {
        let r = find(&mut parent, tet.top);
        class_of_root[r] = t;
    }
    let mut class_of_cut = Vec::with_capacity(cut.edge_count);
    for e in 0..cut.edge_count {
        let r = find(&mut parent, e);
        let c = class_of_root[r];
        if c == usize::MAX {
            return Err(Error::NonPseudoAnosovInput(format!(
                "the edge dual to cut edge {e} is never folded"
            )));
        }
        class_of_cut.push(c);
    }
    let tets: Vec<Tetrahedron> = cut
        .tetrahedra
        .iter()
        .map(|t| Tetrahedron {
            chirality: t.chirality,
            bottom: class_of_cut[t.bottom],
            top: class_of_cut[t.top],
            sides: t.sides.map(|e| class_of_cut[e]),
        })
        .collect();
    let mut colors = vec![None; tets.len()];
    for t in &tets {
        colors[t.bottom] = Some(EdgeColor::of(t.chirality));
    }
    let colors: Option<Vec<EdgeColor>> = colors.into_iter().collect();
    let colors = colors.ok_or_else(|| {
        Error::NonPseudoAnosovInput("some edge class is never destroyed".into())
    })?;
    let triangulation = Triangulation::new(tets, colors)?;
    Ok(LayeredTriangulation { cut, class_of_cut, triangulation })
}

/// Checks the veering pattern and that every small half-branch at every
/// layer is dual to a class of the color matching its slot.
pub fn color_and_verify(layered: &LayeredTriangulation, seq: &CheckedSequence) -> Result<()> {
    layered.triangulation.verify_veering()?;
    for (k, track) in seq.layers().iter().enumerate() {
        for s in track.switch_ids() {
            for (slot, want) in [(SMALL_LEFT, EdgeColor::Blue), (SMALL_RIGHT, EdgeColor::Red)] {
                let b = track.half_at(s, slot).branch;
                let class = layered.class_at(k, b);
                let got = layered.triangulation.color(class);
                if got != want {
                    return Err(Error::VeeringViolation(format!(
                        "layer {k}, switch {s}: {} in slot {} is dual to class {class} colored {got}",
                        b,
                        if slot == SMALL_LEFT { "small_left" } else { "small_right" }
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Everything built from one checked sequence.
#[derive(Clone, Debug)]
pub struct VeeringData {
    pub layered: LayeredTriangulation,
    pub flow: FlowGraph,
}

pub fn build_veering(seq: &CheckedSequence) -> Result<VeeringData> {
    let layered = quotient(seq, build_layers(seq))?;
    color_and_verify(&layered, seq)?;
    let flow = layered.triangulation.flow_graph()?;
    Ok(VeeringData { layered, flow })
}

/// Graph on the branches of `τ` whose edge `b → b'` has multiplicity equal
/// to the number of cut flow graph paths from the edge dual to the
/// relabeled `b` in the first layer to the edge dual to `b'` in the last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathGraph {
    pub graph: Digraph,
}

impl PathGraph {
    /// Adjacency with rows indexed by target and columns by source.
    pub fn transition_matrix(&self) -> TransitionMatrix {
        let n = self.graph.vertex_count();
        let mut m = TransitionMatrix::zeros(n);
        for (a, b, mult) in self.graph.edges() {
            m.set(b, a, mult.clone());
        }
        m
    }
}

pub fn build_path_graph(seq: &CheckedSequence, layered: &LayeredTriangulation) -> PathGraph {
    let cut = &layered.cut;
    let tri = &layered.triangulation;
    let n = cut.layer_edges.len() - 1;
    let nb = seq.track().branch_count();
    // incoming cut flow edges of every tetrahedron top
    let inputs: Vec<(usize, Vec<usize>)> = cut
        .tetrahedra
        .iter()
        .map(|t| {
            let bottom_color = tri.color(layered.class_of_cut[t.bottom]);
            let mut ins = vec![t.bottom];
            ins.extend(
                t.sides.iter().copied().filter(|&e| tri.color(layered.class_of_cut[e]) != bottom_color),
            );
            (t.top, ins)
        })
        .collect();
    let rows: Vec<Vec<BigUint>> = (0..nb)
        .map(|b| {
            let source = cut.layer_edges[0][seq.sequence().relabeling.branch_map[b].index()];
            let mut count = vec![BigUint::zero(); cut.edge_count];
            count[source] = BigUint::one();
            for (top, ins) in &inputs {
                let total: BigUint = ins.iter().map(|&e| &count[e]).sum();
                count[*top] = total;
            }
            (0..nb).map(|t| count[cut.layer_edges[n][t]].clone()).collect()
        })
        .collect();
    let mut g = Digraph::new(nb);
    for (b, row) in rows.into_iter().enumerate() {
        for (t, mult) in row.into_iter().enumerate() {
            g.add_edge(b, t, mult);
        }
    }
    PathGraph { graph: g }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::folding::tests::opt_sequence;
    use crate::folding::{FoldingSequence, Relabeling};
    use crate::track::tests::opt_track;

    fn opt_veering() -> (CheckedSequence, VeeringData) {
        let c = opt_sequence().check().unwrap();
        let v = build_veering(&c).unwrap();
        (c, v)
    }

    #[test]
    fn opt_has_two_tetrahedra_and_two_classes() {
        let (_, v) = opt_veering();
        let tri = &v.layered.triangulation;
        assert_eq!(tri.tetrahedra().len(), 2);
        assert_eq!(tri.classes().len(), 2);
        assert_eq!(v.layered.cut.edge_count, 5);
        // tetrahedron 0 is a left fold, so its bottom is blue
        assert_eq!(tri.color(tri.tetrahedra()[0].bottom), EdgeColor::Blue);
        assert_eq!(tri.color(tri.tetrahedra()[1].bottom), EdgeColor::Red);
        assert_eq!(tri.tetrahedra()[0].sides, [1, 0, 1, 0]);
        assert_eq!(tri.tetrahedra()[1].sides, [0, 1, 0, 1]);
    }

    #[test]
    fn opt_flow_graph() {
        let (_, v) = opt_veering();
        assert_eq!(v.flow.vertex_count(), 2);
        assert_eq!(v.flow.edge_count(), BigUint::from(6u32));
        assert!(v.flow.graph.is_strongly_connected());
        // tetrahedron 0 has bottom class 1 and both red sides in class 0
        assert_eq!(v.flow.graph.multiplicity(1, 0), BigUint::from(1u32));
        assert_eq!(v.flow.graph.multiplicity(0, 0), BigUint::from(2u32));
        assert_eq!(v.flow.graph.multiplicity(0, 1), BigUint::from(1u32));
        assert_eq!(v.flow.graph.multiplicity(1, 1), BigUint::from(2u32));
    }

    #[test]
    fn opt_path_graph_equals_fold_matrix() {
        let (c, v) = opt_veering();
        let g = build_path_graph(&c, &v.layered);
        assert_eq!(g.transition_matrix(), c.transition_matrix());
    }

    #[test]
    fn recolored_class_is_a_veering_violation() {
        let (_, v) = opt_veering();
        let tri = &v.layered.triangulation;
        for class in 0..2 {
            let bad = tri.with_color(class, tri.color(class).other());
            assert!(matches!(bad.verify_veering(), Err(Error::VeeringViolation(_))));
        }
        let flipped = tri.with_chirality(1, Chirality::Left);
        match flipped.verify_veering() {
            Err(Error::VeeringViolation(m)) => assert!(m.contains("tetrahedron 1")),
            other => panic!("expected a violation, got {other:?}"),
        }
    }

    #[test]
    fn empty_sequence_is_not_pseudo_anosov() {
        let seq = FoldingSequence {
            initial: opt_track(),
            moves: vec![],
            relabeling: Relabeling::identity(3, 2),
        };
        let c = seq.check().unwrap();
        let cut = build_layers(&c);
        assert!(cut.tetrahedra.is_empty());
        assert_eq!(cut.edge_count, 3);
        assert!(matches!(quotient(&c, cut), Err(Error::NonPseudoAnosovInput(_))));
    }

    #[test]
    fn every_class_has_incoming_flow() {
        let (_, v) = opt_veering();
        for class in 0..v.flow.vertex_count() {
            assert!(!v.flow.graph.predecessors(class).is_empty());
        }
    }
}
