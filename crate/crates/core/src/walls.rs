//! Strongly connected structure of the flow graph, walls, and the
//! classification of branches around infinitesimal ones.
//!
//! A stack is a cycle of tetrahedra `t_0, t_1, …` where the bottom of `t_j`
//! is the top of `t_{j+1}`. A wall is a grid `t_{i,j}` (columns
//! `1 ..= w + 1`, rows `j mod h`) whose interior columns are stacks and whose
//! interior bottom edges are side edges of exactly the two neighbouring
//! tetrahedra in the adjacent columns (same row for odd columns, next row
//! for even ones).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::folding::CheckedSequence;
use crate::matrix::TransitionMatrix;
use crate::track::{
    Angle, BranchId, DirectedBranch, End, HalfBranch, SwitchId, TrainTrack,
};
use crate::veering::{FlowGraph, LayeredTriangulation, Triangulation};

/// Strongly connected components of the flow graph, split into the reduced
/// component and the exit-free cycles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SccDecomposition {
    pub components: Vec<Vec<usize>>,
    pub reduced: Vec<usize>,
    /// Each cycle listed in flow order starting from its least vertex.
    pub infinitesimal_cycles: Vec<Vec<usize>>,
}

impl SccDecomposition {
    /// Vertex order putting the reduced component first and the cycles after.
    pub fn block_order(&self) -> Vec<usize> {
        let mut order = self.reduced.clone();
        for c in &self.infinitesimal_cycles {
            order.extend_from_slice(c);
        }
        order
    }

    pub fn infinitesimal_vertices(&self) -> BTreeSet<usize> {
        self.infinitesimal_cycles.iter().flatten().copied().collect()
    }
}

pub fn scc_decompose(phi: &FlowGraph) -> Result<SccDecomposition> {
    let g = &phi.graph;
    let components = g.strongly_connected_components();
    let n = g.vertex_count();
    let mut reduced = None;
    for (i, comp) in components.iter().enumerate() {
        if g.reachable_from(comp[0]).iter().all(|&r| r) {
            if reduced.is_some() {
                return Err(Error::StructureViolation(
                    "more than one component reaches every vertex".into(),
                ));
            }
            reduced = Some(i);
        }
    }
    let Some(reduced) = reduced else {
        return Err(Error::StructureViolation(format!(
            "no component of the {n}-vertex flow graph reaches every vertex"
        )));
    };
    let mut cycles = Vec::new();
    for (i, comp) in components.iter().enumerate() {
        if i == reduced {
            continue;
        }
        let members: BTreeSet<usize> = comp.iter().copied().collect();
        for &v in comp {
            let succ = g.successors(v);
            let total: num_bigint::BigUint = succ.iter().map(|&w| g.multiplicity(v, w)).sum();
            if succ.len() != 1 || !total.is_one() || !members.contains(&succ[0]) {
                return Err(Error::StructureViolation(format!(
                    "component {comp:?} is not an exit-free simple cycle: vertex {v} has out-edges to {succ:?}"
                )));
            }
        }
        let mut cycle = vec![comp[0]];
        loop {
            let next = g.successors(*cycle.last().expect("nonempty"))[0];
            if next == comp[0] {
                break;
            }
            cycle.push(next);
        }
        if cycle.len() != comp.len() {
            return Err(Error::StructureViolation(format!(
                "component {comp:?} is not a single cycle"
            )));
        }
        cycles.push(cycle);
    }
    Ok(SccDecomposition {
        reduced: components[reduced].clone(),
        components,
        infinitesimal_cycles: cycles,
    })
}

/// Checks that the flow graph adjacency, reordered with the reduced
/// component first, has the form `[[A_red, 0], [B, S]]` with `S` a
/// permutation matrix. Rows are targets, columns sources.
pub fn check_block_form(phi: &FlowGraph, scc: &SccDecomposition) -> Result<()> {
    let g = &phi.graph;
    let n = g.vertex_count();
    let mut a = TransitionMatrix::zeros(n);
    for (from, to, m) in g.edges() {
        a.set(to, from, m.clone());
    }
    let order = scc.block_order();
    if order.len() != n {
        return Err(Error::StructureViolation(format!(
            "components cover {} of {n} vertices",
            order.len()
        )));
    }
    let a = a.permuted(&order);
    let r = scc.reduced.len();
    for row in 0..r {
        for col in r..n {
            if !a.get(row, col).is_zero() {
                return Err(Error::StructureViolation(format!(
                    "edge from infinitesimal vertex {} back into the reduced component",
                    order[col]
                )));
            }
        }
    }
    let s = a.principal_submatrix(&(r..n).collect::<Vec<_>>());
    if !s.is_permutation() {
        return Err(Error::StructureViolation(
            "infinitesimal block is not a permutation matrix".into(),
        ));
    }
    Ok(())
}

/// A wall: `grid[i][j]` is tetrahedron `t_{i+1, j}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Wall {
    pub width: usize,
    pub height: usize,
    pub grid: Vec<Vec<usize>>,
    /// Set when the split of the neighbouring tetrahedra into the two
    /// boundary columns is not forced by the definition.
    pub ambiguous_boundary: bool,
}

impl Wall {
    pub fn interior_tetrahedra(&self) -> impl Iterator<Item = usize> + '_ {
        self.grid[1..self.width].iter().flatten().copied()
    }

    pub fn boundary_tetrahedra(&self) -> impl Iterator<Item = usize> + '_ {
        self.grid[0].iter().chain(self.grid[self.width].iter()).copied()
    }

    pub fn all_tetrahedra(&self) -> impl Iterator<Item = usize> + '_ {
        self.grid.iter().flatten().copied()
    }

    /// Top classes of the interior columns.
    pub fn infinitesimal_classes(&self, tri: &Triangulation) -> BTreeSet<usize> {
        self.interior_tetrahedra().map(|t| tri.tetrahedra()[t].top).collect()
    }

    /// Top classes of the two boundary columns.
    pub fn boundary_classes(&self, tri: &Triangulation) -> BTreeSet<usize> {
        self.boundary_tetrahedra().map(|t| tri.tetrahedra()[t].top).collect()
    }

    /// Top classes of every column.
    pub fn cycle_classes(&self, tri: &Triangulation) -> BTreeSet<usize> {
        self.all_tetrahedra().map(|t| tri.tetrahedra()[t].top).collect()
    }

    pub fn is_boundary(&self, tet: usize) -> bool {
        self.boundary_tetrahedra().any(|t| t == tet)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WallDetection {
    pub walls: Vec<Wall>,
    /// Configurations the detector refused to turn into walls.
    pub flagged: Vec<String>,
}

/// Tetrahedra having `class` as a side edge, once per side position.
fn side_tetrahedra(tri: &Triangulation, class: usize) -> Vec<usize> {
    let mut tets: Vec<usize> = tri.classes()[class].side_incidences.iter().map(|&(t, _)| t).collect();
    tets.sort_unstable();
    tets
}

/// Cycles of the `above` permutation, each starting from its least member
/// and listed downward.
pub fn stacks(tri: &Triangulation) -> Vec<Vec<usize>> {
    let n = tri.tetrahedra().len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for t in 0..n {
        if seen[t] {
            continue;
        }
        let mut stack = vec![t];
        seen[t] = true;
        let mut cur = tri.below(t);
        while cur != t {
            seen[cur] = true;
            stack.push(cur);
            cur = tri.below(cur);
        }
        out.push(stack);
    }
    out
}

struct Column {
    tets: Vec<usize>,
    /// Neighbouring tetrahedra of each member's bottom edge.
    nb: Vec<Vec<usize>>,
}

/// Shift `s` with `D[j+s] ∈ nb(C[j])` and `C[j+1] ∈ nb(D[j+s])` for all `j`.
fn column_shift(c: &Column, d: &Column) -> Option<usize> {
    let h = c.tets.len();
    if d.tets.len() != h {
        return None;
    }
    (0..h).find(|&s| {
        (0..h).all(|j| {
            let dj = (j + s) % h;
            c.nb[j].contains(&d.tets[dj]) && d.nb[dj].contains(&c.tets[(j + 1) % h])
        })
    })
}

pub fn find_walls(tri: &Triangulation) -> WallDetection {
    let mut columns = Vec::new();
    for stack in stacks(tri) {
        let nb: Vec<Vec<usize>> =
            stack.iter().map(|&t| side_tetrahedra(tri, tri.tetrahedra()[t].bottom)).collect();
        let exclusive = nb.iter().all(|s| s.len() == 2 && s.iter().all(|x| !stack.contains(x)));
        if exclusive {
            columns.push(Column { tets: stack, nb });
        }
    }
    let k = columns.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); k];
    for a in 0..k {
        for b in 0..k {
            if a != b && column_shift(&columns[a], &columns[b]).is_some() {
                adj[a].push(b);
            }
        }
    }
    let mut detection = WallDetection::default();
    let mut seen = vec![false; k];
    for start in 0..k {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut i = 0;
        while i < comp.len() {
            for &b in &adj[comp[i]] {
                if !seen[b] {
                    seen[b] = true;
                    comp.push(b);
                }
            }
            i += 1;
        }
        let members: Vec<Vec<usize>> = comp.iter().map(|&c| columns[c].tets.clone()).collect();
        if comp.iter().any(|&c| adj[c].len() > 2) {
            detection.flagged.push(format!("stacks {members:?} branch laterally"));
            continue;
        }
        let ends: Vec<usize> = comp.iter().copied().filter(|&c| adj[c].len() <= 1).collect();
        if ends.is_empty() {
            detection.flagged.push(format!("stacks {members:?} close up into a ring"));
            continue;
        }
        // walk the chain from the end with the least tetrahedron
        let first = *ends.iter().min_by_key(|&&c| columns[c].tets[0]).expect("chain has an end");
        let mut chain = vec![first];
        while let Some(&next) = adj[*chain.last().expect("nonempty")]
            .iter()
            .find(|c| !chain.contains(c))
        {
            chain.push(next);
        }
        match assemble_wall(tri, &columns, &chain) {
            Ok(w) => detection.walls.push(w),
            Err(m) => detection.flagged.push(m),
        }
    }
    detection.walls.sort_by_key(|w| w.grid[1][0]);
    detection
}

fn other(pair: &[usize], not: usize) -> usize {
    if pair[0] == not {
        pair[1]
    } else {
        pair[0]
    }
}

fn assemble_wall(
    tri: &Triangulation,
    columns: &[Column],
    chain: &[usize],
) -> std::result::Result<Wall, String> {
    let w = chain.len() + 1;
    let h = columns[chain[0]].tets.len();
    // interior columns in grid order, indexed by row
    let mut interior: Vec<Vec<usize>> = vec![columns[chain[0]].tets.clone()];
    let mut nbs: Vec<Vec<Vec<usize>>> = vec![columns[chain[0]].nb.clone()];
    for (pos, pair) in chain.windows(2).enumerate() {
        let i = pos + 2; // 1-based column index of pair[0]
        let c = interior.last().expect("nonempty").clone();
        let d = &columns[pair[1]];
        let mut col = vec![usize::MAX; h];
        let mut nb = vec![Vec::new(); h];
        for j in 0..h {
            let dj = c_nb_member(&nbs[pos][j], &d.tets)
                .ok_or_else(|| format!("stacks {:?} and {:?} are not aligned", c, d.tets))?;
            let row = if i % 2 == 1 { j } else { (j + 1) % h };
            let src = d.tets.iter().position(|&t| t == dj).expect("member of column");
            col[row] = dj;
            nb[row] = d.nb[src].clone();
        }
        interior.push(col);
        nbs.push(nb);
    }
    let mut ambiguous = false;
    let (left, right) = if w == 2 {
        let nb = &nbs[0];
        let mut left = vec![usize::MAX; h];
        let mut right = vec![usize::MAX; h];
        // prefer a split where each boundary column is itself a stack
        let consistent = |pick: usize| -> Option<(Vec<usize>, Vec<usize>)> {
            let mut l = vec![usize::MAX; h];
            let mut r = vec![usize::MAX; h];
            for j in 0..h {
                let a = if j == 0 {
                    nb[0][pick]
                } else {
                    let prev = l[j % h];
                    let want = tri.below(prev);
                    if !nb[j].contains(&want) {
                        return None;
                    }
                    want
                };
                l[(j + 1) % h] = a;
                r[(j + 1) % h] = other(&nb[j], a);
            }
            let closes = (0..h).all(|j| tri.below(l[j]) == l[(j + 1) % h]);
            closes.then_some((l, r))
        };
        match (consistent(0), consistent(1)) {
            (Some(x), _) | (None, Some(x)) => {
                left = x.0;
                right = x.1;
            }
            (None, None) => {
                ambiguous = h > 1 && nb.iter().any(|p| p[0] != p[1]);
                for j in 0..h {
                    left[(j + 1) % h] = nb[j][0];
                    right[(j + 1) % h] = nb[j][1];
                }
            }
        }
        (left, right)
    } else {
        let mut left = vec![usize::MAX; h];
        let mut right = vec![usize::MAX; h];
        for j in 0..h {
            let next = &interior[1];
            let a = nbs[0][j]
                .iter()
                .copied()
                .find(|t| !next.contains(t))
                .ok_or("first interior column has no outer neighbour")?;
            left[(j + 1) % h] = a;
            let before = &interior[w - 3];
            let b = nbs[w - 2][j]
                .iter()
                .copied()
                .find(|t| !before.contains(t))
                .ok_or("last interior column has no outer neighbour")?;
            let row = if w % 2 == 1 { j } else { (j + 1) % h };
            right[row] = b;
        }
        (left, right)
    };
    let mut grid = vec![left];
    grid.extend(interior);
    grid.push(right);
    let wall = Wall { width: w, height: h, grid, ambiguous_boundary: ambiguous };
    check_wall_definition(&wall, tri)?;
    Ok(wall)
}

fn c_nb_member(nb: &[usize], tets: &[usize]) -> Option<usize> {
    nb.iter().copied().find(|t| tets.contains(t))
}

/// Checks the wall conditions literally on an assembled grid.
pub fn check_wall_definition(wall: &Wall, tri: &Triangulation) -> std::result::Result<(), String> {
    let (w, h) = (wall.width, wall.height);
    if w < 2 || h < 1 || wall.grid.len() != w + 1 || wall.grid.iter().any(|c| c.len() != h) {
        return Err(format!("grid shape does not match width {w} and height {h}"));
    }
    // boundary columns may share tetrahedra with each other, interior ones may not
    let interior: Vec<usize> = wall.interior_tetrahedra().collect();
    let distinct: BTreeSet<usize> = interior.iter().copied().collect();
    if distinct.len() != interior.len() || wall.boundary_tetrahedra().any(|t| distinct.contains(&t)) {
        return Err(format!("wall grid {:?} repeats an interior tetrahedron", wall.grid));
    }
    let t = |i: usize, j: usize| wall.grid[i - 1][j % h];
    let tets = tri.tetrahedra();
    for i in 2..=w {
        for j in 0..h {
            if tets[t(i, j)].bottom != tets[t(i, j + 1)].top {
                return Err(format!(
                    "bottom of t({i},{j}) is not the top of t({i},{})",
                    (j + 1) % h
                ));
            }
            let row = if i % 2 == 1 { j } else { j + 1 };
            let mut want = vec![t(i - 1, row), t(i + 1, row)];
            want.sort_unstable();
            let got = side_tetrahedra(tri, tets[t(i, j)].bottom);
            if got != want {
                return Err(format!(
                    "bottom of t({i},{j}) is a side edge at positions of tetrahedra {got:?}, expected exactly {want:?}"
                ));
            }
        }
    }
    Ok(())
}

/// Triangular faces of a tetrahedron as class triples: the two bottom faces
/// followed by the two top faces.
pub fn faces(tri: &Triangulation, tet: usize) -> [[usize; 3]; 4] {
    let t = &tri.tetrahedra()[tet];
    let s = t.sides;
    [
        [t.bottom, s[0], s[1]],
        [t.bottom, s[2], s[3]],
        [t.top, s[0], s[3]],
        [t.top, s[1], s[2]],
    ]
}

/// Structural facts every family of maximal walls satisfies. Returns one
/// message per violation.
pub fn verify_wall_properties(walls: &[Wall], tri: &Triangulation) -> Vec<String> {
    let mut issues = Vec::new();
    for (k, wall) in walls.iter().enumerate() {
        let cycle = wall.cycle_classes(tri);
        if wall.width >= 3 {
            let colors: BTreeSet<_> = cycle.iter().map(|&c| tri.color(c)).collect();
            if colors.len() > 1 {
                issues.push(format!(
                    "wall {k} of width {}: cycle edges do not all have the same color",
                    wall.width
                ));
            }
        }
        // the two-cycle-edge face rule rests on the color rule, so it is only
        // checked where the color rule applies
        if wall.width < 3 {
            continue;
        }
        for t in wall.all_tetrahedra() {
            for face in faces(tri, t) {
                let hits = face.iter().filter(|c| cycle.contains(c)).count();
                if hits != 2 {
                    issues.push(format!(
                        "wall {k}: face {face:?} of tetrahedron {t} has {hits} cycle edges, expected 2"
                    ));
                }
            }
        }
    }
    let mut appearances: BTreeMap<usize, Vec<(usize, bool)>> = BTreeMap::new();
    for (k, wall) in walls.iter().enumerate() {
        for t in wall.all_tetrahedra() {
            appearances.entry(t).or_default().push((k, wall.is_boundary(t)));
        }
    }
    let inf_classes: BTreeSet<usize> =
        walls.iter().flat_map(|w| w.infinitesimal_classes(tri)).collect();
    for (&t, apps) in &appearances {
        if apps.len() > 1 && apps.iter().any(|&(_, boundary)| !boundary) {
            issues.push(format!(
                "interior tetrahedron {t} appears in more than one wall position: {apps:?}"
            ));
        }
        if apps.len() > 2 {
            issues.push(format!("tetrahedron {t} appears in {} walls", apps.len()));
        }
        if apps.len() == 2 && apps.iter().all(|&(_, b)| b) {
            let tet = &tri.tetrahedra()[t];
            let positions: Vec<usize> =
                (0..4).filter(|&p| inf_classes.contains(&tet.sides[p])).collect();
            if positions.len() != 2 {
                issues.push(format!(
                    "boundary tetrahedron {t} appears twice but has {} sides on infinitesimal cycles",
                    positions.len()
                ));
            }
            for a in &positions {
                for b in &positions {
                    if (a + 4 - b) % 2 == 1 {
                        issues.push(format!(
                            "boundary tetrahedron {t} meets infinitesimal cycles on adjacent sides {a} and {b}"
                        ));
                    }
                }
            }
        }
    }
    issues.sort();
    issues.dedup();
    issues
}

/// Checks that the interior columns of the walls are exactly the exit-free
/// cycles of the flow graph.
pub fn cross_validate(walls: &[Wall], tri: &Triangulation, scc: &SccDecomposition) -> Result<()> {
    let from_walls: BTreeSet<usize> =
        walls.iter().flat_map(|w| w.infinitesimal_classes(tri)).collect();
    let from_scc = scc.infinitesimal_vertices();
    if from_walls != from_scc {
        return Err(Error::CharacterizationMismatch(format!(
            "wall interior classes {from_walls:?} differ from exit-free flow cycles {from_scc:?}"
        )));
    }
    Ok(())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    Regular,
    Infinitesimal,
    Boundary,
    Buttress,
}

impl fmt::Display for BranchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchKind::Regular => "regular",
            BranchKind::Infinitesimal => "infinitesimal",
            BranchKind::Boundary => "boundary",
            BranchKind::Buttress => "buttress",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchClassification {
    pub kinds: Vec<BranchKind>,
}

impl BranchClassification {
    pub fn is_infinitesimal(&self, b: BranchId) -> bool {
        self.kinds[b.index()] == BranchKind::Infinitesimal
    }

    pub fn of_kind(&self, kind: BranchKind) -> Vec<BranchId> {
        (0..self.kinds.len() as u32).map(BranchId).filter(|b| self.kinds[b.index()] == kind).collect()
    }

    pub fn infinitesimal_mask(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| *k == BranchKind::Infinitesimal).collect()
    }
}

/// Branches lying on cycles of the partial map sending a branch to the
/// unique branch its image covers, when the image is a single branch.
pub fn dynamic_infinitesimal(m: &TransitionMatrix) -> Vec<bool> {
    let n = m.size();
    let next: Vec<Option<usize>> = (0..n)
        .map(|c| {
            if m.column_sum(c).is_one() {
                (0..n).find(|&r| m.get(r, c).is_one())
            } else {
                None
            }
        })
        .collect();
    (0..n)
        .map(|b| {
            let mut cur = b;
            for _ in 0..n {
                match next[cur] {
                    Some(x) => cur = x,
                    None => return false,
                }
                if cur == b {
                    return true;
                }
            }
            false
        })
        .collect()
}

/// Classifies the branches of `τ`, checking that the dynamic and the
/// wall-dual descriptions of infinitesimal branches agree.
pub fn classify_branches(
    seq: &CheckedSequence,
    m: &TransitionMatrix,
    layered: &LayeredTriangulation,
    walls: &[Wall],
) -> Result<BranchClassification> {
    let track = seq.track();
    let last = layered.layer_count() - 1;
    let tri = &layered.triangulation;
    let inf_classes: BTreeSet<usize> = walls.iter().flat_map(|w| w.infinitesimal_classes(tri)).collect();
    let bnd_classes: BTreeSet<usize> = walls.iter().flat_map(|w| w.boundary_classes(tri)).collect();
    let dynamic = dynamic_infinitesimal(m);
    let mut kinds = vec![BranchKind::Regular; track.branch_count()];
    let mut mismatch = Vec::new();
    for b in track.branch_ids() {
        let class = layered.class_at(last, b);
        let wall_dual = inf_classes.contains(&class);
        if wall_dual != dynamic[b.index()] {
            mismatch.push(format!(
                "{b} (class {class}): dynamic {}, wall-dual {wall_dual}",
                dynamic[b.index()]
            ));
        }
        if dynamic[b.index()] {
            kinds[b.index()] = BranchKind::Infinitesimal;
        }
    }
    if !mismatch.is_empty() {
        return Err(Error::CharacterizationMismatch(mismatch.join("; ")));
    }
    for b in track.branch_ids() {
        let class = layered.class_at(last, b);
        if bnd_classes.contains(&class) {
            if kinds[b.index()] == BranchKind::Infinitesimal {
                return Err(Error::LemmaViolation(format!(
                    "{b} is both a boundary branch and infinitesimal"
                )));
            }
            kinds[b.index()] = BranchKind::Boundary;
        }
    }
    for b in track.branch_ids() {
        if kinds[b.index()] != BranchKind::Infinitesimal {
            continue;
        }
        for end in [End::Start, End::Finish] {
            let s = track.attachment(HalfBranch::new(b, end)).switch;
            for h in track.slots(s) {
                if kinds[h.branch.index()] == BranchKind::Regular {
                    kinds[h.branch.index()] = BranchKind::Buttress;
                }
            }
        }
    }
    Ok(BranchClassification { kinds })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Buttress {
    pub switch: SwitchId,
    pub half: HalfBranch,
    pub kind: BranchKind,
    /// Plus is the left of the path's direction of travel.
    pub side: Side,
    /// Whether the forward direction at the switch leads into the large
    /// half-branch.
    pub towards: bool,
}

/// A maximal train path of infinitesimal branches with its neighbourhood.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfinitesimalPath {
    pub branches: Vec<DirectedBranch>,
    /// Switches along the path; one more than the number of branches.
    pub switches: Vec<SwitchId>,
    /// Boundary half-branches at the first and the last switch.
    pub boundary: [HalfBranch; 2],
    /// The branch on the buttress position at each switch, in path order.
    pub buttresses: Vec<Buttress>,
}

/// Extracts the components of the infinitesimal subgraph and checks that
/// each is an embedded smooth train path whose neighbourhood is a tree,
/// flanked by boundary branches, and that distinct components share no
/// switch. A branch may join two components.
pub fn infinitesimal_subgraph(
    track: &TrainTrack,
    cls: &BranchClassification,
) -> Result<Vec<InfinitesimalPath>> {
    let inf: Vec<bool> = cls.infinitesimal_mask();
    let lemma = |m: String| Err(Error::LemmaViolation(m));
    // I-degree of every switch
    let mut deg = vec![0usize; track.switch_count()];
    for b in track.branch_ids().filter(|b| inf[b.index()]) {
        for end in [End::Start, End::Finish] {
            deg[track.attachment(HalfBranch::new(b, end)).switch.index()] += 1;
        }
    }
    let mut used = vec![false; track.branch_count()];
    let mut paths = Vec::new();
    for s in track.switch_ids() {
        if deg[s.index()] != 1 {
            if deg[s.index()] > 2 {
                return lemma(format!("{s} meets {} infinitesimal half-branches", deg[s.index()]));
            }
            continue;
        }
        let first_half = track.slots(s).iter().copied().find(|h| inf[h.branch.index()]).expect("degree one");
        if used[first_half.branch.index()] {
            continue;
        }
        let mut branches = Vec::new();
        let mut switches = vec![s];
        let mut h = first_half;
        loop {
            used[h.branch.index()] = true;
            let d = h.outgoing();
            branches.push(d);
            let far = track.attachment(d.exit());
            switches.push(far.switch);
            if deg[far.switch.index()] == 1 {
                break;
            }
            let arrive = d.exit();
            let next = track
                .slots(far.switch)
                .iter()
                .copied()
                .find(|x| inf[x.branch.index()] && *x != arrive)
                .expect("degree two");
            if used[next.branch.index()] {
                return lemma(format!("infinitesimal branches through {} form a cycle", far.switch));
            }
            h = next;
        }
        // orient from the end switch with the smaller id
        if switches.last() < switches.first() {
            branches = branches.iter().rev().map(|d| d.reversed()).collect();
            switches.reverse();
        }
        let path = describe_path(track, cls, branches, switches)?;
        paths.push(path);
    }
    for b in track.branch_ids() {
        if inf[b.index()] && !used[b.index()] {
            return lemma(format!("infinitesimal {b} lies on a cycle of infinitesimal branches"));
        }
    }
    paths.sort_by_key(|p| p.switches[0]);
    let mut owner: BTreeMap<SwitchId, usize> = BTreeMap::new();
    for (k, p) in paths.iter().enumerate() {
        for &s in &p.switches {
            if let Some(prev) = owner.insert(s, k) {
                return lemma(if prev == k {
                    format!("infinitesimal path {k} is not embedded at {s}")
                } else {
                    format!("infinitesimal paths {prev} and {k} share {s}")
                });
            }
        }
    }
    Ok(paths)
}

fn describe_path(
    track: &TrainTrack,
    cls: &BranchClassification,
    branches: Vec<DirectedBranch>,
    switches: Vec<SwitchId>,
) -> Result<InfinitesimalPath> {
    let lemma = |m: String| Err(Error::LemmaViolation(m));
    let inf = |h: &HalfBranch| cls.is_infinitesimal(h.branch);
    let last = switches.len() - 1;
    let mut boundary = [HalfBranch::new(BranchId(0), End::Start); 2];
    let mut buttresses = Vec::new();
    for (j, &s) in switches.iter().enumerate() {
        let incoming = if j == 0 { None } else { Some(branches[j - 1].exit()) };
        let outgoing = if j == last { None } else { Some(branches[j].entry()) };
        let others: Vec<HalfBranch> = track.slots(s).iter().copied().filter(|h| !inf(h)).collect();
        let kinds: Vec<BranchKind> = others.iter().map(|h| cls.kinds[h.branch.index()]).collect();
        let (h_in, h_out, butt) = match (incoming, outgoing) {
            (Some(i), Some(o)) => {
                if others.len() != 1 || kinds[0] != BranchKind::Buttress {
                    return lemma(format!(
                        "interior switch {s} of an infinitesimal path has non-infinitesimal branches {kinds:?}"
                    ));
                }
                (i, o, others[0])
            }
            (None, Some(o)) | (Some(o), None) => {
                // the boundary half continues the path smoothly; the other
                // half sits where a buttress would and may itself be boundary
                let at = track.attachment(o).slot;
                let smooth = |h: &HalfBranch| {
                    track.is_smooth_crossing(s, at, track.attachment(*h).slot)
                        && cls.kinds[h.branch.index()] == BranchKind::Boundary
                };
                let (Some(bp), 2) = (others.iter().position(smooth), others.len()) else {
                    return lemma(format!(
                        "end switch {s} of an infinitesimal path has branches {kinds:?} and no boundary branch continuing the path"
                    ));
                };
                let bnd = others[bp];
                boundary[usize::from(j == last)] = bnd;
                if j == 0 {
                    (bnd, o, others[1 - bp])
                } else {
                    (o, bnd, others[1 - bp])
                }
            }
            (None, None) => unreachable!("paths have at least one branch"),
        };
        let a_in = track.attachment(h_in);
        let a_out = track.attachment(h_out);
        if !track.is_smooth_crossing(s, a_in.slot, a_out.slot) {
            return lemma(format!("infinitesimal path is not smooth at {s}"));
        }
        let val = track.switch(s).valence();
        let a_b = track.attachment(butt);
        // counterclockwise [out, buttress, in] puts the buttress on the left
        let side = if (a_b.slot + val - a_out.slot) % val < (a_in.slot + val - a_out.slot) % val {
            Side::Plus
        } else {
            Side::Minus
        };
        let towards = track.is_large(h_out);
        buttresses.push(Buttress { switch: s, half: butt, kind: cls.kinds[butt.branch.index()], side, towards });
    }
    Ok(InfinitesimalPath { branches, switches, boundary, buttresses })
}

/// For paths with at least two branches, buttresses on one side all point
/// the same way and those on the other side point the opposite way.
pub fn check_buttress_pointing(paths: &[InfinitesimalPath]) -> Result<()> {
    for (k, p) in paths.iter().enumerate() {
        if p.branches.len() < 2 {
            continue;
        }
        let mut seen: BTreeMap<bool, bool> = BTreeMap::new();
        for b in &p.buttresses {
            let plus = b.side == Side::Plus;
            // orientation relative to the plus side
            let normalized = b.towards == plus;
            seen.insert(normalized, true);
        }
        if seen.len() > 1 {
            return Err(Error::LemmaViolation(format!(
                "infinitesimal path {k}: buttresses do not point uniformly by side: {:?}",
                p.buttresses.iter().map(|b| (b.switch, b.side, b.towards)).collect::<Vec<_>>()
            )));
        }
    }
    Ok(())
}

/// At each cusp on an infinitesimal path both patch sides meeting at the
/// cusp contain a non-infinitesimal branch.
pub fn check_cusp_sides(
    track: &TrainTrack,
    cls: &BranchClassification,
    paths: &[InfinitesimalPath],
) -> Result<()> {
    let on_path: BTreeSet<SwitchId> = paths.iter().flat_map(|p| p.switches.iter().copied()).collect();
    let patches = track.trace_patches()?;
    for (pi, patch) in patches.iter().enumerate() {
        let sides = patch.sides();
        let m = sides.len();
        for (k, (run, cusp)) in sides.iter().enumerate() {
            if *cusp == usize::MAX {
                continue;
            }
            let corner = patch.corners[*cusp];
            if corner.angle != Angle::Zero || !on_path.contains(&corner.switch) {
                continue;
            }
            let after = &sides[(k + 1) % m].0;
            for (label, side) in [("ending", run), ("starting", after)] {
                if side.iter().all(|d| cls.is_infinitesimal(d.branch)) {
                    return Err(Error::LemmaViolation(format!(
                        "patch {pi}: side {label} at the cusp at {} has only infinitesimal branches",
                        corner.switch
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Permutation cycles of `m` restricted to the given branches.
pub fn permutation_cycles(m: &TransitionMatrix, members: &[bool]) -> Vec<Vec<usize>> {
    let n = m.size();
    let mut seen = vec![false; n];
    let mut cycles = Vec::new();
    for b in 0..n {
        if !members[b] || seen[b] {
            continue;
        }
        let mut cycle = vec![b];
        seen[b] = true;
        let mut cur = b;
        loop {
            let next = (0..n).find(|&r| !m.get(r, cur).is_zero());
            match next {
                Some(x) if x != b && !seen[x] && members[x] => {
                    seen[x] = true;
                    cycle.push(x);
                    cur = x;
                }
                _ => break,
            }
        }
        cycles.push(cycle);
    }
    cycles
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::folding::Chirality;
    use crate::veering::{EdgeColor, Tetrahedron};
    use num_bigint::BigUint;

    fn tet(ch: Chirality, bottom: usize, top: usize, sides: [usize; 4]) -> Tetrahedron {
        Tetrahedron { chirality: ch, bottom, top, sides }
    }

    /// Classes `a, b, c, d = 0, 1, 2, 3`; tetrahedron `k` has top class `k`.
    /// Tetrahedron 1 is a height-one stack flanked by tetrahedra 0 and 2.
    pub(crate) fn width_two_wall() -> Triangulation {
        use Chirality::*;
        let (a, b, c, d) = (0, 1, 2, 3);
        Triangulation::new(
            vec![
                tet(Left, a, a, [b, d, c, d]),
                tet(Left, b, b, [a, d, c, d]),
                tet(Left, c, c, [b, d, a, d]),
                tet(Right, d, d, [a, d, c, d]),
            ],
            vec![EdgeColor::Blue, EdgeColor::Blue, EdgeColor::Blue, EdgeColor::Red],
        )
        .unwrap()
    }

    /// Classes `a, b2, b3, c, d = 0..5`; tetrahedra 1 and 2 are adjacent
    /// height-one stacks flanked by 0 and 3, with filler 4.
    pub(crate) fn width_three_wall() -> Triangulation {
        use Chirality::*;
        let (a, b2, b3, c, d) = (0, 1, 2, 3, 4);
        Triangulation::new(
            vec![
                tet(Left, a, a, [b2, d, c, d]),
                tet(Left, b2, b2, [b3, d, a, d]),
                tet(Left, b3, b3, [b2, d, c, d]),
                tet(Left, c, c, [b3, d, a, d]),
                tet(Right, d, d, [a, d, c, d]),
            ],
            vec![EdgeColor::Blue; 4].into_iter().chain([EdgeColor::Red]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn synthetic_triangulations_are_veering() {
        width_two_wall().verify_veering().unwrap();
        width_three_wall().verify_veering().unwrap();
    }

    #[test]
    fn finds_width_two_wall() {
        let tri = width_two_wall();
        let det = find_walls(&tri);
        assert!(det.flagged.is_empty(), "{:?}", det.flagged);
        assert_eq!(det.walls.len(), 1);
        let w = &det.walls[0];
        assert_eq!((w.width, w.height), (2, 1));
        assert_eq!(w.grid, vec![vec![0], vec![1], vec![2]]);
        assert!(verify_wall_properties(&det.walls, &tri).is_empty());
        let phi = tri.flow_graph().unwrap();
        let scc = scc_decompose(&phi).unwrap();
        assert_eq!(scc.infinitesimal_cycles, vec![vec![1]]);
        check_block_form(&phi, &scc).unwrap();
        cross_validate(&det.walls, &tri, &scc).unwrap();
    }

    #[test]
    fn finds_width_three_wall() {
        let tri = width_three_wall();
        let det = find_walls(&tri);
        assert_eq!(det.walls.len(), 1, "{:?}", det.flagged);
        let w = &det.walls[0];
        assert_eq!((w.width, w.height), (3, 1));
        assert_eq!(w.grid, vec![vec![0], vec![1], vec![2], vec![3]]);
        assert!(verify_wall_properties(&det.walls, &tri).is_empty());
        let scc = scc_decompose(&tri.flow_graph().unwrap()).unwrap();
        cross_validate(&det.walls, &tri, &scc).unwrap();
    }

    #[test]
    fn recolored_interior_edge_breaks_color_rule() {
        let tri = width_three_wall();
        let walls = find_walls(&tri).walls;
        let bad = tri.with_color(2, EdgeColor::Red);
        let issues = verify_wall_properties(&walls, &bad);
        assert!(issues.iter().any(|m| m.contains("same color")), "{issues:?}");
    }

    #[test]
    fn shared_interior_tetrahedron_is_reported() {
        let tri = width_two_wall();
        let w = find_walls(&tri).walls.remove(0);
        let mut twin = w.clone();
        twin.grid = vec![vec![3], vec![1], vec![0]];
        let issues = verify_wall_properties(&[w, twin], &tri);
        assert!(issues.iter().any(|m| m.contains("interior tetrahedron 1")), "{issues:?}");
    }

    #[test]
    fn no_walls_in_opt() {
        let c = crate::folding::tests::opt_sequence().check().unwrap();
        let v = crate::veering::build_veering(&c).unwrap();
        let det = find_walls(&v.layered.triangulation);
        assert!(det.walls.is_empty() && det.flagged.is_empty());
        let scc = scc_decompose(&v.flow).unwrap();
        assert_eq!(scc.components.len(), 1);
        assert!(scc.infinitesimal_cycles.is_empty());
        let m = c.transition_matrix();
        let cls = classify_branches(&c, &m, &v.layered, &[]).unwrap();
        assert!(cls.kinds.iter().all(|k| *k == BranchKind::Regular));
        assert!(infinitesimal_subgraph(c.track(), &cls).unwrap().is_empty());
    }

    fn flow(n: usize, edges: &[(usize, usize)]) -> FlowGraph {
        let mut g = crate::graph::Digraph::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b, BigUint::one());
        }
        FlowGraph { graph: g }
    }

    #[test]
    fn block_form_with_three_cycle() {
        let phi = flow(5, &[(0, 1), (1, 0), (0, 0), (1, 2), (2, 3), (3, 4), (4, 2)]);
        let scc = scc_decompose(&phi).unwrap();
        assert_eq!(scc.reduced, vec![0, 1]);
        assert_eq!(scc.infinitesimal_cycles, vec![vec![2, 3, 4]]);
        check_block_form(&phi, &scc).unwrap();
    }

    #[test]
    fn cycles_sharing_a_vertex_are_rejected() {
        let phi = flow(5, &[(0, 1), (1, 0), (1, 2), (2, 3), (3, 2), (2, 4), (4, 2)]);
        assert!(matches!(scc_decompose(&phi), Err(Error::StructureViolation(_))));
    }

    #[test]
    fn dynamic_infinitesimal_on_block_matrix() {
        let m = TransitionMatrix::from_rows(&[
            vec![2, 1, 0, 0],
            vec![1, 1, 0, 0],
            vec![1, 0, 0, 1],
            vec![0, 0, 1, 0],
        ]);
        assert_eq!(dynamic_infinitesimal(&m), vec![false, false, true, true]);
        assert_eq!(permutation_cycles(&m, &[false, false, true, true]), vec![vec![2, 3]]);
    }
}
