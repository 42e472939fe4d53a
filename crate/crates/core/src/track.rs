//! Train tracks on punctured surfaces.
//!
//! A track is stored as a ribbon graph: every switch carries a counterclockwise
//! cyclic list of slots, each slot holds exactly one half-branch, and the
//! corner between slot `k` and slot `k + 1` carries an angle of either `0`
//! or `π`. Generic switches always have three slots ordered
//! `[large, small_left, small_right]`; `small_left` is the first small
//! half-branch met when rotating counterclockwise from the large one.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BranchId(pub u32);

impl BranchId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SwitchId(pub u32);

impl SwitchId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Angle {
    Zero,
    Pi,
}

/// Slot positions of a generic switch.
pub const LARGE: usize = 0;
pub const SMALL_LEFT: usize = 1;
pub const SMALL_RIGHT: usize = 2;

/// Corner angles of a generic switch in slot order.
pub const GENERIC_ANGLES: [Angle; 3] = [Angle::Pi, Angle::Zero, Angle::Pi];

/// One of the two ends of a branch.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    Start,
    Finish,
}

impl End {
    pub fn index(self) -> usize {
        match self {
            End::Start => 0,
            End::Finish => 1,
        }
    }

    pub fn other(self) -> End {
        match self {
            End::Start => End::Finish,
            End::Finish => End::Start,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfBranch {
    pub branch: BranchId,
    pub end: End,
}

impl HalfBranch {
    pub fn new(branch: BranchId, end: End) -> Self {
        HalfBranch { branch, end }
    }

    pub fn opposite(self) -> HalfBranch {
        HalfBranch::new(self.branch, self.end.other())
    }

    /// The directed branch that leaves the switch through this half-branch.
    pub fn outgoing(self) -> DirectedBranch {
        match self.end {
            End::Start => DirectedBranch::forward(self.branch),
            End::Finish => DirectedBranch::backward(self.branch),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Attachment {
    pub switch: SwitchId,
    pub slot: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn reversed(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// A branch traversed in a chosen direction.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedBranch {
    pub branch: BranchId,
    pub direction: Direction,
}

impl DirectedBranch {
    pub fn forward(branch: BranchId) -> Self {
        DirectedBranch { branch, direction: Direction::Forward }
    }

    pub fn backward(branch: BranchId) -> Self {
        DirectedBranch { branch, direction: Direction::Backward }
    }

    pub fn reversed(self) -> Self {
        DirectedBranch { branch: self.branch, direction: self.direction.reversed() }
    }

    /// The half-branch through which the traversal enters the branch.
    pub fn entry(self) -> HalfBranch {
        match self.direction {
            Direction::Forward => HalfBranch::new(self.branch, End::Start),
            Direction::Backward => HalfBranch::new(self.branch, End::Finish),
        }
    }

    /// The half-branch through which the traversal leaves the branch.
    pub fn exit(self) -> HalfBranch {
        self.entry().opposite()
    }
}

impl fmt::Display for DirectedBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.direction {
            Direction::Forward => write!(f, "+{}", self.branch.0),
            Direction::Backward => write!(f, "-{}", self.branch.0),
        }
    }
}

/// A sequence of directed branches. Validity as a train path is checked
/// against a particular track with [`TrainTrack::is_train_path`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrainPath(pub Vec<DirectedBranch>);

impl TrainPath {
    pub fn single(branch: DirectedBranch) -> Self {
        TrainPath(vec![branch])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> &[DirectedBranch] {
        &self.0
    }

    pub fn reversed(&self) -> TrainPath {
        TrainPath(self.0.iter().rev().map(|d| d.reversed()).collect())
    }

    /// Number of traversals of each branch, indexed by branch id.
    pub fn branch_counts(&self, branch_count: usize) -> Vec<u64> {
        let mut counts = vec![0u64; branch_count];
        for step in &self.0 {
            counts[step.branch.index()] += 1;
        }
        counts
    }
}

impl fmt::Display for TrainPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, step) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{step}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SwitchShape {
    /// Trivalent switch with slots `[large, small_left, small_right]`.
    Generic,
    /// Arbitrary valence with explicit corner angles; `angles[k]` sits between
    /// slot `k` and slot `k + 1` (cyclically).
    General { angles: Vec<Angle> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Switch {
    pub shape: SwitchShape,
}

impl Switch {
    pub fn generic() -> Self {
        Switch { shape: SwitchShape::Generic }
    }

    pub fn general(angles: Vec<Angle>) -> Self {
        Switch { shape: SwitchShape::General { angles } }
    }

    pub fn is_generic(&self) -> bool {
        matches!(self.shape, SwitchShape::Generic)
    }

    pub fn valence(&self) -> usize {
        self.angles().len()
    }

    pub fn angles(&self) -> &[Angle] {
        match &self.shape {
            SwitchShape::Generic => &GENERIC_ANGLES,
            SwitchShape::General { angles } => angles,
        }
    }

    pub fn pi_count(&self) -> usize {
        self.angles().iter().filter(|a| **a == Angle::Pi).count()
    }

    /// Splits the slots into the two tangent directions ("gates"). Returns
    /// `None` unless the switch has exactly two `π` corners.
    pub fn gates(&self) -> Option<Vec<u8>> {
        let angles = self.angles();
        let pis: Vec<usize> =
            angles.iter().enumerate().filter(|(_, a)| **a == Angle::Pi).map(|(i, _)| i).collect();
        if pis.len() != 2 {
            return None;
        }
        let n = angles.len();
        let mut gates = vec![0u8; n];
        // slots strictly after the first π corner up to and including the
        // slot before the second π corner form gate 1
        let mut k = (pis[0] + 1) % n;
        loop {
            gates[k] = 1;
            if k == pis[1] {
                break;
            }
            k = (k + 1) % n;
        }
        Some(gates)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Branch {
    pub ends: [Attachment; 2],
}

impl Branch {
    pub fn new(start: Attachment, finish: Attachment) -> Self {
        Branch { ends: [start, finish] }
    }

    pub fn end(&self, end: End) -> Attachment {
        self.ends[end.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrackError {
    #[error("malformed track: {0}")]
    MalformedTrack(String),
    #[error("unknown branch {0}")]
    UnknownBranch(BranchId),
    #[error("unknown switch {0}")]
    UnknownSwitch(SwitchId),
}

/// A train track: switches, branches, and the slot table linking them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainTrack {
    switches: Vec<Switch>,
    branches: Vec<Branch>,
    slots: Vec<Vec<HalfBranch>>,
}

impl TrainTrack {
    /// Builds a track, checking that every attachment refers to an existing
    /// switch slot and that every slot holds exactly one half-branch. Angle
    /// data and complementary regions are checked by [`TrainTrack::validate`].
    pub fn new(switches: Vec<Switch>, branches: Vec<Branch>) -> Result<Self, TrackError> {
        let mut slots: Vec<Vec<Option<HalfBranch>>> =
            switches.iter().map(|s| vec![None; s.valence()]).collect();
        for (b, branch) in branches.iter().enumerate() {
            for end in [End::Start, End::Finish] {
                let at = branch.end(end);
                let half = HalfBranch::new(BranchId(b as u32), end);
                let row = slots.get_mut(at.switch.index()).ok_or_else(|| {
                    TrackError::MalformedTrack(format!(
                        "branch {} refers to missing switch {}",
                        b, at.switch
                    ))
                })?;
                let cell = row.get_mut(at.slot).ok_or_else(|| {
                    TrackError::MalformedTrack(format!(
                        "branch {} refers to slot {} of switch {} which has valence {}",
                        b,
                        at.slot,
                        at.switch,
                        switches[at.switch.index()].valence()
                    ))
                })?;
                if let Some(prev) = cell {
                    return Err(TrackError::MalformedTrack(format!(
                        "slot {} of switch {} is filled twice (branches {} and {})",
                        at.slot, at.switch, prev.branch.0, b
                    )));
                }
                *cell = Some(half);
            }
        }
        let mut filled = Vec::with_capacity(slots.len());
        for (s, row) in slots.into_iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (k, cell) in row.into_iter().enumerate() {
                out.push(cell.ok_or_else(|| {
                    TrackError::MalformedTrack(format!("slot {k} of switch v{s} is empty"))
                })?);
            }
            filled.push(out);
        }
        Ok(TrainTrack { switches, branches, slots: filled })
    }

    /// Builds a track from per-switch slot lists of half-branches.
    pub fn from_slots(
        switches: Vec<Switch>,
        slots: Vec<Vec<HalfBranch>>,
        branch_count: usize,
    ) -> Result<Self, TrackError> {
        let mut ends: Vec<[Option<Attachment>; 2]> = vec![[None, None]; branch_count];
        for (s, row) in slots.iter().enumerate() {
            for (k, half) in row.iter().enumerate() {
                let cell = ends
                    .get_mut(half.branch.index())
                    .ok_or(TrackError::UnknownBranch(half.branch))?;
                if cell[half.end.index()].is_some() {
                    return Err(TrackError::MalformedTrack(format!(
                        "half-branch {:?} of {} attached twice",
                        half.end, half.branch
                    )));
                }
                cell[half.end.index()] = Some(Attachment { switch: SwitchId(s as u32), slot: k });
            }
        }
        let mut branches = Vec::with_capacity(branch_count);
        for (b, e) in ends.into_iter().enumerate() {
            match e {
                [Some(start), Some(finish)] => branches.push(Branch::new(start, finish)),
                _ => {
                    return Err(TrackError::MalformedTrack(format!(
                        "branch b{b} does not have two attached ends"
                    )))
                }
            }
        }
        TrainTrack::new(switches, branches)
    }

    pub fn switch_count(&self) -> usize {
        self.switches.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn switches(&self) -> &[Switch] {
        &self.switches
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn switch(&self, id: SwitchId) -> &Switch {
        &self.switches[id.index()]
    }

    pub fn branch(&self, id: BranchId) -> &Branch {
        &self.branches[id.index()]
    }

    pub fn branch_ids(&self) -> impl Iterator<Item = BranchId> {
        (0..self.branches.len() as u32).map(BranchId)
    }

    pub fn switch_ids(&self) -> impl Iterator<Item = SwitchId> {
        (0..self.switches.len() as u32).map(SwitchId)
    }

    pub fn attachment(&self, half: HalfBranch) -> Attachment {
        self.branches[half.branch.index()].end(half.end)
    }

    pub fn half_at(&self, switch: SwitchId, slot: usize) -> HalfBranch {
        self.slots[switch.index()][slot]
    }

    /// Half-branches at a switch in counterclockwise slot order.
    pub fn slots(&self, switch: SwitchId) -> &[HalfBranch] {
        &self.slots[switch.index()]
    }

    pub fn is_generic(&self) -> bool {
        self.switches.iter().all(Switch::is_generic)
    }

    pub fn contains_branch(&self, id: BranchId) -> bool {
        id.index() < self.branches.len()
    }

    /// `#switches − #branches`.
    pub fn euler_characteristic(&self) -> i64 {
        self.switches.len() as i64 - self.branches.len() as i64
    }

    /// True when passing from `slot_a` to `slot_b` at `switch` is a smooth
    /// crossing: the two slots lie in different gates.
    pub fn is_smooth_crossing(&self, switch: SwitchId, slot_a: usize, slot_b: usize) -> bool {
        if slot_a == slot_b {
            return false;
        }
        match self.switches[switch.index()].gates() {
            Some(g) => g[slot_a] != g[slot_b],
            None => false,
        }
    }

    /// Whether `half` is the large half-branch at a generic switch.
    pub fn is_large(&self, half: HalfBranch) -> bool {
        let at = self.attachment(half);
        self.switches[at.switch.index()].is_generic() && at.slot == LARGE
    }

    /// Whether a branch is small (both halves small at generic switches).
    pub fn is_small(&self, branch: BranchId) -> bool {
        [End::Start, End::Finish].iter().all(|&e| {
            let at = self.attachment(HalfBranch::new(branch, e));
            self.switches[at.switch.index()].is_generic() && at.slot != LARGE
        })
    }

    pub fn is_connected(&self) -> bool {
        if self.switches.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.switches.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(s) = queue.pop_front() {
            for half in &self.slots[s] {
                let t = self.attachment(half.opposite()).switch.index();
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen.into_iter().all(|x| x)
    }

    /// Checks that `path` is a train path: consecutive branches meet at a
    /// common switch and every internal crossing is smooth.
    pub fn is_train_path(&self, path: &[DirectedBranch]) -> Result<bool, TrackError> {
        for step in path {
            if !self.contains_branch(step.branch) {
                return Err(TrackError::UnknownBranch(step.branch));
            }
        }
        if path.is_empty() {
            return Ok(false);
        }
        for pair in path.windows(2) {
            let arrive = self.attachment(pair[0].exit());
            let leave = self.attachment(pair[1].entry());
            if arrive.switch != leave.switch
                || !self.is_smooth_crossing(arrive.switch, arrive.slot, leave.slot)
            {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Traces every complementary patch by walking its boundary. Patches are
    /// returned in canonical order: each boundary starts at its least directed
    /// branch, and patches are sorted by that element.
    pub fn trace_patches(&self) -> Result<Vec<Patch>, TrackError> {
        let n = self.branches.len();
        let mut seen = vec![false; 2 * n];
        let key = |d: DirectedBranch| {
            2 * d.branch.index() + usize::from(d.direction == Direction::Backward)
        };
        let mut patches = Vec::new();
        for b in 0..n {
            for dir in [Direction::Forward, Direction::Backward] {
                let first = DirectedBranch { branch: BranchId(b as u32), direction: dir };
                if seen[key(first)] {
                    continue;
                }
                let mut boundary = Vec::new();
                let mut corners = Vec::new();
                let mut cur = first;
                loop {
                    if seen[key(cur)] {
                        return Err(TrackError::MalformedTrack(format!(
                            "boundary walk from {first} does not close"
                        )));
                    }
                    seen[key(cur)] = true;
                    boundary.push(cur);
                    let arrive = self.attachment(cur.exit());
                    let sw = &self.switches[arrive.switch.index()];
                    let val = sw.valence();
                    let out_slot = (arrive.slot + val - 1) % val;
                    corners.push(Corner {
                        switch: arrive.switch,
                        slot_in: arrive.slot,
                        slot_out: out_slot,
                        angle: sw.angles()[out_slot],
                    });
                    cur = self.slots[arrive.switch.index()][out_slot].outgoing();
                    if cur == first {
                        break;
                    }
                    if boundary.len() > 2 * n {
                        return Err(TrackError::MalformedTrack(format!(
                            "boundary walk from {first} does not close"
                        )));
                    }
                }
                patches.push(Patch::canonical(boundary, corners));
            }
        }
        patches.sort_by_key(|p| p.boundary[0]);
        Ok(patches)
    }

    /// Checks every track invariant and returns the violations found.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        for (s, sw) in self.switches.iter().enumerate() {
            let id = SwitchId(s as u32);
            if let SwitchShape::General { angles } = &sw.shape {
                if angles.len() < 3 {
                    issues.push(ValidationIssue::LowValence { switch: id, valence: angles.len() });
                }
            }
            let pi = sw.pi_count();
            if pi != 2 {
                issues.push(ValidationIssue::AngleSum { switch: id, pi_corners: pi });
            }
        }
        if !self.is_connected() {
            issues.push(ValidationIssue::Disconnected);
        }
        let chi = self.euler_characteristic();
        if chi >= 0 {
            issues.push(ValidationIssue::NonNegativeEuler { euler_characteristic: chi });
        }
        match self.trace_patches() {
            Ok(patches) => {
                for (i, p) in patches.iter().enumerate() {
                    let cusps = p.cusp_count();
                    if cusps == 0 {
                        issues.push(ValidationIssue::ForbiddenRegion {
                            patch: i,
                            first: p.boundary[0],
                            cusps,
                        });
                    }
                }
            }
            Err(e) => issues.push(ValidationIssue::Malformed(e.to_string())),
        }
        ValidationReport { issues }
    }

    /// All orientation-preserving isomorphisms onto `other` that respect slot
    /// angles. Each is returned as `(switch_map, branch_map, end_flips)`.
    pub fn isomorphisms_to(&self, other: &TrainTrack) -> Vec<TrackIsomorphism> {
        let mut out = Vec::new();
        if self.switches.len() != other.switches.len()
            || self.branches.len() != other.branches.len()
            || self.switches.is_empty()
        {
            return out;
        }
        let src = SwitchId(0);
        for t in other.switch_ids() {
            let val = self.switches[0].valence();
            if other.switch(t).valence() != val {
                continue;
            }
            for rot in 0..val {
                if let Some(iso) = self.extend_isomorphism(other, src, t, rot) {
                    out.push(iso);
                }
            }
        }
        out
    }

    fn extend_isomorphism(
        &self,
        other: &TrainTrack,
        src: SwitchId,
        dst: SwitchId,
        rot: usize,
    ) -> Option<TrackIsomorphism> {
        let ns = self.switches.len();
        let mut smap: Vec<Option<(SwitchId, usize)>> = vec![None; ns];
        let mut bmap: Vec<Option<(BranchId, bool)>> = vec![None; self.branches.len()];
        let mut used = vec![false; ns];
        smap[src.index()] = Some((dst, rot));
        used[dst.index()] = true;
        let mut queue = VecDeque::from([src]);
        while let Some(s) = queue.pop_front() {
            let (t, r) = smap[s.index()].unwrap();
            let a = &self.switches[s.index()];
            let b = &other.switches[t.index()];
            let val = a.valence();
            if b.valence() != val || a.is_generic() != b.is_generic() {
                return None;
            }
            for k in 0..val {
                if a.angles()[k] != b.angles()[(k + r) % val] {
                    return None;
                }
            }
            for k in 0..val {
                let h = self.slots[s.index()][k];
                let g = other.slots[t.index()][(k + r) % val];
                let flip = h.end != g.end;
                match bmap[h.branch.index()] {
                    None => bmap[h.branch.index()] = Some((g.branch, flip)),
                    Some(prev) if prev == (g.branch, flip) => {}
                    Some(_) => return None,
                }
                let far = self.attachment(h.opposite());
                let far_img = other.attachment(g.opposite());
                match smap[far.switch.index()] {
                    None => {
                        if used[far_img.switch.index()] {
                            return None;
                        }
                        let fval = self.switches[far.switch.index()].valence();
                        let fr = (far_img.slot + fval - far.slot % fval) % fval;
                        smap[far.switch.index()] = Some((far_img.switch, fr));
                        used[far_img.switch.index()] = true;
                        queue.push_back(far.switch);
                    }
                    Some((fs, fr)) => {
                        let fval = self.switches[far.switch.index()].valence();
                        if fs != far_img.switch || (far.slot + fr) % fval != far_img.slot {
                            return None;
                        }
                    }
                }
            }
        }
        let switch_map: Option<Vec<(SwitchId, usize)>> = smap.into_iter().collect();
        let branch_map: Option<Vec<(BranchId, bool)>> = bmap.into_iter().collect();
        let switch_map = switch_map?;
        let branch_map = branch_map?;
        let mut hit = vec![false; other.branches.len()];
        for (b, _) in &branch_map {
            if std::mem::replace(&mut hit[b.index()], true) {
                return None;
            }
        }
        Some(TrackIsomorphism {
            switch_map: switch_map.iter().map(|x| x.0).collect(),
            rotations: switch_map.iter().map(|x| x.1).collect(),
            branch_map: branch_map.iter().map(|x| x.0).collect(),
            end_flips: branch_map.iter().map(|x| x.1).collect(),
        })
    }

    /// A labeling-independent code; two connected tracks have equal codes iff
    /// they are isomorphic.
    pub fn canonical_code(&self) -> Vec<u32> {
        let mut best: Option<Vec<u32>> = None;
        for s in self.switch_ids() {
            let val = self.switch(s).valence();
            for rot in 0..val {
                let code = self.code_from(s, rot);
                if best.as_ref().is_none_or(|b| code < *b) {
                    best = Some(code);
                }
            }
        }
        best.unwrap_or_default()
    }

    fn code_from(&self, start: SwitchId, rot: usize) -> Vec<u32> {
        let ns = self.switches.len();
        let mut order: Vec<Option<(u32, usize)>> = vec![None; ns];
        let mut seq = vec![start];
        order[start.index()] = Some((0, rot));
        let mut code = Vec::new();
        let mut i = 0;
        while i < seq.len() {
            let s = seq[i];
            let (_, r) = order[s.index()].unwrap();
            let sw = &self.switches[s.index()];
            let val = sw.valence();
            code.push(val as u32);
            code.push(u32::from(sw.is_generic()));
            for k in 0..val {
                let slot = (k + r) % val;
                code.push(u32::from(sw.angles()[slot] == Angle::Pi));
                let far = self.attachment(self.slots[s.index()][slot].opposite());
                if order[far.switch.index()].is_none() {
                    let fval = self.switches[far.switch.index()].valence();
                    // canonical rotation of an unseen switch: first pick is the
                    // slot we arrived through for general switches, zero for
                    // generic ones (their slots are not rotatable)
                    let fr = if self.switches[far.switch.index()].is_generic() {
                        0
                    } else {
                        far.slot % fval
                    };
                    order[far.switch.index()] = Some((seq.len() as u32, fr));
                    seq.push(far.switch);
                }
                let (fi, fr) = order[far.switch.index()].unwrap();
                let fval = self.switches[far.switch.index()].valence();
                code.push(fi);
                code.push(((far.slot + fval - fr) % fval) as u32);
            }
            i += 1;
        }
        code
    }
}

/// A structure-preserving bijection between two tracks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrackIsomorphism {
    pub switch_map: Vec<SwitchId>,
    /// Slot offset at each switch: slot `k` maps to slot `k + rotation`.
    pub rotations: Vec<usize>,
    pub branch_map: Vec<BranchId>,
    /// Whether the branch's ends are exchanged by the map.
    pub end_flips: Vec<bool>,
}

/// A corner of a patch boundary at a switch.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Corner {
    pub switch: SwitchId,
    pub slot_in: usize,
    pub slot_out: usize,
    pub angle: Angle,
}

/// A complementary region of the track. Corner `i` sits between
/// `boundary[i]` and `boundary[i + 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patch {
    pub boundary: Vec<DirectedBranch>,
    pub corners: Vec<Corner>,
    pub punctured: bool,
}

impl Patch {
    fn canonical(mut boundary: Vec<DirectedBranch>, mut corners: Vec<Corner>) -> Patch {
        let start = boundary
            .iter()
            .enumerate()
            .min_by_key(|(_, d)| **d)
            .map(|(i, _)| i)
            .unwrap_or(0);
        boundary.rotate_left(start);
        corners.rotate_left(start);
        Patch { boundary, corners, punctured: true }
    }

    pub fn cusp_count(&self) -> usize {
        self.corners.iter().filter(|c| c.angle == Angle::Zero).count()
    }

    pub fn cusps(&self) -> Vec<SwitchId> {
        self.corners.iter().filter(|c| c.angle == Angle::Zero).map(|c| c.switch).collect()
    }

    /// Splits the boundary into its sides: maximal runs between cusps. Each
    /// side is returned with the index of the cusp corner that ends it.
    pub fn sides(&self) -> Vec<(Vec<DirectedBranch>, usize)> {
        let n = self.boundary.len();
        let cusp_idx: Vec<usize> =
            (0..n).filter(|&i| self.corners[i].angle == Angle::Zero).collect();
        if cusp_idx.is_empty() {
            return vec![(self.boundary.clone(), usize::MAX)];
        }
        let mut sides = Vec::new();
        for (j, &c) in cusp_idx.iter().enumerate() {
            let prev = cusp_idx[(j + cusp_idx.len() - 1) % cusp_idx.len()];
            let mut run = Vec::new();
            let mut i = (prev + 1) % n;
            loop {
                run.push(self.boundary[i]);
                if i == c {
                    break;
                }
                i = (i + 1) % n;
            }
            sides.push((run, c));
        }
        sides
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidationIssue {
    AngleSum { switch: SwitchId, pi_corners: usize },
    LowValence { switch: SwitchId, valence: usize },
    ForbiddenRegion { patch: usize, first: DirectedBranch, cusps: usize },
    Disconnected,
    NonNegativeEuler { euler_characteristic: i64 },
    Malformed(String),
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::AngleSum { switch, pi_corners } => write!(
                f,
                "angle sum violation: switch {switch} has {pi_corners} corners of angle pi (angle sum {pi_corners}pi, expected 2pi)"
            ),
            ValidationIssue::LowValence { switch, valence } => {
                write!(f, "switch {switch} has valence {valence}, expected at least 3")
            }
            ValidationIssue::ForbiddenRegion { patch, first, cusps } => write!(
                f,
                "nullgon/monogon complementary region: patch {patch} (boundary starting {first}) has {cusps} cusps"
            ),
            ValidationIssue::Disconnected => write!(f, "track is disconnected"),
            ValidationIssue::NonNegativeEuler { euler_characteristic } => write!(
                f,
                "euler characteristic {euler_characteristic} is not negative"
            ),
            ValidationIssue::Malformed(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.issues.iter().map(ToString::to_string).collect()
    }
}
