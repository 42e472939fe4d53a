//! The `.ttf.json` document format for folding sequences.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "name": "opt",
//!   "track": {
//!     "switches": [{ "id": 0, "kind": "generic" }, …],
//!     "branches": [{ "id": 0, "start": { "switch": 0, "slot": 0 },
//!                    "end": { "switch": 1, "slot": 0 } }, …]
//!   },
//!   "moves": [{ "chirality": "left", "pivot": 1 }, …],
//!   "relabeling": { "branch_map": [[0, 1], …], "switch_map": [[0, 0], …] }
//! }
//! ```
//!
//! Generic switches have slots `0` (large), `1` (small left) and `2` (small
//! right). General switches list one angle per slot, `angles[k]` lying
//! between slots `k` and `k + 1` counterclockwise. Relabeling pairs map ids
//! of the last track to ids of the first.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::folding::{Chirality, FoldMove, FoldingSequence, Relabeling};
use crate::track::{Angle, Attachment, Branch, BranchId, Switch, SwitchId, SwitchShape, TrainTrack};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error{}: {message}", location(*line, *column))]
    Schema { message: String, line: Option<usize>, column: Option<usize> },
    #[error("unsupported format_version {found}; expected {FORMAT_VERSION}")]
    Version { found: String },
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" at line {l}, column {c}"),
        _ => String::new(),
    }
}

impl FormatError {
    fn schema(message: impl Into<String>) -> Self {
        FormatError::Schema { message: message.into(), line: None, column: None }
    }

    fn from_json(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let (line, column, message) = (e.line(), e.column(), e.to_string());
        // serde_json appends its own location; keep only the message
        let message = message.split(" at line ").next().unwrap_or(&message).to_string();
        match e.classify() {
            Category::Data => FormatError::Schema { message, line: Some(line), column: Some(column) },
            _ => FormatError::Parse { line, column, message },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    pub format_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub track: TrackDoc,
    pub moves: Vec<MoveDoc>,
    pub relabeling: RelabelingDoc,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackDoc {
    pub switches: Vec<SwitchDoc>,
    pub branches: Vec<BranchDoc>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchKind {
    Generic,
    General,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchDoc {
    pub id: u32,
    pub kind: SwitchKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<Angle>>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndDoc {
    pub switch: u32,
    pub slot: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchDoc {
    pub id: u32,
    pub start: EndDoc,
    pub end: EndDoc,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveDoc {
    pub chirality: Chirality,
    pub pivot: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelabelingDoc {
    pub branch_map: Vec<(u32, u32)>,
    pub switch_map: Vec<(u32, u32)>,
}

/// Keys accepted at each object path; used to drop unknown keys when
/// parsing leniently.
fn known_keys(path: &str) -> &'static [&'static str] {
    match path {
        "" => &["format_version", "name", "notes", "track", "moves", "relabeling"],
        "track" => &["switches", "branches"],
        "track.switches" => &["id", "kind", "angles"],
        "track.branches" => &["id", "start", "end"],
        "track.branches.start" | "track.branches.end" => &["switch", "slot"],
        "moves" => &["chirality", "pivot"],
        "relabeling" => &["branch_map", "switch_map"],
        _ => &[],
    }
}

fn prune(value: &mut Value, path: &str) {
    match value {
        Value::Object(map) => {
            let keys = known_keys(path);
            map.retain(|k, _| keys.contains(&k.as_str()));
            for (k, v) in map.iter_mut() {
                let sub = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                prune(v, &sub);
            }
        }
        Value::Array(items) => {
            for v in items {
                prune(v, path);
            }
        }
        _ => {}
    }
}

/// Parses a document. Strict mode rejects unknown keys; lenient mode drops
/// them.
pub fn parse_input(text: &str, strict: bool) -> Result<InputDocument, FormatError> {
    let mut value: Value = serde_json::from_str(text).map_err(FormatError::from_json)?;
    let version = value.get("format_version").cloned();
    match version {
        None => return Err(FormatError::schema("missing field `format_version`")),
        Some(Value::Number(n)) if n.as_u64() == Some(FORMAT_VERSION) => {}
        Some(v) => return Err(FormatError::Version { found: v.to_string() }),
    }
    let doc: InputDocument = if strict {
        serde_json::from_str(text).map_err(FormatError::from_json)?
    } else {
        prune(&mut value, "");
        serde_json::from_value(value).map_err(FormatError::from_json)?
    };
    doc.to_sequence()?;
    Ok(doc)
}

/// Canonical text: ids ascending, maps sorted by source, two-space
/// indentation and a trailing newline.
pub fn to_canonical_string(doc: &InputDocument) -> String {
    let mut doc = doc.clone();
    doc.track.switches.sort_by_key(|s| s.id);
    doc.track.branches.sort_by_key(|b| b.id);
    doc.relabeling.branch_map.sort_unstable();
    doc.relabeling.switch_map.sort_unstable();
    let mut s = serde_json::to_string_pretty(&doc).expect("documents serialize");
    s.push('\n');
    s
}

fn dense_ids(what: &str, ids: impl Iterator<Item = u32>) -> Result<usize, FormatError> {
    let mut seen = BTreeMap::new();
    for id in ids {
        if seen.insert(id, ()).is_some() {
            return Err(FormatError::schema(format!("duplicate {what} id {id}")));
        }
    }
    let n = seen.len();
    if let Some((&max, _)) = seen.last_key_value() {
        if max as usize != n - 1 {
            let missing = (0..n as u32).find(|i| !seen.contains_key(i)).unwrap_or(0);
            return Err(FormatError::schema(format!(
                "{what} ids must be 0..{}; id {missing} is missing",
                n - 1
            )));
        }
    }
    Ok(n)
}

fn bijection(what: &str, pairs: &[(u32, u32)], n: usize) -> Result<Vec<u32>, FormatError> {
    let mut map = vec![None; n];
    let mut hit = vec![false; n];
    for &(from, to) in pairs {
        for id in [from, to] {
            if id as usize >= n {
                return Err(FormatError::schema(format!("relabeling refers to missing {what} id {id}")));
            }
        }
        if map[from as usize].replace(to).is_some() {
            return Err(FormatError::schema(format!("relabeling maps {what} {from} twice")));
        }
        if std::mem::replace(&mut hit[to as usize], true) {
            return Err(FormatError::schema(format!("relabeling sends two {what}es to {to}")));
        }
    }
    map.into_iter()
        .enumerate()
        .map(|(i, m)| m.ok_or_else(|| FormatError::schema(format!("relabeling does not map {what} {i}"))))
        .collect()
}

impl InputDocument {
    /// Builds the folding sequence, checking references and ids. Whether
    /// the sequence itself is valid is left to `check_sequence`.
    pub fn to_sequence(&self) -> Result<FoldingSequence, FormatError> {
        let ns = dense_ids("switch", self.track.switches.iter().map(|s| s.id))?;
        let nb = dense_ids("branch", self.track.branches.iter().map(|b| b.id))?;
        let mut switches = vec![Switch::generic(); ns];
        for s in &self.track.switches {
            switches[s.id as usize] = match (s.kind, &s.angles) {
                (SwitchKind::Generic, None) => Switch::generic(),
                (SwitchKind::Generic, Some(_)) => {
                    return Err(FormatError::schema(format!("generic switch {} lists angles", s.id)))
                }
                (SwitchKind::General, Some(a)) => Switch::general(a.clone()),
                (SwitchKind::General, None) => {
                    return Err(FormatError::schema(format!("general switch {} has no angles", s.id)))
                }
            };
        }
        let mut branches = vec![None; nb];
        for b in &self.track.branches {
            let mut ends = [Attachment { switch: SwitchId(0), slot: 0 }; 2];
            for (k, e) in [b.start, b.end].into_iter().enumerate() {
                if e.switch as usize >= ns {
                    return Err(FormatError::schema(format!(
                        "branch {} refers to missing switch id {}",
                        b.id, e.switch
                    )));
                }
                ends[k] = Attachment { switch: SwitchId(e.switch), slot: e.slot };
            }
            branches[b.id as usize] = Some(Branch::new(ends[0], ends[1]));
        }
        let branches: Vec<Branch> = branches.into_iter().map(|b| b.expect("dense ids")).collect();
        let initial = TrainTrack::new(switches, branches).map_err(|e| FormatError::schema(e.to_string()))?;
        let mut moves = Vec::with_capacity(self.moves.len());
        for (k, m) in self.moves.iter().enumerate() {
            if m.pivot as usize >= nb {
                return Err(FormatError::schema(format!(
                    "move {k} refers to missing branch id {}",
                    m.pivot
                )));
            }
            moves.push(FoldMove { chirality: m.chirality, pivot: BranchId(m.pivot) });
        }
        let relabeling = Relabeling {
            branch_map: bijection("branch", &self.relabeling.branch_map, nb)?.into_iter().map(BranchId).collect(),
            switch_map: bijection("switch", &self.relabeling.switch_map, ns)?.into_iter().map(SwitchId).collect(),
        };
        Ok(FoldingSequence { initial, moves, relabeling })
    }

    pub fn from_sequence(seq: &FoldingSequence, name: Option<String>, notes: Option<String>) -> Self {
        let t = &seq.initial;
        let switches = t
            .switch_ids()
            .map(|s| {
                let sw = t.switch(s);
                match &sw.shape {
                    SwitchShape::Generic => SwitchDoc { id: s.0, kind: SwitchKind::Generic, angles: None },
                    SwitchShape::General { angles } => {
                        SwitchDoc { id: s.0, kind: SwitchKind::General, angles: Some(angles.clone()) }
                    }
                }
            })
            .collect();
        let end = |a: Attachment| EndDoc { switch: a.switch.0, slot: a.slot };
        let branches = t
            .branch_ids()
            .map(|b| {
                let br = t.branch(b);
                BranchDoc {
                    id: b.0,
                    start: end(br.end(crate::track::End::Start)),
                    end: end(br.end(crate::track::End::Finish)),
                }
            })
            .collect();
        InputDocument {
            format_version: FORMAT_VERSION,
            name,
            notes,
            track: TrackDoc { switches, branches },
            moves: seq.moves.iter().map(|m| MoveDoc { chirality: m.chirality, pivot: m.pivot.0 }).collect(),
            relabeling: RelabelingDoc {
                branch_map: seq.relabeling.branch_map.iter().enumerate().map(|(i, b)| (i as u32, b.0)).collect(),
                switch_map: seq.relabeling.switch_map.iter().enumerate().map(|(i, s)| (i as u32, s.0)).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opt_doc() -> InputDocument {
        InputDocument::from_sequence(&crate::folding::tests::opt_sequence(), Some("opt".into()), None)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = to_canonical_string(&opt_doc());
        let parsed = parse_input(&text, true).unwrap();
        assert_eq!(to_canonical_string(&parsed), text);
        assert_eq!(parsed.to_sequence().unwrap(), crate::folding::tests::opt_sequence());
    }

    #[test]
    fn empty_input_is_a_parse_error() {
        assert!(matches!(parse_input("", true), Err(FormatError::Parse { .. })));
    }

    #[test]
    fn missing_branch_is_named() {
        let mut doc = opt_doc();
        doc.moves[0].pivot = 7;
        let err = parse_input(&to_canonical_string(&doc), true).unwrap_err();
        assert!(matches!(&err, FormatError::Schema { message, .. } if message.contains("branch id 7")), "{err}");
    }

    #[test]
    fn duplicate_switch_id() {
        let mut doc = opt_doc();
        doc.track.switches[1].id = 0;
        let err = parse_input(&to_canonical_string(&doc), true).unwrap_err();
        assert!(err.to_string().contains("duplicate switch id 0"), "{err}");
    }

    #[test]
    fn version_is_checked() {
        let text = to_canonical_string(&opt_doc()).replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(parse_input(&text, true), Err(FormatError::Version { .. })));
    }

    #[test]
    fn unknown_keys_only_rejected_when_strict() {
        let text = to_canonical_string(&opt_doc()).replacen("\"name\"", "\"colour\": 3,\n  \"name\"", 1);
        let err = parse_input(&text, true).unwrap_err();
        assert!(matches!(err, FormatError::Schema { line: Some(_), .. }), "{err}");
        assert_eq!(parse_input(&text, false).unwrap(), opt_doc());
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_input("{\n  \"format_version\": 1,\n  oops\n}", true).unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 3, .. }), "{err}");
    }
}
