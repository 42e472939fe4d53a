//! The full analysis of a folding sequence and its serializable report.

use serde::Serialize;

use crate::contraction::{
    build_tau_hat, certify, check_angles, check_charpoly_factorization, check_idempotent,
    count_matrix, induced_branch_map, verify_patch_correspondence, Contraction,
    IrreducibilityCertificate,
};
use crate::error::{Error, Result};
use crate::folding::{CheckedSequence, FoldingSequence};
use crate::matrix::{spectral_radius, SpectralEstimate, TransitionMatrix};
use crate::track::TrainPath;
use crate::veering::{build_path_graph, build_veering, VeeringData};
use crate::walls::{
    check_block_form, check_buttress_pointing, check_cusp_sides, classify_branches, cross_validate,
    find_walls, infinitesimal_subgraph, scc_decompose, verify_wall_properties, BranchClassification,
    BranchKind, InfinitesimalPath, SccDecomposition, Side, Wall, WallDetection,
};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// The collapsed track with its induced map.
#[derive(Clone, Debug)]
pub struct Collapse {
    pub contraction: Contraction,
    pub images: Vec<TrainPath>,
    pub m_hat: TransitionMatrix,
    pub patch_count: usize,
    pub cycle_lengths: Vec<usize>,
}

/// Every intermediate object of the analysis.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub checked: CheckedSequence,
    pub m: TransitionMatrix,
    pub veering: VeeringData,
    pub path_matrix: TransitionMatrix,
    pub scc: SccDecomposition,
    pub walls: WallDetection,
    pub classification: BranchClassification,
    pub paths: Vec<InfinitesimalPath>,
    /// `None` when the track has no infinitesimal branches.
    pub collapse: Option<Collapse>,
    pub certificate: IrreducibilityCertificate,
}

impl Analysis {
    /// The irreducible matrix: the collapsed one, or `M` itself.
    pub fn irreducible_matrix(&self) -> &TransitionMatrix {
        self.collapse.as_ref().map_or(&self.m, |c| &c.m_hat)
    }
}

pub fn analyze(seq: &FoldingSequence, tolerance: f64) -> Result<Analysis> {
    let checked = seq.check()?;
    if checked.is_permutation_only() {
        return Err(Error::NonPseudoAnosovInput(
            "permutation-only sequence (ρ = 1)".into(),
        ));
    }
    let m = checked.transition_matrix();
    let veering = build_veering(&checked)?;
    let path_matrix = build_path_graph(&checked, &veering.layered).transition_matrix();
    if path_matrix != m {
        return Err(Error::CharacterizationMismatch(
            "flow-graph path counts differ from the folding transition matrix".into(),
        ));
    }
    let scc = scc_decompose(&veering.flow)?;
    check_block_form(&veering.flow, &scc)?;
    let tri = &veering.layered.triangulation;
    let walls = find_walls(tri);
    if let Some(f) = walls.flagged.first() {
        return Err(Error::StructureViolation(format!("wall detection: {f}")));
    }
    let issues = verify_wall_properties(&walls.walls, tri);
    if !issues.is_empty() {
        return Err(Error::LemmaViolation(issues.join("; ")));
    }
    cross_validate(&walls.walls, tri, &scc)?;
    let classification = classify_branches(&checked, &m, &veering.layered, &walls.walls)?;
    let track = checked.track();
    let paths = infinitesimal_subgraph(track, &classification)?;
    check_buttress_pointing(&paths)?;
    check_cusp_sides(track, &classification, &paths)?;
    let collapse = if paths.is_empty() {
        None
    } else {
        let contraction = build_tau_hat(track, &classification, &paths)?;
        check_angles(&contraction.tau_hat)?;
        let patch_count = verify_patch_correspondence(track, &contraction)?;
        let images = induced_branch_map(&checked, &contraction)?;
        let m_hat = count_matrix(&images);
        let kept: Vec<usize> = contraction.kept.iter().map(|b| b.index()).collect();
        if m_hat != m.principal_submatrix(&kept) {
            return Err(Error::PathInvalid(
                "recounted collapsed matrix differs from the principal submatrix of M".into(),
            ));
        }
        check_idempotent(&m_hat)?;
        let cycle_lengths =
            check_charpoly_factorization(&m, &m_hat, &classification.infinitesimal_mask())?;
        Some(Collapse { contraction, images, m_hat, patch_count, cycle_lengths })
    };
    let m_irr = collapse.as_ref().map_or(&m, |c| &c.m_hat);
    let certificate = certify(&m, m_irr, tolerance)?;
    Ok(Analysis { checked, m, veering, path_matrix, scc, walls, classification, paths, collapse, certificate })
}

pub const ALREADY_IRREDUCIBLE: &str = "already irreducible";
pub const CONTRACTED: &str = "contracted";

/// An invariant verified by [`analyze`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub statement: &'static str,
    #[serde(skip)]
    pub needs_collapse: bool,
}

const fn check(name: &'static str, statement: &'static str, needs_collapse: bool) -> Check {
    Check { name, statement, needs_collapse }
}

/// Every invariant checked, in the order the analysis checks them.
pub const CHECKS: &[Check] = &[
    check("sequence", "every fold is legal and the relabeling is a slot-preserving isomorphism", false),
    check("veering", "edge colors follow fold chirality and each tetrahedron has the veering side pattern", false),
    check("path_counts", "flow-graph path counts across one period equal the folding transition matrix", false),
    check("block_form", "the flow graph is one component reaching everything plus exit-free simple cycles, a permutation block", false),
    check("wall_properties", "wall colors, faces, disjointness and double appearances are as walls require", false),
    check("infinitesimal_sets", "branches fixed as single branches by a power of the map are exactly those dual to interior wall tops", false),
    check("boundary_not_infinitesimal", "boundary branches are not infinitesimal", false),
    check("infinitesimal_paths", "infinitesimal branches form embedded smooth train paths with tree neighbourhoods, pairwise switch-disjoint", false),
    check("buttress_pointing", "on paths of two or more branches, buttresses on one side all point one way and the other side the other way", false),
    check("cusp_sides", "both patch sides at a cusp on an infinitesimal path contain a non-infinitesimal branch", false),
    check("collapsed_angles", "each collapsed switch has exactly two angles of π and the collapsed track is valid", true),
    check("patch_correspondence", "patches correspond one to one with infinitesimal branches erased, keeping cusp counts", true),
    check("induced_paths", "images under the induced map are train paths whose counts give the principal submatrix of M", true),
    check("idempotence", "the collapsed matrix has no infinitesimal branches", true),
    check("charpoly", "charpoly(M) is charpoly(M̂) times x^k − 1 for each permutation cycle of length k", true),
    check("irreducible", "the final matrix is irreducible with the spectral radius of M, which exceeds 1", false),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowSummary {
    pub vertices: usize,
    pub edges: String,
    pub strongly_connected: bool,
    pub reduced_component: Vec<usize>,
    pub infinitesimal_cycles: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSummary {
    pub branches: Vec<String>,
    pub switches: Vec<String>,
    pub boundary: [String; 2],
    pub buttresses: Vec<ButtressSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ButtressSummary {
    pub switch: String,
    pub branch: String,
    pub kind: BranchKind,
    pub side: Side,
    pub towards: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollapseSummary {
    pub switches: usize,
    pub branches: usize,
    /// Original branch of each collapsed branch.
    pub kept: Vec<String>,
    pub collapsed_switches: Vec<CollapsedSwitch>,
    pub patches: usize,
    pub images: Vec<String>,
    pub m_hat: TransitionMatrix,
    pub charpoly_hat: String,
    pub permutation_cycle_lengths: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollapsedSwitch {
    pub switch: String,
    pub slots: Vec<String>,
    pub angles: Vec<crate::track::Angle>,
}

/// Deterministic summary of an analysis. Timing is the last field and is
/// left out unless requested.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    pub name: Option<String>,
    pub switches: usize,
    pub branches: usize,
    pub folds: usize,
    pub transition_matrix: TransitionMatrix,
    pub charpoly: String,
    pub spectral_radius: SpectralEstimate,
    pub tetrahedra: usize,
    pub edge_classes: usize,
    pub flow_graph: FlowSummary,
    pub walls: Vec<Wall>,
    pub branch_kinds: Vec<BranchKind>,
    pub infinitesimal_paths: Vec<PathSummary>,
    /// `"already irreducible"` or `"contracted"`.
    pub contraction: &'static str,
    /// Absent when the track is already irreducible.
    pub collapse: Option<CollapseSummary>,
    pub checks: Vec<Check>,
    pub certificate: IrreducibilityCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

fn path_string(p: &TrainPath) -> String {
    p.steps().iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

impl Analysis {
    pub fn report(&self, name: Option<String>) -> PipelineReport {
        let track = self.checked.track();
        let tri = &self.veering.layered.triangulation;
        let flow = &self.veering.flow;
        let paths = self
            .paths
            .iter()
            .map(|p| PathSummary {
                branches: p.branches.iter().map(ToString::to_string).collect(),
                switches: p.switches.iter().map(ToString::to_string).collect(),
                boundary: p.boundary.map(|h| h.branch.to_string()),
                buttresses: p
                    .buttresses
                    .iter()
                    .map(|b| ButtressSummary {
                        switch: b.switch.to_string(),
                        branch: b.half.branch.to_string(),
                        kind: b.kind,
                        side: b.side,
                        towards: b.towards,
                    })
                    .collect(),
            })
            .collect();
        let collapse = self.collapse.as_ref().map(|c| {
            let t = &c.contraction.tau_hat;
            CollapseSummary {
                switches: t.switch_count(),
                branches: t.branch_count(),
                kept: c.contraction.kept.iter().map(ToString::to_string).collect(),
                collapsed_switches: c
                    .contraction
                    .collapsed
                    .iter()
                    .map(|&s| CollapsedSwitch {
                        switch: s.to_string(),
                        slots: t
                            .slots(s)
                            .iter()
                            .map(|h| format!("{}:{}", h.branch, if h.end == crate::track::End::Start { "start" } else { "finish" }))
                            .collect(),
                        angles: t.switch(s).angles().to_vec(),
                    })
                    .collect(),
                patches: c.patch_count,
                images: c.images.iter().map(path_string).collect(),
                m_hat: c.m_hat.clone(),
                charpoly_hat: c.m_hat.charpoly().to_string(),
                permutation_cycle_lengths: c.cycle_lengths.clone(),
            }
        });
        PipelineReport {
            name,
            switches: track.switch_count(),
            branches: track.branch_count(),
            folds: self.checked.fold_count(),
            transition_matrix: self.m.clone(),
            charpoly: self.m.charpoly().to_string(),
            spectral_radius: spectral_radius(&self.m, DEFAULT_TOLERANCE * 1e-3),
            tetrahedra: tri.tetrahedra().len(),
            edge_classes: tri.classes().len(),
            flow_graph: FlowSummary {
                vertices: flow.vertex_count(),
                edges: flow.edge_count().to_string(),
                strongly_connected: flow.graph.is_strongly_connected(),
                reduced_component: self.scc.reduced.clone(),
                infinitesimal_cycles: self.scc.infinitesimal_cycles.clone(),
            },
            walls: self.walls.walls.clone(),
            branch_kinds: self.classification.kinds.clone(),
            infinitesimal_paths: paths,
            contraction: if self.collapse.is_some() { CONTRACTED } else { ALREADY_IRREDUCIBLE },
            checks: CHECKS
                .iter()
                .filter(|c| self.collapse.is_some() || !c.needs_collapse)
                .copied()
                .collect(),
            collapse,
            certificate: self.certificate.clone(),
            elapsed_ms: None,
        }
    }
}
