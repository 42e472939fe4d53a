//! Replays the fixture corpus: format round trips, full analyses, reports
//! and DOT output.

mod common;

use std::fs;

use common::*;
use ttforge::dot::export_dot;
use ttforge::io::{parse_input, to_canonical_string};
use ttforge::pipeline::{analyze, ALREADY_IRREDUCIBLE, CONTRACTED, DEFAULT_TOLERANCE};
use ttforge::Error;

#[test]
fn corpus_files_are_canonical() {
    let paths = fixture_paths();
    assert!(paths.len() > 2, "corpus missing under {}", fixtures_dir().display());
    for p in paths.iter().chain(&invalid_fixture_paths()) {
        let text = fs::read_to_string(p).unwrap();
        let doc = parse_input(&text, true).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(to_canonical_string(&doc), text, "{} is not canonical", p.display());
        let stem = p.file_name().unwrap().to_string_lossy().trim_end_matches(".ttf.json").to_string();
        assert_eq!(doc.name.as_deref(), Some(stem.as_str()));
    }
}

#[test]
fn every_fixture_analyzes() {
    for p in fixture_paths() {
        let text = fs::read_to_string(&p).unwrap();
        let doc = parse_input(&text, true).unwrap();
        let a = analyze(&doc.to_sequence().unwrap(), DEFAULT_TOLERANCE).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        if let Some(notes) = &doc.notes {
            if notes.contains("walls: yes") {
                assert!(!a.walls.walls.is_empty(), "{}", p.display());
            }
            if notes.contains("infinitesimal: yes") {
                assert!(a.collapse.is_some(), "{}", p.display());
            }
        }
        assert!(a.certificate.rho.value > 1.0);
    }
}

#[test]
fn invalid_fixtures_are_rejected() {
    let perm = load(&fixtures_dir().join("invalid/permutation-only.ttf.json"));
    let err = analyze(&perm, DEFAULT_TOLERANCE).unwrap_err();
    assert!(matches!(err, Error::NonPseudoAnosovInput(_)), "{err}");
    assert!(err.to_string().contains("(ρ = 1)"));
    assert!(!err.is_internal());

    let bad = load(&fixtures_dir().join("invalid/bad-relabeling.ttf.json"));
    let err = analyze(&bad, DEFAULT_TOLERANCE).unwrap_err();
    assert!(matches!(err, Error::InvalidSequence { layer: 2, .. }), "{err}");
}

#[test]
fn opt_report() {
    let a = analyze(&load(&fixtures_dir().join("opt.ttf.json")), DEFAULT_TOLERANCE).unwrap();
    let r = a.report(Some("opt".into()));
    assert_eq!(r.contraction, ALREADY_IRREDUCIBLE);
    assert_eq!(r.charpoly, a.m.charpoly().to_string());
    assert_eq!((r.tetrahedra, r.edge_classes), (2, 2));
    assert!(r.flow_graph.strongly_connected);
    assert!(r.checks.iter().all(|c| !c.needs_collapse));
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"transition_matrix\":[[0,0,1],[1,2,0],[0,1,2]]"), "{json}");
    assert!(!json.contains("elapsed_ms"));
}

#[test]
fn wall_report_is_deterministic() {
    let seq = load(&fixtures_dir().join("wall-width2.ttf.json"));
    let render = || serde_json::to_string_pretty(&analyze(&seq, DEFAULT_TOLERANCE).unwrap().report(None)).unwrap();
    let first = render();
    assert_eq!(first, render());
    let a = analyze(&seq, DEFAULT_TOLERANCE).unwrap();
    let r = a.report(None);
    assert_eq!(r.contraction, CONTRACTED);
    assert_eq!(r.walls.len(), 1);
    let c = r.collapse.unwrap();
    assert_eq!(c.branches, 2);
    assert_eq!(c.permutation_cycle_lengths, vec![1]);
}

#[test]
fn dot_marks_infinitesimal_cycles() {
    let a = analyze(&load(&fixtures_dir().join("wall-width2.ttf.json")), DEFAULT_TOLERANCE).unwrap();
    let dot = export_dot("wall", &a.veering.flow.graph, Some(&a.scc));
    let cycle_vertices: usize = a.scc.infinitesimal_cycles.iter().map(Vec::len).sum();
    assert!(cycle_vertices > 0);
    assert_eq!(dot.matches("class=\"infinitesimal\"").count(), cycle_vertices);
    assert_eq!(dot.matches("class=\"reduced\"").count(), a.scc.reduced.len());
    assert_eq!(dot, export_dot("wall", &a.veering.flow.graph, Some(&a.scc)));

    let opt = analyze(&load(&fixtures_dir().join("opt.ttf.json")), DEFAULT_TOLERANCE).unwrap();
    let dot = export_dot("opt", &opt.veering.flow.graph, Some(&opt.scc));
    let labels: u32 = dot
        .lines()
        .filter_map(|l| l.split("label=\"").nth(1))
        .map(|l| l.trim_end_matches("\"];").parse::<u32>().unwrap())
        .sum();
    assert_eq!(labels, 6);
}
