use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use ttforge::dot::export_dot;
use ttforge::io::{parse_input, to_canonical_string, FormatError, InputDocument};
use ttforge::pipeline::{analyze, Analysis, DEFAULT_TOLERANCE};
use ttforge::search::{search_fixtures, SearchConfig};
use ttforge::veering::{build_path_graph, build_veering};
use ttforge::walls::{check_block_form, scc_decompose};

#[derive(Parser)]
#[command(name = "ttforge", version, about = "Irreducible invariant train tracks from veering folding sequences")]
struct Cli {
    /// Reject unknown keys in input documents.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the document describes a valid folding sequence.
    Validate(Input),
    /// Run the full pipeline and print the report.
    Run {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Include wall-clock time in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Build the flow graph and compare its path counts with the folding matrix.
    Flowgraph {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
        /// Write the path graph instead of the flow graph to --dot.
        #[arg(long)]
        paths: bool,
    },
    /// Detect walls and classify branches.
    Walls {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
    },
    /// Collapse infinitesimal paths and certify irreducibility.
    Contract {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Enumerate folding sequences on small tracks and write those passing every gate.
    Search {
        #[arg(long, default_value_t = 4)]
        max_switches: usize,
        #[arg(long, default_value_t = 6)]
        max_folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only keep sequences whose triangulation has walls.
        #[arg(long)]
        walls_only: bool,
        /// Directory for the fixture files; a listing is printed otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    /// A `.ttf.json` document.
    file: PathBuf,
}

#[derive(Args)]
struct Output {
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a DOT rendering of the flow graph here.
    #[arg(long)]
    dot: Option<PathBuf>,
}

fn read_document(path: &Path, strict: bool) -> Result<InputDocument> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_input(&text, strict).with_context(|| format!("in {}", path.display()))
}

fn emit(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_dot(path: Option<&Path>, dot: impl FnOnce() -> String) -> Result<()> {
    if let Some(p) = path {
        fs::write(p, dot()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn analysis_dot(name: &str, a: &Analysis) -> String {
    export_dot(name, &a.veering.flow.graph, Some(&a.scc))
}

fn doc_name(doc: &InputDocument, path: &Path) -> String {
    doc.name.clone().unwrap_or_else(|| {
        path.file_name().map(|f| f.to_string_lossy().trim_end_matches(".ttf.json").to_string()).unwrap_or_default()
    })
}

fn execute(cli: Cli) -> Result<()> {
    let strict = cli.strict;
    match cli.command {
        Command::Validate(input) => {
            let doc = read_document(&input.file, strict)?;
            let seq = doc.to_sequence()?;
            let checked = seq.check().map_err(ttforge::Error::from)?;
            emit(
                &json!({
                    "name": doc_name(&doc, &input.file),
                    "valid": true,
                    "switches": checked.track().switch_count(),
                    "branches": checked.track().branch_count(),
                    "folds": checked.fold_count(),
                    "permutation_only": checked.is_permutation_only(),
                }),
                None,
            )
        }
        Command::Run { input, output, tolerance, timing } => {
            let doc = read_document(&input.file, strict)?;
            let name = doc_name(&doc, &input.file);
            let start = Instant::now();
            let a = analyze(&doc.to_sequence()?, tolerance)?;
            let mut report = a.report(Some(name.clone()));
            if timing {
                report.elapsed_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            write_dot(output.dot.as_deref(), || analysis_dot(&name, &a))?;
            emit(&report, output.out.as_deref())
        }
        Command::Flowgraph { input, output, paths } => {
            let doc = read_document(&input.file, strict)?;
            let name = doc_name(&doc, &input.file);
            let checked = doc.to_sequence()?.check().map_err(ttforge::Error::from)?;
            let m = checked.transition_matrix();
            let veering = build_veering(&checked)?;
            let path_graph = build_path_graph(&checked, &veering.layered);
            let scc = scc_decompose(&veering.flow)?;
            check_block_form(&veering.flow, &scc)?;
            let path_matrix = path_graph.transition_matrix();
            let flow = &veering.flow;
            write_dot(output.dot.as_deref(), || {
                if paths {
                    export_dot(&name, &path_graph.graph, None)
                } else {
                    export_dot(&name, &flow.graph, Some(&scc))
                }
            })?;
            emit(
                &json!({
                    "name": name,
                    "tetrahedra": veering.layered.triangulation.tetrahedra().len(),
                    "edge_classes": veering.layered.triangulation.classes().len(),
                    "vertices": flow.vertex_count(),
                    "edges": flow.edge_count().to_string(),
                    "strongly_connected": flow.graph.is_strongly_connected(),
                    "reduced_component": scc.reduced,
                    "infinitesimal_cycles": scc.infinitesimal_cycles,
                    "transition_matrix": m,
                    "path_count_matrix": path_matrix,
                    "path_counts_match": path_matrix == m,
                }),
                output.out.as_deref(),
            )?;
            if path_matrix != m {
                return Err(ttforge::Error::CharacterizationMismatch(
                    "flow-graph path counts differ from the folding transition matrix".into(),
                )
                .into());
            }
            Ok(())
        }
        Command::Walls { input, output } => {
            let doc = read_document(&input.file, strict)?;
            let name = doc_name(&doc, &input.file);
            let a = analyze(&doc.to_sequence()?, DEFAULT_TOLERANCE)?;
            let r = a.report(Some(name.clone()));
            write_dot(output.dot.as_deref(), || analysis_dot(&name, &a))?;
            emit(
                &json!({
                    "name": r.name,
                    "walls": r.walls,
                    "branch_kinds": r.branch_kinds,
                    "infinitesimal_paths": r.infinitesimal_paths,
                    "infinitesimal_cycles": r.flow_graph.infinitesimal_cycles,
                }),
                output.out.as_deref(),
            )
        }
        Command::Contract { input, output, tolerance } => {
            let doc = read_document(&input.file, strict)?;
            let name = doc_name(&doc, &input.file);
            let a = analyze(&doc.to_sequence()?, tolerance)?;
            let r = a.report(Some(name.clone()));
            write_dot(output.dot.as_deref(), || analysis_dot(&name, &a))?;
            emit(
                &json!({
                    "name": r.name,
                    "contraction": r.contraction,
                    "collapse": r.collapse,
                    "checks": r.checks,
                    "certificate": r.certificate,
                }),
                output.out.as_deref(),
            )
        }
        Command::Search { max_switches, max_folds, seed, walls_only, out } => {
            let config = SearchConfig { max_switches, max_folds, seed, ..Default::default() };
            let docs: Vec<InputDocument> = search_fixtures(&config)
                .into_iter()
                .filter(|d| !walls_only || d.notes.as_deref().is_some_and(|n| n.contains("walls: yes")))
                .collect();
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                    for d in &docs {
                        let name = d.name.as_deref().ok_or_else(|| anyhow!("search result without a name"))?;
                        let path = dir.join(format!("{name}.ttf.json"));
                        fs::write(&path, to_canonical_string(d))
                            .with_context(|| format!("writing {}", path.display()))?;
                    }
                    eprintln!("wrote {} fixtures to {}", docs.len(), dir.display());
                }
                None => {
                    for d in &docs {
                        println!("{}\t{}", d.name.as_deref().unwrap_or(""), d.notes.as_deref().unwrap_or(""));
                    }
                }
            }
            Ok(())
        }
    }
}

/// 1 for bad input or a failed gate, 2 for a failed internal check.
fn exit_code(e: &anyhow::Error) -> u8 {
    let internal = e
        .chain()
        .any(|c| c.downcast_ref::<ttforge::Error>().is_some_and(ttforge::Error::is_internal));
    if internal {
        2
    } else {
        1
    }
}

fn describe(e: &anyhow::Error) -> String {
    let stage = e.chain().find_map(|c| {
        c.downcast_ref::<ttforge::Error>()
            .map(ttforge::Error::stage)
            .or_else(|| c.downcast_ref::<FormatError>().map(|_| "parse"))
    });
    match stage {
        Some(s) => format!("[{s}] {e:#}"),
        None => format!("{e:#}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let internal = anyhow::Error::from(ttforge::Error::LemmaViolation("x".into())).context("in file");
        assert_eq!(exit_code(&internal), 2);
        let gate = anyhow::Error::from(ttforge::Error::NonPseudoAnosovInput("x".into()));
        assert_eq!(exit_code(&gate), 1);
        assert_eq!(exit_code(&anyhow!("io")), 1);
        assert!(describe(&internal).starts_with("[walls]"));
    }
}
