//! Graphviz export of flow and path graphs.

use std::fmt::Write;

use crate::graph::Digraph;
use crate::walls::SccDecomposition;

/// Fill colors for components: the reduced component, then one per
/// infinitesimal cycle, cycling through the palette.
const REDUCED_COLOR: &str = "lightgray";
const CYCLE_COLORS: [&str; 6] = ["tomato", "gold", "palegreen", "skyblue", "plum", "orange"];

/// Renders `graph` as a DOT digraph with multiplicities as edge labels.
/// Vertices in infinitesimal cycles get a class attribute and a fill color
/// per cycle; vertices of the reduced component share one color.
pub fn export_dot(name: &str, graph: &Digraph, components: Option<&SccDecomposition>) -> String {
    let mut out = String::new();
    let id: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    let id = if id.is_empty() { "G".to_string() } else { id };
    writeln!(out, "digraph {id} {{").unwrap();
    writeln!(out, "  node [shape=circle, style=filled, fillcolor=white];").unwrap();
    for v in 0..graph.vertex_count() {
        let attrs = match components {
            Some(scc) if scc.reduced.contains(&v) => {
                format!(" [class=\"reduced\", fillcolor={REDUCED_COLOR}]")
            }
            Some(scc) => scc
                .infinitesimal_cycles
                .iter()
                .position(|c| c.contains(&v))
                .map(|k| {
                    format!(
                        " [class=\"infinitesimal\", fillcolor={}]",
                        CYCLE_COLORS[k % CYCLE_COLORS.len()]
                    )
                })
                .unwrap_or_default(),
            None => String::new(),
        };
        writeln!(out, "  {v}{attrs};").unwrap();
    }
    for (a, b, m) in graph.edges() {
        writeln!(out, "  {a} -> {b} [label=\"{m}\"];").unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph() {
        assert_eq!(
            export_dot("", &Digraph::new(0), None),
            "digraph G {\n  node [shape=circle, style=filled, fillcolor=white];\n}\n"
        );
    }

    #[test]
    fn opt_flow_graph_dot() {
        let c = crate::folding::tests::opt_sequence().check().unwrap();
        let v = crate::veering::build_veering(&c).unwrap();
        let scc = crate::walls::scc_decompose(&v.flow).unwrap();
        let dot = export_dot("opt", &v.flow.graph, Some(&scc));
        assert_eq!(dot.matches(" -> ").count(), 4);
        assert_eq!(dot.matches("class=\"reduced\"").count(), 2);
        let labels: u32 = dot
            .lines()
            .filter_map(|l| l.split("label=\"").nth(1))
            .map(|l| l.trim_end_matches("\"];").parse::<u32>().unwrap())
            .sum();
        assert_eq!(labels, 6);
    }
}
