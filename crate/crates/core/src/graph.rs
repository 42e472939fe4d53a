//! Directed multigraphs with exact multiplicities.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::Zero;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: BTreeMap<(usize, usize), BigUint>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Digraph { n, edges: BTreeMap::new() }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn add_edge(&mut self, from: usize, to: usize, multiplicity: BigUint) {
        assert!(from < self.n && to < self.n, "edge endpoint out of range");
        if multiplicity.is_zero() {
            return;
        }
        *self.edges.entry((from, to)).or_default() += multiplicity;
    }

    pub fn multiplicity(&self, from: usize, to: usize) -> BigUint {
        self.edges.get(&(from, to)).cloned().unwrap_or_default()
    }

    /// Distinct edges in `(from, to)` order with their multiplicities.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &BigUint)> {
        self.edges.iter().map(|(&(a, b), m)| (a, b, m))
    }

    /// Sum of all multiplicities.
    pub fn total_multiplicity(&self) -> BigUint {
        self.edges.values().sum()
    }

    pub fn successors(&self, v: usize) -> Vec<usize> {
        self.edges.range((v, 0)..(v + 1, 0)).map(|(&(_, b), _)| b).collect()
    }

    pub fn predecessors(&self, v: usize) -> Vec<usize> {
        self.edges.keys().filter(|&&(_, b)| b == v).map(|&(a, _)| a).collect()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in self.edges.keys() {
            adj[a].push(b);
        }
        adj
    }

    /// Strongly connected components by an iterative lowlink search. Each
    /// component is sorted, and components are ordered by least vertex.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let n = self.n;
        const UNSEEN: usize = usize::MAX;
        let mut index = vec![UNSEEN; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut comps = Vec::new();
        let mut counter = 0;
        for root in 0..n {
            if index[root] != UNSEEN {
                continue;
            }
            // frames of (vertex, next child position)
            let mut frames = vec![(root, 0usize)];
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut pos)) = frames.last_mut() {
                if *pos < adj[v].len() {
                    let w = adj[v][*pos];
                    *pos += 1;
                    if index[w] == UNSEEN {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        frames.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    frames.pop();
                    if let Some(&(parent, _)) = frames.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().expect("lowlink stack underflow");
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        comps.push(comp);
                    }
                }
            }
        }
        comps.sort_by_key(|c| c[0]);
        comps
    }

    /// Vertices reachable from `start` (including itself), in BFS order,
    /// together with the BFS parent of each reached vertex.
    pub fn reach_tree(&self, start: usize, reverse: bool) -> Vec<Option<usize>> {
        let adj = if reverse {
            let mut adj = vec![Vec::new(); self.n];
            for &(a, b) in self.edges.keys() {
                adj[b].push(a);
            }
            adj
        } else {
            self.adjacency()
        };
        let mut parent = vec![None; self.n];
        let mut seen = vec![false; self.n];
        seen[start] = true;
        parent[start] = Some(start);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(v);
                    queue.push_back(w);
                }
            }
        }
        parent
    }

    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        self.reach_tree(start, false).into_iter().map(|p| p.is_some()).collect()
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.n == 0
            || (self.reach_tree(0, false).iter().all(Option::is_some)
                && self.reach_tree(0, true).iter().all(Option::is_some))
    }

    /// Induced subgraph on `vertices`, relabeled by position.
    pub fn induced(&self, vertices: &[usize]) -> Digraph {
        let mut pos = vec![usize::MAX; self.n];
        for (i, &v) in vertices.iter().enumerate() {
            pos[v] = i;
        }
        let mut g = Digraph::new(vertices.len());
        for (&(a, b), m) in &self.edges {
            if pos[a] != usize::MAX && pos[b] != usize::MAX {
                g.add_edge(pos[a], pos[b], m.clone());
            }
        }
        g
    }
}
