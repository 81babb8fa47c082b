//! Sector graph structure: strong connectivity, period and the basic core.
//!
//! The basic sectors of an economy are those whose output enters, directly
//! or indirectly, into the production of every other sector. On the flow
//! graph (edge `i → j` iff `f_ij > 0`) they form a strongly connected
//! component; the entropy rate is defined on that core.

use serde::{Deserialize, Serialize};

use crate::markov::TransitionMatrix;
use crate::table_io::FlowMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorGraph {
    n: usize,
    adjacency: Vec<Vec<usize>>,
}

impl SectorGraph {
    /// Graph on `n` nodes from explicit out-neighbour lists.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let n = adjacency.len();
        let adjacency = adjacency
            .into_iter()
            .map(|mut out| {
                assert!(out.iter().all(|&j| j < n), "edge target out of range");
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect();
        Self { n, adjacency }
    }

    /// Edge `i → j` wherever `p_ij > 0`.
    pub fn from_transitions(p: &TransitionMatrix) -> Self {
        Self::from_support(p.n(), |i, j| p.get(i, j) > 0.0)
    }

    fn from_support(n: usize, positive: impl Fn(usize, usize) -> bool) -> Self {
        let adjacency = (0..n)
            .map(|i| (0..n).filter(|&j| positive(i, j)).collect())
            .collect();
        Self { n, adjacency }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, out)| out.iter().map(move |&j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }
}

/// Edge `i → j` iff `f_ij > 0`, self-loops included. No threshold other
/// than exact zero is applied here; see [`FlowMatrix::pruned_below`].
pub fn build_graph(flows: &FlowMatrix) -> SectorGraph {
    SectorGraph::from_support(flows.n(), |i, j| flows.get(i, j) > 0.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureDiagnostics {
    pub strongly_connected: bool,
    /// Period of the largest strongly connected component. A component
    /// without any cycle (a lone node with no self-loop) reports 1.
    pub period: usize,
    pub largest_scc: Vec<usize>,
    pub dropped: Vec<usize>,
    pub component_count: usize,
}

impl StructureDiagnostics {
    pub fn aperiodic(&self) -> bool {
        self.period == 1
    }

    pub fn is_irreducible_aperiodic(&self) -> bool {
        self.strongly_connected && self.aperiodic()
    }
}

/// Strongly connected components by Tarjan's algorithm, iteratively so deep
/// graphs cannot overflow the stack. Each component is returned sorted.
pub fn strongly_connected_components(g: &SectorGraph) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = g.n();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next_index = 0;
    // (node, position in its successor list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = g.successors(v).get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                component.sort_unstable();
                components.push(component);
            }
        }
    }
    components
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of the subgraph induced by `members`, which must be strongly
/// connected: the gcd over its edges `u → v` of `level(u) + 1 − level(v)`,
/// with BFS levels from any member.
pub fn period_of(g: &SectorGraph, members: &[usize]) -> usize {
    let mut inside = vec![false; g.n()];
    for &m in members {
        inside[m] = true;
    }
    let Some(&root) = members.first() else {
        return 1;
    };
    let mut level = vec![usize::MAX; g.n()];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &v in g.successors(u) {
            if inside[v] && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut period = 0;
    for &u in members {
        for &v in g.successors(u) {
            if inside[v] {
                let diff = (level[u] + 1).abs_diff(level[v]);
                period = gcd(period, diff);
            }
        }
    }
    period.max(1)
}

pub fn analyze_structure(g: &SectorGraph) -> StructureDiagnostics {
    let components = strongly_connected_components(g);
    // Largest component; ties go to the one holding the smallest node id.
    let largest = components
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
        .cloned()
        .unwrap_or_default();
    let mut kept = vec![false; g.n()];
    for &m in &largest {
        kept[m] = true;
    }
    let dropped = (0..g.n()).filter(|&i| !kept[i]).collect();
    StructureDiagnostics {
        strongly_connected: largest.len() == g.n(),
        period: period_of(g, &largest),
        largest_scc: largest,
        dropped,
        component_count: components.len(),
    }
}

/// Submatrix of `flows` on the largest strongly connected component.
pub fn restrict_to_basic(flows: &FlowMatrix, diagnostics: &StructureDiagnostics) -> FlowMatrix {
    if diagnostics.strongly_connected {
        return flows.clone();
    }
    flows.submatrix(&diagnostics.largest_scc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> SectorGraph {
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in edges {
            adj[i].push(j);
        }
        SectorGraph::from_adjacency(adj)
    }

    #[test]
    fn builds_edges_from_positive_flows() {
        let f = FlowMatrix::from_rows(vec![
            vec![0.0, 2.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![3.0, 1.0, 0.0],
        ])
        .unwrap();
        let edges: Vec<_> = build_graph(&f).edges().collect();
        assert_eq!(edges, vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);

        let g = build_graph(&FlowMatrix::from_rows(vec![vec![5.0]]).unwrap());
        assert!(g.has_edge(0, 0));

        let g = build_graph(&FlowMatrix::from_rows(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap());
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn three_cycle_has_period_three() {
        let d = analyze_structure(&graph(3, &[(0, 1), (1, 2), (2, 0)]));
        assert!(d.strongly_connected);
        assert_eq!(d.period, 3);
        assert!(!d.aperiodic());
    }

    #[test]
    fn self_loop_makes_cycle_aperiodic() {
        let d = analyze_structure(&graph(3, &[(0, 1), (1, 2), (2, 0), (0, 0)]));
        assert_eq!(d.period, 1);
        assert!(d.is_irreducible_aperiodic());
    }

    #[test]
    fn one_way_edge_is_reducible() {
        let d = analyze_structure(&graph(2, &[(0, 1)]));
        assert!(!d.strongly_connected);
        assert_eq!(d.largest_scc, vec![0]);
        assert_eq!(d.dropped, vec![1]);
        assert_eq!(d.component_count, 2);
    }

    #[test]
    fn restriction_of_one_way_pair_is_single_zero() {
        let f = FlowMatrix::from_rows(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let d = analyze_structure(&build_graph(&f));
        let core = restrict_to_basic(&f, &d);
        assert_eq!(core.to_rows(), vec![vec![0.0]]);
        assert_eq!(core.names(), vec!["S1"]);
    }

    #[test]
    fn source_sector_feeding_core_is_dropped() {
        // S1 feeds the 3-cycle S2 → S3 → S4 → S2 but receives nothing.
        let f = FlowMatrix::from_rows(vec![
            vec![0.0, 1.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.0, 3.0],
            vec![0.0, 4.0, 0.0, 1.0],
        ])
        .unwrap();
        let d = analyze_structure(&build_graph(&f));
        assert_eq!(d.largest_scc, vec![1, 2, 3]);
        assert_eq!(d.dropped, vec![0]);
        let core = restrict_to_basic(&f, &d);
        assert_eq!(core.names(), vec!["S2", "S3", "S4"]);
        assert_eq!(
            core.to_rows(),
            vec![
                vec![0.0, 2.0, 0.0],
                vec![0.0, 0.0, 3.0],
                vec![4.0, 0.0, 1.0]
            ]
        );
        assert!(analyze_structure(&build_graph(&core)).strongly_connected);
    }

    #[test]
    fn strongly_connected_restriction_is_identity() {
        let f = FlowMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let d = analyze_structure(&build_graph(&f));
        assert_eq!(restrict_to_basic(&f, &d), f);
    }

    #[test]
    fn ties_go_to_smallest_node() {
        let d = analyze_structure(&graph(4, &[(2, 3), (3, 2), (0, 1), (1, 0)]));
        assert_eq!(d.largest_scc, vec![0, 1]);
    }

    #[test]
    fn long_path_does_not_overflow() {
        let n = 200_000;
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let d = analyze_structure(&graph(n, &edges));
        assert!(d.strongly_connected);
        assert_eq!(d.period, n);
    }
}
