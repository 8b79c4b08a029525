//! Face-adjacency graph: one node per face, one undirected arc per
//! non-seam topological edge.

use std::collections::BTreeMap;

use crate::sampler::{EdgeTensor, FaceTensor, SampledModel};

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub face: usize,
    pub tensor: FaceTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphArc {
    pub src: usize,
    pub dst: usize,
    pub edge: usize,
    pub tensor: EdgeTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrepGraph {
    pub name: String,
    pub nodes: Vec<GraphNode>,
    /// Stored once per edge; see [`BrepGraph::directed_arcs`].
    pub arcs: Vec<GraphArc>,
    pub seam_edges: usize,
}

/// A directed view of an arc: messages flow `from → to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectedArc {
    pub from: usize,
    pub to: usize,
    pub arc: usize,
}

impl BrepGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// Both directions of every arc, in arc order: `src → dst` then `dst → src`.
    pub fn directed_arcs(&self) -> impl Iterator<Item = DirectedArc> + '_ {
        self.arcs.iter().enumerate().flat_map(|(k, a)| {
            [
                DirectedArc {
                    from: a.src,
                    to: a.dst,
                    arc: k,
                },
                DirectedArc {
                    from: a.dst,
                    to: a.src,
                    arc: k,
                },
            ]
        })
    }

    /// Incoming directed arcs per node, each list in arc order.
    pub fn incoming(&self) -> Vec<Vec<DirectedArc>> {
        let mut inc = vec![Vec::new(); self.nodes.len()];
        for d in self.directed_arcs() {
            inc[d.to].push(d);
        }
        inc
    }
}

/// Build the graph from a sampled model. Seam edges are counted, not linked.
pub fn build_graph(sampled: &SampledModel) -> BrepGraph {
    let model = &sampled.model;
    let nodes = sampled
        .faces
        .iter()
        .map(|f| GraphNode {
            face: f.summary.face,
            tensor: f.tensor.clone(),
        })
        .collect();
    let mut arcs = Vec::new();
    let mut seam_edges = 0;
    for e in &sampled.edges {
        let [src, dst] = model.edges[e.summary.edge].faces;
        if src == dst {
            seam_edges += 1;
            continue;
        }
        arcs.push(GraphArc {
            src,
            dst,
            edge: e.summary.edge,
            tensor: e.tensor.clone(),
        });
    }
    BrepGraph {
        name: model.name.clone(),
        nodes,
        arcs,
        seam_edges,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStats {
    pub node_count: usize,
    pub arc_count: usize,
    /// Degree → number of nodes with that degree. Parallel arcs each count.
    pub degree_histogram: BTreeMap<usize, usize>,
    pub isolated_nodes: usize,
    pub components: usize,
    pub seam_edges: usize,
}

pub fn adjacency_stats(graph: &BrepGraph) -> GraphStats {
    let n = graph.node_count();
    let mut degree = vec![0usize; n];
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in &graph.arcs {
        degree[a.src] += 1;
        degree[a.dst] += 1;
        let (ra, rb) = (root(&mut parent, a.src), root(&mut parent, a.dst));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut degree_histogram = BTreeMap::new();
    for &d in &degree {
        *degree_histogram.entry(d).or_insert(0) += 1;
    }
    let components = (0..n).filter(|&i| root(&mut parent, i) == i).count();
    GraphStats {
        node_count: n,
        arc_count: graph.arc_count(),
        isolated_nodes: degree.iter().filter(|&&d| d == 0).count(),
        degree_histogram,
        components,
        seam_edges: graph.seam_edges,
    }
}
