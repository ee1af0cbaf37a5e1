use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{EntityId, EntityKind, KnowledgeGraph};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub kind_counts: BTreeMap<EntityKind, usize>,
    pub edge_count: usize,
    pub min_degree: usize,
    pub median_degree: f64,
    pub mean_degree: f64,
    pub max_degree: usize,
    pub component_count: usize,
}

/// Degree statistics on the undirected view, where each typed edge counts once
/// for both endpoints.
pub fn degree_stats(graph: &KnowledgeGraph) -> Result<GraphStats> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut degrees: Vec<usize> = graph.entities().iter().map(|e| graph.degree(e.id)).collect();
    degrees.sort_unstable();
    let n = degrees.len();
    let median = if n % 2 == 1 {
        degrees[n / 2] as f64
    } else {
        (degrees[n / 2 - 1] + degrees[n / 2]) as f64 / 2.0
    };
    let mut kind_counts = BTreeMap::new();
    for e in graph.entities() {
        *kind_counts.entry(e.kind).or_insert(0) += 1;
    }
    Ok(GraphStats {
        node_count: n,
        kind_counts,
        edge_count: graph.edge_count(),
        min_degree: degrees[0],
        median_degree: median,
        mean_degree: 2.0 * graph.edge_count() as f64 / n as f64,
        max_degree: degrees[n - 1],
        component_count: connected_components(graph).len(),
    })
}

/// Weakly connected components, each sorted, ordered by smallest member.
pub fn connected_components(graph: &KnowledgeGraph) -> Vec<Vec<EntityId>> {
    let n = graph.len();
    let mut parent: Vec<u32> = (0..n as u32).collect();

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let p = parent[x as usize];
            parent[x as usize] = parent[p as usize];
            x = p;
        }
        x
    }

    for e in graph.edges() {
        let a = find(&mut parent, e.head.0);
        let b = find(&mut parent, e.tail.0);
        if a != b {
            let (lo, hi) = (a.min(b), a.max(b));
            parent[hi as usize] = lo;
        }
    }

    let mut groups: BTreeMap<u32, Vec<EntityId>> = BTreeMap::new();
    for i in 0..n as u32 {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(EntityId(i));
    }
    // Roots are the minimum of their component, so BTreeMap order is by smallest member.
    groups.into_values().collect()
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24}{:>12}", "# nodes", self.node_count)?;
        for (kind, count) in &self.kind_counts {
            writeln!(f, "{:<24}{:>12}", format!("  # {}", kind.as_str().to_lowercase()), count)?;
        }
        writeln!(f, "{:<24}{:>12}", "# edges", self.edge_count)?;
        writeln!(f, "{:<24}{:>12}", "minimum degree", self.min_degree)?;
        writeln!(f, "{:<24}{:>12}", "median degree", fmt_num(self.median_degree))?;
        writeln!(f, "{:<24}{:>12.2}", "average degree", self.mean_degree)?;
        writeln!(f, "{:<24}{:>12}", "maximum degree", self.max_degree)?;
        write!(f, "{:<24}{:>12}", "# connected components", self.component_count)
    }
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{}", x as i64)
    } else {
        format!("{x:.1}")
    }
}
