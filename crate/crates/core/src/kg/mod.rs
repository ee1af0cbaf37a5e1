//! In-memory knowledge graph of recommendable and descriptive entities.
//!
//! Entities get dense [`EntityId`]s in file order. Edges are typed and directed;
//! the graph keeps forward and reverse adjacency so neighbourhood queries in
//! either direction are O(degree).

pub(crate) mod load;
pub mod pagerank;
mod stats;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use load::{load_graph, load_relation_manifest, write_graph, LoadOptions};
pub use pagerank::{
    global_pagerank, personalized_pagerank, PageRankConfig, PageRankScores, TransitionGraph,
};
pub use stats::{connected_components, degree_stats, GraphStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    Movie,
    Person,
    Genre,
    Subject,
    Category,
    Decade,
    Company,
}

impl EntityKind {
    pub const ALL: [EntityKind; 7] = [
        EntityKind::Movie,
        EntityKind::Person,
        EntityKind::Genre,
        EntityKind::Subject,
        EntityKind::Category,
        EntityKind::Decade,
        EntityKind::Company,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Movie => "Movie",
            EntityKind::Person => "Person",
            EntityKind::Genre => "Genre",
            EntityKind::Subject => "Subject",
            EntityKind::Category => "Category",
            EntityKind::Decade => "Decade",
            EntityKind::Company => "Company",
        }
    }

    pub fn is_recommendable(self) -> bool {
        self == EntityKind::Movie
    }

    /// Maps a `|`-separated label list (as found in graph-database exports) to a
    /// single kind. More specific labels win over generic ones.
    pub fn from_labels(labels: &str) -> Option<EntityKind> {
        let labels: Vec<String> = labels
            .split(['|', ';', ','])
            .map(|l| l.trim().to_ascii_lowercase())
            .collect();
        let has = |name: &str| labels.iter().any(|l| l == name);
        if has("movie") {
            Some(EntityKind::Movie)
        } else if has("decade") {
            Some(EntityKind::Decade)
        } else if has("company") {
            Some(EntityKind::Company)
        } else if has("genre") {
            Some(EntityKind::Genre)
        } else if has("subject") {
            Some(EntityKind::Subject)
        } else if has("category") {
            Some(EntityKind::Category)
        } else if has("person") || has("actor") || has("director") {
            Some(EntityKind::Person)
        } else {
            None
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown entity kind `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub uri: String,
    pub name: String,
    pub kind: EntityKind,
    pub recommendable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

/// Labelled directed multigraph. Immutable once built.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Vec<Entity>,
    by_uri: HashMap<String, EntityId>,
    relations: Vec<String>,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<u32>>,
    in_adj: Vec<Vec<u32>>,
}

impl KnowledgeGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.0 as usize]
    }

    pub fn contains(&self, id: EntityId) -> bool {
        id.index() < self.entities.len()
    }

    pub fn entity(&self, id: EntityId) -> Result<&Entity> {
        self.entities.get(id.index()).ok_or(Error::UnknownEntity(id.0))
    }

    /// Panics on an unknown id; use [`KnowledgeGraph::entity`] for untrusted ids.
    pub fn uri(&self, id: EntityId) -> &str {
        &self.entities[id.index()].uri
    }

    pub fn kind(&self, id: EntityId) -> EntityKind {
        self.entities[id.index()].kind
    }

    pub fn is_recommendable(&self, id: EntityId) -> bool {
        self.entities
            .get(id.index())
            .map(|e| e.recommendable)
            .unwrap_or(false)
    }

    pub fn lookup(&self, uri: &str) -> Option<EntityId> {
        self.by_uri.get(uri).copied()
    }

    pub fn recommendables(&self) -> Vec<EntityId> {
        self.entities
            .iter()
            .filter(|e| e.recommendable)
            .map(|e| e.id)
            .collect()
    }

    pub fn out_edges(&self, id: EntityId) -> impl Iterator<Item = &Edge> + '_ {
        self.out_adj[id.index()]
            .iter()
            .map(move |&e| &self.edges[e as usize])
    }

    pub fn in_edges(&self, id: EntityId) -> impl Iterator<Item = &Edge> + '_ {
        self.in_adj[id.index()]
            .iter()
            .map(move |&e| &self.edges[e as usize])
    }

    /// Number of typed edges incident to `id`, ignoring direction.
    pub fn degree(&self, id: EntityId) -> usize {
        self.out_adj[id.index()].len() + self.in_adj[id.index()].len()
    }

    /// Deduplicated, sorted neighbour ids.
    pub fn neighbors(&self, id: EntityId, direction: Direction) -> Result<Vec<EntityId>> {
        if !self.contains(id) {
            return Err(Error::UnknownEntity(id.0));
        }
        let mut out = Vec::new();
        if matches!(direction, Direction::Out | Direction::Both) {
            out.extend(self.out_edges(id).map(|e| e.tail));
        }
        if matches!(direction, Direction::In | Direction::Both) {
            out.extend(self.in_edges(id).map(|e| e.head));
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Union of the undirected neighbourhoods of `ids`, sorted.
    pub fn neighborhood<'a>(&self, ids: impl IntoIterator<Item = &'a EntityId>) -> Vec<EntityId> {
        let mut out = Vec::new();
        for &id in ids {
            if self.contains(id) {
                out.extend(self.out_edges(id).map(|e| e.tail));
                out.extend(self.in_edges(id).map(|e| e.head));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Distinct undirected neighbour pairs `(a, b)` with `a < b`, sorted.
    pub fn undirected_pairs(&self) -> Vec<(u32, u32)> {
        let mut pairs: Vec<(u32, u32)> = self
            .edges
            .iter()
            .filter(|e| e.head != e.tail)
            .map(|e| {
                let (a, b) = (e.head.0, e.tail.0);
                (a.min(b), a.max(b))
            })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

/// Incremental construction of a [`KnowledgeGraph`].
#[derive(Default, Debug, Clone)]
pub struct GraphBuilder {
    entities: Vec<(String, String, EntityKind)>,
    by_uri: HashMap<String, u32>,
    relations: Vec<String>,
    relation_index: HashMap<String, u16>,
    edges: Vec<(u32, u16, u32)>,
}

impl GraphBuilder {
    pub fn relation(&mut self, name: &str) -> RelationId {
        if let Some(&r) = self.relation_index.get(name) {
            return RelationId(r);
        }
        let r = self.relations.len() as u16;
        self.relations.push(name.to_string());
        self.relation_index.insert(name.to_string(), r);
        RelationId(r)
    }

    pub fn has_relation(&self, name: &str) -> bool {
        self.relation_index.contains_key(name)
    }

    pub fn entity(&mut self, uri: &str, name: &str, kind: EntityKind) -> Result<EntityId> {
        if self.by_uri.contains_key(uri) {
            return Err(Error::InvalidArgument(format!("duplicate entity uri `{uri}`")));
        }
        let id = self.entities.len() as u32;
        self.entities.push((uri.to_string(), name.to_string(), kind));
        self.by_uri.insert(uri.to_string(), id);
        Ok(EntityId(id))
    }

    pub fn lookup(&self, uri: &str) -> Option<EntityId> {
        self.by_uri.get(uri).map(|&i| EntityId(i))
    }

    /// Adds `head -relation-> tail`. Repeating an identical typed triple is an error.
    pub fn edge(&mut self, head: EntityId, relation: &str, tail: EntityId) -> Result<()> {
        let n = self.entities.len() as u32;
        for id in [head, tail] {
            if id.0 >= n {
                return Err(Error::UnknownEntity(id.0));
            }
        }
        let r = self.relation(relation);
        self.edges.push((head.0, r.0, tail.0));
        Ok(())
    }

    /// Adds an edge between two uris already registered with the builder.
    pub fn edge_by_uri(&mut self, head: &str, relation: &str, tail: &str) -> Result<()> {
        let h = self
            .lookup(head)
            .ok_or_else(|| Error::UnknownUri(head.to_string()))?;
        let t = self
            .lookup(tail)
            .ok_or_else(|| Error::UnknownUri(tail.to_string()))?;
        self.edge(h, relation, t)
    }

    /// Finishes the graph. With `prune_degree_one`, entities with at most one
    /// incident edge are removed repeatedly until none remain.
    pub fn build(self, prune_degree_one: bool) -> Result<KnowledgeGraph> {
        let GraphBuilder {
            entities,
            relations,
            mut edges,
            ..
        } = self;

        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for &e in &edges {
            if !seen.insert(e) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate triple ({}, {}, {})",
                    entities[e.0 as usize].0, relations[e.1 as usize], entities[e.2 as usize].0
                )));
            }
        }

        let n = entities.len();
        let mut alive = vec![true; n];
        if prune_degree_one && n > 0 {
            loop {
                let mut degree = vec![0usize; n];
                for &(h, _, t) in &edges {
                    degree[h as usize] += 1;
                    degree[t as usize] += 1;
                }
                let mut changed = false;
                for i in 0..n {
                    if alive[i] && degree[i] <= 1 {
                        alive[i] = false;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
                edges.retain(|&(h, _, t)| alive[h as usize] && alive[t as usize]);
            }
            if !alive.iter().any(|&a| a) {
                return Err(Error::DegenerateGraph);
            }
        }

        let mut remap = vec![u32::MAX; n];
        let mut kept = Vec::with_capacity(n);
        for (i, (uri, name, kind)) in entities.into_iter().enumerate() {
            if alive[i] {
                let id = EntityId(kept.len() as u32);
                remap[i] = id.0;
                kept.push(Entity {
                    id,
                    uri,
                    name,
                    kind,
                    recommendable: kind.is_recommendable(),
                });
            }
        }

        let edges: Vec<Edge> = edges
            .into_iter()
            .map(|(h, r, t)| Edge {
                head: EntityId(remap[h as usize]),
                relation: RelationId(r),
                tail: EntityId(remap[t as usize]),
            })
            .collect();

        let mut out_adj = vec![Vec::new(); kept.len()];
        let mut in_adj = vec![Vec::new(); kept.len()];
        for (i, e) in edges.iter().enumerate() {
            out_adj[e.head.index()].push(i as u32);
            in_adj[e.tail.index()].push(i as u32);
        }
        let by_uri = kept.iter().map(|e| (e.uri.clone(), e.id)).collect();

        Ok(KnowledgeGraph {
            entities: kept,
            by_uri,
            relations,
            edges,
            out_adj,
            in_adj,
        })
    }
}
