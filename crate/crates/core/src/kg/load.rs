use std::fs;
use std::path::{Path, PathBuf};

use super::{EntityKind, GraphBuilder, KnowledgeGraph};
use crate::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Remove entities with at most one edge, iterating to a fixpoint. Off for
    /// published snapshots, which are already pruned.
    pub prune_degree_one: bool,
    /// Relation manifest. When `None`, `relations.txt` next to the triples file
    /// is used if present, otherwise the vocabulary is taken from the triples.
    pub relations: Option<PathBuf>,
}

/// Column lookup by header name, accepting the aliases used by graph exports.
pub(crate) struct Columns {
    headers: Vec<String>,
}

impl Columns {
    pub(crate) fn new(headers: &csv::StringRecord) -> Self {
        Columns {
            headers: headers
                .iter()
                .map(|h| h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase())
                .collect(),
        }
    }

    pub(crate) fn find(&self, names: &[&str]) -> Option<usize> {
        names
            .iter()
            .find_map(|n| self.headers.iter().position(|h| h == n))
    }

    pub(crate) fn require(&self, path: &Path, names: &[&str]) -> Result<usize> {
        self.find(names)
            .ok_or_else(|| Error::malformed(path, 1, format!("missing column `{}`", names[0])))
    }
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

pub(crate) fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        kind => Error::malformed(path, line, format!("{kind:?}")),
    }
}

pub(crate) fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads a relation manifest: one relation name per line, `#` comments allowed.
pub fn load_relation_manifest(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Loads `uri,name,kind,recommendable` entities and `head_uri,relation,tail_uri`
/// triples. Ids are assigned in entity-file order.
pub fn load_graph(
    entities_file: &Path,
    triples_file: &Path,
    options: &LoadOptions,
) -> Result<KnowledgeGraph> {
    let mut builder = GraphBuilder::default();

    let manifest = match &options.relations {
        Some(p) => Some(load_relation_manifest(p)?),
        None => {
            let sibling = triples_file.with_file_name("relations.txt");
            if sibling.is_file() {
                Some(load_relation_manifest(&sibling)?)
            } else {
                None
            }
        }
    };
    if let Some(names) = &manifest {
        for n in names {
            builder.relation(n);
        }
    }

    let mut rdr = csv_reader(entities_file)?;
    let cols = Columns::new(rdr.headers().map_err(|e| csv_error(entities_file, e))?);
    let c_uri = cols.require(entities_file, &["uri", "entity_uri"])?;
    let c_name = cols.require(entities_file, &["name", "label"])?;
    let c_kind = cols.require(entities_file, &["kind", "labels", "type"])?;
    let c_rec = cols.find(&["recommendable", "is_item", "isitem"]);

    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(entities_file, e))?;
        let line = line_of(&record);
        let uri = &record[c_uri];
        if uri.is_empty() {
            return Err(Error::malformed(entities_file, line, "empty uri"));
        }
        let raw_kind = &record[c_kind];
        let kind = raw_kind
            .parse::<EntityKind>()
            .ok()
            .or_else(|| EntityKind::from_labels(raw_kind))
            .ok_or_else(|| {
                Error::malformed(entities_file, line, format!("unknown entity kind `{raw_kind}`"))
            })?;
        if let Some(c) = c_rec {
            let rec = parse_bool(&record[c]).ok_or_else(|| {
                Error::malformed(
                    entities_file,
                    line,
                    format!("expected true/false, got `{}`", &record[c]),
                )
            })?;
            if rec != kind.is_recommendable() {
                return Err(Error::malformed(
                    entities_file,
                    line,
                    format!("`{uri}`: recommendable must be true exactly for movies"),
                ));
            }
        }
        builder
            .entity(uri, &record[c_name], kind)
            .map_err(|e| Error::malformed(entities_file, line, e.to_string()))?;
    }

    let mut rdr = csv_reader(triples_file)?;
    let cols = Columns::new(rdr.headers().map_err(|e| csv_error(triples_file, e))?);
    let c_head = cols.require(triples_file, &["head_uri", "head"])?;
    let c_rel = cols.require(triples_file, &["relation", "relation_type"])?;
    let c_tail = cols.require(triples_file, &["tail_uri", "tail"])?;
    let mut seen = std::collections::HashSet::new();

    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(triples_file, e))?;
        let line = line_of(&record);
        let resolve = |uri: &str| {
            builder.lookup(uri).ok_or_else(|| Error::DanglingUri {
                path: triples_file.to_path_buf(),
                line,
                uri: uri.to_string(),
            })
        };
        let head = resolve(&record[c_head])?;
        let tail = resolve(&record[c_tail])?;
        let relation = &record[c_rel];
        if manifest.is_some() && !builder.has_relation(relation) {
            return Err(Error::UnknownRelation {
                path: triples_file.to_path_buf(),
                line,
                relation: relation.to_string(),
            });
        }
        if !seen.insert((head, relation.to_string(), tail)) {
            return Err(Error::malformed(triples_file, line, "duplicate triple"));
        }
        builder.edge(head, relation, tail)?;
    }

    let graph = builder.build(options.prune_degree_one)?;
    if !options.prune_degree_one {
        if let Some(e) = graph.entities().iter().find(|e| graph.degree(e.id) == 0) {
            return Err(Error::IsolatedEntity { uri: e.uri.clone() });
        }
    }
    Ok(graph)
}

pub(crate) fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

/// Writes `entities.csv`, `triples.csv` and `relations.txt` into `dir` in the
/// formats [`load_graph`] reads.
pub fn write_graph(graph: &KnowledgeGraph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("entities.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    w.write_record(["uri", "name", "kind", "recommendable"])
        .map_err(|e| csv_error(&path, e))?;
    for e in graph.entities() {
        w.write_record([e.uri.as_str(), e.name.as_str(), e.kind.as_str(), if e.recommendable { "true" } else { "false" }])
            .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("triples.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    w.write_record(["head_uri", "relation", "tail_uri"])
        .map_err(|e| csv_error(&path, e))?;
    for e in graph.edges() {
        w.write_record([graph.uri(e.head), graph.relation_name(e.relation), graph.uri(e.tail)])
            .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("relations.txt");
    let mut body = graph.relations().join("\n");
    body.push('\n');
    fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    const ENTITIES: &str = "uri,name,kind,recommendable\n\
        m1,Heat,Movie,true\n\
        m2,Alien,Movie,true\n\
        g1,Drama,Genre,false\n";

    #[test]
    fn loads_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "entities.csv", ENTITIES);
        let t = write(
            dir.path(),
            "triples.csv",
            "head_uri,relation,tail_uri\nm1,HAS_GENRE,g1\nm2,HAS_GENRE,g1\n",
        );
        write(dir.path(), "relations.txt", "# vocabulary\nHAS_GENRE\nSTARRING\n");
        let g = load_graph(&e, &t, &LoadOptions::default()).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.lookup("g1").unwrap().0, 2);
        assert_eq!(g.relations().len(), 2);
    }

    #[test]
    fn reports_line_of_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "entities.csv", ENTITIES);
        let t = write(
            dir.path(),
            "triples.csv",
            "head_uri,relation,tail_uri\nm1,HAS_GENRE,g1\nm2,HAS_GENRE,g9\n",
        );
        match load_graph(&e, &t, &LoadOptions::default()) {
            Err(Error::DanglingUri { line, uri, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(uri, "g9");
            }
            other => panic!("{other:?}"),
        }

        let t = write(
            dir.path(),
            "triples.csv",
            "head_uri,relation,tail_uri\nm1,HAS_GENRE,g1\nm2,LOVES,g1\n",
        );
        write(dir.path(), "relations.txt", "HAS_GENRE\n");
        assert!(matches!(
            load_graph(&e, &t, &LoadOptions::default()),
            Err(Error::UnknownRelation { line: 3, .. })
        ));

        let e2 = write(
            dir.path(),
            "bad.csv",
            "uri,name,kind,recommendable\nm1,Heat,Movie,true\ng1,Drama,Genre,true\n",
        );
        assert!(matches!(
            load_graph(&e2, &t, &LoadOptions::default()),
            Err(Error::Malformed { line: 3, .. })
        ));

        let e3 = write(dir.path(), "short.csv", "uri,name,kind,recommendable\nm1,Heat\n");
        assert!(matches!(
            load_graph(&e3, &t, &LoadOptions::default()),
            Err(Error::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn isolated_entity_rejected_without_pruning() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "entities.csv", ENTITIES);
        let t = write(dir.path(), "triples.csv", "head_uri,relation,tail_uri\nm1,HAS_GENRE,g1\n");
        assert!(matches!(
            load_graph(&e, &t, &LoadOptions::default()),
            Err(Error::IsolatedEntity { .. })
        ));
    }

    #[test]
    fn empty_triples_with_pruning_is_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(
            dir.path(),
            "entities.csv",
            "uri,name,kind,recommendable\nm1,Heat,Movie,true\ng1,Drama,Genre,false\n",
        );
        let t = write(dir.path(), "triples.csv", "head_uri,relation,tail_uri\n");
        let opts = LoadOptions {
            prune_degree_one: true,
            ..Default::default()
        };
        assert!(matches!(load_graph(&e, &t, &opts), Err(Error::DegenerateGraph)));
    }

    #[test]
    fn export_column_names_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(
            dir.path(),
            "entities.csv",
            ",uri,name,labels\n0,m1,Heat,Movie\n1,p1,Al Pacino,Person|Actor\n",
        );
        let t = write(dir.path(), "triples.csv", "head_uri,relation,tail_uri\nm1,STARRING,p1\n");
        let g = load_graph(&e, &t, &LoadOptions::default()).unwrap();
        assert_eq!(g.kind(g.lookup("p1").unwrap()), EntityKind::Person);
        assert!(g.is_recommendable(g.lookup("m1").unwrap()));
    }
}
