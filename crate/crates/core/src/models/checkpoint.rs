//! Versioned binary container for fitted embedding models.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      8 bytes  "MRCKPT\0\0"
//! version    u32      1
//! kind       u8       1 = MF, 2 = BPR, 3 = TransE, 4 = TransH
//! flags      u8       bit 0: trained with graph triples
//! dim        u32
//! users      vocab    user names, row order of user tables
//! entities   vocab    entity uris, row order of entity tables
//! relations  vocab    graph relation names
//! tables     u32 count, then per table:
//!              name string, rows u32, cols u32, rows*cols f64
//!
//! string     u32 byte length, UTF-8 bytes
//! vocab      u32 count, then that many strings
//! ```
//!
//! Table names per kind: MF and BPR store `users`, `items`, `trace`.
//! TransE stores `nodes` (entities then users), `relations`, `trace`;
//! TransH adds `normals`. Trans relation rows are `LIKES`, `DISLIKES`, then
//! the graph relations in vocabulary order. `trace` is a single row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{BprModel, Matrix, MfModel, Recommender, TransKind, TransModel};
use crate::dataset::RatingStore;
use crate::kg::KnowledgeGraph;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"MRCKPT\0\0";
pub const VERSION: u32 = 1;

const FLAG_KG: u8 = 1;
const MAX_STRING: u32 = 1 << 20;

#[derive(Clone, Debug)]
pub enum CheckpointModel {
    Mf(MfModel),
    Bpr(BprModel),
    Trans(TransModel),
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub users: Vec<String>,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub model: CheckpointModel,
}

fn err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn io_err(e: std::io::Error) -> Error {
    Error::Checkpoint(format!("i/o: {e}"))
}

fn trace_matrix(t: &[f64]) -> Matrix {
    Matrix::from_vec(1, t.len(), t.to_vec())
}

impl Checkpoint {
    pub fn new(model: CheckpointModel, train: &RatingStore, graph: &KnowledgeGraph) -> Self {
        Checkpoint {
            users: train.user_vocab().as_ref().clone(),
            entities: graph.entities().iter().map(|e| e.uri.clone()).collect(),
            relations: graph.relations().to_vec(),
            model,
        }
    }

    fn kind_and_flags(&self) -> (u8, u8, usize) {
        match &self.model {
            CheckpointModel::Mf(m) => (1, 0, m.users.cols()),
            CheckpointModel::Bpr(m) => (2, 0, m.users.cols()),
            CheckpointModel::Trans(m) => (
                if m.kind == TransKind::E { 3 } else { 4 },
                if m.kg { FLAG_KG } else { 0 },
                m.nodes.cols(),
            ),
        }
    }

    fn tables(&self) -> Vec<(&'static str, Matrix)> {
        match &self.model {
            CheckpointModel::Mf(m) => vec![
                ("users", m.users.clone()),
                ("items", m.items.clone()),
                ("trace", trace_matrix(&m.objective_trace)),
            ],
            CheckpointModel::Bpr(m) => vec![
                ("users", m.users.clone()),
                ("items", m.items.clone()),
                ("trace", trace_matrix(&m.loss_trace)),
            ],
            CheckpointModel::Trans(m) => {
                let mut t = vec![("nodes", m.nodes.clone()), ("relations", m.relations.clone())];
                if let Some(w) = &m.normals {
                    t.push(("normals", w.clone()));
                }
                t.push(("trace", trace_matrix(&m.loss_trace)));
                t
            }
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let (kind, flags, dim) = self.kind_and_flags();
        let mut inner = || -> std::io::Result<()> {
            w.write_all(MAGIC)?;
            w.write_u32::<LE>(VERSION)?;
            w.write_u8(kind)?;
            w.write_u8(flags)?;
            w.write_u32::<LE>(dim as u32)?;
            for vocab in [&self.users, &self.entities, &self.relations] {
                w.write_u32::<LE>(vocab.len() as u32)?;
                for s in vocab {
                    write_string(&mut w, s)?;
                }
            }
            let tables = self.tables();
            w.write_u32::<LE>(tables.len() as u32)?;
            for (name, m) in &tables {
                write_string(&mut w, name)?;
                w.write_u32::<LE>(m.rows() as u32)?;
                w.write_u32::<LE>(m.cols() as u32)?;
                for &x in m.as_slice() {
                    w.write_f64::<LE>(x)?;
                }
            }
            w.flush()
        };
        inner().map_err(io_err)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != MAGIC {
            return Err(err("not a checkpoint (bad magic)"));
        }
        let version = r.read_u32::<LE>().map_err(io_err)?;
        if version != VERSION {
            return Err(err(format!("unsupported version {version}")));
        }
        let kind = r.read_u8().map_err(io_err)?;
        let flags = r.read_u8().map_err(io_err)?;
        let dim = r.read_u32::<LE>().map_err(io_err)? as usize;
        let mut vocabs = Vec::with_capacity(3);
        for _ in 0..3 {
            let n = r.read_u32::<LE>().map_err(io_err)?;
            let v = (0..n).map(|_| read_string(&mut r)).collect::<Result<Vec<_>>>()?;
            vocabs.push(v);
        }
        let relations = vocabs.pop().unwrap_or_default();
        let entities = vocabs.pop().unwrap_or_default();
        let users = vocabs.pop().unwrap_or_default();

        let n_tables = r.read_u32::<LE>().map_err(io_err)?;
        let mut tables: Vec<(String, Matrix)> = Vec::new();
        for _ in 0..n_tables {
            let name = read_string(&mut r)?;
            let rows = r.read_u32::<LE>().map_err(io_err)? as usize;
            let cols = r.read_u32::<LE>().map_err(io_err)? as usize;
            let len = rows
                .checked_mul(cols)
                .filter(|&l| l <= 1 << 31)
                .ok_or_else(|| err(format!("table `{name}` too large")))?;
            let mut data = vec![0.0; len];
            r.read_f64_into::<LE>(&mut data).map_err(io_err)?;
            tables.push((name, Matrix::from_vec(rows, cols, data)));
        }
        let mut take = |name: &str| -> Result<Matrix> {
            let i = tables
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| err(format!("missing table `{name}`")))?;
            Ok(tables.swap_remove(i).1)
        };
        let check_dim = |m: &Matrix, name: &str| -> Result<()> {
            if m.cols() != dim {
                return Err(err(format!("table `{name}` has {} columns, expected {dim}", m.cols())));
            }
            Ok(())
        };
        let check_rows = |m: &Matrix, name: &str, rows: usize| -> Result<()> {
            if m.rows() != rows {
                return Err(err(format!("table `{name}` has {} rows, expected {rows}", m.rows())));
            }
            Ok(())
        };

        let model = match kind {
            1 | 2 => {
                let (u, i, t) = (take("users")?, take("items")?, take("trace")?);
                check_dim(&u, "users")?;
                check_dim(&i, "items")?;
                check_rows(&u, "users", users.len())?;
                check_rows(&i, "items", entities.len())?;
                let trace = t.as_slice().to_vec();
                if kind == 1 {
                    CheckpointModel::Mf(MfModel {
                        users: u,
                        items: i,
                        objective_trace: trace,
                    })
                } else {
                    CheckpointModel::Bpr(BprModel {
                        users: u,
                        items: i,
                        loss_trace: trace,
                    })
                }
            }
            3 | 4 => {
                let nodes = take("nodes")?;
                let rels = take("relations")?;
                let normals = if kind == 4 { Some(take("normals")?) } else { None };
                let trace = take("trace")?.as_slice().to_vec();
                check_dim(&nodes, "nodes")?;
                check_dim(&rels, "relations")?;
                check_rows(&nodes, "nodes", entities.len() + users.len())?;
                check_rows(&rels, "relations", relations.len() + 2)?;
                if let Some(w) = &normals {
                    check_dim(w, "normals")?;
                    check_rows(w, "normals", relations.len() + 2)?;
                }
                CheckpointModel::Trans(TransModel {
                    kind: if kind == 3 { TransKind::E } else { TransKind::H },
                    kg: flags & FLAG_KG != 0,
                    entity_count: entities.len(),
                    nodes,
                    relations: rels,
                    normals,
                    loss_trace: trace,
                })
            }
            k => return Err(err(format!("unknown model kind {k}"))),
        };
        Ok(Checkpoint {
            users,
            entities,
            relations,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)?;
        w.into_inner()
            .map_err(|e| Error::io(path, e.into_error()))?
            .sync_all()
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }

    /// Fails unless `graph` has the same entities and relations, in the same
    /// order, as the graph the model was trained on.
    pub fn validate_against(&self, graph: &KnowledgeGraph) -> Result<()> {
        if self.entities.len() != graph.len() {
            return Err(err(format!(
                "checkpoint has {} entities, graph has {}",
                self.entities.len(),
                graph.len()
            )));
        }
        if let Some((i, uri)) = self
            .entities
            .iter()
            .enumerate()
            .find(|(i, uri)| graph.entities()[*i].uri != **uri)
        {
            return Err(err(format!("entity {i} is `{uri}` in checkpoint, `{}` in graph", graph.entities()[i].uri)));
        }
        if self.relations != graph.relations() {
            return Err(err("relation vocabulary differs from graph"));
        }
        Ok(())
    }

    pub fn into_recommender(self) -> Box<dyn Recommender> {
        match self.model {
            CheckpointModel::Mf(m) => Box::new(m),
            CheckpointModel::Bpr(m) => Box::new(m),
            CheckpointModel::Trans(m) => Box::new(m),
        }
    }
}

fn write_string(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_string(r: &mut impl Read) -> Result<String> {
    let n = r.read_u32::<LE>().map_err(io_err)?;
    if n > MAX_STRING {
        return Err(err(format!("string of {n} bytes exceeds limit")));
    }
    let mut buf = vec![0u8; n as usize];
    r.read_exact(&mut buf).map_err(io_err)?;
    String::from_utf8(buf).map_err(|_| err("invalid UTF-8 in vocabulary"))
}
