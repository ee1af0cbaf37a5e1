//! Append-only answer log.
//!
//! One JSON object per line. A `session` record opens a session, an `answers`
//! record applies one batch. Every record is fsynced before the call returns,
//! so an acknowledged batch survives a crash. Replaying the records through
//! the interview engine rebuilds every session, because batches are drawn from
//! rngs keyed only by the session seed and the batch number.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Session {
        at: DateTime<Utc>,
        session_id: String,
        token: String,
        seed: u64,
        /// Uris shown to the token in earlier sessions.
        previously_asked: Vec<String>,
    },
    Answers {
        at: DateTime<Utc>,
        session_id: String,
        token: String,
        batch_number: u32,
        answers: Vec<LoggedAnswer>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoggedAnswer {
    pub entity: String,
    pub is_item: bool,
    /// 1 like, -1 dislike, 0 unknown.
    pub sentiment: i8,
}

#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Opens (creating if needed) the log at `path` and returns the records
    /// already in it. A torn final line from an interrupted write is dropped
    /// and cut from the file.
    pub fn open(path: &Path) -> Result<(Journal, Vec<Record>), ServiceError> {
        let io = |e| ServiceError::Storage(format!("{}: {e}", path.display()));
        let mut records = Vec::new();
        let mut good_len = 0u64;
        if path.exists() {
            let mut reader = BufReader::new(File::open(path).map_err(io)?);
            let mut line = String::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let n = reader.read_line(&mut line).map_err(io)?;
                if n == 0 {
                    break;
                }
                lineno += 1;
                if !line.ends_with('\n') {
                    log::warn!("{}: dropping torn record at line {lineno}", path.display());
                    break;
                }
                let record = serde_json::from_str::<Record>(line.trim_end()).map_err(|e| {
                    ServiceError::Storage(format!("{}:{lineno}: corrupt record: {e}", path.display()))
                })?;
                records.push(record);
                good_len += n as u64;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if file.metadata().map_err(io)?.len() != good_len {
            file.set_len(good_len).map_err(io)?;
        }
        Ok((
            Journal {
                path: path.to_path_buf(),
                file,
            },
            records,
        ))
    }

    pub fn append(&mut self, record: &Record) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(record).map_err(|e| ServiceError::Storage(e.to_string()))?;
        line.push(b'\n');
        let io = |e| ServiceError::Storage(format!("{}: {e}", self.path.display()));
        self.file.write_all(&line).map_err(io)?;
        self.file.sync_data().map_err(io)
    }
}
