//! On-disk layout under the data root:
//!
//! ```text
//! sessions/<id>/session.json   config and start time
//! sessions/<id>/events.jsonl   one accepted event per line, append-only
//! sessions/<id>/clips/<clip_id>.wav
//! models/<model_id>.aktv
//! ```
//!
//! A session's state is rebuilt by replaying its event log.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use aktivtalk_core::session::{Session, SessionConfig, TimedEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub started_at_ms: i64,
    pub config: SessionConfig,
}

/// Content address of a blob: the first 16 hex digits of its SHA-256.
pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// Session and model ids end up in paths, so only a safe alphabet passes.
pub fn is_safe_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("sessions"))?;
        fs::create_dir_all(root.join("models"))?;
        let root = root.canonicalize()?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(id)
    }

    pub fn clip_path(&self, session_id: &str, clip_id: &str) -> PathBuf {
        self.session_dir(session_id).join("clips").join(format!("{clip_id}.wav"))
    }

    pub fn model_path(&self, model_id: &str) -> PathBuf {
        self.root.join("models").join(format!("{model_id}.aktv"))
    }

    pub fn create_session(&self, meta: &SessionMeta) -> io::Result<()> {
        let dir = self.session_dir(&meta.session_id);
        fs::create_dir_all(dir.join("clips"))?;
        write_synced(&dir.join("events.jsonl"), b"")?;
        // session.json last: its presence marks a complete session
        write_synced(&dir.join("session.json"), &serde_json::to_vec_pretty(meta)?)
    }

    pub fn append_event(&self, session_id: &str, event: &TimedEvent) -> io::Result<()> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .append(true)
            .open(self.session_dir(session_id).join("events.jsonl"))?;
        f.write_all(&line)?;
        f.sync_data()
    }

    /// Store a clip under its content address; a re-upload is a no-op.
    pub fn put_clip(&self, session_id: &str, clip_id: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let path = self.clip_path(session_id, clip_id);
        if !path.is_file() {
            let tmp = path.with_extension("wav.part");
            write_synced(&tmp, bytes)?;
            fs::rename(&tmp, &path)?;
        }
        Ok(path)
    }

    pub fn clips(&self, session_id: &str) -> io::Result<BTreeMap<String, PathBuf>> {
        let mut out = BTreeMap::new();
        for entry in fs::read_dir(self.session_dir(session_id).join("clips"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "wav") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    out.insert(stem.to_string(), path.clone());
                }
            }
        }
        Ok(out)
    }

    /// Rebuild every persisted session. Sessions whose log no longer
    /// replays are returned separately with the reason.
    pub fn load_sessions(&self) -> io::Result<(Vec<(SessionMeta, Session)>, Vec<(String, String)>)> {
        let mut ok = Vec::new();
        let mut broken = Vec::new();
        let mut dirs: Vec<PathBuf> = fs::read_dir(self.root.join("sessions"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("session.json").is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let name = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
            match self.replay(&dir) {
                Ok(loaded) => ok.push(loaded),
                Err(reason) => broken.push((name, reason)),
            }
        }
        Ok((ok, broken))
    }

    fn replay(&self, dir: &Path) -> Result<(SessionMeta, Session), String> {
        let meta: SessionMeta = serde_json::from_slice(&fs::read(dir.join("session.json")).map_err(|e| e.to_string())?)
            .map_err(|e| format!("session.json: {e}"))?;
        let mut session = Session::start(meta.config.clone(), meta.started_at_ms).map_err(|e| e.to_string())?;
        let log = File::open(dir.join("events.jsonl")).map_err(|e| e.to_string())?;
        let mut lines = BufReader::new(log).split(b'\n').peekable();
        let mut n = 0;
        while let Some(line) = lines.next() {
            let line = line.map_err(|e| e.to_string())?;
            n += 1;
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let event: TimedEvent = match serde_json::from_slice(&line) {
                Ok(e) => e,
                // a torn final write was never acknowledged
                Err(_) if lines.peek().is_none() => break,
                Err(e) => return Err(format!("events.jsonl line {n}: {e}")),
            };
            session
                .advance(&event.event, event.at_ms)
                .map_err(|e| format!("events.jsonl line {n}: {e}"))?;
        }
        Ok((meta, session))
    }

    pub fn model_ids(&self) -> io::Result<Vec<String>> {
        let mut ids: Vec<String> = fs::read_dir(self.root.join("models"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "aktv"))
            .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(String::from))
            .collect();
        ids.sort();
        Ok(ids)
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut f = File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}
