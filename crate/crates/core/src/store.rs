//! Append-only JSON Lines store of [`RunRecord`]s.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::domain::{deserialize_run, serialize_run, DomainError, RunRecord};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {source}", path.display())]
    Line {
        path: PathBuf,
        line: usize,
        #[source]
        source: DomainError,
    },
    #[error(transparent)]
    Record(#[from] DomainError),
}

/// Identity of a run for resume purposes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub problem_id: String,
    pub config_fingerprint: String,
    pub rng_seed: u64,
}

impl RunKey {
    pub fn of(run: &RunRecord) -> Self {
        RunKey {
            problem_id: run.problem_id.clone(),
            config_fingerprint: run.config.fingerprint(),
            rng_seed: run.rng_seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunStore {
    path: PathBuf,
}

impl RunStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        RunStore { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io(&self, source: std::io::Error) -> StoreError {
        StoreError::Io {
            path: self.path.clone(),
            source,
        }
    }

    /// Every record in file order. A missing file is an empty store.
    pub fn load(&self) -> Result<Vec<RunRecord>, StoreError> {
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(self.io(e)),
        };
        let mut runs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| self.io(e))?;
            if line.trim().is_empty() {
                continue;
            }
            let run = deserialize_run(&line).map_err(|source| StoreError::Line {
                path: self.path.clone(),
                line: i + 1,
                source,
            })?;
            runs.push(run);
        }
        Ok(runs)
    }

    pub fn keys(&self) -> Result<HashSet<RunKey>, StoreError> {
        Ok(self.load()?.iter().map(RunKey::of).collect())
    }

    /// Appends one line and flushes it to disk; existing lines are never touched.
    pub fn append(&self, run: &RunRecord) -> Result<(), StoreError> {
        let line = serialize_run(run)?;
        if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| self.io(e))?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| self.io(e))?;
        file.write_all(line.as_bytes()).map_err(|e| self.io(e))?;
        file.sync_data().map_err(|e| self.io(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::minimal_run;

    #[test]
    fn append_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::new(dir.path().join("nested/runs.jsonl"));
        assert!(store.load().unwrap().is_empty());
        let run = minimal_run();
        store.append(&run).unwrap();
        let mut second = run.clone();
        second.rng_seed = 8;
        store.append(&second).unwrap();
        let loaded = store.load().unwrap();
        assert_eq!(loaded, vec![run.clone(), second]);
        assert!(store.keys().unwrap().contains(&RunKey::of(&run)));
    }

    #[test]
    fn corrupt_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");
        let good = serialize_run(&minimal_run()).unwrap();
        std::fs::write(&path, format!("{good}{{oops\n")).unwrap();
        let err = RunStore::new(&path).load().unwrap_err();
        assert!(matches!(err, StoreError::Line { line: 2, .. }));
    }
}
