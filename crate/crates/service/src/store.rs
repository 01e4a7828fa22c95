//! Append-only JSON-lines logs, replayed in full at startup.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::ServiceError;

pub struct AppendLog<T> {
    path: PathBuf,
    file: File,
    _marker: PhantomData<T>,
}

impl<T: Serialize + DeserializeOwned> AppendLog<T> {
    /// Opens (creating if needed) the log at `path` and returns it with every
    /// record already stored, in write order.
    pub fn open(path: &Path) -> Result<(Self, Vec<T>), ServiceError> {
        let mut records = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record = serde_json::from_str(&line).map_err(|e| {
                    ServiceError::Io(format!("{}:{}: {e}", path.display(), i + 1))
                })?;
                records.push(record);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
                _marker: PhantomData,
            },
            records,
        ))
    }

    pub fn append(&mut self, record: &T) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(record).map_err(|e| ServiceError::Io(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
