//! Output records and the single file writer.

use std::path::{Path, PathBuf};
use std::sync::mpsc::{channel, Sender};
use std::thread::JoinHandle;

use spinchain::atomic::write_atomic;
use spinchain::scan::format_float;

use crate::CliError;

/// One-line `key=value` record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    fields: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn float(self, key: &str, value: f64) -> Self {
        self.text(key, format_float(value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let parts: Vec<String> = self.fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}\n", parts.join(" "))
    }

    pub fn parse(line: &str) -> Result<Self, CliError> {
        let mut fields = Vec::new();
        for token in line.split_whitespace() {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("malformed summary field {token:?}")))?;
            fields.push((k.to_string(), v.to_string()));
        }
        Ok(Self { fields })
    }

    pub fn float_field(&self, key: &str) -> Result<f64, CliError> {
        let v = self
            .get(key)
            .ok_or_else(|| CliError::Usage(format!("summary has no {key}")))?;
        v.parse()
            .map_err(|_| CliError::Usage(format!("summary field {key}={v} is not a number")))
    }
}

enum Job {
    Write(PathBuf, Vec<u8>),
    Remove(PathBuf),
}

/// Funnels every file operation of a run through one thread. Writes are
/// atomic (temporary file plus rename).
pub struct Writer {
    tx: Option<Sender<Job>>,
    handle: Option<JoinHandle<Result<(), String>>>,
}

impl Writer {
    pub fn spawn() -> Self {
        let (tx, rx) = channel::<Job>();
        let handle = std::thread::spawn(move || {
            let mut first_error = None;
            for job in rx {
                let outcome = match &job {
                    Job::Write(path, bytes) => write_atomic(path, bytes)
                        .map_err(|e| format!("writing {}: {e}", path.display())),
                    Job::Remove(path) => match std::fs::remove_file(path) {
                        Err(e) if e.kind() != std::io::ErrorKind::NotFound => {
                            Err(format!("removing {}: {e}", path.display()))
                        }
                        _ => Ok(()),
                    },
                };
                if let Err(e) = outcome {
                    log::error!("{e}");
                    first_error.get_or_insert(e);
                }
            }
            first_error.map_or(Ok(()), Err)
        });
        Self {
            tx: Some(tx),
            handle: Some(handle),
        }
    }

    pub fn handle(&self) -> WriterHandle {
        WriterHandle {
            tx: self.tx.clone().expect("writer is open"),
        }
    }

    /// Waits for every queued operation and reports the first failure.
    pub fn finish(mut self) -> Result<(), CliError> {
        self.close()
    }

    fn close(&mut self) -> Result<(), CliError> {
        self.tx.take();
        match self.handle.take().map(|h| h.join()) {
            Some(Ok(Err(e))) => Err(CliError::Usage(e)),
            Some(Err(_)) => Err(CliError::Usage("file writer thread panicked".into())),
            _ => Ok(()),
        }
    }
}

impl Drop for Writer {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

#[derive(Clone)]
pub struct WriterHandle {
    tx: Sender<Job>,
}

impl WriterHandle {
    pub fn write(&self, path: &Path, bytes: Vec<u8>) {
        let _ = self.tx.send(Job::Write(path.to_path_buf(), bytes));
    }

    pub fn remove(&self, path: &Path) {
        let _ = self.tx.send(Job::Remove(path.to_path_buf()));
    }
}
