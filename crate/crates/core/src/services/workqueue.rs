//! Resumable per-video work queue.
//!
//! The status file holds one line per video: `id<TAB>status<TAB>attempts<TAB>message`.
//! It is rewritten atomically after every status change, so an interrupted run
//! resumes from the last completed video.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use thiserror::Error;

use crate::fsutil::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorkStatus {
    Pending,
    Described,
    Failed,
}

impl WorkStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            WorkStatus::Pending => "pending",
            WorkStatus::Described => "described",
            WorkStatus::Failed => "failed",
        }
    }
}

impl fmt::Display for WorkStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WorkStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pending" => Ok(WorkStatus::Pending),
            "described" => Ok(WorkStatus::Described),
            "failed" => Ok(WorkStatus::Failed),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkItem {
    pub id: String,
    pub status: WorkStatus,
    pub attempts: u32,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum QueueError {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("unknown work item `{0}`")]
    UnknownId(String),
    #[error("work item id `{0}` contains a tab or newline")]
    BadId(String),
}

#[derive(Debug)]
pub struct WorkQueue {
    path: PathBuf,
    items: Vec<WorkItem>,
    index: HashMap<String, usize>,
    claimed: HashSet<String>,
}

fn one_line(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c == '\t' || c == '\n' || c == '\r' {
                ' '
            } else {
                c
            }
        })
        .collect()
}

impl WorkQueue {
    /// Open the queue at `path`, loading existing state if the file exists.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, QueueError> {
        let path = path.into();
        let mut q = Self {
            path: path.clone(),
            items: Vec::new(),
            index: HashMap::new(),
            claimed: HashSet::new(),
        };
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(q),
            Err(source) => return Err(QueueError::Io { path, source }),
        };
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| QueueError::Parse {
                path: path.clone(),
                line: i + 1,
                message,
            };
            let mut f = line.splitn(4, '\t');
            let (Some(id), Some(status), Some(attempts)) = (f.next(), f.next(), f.next()) else {
                return Err(bad("expected id, status, attempts".into()));
            };
            let status = status.parse().map_err(bad)?;
            let attempts = attempts
                .parse()
                .map_err(|e| bad(format!("attempts: {e}")))?;
            if q.index.contains_key(id) {
                return Err(bad(format!("duplicate id `{id}`")));
            }
            q.index.insert(id.to_string(), q.items.len());
            q.items.push(WorkItem {
                id: id.to_string(),
                status,
                attempts,
                message: f.next().unwrap_or("").to_string(),
            });
        }
        Ok(q)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn items(&self) -> &[WorkItem] {
        &self.items
    }

    pub fn get(&self, id: &str) -> Option<&WorkItem> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    pub fn count(&self, status: WorkStatus) -> usize {
        self.items.iter().filter(|i| i.status == status).count()
    }

    /// Add `id` as pending. Existing items keep their status; returns whether
    /// the id was new.
    pub fn enqueue(&mut self, id: &str) -> Result<bool, QueueError> {
        if id.contains(['\t', '\n', '\r']) || id.is_empty() {
            return Err(QueueError::BadId(id.to_string()));
        }
        if self.index.contains_key(id) {
            return Ok(false);
        }
        self.index.insert(id.to_string(), self.items.len());
        self.items.push(WorkItem {
            id: id.to_string(),
            status: WorkStatus::Pending,
            attempts: 0,
            message: String::new(),
        });
        Ok(true)
    }

    /// Move every failed item back to pending so a rerun retries it.
    pub fn requeue_failed(&mut self) {
        for item in &mut self.items {
            if item.status == WorkStatus::Failed {
                item.status = WorkStatus::Pending;
            }
        }
    }

    /// Claim the next pending item not already handed out.
    pub fn next_pending(&mut self) -> Option<String> {
        let id = self
            .items
            .iter()
            .find(|i| i.status == WorkStatus::Pending && !self.claimed.contains(&i.id))?
            .id
            .clone();
        self.claimed.insert(id.clone());
        Some(id)
    }

    fn finish(&mut self, id: &str, status: WorkStatus, message: &str) -> Result<(), QueueError> {
        let &i = self
            .index
            .get(id)
            .ok_or_else(|| QueueError::UnknownId(id.to_string()))?;
        let item = &mut self.items[i];
        item.status = status;
        item.attempts += 1;
        item.message = one_line(message);
        self.claimed.remove(id);
        self.persist()
    }

    pub fn mark_described(&mut self, id: &str) -> Result<(), QueueError> {
        self.finish(id, WorkStatus::Described, "")
    }

    pub fn mark_failed(&mut self, id: &str, message: &str) -> Result<(), QueueError> {
        self.finish(id, WorkStatus::Failed, message)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# id\tstatus\tattempts\tmessage\n");
        for i in &self.items {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                i.id, i.status, i.attempts, i.message
            ));
        }
        out
    }

    pub fn persist(&self) -> Result<(), QueueError> {
        write_atomic(&self.path, self.to_text().as_bytes()).map_err(|source| QueueError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

/// Outcome of one queue item processed by [`drain`].
#[derive(Debug)]
pub struct Processed<T> {
    pub id: String,
    pub result: Result<T, String>,
}

/// Process every pending item with up to `concurrency` worker threads. Each
/// item goes to exactly one worker; status changes are persisted as they
/// happen. Results come back in queue order.
pub fn drain<T, F>(
    queue: &mut WorkQueue,
    concurrency: usize,
    work: F,
) -> Result<Vec<Processed<T>>, QueueError>
where
    T: Send,
    F: Fn(&str) -> Result<T, String> + Sync,
{
    let order: HashMap<String, usize> = queue
        .items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.id.clone(), i))
        .collect();
    let shared = Mutex::new((&mut *queue, Vec::new(), None::<QueueError>));
    std::thread::scope(|s| {
        for _ in 0..concurrency.max(1) {
            s.spawn(|| loop {
                let id = {
                    let mut g = shared.lock().expect("queue lock");
                    if g.2.is_some() {
                        return;
                    }
                    match g.0.next_pending() {
                        Some(id) => id,
                        None => return,
                    }
                };
                let result = work(&id);
                let mut g = shared.lock().expect("queue lock");
                let marked = match &result {
                    Ok(_) => g.0.mark_described(&id),
                    Err(m) => g.0.mark_failed(&id, m),
                };
                if let Err(e) = marked {
                    g.2 = Some(e);
                }
                g.1.push(Processed { id, result });
            });
        }
    });
    let (_, mut done, err) = shared.into_inner().expect("queue lock");
    if let Some(e) = err {
        return Err(e);
    }
    done.sort_by_key(|p| order[&p.id]);
    Ok(done)
}
