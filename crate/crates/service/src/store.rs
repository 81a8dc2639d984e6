//! Document store on the local filesystem.
//!
//! Each document is one JSON file. Writes go to a temporary file in the
//! same directory which is synced and then renamed over the target, so a
//! reader sees either the old or the new document. Leftover temporary
//! files from an interrupted write are removed when the store is opened.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

const TEMP_SUFFIX: &str = ".tmp";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Instance,
    Session,
}

impl Kind {
    fn dir(self) -> &'static str {
        match self {
            Kind::Instance => "instances",
            Kind::Session => "sessions",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: unreadable document: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("not found")]
    NotFound,
    #[error("document already exists")]
    Exists,
    #[error("store stopped by injected fault")]
    Crashed,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Where an injected crash interrupts a write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashPoint {
    /// Nothing of the write reaches the disk.
    BeforeWrite,
    /// Half of the temporary file is written.
    TornTemp,
    /// The temporary file is complete but never renamed.
    BeforeRename,
}

/// Lets a fixed number of writes succeed, then crashes the next one and
/// refuses every later operation, as if the process had died.
#[derive(Debug)]
pub struct FaultInjector {
    remaining: AtomicU64,
    point: CrashPoint,
    crashed: AtomicBool,
}

impl FaultInjector {
    pub fn after_writes(writes: u64, point: CrashPoint) -> Arc<Self> {
        Arc::new(Self {
            remaining: AtomicU64::new(writes),
            point,
            crashed: AtomicBool::new(false),
        })
    }

    pub fn crashed(&self) -> bool {
        self.crashed.load(Ordering::SeqCst)
    }

    fn check(&self) -> Result<(), StoreError> {
        if self.crashed() {
            Err(StoreError::Crashed)
        } else {
            Ok(())
        }
    }

    /// `Some(point)` when this write is the one to crash.
    fn on_write(&self) -> Option<CrashPoint> {
        let left = self.remaining.load(Ordering::SeqCst);
        if left == 0 {
            self.crashed.store(true, Ordering::SeqCst);
            Some(self.point)
        } else {
            self.remaining.store(left - 1, Ordering::SeqCst);
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
    faults: Option<Arc<FaultInjector>>,
}

/// Ids become file names, so only a conservative alphabet is accepted.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

pub fn new_id() -> String {
    let bytes: [u8; 8] = rand::thread_rng().gen();
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for kind in [Kind::Instance, Kind::Session] {
            let dir = root.join(kind.dir());
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
                let path = entry.map_err(io_err(&dir))?.path();
                if path.to_string_lossy().ends_with(TEMP_SUFFIX) {
                    fs::remove_file(&path).map_err(io_err(&path))?;
                }
            }
        }
        Ok(Self { root, faults: None })
    }

    pub fn with_faults(mut self, faults: Arc<FaultInjector>) -> Self {
        self.faults = Some(faults);
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn check(&self) -> Result<(), StoreError> {
        self.faults.as_ref().map_or(Ok(()), |f| f.check())
    }

    pub fn path(&self, kind: Kind, id: &str) -> PathBuf {
        self.root.join(kind.dir()).join(format!("{id}.json"))
    }

    pub fn exists(&self, kind: Kind, id: &str) -> bool {
        valid_id(id) && self.path(kind, id).is_file()
    }

    pub fn get<T: DeserializeOwned>(&self, kind: Kind, id: &str) -> Result<T, StoreError> {
        self.check()?;
        if !valid_id(id) {
            return Err(StoreError::NotFound);
        }
        let path = self.path(kind, id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound),
            Err(e) => return Err(io_err(&path)(e)),
        };
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path,
            message: e.to_string(),
        })
    }

    /// Replaces (or creates) a document.
    pub fn put<T: Serialize>(&self, kind: Kind, id: &str, value: &T) -> Result<(), StoreError> {
        self.write(kind, id, value, false)
    }

    /// Creates a document, failing if one with the same id exists.
    pub fn create<T: Serialize>(&self, kind: Kind, id: &str, value: &T) -> Result<(), StoreError> {
        self.write(kind, id, value, true)
    }

    fn write<T: Serialize>(&self, kind: Kind, id: &str, value: &T, exclusive: bool) -> Result<(), StoreError> {
        self.check()?;
        assert!(valid_id(id), "invalid document id {id:?}");
        let target = self.path(kind, id);
        let mut bytes = serde_json::to_vec_pretty(value).expect("documents serialize");
        bytes.push(b'\n');
        let crash = self.faults.as_ref().and_then(|f| f.on_write());
        if crash == Some(CrashPoint::BeforeWrite) {
            return Err(StoreError::Crashed);
        }

        let dir = target.parent().expect("documents live in a directory");
        let temp = dir.join(format!(".{id}.{}{TEMP_SUFFIX}", new_id()));
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&temp)
            .map_err(io_err(&temp))?;
        if crash == Some(CrashPoint::TornTemp) {
            file.write_all(&bytes[..bytes.len() / 2]).map_err(io_err(&temp))?;
            return Err(StoreError::Crashed);
        }
        file.write_all(&bytes).map_err(io_err(&temp))?;
        file.sync_all().map_err(io_err(&temp))?;
        drop(file);
        if crash == Some(CrashPoint::BeforeRename) {
            return Err(StoreError::Crashed);
        }

        if exclusive {
            // A hard link fails if the target exists, unlike rename.
            let linked = fs::hard_link(&temp, &target);
            let _ = fs::remove_file(&temp);
            match linked {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => return Err(StoreError::Exists),
                Err(e) => return Err(io_err(&target)(e)),
            }
        } else {
            fs::rename(&temp, &target).map_err(io_err(&target))?;
        }
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
        Ok(())
    }

    /// Ids of all stored documents of `kind`, sorted.
    pub fn list(&self, kind: Kind) -> Result<Vec<String>, StoreError> {
        self.check()?;
        let dir = self.root.join(kind.dir());
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let name = entry.map_err(io_err(&dir))?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".json") {
                if valid_id(id) {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
