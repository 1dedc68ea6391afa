//! Flat-file persistence under the data directory.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use crowdgen_core::imaging::ImageBuffer;
use crowdgen_core::study::{read_records, write_records, ComparisonRecord, StudyPlan};
use crowdgen_core::{load_library, Aspect, PreferenceLibrary, PreferenceResponse};
use sha2::{Digest, Sha256};

use crate::error::ServiceError;

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// The library, with appends persisted before they become visible.
#[derive(Debug)]
pub struct LibraryStore {
    path: PathBuf,
    current: RwLock<Arc<PreferenceLibrary>>,
}

impl LibraryStore {
    /// Loads `data_dir/library.json` when present, else `seed_path`, else the bundled fixture.
    pub fn open(data_dir: &Path, seed_path: Option<&Path>) -> Result<Self, ServiceError> {
        let path = data_dir.join("library.json");
        let source = if path.is_file() { Some(path.as_path()) } else { seed_path };
        let lib = match source {
            Some(p) => {
                let f = File::open(p).map_err(|e| ServiceError::Io(format!("{}: {e}", p.display())))?;
                load_library(BufReader::new(f))?
            }
            None => crowdgen_core::fixtures::library(),
        };
        Ok(LibraryStore {
            path,
            current: RwLock::new(Arc::new(lib)),
        })
    }

    pub fn snapshot(&self) -> Arc<PreferenceLibrary> {
        self.current.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Appends and persists; returns the list's new length.
    pub fn append(&self, task: &str, aspect: Aspect, response: PreferenceResponse) -> Result<usize, ServiceError> {
        let mut guard = self.current.write().unwrap_or_else(|p| p.into_inner());
        let mut next = (**guard).clone();
        let n = next.append_response(task, aspect, response).map_err(ServiceError::conflict)?;
        write_atomic(&self.path, next.to_json().as_bytes())?;
        *guard = Arc::new(next);
        Ok(n)
    }
}

/// PNG files named by the SHA-256 of their pixels and dimensions.
#[derive(Debug)]
pub struct ImageStore {
    dir: PathBuf,
}

pub fn image_handle(img: &ImageBuffer) -> String {
    let mut h = Sha256::new();
    h.update(img.width().to_le_bytes());
    h.update(img.height().to_le_bytes());
    h.update(img.pixels());
    hex::encode(h.finalize())
}

impl ImageStore {
    pub fn open(dir: PathBuf) -> Result<Self, ServiceError> {
        fs::create_dir_all(&dir)?;
        Ok(ImageStore { dir })
    }

    pub fn put(&self, img: &ImageBuffer) -> Result<String, ServiceError> {
        let handle = image_handle(img);
        let path = self.dir.join(format!("{handle}.png"));
        if !path.is_file() {
            write_atomic(&path, &img.encode_png())?;
        }
        Ok(handle)
    }

    pub fn get(&self, handle: &str) -> Result<ImageBuffer, ServiceError> {
        let valid = handle.len() == 64 && handle.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase());
        let path = self.dir.join(format!("{handle}.png"));
        if !valid || !path.is_file() {
            return Err(ServiceError::NotFound(format!("unknown image handle {handle:?}")));
        }
        Ok(ImageBuffer::decode_png(&fs::read(path)?)?)
    }
}

/// Append-only JSON-lines comparison records plus the active study plan.
#[derive(Debug)]
pub struct StudyStore {
    records_path: PathBuf,
    plan_path: PathBuf,
    plan: RwLock<Option<Arc<StudyPlan>>>,
    write: Mutex<()>,
}

impl StudyStore {
    pub fn open(data_dir: &Path) -> Result<Self, ServiceError> {
        let plan_path = data_dir.join("plan.json");
        let plan = if plan_path.is_file() {
            let text = fs::read_to_string(&plan_path)?;
            Some(Arc::new(
                serde_json::from_str(&text).map_err(|e| ServiceError::Io(format!("plan.json: {e}")))?,
            ))
        } else {
            None
        };
        Ok(StudyStore {
            records_path: data_dir.join("records.jsonl"),
            plan_path,
            plan: RwLock::new(plan),
            write: Mutex::new(()),
        })
    }

    pub fn plan(&self) -> Option<Arc<StudyPlan>> {
        self.plan.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Replaces the active plan and starts a fresh record log.
    pub fn set_plan(&self, plan: StudyPlan) -> Result<(), ServiceError> {
        let _w = self.write.lock().unwrap_or_else(|p| p.into_inner());
        write_atomic(&self.plan_path, serde_json::to_string(&plan).expect("json").as_bytes())?;
        if self.records_path.is_file() {
            fs::remove_file(&self.records_path)?;
        }
        *self.plan.write().unwrap_or_else(|p| p.into_inner()) = Some(Arc::new(plan));
        Ok(())
    }

    /// Validates against the active plan, then appends.
    pub fn append(&self, records: &[ComparisonRecord]) -> Result<usize, ServiceError> {
        let plan = self
            .plan()
            .ok_or_else(|| ServiceError::Conflict("no study plan is active".into()))?;
        for r in records {
            plan.validate_record(r)?;
        }
        let _w = self.write.lock().unwrap_or_else(|p| p.into_inner());
        let mut f = File::options().create(true).append(true).open(&self.records_path)?;
        let mut buf = Vec::new();
        write_records(&mut buf, records)?;
        f.write_all(&buf)?;
        Ok(records.len())
    }

    pub fn records(&self) -> Result<Vec<ComparisonRecord>, ServiceError> {
        let _w = self.write.lock().unwrap_or_else(|p| p.into_inner());
        if !self.records_path.is_file() {
            return Ok(Vec::new());
        }
        Ok(read_records(BufReader::new(File::open(&self.records_path)?))?)
    }
}

/// In-memory sessions keyed by id.
#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, crate::engine::Session>>,
    next: Mutex<u64>,
}

impl SessionStore {
    pub fn insert(&self, mut build: impl FnMut(String) -> crate::engine::Session) -> crate::engine::Session {
        let id = {
            let mut n = self.next.lock().unwrap_or_else(|p| p.into_inner());
            *n += 1;
            format!("s{:06}", *n)
        };
        let s = build(id.clone());
        self.sessions.write().unwrap_or_else(|p| p.into_inner()).insert(id, s.clone());
        s
    }

    pub fn get(&self, id: &str) -> Result<crate::engine::Session, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown session {id:?}")))
    }

    /// Runs `f` on the stored session under the write lock.
    pub fn update<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut crate::engine::Session) -> Result<T, ServiceError>,
    ) -> Result<T, ServiceError> {
        let mut map = self.sessions.write().unwrap_or_else(|p| p.into_inner());
        let s = map
            .get_mut(id)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown session {id:?}")))?;
        f(s)
    }
}
