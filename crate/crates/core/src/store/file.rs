//! Single-file append-compact credential store.
//!
//! File layout:
//!
//! ```text
//! header  : "CDRS" | u16 LE format version (1) | u16 LE reserved (0)
//! frame*  : u32 LE payload length | u32 LE CRC-32 of those 4 length bytes | payload
//! ```
//!
//! Each payload is one [`CredentialRecord`] encoding (which carries its own
//! SHA-256 trailer). Updates append a new frame; the last frame for a user
//! wins. A frame cut short at the end of the file is an interrupted append
//! and is dropped on open. Any other damage fails the open with
//! [`StoreError::CorruptRecord`]. Compaction rewrites the live records into
//! a sibling file and renames it over the original.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use crate::store::{CredentialRecord, CredentialStore, StoreError};

pub const FILE_MAGIC: [u8; 4] = *b"CDRS";
pub const FILE_VERSION: u16 = 1;
const HEADER_LEN: u64 = 8;
const FRAME_HEADER_LEN: usize = 8;

pub struct FileStore {
    path: PathBuf,
    writer: Mutex<Writer>,
    index: RwLock<HashMap<String, CredentialRecord>>,
}

struct Writer {
    file: File,
    len: u64,
    frames: usize,
}

impl FileStore {
    /// Opens `path`, creating an empty store if it does not exist.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let _ = fs::remove_file(compact_path(&path));
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        // a header prefix means creation was interrupted before any record
        let (index, frames, good_len) =
            if bytes.len() < HEADER_LEN as usize && file_header().starts_with(&bytes) {
                file.set_len(0)?;
                file.seek(SeekFrom::Start(0))?;
                file.write_all(&file_header())?;
                file.sync_all()?;
                (HashMap::new(), 0, HEADER_LEN)
            } else {
                let scan = scan(&bytes)?;
                if scan.good_len < bytes.len() as u64 {
                    file.set_len(scan.good_len)?;
                    file.sync_all()?;
                }
                (scan.index, scan.frames, scan.good_len)
            };
        Ok(Self {
            path,
            writer: Mutex::new(Writer {
                file,
                len: good_len,
                frames,
            }),
            index: RwLock::new(index),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Upserts `record`.
    pub fn persist(&self, record: &CredentialRecord) -> Result<(), StoreError> {
        let mut w = self.writer.lock().expect("writer poisoned");
        self.append(&mut w, record)
    }

    /// Rewrites the file with one frame per live record.
    pub fn compact(&self) -> Result<(), StoreError> {
        let mut w = self.writer.lock().expect("writer poisoned");
        self.compact_locked(&mut w)
    }

    fn append(&self, w: &mut Writer, record: &CredentialRecord) -> Result<(), StoreError> {
        let frame = encode_frame(record)?;
        let written = w
            .file
            .seek(SeekFrom::Start(w.len))
            .and_then(|_| w.file.write_all(&frame))
            .and_then(|_| w.file.sync_data());
        if let Err(e) = written {
            // drop whatever part of the frame made it to disk
            let _ = w.file.set_len(w.len);
            return Err(e.into());
        }
        w.len += frame.len() as u64;
        w.frames += 1;
        let live = {
            let mut index = self.index.write().expect("index poisoned");
            index.insert(record.user_id.clone(), record.clone());
            index.len()
        };
        if w.frames > 2 * live + 32 {
            self.compact_locked(w)?;
        }
        Ok(())
    }

    fn compact_locked(&self, w: &mut Writer) -> Result<(), StoreError> {
        let tmp = compact_path(&self.path);
        let mut records: Vec<CredentialRecord> = self
            .index
            .read()
            .expect("index poisoned")
            .values()
            .cloned()
            .collect();
        records.sort_by(|a, b| a.user_id.cmp(&b.user_id));
        let mut buf = file_header().to_vec();
        for r in &records {
            buf.extend_from_slice(&encode_frame(r)?);
        }
        {
            let mut out = File::create(&tmp)?;
            out.write_all(&buf)?;
            out.sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            if let Ok(d) = File::open(dir) {
                let _ = d.sync_all();
            }
        }
        w.file = OpenOptions::new().read(true).write(true).open(&self.path)?;
        w.len = buf.len() as u64;
        w.frames = records.len();
        Ok(())
    }
}

impl CredentialStore for FileStore {
    fn load(&self, user_id: &str) -> Result<Option<CredentialRecord>, StoreError> {
        Ok(self
            .index
            .read()
            .expect("index poisoned")
            .get(user_id)
            .cloned())
    }

    fn insert(&self, record: CredentialRecord) -> Result<(), StoreError> {
        let mut w = self.writer.lock().expect("writer poisoned");
        if self
            .index
            .read()
            .expect("index poisoned")
            .contains_key(&record.user_id)
        {
            return Err(StoreError::AlreadyExists(record.user_id));
        }
        self.append(&mut w, &record)
    }

    fn update(
        &self,
        user_id: &str,
        f: &mut dyn FnMut(&mut CredentialRecord),
    ) -> Result<Option<CredentialRecord>, StoreError> {
        let mut w = self.writer.lock().expect("writer poisoned");
        let Some(mut record) = self.load(user_id)? else {
            return Ok(None);
        };
        f(&mut record);
        self.append(&mut w, &record)?;
        Ok(Some(record))
    }
}

fn compact_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".compact");
    path.with_file_name(name)
}

fn file_header() -> [u8; HEADER_LEN as usize] {
    let mut h = [0u8; HEADER_LEN as usize];
    h[..4].copy_from_slice(&FILE_MAGIC);
    h[4..6].copy_from_slice(&FILE_VERSION.to_le_bytes());
    h
}

fn encode_frame(record: &CredentialRecord) -> Result<Vec<u8>, StoreError> {
    let payload = record.encode()?;
    let len = (payload.len() as u32).to_le_bytes();
    let mut frame = Vec::with_capacity(FRAME_HEADER_LEN + payload.len());
    frame.extend_from_slice(&len);
    frame.extend_from_slice(&crc32fast::hash(&len).to_le_bytes());
    frame.extend_from_slice(&payload);
    Ok(frame)
}

struct Scan {
    index: HashMap<String, CredentialRecord>,
    frames: usize,
    good_len: u64,
}

fn scan(bytes: &[u8]) -> Result<Scan, StoreError> {
    if bytes.len() < HEADER_LEN as usize {
        return Err(StoreError::CorruptRecord("file shorter than header".into()));
    }
    if bytes[..HEADER_LEN as usize] != file_header() {
        return Err(StoreError::CorruptRecord("bad file header".into()));
    }
    let mut index = HashMap::new();
    let mut frames = 0;
    let mut off = HEADER_LEN as usize;
    while off < bytes.len() {
        let rest = &bytes[off..];
        if rest.len() < FRAME_HEADER_LEN {
            break; // interrupted append
        }
        let len_bytes: [u8; 4] = rest[..4].try_into().expect("4 bytes");
        let crc = u32::from_le_bytes(rest[4..8].try_into().expect("4 bytes"));
        if crc32fast::hash(&len_bytes) != crc {
            return Err(StoreError::CorruptRecord(format!(
                "frame header at offset {off}"
            )));
        }
        let len = u32::from_le_bytes(len_bytes) as usize;
        if rest.len() - FRAME_HEADER_LEN < len {
            break; // interrupted append
        }
        let record = CredentialRecord::decode(&rest[FRAME_HEADER_LEN..FRAME_HEADER_LEN + len])?;
        index.insert(record.user_id.clone(), record);
        frames += 1;
        off += FRAME_HEADER_LEN + len;
    }
    Ok(Scan {
        index,
        frames,
        good_len: off as u64,
    })
}
