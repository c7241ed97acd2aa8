//! Barrier checkpoints.
//!
//! File layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "GPMCKPT\0"
//! version    u32      currently 1
//! tag        u32 length + UTF-8 bytes (engine and program identity)
//! superstep  u64      last completed superstep
//! sections   u32 count, then per section:
//!              u16 name length + UTF-8 name
//!              u64 payload length
//!              u32 CRC-32 of the payload
//!              payload (JSON)
//! ```
//!
//! Floating-point values survive the JSON payload bit for bit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GPMCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub tag: String,
    pub superstep: u64,
    sections: Vec<(String, Vec<u8>)>,
}

/// When and where an engine writes checkpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointPolicy {
    pub dir: PathBuf,
    /// Checkpoint after every superstep `s` with `s % every == 0`.
    pub every: u64,
    /// Fail the run when a checkpoint cannot be written instead of logging
    /// and carrying on.
    pub strict: bool,
}

impl CheckpointPolicy {
    pub fn new(dir: impl Into<PathBuf>, every: u64) -> Self {
        CheckpointPolicy {
            dir: dir.into(),
            every: every.max(1),
            strict: false,
        }
    }

    pub fn strict(mut self) -> Self {
        self.strict = true;
        self
    }

    pub fn due(&self, superstep: u64) -> bool {
        superstep.is_multiple_of(self.every)
    }

    pub fn path_for(&self, superstep: u64) -> PathBuf {
        self.dir.join(format!("superstep-{superstep:08}.ckpt"))
    }

    /// Most recent checkpoint file in the directory, if any.
    pub fn latest(&self) -> Option<PathBuf> {
        let mut best: Option<(u64, PathBuf)> = None;
        for entry in fs::read_dir(&self.dir).ok()?.flatten() {
            let name = entry.file_name();
            let name = name.to_string_lossy();
            let Some(step) = name
                .strip_prefix("superstep-")
                .and_then(|s| s.strip_suffix(".ckpt"))
                .and_then(|s| s.parse::<u64>().ok())
            else {
                continue;
            };
            if best.as_ref().is_none_or(|(b, _)| step > *b) {
                best = Some((step, entry.path()));
            }
        }
        best.map(|(_, p)| p)
    }
}

impl Checkpoint {
    pub fn new(tag: impl Into<String>, superstep: u64) -> Self {
        Checkpoint {
            tag: tag.into(),
            superstep,
            sections: Vec::new(),
        }
    }

    pub fn put<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let bytes = serde_json::to_vec(value).map_err(|e| Error::Checkpoint {
            path: PathBuf::new(),
            message: format!("serializing section {name:?}: {e}"),
        })?;
        self.sections.push((name.to_owned(), bytes));
        Ok(())
    }

    pub fn get<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let (_, bytes) = self
            .sections
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| restore_err("", format!("missing section {name:?}")))?;
        serde_json::from_slice(bytes)
            .map_err(|e| restore_err("", format!("decoding section {name:?}: {e}")))
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(n, _)| n.as_str())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tag.len() as u32).to_le_bytes());
        out.extend_from_slice(self.tag.as_bytes());
        out.extend_from_slice(&self.superstep.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (name, payload) in &self.sections {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
            out.extend_from_slice(payload);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(restore_err("", "not a checkpoint file"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(restore_err("", format!("unsupported version {version}")));
        }
        let tag_len = r.u32()? as usize;
        let tag = r.string(tag_len)?;
        let superstep = r.u64()?;
        let count = r.u32()?;
        let mut sections = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = r.string(name_len)?;
            let len = r.u64()? as usize;
            let crc = r.u32()?;
            let payload = r.take(len)?;
            if crc32fast::hash(payload) != crc {
                return Err(restore_err("", format!("section {name:?} fails its checksum")));
            }
            sections.push((name, payload.to_vec()));
        }
        if r.pos != bytes.len() {
            return Err(restore_err("", "trailing bytes after last section"));
        }
        Ok(Checkpoint {
            tag,
            superstep,
            sections,
        })
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let wrap = |e: std::io::Error| Error::Checkpoint {
            path: path.to_owned(),
            message: e.to_string(),
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(wrap)?;
        }
        let tmp = path.with_extension("ckpt.tmp");
        {
            let mut f = fs::File::create(&tmp).map_err(wrap)?;
            f.write_all(&self.encode()).map_err(wrap)?;
            f.sync_all().map_err(wrap)?;
        }
        fs::rename(&tmp, path).map_err(wrap)
    }

    /// Reads a checkpoint and checks that it was written by `expected_tag`.
    pub fn read(path: &Path, expected_tag: &str) -> Result<Checkpoint> {
        let bytes = fs::read(path).map_err(|e| restore_err(path, e.to_string()))?;
        let ck = Checkpoint::decode(&bytes).map_err(|e| match e {
            Error::Restore { message, .. } => restore_err(path, message),
            other => other,
        })?;
        if ck.tag != expected_tag {
            return Err(restore_err(
                path,
                format!("written by {:?}, expected {expected_tag:?}", ck.tag),
            ));
        }
        Ok(ck)
    }
}

fn restore_err(path: impl AsRef<Path>, message: impl Into<String>) -> Error {
    Error::Restore {
        path: path.as_ref().to_owned(),
        message: message.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| restore_err("", "truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| restore_err("", "invalid UTF-8 in header"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Checkpoint {
        let mut ck = Checkpoint::new("pregel:test", 4);
        ck.put("states", &vec![0.1f64, 1.0 / 3.0, f64::MIN_POSITIVE, 1e300])
            .unwrap();
        ck.put("halted", &vec![true, false]).unwrap();
        ck
    }

    #[test]
    fn encode_decode_round_trip() {
        let ck = sample();
        let back = Checkpoint::decode(&ck.encode()).unwrap();
        assert_eq!(back, ck);
        let states: Vec<f64> = back.get("states").unwrap();
        assert_eq!(states[1].to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(back.section_names().collect::<Vec<_>>(), ["states", "halted"]);
    }

    #[test]
    fn corruption_and_tag_mismatch_are_restore_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        sample().write_atomic(&path).unwrap();
        assert!(Checkpoint::read(&path, "pregel:test").is_ok());
        assert!(matches!(
            Checkpoint::read(&path, "gas:other"),
            Err(Error::Restore { .. })
        ));

        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 2;
        bytes[last] ^= 0x55;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            Checkpoint::read(&path, "pregel:test"),
            Err(Error::Restore { .. })
        ));
        bytes.truncate(20);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            Checkpoint::read(&path, "pregel:test"),
            Err(Error::Restore { .. })
        ));
        assert!(Checkpoint::read(&dir.path().join("missing"), "x").is_err());
    }

    #[test]
    fn policy_finds_latest() {
        let dir = tempfile::tempdir().unwrap();
        let policy = CheckpointPolicy::new(dir.path(), 2);
        assert!(policy.latest().is_none());
        for s in [0, 2, 4] {
            Checkpoint::new("t", s).write_atomic(&policy.path_for(s)).unwrap();
        }
        assert_eq!(policy.latest(), Some(policy.path_for(4)));
        assert!(policy.due(4) && !policy.due(5));
    }

    proptest! {
        #[test]
        fn arbitrary_floats_round_trip_bit_exactly(xs in proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..50)) {
            let mut ck = Checkpoint::new("t", 1);
            ck.put("xs", &xs).unwrap();
            let back: Vec<f64> = Checkpoint::decode(&ck.encode()).unwrap().get("xs").unwrap();
            prop_assert_eq!(back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
    }
}
