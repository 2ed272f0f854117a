//! Versioned JSON persistence with atomic writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::measure::InitialData;
use crate::stats::{ComparisonReport, EdgeSampleSet, LocalLawReport, RigidityReport};

/// Artifacts stored under a `{kind, version, payload}` envelope.
pub trait Artifact: Serialize + DeserializeOwned {
    const KIND: &'static str;
    const VERSION: u32;
}

macro_rules! artifact {
    ($t:ty, $kind:literal, $v:literal) => {
        impl Artifact for $t {
            const KIND: &'static str = $kind;
            const VERSION: u32 = $v;
        }
    };
}

artifact!(InitialData, "initial-data", 1);
artifact!(EdgeSampleSet, "edge-sample-set", 1);
artifact!(ComparisonReport, "comparison-report", 1);
artifact!(RigidityReport, "rigidity-report", 1);
artifact!(LocalLawReport, "local-law-report", 1);
artifact!(super::run::RunManifest, "run-manifest", 1);

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    kind: String,
    version: u32,
    payload: T,
}

pub fn to_json<T: Artifact>(artifact: &T) -> Result<String> {
    #[derive(Serialize)]
    struct Borrowed<'a, T> {
        kind: &'static str,
        version: u32,
        payload: &'a T,
    }
    Ok(serde_json::to_string_pretty(&Borrowed { kind: T::KIND, version: T::VERSION, payload: artifact })?)
}

pub fn from_json<T: Artifact>(text: &str) -> Result<T> {
    let raw: Envelope<serde_json::Value> = serde_json::from_str(text)?;
    if raw.kind != T::KIND || raw.version != T::VERSION {
        return Err(Error::SchemaMismatch(format!("found {} v{}, expected {} v{}", raw.kind, raw.version, T::KIND, T::VERSION)));
    }
    Ok(serde_json::from_value(raw.payload)?)
}

pub fn persist<T: Artifact>(artifact: &T, path: &Path) -> Result<()> {
    write_atomic(path, to_json(artifact)?.as_bytes())
}

pub fn load<T: Artifact>(path: &Path) -> Result<T> {
    from_json(&fs::read_to_string(path)?)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().ok_or_else(|| Error::Config(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::SampleMeta;

    #[test]
    fn initial_data_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = InitialData::with_auto_norm(vec![-0.4, 0.1 + 0.2, 0.9]).unwrap();
        let p = dir.path().join("v.json");
        persist(&v, &p).unwrap();
        assert_eq!(load::<InitialData>(&p).unwrap(), v);
    }

    #[test]
    fn sample_set_round_trip_and_schema_check() {
        let dir = tempfile::tempdir().unwrap();
        let meta = SampleMeta { n: 4, t: 0.5, v_fingerprint: "x".into(), gamma0: 1.5, e_minus: -2.0, i0: 1, master_seed: 9 };
        let set = EdgeSampleSet::new(vec![vec![-1.0, 1.0 / 3.0]], meta).unwrap();
        let p = dir.path().join("nested/s.json");
        persist(&set, &p).unwrap();
        assert_eq!(load::<EdgeSampleSet>(&p).unwrap(), set);
        assert!(matches!(load::<InitialData>(&p), Err(Error::SchemaMismatch(_))));
        let bumped = fs::read_to_string(&p).unwrap().replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(from_json::<EdgeSampleSet>(&bumped), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
