use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 8] = b"MSTATE01";

/// Sidecar describing an exported microstate set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrostateManifest {
    pub format_version: u32,
    pub d: usize,
    pub count: usize,
    pub model: String,
    pub sigma_hash: String,
    pub f_set: Vec<String>,
    pub delta: String,
    pub panel_hash: String,
    pub data_file: String,
    pub data_sha256: String,
}

/// Metadata supplied by the caller; sizes and hashes are filled in on export.
#[derive(Clone, Debug)]
pub struct MicrostateLabel {
    pub model: String,
    pub sigma_hash: String,
    pub f_set: Vec<String>,
    pub delta: String,
    pub panel_hash: String,
}

/// Writes `<stem>.bin` (little-endian `u32` point indices, row-major) and
/// `<stem>.json`.
pub fn export_microstates(dir: &Path, stem: &str, d: usize, points: &[Vec<u32>], label: MicrostateLabel) -> Result<MicrostateManifest> {
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::LengthMismatch { expected: d, found: p.len() });
    }
    let mut bytes = Vec::with_capacity(24 + 4 * d * points.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(d as u64).to_le_bytes());
    bytes.extend_from_slice(&(points.len() as u64).to_le_bytes());
    for v in points.iter().flatten() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::create_dir_all(dir)?;
    let data_file = format!("{stem}.bin");
    fs::write(dir.join(&data_file), &bytes)?;
    let manifest = MicrostateManifest {
        format_version: 1,
        d,
        count: points.len(),
        model: label.model,
        sigma_hash: label.sigma_hash,
        f_set: label.f_set,
        delta: label.delta,
        panel_hash: label.panel_hash,
        data_file,
        data_sha256: hex::encode(Sha256::digest(&bytes)),
    };
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Reads a manifest and its data file, checking the hash and shape.
pub fn import_microstates(manifest_path: &Path) -> Result<(MicrostateManifest, Vec<Vec<u32>>)> {
    let manifest: MicrostateManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let bytes = fs::read(dir.join(&manifest.data_file))?;
    if hex::encode(Sha256::digest(&bytes)) != manifest.data_sha256 {
        return invalid(format!("{}: data hash mismatch", manifest.data_file));
    }
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return invalid(format!("{}: not a microstate file", manifest.data_file));
    }
    let d = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    if d != manifest.d || count != manifest.count || bytes.len() != 24 + 4 * d * count {
        return invalid(format!("{}: shape disagrees with manifest", manifest.data_file));
    }
    let values: Vec<u32> = bytes[24..].chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let points = if d == 0 { vec![vec![]; count] } else { values.chunks(d).map(<[u32]>::to_vec).collect() };
    Ok((manifest, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label() -> MicrostateLabel {
        MicrostateLabel {
            model: "Z/3".into(),
            sigma_hash: "abc".into(),
            f_set: vec!["e".into(), "t".into()],
            delta: "1/4".into(),
            panel_hash: "none".into(),
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![vec![0, 1, 2], vec![2, 2, 1]];
        let m = export_microstates(dir.path(), "set", 3, &pts, label()).unwrap();
        let (m2, back) = import_microstates(&dir.path().join("set.json")).unwrap();
        assert_eq!(m, m2);
        assert_eq!(back, pts);
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        export_microstates(dir.path(), "set", 2, &[vec![1, 0]], label()).unwrap();
        let path = dir.path().join("set.bin");
        let mut b = fs::read(&path).unwrap();
        *b.last_mut().unwrap() ^= 1;
        fs::write(&path, b).unwrap();
        assert!(import_microstates(&dir.path().join("set.json")).is_err());
    }

    #[test]
    fn wrong_length_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(export_microstates(dir.path(), "x", 3, &[vec![1]], label()).is_err());
    }
}
