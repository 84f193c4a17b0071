//! CSV manifest `patient_id,gesture_id,correct,frames_path` plus a directory
//! of frames files, paths relative to the dataset root.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{parse_skeletal_file, write_frames, Dataset, IngestError, Provenance};
use crate::skeleton::{validate_sequence, GestureId, GestureSequence, JointIndexMap};

pub const MANIFEST_HEADER: [&str; 4] = ["patient_id", "gesture_id", "correct", "frames_path"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub patient_id: u32,
    pub gesture_id: String,
    pub correct: String,
    pub frames_path: String,
}

fn parse_bool(line: usize, s: &str) -> Result<bool, IngestError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(IngestError::Manifest {
            line,
            message: format!("invalid correct flag {other:?}"),
        }),
    }
}

fn read_manifest(path: &Path) -> Result<Vec<(usize, ManifestRow)>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| IngestError::Manifest {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(IngestError::Manifest {
            line: 1,
            message: format!("expected header {}", MANIFEST_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<ManifestRow>() {
        let rec = rec.map_err(|e| IngestError::Manifest {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        rows.push((rows.len() + 2, rec));
    }
    Ok(rows)
}

/// Loads every correctly performed gesture listed in the manifest.
///
/// Rows flagged incorrect are dropped before their frames are read.
pub fn load_dataset(
    root: &Path,
    manifest: &Path,
    joint_map: JointIndexMap,
) -> Result<Dataset, IngestError> {
    let rows = read_manifest(manifest)?;
    let mut keep = Vec::new();
    for (line, row) in rows {
        let label: GestureId =
            row.gesture_id
                .parse()
                .map_err(|_| IngestError::UnknownLabel {
                    line,
                    label: row.gesture_id.clone(),
                })?;
        if row.patient_id < 1 {
            return Err(IngestError::Manifest {
                line,
                message: "patient_id must be >= 1".into(),
            });
        }
        if parse_bool(line, &row.correct)? {
            keep.push((row.patient_id, label, root.join(&row.frames_path)));
        }
    }

    let sequences = keep
        .into_par_iter()
        .map(|(patient_id, label, path)| load_one(patient_id, label, path))
        .collect::<Result<Vec<_>, _>>()?;
    if sequences.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    Ok(Dataset {
        sequences,
        joint_map,
        provenance: Provenance::Real,
    })
}

fn load_one(patient_id: u32, label: GestureId, path: PathBuf) -> Result<GestureSequence, IngestError> {
    if !path.is_file() {
        return Err(IngestError::MissingFile(path));
    }
    let text = fs::read_to_string(&path).map_err(|source| IngestError::Io {
        path: path.clone(),
        source,
    })?;
    let frames = parse_skeletal_file(&text).map_err(|source| IngestError::Frames {
        path: path.clone(),
        source,
    })?;
    let seq = GestureSequence {
        patient_id,
        label,
        correct: true,
        frames,
    };
    let violations = validate_sequence(&seq);
    if !violations.is_empty() {
        let detail = violations
            .iter()
            .map(|v| v.0.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(IngestError::Mismatch { path, detail });
    }
    Ok(seq)
}

/// Writes `manifest.csv` and `frames/*.txt` under `root`.
pub fn write_dataset(ds: &Dataset, root: &Path) -> Result<PathBuf, IngestError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IngestError::Io { path, source }
    };
    let frames_dir = root.join("frames");
    fs::create_dir_all(&frames_dir).map_err(io_err(&frames_dir))?;

    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut manifest = String::from("patient_id,gesture_id,correct,frames_path\n");
    for seq in &ds.sequences {
        let stem = format!("p{:03}_{}", seq.patient_id, seq.label);
        let n = seen.entry(stem.clone()).or_insert(0);
        let name = if *n == 0 {
            format!("{stem}.txt")
        } else {
            format!("{stem}_{n}.txt")
        };
        *n += 1;
        let path = frames_dir.join(&name);
        fs::write(&path, write_frames(&seq.frames)).map_err(io_err(&path))?;
        manifest.push_str(&format!(
            "{},{},{},frames/{}\n",
            seq.patient_id, seq.label, seq.correct, name
        ));
    }
    let manifest_path = root.join("manifest.csv");
    fs::write(&manifest_path, manifest).map_err(io_err(&manifest_path))?;
    Ok(manifest_path)
}
