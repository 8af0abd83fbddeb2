//! CSV manifest ingestion.
//!
//! The manifest layout is `fname,label,manually_verified`, one clip per row,
//! with the flag written as `0` or `1`. Audio paths are relative to an audio
//! root directory.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use crate::data::{Instance, LabeledCorpus, Payload, SoftLabel};
use crate::error::{Error, Result};
use crate::features::wav;

#[derive(Debug, Deserialize)]
struct ManifestRow {
    fname: String,
    label: String,
    manually_verified: u8,
}

fn read_rows(manifest_path: &Path) -> Result<Vec<ManifestRow>> {
    let file =
        std::fs::File::open(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<ManifestRow>, _>>()?;
    if rows.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(rows)
}

/// Class names listed in a manifest, sorted.
pub fn manifest_classes(manifest_path: &Path) -> Result<Vec<String>> {
    let names: BTreeSet<String> = read_rows(manifest_path)?
        .into_iter()
        .map(|r| r.label)
        .collect();
    Ok(names.into_iter().collect())
}

/// Loads a manifest into a corpus whose payloads are the raw audio clips.
///
/// When `classes` is `None` the class set is taken from the manifest itself
/// (sorted by name); pass the training classes when loading a test manifest.
pub fn load_manifest(
    manifest_path: &Path,
    audio_root: &Path,
    classes: Option<&[String]>,
) -> Result<LabeledCorpus> {
    let rows = read_rows(manifest_path)?;
    let class_names: Vec<String> = match classes {
        Some(names) => names.to_vec(),
        None => rows
            .iter()
            .map(|r| r.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };

    let mut instances = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        // Row numbers count the header as row 1.
        let row_number = i + 2;
        let class = class_names
            .iter()
            .position(|c| *c == row.label)
            .ok_or_else(|| Error::UnknownClass {
                name: row.label.clone(),
                valid: class_names.clone(),
            })?;
        let verified = match row.manually_verified {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Format(format!(
                    "manifest row {row_number}: manually_verified must be 0 or 1, got {other}"
                )))
            }
        };
        let path = audio_root.join(&row.fname);
        if !path.is_file() {
            return Err(Error::MissingAudio {
                row: row_number,
                path,
            });
        }
        let clip = wav::read_wav(&path)?;
        instances.push(Instance {
            id: row.fname,
            payload: Payload::Audio(clip),
            label: SoftLabel::one_hot(class, class_names.len())?,
            verified,
            provenance: None,
        });
    }
    LabeledCorpus::new(instances, class_names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::AudioClip;

    fn write_clip(dir: &Path, name: &str) {
        let clip = AudioClip::new(vec![0.0, 0.25, -0.25, 0.5], 16_000).unwrap();
        wav::write_wav(&dir.join(name), &clip).unwrap();
    }

    #[test]
    fn two_rows_one_verified() {
        let dir = tempfile::tempdir().unwrap();
        write_clip(dir.path(), "a.wav");
        write_clip(dir.path(), "b.wav");
        let manifest = dir.path().join("train.csv");
        std::fs::write(
            &manifest,
            "fname,label,manually_verified\na.wav,Bass_guitar,1\nb.wav,Rain,0\n",
        )
        .unwrap();
        let corpus = load_manifest(&manifest, dir.path(), None).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.instances().iter().filter(|i| i.verified).count(), 1);
        assert_eq!(corpus.class_names(), ["Bass_guitar", "Rain"]);
        assert_eq!(corpus.instances()[1].label.argmax(), 1);
        assert!(matches!(corpus.instances()[0].payload, Payload::Audio(_)));
    }

    #[test]
    fn header_only_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("m.csv");
        std::fs::write(&manifest, "fname,label,manually_verified\n").unwrap();
        let err = load_manifest(&manifest, dir.path(), None).unwrap_err();
        assert_eq!(err.to_string(), "empty corpus");
    }

    #[test]
    fn missing_audio_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("m.csv");
        std::fs::write(&manifest, "fname,label,manually_verified\nmissing.wav,Rain,0\n").unwrap();
        let err = load_manifest(&manifest, dir.path(), None).unwrap_err();
        assert!(err.to_string().contains("missing.wav"), "{err}");
    }

    #[test]
    fn unknown_class_lists_valid_names() {
        let dir = tempfile::tempdir().unwrap();
        write_clip(dir.path(), "a.wav");
        let manifest = dir.path().join("m.csv");
        std::fs::write(&manifest, "fname,label,manually_verified\na.wav,Clarinet,1\n").unwrap();
        let classes = vec!["Flute".to_string(), "Rain".to_string()];
        let err = load_manifest(&manifest, dir.path(), Some(&classes)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Clarinet") && msg.contains("Flute, Rain"), "{msg}");
    }

    #[test]
    fn duplicate_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_clip(dir.path(), "a.wav");
        let manifest = dir.path().join("m.csv");
        std::fs::write(
            &manifest,
            "fname,label,manually_verified\na.wav,Rain,1\na.wav,Rain,0\n",
        )
        .unwrap();
        assert!(matches!(
            load_manifest(&manifest, dir.path(), None),
            Err(Error::DuplicateId(_))
        ));
    }
}
