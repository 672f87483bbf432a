//! Sequence manifests: the JSON file naming a sequence's frames,
//! annotations, frame rate and initial target box.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data_io::netpbm;
use crate::features::ImagePatch;
use crate::{BoundingBox, Error, Result};

/// On-disk description of one sequence. Frame and annotation paths are
/// interpreted relative to the manifest's directory unless absolute.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SequenceManifest {
    pub id: String,
    pub fps: f64,
    pub frames: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    /// Initial target box in frame 0, center format.
    pub init_box: BoundingBox,
    /// Loop structure for repetitive sequences (loop count, frames per loop).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loops: Option<LoopInfo>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct LoopInfo {
    pub count: usize,
    pub frames_per_loop: usize,
}

impl SequenceManifest {
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Invalid(format!("sequence {} has no frames", self.id)));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Invalid(format!(
                "sequence {}: fps must be positive, got {}",
                self.id, self.fps
            )));
        }
        self.init_box.validate()
    }

    /// Resolves every stored path against `base`, in place.
    pub fn resolve_paths(&mut self, base: &Path) {
        for f in &mut self.frames {
            if f.is_relative() {
                *f = base.join(&f);
            }
        }
        if let Some(a) = &mut self.annotations {
            if a.is_relative() {
                *a = base.join(&a);
            }
        }
    }
}

/// Loads and validates a manifest; stored paths become absolute.
pub fn load_manifest(path: &Path) -> Result<SequenceManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: SequenceManifest =
        serde_json::from_str(&text).map_err(|e| Error::data(path, e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    manifest.resolve_paths(base);
    manifest.validate()?;
    Ok(manifest)
}

pub fn save_manifest(path: &Path, manifest: &SequenceManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::data(path, e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A manifest whose frame files have been checked to exist, plus a decoding
/// frame iterator. Frames decode lazily, are converted to grayscale, and
/// must keep the dimensions of frame 0.
#[derive(Debug)]
pub struct LoadedSequence {
    pub manifest: SequenceManifest,
}

/// Loads a manifest and verifies every frame file exists.
pub fn load_sequence(path: &Path) -> Result<LoadedSequence> {
    let manifest = load_manifest(path)?;
    for frame in &manifest.frames {
        if !frame.is_file() {
            return Err(Error::data(frame.clone(), "missing frame file"));
        }
    }
    Ok(LoadedSequence { manifest })
}

impl LoadedSequence {
    /// Decoded grayscale frames in listed order.
    pub fn frames(&self) -> FrameIter<'_> {
        FrameIter {
            paths: &self.manifest.frames,
            next: 0,
            dims: None,
        }
    }
}

pub struct FrameIter<'a> {
    paths: &'a [PathBuf],
    next: usize,
    dims: Option<(usize, usize)>,
}

impl Iterator for FrameIter<'_> {
    type Item = Result<ImagePatch>;

    fn next(&mut self) -> Option<Self::Item> {
        let path = self.paths.get(self.next)?;
        self.next += 1;
        let item = netpbm::read_file(path).map(|p| p.to_gray()).and_then(|p| {
            match self.dims {
                None => self.dims = Some((p.height(), p.width())),
                Some(d) if d != (p.height(), p.width()) => {
                    return Err(Error::data(
                        path.clone(),
                        format!(
                            "frame dimensions changed mid-sequence: {}x{} vs {}x{}",
                            p.height(),
                            p.width(),
                            d.0,
                            d.1
                        ),
                    ))
                }
                _ => {}
            }
            Ok(p)
        });
        Some(item)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_frame(dir: &Path, name: &str, h: usize, w: usize, v: u8) -> PathBuf {
        let path = dir.join(name);
        netpbm::write_pgm_file(&path, &ImagePatch::filled(h, w, v)).unwrap();
        path
    }

    fn basic_manifest(frames: Vec<PathBuf>) -> SequenceManifest {
        SequenceManifest {
            id: "seq".into(),
            fps: 30.0,
            frames,
            annotations: None,
            init_box: BoundingBox::new(10.0, 10.0, 8.0, 8.0).unwrap(),
            loops: None,
        }
    }

    #[test]
    fn loads_three_frame_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let frames = (0..3)
            .map(|i| write_frame(dir.path(), &format!("f{i}.pgm"), 20, 24, i as u8))
            .collect();
        let path = dir.path().join("seq.json");
        save_manifest(&path, &basic_manifest(frames)).unwrap();
        let seq = load_sequence(&path).unwrap();
        let decoded: Vec<_> = seq.frames().collect::<Result<_>>().unwrap();
        assert_eq!(decoded.len(), 3);
        assert!(decoded.iter().all(|f| f.height() == 20 && f.width() == 24));
    }

    #[test]
    fn missing_frame_errors_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let present = write_frame(dir.path(), "ok.pgm", 8, 8, 0);
        let mut manifest = basic_manifest(vec![present, dir.path().join("gone.pgm")]);
        manifest.resolve_paths(dir.path());
        let path = dir.path().join("seq.json");
        save_manifest(&path, &manifest).unwrap();
        let err = load_sequence(&path).unwrap_err().to_string();
        assert!(err.contains("gone.pgm"), "{err}");
    }

    #[test]
    fn dimension_change_mid_sequence_errors() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_frame(dir.path(), "a.pgm", 16, 16, 1);
        let b = write_frame(dir.path(), "b.pgm", 16, 18, 2);
        let path = dir.path().join("seq.json");
        save_manifest(&path, &basic_manifest(vec![a, b])).unwrap();
        let seq = load_sequence(&path).unwrap();
        let results: Vec<_> = seq.frames().collect();
        assert!(results[0].is_ok());
        let err = results[1].as_ref().unwrap_err().to_string();
        assert!(err.contains("b.pgm"), "{err}");
        assert!(err.contains("changed mid-sequence"), "{err}");
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path(), "f0.pgm", 8, 8, 5);
        let manifest = basic_manifest(vec![PathBuf::from("f0.pgm")]);
        let path = dir.path().join("seq.json");
        save_manifest(&path, &manifest).unwrap();
        let seq = load_sequence(&path).unwrap();
        assert!(seq.manifest.frames[0].is_absolute());
    }
}
