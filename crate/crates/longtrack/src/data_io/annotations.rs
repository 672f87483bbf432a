//! Ground-truth annotation tracks.
//!
//! CSV format, one entry per line: `frame,cx,cy,w,h` for a visible target
//! (box center, width, height in pixels) or `frame,absent` when the target
//! is not in view. Frames missing from the file are unannotated — sparse
//! labeling is the norm for long videos. Blank lines and `#` comments are
//! skipped.

use std::path::Path;

use crate::{BoundingBox, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnnotationEntry {
    Box(BoundingBox),
    Absent,
}

/// Per-frame ground truth with strictly increasing frame indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationTrack {
    entries: Vec<(usize, AnnotationEntry)>,
}

impl AnnotationTrack {
    pub fn from_entries(entries: Vec<(usize, AnnotationEntry)>) -> Result<Self> {
        for pair in entries.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::Invalid(format!(
                    "annotation frames must strictly increase: {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        Ok(AnnotationTrack { entries })
    }

    pub fn entries(&self) -> &[(usize, AnnotationEntry)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry at `frame`, `None` when the frame is unannotated.
    pub fn lookup(&self, frame: usize) -> Option<&AnnotationEntry> {
        self.entries
            .binary_search_by_key(&frame, |(f, _)| *f)
            .ok()
            .map(|i| &self.entries[i].1)
    }

    /// Drops every entry whose frame is not a multiple of `every`,
    /// producing the sparse-labeling variant of a dense track.
    pub fn sparsified(&self, every: usize) -> AnnotationTrack {
        AnnotationTrack {
            entries: self
                .entries
                .iter()
                .filter(|(f, _)| f % every == 0)
                .copied()
                .collect(),
        }
    }

    /// Entries restricted to `range`, for windowed metrics.
    pub fn slice(&self, range: std::ops::Range<usize>) -> AnnotationTrack {
        AnnotationTrack {
            entries: self
                .entries
                .iter()
                .filter(|(f, _)| range.contains(f))
                .copied()
                .collect(),
        }
    }
}

pub fn parse_annotations(path: &Path) -> Result<AnnotationTrack> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations_str(&text, path)
}

pub fn parse_annotations_str(text: &str, path: &Path) -> Result<AnnotationTrack> {
    let mut entries = Vec::new();
    let mut last_frame: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let frame: usize = fields[0]
            .parse()
            .map_err(|_| err(format!("bad frame index {:?}", fields[0])))?;
        if let Some(prev) = last_frame {
            if frame == prev {
                return Err(err(format!("duplicate frame index {frame}")));
            }
            if frame < prev {
                return Err(err(format!(
                    "out-of-order frame index {frame} after {prev}"
                )));
            }
        }
        last_frame = Some(frame);
        let entry = match fields.as_slice() {
            [_, word] if word.eq_ignore_ascii_case("absent") => AnnotationEntry::Absent,
            [_, cx, cy, w, h] => {
                let nums: Vec<f64> = [cx, cy, w, h]
                    .iter()
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| err(format!("non-numeric field {s:?}")))
                    })
                    .collect::<Result<_>>()?;
                AnnotationEntry::Box(
                    BoundingBox::new(nums[0], nums[1], nums[2], nums[3])
                        .map_err(|e| err(e.to_string()))?,
                )
            }
            _ => {
                return Err(err(format!(
                    "expected `frame,cx,cy,w,h` or `frame,absent`, got {line:?}"
                )))
            }
        };
        entries.push((frame, entry));
    }
    AnnotationTrack::from_entries(entries)
}

pub fn write_annotations(path: &Path, track: &AnnotationTrack) -> Result<()> {
    let mut out = String::new();
    for (frame, entry) in track.entries() {
        match entry {
            AnnotationEntry::Absent => out.push_str(&format!("{frame},absent\n")),
            AnnotationEntry::Box(b) => {
                out.push_str(&format!("{frame},{},{},{},{}\n", b.cx, b.cy, b.w, b.h))
            }
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("gt.csv")
    }

    #[test]
    fn parses_box_and_absent_entries() {
        let track = parse_annotations_str("0,10,10,20,20\n100,absent\n", &p()).unwrap();
        assert_eq!(track.len(), 2);
        match track.lookup(0).unwrap() {
            AnnotationEntry::Box(b) => {
                assert_eq!((b.cx, b.cy, b.w, b.h), (10.0, 10.0, 20.0, 20.0))
            }
            _ => panic!("expected box"),
        }
        assert_eq!(track.lookup(100), Some(&AnnotationEntry::Absent));
        assert_eq!(track.lookup(50), None);
    }

    #[test]
    fn out_of_order_is_an_error_with_line() {
        let err = parse_annotations_str("5,1,1,2,2\n3,absent\n", &p())
            .unwrap_err()
            .to_string();
        assert!(err.contains(":2:"), "{err}");
        assert!(err.contains("out-of-order"), "{err}");
    }

    #[test]
    fn duplicate_frame_is_an_error() {
        let err = parse_annotations_str("5,1,1,2,2\n5,absent\n", &p())
            .unwrap_err()
            .to_string();
        assert!(err.contains("duplicate"), "{err}");
    }

    #[test]
    fn non_numeric_field_is_an_error() {
        let err = parse_annotations_str("0,a,1,2,2\n", &p()).unwrap_err().to_string();
        assert!(err.contains(":1:"), "{err}");
        assert!(err.contains("non-numeric"), "{err}");
    }

    #[test]
    fn round_trip_through_writer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.csv");
        let track = parse_annotations_str("0,10,10,20,20\n7,absent\n9,1.5,2.5,3,4\n", &p()).unwrap();
        write_annotations(&path, &track).unwrap();
        let back = parse_annotations(&path).unwrap();
        assert_eq!(back, track);
    }

    #[test]
    fn sparsify_keeps_multiples() {
        let track =
            parse_annotations_str("0,1,1,2,2\n50,absent\n100,1,1,2,2\n150,absent\n200,absent\n", &p())
                .unwrap();
        let sparse = track.sparsified(100);
        assert_eq!(
            sparse.entries().iter().map(|(f, _)| *f).collect::<Vec<_>>(),
            vec![0, 100, 200]
        );
    }
}
