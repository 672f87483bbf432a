//! Repetitive-video construction: forward plus reversed playback, looped.
//!
//! The double sequence brings the target back to its starting position, and
//! looping it stresses update stability without introducing any new content.

use crate::data_io::annotations::AnnotationTrack;
use crate::data_io::manifest::{LoopInfo, SequenceManifest};
use crate::{Error, Result};

/// Builds `(forward ++ reversed) x loops` out of a source sequence. Frame
/// entries reference the source files, so frame `i` of a reversed half is
/// bit-identical to source frame `L-1-i`. Annotations are mirrored into the
/// reversed halves and re-indexed.
pub fn make_repetitive(
    source: &SequenceManifest,
    track: &AnnotationTrack,
    loops: usize,
) -> Result<(SequenceManifest, AnnotationTrack)> {
    source.validate()?;
    if loops < 1 {
        return Err(Error::Invalid("loops must be at least 1".into()));
    }
    let len = source.frames.len();
    let period = 2 * len;

    let mut frames = Vec::with_capacity(period * loops);
    for _ in 0..loops {
        frames.extend(source.frames.iter().cloned());
        frames.extend(source.frames.iter().rev().cloned());
    }

    let mut entries = Vec::with_capacity(track.len() * 2 * loops);
    for loop_idx in 0..loops {
        let offset = loop_idx * period;
        for (f, e) in track.entries() {
            if *f < len {
                entries.push((offset + f, *e));
            }
        }
        for (f, e) in track.entries().iter().rev() {
            if *f < len {
                entries.push((offset + len + (len - 1 - f), *e));
            }
        }
    }
    let track = AnnotationTrack::from_entries(entries)?;

    let manifest = SequenceManifest {
        id: format!("{}-rep{}", source.id, loops),
        fps: source.fps,
        frames,
        annotations: None,
        init_box: source.init_box,
        loops: Some(LoopInfo {
            count: loops,
            frames_per_loop: period,
        }),
    };
    Ok((manifest, track))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::annotations::AnnotationEntry;
    use crate::BoundingBox;
    use std::path::PathBuf;

    fn source(len: usize) -> SequenceManifest {
        SequenceManifest {
            id: "base".into(),
            fps: 25.0,
            frames: (0..len).map(|i| PathBuf::from(format!("/f/{i}.pgm"))).collect(),
            annotations: None,
            init_box: BoundingBox::new(10.0, 10.0, 6.0, 6.0).unwrap(),
            loops: None,
        }
    }

    fn dense_track(len: usize) -> AnnotationTrack {
        AnnotationTrack::from_entries(
            (0..len)
                .map(|f| {
                    (
                        f,
                        AnnotationEntry::Box(
                            BoundingBox::new(10.0 + f as f64, 10.0, 6.0, 6.0).unwrap(),
                        ),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hundred_frames_twenty_loops_gives_4000() {
        let (rep, track) = make_repetitive(&source(100), &dense_track(100), 20).unwrap();
        assert_eq!(rep.frames.len(), 4000);
        assert_eq!(track.len(), 4000);
        assert_eq!(
            rep.loops,
            Some(LoopInfo {
                count: 20,
                frames_per_loop: 200
            })
        );
    }

    #[test]
    fn reversed_half_references_mirrored_source_frames() {
        let (rep, _) = make_repetitive(&source(5), &dense_track(5), 2).unwrap();
        // forward: 0..5, reversed: 4,3,2,1,0, then again
        for i in 0..5 {
            assert_eq!(rep.frames[5 + i], rep.frames[4 - i]);
            assert_eq!(rep.frames[10 + i], rep.frames[i]);
        }
    }

    #[test]
    fn seam_annotation_returns_to_start() {
        let track = dense_track(5);
        let (_, rep_track) = make_repetitive(&source(5), &track, 3).unwrap();
        // end of forward half == start of reversed half
        let end_fwd = rep_track.lookup(4).unwrap();
        let start_rev = rep_track.lookup(5).unwrap();
        assert_eq!(end_fwd, start_rev);
        // the loop seam returns to the very first box
        let first = rep_track.lookup(0).unwrap();
        let loop_start = rep_track.lookup(10).unwrap();
        assert_eq!(first, loop_start);
    }

    #[test]
    fn sparse_and_absent_entries_mirror_correctly() {
        let sparse = AnnotationTrack::from_entries(vec![
            (0, AnnotationEntry::Box(BoundingBox::new(1.0, 1.0, 2.0, 2.0).unwrap())),
            (3, AnnotationEntry::Absent),
        ])
        .unwrap();
        let (_, rep) = make_repetitive(&source(5), &sparse, 1).unwrap();
        // forward at 0 and 3; reversed: source frame 3 -> 5 + (4-3) = 6, source 0 -> 9
        let frames: Vec<usize> = rep.entries().iter().map(|(f, _)| *f).collect();
        assert_eq!(frames, vec![0, 3, 6, 9]);
        assert_eq!(rep.lookup(6), Some(&AnnotationEntry::Absent));
    }
}
