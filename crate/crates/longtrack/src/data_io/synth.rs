//! Deterministic synthetic long-video generator.
//!
//! Renders a textured target over a cluttered background following a
//! piecewise motion program (linear drift, holds, off-screen intervals,
//! video cuts), with optional slow appearance drift, look-alike distractor
//! objects and per-pixel sensor noise. Ground truth is dense: a box per
//! visible frame, `absent` while the target is off screen. Everything is a
//! pure function of `(spec, seed)`, so frames are bit-identical run to run.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data_io::annotations::{write_annotations, AnnotationEntry, AnnotationTrack};
use crate::data_io::manifest::{save_manifest, SequenceManifest};
use crate::data_io::netpbm::write_pgm_file;
use crate::features::ImagePatch;
use crate::{BoundingBox, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionKind {
    /// Linear interpolation of the box center between two points.
    Drift { from: (f64, f64), to: (f64, f64) },
    /// Stationary target.
    Hold { at: (f64, f64) },
    /// Target out of view; ground truth marked absent.
    OffScreen,
    /// Video cut: background and distractors reseed at the segment start,
    /// target holds at the given position.
    Cut { at: (f64, f64) },
}

/// Half-open frame interval `[start, end)` with one motion behavior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSegment {
    pub start: usize,
    pub end: usize,
    pub kind: MotionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub canvas_w: usize,
    pub canvas_h: usize,
    pub target_w: usize,
    pub target_h: usize,
    /// Seed of the target's base texture (independent of the render seed).
    pub texture_seed: u64,
    pub length: usize,
    pub fps: f64,
    /// Per-frame blend rate toward an evolving random texture, 0 = static.
    pub appearance_drift: f64,
    /// Background blob density in [0, 1].
    pub clutter: f64,
    pub distractors: usize,
    /// Blend of distractor textures toward the target's base texture.
    pub distractor_similarity: f64,
    /// Uniform per-pixel noise amplitude in gray levels.
    pub noise: f64,
    pub motion: Vec<MotionSegment>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.target_w > self.canvas_w || self.target_h > self.canvas_h {
            return Err(Error::Invalid(format!(
                "target {}x{} larger than canvas {}x{}",
                self.target_w, self.target_h, self.canvas_w, self.canvas_h
            )));
        }
        if self.target_w < 8 || self.target_h < 8 {
            return Err(Error::Invalid("target must be at least 8x8".into()));
        }
        if self.length == 0 {
            return Err(Error::Invalid("length must be positive".into()));
        }
        if self.motion.is_empty() {
            return Err(Error::Invalid("motion program is empty".into()));
        }
        let mut expected = 0usize;
        for seg in &self.motion {
            if seg.start != expected || seg.end <= seg.start {
                return Err(Error::Invalid(format!(
                    "motion program must tile [0,{}) contiguously; segment [{},{}) after {}",
                    self.length, seg.start, seg.end, expected
                )));
            }
            expected = seg.end;
            for pos in seg.kind.positions() {
                self.check_inside(pos)?;
            }
        }
        if expected != self.length {
            return Err(Error::Invalid(format!(
                "motion program covers [0,{expected}) but length is {}",
                self.length
            )));
        }
        Ok(())
    }

    fn check_inside(&self, (cx, cy): (f64, f64)) -> Result<()> {
        let (hw, hh) = (self.target_w as f64 / 2.0, self.target_h as f64 / 2.0);
        if cx - hw < 0.0
            || cy - hh < 0.0
            || cx + hw > self.canvas_w as f64
            || cy + hh > self.canvas_h as f64
        {
            return Err(Error::Invalid(format!(
                "target center ({cx},{cy}) puts the box outside the {}x{} canvas",
                self.canvas_w, self.canvas_h
            )));
        }
        Ok(())
    }

    /// Dense ground truth straight from the motion program; no rendering.
    pub fn ground_truth(&self) -> Result<AnnotationTrack> {
        self.validate()?;
        let entries = (0..self.length)
            .map(|f| {
                let entry = match center_at(self, f) {
                    Some((cx, cy)) => AnnotationEntry::Box(BoundingBox {
                        cx,
                        cy,
                        w: self.target_w as f64,
                        h: self.target_h as f64,
                    }),
                    None => AnnotationEntry::Absent,
                };
                (f, entry)
            })
            .collect();
        AnnotationTrack::from_entries(entries)
    }

    /// Fraction of frames the motion program keeps the target off screen.
    pub fn absent_fraction(&self) -> f64 {
        let absent: usize = self
            .motion
            .iter()
            .filter(|s| matches!(s.kind, MotionKind::OffScreen))
            .map(|s| s.end - s.start)
            .sum();
        absent as f64 / self.length as f64
    }
}

impl MotionKind {
    fn positions(&self) -> Vec<(f64, f64)> {
        match *self {
            MotionKind::Drift { from, to } => vec![from, to],
            MotionKind::Hold { at } | MotionKind::Cut { at } => vec![at],
            MotionKind::OffScreen => vec![],
        }
    }
}

/// Streaming renderer; yields `(frame, ground truth)` pairs in order.
pub struct SynthVideo {
    spec: SynthSpec,
    background: Vec<u8>,
    texture: Vec<f64>,
    distractors: Vec<Distractor>,
    rng_scene: ChaCha8Rng,
    rng_drift: ChaCha8Rng,
    rng_noise: ChaCha8Rng,
    frame: usize,
}

struct Distractor {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    texture: Vec<u8>,
}

impl SynthVideo {
    pub fn new(spec: &SynthSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng_scene = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce0_ebb1);
        let rng_drift = ChaCha8Rng::seed_from_u64(seed ^ 0xd41f_7a2c);
        let rng_noise = ChaCha8Rng::seed_from_u64(seed ^ 0x0153_9f7e);
        let texture = base_texture(spec);
        let background = render_background(&mut rng_scene, spec);
        let distractors = place_distractors(&mut rng_scene, spec, &texture);
        Ok(SynthVideo {
            spec: spec.clone(),
            background,
            texture,
            distractors,
            rng_scene,
            rng_drift,
            rng_noise,
            frame: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.spec.length
    }

    pub fn is_empty(&self) -> bool {
        self.spec.length == 0
    }

    fn center_at(&self, frame: usize) -> Option<(f64, f64)> {
        center_at(&self.spec, frame)
    }
}

fn center_at(spec: &SynthSpec, frame: usize) -> Option<(f64, f64)> {
    let seg = spec
        .motion
        .iter()
        .find(|s| frame >= s.start && frame < s.end)
        .expect("validated program covers every frame");
    match seg.kind {
        MotionKind::Hold { at } | MotionKind::Cut { at } => Some(at),
        MotionKind::OffScreen => None,
        MotionKind::Drift { from, to } => {
            let span = (seg.end - seg.start - 1).max(1) as f64;
            let t = (frame - seg.start) as f64 / span;
            Some((from.0 + (to.0 - from.0) * t, from.1 + (to.1 - from.1) * t))
        }
    }
}

impl Iterator for SynthVideo {
    type Item = (ImagePatch, Option<BoundingBox>);

    fn next(&mut self) -> Option<Self::Item> {
        let spec = &self.spec;
        if self.frame >= spec.length {
            return None;
        }
        let f = self.frame;
        self.frame += 1;

        // scene reseeds at the start of a cut segment
        if spec
            .motion
            .iter()
            .any(|s| s.start == f && matches!(s.kind, MotionKind::Cut { .. }))
        {
            self.background = render_background(&mut self.rng_scene, spec);
            self.distractors = place_distractors(&mut self.rng_scene, spec, &self.texture);
        }

        // appearance drift: blend toward a fresh random texture each frame
        if spec.appearance_drift > 0.0 {
            let r = spec.appearance_drift;
            for v in &mut self.texture {
                let fresh = self.rng_drift.gen_range(40.0..230.0);
                *v += r * (fresh - *v);
            }
        }

        let mut canvas = self.background.clone();
        let (cw, ch) = (spec.canvas_w, spec.canvas_h);
        for d in &self.distractors {
            for dy in 0..d.h {
                for dx in 0..d.w {
                    canvas[(d.y0 + dy) * cw + d.x0 + dx] = d.texture[dy * d.w + dx];
                }
            }
        }

        let center = self.center_at(f);
        let gt = center.map(|(cx, cy)| BoundingBox {
            cx,
            cy,
            w: spec.target_w as f64,
            h: spec.target_h as f64,
        });
        if let Some((cx, cy)) = center {
            let x0 = (cx - spec.target_w as f64 / 2.0).round() as usize;
            let y0 = (cy - spec.target_h as f64 / 2.0).round() as usize;
            for dy in 0..spec.target_h {
                for dx in 0..spec.target_w {
                    let v = self.texture[dy * spec.target_w + dx].round();
                    canvas[(y0 + dy).min(ch - 1) * cw + (x0 + dx).min(cw - 1)] =
                        v.clamp(0.0, 255.0) as u8;
                }
            }
        }

        if spec.noise > 0.0 {
            for v in &mut canvas {
                let n = self.rng_noise.gen_range(-spec.noise..=spec.noise).round();
                *v = (*v as f64 + n).clamp(0.0, 255.0) as u8;
            }
        }

        let patch = ImagePatch::gray(ch, cw, canvas).expect("canvas dims fixed");
        Some((patch, gt))
    }
}

/// High-contrast texture core with a dark 2 px border ring; the ring gives
/// scale estimation a stable outline to latch on. The interior is random
/// noise smoothed once so that sub-pixel resampling does not decorrelate
/// the pattern.
fn base_texture(spec: &SynthSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.texture_seed ^ 0x7ea7_0b5d);
    let (w, h) = (spec.target_w, spec.target_h);
    let mut tex = vec![0.0f64; w * h];
    for v in &mut tex {
        *v = rng.gen_range(0.0..1.0);
    }
    // one 3x3 box-blur pass, then re-stretch the contrast
    let mut blurred = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            let mut n = 0.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (sy, sx) = (y as i64 + dy, x as i64 + dx);
                    if sy >= 0 && sy < h as i64 && sx >= 0 && sx < w as i64 {
                        acc += tex[(sy as usize) * w + sx as usize];
                        n += 1.0;
                    }
                }
            }
            blurred[y * w + x] = acc / n;
        }
    }
    let lo = blurred.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = blurred.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-9);
    for y in 0..h {
        for x in 0..w {
            let border = y < 2 || x < 2 || y >= h - 2 || x >= w - 2;
            tex[y * w + x] = if border {
                20.0
            } else {
                45.0 + (blurred[y * w + x] - lo) / span * 180.0
            };
        }
    }
    tex
}

fn render_background(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Vec<u8> {
    let (w, h) = (spec.canvas_w, spec.canvas_h);
    let corners: Vec<f64> = (0..4).map(|_| rng.gen_range(70.0..180.0)).collect();
    let mut bg = vec![0u8; w * h];
    for y in 0..h {
        let ty = y as f64 / (h - 1).max(1) as f64;
        let left = corners[0] + (corners[2] - corners[0]) * ty;
        let right = corners[1] + (corners[3] - corners[1]) * ty;
        for x in 0..w {
            let tx = x as f64 / (w - 1).max(1) as f64;
            bg[y * w + x] = (left + (right - left) * tx).round() as u8;
        }
    }
    // smooth clutter: offset blobs with a soft linear shade, no inner noise
    let blobs = (spec.clutter * (w * h) as f64 / 500.0) as usize;
    for _ in 0..blobs {
        let bw = rng.gen_range(5..25).min(w);
        let bh = rng.gen_range(5..25).min(h);
        let x0 = rng.gen_range(0..=w - bw);
        let y0 = rng.gen_range(0..=h - bh);
        let base: f64 = rng.gen_range(-45.0..45.0);
        let shade_x: f64 = rng.gen_range(-0.8..0.8);
        let shade_y: f64 = rng.gen_range(-0.8..0.8);
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                let v = bg[y * w + x] as f64
                    + base
                    + shade_x * (x - x0) as f64
                    + shade_y * (y - y0) as f64;
                bg[y * w + x] = v.clamp(0.0, 255.0) as u8;
            }
        }
    }
    bg
}

/// Distractors copy the target's coarse luminance structure and differ in
/// fine detail: `1 - similarity` scales an additive high-frequency
/// perturbation. A frozen matcher separates them through the gradient and
/// orientation channels; a matcher whose channel weighting has drifted
/// toward intensity alone confuses them.
fn place_distractors(rng: &mut ChaCha8Rng, spec: &SynthSpec, target: &[f64]) -> Vec<Distractor> {
    let (w, h) = (spec.canvas_w, spec.canvas_h);
    let (tw, th) = (spec.target_w, spec.target_h);
    let mut out = Vec::with_capacity(spec.distractors);
    for _ in 0..spec.distractors {
        let x0 = rng.gen_range(0..=w.saturating_sub(tw));
        let y0 = rng.gen_range(0..=h.saturating_sub(th));
        let amplitude = (1.0 - spec.distractor_similarity) * 120.0;
        let texture: Vec<u8> = target
            .iter()
            .map(|&t| {
                let noise = rng.gen_range(-amplitude..=amplitude);
                (t + noise).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        out.push(Distractor {
            x0,
            y0,
            w: tw,
            h: th,
            texture,
        });
    }
    out
}

/// Renders the whole sequence in memory.
pub fn render_all(spec: &SynthSpec, seed: u64) -> Result<(Vec<ImagePatch>, AnnotationTrack)> {
    let video = SynthVideo::new(spec, seed)?;
    let mut frames = Vec::with_capacity(spec.length);
    let mut entries = Vec::with_capacity(spec.length);
    for (i, (frame, gt)) in video.enumerate() {
        frames.push(frame);
        entries.push((
            i,
            match gt {
                Some(b) => AnnotationEntry::Box(b),
                None => AnnotationEntry::Absent,
            },
        ));
    }
    Ok((frames, AnnotationTrack::from_entries(entries)?))
}

/// Renders the sequence to `out_dir` as PGM frames plus `gt.csv` and
/// `manifest.json`; returns the path-resolved manifest. The target must be
/// visible in frame 0 so the manifest has an initial box.
pub fn generate_synthetic(
    spec: &SynthSpec,
    seed: u64,
    out_dir: &Path,
    id: &str,
) -> Result<SequenceManifest> {
    let (frames, track) = render_all(spec, seed)?;
    let init_box = match track.lookup(0) {
        Some(AnnotationEntry::Box(b)) => *b,
        _ => {
            return Err(Error::Invalid(
                "target must be visible in frame 0 to define the initial box".into(),
            ))
        }
    };
    let frames_dir = out_dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let mut frame_paths = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        let rel = format!("frames/{i:06}.pgm");
        write_pgm_file(&out_dir.join(&rel), frame)?;
        frame_paths.push(rel.into());
    }
    write_annotations(&out_dir.join("gt.csv"), &track)?;
    let mut manifest = SequenceManifest {
        id: id.to_string(),
        fps: spec.fps,
        frames: frame_paths,
        annotations: Some("gt.csv".into()),
        init_box,
        loops: None,
    };
    save_manifest(&out_dir.join("manifest.json"), &manifest)?;
    manifest.resolve_paths(out_dir);
    Ok(manifest)
}

/// Parses the key-value synthetic-spec format:
///
/// ```text
/// canvas 192 144
/// target 28 28
/// texture_seed 7
/// length 600
/// fps 30
/// appearance_drift 0.002
/// clutter 0.5
/// distractors 2
/// distractor_similarity 0.85
/// noise 2
/// segment drift 0 300 40 40 150 90
/// segment offscreen 300 360
/// segment cut 360 420 60 60
/// segment hold 420 600 60 60
/// ```
pub fn parse_synth_spec(text: &str, path: &Path) -> Result<SynthSpec> {
    let mut spec = SynthSpec {
        canvas_w: 192,
        canvas_h: 144,
        target_w: 28,
        target_h: 28,
        texture_seed: 1,
        length: 0,
        fps: 30.0,
        appearance_drift: 0.0,
        clutter: 0.5,
        distractors: 0,
        distractor_similarity: 0.85,
        noise: 2.0,
        motion: Vec::new(),
    };
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(format!("bad number {s:?}")))
        };
        let parse_u = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(format!("bad integer {s:?}")))
        };
        match tokens.as_slice() {
            ["canvas", w, h] => {
                spec.canvas_w = parse_u(w)?;
                spec.canvas_h = parse_u(h)?;
            }
            ["target", w, h] => {
                spec.target_w = parse_u(w)?;
                spec.target_h = parse_u(h)?;
            }
            ["texture_seed", s] => {
                spec.texture_seed = s
                    .parse()
                    .map_err(|_| err(format!("bad integer {s:?}")))?
            }
            ["length", s] => spec.length = parse_u(s)?,
            ["fps", s] => spec.fps = parse_f(s)?,
            ["appearance_drift", s] => spec.appearance_drift = parse_f(s)?,
            ["clutter", s] => spec.clutter = parse_f(s)?,
            ["distractors", s] => spec.distractors = parse_u(s)?,
            ["distractor_similarity", s] => spec.distractor_similarity = parse_f(s)?,
            ["noise", s] => spec.noise = parse_f(s)?,
            ["segment", "drift", a, b, x0, y0, x1, y1] => spec.motion.push(MotionSegment {
                start: parse_u(a)?,
                end: parse_u(b)?,
                kind: MotionKind::Drift {
                    from: (parse_f(x0)?, parse_f(y0)?),
                    to: (parse_f(x1)?, parse_f(y1)?),
                },
            }),
            ["segment", "hold", a, b, x, y] => spec.motion.push(MotionSegment {
                start: parse_u(a)?,
                end: parse_u(b)?,
                kind: MotionKind::Hold {
                    at: (parse_f(x)?, parse_f(y)?),
                },
            }),
            ["segment", "offscreen", a, b] => spec.motion.push(MotionSegment {
                start: parse_u(a)?,
                end: parse_u(b)?,
                kind: MotionKind::OffScreen,
            }),
            ["segment", "cut", a, b, x, y] => spec.motion.push(MotionSegment {
                start: parse_u(a)?,
                end: parse_u(b)?,
                kind: MotionKind::Cut {
                    at: (parse_f(x)?, parse_f(y)?),
                },
            }),
            _ => return Err(err(format!("unknown directive {line:?}"))),
        }
    }
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_spec(length: usize) -> SynthSpec {
        SynthSpec {
            canvas_w: 96,
            canvas_h: 72,
            target_w: 16,
            target_h: 16,
            texture_seed: 3,
            length,
            fps: 30.0,
            appearance_drift: 0.0,
            clutter: 0.4,
            distractors: 0,
            distractor_similarity: 0.8,
            noise: 0.0,
            motion: vec![MotionSegment {
                start: 0,
                end: length,
                kind: MotionKind::Hold { at: (40.0, 36.0) },
            }],
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = simple_spec(5);
        let (a, _) = render_all(&spec, 42).unwrap();
        let (b, _) = render_all(&spec, 42).unwrap();
        for (fa, fb) in a.iter().zip(&b) {
            assert_eq!(fa, fb);
        }
    }

    #[test]
    fn static_scene_repeats_frames() {
        let spec = simple_spec(4);
        let (frames, track) = render_all(&spec, 1).unwrap();
        for f in &frames[1..] {
            assert_eq!(f, &frames[0]);
        }
        assert_eq!(track.len(), 4);
        assert!(matches!(track.lookup(2), Some(AnnotationEntry::Box(_))));
    }

    #[test]
    fn offscreen_interval_marks_exact_fraction_absent() {
        let mut spec = simple_spec(100);
        spec.motion = vec![
            MotionSegment {
                start: 0,
                end: 40,
                kind: MotionKind::Hold { at: (40.0, 36.0) },
            },
            MotionSegment {
                start: 40,
                end: 70,
                kind: MotionKind::OffScreen,
            },
            MotionSegment {
                start: 70,
                end: 100,
                kind: MotionKind::Hold { at: (60.0, 36.0) },
            },
        ];
        assert!((spec.absent_fraction() - 0.30).abs() < 1e-12);
        let (_, track) = render_all(&spec, 9).unwrap();
        let absent = track
            .entries()
            .iter()
            .filter(|(_, e)| matches!(e, AnnotationEntry::Absent))
            .count();
        assert_eq!(absent, 30);
    }

    #[test]
    fn gt_boxes_stay_inside_canvas() {
        let mut spec = simple_spec(50);
        spec.motion = vec![MotionSegment {
            start: 0,
            end: 50,
            kind: MotionKind::Drift {
                from: (8.0, 8.0),
                to: (88.0, 64.0),
            },
        }];
        let (_, track) = render_all(&spec, 4).unwrap();
        for (_, e) in track.entries() {
            if let AnnotationEntry::Box(b) = e {
                assert!(b.inside_frame(96, 72), "{b:?}");
            }
        }
    }

    #[test]
    fn out_of_canvas_program_is_rejected() {
        let mut spec = simple_spec(10);
        spec.motion = vec![MotionSegment {
            start: 0,
            end: 10,
            kind: MotionKind::Hold { at: (4.0, 36.0) },
        }];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn oversized_target_is_rejected() {
        let mut spec = simple_spec(10);
        spec.target_w = 200;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn gap_in_program_is_rejected() {
        let mut spec = simple_spec(10);
        spec.motion = vec![
            MotionSegment {
                start: 0,
                end: 4,
                kind: MotionKind::Hold { at: (40.0, 36.0) },
            },
            MotionSegment {
                start: 6,
                end: 10,
                kind: MotionKind::Hold { at: (40.0, 36.0) },
            },
        ];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn cut_changes_background() {
        let mut spec = simple_spec(4);
        spec.motion = vec![
            MotionSegment {
                start: 0,
                end: 2,
                kind: MotionKind::Hold { at: (40.0, 36.0) },
            },
            MotionSegment {
                start: 2,
                end: 4,
                kind: MotionKind::Cut { at: (40.0, 36.0) },
            },
        ];
        let (frames, _) = render_all(&spec, 5).unwrap();
        assert_eq!(frames[0], frames[1]);
        assert_ne!(frames[1], frames[2]);
        assert_eq!(frames[2], frames[3]);
    }

    #[test]
    fn appearance_drift_decorrelates_slowly() {
        let mut spec = simple_spec(200);
        spec.appearance_drift = 0.01;
        let (frames, track) = render_all(&spec, 7).unwrap();
        // target region changes from first to last frame, background intact
        let first = &frames[0];
        let last = &frames[199];
        let gt = match track.lookup(0).unwrap() {
            AnnotationEntry::Box(b) => *b,
            _ => unreachable!(),
        };
        let (x0, y0, _, _) = gt.corners();
        let mut diff = 0usize;
        for dy in 0..16 {
            for dx in 0..16 {
                let (y, x) = (y0 as usize + dy, x0 as usize + dx);
                if first.sample(y, x, 0) != last.sample(y, x, 0) {
                    diff += 1;
                }
            }
        }
        assert!(diff > 100, "only {diff} target pixels changed");
        assert_eq!(first.sample(0, 0, 0), last.sample(0, 0, 0));
    }

    #[test]
    fn generate_writes_loadable_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let spec = simple_spec(3);
        let manifest = generate_synthetic(&spec, 11, dir.path(), "demo").unwrap();
        assert_eq!(manifest.frames.len(), 3);
        let loaded = crate::data_io::manifest::load_sequence(&dir.path().join("manifest.json"))
            .unwrap();
        let frames: Vec<_> = loaded.frames().collect::<Result<_>>().unwrap();
        assert_eq!(frames.len(), 3);
        let track =
            crate::data_io::annotations::parse_annotations(&dir.path().join("gt.csv")).unwrap();
        assert_eq!(track.len(), 3);
    }

    #[test]
    fn spec_text_round_trips_through_parser() {
        let text = "\
canvas 96 72
target 16 16
texture_seed 3
length 20
fps 25
appearance_drift 0.001
clutter 0.4
distractors 1
distractor_similarity 0.9
noise 1.5
segment drift 0 10 20 20 60 40
segment offscreen 10 14
segment cut 14 20 30 30
";
        let spec = parse_synth_spec(text, Path::new("spec.txt")).unwrap();
        assert_eq!(spec.length, 20);
        assert_eq!(spec.motion.len(), 3);
        assert_eq!(spec.distractors, 1);
        assert!((spec.noise - 1.5).abs() < 1e-12);
        assert!(matches!(spec.motion[2].kind, MotionKind::Cut { .. }));
    }

    #[test]
    fn unknown_directive_is_an_error() {
        let err = parse_synth_spec("wibble 3\n", Path::new("spec.txt"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("unknown directive"), "{err}");
    }
}
