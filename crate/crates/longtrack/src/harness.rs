//! Experiment harness: sequence sources (files or in-memory synthetic),
//! results files, the ablation table and the preset corpora used to study
//! sampling drift, model drift and repetitive-video stability.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data_io::annotations::AnnotationTrack;
use crate::data_io::manifest::{LoadedSequence, LoopInfo};
use crate::data_io::synth::{MotionKind, MotionSegment, SynthSpec, SynthVideo};
use crate::evaluation::{modified_auc, FramePrediction, SuccessCurve};
use crate::features::ImagePatch;
use crate::par;
use crate::selfeval::{EvalSample, SelfEvalNet};
use crate::tracker::{track_frames, TrackRun};
use crate::update::UpdateMode;
use crate::{BoundingBox, Error, Result};

/// On-disk result of one tracked sequence: a header plus the predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsFile {
    pub sequence_id: String,
    pub fps: f64,
    pub config_hash: String,
    pub search_period: usize,
    pub update_mode: String,
    pub wall_seconds: f64,
    pub frames_per_second: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loops: Option<LoopInfo>,
    pub predictions: Vec<FramePrediction>,
}

pub fn save_results(path: &Path, results: &ResultsFile) -> Result<()> {
    let text = serde_json::to_string_pretty(results)
        .map_err(|e| Error::data(path, e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_results(path: &Path) -> Result<ResultsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let results: ResultsFile =
        serde_json::from_str(&text).map_err(|e| Error::data(path, e.to_string()))?;
    for p in &results.predictions {
        p.validate()?;
    }
    Ok(results)
}

pub fn write_curve_csv(path: &Path, curve: &SuccessCurve) -> Result<()> {
    let mut out = String::from("threshold,success_rate\n");
    for (t, s) in curve.thresholds.iter().zip(&curve.success_rate) {
        out.push_str(&format!("{t},{s}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_loop_csv(path: &Path, curves: &[SuccessCurve]) -> Result<()> {
    let mut out = String::from("loop,auc\n");
    for (i, c) in curves.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, c.auc));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// A trackable sequence: decoded files or an in-memory synthetic render.
pub enum SequenceSource {
    Files(Box<LoadedSequence>),
    Synth {
        id: String,
        spec: SynthSpec,
        seed: u64,
    },
    /// A repetitive sequence built from an in-memory base: frames replay
    /// forward then reversed, `loops` times.
    RepeatedSynth {
        id: String,
        spec: SynthSpec,
        seed: u64,
        loops: usize,
    },
}

impl SequenceSource {
    pub fn synth(id: impl Into<String>, spec: SynthSpec, seed: u64) -> Self {
        SequenceSource::Synth {
            id: id.into(),
            spec,
            seed,
        }
    }

    pub fn id(&self) -> String {
        match self {
            SequenceSource::Files(seq) => seq.manifest.id.clone(),
            SequenceSource::Synth { id, .. } | SequenceSource::RepeatedSynth { id, .. } => {
                id.clone()
            }
        }
    }

    pub fn fps(&self) -> f64 {
        match self {
            SequenceSource::Files(seq) => seq.manifest.fps,
            SequenceSource::Synth { spec, .. } | SequenceSource::RepeatedSynth { spec, .. } => {
                spec.fps
            }
        }
    }

    pub fn loops(&self) -> Option<LoopInfo> {
        match self {
            SequenceSource::Files(seq) => seq.manifest.loops,
            SequenceSource::Synth { .. } => None,
            SequenceSource::RepeatedSynth { spec, loops, .. } => Some(LoopInfo {
                count: *loops,
                frames_per_loop: 2 * spec.length,
            }),
        }
    }

    pub fn init_box(&self) -> Result<BoundingBox> {
        match self {
            SequenceSource::Files(seq) => Ok(seq.manifest.init_box),
            SequenceSource::Synth { spec, .. } | SequenceSource::RepeatedSynth { spec, .. } => {
                match spec.ground_truth()?.lookup(0) {
                    Some(crate::data_io::AnnotationEntry::Box(b)) => Ok(*b),
                    _ => Err(Error::Invalid(
                        "synthetic target must be visible in frame 0".into(),
                    )),
                }
            }
        }
    }

    pub fn ground_truth(&self) -> Result<AnnotationTrack> {
        match self {
            SequenceSource::Files(seq) => {
                let path = seq.manifest.annotations.as_ref().ok_or_else(|| {
                    Error::Invalid(format!(
                        "sequence {} has no annotations",
                        seq.manifest.id
                    ))
                })?;
                crate::data_io::parse_annotations(path)
            }
            SequenceSource::Synth { spec, .. } => spec.ground_truth(),
            SequenceSource::RepeatedSynth { spec, loops, .. } => {
                let base = spec.ground_truth()?;
                let manifest = dummy_manifest(spec)?;
                let (_, track) = crate::data_io::make_repetitive(&manifest, &base, *loops)?;
                Ok(track)
            }
        }
    }

    pub fn frame_iter(&self) -> Result<Box<dyn Iterator<Item = Result<ImagePatch>> + '_>> {
        match self {
            SequenceSource::Files(seq) => Ok(Box::new(seq.frames())),
            SequenceSource::Synth { spec, seed, .. } => {
                let video = SynthVideo::new(spec, *seed)?;
                Ok(Box::new(video.map(|(frame, _)| Ok(frame))))
            }
            SequenceSource::RepeatedSynth {
                spec, seed, loops, ..
            } => {
                let base: Vec<ImagePatch> = SynthVideo::new(spec, *seed)?
                    .map(|(frame, _)| frame)
                    .collect();
                let len = base.len();
                let total = 2 * len * loops;
                Ok(Box::new((0..total).map(move |i| {
                    let phase = i % (2 * len);
                    let idx = if phase < len { phase } else { 2 * len - 1 - phase };
                    Ok(base[idx].clone())
                })))
            }
        }
    }
}

fn dummy_manifest(spec: &SynthSpec) -> Result<crate::data_io::SequenceManifest> {
    let gt = spec.ground_truth()?;
    let init_box = match gt.lookup(0) {
        Some(crate::data_io::AnnotationEntry::Box(b)) => *b,
        _ => {
            return Err(Error::Invalid(
                "synthetic target must be visible in frame 0".into(),
            ))
        }
    };
    Ok(crate::data_io::SequenceManifest {
        id: "mem".into(),
        fps: spec.fps,
        frames: (0..spec.length)
            .map(|i| PathBuf::from(format!("{i}")))
            .collect(),
        annotations: None,
        init_box,
        loops: None,
    })
}

/// Tracks one source under `config`, returning the run and its metric.
pub struct SequenceRun {
    pub id: String,
    pub fps: f64,
    pub run: TrackRun,
    pub ground_truth: Option<AnnotationTrack>,
    pub curve: Option<SuccessCurve>,
}

pub fn run_sequence(
    source: &SequenceSource,
    config: &RunConfig,
    net: Option<&SelfEvalNet>,
) -> Result<SequenceRun> {
    let init_box = source.init_box()?;
    let run = track_frames(source.frame_iter()?, &init_box, config, net)?;
    let (ground_truth, curve) = match source.ground_truth() {
        Ok(track) => {
            let curve = modified_auc(&run.predictions, &track)?;
            (Some(track), Some(curve))
        }
        Err(_) => (None, None),
    };
    Ok(SequenceRun {
        id: source.id(),
        fps: source.fps(),
        run,
        ground_truth,
        curve,
    })
}

/// Search-strategy variants used by the experiment suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchVariant {
    /// Global search every frame (T = 1).
    GlobalEveryFrame,
    /// Local search only (the time clock never fires).
    LocalOnly,
    /// The hybrid scheduler at the given period.
    Hybrid(usize),
}

impl SearchVariant {
    pub fn apply(self, config: &mut RunConfig) {
        config.period = match self {
            SearchVariant::GlobalEveryFrame => 1,
            // the scheduler fires at frame_index % T == 0 with frame_index
            // >= 1, so usize::MAX never triggers in practice
            SearchVariant::LocalOnly => usize::MAX,
            SearchVariant::Hybrid(t) => t,
        };
    }
}

fn variant_config(base: &RunConfig, variant: SearchVariant, mode: UpdateMode) -> RunConfig {
    let mut cfg = base.clone();
    variant.apply(&mut cfg);
    cfg.update_mode = mode;
    cfg
}

/// Mean modified AUC of a configuration over a corpus; sequences run in
/// parallel.
pub fn mean_auc(
    corpus: &[SequenceSource],
    config: &RunConfig,
    net: Option<&SelfEvalNet>,
) -> Result<f64> {
    let runs: Vec<Result<f64>> = par::map_collect(corpus, |source| {
        let seq = run_sequence(source, config, net)?;
        seq.curve
            .map(|c| c.auc)
            .ok_or_else(|| Error::Invalid(format!("{}: no annotations", source.id())))
    });
    let mut total = 0.0;
    for r in &runs {
        match r {
            Ok(v) => total += v,
            Err(e) => return Err(Error::Invalid(e.to_string())),
        }
    }
    Ok(total / corpus.len() as f64)
}

/// The fixed ablation table: search strategies (no update) and update
/// policies (global search every frame), as mean modified AUC.
pub fn ablation_table(
    corpus: &[SequenceSource],
    base: &RunConfig,
    net: Option<&SelfEvalNet>,
) -> Result<Vec<(String, f64)>> {
    let local = mean_auc(
        corpus,
        &variant_config(base, SearchVariant::LocalOnly, UpdateMode::None),
        None,
    )?;
    let global = mean_auc(
        corpus,
        &variant_config(base, SearchVariant::GlobalEveryFrame, UpdateMode::None),
        None,
    )?;
    let blind = mean_auc(
        corpus,
        &variant_config(base, SearchVariant::GlobalEveryFrame, UpdateMode::Blind),
        None,
    )?;
    let sim = mean_auc(
        corpus,
        &variant_config(base, SearchVariant::GlobalEveryFrame, UpdateMode::SimThresh),
        None,
    )?;
    let selfaware = mean_auc(
        corpus,
        &variant_config(base, SearchVariant::GlobalEveryFrame, UpdateMode::SelfAware),
        net,
    )?;
    Ok(vec![
        ("local".into(), local),
        ("global".into(), global),
        ("no-upd".into(), global),
        ("blind-upd".into(), blind),
        ("sim-upd".into(), sim),
        ("selfaware-upd".into(), selfaware),
    ])
}

pub fn write_ablation_csv(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut out = String::from("mode,auc\n");
    for (name, auc) in rows {
        out.push_str(&format!("{name},{auc}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Preset corpora
// ---------------------------------------------------------------------------

const CANVAS_W: usize = 176;
const CANVAS_H: usize = 128;
const TARGET: usize = 32;

fn rand_point(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let margin = TARGET as f64 / 2.0 + 6.0;
    (
        rng.gen_range(margin..CANVAS_W as f64 - margin),
        rng.gen_range(margin..CANVAS_H as f64 - margin),
    )
}

/// A point far from `from`: mirrored through the canvas center with jitter.
fn far_point(rng: &mut ChaCha8Rng, from: (f64, f64)) -> (f64, f64) {
    let margin = TARGET as f64 / 2.0 + 6.0;
    let jitter_x: f64 = rng.gen_range(-10.0..10.0);
    let jitter_y: f64 = rng.gen_range(-10.0..10.0);
    (
        (CANVAS_W as f64 - from.0 + jitter_x).clamp(margin, CANVAS_W as f64 - margin),
        (CANVAS_H as f64 - from.1 + jitter_y).clamp(margin, CANVAS_H as f64 - margin),
    )
}

/// Sampling-drift stress: 1000 frames with one off-screen interval covering
/// 10-30% of the video and a teleported reappearance across the frame.
pub fn disappearance_spec(seed: u64) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd15a_99ea);
    let length = 1000;
    let gone_at = rng.gen_range(300..=450);
    let duration = rng.gen_range(100..=300);
    let back_at = gone_at + duration;
    let a = rand_point(&mut rng);
    let b = rand_point(&mut rng);
    let c = far_point(&mut rng, b);
    let d = rand_point(&mut rng);
    SynthSpec {
        canvas_w: CANVAS_W,
        canvas_h: CANVAS_H,
        target_w: TARGET,
        target_h: TARGET,
        texture_seed: seed.wrapping_mul(31).wrapping_add(7),
        length,
        fps: 30.0,
        appearance_drift: 0.0,
        clutter: 0.5,
        distractors: 0,
        distractor_similarity: 0.85,
        noise: 1.5,
        motion: vec![
            MotionSegment {
                start: 0,
                end: gone_at,
                kind: MotionKind::Drift { from: a, to: b },
            },
            MotionSegment {
                start: gone_at,
                end: back_at,
                kind: MotionKind::OffScreen,
            },
            MotionSegment {
                start: back_at,
                end: length,
                kind: MotionKind::Drift { from: c, to: d },
            },
        ],
    }
}

/// Model-drift stress: slow appearance drift, look-alike distractors and
/// two absence intervals.
pub fn drift_spec(seed: u64) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00d7_1f7c);
    let length = 450;
    let a = rand_point(&mut rng);
    let b = rand_point(&mut rng);
    let c = far_point(&mut rng, b);
    let d = rand_point(&mut rng);
    let e = far_point(&mut rng, d);
    let f = rand_point(&mut rng);
    let gone1 = rng.gen_range(120..=140);
    let back1 = gone1 + rng.gen_range(70..=90);
    let gone2 = rng.gen_range(290..=310);
    let back2 = gone2 + rng.gen_range(70..=90);
    SynthSpec {
        canvas_w: CANVAS_W,
        canvas_h: CANVAS_H,
        target_w: TARGET,
        target_h: TARGET,
        texture_seed: seed.wrapping_mul(17).wrapping_add(3),
        length,
        fps: 30.0,
        appearance_drift: 0.001,
        clutter: 0.5,
        distractors: 2,
        distractor_similarity: 0.5,
        noise: 1.5,
        motion: vec![
            MotionSegment {
                start: 0,
                end: gone1,
                kind: MotionKind::Drift { from: a, to: b },
            },
            MotionSegment {
                start: gone1,
                end: back1,
                kind: MotionKind::OffScreen,
            },
            MotionSegment {
                start: back1,
                end: gone2,
                kind: MotionKind::Drift { from: c, to: d },
            },
            MotionSegment {
                start: gone2,
                end: back2,
                kind: MotionKind::OffScreen,
            },
            MotionSegment {
                start: back2,
                end: length,
                kind: MotionKind::Drift { from: e, to: f },
            },
        ],
    }
}

/// Base sequence for the repetitive-video stress: 100 frames of ordinary
/// motion with one short disappearance, to be mirrored and looped.
pub fn repetitive_base_spec(seed: u64) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4e9e_a7b3);
    let length = 100;
    let a = rand_point(&mut rng);
    let b = rand_point(&mut rng);
    let c = rand_point(&mut rng);
    SynthSpec {
        canvas_w: CANVAS_W,
        canvas_h: CANVAS_H,
        target_w: TARGET,
        target_h: TARGET,
        texture_seed: seed.wrapping_mul(13).wrapping_add(11),
        length,
        fps: 30.0,
        appearance_drift: 0.0,
        clutter: 0.5,
        distractors: 1,
        distractor_similarity: 0.85,
        noise: 1.5,
        motion: vec![
            MotionSegment {
                start: 0,
                end: 60,
                kind: MotionKind::Drift { from: a, to: b },
            },
            MotionSegment {
                start: 60,
                end: 72,
                kind: MotionKind::OffScreen,
            },
            MotionSegment {
                start: 72,
                end: length,
                kind: MotionKind::Drift {
                    from: far_point(&mut rng, b),
                    to: c,
                },
            },
        ],
    }
}

// ---------------------------------------------------------------------------
// Self-evaluation training data
// ---------------------------------------------------------------------------

/// Harvests self-evaluation samples by running the global-every-frame,
/// no-update tracker variant over a synthetic sequence: once the map
/// history is full, every `stride`-th frame yields (history, overlap) with
/// the overlap following the absence-credit semantics.
pub fn harvest_eval_samples(
    spec: &SynthSpec,
    seed: u64,
    base: &RunConfig,
    stride: usize,
) -> Result<Vec<EvalSample>> {
    let gt = spec.ground_truth()?;
    let cfg = variant_config(base, SearchVariant::GlobalEveryFrame, UpdateMode::None);
    let search_cfg = cfg.to_search_config();
    let mut video = SynthVideo::new(spec, seed)?;
    let (first, _) = video.next().ok_or_else(|| Error::Invalid("empty sequence".into()))?;
    let init_box = match gt.lookup(0) {
        Some(crate::data_io::AnnotationEntry::Box(b)) => *b,
        _ => return Err(Error::Invalid("target not visible in frame 0".into())),
    };
    let mut state = crate::search::init(&first, &init_box, &search_cfg)?;
    let mut samples = Vec::new();
    for (frame, _) in video {
        let out = crate::search::step(&frame, &mut state, None, &search_cfg)?;
        if state.map_history().len() < search_cfg.history_len
            || state.frame_index % stride.max(1) != 0
        {
            continue;
        }
        let pred = FramePrediction {
            frame_index: state.frame_index,
            bbox: Some(out.prediction.bbox),
            absent: false,
            score: out.prediction.normalized_score,
            search_mode: out.mode,
            update_applied: false,
        };
        let overlap = crate::evaluation::frame_overlap(&pred, gt.lookup(state.frame_index));
        if let Some(iou) = overlap {
            samples.push(EvalSample::new(state.map_history().to_vec(), iou)?);
        }
    }
    Ok(samples)
}

/// Harvests from several seeds of the drift corpus in parallel.
pub fn harvest_corpus_samples(
    seeds: &[u64],
    base: &RunConfig,
    stride: usize,
) -> Result<Vec<EvalSample>> {
    let per_seed: Vec<Result<Vec<EvalSample>>> = par::map_collect(seeds, |&seed| {
        harvest_eval_samples(&drift_spec(seed), seed, base, stride)
    });
    let mut all = Vec::new();
    for s in per_seed {
        all.extend(s?);
    }
    Ok(all)
}
