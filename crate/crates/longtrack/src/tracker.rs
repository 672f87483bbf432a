//! Per-sequence orchestration: wires the hybrid search, the self-evaluation
//! gate and the stage-2 update into a frame-by-frame tracker, and runs whole
//! sequences with timing.

use std::time::Instant;

use crate::config::RunConfig;
use crate::evaluation::FramePrediction;
use crate::features::ImagePatch;
use crate::search::{self, SearchConfig, SearchMode, TrackerState};
use crate::selfeval::SelfEvalNet;
use crate::update::{self, UpdatePolicy};
use crate::{BoundingBox, Error, Result};

pub struct Tracker<'n> {
    state: TrackerState,
    search_cfg: SearchConfig,
    policy: UpdatePolicy,
    net: Option<&'n SelfEvalNet>,
    update_events: usize,
}

impl<'n> Tracker<'n> {
    pub fn new(
        first_frame: &ImagePatch,
        target: &BoundingBox,
        config: &RunConfig,
        net: Option<&'n SelfEvalNet>,
    ) -> Result<Self> {
        let search_cfg = config.to_search_config();
        let state = search::init(first_frame, target, &search_cfg)?;
        Ok(Tracker {
            state,
            search_cfg,
            policy: config.to_update_policy(),
            net,
            update_events: 0,
        })
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    pub fn update_events(&self) -> usize {
        self.update_events
    }

    /// The frame-0 output: the given initial box.
    pub fn init_prediction(&self) -> FramePrediction {
        FramePrediction {
            frame_index: 0,
            bbox: Some(self.state.last_box),
            absent: false,
            score: 1.0,
            search_mode: SearchMode::Init,
            update_applied: false,
        }
    }

    /// Tracks one frame: search, absence rule, then the gated stage-2
    /// update on global frames.
    pub fn process_frame(&mut self, frame: &ImagePatch) -> Result<FramePrediction> {
        let out = search::step(frame, &mut self.state, self.net, &self.search_cfg)?;

        let mut update_applied = false;
        if let Some(stage2) = &out.stage2 {
            let permitted = update::gate(
                &self.policy,
                out.mode,
                out.selfeval_pass,
                out.prediction.normalized_score,
            );
            if permitted {
                let pairs = update::build_pairs(
                    &out.prediction.bbox,
                    stage2,
                    frame,
                    self.search_cfg.global.stage12_query_side,
                    &self.policy,
                )?;
                if !pairs.is_empty() {
                    let outcome = update::apply_update(
                        &self.state,
                        &pairs,
                        &self.search_cfg.extractor,
                        &self.policy,
                    )?;
                    if outcome.applied {
                        self.state.stage2_params = outcome.params;
                        update_applied = true;
                        self.update_events += 1;
                    }
                }
            }
        }

        Ok(FramePrediction {
            frame_index: self.state.frame_index,
            bbox: if out.absent {
                None
            } else {
                Some(out.prediction.bbox)
            },
            absent: out.absent,
            score: out.prediction.normalized_score,
            search_mode: out.mode,
            update_applied,
        })
    }
}

/// A tracked sequence with wall-clock timing.
#[derive(Debug, Clone)]
pub struct TrackRun {
    pub predictions: Vec<FramePrediction>,
    pub frames: usize,
    pub wall_seconds: f64,
    pub frames_per_second: f64,
    pub update_events: usize,
}

/// Runs the tracker over a frame stream. Frame 0 initializes on `init_box`
/// and is emitted as-is; the remaining frames are tracked.
pub fn track_frames<I>(
    mut frames: I,
    init_box: &BoundingBox,
    config: &RunConfig,
    net: Option<&SelfEvalNet>,
) -> Result<TrackRun>
where
    I: Iterator<Item = Result<ImagePatch>>,
{
    let started = Instant::now();
    let first = frames
        .next()
        .ok_or_else(|| Error::Invalid("sequence has no frames".into()))??;
    let mut tracker = Tracker::new(&first, init_box, config, net)?;
    let mut predictions = vec![tracker.init_prediction()];
    for frame in frames {
        predictions.push(tracker.process_frame(&frame?)?);
    }
    let wall_seconds = started.elapsed().as_secs_f64();
    let frames_count = predictions.len();
    Ok(TrackRun {
        frames: frames_count,
        frames_per_second: frames_count as f64 / wall_seconds.max(1e-9),
        wall_seconds,
        predictions,
        update_events: tracker.update_events(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::update::UpdateMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn static_frames(n: usize, seed: u64) -> Vec<ImagePatch> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![128u8; 160 * 120];
        for y in 0..24 {
            for x in 0..24 {
                data[(48 + y) * 160 + 68 + x] = rng.gen_range(40..220);
            }
        }
        let frame = ImagePatch::gray(120, 160, data).unwrap();
        vec![frame; n]
    }

    #[test]
    fn emits_one_prediction_per_frame() {
        let frames = static_frames(20, 1);
        let init_box = BoundingBox::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let mut cfg = RunConfig::default();
        cfg.update_mode = UpdateMode::None;
        let run = track_frames(frames.into_iter().map(Ok), &init_box, &cfg, None).unwrap();
        assert_eq!(run.predictions.len(), 20);
        assert_eq!(run.predictions[0].search_mode, SearchMode::Init);
        for (i, p) in run.predictions.iter().enumerate() {
            assert_eq!(p.frame_index, i);
            p.validate().unwrap();
        }
    }

    #[test]
    fn no_update_mode_is_reproducible() {
        let init_box = BoundingBox::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let mut cfg = RunConfig::default();
        cfg.update_mode = UpdateMode::None;
        let a = track_frames(static_frames(18, 2).into_iter().map(Ok), &init_box, &cfg, None)
            .unwrap();
        let b = track_frames(static_frames(18, 2).into_iter().map(Ok), &init_box, &cfg, None)
            .unwrap();
        assert_eq!(a.predictions, b.predictions);
        assert_eq!(a.update_events, 0);
    }

    #[test]
    fn blind_mode_updates_on_global_frames_only() {
        let init_box = BoundingBox::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let mut cfg = RunConfig::default();
        cfg.update_mode = UpdateMode::Blind;
        cfg.period = 5;
        let run = track_frames(static_frames(16, 3).into_iter().map(Ok), &init_box, &cfg, None)
            .unwrap();
        for p in &run.predictions {
            if p.update_applied {
                assert_eq!(p.search_mode, SearchMode::Global);
            }
        }
        assert_eq!(run.update_events, 3); // frames 5, 10, 15
    }

    #[test]
    fn stationary_target_stays_tracked() {
        let init_box = BoundingBox::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let mut cfg = RunConfig::default();
        cfg.update_mode = UpdateMode::None;
        let run = track_frames(static_frames(25, 4).into_iter().map(Ok), &init_box, &cfg, None)
            .unwrap();
        for p in &run.predictions {
            let b = p.bbox.expect("never absent on a visible static target");
            let iou = crate::evaluation::iou(&b, &init_box).unwrap();
            assert!(iou > 0.5, "frame {}: iou {iou}", p.frame_index);
        }
    }
}
