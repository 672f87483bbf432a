//! Tracking metrics: IoU, success curves and the modified AUC that credits
//! explicit absence predictions, plus windowed and per-loop variants for
//! long-video analysis.
//!
//! Overlap semantics on a ground-truth-absent frame: an explicit absence
//! prediction counts as overlap 1.0, any predicted box counts as 0. A
//! predicted absence on a visible target also counts as 0. Unannotated
//! frames are skipped.

use serde::{Deserialize, Serialize};

use crate::data_io::annotations::{AnnotationEntry, AnnotationTrack};
use crate::search::SearchMode;
use crate::{BoundingBox, Error, Result};

/// One tracker output frame: exactly one of `bbox` or `absent`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FramePrediction {
    pub frame_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub absent: bool,
    pub score: f64,
    pub search_mode: SearchMode,
    pub update_applied: bool,
}

impl FramePrediction {
    pub fn validate(&self) -> Result<()> {
        if self.bbox.is_some() == self.absent {
            return Err(Error::Invalid(format!(
                "frame {}: prediction must be exactly one of box or absent",
                self.frame_index
            )));
        }
        Ok(())
    }
}

/// Success rates over an ascending threshold grid plus the area under the
/// curve (the mean rate over the grid).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SuccessCurve {
    pub thresholds: Vec<f64>,
    pub success_rate: Vec<f64>,
    pub auc: f64,
}

/// The fixed 101-point threshold grid {0, 0.01, ..., 1.0}.
pub fn threshold_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Intersection over union in continuous coordinates.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    Ok(inter / union)
}

/// Per-frame overlap; `None` means the frame is unannotated and excluded.
pub fn frame_overlap(pred: &FramePrediction, gt: Option<&AnnotationEntry>) -> Option<f64> {
    let entry = gt?;
    let overlap = match (entry, &pred.bbox) {
        (AnnotationEntry::Box(gt_box), Some(pred_box)) => {
            iou(pred_box, gt_box).unwrap_or(0.0)
        }
        (AnnotationEntry::Absent, None) => 1.0,
        (AnnotationEntry::Absent, Some(_)) => 0.0,
        (AnnotationEntry::Box(_), None) => 0.0,
    };
    Some(overlap)
}

fn curve_from_overlaps(overlaps: &[f64]) -> SuccessCurve {
    let thresholds = threshold_grid();
    let n = overlaps.len() as f64;
    let success_rate: Vec<f64> = thresholds
        .iter()
        .map(|&tau| overlaps.iter().filter(|&&o| o > tau).count() as f64 / n)
        .collect();
    let auc = success_rate.iter().sum::<f64>() / success_rate.len() as f64;
    SuccessCurve {
        thresholds,
        success_rate,
        auc,
    }
}

/// The modified AUC: success(tau) is the fraction of annotated frames whose
/// overlap (with absence credit) strictly exceeds tau, averaged over the
/// 101-point grid. Every annotated frame must have a prediction.
pub fn modified_auc(preds: &[FramePrediction], gt: &AnnotationTrack) -> Result<SuccessCurve> {
    let mut overlaps = Vec::with_capacity(gt.len());
    for (frame, entry) in gt.entries() {
        let pred = preds
            .iter()
            .find(|p| p.frame_index == *frame)
            .ok_or_else(|| {
                Error::Invalid(format!("annotated frame {frame} has no prediction"))
            })?;
        pred.validate()?;
        if let Some(o) = frame_overlap(pred, Some(entry)) {
            overlaps.push(o);
        }
    }
    if overlaps.is_empty() {
        return Err(Error::Invalid(
            "no annotated frames to evaluate".into(),
        ));
    }
    Ok(curve_from_overlaps(&overlaps))
}

/// Modified AUC restricted to the last `window_seconds` of the sequence
/// (`ceil(window * fps)` frames counted from the final prediction).
pub fn last_window_auc(
    preds: &[FramePrediction],
    gt: &AnnotationTrack,
    window_seconds: f64,
    fps: f64,
) -> Result<SuccessCurve> {
    if preds.is_empty() {
        return Err(Error::Invalid("no predictions".into()));
    }
    if !(fps.is_finite() && fps > 0.0) || !(window_seconds.is_finite() && window_seconds > 0.0) {
        return Err(Error::Invalid(
            "window and fps must be positive".into(),
        ));
    }
    let total = preds.iter().map(|p| p.frame_index).max().unwrap() + 1;
    let window_frames = (window_seconds * fps).ceil() as usize;
    if window_frames > total {
        return Err(Error::Invalid(format!(
            "window of {window_frames} frames exceeds sequence length {total}"
        )));
    }
    let start = total - window_frames;
    modified_auc(preds, &gt.slice(start..total))
}

/// Modified AUC per loop of a repetitive sequence. The prediction stream
/// must cover exactly `loop_length * num_loops` frames.
pub fn per_loop_auc(
    preds: &[FramePrediction],
    gt: &AnnotationTrack,
    loop_length: usize,
    num_loops: usize,
) -> Result<Vec<SuccessCurve>> {
    if loop_length == 0 || num_loops == 0 {
        return Err(Error::Invalid("loop structure must be non-empty".into()));
    }
    if preds.len() != loop_length * num_loops {
        return Err(Error::Invalid(format!(
            "{} predictions do not tile {num_loops} loops of {loop_length} frames",
            preds.len()
        )));
    }
    (0..num_loops)
        .map(|i| {
            let range = i * loop_length..(i + 1) * loop_length;
            modified_auc(preds, &gt.slice(range))
        })
        .collect()
}
