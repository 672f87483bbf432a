//! Hybrid search: three-stage global search over the whole frame, cheap
//! local search around the previous prediction, and the time-clock scheduler
//! that alternates them with period `T`.
//!
//! Global search never looks at the previous prediction, so its candidate
//! set cannot be dragged away by sampling drift; local search carries the
//! frame-to-frame load in between. All multi-region evaluations fan out via
//! [`crate::par`] and are merged by a deterministic argmax.

use serde::{Deserialize, Serialize};

use crate::features::{
    crop_resize_filled, crop_with_padding, extract, padding_fill, resize_bilinear,
    FeatureExtractorSpec, ImagePatch, ProjectionParams,
};
use crate::numerics::{Grid2, Tensor3};
use crate::par;
use crate::selfeval::SelfEvalNet;
use crate::similarity::{
    logistic, map_cell_to_box, similarity_map_from_features, ScoredBox, SimilarityConfig, STRIDE,
};
use crate::{BoundingBox, Error, Result};

/// Scale grid of global-search stage 2: `2^{-2:0.5:2}`.
pub fn stage2_scale_grid() -> Vec<f64> {
    (0..9).map(|k| 2f64.powf(-2.0 + 0.5 * k as f64)).collect()
}

/// Scale grid of global-search stage 3: `2^{-0.4:0.08:0.4}`.
pub fn stage3_scale_grid() -> Vec<f64> {
    (0..11).map(|k| 2f64.powf(-0.4 + 0.08 * k as f64)).collect()
}

/// Local-search scale grid, centered on 1.
pub const LOCAL_SCALES: [f64; 5] = [0.9509, 0.9751, 1.0, 1.0255, 1.0517];

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSearchConfig {
    /// Stage-1 candidate locations (N).
    pub num_locations: usize,
    /// Stage-2 scale multipliers (M of them).
    pub stage2_scales: Vec<f64>,
    /// Stage-3 fine scale multipliers (L of them).
    pub stage3_scales: Vec<f64>,
    /// Probe side over query side (t).
    pub probe_factor: usize,
    /// Query resolution of stages 1 and 2 (l).
    pub stage12_query_side: usize,
    /// Query resolution of stage 3 (l-tilde).
    pub stage3_query_side: usize,
    /// Minimum Chebyshev distance between stage-1 picks, in map cells.
    pub nms_min_separation: usize,
}

impl Default for GlobalSearchConfig {
    fn default() -> Self {
        GlobalSearchConfig {
            num_locations: 10,
            stage2_scales: stage2_scale_grid(),
            stage3_scales: stage3_scale_grid(),
            probe_factor: 2,
            stage12_query_side: 32,
            stage3_query_side: 64,
            nms_min_separation: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSearchConfig {
    pub scales: Vec<f64>,
    /// Query resolution of local search (l-prime).
    pub query_side: usize,
    pub probe_factor: usize,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        LocalSearchConfig {
            scales: LOCAL_SCALES.to_vec(),
            query_side: 64,
            probe_factor: 2,
        }
    }
}

/// Everything the per-frame step needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub global: GlobalSearchConfig,
    pub local: LocalSearchConfig,
    /// Time-clock period: global search fires when `frame_index % period == 0`
    /// (the frame after init counts as 1).
    pub period: usize,
    /// Absence threshold on the normalized score (see [`step`]).
    pub tau_abs: f64,
    /// Similarity-map history length (K) fed to self-evaluation.
    pub history_len: usize,
    pub extractor: FeatureExtractorSpec,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            global: GlobalSearchConfig::default(),
            local: LocalSearchConfig::default(),
            period: 15,
            tau_abs: 0.3,
            history_len: 10,
            extractor: FeatureExtractorSpec::default(),
        }
    }
}

/// Which pipeline produced a frame's prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Init,
    Global,
    Local,
}

/// Per-sequence tracker state. Query features are extracted once at init and
/// never replaced; only `stage2_params` may change afterwards (via the
/// update module).
#[derive(Debug, Clone)]
pub struct TrackerState {
    query_feats_32: Tensor3,
    query_feats_64: Tensor3,
    pub stage2_params: ProjectionParams,
    pub last_box: BoundingBox,
    pub last_map: Option<Grid2>,
    map_history: Vec<Grid2>,
    pub frame_index: usize,
    pub absent_flag: bool,
    init_size: (f64, f64),
}

impl TrackerState {
    pub fn query_feats_32(&self) -> &Tensor3 {
        &self.query_feats_32
    }
    pub fn query_feats_64(&self) -> &Tensor3 {
        &self.query_feats_64
    }
    /// Initial target size `(w0, h0)`.
    pub fn init_size(&self) -> (f64, f64) {
        self.init_size
    }
    /// Up to K most recent final-stage similarity maps, oldest first.
    pub fn map_history(&self) -> &[Grid2] {
        &self.map_history
    }
}

/// Builds the tracker state from the first frame and its target box.
pub fn init(first_frame: &ImagePatch, target: &BoundingBox, cfg: &SearchConfig) -> Result<TrackerState> {
    target.validate()?;
    if target.w < 1.0 || target.h < 1.0 {
        return Err(Error::Invalid(format!(
            "target box {}x{} is degenerate",
            target.w, target.h
        )));
    }
    let frame_box = BoundingBox::new(
        first_frame.width() as f64 / 2.0,
        first_frame.height() as f64 / 2.0,
        first_frame.width() as f64,
        first_frame.height() as f64,
    )?;
    if target.intersection_area(&frame_box) <= 0.0 {
        return Err(Error::Invalid(
            "target box lies entirely outside the first frame".into(),
        ));
    }

    let patch = crop_with_padding(first_frame, target)?;
    let l = cfg.global.stage12_query_side;
    let lt = cfg.global.stage3_query_side;
    let query_feats_32 = extract(&resize_bilinear(&patch, l, l)?, &cfg.extractor)?;
    let query_feats_64 = extract(&resize_bilinear(&patch, lt, lt)?, &cfg.extractor)?;
    Ok(TrackerState {
        query_feats_32,
        query_feats_64,
        stage2_params: ProjectionParams::identity(cfg.extractor.channels()),
        last_box: *target,
        last_map: None,
        map_history: Vec::new(),
        frame_index: 0,
        absent_flag: false,
        init_size: (target.w, target.h),
    })
}

/// Deterministic comparison key for merging candidates: higher score wins;
/// ties prefer the scale closest to 1, then the lower location index, then
/// the cell closest to the map center, then row-major order.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CandidateKey {
    score: f64,
    scale_dist: usize,
    location: usize,
    center_dist: usize,
    row: usize,
    col: usize,
}

impl CandidateKey {
    fn beats(&self, other: &CandidateKey) -> bool {
        if self.score != other.score {
            return self.score > other.score;
        }
        let a = (self.scale_dist, self.location, self.center_dist, self.row, self.col);
        let b = (
            other.scale_dist,
            other.location,
            other.center_dist,
            other.row,
            other.col,
        );
        a < b
    }
}

fn scale_index_nearest_one(scales: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scales.iter().enumerate() {
        if (s - 1.0).abs() < (scales[best] - 1.0).abs() {
            best = i;
        }
    }
    best
}

/// Stage 1: single-scale search over the entire frame. The frame is rescaled
/// so that the target's geometric-mean side maps to the stage-1/2 query
/// side (aspect preserved), correlated against the query in one map, and the
/// `N` strongest non-maximum-suppressed cells are back-projected to frame
/// coordinates at the initial target size.
pub fn global_stage1(
    frame: &ImagePatch,
    state: &TrackerState,
    cfg: &SearchConfig,
) -> Result<Vec<BoundingBox>> {
    let g = &cfg.global;
    let (w0, h0) = state.init_size;
    let l = g.stage12_query_side;
    let factor = l as f64 / (w0 * h0).sqrt();
    let rh = ((frame.height() as f64 * factor).round() as usize).max(1);
    let rw = ((frame.width() as f64 * factor).round() as usize).max(1);
    if rh < l || rw < l {
        return Err(Error::Invalid(format!(
            "frame rescaled to {rw}x{rh} is smaller than the {l}x{l} query"
        )));
    }
    let rescaled = resize_bilinear(frame, rh, rw)?;
    let feats = extract(&rescaled, &cfg.extractor)?;
    let sim_cfg = SimilarityConfig::fixed(l, g.probe_factor);
    let map = similarity_map_from_features(&state.query_feats_32, &feats, &sim_cfg)?;

    let picks = top_cells_with_nms(&map, g.num_locations, g.nms_min_separation);

    // corner-aligned back-projection per axis
    let sx = if rw > 1 {
        (frame.width() - 1) as f64 / (rw - 1) as f64
    } else {
        1.0
    };
    let sy = if rh > 1 {
        (frame.height() - 1) as f64 / (rh - 1) as f64
    } else {
        1.0
    };
    let half = l as f64 / 2.0;
    picks
        .into_iter()
        .map(|(r, c)| {
            BoundingBox::new(
                ((c * STRIDE) as f64 + half) * sx,
                ((r * STRIDE) as f64 + half) * sy,
                w0,
                h0,
            )
        })
        .collect()
}

/// Greedy top-N local maxima with Chebyshev NMS; when fewer than `n` cells
/// survive suppression the list is padded with the next-highest remaining
/// cells (never duplicating a cell).
fn top_cells_with_nms(map: &Grid2, n: usize, min_sep: usize) -> Vec<(usize, usize)> {
    let mut cells: Vec<(usize, usize, f64)> = (0..map.height())
        .flat_map(|r| (0..map.width()).map(move |c| (r, c)))
        .map(|(r, c)| (r, c, map.get(r, c)))
        .collect();
    cells.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let mut picked: Vec<(usize, usize)> = Vec::with_capacity(n);
    let mut rejected: Vec<(usize, usize)> = Vec::new();
    for &(r, c, _) in &cells {
        if picked.len() >= n {
            break;
        }
        let clear = picked
            .iter()
            .all(|&(pr, pc)| pr.abs_diff(r).max(pc.abs_diff(c)) >= min_sep);
        if clear {
            picked.push((r, c));
        } else {
            rejected.push((r, c));
        }
    }
    for cell in rejected {
        if picked.len() >= n {
            break;
        }
        picked.push(cell);
    }
    picked
}

/// One evaluated stage-2 candidate, kept for the update module.
#[derive(Debug, Clone, Copy)]
pub struct Stage2Candidate {
    pub bbox: BoundingBox,
    pub raw_score: f64,
    pub location_index: usize,
    pub scale_index: usize,
}

#[derive(Debug, Clone)]
pub struct Stage2Outcome {
    pub best: ScoredBox,
    pub winning_location: usize,
    pub winning_scale: usize,
    pub winning_map: Grid2,
    /// Every candidate of every probe region, region-major.
    pub candidates: Vec<Stage2Candidate>,
}

/// Stage 2: multi-scale local probes around each stage-1 location, scored
/// with the live (updatable) stage-2 similarity.
pub fn global_stage2(
    frame: &ImagePatch,
    locations: &[BoundingBox],
    state: &TrackerState,
    cfg: &SearchConfig,
) -> Result<Stage2Outcome> {
    if locations.is_empty() {
        return Err(Error::Invalid("stage 2 needs at least one location".into()));
    }
    let g = &cfg.global;
    let l = g.stage12_query_side;
    let t = g.probe_factor;
    let (w0, h0) = state.init_size;

    let jobs: Vec<(usize, usize, BoundingBox)> = locations
        .iter()
        .enumerate()
        .flat_map(|(i, loc)| {
            g.stage2_scales.iter().enumerate().map(move |(j, sigma)| {
                (
                    i,
                    j,
                    BoundingBox {
                        cx: loc.cx,
                        cy: loc.cy,
                        w: w0 * sigma * t as f64,
                        h: h0 * sigma * t as f64,
                    },
                )
            })
        })
        .collect();

    let params = state.stage2_params.clone();
    let sim_cfg_params = params.clone();
    let fill = padding_fill(frame);
    let maps: Vec<Result<(usize, usize, BoundingBox, Grid2)>> =
        par::map_collect(&jobs, |(i, j, region)| {
            let probe = crop_resize_filled(frame, &fill, region, l * t, l * t)?;
            let feats = extract(&probe, &cfg.extractor)?;
            let sim_cfg = SimilarityConfig {
                query_side: l,
                probe_factor: t,
                projection: Some(&sim_cfg_params),
            };
            let map = similarity_map_from_features(&state.query_feats_32, &feats, &sim_cfg)?;
            Ok((*i, *j, *region, map))
        });

    let scale_one = scale_index_nearest_one(&g.stage2_scales);
    let sim_cfg = SimilarityConfig {
        query_side: l,
        probe_factor: t,
        projection: None,
    };
    let side = sim_cfg.map_side();
    let center = (side - 1) / 2;

    let mut candidates = Vec::with_capacity(jobs.len() * side * side);
    let mut best: Option<(CandidateKey, ScoredBox, usize, usize, Grid2)> = None;
    for item in maps {
        let (i, j, region, map) = item?;
        for r in 0..map.height() {
            for c in 0..map.width() {
                let raw = map.get(r, c);
                let bbox = map_cell_to_box((r, c), &region, &sim_cfg)?;
                candidates.push(Stage2Candidate {
                    bbox,
                    raw_score: raw,
                    location_index: i,
                    scale_index: j,
                });
                let key = CandidateKey {
                    score: raw,
                    scale_dist: j.abs_diff(scale_one),
                    location: i,
                    center_dist: r.abs_diff(center).max(c.abs_diff(center)),
                    row: r,
                    col: c,
                };
                if best.as_ref().is_none_or(|(k, ..)| key.beats(k)) {
                    let scored = ScoredBox {
                        bbox,
                        raw_score: raw,
                        normalized_score: logistic(raw + params.bias_logit),
                    };
                    best = Some((key, scored, i, j, map.clone()));
                }
            }
        }
    }
    let (_, best, winning_location, winning_scale, winning_map) =
        best.expect("at least one probe region");
    Ok(Stage2Outcome {
        best,
        winning_location,
        winning_scale,
        winning_map,
        candidates,
    })
}

fn refine_over_scales(
    frame: &ImagePatch,
    anchor: &BoundingBox,
    query_feats: &Tensor3,
    scales: &[f64],
    query_side: usize,
    probe_factor: usize,
    extractor: &FeatureExtractorSpec,
) -> Result<(ScoredBox, Grid2)> {
    let t = probe_factor;
    let jobs: Vec<(usize, BoundingBox)> = scales
        .iter()
        .enumerate()
        .map(|(j, sigma)| {
            (
                j,
                BoundingBox {
                    cx: anchor.cx,
                    cy: anchor.cy,
                    w: anchor.w * sigma * t as f64,
                    h: anchor.h * sigma * t as f64,
                },
            )
        })
        .collect();
    let fill = padding_fill(frame);
    let maps: Vec<Result<(usize, BoundingBox, Grid2)>> = par::map_collect(&jobs, |(j, region)| {
        let probe = crop_resize_filled(frame, &fill, region, query_side * t, query_side * t)?;
        let feats = extract(&probe, extractor)?;
        let sim_cfg = SimilarityConfig::fixed(query_side, t);
        let map = similarity_map_from_features(query_feats, &feats, &sim_cfg)?;
        Ok((*j, *region, map))
    });

    let scale_one = scale_index_nearest_one(scales);
    let sim_cfg = SimilarityConfig::fixed(query_side, t);
    let side = sim_cfg.map_side();
    let center = (side - 1) / 2;
    let mut best: Option<(CandidateKey, ScoredBox, Grid2)> = None;
    for item in maps {
        let (j, region, map) = item?;
        for r in 0..map.height() {
            for c in 0..map.width() {
                let raw = map.get(r, c);
                let key = CandidateKey {
                    score: raw,
                    scale_dist: j.abs_diff(scale_one),
                    location: 0,
                    center_dist: r.abs_diff(center).max(c.abs_diff(center)),
                    row: r,
                    col: c,
                };
                if best.as_ref().is_none_or(|(k, ..)| key.beats(k)) {
                    let bbox = map_cell_to_box((r, c), &region, &sim_cfg)?;
                    let scored = ScoredBox {
                        bbox,
                        raw_score: raw,
                        normalized_score: logistic(raw),
                    };
                    best = Some((key, scored, map.clone()));
                }
            }
        }
    }
    let (_, scored, map) = best.expect("at least one scale");
    Ok((scored, map))
}

/// Stage 3: refine the stage-2 box over finer scales at a larger input
/// resolution, with the fixed similarity. Returns the final prediction and
/// its similarity map.
pub fn global_stage3(
    frame: &ImagePatch,
    best: &ScoredBox,
    state: &TrackerState,
    cfg: &SearchConfig,
) -> Result<(ScoredBox, Grid2)> {
    refine_over_scales(
        frame,
        &best.bbox,
        &state.query_feats_64,
        &cfg.global.stage3_scales,
        cfg.global.stage3_query_side,
        cfg.global.probe_factor,
        &cfg.extractor,
    )
}

/// Local search around the previous prediction over near-unity scales; the
/// same machinery as stage 3 anchored on `last_box`.
pub fn local_search(
    frame: &ImagePatch,
    state: &TrackerState,
    cfg: &SearchConfig,
) -> Result<(ScoredBox, Grid2)> {
    refine_over_scales(
        frame,
        &state.last_box,
        &state.query_feats_64,
        &cfg.local.scales,
        cfg.local.query_side,
        cfg.local.probe_factor,
        &cfg.extractor,
    )
}

/// Outcome of one tracking step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub prediction: ScoredBox,
    pub absent: bool,
    pub mode: SearchMode,
    /// Self-evaluation verdict: `None` when no net is supplied or fewer than
    /// K maps have accumulated (treated as a rejection).
    pub selfeval_pass: Option<bool>,
    /// Stage-2 detail, present on global-search frames only.
    pub stage2: Option<Stage2Outcome>,
}

/// Advances the tracker by one frame: picks global or local search off the
/// time clock, records the final-stage similarity map in the history, asks
/// the self-evaluation module for a verdict, and applies the absence rule
/// (absent iff self-evaluation does not approve AND the normalized score is
/// below `tau_abs`). `last_box` moves only on non-absent frames.
pub fn step(
    frame: &ImagePatch,
    state: &mut TrackerState,
    net: Option<&SelfEvalNet>,
    cfg: &SearchConfig,
) -> Result<StepOutcome> {
    state.frame_index += 1;
    let mode = if state.frame_index % cfg.period == 0 {
        SearchMode::Global
    } else {
        SearchMode::Local
    };

    let (prediction, final_map, stage2) = match mode {
        SearchMode::Global => {
            let locations = global_stage1(frame, state, cfg)?;
            let s2 = global_stage2(frame, &locations, state, cfg)?;
            let (scored, map) = global_stage3(frame, &s2.best, state, cfg)?;
            (scored, map, Some(s2))
        }
        _ => {
            let (scored, map) = local_search(frame, state, cfg)?;
            (scored, map, None)
        }
    };

    state.map_history.push(final_map.clone());
    if state.map_history.len() > cfg.history_len {
        state.map_history.remove(0);
    }
    state.last_map = Some(final_map);

    let selfeval_pass = match net {
        Some(net) if state.map_history.len() == cfg.history_len => {
            Some(crate::selfeval::approve(net, state)?)
        }
        _ => None,
    };

    let absent = selfeval_pass != Some(true) && prediction.normalized_score < cfg.tau_abs;
    if !absent {
        state.last_box = prediction.bbox;
    }
    state.absent_flag = absent;

    Ok(StepOutcome {
        prediction,
        absent,
        mode,
        selfeval_pass,
        stage2,
    })
}
