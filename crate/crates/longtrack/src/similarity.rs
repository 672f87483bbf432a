//! Similarity evaluation between the stored query and probe regions.
//!
//! A probe patch is feature-extracted and cross-correlated against the
//! query features, yielding a 2D similarity map over all query-sized
//! windows of the probe. Map cells hold the *mean* elementwise product
//! (the raw correlation divided by the query element count) so values are
//! comparable across the stage resolutions and sit in the logistic's
//! responsive range; a uniform positive scale leaves every argmax
//! unchanged.

use crate::features::{extract, project, FeatureExtractorSpec, ImagePatch, ProjectionParams};
use crate::numerics::{
    mult_count_direct, mult_count_fft, xcorr_valid, xcorr_valid_fft, Grid2, Tensor3,
};
use crate::{BoundingBox, Error, Result};

/// Feature-map stride of the extractor in input pixels.
pub const STRIDE: usize = 8;

/// Resolution configuration for one similarity evaluation.
/// `projection: None` means the fixed (identity) similarity of stages 1/3
/// and local search; `Some` carries the live stage-2 parameters.
#[derive(Debug, Clone, Copy)]
pub struct SimilarityConfig<'a> {
    /// Query side `l` in pixels (32 for stages 1-2, 64 for stage 3 / local).
    pub query_side: usize,
    /// Probe side is `probe_factor * query_side`.
    pub probe_factor: usize,
    pub projection: Option<&'a ProjectionParams>,
}

impl<'a> SimilarityConfig<'a> {
    pub fn fixed(query_side: usize, probe_factor: usize) -> Self {
        SimilarityConfig {
            query_side,
            probe_factor,
            projection: None,
        }
    }

    pub fn probe_side(&self) -> usize {
        self.query_side * self.probe_factor
    }

    /// Side of the similarity map for a `probe_factor * query_side` probe:
    /// `(l/8)*(t-1) + 1` (e.g. 5 for l=32, t=2; 9 for l=64, t=2).
    pub fn map_side(&self) -> usize {
        (self.query_side / STRIDE) * (self.probe_factor - 1) + 1
    }
}

/// A candidate box with its raw and normalized match score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: BoundingBox,
    pub raw_score: f64,
    /// `logistic(raw_score + bias_logit)`, in (0, 1).
    pub normalized_score: f64,
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Normalizes a raw correlation with the bias carried by `params`.
pub fn normalize_score(raw: f64, params: Option<&ProjectionParams>) -> f64 {
    let bias = params.map_or(0.0, |p| p.bias_logit);
    logistic(raw + bias)
}

fn mean_xcorr(query: &Tensor3, probe: &Tensor3) -> Result<Grid2> {
    // route by predicted multiply count; both routes agree within 1e-6
    let mut map = if mult_count_fft(query, probe) < mult_count_direct(query, probe) {
        xcorr_valid_fft(query, probe)?
    } else {
        xcorr_valid(query, probe)?
    };
    let n = (query.height() * query.width() * query.channels()) as f64;
    map.scale(1.0 / n);
    Ok(map)
}

/// Similarity map of the query features against every query-sized window of
/// `probe_patch`. The probe is expected at `probe_factor * query_side` per
/// side for the staged searches; any probe at least as large as the query
/// is accepted (stage 1 correlates over the whole rescaled frame).
pub fn similarity_map(
    query_feats: &Tensor3,
    probe_patch: &ImagePatch,
    extractor: &FeatureExtractorSpec,
    config: &SimilarityConfig,
) -> Result<Grid2> {
    let probe_feats = extract(probe_patch, extractor)?;
    similarity_map_from_features(query_feats, &probe_feats, config)
}

/// As [`similarity_map`] but over pre-extracted probe features.
pub fn similarity_map_from_features(
    query_feats: &Tensor3,
    probe_feats: &Tensor3,
    config: &SimilarityConfig,
) -> Result<Grid2> {
    match config.projection {
        Some(params) if !params.is_identity() => {
            let q = project(query_feats, params)?;
            let p = project(probe_feats, params)?;
            mean_xcorr(&q, &p)
        }
        _ => mean_xcorr(query_feats, probe_feats),
    }
}

/// Frame-coordinate box of the candidate window at `cell` of the similarity
/// map computed over `probe_region` (resized to `probe_side` squared). The
/// candidate has the query's size scaled by the region-to-probe ratio, and
/// its center steps by one stride per cell from the region's top-left
/// query anchor.
pub fn map_cell_to_box(
    cell: (usize, usize),
    probe_region: &BoundingBox,
    config: &SimilarityConfig,
) -> Result<BoundingBox> {
    let side = config.map_side();
    let (row, col) = cell;
    if row >= side || col >= side {
        return Err(Error::Invalid(format!(
            "cell ({row},{col}) outside {side}x{side} similarity map"
        )));
    }
    let probe_px = config.probe_side() as f64;
    let scale_x = probe_region.w / probe_px;
    let scale_y = probe_region.h / probe_px;
    let l = config.query_side as f64;
    let (left, top, _, _) = probe_region.corners();
    BoundingBox::new(
        left + (l / 2.0 + (STRIDE * col) as f64) * scale_x,
        top + (l / 2.0 + (STRIDE * row) as f64) * scale_y,
        l * scale_x,
        l * scale_y,
    )
}

/// Normalized similarity between the query and a single candidate patch
/// already resized to the query side: the logistic of the mean correlation
/// plus the learnable bias.
pub fn score_pair(
    query_feats: &Tensor3,
    candidate_patch: &ImagePatch,
    extractor: &FeatureExtractorSpec,
    params: &ProjectionParams,
) -> Result<f64> {
    let cand = extract(candidate_patch, extractor)?;
    if cand.height() != query_feats.height() || cand.width() != query_feats.width() {
        return Err(Error::Shape(format!(
            "candidate features {}x{} vs query {}x{}; resize the candidate to the query side first",
            cand.height(),
            cand.width(),
            query_feats.height(),
            query_feats.width()
        )));
    }
    let config = SimilarityConfig {
        query_side: query_feats.height() * STRIDE,
        probe_factor: 1,
        projection: Some(params),
    };
    let map = similarity_map_from_features(query_feats, &cand, &config)?;
    Ok(logistic(map.get(0, 0) + params.bias_logit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_patch(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImagePatch {
        ImagePatch::gray(h, w, (0..h * w).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn map_dims_follow_closed_form() {
        for (l, t, side) in [(32usize, 2usize, 5usize), (64, 2, 9), (32, 3, 9), (64, 1, 1)] {
            let cfg = SimilarityConfig::fixed(l, t);
            assert_eq!(cfg.map_side(), side, "l={l} t={t}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let extractor = FeatureExtractorSpec::default();
        let query = extract(&noise_patch(&mut rng, 32, 32), &extractor).unwrap();
        let probe = noise_patch(&mut rng, 64, 64);
        let cfg = SimilarityConfig::fixed(32, 2);
        let map = similarity_map(&query, &probe, &extractor, &cfg).unwrap();
        assert_eq!((map.height(), map.width()), (5, 5));
    }

    #[test]
    fn planted_query_peaks_at_center_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let extractor = FeatureExtractorSpec::default();
        let q = noise_patch(&mut rng, 32, 32);
        // probe: flat background with q planted dead center
        let mut data = ImagePatch::filled(64, 64, 128).data().to_vec();
        for y in 0..32 {
            for x in 0..32 {
                data[(y + 16) * 64 + (x + 16)] = q.sample(y, x, 0);
            }
        }
        let probe = ImagePatch::gray(64, 64, data).unwrap();
        let query_feats = extract(&q, &extractor).unwrap();
        let cfg = SimilarityConfig::fixed(32, 2);
        let map = similarity_map(&query_feats, &probe, &extractor, &cfg).unwrap();
        let (r, c, _) = map.argmax();
        assert_eq!((r, c), (2, 2));
    }

    #[test]
    fn identity_projection_slot_does_not_change_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let extractor = FeatureExtractorSpec::default();
        let query = extract(&noise_patch(&mut rng, 32, 32), &extractor).unwrap();
        let probe = noise_patch(&mut rng, 64, 64);
        let id = ProjectionParams::identity(8);
        let fixed = SimilarityConfig::fixed(32, 2);
        let live = SimilarityConfig {
            query_side: 32,
            probe_factor: 2,
            projection: Some(&id),
        };
        let a = similarity_map(&query, &probe, &extractor, &fixed).unwrap();
        let b = similarity_map(&query, &probe, &extractor, &live).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn argmax_invariant_under_query_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let extractor = FeatureExtractorSpec::default();
        let query = extract(&noise_patch(&mut rng, 32, 32), &extractor).unwrap();
        let probe = noise_patch(&mut rng, 64, 64);
        let cfg = SimilarityConfig::fixed(32, 2);
        let base = similarity_map(&query, &probe, &extractor, &cfg).unwrap();
        let scaled_query = Tensor3::new(
            query.height(),
            query.width(),
            query.channels(),
            query.data().iter().map(|v| v * 3.7).collect(),
        )
        .unwrap();
        let scaled = similarity_map_from_features(
            &scaled_query,
            &extract(&probe, &extractor).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(base.argmax().0, scaled.argmax().0);
        assert_eq!(base.argmax().1, scaled.argmax().1);
        for (a, b) in base.data().iter().zip(scaled.data()) {
            assert!((a * 3.7 - b).abs() < 1e-9);
        }
    }

    #[test]
    fn central_cell_maps_to_probe_center() {
        let cfg = SimilarityConfig::fixed(32, 2);
        let region = BoundingBox::new(100.0, 80.0, 40.0, 24.0).unwrap();
        let b = map_cell_to_box((2, 2), &region, &cfg).unwrap();
        assert!((b.cx - 100.0).abs() < 1e-9);
        assert!((b.cy - 80.0).abs() < 1e-9);
        assert!((b.w - 32.0 * 40.0 / 64.0).abs() < 1e-9);
        assert!((b.h - 32.0 * 24.0 / 64.0).abs() < 1e-9);
    }

    #[test]
    fn cell_zero_is_top_left_anchored() {
        let cfg = SimilarityConfig::fixed(32, 2);
        let region = BoundingBox::new(0.0, 0.0, 64.0, 64.0).unwrap();
        let b = map_cell_to_box((0, 0), &region, &cfg).unwrap();
        // region spans [-32,32): anchor at left+16 px
        assert!((b.cx - (-16.0)).abs() < 1e-9);
        assert!((b.cy - (-16.0)).abs() < 1e-9);
        assert!(map_cell_to_box((5, 0), &region, &cfg).is_err());
    }

    #[test]
    fn cell_round_trip_recovers_known_box() {
        // build the probe region around a known box at scale 1, map the
        // central cell back, check the overlap
        let target = BoundingBox::new(50.0, 40.0, 20.0, 20.0).unwrap();
        let cfg = SimilarityConfig::fixed(32, 2);
        let region = BoundingBox::new(target.cx, target.cy, 40.0, 40.0).unwrap();
        let back = map_cell_to_box((2, 2), &region, &cfg).unwrap();
        let iou = crate::evaluation::iou(&back, &target).unwrap();
        assert!(iou > 0.9, "iou = {iou}");
    }

    #[test]
    fn score_pair_is_logistic_of_raw() {
        // identical constant patches have all-zero normalized features,
        // hence zero raw correlation
        let extractor = FeatureExtractorSpec::default();
        let q = extract(&ImagePatch::filled(32, 32, 60), &extractor).unwrap();
        let id = ProjectionParams::identity(8);
        let s = score_pair(&q, &ImagePatch::filled(32, 32, 60), &extractor, &id).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn logistic_limits_and_monotonicity() {
        assert!((logistic(0.0) - 0.5).abs() < 1e-15);
        assert!(logistic(40.0) > 1.0 - 1e-12);
        assert!(logistic(-40.0) < 1e-12);
        let mut prev = f64::NEG_INFINITY;
        for i in -50..=50 {
            let v = logistic(i as f64 * 0.2);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn self_similarity_beats_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let extractor = FeatureExtractorSpec::default();
        let id = ProjectionParams::identity(8);
        let mut wins = 0;
        for _ in 0..100 {
            let q = noise_patch(&mut rng, 32, 32);
            let other = noise_patch(&mut rng, 32, 32);
            let qf = extract(&q, &extractor).unwrap();
            let self_score = score_pair(&qf, &q, &extractor, &id).unwrap();
            let other_score = score_pair(&qf, &other, &extractor, &id).unwrap();
            if self_score >= other_score {
                wins += 1;
            }
        }
        assert!(wins >= 95, "only {wins}/100 wins");
    }
}
