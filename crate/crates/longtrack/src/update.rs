//! Self-aware model update: after an approved global search, the final
//! prediction becomes the positive pair and non-overlapping candidates from
//! the other probe regions become hard negatives; the stage-2 projection is
//! then fine-tuned by binary cross entropy with SGD momentum. Stages 1 and
//! 3 are never touched.

use serde::{Deserialize, Serialize};

use crate::features::{
    crop_resize_filled, extract, padding_fill, FeatureExtractorSpec, ImagePatch, ProjectionParams,
};
use crate::numerics::{sgd_momentum_step, SgdMomentumState, Tensor3};
use crate::search::{SearchMode, Stage2Outcome, TrackerState};
use crate::similarity::logistic;
use crate::{BoundingBox, Error, Result};

/// When to fine-tune the stage-2 similarity. Updates only ever happen on
/// global-search frames, in every mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Never update (the conservative baseline).
    None,
    /// Update on every global-search frame.
    Blind,
    /// Update when the predicted score exceeds the similarity threshold.
    SimThresh,
    /// Update when the self-evaluation module approves.
    SelfAware,
}

impl std::str::FromStr for UpdateMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(UpdateMode::None),
            "blind" => Ok(UpdateMode::Blind),
            "simthresh" => Ok(UpdateMode::SimThresh),
            "selfaware" => Ok(UpdateMode::SelfAware),
            other => Err(Error::Config(format!(
                "unknown update mode {other:?} (none|blind|simthresh|selfaware)"
            ))),
        }
    }
}

impl std::fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UpdateMode::None => "none",
            UpdateMode::Blind => "blind",
            UpdateMode::SimThresh => "simthresh",
            UpdateMode::SelfAware => "selfaware",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdatePolicy {
    pub mode: UpdateMode,
    pub sim_threshold: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub iterations: usize,
    pub max_negatives: usize,
}

impl Default for UpdatePolicy {
    fn default() -> Self {
        UpdatePolicy {
            mode: UpdateMode::SelfAware,
            sim_threshold: 0.5,
            learning_rate: 0.01,
            momentum: 0.9,
            iterations: 10,
            max_negatives: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSource {
    FinalPrediction,
    Stage2Candidate,
}

/// One training pair for the stage-2 fine-tune; the patch is already at the
/// stage-2 query resolution.
#[derive(Debug, Clone)]
pub struct UpdatePair {
    pub patch: ImagePatch,
    pub label: bool,
    pub source: PairSource,
}

/// Whether an update may run this frame. `selfeval_result` is the module's
/// verdict when available; scores compare strictly against the threshold.
pub fn gate(
    policy: &UpdatePolicy,
    search_mode: SearchMode,
    selfeval_result: Option<bool>,
    predicted_score: f64,
) -> bool {
    if search_mode != SearchMode::Global {
        return false;
    }
    match policy.mode {
        UpdateMode::None => false,
        UpdateMode::Blind => true,
        UpdateMode::SimThresh => predicted_score > policy.sim_threshold,
        UpdateMode::SelfAware => selfeval_result == Some(true),
    }
}

/// Builds the update set: one positive (the final predicted patch) plus
/// hard negatives drawn from probe regions other than the winning
/// location's, excluding anything that overlaps the final prediction at
/// all. Negatives are capped hardest-first (highest raw score).
pub fn build_pairs(
    final_box: &BoundingBox,
    stage2: &Stage2Outcome,
    frame: &ImagePatch,
    query_side: usize,
    policy: &UpdatePolicy,
) -> Result<Vec<UpdatePair>> {
    let fill = padding_fill(frame);
    let crop_resized = |bbox: &BoundingBox| -> Result<ImagePatch> {
        crop_resize_filled(frame, &fill, bbox, query_side, query_side)
    };

    let mut pairs = vec![UpdatePair {
        patch: crop_resized(final_box)?,
        label: true,
        source: PairSource::FinalPrediction,
    }];

    let mut negatives: Vec<(usize, f64, &BoundingBox)> = stage2
        .candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.location_index != stage2.winning_location)
        .filter(|(_, c)| c.bbox.intersection_area(final_box) <= 0.0)
        .map(|(idx, c)| (idx, c.raw_score, &c.bbox))
        .collect();
    negatives.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    negatives.truncate(policy.max_negatives);

    for (_, _, bbox) in negatives {
        pairs.push(UpdatePair {
            patch: crop_resized(bbox)?,
            label: false,
            source: PairSource::Stage2Candidate,
        });
    }
    Ok(pairs)
}

/// Per-pair sufficient statistics: `raw = tr(W^T W A) / n + bias` where
/// `A[a][b] = sum_pos cand[a] * query[b]` over feature positions.
struct PairStats {
    a: Vec<f64>,
    label: f64,
}

fn pair_stats(
    query_feats: &Tensor3,
    pairs: &[UpdatePair],
    extractor: &FeatureExtractorSpec,
) -> Result<(Vec<PairStats>, usize, f64)> {
    let c = query_feats.channels();
    let n_elem = (query_feats.height() * query_feats.width() * c) as f64;
    let mut stats = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let cand = extract(&pair.patch, extractor)?;
        if cand.height() != query_feats.height() || cand.width() != query_feats.width() {
            return Err(Error::Shape(format!(
                "pair features {}x{} vs query {}x{}",
                cand.height(),
                cand.width(),
                query_feats.height(),
                query_feats.width()
            )));
        }
        let mut a = vec![0.0f64; c * c];
        for i in 0..query_feats.height() {
            for j in 0..query_feats.width() {
                let q = query_feats.pixel(i, j);
                let cd = cand.pixel(i, j);
                for (ai, cv) in cd.iter().enumerate() {
                    let row = &mut a[ai * c..(ai + 1) * c];
                    for (av, qv) in row.iter_mut().zip(q) {
                        *av += cv * qv;
                    }
                }
            }
        }
        stats.push(PairStats {
            a,
            label: if pair.label { 1.0 } else { 0.0 },
        });
    }
    Ok((stats, c, n_elem))
}

fn stats_loss_grad(
    stats: &[PairStats],
    c: usize,
    n_elem: f64,
    flat: &[f64],
) -> (f64, Vec<f64>) {
    let m = stats.len() as f64;
    let weight = &flat[..c * c];
    let bias = flat[c * c];
    let mut loss = 0.0;
    let mut grad = vec![0.0f64; flat.len()];
    for st in stats {
        // raw = sum_{o,a,b} W[o][a] W[o][b] A[a][b] / n
        let mut wa = vec![0.0f64; c * c]; // (W A)[o][b] with A indexed [a][b]
        for o in 0..c {
            let wrow = &weight[o * c..(o + 1) * c];
            for b in 0..c {
                let mut acc = 0.0;
                for (a, wv) in wrow.iter().enumerate() {
                    acc += wv * st.a[a * c + b];
                }
                wa[o * c + b] = acc;
            }
        }
        let mut raw = 0.0;
        for o in 0..c {
            for b in 0..c {
                raw += weight[o * c + b] * wa[o * c + b];
            }
        }
        raw /= n_elem;
        let s = logistic(raw + bias);
        let s_cl = s.clamp(1e-7, 1.0 - 1e-7);
        loss -= if st.label > 0.5 {
            s_cl.ln()
        } else {
            (1.0 - s_cl).ln()
        };
        let d_raw = (s - st.label) / m;
        grad[c * c] += s - st.label;
        // dRaw/dW[o][c'] = sum_b W[o][b] (A[c'][b] + A[b][c']) / n
        for o in 0..c {
            let wrow = &weight[o * c..(o + 1) * c];
            for cc in 0..c {
                let mut acc = 0.0;
                for (b, wv) in wrow.iter().enumerate() {
                    acc += wv * (st.a[cc * c + b] + st.a[b * c + cc]);
                }
                grad[o * c + cc] += d_raw * acc / n_elem;
            }
        }
    }
    grad[c * c] /= m;
    (loss / m, grad)
}

/// The update objective over explicit pairs at given flat parameters
/// `[weight.., bias]`; exposed for gradient verification.
pub fn pair_objective(
    query_feats: &Tensor3,
    pairs: &[UpdatePair],
    extractor: &FeatureExtractorSpec,
    flat: &[f64],
) -> Result<f64> {
    let (stats, c, n_elem) = pair_stats(query_feats, pairs, extractor)?;
    Ok(stats_loss_grad(&stats, c, n_elem, flat).0)
}

/// Analytic gradient of [`pair_objective`]; returns `(loss, gradient)`.
pub fn pair_gradient(
    query_feats: &Tensor3,
    pairs: &[UpdatePair],
    extractor: &FeatureExtractorSpec,
    flat: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (stats, c, n_elem) = pair_stats(query_feats, pairs, extractor)?;
    Ok(stats_loss_grad(&stats, c, n_elem, flat))
}

#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub params: ProjectionParams,
    /// False when the update was aborted (non-finite loss) or a no-op.
    pub applied: bool,
    pub final_loss: f64,
}

/// Runs the configured number of SGD-momentum iterations on the pair loss
/// and returns new stage-2 parameters. Query features and the stage-1/3
/// similarity functions are untouched. A non-finite loss aborts the whole
/// update and keeps the previous parameters.
pub fn apply_update(
    state: &TrackerState,
    pairs: &[UpdatePair],
    extractor: &FeatureExtractorSpec,
    policy: &UpdatePolicy,
) -> Result<UpdateOutcome> {
    if pairs.is_empty() {
        return Err(Error::Invalid("update needs at least one pair".into()));
    }
    let current = state.stage2_params.clone();
    if policy.learning_rate == 0.0 || policy.iterations == 0 {
        return Ok(UpdateOutcome {
            params: current,
            applied: false,
            final_loss: f64::NAN,
        });
    }

    let query = state.query_feats_32();
    let (stats, c, n_elem) = pair_stats(query, pairs, extractor)?;
    let mut flat = current.to_flat();
    let mut opt = SgdMomentumState::new(flat.len(), policy.learning_rate, policy.momentum)?;
    let mut last_loss = 0.0;
    for _ in 0..policy.iterations {
        let (loss, mut grad) = stats_loss_grad(&stats, c, n_elem, &flat);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Ok(UpdateOutcome {
                params: current,
                applied: false,
                final_loss: loss,
            });
        }
        // only the channel mixing adapts online: with one positive against
        // up to max_negatives negatives, a free bias soaks the entire BCE
        // signal and the ranking never changes
        grad[c * c] = 0.0;
        sgd_momentum_step(&mut flat, &grad, &mut opt)?;
        // candidate ranking is invariant to the weight's overall scale, so
        // the scale is a gauge; pinning ||W||_F removes the degenerate
        // shrink-everything direction the negative-heavy BCE favors (W = 0
        // is a saddle of the W^T W parameterization)
        let norm = flat[..c * c].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let scale = (c as f64).sqrt() / norm;
            for v in &mut flat[..c * c] {
                *v *= scale;
            }
        }
        last_loss = loss;
    }
    if flat.iter().any(|v| !v.is_finite()) {
        return Ok(UpdateOutcome {
            params: current,
            applied: false,
            final_loss: last_loss,
        });
    }
    Ok(UpdateOutcome {
        params: ProjectionParams::from_flat(c, c, &flat)?,
        applied: true,
        final_loss: last_loss,
    })
}
