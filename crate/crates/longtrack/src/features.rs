//! The branch network of the similarity function: a hand-crafted channel
//! feature extractor with total stride 8, plus the learnable linear channel
//! projection that forms the updatable part of the stage-2 similarity.
//!
//! Images are 8-bit until feature extraction; everything downstream is f64.

use crate::numerics::Tensor3;
use crate::{BoundingBox, Error, Result};

/// 8-bit image patch, grayscale (1 channel) or RGB (3 channels),
/// row-major with the channel index fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePatch {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImagePatch {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Invalid(format!(
                "image patches are grayscale or RGB, got {channels} channels"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "patch data length {} does not match {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        Ok(ImagePatch {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn gray(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        ImagePatch::new(height, width, 1, data)
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        ImagePatch {
            height,
            width,
            channels: 1,
            data: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn sample(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// ITU-R 601 luma: `0.299 R + 0.587 G + 0.114 B`, rounded half up.
    /// Grayscale patches are returned unchanged.
    pub fn to_gray(&self) -> ImagePatch {
        if self.channels == 1 {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.height * self.width);
        for px in self.data.chunks_exact(3) {
            let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            out.push(y.round().min(255.0) as u8);
        }
        ImagePatch {
            height: self.height,
            width: self.width,
            channels: 1,
            data: out,
        }
    }

    /// Mean of each channel, used as the out-of-frame fill value.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0f64; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (s, v) in sums.iter_mut().zip(px) {
                *s += *v as f64;
            }
        }
        let n = (self.height * self.width) as f64;
        sums.iter_mut().for_each(|s| *s /= n);
        sums
    }
}

/// Extracts the rectangle covered by `region` from `frame`; pixels outside
/// the frame are filled with the frame's per-channel mean intensity. The
/// region is rasterized by rounding its corners half away from zero.
pub fn crop_with_padding(frame: &ImagePatch, region: &BoundingBox) -> Result<ImagePatch> {
    region.validate()?;
    let (left, top, _, _) = region.corners();
    let x0 = left.round() as i64;
    let y0 = top.round() as i64;
    let w = (region.w.round() as i64).max(1) as usize;
    let h = (region.h.round() as i64).max(1) as usize;
    let fill: Vec<u8> = frame
        .channel_means()
        .iter()
        .map(|m| m.round().min(255.0) as u8)
        .collect();

    let c = frame.channels;
    let mut data = Vec::with_capacity(h * w * c);
    for dy in 0..h as i64 {
        for dx in 0..w as i64 {
            let sy = y0 + dy;
            let sx = x0 + dx;
            if sy >= 0 && sy < frame.height as i64 && sx >= 0 && sx < frame.width as i64 {
                let base = ((sy as usize) * frame.width + sx as usize) * c;
                data.extend_from_slice(&frame.data[base..base + c]);
            } else {
                data.extend_from_slice(&fill);
            }
        }
    }
    ImagePatch::new(h, w, c, data)
}

/// Bilinear resize with corner-aligned sampling. Output samples are rounded
/// half away from zero back to 8 bits so results are bit-reproducible.
pub fn resize_bilinear(patch: &ImagePatch, out_h: usize, out_w: usize) -> Result<ImagePatch> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Invalid("resize target must be at least 1x1".into()));
    }
    if out_h == patch.height && out_w == patch.width {
        return Ok(patch.clone());
    }
    let src_pos = |out: usize, out_len: usize, src_len: usize| -> f64 {
        if out_len == 1 {
            (src_len - 1) as f64 / 2.0
        } else {
            out as f64 * (src_len - 1) as f64 / (out_len - 1) as f64
        }
    };
    let c = patch.channels;
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for oy in 0..out_h {
        let fy = src_pos(oy, out_h, patch.height);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(patch.height - 1);
        let ty = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = src_pos(ox, out_w, patch.width);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(patch.width - 1);
            let tx = fx - x0 as f64;
            for ch in 0..c {
                let p00 = patch.sample(y0, x0, ch) as f64;
                let p01 = patch.sample(y0, x1, ch) as f64;
                let p10 = patch.sample(y1, x0, ch) as f64;
                let p11 = patch.sample(y1, x1, ch) as f64;
                let top = p00 + (p01 - p00) * tx;
                let bot = p10 + (p11 - p10) * tx;
                let v = top + (bot - top) * ty;
                data.push(v.round().min(255.0) as u8);
            }
        }
    }
    ImagePatch::new(out_h, out_w, c, data)
}

/// Per-channel fill values matching [`crop_with_padding`]'s rasterized mean.
pub fn padding_fill(frame: &ImagePatch) -> Vec<u8> {
    frame
        .channel_means()
        .iter()
        .map(|m| m.round().min(255.0) as u8)
        .collect()
}

/// Fused [`crop_with_padding`] + [`resize_bilinear`]: samples the output
/// directly from the frame without materializing the intermediate crop.
/// Bit-identical to the two-step path (same rasterization, same sampling
/// positions, same rounding); it exists because probe regions can be much
/// larger than the resized output.
pub fn crop_resize(
    frame: &ImagePatch,
    region: &BoundingBox,
    out_h: usize,
    out_w: usize,
) -> Result<ImagePatch> {
    crop_resize_filled(frame, &padding_fill(frame), region, out_h, out_w)
}

/// As [`crop_resize`] with the frame's fill values precomputed once, so
/// batched probe evaluations do not rescan the frame per region.
pub fn crop_resize_filled(
    frame: &ImagePatch,
    fill: &[u8],
    region: &BoundingBox,
    out_h: usize,
    out_w: usize,
) -> Result<ImagePatch> {
    region.validate()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::Invalid("resize target must be at least 1x1".into()));
    }
    let (left, top, _, _) = region.corners();
    let x0 = left.round() as i64;
    let y0 = top.round() as i64;
    let w = (region.w.round() as i64).max(1) as usize;
    let h = (region.h.round() as i64).max(1) as usize;

    let c = frame.channels;
    let src_pos = |out: usize, out_len: usize, src_len: usize| -> f64 {
        if out_len == 1 {
            (src_len - 1) as f64 / 2.0
        } else {
            out as f64 * (src_len - 1) as f64 / (out_len - 1) as f64
        }
    };
    let xs: Vec<(i64, i64, f64)> = (0..out_w)
        .map(|ox| {
            let fx = src_pos(ox, out_w, w);
            let x0c = fx.floor() as usize;
            let x1c = (x0c + 1).min(w - 1);
            (x0c as i64, x1c as i64, fx - x0c as f64)
        })
        .collect();

    // if every sampled crop coordinate lands inside the frame, skip the
    // per-sample boundary test
    let inside = x0 >= 0
        && y0 >= 0
        && x0 + w as i64 <= frame.width as i64
        && y0 + h as i64 <= frame.height as i64;

    let mut data = Vec::with_capacity(out_h * out_w * c);
    for oy in 0..out_h {
        let fy = src_pos(oy, out_h, h);
        let y0c = fy.floor() as usize;
        let y1c = (y0c + 1).min(h - 1);
        let ty = fy - y0c as f64;
        if inside {
            let row0 = ((y0 + y0c as i64) as usize) * frame.width;
            let row1 = ((y0 + y1c as i64) as usize) * frame.width;
            for &(x0c, x1c, tx) in &xs {
                let ax = (x0 + x0c) as usize;
                let bx = (x0 + x1c) as usize;
                for ch in 0..c {
                    let p00 = frame.data[(row0 + ax) * c + ch] as f64;
                    let p01 = frame.data[(row0 + bx) * c + ch] as f64;
                    let p10 = frame.data[(row1 + ax) * c + ch] as f64;
                    let p11 = frame.data[(row1 + bx) * c + ch] as f64;
                    let top_v = p00 + (p01 - p00) * tx;
                    let bot_v = p10 + (p11 - p10) * tx;
                    let v = top_v + (bot_v - top_v) * ty;
                    data.push(v.round().min(255.0) as u8);
                }
            }
        } else {
            let sample = |cy: usize, cx: i64, ch: usize| -> f64 {
                let sy = y0 + cy as i64;
                let sx = x0 + cx;
                if sy >= 0 && sy < frame.height as i64 && sx >= 0 && sx < frame.width as i64 {
                    frame.data[((sy as usize) * frame.width + sx as usize) * c + ch] as f64
                } else {
                    fill[ch] as f64
                }
            };
            for &(x0c, x1c, tx) in &xs {
                for ch in 0..c {
                    let p00 = sample(y0c, x0c, ch);
                    let p01 = sample(y0c, x1c, ch);
                    let p10 = sample(y1c, x0c, ch);
                    let p11 = sample(y1c, x1c, ch);
                    let top_v = p00 + (p01 - p00) * tx;
                    let bot_v = p10 + (p11 - p10) * tx;
                    let v = top_v + (bot_v - top_v) * ty;
                    data.push(v.round().min(255.0) as u8);
                }
            }
        }
    }
    ImagePatch::new(out_h, out_w, c, data)
}

/// Layout of the hand-crafted channel features: one intensity channel, one
/// gradient-magnitude channel and `orientation_bins` unsigned-orientation
/// histogram channels, aggregated over `cell_size` x `cell_size` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureExtractorSpec {
    pub cell_size: usize,
    pub orientation_bins: usize,
    /// Per-patch zero-mean unit-variance normalization per channel.
    pub normalize: bool,
}

impl Default for FeatureExtractorSpec {
    fn default() -> Self {
        FeatureExtractorSpec {
            cell_size: 8,
            orientation_bins: 6,
            normalize: true,
        }
    }
}

impl FeatureExtractorSpec {
    pub fn channels(&self) -> usize {
        2 + self.orientation_bins
    }
}

/// Extracts cell features from `patch`: output dims are
/// `floor(h/cell) x floor(w/cell) x channels()`.
pub fn extract(patch: &ImagePatch, spec: &FeatureExtractorSpec) -> Result<Tensor3> {
    let cell = spec.cell_size;
    if patch.height < cell || patch.width < cell {
        return Err(Error::Invalid(format!(
            "patch {}x{} smaller than one {}x{} cell",
            patch.height, patch.width, cell, cell
        )));
    }
    let owned_gray;
    let gray_data: &[u8] = if patch.channels == 1 {
        &patch.data
    } else {
        owned_gray = patch.to_gray();
        // keep the owned buffer alive for the borrow below
        &owned_gray.data
    };
    let h = patch.height;
    let w = patch.width;

    let cells_h = h / cell;
    let cells_w = w / cell;
    let nbins = spec.orientation_bins;
    let channels = spec.channels();
    let mut data = vec![0.0f64; cells_h * cells_w * channels];
    let cell_n = (cell * cell) as f64;

    // single row-major pass, accumulating straight into the cell grid;
    // gradients are integer u8 differences scaled by 1/(2*255) at the end
    for y in 0..cells_h * cell {
        let row = y * w;
        let row_up = y.saturating_sub(1) * w;
        let row_dn = (y + 1).min(h - 1) * w;
        let cell_row = (y / cell) * cells_w;
        for x in 0..cells_w * cell {
            let base = (cell_row + x / cell) * channels;
            data[base] += gray_data[row + x] as f64;
            let gx = gray_data[row + (x + 1).min(w - 1)] as i32
                - gray_data[row + x.saturating_sub(1)] as i32;
            let gy = gray_data[row_dn + x] as i32 - gray_data[row_up + x] as i32;
            let sq = (gx * gx + gy * gy) as f64;
            if sq > 0.0 {
                let m = sq.sqrt();
                data[base + 1] += m;
                let b = if nbins == 6 {
                    orientation_bin6(gx as f64, gy as f64)
                } else {
                    orientation_bin_general(gx as f64, gy as f64, nbins)
                };
                data[base + 2 + b] += m;
            }
        }
    }
    let intensity_scale = 1.0 / (255.0 * cell_n);
    let grad_scale = 1.0 / (510.0 * cell_n);
    for cell_vals in data.chunks_exact_mut(channels) {
        cell_vals[0] *= intensity_scale;
        for v in &mut cell_vals[1..] {
            *v *= grad_scale;
        }
    }

    let mut out = Tensor3::new(cells_h, cells_w, channels, data)?;
    if spec.normalize {
        normalize_per_channel(&mut out);
    }
    Ok(out)
}

/// Unsigned-orientation bin over six bins of [0, pi), by slope comparison
/// (equivalent to binning atan2 but without the transcendental call).
#[inline]
fn orientation_bin6(gx: f64, gy: f64) -> usize {
    let (gx, gy) = if gy < 0.0 || (gy == 0.0 && gx < 0.0) {
        (-gx, -gy)
    } else {
        (gx, gy)
    };
    const T1: f64 = 0.577_350_269_189_625_7; // tan(pi/6)
    const T2: f64 = 1.732_050_807_568_877_2; // tan(2pi/6)
    if gx > 0.0 {
        if gy < gx * T1 {
            0
        } else if gy < gx * T2 {
            1
        } else {
            2
        }
    } else if gx == 0.0 {
        3
    } else {
        let ax = -gx;
        if gy <= ax * T1 {
            5
        } else if gy <= ax * T2 {
            4
        } else {
            3
        }
    }
}

fn orientation_bin_general(gx: f64, gy: f64, nbins: usize) -> usize {
    let mut theta = gy.atan2(gx);
    if theta < 0.0 {
        theta += std::f64::consts::PI;
    }
    if theta >= std::f64::consts::PI {
        theta = 0.0;
    }
    (((theta / std::f64::consts::PI) * nbins as f64) as usize).min(nbins - 1)
}

// Floor on the per-channel standard deviation (in 0..1 intensity units).
// Without it a near-constant patch divides by its quantization noise and a
// flat probe region turns into a spuriously strong match.
const NORM_STD_FLOOR: f64 = 0.02;

fn normalize_per_channel(t: &mut Tensor3) {
    let (h, w, c) = (t.height(), t.width(), t.channels());
    let n = (h * w) as f64;
    for ch in 0..c {
        let mut sum = 0.0;
        let mut sq = 0.0;
        for i in 0..h {
            for j in 0..w {
                let v = t.get(i, j, ch);
                sum += v;
                sq += v * v;
            }
        }
        let mean = sum / n;
        let var = (sq / n - mean * mean).max(0.0);
        let inv = 1.0 / var.sqrt().max(NORM_STD_FLOOR);
        for i in 0..h {
            for j in 0..w {
                t.set(i, j, ch, (t.get(i, j, ch) - mean) * inv);
            }
        }
    }
}

/// Learnable per-position channel mixing plus the score-normalization bias.
/// This is the only part of the similarity function that online updates may
/// change; it starts as the identity so that, before any update, the
/// stage-2 similarity equals the fixed similarity used by stages 1 and 3.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionParams {
    c_out: usize,
    c_in: usize,
    /// Row-major `c_out x c_in`.
    weight: Vec<f64>,
    pub bias_logit: f64,
}

impl ProjectionParams {
    pub fn identity(channels: usize) -> Self {
        let mut weight = vec![0.0; channels * channels];
        for i in 0..channels {
            weight[i * channels + i] = 1.0;
        }
        ProjectionParams {
            c_out: channels,
            c_in: channels,
            weight,
            bias_logit: 0.0,
        }
    }

    pub fn from_parts(c_out: usize, c_in: usize, weight: Vec<f64>, bias_logit: f64) -> Result<Self> {
        if weight.len() != c_out * c_in {
            return Err(Error::Shape(format!(
                "projection weight length {} does not match {}x{}",
                weight.len(),
                c_out,
                c_in
            )));
        }
        if weight.iter().any(|v| !v.is_finite()) || !bias_logit.is_finite() {
            return Err(Error::NonFinite("projection parameters".into()));
        }
        Ok(ProjectionParams {
            c_out,
            c_in,
            weight,
            bias_logit,
        })
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }
    pub fn c_out(&self) -> usize {
        self.c_out
    }
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn is_identity(&self) -> bool {
        if self.c_out != self.c_in || self.bias_logit != 0.0 {
            return false;
        }
        self.weight.iter().enumerate().all(|(idx, &v)| {
            let (i, j) = (idx / self.c_in, idx % self.c_in);
            v == if i == j { 1.0 } else { 0.0 }
        })
    }

    /// Flat view `[weight.., bias_logit]` for the update optimizer.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.weight.clone();
        flat.push(self.bias_logit);
        flat
    }

    pub fn from_flat(c_out: usize, c_in: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != c_out * c_in + 1 {
            return Err(Error::Shape(format!(
                "flat projection length {} does not match {}x{}+1",
                flat.len(),
                c_out,
                c_in
            )));
        }
        ProjectionParams::from_parts(
            c_out,
            c_in,
            flat[..c_out * c_in].to_vec(),
            flat[c_out * c_in],
        )
    }
}

/// Per-position channel mixing: `out[i,j,:] = weight * features[i,j,:]`.
pub fn project(features: &Tensor3, params: &ProjectionParams) -> Result<Tensor3> {
    if features.channels() != params.c_in {
        return Err(Error::Shape(format!(
            "projection expects {} channels, features have {}",
            params.c_in,
            features.channels()
        )));
    }
    let (h, w) = (features.height(), features.width());
    let mut out = Tensor3::zeros(h, w, params.c_out);
    for i in 0..h {
        for j in 0..w {
            let f = features.pixel(i, j);
            for o in 0..params.c_out {
                let row = &params.weight[o * params.c_in..(o + 1) * params.c_in];
                let mut acc = 0.0;
                for (wv, fv) in row.iter().zip(f) {
                    acc += wv * fv;
                }
                out.set(i, j, o, acc);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_patch(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImagePatch {
        let data = (0..h * w).map(|_| rng.gen()).collect();
        ImagePatch::gray(h, w, data).unwrap()
    }

    #[test]
    fn extract_shapes_follow_stride_8() {
        let spec = FeatureExtractorSpec::default();
        let p = ImagePatch::filled(32, 32, 100);
        let t = extract(&p, &spec).unwrap();
        assert_eq!((t.height(), t.width(), t.channels()), (4, 4, 8));
        let p = ImagePatch::filled(64, 64, 100);
        let t = extract(&p, &spec).unwrap();
        assert_eq!((t.height(), t.width(), t.channels()), (8, 8, 8));
    }

    #[test]
    fn extract_rejects_sub_cell_patches() {
        let spec = FeatureExtractorSpec::default();
        let p = ImagePatch::filled(7, 32, 0);
        assert!(extract(&p, &spec).is_err());
    }

    #[test]
    fn constant_patch_has_zero_gradient_channels() {
        let spec = FeatureExtractorSpec {
            normalize: false,
            ..Default::default()
        };
        let t = extract(&ImagePatch::filled(32, 32, 77), &spec).unwrap();
        for i in 0..t.height() {
            for j in 0..t.width() {
                for c in 1..t.channels() {
                    assert_eq!(t.get(i, j, c), 0.0);
                }
                assert!((t.get(i, j, 0) - 77.0 / 255.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extract_is_translation_covariant_on_the_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let big = random_patch(&mut rng, 80, 96);
        let spec = FeatureExtractorSpec {
            normalize: false,
            ..Default::default()
        };
        // two 64x64 windows of the same image, 8 px apart horizontally
        let crop = |x0: usize| {
            let mut data = Vec::new();
            for y in 8..72 {
                for x in x0..x0 + 64 {
                    data.push(big.sample(y, x, 0));
                }
            }
            ImagePatch::gray(64, 64, data).unwrap()
        };
        let a = extract(&crop(8), &spec).unwrap();
        let b = extract(&crop(16), &spec).unwrap();
        // interior cells of b sit one cell to the left of a's
        for i in 1..7 {
            for j in 1..6 {
                for c in 0..8 {
                    let va = a.get(i, j + 1, c);
                    let vb = b.get(i, j, c);
                    assert!(
                        (va - vb).abs() < 1e-12,
                        "cell ({i},{j}) ch {c}: {va} vs {vb}"
                    );
                }
            }
        }
    }

    #[test]
    fn projection_identity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f64> = (0..4 * 4 * 8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t = Tensor3::new(4, 4, 8, data).unwrap();
        let id = ProjectionParams::identity(8);
        assert!(id.is_identity());
        let out = project(&t, &id).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn projection_scales_linearly() {
        let t = Tensor3::new(1, 1, 2, vec![1.5, -0.5]).unwrap();
        let two = ProjectionParams::from_parts(2, 2, vec![2.0, 0.0, 0.0, 2.0], 0.0).unwrap();
        let out = project(&t, &two).unwrap();
        assert_eq!(out.data(), &[3.0, -1.0]);
    }

    #[test]
    fn projection_matches_per_position_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let feats = Tensor3::new(
            4,
            4,
            8,
            (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let weight: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let params = ProjectionParams::from_parts(8, 8, weight.clone(), 0.0).unwrap();
        let out = project(&feats, &params).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for o in 0..8 {
                    let mut acc = 0.0;
                    for k in 0..8 {
                        acc += weight[o * 8 + k] * feats.get(i, j, k);
                    }
                    assert!((out.get(i, j, o) - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn crop_inside_frame_is_exact_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let frame = random_patch(&mut rng, 40, 40);
        let region = BoundingBox::new(20.0, 20.0, 10.0, 8.0).unwrap();
        let crop = crop_with_padding(&frame, &region).unwrap();
        assert_eq!((crop.height(), crop.width()), (8, 10));
        for y in 0..8 {
            for x in 0..10 {
                assert_eq!(crop.sample(y, x, 0), frame.sample(16 + y, 15 + x, 0));
            }
        }
    }

    #[test]
    fn crop_fully_outside_is_constant_mean() {
        let frame = ImagePatch::gray(4, 4, (0..16).map(|v| v as u8 * 10).collect()).unwrap();
        let mean = frame.channel_means()[0].round() as u8;
        let region = BoundingBox::new(100.0, 100.0, 6.0, 6.0).unwrap();
        let crop = crop_with_padding(&frame, &region).unwrap();
        assert!(crop.data().iter().all(|&v| v == mean));
    }

    #[test]
    fn crop_half_outside_mixes_copy_and_fill() {
        let frame = ImagePatch::filled(10, 10, 200);
        // region spanning x in [-5, 5): left half out of frame
        let region = BoundingBox::new(0.0, 5.0, 10.0, 4.0).unwrap();
        let crop = crop_with_padding(&frame, &region).unwrap();
        for y in 0..4 {
            for x in 0..10 {
                let expected = 200; // fill == frame mean == content here
                assert_eq!(crop.sample(y, x, 0), expected);
            }
        }
        // distinguishable content: gradient frame
        let data: Vec<u8> = (0..100).map(|i| (i % 10) as u8 * 20).collect();
        let frame = ImagePatch::gray(10, 10, data).unwrap();
        let mean = frame.channel_means()[0].round() as u8;
        let crop = crop_with_padding(&frame, &region).unwrap();
        for y in 0..4 {
            for x in 0..10 {
                let expected = if x < 5 {
                    mean
                } else {
                    frame.sample(y + 3, x - 5, 0)
                };
                assert_eq!(crop.sample(y, x, 0), expected, "({y},{x})");
            }
        }
    }

    #[test]
    fn crop_rejects_degenerate_region() {
        let frame = ImagePatch::filled(10, 10, 0);
        let bad = BoundingBox {
            cx: 5.0,
            cy: 5.0,
            w: 0.0,
            h: 5.0,
        };
        assert!(crop_with_padding(&frame, &bad).is_err());
    }

    #[test]
    fn resize_to_same_dims_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_patch(&mut rng, 12, 9);
        let q = resize_bilinear(&p, 12, 9).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn resize_checkerboard_center_rounds_half_up() {
        let p = ImagePatch::gray(2, 2, vec![0, 255, 255, 0]).unwrap();
        let q = resize_bilinear(&p, 3, 3).unwrap();
        assert_eq!(q.sample(1, 1, 0), 128);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let p = ImagePatch::filled(16, 16, 93);
        let q = resize_bilinear(&p, 5, 7).unwrap();
        assert!(q.data().iter().all(|&v| v == 93));
    }

    #[test]
    fn gray_conversion_uses_luma_weights() {
        let p = ImagePatch::new(1, 1, 3, vec![100, 200, 50]).unwrap();
        let g = p.to_gray();
        let expected = (0.299 * 100.0 + 0.587 * 200.0 + 0.114 * 50.0f64).round() as u8;
        assert_eq!(g.sample(0, 0, 0), expected);
    }

    #[test]
    fn fused_crop_resize_matches_two_step_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let frame = random_patch(&mut rng, 60, 80);
        for _ in 0..60 {
            let region = BoundingBox::new(
                rng.gen_range(-30.0..110.0),
                rng.gen_range(-30.0..90.0),
                rng.gen_range(1.0..120.0),
                rng.gen_range(1.0..120.0),
            )
            .unwrap();
            let (oh, ow) = (rng.gen_range(1..70), rng.gen_range(1..70));
            let two_step =
                resize_bilinear(&crop_with_padding(&frame, &region).unwrap(), oh, ow).unwrap();
            let fused = crop_resize(&frame, &region, oh, ow).unwrap();
            assert_eq!(fused, two_step, "region {region:?} out {oh}x{ow}");
        }
    }

    #[test]
    fn orientation_bins_match_atan2_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20000 {
            let gx: f64 = rng.gen_range(-1.0..1.0);
            let gy: f64 = rng.gen_range(-1.0..1.0);
            assert_eq!(
                orientation_bin6(gx, gy),
                orientation_bin_general(gx, gy, 6),
                "gx {gx} gy {gy}"
            );
        }
        for (gx, gy, expect) in [
            (1.0, 0.0, 0),
            (-1.0, 0.0, 0),
            (0.0, 1.0, 3),
            (0.0, -1.0, 3),
            (1.0, 1.0, 1),
            (-1.0, 1.0, 4),
        ] {
            assert_eq!(orientation_bin6(gx, gy), expect, "gx {gx} gy {gy}");
        }
    }

    #[test]
    fn crop_then_extract_is_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let frame = random_patch(&mut rng, 30, 30);
        let spec = FeatureExtractorSpec::default();
        for _ in 0..20 {
            let region = BoundingBox::new(
                rng.gen_range(-20.0..50.0),
                rng.gen_range(-20.0..50.0),
                rng.gen_range(8.0..40.0),
                rng.gen_range(8.0..40.0),
            )
            .unwrap();
            let crop = crop_with_padding(&frame, &region).unwrap();
            if crop.height() >= 8 && crop.width() >= 8 {
                let t = extract(&crop, &spec).unwrap();
                assert!(t.is_finite());
            }
        }
    }
}
