//! Valid-mode 2D cross-correlation of `Tensor3`s, summed over channels.
//!
//! Two routes with the same contract: a direct triple loop and an FFT route
//! (zero-padded to the next power of two per axis, conjugate multiplication
//! per channel, channel summation). The FFT route exists purely for speed;
//! the direct route is the reference.

use super::fft::{fft2d, next_pow2, Complex};
use super::{Grid2, Tensor3};
use crate::{Error, Result};

fn check_shapes(query: &Tensor3, probe: &Tensor3) -> Result<(usize, usize)> {
    if query.channels() != probe.channels()
        || query.height() > probe.height()
        || query.width() > probe.width()
    {
        return Err(Error::Shape(format!(
            "cross-correlation needs query <= probe with equal channels, got query {}x{}x{} vs probe {}x{}x{}",
            query.height(),
            query.width(),
            query.channels(),
            probe.height(),
            probe.width(),
            probe.channels()
        )));
    }
    Ok((
        probe.height() - query.height() + 1,
        probe.width() - query.width() + 1,
    ))
}

/// Direct sum: `out[i,j] = sum_{a,b,c} query[a,b,c] * probe[i+a, j+b, c]`.
pub fn xcorr_valid(query: &Tensor3, probe: &Tensor3) -> Result<Grid2> {
    let (out_h, out_w) = check_shapes(query, probe)?;
    let c = query.channels();
    let mut out = Grid2::zeros(out_h, out_w);
    for i in 0..out_h {
        for j in 0..out_w {
            let mut acc = 0.0;
            for a in 0..query.height() {
                for b in 0..query.width() {
                    let q = query.pixel(a, b);
                    let p = probe.pixel(i + a, j + b);
                    for k in 0..c {
                        acc += q[k] * p[k];
                    }
                }
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// FFT route; mathematically identical to [`xcorr_valid`] up to rounding.
pub fn xcorr_valid_fft(query: &Tensor3, probe: &Tensor3) -> Result<Grid2> {
    let (out_h, out_w) = check_shapes(query, probe)?;
    let sh = next_pow2(probe.height());
    let sw = next_pow2(probe.width());
    let n = sh * sw;

    let mut acc = vec![Complex::ZERO; n];
    let mut qbuf = vec![Complex::ZERO; n];
    let mut pbuf = vec![Complex::ZERO; n];

    for ch in 0..query.channels() {
        for v in qbuf.iter_mut() {
            *v = Complex::ZERO;
        }
        for v in pbuf.iter_mut() {
            *v = Complex::ZERO;
        }
        for i in 0..query.height() {
            for j in 0..query.width() {
                qbuf[i * sw + j] = Complex::new(query.get(i, j, ch), 0.0);
            }
        }
        for i in 0..probe.height() {
            for j in 0..probe.width() {
                pbuf[i * sw + j] = Complex::new(probe.get(i, j, ch), 0.0);
            }
        }
        fft2d(&mut qbuf, sh, sw, false);
        fft2d(&mut pbuf, sh, sw, false);
        for (a, (q, p)) in acc.iter_mut().zip(qbuf.iter().zip(&pbuf)) {
            *a = a.add(q.conj().mul(*p));
        }
    }

    fft2d(&mut acc, sh, sw, true);
    let scale = 1.0 / n as f64;
    let mut out = Grid2::zeros(out_h, out_w);
    for i in 0..out_h {
        for j in 0..out_w {
            out.set(i, j, acc[i * sw + j].re * scale);
        }
    }
    Ok(out)
}

/// Real multiplications performed by the direct route. The triple loop does
/// exactly one multiply per (output cell, query element) pair.
pub fn mult_count_direct(query: &Tensor3, probe: &Tensor3) -> u64 {
    let out_h = (probe.height() - query.height() + 1) as u64;
    let out_w = (probe.width() - query.width() + 1) as u64;
    out_h * out_w * (query.height() * query.width() * query.channels()) as u64
}

/// Real multiplications performed by the FFT route. The radix-2 transform of
/// length `n` does `n * log2(n)` complex multiplies (one butterfly and one
/// twiddle update per inner iteration); a 2D transform over `h x w` does
/// `h*w*log2(h*w)`. Per channel: two forward transforms plus the pointwise
/// conjugate product; one inverse transform and the output scaling close it
/// out. One complex multiply is four real multiplies.
pub fn mult_count_fft(query: &Tensor3, probe: &Tensor3) -> u64 {
    let sh = next_pow2(probe.height()) as u64;
    let sw = next_pow2(probe.width()) as u64;
    let n = sh * sw;
    let log2n = n.trailing_zeros() as u64;
    let per_2d = n * log2n; // complex mults per 2D transform
    let c = query.channels() as u64;
    let complex = c * (2 * per_2d + n) + per_2d;
    let out_h = (probe.height() - query.height() + 1) as u64;
    let out_w = (probe.width() - query.width() + 1) as u64;
    4 * complex + out_h * out_w
}
