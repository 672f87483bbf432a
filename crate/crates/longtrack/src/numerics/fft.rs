//! Minimal iterative radix-2 FFT over `f64` complex values.
//!
//! Lengths are always rounded up to the next power of two by the callers in
//! [`super::xcorr`], so only the radix-2 path exists. The inverse transform
//! is unnormalized; callers divide by the transform length.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    #[inline]
    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    #[inline]
    pub fn conj(self) -> Self {
        Complex {
            re: self.re,
            im: -self.im,
        }
    }

    #[inline]
    pub fn mul(self, other: Complex) -> Complex {
        Complex {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    #[inline]
    pub fn add(self, other: Complex) -> Complex {
        Complex {
            re: self.re + other.re,
            im: self.im + other.im,
        }
    }

    #[inline]
    pub fn sub(self, other: Complex) -> Complex {
        Complex {
            re: self.re - other.re,
            im: self.im - other.im,
        }
    }
}

/// Smallest power of two >= `n` (n >= 1).
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// In-place iterative Cooley-Tukey. `data.len()` must be a power of two.
/// `inverse` flips the twiddle sign; no normalization is applied.
pub fn fft_in_place(data: &mut [Complex], inverse: bool) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let wlen = Complex::new(ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let mut w = Complex::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = data[i + k];
                let v = data[i + k + len / 2].mul(w);
                data[i + k] = u.add(v);
                data[i + k + len / 2] = u.sub(v);
                w = w.mul(wlen);
            }
            i += len;
        }
        len <<= 1;
    }
}

/// Forward 2D FFT over a row-major `h x w` buffer (both powers of two):
/// rows first, then columns.
pub fn fft2d(data: &mut [Complex], h: usize, w: usize, inverse: bool) {
    assert_eq!(data.len(), h * w);
    for row in data.chunks_mut(w) {
        fft_in_place(row, inverse);
    }
    let mut col = vec![Complex::ZERO; h];
    for j in 0..w {
        for i in 0..h {
            col[i] = data[i * w + j];
        }
        fft_in_place(&mut col, inverse);
        for i in 0..h {
            data[i * w + j] = col[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// O(n^2) reference DFT.
    fn dft(input: &[Complex], inverse: bool) -> Vec<Complex> {
        let n = input.len();
        let sign = if inverse { 1.0 } else { -1.0 };
        (0..n)
            .map(|k| {
                let mut acc = Complex::ZERO;
                for (j, x) in input.iter().enumerate() {
                    let ang = sign * 2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                    acc = acc.add(x.mul(Complex::new(ang.cos(), ang.sin())));
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_reference_dft() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for &n in &[1usize, 2, 4, 8, 32, 64] {
            let input: Vec<Complex> = (0..n).map(|_| Complex::new(next(), next())).collect();
            let expected = dft(&input, false);
            let mut got = input.clone();
            fft_in_place(&mut got, false);
            for (a, b) in got.iter().zip(&expected) {
                assert!((a.re - b.re).abs() < 1e-9, "n={n}");
                assert!((a.im - b.im).abs() < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn forward_inverse_round_trip() {
        let n = 64;
        let input: Vec<Complex> = (0..n)
            .map(|i| Complex::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut buf = input.clone();
        fft_in_place(&mut buf, false);
        fft_in_place(&mut buf, true);
        for (a, b) in buf.iter().zip(&input) {
            assert!((a.re / n as f64 - b.re).abs() < 1e-12);
            assert!((a.im / n as f64 - b.im).abs() < 1e-12);
        }
    }
}
