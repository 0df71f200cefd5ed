//! Iterative radix-2 FFT. Transform lengths are powers of two by
//! construction (`StftParams` enforces it), which keeps this generic over the
//! scalar type instead of tying the crate to a concrete-float FFT backend.
//! Twiddle factors are evaluated in f64 and narrowed once.

use num_complex::Complex;

use crate::scalar::{real, Real};

/// In-place forward DFT. Panics if `buf.len()` is not a power of two.
pub fn fft<F: Real>(buf: &mut [Complex<F>]) {
    transform(buf, false);
}

/// In-place inverse DFT including the `1/n` normalization.
pub fn ifft<F: Real>(buf: &mut [Complex<F>]) {
    transform(buf, true);
    let scale = real::<F>(1.0 / buf.len() as f64);
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

fn transform<F: Real>(buf: &mut [Complex<F>], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let half = len / 2;
        let twiddles: Vec<Complex<F>> = (0..half)
            .map(|k| {
                let a = ang * k as f64;
                Complex::new(real::<F>(a.cos()), real::<F>(a.sin()))
            })
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let even = buf[start + k];
                let odd = buf[start + k + half] * twiddles[k];
                buf[start + k] = even + odd;
                buf[start + k + half] = even - odd;
            }
        }
        len <<= 1;
    }
}
