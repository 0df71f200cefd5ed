//! Slow, obviously-correct reference implementations. The test suites check
//! the fast paths against these; nothing in here shares code with the
//! implementations under test.

use num_complex::Complex;

use crate::dsp::{AudioClip, StftParams};
use crate::mat::Mat;

/// Textbook O(n^2) DFT.
pub fn naive_dft(input: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let n = input.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex::new(0.0, 0.0);
            for (t, &x) in input.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                acc += x * Complex::new(ang.cos(), ang.sin());
            }
            acc
        })
        .collect()
}

/// STFT magnitudes computed frame by frame with the naive DFT.
pub fn naive_stft_magnitudes(clip: &AudioClip<f64>, params: &StftParams<f64>) -> Mat<f64> {
    let n_frames = params.n_frames(clip.len()).expect("clip long enough");
    let n_bins = params.n_bins();
    let mut out = Mat::zeros(n_bins, n_frames);
    for t in 0..n_frames {
        let start = t * params.hop_len();
        let frame: Vec<Complex<f64>> = (0..params.fft_len())
            .map(|i| {
                let v = if i < params.window_len() {
                    clip.samples()[start + i] * params.window()[i]
                } else {
                    0.0
                };
                Complex::new(v, 0.0)
            })
            .collect();
        let spectrum = naive_dft(&frame);
        for bin in 0..n_bins {
            out.set(bin, t, spectrum[bin].norm());
        }
    }
    out
}

/// Orthonormal DCT-II of one vector, double loop.
pub fn naive_dct2(input: &[f64]) -> Vec<f64> {
    let n = input.len();
    (0..n)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    x * (std::f64::consts::PI * (2.0 * i as f64 + 1.0) * k as f64
                        / (2.0 * n as f64))
                        .cos()
                })
                .sum();
            scale * sum
        })
        .collect()
}

/// Scalar Adam recurrence on a single parameter, bias-corrected form.
/// Used to cross-check the tensor optimizer.
pub fn scalar_adam(
    mut x: f64,
    grad_fn: impl Fn(f64) -> f64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    steps: usize,
) -> f64 {
    let (mut m, mut v) = (0.0, 0.0);
    for t in 1..=steps {
        let g = grad_fn(x);
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        let m_hat = m / (1.0 - beta1.powi(t as i32));
        let v_hat = v / (1.0 - beta2.powi(t as i32));
        x -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    x
}
