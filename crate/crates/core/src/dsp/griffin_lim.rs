//! Griffin-Lim phase reconstruction: alternate between STFT consistency and
//! the magnitude constraint. The inverse STFT used here is the least-squares
//! signal estimate, so the projection error is non-increasing.

use num_complex::Complex;

use super::{istft, mel_filterbank, stft, DspError, MelSpectrogram, StftParams};
use crate::mat::Mat;
use crate::rng::SeededRng;
use crate::scalar::{real, Real};

/// Initial phase assignment. `Zero` is the deterministic default; `Random`
/// draws per-bin phases from the seeded generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseInit {
    Zero,
    Random { seed: u64 },
}

/// Reconstructs audio from a linear magnitude spectrogram
/// `[fft_len/2+1 x n_frames]`. Returns the clip (peak-normalized to 0.95)
/// and the per-iteration projection errors `|| |STFT(x_k)| - M ||_F`.
pub fn griffin_lim_linear<F: Real>(
    mag: &Mat<F>,
    params: &StftParams<F>,
    sample_rate: u32,
    iterations: usize,
    init: PhaseInit,
) -> Result<(super::AudioClip<F>, Vec<F>), DspError> {
    assert!(iterations >= 1, "griffin-lim needs at least one iteration");
    if mag.rows() != params.n_bins() {
        return Err(DspError::ParamMismatch {
            expected: params.n_bins(),
            got: mag.rows(),
        });
    }

    let mut estimate = initial_estimate(mag, init);
    let tiny = real::<F>(1e-30);
    let mut errors = Vec::with_capacity(iterations);

    for _ in 0..iterations {
        let x = istft(&estimate, params, sample_rate)?;
        let rebuilt = stft(&x, params)?;

        let mut err_sq = F::zero();
        for (r, m) in rebuilt.data().iter().zip(mag.data().iter()) {
            let d = r.norm() - *m;
            err_sq += d * d;
        }
        errors.push(err_sq.sqrt());

        // Keep the rebuilt phases, enforce the target magnitudes.
        estimate = Mat::from_vec(
            mag.rows(),
            mag.cols(),
            rebuilt
                .data()
                .iter()
                .zip(mag.data().iter())
                .map(|(s, &m)| {
                    let n = s.norm();
                    if n > tiny {
                        *s * (m / n)
                    } else {
                        Complex::new(m, F::zero())
                    }
                })
                .collect(),
        );
    }

    let mut clip = istft(&estimate, params, sample_rate)?;
    clip.peak_normalize(real::<F>(0.95));
    Ok((clip, errors))
}

/// Reconstructs audio from a log-magnitude mel spectrogram. The mel energies
/// are mapped back to linear frequency bins through the clamped pseudo-inverse
/// of the filterbank, then handed to [`griffin_lim_linear`].
pub fn griffin_lim_mel<F: Real>(
    mel: &MelSpectrogram<F>,
    iterations: usize,
    init: PhaseInit,
) -> Result<(super::AudioClip<F>, Vec<F>), DspError> {
    let twenty = real::<F>(20.0);
    let mel_mag = mel.data().map(|db| real::<F>(10.0).powf(db / twenty));
    let nyquist = real::<F>(mel.sample_rate() as f64 / 2.0);
    let fb = mel_filterbank(
        mel.n_mels(),
        mel.params().fft_len(),
        mel.sample_rate(),
        F::zero(),
        nyquist,
    )?;
    let lin = mel_to_linear(&fb, &mel_mag);
    griffin_lim_linear(&lin, mel.params(), mel.sample_rate(), iterations, init)
}

fn initial_estimate<F: Real>(mag: &Mat<F>, init: PhaseInit) -> Mat<Complex<F>> {
    match init {
        PhaseInit::Zero => mag.map(|m| Complex::new(m, F::zero())),
        PhaseInit::Random { seed } => {
            let mut rng = SeededRng::new(seed);
            let pi = std::f64::consts::PI;
            let mut out = Mat::filled(mag.rows(), mag.cols(), Complex::new(F::zero(), F::zero()));
            for r in 0..mag.rows() {
                for c in 0..mag.cols() {
                    // DC and Nyquist rows stay real.
                    let phase = if r == 0 || r == mag.rows() - 1 {
                        0.0
                    } else {
                        rng.uniform(-pi, pi)
                    };
                    let m = mag.get(r, c);
                    out.set(
                        r,
                        c,
                        Complex::new(m * real::<F>(phase.cos()), m * real::<F>(phase.sin())),
                    );
                }
            }
            out
        }
    }
}

/// `clamp(pinv(fb) . mel, 0)` via regularized normal equations:
/// `pinv(fb) = fb^T (fb fb^T + lambda I)^-1` for the full-row-rank filterbank.
fn mel_to_linear<F: Real>(fb: &Mat<F>, mel_mag: &Mat<F>) -> Mat<F> {
    let n = fb.rows();
    let mut gram = fb.matmul(&fb.transpose());
    let mut trace = F::zero();
    for i in 0..n {
        trace += gram.get(i, i);
    }
    let lambda = real::<F>(1e-8) * (trace / real::<F>(n as f64)).max(real::<F>(1e-12));
    for i in 0..n {
        gram.set(i, i, gram.get(i, i) + lambda);
    }
    let y = solve_linear(&gram, mel_mag);
    fb.transpose().matmul(&y).map(|v| v.max(F::zero()))
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
/// `A` here is SPD plus a ridge, so pivots never vanish.
fn solve_linear<F: Real>(a: &Mat<F>, b: &Mat<F>) -> Mat<F> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.rows(), n);
    let mut lhs = a.clone();
    let mut rhs = b.clone();

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                lhs.get(i, col)
                    .abs()
                    .partial_cmp(&lhs.get(j, col).abs())
                    .unwrap()
            })
            .unwrap();
        if pivot_row != col {
            for k in 0..n {
                let tmp = lhs.get(col, k);
                lhs.set(col, k, lhs.get(pivot_row, k));
                lhs.set(pivot_row, k, tmp);
            }
            for k in 0..rhs.cols() {
                let tmp = rhs.get(col, k);
                rhs.set(col, k, rhs.get(pivot_row, k));
                rhs.set(pivot_row, k, tmp);
            }
        }
        let pivot = lhs.get(col, col);
        assert!(pivot.abs() > F::zero(), "singular system");
        for row in col + 1..n {
            let factor = lhs.get(row, col) / pivot;
            if factor == F::zero() {
                continue;
            }
            for k in col..n {
                let v = lhs.get(row, k) - factor * lhs.get(col, k);
                lhs.set(row, k, v);
            }
            for k in 0..rhs.cols() {
                let v = rhs.get(row, k) - factor * rhs.get(col, k);
                rhs.set(row, k, v);
            }
        }
    }

    let mut x = Mat::zeros(n, b.cols());
    for col in (0..n).rev() {
        for k in 0..b.cols() {
            let mut acc = rhs.get(col, k);
            for j in col + 1..n {
                acc -= lhs.get(col, j) * x.get(j, k);
            }
            x.set(col, k, acc / lhs.get(col, col));
        }
    }
    x
}
