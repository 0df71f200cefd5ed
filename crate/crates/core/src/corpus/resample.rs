//! Sample-rate conversion by windowed-sinc interpolation: 64 taps under a
//! Kaiser window. Conversion quality is comfortably above what the analysis
//! pipeline needs; gain is renormalized downstream by peak normalization.

use crate::scalar::{real, Real};

const HALF_TAPS: usize = 32;
const KAISER_BETA: f64 = 8.6;

/// Zeroth-order modified Bessel function, by its power series.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_sq = (x / 2.0) * (x / 2.0);
    for k in 1..64 {
        term *= half_sq / ((k * k) as f64);
        sum += term;
        if term < 1e-14 * sum {
            break;
        }
    }
    sum
}

fn kaiser(u: f64) -> f64 {
    if u.abs() > 1.0 {
        0.0
    } else {
        bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / bessel_i0(KAISER_BETA)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

/// Resamples `input` from `src_rate` to `dst_rate`.
pub fn resample<F: Real>(input: &[F], src_rate: u32, dst_rate: u32) -> Vec<F> {
    assert!(src_rate > 0 && dst_rate > 0);
    if src_rate == dst_rate || input.is_empty() {
        return input.to_vec();
    }
    // Low-pass cutoff slightly below the smaller Nyquist, in units of the
    // input rate.
    let ratio = dst_rate as f64 / src_rate as f64;
    let cutoff = 0.475 * ratio.min(1.0) * 2.0; // fraction of input Nyquist * 2

    let out_len = ((input.len() as u64 * dst_rate as u64) / src_rate as u64) as usize;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let t = n as f64 / ratio; // position in input samples
        let center = t.floor() as isize;
        let mut acc = 0.0f64;
        for k in (center - HALF_TAPS as isize + 1)..=(center + HALF_TAPS as isize) {
            if k < 0 || k >= input.len() as isize {
                continue;
            }
            let dt = t - k as f64;
            let h = cutoff * sinc(cutoff * dt) * kaiser(dt / HALF_TAPS as f64);
            acc += input[k as usize].to_f64().unwrap_or(0.0) * h;
        }
        out.push(real::<F>(acc));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rate_is_a_copy() {
        let xs = vec![0.1f64, -0.5, 0.9];
        assert_eq!(resample(&xs, 16_000, 16_000), xs);
    }

    #[test]
    fn output_length_scales_with_ratio() {
        let xs = vec![0.0f64; 22_050];
        assert_eq!(resample(&xs, 22_050, 16_000).len(), 16_000);
        let xs = vec![0.0f64; 8_000];
        assert_eq!(resample(&xs, 8_000, 16_000).len(), 16_000);
    }

    #[test]
    fn sine_frequency_is_preserved_through_downsampling() {
        // 1 kHz at 22050 Hz resampled to 16 kHz keeps its dominant bin.
        let src_rate = 22_050u32;
        let freq = 1000.0;
        let input: Vec<f64> = (0..22_050)
            .map(|i| (std::f64::consts::TAU * freq * i as f64 / src_rate as f64).sin())
            .collect();
        let output = resample(&input, src_rate, 16_000);

        let clip = crate::dsp::AudioClip::new(output, 16_000).unwrap();
        let params = crate::dsp::StftParams::default_16k();
        let spec = crate::dsp::stft(&clip, &params).unwrap();
        let mid = spec.cols() / 2;
        let peak_bin = (0..spec.rows())
            .max_by(|&a, &b| {
                spec.get(a, mid)
                    .norm()
                    .partial_cmp(&spec.get(b, mid).norm())
                    .unwrap()
            })
            .unwrap();
        // 1 kHz at 16 kHz / fft 512 lands on bin 32.
        assert!((peak_bin as i64 - 32).abs() <= 1, "peak at bin {peak_bin}");
    }

    #[test]
    fn dc_gain_is_close_to_unity() {
        let input = vec![0.5f64; 8000];
        let output = resample(&input, 22_050, 16_000);
        let mid = output.len() / 2;
        assert!((output[mid] - 0.5).abs() < 0.02, "got {}", output[mid]);
    }
}
