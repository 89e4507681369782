use std::f64::consts::PI;

/// Taps of the interpolation kernel at unit cutoff.
const TAPS: usize = 32;
const KAISER_BETA: f64 = 8.0;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser(t: f64, half_width: f64) -> f64 {
    let r = t / half_width;
    if r.abs() >= 1.0 {
        0.0
    } else {
        bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / bessel_i0(KAISER_BETA)
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Band-limited windowed-sinc resampling (Kaiser window, beta 8,
/// 32 taps per output phase at unit cutoff).
///
/// When downsampling the cutoff drops to `to/from` and the kernel widens
/// accordingly.
pub fn resample(samples: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || samples.is_empty() {
        return samples.to_vec();
    }
    let ratio = to as f64 / from as f64;
    let cutoff = ratio.min(1.0);
    let half_width = TAPS as f64 / 2.0 / cutoff;
    let out_len = ((samples.len() as f64) * ratio).floor() as usize;
    let step = from as f64 / to as f64;

    (0..out_len)
        .map(|m| {
            let t = m as f64 * step;
            let lo = (t - half_width).ceil().max(0.0) as usize;
            let hi = ((t + half_width).floor() as usize).min(samples.len() - 1);
            (lo..=hi)
                .map(|k| {
                    let d = t - k as f64;
                    samples[k] * cutoff * sinc(cutoff * d) * kaiser(d, half_width)
                })
                .sum()
        })
        .collect()
}
