//! Periodogram and octave-band spectral slope estimation.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// One-sided periodogram `|X_k|^2 / N` for `k = 0..=N/2`.
pub fn periodogram(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&s| Complex::new(s, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.truncate(n / 2 + 1);
    buf.into_iter().map(|c| c.norm_sqr() / n as f64).collect()
}

/// Octave bands centered at `125 * 2^i` Hz up to and including `hi_hz`.
pub fn octave_centers(lo_hz: f64, hi_hz: f64) -> Vec<f64> {
    std::iter::successors(Some(lo_hz), |f| Some(f * 2.0))
        .take_while(|f| *f <= hi_hz * (1.0 + 1e-9))
        .collect()
}

/// Mean power spectral density (dB) in each octave band `[f/sqrt 2, f sqrt 2)`.
pub fn octave_band_levels(samples: &[f64], sample_rate_hz: u32, centers: &[f64]) -> Vec<f64> {
    let psd = periodogram(samples);
    let bin_hz = sample_rate_hz as f64 / samples.len() as f64;
    centers
        .iter()
        .map(|&fc| {
            let lo = fc / std::f64::consts::SQRT_2;
            let hi = fc * std::f64::consts::SQRT_2;
            let (sum, count) = psd
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    let f = *k as f64 * bin_hz;
                    f >= lo && f < hi
                })
                .fold((0.0, 0usize), |(s, c), (_, p)| (s + p, c + 1));
            if count == 0 {
                f64::NEG_INFINITY
            } else {
                10.0 * (sum / count as f64).log10()
            }
        })
        .collect()
}

/// Least-squares slope in dB/octave of band levels against `log2(f)`.
pub fn octave_slope(samples: &[f64], sample_rate_hz: u32, lo_hz: f64, hi_hz: f64) -> f64 {
    let centers = octave_centers(lo_hz, hi_hz);
    let levels = octave_band_levels(samples, sample_rate_hz, &centers);
    let xs: Vec<f64> = centers.iter().map(|f| f.log2()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = levels.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&levels).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
