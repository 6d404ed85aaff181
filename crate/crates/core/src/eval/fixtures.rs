//! Published WER figures for seven training methods, used as regression
//! fixtures for the range aggregation.
//!
//! Per-condition rows follow [`super::evaluation_conditions`] order (clean,
//! 50 dB ... -20 dB). Range rows are `[full, high, low, roi]`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseType {
    Pink,
    Babble,
}

pub const METHODS: [&str; 7] = [
    "Clean-baseline",
    "Noisy-baseline",
    "Gauss",
    "Vanilla-PEM",
    "Gauss-PEM",
    "ACCAN",
    "ACCAN reversed",
];

pub const PINK_PER_CONDITION: [[f64; 16]; 7] = [
    [13.8, 14.4, 14.0, 13.8, 13.7, 13.7, 16.1, 18.9, 25.9, 40.1, 61.8, 86.4, 109.0, 133.4, 147.2, 152.8],
    [17.3, 17.4, 17.3, 16.9, 16.5, 16.4, 16.2, 16.8, 19.0, 23.4, 36.5, 59.8, 90.0, 116.2, 126.7, 129.5],
    [15.7, 15.8, 15.7, 15.6, 14.8, 14.4, 14.5, 15.3, 16.9, 20.2, 28.9, 45.5, 72.8, 94.9, 99.0, 98.9],
    [13.3, 13.2, 13.2, 12.7, 12.6, 12.6, 12.9, 13.6, 15.1, 18.9, 26.2, 45.0, 73.5, 93.4, 96.9, 97.1],
    [13.6, 13.5, 13.6, 13.4, 13.2, 12.6, 12.4, 12.8, 14.2, 17.0, 22.3, 37.6, 66.3, 90.2, 95.9, 96.8],
    [15.9, 15.8, 15.4, 15.3, 15.0, 15.0, 15.2, 15.9, 16.1, 18.5, 22.9, 33.7, 58.8, 85.9, 95.6, 96.2],
    [14.6, 14.4, 14.3, 14.1, 13.3, 13.4, 13.9, 14.4, 15.4, 18.5, 24.4, 40.2, 67.8, 90.9, 97.0, 97.2],
];

pub const BABBLE_PER_CONDITION: [[f64; 16]; 7] = [
    [13.8, 14.2, 14.2, 13.9, 14.2, 14.5, 15.7, 18.8, 26.6, 43.9, 74.2, 102.2, 116.6, 122.4, 122.3, 121.4],
    [17.3, 17.1, 16.9, 16.7, 16.1, 15.7, 15.8, 17.8, 23.1, 35.5, 60.6, 94.1, 119.4, 128.4, 129.3, 129.2],
    [15.7, 15.6, 15.7, 15.7, 15.3, 15.0, 15.4, 16.5, 19.5, 27.5, 45.9, 77.4, 102.6, 109.0, 109.8, 110.6],
    [13.3, 13.2, 12.9, 12.7, 12.3, 12.7, 12.8, 14.0, 17.4, 25.6, 44.2, 72.7, 93.2, 99.1, 99.5, 99.8],
    [13.6, 13.8, 13.7, 13.4, 13.4, 13.3, 13.7, 14.6, 16.9, 22.9, 37.4, 64.1, 89.8, 97.3, 97.3, 97.4],
    [15.9, 15.7, 15.3, 14.9, 15.1, 15.1, 15.0, 15.5, 17.5, 21.8, 33.4, 57.2, 86.1, 97.2, 98.8, 99.1],
    [14.6, 14.4, 14.2, 14.0, 14.1, 14.0, 14.0, 14.6, 16.5, 21.9, 35.5, 63.5, 88.7, 96.6, 97.6, 97.6],
];

pub const PINK_RANGES: [[f64; 4]; 7] = [
    [54.7, 29.0, 109.6, 67.9],
    [46.0, 23.3, 88.6, 51.7],
    [37.4, 19.8, 71.1, 42.1],
    [35.6, 17.8, 70.6, 40.8],
    [34.1, 16.6, 64.7, 37.2],
    [34.4, 18.1, 59.5, 36.0],
    [35.2, 17.8, 66.3, 38.8],
];

pub const BABBLE_RANGES: [[f64; 4]; 7] = [
    [53.0, 32.0, 113.7, 72.1],
    [53.3, 29.9, 114.0, 68.4],
    [45.4, 25.4, 96.3, 56.9],
    [41.0, 22.8, 88.3, 52.3],
    [39.5, 21.6, 83.7, 49.0],
    [39.6, 21.5, 80.2, 47.0],
    [39.5, 21.5, 82.9, 48.2],
];

pub fn per_condition(noise: NoiseType) -> &'static [[f64; 16]; 7] {
    match noise {
        NoiseType::Pink => &PINK_PER_CONDITION,
        NoiseType::Babble => &BABBLE_PER_CONDITION,
    }
}

pub fn ranges(noise: NoiseType) -> &'static [[f64; 4]; 7] {
    match noise {
        NoiseType::Pink => &PINK_RANGES,
        NoiseType::Babble => &BABBLE_RANGES,
    }
}

pub fn method_index(name: &str) -> Option<usize> {
    METHODS.iter().position(|m| *m == name)
}

/// Per-condition row as [`super::WerPoint`]s.
pub fn points(noise: NoiseType, method: usize) -> Vec<super::WerPoint> {
    super::evaluation_conditions()
        .into_iter()
        .zip(per_condition(noise)[method])
        .map(|(condition, wer_percent)| super::WerPoint { condition, wer_percent })
        .collect()
}
