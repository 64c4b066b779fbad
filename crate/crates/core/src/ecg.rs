//! ECG to heart-rate training windows.
//!
//! R-peaks are found with a derivative / square / integrate / adaptive
//! threshold chain, RR intervals become beats per minute, series are
//! min-max normalized and zero-padded to a common length, and sliding
//! windows are labeled with the clip's binarized self-report rating.
//! [`generate_synthetic_ecg`] produces recordings with known peak positions.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Dimension, Level};
use crate::par;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 256.0;
pub const DEFAULT_WINDOW: usize = 32;
/// Heart rates outside this open interval are treated as artifacts.
pub const BPM_BOUNDS: (f64, f64) = (20.0, 260.0);

#[derive(Debug, Error)]
pub enum EcgError {
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("no R-peaks found")]
    NoPeaksFound,
    #[error("need at least two peaks, got {0}")]
    TooFewPeaks(usize),
    #[error("rating {0} outside 1..=5")]
    OutOfRange(u8),
    #[error("series of length {len} is too short for windows of {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("recording {0} has no self-report ratings")]
    MissingRatings(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Self-reported ratings on the 1..=5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VadRatings {
    pub valence: u8,
    pub arousal: u8,
    pub dominance: u8,
}

impl VadRatings {
    /// Ratings on the 1..=5 self-assessment scale.
    pub fn new(valence: u8, arousal: u8, dominance: u8) -> Result<Self, EcgError> {
        for r in [valence, arousal, dominance] {
            if !(1..=5).contains(&r) {
                return Err(EcgError::OutOfRange(r));
            }
        }
        Ok(Self {
            valence,
            arousal,
            dominance,
        })
    }

    pub fn get(&self, dim: Dimension) -> u8 {
        match dim {
            Dimension::Valence => self.valence,
            Dimension::Arousal => self.arousal,
            Dimension::Dominance => self.dominance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    First,
    Second,
}

impl Channel {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Channel::First),
            2 => Some(Channel::Second),
            _ => None,
        }
    }

    fn index(self) -> usize {
        match self {
            Channel::First => 0,
            Channel::Second => 1,
        }
    }
}

/// Two-channel ECG samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecording {
    samples: Vec<[f64; 2]>,
    sample_rate_hz: f64,
    ratings: Option<VadRatings>,
}

impl EcgRecording {
    pub fn new(
        samples: Vec<[f64; 2]>,
        sample_rate_hz: f64,
        ratings: Option<VadRatings>,
    ) -> Result<Self, EcgError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(EcgError::InvalidRecording(format!(
                "sample rate {sample_rate_hz} must be positive"
            )));
        }
        if (samples.len() as f64) < 2.0 * sample_rate_hz {
            return Err(EcgError::InvalidRecording(format!(
                "{} samples is less than two seconds at {sample_rate_hz} Hz",
                samples.len()
            )));
        }
        if let Some(r) = ratings {
            for v in [r.valence, r.arousal, r.dominance] {
                if !(1..=5).contains(&v) {
                    return Err(EcgError::OutOfRange(v));
                }
            }
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            ratings,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn ratings(&self) -> Option<VadRatings> {
        self.ratings
    }

    pub fn samples(&self) -> &[[f64; 2]] {
        &self.samples
    }

    pub fn channel(&self, channel: Channel) -> Vec<f64> {
        let c = channel.index();
        self.samples.iter().map(|s| s[c]).collect()
    }

    /// Parses the text format: a header `sample_rate_hz [valence arousal dominance]`
    /// followed by one whitespace-separated sample pair per line.
    pub fn parse(text: &str) -> Result<Self, EcgError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(EcgError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let parse_err = |line: usize, message: String| EcgError::Parse { line, message };
        let fields: Vec<&str> = header.split_whitespace().collect();
        let fs: f64 = fields[0]
            .parse()
            .map_err(|_| parse_err(hline, format!("bad sample rate {:?}", fields[0])))?;
        let ratings = match fields.len() {
            1 => None,
            4 => {
                let r: Vec<u8> = fields[1..]
                    .iter()
                    .map(|f| f.parse::<u8>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| parse_err(hline, format!("bad rating: {e}")))?;
                Some(VadRatings {
                    valence: r[0],
                    arousal: r[1],
                    dominance: r[2],
                })
            }
            n => {
                return Err(parse_err(
                    hline,
                    format!("header has {n} fields, expected 1 or 4"),
                ))
            }
        };
        let mut samples = Vec::new();
        for (line, row) in lines {
            let mut it = row.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => samples.push([a, b]),
                _ => return Err(parse_err(line, format!("expected two reals, got {row:?}"))),
            }
        }
        Self::new(samples, fs, ratings)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 24);
        match self.ratings {
            Some(r) => writeln!(
                out,
                "{} {} {} {}",
                self.sample_rate_hz, r.valence, r.arousal, r.dominance
            ),
            None => writeln!(out, "{}", self.sample_rate_hz),
        }
        .unwrap();
        for [a, b] in &self.samples {
            writeln!(out, "{a} {b}").unwrap();
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, EcgError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), EcgError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Beats per minute derived from consecutive R-peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrSeries {
    pub bpm: Vec<f64>,
    pub peak_indices: Vec<usize>,
}

impl HrSeries {
    pub fn mean_bpm(&self) -> Option<f64> {
        if self.bpm.is_empty() {
            None
        } else {
            Some(self.bpm.iter().sum::<f64>() / self.bpm.len() as f64)
        }
    }
}

/// Parameters of the R-peak detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub integration_ms: f64,
    /// Threshold as a fraction of the rolling maximum of the integrated signal.
    pub threshold_fraction: f64,
    /// Width of the rolling-maximum window.
    pub max_window_s: f64,
    pub refractory_ms: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            integration_ms: 150.0,
            threshold_fraction: 0.5,
            max_window_s: 2.0,
            refractory_ms: 200.0,
        }
    }
}

/// Detects R-peaks on one channel with the default detector settings.
pub fn detect_r_peaks(rec: &EcgRecording, channel: Channel) -> Result<Vec<usize>, EcgError> {
    detect_r_peaks_in(
        &rec.channel(channel),
        rec.sample_rate_hz,
        &DetectorConfig::default(),
    )
}

/// Five-point derivative, clamped at the ends.
fn derivative(x: &[f64]) -> Vec<f64> {
    let n = x.len() as isize;
    let at = |i: isize| x[i.clamp(0, n - 1) as usize];
    (0..n)
        .map(|i| (-at(i - 2) - 2.0 * at(i - 1) + 2.0 * at(i + 1) + at(i + 2)) / 8.0)
        .collect()
}

/// Centered moving average; edge windows average over the samples they cover.
fn moving_average(x: &[f64], half: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Centered rolling maximum with a monotonic deque.
/// Maximum over a full-width window `[i - half, i + half]`; near the ends the
/// window is shifted inward rather than cut, so the threshold at the edges
/// still sees a whole window of beats.
fn edge_shifted_max(x: &[f64], half: usize) -> Vec<f64> {
    let centered = rolling_max(x, half);
    if x.len() <= 2 * half {
        return centered;
    }
    (0..x.len())
        .map(|i| centered[i.clamp(half, x.len() - 1 - half)])
        .collect()
}

fn rolling_max(x: &[f64], half: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..x.len() {
        let hi = (i + half).min(x.len() - 1);
        while next <= hi {
            while deque.back().is_some_and(|&j| x[j] <= x[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        while deque.front().is_some_and(|&j| j + half < i) {
            deque.pop_front();
        }
        out.push(x[*deque.front().unwrap()]);
    }
    out
}

/// Detects R-peaks in a single-channel signal.
pub fn detect_r_peaks_in(
    signal: &[f64],
    sample_rate_hz: f64,
    cfg: &DetectorConfig,
) -> Result<Vec<usize>, EcgError> {
    if signal.len() < 5 {
        return Err(EcgError::NoPeaksFound);
    }
    let squared: Vec<f64> = derivative(signal).into_iter().map(|d| d * d).collect();
    let half_int = ((cfg.integration_ms / 1000.0 * sample_rate_hz) / 2.0).round() as usize;
    let energy = moving_average(&squared, half_int);
    let peak_energy = energy.iter().copied().fold(0.0, f64::max);
    if !(peak_energy > f64::MIN_POSITIVE) {
        return Err(EcgError::NoPeaksFound);
    }
    let half_max = ((cfg.max_window_s * sample_rate_hz) / 2.0).round() as usize;
    let threshold: Vec<f64> = edge_shifted_max(&energy, half_max)
        .into_iter()
        .map(|m| m * cfg.threshold_fraction)
        .collect();

    let refractory = (cfg.refractory_ms / 1000.0 * sample_rate_hz).round() as usize;
    let mut peaks: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < signal.len() {
        if energy[i] <= threshold[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < signal.len() && energy[i] > threshold[i] {
            i += 1;
        }
        // The R-peak is the largest raw sample under the supra-threshold run.
        let lo = start.saturating_sub(half_int);
        let hi = (i + half_int).min(signal.len());
        let mut r = lo;
        for j in lo..hi {
            if signal[j] > signal[r] {
                r = j;
            }
        }
        match peaks.last_mut() {
            Some(last) if r <= *last + refractory => {
                if signal[r] > signal[*last] {
                    *last = r;
                }
            }
            _ => peaks.push(r),
        }
    }
    if peaks.is_empty() {
        return Err(EcgError::NoPeaksFound);
    }
    Ok(peaks)
}

/// Converts R-peak indices to beats per minute, dropping artifact intervals.
pub fn peaks_to_hr(peaks: &[usize], sample_rate_hz: f64) -> Result<HrSeries, EcgError> {
    if peaks.len() < 2 {
        return Err(EcgError::TooFewPeaks(peaks.len()));
    }
    let (lo, hi) = BPM_BOUNDS;
    let bpm = peaks
        .windows(2)
        .map(|w| 60.0 / ((w[1] - w[0]) as f64 / sample_rate_hz))
        .filter(|&b| b > lo && b < hi)
        .collect();
    Ok(HrSeries {
        bpm,
        peak_indices: peaks.to_vec(),
    })
}

/// Min-max scaling to `[0, 1]`; a constant series maps to zeros.
pub fn normalize(series: &[f64]) -> Vec<f64> {
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    normalize_with_range(series, lo, hi)
}

/// Min-max scaling against a given range.
pub fn normalize_with_range(series: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; series.len()];
    }
    series.iter().map(|v| (v - lo) / span).collect()
}

/// Right-pads every series with zeros to the longest length.
pub fn zero_pad(series: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let width = series.iter().map(Vec::len).max().unwrap_or(0);
    series
        .iter()
        .map(|s| {
            let mut padded = s.clone();
            padded.resize(width, 0.0);
            padded
        })
        .collect()
}

/// Ratings of 4 and 5 are high, 1 to 3 low.
pub fn binarize_rating(rating: u8) -> Result<Level, EcgError> {
    match rating {
        1..=3 => Ok(Level::Low),
        4 | 5 => Ok(Level::High),
        r => Err(EcgError::OutOfRange(r)),
    }
}

/// Fixed-length input windows with their labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub windows: Vec<Vec<f64>>,
    pub labels: Vec<Level>,
    pub window_size: usize,
}

impl WindowedDataset {
    pub fn new(window_size: usize) -> Self {
        Self {
            windows: Vec::new(),
            labels: Vec::new(),
            window_size,
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn push(&mut self, window: Vec<f64>, label: Level) {
        debug_assert_eq!(window.len(), self.window_size);
        self.windows.push(window);
        self.labels.push(label);
    }

    pub fn extend(&mut self, other: WindowedDataset) {
        assert_eq!(self.window_size, other.window_size, "window sizes differ");
        self.windows.extend(other.windows);
        self.labels.extend(other.labels);
    }

    pub fn subset(&self, indices: &[usize]) -> WindowedDataset {
        WindowedDataset {
            windows: indices.iter().map(|&i| self.windows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            window_size: self.window_size,
        }
    }
}

/// Sliding windows `[i, i + w)` for `i in 0..len - w`, all with the same label.
pub fn make_windows(series: &[f64], label: Level, w: usize) -> Result<WindowedDataset, EcgError> {
    if w == 0 || series.len() <= w {
        return Err(EcgError::SeriesTooShort {
            len: series.len(),
            window: w,
        });
    }
    let mut out = WindowedDataset::new(w);
    for i in 0..series.len() - w {
        out.push(series[i..i + w].to_vec(), label);
    }
    Ok(out)
}

/// Runs the full preparation over labeled recordings: R-peaks on `channel`,
/// heart rate, normalization against the range of the whole set, zero-padding
/// to the longest series, then windowing with the binarized rating of `dim`.
pub fn prepare_dataset(
    recordings: &[EcgRecording],
    dim: Dimension,
    channel: Channel,
    window: usize,
) -> Result<WindowedDataset, EcgError> {
    let labels: Vec<Level> = recordings
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let rating = r.ratings().ok_or(EcgError::MissingRatings(i))?;
            binarize_rating(rating.get(dim))
        })
        .collect::<Result<_, _>>()?;
    let series: Vec<HrSeries> = par::map(recordings, |r| {
        detect_r_peaks(r, channel).and_then(|p| peaks_to_hr(&p, r.sample_rate_hz()))
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    prepare_from_hr(
        &series.into_iter().map(|s| s.bpm).collect::<Vec<_>>(),
        &labels,
        window,
    )
}

/// Smallest and largest value over a set of series; the normalization range
/// that inference must reuse.
pub fn hr_range(series: &[Vec<f64>]) -> (f64, f64) {
    let all = series.iter().flatten().copied();
    let lo = all.clone().fold(f64::INFINITY, f64::min);
    let hi = all.fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// The normalize / pad / window steps of [`prepare_dataset`] on ready-made HR series.
pub fn prepare_from_hr(
    series: &[Vec<f64>],
    labels: &[Level],
    window: usize,
) -> Result<WindowedDataset, EcgError> {
    let (lo, hi) = hr_range(series);
    let normalized: Vec<Vec<f64>> = series
        .iter()
        .map(|s| normalize_with_range(s, lo, hi))
        .collect();
    let mut out = WindowedDataset::new(window);
    for (s, &label) in zero_pad(&normalized).iter().zip(labels) {
        out.extend(make_windows(s, label, window)?);
    }
    Ok(out)
}

/// Parameters of the synthetic QRS generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticEcg {
    pub sample_rate_hz: f64,
    /// Signal-to-noise ratio of added white noise; infinite for a clean signal.
    pub snr_db: f64,
    /// Standard deviation of each Gaussian QRS pulse, in seconds.
    pub qrs_width_s: f64,
    /// Amplitude of channel 2 relative to channel 1.
    pub second_channel_gain: f64,
    pub seed: u64,
}

impl Default for SyntheticEcg {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            snr_db: f64::INFINITY,
            qrs_width_s: 0.012,
            second_channel_gain: 0.8,
            seed: 0,
        }
    }
}

/// Generates a Gaussian-pulse ECG whose beat rate follows `bpm_profile`
/// (one value per second of signal) and returns it with the planted peak
/// sample indices. The first beat sits at t = 0.
pub fn generate_synthetic_ecg(
    bpm_profile: &[f64],
    sample_rate_hz: f64,
    noise_snr_db: f64,
    seed: u64,
) -> (EcgRecording, Vec<usize>) {
    SyntheticEcg {
        sample_rate_hz,
        snr_db: noise_snr_db,
        seed,
        ..Default::default()
    }
    .generate(bpm_profile, None)
}

/// Labeled clips whose heart rate depends on the rating: high-rated clips
/// hover around 95 bpm and low-rated ones around 65 bpm, with a slow
/// wander and beat noise. All three dimensions share the clip's rating.
pub fn planted_clips(
    clips_per_class: usize,
    seconds: usize,
    snr_db: f64,
    seed: u64,
) -> Vec<EcgRecording> {
    let jobs: Vec<usize> = (0..2 * clips_per_class).collect();
    par::map(&jobs, |&i| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
        let high = i % 2 == 1;
        let base: f64 = if high { 95.0 } else { 65.0 };
        let wander = Normal::new(0.0, 1.5).expect("positive spread");
        let mut bpm = base;
        let profile: Vec<f64> = (0..seconds)
            .map(|_| {
                bpm = (bpm + wander.sample(&mut rng) + 0.1 * (base - bpm))
                    .clamp(base - 10.0, base + 10.0);
                bpm
            })
            .collect();
        let r = if high { 5 } else { 2 };
        SyntheticEcg {
            snr_db,
            seed: seed ^ ((i as u64) << 16),
            ..Default::default()
        }
        .generate(
            &profile,
            Some(VadRatings::new(r, r, r).expect("valid rating")),
        )
        .0
    })
}

impl SyntheticEcg {
    pub fn generate(
        &self,
        bpm_profile: &[f64],
        ratings: Option<VadRatings>,
    ) -> (EcgRecording, Vec<usize>) {
        let fs = self.sample_rate_hz;
        let duration = bpm_profile.len() as f64;
        let n = (duration * fs).round() as usize;

        let mut beat_times = Vec::new();
        let mut t = 0.0;
        while t < duration {
            beat_times.push(t);
            t += 60.0 / bpm_profile[(t as usize).min(bpm_profile.len() - 1)];
        }
        // a beat whose peak rounds past the end would leave a pulse tail that
        // is not in the planted list
        beat_times.retain(|t| ((t * fs).round() as usize) < n);
        let planted: Vec<usize> = beat_times
            .iter()
            .map(|t| (t * fs).round() as usize)
            .collect();

        let mut clean = vec![0.0; n];
        let sigma = self.qrs_width_s * fs;
        let reach = (5.0 * sigma).ceil() as isize;
        for &bt in &beat_times {
            let center = bt * fs;
            let c = center.round() as isize;
            for i in (c - reach).max(0)..(c + reach + 1).min(n as isize) {
                let z = (i as f64 - center) / sigma;
                clean[i as usize] += (-0.5 * z * z).exp();
            }
        }

        let mut first = clean.clone();
        let mut second: Vec<f64> = clean.iter().map(|v| v * self.second_channel_gain).collect();
        if self.snr_db.is_finite() {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for channel in [&mut first, &mut second] {
                let power = channel.iter().map(|v| v * v).sum::<f64>() / n as f64;
                let sd = (power / 10f64.powf(self.snr_db / 10.0)).sqrt();
                let noise = Normal::new(0.0, sd).expect("finite noise level");
                for v in channel.iter_mut() {
                    *v += noise.sample(&mut rng);
                }
            }
        }
        let samples = first.into_iter().zip(second).map(|(a, b)| [a, b]).collect();
        let rec =
            EcgRecording::new(samples, fs, ratings).expect("profile shorter than two seconds");
        (rec, planted)
    }
}

/// Precision and recall of detected peaks against planted ones, matching
/// each planted peak to at most one detection within `tolerance` samples.
pub fn match_peaks(detected: &[usize], planted: &[usize], tolerance: usize) -> (f64, f64) {
    let mut used = vec![false; detected.len()];
    let mut hits = 0;
    for &p in planted {
        let candidate = detected
            .iter()
            .enumerate()
            .filter(|(j, &d)| !used[*j] && d.abs_diff(p) <= tolerance)
            .min_by_key(|(_, &d)| d.abs_diff(p));
        if let Some((j, _)) = candidate {
            used[j] = true;
            hits += 1;
        }
    }
    let precision = if detected.is_empty() {
        0.0
    } else {
        hits as f64 / detected.len() as f64
    };
    let recall = if planted.is_empty() {
        1.0
    } else {
        hits as f64 / planted.len() as f64
    };
    (precision, recall)
}
