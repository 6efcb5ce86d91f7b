//! Accelerometer streams to time-frequency images: windowing, magnitude STFT,
//! scaling and resizing, plus the sensor-log CSV format.

use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{bilinear_resize, ImageError, ImageTensor};
use crate::road::RoadClass;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("stream of {len} samples is shorter than the {window_len}-sample window; no windows produced")]
    TooShort { len: usize, window_len: usize },
    #[error("window length and hop must be at least 1 (window_len={window_len}, hop={hop})")]
    BadWindowing { window_len: usize, hop: usize },
    #[error("sample rate must be positive and finite, got {0}")]
    BadSampleRate(f64),
    #[error("fft size {0} is not a power of two")]
    FftNotPowerOfTwo(usize),
    #[error("fft size {fft_size} exceeds window length {len}")]
    FftTooLarge { fft_size: usize, len: usize },
    #[error("frame hop must be at least 1")]
    BadFrameHop,
    #[error("target image size must be at least 1x1")]
    BadTarget,
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SignalError>;

/// One fixed-length slice of a z-axis acceleration stream (m/s²).
#[derive(Debug, Clone, PartialEq)]
pub struct AccelWindow {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub start_index: usize,
    pub label: Option<RoadClass>,
}

/// Cuts `stream` into windows at offsets `0, hop, 2·hop, …`; a trailing
/// partial window is dropped.
pub fn segment(stream: &[f64], sample_rate: f64, window_len: usize, hop: usize) -> Result<Vec<AccelWindow>> {
    if window_len == 0 || hop == 0 {
        return Err(SignalError::BadWindowing { window_len, hop });
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(SignalError::BadSampleRate(sample_rate));
    }
    if stream.len() < window_len {
        return Err(SignalError::TooShort { len: stream.len(), window_len });
    }
    let count = (stream.len() - window_len) / hop + 1;
    Ok((0..count)
        .map(|i| {
            let start = i * hop;
            AccelWindow {
                samples: stream[start..start + window_len].to_vec(),
                sample_rate,
                start_index: start,
                label: None,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    Rectangular,
    #[default]
    Hann,
}

impl Taper {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Taper::Rectangular => vec![1.0; n],
            Taper::Hann => {
                (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Linear,
    #[default]
    Log1p,
}

/// Magnitude spectrogram, `bins × frames`, row-major by bin.
///
/// Magnitudes are unnormalized DFT moduli `|X_k| = |Σ_n w[n]·x[n]·e^{-2πikn/N}|`
/// for `k = 0..=N/2`. With a rectangular taper each frame satisfies
/// `(|X_0|² + |X_{N/2}|² + 2·Σ_{0<k<N/2} |X_k|²) / N = Σ_n x[n]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    bins: usize,
    frames: usize,
    magnitudes: Vec<f64>,
    fft_size: usize,
    frame_hop: usize,
    sample_rate: f64,
}

impl Spectrogram {
    pub fn from_parts(
        bins: usize,
        frames: usize,
        magnitudes: Vec<f64>,
        fft_size: usize,
        frame_hop: usize,
        sample_rate: f64,
    ) -> Self {
        assert_eq!(magnitudes.len(), bins * frames);
        assert!(magnitudes.iter().all(|m| *m >= 0.0), "magnitudes must be non-negative");
        Self { bins, frames, magnitudes, fft_size, frame_hop, sample_rate }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.magnitudes[bin * self.frames + frame]
    }

    pub fn frame(&self, frame: usize) -> Vec<f64> {
        (0..self.bins).map(|k| self.get(k, frame)).collect()
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate / self.fft_size as f64
    }

    pub fn frame_time(&self, frame: usize) -> f64 {
        (frame * self.frame_hop) as f64 / self.sample_rate
    }
}

/// Short-time Fourier transform magnitude over one window.
pub fn stft(window: &AccelWindow, fft_size: usize, frame_hop: usize, taper: Taper) -> Result<Spectrogram> {
    if fft_size == 0 || !fft_size.is_power_of_two() {
        return Err(SignalError::FftNotPowerOfTwo(fft_size));
    }
    if frame_hop == 0 {
        return Err(SignalError::BadFrameHop);
    }
    let len = window.samples.len();
    if fft_size > len {
        return Err(SignalError::FftTooLarge { fft_size, len });
    }
    let frames = (len - fft_size) / frame_hop + 1;
    let bins = fft_size / 2 + 1;
    let coeffs = taper.coefficients(fft_size);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let mut buffer = vec![Complex::new(0.0, 0.0); fft_size];
    let mut magnitudes = vec![0.0; bins * frames];
    for t in 0..frames {
        let chunk = &window.samples[t * frame_hop..t * frame_hop + fft_size];
        for ((slot, x), w) in buffer.iter_mut().zip(chunk).zip(&coeffs) {
            *slot = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buffer);
        for (k, z) in buffer.iter().take(bins).enumerate() {
            magnitudes[k * frames + t] = z.norm();
        }
    }
    Ok(Spectrogram { bins, frames, magnitudes, fft_size, frame_hop, sample_rate: window.sample_rate })
}

/// Scales, min-max normalizes to `[0, 1]` and resizes a spectrogram into a
/// single-channel image. Row 0 is the highest frequency bin. A constant
/// spectrogram maps to an all-zero image.
pub fn to_image(spec: &Spectrogram, target_h: usize, target_w: usize, scaling: Scaling) -> Result<ImageTensor> {
    if target_h == 0 || target_w == 0 {
        return Err(SignalError::BadTarget);
    }
    let scaled: Vec<f64> = spec
        .magnitudes
        .iter()
        .map(|&m| match scaling {
            Scaling::Linear => m,
            Scaling::Log1p => m.ln_1p(),
        })
        .collect();
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut plane = vec![0.0; scaled.len()];
    if hi > lo {
        for (row, k) in (0..spec.bins).rev().enumerate() {
            for t in 0..spec.frames {
                plane[row * spec.frames + t] = (scaled[k * spec.frames + t] - lo) / (hi - lo);
            }
        }
    }
    let mut pixels = bilinear_resize(&plane, spec.bins, spec.frames, target_h, target_w);
    // interpolation between values in [0, 1] can drift by an ulp
    pixels.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(ImageTensor::new(target_h, target_w, 1, pixels)?)
}

/// Parameters of the window → spectrogram → image chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalConfig {
    pub sample_rate: f64,
    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub frame_hop: usize,
    pub taper: Taper,
    pub scaling: Scaling,
    pub image_size: usize,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            sample_rate: 100.0,
            window_len: 256,
            hop: 256,
            fft_size: 64,
            frame_hop: 16,
            taper: Taper::Hann,
            scaling: Scaling::Log1p,
            image_size: 64,
        }
    }
}

impl SignalConfig {
    pub fn window_image(&self, window: &AccelWindow) -> Result<ImageTensor> {
        let spec = stft(window, self.fft_size, self.frame_hop, self.taper)?;
        to_image(&spec, self.image_size, self.image_size, self.scaling)
    }
}

/// Z-axis sensor log: `timestamp_s,accel_z[,label]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccelLog {
    pub timestamps: Vec<f64>,
    pub accel_z: Vec<f64>,
    pub labels: Option<Vec<RoadClass>>,
}

impl AccelLog {
    pub fn from_stream(samples: Vec<f64>, sample_rate: f64, label: Option<RoadClass>) -> Self {
        let n = samples.len();
        Self {
            timestamps: (0..n).map(|i| i as f64 / sample_rate).collect(),
            accel_z: samples,
            labels: label.map(|l| vec![l; n]),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let csv_err = |line: usize, message: String| SignalError::Csv { line, message };
        let headers = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
        let names: Vec<&str> = headers.iter().collect();
        let has_label = match names.as_slice() {
            ["timestamp_s", "accel_z"] => false,
            ["timestamp_s", "accel_z", "label"] => true,
            _ => {
                return Err(csv_err(
                    1,
                    format!("expected header `timestamp_s,accel_z[,label]`, got `{}`", names.join(",")),
                ))
            }
        };
        let mut log = AccelLog { labels: has_label.then(Vec::new), ..Default::default() };
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| csv_err(line, e.to_string()))?;
            let num = |idx: usize, what: &str| -> Result<f64> {
                let v: f64 = record
                    .get(idx)
                    .ok_or_else(|| csv_err(line, format!("missing {what}")))?
                    .trim()
                    .parse()
                    .map_err(|_| csv_err(line, format!("bad {what}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(csv_err(line, format!("non-finite {what}")))
                }
            };
            let t = num(0, "timestamp_s")?;
            if log.timestamps.last().is_some_and(|&prev| t <= prev) {
                return Err(csv_err(line, "timestamps must be strictly increasing".into()));
            }
            log.timestamps.push(t);
            log.accel_z.push(num(1, "accel_z")?);
            if let Some(labels) = log.labels.as_mut() {
                let text = record.get(2).unwrap_or("").trim();
                labels.push(text.parse().map_err(|e: String| csv_err(line, e))?);
            }
        }
        Ok(log)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out =
            String::from(if self.labels.is_some() { "timestamp_s,accel_z,label\n" } else { "timestamp_s,accel_z\n" });
        for i in 0..self.accel_z.len() {
            out.push_str(&format!("{},{}", self.timestamps[i], self.accel_z[i]));
            if let Some(labels) = &self.labels {
                out.push(',');
                out.push_str(labels[i].as_str());
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}
