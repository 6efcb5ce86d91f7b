//! Synthetic five-class road data (acceleration streams and surface
//! textures), stratified splitting and the JSON dataset manifest.
//!
//! Every generated item is a pure function of `(seed, modality, class, index)`.
//! Damage is drawn from its own RNG stream so a damaged item and its undamaged
//! counterpart share the base surface exactly.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{ImageError, ImageTensor};
use crate::road::RoadClass;
use crate::signal::{AccelLog, SignalError};
use crate::weather::Modality;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid generator parameters: {0}")]
    BadParams(String),
    #[error("invalid split ratios {0:?}: need three non-negative values summing to 1")]
    BadRatios([f64; 3]),
    #[error("class {0} has no entries")]
    EmptyClass(RoadClass),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

const BASE_STREAM: u64 = 0;
const DAMAGE_STREAM: u64 = 1;

/// Roughness of one undamaged surface: a random-phase multisine with
/// components spread over `band_hz`, peak-scaled so its RMS is `amplitude/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceProfile {
    pub amplitude: f64,
    pub band_hz: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub seed: u64,
    pub sample_rate: f64,
    pub asphalt: SurfaceProfile,
    pub gravel: SurfaceProfile,
    pub pavement: SurfaceProfile,
    /// Sine components per multisine.
    pub components: usize,
    /// Joint spacing of pavement blocks, in bumps per second at unit speed.
    pub bump_frequency_hz: f64,
    pub bump_amplitude: f64,
    /// Mean impulses per second on damaged surfaces.
    pub impulse_rate_hz: f64,
    pub impulse_magnitude: f64,
    pub impulse_decay_s: f64,
    pub impulse_ring_hz: f64,
    /// Multiplies every frequency above.
    pub speed: f64,
    /// Standard deviation of white sensor noise.
    pub noise_floor: f64,
    /// Damage blobs per damaged image, inclusive range.
    pub blobs: [usize; 2],
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 7,
            sample_rate: 100.0,
            asphalt: SurfaceProfile { amplitude: 0.3, band_hz: [0.5, 6.0] },
            gravel: SurfaceProfile { amplitude: 1.0, band_hz: [8.0, 40.0] },
            pavement: SurfaceProfile { amplitude: 1.4, band_hz: [2.0, 20.0] },
            components: 12,
            bump_frequency_hz: 3.0,
            bump_amplitude: 2.0,
            impulse_rate_hz: 2.0,
            impulse_magnitude: 8.0,
            impulse_decay_s: 0.03,
            impulse_ring_hz: 15.0,
            speed: 1.0,
            noise_floor: 0.05,
            blobs: [3, 5],
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DatasetError::BadParams(m.to_string()));
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return bad("sample_rate must be positive");
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return bad("speed must be positive");
        }
        let nyquist = self.sample_rate / 2.0;
        for (name, p) in [("asphalt", self.asphalt), ("gravel", self.gravel), ("pavement", self.pavement)] {
            let [lo, hi] = p.band_hz;
            if !(p.amplitude >= 0.0 && lo >= 0.0 && lo <= hi && hi * self.speed < nyquist) {
                return bad(&format!("{name}: need amplitude >= 0 and 0 <= band low <= band high < Nyquist"));
            }
        }
        if !(self.pavement.amplitude > self.gravel.amplitude && self.gravel.amplitude > self.asphalt.amplitude) {
            return bad("roughness must order pavement > gravel > asphalt");
        }
        if self.components == 0 {
            return bad("components must be at least 1");
        }
        let non_negative = [
            self.bump_frequency_hz,
            self.bump_amplitude,
            self.impulse_rate_hz,
            self.impulse_magnitude,
            self.impulse_ring_hz,
            self.noise_floor,
        ];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || self.impulse_decay_s.is_nan()
            || self.impulse_decay_s <= 0.0
        {
            return bad("rates, magnitudes and noise must be non-negative; impulse decay positive");
        }
        if self.blobs[0] > self.blobs[1] {
            return bad("blobs range is reversed");
        }
        Ok(())
    }

    fn profile(&self, class: RoadClass) -> SurfaceProfile {
        match class.base() {
            RoadClass::Gravel => self.gravel,
            RoadClass::Pavement => self.pavement,
            _ => self.asphalt,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for item `index` of a class. Damaged classes use their base class's
/// seed so the underlying surface matches.
pub fn item_seed(seed: u64, modality: Modality, class: RoadClass, index: u64) -> u64 {
    let m = match modality {
        Modality::Camera => 1,
        Modality::Acceleration => 2,
    };
    splitmix(splitmix(splitmix(seed) ^ m) ^ class.base().index() as u64) ^ splitmix(index)
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Z-axis acceleration (m/s²) of `class` over `duration_s` seconds.
pub fn synth_accel(class: RoadClass, duration_s: f64, params: &SynthParams, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(DatasetError::BadParams(format!("duration must be positive, got {duration_s}")));
    }
    let fs = params.sample_rate;
    let n = (duration_s * fs).round().max(1.0) as usize;
    let mut out = vec![0.0; n];

    let mut base = rng(seed, BASE_STREAM);
    let profile = params.profile(class);
    let [lo, hi] = profile.band_hz;
    let k = params.components;
    let scale = profile.amplitude / (k as f64).sqrt();
    let tones: Vec<(f64, f64)> =
        (0..k).map(|_| (base.random_range(lo..=hi) * params.speed, base.random_range(0.0..2.0 * PI))).collect();
    let bump_phase = base.random_range(0.0..1.0);
    let noise = Normal::new(0.0, params.noise_floor).expect("validated noise floor");
    for (i, v) in out.iter_mut().enumerate() {
        let t = i as f64 / fs;
        *v = scale * tones.iter().map(|&(f, p)| (2.0 * PI * f * t + p).sin()).sum::<f64>();
        if class == RoadClass::Pavement {
            let s = (2.0 * PI * (params.bump_frequency_hz * params.speed * t + bump_phase)).sin().max(0.0);
            *v += params.bump_amplitude * s.powi(4);
        }
        *v += noise.sample(&mut base);
    }

    if class.is_damaged() {
        let support = impulse_support(params);
        for (t, magnitude) in impulses(duration_s, params, seed) {
            let start = (t * fs).ceil() as usize;
            for j in 0..support.min(n.saturating_sub(start)) {
                let tau = (start + j) as f64 / fs - t;
                out[start + j] += magnitude
                    * (-tau / params.impulse_decay_s).exp()
                    * (2.0 * PI * params.impulse_ring_hz * tau + PI / 2.0).sin();
            }
        }
    }
    Ok(out)
}

/// Samples each damage impulse rings for.
fn impulse_support(params: &SynthParams) -> usize {
    (6.0 * params.impulse_decay_s * params.sample_rate).ceil() as usize
}

/// Poisson onset times (s) and signed magnitudes of damage impulses.
fn impulses(duration_s: f64, params: &SynthParams, seed: u64) -> Vec<(f64, f64)> {
    if params.impulse_rate_hz <= 0.0 {
        return Vec::new();
    }
    let mut damage = rng(seed, DAMAGE_STREAM);
    let gaps = Exp::new(params.impulse_rate_hz).expect("validated rate");
    let mut out = Vec::new();
    let mut t = gaps.sample(&mut damage);
    while t < duration_s {
        let sign = if damage.random_bool(0.5) { 1.0 } else { -1.0 };
        out.push((t, sign * params.impulse_magnitude * damage.random_range(0.7..1.3)));
        t += gaps.sample(&mut damage);
    }
    out
}

/// Grayscale surface texture: smooth asphalt, speckled gravel, block pavement;
/// damaged classes add dark blobs over the base texture.
pub fn synth_image(class: RoadClass, size: usize, params: &SynthParams, seed: u64) -> Result<ImageTensor> {
    params.validate()?;
    if size < 16 {
        return Err(DatasetError::BadParams(format!("image size must be at least 16, got {size}")));
    }
    let s = size as f64;
    let mut px = vec![0.0; size * size];
    let mut base = rng(seed, BASE_STREAM);
    match class.base() {
        RoadClass::Asphalt => {
            let level = base.random_range(0.30..0.38);
            let (fx, fy, phase) =
                (base.random_range(0.5..2.0) / s, base.random_range(0.5..2.0) / s, base.random_range(0.0..2.0 * PI));
            let grain = Normal::new(0.0, 0.02).unwrap();
            for y in 0..size {
                for x in 0..size {
                    let wave = 0.03 * (2.0 * PI * (fx * x as f64 + fy * y as f64) + phase).sin();
                    px[y * size + x] = level + wave + grain.sample(&mut base);
                }
            }
        }
        RoadClass::Gravel => {
            let level = base.random_range(0.60..0.68);
            let grain = Normal::new(0.0, 0.10).unwrap();
            for v in px.iter_mut() {
                *v = level + grain.sample(&mut base);
            }
            for _ in 0..size * size / 12 {
                let (cy, cx) = (base.random_range(0..size), base.random_range(0..size));
                let r = base.random_range(1..=2) as isize;
                let shade = if base.random_bool(0.5) { 0.2 } else { -0.2 };
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (y, x) = (cy as isize + dy, cx as isize + dx);
                        if dy * dy + dx * dx <= r * r
                            && (0..size as isize).contains(&y)
                            && (0..size as isize).contains(&x)
                        {
                            px[y as usize * size + x as usize] += shade;
                        }
                    }
                }
            }
        }
        _ => {
            // running-bond blocks with mortar joints
            let bw = (s / base.random_range(6.0..9.0)).max(4.0) as usize;
            let bh = (bw / 2).max(2);
            let (ox, oy) = (base.random_range(0..bw), base.random_range(0..bh));
            let level = base.random_range(0.80..0.90);
            let mortar = base.random_range(0.10..0.20);
            let cols = size / bw + 3;
            let jitter: Vec<f64> = (0..(size / bh + 3) * cols).map(|_| base.random_range(-0.05..0.05)).collect();
            let grain = Normal::new(0.0, 0.02).unwrap();
            for y in 0..size {
                let row = (y + oy) / bh;
                let shift = if row % 2 == 1 { bw / 2 } else { 0 };
                for x in 0..size {
                    let col = (x + ox + shift) / bw;
                    let joint = (y + oy) % bh == 0 || (x + ox + shift) % bw == 0;
                    px[y * size + x] =
                        if joint { mortar } else { level + jitter[row * cols + col] } + grain.sample(&mut base);
                }
            }
        }
    }
    if class.is_damaged() {
        let mut damage = rng(seed, DAMAGE_STREAM);
        let count = damage.random_range(params.blobs[0]..=params.blobs[1]);
        let shade = Normal::new(0.02, 0.01).unwrap();
        for _ in 0..count {
            let (cy, cx) = (damage.random_range(0.0..s), damage.random_range(0.0..s));
            let (ry, rx) = (damage.random_range(s / 10.0..s / 5.0), damage.random_range(s / 10.0..s / 5.0));
            for y in 0..size {
                for x in 0..size {
                    let (dy, dx) = ((y as f64 - cy) / ry, (x as f64 - cx) / rx);
                    if dy * dy + dx * dx <= 1.0 {
                        px[y * size + x] = shade.sample(&mut damage);
                    }
                }
            }
        }
    }
    px.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(ImageTensor::new(size, size, 1, px)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Self::Train, Self::Val, Self::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|v| v.as_str() == s).ok_or_else(|| format!("unknown split `{s}`"))
    }
}

/// One data point. `path` is relative to the manifest's directory; `split`
/// is absent until the manifest has been split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub modality: Modality,
    pub road_class: RoadClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// Class ordinals follow `RoadClass`: asphalt=0, asphalt_damaged=1, gravel=2,
/// gravel_damaged=3, pavement=4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// Generator seed.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<[f64; 3]>,
    pub generator_params: SynthParams,
    /// Keyed by split name, or `all` for an unsplit manifest.
    pub class_counts: IndexMap<String, IndexMap<RoadClass, usize>>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(generator_params: SynthParams, entries: Vec<ManifestEntry>) -> Self {
        let mut m = Self {
            seed: generator_params.seed,
            split_seed: None,
            ratios: None,
            generator_params,
            class_counts: IndexMap::new(),
            entries,
        };
        m.recount();
        m
    }

    pub fn recount(&mut self) {
        let mut counts: IndexMap<String, IndexMap<RoadClass, usize>> = IndexMap::new();
        let keys: Vec<&str> = if self.entries.iter().any(|e| e.split.is_some()) {
            Split::ALL.iter().map(|s| s.as_str()).collect()
        } else {
            vec!["all"]
        };
        for key in keys {
            counts.insert(key.to_string(), RoadClass::ALL.iter().map(|&c| (c, 0)).collect());
        }
        for e in &self.entries {
            let key = e.split.map_or("all", Split::as_str);
            if let Some(row) = counts.get_mut(key) {
                *row.entry(e.road_class).or_default() += 1;
            }
        }
        self.class_counts = counts;
    }

    pub fn count(&self, split: Split, class: RoadClass) -> usize {
        self.entries.iter().filter(|e| e.split == Some(split) && e.road_class == class).count()
    }

    pub fn select(&self, modality: Modality, split: Option<Split>) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.modality == modality && (split.is_none() || e.split == split))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Size of a held-out share: `floor(ratio·n)`, nudged so exact products such
/// as `0.15·800` are not lost to representation error.
pub fn held_out(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// Assigns every entry a split, per modality and class: a seeded shuffle,
/// then `floor(r_val·n)` to val, `floor(r_test·n)` to test and the rest to
/// train. Every class must be present in every modality that appears.
pub fn stratified_split(entries: &[ManifestEntry], ratios: [f64; 3], seed: u64) -> Result<Vec<ManifestEntry>> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DatasetError::BadRatios(ratios));
    }
    let mut out = entries.to_vec();
    let mut modalities: Vec<Modality> = entries.iter().map(|e| e.modality).collect();
    modalities.sort();
    modalities.dedup();
    if modalities.is_empty() {
        return Err(DatasetError::EmptyClass(RoadClass::Asphalt));
    }
    for (modality, class) in modalities.iter().flat_map(|&m| RoadClass::ALL.map(|c| (m, c))) {
        let mut members: Vec<usize> =
            (0..entries.len()).filter(|&i| entries[i].road_class == class && entries[i].modality == modality).collect();
        if members.is_empty() {
            return Err(DatasetError::EmptyClass(class));
        }
        members.shuffle(&mut rng(splitmix(seed) ^ class.index() as u64, modality as u64));
        let n = members.len();
        let val = held_out(ratios[1], n);
        let test = held_out(ratios[2], n).min(n - val);
        for (rank, &i) in members.iter().enumerate() {
            out[i].split = Some(if rank < val {
                Split::Val
            } else if rank < val + test {
                Split::Test
            } else {
                Split::Train
            });
        }
    }
    Ok(out)
}

/// Writes `per_class` items of every class under `root` and returns the
/// unsplit manifest. Acceleration items are one `duration_s` stream each
/// (CSV); camera items are `image_size`² PGM textures.
pub fn synthesize(
    root: impl AsRef<Path>,
    modality: Modality,
    per_class: usize,
    image_size: usize,
    duration_s: f64,
    params: &SynthParams,
) -> Result<DatasetManifest> {
    params.validate()?;
    let root = root.as_ref();
    let mut entries = Vec::with_capacity(per_class * RoadClass::COUNT);
    for class in RoadClass::ALL {
        let dir = format!("{}/{}", modality.as_str(), class.as_str());
        std::fs::create_dir_all(root.join(&dir))?;
        for i in 0..per_class {
            let seed = item_seed(params.seed, modality, class, i as u64);
            let path = match modality {
                Modality::Camera => {
                    let path = format!("{dir}/{i:05}.pgm");
                    synth_image(class, image_size, params, seed)?.write_pnm(root.join(&path))?;
                    path
                }
                Modality::Acceleration => {
                    let path = format!("{dir}/{i:05}.csv");
                    let stream = synth_accel(class, duration_s, params, seed)?;
                    AccelLog::from_stream(stream, params.sample_rate, Some(class)).write(root.join(&path))?;
                    path
                }
            };
            entries.push(ManifestEntry { path, modality, road_class: class, split: None });
        }
    }
    Ok(DatasetManifest::new(params.clone(), entries))
}
