//! Dense `H × W × C` float images, bilinear resizing and binary PGM/PPM I/O.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {height}x{width}x{channels}")]
    BadDims { height: usize, width: usize, channels: usize },
    #[error("expected {expected} pixel values, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("pixel value {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("unsupported channel count {0} (PGM needs 1, PPM needs 3)")]
    Channels(usize),
    #[error("malformed PNM: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major, channel-interleaved image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(ImageError::BadDims { height, width, channels });
        }
        let expected = height * width * channels;
        if pixels.len() != expected {
            return Err(ImageError::BadLength { expected, actual: pixels.len() });
        }
        if let Some((index, &value)) = pixels.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self { height, width, channels, pixels })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// Planar copy (`C × H × W`), the layout the network consumes.
    pub fn to_planar(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.pixels.len()];
        let plane = self.height * self.width;
        for (i, px) in self.pixels.chunks_exact(self.channels).enumerate() {
            for (c, v) in px.iter().enumerate() {
                out[c * plane + i] = *v;
            }
        }
        out
    }

    /// Replicates a single channel `channels` times; averages to gray when
    /// going from several channels to one.
    pub fn with_channels(&self, channels: usize) -> Result<Self, ImageError> {
        if channels == self.channels {
            return Ok(self.clone());
        }
        if channels == 0 {
            return Err(ImageError::BadDims { height: self.height, width: self.width, channels });
        }
        let gray: Vec<f64> =
            self.pixels.chunks_exact(self.channels).map(|px| px.iter().sum::<f64>() / self.channels as f64).collect();
        let pixels = gray.iter().flat_map(|&v| std::iter::repeat_n(v, channels)).collect();
        Self::new(self.height, self.width, channels, pixels)
    }

    pub fn resize(&self, height: usize, width: usize) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::BadDims { height, width, channels: self.channels });
        }
        let mut out = vec![0.0; height * width * self.channels];
        for c in 0..self.channels {
            let plane: Vec<f64> = self.pixels.iter().skip(c).step_by(self.channels).copied().collect();
            let resized = bilinear_resize(&plane, self.height, self.width, height, width);
            for (i, v) in resized.into_iter().enumerate() {
                out[i * self.channels + c] = v;
            }
        }
        Ok(Self { height, width, channels: self.channels, pixels: out })
    }

    pub fn write_pnm(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        w.write_all(&self.to_pnm_bytes()?)?;
        w.flush()?;
        Ok(())
    }

    /// Binary PGM (`P5`) for one channel, PPM (`P6`) for three; maxval 255.
    pub fn to_pnm_bytes(&self) -> Result<Vec<u8>, ImageError> {
        let magic = match self.channels {
            1 => "P5",
            3 => "P6",
            n => return Err(ImageError::Channels(n)),
        };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
        Ok(out)
    }

    pub fn read_pnm(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let file = std::fs::File::open(path)?;
        Self::from_pnm_reader(BufReader::new(file))
    }

    pub fn from_pnm_reader<R: BufRead>(mut reader: R) -> Result<Self, ImageError> {
        let magic = next_token(&mut reader)?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            other => return Err(ImageError::Format(format!("unsupported magic `{other}`"))),
        };
        let mut number = |what: &str| -> Result<usize, ImageError> {
            next_token(&mut reader)?.parse().map_err(|_| ImageError::Format(format!("bad {what}")))
        };
        let width = number("width")?;
        let height = number("height")?;
        let maxval = number("maxval")?;
        if maxval == 0 || maxval > 255 {
            return Err(ImageError::Format(format!("unsupported maxval {maxval}")));
        }
        let mut raw = vec![0u8; width * height * channels];
        reader.read_exact(&mut raw).map_err(|_| ImageError::Format("truncated raster".into()))?;
        let pixels = raw.iter().map(|&b| b as f64 / maxval as f64).collect();
        Self::new(height, width, channels, pixels)
    }
}

// Whitespace-separated header token; comments run from '#' to end of line.
// Consumes exactly one whitespace byte after the token.
fn next_token<R: BufRead>(reader: &mut R) -> Result<String, ImageError> {
    let mut token = String::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte)? == 0 {
            return if token.is_empty() {
                Err(ImageError::Format("unexpected end of header".into()))
            } else {
                Ok(token)
            };
        }
        match byte[0] {
            b'#' if token.is_empty() => {
                let mut skip = Vec::new();
                reader.read_until(b'\n', &mut skip)?;
            }
            b if b.is_ascii_whitespace() => {
                if !token.is_empty() {
                    return Ok(token);
                }
            }
            b => token.push(b as char),
        }
    }
}

/// Bilinear resize of a row-major `src_h × src_w` plane with corner-aligned
/// sampling: output pixel `i` reads source coordinate
/// `i · (src − 1) / (dst − 1)`, so corners map to corners and resizing to the
/// same size is the identity.
pub fn bilinear_resize(src: &[f64], src_h: usize, src_w: usize, dst_h: usize, dst_w: usize) -> Vec<f64> {
    assert_eq!(src.len(), src_h * src_w, "plane size mismatch");
    let coords = |dst: usize, n: usize| -> Vec<(usize, usize, f64)> {
        (0..dst)
            .map(|i| {
                let pos = if dst > 1 { (i * (n - 1)) as f64 / (dst - 1) as f64 } else { (n - 1) as f64 / 2.0 };
                let lo = (pos.floor() as usize).min(n - 1);
                let hi = (lo + 1).min(n - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let ys = coords(dst_h, src_h);
    let xs = coords(dst_w, src_w);
    let mut out = Vec::with_capacity(dst_h * dst_w);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = lerp(src[y0 * src_w + x0], src[y0 * src_w + x1], fx);
            let bottom = lerp(src[y1 * src_w + x0], src[y1 * src_w + x1], fx);
            out.push(lerp(top, bottom, fy));
        }
    }
    out
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}
