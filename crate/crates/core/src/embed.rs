//! Deterministic toy feature extractor.
//!
//! Pipeline: per-channel mean pooling on a `g × g` grid, a fixed seeded
//! Gaussian projection to `output_dim`, ReLU, then scaling to unit norm.
//! Grayscale input is replicated to three channels so that one projection
//! matrix serves both channel layouts.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::corpus::FeatureVector;
use crate::rng;

const PROJECTION_CHANNELS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("image is empty")]
    EmptyImage,
    #[error("unsupported channel count {0}, expected 1 or 3")]
    Channels(usize),
    #[error("pixel buffer has {found} values, expected {expected}")]
    BufferSize { expected: usize, found: usize },
    #[error("pixel value {0} outside [0, 1]")]
    PixelRange(f64),
    #[error("invalid extractor config: {0}")]
    Config(&'static str),
    #[error("invalid digest string")]
    BadDigest,
}

/// SHA-256 content digest identifying a feature source.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Self(Sha256::digest(bytes).into())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({self})")
    }
}

impl FromStr for Digest {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 64 || !s.is_ascii() {
            return Err(EmbedError::BadDigest);
        }
        let mut out = [0u8; 32];
        for (i, b) in out.iter_mut().enumerate() {
            *b = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| EmbedError::BadDigest)?;
        }
        Ok(Self(out))
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Row-major `height × width × channels` pixel buffer with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl ImageTensor {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self, EmbedError> {
        let img = Self { width, height, channels, pixels };
        img.validate()?;
        Ok(img)
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.width == 0 || self.height == 0 {
            return Err(EmbedError::EmptyImage);
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(EmbedError::Channels(self.channels));
        }
        let expected = self.width * self.height * self.channels;
        if self.pixels.len() != expected {
            return Err(EmbedError::BufferSize { expected, found: self.pixels.len() });
        }
        if let Some(&v) = self.pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(EmbedError::PixelRange(v));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    fn at(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.pixels[(row * self.width + col) * self.channels + ch]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub patch_grid: usize,
    pub output_dim: usize,
    pub projection_seed: u64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self { patch_grid: 8, output_dim: 64, projection_seed: 0 }
    }
}

/// Immutable extractor: config plus its materialized projection matrix.
#[derive(Debug, Clone)]
pub struct Extractor {
    cfg: ExtractorConfig,
    /// `output_dim` rows of `g² · 3` entries.
    projection: Vec<f64>,
    digest: Digest,
}

impl Extractor {
    pub fn new(cfg: ExtractorConfig) -> Result<Self, EmbedError> {
        if cfg.patch_grid == 0 {
            return Err(EmbedError::Config("patch_grid must be positive"));
        }
        if cfg.output_dim == 0 {
            return Err(EmbedError::Config("output_dim must be positive"));
        }
        let inputs = cfg.patch_grid * cfg.patch_grid * PROJECTION_CHANNELS;
        let scale = 1.0 / (inputs as f64).sqrt();
        let mut rng = rng::rng(cfg.projection_seed);
        let projection: Vec<f64> = (0..cfg.output_dim * inputs)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect();

        let mut h = Sha256::new();
        h.update(b"openset-extractor-v1");
        h.update((cfg.patch_grid as u64).to_le_bytes());
        h.update((cfg.output_dim as u64).to_le_bytes());
        h.update(cfg.projection_seed.to_le_bytes());
        for v in &projection {
            h.update(v.to_le_bytes());
        }
        let digest = Digest(h.finalize().into());
        Ok(Self { cfg, projection, digest })
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.cfg
    }

    /// Content hash of the config and projection matrix.
    pub fn fingerprint(&self) -> Digest {
        self.digest
    }

    pub fn output_dim(&self) -> usize {
        self.cfg.output_dim
    }

    pub fn extract(&self, image: &ImageTensor) -> Result<FeatureVector, EmbedError> {
        image.validate()?;
        let pooled = self.pool(image);
        let inputs = pooled.len();
        let mut out: Vec<f64> = self
            .projection
            .chunks_exact(inputs)
            .map(|row| row.iter().zip(&pooled).map(|(w, x)| w * x).sum::<f64>().max(0.0))
            .collect();
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(out)
    }

    /// Mean of each grid cell, channel-minor. Cells always cover at least one
    /// pixel, so images smaller than the grid are upsampled by repetition.
    fn pool(&self, image: &ImageTensor) -> Vec<f64> {
        let g = self.cfg.patch_grid;
        let span = |i: usize, len: usize| (i * len / g, ((i + 1) * len).div_ceil(g));
        let mut pooled = Vec::with_capacity(g * g * PROJECTION_CHANNELS);
        for gy in 0..g {
            let (r0, r1) = span(gy, image.height);
            for gx in 0..g {
                let (c0, c1) = span(gx, image.width);
                let area = ((r1 - r0) * (c1 - c0)) as f64;
                for ch in 0..PROJECTION_CHANNELS {
                    let src = if image.channels == 1 { 0 } else { ch };
                    let mut sum = 0.0;
                    for r in r0..r1 {
                        for c in c0..c1 {
                            sum += image.at(r, c, src);
                        }
                    }
                    pooled.push(sum / area);
                }
            }
        }
        pooled
    }
}

/// Convenience wrapper for one-off extraction.
pub fn extract(image: &ImageTensor, cfg: ExtractorConfig) -> Result<FeatureVector, EmbedError> {
    Extractor::new(cfg)?.extract(image)
}

pub fn extractor_fingerprint(cfg: ExtractorConfig) -> Result<Digest, EmbedError> {
    Ok(Extractor::new(cfg)?.fingerprint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_image(seed: u64, w: usize, h: usize, c: usize) -> ImageTensor {
        let mut r = rng::rng(seed);
        let px = (0..w * h * c).map(|_| r.random::<f64>()).collect();
        ImageTensor::new(w, h, c, px).unwrap()
    }

    #[test]
    fn zero_image_maps_to_zero() {
        let img = ImageTensor::new(5, 7, 3, vec![0.0; 105]).unwrap();
        let v = extract(&img, ExtractorConfig::default()).unwrap();
        assert_eq!(v.len(), 64);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unit_norm_non_negative_deterministic() {
        let ex = Extractor::new(ExtractorConfig::default()).unwrap();
        for (seed, w, h, c) in [(1, 40, 30, 3), (2, 3, 2, 1), (3, 400, 400, 3), (4, 9, 17, 1)] {
            let img = random_image(seed, w, h, c);
            let a = ex.extract(&img).unwrap();
            let b = ex.extract(&img).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 64);
            assert!(a.iter().all(|&x| x >= 0.0));
            let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn grayscale_matches_replicated_rgb() {
        let gray = random_image(9, 6, 6, 1);
        let rgb_px: Vec<f64> = gray.pixels.iter().flat_map(|&v| [v, v, v]).collect();
        let rgb = ImageTensor::new(6, 6, 3, rgb_px).unwrap();
        let ex = Extractor::new(ExtractorConfig::default()).unwrap();
        assert_eq!(ex.extract(&gray).unwrap(), ex.extract(&rgb).unwrap());
    }

    #[test]
    fn fingerprints() {
        let a = ExtractorConfig::default();
        let b = ExtractorConfig { projection_seed: 1, ..a };
        assert_eq!(extractor_fingerprint(a).unwrap(), extractor_fingerprint(a).unwrap());
        assert_ne!(extractor_fingerprint(a).unwrap(), extractor_fingerprint(b).unwrap());
        let d = extractor_fingerprint(a).unwrap();
        assert_eq!(d.to_string().parse::<Digest>().unwrap(), d);
    }

    #[test]
    fn invalid_images() {
        assert_eq!(ImageTensor::new(0, 3, 1, vec![]).unwrap_err(), EmbedError::EmptyImage);
        assert_eq!(ImageTensor::new(1, 1, 2, vec![0.0; 2]).unwrap_err(), EmbedError::Channels(2));
        assert!(matches!(
            ImageTensor::new(2, 2, 1, vec![0.0; 3]),
            Err(EmbedError::BufferSize { .. })
        ));
        assert_eq!(
            ImageTensor::new(1, 1, 1, vec![1.5]).unwrap_err(),
            EmbedError::PixelRange(1.5)
        );
    }
}
