//! Deterministic image corruptions at severities 1–5.
//!
//! All arithmetic runs on f32 planes in [0, 1]; the result is clamped and
//! rounded half away from zero back to 8 bits. Random draws come from
//! [`rng::Rng`] seeded by the spec, so `corrupt` is a pure function of its
//! inputs.

mod blur;
mod color;
mod filter;
mod geometric;
mod image;
mod noise;
pub mod rng;
pub mod schedule;
mod seed;
mod weather;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::geometric::jpeg_encode;
pub use self::image::ImageBuffer;
pub use self::schedule::{NoiseMode, ParamSchedule};
pub use self::seed::derive_seed;

use self::image::Planes;
use self::rng::Rng;

/// Smallest accepted side length for kinds built on convolution or warping.
pub const MIN_BLUR_SIDE: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    DefocusBlur,
    MotionBlur,
    ZoomBlur,
    Snow,
    Frost,
    Fog,
    Brightness,
    Contrast,
    ElasticTransform,
    Pixelate,
    JpegCompression,
}

impl CorruptionKind {
    /// Canonical order, as used in result tables.
    pub const ALL: [CorruptionKind; 14] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::ShotNoise,
        CorruptionKind::ImpulseNoise,
        CorruptionKind::DefocusBlur,
        CorruptionKind::MotionBlur,
        CorruptionKind::ZoomBlur,
        CorruptionKind::Snow,
        CorruptionKind::Frost,
        CorruptionKind::Fog,
        CorruptionKind::Brightness,
        CorruptionKind::Contrast,
        CorruptionKind::ElasticTransform,
        CorruptionKind::Pixelate,
        CorruptionKind::JpegCompression,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).expect("listed")
    }

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::ShotNoise => "shot_noise",
            CorruptionKind::ImpulseNoise => "impulse_noise",
            CorruptionKind::DefocusBlur => "defocus_blur",
            CorruptionKind::MotionBlur => "motion_blur",
            CorruptionKind::ZoomBlur => "zoom_blur",
            CorruptionKind::Snow => "snow",
            CorruptionKind::Frost => "frost",
            CorruptionKind::Fog => "fog",
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::Contrast => "contrast",
            CorruptionKind::ElasticTransform => "elastic_transform",
            CorruptionKind::Pixelate => "pixelate",
            CorruptionKind::JpegCompression => "jpeg_compression",
        }
    }

    /// Row label used in tables.
    pub fn display_name(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "Gaussian Noise",
            CorruptionKind::ShotNoise => "Shot Noise",
            CorruptionKind::ImpulseNoise => "Impulse Noise",
            CorruptionKind::DefocusBlur => "Defocus Blur",
            CorruptionKind::MotionBlur => "Motion Blur",
            CorruptionKind::ZoomBlur => "Zoom Blur",
            CorruptionKind::Snow => "Snow",
            CorruptionKind::Frost => "Frost",
            CorruptionKind::Fog => "Fog",
            CorruptionKind::Brightness => "Brightness",
            CorruptionKind::Contrast => "Contrast",
            CorruptionKind::ElasticTransform => "Elastic transform",
            CorruptionKind::Pixelate => "Pixelate",
            CorruptionKind::JpegCompression => "JPEG compression",
        }
    }

    /// Kinds that need [`MIN_BLUR_SIDE`] pixels per side.
    pub fn min_side(self) -> u32 {
        match self {
            CorruptionKind::DefocusBlur
            | CorruptionKind::MotionBlur
            | CorruptionKind::ZoomBlur
            | CorruptionKind::Snow
            | CorruptionKind::ElasticTransform => MIN_BLUR_SIDE,
            _ => 1,
        }
    }

    /// Kinds whose output pixels move relative to the source geometry.
    pub fn moves_geometry(self) -> bool {
        matches!(self, CorruptionKind::ElasticTransform)
    }

    /// Parses a comma-separated list, or `all`.
    pub fn parse_list(s: &str) -> Result<Vec<CorruptionKind>> {
        if s.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        s.split(',').map(|p| p.trim().parse()).collect()
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::domain(format!("unknown corruption kind `{s}`")))
    }
}

/// Severity level, always in 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Severity(u8);

impl Severity {
    pub const ALL: [Severity; 5] = [Severity(1), Severity(2), Severity(3), Severity(4), Severity(5)];

    pub fn new(level: u8) -> Result<Self> {
        if (1..=5).contains(&level) {
            Ok(Self(level))
        } else {
            Err(Error::domain(format!("severity must be in 1..=5, got {level}")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    fn slot(self) -> usize {
        self.0 as usize - 1
    }

    /// Parses `3`, `1-5` or `1,2,4`.
    pub fn parse_list(s: &str) -> Result<Vec<Severity>> {
        let bad = || Error::domain(format!("cannot parse severities `{s}`"));
        let mut out = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            if let Some((a, b)) = part.split_once('-') {
                let a: u8 = a.trim().parse().map_err(|_| bad())?;
                let b: u8 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                for v in a..=b {
                    out.push(Severity::new(v)?);
                }
            } else {
                out.push(Severity::new(part.parse().map_err(|_| bad())?)?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl TryFrom<u8> for Severity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Severity::new(v)
    }
}

impl From<Severity> for u8 {
    fn from(s: Severity) -> u8 {
        s.0
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One transform application: what, how strong, and the RNG seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8, seed: u64) -> Result<Self> {
        Ok(Self {
            kind,
            severity: Severity::new(severity)?,
            seed,
        })
    }
}

/// User-supplied frost photographs, used instead of the procedural texture.
#[derive(Debug, Clone, Default)]
pub struct FrostOverlays {
    images: Vec<ImageBuffer>,
}

impl FrostOverlays {
    pub fn new(images: Vec<ImageBuffer>) -> Self {
        Self { images }
    }

    /// Loads every PNG/JPEG in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| is_image_path(p))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::domain(format!("no frost overlay images in {}", dir.display())));
        }
        let images = paths.iter().map(|p| ImageBuffer::open(p)).collect::<Result<_>>()?;
        Ok(Self { images })
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Seeded choice of overlay and crop offset; small overlays are tiled by reflection.
    fn texture(&self, w: usize, h: usize, rng: &mut Rng) -> [Vec<f32>; 3] {
        let src = Planes::from_image(&self.images[rng.below(self.images.len() as u64) as usize]);
        let ox = rng.below(src.width.saturating_sub(w) as u64 + 1) as isize;
        let oy = rng.below(src.height.saturating_sub(h) as u64 + 1) as isize;
        let mut out: [Vec<f32>; 3] = Default::default();
        for (c, plane) in out.iter_mut().enumerate() {
            plane.reserve(w * h);
            for y in 0..h {
                let sy = filter::reflect101(oy + y as isize, src.height);
                for x in 0..w {
                    let sx = filter::reflect101(ox + x as isize, src.width);
                    plane.push(src.planes[c][sy * src.width + sx]);
                }
            }
        }
        out
    }
}

pub fn is_image_path(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

/// Applies `spec` to `img` with the procedural frost texture.
pub fn corrupt(img: &ImageBuffer, spec: &CorruptionSpec, params: &ParamSchedule) -> Result<ImageBuffer> {
    corrupt_with(img, spec, params, None)
}

/// Applies `spec` to `img`; `overlays`, when given and non-empty, replace the procedural frost.
pub fn corrupt_with(
    img: &ImageBuffer,
    spec: &CorruptionSpec,
    params: &ParamSchedule,
    overlays: Option<&FrostOverlays>,
) -> Result<ImageBuffer> {
    let min = spec.kind.min_side();
    if img.width() < min || img.height() < min {
        return Err(Error::DegenerateInput {
            kind: spec.kind.name(),
            width: img.width(),
            height: img.height(),
            min,
        });
    }
    let s = spec.severity.slot();
    let mut rng = Rng::new(spec.seed);

    if spec.kind == CorruptionKind::JpegCompression {
        return geometric::jpeg_round_trip(img, params.jpeg_compression[s]);
    }

    let x = Planes::from_image(img);
    let mode = params.noise_mode;
    let out = match spec.kind {
        CorruptionKind::GaussianNoise => noise::gaussian(&x, params.gaussian_noise[s], mode, &mut rng),
        CorruptionKind::ShotNoise => noise::shot(&x, params.shot_noise[s], mode, &mut rng),
        CorruptionKind::ImpulseNoise => noise::impulse(&x, params.impulse_noise[s], mode, &mut rng),
        CorruptionKind::DefocusBlur => blur::defocus(&x, params.defocus_blur[s]),
        CorruptionKind::MotionBlur => blur::motion(&x, params.motion_blur[s], &mut rng),
        CorruptionKind::ZoomBlur => blur::zoom(&x, params.zoom_blur[s]),
        CorruptionKind::Snow => weather::snow(&x, params.snow[s], &mut rng),
        CorruptionKind::Frost => {
            let texture = match overlays.filter(|o| !o.is_empty()) {
                Some(o) => o.texture(x.width, x.height, &mut rng),
                None => {
                    let t = weather::frost_texture(x.width, x.height, &mut rng);
                    [t.clone(), t.clone(), t]
                }
            };
            weather::frost(&x, params.frost[s], &texture)
        }
        CorruptionKind::Fog => weather::fog(&x, params.fog[s], &mut rng),
        CorruptionKind::Brightness => color::brightness(&x, params.brightness[s]),
        CorruptionKind::Contrast => color::contrast(&x, params.contrast[s]),
        CorruptionKind::ElasticTransform => geometric::elastic(&x, params.elastic_transform[s], &mut rng),
        CorruptionKind::Pixelate => geometric::pixelate(&x, params.pixelate[s]),
        CorruptionKind::JpegCompression => unreachable!("handled above"),
    };
    Ok(out.to_image())
}

/// File encoding of a corrupted image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputEncoding {
    Png,
    Jpeg,
}

/// Corrupts `img` and returns the bytes to store: PNG, or for JPEG compression the
/// degraded JPEG stream itself.
pub fn corrupt_encoded(
    img: &ImageBuffer,
    spec: &CorruptionSpec,
    params: &ParamSchedule,
    overlays: Option<&FrostOverlays>,
) -> Result<(Vec<u8>, OutputEncoding)> {
    if spec.kind == CorruptionKind::JpegCompression {
        let min = spec.kind.min_side();
        if img.width() < min || img.height() < min {
            return Err(Error::DegenerateInput {
                kind: spec.kind.name(),
                width: img.width(),
                height: img.height(),
                min,
            });
        }
        let q = params.jpeg_compression[spec.severity.slot()];
        return Ok((jpeg_encode(img, q)?, OutputEncoding::Jpeg));
    }
    let out = corrupt_with(img, spec, params, overlays)?;
    Ok((out.encode_png()?, OutputEncoding::Png))
}
