//! Per-severity parameter tables.
//!
//! Defaults follow the common-corruptions reference suite (the detection
//! variant, which scales elastic and fog fields with the image size). Any
//! table can be replaced from a TOML or JSON file; kinds left out of the
//! file keep their defaults.
//!
//! ```toml
//! noise_mode = "channel-coherent"     # or "per-channel"
//! gaussian_noise = [0.08, 0.12, 0.18, 0.26, 0.38]
//!
//! [[defocus_blur]]
//! radius = 3.0
//! alias_sigma = 0.1
//! # ... five entries per table
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CorruptionKind;
use crate::error::{Error, Result};

/// How noise kinds draw random numbers across the three channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// One draw per pixel location, shared by all channels.
    ChannelCoherent,
    /// Independent draws per channel.
    PerChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefocusParams {
    pub radius: f32,
    pub alias_sigma: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub radius: u32,
    pub sigma: f32,
}

/// Zoom factors `1, 1 + step, ..., 1 + (count - 1)·step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoomParams {
    pub step: f32,
    pub count: u32,
}

impl ZoomParams {
    pub fn factors(&self) -> Vec<f32> {
        (0..self.count).map(|i| 1.0 + i as f32 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnowParams {
    pub mean: f32,
    pub std: f32,
    pub zoom: f32,
    pub threshold: f32,
    pub blur_radius: u32,
    pub blur_sigma: f32,
    /// Weight of the original image in the whitened base layer.
    pub blend: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrostParams {
    pub image_weight: f32,
    pub frost_weight: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FogParams {
    pub strength: f32,
    pub wibble_decay: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    /// Scale applied to the smoothed displacement field.
    pub alpha: f32,
    /// Smoothing sigma as a fraction of each image side.
    pub sigma_frac: f32,
    /// Bound of the raw uniform displacement, as a fraction of the image height.
    pub max_offset_frac: f32,
    /// Bound of the affine control-point jitter, as a fraction of the shorter side.
    pub affine_frac: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSchedule {
    pub noise_mode: NoiseMode,
    pub gaussian_noise: [f32; 5],
    pub shot_noise: [f32; 5],
    pub impulse_noise: [f32; 5],
    pub defocus_blur: [DefocusParams; 5],
    pub motion_blur: [MotionParams; 5],
    pub zoom_blur: [ZoomParams; 5],
    pub snow: [SnowParams; 5],
    pub frost: [FrostParams; 5],
    pub fog: [FogParams; 5],
    pub brightness: [f32; 5],
    pub contrast: [f32; 5],
    pub elastic_transform: [ElasticParams; 5],
    pub pixelate: [f32; 5],
    pub jpeg_compression: [u8; 5],
}

const fn defocus(radius: f32, alias_sigma: f32) -> DefocusParams {
    DefocusParams { radius, alias_sigma }
}

const fn motion(radius: u32, sigma: f32) -> MotionParams {
    MotionParams { radius, sigma }
}

const fn zoom(step: f32, count: u32) -> ZoomParams {
    ZoomParams { step, count }
}

const fn snow(mean: f32, std: f32, zoom: f32, threshold: f32, blur_radius: u32, blur_sigma: f32, blend: f32) -> SnowParams {
    SnowParams {
        mean,
        std,
        zoom,
        threshold,
        blur_radius,
        blur_sigma,
        blend,
    }
}

const fn frost(image_weight: f32, frost_weight: f32) -> FrostParams {
    FrostParams {
        image_weight,
        frost_weight,
    }
}

const fn fog(strength: f32, wibble_decay: f32) -> FogParams {
    FogParams { strength, wibble_decay }
}

const fn elastic(alpha: f32, affine_frac: f32) -> ElasticParams {
    ElasticParams {
        alpha,
        sigma_frac: 0.01,
        max_offset_frac: 0.005,
        affine_frac,
    }
}

impl Default for ParamSchedule {
    fn default() -> Self {
        Self {
            noise_mode: NoiseMode::ChannelCoherent,
            gaussian_noise: [0.08, 0.12, 0.18, 0.26, 0.38],
            shot_noise: [60.0, 25.0, 12.0, 5.0, 3.0],
            impulse_noise: [0.03, 0.06, 0.09, 0.17, 0.27],
            defocus_blur: [
                defocus(3.0, 0.1),
                defocus(4.0, 0.5),
                defocus(6.0, 0.5),
                defocus(8.0, 0.5),
                defocus(10.0, 0.5),
            ],
            motion_blur: [motion(10, 3.0), motion(15, 5.0), motion(15, 8.0), motion(15, 12.0), motion(20, 15.0)],
            // arange(1, 1.11, .01), arange(1, 1.16, .01), arange(1, 1.21, .02), arange(1, 1.26, .02), arange(1, 1.31, .03)
            zoom_blur: [zoom(0.01, 11), zoom(0.01, 16), zoom(0.02, 11), zoom(0.02, 13), zoom(0.03, 11)],
            snow: [
                snow(0.1, 0.3, 3.0, 0.5, 10, 4.0, 0.8),
                snow(0.2, 0.3, 2.0, 0.5, 12, 4.0, 0.7),
                snow(0.55, 0.3, 4.0, 0.9, 12, 8.0, 0.7),
                snow(0.55, 0.3, 4.5, 0.85, 12, 8.0, 0.65),
                snow(0.55, 0.3, 2.5, 0.85, 12, 12.0, 0.55),
            ],
            frost: [frost(1.0, 0.4), frost(0.8, 0.6), frost(0.7, 0.7), frost(0.65, 0.7), frost(0.6, 0.75)],
            fog: [fog(1.5, 2.0), fog(2.0, 2.0), fog(2.5, 1.7), fog(2.5, 1.5), fog(3.0, 1.4)],
            brightness: [0.1, 0.2, 0.3, 0.4, 0.5],
            contrast: [0.4, 0.3, 0.2, 0.1, 0.05],
            elastic_transform: [
                elastic(12.5, 0.005),
                elastic(16.25, 0.0075),
                elastic(21.25, 0.01),
                elastic(25.0, 0.0125),
                elastic(30.0, 0.015),
            ],
            pixelate: [0.6, 0.5, 0.4, 0.3, 0.25],
            jpeg_compression: [25, 18, 15, 10, 7],
        }
    }
}

fn check(ok: bool, kind: CorruptionKind, severity: usize, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "schedule entry {} severity {}: {what}",
            kind.name(),
            severity + 1
        )))
    }
}

fn finite(v: f32) -> bool {
    v.is_finite()
}

impl ParamSchedule {
    /// Loads a schedule from `.toml` or `.json` (chosen by extension; TOML otherwise).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let schedule: ParamSchedule = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.to_owned(),
                source,
            })?
        } else {
            toml::from_str(&text).map_err(|e| Error::domain(format!("invalid schedule {}: {e}", path.display())))?
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Checks every parameter against its documented range.
    pub fn validate(&self) -> Result<()> {
        use CorruptionKind::*;
        for s in 0..5 {
            let g = self.gaussian_noise[s];
            check(finite(g) && (0.0..=2.0).contains(&g), GaussianNoise, s, "sigma must be in [0, 2]")?;
            let r = self.shot_noise[s];
            check(finite(r) && r > 0.0 && r <= 500.0, ShotNoise, s, "rate scale must be in (0, 500]")?;
            let a = self.impulse_noise[s];
            check(finite(a) && (0.0..=1.0).contains(&a), ImpulseNoise, s, "amount must be in [0, 1]")?;
            let d = self.defocus_blur[s];
            check(
                finite(d.radius) && d.radius > 0.0 && d.radius <= 15.0 && finite(d.alias_sigma) && d.alias_sigma > 0.0,
                DefocusBlur,
                s,
                "radius must be in (0, 15] and alias_sigma positive",
            )?;
            let m = self.motion_blur[s];
            check(
                m.radius >= 1 && m.radius <= 30 && finite(m.sigma) && m.sigma > 0.0,
                MotionBlur,
                s,
                "radius must be in [1, 30] and sigma positive",
            )?;
            let z = self.zoom_blur[s];
            check(
                finite(z.step) && z.step > 0.0 && z.count >= 1 && z.count <= 64 && 1.0 + z.step * z.count as f32 <= 3.0,
                ZoomBlur,
                s,
                "need step > 0, 1 <= count <= 64, largest factor <= 3",
            )?;
            let sn = self.snow[s];
            check(
                [sn.mean, sn.std, sn.zoom, sn.threshold, sn.blur_sigma, sn.blend].into_iter().all(finite)
                    && sn.std >= 0.0
                    && sn.zoom >= 1.0
                    && sn.blur_radius >= 1
                    && sn.blur_radius <= 30
                    && sn.blur_sigma > 0.0
                    && (0.0..=1.0).contains(&sn.blend),
                Snow,
                s,
                "need std >= 0, zoom >= 1, blur radius in [1, 30], blend in [0, 1]",
            )?;
            let f = self.frost[s];
            check(
                finite(f.image_weight) && finite(f.frost_weight) && f.image_weight >= 0.0 && f.frost_weight >= 0.0,
                Frost,
                s,
                "weights must be non-negative",
            )?;
            let fo = self.fog[s];
            check(
                finite(fo.strength) && fo.strength >= 0.0 && finite(fo.wibble_decay) && fo.wibble_decay > 1.0,
                Fog,
                s,
                "need strength >= 0 and wibble_decay > 1",
            )?;
            let b = self.brightness[s];
            check(finite(b) && (-1.0..=1.0).contains(&b), Brightness, s, "shift must be in [-1, 1]")?;
            let c = self.contrast[s];
            check(finite(c) && c >= 0.0, Contrast, s, "factor must be >= 0")?;
            let e = self.elastic_transform[s];
            check(
                [e.alpha, e.sigma_frac, e.max_offset_frac, e.affine_frac].into_iter().all(finite)
                    && e.alpha >= 0.0
                    && e.sigma_frac > 0.0
                    && e.sigma_frac <= 0.5
                    && e.max_offset_frac >= 0.0
                    && (0.0..=0.25).contains(&e.affine_frac),
                ElasticTransform,
                s,
                "need alpha >= 0, sigma_frac in (0, 0.5], affine_frac in [0, 0.25]",
            )?;
            let p = self.pixelate[s];
            check(finite(p) && p > 0.0 && p <= 1.0, Pixelate, s, "scale must be in (0, 1]")?;
            let q = self.jpeg_compression[s];
            check((1..=100).contains(&q), JpegCompression, s, "quality must be in [1, 100]")?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schedule serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ParamSchedule::default().validate().unwrap();
    }

    #[test]
    fn zoom_factor_counts_match_reference_ranges() {
        let s = ParamSchedule::default();
        let last: Vec<f32> = s.zoom_blur.iter().map(|z| *z.factors().last().unwrap()).collect();
        let expected = [1.10, 1.15, 1.20, 1.24, 1.30];
        for (a, b) in last.iter().zip(expected) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn partial_toml_overrides_one_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, "noise_mode = \"per-channel\"\ncontrast = [0.5, 0.4, 0.3, 0.2, 0.1]\n").unwrap();
        let s = ParamSchedule::from_file(&path).unwrap();
        assert_eq!(s.noise_mode, NoiseMode::PerChannel);
        assert_eq!(s.contrast, [0.5, 0.4, 0.3, 0.2, 0.1]);
        assert_eq!(s.gaussian_noise, ParamSchedule::default().gaussian_noise);
        assert_ne!(s.digest(), ParamSchedule::default().digest());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(&path, ParamSchedule::default().to_json()).unwrap();
        assert_eq!(ParamSchedule::from_file(&path).unwrap(), ParamSchedule::default());

        let mut bad = ParamSchedule::default();
        bad.jpeg_compression[2] = 0;
        assert!(bad.validate().is_err());
        let mut bad = ParamSchedule::default();
        bad.pixelate[0] = 1.5;
        assert!(bad.validate().is_err());

        std::fs::write(&path, "{\"not_a_kind\": 1}").unwrap();
        assert!(ParamSchedule::from_file(&path).is_err());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(ParamSchedule::default().digest(), ParamSchedule::default().digest());
        assert_eq!(ParamSchedule::default().digest().len(), 64);
    }
}
