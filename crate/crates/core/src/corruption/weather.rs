//! Snow, frost and fog.

use super::blur::motion_taps;
use super::filter::{center_zoom, convolve_taps, gaussian_blur, plasma_for};
use super::image::Planes;
use super::rng::Rng;
use super::schedule::{FogParams, FrostParams, MotionParams, SnowParams};

/// Sparse bright flakes, streaked along a random direction, over a whitened base.
pub(crate) fn snow(img: &Planes, p: SnowParams, rng: &mut Rng) -> Planes {
    let (w, h) = (img.width, img.height);
    let n = img.len();
    let mean = p.mean as f64;
    let std = p.std as f64;

    let raw: Vec<f32> = (0..n).map(|_| (mean + std * rng.normal()) as f32).collect();
    let layer: Vec<f32> = center_zoom(&raw, w, h, p.zoom)
        .into_iter()
        .map(|v| if v < p.threshold { 0.0 } else { v.clamp(0.0, 1.0) })
        .collect();
    let taps = motion_taps(
        MotionParams {
            radius: p.blur_radius,
            sigma: p.blur_sigma,
        },
        rng.uniform_range(-135.0, -45.0),
    );
    let flakes = convolve_taps(&layer, w, h, &taps);

    // Luma of the input, lifted: the image looks washed out under snow.
    let gray: Vec<f32> = (0..n)
        .map(|i| 0.299 * img.planes[0][i] + 0.587 * img.planes[1][i] + 0.114 * img.planes[2][i])
        .collect();
    img.map_planes(|plane| {
        (0..n)
            .map(|i| {
                let x = plane[i];
                let base = p.blend * x + (1.0 - p.blend) * x.max(gray[i] * 1.5 + 0.5);
                // The layer and its 180° rotation.
                (base + flakes[i] + flakes[n - 1 - i]).clamp(0.0, 1.0)
            })
            .collect()
    })
}

/// Procedural frost: thresholded fine-grained plasma, lightly blurred, on a pale base.
pub(crate) fn frost_texture(w: usize, h: usize, rng: &mut Rng) -> Vec<f32> {
    let plasma = plasma_for(w, h, 1.35, rng);
    let crystals: Vec<f32> = plasma
        .iter()
        .map(|&v| {
            let t = ((v - 0.45) / 0.3).clamp(0.0, 1.0);
            t * t * (3.0 - 2.0 * t)
        })
        .collect();
    let soft = gaussian_blur(&crystals, w, h, 1.0, 1.0, 3.0);
    soft.iter().map(|v| (0.3 + 0.65 * v).clamp(0.0, 1.0)).collect()
}

/// `image_weight · x + frost_weight · texture`, where the texture has one plane per channel.
pub(crate) fn frost(img: &Planes, p: FrostParams, texture: &[Vec<f32>; 3]) -> Planes {
    let mut planes = img.planes.clone();
    for c in 0..3 {
        for (v, t) in planes[c].iter_mut().zip(&texture[c]) {
            *v = (p.image_weight * *v + p.frost_weight * t).clamp(0.0, 1.0);
        }
    }
    img.with_planes(planes)
}

/// Adds a plasma-fractal haze, then rescales so the brightest input pixel stays in range.
pub(crate) fn fog(img: &Planes, p: FogParams, rng: &mut Rng) -> Planes {
    let haze = plasma_for(img.width, img.height, p.wibble_decay as f64, rng);
    let max_val = img.max_value();
    let scale = max_val / (max_val + p.strength);
    img.map_planes(|plane| {
        plane
            .iter()
            .zip(&haze)
            .map(|(&v, &f)| ((v + p.strength * f) * scale).clamp(0.0, 1.0))
            .collect()
    })
}
