//! Elastic warping, pixelation and JPEG re-encoding.

use image::codecs::jpeg::JpegEncoder;
use image::ExtendedColorType;

use super::filter::{bilinear, gaussian_blur};
use super::image::{ImageBuffer, Planes};
use super::rng::Rng;
use super::schedule::ElasticParams;
use crate::error::Result;

/// Solves for the affine map taking `src[i]` to `dst[i]` for three point pairs.
fn affine_from_points(src: [[f64; 2]; 3], dst: [[f64; 2]; 3]) -> [[f64; 3]; 2] {
    // Rows [x y 1] for each source point; solve once per output coordinate.
    let m = [
        [src[0][0], src[0][1], 1.0],
        [src[1][0], src[1][1], 1.0],
        [src[2][0], src[2][1], 1.0],
    ];
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    let mut out = [[0.0; 3]; 2];
    for (row, coord) in out.iter_mut().zip(0..2) {
        let rhs = [dst[0][coord], dst[1][coord], dst[2][coord]];
        for (k, cell) in row.iter_mut().enumerate() {
            let mut mk = m;
            for r in 0..3 {
                mk[r][k] = rhs[r];
            }
            *cell = det(mk) / d;
        }
    }
    out
}

/// Smoothed random displacement plus a small random affine jitter, resampled bilinearly.
pub(crate) fn elastic(img: &Planes, p: ElasticParams, rng: &mut Rng) -> Planes {
    let (w, h) = (img.width, img.height);
    let (wf, hf) = (w as f64, h as f64);

    let center = [wf / 2.0, hf / 2.0];
    let square = (w.min(h) / 3) as f64;
    let jitter = p.affine_frac as f64 * w.min(h) as f64;
    let anchors = [
        [center[0] + square, center[1] + square],
        [center[0] + square, center[1] - square],
        [center[0] - square, center[1] - square],
    ];
    let moved = anchors.map(|[x, y]| [x + rng.uniform_range(-jitter, jitter), y + rng.uniform_range(-jitter, jitter)]);
    // Inverse map: output coordinate → source coordinate.
    let inv = affine_from_points(moved, anchors);

    let max_d = p.max_offset_frac as f64 * hf;
    let field = |rng: &mut Rng| -> Vec<f32> {
        let raw: Vec<f32> = (0..w * h).map(|_| rng.uniform_range(-max_d, max_d) as f32).collect();
        let sigma_x = p.sigma_frac as f64 * wf;
        let sigma_y = p.sigma_frac as f64 * hf;
        gaussian_blur(&raw, w, h, sigma_x, sigma_y, 3.0)
            .into_iter()
            .map(|v| v * p.alpha)
            .collect()
    };
    let dx = field(rng);
    let dy = field(rng);

    let mut coords = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let sx = inv[0][0] * xf + inv[0][1] * yf + inv[0][2];
            let sy = inv[1][0] * xf + inv[1][1] * yf + inv[1][2];
            let i = y * w + x;
            coords.push((sx as f32 + dx[i], sy as f32 + dy[i]));
        }
    }
    img.map_planes(|plane| {
        coords
            .iter()
            .map(|&(sx, sy)| bilinear(plane, w, h, sx, sy).clamp(0.0, 1.0))
            .collect()
    })
}

/// Area-overlap resampling weights for one axis from `n` to `m` samples, in either
/// direction. Returns `(index, weight)` lists.
fn box_weights(n: usize, m: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n as f64 / m as f64;
    (0..m)
        .map(|j| {
            let (lo, hi) = (j as f64 * scale, (j + 1) as f64 * scale);
            let mut taps = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < n {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((i, overlap / scale));
                }
                i += 1;
            }
            taps
        })
        .collect()
}

fn box_resample(plane: &[f32], w: usize, h: usize, nw: usize, nh: usize) -> Vec<f32> {
    let wx = box_weights(w, nw);
    let wy = box_weights(h, nh);
    let mut rows = vec![0.0f64; nw * h];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for (j, taps) in wx.iter().enumerate() {
            rows[y * nw + j] = taps.iter().map(|&(i, wt)| src[i] as f64 * wt).sum();
        }
    }
    let mut out = vec![0.0f32; nw * nh];
    for (j, taps) in wy.iter().enumerate() {
        let dst = &mut out[j * nw..(j + 1) * nw];
        for (x, o) in dst.iter_mut().enumerate() {
            *o = taps.iter().map(|&(i, wt)| rows[i * nw + x] * wt).sum::<f64>() as f32;
        }
    }
    out
}

/// Box-filter downscale by `scale`, box-filter upscale back.
pub(crate) fn pixelate(img: &Planes, scale: f32) -> Planes {
    let (w, h) = (img.width, img.height);
    let sw = ((w as f64 * scale as f64) as usize).max(1);
    let sh = ((h as f64 * scale as f64) as usize).max(1);
    img.map_planes(|plane| {
        let small = box_resample(plane, w, h, sw, sh);
        box_resample(&small, sw, sh, w, h)
    })
}

/// Baseline JPEG bytes at the given quality.
pub fn jpeg_encode(img: &ImageBuffer, quality: u8) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(&mut out, quality).encode(img.data(), img.width(), img.height(), ExtendedColorType::Rgb8)?;
    Ok(out)
}

pub(crate) fn jpeg_round_trip(img: &ImageBuffer, quality: u8) -> Result<ImageBuffer> {
    ImageBuffer::decode(&jpeg_encode(img, quality)?)
}
