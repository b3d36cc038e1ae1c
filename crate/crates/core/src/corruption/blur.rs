//! Defocus, motion and zoom blur. All kernels are normalized to unit sum.

use super::filter::{center_zoom, convolve, convolve_taps, Kernel2D};
use super::image::Planes;
use super::rng::Rng;
use super::schedule::{DefocusParams, MotionParams, ZoomParams};

/// Disk of the given radius, softened by a small Gaussian to reduce aliasing.
pub(crate) fn defocus_kernel(p: DefocusParams) -> Kernel2D {
    let radius = p.radius as f64;
    let half = (radius.ceil() as usize).max(8);
    let side = 2 * half + 1;
    let mut disk = vec![0.0f64; side * side];
    for y in 0..side {
        for x in 0..side {
            let (dx, dy) = (x as f64 - half as f64, y as f64 - half as f64);
            if dx * dx + dy * dy <= radius * radius {
                disk[y * side + x] = 1.0;
            }
        }
    }
    let alias_half = if radius <= 8.0 { 1 } else { 2 };
    let sigma = p.alias_sigma as f64;
    let g: Vec<f64> = (-(alias_half as isize)..=alias_half as isize)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();

    let mut smoothed = vec![0.0f64; side * side];
    for y in 0..side {
        for x in 0..side {
            let mut acc = 0.0;
            for (j, gy) in g.iter().enumerate() {
                for (i, gx) in g.iter().enumerate() {
                    let sy = y as isize + j as isize - alias_half as isize;
                    let sx = x as isize + i as isize - alias_half as isize;
                    if (0..side as isize).contains(&sy) && (0..side as isize).contains(&sx) {
                        acc += gy * gx * disk[sy as usize * side + sx as usize];
                    }
                }
            }
            smoothed[y * side + x] = acc;
        }
    }
    let total: f64 = smoothed.iter().sum();
    Kernel2D {
        radius_x: half,
        radius_y: half,
        weights: smoothed.iter().map(|v| (v / total) as f32).collect(),
    }
}

/// One-sided line of `2·radius + 1` Gaussian-weighted taps at `angle_deg`.
pub(crate) fn motion_taps(p: MotionParams, angle_deg: f64) -> Vec<(isize, isize, f32)> {
    let theta = angle_deg.to_radians();
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    let sigma = p.sigma as f64;
    let mut taps: Vec<(isize, isize, f64)> = Vec::new();
    for i in 0..=(2 * p.radius) as usize {
        let w = libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma));
        let dx = libm::round(i as f64 * c) as isize;
        let dy = libm::round(i as f64 * s) as isize;
        match taps.iter_mut().find(|t| t.0 == dx && t.1 == dy) {
            Some(t) => t.2 += w,
            None => taps.push((dx, dy, w)),
        }
    }
    let total: f64 = taps.iter().map(|t| t.2).sum();
    taps.into_iter().map(|(x, y, w)| (x, y, (w / total) as f32)).collect()
}

pub(crate) fn defocus(img: &Planes, p: DefocusParams) -> Planes {
    let kernel = defocus_kernel(p);
    img.map_planes(|plane| convolve(plane, img.width, img.height, &kernel))
}

pub(crate) fn motion(img: &Planes, p: MotionParams, rng: &mut Rng) -> Planes {
    let taps = motion_taps(p, rng.uniform_range(-45.0, 45.0));
    img.map_planes(|plane| convolve_taps(plane, img.width, img.height, &taps))
}

/// Average of the image and progressively magnified copies of it.
pub(crate) fn zoom(img: &Planes, p: ZoomParams) -> Planes {
    let factors = p.factors();
    let (w, h) = (img.width, img.height);
    img.map_planes(|plane| {
        let mut acc: Vec<f32> = plane.to_vec();
        for &f in &factors {
            for (a, z) in acc.iter_mut().zip(center_zoom(plane, w, h, f)) {
                *a += z;
            }
        }
        let n = (factors.len() + 1) as f32;
        acc.iter().map(|v| v / n).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruption::schedule::ParamSchedule;

    #[test]
    fn kernels_are_normalized() {
        let s = ParamSchedule::default();
        for p in s.defocus_blur {
            let k = defocus_kernel(p);
            assert!((k.sum() - 1.0).abs() < 1e-6, "{}", k.sum());
        }
        let snow = s.snow.iter().map(|sn| MotionParams {
            radius: sn.blur_radius,
            sigma: sn.blur_sigma,
        });
        for p in s.motion_blur.into_iter().chain(snow) {
            for angle in [-45.0, -12.3, 0.0, 30.0, 45.0, -100.0] {
                let total: f64 = motion_taps(p, angle).iter().map(|t| t.2 as f64).sum();
                assert!((total - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn defocus_support_grows_with_radius() {
        let s = ParamSchedule::default();
        let nonzero: Vec<usize> = s
            .defocus_blur
            .iter()
            .map(|p| defocus_kernel(*p).weights.iter().filter(|&&w| w > 1e-6).count())
            .collect();
        assert!(nonzero.windows(2).all(|w| w[0] < w[1]), "{nonzero:?}");
    }

    #[test]
    fn horizontal_motion_kernel_is_a_row() {
        let taps = motion_taps(MotionParams { radius: 3, sigma: 2.0 }, 0.0);
        assert_eq!(taps.len(), 7);
        assert!(taps.iter().all(|t| t.1 == 0 && t.0 >= 0));
        assert!(taps.windows(2).all(|w| w[0].2 > w[1].2));
    }
}
