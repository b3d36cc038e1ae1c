//! Brightness (HSL lightness shift) and contrast (scaling about the channel mean).

use super::image::Planes;

fn rgb_to_hsl(r: f32, g: f32, b: f32) -> (f32, f32, f32) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let l = (max + min) / 2.0;
    if max == min {
        return (0.0, 0.0, l);
    }
    let d = max - min;
    let s = if l > 0.5 { d / (2.0 - max - min) } else { d / (max + min) };
    let h = if max == r {
        (g - b) / d + if g < b { 6.0 } else { 0.0 }
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    (h / 6.0, s, l)
}

fn hue_to_rgb(p: f32, q: f32, mut t: f32) -> f32 {
    if t < 0.0 {
        t += 1.0;
    }
    if t > 1.0 {
        t -= 1.0;
    }
    if t < 1.0 / 6.0 {
        p + (q - p) * 6.0 * t
    } else if t < 0.5 {
        q
    } else if t < 2.0 / 3.0 {
        p + (q - p) * (2.0 / 3.0 - t) * 6.0
    } else {
        p
    }
}

fn hsl_to_rgb(h: f32, s: f32, l: f32) -> (f32, f32, f32) {
    if s == 0.0 {
        return (l, l, l);
    }
    let q = if l < 0.5 { l * (1.0 + s) } else { l + s - l * s };
    let p = 2.0 * l - q;
    (
        hue_to_rgb(p, q, h + 1.0 / 3.0),
        hue_to_rgb(p, q, h),
        hue_to_rgb(p, q, h - 1.0 / 3.0),
    )
}

#[allow(clippy::needless_range_loop)]
pub(crate) fn brightness(img: &Planes, shift: f32) -> Planes {
    let mut planes = img.planes.clone();
    for i in 0..img.len() {
        let (h, s, l) = rgb_to_hsl(planes[0][i], planes[1][i], planes[2][i]);
        let (r, g, b) = hsl_to_rgb(h, s, (l + shift).clamp(0.0, 1.0));
        planes[0][i] = r;
        planes[1][i] = g;
        planes[2][i] = b;
    }
    img.with_planes(planes)
}

pub(crate) fn contrast(img: &Planes, factor: f32) -> Planes {
    img.map_planes(|plane| {
        let mean = (plane.iter().map(|&v| v as f64).sum::<f64>() / plane.len() as f64) as f32;
        plane.iter().map(|&v| (v - mean) * factor + mean).collect()
    })
}
