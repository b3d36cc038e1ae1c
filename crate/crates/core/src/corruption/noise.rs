//! Additive Gaussian, Poisson (shot) and salt-and-pepper noise.

use super::image::Planes;
use super::rng::Rng;
use super::schedule::NoiseMode;

#[allow(clippy::needless_range_loop)]
fn apply<F>(img: &Planes, mode: NoiseMode, rng: &mut Rng, mut per_pixel: F) -> Planes
where
    F: FnMut(&mut Rng, &mut [f32; 3], NoiseMode),
{
    let mut planes = img.planes.clone();
    for i in 0..img.len() {
        let mut px = [planes[0][i], planes[1][i], planes[2][i]];
        per_pixel(rng, &mut px, mode);
        for c in 0..3 {
            planes[c][i] = px[c];
        }
    }
    img.with_planes(planes)
}

pub(crate) fn gaussian(img: &Planes, sigma: f32, mode: NoiseMode, rng: &mut Rng) -> Planes {
    let sigma = sigma as f64;
    apply(img, mode, rng, |rng, px, mode| match mode {
        NoiseMode::ChannelCoherent => {
            let n = (rng.normal() * sigma) as f32;
            px.iter_mut().for_each(|v| *v = (*v + n).clamp(0.0, 1.0));
        }
        NoiseMode::PerChannel => {
            px.iter_mut()
                .for_each(|v| *v = (*v + (rng.normal() * sigma) as f32).clamp(0.0, 1.0));
        }
    })
}

/// `Poisson(x · rate) / rate`, one uniform per pixel (coherent) or per channel.
pub(crate) fn shot(img: &Planes, rate: f32, mode: NoiseMode, rng: &mut Rng) -> Planes {
    let rate = rate as f64;
    let draw = |u: f64, v: f32| (Rng::poisson_from_uniform(u, v as f64 * rate) as f64 / rate).clamp(0.0, 1.0) as f32;
    apply(img, mode, rng, |rng, px, mode| match mode {
        NoiseMode::ChannelCoherent => {
            let u = rng.uniform();
            px.iter_mut().for_each(|v| *v = draw(u, *v));
        }
        NoiseMode::PerChannel => px.iter_mut().for_each(|v| *v = draw(rng.uniform(), *v)),
    })
}

/// Each pixel (or channel) is replaced with probability `amount`, half salt, half pepper.
pub(crate) fn impulse(img: &Planes, amount: f32, mode: NoiseMode, rng: &mut Rng) -> Planes {
    let amount = amount as f64;
    let flip = move |rng: &mut Rng| -> Option<f32> {
        let hit = rng.uniform() < amount;
        let salt = rng.uniform() < 0.5;
        hit.then_some(if salt { 1.0 } else { 0.0 })
    };
    apply(img, mode, rng, |rng, px, mode| match mode {
        NoiseMode::ChannelCoherent => {
            if let Some(v) = flip(rng) {
                *px = [v; 3];
            }
        }
        NoiseMode::PerChannel => {
            for c in px.iter_mut() {
                if let Some(v) = flip(rng) {
                    *c = v;
                }
            }
        }
    })
}
