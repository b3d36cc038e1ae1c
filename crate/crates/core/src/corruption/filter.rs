//! Convolution, resampling and procedural-noise helpers shared by the kernels.
//! Borders use reflect-101 (`dcb|abcd|cba`) everywhere.

use super::rng::Rng;

/// Maps an out-of-range index into `0..n` by reflect-101.
pub(crate) fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut i = i.rem_euclid(period);
    if i >= n as isize {
        i = period - i;
    }
    i as usize
}

/// Dense 2-D kernel with odd side lengths, stored row-major.
#[derive(Debug, Clone)]
pub(crate) struct Kernel2D {
    pub radius_x: usize,
    pub radius_y: usize,
    pub weights: Vec<f32>,
}

impl Kernel2D {
    pub fn width(&self) -> usize {
        2 * self.radius_x + 1
    }

    #[cfg(test)]
    pub fn sum(&self) -> f64 {
        self.weights.iter().map(|&w| w as f64).sum()
    }
}

fn pad_reflect(plane: &[f32], w: usize, h: usize, rx: usize, ry: usize) -> (Vec<f32>, usize) {
    let pw = w + 2 * rx;
    let ph = h + 2 * ry;
    let mut out = Vec::with_capacity(pw * ph);
    for py in 0..ph {
        let sy = reflect101(py as isize - ry as isize, h);
        let row = &plane[sy * w..(sy + 1) * w];
        for px in 0..rx {
            out.push(row[reflect101(px as isize - rx as isize, w)]);
        }
        out.extend_from_slice(row);
        for px in 0..rx {
            out.push(row[reflect101((w + px) as isize, w)]);
        }
    }
    (out, pw)
}

/// Correlates `plane` with `kernel` (the kernel is not flipped).
pub(crate) fn convolve(plane: &[f32], w: usize, h: usize, kernel: &Kernel2D) -> Vec<f32> {
    let (rx, ry) = (kernel.radius_x, kernel.radius_y);
    let (padded, pw) = pad_reflect(plane, w, h, rx, ry);
    let kw = kernel.width();
    let taps: Vec<(usize, usize, f32)> = kernel
        .weights
        .iter()
        .enumerate()
        .filter(|(_, &wgt)| wgt != 0.0)
        .map(|(i, &wgt)| (i / kw, i % kw, wgt))
        .collect();

    let mut out = vec![0.0f32; w * h];
    for (y, out_row) in out.chunks_exact_mut(w).enumerate() {
        for &(ky, kx, wgt) in &taps {
            let start = (y + ky) * pw + kx;
            let src = &padded[start..start + w];
            for (o, &s) in out_row.iter_mut().zip(src) {
                *o += wgt * s;
            }
        }
    }
    out
}

/// Sparse kernel given as `(dx, dy, weight)` offsets; output(x, y) = Σ w · input(x + dx, y + dy).
pub(crate) fn convolve_taps(plane: &[f32], w: usize, h: usize, taps: &[(isize, isize, f32)]) -> Vec<f32> {
    let rx = taps.iter().map(|t| t.0.unsigned_abs()).max().unwrap_or(0);
    let ry = taps.iter().map(|t| t.1.unsigned_abs()).max().unwrap_or(0);
    let (padded, pw) = pad_reflect(plane, w, h, rx, ry);
    let mut out = vec![0.0f32; w * h];
    for (y, out_row) in out.chunks_exact_mut(w).enumerate() {
        for &(dx, dy, wgt) in taps {
            let start = (y as isize + dy + ry as isize) as usize * pw + (dx + rx as isize) as usize;
            let src = &padded[start..start + w];
            for (o, &s) in out_row.iter_mut().zip(src) {
                *o += wgt * s;
            }
        }
    }
    out
}

/// Normalized Gaussian weights over `-radius..=radius`.
pub(crate) fn gaussian_1d(sigma: f64, radius: usize) -> Vec<f32> {
    let raw: Vec<f64> = (-(radius as isize)..=radius as isize)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| (v / total) as f32).collect()
}

/// Separable Gaussian smoothing with a support of `truncate · sigma` per axis.
pub(crate) fn gaussian_blur(plane: &[f32], w: usize, h: usize, sigma_x: f64, sigma_y: f64, truncate: f64) -> Vec<f32> {
    let rx = (truncate * sigma_x + 0.5) as usize;
    let ry = (truncate * sigma_y + 0.5) as usize;
    let horizontal = Kernel2D {
        radius_x: rx,
        radius_y: 0,
        weights: gaussian_1d(sigma_x, rx),
    };
    let vertical = Kernel2D {
        radius_x: 0,
        radius_y: ry,
        weights: gaussian_1d(sigma_y, ry),
    };
    let tmp = convolve(plane, w, h, &horizontal);
    convolve(&tmp, w, h, &vertical)
}

/// Bilinear sample at real coordinates; neighbours outside the plane reflect.
#[inline]
pub(crate) fn bilinear(plane: &[f32], w: usize, h: usize, x: f32, y: f32) -> f32 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let xa = reflect101(x0, w);
    let xb = reflect101(x0 + 1, w);
    let ya = reflect101(y0, h);
    let yb = reflect101(y0 + 1, h);
    let top = plane[ya * w + xa] * (1.0 - fx) + plane[ya * w + xb] * fx;
    let bottom = plane[yb * w + xa] * (1.0 - fx) + plane[yb * w + xb] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Bilinear taps `(i0, i1, frac)` for each output index of a centre magnification.
fn zoom_taps(n: usize, factor: f32) -> Vec<(usize, usize, f32)> {
    let c = (n as f32 - 1.0) / 2.0;
    let inv = 1.0 / factor;
    (0..n)
        .map(|i| {
            let s = c + (i as f32 - c) * inv;
            let s0 = s.floor();
            let i0 = s0 as isize;
            (reflect101(i0, n), reflect101(i0 + 1, n), s - s0)
        })
        .collect()
}

/// Magnifies the centre of `plane` by `factor` (≥ 1) back to full size.
pub(crate) fn center_zoom(plane: &[f32], w: usize, h: usize, factor: f32) -> Vec<f32> {
    if factor == 1.0 {
        return plane.to_vec();
    }
    let xs = zoom_taps(w, factor);
    let ys = zoom_taps(h, factor);
    let mut out = Vec::with_capacity(w * h);
    for &(ya, yb, fy) in &ys {
        let top = &plane[ya * w..(ya + 1) * w];
        let bottom = &plane[yb * w..(yb + 1) * w];
        out.extend(xs.iter().map(|&(xa, xb, fx)| {
            let t = top[xa] * (1.0 - fx) + top[xb] * fx;
            let b = bottom[xa] * (1.0 - fx) + bottom[xb] * fx;
            t * (1.0 - fy) + b * fy
        }));
    }
    out
}

/// Diamond-square plasma fractal on a `size × size` torus (`size` a power of two),
/// normalized to [0, 1].
pub(crate) fn plasma_fractal(size: usize, wibble_decay: f64, rng: &mut Rng) -> Vec<f64> {
    assert!(size.is_power_of_two() && size >= 2);
    let mut map = vec![0.0f64; size * size];
    let idx = |y: usize, x: usize| (y % size) * size + (x % size);
    let mut step = size;
    let mut wibble = 100.0f64;
    while step >= 2 {
        let half = step / 2;
        // Squares: centre of each cell from its four corners.
        for y in (0..size).step_by(step) {
            for x in (0..size).step_by(step) {
                let sum = map[idx(y, x)] + map[idx(y + step, x)] + map[idx(y, x + step)] + map[idx(y + step, x + step)];
                map[idx(y + half, x + half)] = sum / 4.0 + wibble * rng.uniform_range(-wibble, wibble);
            }
        }
        // Diamonds: edge midpoints from the two adjacent corners and centres.
        for y in (0..size).step_by(step) {
            for x in (0..size).step_by(step) {
                let top = map[idx(y, x)] + map[idx(y, x + step)];
                let centres = map[idx(y + half, x + half)] + map[idx((y + size - half) % size, x + half)];
                map[idx(y, x + half)] = (top + centres) / 4.0 + wibble * rng.uniform_range(-wibble, wibble);
            }
        }
        for y in (0..size).step_by(step) {
            for x in (0..size).step_by(step) {
                let left = map[idx(y, x)] + map[idx(y + step, x)];
                let centres = map[idx(y + half, x + half)] + map[idx(y + half, (x + size - half) % size)];
                map[idx(y + half, x)] = (left + centres) / 4.0 + wibble * rng.uniform_range(-wibble, wibble);
            }
        }
        step /= 2;
        wibble /= wibble_decay;
    }
    let min = map.iter().copied().fold(f64::INFINITY, f64::min);
    let max = map.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    map.iter().map(|v| (v - min) / span).collect()
}

/// Crops the top-left `w × h` window of a plasma map tiled as needed.
pub(crate) fn plasma_for(w: usize, h: usize, wibble_decay: f64, rng: &mut Rng) -> Vec<f32> {
    let size = w.max(h).next_power_of_two().max(2);
    let map = plasma_fractal(size, wibble_decay, rng);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        out.extend(map[y * size..y * size + w].iter().map(|&v| v as f32));
    }
    out
}
