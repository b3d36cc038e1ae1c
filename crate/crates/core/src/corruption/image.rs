use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};

/// 8-bit RGB raster, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain(format!("image dimensions must be positive, got {width}x{height}")));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::domain(format!(
                "{width}x{height} RGB image needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Self::new(width, height, data)
    }

    /// Replicates a single-channel raster into three identical channels.
    pub fn from_gray(width: u32, height: u32, gray: &[u8]) -> Result<Self> {
        let data = gray.iter().flat_map(|&v| [v, v, v]).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn is_gray(&self) -> bool {
        self.data.chunks_exact(3).all(|p| p[0] == p[1] && p[1] == p[2])
    }

    pub fn open(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::decode(&bytes)
    }

    /// Decodes PNG or JPEG, detecting the format from the bytes.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let rgb = image::load_from_memory(bytes)?.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(w, h, rgb.into_raw())
    }

    /// PNG bytes; gray images are stored as 8-bit luminance.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        if self.is_gray() {
            let luma: Vec<u8> = self.data.iter().step_by(3).copied().collect();
            image::GrayImage::from_raw(self.width, self.height, luma)
                .expect("length checked at construction")
                .write_to(&mut out, ImageFormat::Png)?;
        } else {
            self.as_rgb_image().write_to(&mut out, ImageFormat::Png)?;
        }
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes = self.encode_png()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    fn as_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.data.clone()).expect("length checked at construction")
    }
}

/// Working representation: three f32 planes with values nominally in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Planes {
    pub width: usize,
    pub height: usize,
    pub planes: [Vec<f32>; 3],
}

impl Planes {
    pub fn from_image(img: &ImageBuffer) -> Self {
        let n = img.width as usize * img.height as usize;
        let mut planes = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for px in img.data.chunks_exact(3) {
            for c in 0..3 {
                planes[c].push(px[c] as f32 / 255.0);
            }
        }
        Self {
            width: img.width as usize,
            height: img.height as usize,
            planes,
        }
    }

    /// Clamps to [0, 1], scales to 255 and rounds half away from zero.
    pub fn to_image(&self) -> ImageBuffer {
        let n = self.width * self.height;
        let mut data = Vec::with_capacity(n * 3);
        for i in 0..n {
            for c in 0..3 {
                data.push(to_u8(self.planes[c][i]));
            }
        }
        ImageBuffer::new(self.width as u32, self.height as u32, data).expect("dimensions preserved")
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn channels_equal(&self) -> bool {
        self.planes[0] == self.planes[1] && self.planes[1] == self.planes[2]
    }

    /// Applies a deterministic per-plane operation, computing it once when all planes match.
    pub fn map_planes(&self, f: impl Fn(&[f32]) -> Vec<f32>) -> Planes {
        let planes = if self.channels_equal() {
            let p = f(&self.planes[0]);
            [p.clone(), p.clone(), p]
        } else {
            [f(&self.planes[0]), f(&self.planes[1]), f(&self.planes[2])]
        };
        Planes {
            width: self.width,
            height: self.height,
            planes,
        }
    }

    pub fn with_planes(&self, planes: [Vec<f32>; 3]) -> Planes {
        Planes {
            width: self.width,
            height: self.height,
            planes,
        }
    }

    pub fn max_value(&self) -> f32 {
        self.planes
            .iter()
            .flat_map(|p| p.iter().copied())
            .fold(f32::NEG_INFINITY, f32::max)
    }
}

pub(crate) fn to_u8(v: f32) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ImageBuffer::new(0, 4, vec![]).is_err());
        assert!(ImageBuffer::new(2, 2, vec![0; 11]).is_err());
        assert!(ImageBuffer::new(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn u8_round_trip_through_planes() {
        let data: Vec<u8> = (0..=255u8).flat_map(|v| [v, 255 - v, v / 2]).collect();
        let img = ImageBuffer::new(16, 16, data).unwrap();
        assert_eq!(Planes::from_image(&img).to_image(), img);
    }

    #[test]
    fn rounding_and_clamping() {
        assert_eq!(to_u8(-0.3), 0);
        assert_eq!(to_u8(1.7), 255);
        assert_eq!(to_u8(f32::NAN), 0);
        assert_eq!(to_u8(0.5 / 255.0), 1);
        assert_eq!(to_u8(0.49 / 255.0), 0);
    }

    #[test]
    fn png_round_trip() {
        let img = ImageBuffer::from_gray(3, 2, &[0, 50, 100, 150, 200, 250]).unwrap();
        assert!(img.is_gray());
        let back = ImageBuffer::decode(&img.encode_png().unwrap()).unwrap();
        assert_eq!(back, img);
    }
}
