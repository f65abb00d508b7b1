use super::GrayImage;
use crate::error::{Error, Result};
use crate::rng::CounterRng;

fn to_pixel(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Adds `N(0, sigma²)` to every pixel, then rounds and clamps to `[0, 255]`.
pub fn augment_noise(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    let mut rng = CounterRng::new(seed);
    let pixels = img
        .pixels()
        .iter()
        .map(|&p| to_pixel(p as f64 + sigma * rng.normal()))
        .collect();
    GrayImage::new(img.width(), img.height(), pixels)
}

fn sample_axis(i: usize, len_in: usize, len_out: usize) -> (usize, usize, f64) {
    let s =
        ((i as f64 + 0.5) * (len_in as f64 / len_out as f64) - 0.5).clamp(0.0, (len_in - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(len_in - 1);
    (i0, i1, s - i0 as f64)
}

/// Bilinear resampling with pixel centres at half-integer coordinates.
pub fn resize_bilinear(img: &GrayImage, width: usize, height: usize) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("target size must be positive"));
    }
    let xs: Vec<_> = (0..width)
        .map(|x| sample_axis(x, img.width(), width))
        .collect();
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let (y0, y1, fy) = sample_axis(y, img.height(), height);
        for &(x0, x1, fx) in &xs {
            let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
            let bottom = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
            out.push(to_pixel(top * (1.0 - fy) + bottom * fy));
        }
    }
    GrayImage::new(width, height, out)
}

/// `(pixel + u) / 256` with `u ~ U[0, 1)`, one value per pixel in raster order.
pub fn dequantize(img: &GrayImage, seed: u64) -> Vec<f64> {
    let mut rng = CounterRng::new(seed);
    img.pixels()
        .iter()
        .map(|&p| (p as f64 + rng.uniform()) / 256.0)
        .collect()
}

/// Inverse of [`dequantize`]: `floor(256·x)` clamped to `[0, 255]`.
pub fn quantize(x: &[f64], width: usize, height: usize) -> Result<GrayImage> {
    let pixels = x
        .iter()
        .map(|&v| (256.0 * v).floor().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(width, height, pixels)
}
