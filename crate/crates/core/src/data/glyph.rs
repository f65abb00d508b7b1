//! Procedural bridge silhouettes: a horizontal deck over one of four support
//! structures, drawn mirror-symmetric about the vertical centre line.

use super::{Dataset, GrayImage};
use crate::error::{Error, Result};
use crate::ndcore::Tensor;
use crate::rng::CounterRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GlyphFamily {
    /// V-shaped piers under the deck.
    PierV,
    /// A single arch under the deck.
    Arch,
    /// Two towers with fanned stays.
    Fan,
    /// A main cable with vertical hangers.
    Hangers,
}

impl GlyphFamily {
    pub const ALL: [GlyphFamily; 4] = [
        GlyphFamily::PierV,
        GlyphFamily::Arch,
        GlyphFamily::Fan,
        GlyphFamily::Hangers,
    ];
}

struct Canvas {
    img: GrayImage,
    size: usize,
}

impl Canvas {
    fn plot(&mut self, x: f64, y: f64, v: u8) {
        let (xi, yi) = (x.round(), y.round());
        if xi < 0.0 || yi < 0.0 || xi >= self.size as f64 || yi >= self.size as f64 {
            return;
        }
        let (xi, yi) = (xi as usize, yi as usize);
        for px in [xi, self.size - 1 - xi] {
            if self.img.get(px, yi) < v {
                self.img.set(px, yi, v);
            }
        }
    }

    fn line(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), v: u8) {
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            self.plot(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, v);
        }
    }
}

/// Draws one glyph of the given family on a `size × size` canvas.
pub fn draw_glyph(family: GlyphFamily, size: usize, rng: &mut CounterRng) -> GrayImage {
    let s = size as f64;
    let last = s - 1.0;
    let mut c = Canvas {
        img: GrayImage::filled(size, size, 0),
        size,
    };
    let ink = 160 + rng.below(96) as u8;
    let deck = (s / 3.0 + rng.uniform() * s / 6.0).floor();
    let mid = last / 2.0;
    c.line((0.0, deck), (last, deck), ink);
    match family {
        GlyphFamily::PierV => {
            let spread = s / 8.0 + rng.uniform() * s / 8.0;
            let foot = s / 4.0 + rng.uniform() * s / 8.0;
            c.line((foot - spread, deck), (foot, last), ink);
            c.line((foot + spread, deck), (foot, last), ink);
        }
        GlyphFamily::Arch => {
            let half = s * (0.3 + 0.15 * rng.uniform());
            let rise = (last - deck) * (0.6 + 0.3 * rng.uniform());
            let n = (4.0 * half).ceil() as usize;
            for k in 0..=n {
                let u = k as f64 / n as f64;
                let x = mid - half + 2.0 * half * u;
                let r = (x - mid) / half;
                c.plot(x, last - rise * (1.0 - r * r), ink);
            }
        }
        GlyphFamily::Fan => {
            let tower = s / 4.0 + rng.uniform() * s / 8.0;
            let top = (deck * 0.3 * rng.uniform()).floor();
            c.line((tower, top), (tower, last), ink);
            for k in 0..3 {
                let reach = (k as f64 + 1.0) * s / 10.0;
                c.line((tower, top), (tower - reach, deck), ink);
                c.line((tower, top), (tower + reach, deck), ink);
            }
        }
        GlyphFamily::Hangers => {
            let tower = s / 5.0 + rng.uniform() * s / 10.0;
            let top = (deck * 0.3 * rng.uniform()).floor();
            c.line((tower, top), (tower, last), ink);
            let sag = (deck - top) * 0.8;
            let half = mid - tower;
            let cable = |x: f64| {
                let r = (x - mid) / half;
                top + sag * (1.0 - r * r)
            };
            let n = (4.0 * half).ceil().max(1.0) as usize;
            for k in 0..=n {
                let x = tower + half * k as f64 / n as f64;
                c.plot(x, cable(x), ink);
            }
            let gap = 2.0 + rng.below(2) as f64;
            let mut x = tower + gap;
            while x <= mid {
                c.line((x, cable(x)), (x, deck), ink);
                x += gap;
            }
        }
    }
    c.img
}

/// `count` glyphs of side `size` (8..=32). Family and geometry come from a
/// per-glyph stream of `seed`, so any prefix of the output is stable.
pub fn gen_glyph_dataset(count: usize, size: usize, seed: u64) -> Result<Vec<GrayImage>> {
    if !(8..=32).contains(&size) {
        return Err(Error::invalid(format!(
            "glyph size must be in 8..=32, got {size}"
        )));
    }
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    Ok((0..count)
        .map(|i| {
            let mut rng = CounterRng::stream(seed, i as u64);
            let family = GlyphFamily::ALL[rng.below(4)];
            draw_glyph(family, size, &mut rng)
        })
        .collect())
}

/// Family of glyph `index` in `gen_glyph_dataset(_, _, seed)`.
pub fn glyph_family(seed: u64, index: usize) -> GlyphFamily {
    GlyphFamily::ALL[CounterRng::stream(seed, index as u64).below(4)]
}

impl Dataset {
    /// Dequantized images as rows; image `i` uses noise stream `seed + i`.
    pub fn from_images(images: &[GrayImage], seed: u64) -> Result<Dataset> {
        let first = images.first().ok_or_else(|| Error::invalid("no images"))?;
        let d = first.width() * first.height();
        let mut data = Vec::with_capacity(images.len() * d);
        for (i, img) in images.iter().enumerate() {
            if img.width() * img.height() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: img.width() * img.height(),
                });
            }
            data.extend(super::dequantize(img, seed.wrapping_add(i as u64)));
        }
        Dataset::new(
            Tensor::matrix(images.len(), d, data)?,
            format!(
                "{} images {}x{}",
                images.len(),
                first.width(),
                first.height()
            ),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_mirror_symmetric(img: &GrayImage) -> bool {
        let w = img.width();
        (0..img.height()).all(|y| (0..w).all(|x| img.get(x, y) == img.get(w - 1 - x, y)))
    }

    #[test]
    fn every_family_every_size_is_symmetric() {
        for size in 8..=32 {
            for fam in GlyphFamily::ALL {
                let img = draw_glyph(fam, size, &mut CounterRng::new(size as u64));
                assert!(is_mirror_symmetric(&img), "{fam:?} {size}");
                assert!(img.pixels().iter().any(|&p| p > 0));
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = gen_glyph_dataset(20, 16, 9).unwrap();
        let b = gen_glyph_dataset(20, 16, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_glyph_dataset(20, 16, 10).unwrap());
    }

    #[test]
    fn size_bounds() {
        assert!(gen_glyph_dataset(1, 7, 0).is_err());
        assert!(gen_glyph_dataset(1, 33, 0).is_err());
    }
}
