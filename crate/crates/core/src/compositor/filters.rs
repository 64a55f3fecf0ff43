use image::{GrayImage, Rgb, RgbImage};

use crate::render::MASK_ON;

/// Three-channel floating point raster, interleaved RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl FloatImage {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize * 3],
        }
    }

    pub fn from_rgb(img: &RgbImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.as_raw().iter().map(|&v| v as f64).collect(),
        }
    }

    fn idx(&self, x: usize, y: usize) -> usize {
        (y * self.width as usize + x) * 3
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        let i = self.idx(x as usize, y as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn add_to_pixel(&mut self, x: u32, y: u32, v: [f64; 3], w: f64) {
        let i = self.idx(x as usize, y as usize);
        for (d, vc) in self.data[i..i + 3].iter_mut().zip(v) {
            *d += w * vc;
        }
    }

    /// `clamp(round(img + gain · self))` per channel.
    pub fn add_scaled_to(&self, img: &RgbImage, gain: f64) -> RgbImage {
        let mut out = img.clone();
        for (o, s) in out.iter_mut().zip(&self.data) {
            *o = (*o as f64 + gain * s).round().clamp(0.0, 255.0) as u8;
        }
        out
    }

    pub fn to_rgb_rounded(&self) -> RgbImage {
        let raw = self
            .data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        RgbImage::from_raw(self.width, self.height, raw).expect("buffer size matches")
    }
}

/// Rec. 601 luma.
pub fn luma(p: [f64; 3]) -> f64 {
    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
}

/// Normalized 1-D Gaussian taps, radius `ceil(3σ)`. `sigma` must be positive.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with clamp-to-edge sampling. `sigma <= 0` copies.
pub fn blur_float(img: &FloatImage, sigma: f64) -> FloatImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h) = (img.width as i64, img.height as i64);
    let mut tmp = FloatImage::zeros(img.width, img.height);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (t, kv) in k.iter().enumerate() {
                let sx = (x + t as i64 - r).clamp(0, w - 1);
                let i = img.idx(sx as usize, y as usize);
                for (a, p) in acc.iter_mut().zip(&img.data[i..i + 3]) {
                    *a += kv * p;
                }
            }
            let o = tmp.idx(x as usize, y as usize);
            tmp.data[o..o + 3].copy_from_slice(&acc);
        }
    }
    let mut out = FloatImage::zeros(img.width, img.height);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (t, kv) in k.iter().enumerate() {
                let sy = (y + t as i64 - r).clamp(0, h - 1);
                let i = tmp.idx(x as usize, sy as usize);
                for (a, p) in acc.iter_mut().zip(&tmp.data[i..i + 3]) {
                    *a += kv * p;
                }
            }
            let o = out.idx(x as usize, y as usize);
            out.data[o..o + 3].copy_from_slice(&acc);
        }
    }
    out
}

pub fn gaussian_blur(img: &RgbImage, sigma: f64) -> RgbImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    blur_float(&FloatImage::from_rgb(img), sigma).to_rgb_rounded()
}

/// Bright-pass: for luma above `threshold·255`, each channel scaled by
/// `(luma − threshold·255) / luma`; zero elsewhere.
pub fn bright_pass(img: &RgbImage, threshold: f64) -> FloatImage {
    let cut = threshold * 255.0;
    let mut out = FloatImage::zeros(img.width(), img.height());
    for (x, y, p) in img.enumerate_pixels() {
        let v = [p.0[0] as f64, p.0[1] as f64, p.0[2] as f64];
        let l = luma(v);
        if l > cut && l > 0.0 {
            out.add_to_pixel(x, y, v, (l - cut) / l);
        }
    }
    out
}

/// Bloom / fog glow: blurred bright-pass added back with `gain`.
pub fn bloom(img: &RgbImage, threshold: f64, radius: f64, gain: f64) -> RgbImage {
    if gain == 0.0 {
        return img.clone();
    }
    let glow = blur_float(&bright_pass(img, threshold), radius);
    glow.add_scaled_to(img, gain)
}

/// Unscaled streak field of the star effect.
///
/// Every bright-pass pixel contributes itself once, plus weight `1 − t/length`
/// at offsets `±t·(cos θₖ, sin θₖ)` (rounded to the pixel grid) for
/// `t = 1..length−1` and `θₖ = kπ/num_streaks`.
pub fn star_response(img: &RgbImage, threshold: f64, num_streaks: u32, length: u32) -> FloatImage {
    let bright = bright_pass(img, threshold);
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut out = FloatImage::zeros(img.width(), img.height());
    let dirs: Vec<(f64, f64)> = (0..num_streaks)
        .map(|k| {
            let theta = k as f64 * std::f64::consts::PI / num_streaks as f64;
            (theta.cos(), theta.sin())
        })
        .collect();
    for y in 0..h {
        for x in 0..w {
            let b = bright.pixel(x as u32, y as u32);
            if b == [0.0; 3] {
                continue;
            }
            out.add_to_pixel(x as u32, y as u32, b, 1.0);
            for &(dx, dy) in &dirs {
                for t in 1..length {
                    let weight = 1.0 - t as f64 / length as f64;
                    for sign in [1.0, -1.0] {
                        let px = x + (sign * t as f64 * dx).round() as i64;
                        let py = y + (sign * t as f64 * dy).round() as i64;
                        if (0..w).contains(&px) && (0..h).contains(&py) {
                            out.add_to_pixel(px as u32, py as u32, b, weight);
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn star(img: &RgbImage, threshold: f64, num_streaks: u32, length: u32, gain: f64) -> RgbImage {
    if gain == 0.0 {
        return img.clone();
    }
    star_response(img, threshold, num_streaks, length).add_scaled_to(img, gain)
}

pub fn exposure(img: &RgbImage, scale: f64) -> RgbImage {
    let mut out = img.clone();
    for v in out.iter_mut() {
        *v = (*v as f64 * scale).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Keeps `color` where the mask is set and takes `background` elsewhere.
pub fn composite_background(color: &RgbImage, mask: &GrayImage, background: &RgbImage) -> RgbImage {
    let mut out = background.clone();
    for (x, y, m) in mask.enumerate_pixels() {
        if m.0[0] == MASK_ON {
            out.put_pixel(x, y, *color.get_pixel(x, y));
        }
    }
    out
}

pub fn black(width: u32, height: u32) -> RgbImage {
    RgbImage::from_pixel(width, height, Rgb([0, 0, 0]))
}
