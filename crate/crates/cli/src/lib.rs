//! Overlay rendering for visual review of generated masks.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use corridor_gt::mask::Mask;
use image::{Rgb, RgbImage};

pub const DEFAULT_TINT: [u8; 3] = [0, 255, 0];

/// Tints the masked pixels: `round((1 − α)·src + α·tint)` per channel.
pub fn blend(image: &RgbImage, mask: &Mask, alpha: f64, tint: [u8; 3]) -> Result<RgbImage> {
    ensure!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1], got {alpha}");
    ensure!(
        (image.width() as usize, image.height() as usize) == mask.shape(),
        "image is {}x{} but mask is {}x{}",
        image.width(),
        image.height(),
        mask.width,
        mask.height
    );
    let mut out = image.clone();
    for (x, y, px) in out.enumerate_pixels_mut() {
        if mask.get(x as usize, y as usize) {
            let mix = |s: u8, t: u8| ((1.0 - alpha) * s as f64 + alpha * t as f64).round() as u8;
            *px = Rgb([mix(px[0], tint[0]), mix(px[1], tint[1]), mix(px[2], tint[2])]);
        }
    }
    Ok(out)
}

pub fn overlay(image_path: &Path, mask_path: &Path, alpha: f64, tint: [u8; 3], out: &Path) -> Result<()> {
    let img = image::open(image_path).with_context(|| format!("reading {}", image_path.display()))?.to_rgb8();
    let mask = Mask::read_pgm(mask_path).with_context(|| format!("reading {}", mask_path.display()))?;
    blend(&img, &mask, alpha, tint)?
        .save_with_format(out, image::ImageFormat::Png)
        .with_context(|| format!("writing {}", out.display()))
}
