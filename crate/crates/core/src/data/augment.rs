use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::image::{Image, CHANNELS};
use crate::error::{Error, Result};

/// Ranges for random affine augmentation. Each range is symmetric around
/// the identity and sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Degrees.
    pub rotation_range: f64,
    /// Fraction of image width.
    pub width_shift: f64,
    /// Fraction of image height.
    pub height_shift: f64,
    /// Degrees.
    pub shear_range: f64,
    /// Scale drawn from `[1 − zoom, 1 + zoom]` per axis.
    pub zoom_range: f64,
    pub horizontal_flip_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rotation_range: 15.0,
            width_shift: 0.1,
            height_shift: 0.1,
            shear_range: 10.0,
            zoom_range: 0.1,
            horizontal_flip_prob: 0.5,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        AugmentConfig {
            rotation_range: 0.0,
            width_shift: 0.0,
            height_shift: 0.0,
            shear_range: 0.0,
            zoom_range: 0.0,
            horizontal_flip_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("rotation_range", self.rotation_range),
            ("width_shift", self.width_shift),
            ("height_shift", self.height_shift),
            ("shear_range", self.shear_range),
            ("zoom_range", self.zoom_range),
        ];
        for (name, v) in ranges {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("augment {name} must be non-negative, got {v}")));
            }
        }
        if self.zoom_range >= 1.0 {
            return Err(Error::Config(format!("augment zoom_range must be below 1, got {}", self.zoom_range)));
        }
        if !(0.0..=1.0).contains(&self.horizontal_flip_prob) {
            return Err(Error::Config(format!(
                "augment horizontal_flip_prob must lie in [0, 1], got {}",
                self.horizontal_flip_prob
            )));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> AugmentParams {
        AugmentParams {
            rotation: symmetric(rng, self.rotation_range).to_radians(),
            shift_x: symmetric(rng, self.width_shift),
            shift_y: symmetric(rng, self.height_shift),
            shear: symmetric(rng, self.shear_range).to_radians(),
            zoom_x: 1.0 + symmetric(rng, self.zoom_range),
            zoom_y: 1.0 + symmetric(rng, self.zoom_range),
            flip: self.horizontal_flip_prob > 0.0 && rng.random::<f64>() < self.horizontal_flip_prob,
        }
    }
}

fn symmetric(rng: &mut dyn RngCore, range: f64) -> f64 {
    if range == 0.0 {
        0.0
    } else {
        rng.random_range(-range..=range)
    }
}

/// One concrete draw of augmentation parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    /// Radians.
    pub rotation: f64,
    /// Fractions of the image extent.
    pub shift_x: f64,
    pub shift_y: f64,
    /// Radians.
    pub shear: f64,
    pub zoom_x: f64,
    pub zoom_y: f64,
    pub flip: bool,
}

impl AugmentParams {
    pub fn identity() -> Self {
        AugmentParams { rotation: 0.0, shift_x: 0.0, shift_y: 0.0, shear: 0.0, zoom_x: 1.0, zoom_y: 1.0, flip: false }
    }

    fn is_affine_identity(&self) -> bool {
        self.rotation == 0.0
            && self.shift_x == 0.0
            && self.shift_y == 0.0
            && self.shear == 0.0
            && self.zoom_x == 1.0
            && self.zoom_y == 1.0
    }

    /// Matrix mapping output offsets from the image centre to input offsets,
    /// as `[[a, b], [c, d]]` over `(x, y)`.
    fn matrix(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.rotation.sin_cos();
        let rot = [[c, -s], [s, c]];
        let shear = [[1.0, -self.shear.sin()], [0.0, self.shear.cos()]];
        let zoom = [[self.zoom_x, 0.0], [0.0, self.zoom_y]];
        mul(mul(rot, shear), zoom)
    }

    /// Resamples with the composite affine transform, then flips. Pixels
    /// mapped from outside the frame take the nearest edge value.
    pub fn apply(&self, image: &Image) -> Image {
        let mut out = if self.is_affine_identity() { image.clone() } else { self.warp(image) };
        if self.flip {
            out = out.flip_horizontal();
        }
        out
    }

    fn warp(&self, image: &Image) -> Image {
        let (h, w) = (image.height(), image.width());
        let m = self.matrix();
        let cy = (h as f64 - 1.0) / 2.0;
        let cx = (w as f64 - 1.0) / 2.0;
        let tx = self.shift_x * w as f64;
        let ty = self.shift_y * h as f64;
        let mut data = vec![0.0f32; h * w * CHANNELS];
        for y in 0..h {
            let dy = y as f64 - cy;
            for x in 0..w {
                let dx = x as f64 - cx;
                let sx = m[0][0] * dx + m[0][1] * dy + cx + tx;
                let sy = m[1][0] * dx + m[1][1] * dy + cy + ty;
                let at = (y * w + x) * CHANNELS;
                image.sample_clamped(sy, sx, &mut data[at..at + CHANNELS]);
            }
        }
        Image::new(h, w, data).expect("same extents")
    }
}

fn mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut r = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

/// Samples parameters from `config` and applies them.
pub fn augment(image: &Image, config: &AugmentConfig, rng: &mut dyn RngCore) -> Image {
    config.sample(rng).apply(image)
}
