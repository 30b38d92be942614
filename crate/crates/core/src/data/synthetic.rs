use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::image::Image;
use crate::error::{Error, Result};

/// Procedural stand-in for a fish image collection: each class is a
/// distinct striped texture in its own colour, with random phase, colour
/// jitter and pixel noise per image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub per_class: usize,
    pub height: usize,
    pub width: usize,
    /// Amplitude of uniform per-pixel noise.
    pub noise: f32,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { classes: 4, per_class: 20, height: 32, width: 32, noise: 0.15, seed: 0 }
    }
}

impl SyntheticConfig {
    pub fn class_name(&self, c: usize) -> String {
        format!("class_{c:02}")
    }

    /// Images grouped by class name.
    pub fn images(&self) -> Result<Vec<(String, Vec<Image>)>> {
        if self.classes == 0 || self.per_class == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Config("synthetic dataset extents must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let groups = (0..self.classes)
            .map(|c| {
                let imgs = (0..self.per_class).map(|_| self.draw(c, &mut rng)).collect();
                (self.class_name(c), imgs)
            })
            .collect();
        Ok(groups)
    }

    pub fn generate(&self) -> Result<Dataset> {
        Dataset::from_images(self.images()?)
    }

    /// Writes `root/<class>/<nnnn>.png`.
    pub fn write_tree(&self, root: &Path) -> Result<()> {
        for (name, imgs) in self.images()? {
            let dir = root.join(&name);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for (i, img) in imgs.iter().enumerate() {
                img.save_png(&dir.join(format!("{i:04}.png")))?;
            }
        }
        Ok(())
    }

    fn draw(&self, class: usize, rng: &mut ChaCha8Rng) -> Image {
        let hue = class as f32 / self.classes as f32;
        let base = hue_to_rgb(hue);
        let angle = std::f32::consts::PI * (class % 4) as f32 / 4.0;
        let period = 4.0 + 2.0 * (class / 4 % 3) as f32;
        let (dir_y, dir_x) = angle.sin_cos();
        let phase: f32 = rng.random_range(0.0..period);
        let jitter: [f32; 3] = std::array::from_fn(|_| rng.random_range(-0.1..0.1));
        let mut data = Vec::with_capacity(self.height * self.width * 3);
        for y in 0..self.height {
            for x in 0..self.width {
                let t = (x as f32 * dir_x + y as f32 * dir_y + phase) / period;
                let stripe = if t.rem_euclid(1.0) < 0.5 { 1.0 } else { 0.35 };
                for ch in 0..3 {
                    let n = if self.noise > 0.0 { rng.random_range(-self.noise..self.noise) } else { 0.0 };
                    data.push(((base[ch] + jitter[ch]) * stripe + n).clamp(0.0, 1.0));
                }
            }
        }
        Image::new(self.height, self.width, data).expect("extents checked")
    }
}

fn hue_to_rgb(h: f32) -> [f32; 3] {
    let f = |n: f32| {
        let k = (n + h * 6.0) % 6.0;
        0.9 - 0.7 * k.min(4.0 - k).clamp(0.0, 1.0)
    };
    [f(5.0), f(3.0), f(1.0)]
}
