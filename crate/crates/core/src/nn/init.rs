use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{Real, Tensor};

/// Weight initialization scheme. Biases are always zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `U(-√(6/fan_in), √(6/fan_in))`
    HeUniform,
    /// `U(-√(6/(fan_in+fan_out)), √(6/(fan_in+fan_out)))`
    GlorotUniform,
}

impl Init {
    pub fn limit(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            Init::HeUniform => (6.0 / fan_in as f64).sqrt(),
            Init::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        }
    }

    pub fn sample<T: Real, R: Rng + ?Sized>(
        self,
        shape: Vec<usize>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Tensor<T> {
        let limit = self.limit(fan_in, fan_out);
        let n = shape.iter().product();
        let data = (0..n).map(|_| T::of(rng.random_range(-limit..limit))).collect();
        Tensor::new(shape, data).expect("shape product matches")
    }
}

/// Mixes a base seed with a name so every layer draws from its own stream,
/// independent of construction order.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, then a splitmix64 finalizer with the base seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn layer_rng(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, name))
}
