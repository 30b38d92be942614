use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::augment::AugmentConfig;
use super::dataset::Dataset;
use super::image::{Image, CHANNELS};
use super::split::{Split, SplitManifest};
use crate::error::Result;
use crate::nn::derive_seed;
use crate::tensor::Tensor;

/// `N×H×W×3` images with their labels and dataset indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchOptions {
    pub batch_size: usize,
    /// Shuffle seed; `None` keeps dataset order.
    pub shuffle: Option<u64>,
    /// Applied to training-split samples only.
    pub augment: Option<AugmentConfig>,
    pub augment_seed: u64,
}

impl BatchOptions {
    pub fn sequential(batch_size: usize) -> Self {
        BatchOptions { batch_size, ..Default::default() }
    }
}

/// A dataset bound to a split manifest and an input resolution. Resized
/// images are cached on first use unless caching is disabled, and every
/// sample handed out is tallied against its split.
#[derive(Debug)]
pub struct ImageSet {
    dataset: Dataset,
    manifest: SplitManifest,
    height: usize,
    width: usize,
    cache: Option<Vec<OnceLock<Image>>>,
    access: [AtomicUsize; 3],
}

impl ImageSet {
    pub fn new(dataset: Dataset, manifest: SplitManifest, height: usize, width: usize) -> Result<Self> {
        manifest.check_matches(&dataset)?;
        let cache = Some((0..dataset.len()).map(|_| OnceLock::new()).collect());
        Ok(ImageSet { dataset, manifest, height, width, cache, access: Default::default() })
    }

    /// Decodes from the source on every access instead of caching.
    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn manifest(&self) -> &SplitManifest {
        &self.manifest
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn split_of(&self, index: usize) -> Split {
        self.manifest.assignments[index].split
    }

    /// Number of samples of `split` loaded so far.
    pub fn accesses(&self, split: Split) -> usize {
        self.access[split.index()].load(Ordering::SeqCst)
    }

    pub fn reset_accesses(&self) {
        for a in &self.access {
            a.store(0, Ordering::SeqCst);
        }
    }

    /// Resized image of one sample, without augmentation.
    pub fn image(&self, index: usize) -> Result<Image> {
        self.access[self.split_of(index).index()].fetch_add(1, Ordering::SeqCst);
        self.resized(index)
    }

    fn resized(&self, index: usize) -> Result<Image> {
        let load = || -> Result<Image> {
            Ok(self.dataset.samples()[index].load()?.resize(self.height, self.width))
        };
        match &self.cache {
            None => load(),
            Some(cache) => {
                if let Some(img) = cache[index].get() {
                    return Ok(img.clone());
                }
                let img = load()?;
                Ok(cache[index].get_or_init(|| img).clone())
            }
        }
    }

    pub fn num_batches(&self, split: Split, batch_size: usize) -> usize {
        self.manifest.indices(split).len().div_ceil(batch_size.max(1))
    }

    /// One epoch over `split`.
    pub fn batches(&self, split: Split, options: &BatchOptions) -> BatchStream<'_> {
        self.batches_of(self.manifest.indices(split), options)
    }

    /// One pass over arbitrary dataset indices. Augmentation still touches
    /// only samples assigned to the training split.
    pub fn batches_of(&self, mut indices: Vec<usize>, options: &BatchOptions) -> BatchStream<'_> {
        if let Some(seed) = options.shuffle {
            indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        BatchStream { set: self, indices, options: options.clone(), next: 0 }
    }

    fn assemble(&self, indices: &[usize], options: &BatchOptions) -> Result<Batch> {
        let images = indices
            .par_iter()
            .map(|&i| {
                let img = self.image(i)?;
                match &options.augment {
                    Some(cfg) if self.split_of(i) == Split::Train => {
                        let key = &self.dataset.samples()[i].key;
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.augment_seed, key));
                        Ok(super::augment::augment(&img, cfg, &mut rng))
                    }
                    _ => Ok(img),
                }
            })
            .collect::<Result<Vec<Image>>>()?;
        let mut data = Vec::with_capacity(indices.len() * self.height * self.width * CHANNELS);
        for img in &images {
            data.extend_from_slice(img.data());
        }
        let labels = indices.iter().map(|&i| self.dataset.samples()[i].label).collect();
        Ok(Batch {
            images: Tensor::new(vec![indices.len(), self.height, self.width, CHANNELS], data)?,
            labels,
            indices: indices.to_vec(),
        })
    }
}

/// Iterator of batches in a fixed order. The final batch may be short.
pub struct BatchStream<'a> {
    set: &'a ImageSet,
    indices: Vec<usize>,
    options: BatchOptions,
    next: usize,
}

impl BatchStream<'_> {
    pub fn order(&self) -> &[usize] {
        &self.indices
    }
}

impl Iterator for BatchStream<'_> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.indices.len() {
            return None;
        }
        let end = (self.next + self.options.batch_size.max(1)).min(self.indices.len());
        let chunk = &self.indices[self.next..end];
        self.next = end;
        Some(self.set.assemble(chunk, &self.options))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.indices.len() - self.next).div_ceil(self.options.batch_size.max(1));
        (n, Some(n))
    }
}

impl ExactSizeIterator for BatchStream<'_> {}
