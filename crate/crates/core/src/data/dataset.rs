use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::image::Image;
use crate::error::{Error, Result};

/// Where a sample's pixels come from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    File(PathBuf),
    Memory(Arc<Image>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Stable identifier: the path relative to the dataset root, `/`-separated.
    pub key: String,
    pub label: usize,
    pub source: Source,
}

impl Sample {
    pub fn load(&self) -> Result<Image> {
        match &self.source {
            Source::File(p) => Image::open(p),
            Source::Memory(img) => Ok((**img).clone()),
        }
    }
}

/// Labeled image collection. Class indices follow the sorted class names.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    class_names: Vec<String>,
}

/// Files that could not be decoded during ingestion.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IngestReport {
    pub skipped: Vec<(PathBuf, String)>,
}

impl IngestReport {
    pub fn skipped_count(&self) -> usize {
        self.skipped.len()
    }
}

impl Dataset {
    pub fn new(class_names: Vec<String>, samples: Vec<Sample>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::Data("dataset has no classes".into()));
        }
        if let Some(s) = samples.iter().find(|s| s.label >= class_names.len()) {
            return Err(Error::Data(format!("sample {} has label {} out of range", s.key, s.label)));
        }
        Ok(Dataset { samples, class_names })
    }

    /// Builds an in-memory dataset from `(class name, images)` groups. Class
    /// names are sorted; keys are `class/index`.
    pub fn from_images(groups: Vec<(String, Vec<Image>)>) -> Result<Self> {
        let mut groups = groups;
        groups.sort_by(|a, b| a.0.cmp(&b.0));
        let class_names: Vec<String> = groups.iter().map(|g| g.0.clone()).collect();
        let mut samples = Vec::new();
        for (label, (name, images)) in groups.into_iter().enumerate() {
            for (i, img) in images.into_iter().enumerate() {
                samples.push(Sample {
                    key: format!("{name}/{i:05}"),
                    label,
                    source: Source::Memory(Arc::new(img)),
                });
            }
        }
        Dataset::new(class_names, samples)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Reads `root/<class>/<image>` trees. Every file is decoded once to check
/// it; undecodable files are skipped and listed in the report.
pub fn ingest(root: &Path) -> Result<(Dataset, IngestReport)> {
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if class_dirs.is_empty() {
        return Err(Error::Data(format!("{}: no class directories", root.display())));
    }
    let mut report = IngestReport::default();
    let mut class_names = Vec::new();
    let mut samples = Vec::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Data(format!("{}: class directory name is not UTF-8", dir.display())))?
            .to_string();
        let mut decoded = 0usize;
        for file in sorted_entries(dir)?.into_iter().filter(|p| p.is_file()) {
            match Image::open(&file) {
                Ok(_) => {
                    let fname = file.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                    samples.push(Sample {
                        key: format!("{name}/{fname}"),
                        label,
                        source: Source::File(file),
                    });
                    decoded += 1;
                }
                Err(e) => report.skipped.push((file, e.to_string())),
            }
        }
        if decoded == 0 {
            return Err(Error::Data(format!("class directory {} has no decodable images", dir.display())));
        }
        class_names.push(name);
    }
    Ok((Dataset::new(class_names, samples)?, report))
}
