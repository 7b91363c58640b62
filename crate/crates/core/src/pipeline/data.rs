use std::path::Path;

use crate::error::{Error, Result};
use crate::synthgen::{DatasetManifest, RgbImage};

/// A manifest with its images decoded in memory, in manifest order.
#[derive(Clone, Debug)]
pub struct SceneSet {
    pub manifest: DatasetManifest,
    pub images: Vec<RgbImage>,
}

impl SceneSet {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::load(manifest_path)?;
        let images = manifest.load_images()?;
        Ok(Self { manifest, images })
    }

    pub fn new(manifest: DatasetManifest, images: Vec<RgbImage>) -> Result<Self> {
        if manifest.len() != images.len() {
            return Err(Error::InvalidArgument(format!(
                "{} records but {} images",
                manifest.len(),
                images.len()
            )));
        }
        Ok(Self { manifest, images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.manifest.num_classes
    }

    pub fn labels(&self) -> Vec<usize> {
        self.manifest.records.iter().map(|r| r.class_id).collect()
    }

    /// Subset keeping records accepted by `keep`, images included.
    pub fn filtered(&self, keep: impl Fn(&crate::synthgen::ManifestRecord) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.manifest.records[i])).collect();
        let mut manifest = self.manifest.clone();
        manifest.records = idx.iter().map(|&i| self.manifest.records[i].clone()).collect();
        Self {
            manifest,
            images: idx.iter().map(|&i| self.images[i].clone()).collect(),
        }
    }
}
