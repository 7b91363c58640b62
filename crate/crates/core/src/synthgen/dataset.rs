use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::locenv::BBox;
use crate::rng::{derive_seed, SplitMix64};
use crate::synthgen::image::RgbImage;
use crate::synthgen::scene::{render_scene, sample_placement, BackgroundParams};
use crate::synthgen::template::{class_name, make_templates};

pub const INFO_FILE: &str = "dataset.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Eval => 2,
        }
    }
}

/// One manifest line. Serialized keys are exactly
/// `{id, image_path, class_id, class_name, gt_box, seed}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    /// Relative to the manifest's directory.
    pub image_path: String,
    pub class_id: usize,
    pub class_name: String,
    pub gt_box: Option<BBox>,
    pub seed: u64,
}

/// Dataset-level metadata written next to the manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetInfo {
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub canvas: usize,
    pub scale_range: (f64, f64),
    pub seed: u64,
    pub n_train: usize,
    pub n_eval: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub num_classes: usize,
    pub n_train: usize,
    pub n_eval: usize,
    pub scale_range: (f64, f64),
    pub seed: u64,
    pub canvas: usize,
}

impl GenConfig {
    pub fn new(num_classes: usize, n_train: usize, n_eval: usize, scale_range: (f64, f64), seed: u64) -> Self {
        Self {
            num_classes,
            n_train,
            n_eval,
            scale_range,
            seed,
            canvas: 64,
        }
    }
}

/// A loaded split.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub split: Split,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub records: Vec<ManifestRecord>,
    /// Directory image paths are resolved against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn image_path(&self, record: &ManifestRecord) -> PathBuf {
        self.root.join(&record.image_path)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_gt_boxes(&self) -> bool {
        self.records.iter().all(|r| r.gt_box.is_some())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// SHA-256 over the manifest lines, hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_jsonl().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Keeps only the records accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(&ManifestRecord) -> bool) -> Self {
        Self {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            ..self.clone()
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Reads a JSON-lines manifest. The class count comes from `dataset.json`
    /// beside it when present, otherwise from the largest class id.
    pub fn load(path: &Path) -> Result<Self> {
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let bad = |reason: String| Error::Manifest {
            path: path.to_path_buf(),
            reason,
        };
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord =
                serde_json::from_str(&line).map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
            records.push(rec);
        }
        let info_path = root.join(INFO_FILE);
        let (num_classes, class_names) = if info_path.exists() {
            let text = std::fs::read_to_string(&info_path).map_err(|e| Error::io(&info_path, e))?;
            let info: DatasetInfo = serde_json::from_str(&text)?;
            (info.num_classes, info.class_names)
        } else {
            let c = records.iter().map(|r| r.class_id + 1).max().unwrap_or(0);
            (c, (0..c).map(class_name).collect())
        };
        let split = match path.file_stem().and_then(|s| s.to_str()) {
            Some(s) if s.starts_with("eval") => Split::Eval,
            _ => Split::Train,
        };
        let manifest = Self {
            split,
            num_classes,
            class_names,
            records,
            root,
        };
        manifest.validate().map_err(bad)?;
        Ok(manifest)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let mut ids = HashSet::new();
        for r in &self.records {
            if !ids.insert(r.id.as_str()) {
                return Err(format!("duplicate id {}", r.id));
            }
            if r.class_id >= self.num_classes {
                return Err(format!("{}: class {} ≥ {}", r.id, r.class_id, self.num_classes));
            }
            if !self.image_path(r).is_file() {
                return Err(format!("{}: missing image {}", r.id, r.image_path));
            }
        }
        Ok(())
    }

    /// Reads every image of the split.
    pub fn load_images(&self) -> Result<Vec<RgbImage>> {
        self.records
            .par_iter()
            .map(|r| RgbImage::read_ppm(&self.image_path(r)))
            .collect()
    }
}

/// Renders a dataset into `out_dir`: `images/`, `train.jsonl`, `eval.jsonl`
/// and `dataset.json`. Classes are assigned round-robin, so per-class counts
/// differ by at most one; train and eval draw from disjoint seed streams.
pub fn generate_dataset(cfg: &GenConfig, out_dir: &Path) -> Result<(DatasetManifest, DatasetManifest)> {
    let (lo, hi) = cfg.scale_range;
    if !(0.0 < lo && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidArgument(format!("scale range ({lo}, {hi}) outside (0, 1]")));
    }
    let templates = make_templates(cfg.num_classes, cfg.seed)?;
    let background = BackgroundParams::new(cfg.canvas, &templates);
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;

    let class_names: Vec<String> = templates.iter().map(|t| t.class_name()).collect();
    let mut manifests = Vec::with_capacity(2);
    for (split, count) in [(Split::Train, cfg.n_train), (Split::Eval, cfg.n_eval)] {
        let records = (0..count)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(cfg.seed, split.stream(), i as u64);
                let template = &templates[i % cfg.num_classes];
                let mut rng = SplitMix64::new(seed);
                let placement = sample_placement(&mut rng, (lo, hi), cfg.canvas);
                let scene = render_scene(template, &background, &placement, rng.derive(1).state())?;
                let id = format!("{}-{i:06}", split.name());
                let rel = format!("images/{id}.ppm");
                scene.image.write_ppm(&out_dir.join(&rel))?;
                Ok(ManifestRecord {
                    id,
                    image_path: rel,
                    class_id: template.class_id,
                    class_name: template.class_name(),
                    gt_box: Some(scene.gt_box),
                    seed,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = DatasetManifest {
            split,
            num_classes: cfg.num_classes,
            class_names: class_names.clone(),
            records,
            root: out_dir.to_path_buf(),
        };
        manifest.write(&out_dir.join(format!("{}.jsonl", split.name())))?;
        manifests.push(manifest);
    }

    let info = DatasetInfo {
        num_classes: cfg.num_classes,
        class_names,
        canvas: cfg.canvas,
        scale_range: (lo, hi),
        seed: cfg.seed,
        n_train: cfg.n_train,
        n_eval: cfg.n_eval,
    };
    let info_path = out_dir.join(INFO_FILE);
    let mut f = std::fs::File::create(&info_path).map_err(|e| Error::io(&info_path, e))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&info)?).map_err(|e| Error::io(&info_path, e))?;

    let eval = manifests.pop().expect("two splits");
    let train = manifests.pop().expect("two splits");
    Ok((train, eval))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_balance_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GenConfig::new(4, 22, 9, (0.15, 0.9), 42);
        let (train, eval) = generate_dataset(&cfg, dir.path()).unwrap();
        assert_eq!((train.len(), eval.len()), (22, 9));
        for c in 0..4 {
            let n = train.records.iter().filter(|r| r.class_id == c).count();
            assert!((5..=6).contains(&n));
        }
        let back = DatasetManifest::load(&dir.path().join("train.jsonl")).unwrap();
        assert_eq!(back, train);
        assert_eq!(DatasetManifest::load(&dir.path().join("eval.jsonl")).unwrap().split, Split::Eval);
        let seeds: HashSet<u64> = train.records.iter().chain(&eval.records).map(|r| r.seed).collect();
        assert_eq!(seeds.len(), 31);
    }

    #[test]
    fn manifest_line_has_exact_keys() {
        let dir = tempfile::tempdir().unwrap();
        let (train, _) = generate_dataset(&GenConfig::new(2, 2, 1, (0.3, 0.5), 1), dir.path()).unwrap();
        let line = train.to_jsonl();
        let v: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        keys.sort();
        assert_eq!(keys, ["class_id", "class_name", "gt_box", "id", "image_path", "seed"]);
        assert_eq!(v["gt_box"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn load_rejects_unknown_keys_and_missing_images() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        std::fs::write(&path, r#"{"id":"a","image_path":"x.ppm","class_id":0,"class_name":"b","gt_box":null,"seed":1,"extra":2}"#).unwrap();
        assert!(matches!(DatasetManifest::load(&path), Err(Error::Manifest { .. })));
        std::fs::write(&path, r#"{"id":"a","image_path":"x.ppm","class_id":0,"class_name":"b","gt_box":null,"seed":1}"#).unwrap();
        assert!(matches!(DatasetManifest::load(&path), Err(Error::Manifest { .. })));
    }
}
