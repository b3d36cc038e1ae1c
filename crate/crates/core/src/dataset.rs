//! Corrupted benchmark construction.
//!
//! Layout produced by [`build_corrupted_set`]:
//!
//! ```text
//! out_dir/
//!   manifest.json
//!   annotations.json            byte copy of the clean annotation file
//!   <kind>/severity_<s>/<file_name from the annotations>
//! ```
//!
//! File names are kept verbatim so the copied annotations resolve in every product
//! directory. Contents are PNG, except for `jpeg_compression` which stores the
//! degraded JPEG stream. Decoders detect the format from the bytes.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coco::{CocoDataset, ImageId};
use crate::corruption::{
    corrupt_encoded, derive_seed, CorruptionKind, CorruptionSpec, FrostOverlays, ImageBuffer, OutputEncoding,
    ParamSchedule, Severity,
};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Highest severity recommended for a dataset family.
pub fn recommend_severity(dataset_name: &str) -> u8 {
    match dataset_name.trim().to_ascii_lowercase().as_str() {
        "flir" | "flir-aligned" | "flir_aligned" => 2,
        "llvip" => 5,
        other => {
            log::info!("no severity recommendation for dataset `{other}`; using 5");
            5
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: ImageId,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Product {
    pub kind: CorruptionKind,
    pub severity: Severity,
    /// Relative to the manifest's directory, `/`-separated.
    pub dir: String,
    pub encoding: OutputEncoding,
    /// Pixels moved but boxes were kept as-is.
    pub geometry_approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub dataset_name: String,
    pub split: String,
    pub global_seed: u64,
    pub tool_version: String,
    pub schedule_digest: String,
    pub schedule: ParamSchedule,
    pub annotations_ref: String,
    pub severity_cap: u8,
    pub entries: Vec<ManifestEntry>,
    pub products: Vec<Product>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        crate::coco::read_json(path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Checks the recorded digest against the recorded schedule and that every
    /// product directory under `root` holds exactly one file per entry.
    pub fn verify(&self, root: &Path) -> Result<()> {
        if self.schedule.digest() != self.schedule_digest {
            return Err(Error::Integrity("schedule digest does not match the recorded schedule".into()));
        }
        for p in &self.products {
            let dir = root.join(&p.dir);
            let mut found = 0usize;
            for entry in &self.entries {
                if dir.join(&entry.file_name).is_file() {
                    found += 1;
                } else {
                    return Err(Error::Integrity(format!(
                        "product {} is missing {} (image id {})",
                        p.dir, entry.file_name, entry.image_id
                    )));
                }
            }
            let present = list_files(&dir)?.len();
            if present != found {
                return Err(Error::Integrity(format!(
                    "product {} holds {present} files but the manifest lists {found}",
                    p.dir
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub dataset_name: String,
    pub split: String,
    pub global_seed: u64,
    pub kinds: Vec<CorruptionKind>,
    pub severities: Vec<Severity>,
    pub schedule: ParamSchedule,
    pub frost_overlays: Option<FrostOverlays>,
    /// Write into a non-empty output directory, replacing files with the same name.
    pub overwrite: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            dataset_name: "unnamed".into(),
            split: "test".into(),
            global_seed: 1234,
            kinds: CorruptionKind::ALL.to_vec(),
            severities: Severity::ALL.to_vec(),
            schedule: ParamSchedule::default(),
            frost_overlays: None,
            overwrite: false,
        }
    }
}

pub fn product_dir(kind: CorruptionKind, severity: Severity) -> String {
    format!("{}/severity_{}", kind.name(), severity)
}

fn check_relative(name: &str) -> Result<()> {
    let p = Path::new(name);
    let ok = !name.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(Error::Integrity(format!("file_name `{name}` must be a relative path without `..`")))
    }
}

fn sorted_unique<T: Ord + Copy>(v: &[T]) -> Vec<T> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Writes a corrupted copy of every annotated image for each (kind, severity) pair.
pub fn build_corrupted_set(
    images_dir: &Path,
    annotations: &Path,
    out_dir: &Path,
    opts: &BuildOptions,
) -> Result<DatasetManifest> {
    opts.schedule.validate()?;
    if opts.kinds.is_empty() || opts.severities.is_empty() {
        return Err(Error::domain("at least one corruption kind and one severity are required"));
    }
    let ann_bytes =
        std::fs::read(annotations).map_err(|e| Error::io(format!("reading {}", annotations.display()), e))?;
    let coco: CocoDataset = serde_json::from_slice(&ann_bytes).map_err(|source| Error::Json {
        path: annotations.to_owned(),
        source,
    })?;
    coco.validate()?;

    let mut warnings = Vec::new();
    let cap = recommend_severity(&opts.dataset_name);
    let severities = sorted_unique(&opts.severities);
    let kinds = {
        let mut k = opts.kinds.clone();
        k.sort_by_key(|k| k.index());
        k.dedup();
        k
    };
    for s in severities.iter().filter(|s| s.get() > cap) {
        let msg = format!(
            "severity {s} exceeds the recommended cap of {cap} for dataset `{}`",
            opts.dataset_name
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let mut images: Vec<_> = coco.images.iter().collect();
    images.sort_by(|a, b| a.id.cmp(&b.id));
    let mut missing = Vec::new();
    for img in &images {
        check_relative(&img.file_name)?;
        if !images_dir.join(&img.file_name).is_file() {
            missing.push(format!("{} ({})", img.id, img.file_name));
        }
    }
    if !missing.is_empty() {
        return Err(Error::Integrity(format!(
            "{} image file(s) missing under {}: {}",
            missing.len(),
            images_dir.display(),
            missing.join(", ")
        )));
    }
    let mut by_name = BTreeMap::new();
    for img in &images {
        if let Some(prev) = by_name.insert(img.file_name.as_str(), &img.id) {
            return Err(Error::Integrity(format!(
                "images {prev} and {} share file_name {}",
                img.id, img.file_name
            )));
        }
    }

    prepare_out_dir(out_dir, opts.overwrite)?;
    let products: Vec<Product> = kinds
        .iter()
        .flat_map(|&kind| {
            severities.iter().map(move |&severity| Product {
                kind,
                severity,
                dir: product_dir(kind, severity),
                encoding: if kind == CorruptionKind::JpegCompression {
                    OutputEncoding::Jpeg
                } else {
                    OutputEncoding::Png
                },
                geometry_approximate: kind.moves_geometry(),
            })
        })
        .collect();
    for p in &products {
        let d = out_dir.join(&p.dir);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(format!("creating {}", d.display()), e))?;
    }

    let overlays = opts.frost_overlays.as_ref();
    let entries: Vec<ManifestEntry> = images
        .par_iter()
        .map(|img| {
            let src = images_dir.join(&img.file_name);
            let clean = ImageBuffer::open(&src)?;
            if let (Some(w), Some(h)) = (img.width, img.height) {
                if (w, h) != (clean.width(), clean.height()) {
                    log::warn!(
                        "image {} is {}x{} on disk but annotated as {w}x{h}",
                        img.id,
                        clean.width(),
                        clean.height()
                    );
                }
            }
            let id = img.id.to_string();
            products.par_iter().try_for_each(|p| {
                let seed = derive_seed(opts.global_seed, &id, p.kind, p.severity.get());
                let spec = CorruptionSpec {
                    kind: p.kind,
                    severity: p.severity,
                    seed,
                };
                let (bytes, _) = corrupt_encoded(&clean, &spec, &opts.schedule, overlays).map_err(|e| {
                    Error::domain(format!("image {} ({}) under {}: {e}", img.id, img.file_name, p.dir))
                })?;
                let dst = out_dir.join(&p.dir).join(&img.file_name);
                if let Some(parent) = dst.parent() {
                    std::fs::create_dir_all(parent)
                        .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
                }
                std::fs::write(&dst, bytes).map_err(|e| Error::io(format!("writing {}", dst.display()), e))
            })?;
            Ok(ManifestEntry {
                image_id: img.id.clone(),
                file_name: img.file_name.clone(),
                width: clean.width(),
                height: clean.height(),
            })
        })
        .collect::<Result<_>>()?;

    let ann_out = out_dir.join(ANNOTATIONS_FILE);
    std::fs::write(&ann_out, &ann_bytes).map_err(|e| Error::io(format!("writing {}", ann_out.display()), e))?;

    let manifest = DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        dataset_name: opts.dataset_name.clone(),
        split: opts.split.clone(),
        global_seed: opts.global_seed,
        tool_version: crate::VERSION.to_string(),
        schedule_digest: opts.schedule.digest(),
        schedule: opts.schedule.clone(),
        annotations_ref: ANNOTATIONS_FILE.to_string(),
        severity_cap: cap,
        entries,
        products,
        warnings,
    };
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_json() + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(manifest)
}

fn prepare_out_dir(out_dir: &Path, overwrite: bool) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let non_empty = std::fs::read_dir(out_dir)
        .map_err(|e| Error::io(format!("listing {}", out_dir.display()), e))?
        .next()
        .is_some();
    if non_empty && !overwrite {
        return Err(Error::domain(format!(
            "output directory {} is not empty (pass overwrite to reuse it)",
            out_dir.display()
        )));
    }
    Ok(())
}

/// Every regular file below `root`, as sorted `/`-separated relative paths.
pub fn list_files(root: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root) {
        let entry = entry.map_err(|e| {
            let ctx = format!("listing {}", root.display());
            match e.into_io_error() {
                Some(io) => Error::io(ctx, io),
                None => Error::Integrity(format!("{ctx}: filesystem loop")),
            }
        })?;
        if entry.file_type().is_file() {
            let rel = entry.path().strip_prefix(root).expect("walk stays below root");
            let parts: Vec<_> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            out.push(parts.join("/"));
        }
    }
    out.sort();
    Ok(out)
}

/// SHA-256 over the sorted relative paths and contents of every file below `root`.
pub fn tree_hash(root: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for rel in list_files(root)? {
        let path: PathBuf = root.join(&rel);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        h.update((rel.len() as u64).to_le_bytes());
        h.update(rel.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}
