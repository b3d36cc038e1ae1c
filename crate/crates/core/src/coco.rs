//! COCO annotation and result files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Image identifier; COCO files use integers but some exports use strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImageId {
    Int(u64),
    Str(String),
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageId::Int(v) => write!(f, "{v}"),
            ImageId::Str(s) => f.write_str(s),
        }
    }
}

impl From<u64> for ImageId {
    fn from(v: u64) -> Self {
        ImageId::Int(v)
    }
}

/// Axis-aligned box in COCO corner form `(x, y, w, h)`, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// From centre form `(cx, cy, w, h)`.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: ImageId,
    pub file_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    #[serde(default)]
    pub id: Option<u64>,
    pub image_id: ImageId,
    pub category_id: u64,
    pub bbox: BBox,
    #[serde(default)]
    pub iscrowd: Option<Value>,
    #[serde(default)]
    pub ignore: Option<Value>,
}

fn truthy(v: &Option<Value>) -> bool {
    match v {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(Value::Number(n)) => n.as_f64().is_some_and(|x| x != 0.0),
        Some(_) => true,
    }
}

impl CocoAnnotation {
    pub fn is_ignored(&self) -> bool {
        truthy(&self.iscrowd) || truthy(&self.ignore)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    #[serde(default)]
    pub name: String,
}

/// The parts of a COCO annotation file used here; other fields are ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    #[serde(default)]
    pub annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    pub categories: Vec<CocoCategory>,
}

/// One entry of a COCO results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDetection {
    pub image_id: ImageId,
    pub category_id: u64,
    pub bbox: BBox,
    pub score: f64,
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })
}

impl CocoDataset {
    pub fn load(path: &Path) -> Result<Self> {
        let ds: CocoDataset = read_json(path)?;
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeMap::new();
        for img in &self.images {
            if ids.insert(&img.id, &img.file_name).is_some() {
                return Err(Error::Integrity(format!("duplicate image id {}", img.id)));
            }
        }
        for ann in &self.annotations {
            if !ids.contains_key(&ann.image_id) {
                return Err(Error::Integrity(format!("annotation references unknown image id {}", ann.image_id)));
            }
            if !ann.bbox.is_valid() {
                return Err(Error::domain(format!(
                    "annotation {:?} on image {} has a non-positive box {:?}",
                    ann.id, ann.image_id, ann.bbox
                )));
            }
        }
        Ok(())
    }

    /// Category ids, from the category list or (when it is empty) the annotations.
    pub fn category_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = if self.categories.is_empty() {
            self.annotations.iter().map(|a| a.category_id).collect()
        } else {
            self.categories.iter().map(|c| c.id).collect()
        };
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

pub fn load_detections(path: &Path) -> Result<Vec<CocoDetection>> {
    read_json(path)
}
