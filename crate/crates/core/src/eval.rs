//! AP50 per class, clean performance P, per-corruption P_c and mPC.
//!
//! Matching follows the COCO protocol restricted to one IoU threshold:
//!
//! * detections of a category are ranked by score (descending), ties broken by
//!   image id then by position in the input;
//! * each detection takes the unmatched, non-ignored ground truth box in the
//!   same image with the highest IoU ≥ threshold (equal IoU: lower input
//!   index); failing that, an unmatched ignored box absorbs it, and it counts
//!   neither as TP nor FP; otherwise it is a false positive;
//! * precision is made monotone from the right and sampled at recall
//!   0.00, 0.01, …, 1.00; AP is the mean of the samples.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::{load_detections, BBox, CocoDataset, CocoDetection, ImageId};
use crate::corruption::{CorruptionKind, Severity};
use crate::error::{Error, Result};

/// Expected number of corruption sets in a full benchmark.
pub const DEFAULT_CORRUPTION_COUNT: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBox {
    pub image_id: ImageId,
    pub category_id: u64,
    pub bbox: BBox,
    pub ignore: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: ImageId,
    pub category_id: u64,
    pub bbox: BBox,
    pub score: f64,
}

impl From<CocoDetection> for Detection {
    fn from(d: CocoDetection) -> Self {
        Self {
            image_id: d.image_id,
            category_id: d.category_id,
            bbox: d.bbox,
            score: d.score,
        }
    }
}

/// Intersection over union of two boxes, in [0, 1].
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    for bx in [a, b] {
        if !bx.is_valid() {
            return Err(Error::domain(format!("box {bx:?} must have positive finite width and height")));
        }
    }
    Ok(iou_unchecked(a, b))
}

fn iou_unchecked(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    inter / (a.area() + b.area() - inter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// 101 recall points, COCO style.
    #[default]
    Coco101,
    /// 11 recall points, PASCAL VOC 2007 style.
    Voc11,
    /// Area under the monotone precision envelope at every recall step.
    AllPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub interpolation: Interpolation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            interpolation: Interpolation::Coco101,
        }
    }
}

/// Ranked detection outcome after matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    TruePositive,
    FalsePositive,
    Ignored,
}

/// Ranks detections of one category and matches them against ground truth.
///
/// Returns outcomes in rank order and the number of non-ignored ground truth boxes.
pub fn match_category(
    gts: &[GroundTruthBox],
    dets: &[Detection],
    category: u64,
    iou_threshold: f64,
) -> (Vec<MatchOutcome>, usize) {
    let mut by_image: HashMap<&ImageId, Vec<(&BBox, bool)>> = HashMap::new();
    let mut positives = 0;
    for g in gts.iter().filter(|g| g.category_id == category) {
        by_image.entry(&g.image_id).or_default().push((&g.bbox, g.ignore));
        if !g.ignore {
            positives += 1;
        }
    }

    let mut order: Vec<usize> = (0..dets.len()).filter(|&i| dets[i].category_id == category).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .total_cmp(&dets[i].score)
            .then_with(|| dets[i].image_id.cmp(&dets[j].image_id))
            .then(i.cmp(&j))
    });

    let mut matched: HashMap<&ImageId, Vec<bool>> = by_image.iter().map(|(k, v)| (*k, vec![false; v.len()])).collect();
    let outcomes = order
        .into_iter()
        .map(|i| {
            let d = &dets[i];
            let Some(cands) = by_image.get(&d.image_id) else {
                return MatchOutcome::FalsePositive;
            };
            let used = matched.get_mut(&d.image_id).expect("same keys");
            let best = |want_ignored: bool, used: &[bool]| {
                let mut best: Option<(usize, f64)> = None;
                for (k, &(b, ignored)) in cands.iter().enumerate() {
                    if ignored != want_ignored || used[k] {
                        continue;
                    }
                    let v = iou_unchecked(&d.bbox, b);
                    if v >= iou_threshold && best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((k, v));
                    }
                }
                best.map(|(k, _)| k)
            };
            if let Some(k) = best(false, used) {
                used[k] = true;
                MatchOutcome::TruePositive
            } else if let Some(k) = best(true, used) {
                used[k] = true;
                MatchOutcome::Ignored
            } else {
                MatchOutcome::FalsePositive
            }
        })
        .collect();
    (outcomes, positives)
}

/// Precision/recall after each ranked, non-ignored detection.
fn pr_curve(outcomes: &[MatchOutcome], positives: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut recall = Vec::new();
    let mut precision = Vec::new();
    for o in outcomes {
        match o {
            MatchOutcome::TruePositive => tp += 1,
            MatchOutcome::FalsePositive => fp += 1,
            MatchOutcome::Ignored => continue,
        }
        recall.push(tp as f64 / positives as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    (recall, precision)
}

fn interpolated_ap(recall: &[f64], precision: &[f64], mode: Interpolation) -> f64 {
    let mut envelope = precision.to_vec();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let sampled = |points: usize| {
        let denom = (points - 1) as f64;
        let total: f64 = (0..points)
            .map(|i| {
                let r = i as f64 / denom;
                let idx = recall.partition_point(|&x| x < r);
                envelope.get(idx).copied().unwrap_or(0.0)
            })
            .sum();
        total / points as f64
    };
    match mode {
        Interpolation::Coco101 => sampled(101),
        Interpolation::Voc11 => sampled(11),
        Interpolation::AllPoint => {
            let mut prev = 0.0;
            let mut area = 0.0;
            for (r, p) in recall.iter().zip(&envelope) {
                area += (r - prev) * p;
                prev = *r;
            }
            area
        }
    }
}

/// AP for one category. `None` when the category has no non-ignored ground truth.
pub fn average_precision(gts: &[GroundTruthBox], dets: &[Detection], category: u64, cfg: &EvalConfig) -> Option<f64> {
    let (outcomes, positives) = match_category(gts, dets, category, cfg.iou_threshold);
    if positives == 0 {
        return None;
    }
    let (recall, precision) = pr_curve(&outcomes, positives);
    Some(interpolated_ap(&recall, &precision, cfg.interpolation))
}

/// COCO-style AP at IoU 0.5 with 101-point interpolation.
pub fn ap50(gts: &[GroundTruthBox], dets: &[Detection], category: u64) -> Option<f64> {
    average_precision(gts, dets, category, &EvalConfig::default())
}

/// Mean performance under corruption: the arithmetic mean of per-corruption scores.
pub fn mpc(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("mPC needs at least one corruption value"));
    }
    if values.len() != DEFAULT_CORRUPTION_COUNT {
        log::warn!(
            "averaging {} corruption values; a full benchmark has {DEFAULT_CORRUPTION_COUNT}",
            values.len()
        );
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Ground truth indexed for evaluation.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub boxes: Vec<GroundTruthBox>,
    pub image_ids: BTreeSet<ImageId>,
    pub categories: Vec<u64>,
}

impl GroundTruth {
    pub fn from_coco(ds: &CocoDataset) -> Self {
        let boxes = ds
            .annotations
            .iter()
            .map(|a| GroundTruthBox {
                image_id: a.image_id.clone(),
                category_id: a.category_id,
                bbox: a.bbox,
                ignore: a.is_ignored(),
            })
            .collect();
        Self {
            boxes,
            image_ids: ds.images.iter().map(|i| i.id.clone()).collect(),
            categories: ds.category_ids(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_coco(&CocoDataset::load(path)?))
    }

    fn check_detections(&self, dets: &[Detection]) -> Result<()> {
        for d in dets {
            if !self.image_ids.contains(&d.image_id) {
                return Err(Error::Integrity(format!("detection references unknown image id {}", d.image_id)));
            }
            if self.categories.binary_search(&d.category_id).is_err() {
                return Err(Error::Integrity(format!(
                    "detection on image {} has unknown category {}",
                    d.image_id, d.category_id
                )));
            }
            if !d.score.is_finite() {
                return Err(Error::domain(format!("detection on image {} has non-finite score", d.image_id)));
            }
            if !d.bbox.is_valid() {
                return Err(Error::domain(format!(
                    "detection on image {} has a non-positive box {:?}",
                    d.image_id, d.bbox
                )));
            }
        }
        Ok(())
    }
}

/// Per-class AP and their mean over classes present in the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetResult {
    pub ap50: f64,
    pub per_class_ap50: BTreeMap<u64, f64>,
}

pub fn evaluate_set(gt: &GroundTruth, dets: &[Detection], cfg: &EvalConfig) -> Result<SetResult> {
    gt.check_detections(dets)?;
    let per_class: BTreeMap<u64, f64> = gt
        .categories
        .iter()
        .filter_map(|&c| average_precision(&gt.boxes, dets, c, cfg).map(|ap| (c, ap)))
        .collect();
    if per_class.is_empty() {
        return Err(Error::domain("ground truth has no non-ignored boxes in any category"));
    }
    let ap50 = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(SetResult {
        ap50,
        per_class_ap50: per_class,
    })
}

/// Which detection set a file belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SetKey {
    Clean,
    Corrupted(CorruptionKind, Severity),
}

impl SetKey {
    /// Recognizes `clean`, `<kind>_severity_<s>`, `<kind>_s<s>` and `<kind>/severity_<s>`
    /// (an optional `.json` suffix is stripped).
    pub fn parse(name: &str) -> Option<SetKey> {
        let name = name.strip_suffix(".json").unwrap_or(name);
        if name == "clean" {
            return Some(SetKey::Clean);
        }
        let (kind, sev) = if let Some((k, s)) = name.split_once("/severity_") {
            (k, s)
        } else if let Some((k, s)) = name.rsplit_once("_severity_") {
            (k, s)
        } else {
            let (k, s) = name.rsplit_once("_s")?;
            (k, s)
        };
        let kind: CorruptionKind = kind.parse().ok()?;
        let sev = Severity::new(sev.parse().ok()?).ok()?;
        Some(SetKey::Corrupted(kind, sev))
    }

    pub fn label(&self) -> String {
        match self {
            SetKey::Clean => "clean".into(),
            SetKey::Corrupted(k, s) => format!("{k}_severity_{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionResult {
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub ap50: f64,
    pub per_class_ap50: BTreeMap<u64, f64>,
}

/// Clean AP50 (P), per-corruption AP50 (P_c) and their mean (mPC). Values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub ap50: Option<f64>,
    pub per_class_ap50: BTreeMap<u64, f64>,
    pub per_corruption: Vec<CorruptionResult>,
    pub mpc: Option<f64>,
}

impl EvalResult {
    pub fn from_sets(sets: BTreeMap<SetKey, SetResult>) -> Result<Self> {
        let mut out = EvalResult {
            ap50: None,
            per_class_ap50: BTreeMap::new(),
            per_corruption: Vec::new(),
            mpc: None,
        };
        for (key, res) in sets {
            match key {
                SetKey::Clean => {
                    out.ap50 = Some(res.ap50);
                    out.per_class_ap50 = res.per_class_ap50;
                }
                SetKey::Corrupted(kind, severity) => out.per_corruption.push(CorruptionResult {
                    kind,
                    severity,
                    ap50: res.ap50,
                    per_class_ap50: res.per_class_ap50,
                }),
            }
        }
        if !out.per_corruption.is_empty() {
            let values: Vec<f64> = out.per_corruption.iter().map(|c| c.ap50).collect();
            out.mpc = Some(mpc(&values)?);
        }
        Ok(out)
    }

    pub fn p_c(&self, kind: CorruptionKind, severity: Severity) -> Option<f64> {
        self.per_corruption
            .iter()
            .find(|c| c.kind == kind && c.severity == severity)
            .map(|c| c.ap50)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::coco::read_json(path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    /// Long-format CSV: `set,kind,severity,category,ap50`; category `all` is the class mean.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("set,kind,severity,category,ap50\n");
        let mut rows = |set: &str, kind: &str, sev: &str, mean: f64, per_class: &BTreeMap<u64, f64>| {
            let _ = writeln!(out, "{set},{kind},{sev},all,{mean:.6}");
            for (c, ap) in per_class {
                let _ = writeln!(out, "{set},{kind},{sev},{c},{ap:.6}");
            }
        };
        if let Some(p) = self.ap50 {
            rows("clean", "", "0", p, &self.per_class_ap50);
        }
        for c in &self.per_corruption {
            rows("corrupted", c.kind.name(), &c.severity.to_string(), c.ap50, &c.per_class_ap50);
        }
        if let Some(m) = self.mpc {
            let _ = writeln!(out, "mpc,,,all,{m:.6}");
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let json = dir.join("eval.json");
        let csv = dir.join("eval.csv");
        std::fs::write(&json, self.to_json() + "\n").map_err(|e| Error::io(format!("writing {}", json.display()), e))?;
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(format!("writing {}", csv.display()), e))?;
        Ok((json, csv))
    }
}

/// Evaluates in-memory detection sets against one ground truth.
pub fn evaluate_sets(
    gt: &GroundTruth,
    sets: &BTreeMap<SetKey, Vec<Detection>>,
    cfg: &EvalConfig,
) -> Result<EvalResult> {
    let results: Vec<(SetKey, SetResult)> = sets
        .par_iter()
        .map(|(k, dets)| evaluate_set(gt, dets, cfg).map(|r| (*k, r)))
        .collect::<Result<_>>()?;
    EvalResult::from_sets(results.into_iter().collect())
}

/// Loads the ground truth and every detection file, then evaluates them.
pub fn evaluate_run(gt: &Path, det_sets: &BTreeMap<SetKey, PathBuf>, cfg: &EvalConfig) -> Result<EvalResult> {
    let gt = GroundTruth::load(gt)?;
    let sets: BTreeMap<SetKey, Vec<Detection>> = det_sets
        .par_iter()
        .map(|(k, p)| {
            let dets = load_detections(p)?.into_iter().map(Detection::from).collect();
            Ok((*k, dets))
        })
        .collect::<Result<_>>()?;
    evaluate_sets(&gt, &sets, cfg)
}

/// Finds corrupted detection files under `dir` using the [`SetKey::parse`] naming rules.
pub fn discover_corrupted_sets(dir: &Path) -> Result<BTreeMap<SetKey, PathBuf>> {
    let mut out = BTreeMap::new();
    let read = |d: &Path| std::fs::read_dir(d).map_err(|e| Error::io(format!("listing {}", d.display()), e));
    for entry in read(dir)? {
        let path = entry.map_err(|e| Error::io("listing", e))?.path();
        if path.is_dir() {
            let kind_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
            for inner in read(&path)? {
                let p = inner.map_err(|e| Error::io("listing", e))?.path();
                let Some(file) = p.file_name().and_then(|n| n.to_str()) else { continue };
                if let Some(key @ SetKey::Corrupted(..)) = SetKey::parse(&format!("{kind_name}/{file}")) {
                    out.insert(key, p.clone());
                }
            }
        } else if let Some(file) = path.file_name().and_then(|n| n.to_str()) {
            if let Some(key @ SetKey::Corrupted(..)) = SetKey::parse(file) {
                out.insert(key, path.clone());
            }
        }
    }
    Ok(out)
}
