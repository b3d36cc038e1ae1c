#![allow(dead_code)]

use std::path::{Path, PathBuf};

use irrobust_core::corruption::rng::Rng;
use irrobust_core::eval::{Detection, GroundTruthBox};
use irrobust_core::{BBox, ImageBuffer, ImageId};

pub struct SyntheticObject {
    pub category: u64,
    pub bbox: [f64; 4],
}

/// Gray thermal-looking frame: cool sky-to-road gradient, low-frequency structure,
/// a few warm blobs, and fine sensor texture.
pub fn thermal_frame(width: u32, height: u32, seed: u64) -> (ImageBuffer, Vec<SyntheticObject>) {
    let mut rng = Rng::new(seed);
    let (w, h) = (width as usize, height as usize);
    let phase = [rng.uniform() * std::f64::consts::TAU, rng.uniform() * std::f64::consts::TAU];
    let freq = [1.0 + rng.uniform() * 3.0, 1.0 + rng.uniform() * 2.0];
    let mut field: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64 / w as f64, (i / w) as f64 / h as f64);
            45.0 + 50.0 * y
                + 12.0 * (freq[0] * std::f64::consts::TAU * x + phase[0]).sin()
                + 8.0 * (freq[1] * std::f64::consts::TAU * y + phase[1]).cos()
        })
        .collect();

    let count = 1 + rng.below(4) as usize;
    let mut objects = Vec::with_capacity(count);
    for _ in 0..count {
        let person = rng.uniform() < 0.5;
        let (bw, bh) = if person {
            (16.0 + rng.uniform() * 30.0, 40.0 + rng.uniform() * 80.0)
        } else {
            (50.0 + rng.uniform() * 90.0, 30.0 + rng.uniform() * 50.0)
        };
        let x0 = rng.uniform() * (w as f64 - bw - 1.0);
        let y0 = rng.uniform() * (h as f64 - bh - 1.0);
        let heat = 90.0 + rng.uniform() * 60.0;
        let (cx, cy) = (x0 + bw / 2.0, y0 + bh / 2.0);
        for y in y0 as usize..(y0 + bh) as usize {
            for x in x0 as usize..(x0 + bw) as usize {
                let dx = (x as f64 + 0.5 - cx) / (bw / 2.0);
                let dy = (y as f64 + 0.5 - cy) / (bh / 2.0);
                let r2 = dx * dx + dy * dy;
                if r2 < 1.0 {
                    field[y * w + x] += heat * (1.0 - r2 * r2);
                }
            }
        }
        objects.push(SyntheticObject {
            category: if person { 1 } else { 3 },
            bbox: [x0.round(), y0.round(), bw.round(), bh.round()],
        });
    }
    let gray: Vec<u8> = field
        .iter()
        .map(|v| (v + rng.uniform_range(-5.0, 5.0)).round().clamp(0.0, 255.0) as u8)
        .collect();
    (ImageBuffer::from_gray(width, height, &gray).unwrap(), objects)
}

pub fn corpus(n: usize, width: u32, height: u32) -> Vec<(ImageBuffer, Vec<SyntheticObject>)> {
    (0..n).map(|i| thermal_frame(width, height, 0xC0FFEE + i as u64)).collect()
}

/// Writes the corpus as PNG files plus a COCO annotation file; returns (images dir, annotation path).
pub fn write_corpus(dir: &Path, n: usize, width: u32, height: u32) -> (PathBuf, PathBuf) {
    let images = dir.join("images");
    std::fs::create_dir_all(&images).unwrap();
    let mut imgs = Vec::new();
    let mut anns = Vec::new();
    for (i, (img, objects)) in corpus(n, width, height).into_iter().enumerate() {
        let name = format!("frame_{i:05}.png");
        img.save_png(&images.join(&name)).unwrap();
        imgs.push(serde_json::json!({"id": i + 1, "file_name": name, "width": width, "height": height}));
        for o in objects {
            anns.push(serde_json::json!({
                "id": anns.len() + 1, "image_id": i + 1, "category_id": o.category,
                "bbox": o.bbox, "iscrowd": 0, "area": o.bbox[2] * o.bbox[3]
            }));
        }
    }
    let ann = serde_json::json!({
        "images": imgs,
        "annotations": anns,
        "categories": [{"id": 1, "name": "person"}, {"id": 2, "name": "bicycle"}, {"id": 3, "name": "car"}]
    });
    let path = dir.join("annotations.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&ann).unwrap()).unwrap();
    (images, path)
}

/// Reference IoU from corner coordinates.
fn oracle_iou(a: &BBox, b: &BBox) -> f64 {
    let (ax2, ay2, bx2, by2) = (a.x + a.w, a.y + a.h, b.x + b.w, b.y + b.h);
    let ix = (ax2.min(bx2) - a.x.max(b.x)).max(0.0);
    let iy = (ay2.min(by2) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// Brute-force AP: quadratic greedy matching, then for each recall level the best
/// precision over every cut-off reaching it (no envelope pass).
pub fn oracle_ap(gts: &[GroundTruthBox], dets: &[Detection], category: u64, points: usize) -> Option<f64> {
    let positives = gts.iter().filter(|g| g.category_id == category && !g.ignore).count();
    if positives == 0 {
        return None;
    }
    let mut ranked: Vec<(usize, &Detection)> = dets.iter().enumerate().filter(|(_, d)| d.category_id == category).collect();
    // Insertion sort by (score desc, image asc, index asc).
    for i in 1..ranked.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (&ranked[j - 1], &ranked[j]);
            let before = b.1.score > a.1.score
                || (b.1.score == a.1.score && (b.1.image_id < a.1.image_id || (b.1.image_id == a.1.image_id && b.0 < a.0)));
            if !before {
                break;
            }
            ranked.swap(j - 1, j);
            j -= 1;
        }
    }

    let mut taken = vec![false; gts.len()];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut curve: Vec<(f64, f64)> = Vec::new();
    for (_, d) in ranked {
        let mut pick = None;
        for want_ignored in [false, true] {
            let mut best = -1.0;
            for (k, g) in gts.iter().enumerate() {
                if taken[k] || g.ignore != want_ignored || g.category_id != category || g.image_id != d.image_id {
                    continue;
                }
                let v = oracle_iou(&d.bbox, &g.bbox);
                if v >= 0.5 && v > best {
                    best = v;
                    pick = Some((k, want_ignored));
                }
            }
            if pick.is_some() {
                break;
            }
        }
        match pick {
            Some((k, ignored)) => {
                taken[k] = true;
                if ignored {
                    continue;
                }
                tp += 1;
            }
            None => fp += 1,
        }
        curve.push((tp as f64 / positives as f64, tp as f64 / (tp + fp) as f64));
    }
    let mut total = 0.0;
    for i in 0..points {
        let r = i as f64 / (points - 1) as f64;
        let best = curve.iter().filter(|(rec, _)| *rec >= r).map(|(_, p)| *p).fold(0.0, f64::max);
        total += best;
    }
    Some(total / points as f64)
}

/// Random small detection instance on a coarse grid, so IoU ties and exact thresholds occur.
pub fn random_instance(
    rng: &mut Rng,
    max_images: u64,
    max_gt: u64,
    max_det: u64,
    categories: u64,
) -> (Vec<GroundTruthBox>, Vec<Detection>) {
    let images = 1 + rng.below(max_images);
    let mut gts = Vec::new();
    let mut dets = Vec::new();
    let rand_box = |rng: &mut Rng| {
        BBox::new(
            rng.below(8) as f64 * 2.0,
            rng.below(8) as f64 * 2.0,
            2.0 + rng.below(6) as f64 * 2.0,
            2.0 + rng.below(6) as f64 * 2.0,
        )
    };
    for img in 0..images {
        let id = ImageId::Int(img * 7 % 5 + img);
        for _ in 0..rng.below(max_gt + 1) {
            gts.push(GroundTruthBox {
                image_id: id.clone(),
                category_id: 1 + rng.below(categories),
                bbox: rand_box(rng),
                ignore: rng.below(6) == 0,
            });
        }
        for _ in 0..rng.below(max_det + 1) {
            let near_gt = !gts.is_empty() && rng.below(2) == 0;
            let (category_id, bbox) = if near_gt {
                let g = &gts[rng.below(gts.len() as u64) as usize];
                let jitter = rng.below(3) as f64;
                (g.category_id, BBox::new(g.bbox.x + jitter, g.bbox.y, g.bbox.w, g.bbox.h))
            } else {
                (1 + rng.below(categories), rand_box(rng))
            };
            dets.push(Detection {
                image_id: id.clone(),
                category_id,
                bbox,
                score: rng.below(5) as f64 / 4.0 * 0.9 + 0.05,
            });
        }
    }
    (gts, dets)
}
