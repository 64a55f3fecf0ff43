//! Brute-force reference implementations and seeded fixture generators.

use std::collections::{BTreeMap, BTreeSet};

use orbitforge::curation::{Candidate, FilterPlan, Splits, TagFilter, TagMode};
use orbitforge::evaluation::{BBox, Detection, GroundTruth};
use orbitforge::geometry::{ScenePose, UnitQuaternion, Vec3};
use orbitforge::imageset::FrameRecord;
use orbitforge::render::{CameraPose, LabelSet};
use orbitforge::sequences::DeterministicRng;

pub const TAG_POOL: [&str; 5] = ["Cygnus", "earth background", "glow", "flare", "approach"];

fn below(rng: &mut DeterministicRng, n: usize) -> usize {
    (rng.uniform() * n as f64) as usize
}

fn chance(rng: &mut DeterministicRng, p: f64) -> bool {
    rng.uniform() < p
}

fn random_tags(rng: &mut DeterministicRng) -> BTreeSet<String> {
    TAG_POOL.iter().filter(|_| chance(rng, 0.4)).map(|t| t.to_string()).collect()
}

fn empty_labels() -> LabelSet {
    LabelSet {
        bbox: None,
        origin_px: None,
        pose_camera: CameraPose { translation: Vec3::ZERO, orientation: UnitQuaternion::IDENTITY },
        visible_pixel_count: 0,
        keypoints_px: Vec::new(),
    }
}

/// Candidates from up to three imagesets, grouped by set, frame order within.
pub fn random_candidates(rng: &mut DeterministicRng) -> Vec<Candidate> {
    let mut out = Vec::new();
    for s in 0..1 + below(rng, 3) {
        let set = format!("set{s}");
        for i in 0..below(rng, 30) as u64 {
            let record = FrameRecord::new(
                "seq",
                i,
                random_tags(rng),
                chrono::DateTime::from_timestamp(946_684_800, 0).unwrap(),
                ScenePose::default(),
                empty_labels(),
            );
            out.push(Candidate { imageset: set.clone(), record });
        }
    }
    out
}

pub fn random_filters(rng: &mut DeterministicRng) -> Vec<TagFilter> {
    (0..below(rng, 4))
        .map(|_| TagFilter {
            mode: if chance(rng, 0.5) { TagMode::AND } else { TagMode::OR },
            tags: random_tags(rng),
        })
        .collect()
}

pub fn random_plan(rng: &mut DeterministicRng) -> FilterPlan {
    let mut size_caps = BTreeMap::new();
    for s in 0..3 {
        if chance(rng, 0.4) {
            size_caps.insert(format!("set{s}"), below(rng, 20));
        }
    }
    FilterPlan {
        size_caps,
        tag_filters: random_filters(rng),
        final_cap: chance(rng, 0.5).then(|| below(rng, 25)),
        seed: rng.next_seed(),
    }
}

trait NextSeed {
    fn next_seed(&mut self) -> u64;
}

impl NextSeed for DeterministicRng {
    fn next_seed(&mut self) -> u64 {
        rand::RngCore::next_u64(self)
    }
}

/// `{ i | ∃ f ∈ filters: f(tags_i) }`, or everything without filters.
pub fn brute_filter(tags: &[BTreeSet<String>], filters: &[TagFilter]) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, t) in tags.iter().enumerate() {
        let mut hit = filters.is_empty();
        for f in filters {
            let wanted = f.tags.iter().filter(|x| t.contains(*x)).count();
            hit |= match f.mode {
                TagMode::AND => wanted == f.tags.len(),
                TagMode::OR => wanted > 0,
            };
        }
        if hit {
            out.push(i);
        }
    }
    out
}

/// Qualified ids that survive size caps and tag filters, before the final cap.
pub fn brute_eligible(cands: &[Candidate], plan: &FilterPlan) -> Vec<String> {
    let mut per_set: BTreeMap<&str, usize> = BTreeMap::new();
    let mut kept = Vec::new();
    for c in cands {
        let n = per_set.entry(&c.imageset).or_insert(0);
        let cap = plan.size_caps.get(&c.imageset).copied().unwrap_or(usize::MAX);
        if *n < cap {
            kept.push(c);
        }
        *n += 1;
    }
    let tags: Vec<BTreeSet<String>> = kept.iter().map(|c| c.record.tags.clone()).collect();
    brute_filter(&tags, &plan.tag_filters)
        .into_iter()
        .map(|i| kept[i].qualified_id())
        .collect()
}

/// Partition laws over `0..n`, checked with plain set arithmetic.
pub fn partition_ok(s: &Splits, n: usize, test_percent: f64, kfolds: u32) -> Result<(), String> {
    let train: BTreeSet<usize> = s.train.iter().copied().collect();
    let test: BTreeSet<usize> = s.test.iter().copied().collect();
    let all: BTreeSet<usize> = (0..n).collect();
    if train.len() != s.train.len() || test.len() != s.test.len() {
        return Err("duplicates".into());
    }
    if train.intersection(&test).next().is_some() {
        return Err("overlap".into());
    }
    if &train | &test != all {
        return Err("not a cover".into());
    }
    let expected_test = (test_percent * n as f64 + 0.5 + 1e-9).floor() as usize;
    if test.len() != expected_test {
        return Err(format!("test size {} != {expected_test}", test.len()));
    }
    if s.folds.len() != kfolds as usize {
        return Err("fold count".into());
    }
    if kfolds > 0 {
        let union: BTreeSet<usize> = s.folds.iter().flatten().copied().collect();
        let total: usize = s.folds.iter().map(Vec::len).sum();
        if union != train || total != train.len() {
            return Err("folds do not partition train".into());
        }
        let lo = s.folds.iter().map(Vec::len).min().unwrap();
        let hi = s.folds.iter().map(Vec::len).max().unwrap();
        if hi - lo > 1 {
            return Err("unbalanced folds".into());
        }
    }
    Ok(())
}

fn random_box(rng: &mut DeterministicRng) -> BBox {
    let x0 = below(rng, 60) as f64;
    let y0 = below(rng, 60) as f64;
    [x0, y0, x0 + 1.0 + below(rng, 40) as f64, y0 + 1.0 + below(rng, 40) as f64]
}

/// Up to 20 images with integer boxes and confidences on a 0.05 grid, so ties
/// and threshold boundaries occur often and all box arithmetic is exact.
pub fn random_eval_fixture(rng: &mut DeterministicRng) -> (Vec<GroundTruth>, Vec<Detection>) {
    let n = 1 + below(rng, 20);
    let mut gts = Vec::new();
    let mut dets = Vec::new();
    for i in 0..n {
        let id = format!("img{i}");
        let present = chance(rng, 0.7);
        let truth = present.then(|| random_box(rng));
        gts.push(GroundTruth { image_id: id.clone(), present, bbox: truth });
        for _ in 0..below(rng, 4) {
            let bbox = match truth {
                Some(t) if chance(rng, 0.6) => {
                    let j = |r: &mut DeterministicRng| below(r, 5) as f64 - 2.0;
                    let b = [t[0] + j(rng), t[1] + j(rng), t[2] + j(rng), t[3] + j(rng)];
                    if b[0] < b[2] && b[1] < b[3] { b } else { t }
                }
                _ => random_box(rng),
            };
            dets.push(Detection { image_id: id.clone(), bbox, confidence: below(rng, 21) as f64 / 20.0 });
        }
    }
    (gts, dets)
}

#[derive(Debug, PartialEq)]
pub struct BruteReport {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub mean_iou: Option<f64>,
}

fn brute_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let iy = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ix * iy;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if inter == 0.0 { 0.0 } else { inter / union }
}

/// Per-image rule: keep detections above the threshold, take the most
/// confident (larger area, then smaller coordinates on ties), then
/// present+match → TP, present+miss → FN+FP, present+none → FN,
/// absent+any → FP, absent+none → TN.
pub fn brute_evaluate(gts: &[GroundTruth], dets: &[Detection], conf_t: f64, iou_t: f64) -> BruteReport {
    let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    let mut ious = Vec::new();
    for g in gts {
        let mut mine: Vec<&Detection> =
            dets.iter().filter(|d| d.image_id == g.image_id && d.confidence > conf_t).collect();
        mine.sort_by(|a, b| {
            let area = |d: &Detection| (d.bbox[2] - d.bbox[0]) * (d.bbox[3] - d.bbox[1]);
            b.confidence
                .partial_cmp(&a.confidence)
                .unwrap()
                .then(area(b).partial_cmp(&area(a)).unwrap())
                .then(a.bbox.partial_cmp(&b.bbox).unwrap())
        });
        match (g.present, mine.first()) {
            (true, Some(d)) => {
                let v = brute_iou(g.bbox.as_ref().unwrap(), &d.bbox);
                ious.push(v);
                if v >= iou_t {
                    tp += 1;
                } else {
                    fn_ += 1;
                    fp += 1;
                }
            }
            (true, None) => fn_ += 1,
            (false, Some(_)) => fp += 1,
            (false, None) => tn += 1,
        }
    }
    let div = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
    BruteReport {
        tp,
        tn,
        fp,
        fn_,
        accuracy: (tp + tn) as f64 / gts.len() as f64,
        precision: div(tp, tp + fp),
        recall: div(tp, tp + fn_),
        mean_iou: (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64),
    }
}

pub fn report_matches(r: &orbitforge::evaluation::EvalReport, b: &BruteReport) -> bool {
    r.counts.tp == b.tp
        && r.counts.tn == b.tn
        && r.counts.fp == b.fp
        && r.counts.fn_ == b.fn_
        && r.accuracy == b.accuracy
        && r.precision == b.precision
        && r.recall == b.recall
        && r.mean_iou == b.mean_iou
}
