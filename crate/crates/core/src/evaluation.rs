//! Detection metrics at an IoU threshold: accuracy, precision, recall,
//! mean IoU and a confidence-threshold sweep.
//!
//! Each image contributes through its single highest-confidence detection.
//! A detection counts only when its confidence is strictly above the
//! threshold. On an image with the target present, a counted detection with
//! IoU below the IoU threshold is both a false negative and a false positive.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::LabelSet;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.75;

/// Axis-aligned box `[xmin, ymin, xmax, ymax]` in continuous pixel coordinates.
pub type BBox = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub image_id: String,
    pub present: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
}

impl GroundTruth {
    /// From render labels: the inclusive pixel box becomes `[xmin, ymin, xmax+1, ymax+1]`.
    pub fn from_labels(image_id: &str, labels: &LabelSet) -> Self {
        Self::from_pixel_box(image_id, labels.bbox)
    }

    /// From an inclusive pixel box; `None` means the target is absent.
    pub fn from_pixel_box(image_id: &str, pixel_box: Option<[u32; 4]>) -> Self {
        let bbox = pixel_box.map(|[x0, y0, x1, y1]| {
            [x0 as f64, y0 as f64, x1 as f64 + 1.0, y1 as f64 + 1.0]
        });
        Self {
            image_id: image_id.to_string(),
            present: bbox.is_some(),
            bbox,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.present, self.bbox) {
            (true, None) => Err(Error::InputMismatch(format!(
                "image {}: target present but no box",
                self.image_id
            ))),
            (_, Some(b)) => check_box(&b),
            (false, None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub image_id: String,
    pub bbox: BBox,
    pub confidence: f64,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidParameter(format!(
                "image {}: confidence {} outside [0, 1]",
                self.image_id, self.confidence
            )));
        }
        check_box(&self.bbox)
    }
}

fn check_box(b: &BBox) -> Result<()> {
    if b.iter().all(|v| v.is_finite()) && b[0] < b[2] && b[1] < b[3] {
        Ok(())
    } else {
        Err(Error::InvalidBox(*b))
    }
}

fn area(b: &BBox) -> f64 {
    (b[2] - b[0]) * (b[3] - b[1])
}

fn iou_unchecked(a: &BBox, b: &BBox) -> f64 {
    let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = w * h;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (area(a) + area(b) - inter)
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    check_box(a)?;
    check_box(b)?;
    Ok(iou_unchecked(a, b))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub n_images: u64,
}

/// Contribution of one image.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ImageOutcome {
    pub counts: ConfusionCounts,
    /// IoU of the counted detection when the target is present.
    pub iou: Option<f64>,
}

/// Highest confidence; ties go to the larger box, then the lexicographically smaller box.
pub fn best_detection<'a>(dets: &[&'a Detection]) -> Option<&'a Detection> {
    dets.iter().copied().reduce(|best, d| {
        let ord = d
            .confidence
            .total_cmp(&best.confidence)
            .then_with(|| area(&d.bbox).total_cmp(&area(&best.bbox)))
            .then_with(|| {
                // Smaller box coordinates win, so reverse.
                best.bbox
                    .iter()
                    .zip(&d.bbox)
                    .map(|(b, x)| b.total_cmp(x))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        if ord.is_gt() {
            d
        } else {
            best
        }
    })
}

pub fn classify_image(gt: &GroundTruth, dets: &[&Detection], conf_t: f64, iou_t: f64) -> ImageOutcome {
    let counted = best_detection(dets).filter(|d| d.confidence > conf_t);
    let mut c = ConfusionCounts {
        n_images: 1,
        ..Default::default()
    };
    let mut iou = None;
    match (gt.present.then_some(gt.bbox).flatten(), counted) {
        (Some(truth), Some(d)) => {
            let v = iou_unchecked(&truth, &d.bbox);
            iou = Some(v);
            if v >= iou_t {
                c.tp = 1;
            } else {
                c.fn_ = 1;
                c.fp = 1;
            }
        }
        (Some(_), None) => c.fn_ = 1,
        (None, Some(_)) => c.fp = 1,
        (None, None) => c.tn = 1,
    }
    ImageOutcome { counts: c, iou }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `null` when no detection was counted.
    pub precision: Option<f64>,
    /// `null` when no image contains the target.
    pub recall: Option<f64>,
    /// `null` when no present-target image had a counted detection.
    pub mean_iou: Option<f64>,
    pub confidence_threshold: f64,
    pub iou_threshold: f64,
    pub counts: ConfusionCounts,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Groups detections by image, checking every id against the ground truth.
fn group<'a>(gts: &[GroundTruth], dets: &'a [Detection]) -> Result<HashMap<&'a str, Vec<&'a Detection>>> {
    let mut ids = HashSet::new();
    for g in gts {
        g.validate()?;
        if !ids.insert(g.image_id.as_str()) {
            return Err(Error::InputMismatch(format!("duplicate ground truth for image {}", g.image_id)));
        }
    }
    if gts.is_empty() {
        return Err(Error::InputMismatch("no ground-truth records".into()));
    }
    let mut by_image: HashMap<&str, Vec<&Detection>> = HashMap::new();
    for d in dets {
        d.validate()?;
        if !ids.contains(d.image_id.as_str()) {
            return Err(Error::InputMismatch(format!(
                "detection for unknown image {}",
                d.image_id
            )));
        }
        by_image.entry(d.image_id.as_str()).or_default().push(d);
    }
    Ok(by_image)
}

fn evaluate_grouped(
    gts: &[GroundTruth],
    by_image: &HashMap<&str, Vec<&Detection>>,
    conf_t: f64,
    iou_t: f64,
) -> EvalReport {
    let mut c = ConfusionCounts::default();
    let (mut iou_sum, mut iou_n) = (0.0, 0u64);
    for g in gts {
        let dets = by_image.get(g.image_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let o = classify_image(g, dets, conf_t, iou_t);
        c.tp += o.counts.tp;
        c.tn += o.counts.tn;
        c.fp += o.counts.fp;
        c.fn_ += o.counts.fn_;
        c.n_images += 1;
        if let Some(v) = o.iou {
            iou_sum += v;
            iou_n += 1;
        }
    }
    EvalReport {
        accuracy: (c.tp + c.tn) as f64 / c.n_images as f64,
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        mean_iou: (iou_n > 0).then(|| iou_sum / iou_n as f64),
        confidence_threshold: conf_t,
        iou_threshold: iou_t,
        counts: c,
    }
}

pub fn evaluate(gts: &[GroundTruth], dets: &[Detection], conf_t: f64, iou_t: f64) -> Result<EvalReport> {
    let by_image = group(gts, dets)?;
    Ok(evaluate_grouped(gts, &by_image, conf_t, iou_t))
}

/// `{0.00, 0.05, …, 0.95}`.
pub fn default_grid() -> Vec<f64> {
    (0..20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub best_threshold: f64,
    pub best: EvalReport,
    /// One report per grid point, ascending threshold.
    pub curve: Vec<EvalReport>,
}

/// Threshold with the highest accuracy; ties go to the lowest threshold.
pub fn sweep_threshold(gts: &[GroundTruth], dets: &[Detection], iou_t: f64, grid: &[f64]) -> Result<Sweep> {
    if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("threshold grid must be non-empty and finite".into()));
    }
    let by_image = group(gts, dets)?;
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let curve: Vec<EvalReport> = grid
        .iter()
        .map(|&t| evaluate_grouped(gts, &by_image, t, iou_t))
        .collect();
    let mut best = 0;
    for (i, r) in curve.iter().enumerate() {
        let correct = r.counts.tp + r.counts.tn;
        if correct > curve[best].counts.tp + curve[best].counts.tn {
            best = i;
        }
    }
    Ok(Sweep {
        best_threshold: grid[best],
        best: curve[best].clone(),
        curve,
    })
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_jsonl(&text, &path.display().to_string())
}

/// Parses JSON lines, skipping blank lines; errors carry 1-based line numbers.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, source: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Record {
                path: source.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    read_jsonl(path)
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    read_jsonl(path)
}

/// Serializes records one JSON object per line.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

/// Human-readable report.
pub fn format_table(r: &EvalReport) -> String {
    let c = &r.counts;
    let mut s = String::new();
    let _ = writeln!(s, "confidence threshold  {:.2}", r.confidence_threshold);
    let _ = writeln!(s, "IoU threshold         {:.2}", r.iou_threshold);
    let _ = writeln!(s, "images                {}", c.n_images);
    let _ = writeln!(s, "TP / TN / FP / FN     {} / {} / {} / {}", c.tp, c.tn, c.fp, c.fn_);
    let _ = writeln!(s, "accuracy              {:.4}", r.accuracy);
    let _ = writeln!(s, "precision             {}", fmt_opt(r.precision));
    let _ = writeln!(s, "recall                {}", fmt_opt(r.recall));
    let _ = writeln!(s, "mean IoU              {}", fmt_opt(r.mean_iou));
    s
}

/// Sweep curve as CSV; undefined metrics are empty cells.
pub fn sweep_csv(sweep: &Sweep) -> String {
    let mut s = String::from("confidence_threshold,accuracy,precision,recall,mean_iou,tp,tn,fp,fn\n");
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &sweep.curve {
        let c = &r.counts;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.confidence_threshold,
            r.accuracy,
            cell(r.precision),
            cell(r.recall),
            cell(r.mean_iou),
            c.tp,
            c.tn,
            c.fp,
            c.fn_
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(id: &str, b: Option<BBox>) -> GroundTruth {
        GroundTruth { image_id: id.into(), present: b.is_some(), bbox: b }
    }

    fn det(id: &str, b: BBox, c: f64) -> Detection {
        Detection { image_id: id.into(), bbox: b, confidence: c }
    }

    const BOX: BBox = [10.0, 10.0, 20.0, 20.0];

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&BOX, &BOX).unwrap(), 1.0);
        assert_eq!(iou(&BOX, &[30.0, 30.0, 40.0, 40.0]).unwrap(), 0.0);
        assert_eq!(iou(&BOX, &[20.0, 10.0, 30.0, 20.0]).unwrap(), 0.0);
        let v = iou(&[0.0, 0.0, 10.0, 10.0], &[5.0, 0.0, 15.0, 10.0]).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(iou(&[0.0, 0.0, 0.0, 5.0], &BOX), Err(Error::InvalidBox(_))));
        assert!(iou(&[5.0, 0.0, 1.0, 5.0], &BOX).is_err());
    }

    #[test]
    fn iou_matches_pixel_counting() {
        let boxes: [[i32; 4]; 4] = [[0, 0, 10, 10], [5, 0, 15, 10], [3, 4, 9, 12], [8, 8, 20, 9]];
        for a in &boxes {
            for b in &boxes {
                let mut inter = 0;
                let mut uni = 0;
                for x in 0..25 {
                    for y in 0..25 {
                        let ina = x >= a[0] && x < a[2] && y >= a[1] && y < a[3];
                        let inb = x >= b[0] && x < b[2] && y >= b[1] && y < b[3];
                        inter += (ina && inb) as i32;
                        uni += (ina || inb) as i32;
                    }
                }
                let f = |v: &[i32; 4]| v.map(f64::from);
                assert!((iou(&f(a), &f(b)).unwrap() - inter as f64 / uni as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn per_image_cases() {
        let present = gt("a", Some(BOX));
        let absent = gt("a", None);
        let good = det("a", BOX, 0.9);
        let half = det("a", [10.0, 10.0, 20.0, 15.0], 0.9);
        let weak = det("a", BOX, 0.5);
        let c = |g: &GroundTruth, d: &[&Detection]| classify_image(g, d, 0.5, 0.75).counts;
        assert_eq!(c(&present, &[&good]).tp, 1);
        assert_eq!(c(&absent, &[]).tn, 1);
        let mixed = c(&present, &[&half]);
        assert_eq!((mixed.fn_, mixed.fp, mixed.tp), (1, 1, 0));
        // Exactly at the threshold is not above it.
        assert_eq!(c(&present, &[&weak]).fn_, 1);
        assert_eq!(c(&absent, &[&good]).fp, 1);
        // Highest confidence wins even when a weaker box is better.
        let better_but_weaker = det("a", BOX, 0.8);
        assert_eq!(c(&present, &[&better_but_weaker, &half]).fp, 1);
    }

    #[test]
    fn tie_breaking() {
        let small = det("a", [0.0, 0.0, 1.0, 1.0], 0.7);
        let big = det("a", [0.0, 0.0, 2.0, 2.0], 0.7);
        let big_shifted = det("a", [1.0, 0.0, 3.0, 2.0], 0.7);
        assert_eq!(best_detection(&[&small, &big]).unwrap(), &big);
        assert_eq!(best_detection(&[&big_shifted, &big]).unwrap(), &big);
        assert_eq!(best_detection(&[&big, &big_shifted]).unwrap(), &big);
        assert!(best_detection(&[]).is_none());
    }

    #[test]
    fn five_image_fixture() {
        let gts = vec![gt("1", Some(BOX)), gt("2", Some(BOX)), gt("3", Some(BOX)), gt("4", Some(BOX)), gt("5", None)];
        let dets = vec![
            det("1", BOX, 0.9),
            det("2", BOX, 0.9),
            det("3", BOX, 0.9),
            det("4", [10.0, 10.0, 20.0, 15.0], 0.9),
        ];
        let r = evaluate(&gts, &dets, 0.5, 0.75).unwrap();
        assert_eq!((r.counts.tp, r.counts.tn, r.counts.fp, r.counts.fn_), (3, 1, 1, 1));
        assert_eq!(r.counts.n_images, r.counts.tp + r.counts.fn_ + r.counts.tn);
        assert_eq!(r.accuracy, 0.8);
        assert_eq!(r.precision, Some(0.75));
        assert_eq!(r.recall, Some(0.75));
        assert_eq!(r.mean_iou, Some(3.5 / 4.0));
    }

    #[test]
    fn undefined_metrics_are_null() {
        let gts = vec![gt("1", None), gt("2", None)];
        let r = evaluate(&gts, &[], 0.5, 0.75).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!((r.precision, r.recall, r.mean_iou), (None, None, None));
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["precision"].is_null());
        assert_eq!(json["counts"]["fn"], 0);
    }

    #[test]
    fn input_mismatch() {
        let gts = vec![gt("1", Some(BOX))];
        assert!(matches!(evaluate(&gts, &[det("9", BOX, 0.5)], 0.5, 0.75), Err(Error::InputMismatch(_))));
        assert!(evaluate(&[gt("1", None), gt("1", None)], &[], 0.5, 0.75).is_err());
        assert!(evaluate(&gts, &[det("1", BOX, 1.5)], 0.5, 0.75).is_err());
    }

    #[test]
    fn sweep_recovers_band_and_ties_low() {
        let mut gts = Vec::new();
        let mut dets = Vec::new();
        for i in 0..10 {
            let id = format!("p{i}");
            gts.push(gt(&id, Some(BOX)));
            dets.push(det(&id, BOX, 0.6 + 0.03 * i as f64));
            let id = format!("n{i}");
            gts.push(gt(&id, None));
            dets.push(det(&id, BOX, 0.1 + 0.03 * i as f64));
        }
        let s = sweep_threshold(&gts, &dets, 0.75, &default_grid()).unwrap();
        assert!((0.4..0.6).contains(&s.best_threshold), "{}", s.best_threshold);
        assert_eq!(s.best.accuracy, 1.0);
        assert_eq!(s.best_threshold, 0.4);
        assert_eq!(s.curve.len(), 20);

        let flat = sweep_threshold(&[gt("x", None)], &[], 0.75, &default_grid()).unwrap();
        assert_eq!(flat.best_threshold, 0.0);
        let single = sweep_threshold(&gts, &dets, 0.75, &[0.33]).unwrap();
        assert_eq!(single.best_threshold, 0.33);
        assert!(sweep_threshold(&gts, &dets, 0.75, &[]).is_err());
        let csv = sweep_csv(&flat);
        assert_eq!(csv.lines().count(), 21);
        assert!(csv.lines().nth(1).unwrap().starts_with("0,1,,,"));
    }

    #[test]
    fn jsonl_errors_carry_line_numbers() {
        let text = "{\"image_id\":\"a\",\"present\":false}\n\n{\"image_id\": oops}\n";
        match parse_jsonl::<GroundTruth>(text, "gt.jsonl") {
            Err(Error::Record { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let back: Vec<Detection> = parse_jsonl(&to_jsonl(&[det("a", BOX, 0.5)]).unwrap(), "x").unwrap();
        assert_eq!(back[0].bbox, BOX);
    }

    #[test]
    fn labels_to_ground_truth() {
        use crate::geometry::{UnitQuaternion, Vec3};
        let labels = LabelSet {
            bbox: Some([3, 4, 10, 12]),
            origin_px: None,
            pose_camera: crate::render::CameraPose { translation: Vec3::ZERO, orientation: UnitQuaternion::IDENTITY },
            visible_pixel_count: 1,
            keypoints_px: vec![],
        };
        assert_eq!(GroundTruth::from_labels("f", &labels).bbox, Some([3.0, 4.0, 11.0, 13.0]));
        let none = LabelSet { bbox: None, ..labels };
        assert!(!GroundTruth::from_labels("f", &none).present);
    }
}
