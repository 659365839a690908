//! Pose-fidelity scoring of detector outputs against edit instructions, and the Fréchet
//! distance between feature sets.

mod frechet;

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::{Category, DetectionRecord, EditInstruction};
use crate::geometry::Box3D;

pub use frechet::{
    frechet_distance, frechet_distance_with, frechet_from_moments, FeatureSet, FrechetRoute,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("non-finite angle {0}")]
    NonFinite(f64),
    #[error("orientation error {0} outside [0, pi]")]
    OutOfRange(f64),
    #[error("feature dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("covariance product has eigenvalue {value} below tolerance (largest {max})")]
    IndefiniteCovariance { value: f64, max: f64 },
    #[error("invalid feature set: {0}")]
    InvalidFeatures(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationMode {
    GroundPlane,
    Full3d,
}

/// Which translation errors a report shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MetricMode {
    #[default]
    GroundPlane,
    #[value(name = "full_3d")]
    #[serde(rename = "full_3d")]
    Full3d,
    Both,
}

impl MetricMode {
    fn shows(self, m: TranslationMode) -> bool {
        matches!(
            (self, m),
            (MetricMode::Both, _)
                | (MetricMode::GroundPlane, TranslationMode::GroundPlane)
                | (MetricMode::Full3d, TranslationMode::Full3d)
        )
    }
}

pub fn translation_error(a: &Box3D, b: &Box3D, mode: TranslationMode) -> f64 {
    let d = a.center() - b.center();
    match mode {
        TranslationMode::GroundPlane => (d.x * d.x + d.y * d.y).sqrt(),
        TranslationMode::Full3d => (d.x * d.x + d.y * d.y + d.z * d.z).sqrt(),
    }
}

/// Smallest absolute angle between two headings, in `[0, pi]`.
pub fn yaw_error(a: f64, b: f64) -> Result<f64, MetricsError> {
    for v in [a, b] {
        if !v.is_finite() {
            return Err(MetricsError::NonFinite(v));
        }
    }
    let k = (-(a - b) / TAU).round();
    let best = [k - 1.0, k, k + 1.0]
        .into_iter()
        .map(|k| (a - b + TAU * k).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(best.min(PI))
}

/// Strictly more than a right angle.
pub fn is_flipped(aoe: f64) -> Result<bool, MetricsError> {
    if !(0.0..=PI).contains(&aoe) {
        return Err(MetricsError::OutOfRange(aoe));
    }
    Ok(aoe > FRAC_PI_2)
}

pub const DEFAULT_MATCH_DISTANCE: f64 = 2.0;

fn ground_distance(a: &Box3D, b: &Box3D) -> f64 {
    translation_error(a, b, TranslationMode::GroundPlane)
}

fn detection_key(d: &DetectionRecord) -> String {
    let c = d.box3d.center();
    let s = d.box3d.size();
    serde_json::json!({
        "category": d.category.as_str(),
        "center": [c.x, c.y, c.z],
        "size": [s.w, s.l, s.h],
        "yaw": d.box3d.yaw(),
        "score": d.score,
    })
    .to_string()
}

/// Nearest same-category detection within `max_center_dist` on the ground plane. Equal
/// distances prefer the higher score, then the lexicographically smaller JSON form.
pub fn match_box<'a>(
    category: &Category,
    target: &Box3D,
    detections: &'a [DetectionRecord],
    max_center_dist: f64,
) -> Option<&'a DetectionRecord> {
    let mut best: Option<(&DetectionRecord, f64)> = None;
    for d in detections.iter().filter(|d| &d.category == category) {
        let dist = ground_distance(target, &d.box3d);
        if !(dist <= max_center_dist) {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, bd)) => {
                dist < bd
                    || (dist == bd
                        && (d.score > b.score
                            || (d.score == b.score && detection_key(d) < detection_key(b))))
            }
        };
        if better {
            best = Some((d, dist));
        }
    }
    best.map(|(d, _)| d)
}

pub fn match_detection<'a>(
    instruction: &EditInstruction,
    detections: &'a [DetectionRecord],
    max_center_dist: f64,
) -> Option<&'a DetectionRecord> {
    match_box(&instruction.category, &instruction.box3d, detections, max_center_dist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub token: String,
    pub category: Category,
    pub matched: bool,
    pub ate_ground_plane: Option<f64>,
    pub ate_full_3d: Option<f64>,
    pub aoe: Option<f64>,
    pub flipped: Option<bool>,
}

impl InstanceResult {
    pub fn unmatched(token: impl Into<String>, category: Category) -> Self {
        Self {
            token: token.into(),
            category,
            matched: false,
            ate_ground_plane: None,
            ate_full_3d: None,
            aoe: None,
            flipped: None,
        }
    }

    pub fn ate(&self, mode: TranslationMode) -> Option<f64> {
        match mode {
            TranslationMode::GroundPlane => self.ate_ground_plane,
            TranslationMode::Full3d => self.ate_full_3d,
        }
    }
}

pub fn score_instruction(
    instruction: &EditInstruction,
    detections: &[DetectionRecord],
    max_center_dist: f64,
) -> Result<InstanceResult, MetricsError> {
    let Some(det) = match_detection(instruction, detections, max_center_dist) else {
        return Ok(InstanceResult::unmatched(&instruction.token, instruction.category.clone()));
    };
    let aoe = yaw_error(instruction.box3d.yaw(), det.box3d.yaw())?;
    Ok(InstanceResult {
        token: instruction.token.clone(),
        category: instruction.category.clone(),
        matched: true,
        ate_ground_plane: Some(translation_error(&instruction.box3d, &det.box3d, TranslationMode::GroundPlane)),
        ate_full_3d: Some(translation_error(&instruction.box3d, &det.box3d, TranslationMode::Full3d)),
        aoe: Some(aoe),
        flipped: Some(is_flipped(aoe)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub count: usize,
    pub matched: usize,
    pub match_rate: f64,
    pub mean_ate_ground_plane: Option<f64>,
    pub mean_ate_full_3d: Option<f64>,
    pub mean_aoe: Option<f64>,
    pub flip_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub matched: usize,
    /// Matched over total, over instances rather than classes.
    pub match_rate: Option<f64>,
    pub m_ate_ground_plane: Option<f64>,
    pub m_ate_full_3d: Option<f64>,
    pub m_aoe: Option<f64>,
    pub flip_rate: Option<f64>,
    pub fid: Option<f64>,
    pub classes: BTreeMap<String, ClassStats>,
}

/// Sum in sorted order so the result does not depend on input order.
fn mean(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Per-class means over matched results, then unweighted means over classes that have a
/// matched result.
pub fn aggregate(results: &[InstanceResult]) -> EvalReport {
    let mut by_class: BTreeMap<String, Vec<&InstanceResult>> = BTreeMap::new();
    for r in results {
        by_class.entry(r.category.to_string()).or_default().push(r);
    }
    let mut classes = BTreeMap::new();
    for (name, rs) in by_class {
        let m: Vec<_> = rs.iter().filter(|r| r.matched).collect();
        let pick = |f: &dyn Fn(&InstanceResult) -> Option<f64>| mean(m.iter().filter_map(|r| f(r)).collect());
        classes.insert(
            name,
            ClassStats {
                count: rs.len(),
                matched: m.len(),
                match_rate: m.len() as f64 / rs.len() as f64,
                mean_ate_ground_plane: pick(&|r| r.ate_ground_plane),
                mean_ate_full_3d: pick(&|r| r.ate_full_3d),
                mean_aoe: pick(&|r| r.aoe),
                flip_rate: (!m.is_empty())
                    .then(|| m.iter().filter(|r| r.flipped == Some(true)).count() as f64 / m.len() as f64),
            },
        );
    }
    let over = |f: &dyn Fn(&ClassStats) -> Option<f64>| mean(classes.values().filter_map(f).collect());
    let matched = results.iter().filter(|r| r.matched).count();
    EvalReport {
        count: results.len(),
        matched,
        match_rate: (!results.is_empty()).then(|| matched as f64 / results.len() as f64),
        m_ate_ground_plane: over(&|c| c.mean_ate_ground_plane),
        m_ate_full_3d: over(&|c| c.mean_ate_full_3d),
        m_aoe: over(&|c| c.mean_aoe),
        flip_rate: over(&|c| c.flip_rate),
        fid: None,
        classes,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl EvalReport {
    /// JSON with the translation fields not selected by `mode` removed.
    pub fn to_json(&self, mode: MetricMode) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        let drop = |obj: &mut serde_json::Map<String, serde_json::Value>, prefix: &str| {
            for (m, s) in [(TranslationMode::GroundPlane, "ground_plane"), (TranslationMode::Full3d, "full_3d")] {
                if !mode.shows(m) {
                    obj.remove(&format!("{prefix}{s}"));
                }
            }
        };
        let root = v.as_object_mut().expect("object");
        drop(root, "m_ate_");
        if let Some(serde_json::Value::Object(classes)) = root.get_mut("classes") {
            for c in classes.values_mut() {
                if let Some(obj) = c.as_object_mut() {
                    drop(obj, "mean_ate_");
                }
            }
        }
        root.insert("metric_mode".into(), serde_json::to_value(mode).expect("mode serializes"));
        v
    }

    /// Aligned plain-text table, one row per class plus a closing row of class means.
    pub fn to_table(&self, mode: MetricMode) -> String {
        let mut header = vec!["class", "count", "matched", "match_rate"];
        if mode.shows(TranslationMode::GroundPlane) {
            header.push("ate_gp");
        }
        if mode.shows(TranslationMode::Full3d) {
            header.push("ate_3d");
        }
        header.extend(["aoe", "flip_rate"]);

        let mut rows: Vec<Vec<String>> = Vec::new();
        let ate_cells = |gp: Option<f64>, f3: Option<f64>| {
            let mut v = Vec::new();
            if mode.shows(TranslationMode::GroundPlane) {
                v.push(fmt_opt(gp));
            }
            if mode.shows(TranslationMode::Full3d) {
                v.push(fmt_opt(f3));
            }
            v
        };
        for (name, c) in &self.classes {
            let mut row = vec![name.clone(), c.count.to_string(), c.matched.to_string(), fmt_opt(Some(c.match_rate))];
            row.extend(ate_cells(c.mean_ate_ground_plane, c.mean_ate_full_3d));
            row.extend([fmt_opt(c.mean_aoe), fmt_opt(c.flip_rate)]);
            rows.push(row);
        }
        let mut total = vec!["mean".to_string(), self.count.to_string(), self.matched.to_string(), fmt_opt(self.match_rate)];
        total.extend(ate_cells(self.m_ate_ground_plane, self.m_ate_full_3d));
        total.extend([fmt_opt(self.m_aoe), fmt_opt(self.flip_rate)]);
        rows.push(total);

        let widths: Vec<usize> = (0..header.len())
            .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        line(&mut out, &widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
        for r in &rows {
            line(&mut out, r);
        }
        if let Some(f) = self.fid {
            let _ = writeln!(out, "fid {f:.6}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::EditKind;
    use crate::geometry::BoxSize;
    use proptest::prelude::*;

    fn bx(c: [f64; 3], yaw: f64) -> Box3D {
        Box3D::new(c, BoxSize::new(1.9, 4.6, 1.7), yaw).unwrap()
    }

    fn det(c: [f64; 3], score: f32, cat: Category) -> DetectionRecord {
        DetectionRecord { frame_token: "f".into(), category: cat, box3d: bx(c, 0.0), score }
    }

    fn brute_yaw(a: f64, b: f64) -> f64 {
        (-2..=2).map(|k| (a - b + TAU * k as f64).abs()).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn translation_examples() {
        let o = bx([0.0; 3], 0.0);
        assert_eq!(translation_error(&o, &o, TranslationMode::GroundPlane), 0.0);
        for m in [TranslationMode::GroundPlane, TranslationMode::Full3d] {
            assert_eq!(translation_error(&o, &bx([3.0, 4.0, 0.0], 0.0), m), 5.0);
        }
        let up = bx([0.0, 0.0, 2.0], 0.0);
        assert_eq!(translation_error(&o, &up, TranslationMode::GroundPlane), 0.0);
        assert_eq!(translation_error(&o, &up, TranslationMode::Full3d), 2.0);
    }

    #[test]
    fn yaw_examples() {
        assert_eq!(yaw_error(0.0, PI).unwrap(), PI);
        assert!((yaw_error(0.1, -0.1).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(yaw_error(-3.0, 3.0).unwrap(), brute_yaw(-3.0, 3.0));
        assert!((yaw_error(-3.0, 3.0).unwrap() - (TAU - 6.0)).abs() < 1e-12);
        assert!(matches!(yaw_error(f64::NAN, 0.0), Err(MetricsError::NonFinite(_))));
    }

    #[test]
    fn flip_boundary() {
        assert!(!is_flipped(FRAC_PI_2).unwrap());
        assert!(is_flipped(FRAC_PI_2 + 1e-6).unwrap());
        assert!(is_flipped(PI).unwrap());
        assert!(is_flipped(-0.1).is_err());
        assert!(is_flipped(3.2).is_err());
    }

    #[test]
    fn matching_rules() {
        assert!(match_box(&Category::Car, &bx([0.0; 3], 0.0), &[], 2.0).is_none());
        let one = [det([0.5, 0.0, 0.0], 0.5, Category::Car)];
        assert!(match_box(&Category::Car, &bx([0.0; 3], 0.0), &one, 2.0).is_some());
        let wrong_cat = [det([0.5, 0.0, 0.0], 0.5, Category::Truck)];
        assert!(match_box(&Category::Car, &bx([0.0; 3], 0.0), &wrong_cat, 2.0).is_none());
        let tie = [det([1.0, 0.0, 0.0], 0.8, Category::Car), det([0.0, 1.0, 0.0], 0.9, Category::Car)];
        assert_eq!(match_box(&Category::Car, &bx([0.0; 3], 0.0), &tie, 2.0).unwrap().score, 0.9);
        let far = [det([2.5, 0.0, 0.0], 0.9, Category::Car)];
        assert!(match_box(&Category::Car, &bx([0.0; 3], 0.0), &far, 2.0).is_none());
        let full_tie = [det([0.0, 1.0, 0.0], 0.9, Category::Car), det([1.0, 0.0, 0.0], 0.9, Category::Car)];
        let a = match_box(&Category::Car, &bx([0.0; 3], 0.0), &full_tie, 2.0).unwrap();
        let rev = [full_tie[1].clone(), full_tie[0].clone()];
        let b = match_box(&Category::Car, &bx([0.0; 3], 0.0), &rev, 2.0).unwrap();
        assert_eq!(a, b);
    }

    fn res(cat: Category, aoe: f64) -> InstanceResult {
        InstanceResult {
            token: "t".into(),
            category: cat,
            matched: true,
            ate_ground_plane: Some(0.0),
            ate_full_3d: Some(0.0),
            aoe: Some(aoe),
            flipped: Some(is_flipped(aoe).unwrap()),
        }
    }

    #[test]
    fn aggregate_examples() {
        let mut rs = vec![res(Category::Car, 0.1); 3];
        rs.push(res(Category::Truck, 0.3));
        assert!((aggregate(&rs).m_aoe.unwrap() - 0.2).abs() < 1e-12);

        let none = aggregate(&[InstanceResult::unmatched("a", Category::Car)]);
        assert_eq!(none.match_rate, Some(0.0));
        assert_eq!(none.m_aoe, None);
        assert_eq!(none.classes["car"].mean_aoe, None);

        let mut cars: Vec<_> = (0..70).map(|_| res(Category::Car, 0.05)).collect();
        cars.extend((0..30).map(|_| res(Category::Car, 3.0)));
        let r = aggregate(&cars);
        assert!((r.classes["car"].mean_aoe.unwrap() - 0.935).abs() < 1e-12);
        assert!((r.classes["car"].flip_rate.unwrap() - 0.30).abs() < 1e-12);

        assert_eq!(aggregate(&[]), EvalReport::default());
    }

    #[test]
    fn perfect_detector_scores_zero() {
        let ins = EditInstruction {
            token: "i".into(),
            kind: EditKind::Flip,
            frame_token: "f".into(),
            instance_token: "a".into(),
            category: Category::Bus,
            box3d: bx([10.0, 2.0, 1.0], 2.0),
        };
        let d = DetectionRecord { frame_token: "f".into(), category: Category::Bus, box3d: ins.box3d, score: 1.0 };
        let r = aggregate(&[score_instruction(&ins, &[d], 2.0).unwrap()]);
        assert_eq!((r.m_ate_ground_plane, r.m_aoe, r.flip_rate, r.match_rate), (Some(0.0), Some(0.0), Some(0.0), Some(1.0)));
    }

    #[test]
    fn report_exports_follow_mode() {
        let r = aggregate(&[res(Category::Car, 0.1), InstanceResult::unmatched("u", Category::Truck)]);
        let gp = r.to_json(MetricMode::GroundPlane);
        assert!(gp.get("m_ate_ground_plane").is_some() && gp.get("m_ate_full_3d").is_none());
        let both = r.to_json(MetricMode::Both);
        assert!(both["classes"]["car"].get("mean_ate_full_3d").is_some());
        let t = r.to_table(MetricMode::Both);
        let lines: Vec<_> = t.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].contains("ate_gp") && lines[0].contains("ate_3d"));
        assert!(lines[3].starts_with("truck"));
    }

    proptest! {
        #[test]
        fn yaw_error_properties(a in -10.0f64..10.0, b in -10.0f64..10.0, k in -3i32..3) {
            let e = yaw_error(a, b).unwrap();
            prop_assert!((0.0..=PI).contains(&e));
            prop_assert_eq!(e, yaw_error(b, a).unwrap());
            prop_assert!((yaw_error(a + TAU * k as f64, b).unwrap() - e).abs() < 1e-9);
            prop_assert!((yaw_error(a, a + PI).unwrap() - PI).abs() < 1e-9);
        }

        #[test]
        fn translation_is_metric(p in prop::array::uniform9(-50.0f64..50.0)) {
            let a = bx([p[0], p[1], p[2]], 0.0);
            let b = bx([p[3], p[4], p[5]], 0.0);
            let c = bx([p[6], p[7], p[8]], 0.0);
            for m in [TranslationMode::GroundPlane, TranslationMode::Full3d] {
                prop_assert_eq!(translation_error(&a, &b, m), translation_error(&b, &a, m));
                prop_assert!(translation_error(&a, &c, m) <= translation_error(&a, &b, m) + translation_error(&b, &c, m) + 1e-9);
            }
        }

        #[test]
        fn aggregate_is_permutation_invariant(
            aoes in prop::collection::vec((0.0f64..PI, 0usize..3, any::<bool>()), 1..40),
            seed in any::<u64>(),
        ) {
            let cats = [Category::Car, Category::Truck, Category::Bus];
            let rs: Vec<_> = aoes
                .iter()
                .map(|(a, c, m)| if *m { res(cats[*c].clone(), *a) } else { InstanceResult::unmatched("u", cats[*c].clone()) })
                .collect();
            let mut shuffled = rs.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(aggregate(&rs), aggregate(&shuffled));
            for r in &rs {
                if let (Some(a), Some(f)) = (r.aoe, r.flipped) {
                    prop_assert_eq!(f, is_flipped(a).unwrap());
                }
            }
        }
    }
}
