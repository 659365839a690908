use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{placement_yaw_offsets, BenchmarkError, Category, EditInstruction, EditKind, FrameRecord};
use crate::geometry::{normalize_angle, Box3D, BoxSize};

/// Drivable ground region of one frame, as a simple polygon in world `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivableRegion {
    pub polygon: Vec<[f64; 2]>,
    pub ego_yaw: f64,
    #[serde(default)]
    pub ground_z: f64,
}

impl DrivableRegion {
    fn area(&self) -> f64 {
        let p = &self.polygon;
        let n = p.len();
        (0..n)
            .map(|i| {
                let (a, b) = (p[i], p[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            / 2.0
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.polygon {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementConfig {
    /// Horizontal distance bands from the camera center. The last band is closed above.
    pub bands: Vec<[f64; 2]>,
    pub yaw_count: usize,
    pub template: BoxSize,
    pub category: Category,
    pub max_tries: usize,
    pub seed: u64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            bands: vec![[8.0, 16.0], [16.0, 28.0], [28.0, 40.0]],
            yaw_count: 8,
            template: BoxSize::new(1.9, 4.6, 1.7),
            category: Category::Car,
            max_tries: 10_000,
            seed: 0,
        }
    }
}

/// A frame together with its drivable region.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementFrame {
    pub frame: FrameRecord,
    pub region: DrivableRegion,
}

#[derive(Debug, Default)]
pub struct PlacementOutput {
    pub instructions: Vec<EditInstruction>,
    /// Frames that produced no instructions, with the reason.
    pub failures: Vec<(String, BenchmarkError)>,
    /// `(frame, band index)` pairs that fell back to whole-polygon sampling.
    pub fallbacks: Vec<(String, usize)>,
}

/// True iff `p` is strictly inside the polygon; boundary points are outside.
pub fn point_in_polygon(p: [f64; 2], polygon: &[[f64; 2]]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let within = p[0] >= a[0].min(b[0])
            && p[0] <= a[0].max(b[0])
            && p[1] >= a[1].min(b[1])
            && p[1] <= a[1].max(b[1]);
        if cross == 0.0 && within {
            return false;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn frame_rng(seed: u64, frame_token: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"boxpose-placement");
    h.update(seed.to_le_bytes());
    h.update(frame_token.as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

fn in_band(d: f64, band: [f64; 2], last: bool) -> bool {
    d >= band[0] && (d < band[1] || (last && d == band[1]))
}

fn sample_frame(
    pf: &PlacementFrame,
    cfg: &PlacementConfig,
) -> Result<(Vec<EditInstruction>, Vec<usize>), BenchmarkError> {
    let token = &pf.frame.frame_token;
    let region = &pf.region;
    if region.polygon.len() < 3
        || region.area().abs() <= 0.0
        || region.polygon.iter().flatten().any(|v| !v.is_finite())
    {
        return Err(BenchmarkError::EmptyDrivableRegion(token.clone()));
    }
    let ego = pf.frame.camera.center_world();
    let (lo, hi) = region.bounds();
    let mut rng = frame_rng(cfg.seed, token);
    let draw = |rng: &mut ChaCha20Rng| -> [f64; 2] {
        [rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])]
    };

    let mut fallbacks = Vec::new();
    let mut points = Vec::with_capacity(cfg.bands.len());
    for (bi, band) in cfg.bands.iter().enumerate() {
        let last = bi + 1 == cfg.bands.len();
        let mut hit = None;
        for _ in 0..cfg.max_tries {
            let p = draw(&mut rng);
            let d = (p[0] - ego.x).hypot(p[1] - ego.y);
            if in_band(d, *band, last) && point_in_polygon(p, &region.polygon) {
                hit = Some(p);
                break;
            }
        }
        if hit.is_none() {
            fallbacks.push(bi);
            for _ in 0..cfg.max_tries {
                let p = draw(&mut rng);
                if point_in_polygon(p, &region.polygon) {
                    hit = Some(p);
                    break;
                }
            }
        }
        points.push(hit.ok_or_else(|| BenchmarkError::EmptyDrivableRegion(token.clone()))?);
    }

    let z = region.ground_z + cfg.template.h / 2.0;
    let mut out = Vec::with_capacity(points.len() * cfg.yaw_count);
    for (pi, p) in points.iter().enumerate() {
        for (k, off) in placement_yaw_offsets(cfg.yaw_count).into_iter().enumerate() {
            let yaw = normalize_angle(region.ego_yaw + off)?;
            out.push(EditInstruction {
                token: format!("{token}:p{pi}:y{k}"),
                kind: EditKind::Place,
                frame_token: token.clone(),
                instance_token: String::new(),
                category: cfg.category.clone(),
                box3d: Box3D::new([p[0], p[1], z], cfg.template, yaw)?,
            });
        }
    }
    Ok((out, fallbacks))
}

/// Per frame, one point per distance band and `yaw_count` orientations per point starting
/// at the ego yaw. Each frame has its own generator derived from `(seed, frame_token)`, so
/// the output does not depend on frame order within a batch or on the thread count.
pub fn generate_placements(frames: &[PlacementFrame], cfg: &PlacementConfig) -> PlacementOutput {
    let results: Vec<_> = frames.par_iter().map(|pf| sample_frame(pf, cfg)).collect();
    let mut out = PlacementOutput::default();
    for (pf, r) in frames.iter().zip(results) {
        let token = pf.frame.frame_token.clone();
        match r {
            Ok((ins, fb)) => {
                out.instructions.extend(ins);
                out.fallbacks.extend(fb.into_iter().map(|b| (token.clone(), b)));
            }
            Err(e) => out.failures.push((token, e)),
        }
    }
    out
}

/// Pairs frames with their regions; frames without a region are reported as empty.
pub fn pair_frames(
    frames: &[FrameRecord],
    drivable: &BTreeMap<String, DrivableRegion>,
) -> (Vec<PlacementFrame>, Vec<String>) {
    let mut paired = Vec::new();
    let mut missing = Vec::new();
    for f in frames {
        match drivable.get(&f.frame_token) {
            Some(r) => paired.push(PlacementFrame { frame: f.clone(), region: r.clone() }),
            None => missing.push(f.frame_token.clone()),
        }
    }
    (paired, missing)
}
