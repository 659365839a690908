//! Benchmark data: annotated frames and instances, instance filtering, edit instructions
//! and placement-task generation.

mod io;
mod placement;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crops::bbox2d_of;
use crate::geometry::{normalize_angle, Box3D, Camera, GeometryError, DEFAULT_Z_NEAR};
use crate::masks::{enlarge_box, MaskError};
use crate::metrics::{match_box, yaw_error};

pub use io::{
    load_annotations, load_detections, load_drivable, load_instructions, parse_annotations,
    parse_detections, parse_drivable, parse_instructions, save_annotations, save_detections,
    save_instructions,
};
pub use placement::{
    generate_placements, pair_frames, point_in_polygon, DrivableRegion, PlacementConfig, PlacementFrame,
    PlacementOutput,
};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    ParseError { path: String, message: String },
    #[error("schema violation in {record}: {message}")]
    SchemaViolation { record: String, message: String },
    #[error("instance {instance} references missing frame {frame}")]
    DanglingReference { instance: String, frame: String },
    #[error("frame {0}: no admissible drivable area")]
    EmptyDrivableRegion(String),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Category {
    Car,
    Truck,
    Bus,
    Other(String),
}

impl Category {
    pub fn as_str(&self) -> &str {
        match self {
            Category::Car => "car",
            Category::Truck => "truck",
            Category::Bus => "bus",
            Category::Other(s) => s,
        }
    }
}

impl From<&str> for Category {
    fn from(s: &str) -> Self {
        match s {
            "car" => Category::Car,
            "truck" => Category::Truck,
            "bus" => Category::Bus,
            other => Category::Other(other.to_string()),
        }
    }
}

impl From<String> for Category {
    fn from(s: String) -> Self {
        Category::from(s.as_str())
    }
}

impl From<Category> for String {
    fn from(c: Category) -> Self {
        c.as_str().to_string()
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_token: String,
    pub camera: Camera,
    pub image_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub instance_token: String,
    pub frame_token: String,
    pub category: Category,
    pub box3d: Box3D,
    pub visibility: u8,
    pub camera_name: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub frames: Vec<FrameRecord>,
    pub instances: Vec<InstanceRecord>,
}

impl Dataset {
    pub fn frame_map(&self) -> BTreeMap<String, FrameRecord> {
        self.frames
            .iter()
            .map(|f| (f.frame_token.clone(), f.clone()))
            .collect()
    }

    pub fn frame(&self, token: &str) -> Option<&FrameRecord> {
        self.frames.iter().find(|f| f.frame_token == token)
    }

    pub fn instances_in_frame<'a>(&'a self, frame: &'a str) -> impl Iterator<Item = &'a InstanceRecord> {
        self.instances.iter().filter(move |i| i.frame_token == frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub frame_token: String,
    pub category: Category,
    pub box3d: Box3D,
    pub score: f32,
}

/// Detections keyed by the image they were computed on.
pub type DetectionSet = BTreeMap<String, Vec<DetectionRecord>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditKind {
    Replace,
    Flip,
    Rotate { delta_yaw: f64 },
    Enlarge { factors: [f64; 3] },
    Place,
}

impl EditKind {
    pub fn name(&self) -> &'static str {
        match self {
            EditKind::Replace => "replace",
            EditKind::Flip => "flip",
            EditKind::Rotate { .. } => "rotate",
            EditKind::Enlarge { .. } => "enlarge",
            EditKind::Place => "place",
        }
    }
}

/// Edits applicable to an existing instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EditOp {
    Replace,
    Flip,
    Rotate(f64),
    Enlarge([f64; 3]),
}

impl std::str::FromStr for EditOp {
    type Err = String;

    /// `replace`, `flip`, `rotate:<radians>` or `enlarge:<fw>,<fl>,<fh>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, arg) = s.split_once(':').unwrap_or((s, ""));
        match (head, arg) {
            ("replace", "") => Ok(EditOp::Replace),
            ("flip", "") => Ok(EditOp::Flip),
            ("rotate", a) => a
                .parse::<f64>()
                .map(EditOp::Rotate)
                .map_err(|e| format!("bad rotation in {s:?}: {e}")),
            ("enlarge", a) => {
                let v: Result<Vec<f64>, _> = a.split(',').map(str::parse).collect();
                match v.as_deref() {
                    Ok([f]) => Ok(EditOp::Enlarge([*f; 3])),
                    Ok([w, l, h]) => Ok(EditOp::Enlarge([*w, *l, *h])),
                    _ => Err(format!("bad enlarge factors in {s:?}")),
                }
            }
            _ => Err(format!("unknown edit {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditInstruction {
    /// Identifies the edited image; detections may be keyed by it.
    pub token: String,
    pub kind: EditKind,
    pub frame_token: String,
    /// Empty for placements.
    pub instance_token: String,
    pub category: Category,
    /// Post-edit box.
    pub box3d: Box3D,
}

/// `replace` keeps the box, `flip` adds pi to the yaw, `rotate` adds the given angle and
/// `enlarge` scales the size.
pub fn make_edit(instance: &InstanceRecord, op: EditOp) -> Result<EditInstruction, BenchmarkError> {
    let b = &instance.box3d;
    let (kind, box3d) = match op {
        EditOp::Replace => (EditKind::Replace, *b),
        EditOp::Flip => (EditKind::Flip, b.with_yaw(normalize_angle(b.yaw() + PI)?)?),
        EditOp::Rotate(d) => (
            EditKind::Rotate { delta_yaw: d },
            b.with_yaw(normalize_angle(b.yaw() + d)?)?,
        ),
        EditOp::Enlarge(f) => (EditKind::Enlarge { factors: f }, enlarge_box(b, f)?),
    };
    Ok(EditInstruction {
        token: format!("{}:{}", instance.instance_token, kind.name()),
        kind,
        frame_token: instance.frame_token.clone(),
        instance_token: instance.instance_token.clone(),
        category: instance.category.clone(),
        box3d,
    })
}

/// Instance selection thresholds. Distances are camera center to box center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRules {
    pub categories: BTreeSet<Category>,
    pub min_side_px: f64,
    pub min_distance: f64,
    pub max_distance: f64,
    pub min_visibility: u8,
    pub z_near: f64,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self {
            categories: [Category::Car, Category::Truck, Category::Bus].into(),
            min_side_px: 96.0,
            min_distance: 4.0,
            max_distance: 40.0,
            min_visibility: 3,
            z_near: DEFAULT_Z_NEAR,
        }
    }
}

impl FilterRules {
    pub fn accepts(&self, inst: &InstanceRecord, frame: &FrameRecord) -> bool {
        if !self.categories.contains(&inst.category) || inst.visibility < self.min_visibility {
            return false;
        }
        let d = (inst.box3d.center() - frame.camera.center_world()).norm();
        if d < self.min_distance || d > self.max_distance {
            return false;
        }
        let cam = &frame.camera;
        match bbox2d_of(cam, &inst.box3d, self.z_near) {
            Ok(r) => {
                let r = r.clamped(cam.width, cam.height);
                r.width().min(r.height()) >= self.min_side_px
            }
            Err(_) => false,
        }
    }
}

/// Instances passing every rule; instances whose frame is unknown are dropped.
pub fn filter_instances(
    instances: &[InstanceRecord],
    frames: &BTreeMap<String, FrameRecord>,
    rules: &FilterRules,
) -> Vec<InstanceRecord> {
    instances
        .iter()
        .filter(|i| frames.get(&i.frame_token).is_some_and(|f| rules.accepts(i, f)))
        .cloned()
        .collect()
}

pub const DEFAULT_MAX_DETECTOR_YAW_ERR: f64 = 3.0 * PI / 180.0;

/// Keeps instances the reference detector finds (same frame, same category, nearest center
/// within `max_center_dist`) with a yaw error of at most `max_yaw_err`.
pub fn filter_by_detector(
    instances: &[InstanceRecord],
    detections: &DetectionSet,
    max_yaw_err: f64,
    max_center_dist: f64,
) -> Vec<InstanceRecord> {
    instances
        .iter()
        .filter(|inst| {
            let dets = detections.get(&inst.frame_token).map(Vec::as_slice).unwrap_or(&[]);
            match match_box(&inst.category, &inst.box3d, dets, max_center_dist) {
                Some(d) => yaw_error(inst.box3d.yaw(), d.box3d.yaw())
                    .map(|e| e <= max_yaw_err)
                    .unwrap_or(false),
                None => false,
            }
        })
        .cloned()
        .collect()
}

/// Yaw offsets of the eight placement orientations.
pub fn placement_yaw_offsets(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * FRAC_PI_4).collect()
}
