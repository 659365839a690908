//! JSON readers and writers for annotations, detections, drivable regions and
//! instructions. Records are parsed into plain serde structs first and then validated
//! into domain types, so schema errors can name the offending record.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    BenchmarkError, Category, Dataset, DetectionRecord, DetectionSet, DrivableRegion,
    EditInstruction, EditKind, FrameRecord, InstanceRecord,
};
use crate::geometry::{Box3D, BoxSize, Camera};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCamera {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    rotation: [f64; 4],
    translation: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawFrame {
    frame_token: String,
    camera: RawCamera,
    image_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawInstance {
    instance_token: String,
    frame_token: String,
    category: String,
    center: [f64; 3],
    size: [f64; 3],
    yaw: f64,
    visibility: i64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    camera_name: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RawAnnotations {
    frames: Vec<RawFrame>,
    instances: Vec<RawInstance>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawDetection {
    category: String,
    center: [f64; 3],
    size: [f64; 3],
    yaw: f64,
    score: f32,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RawDetections {
    frames: BTreeMap<String, Vec<RawDetection>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawInstruction {
    token: String,
    #[serde(flatten)]
    kind: EditKind,
    frame_token: String,
    #[serde(default)]
    instance_token: String,
    category: String,
    center: [f64; 3],
    size: [f64; 3],
    yaw: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RawInstructions {
    instructions: Vec<RawInstruction>,
}

fn violation(record: impl Into<String>, message: impl ToString) -> BenchmarkError {
    BenchmarkError::SchemaViolation {
        record: record.into(),
        message: message.to_string(),
    }
}

fn read_text(path: &Path) -> Result<String, BenchmarkError> {
    std::fs::read_to_string(path).map_err(|source| BenchmarkError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, BenchmarkError> {
    serde_json::from_str(text).map_err(|e| BenchmarkError::ParseError {
        path: origin.to_string(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BenchmarkError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| BenchmarkError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn category(record: &str, s: &str) -> Result<Category, BenchmarkError> {
    if s.is_empty() {
        return Err(violation(record, "empty category"));
    }
    Ok(Category::from(s))
}

fn make_box(record: &str, center: [f64; 3], size: [f64; 3], yaw: f64) -> Result<Box3D, BenchmarkError> {
    Box3D::new(center, BoxSize::new(size[0], size[1], size[2]), yaw).map_err(|e| violation(record, e))
}

fn box_fields(b: &Box3D) -> ([f64; 3], [f64; 3], f64) {
    let c = b.center();
    let s = b.size();
    ([c.x, c.y, c.z], [s.w, s.l, s.h], b.yaw())
}

fn frame_from_raw(i: usize, r: RawFrame) -> Result<FrameRecord, BenchmarkError> {
    let record = format!("frames[{i}] ({})", r.frame_token);
    if r.frame_token.is_empty() {
        return Err(violation(record, "empty frame_token"));
    }
    if r.image_path.is_empty() {
        return Err(violation(record, "empty image_path"));
    }
    let c = r.camera;
    let camera = Camera::new(c.fx, c.fy, c.cx, c.cy, c.width, c.height, c.rotation, c.translation)
        .map_err(|e| violation(&record, e))?;
    Ok(FrameRecord {
        frame_token: r.frame_token,
        camera,
        image_path: r.image_path,
    })
}

fn frame_to_raw(f: &FrameRecord) -> RawFrame {
    let c = &f.camera;
    RawFrame {
        frame_token: f.frame_token.clone(),
        camera: RawCamera {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            rotation: c.rotation_wxyz(),
            translation: c.translation(),
        },
        image_path: f.image_path.clone(),
    }
}

fn instance_from_raw(i: usize, r: RawInstance) -> Result<InstanceRecord, BenchmarkError> {
    let record = format!("instances[{i}] ({})", r.instance_token);
    if r.instance_token.is_empty() {
        return Err(violation(record, "empty instance_token"));
    }
    if r.frame_token.is_empty() {
        return Err(violation(record, "empty frame_token"));
    }
    if !(1..=4).contains(&r.visibility) {
        return Err(violation(record, format!("visibility {} outside 1..4", r.visibility)));
    }
    Ok(InstanceRecord {
        category: category(&record, &r.category)?,
        box3d: make_box(&record, r.center, r.size, r.yaw)?,
        instance_token: r.instance_token,
        frame_token: r.frame_token,
        visibility: r.visibility as u8,
        camera_name: r.camera_name,
    })
}

fn instance_to_raw(inst: &InstanceRecord) -> RawInstance {
    let (center, size, yaw) = box_fields(&inst.box3d);
    RawInstance {
        instance_token: inst.instance_token.clone(),
        frame_token: inst.frame_token.clone(),
        category: inst.category.to_string(),
        center,
        size,
        yaw,
        visibility: inst.visibility as i64,
        camera_name: inst.camera_name.clone(),
    }
}

/// Parses an annotations document and checks that every instance's frame exists.
pub fn parse_annotations(text: &str, origin: &str) -> Result<Dataset, BenchmarkError> {
    let raw: RawAnnotations = parse_json(text, origin)?;
    let frames = raw
        .frames
        .into_iter()
        .enumerate()
        .map(|(i, f)| frame_from_raw(i, f))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = BTreeSet::new();
    for f in &frames {
        if !seen.insert(f.frame_token.as_str()) {
            return Err(violation(format!("frame {}", f.frame_token), "duplicate frame_token"));
        }
    }
    let instances = raw
        .instances
        .into_iter()
        .enumerate()
        .map(|(i, r)| instance_from_raw(i, r))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen_inst = BTreeSet::new();
    for inst in &instances {
        if !seen.contains(inst.frame_token.as_str()) {
            return Err(BenchmarkError::DanglingReference {
                instance: inst.instance_token.clone(),
                frame: inst.frame_token.clone(),
            });
        }
        if !seen_inst.insert(inst.instance_token.as_str()) {
            return Err(violation(
                format!("instance {}", inst.instance_token),
                "duplicate instance_token",
            ));
        }
    }
    Ok(Dataset { frames, instances })
}

pub fn load_annotations(path: &Path) -> Result<Dataset, BenchmarkError> {
    parse_annotations(&read_text(path)?, &path.display().to_string())
}

/// Writes pretty-printed JSON. Loading a file written here and saving it again gives
/// identical bytes.
pub fn save_annotations(path: &Path, data: &Dataset) -> Result<(), BenchmarkError> {
    let raw = RawAnnotations {
        frames: data.frames.iter().map(frame_to_raw).collect(),
        instances: data.instances.iter().map(instance_to_raw).collect(),
    };
    write_json(path, &raw)
}

pub fn parse_detections(text: &str, origin: &str) -> Result<DetectionSet, BenchmarkError> {
    let raw: RawDetections = parse_json(text, origin)?;
    let mut out = DetectionSet::new();
    for (frame, dets) in raw.frames {
        let mut list = Vec::with_capacity(dets.len());
        for (i, d) in dets.into_iter().enumerate() {
            let record = format!("detections[{frame}][{i}]");
            if !(0.0..=1.0).contains(&d.score) {
                return Err(violation(record, format!("score {} outside [0, 1]", d.score)));
            }
            list.push(DetectionRecord {
                frame_token: frame.clone(),
                category: category(&record, &d.category)?,
                box3d: make_box(&record, d.center, d.size, d.yaw)?,
                score: d.score,
            });
        }
        out.insert(frame, list);
    }
    Ok(out)
}

pub fn load_detections(path: &Path) -> Result<DetectionSet, BenchmarkError> {
    parse_detections(&read_text(path)?, &path.display().to_string())
}

pub fn save_detections(path: &Path, dets: &DetectionSet) -> Result<(), BenchmarkError> {
    let raw = RawDetections {
        frames: dets
            .iter()
            .map(|(k, v)| {
                let list = v
                    .iter()
                    .map(|d| {
                        let (center, size, yaw) = box_fields(&d.box3d);
                        RawDetection {
                            category: d.category.to_string(),
                            center,
                            size,
                            yaw,
                            score: d.score,
                        }
                    })
                    .collect();
                (k.clone(), list)
            })
            .collect(),
    };
    write_json(path, &raw)
}

pub fn parse_drivable(text: &str, origin: &str) -> Result<BTreeMap<String, DrivableRegion>, BenchmarkError> {
    let raw: BTreeMap<String, DrivableRegion> = parse_json(text, origin)?;
    for (k, r) in &raw {
        if !r.ego_yaw.is_finite() || !r.ground_z.is_finite() {
            return Err(violation(format!("drivable[{k}]"), "non-finite ego_yaw or ground_z"));
        }
    }
    Ok(raw)
}

pub fn load_drivable(path: &Path) -> Result<BTreeMap<String, DrivableRegion>, BenchmarkError> {
    parse_drivable(&read_text(path)?, &path.display().to_string())
}

pub fn parse_instructions(text: &str, origin: &str) -> Result<Vec<EditInstruction>, BenchmarkError> {
    let raw: RawInstructions = parse_json(text, origin)?;
    raw.instructions
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let record = format!("instructions[{i}] ({})", r.token);
            if r.token.is_empty() || r.frame_token.is_empty() {
                return Err(violation(record, "empty token"));
            }
            let is_place = matches!(r.kind, EditKind::Place);
            if is_place != r.instance_token.is_empty() {
                return Err(violation(record, "instance_token must be empty exactly for placements"));
            }
            Ok(EditInstruction {
                category: category(&record, &r.category)?,
                box3d: make_box(&record, r.center, r.size, r.yaw)?,
                token: r.token,
                kind: r.kind,
                frame_token: r.frame_token,
                instance_token: r.instance_token,
            })
        })
        .collect()
}

pub fn load_instructions(path: &Path) -> Result<Vec<EditInstruction>, BenchmarkError> {
    parse_instructions(&read_text(path)?, &path.display().to_string())
}

pub fn save_instructions(path: &Path, instructions: &[EditInstruction]) -> Result<(), BenchmarkError> {
    let raw = RawInstructions {
        instructions: instructions
            .iter()
            .map(|e| {
                let (center, size, yaw) = box_fields(&e.box3d);
                RawInstruction {
                    token: e.token.clone(),
                    kind: e.kind,
                    frame_token: e.frame_token.clone(),
                    instance_token: e.instance_token.clone(),
                    category: e.category.to_string(),
                    center,
                    size,
                    yaw,
                }
            })
            .collect(),
    };
    write_json(path, &raw)
}
