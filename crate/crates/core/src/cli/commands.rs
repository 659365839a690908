use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{Command, Outcome, RunConfig, TargetSpec};
use crate::benchmark::{
    filter_by_detector, filter_instances, generate_placements, load_annotations, load_detections,
    load_drivable, load_instructions, make_edit, pair_frames, save_instructions, Category, Dataset,
    FrameRecord,
};
use crate::conditioning::{
    encode_corners_25d, encode_corners_2d, render_box_depthmap, render_pose_layers,
    render_six_channel, render_visible_faces, ConditioningError, ConditioningMap, Palette, Variant,
};
use crate::crops::{apply_crop, bbox2d_of, square_crop_spec, CropError, CropSpec};
use crate::formats::{read_feat, read_mask_png, read_png, write_cmap, write_depth_png, write_mask_png, write_png, write_rgb_png};
use crate::geometry::{Box3D, Camera, GeometryError};
use crate::masks::{hull_mask, occlusion_aware_mask, MaskError, OcclusionScene};
use crate::metrics::{aggregate, frechet_distance, score_instruction, InstanceResult};

/// One box to process: an existing instance (possibly edited) or an instruction.
#[derive(Debug, Clone)]
struct Target {
    token: String,
    frame: FrameRecord,
    instance_token: String,
    category: Category,
    box3d: Box3D,
}

/// Per-target result of a command that may skip targets.
enum Step {
    Done,
    Skipped(String),
    Degraded(String),
}

pub(super) fn dispatch(command: &Command, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    write_json(&cfg.out.join("config.json"), &cfg.echo())?;
    match command {
        Command::Render => cmd_render(cfg),
        Command::Mask => cmd_mask(cfg),
        Command::Crop => cmd_crop(cfg),
        Command::Filter => cmd_filter(cfg),
        Command::Place => cmd_place(cfg),
        Command::Eval => cmd_eval(cfg),
        Command::Fid { a, b } => {
            let [a, b] = match (a, b, &cfg.fid) {
                (Some(a), Some(b), _) => [a.clone(), b.clone()],
                (None, None, Some(pair)) => pair.clone(),
                _ => bail!("fid needs two feature files"),
            };
            cmd_fid(cfg, &a, &b)
        }
    }
}

/// File-name-safe form of a token.
pub fn sanitize(token: &str) -> String {
    token
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_dataset(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    let path = cfg.require(&cfg.annotations, "annotations")?;
    Ok(load_annotations(path)?)
}

fn collect_targets(cfg: &RunConfig, data: &Dataset) -> anyhow::Result<Vec<Target>> {
    let frames = data.frame_map();
    if let Some(path) = &cfg.instructions {
        return load_instructions(path)?
            .into_iter()
            .map(|ins| {
                let frame = frames
                    .get(&ins.frame_token)
                    .ok_or_else(|| anyhow!("instruction {}: unknown frame {}", ins.token, ins.frame_token))?;
                Ok(Target {
                    token: ins.token,
                    frame: frame.clone(),
                    instance_token: ins.instance_token,
                    category: ins.category,
                    box3d: ins.box3d,
                })
            })
            .collect();
    }
    let instances = match &cfg.targets {
        TargetSpec::Filtered => filter_instances(&data.instances, &frames, &cfg.filter),
        TargetSpec::Tokens(tokens) => tokens
            .iter()
            .map(|t| {
                data.instances
                    .iter()
                    .find(|i| &i.instance_token == t)
                    .cloned()
                    .ok_or_else(|| anyhow!("unknown instance {t}"))
            })
            .collect::<anyhow::Result<_>>()?,
    };
    let op = cfg.edit_op();
    instances
        .into_iter()
        .map(|inst| {
            let (token, box3d) = match op {
                Some(op) => {
                    let e = make_edit(&inst, op).with_context(|| format!("instance {}", inst.instance_token))?;
                    (e.token, e.box3d)
                }
                None => (inst.instance_token.clone(), inst.box3d),
            };
            Ok(Target {
                token,
                frame: frames[&inst.frame_token].clone(),
                instance_token: inst.instance_token,
                category: inst.category,
                box3d,
            })
        })
        .collect()
}

fn crop_for(cfg: &RunConfig, t: &Target) -> Result<CropSpec, CropError> {
    let cam = &t.frame.camera;
    let rect = bbox2d_of(cam, &t.box3d, cfg.style.z_near)?.clamped(cam.width, cam.height);
    square_crop_spec(&rect, (cam.width, cam.height), cfg.crop_factor, cfg.out_edge())
}

/// Runs `work` on every target in parallel and reports skips in target order.
fn run_targets(
    targets: &[Target],
    work: impl Fn(&Target) -> anyhow::Result<Step> + Sync,
) -> anyhow::Result<Outcome> {
    let steps: Vec<_> = targets
        .par_iter()
        .map(|t| work(t).with_context(|| format!("target {}", t.token)))
        .collect();
    let mut outcome = Outcome::Success;
    let mut done = 0;
    for (t, s) in targets.iter().zip(steps) {
        match s? {
            Step::Done => done += 1,
            Step::Skipped(why) => {
                eprintln!("skipped {}: {why}", t.token);
                outcome = Outcome::Partial;
            }
            Step::Degraded(why) => {
                eprintln!("warning {}: {why}", t.token);
                done += 1;
                outcome = Outcome::Partial;
            }
        }
    }
    println!("{done}/{} targets written", targets.len());
    Ok(outcome)
}

fn skippable_conditioning(e: &ConditioningError) -> bool {
    matches!(
        e,
        ConditioningError::FullyBehindCamera | ConditioningError::Geometry(GeometryError::NonPositiveDepth(_))
    )
}

fn skippable_crop(e: &CropError) -> bool {
    matches!(e, CropError::FullyBehindCamera | CropError::DegenerateRect(_))
}

enum Rendered {
    Map(ConditioningMap),
    Tokens(Vec<f64>),
}

fn render_variant(cfg: &RunConfig, cam: &Camera, b: &Box3D, size: (u32, u32), palette: &Palette) -> Result<Rendered, ConditioningError> {
    let z = cfg.style.z_near;
    Ok(match cfg.variant {
        Variant::PoseMap => Rendered::Map(render_pose_layers(cam, b, palette, size, &cfg.style)?.map),
        Variant::SixChannel => Rendered::Map(render_six_channel(cam, b, size, z)?),
        Variant::Faces => Rendered::Map(render_visible_faces(cam, b, palette, size, z)?),
        Variant::BoxDepth => Rendered::Map(render_box_depthmap(cam, b, size, z)?),
        Variant::Corners2d => Rendered::Tokens(encode_corners_2d(&cam.resized(size.0, size.1), b)?.to_vec()),
        Variant::Corners25d => Rendered::Tokens(encode_corners_25d(&cam.resized(size.0, size.1), b)?.to_vec()),
    })
}

fn cmd_render(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let data = load_dataset(cfg)?;
    let targets = collect_targets(cfg, &data)?;
    let palette = Palette::default();
    let palette_hash = palette.hash();
    let uses_palette = matches!(cfg.variant, Variant::PoseMap | Variant::Faces);
    run_targets(&targets, |t| {
        let (cam, size, crop) = if cfg.cropped {
            let spec = match crop_for(cfg, t) {
                Ok(s) => s,
                Err(e) if skippable_crop(&e) => return Ok(Step::Skipped(e.to_string())),
                Err(e) => return Err(e.into()),
            };
            (spec.window_camera(&t.frame.camera), (spec.out_edge, spec.out_edge), Some(spec))
        } else {
            let c = &t.frame.camera;
            let size = cfg.size.map_or((c.width, c.height), |[w, h]| (w, h));
            (c.clone(), size, None)
        };
        let rendered = match render_variant(cfg, &cam, &t.box3d, size, &palette) {
            Ok(r) => r,
            Err(e) if skippable_conditioning(&e) => return Ok(Step::Skipped(e.to_string())),
            Err(e) => return Err(e.into()),
        };
        let stem = sanitize(&t.token);
        let file = match rendered {
            Rendered::Map(mut map) => {
                if let Some(spec) = &crop {
                    map.retain(|x, y| spec.samples_frame(x, y));
                }
                match cfg.variant {
                    Variant::SixChannel => {
                        let f = format!("{stem}.cmap");
                        write_cmap(&cfg.out.join(&f), &map)?;
                        f
                    }
                    Variant::BoxDepth => {
                        let f = format!("{stem}.png");
                        write_depth_png(&cfg.out.join(&f), &map)?;
                        f
                    }
                    _ => {
                        let f = format!("{stem}.png");
                        write_rgb_png(&cfg.out.join(&f), &map)?;
                        f
                    }
                }
            }
            Rendered::Tokens(values) => {
                let f = format!("{stem}.tokens.json");
                write_json(&cfg.out.join(&f), &json!({ "token": t.token, "values": values }))?;
                f
            }
        };
        write_json(
            &cfg.out.join(format!("{stem}.json")),
            &json!({
                "token": t.token,
                "instance_token": t.instance_token,
                "frame_token": t.frame.frame_token,
                "category": t.category,
                "variant": cfg.variant,
                "palette_hash": uses_palette.then_some(&palette_hash),
                "crop": crop,
                "width": size.0,
                "height": size.1,
                "file": file,
            }),
        )?;
        Ok(Step::Done)
    })
}

fn cmd_mask(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let data = load_dataset(cfg)?;
    let targets = collect_targets(cfg, &data)?;
    let z = cfg.style.z_near;
    run_targets(&targets, |t| {
        let cam = &t.frame.camera;
        let size = (cam.width, cam.height);
        let hull = match hull_mask(cam, &t.box3d, size, z) {
            Ok(h) => h,
            Err(e @ (MaskError::FullyBehindCamera | MaskError::DegenerateProjection)) => {
                return Ok(Step::Skipped(e.to_string()))
            }
            Err(e) => return Err(e.into()),
        };

        // scene ids follow token order; the target replaces its own instance
        let mut frame_insts: Vec<_> = data.instances_in_frame(&t.frame.frame_token).collect();
        frame_insts.sort_by(|a, b| a.instance_token.cmp(&b.instance_token));
        let mut tokens: Vec<String> = Vec::new();
        let mut boxes: Vec<(u32, Box3D)> = Vec::new();
        let mut target_id = None;
        for (i, inst) in frame_insts.iter().enumerate() {
            let id = i as u32 + 1;
            if inst.instance_token == t.instance_token {
                target_id = Some(id);
                boxes.push((id, t.box3d));
            } else {
                boxes.push((id, inst.box3d));
            }
            tokens.push(inst.instance_token.clone());
        }
        let target_id = target_id.unwrap_or_else(|| {
            let id = boxes.len() as u32 + 1;
            boxes.push((id, t.box3d));
            tokens.push(t.token.clone());
            id
        });
        let scene = OcclusionScene::new(cam, &boxes, size, z)?;
        let occluders: Vec<String> = scene
            .occluders(target_id, cfg.min_occluder_pixels)?
            .into_iter()
            .map(|id| tokens[id as usize - 1].clone())
            .collect();

        let stem = sanitize(&t.token);
        write_mask_png(&cfg.out.join(format!("{stem}_hull.png")), &hull)?;
        let mut missing = Vec::new();
        let mut occlusion_pixels = None;
        let mut occlusion_file = None;
        if let Some(dir) = &cfg.occluder_masks {
            let mut masks = Vec::new();
            for tok in &occluders {
                let p = dir.join(format!("{}.png", sanitize(tok)));
                if p.is_file() {
                    masks.push(read_mask_png(&p)?);
                } else {
                    missing.push(tok.clone());
                }
            }
            if missing.is_empty() {
                let m = occlusion_aware_mask(&hull, &masks)?;
                let f = format!("{stem}_occlusion.png");
                write_mask_png(&cfg.out.join(&f), &m)?;
                occlusion_pixels = Some(m.count());
                occlusion_file = Some(f);
            }
        }
        write_json(
            &cfg.out.join(format!("{stem}_mask.json")),
            &json!({
                "token": t.token,
                "frame_token": t.frame.frame_token,
                "occluders": occluders,
                "missing_occluder_masks": missing,
                "hull_pixels": hull.count(),
                "occlusion_pixels": occlusion_pixels,
                "hull_file": format!("{stem}_hull.png"),
                "occlusion_file": occlusion_file,
            }),
        )?;
        if missing.is_empty() {
            Ok(Step::Done)
        } else {
            Ok(Step::Degraded(format!("missing occluder masks for {}; wrote hull mask only", missing.join(", "))))
        }
    })
}

fn image_root(cfg: &RunConfig) -> PathBuf {
    cfg.images.clone().unwrap_or_else(|| {
        cfg.annotations
            .as_deref()
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default()
    })
}

fn cmd_crop(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let data = load_dataset(cfg)?;
    let targets = collect_targets(cfg, &data)?;
    let root = image_root(cfg);
    run_targets(&targets, |t| {
        let spec = match crop_for(cfg, t) {
            Ok(s) => s,
            Err(e) if skippable_crop(&e) => return Ok(Step::Skipped(e.to_string())),
            Err(e) => return Err(e.into()),
        };
        let path = root.join(&t.frame.image_path);
        let image = read_png(&path).with_context(|| format!("reading {}", path.display()))?;
        let crop = apply_crop(&image, &spec)?;
        let stem = sanitize(&t.token);
        write_png(&cfg.out.join(format!("{stem}_crop.png")), &crop)?;
        write_json(
            &cfg.out.join(format!("{stem}_crop.json")),
            &json!({ "token": t.token, "frame_token": t.frame.frame_token, "crop": spec }),
        )?;
        Ok(Step::Done)
    })
}

fn cmd_filter(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let data = load_dataset(cfg)?;
    let mut kept = filter_instances(&data.instances, &data.frame_map(), &cfg.filter);
    let by_rules = kept.len();
    if let Some(p) = &cfg.detections {
        let dets = load_detections(p)?;
        kept = filter_by_detector(&kept, &dets, cfg.detector_yaw_threshold, cfg.match_distance);
    }
    let tokens: Vec<_> = kept.iter().map(|i| i.instance_token.clone()).collect();
    write_json(
        &cfg.out.join("instances.json"),
        &json!({ "count": tokens.len(), "instances": tokens, "passed_rules": by_rules, "total": data.instances.len() }),
    )?;
    println!("{} of {} instances kept", tokens.len(), data.instances.len());
    Ok(Outcome::Success)
}

fn cmd_place(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let data = load_dataset(cfg)?;
    let drivable = load_drivable(cfg.require(&cfg.drivable, "drivable")?)?;
    let (paired, missing) = pair_frames(&data.frames, &drivable);
    let out = generate_placements(&paired, &cfg.placement);
    save_instructions(&cfg.out.join("instructions.json"), &out.instructions)?;
    let mut failures: BTreeMap<String, String> = missing
        .into_iter()
        .map(|f| (f, "no drivable region".to_string()))
        .collect();
    failures.extend(out.failures.iter().map(|(f, e)| (f.clone(), e.to_string())));
    write_json(
        &cfg.out.join("placement.json"),
        &json!({
            "count": out.instructions.len(),
            "frames": data.frames.len(),
            "failures": failures,
            "fallbacks": out.fallbacks,
        }),
    )?;
    for (f, why) in &failures {
        eprintln!("frame {f}: {why}");
    }
    println!("{}", out.instructions.len());
    Ok(if failures.is_empty() { Outcome::Success } else { Outcome::Partial })
}

fn cmd_eval(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let instructions = load_instructions(cfg.require(&cfg.instructions, "instructions")?)?;
    let dets = load_detections(cfg.require(&cfg.detections, "detections")?)?;
    let results: Vec<InstanceResult> = instructions
        .par_iter()
        .map(|ins| {
            let list = dets
                .get(&ins.token)
                .or_else(|| dets.get(&ins.frame_token))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            score_instruction(ins, list, cfg.match_distance).with_context(|| format!("instruction {}", ins.token))
        })
        .collect::<anyhow::Result<_>>()?;
    let mut report = aggregate(&results);
    if let Some([a, b]) = &cfg.fid {
        report.fid = Some(frechet_distance(&read_feat(a)?, &read_feat(b)?)?);
    }
    write_json(&cfg.out.join("results.json"), &results)?;
    write_json(&cfg.out.join("report.json"), &report.to_json(cfg.metric_mode))?;
    let table = report.to_table(cfg.metric_mode);
    fs::write(cfg.out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(Outcome::Success)
}

fn cmd_fid(cfg: &RunConfig, a: &Path, b: &Path) -> anyhow::Result<Outcome> {
    let (fa, fb) = (read_feat(a)?, read_feat(b)?);
    if fa.dim() != fb.dim() {
        bail!("feature dimensions differ: {} vs {}", fa.dim(), fb.dim());
    }
    let d = frechet_distance(&fa, &fb)?;
    write_json(
        &cfg.out.join("fid.json"),
        &json!({ "a": fa.source, "b": fb.source, "n_a": fa.len(), "n_b": fb.len(), "dim": fa.dim(), "fid": d }),
    )?;
    println!("{d}");
    Ok(Outcome::Success)
}
