//! Coarse inpainting masks from 3D boxes, with optional subtraction of occluding objects.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::geometry::{clipped_corner_cloud, Box3D, BoxSize, Camera, GeometryError, Pixel};
use crate::raster::{fill_box_faces, render_id_buffer, RasterError, RasterTarget};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaskError {
    #[error("every box corner is behind the near plane")]
    FullyBehindCamera,
    #[error("projected box outline is degenerate (collinear points)")]
    DegenerateProjection,
    #[error("target id {0} is not among the boxes")]
    UnknownTargetId(u32),
    #[error("mask size mismatch: expected {expected:?}, got {got:?}")]
    SizeMismatch { expected: (u32, u32), got: (u32, u32) },
    #[error("scale factors must be positive, got {0:?}")]
    NonPositiveFactor([f64; 3]),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize);
        Self { width, height, data }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![true; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_superset_of(&self, other: &BinaryMask) -> bool {
        self.size() == other.size() && self.data.iter().zip(&other.data).all(|(&a, &b)| a || !b)
    }
}

fn cross(o: Pixel, a: Pixel, b: Pixel) -> f64 {
    (a.u - o.u) * (b.v - o.v) - (a.v - o.v) * (b.u - o.u)
}

/// Andrew's monotone chain. Returns the hull without collinear points, positively oriented
/// (`cross > 0` turns); fewer than 3 points means the input is degenerate.
pub fn convex_hull(points: &[Pixel]) -> Vec<Pixel> {
    let mut pts: Vec<Pixel> = points.to_vec();
    pts.sort_by(|a, b| a.u.total_cmp(&b.u).then(a.v.total_cmp(&b.v)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Pixel> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Pixel>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Distance tolerance (pixels) of the inclusive point-in-hull test.
const HULL_EPS: f64 = 1e-9;

/// Inclusive containment test against a positively oriented convex polygon; `slack` is a
/// signed distance in pixels added to the boundary.
pub fn hull_contains(hull: &[Pixel], px: f64, py: f64, slack: f64) -> bool {
    let n = hull.len();
    (0..n).all(|i| {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let len = ((b.u - a.u).powi(2) + (b.v - a.v).powi(2)).sqrt();
        cross(a, b, Pixel::new(px, py)) >= -slack * len
    })
}

/// Rasterizes a positively oriented convex polygon (pixel centers, boundary inclusive).
pub fn fill_hull(hull: &[Pixel], width: u32, height: u32, slack: f64) -> BinaryMask {
    let mut mask = BinaryMask::new(width, height);
    if hull.len() < 3 {
        return mask;
    }
    let min_u = hull.iter().map(|p| p.u).fold(f64::INFINITY, f64::min);
    let max_u = hull.iter().map(|p| p.u).fold(f64::NEG_INFINITY, f64::max);
    let min_v = hull.iter().map(|p| p.v).fold(f64::INFINITY, f64::min);
    let max_v = hull.iter().map(|p| p.v).fold(f64::NEG_INFINITY, f64::max);
    let x0 = (min_u - 1.0).floor().max(0.0);
    let x1 = (max_u + 1.0).ceil().min(width as f64 - 1.0);
    let y0 = (min_v - 1.0).floor().max(0.0);
    let y1 = (max_v + 1.0).ceil().min(height as f64 - 1.0);
    if !(x0 <= x1 && y0 <= y1) {
        return mask;
    }
    for y in y0 as u32..=y1 as u32 {
        for x in x0 as u32..=x1 as u32 {
            if hull_contains(hull, x as f64, y as f64, slack) {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

/// Projected outline points of the box (corners in front of the near plane plus near-plane
/// edge crossings), in the pixel frame of `camera`.
pub fn projected_outline(camera: &Camera, b: &Box3D, z_near: f64) -> Result<Vec<Pixel>, MaskError> {
    let cloud = clipped_corner_cloud(camera, b, z_near);
    if cloud.is_empty() {
        return Err(MaskError::FullyBehindCamera);
    }
    cloud
        .iter()
        .map(|p| camera.project(p).map_err(MaskError::from))
        .collect()
}

/// Convex hull of the projected outline in the pixel frame of `camera` resized to `size`.
pub fn box_hull(
    camera: &Camera,
    b: &Box3D,
    size: (u32, u32),
    z_near: f64,
) -> Result<Vec<Pixel>, MaskError> {
    let cam = camera.resized(size.0, size.1);
    let hull = convex_hull(&projected_outline(&cam, b, z_near)?);
    if hull.len() < 3 {
        return Err(MaskError::DegenerateProjection);
    }
    Ok(hull)
}

/// Filled convex hull of the projected box, boundary inclusive.
pub fn hull_mask(
    camera: &Camera,
    b: &Box3D,
    size: (u32, u32),
    z_near: f64,
) -> Result<BinaryMask, MaskError> {
    let hull = box_hull(camera, b, size, z_near)?;
    Ok(fill_hull(&hull, size.0, size.1, HULL_EPS))
}

/// Id + depth render of every box in a frame, reusable across targets.
#[derive(Debug, Clone)]
pub struct OcclusionScene {
    camera: Camera,
    size: (u32, u32),
    z_near: f64,
    boxes: Vec<(u32, Box3D)>,
    all: RasterTarget,
}

impl OcclusionScene {
    pub fn new(
        camera: &Camera,
        boxes: &[(u32, Box3D)],
        size: (u32, u32),
        z_near: f64,
    ) -> Result<Self, MaskError> {
        let mut boxes = boxes.to_vec();
        // fixed draw order so equal-depth ties do not depend on input order
        boxes.sort_by_key(|(id, _)| *id);
        let all = render_id_buffer(camera, &boxes, size, z_near)?;
        Ok(Self {
            camera: camera.resized(size.0, size.1),
            size,
            z_near,
            boxes,
            all,
        })
    }

    pub fn id_buffer(&self) -> &RasterTarget {
        &self.all
    }

    /// Per-occluder count of target-hull pixels where that box is visible in front of
    /// the target's own reference depth.
    pub fn occluder_pixel_counts(&self, target_id: u32) -> Result<BTreeMap<u32, usize>, MaskError> {
        let (_, target) = self
            .boxes
            .iter()
            .find(|(id, _)| *id == target_id)
            .ok_or(MaskError::UnknownTargetId(target_id))?;
        let hull = hull_mask(&self.camera, target, self.size, self.z_near)?;
        let mut own = RasterTarget::new(self.size.0, self.size.1, 0, false);
        fill_box_faces(&mut own, &self.camera, target, self.z_near, None, |_, _| &[])?;
        let nearest = clipped_corner_cloud(&self.camera, target, self.z_near)
            .iter()
            .map(|p| p.z)
            .fold(f64::INFINITY, f64::min) as f32;
        let ids = self.all.ids().expect("id buffer");
        let depth = self.all.depth();
        let mut counts = BTreeMap::new();
        for (i, &inside) in hull.data().iter().enumerate() {
            if !inside {
                continue;
            }
            let id = ids[i];
            if id == 0 || id == target_id {
                continue;
            }
            let own_depth = own.depth()[i];
            let reference = if own_depth.is_finite() { own_depth } else { nearest };
            if depth[i] < reference {
                *counts.entry(id).or_insert(0) += 1;
            }
        }
        Ok(counts)
    }

    pub fn occluders(&self, target_id: u32, min_pixels: usize) -> Result<BTreeSet<u32>, MaskError> {
        Ok(self
            .occluder_pixel_counts(target_id)?
            .into_iter()
            .filter(|&(_, n)| n >= min_pixels.max(1))
            .map(|(id, _)| id)
            .collect())
    }
}

/// Ids of boxes that cover at least `min_pixels` of the target's hull in front of it.
pub fn find_occluders(
    camera: &Camera,
    target_id: u32,
    boxes: &[(u32, Box3D)],
    size: (u32, u32),
    z_near: f64,
    min_pixels: usize,
) -> Result<BTreeSet<u32>, MaskError> {
    if !boxes.iter().any(|(id, _)| *id == target_id) {
        return Err(MaskError::UnknownTargetId(target_id));
    }
    OcclusionScene::new(camera, boxes, size, z_near)?.occluders(target_id, min_pixels)
}

/// `hull AND NOT union(occluders)`.
pub fn occlusion_aware_mask(
    hull: &BinaryMask,
    occluders: &[BinaryMask],
) -> Result<BinaryMask, MaskError> {
    let mut out = hull.clone();
    for occ in occluders {
        if occ.size() != hull.size() {
            return Err(MaskError::SizeMismatch {
                expected: hull.size(),
                got: occ.size(),
            });
        }
        for (o, &c) in out.data.iter_mut().zip(&occ.data) {
            *o &= !c;
        }
    }
    Ok(out)
}

/// Scales the box size componentwise by `(fw, fl, fh)`, keeping center and yaw.
pub fn enlarge_box(b: &Box3D, factors: [f64; 3]) -> Result<Box3D, MaskError> {
    if !factors.iter().all(|&f| f > 0.0 && f.is_finite()) {
        return Err(MaskError::NonPositiveFactor(factors));
    }
    let s = b.size();
    Ok(b.with_size(BoxSize::new(s.w * factors[0], s.l * factors[1], s.h * factors[2]))?)
}
