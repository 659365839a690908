//! Deterministic software rasterizer.
//!
//! Triangles are sampled at integer pixel centers with a top-left tie rule. Edge functions
//! are evaluated with canonically ordered endpoints so two triangles sharing an edge see
//! bit-identical values of opposite sign, which makes shared edges watertight without
//! fixed-point snapping. Depth is interpolated perspective-correctly (linear in `1/z`).

use thiserror::Error;

use crate::geometry::{
    clip_polygon_near, face_visible, Box3D, Camera, CameraPoint, Face, GeometryError, Pixel,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RasterError {
    #[error("color has {got} components but the target has {expected} channels")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate instance id {0}")]
    DuplicateId(u32),
    #[error("instance id 0 is reserved for background")]
    ZeroId,
    #[error("invalid raster parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Color planes, depth buffer and optional instance-id buffer of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterTarget {
    width: u32,
    height: u32,
    channels: usize,
    color: Vec<f32>,
    depth: Vec<f32>,
    id: Option<Vec<u32>>,
}

impl RasterTarget {
    pub fn new(width: u32, height: u32, channels: usize, with_id: bool) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            channels,
            color: vec![0.0; n * channels],
            depth: vec![f32::INFINITY; n],
            id: with_id.then(|| vec![0; n]),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn color_at(&self, x: u32, y: u32) -> &[f32] {
        let i = self.index(x, y) * self.channels;
        &self.color[i..i + self.channels]
    }

    pub fn depth_at(&self, x: u32, y: u32) -> f32 {
        self.depth[self.index(x, y)]
    }

    pub fn id_at(&self, x: u32, y: u32) -> Option<u32> {
        let i = self.index(x, y);
        self.id.as_ref().map(|ids| ids[i])
    }

    /// Channel-last color data.
    pub fn color(&self) -> &[f32] {
        &self.color
    }

    pub fn depth(&self) -> &[f32] {
        &self.depth
    }

    pub fn ids(&self) -> Option<&[u32]> {
        self.id.as_deref()
    }

    pub fn into_color(self) -> Vec<f32> {
        self.color
    }

    /// Pixels that hold a z-buffered surface.
    pub fn covered(&self) -> Vec<bool> {
        self.depth.iter().map(|d| d.is_finite()).collect()
    }

    fn check_color(&self, color: &[f32]) -> Result<(), RasterError> {
        if color.len() != self.channels {
            return Err(RasterError::DimensionMismatch {
                expected: self.channels,
                got: color.len(),
            });
        }
        Ok(())
    }

    fn put_color(&mut self, i: usize, color: &[f32]) {
        let c = self.channels;
        self.color[i * c..(i + 1) * c].copy_from_slice(color);
    }
}

#[inline]
fn orient(a: Pixel, b: Pixel, px: f64, py: f64) -> f64 {
    (b.u - a.u) * (py - a.v) - (b.v - a.v) * (px - a.u)
}

/// Edge function of the directed edge `a -> b` evaluated with the endpoints in canonical
/// order, so `edge(a, b, p) == -edge(b, a, p)` bit for bit.
#[inline]
fn edge(a: Pixel, b: Pixel, px: f64, py: f64) -> f64 {
    if (a.u, a.v) <= (b.u, b.v) {
        orient(a, b, px, py)
    } else {
        -orient(b, a, px, py)
    }
}

/// Top or left edge of a triangle with positive `orient` area (y pointing down).
#[inline]
fn is_top_left(a: Pixel, b: Pixel) -> bool {
    let dx = b.u - a.u;
    let dy = b.v - a.v;
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

/// Calls `visit(x, y, weights)` for every pixel center covered by the 2D triangle, with
/// barycentric weights of the original vertex order. Degenerate triangles cover nothing.
pub fn triangle_coverage(
    tri: [Pixel; 3],
    width: u32,
    height: u32,
    mut visit: impl FnMut(u32, u32, [f64; 3]),
) {
    let [p0, mut p1, mut p2] = tri;
    let area = edge(p0, p1, p2.u, p2.v);
    if area == 0.0 || !area.is_finite() || width == 0 || height == 0 {
        return;
    }
    let swapped = area < 0.0;
    if swapped {
        std::mem::swap(&mut p1, &mut p2);
    }
    let min_u = p0.u.min(p1.u).min(p2.u);
    let max_u = p0.u.max(p1.u).max(p2.u);
    let min_v = p0.v.min(p1.v).min(p2.v);
    let max_v = p0.v.max(p1.v).max(p2.v);
    let x0 = min_u.ceil().max(0.0);
    let x1 = max_u.floor().min(width as f64 - 1.0);
    let y0 = min_v.ceil().max(0.0);
    let y1 = max_v.floor().min(height as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let (x0, x1, y0, y1) = (x0 as u32, x1 as u32, y0 as u32, y1 as u32);
    let tl = [is_top_left(p1, p2), is_top_left(p2, p0), is_top_left(p0, p1)];
    for y in y0..=y1 {
        let py = y as f64;
        for x in x0..=x1 {
            let px = x as f64;
            let e = [edge(p1, p2, px, py), edge(p2, p0, px, py), edge(p0, p1, px, py)];
            let inside = e
                .iter()
                .zip(tl)
                .all(|(&ei, top_left)| ei > 0.0 || (ei == 0.0 && top_left));
            if !inside {
                continue;
            }
            let sum = e[0] + e[1] + e[2];
            let mut w = [e[0] / sum, e[1] / sum, e[2] / sum];
            if swapped {
                w.swap(1, 2);
            }
            visit(x, y, w);
        }
    }
}

/// Z-buffered, perspective-correct triangle fill. Every covered pixel whose interpolated
/// depth is strictly below the stored depth receives `color`, the depth and `id`.
pub fn fill_triangle(
    target: &mut RasterTarget,
    tri: &[CameraPoint; 3],
    color: &[f32],
    camera: &Camera,
    id: Option<u32>,
) -> Result<(), RasterError> {
    target.check_color(color)?;
    let px = [
        camera.project(&tri[0])?,
        camera.project(&tri[1])?,
        camera.project(&tri[2])?,
    ];
    let inv_z = [1.0 / tri[0].z, 1.0 / tri[1].z, 1.0 / tri[2].z];
    let (w, h) = (target.width, target.height);
    triangle_coverage(px, w, h, |x, y, b| {
        let z = 1.0 / (b[0] * inv_z[0] + b[1] * inv_z[1] + b[2] * inv_z[2]);
        let z = z as f32;
        let i = target.index(x, y);
        if z < target.depth[i] {
            target.depth[i] = z;
            target.put_color(i, color);
            if let (Some(ids), Some(id)) = (target.id.as_mut(), id) {
                ids[i] = id;
            }
        }
    });
    Ok(())
}

/// Fills a convex camera-space polygon (already near-clipped) as a triangle fan.
pub fn fill_convex_polygon(
    target: &mut RasterTarget,
    poly: &[CameraPoint],
    color: &[f32],
    camera: &Camera,
    id: Option<u32>,
) -> Result<(), RasterError> {
    target.check_color(color)?;
    for k in 1..poly.len().saturating_sub(1) {
        fill_triangle(target, &[poly[0], poly[k], poly[k + 1]], color, camera, id)?;
    }
    Ok(())
}

/// Rasterizes the camera-facing faces of a box with z-buffering. `shade(face, tri)` picks
/// the color of each of the two triangles of a face. Back faces of a closed convex box
/// never win the depth test, so they are culled up front.
pub fn fill_box_faces<'c>(
    target: &mut RasterTarget,
    camera: &Camera,
    b: &Box3D,
    z_near: f64,
    id: Option<u32>,
    mut shade: impl FnMut(Face, usize) -> &'c [f32],
) -> Result<(), RasterError> {
    let corners = b.camera_corners(camera);
    for face in Face::ALL {
        if !face_visible(&corners, face) {
            continue;
        }
        for (t, tri) in face.triangles().iter().enumerate() {
            let verts = [corners[tri[0]], corners[tri[1]], corners[tri[2]]];
            let poly = clip_polygon_near(&verts, z_near);
            if poly.len() >= 3 {
                fill_convex_polygon(target, &poly, shade(face, t), camera, id)?;
            }
        }
    }
    Ok(())
}

/// Squared distance from `(px, py)` to segment `a-b`.
pub fn dist_sq_to_segment(a: Pixel, b: Pixel, px: f64, py: f64) -> f64 {
    let dx = b.u - a.u;
    let dy = b.v - a.v;
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq > 0.0 {
        (((px - a.u) * dx + (py - a.v) * dy) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let ex = a.u + t * dx - px;
    let ey = a.v + t * dy - py;
    ex * ex + ey * ey
}

/// Overlay line drawing: every pixel center within `width_px / 2` of a segment gets
/// `color`, regardless of depth.
pub fn draw_polyline(
    target: &mut RasterTarget,
    points: &[Pixel],
    color: &[f32],
    width_px: f32,
) -> Result<(), RasterError> {
    target.check_color(color)?;
    if !(width_px >= 1.0) {
        return Err(RasterError::InvalidParameter(format!(
            "line width must be >= 1, got {width_px}"
        )));
    }
    let r = width_px as f64 / 2.0;
    let segments: Vec<(Pixel, Pixel)> = match points.len() {
        0 => return Ok(()),
        1 => vec![(points[0], points[0])],
        _ => points.windows(2).map(|w| (w[0], w[1])).collect(),
    };
    let (w, h) = (target.width as f64, target.height as f64);
    for (a, b) in segments {
        let x0 = (a.u.min(b.u) - r).ceil().max(0.0);
        let x1 = (a.u.max(b.u) + r).floor().min(w - 1.0);
        let y0 = (a.v.min(b.v) - r).ceil().max(0.0);
        let y1 = (a.v.max(b.v) + r).floor().min(h - 1.0);
        if !(x0 <= x1 && y0 <= y1) {
            continue;
        }
        for y in y0 as u32..=y1 as u32 {
            for x in x0 as u32..=x1 as u32 {
                if dist_sq_to_segment(a, b, x as f64, y as f64) <= r * r {
                    let i = target.index(x, y);
                    target.put_color(i, color);
                }
            }
        }
    }
    Ok(())
}

/// Screen-space disc standing in for a sphere of radius `radius_m` around `center`.
///
/// The pixel radius follows the pinhole law `fx * radius_m / z`; the disc is depth-tested
/// at the sphere's camera-facing pole `z - radius_m`. Discs smaller than half a pixel
/// still write the nearest pixel.
pub fn draw_disc(
    target: &mut RasterTarget,
    center: &CameraPoint,
    radius_m: f64,
    color: &[f32],
    camera: &Camera,
) -> Result<(), RasterError> {
    target.check_color(color)?;
    if !(radius_m > 0.0) {
        return Err(RasterError::InvalidParameter(format!(
            "disc radius must be positive, got {radius_m}"
        )));
    }
    let c = camera.project(center)?;
    let r = camera.fx * radius_m / center.z;
    let depth = ((center.z - radius_m).max(f64::MIN_POSITIVE)) as f32;
    let (w, h) = (target.width as f64, target.height as f64);
    let plot = |t: &mut RasterTarget, x: u32, y: u32| {
        let i = t.index(x, y);
        if depth < t.depth[i] {
            t.depth[i] = depth;
            t.put_color(i, color);
        }
    };
    if r < 0.5 {
        let (x, y) = (c.u.round(), c.v.round());
        if x >= 0.0 && y >= 0.0 && x < w && y < h {
            plot(target, x as u32, y as u32);
        }
        return Ok(());
    }
    let x0 = (c.u - r).ceil().max(0.0);
    let x1 = (c.u + r).floor().min(w - 1.0);
    let y0 = (c.v - r).ceil().max(0.0);
    let y1 = (c.v + r).floor().min(h - 1.0);
    if !(x0 <= x1 && y0 <= y1) {
        return Ok(());
    }
    for y in y0 as u32..=y1 as u32 {
        for x in x0 as u32..=x1 as u32 {
            let dx = x as f64 - c.u;
            let dy = y as f64 - c.v;
            if dx * dx + dy * dy <= r * r {
                plot(target, x, y);
            }
        }
    }
    Ok(())
}

/// Renders every box untextured into an id + depth target of `size`; the id plane holds
/// the nearest box per pixel (0 = background).
pub fn render_id_buffer(
    camera: &Camera,
    boxes: &[(u32, Box3D)],
    size: (u32, u32),
    z_near: f64,
) -> Result<RasterTarget, RasterError> {
    let mut seen = std::collections::BTreeSet::new();
    for (id, _) in boxes {
        if *id == 0 {
            return Err(RasterError::ZeroId);
        }
        if !seen.insert(*id) {
            return Err(RasterError::DuplicateId(*id));
        }
    }
    let cam = camera.resized(size.0, size.1);
    let mut target = RasterTarget::new(size.0, size.1, 0, true);
    for (id, b) in boxes {
        fill_box_faces(&mut target, &cam, b, z_near, Some(*id), |_, _| &[])?;
    }
    Ok(target)
}
