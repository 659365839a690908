//! Coordinate conventions, pinhole camera, yaw-only 3D boxes and near-plane clipping.
//!
//! Conventions used throughout the crate:
//!
//! * world frame is z-up;
//! * camera frame is x-right, y-down, z-forward;
//! * a box's local +x is its forward (length) axis, +y its left (width) axis and +z up;
//! * pixel `(i, j)` has its sample center at continuous coordinates `(i, j)`, so an image
//!   of width `W` spans `[-0.5, W - 0.5]` horizontally.

use std::f64::consts::{PI, TAU};

use nalgebra::{Isometry3, Point3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default near plane distance in meters.
pub const DEFAULT_Z_NEAR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point has non-positive depth z = {0}")]
    NonPositiveDepth(f64),
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
}

/// A point in the camera frame (meters, x right, y down, z forward).
pub type CameraPoint = Point3<f64>;

/// Continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Pinhole camera with a rigid world-to-camera pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pose: Isometry3<f64>,
}

impl Camera {
    /// Builds a camera from intrinsics and a world-to-camera rotation `[w, x, y, z]` and
    /// translation. The quaternion is normalized unless it already has unit norm to
    /// machine precision, which keeps load/save cycles bit-stable.
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: [f64; 4],
        translation: [f64; 3],
    ) -> Result<Self, GeometryError> {
        let all = [fx, fy, cx, cy]
            .into_iter()
            .chain(rotation)
            .chain(translation);
        if let Some(bad) = all.into_iter().find(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite(bad));
        }
        if !(fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidCamera(format!(
                "image size must be at least 1x1, got {width}x{height}"
            )));
        }
        let q = Quaternion::new(rotation[0], rotation[1], rotation[2], rotation[3]);
        let norm_sq = q.norm_squared();
        if norm_sq < 1e-24 {
            return Err(GeometryError::InvalidCamera("zero rotation quaternion".into()));
        }
        let rotation = if (norm_sq - 1.0).abs() <= 4.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        let pose = Isometry3::from_parts(Translation3::from(Vector3::from(translation)), rotation);
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            pose,
        })
    }

    /// Camera with identity pose (world frame equals camera frame).
    pub fn from_intrinsics(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        Self::new(fx, fy, cx, cy, width, height, [1.0, 0.0, 0.0, 0.0], [0.0; 3])
    }

    pub fn pose(&self) -> &Isometry3<f64> {
        &self.pose
    }

    /// Rotation as `[w, x, y, z]`.
    pub fn rotation_wxyz(&self) -> [f64; 4] {
        let q = self.pose.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn translation(&self) -> [f64; 3] {
        let t = self.pose.translation.vector;
        [t.x, t.y, t.z]
    }

    /// Optical center in world coordinates.
    pub fn center_world(&self) -> Point3<f64> {
        self.pose.inverse_transform_point(&Point3::origin())
    }

    pub fn world_to_camera(&self, p: &Point3<f64>) -> CameraPoint {
        self.pose.transform_point(p)
    }

    pub fn camera_to_world(&self, p: &CameraPoint) -> Point3<f64> {
        self.pose.inverse_transform_point(p)
    }

    /// Pinhole projection. Points at or behind the camera plane must be clipped first.
    pub fn project(&self, p: &CameraPoint) -> Result<Pixel, GeometryError> {
        if !(p.z > 0.0) {
            return Err(GeometryError::NonPositiveDepth(p.z));
        }
        Ok(Pixel::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Same camera pose, intrinsics rescaled to a `width x height` image.
    pub fn resized(&self, width: u32, height: u32) -> Self {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: (self.cx + 0.5) * sx - 0.5,
            cy: (self.cy + 0.5) * sy - 0.5,
            width: width.max(1),
            height: height.max(1),
            pose: self.pose,
        }
    }

    /// Camera whose image is the square window `[left, left + edge)` x `[top, top + edge)`
    /// of this camera's image, resampled to `out_edge` pixels per side with half-pixel
    /// center alignment.
    pub fn windowed(&self, left: f64, top: f64, edge: f64, out_edge: u32) -> Self {
        let s = out_edge as f64 / edge;
        Self {
            fx: self.fx * s,
            fy: self.fy * s,
            cx: (self.cx - left + 0.5) * s - 0.5,
            cy: (self.cy - top + 0.5) * s - 0.5,
            width: out_edge,
            height: out_edge,
            pose: self.pose,
        }
    }
}

/// Box dimensions in meters: width along local y, length along local x, height along z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSize {
    pub w: f64,
    pub l: f64,
    pub h: f64,
}

impl BoxSize {
    pub fn new(w: f64, l: f64, h: f64) -> Self {
        Self { w, l, h }
    }

    pub fn min_extent(&self) -> f64 {
        self.w.min(self.l).min(self.h)
    }
}

/// One of the six box faces, in local-frame terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Face {
    /// +x
    Front,
    /// -x
    Back,
    /// +y
    Left,
    /// -y
    Right,
    /// +z
    Top,
    /// -z
    Bottom,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::Front,
        Face::Back,
        Face::Left,
        Face::Right,
        Face::Top,
        Face::Bottom,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Corner indices counter-clockwise when seen from outside the box, so the right-hand
    /// normal of `(c0, c1, c2)` points outward.
    pub fn corners(self) -> [usize; 4] {
        FACE_CORNERS[self.index()]
    }

    /// The two triangles the face is split into, sharing the `c0-c2` diagonal.
    pub fn triangles(self) -> [[usize; 3]; 2] {
        let [a, b, c, d] = self.corners();
        [[a, b, c], [a, c, d]]
    }

    pub fn name(self) -> &'static str {
        match self {
            Face::Front => "front",
            Face::Back => "back",
            Face::Left => "left",
            Face::Right => "right",
            Face::Top => "top",
            Face::Bottom => "bottom",
        }
    }
}

// corner index = (x < 0) | (y < 0) << 1 | (z < 0) << 2
const FACE_CORNERS: [[usize; 4]; 6] = [
    [6, 4, 0, 2],
    [3, 1, 5, 7],
    [5, 1, 0, 4],
    [6, 2, 3, 7],
    [3, 2, 0, 1],
    [5, 4, 6, 7],
];

/// The 12 box edges as corner index pairs: four along x, four along y, four along z.
pub const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Oriented 3D bounding box, rotated by `yaw` about world +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    center: Point3<f64>,
    size: BoxSize,
    yaw: f64,
}

impl Box3D {
    pub fn new(center: [f64; 3], size: BoxSize, yaw: f64) -> Result<Self, GeometryError> {
        for v in center.into_iter().chain([size.w, size.l, size.h, yaw]) {
            if !v.is_finite() {
                return Err(GeometryError::NonFinite(v));
            }
        }
        if !(size.w > 0.0 && size.l > 0.0 && size.h > 0.0) {
            return Err(GeometryError::InvalidBox(format!(
                "size must be positive, got w={} l={} h={}",
                size.w, size.l, size.h
            )));
        }
        Ok(Self {
            center: Point3::from(center),
            size,
            yaw: normalize_angle(yaw)?,
        })
    }

    pub fn center(&self) -> Point3<f64> {
        self.center
    }

    pub fn size(&self) -> BoxSize {
        self.size
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn with_yaw(&self, yaw: f64) -> Result<Self, GeometryError> {
        Self::new(self.center.into(), self.size, yaw)
    }

    pub fn with_size(&self, size: BoxSize) -> Result<Self, GeometryError> {
        Self::new(self.center.into(), size, self.yaw)
    }

    /// World-frame corners in sign-bit order: bit 0 set means local -x, bit 1 local -y,
    /// bit 2 local -z. Corner 0 is the front-left-top corner.
    pub fn corners(&self) -> [Point3<f64>; 8] {
        let (s, c) = self.yaw.sin_cos();
        let hl = self.size.l / 2.0;
        let hw = self.size.w / 2.0;
        let hh = self.size.h / 2.0;
        std::array::from_fn(|i| {
            let x = if i & 1 == 0 { hl } else { -hl };
            let y = if i & 2 == 0 { hw } else { -hw };
            let z = if i & 4 == 0 { hh } else { -hh };
            Point3::new(
                self.center.x + c * x - s * y,
                self.center.y + s * x + c * y,
                self.center.z + z,
            )
        })
    }

    /// Corners transformed into `camera`'s frame.
    pub fn camera_corners(&self, camera: &Camera) -> [CameraPoint; 8] {
        self.corners().map(|p| camera.world_to_camera(&p))
    }
}

pub fn box_corners(b: &Box3D) -> [Point3<f64>; 8] {
    b.corners()
}

pub fn world_to_camera(camera: &Camera, p: &Point3<f64>) -> CameraPoint {
    camera.world_to_camera(p)
}

pub fn camera_to_world(camera: &Camera, p: &CameraPoint) -> Point3<f64> {
    camera.camera_to_world(p)
}

pub fn project(camera: &Camera, p: &CameraPoint) -> Result<Pixel, GeometryError> {
    camera.project(p)
}

/// Wraps an angle into `(-pi, pi]`. Values already in range are returned untouched and
/// results within 1e-12 of the boundary snap to `+pi`.
pub fn normalize_angle(a: f64) -> Result<f64, GeometryError> {
    if !a.is_finite() {
        return Err(GeometryError::NonFinite(a));
    }
    if a > -PI && a <= PI {
        return Ok(a);
    }
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    if (r + PI).abs() <= 1e-12 || (r - PI).abs() <= 1e-12 {
        r = PI;
    }
    Ok(r)
}

/// Point where the segment `a-b` crosses the plane `z = z_near`. The result depends only
/// on the unordered pair, so edges shared by two polygons clip to the same bits.
pub(crate) fn near_intersection(a: &CameraPoint, b: &CameraPoint, z_near: f64) -> CameraPoint {
    let (p, q) = if (a.x, a.y, a.z) <= (b.x, b.y, b.z) {
        (a, b)
    } else {
        (b, a)
    };
    let t = (z_near - p.z) / (q.z - p.z);
    Point3::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y), z_near)
}

/// Sutherland-Hodgman clip of a convex polygon against the half-space `z >= z_near`.
pub fn clip_polygon_near(vertices: &[CameraPoint], z_near: f64) -> Vec<CameraPoint> {
    if vertices.iter().all(|p| p.z >= z_near) {
        return vertices.to_vec();
    }
    let n = vertices.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let cur = &vertices[i];
        let next = &vertices[(i + 1) % n];
        let cur_in = cur.z >= z_near;
        let next_in = next.z >= z_near;
        if cur_in {
            out.push(*cur);
        }
        if cur_in != next_in {
            out.push(near_intersection(cur, next, z_near));
        }
    }
    out
}

/// Clips a segment against `z >= z_near`; `None` when fully behind.
pub fn clip_segment_near(
    a: &CameraPoint,
    b: &CameraPoint,
    z_near: f64,
) -> Option<(CameraPoint, CameraPoint)> {
    match (a.z >= z_near, b.z >= z_near) {
        (true, true) => Some((*a, *b)),
        (false, false) => None,
        (true, false) => Some((*a, near_intersection(a, b, z_near))),
        (false, true) => Some((near_intersection(a, b, z_near), *b)),
    }
}

/// Camera-frame points outlining the box's visible volume: corners in front of the near
/// plane plus the near-plane crossings of the 12 edges.
pub fn clipped_corner_cloud(camera: &Camera, b: &Box3D, z_near: f64) -> Vec<CameraPoint> {
    let corners = b.camera_corners(camera);
    let mut cloud: Vec<CameraPoint> = corners.iter().copied().filter(|p| p.z >= z_near).collect();
    if cloud.len() < 8 {
        for &(i, j) in BOX_EDGES.iter() {
            let (a, c) = (&corners[i], &corners[j]);
            if (a.z >= z_near) != (c.z >= z_near) {
                cloud.push(near_intersection(a, c, z_near));
            }
        }
    }
    cloud
}

/// Outward normal of a face in the camera frame together with the face centroid.
pub fn face_normal_and_centroid(
    corners: &[CameraPoint; 8],
    face: Face,
) -> (Vector3<f64>, Point3<f64>) {
    let [a, b, c, d] = face.corners();
    let n = (corners[b] - corners[a]).cross(&(corners[c] - corners[a]));
    let centroid = Point3::from(
        (corners[a].coords + corners[b].coords + corners[c].coords + corners[d].coords) / 4.0,
    );
    (n, centroid)
}

/// True if the face's outward side faces a camera at the origin of the camera frame.
pub fn face_visible(corners: &[CameraPoint; 8], face: Face) -> bool {
    let (n, centroid) = face_normal_and_centroid(corners, face);
    n.dot(&centroid.coords) < 0.0
}
