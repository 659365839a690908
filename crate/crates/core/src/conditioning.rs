//! Conditioning signals derived from a single 3D box: the mesh + corner + wireframe pose
//! map, the six-channel and visible-faces variants, the box depth map, and the projected
//! corner coordinate encodings used by token-based generators.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{
    clip_segment_near, Box3D, Camera, Face, GeometryError, BOX_EDGES, DEFAULT_Z_NEAR,
};
use crate::raster::{draw_disc, draw_polyline, fill_box_faces, RasterError, RasterTarget};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditioningError {
    #[error("every box corner is behind the near plane")]
    FullyBehindCamera,
    #[error("Fourier embedding needs at least one band")]
    BandCountZero,
    #[error("invalid palette: {0}")]
    InvalidPalette(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

pub type Rgb = [f32; 3];

fn rgb8(r: u8, g: u8, b: u8) -> Rgb {
    [r as f32 / 255.0, g as f32 / 255.0, b as f32 / 255.0]
}

fn hue(h: f32) -> Rgb {
    // HSV with full saturation and value
    let h6 = h * 6.0;
    let x = 1.0 - (h6 % 2.0 - 1.0).abs();
    match h6 as u32 {
        0 => [1.0, x, 0.0],
        1 => [x, 1.0, 0.0],
        2 => [0.0, 1.0, x],
        3 => [0.0, x, 1.0],
        4 => [x, 0.0, 1.0],
        _ => [1.0, 0.0, x],
    }
}

/// Colors of the pose map: a pair per face (one per triangle), one per edge and one per
/// corner. Faces are indexed in [`Face::ALL`] order, edges in [`BOX_EDGES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub faces: [[Rgb; 2]; 6],
    pub edges: [Rgb; 12],
    pub corners: [Rgb; 8],
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            faces: [
                [rgb8(230, 25, 25), rgb8(160, 15, 15)],
                [rgb8(25, 80, 230), rgb8(15, 50, 160)],
                [rgb8(25, 200, 60), rgb8(15, 130, 40)],
                [rgb8(240, 200, 30), rgb8(170, 140, 20)],
                [rgb8(170, 60, 220), rgb8(110, 35, 150)],
                [rgb8(120, 120, 120), rgb8(70, 70, 70)],
            ],
            edges: std::array::from_fn(|k| hue(k as f32 / 12.0)),
            corners: [[1.0; 3]; 8],
        }
    }
}

impl Palette {
    pub fn validate(&self) -> Result<(), ConditioningError> {
        let all = self
            .faces
            .iter()
            .flatten()
            .chain(self.edges.iter())
            .chain(self.corners.iter());
        if all.flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(ConditioningError::InvalidPalette(
                "components must lie in [0, 1]".into(),
            ));
        }
        let tris: Vec<Rgb> = self.faces.iter().flatten().copied().collect();
        for i in 0..tris.len() {
            if tris[i + 1..].contains(&tris[i]) {
                return Err(ConditioningError::InvalidPalette(format!(
                    "face triangle color {i} is not unique"
                )));
            }
        }
        if let Some(k) = self.edges.iter().position(|e| tris.contains(e)) {
            return Err(ConditioningError::InvalidPalette(format!(
                "edge color {k} coincides with a face color"
            )));
        }
        Ok(())
    }

    pub fn face_color(&self, face: Face, tri: usize) -> &Rgb {
        &self.faces[face.index()][tri]
    }

    /// Hex SHA-256 over the little-endian bytes of every component.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let all = self
            .faces
            .iter()
            .flatten()
            .chain(self.edges.iter())
            .chain(self.corners.iter());
        for c in all.flatten() {
            h.update(c.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Image-shaped conditioning signal, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningMap {
    pub width: u32,
    pub height: u32,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl ConditioningMap {
    pub fn pixel(&self, x: u32, y: u32) -> &[f32] {
        let i = (y as usize * self.width as usize + x as usize) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Pixels with any nonzero channel.
    pub fn nonzero_mask(&self) -> Vec<bool> {
        self.data
            .chunks_exact(self.channels)
            .map(|px| px.iter().any(|&v| v != 0.0))
            .collect()
    }

    /// Zeroes every pixel for which `keep` is false.
    pub fn retain(&mut self, keep: impl Fn(u32, u32) -> bool) {
        let (w, c) = (self.width as usize, self.channels);
        for (i, px) in self.data.chunks_exact_mut(c).enumerate() {
            if !keep((i % w) as u32, (i / w) as u32) {
                px.fill(0.0);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Variant {
    PoseMap,
    SixChannel,
    Faces,
    BoxDepth,
    Corners2d,
    Corners25d,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::PoseMap => "pose_map",
            Variant::SixChannel => "six_channel",
            Variant::Faces => "faces",
            Variant::BoxDepth => "box_depth",
            Variant::Corners2d => "corners2d",
            Variant::Corners25d => "corners25d",
        }
    }

    pub fn is_coordinate_encoding(self) -> bool {
        matches!(self, Variant::Corners2d | Variant::Corners25d)
    }
}

/// Size knobs for the pose map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseMapStyle {
    pub z_near: f64,
    /// Corner disc radius as a fraction of the box's smallest dimension.
    pub disc_radius_frac: f64,
    /// Wireframe width in pixels; `None` means 3 px at 512 px, scaled with image size.
    pub wire_width_px: Option<f32>,
}

impl Default for PoseMapStyle {
    fn default() -> Self {
        Self {
            z_near: DEFAULT_Z_NEAR,
            disc_radius_frac: 0.04,
            wire_width_px: None,
        }
    }
}

impl PoseMapStyle {
    pub fn wire_width_for(&self, width: u32, height: u32) -> f32 {
        self.wire_width_px
            .unwrap_or_else(|| (3.0 * width.min(height) as f32 / 512.0).max(1.0))
    }
}

fn check_in_front(camera: &Camera, b: &Box3D, z_near: f64) -> Result<(), ConditioningError> {
    if b.camera_corners(camera).iter().all(|p| p.z <= z_near) {
        return Err(ConditioningError::FullyBehindCamera);
    }
    Ok(())
}

/// The rendered pose map together with the coverage of its mesh pass (face triangles only,
/// before corner discs and wireframe).
#[derive(Debug, Clone)]
pub struct PoseMapLayers {
    pub map: ConditioningMap,
    pub mesh: Vec<bool>,
}

pub fn render_pose_layers(
    camera: &Camera,
    b: &Box3D,
    palette: &Palette,
    size: (u32, u32),
    style: &PoseMapStyle,
) -> Result<PoseMapLayers, ConditioningError> {
    let cam = camera.resized(size.0, size.1);
    check_in_front(&cam, b, style.z_near)?;
    let mut target = RasterTarget::new(size.0, size.1, 3, false);
    fill_box_faces(&mut target, &cam, b, style.z_near, None, |face, t| {
        palette.face_color(face, t)
    })?;
    let mesh = target.covered();

    let corners = b.camera_corners(&cam);
    let radius = style.disc_radius_frac * b.size().min_extent();
    if radius > 0.0 {
        for (k, c) in corners.iter().enumerate() {
            if c.z >= style.z_near {
                draw_disc(&mut target, c, radius, &palette.corners[k], &cam)?;
            }
        }
    }

    let width = style.wire_width_for(size.0, size.1);
    for (k, &(i, j)) in BOX_EDGES.iter().enumerate() {
        if let Some((a, c)) = clip_segment_near(&corners[i], &corners[j], style.z_near) {
            let pts = [cam.project(&a)?, cam.project(&c)?];
            draw_polyline(&mut target, &pts, &palette.edges[k], width)?;
        }
    }
    Ok(PoseMapLayers {
        map: ConditioningMap {
            width: size.0,
            height: size.1,
            channels: 3,
            data: target.into_color(),
        },
        mesh,
    })
}

/// Pose map: two colored triangles per face (z-buffered), corner discs (depth-tested) and
/// the 12 edges as an unconditional wireframe overlay. Background is exactly zero.
pub fn render_pose_map(
    camera: &Camera,
    b: &Box3D,
    palette: &Palette,
    size: (u32, u32),
) -> Result<ConditioningMap, ConditioningError> {
    render_pose_layers(camera, b, palette, size, &PoseMapStyle::default()).map(|l| l.map)
}

/// One channel per face (in [`Face::ALL`] order), 1.0 where that face is the nearest surface.
pub fn render_six_channel(
    camera: &Camera,
    b: &Box3D,
    size: (u32, u32),
    z_near: f64,
) -> Result<ConditioningMap, ConditioningError> {
    let cam = camera.resized(size.0, size.1);
    check_in_front(&cam, b, z_near)?;
    let one_hot: [[f32; 6]; 6] =
        std::array::from_fn(|k| std::array::from_fn(|c| if c == k { 1.0 } else { 0.0 }));
    let mut target = RasterTarget::new(size.0, size.1, 6, false);
    fill_box_faces(&mut target, &cam, b, z_near, None, |face, _| &one_hot[face.index()])?;
    Ok(ConditioningMap {
        width: size.0,
        height: size.1,
        channels: 6,
        data: target.into_color(),
    })
}

/// Camera-facing faces in one solid color each (the first of the palette pair).
pub fn render_visible_faces(
    camera: &Camera,
    b: &Box3D,
    palette: &Palette,
    size: (u32, u32),
    z_near: f64,
) -> Result<ConditioningMap, ConditioningError> {
    let cam = camera.resized(size.0, size.1);
    check_in_front(&cam, b, z_near)?;
    let mut target = RasterTarget::new(size.0, size.1, 3, false);
    fill_box_faces(&mut target, &cam, b, z_near, None, |face, _| {
        palette.face_color(face, 0)
    })?;
    Ok(ConditioningMap {
        width: size.0,
        height: size.1,
        channels: 3,
        data: target.into_color(),
    })
}

/// Untextured z-buffer of the single box, in meters; background 0.
pub fn render_box_depthmap(
    camera: &Camera,
    b: &Box3D,
    size: (u32, u32),
    z_near: f64,
) -> Result<ConditioningMap, ConditioningError> {
    let cam = camera.resized(size.0, size.1);
    check_in_front(&cam, b, z_near)?;
    let mut target = RasterTarget::new(size.0, size.1, 0, false);
    fill_box_faces(&mut target, &cam, b, z_near, None, |_, _| &[])?;
    let data = target
        .depth()
        .iter()
        .map(|&d| if d.is_finite() { d } else { 0.0 })
        .collect();
    Ok(ConditioningMap {
        width: size.0,
        height: size.1,
        channels: 1,
        data,
    })
}

fn projected_corners(
    camera: &Camera,
    b: &Box3D,
) -> Result<[(f64, f64, f64); 8], ConditioningError> {
    let corners = b.camera_corners(camera);
    if let Some(p) = corners.iter().find(|p| !(p.z > 0.0)) {
        return Err(GeometryError::NonPositiveDepth(p.z).into());
    }
    let mut out = [(0.0, 0.0, 0.0); 8];
    for (o, p) in out.iter_mut().zip(&corners) {
        let px = camera.project(p)?;
        *o = (px.u / camera.width as f64, px.v / camera.height as f64, p.z);
    }
    Ok(out)
}

/// The 8 corners (in corner index order) as `(u / width, v / height)` pairs. Out-of-frame
/// corners are not clamped.
pub fn encode_corners_2d(camera: &Camera, b: &Box3D) -> Result<[f64; 16], ConditioningError> {
    let c = projected_corners(camera, b)?;
    Ok(std::array::from_fn(|i| {
        if i % 2 == 0 {
            c[i / 2].0
        } else {
            c[i / 2].1
        }
    }))
}

/// Like [`encode_corners_2d`] with the camera depth in meters appended per corner.
pub fn encode_corners_25d(camera: &Camera, b: &Box3D) -> Result<[f64; 24], ConditioningError> {
    let c = projected_corners(camera, b)?;
    Ok(std::array::from_fn(|i| match i % 3 {
        0 => c[i / 3].0,
        1 => c[i / 3].1,
        _ => c[i / 3].2,
    }))
}

/// `sin(2^k pi x), cos(2^k pi x)` for `k = 0..bands`, component-major.
pub fn fourier_embed(v: &[f64], bands: u32) -> Result<Vec<f64>, ConditioningError> {
    if bands == 0 {
        return Err(ConditioningError::BandCountZero);
    }
    let mut out = Vec::with_capacity(2 * bands as usize * v.len());
    for &x in v {
        for k in 0..bands {
            let (s, c) = (2f64.powi(k as i32) * PI * x).sin_cos();
            out.push(s);
            out.push(c);
        }
    }
    Ok(out)
}

pub const DEFAULT_FOURIER_BANDS: u32 = 8;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxSize;
    use crate::raster::render_id_buffer;

    fn camera(size: u32) -> Camera {
        let c = (size as f64 - 1.0) / 2.0;
        Camera::from_intrinsics(size as f64, size as f64, c, c, size, size).unwrap()
    }

    // camera frame == world frame here, so world z is the optical axis. A box with yaw
    // -pi/2 has its local +x along world -y; use yaw about the optical axis only for
    // generic tests, and a proper z-up camera for the facing tests.
    fn z_up_camera(size: u32) -> Camera {
        // world x forward, y left, z up -> camera x right (-y), y down (-z), z forward (x)
        let c = (size as f64 - 1.0) / 2.0;
        let q = nalgebra::UnitQuaternion::from_matrix(&nalgebra::Matrix3::new(
            0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0,
        ));
        let q = q.quaternion();
        Camera::new(size as f64, size as f64, c, c, size, size, [q.w, q.i, q.j, q.k], [0.0; 3]).unwrap()
    }

    #[test]
    fn default_palette_is_valid() {
        Palette::default().validate().unwrap();
        assert_eq!(Palette::default().hash(), Palette::default().hash());
    }

    #[test]
    fn back_face_only_when_looking_at_rear() {
        // box ahead along world +x, facing away from the camera: its back (-x) face is seen
        let cam = z_up_camera(64);
        let b = Box3D::new([10.0, 0.0, 0.0], BoxSize::new(2.0, 4.0, 2.0), 0.0).unwrap();
        let pal = Palette::default();
        let layers = render_pose_layers(&cam, &b, &pal, (64, 64), &PoseMapStyle::default()).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for (i, &m) in layers.mesh.iter().enumerate() {
            if m {
                // recover the mesh color by re-rendering without overlays
                seen.insert(i);
            }
        }
        let faces = render_visible_faces(&cam, &b, &pal, (64, 64), DEFAULT_Z_NEAR).unwrap();
        let back = pal.face_color(Face::Back, 0);
        for &i in &seen {
            assert_eq!(&faces.data[i * 3..i * 3 + 3], back);
        }
        // both back triangles appear in the pose map interior
        let colors: std::collections::BTreeSet<[u32; 3]> = layers
            .map
            .data
            .chunks_exact(3)
            .map(|c| [c[0].to_bits(), c[1].to_bits(), c[2].to_bits()])
            .collect();
        for t in 0..2 {
            let c = pal.face_color(Face::Back, t);
            assert!(colors.contains(&[c[0].to_bits(), c[1].to_bits(), c[2].to_bits()]));
        }
        for face in [Face::Front, Face::Left, Face::Right, Face::Top, Face::Bottom] {
            for t in 0..2 {
                let c = pal.face_color(face, t);
                assert!(!colors.contains(&[c[0].to_bits(), c[1].to_bits(), c[2].to_bits()]));
            }
        }
    }

    #[test]
    fn behind_camera_is_rejected() {
        let cam = camera(32);
        let b = Box3D::new([0.0, 0.0, -10.0], BoxSize::new(1.0, 1.0, 1.0), 0.0).unwrap();
        let pal = Palette::default();
        assert_eq!(
            render_pose_map(&cam, &b, &pal, (32, 32)).unwrap_err(),
            ConditioningError::FullyBehindCamera
        );
        assert!(render_six_channel(&cam, &b, (32, 32), DEFAULT_Z_NEAR).is_err());
        assert!(render_visible_faces(&cam, &b, &pal, (32, 32), DEFAULT_Z_NEAR).is_err());
        assert!(render_box_depthmap(&cam, &b, (32, 32), DEFAULT_Z_NEAR).is_err());
    }

    #[test]
    fn pose_map_is_deterministic_and_background_black() {
        let cam = camera(64);
        let b = Box3D::new([0.5, 0.2, 9.0], BoxSize::new(2.0, 3.0, 1.5), 0.6).unwrap();
        let pal = Palette::default();
        let a = render_pose_map(&cam, &b, &pal, (64, 64)).unwrap();
        let c = render_pose_map(&cam, &b, &pal, (64, 64)).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.pixel(0, 0), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn frontal_box_six_channel_single_face() {
        let cam = z_up_camera(64);
        let b = Box3D::new([12.0, 0.0, 0.0], BoxSize::new(3.0, 3.0, 3.0), 0.0).unwrap();
        let six = render_six_channel(&cam, &b, (64, 64), DEFAULT_Z_NEAR).unwrap();
        let mut used = [false; 6];
        for px in six.data.chunks_exact(6) {
            let s: f32 = px.iter().sum();
            assert!(s == 0.0 || s == 1.0);
            for (k, &v) in px.iter().enumerate() {
                used[k] |= v != 0.0;
            }
        }
        assert_eq!(used, [false, true, false, false, false, false]);
        let faces = render_visible_faces(&cam, &b, &Palette::default(), (64, 64), DEFAULT_Z_NEAR).unwrap();
        let distinct: std::collections::BTreeSet<[u32; 3]> = faces
            .data
            .chunks_exact(3)
            .filter(|c| c.iter().any(|&v| v != 0.0))
            .map(|c| [c[0].to_bits(), c[1].to_bits(), c[2].to_bits()])
            .collect();
        assert_eq!(distinct.len(), 1);
    }

    #[test]
    fn oblique_view_shows_at_most_three_faces() {
        let cam = z_up_camera(64);
        // box ahead, below and to the right: camera sees its back, left and top faces
        let b = Box3D::new([10.0, -3.0, -2.0], BoxSize::new(2.0, 4.0, 1.5), 0.3).unwrap();
        let six = render_six_channel(&cam, &b, (64, 64), DEFAULT_Z_NEAR).unwrap();
        let mut used = [false; 6];
        for px in six.data.chunks_exact(6) {
            for (k, &v) in px.iter().enumerate() {
                used[k] |= v != 0.0;
            }
        }
        assert!(used.iter().filter(|&&u| u).count() <= 3);
        assert!(used[Face::Top.index()]);
    }

    #[test]
    fn six_channel_union_matches_id_buffer() {
        let cam = camera(64);
        let b = Box3D::new([0.3, -0.4, 8.0], BoxSize::new(2.0, 2.5, 1.0), 1.1).unwrap();
        let six = render_six_channel(&cam, &b, (64, 64), DEFAULT_Z_NEAR).unwrap();
        let ids = render_id_buffer(&cam, &[(7, b)], (64, 64), DEFAULT_Z_NEAR).unwrap();
        let union = six.nonzero_mask();
        let sil: Vec<bool> = ids.ids().unwrap().iter().map(|&i| i == 7).collect();
        assert_eq!(union, sil);
    }

    #[test]
    fn box_depth_planar_front_face() {
        let cam = z_up_camera(64);
        let b = Box3D::new([12.0, 0.0, 0.0], BoxSize::new(2.0, 4.0, 2.0), 0.0).unwrap();
        let d = render_box_depthmap(&cam, &b, (64, 64), DEFAULT_Z_NEAR).unwrap();
        let nz: Vec<f32> = d.data.iter().copied().filter(|&v| v != 0.0).collect();
        assert!(!nz.is_empty());
        assert!(nz.iter().all(|&v| (v - 10.0).abs() < 1e-4));
    }

    #[test]
    fn box_depth_bounded_by_nearest_corner() {
        let cam = camera(64);
        let b = Box3D::new([0.5, 0.5, 7.0], BoxSize::new(2.0, 3.0, 1.5), 0.4).unwrap();
        let d = render_box_depthmap(&cam, &b, (64, 64), DEFAULT_Z_NEAR).unwrap();
        let min = d.data.iter().copied().filter(|&v| v != 0.0).fold(f32::INFINITY, f32::min);
        let nearest = b.camera_corners(&cam).iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        assert!(min as f64 >= nearest - 1e-3);
    }

    #[test]
    fn corner_encodings() {
        let cam = Camera::from_intrinsics(500.0, 500.0, 256.0, 256.0, 512, 512).unwrap();
        let b = Box3D::new([0.0, 0.0, 12.0], BoxSize::new(2.0, 2.0, 4.0), 0.0).unwrap();
        // identity pose: box local z is the optical axis; corners lie at z = 10 and z = 14
        let e2 = encode_corners_2d(&cam, &b).unwrap();
        let e3 = encode_corners_25d(&cam, &b).unwrap();
        assert_eq!(e2.len(), 16);
        assert_eq!(e3.len(), 24);
        let corners = b.camera_corners(&cam);
        for k in 0..8 {
            let px = cam.project(&corners[k]).unwrap();
            assert_eq!(e2[2 * k], px.u / 512.0);
            assert_eq!(e2[2 * k + 1], px.v / 512.0);
            assert_eq!(e3[3 * k], e2[2 * k]);
            assert_eq!(e3[3 * k + 1], e2[2 * k + 1]);
        }
        let mut depths: Vec<f64> = (0..8).map(|k| e3[3 * k + 2]).collect();
        depths.sort_by(f64::total_cmp);
        assert_eq!(depths, vec![10.0, 10.0, 10.0, 10.0, 14.0, 14.0, 14.0, 14.0]);

        let on_axis = Box3D::new([0.0, 0.0, 10.0], BoxSize::new(1e-3, 1e-3, 1e-3), 0.0).unwrap();
        let e = encode_corners_2d(&cam, &on_axis).unwrap();
        assert!((e[0] - 0.5).abs() < 1e-4 && (e[1] - 0.5).abs() < 1e-4);

        let behind = Box3D::new([0.0, 0.0, 0.5], BoxSize::new(1.0, 1.0, 2.0), 0.0).unwrap();
        assert!(matches!(
            encode_corners_2d(&cam, &behind),
            Err(ConditioningError::Geometry(GeometryError::NonPositiveDepth(_)))
        ));
    }

    #[test]
    fn fourier_examples() {
        let e = fourier_embed(&[0.0], 5).unwrap();
        for k in 0..5 {
            assert_eq!(e[2 * k], 0.0);
            assert_eq!(e[2 * k + 1], 1.0);
        }
        let e = fourier_embed(&[1.0], 1).unwrap();
        assert!(e[0].abs() < 1e-12);
        assert!((e[1] + 1.0).abs() < 1e-12);
        assert_eq!(fourier_embed(&[0.1, 0.2, 0.3], 4).unwrap().len(), 24);
        assert_eq!(fourier_embed(&[0.1], 0), Err(ConditioningError::BandCountZero));
    }

    proptest::proptest! {
        #[test]
        fn fourier_shape(n in 0usize..20, bands in 1u32..12) {
            let v: Vec<f64> = (0..n).map(|i| i as f64 / 20.0).collect();
            proptest::prop_assert_eq!(fourier_embed(&v, bands).unwrap().len(), 2 * bands as usize * n);
        }
    }
}
