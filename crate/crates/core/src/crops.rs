//! Square object crops: a box's 2D extent, an expanded square around it, and the
//! zero-pad / crop / bilinear-resize step that produces the canonical crop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Box3D, Camera};
use crate::masks::{projected_outline, BinaryMask, MaskError};

pub const DEFAULT_CROP_FACTOR: f64 = 1.5;
pub const DEFAULT_OUT_EDGE: u32 = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CropError {
    #[error("every box corner is behind the near plane")]
    FullyBehindCamera,
    #[error("degenerate rectangle {0:?}")]
    DegenerateRect(Rect),
    #[error("crop factor and output edge must be positive (factor {factor}, out_edge {out_edge})")]
    InvalidParameter { factor: f64, out_edge: u32 },
    #[error("image is {got:?} but the crop was computed for {expected:?}")]
    SizeMismatch { expected: (u32, u32), got: (u32, u32) },
}

/// Axis-aligned rectangle in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    /// Clamped to the extent `[-0.5, w - 0.5] x [-0.5, h - 0.5]` of a `w x h` image.
    pub fn clamped(&self, width: u32, height: u32) -> Rect {
        let (w, h) = (width as f64 - 0.5, height as f64 - 0.5);
        Rect {
            x0: self.x0.clamp(-0.5, w),
            y0: self.y0.clamp(-0.5, h),
            x1: self.x1.clamp(-0.5, w),
            y1: self.y1.clamp(-0.5, h),
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x0 && u <= self.x1 && v >= self.y0 && v <= self.y1
    }
}

/// Bounding rectangle of the projected (near-clipped) corner cloud, not clamped to the image.
pub fn bbox2d_of(camera: &Camera, b: &Box3D, z_near: f64) -> Result<Rect, CropError> {
    let pts = projected_outline(camera, b, z_near).map_err(|e| match e {
        MaskError::FullyBehindCamera => CropError::FullyBehindCamera,
        // projection of clipped points cannot fail otherwise
        _ => CropError::FullyBehindCamera,
    })?;
    let mut r = Rect {
        x0: f64::INFINITY,
        y0: f64::INFINITY,
        x1: f64::NEG_INFINITY,
        y1: f64::NEG_INFINITY,
    };
    for p in pts {
        r.x0 = r.x0.min(p.u);
        r.y0 = r.y0.min(p.v);
        r.x1 = r.x1.max(p.u);
        r.y1 = r.y1.max(p.v);
    }
    Ok(r)
}

/// Square source window (pixel indices `left..left + edge`, `top..top + edge`, possibly
/// outside the image) plus the zero padding it needs and the output edge length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    pub left: i64,
    pub top: i64,
    pub edge: u32,
    pub pad_left: u32,
    pub pad_top: u32,
    pub pad_right: u32,
    pub pad_bottom: u32,
    pub out_edge: u32,
    pub source_width: u32,
    pub source_height: u32,
}

impl CropSpec {
    /// Camera that renders directly into the output crop.
    pub fn window_camera(&self, camera: &Camera) -> Camera {
        camera
            .resized(self.source_width, self.source_height)
            .windowed(self.left as f64, self.top as f64, self.edge as f64, self.out_edge)
    }

    /// Continuous source coordinates sampled by output pixel `(x, y)`.
    pub fn source_point(&self, x: u32, y: u32) -> (f64, f64) {
        let s = self.edge as f64 / self.out_edge as f64;
        (
            self.left as f64 + (x as f64 + 0.5) * s - 0.5,
            self.top as f64 + (y as f64 + 0.5) * s - 0.5,
        )
    }

    /// Whether output pixel `(x, y)` samples inside the original frame.
    pub fn samples_frame(&self, x: u32, y: u32) -> bool {
        let (u, v) = self.source_point(x, y);
        u >= -0.5
            && v >= -0.5
            && u <= self.source_width as f64 - 0.5
            && v <= self.source_height as f64 - 0.5
    }
}

/// Square of edge `round(factor * max(w, h))` centered on the rectangle, with the zero
/// padding needed where it leaves the `image_size` frame.
pub fn square_crop_spec(
    rect: &Rect,
    image_size: (u32, u32),
    factor: f64,
    out_edge: u32,
) -> Result<CropSpec, CropError> {
    if !(factor > 0.0 && factor.is_finite()) || out_edge == 0 {
        return Err(CropError::InvalidParameter { factor, out_edge });
    }
    let (w, h) = (rect.width(), rect.height());
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err(CropError::DegenerateRect(*rect));
    }
    let edge = (factor * w.max(h)).round().max(1.0);
    if edge > u32::MAX as f64 {
        return Err(CropError::DegenerateRect(*rect));
    }
    let (cx, cy) = rect.center();
    let half = (edge - 1.0) / 2.0;
    let left = (cx - half + 0.5).floor() as i64;
    let top = (cy - half + 0.5).floor() as i64;
    let edge = edge as u32;
    let (iw, ih) = (image_size.0 as i64, image_size.1 as i64);
    let right = left + edge as i64;
    let bottom = top + edge as i64;
    Ok(CropSpec {
        left,
        top,
        edge,
        pad_left: (-left).max(0) as u32,
        pad_top: (-top).max(0) as u32,
        pad_right: (right - iw).max(0) as u32,
        pad_bottom: (bottom - ih).max(0) as u32,
        out_edge,
        source_width: image_size.0,
        source_height: image_size.1,
    })
}

/// Interleaved 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image8 {
    pub width: u32,
    pub height: u32,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Image8 {
    pub fn new(width: u32, height: u32, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0; width as usize * height as usize * channels],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let i = (y as usize * self.width as usize + x as usize) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            channels: 1,
            data: mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    /// First channel thresholded at 128.
    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::from_vec(
            self.width,
            self.height,
            self.data.chunks_exact(self.channels).map(|p| p[0] >= 128).collect(),
        )
    }
}

/// Zero-pads, crops the square window and resamples it to `out_edge x out_edge` with a
/// bilinear kernel using half-pixel center alignment and edge clamping inside the window.
pub fn apply_crop(image: &Image8, spec: &CropSpec) -> Result<Image8, CropError> {
    if (image.width, image.height) != (spec.source_width, spec.source_height) {
        return Err(CropError::SizeMismatch {
            expected: (spec.source_width, spec.source_height),
            got: (image.width, image.height),
        });
    }
    let c = image.channels;
    let (iw, ih) = (image.width as i64, image.height as i64);
    let fetch = |sx: i64, sy: i64, ch: usize| -> f32 {
        let (x, y) = (spec.left + sx, spec.top + sy);
        if x < 0 || y < 0 || x >= iw || y >= ih {
            0.0
        } else {
            image.data[(y as usize * iw as usize + x as usize) * c + ch] as f32
        }
    };
    let out = spec.out_edge;
    let mut dst = Image8::new(out, out, c);
    if spec.edge == out {
        for y in 0..out {
            for x in 0..out {
                for ch in 0..c {
                    dst.data[(y as usize * out as usize + x as usize) * c + ch] =
                        fetch(x as i64, y as i64, ch) as u8;
                }
            }
        }
        return Ok(dst);
    }
    let scale = spec.edge as f64 / out as f64;
    let max = spec.edge as f64 - 1.0;
    // per-axis taps, shared by rows and columns
    let taps: Vec<(i64, i64, f32)> = (0..out)
        .map(|j| {
            let s = ((j as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let i0 = s.floor();
            let i1 = (i0 + 1.0).min(max);
            (i0 as i64, i1 as i64, (s - i0) as f32)
        })
        .collect();
    for (y, &(y0, y1, fy)) in taps.iter().enumerate() {
        for (x, &(x0, x1, fx)) in taps.iter().enumerate() {
            for ch in 0..c {
                let top = fetch(x0, y0, ch) * (1.0 - fx) + fetch(x1, y0, ch) * fx;
                let bottom = fetch(x0, y1, ch) * (1.0 - fx) + fetch(x1, y1, ch) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                dst.data[(y * out as usize + x) * c + ch] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(dst)
}

/// Crops a binary mask with the same spec, thresholding the resampled values at 128.
pub fn apply_crop_mask(mask: &BinaryMask, spec: &CropSpec) -> Result<BinaryMask, CropError> {
    Ok(apply_crop(&Image8::from_mask(mask), spec)?.to_mask())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoxSize, DEFAULT_Z_NEAR};
    use crate::masks::hull_mask;
    use nalgebra::{Matrix3, UnitQuaternion};

    fn z_up_camera(w: u32, h: u32, f: f64) -> Camera {
        let q = UnitQuaternion::from_matrix(&Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0));
        let q = q.quaternion();
        Camera::new(f, f, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, w, h, [q.w, q.i, q.j, q.k], [0.0; 3])
            .unwrap()
    }

    #[test]
    fn frontal_box_rect_is_the_near_face() {
        let cam = z_up_camera(200, 100, 100.0);
        let b = Box3D::new([12.0, 0.0, 0.0], BoxSize::new(4.0, 4.0, 2.0), 0.0).unwrap();
        let r = bbox2d_of(&cam, &b, DEFAULT_Z_NEAR).unwrap();
        // near face at depth 10: half extents 100 * 2 / 10 and 100 * 1 / 10
        assert!((r.x0 - (99.5 - 20.0)).abs() < 1e-9 && (r.x1 - (99.5 + 20.0)).abs() < 1e-9);
        assert!((r.y0 - (49.5 - 10.0)).abs() < 1e-9 && (r.y1 - (49.5 + 10.0)).abs() < 1e-9);
    }

    #[test]
    fn rect_contains_corners_and_hull() {
        let cam = z_up_camera(160, 120, 120.0);
        let b = Box3D::new([9.0, 1.0, -0.4], BoxSize::new(1.9, 4.6, 1.7), 0.8).unwrap();
        let r = bbox2d_of(&cam, &b, DEFAULT_Z_NEAR).unwrap();
        for p in b.camera_corners(&cam) {
            let px = cam.project(&p).unwrap();
            assert!(r.contains(px.u, px.v));
        }
        let clamped = r.clamped(160, 120);
        let hull = hull_mask(&cam, &b, (160, 120), DEFAULT_Z_NEAR).unwrap();
        for y in 0..120 {
            for x in 0..160 {
                if hull.get(x, y) {
                    assert!(clamped.contains(x as f64, y as f64));
                }
            }
        }
    }

    #[test]
    fn edge_is_factor_times_max_side() {
        let r = Rect { x0: 100.0, y0: 100.0, x1: 160.0, y1: 200.0 };
        let s = square_crop_spec(&r, (1600, 900), 1.5, 512).unwrap();
        assert_eq!(s.edge, 150);
        assert_eq!((s.pad_left, s.pad_top, s.pad_right, s.pad_bottom), (0, 0, 0, 0));
    }

    #[test]
    fn top_left_overhang_becomes_padding() {
        let r = Rect { x0: -10.0, y0: -5.0, x1: 30.0, y1: 25.0 };
        let s = square_crop_spec(&r, (640, 480), 1.5, 512).unwrap();
        assert_eq!(s.edge, 60);
        // center (10, 10), half (60 - 1) / 2 = 29.5 -> left = top = floor(-19.5 + 0.5) = -19
        assert_eq!((s.left, s.top), (-19, -19));
        assert_eq!((s.pad_left, s.pad_top), (19, 19));
        assert_eq!((s.pad_right, s.pad_bottom), (0, 0));
    }

    #[test]
    fn degenerate_and_invalid_params() {
        let r = Rect { x0: 1.0, y0: 1.0, x1: 1.0, y1: 5.0 };
        assert!(matches!(square_crop_spec(&r, (10, 10), 1.5, 8), Err(CropError::DegenerateRect(_))));
        let r = Rect { x0: 1.0, y0: 1.0, x1: 3.0, y1: 5.0 };
        assert!(matches!(square_crop_spec(&r, (10, 10), 0.0, 8), Err(CropError::InvalidParameter { .. })));
        assert!(matches!(square_crop_spec(&r, (10, 10), 1.5, 0), Err(CropError::InvalidParameter { .. })));
    }

    #[test]
    fn identity_crop_is_bit_exact() {
        let mut img = Image8::new(16, 16, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = (i * 37 % 251) as u8;
        }
        let r = Rect { x0: -0.5, y0: -0.5, x1: 15.5, y1: 15.5 };
        let spec = square_crop_spec(&r, (16, 16), 1.0, 16).unwrap();
        assert_eq!((spec.left, spec.top, spec.edge), (0, 0, 16));
        assert_eq!(apply_crop(&img, &spec).unwrap(), img);
    }

    #[test]
    fn zero_and_constant_images() {
        let spec = square_crop_spec(&Rect { x0: 2.0, y0: 2.0, x1: 12.0, y1: 10.0 }, (20, 20), 1.5, 7).unwrap();
        let zero = Image8::new(20, 20, 3);
        assert!(apply_crop(&zero, &spec).unwrap().data.iter().all(|&v| v == 0));

        let mut c = Image8::new(32, 32, 1);
        c.data.fill(173);
        let r = Rect { x0: -0.5, y0: -0.5, x1: 31.5, y1: 31.5 };
        let spec = square_crop_spec(&r, (32, 32), 1.0, 16).unwrap();
        let out = apply_crop(&c, &spec).unwrap();
        assert_eq!(out.width, 16);
        assert!(out.data.iter().all(|&v| v == 173));
    }

    #[test]
    fn size_mismatch() {
        let spec = square_crop_spec(&Rect { x0: 2.0, y0: 2.0, x1: 12.0, y1: 10.0 }, (20, 20), 1.5, 7).unwrap();
        assert!(matches!(apply_crop(&Image8::new(10, 20, 1), &spec), Err(CropError::SizeMismatch { .. })));
    }

    proptest::proptest! {
        #[test]
        fn square_is_centered(x0 in -200.0f64..800.0, y0 in -200.0f64..600.0, w in 1.0f64..300.0, h in 1.0f64..300.0, factor in 0.5f64..3.0) {
            let r = Rect { x0, y0, x1: x0 + w, y1: y0 + h };
            let s = square_crop_spec(&r, (640, 480), factor, 64).unwrap();
            let center = s.left as f64 + (s.edge as f64 - 1.0) / 2.0;
            proptest::prop_assert!((center - r.center().0).abs() <= 0.5 + 1e-9);
            let center = s.top as f64 + (s.edge as f64 - 1.0) / 2.0;
            proptest::prop_assert!((center - r.center().1).abs() <= 0.5 + 1e-9);
            proptest::prop_assert_eq!(s.pad_left as i64, (-s.left).max(0));
            proptest::prop_assert_eq!(s.pad_right as i64, (s.left + s.edge as i64 - 640).max(0));
        }

        #[test]
        fn unit_factor_square_contains_rect(x0 in 0.0f64..300.0, y0 in 0.0f64..200.0, w in 2.0f64..200.0, h in 2.0f64..200.0) {
            let r = Rect { x0, y0, x1: x0 + w, y1: y0 + h };
            let s = square_crop_spec(&r, (640, 480), 1.0, 64).unwrap();
            // continuous extent of the window, 1 px slack from integer rounding
            let (l, t) = (s.left as f64 - 0.5, s.top as f64 - 0.5);
            let e = s.edge as f64;
            proptest::prop_assert!(l <= r.x0 + 1.0 && l + e >= r.x1 - 1.0);
            proptest::prop_assert!(t <= r.y0 + 1.0 && t + e >= r.y1 - 1.0);
            proptest::prop_assert!((e - w.max(h)).abs() <= 0.5);
        }
    }
}
