//! C ABI over the boxpose core: cameras and boxes as opaque handles, conditioning renders,
//! hull masks, corner encodings and metrics. Every call returns a [`BpStatus`]; on failure
//! a message is available from [`bp_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use boxpose::conditioning::{
    encode_corners_25d, encode_corners_2d, fourier_embed, render_box_depthmap, render_pose_map,
    render_six_channel, render_visible_faces, ConditioningError, Palette,
};
use boxpose::geometry::{Box3D, BoxSize, Camera, GeometryError, DEFAULT_Z_NEAR};
use boxpose::masks::{hull_mask, MaskError};
use boxpose::metrics::{frechet_distance, is_flipped, yaw_error, FeatureSet, MetricsError};

/// Bumped whenever a signature or struct layout changes.
pub const BP_ABI_VERSION: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    FullyBehindCamera = 3,
    NonPositiveDepth = 4,
    DimensionMismatch = 5,
    TooFewSamples = 6,
    BufferTooSmall = 7,
    Internal = 8,
    Panic = 9,
}

/// Conditioning variants that produce an image.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpVariant {
    PoseMap = 0,
    SixChannel = 1,
    Faces = 2,
    BoxDepth = 3,
}

pub struct BpCamera(Camera);

pub struct BpBox(Box3D);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(BpStatus, String);

impl Failure {
    fn new(status: BpStatus, msg: impl Into<String>) -> Self {
        Self(status, msg.into())
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        let status = match e {
            GeometryError::NonPositiveDepth(_) => BpStatus::NonPositiveDepth,
            _ => BpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<ConditioningError> for Failure {
    fn from(e: ConditioningError) -> Self {
        match e {
            ConditioningError::FullyBehindCamera => Failure(BpStatus::FullyBehindCamera, e.to_string()),
            ConditioningError::Geometry(g) => g.into(),
            ConditioningError::BandCountZero | ConditioningError::InvalidPalette(_) => {
                Failure(BpStatus::InvalidArgument, e.to_string())
            }
            ConditioningError::Raster(_) => Failure(BpStatus::Internal, e.to_string()),
        }
    }
}

impl From<MaskError> for Failure {
    fn from(e: MaskError) -> Self {
        let status = match &e {
            MaskError::FullyBehindCamera => BpStatus::FullyBehindCamera,
            MaskError::Geometry(GeometryError::NonPositiveDepth(_)) => BpStatus::NonPositiveDepth,
            MaskError::DegenerateProjection | MaskError::NonPositiveFactor(_) => BpStatus::InvalidArgument,
            _ => BpStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        let status = match e {
            MetricsError::DimensionMismatch(..) => BpStatus::DimensionMismatch,
            MetricsError::TooFewSamples(_) => BpStatus::TooFewSamples,
            MetricsError::IndefiniteCovariance { .. } => BpStatus::Internal,
            MetricsError::NonFinite(_) | MetricsError::OutOfRange(_) | MetricsError::InvalidFeatures(_) => {
                BpStatus::InvalidArgument
            }
        };
        Failure(status, e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            BpStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(BpStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(Failure::new(BpStatus::NullPointer, format!("{name} is null")));
    }
    if len < need {
        return Err(Failure::new(BpStatus::BufferTooSmall, format!("{name} holds {len}, need {need}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(BpStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(p: *mut T, v: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::new(BpStatus::NullPointer, format!("{name} is null")));
    }
    p.write(v);
    Ok(())
}

#[no_mangle]
pub extern "C" fn bp_abi_version() -> u32 {
    BP_ABI_VERSION
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated, truncated
/// to `len - 1` bytes) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a camera from intrinsics and a world-to-camera pose (`rotation` as `w, x, y, z`).
///
/// # Safety
/// `rotation` must point to 4 doubles, `translation` to 3, `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn bp_camera_new(
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    rotation: *const f64,
    translation: *const f64,
    out: *mut *mut BpCamera,
) -> BpStatus {
    guard(|| {
        let r = in_slice(rotation, 4, "rotation")?;
        let t = in_slice(translation, 3, "translation")?;
        let cam = Camera::new(fx, fy, cx, cy, width, height, [r[0], r[1], r[2], r[3]], [t[0], t[1], t[2]])?;
        write_out(out, Box::into_raw(Box::new(BpCamera(cam))), "out")
    })
}

/// # Safety
/// `camera` must be null or a handle from [`bp_camera_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_camera_free(camera: *mut BpCamera) {
    if !camera.is_null() {
        drop(Box::from_raw(camera));
    }
}

/// Creates a yaw-only box from its center, size `(w, l, h)` and yaw.
///
/// # Safety
/// `center` must point to 3 doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn bp_box_new(center: *const f64, w: f64, l: f64, h: f64, yaw: f64, out: *mut *mut BpBox) -> BpStatus {
    guard(|| {
        let c = in_slice(center, 3, "center")?;
        let b = Box3D::new([c[0], c[1], c[2]], BoxSize::new(w, l, h), yaw)?;
        write_out(out, Box::into_raw(Box::new(BpBox(b))), "out")
    })
}

/// # Safety
/// `b` must be null or a handle from [`bp_box_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_box_free(b: *mut BpBox) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Writes the 8 world-frame corners as 24 doubles, corner-major.
///
/// # Safety
/// `b` must be a live handle and `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bp_box_corners(b: *const BpBox, out: *mut f64, out_len: usize) -> BpStatus {
    guard(|| {
        let b = get(b, "box")?;
        let dst = out_slice(out, out_len, 24, "out")?;
        for (k, p) in b.0.corners().iter().enumerate() {
            dst[3 * k..3 * k + 3].copy_from_slice(&[p.x, p.y, p.z]);
        }
        Ok(())
    })
}

/// Channels produced by a variant, or 0 for an unknown value.
#[no_mangle]
pub extern "C" fn bp_variant_channels(variant: u32) -> usize {
    match variant {
        0 | 2 => 3,
        1 => 6,
        3 => 1,
        _ => 0,
    }
}

/// Renders a conditioning map of `width x height` into `out` (channel-last f32, RGB values
/// in `[0, 1]`, depth in meters with 0 for background). `variant` takes a [`BpVariant`]
/// value.
///
/// # Safety
/// Handles must be live; `out` must point to `out_len` writable floats and `channels`, if
/// not null, to a writable size.
#[no_mangle]
pub unsafe extern "C" fn bp_render(
    camera: *const BpCamera,
    b: *const BpBox,
    variant: u32,
    width: u32,
    height: u32,
    out: *mut f32,
    out_len: usize,
    channels: *mut usize,
) -> BpStatus {
    guard(|| {
        let cam = &get(camera, "camera")?.0;
        let b = &get(b, "box")?.0;
        if width == 0 || height == 0 {
            return Err(Failure::new(BpStatus::InvalidArgument, "size must be positive"));
        }
        let c = bp_variant_channels(variant);
        if c == 0 {
            return Err(Failure::new(BpStatus::InvalidArgument, format!("unknown variant {variant}")));
        }
        let need = width as usize * height as usize * c;
        let dst = out_slice(out, out_len, need, "out")?;
        let size = (width, height);
        let palette = Palette::default();
        let map = match variant {
            0 => render_pose_map(cam, b, &palette, size)?,
            1 => render_six_channel(cam, b, size, DEFAULT_Z_NEAR)?,
            2 => render_visible_faces(cam, b, &palette, size, DEFAULT_Z_NEAR)?,
            _ => render_box_depthmap(cam, b, size, DEFAULT_Z_NEAR)?,
        };
        dst.copy_from_slice(&map.data);
        if !channels.is_null() {
            channels.write(c);
        }
        Ok(())
    })
}

/// Writes the convex-hull inpainting mask as `width * height` bytes of 0 or 255.
///
/// # Safety
/// Handles must be live; `out` must point to `out_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bp_hull_mask(
    camera: *const BpCamera,
    b: *const BpBox,
    width: u32,
    height: u32,
    out: *mut u8,
    out_len: usize,
) -> BpStatus {
    guard(|| {
        let cam = &get(camera, "camera")?.0;
        let b = &get(b, "box")?.0;
        if width == 0 || height == 0 {
            return Err(Failure::new(BpStatus::InvalidArgument, "size must be positive"));
        }
        let dst = out_slice(out, out_len, width as usize * height as usize, "out")?;
        let m = hull_mask(cam, b, (width, height), DEFAULT_Z_NEAR)?;
        for (d, &v) in dst.iter_mut().zip(m.data()) {
            *d = if v { 255 } else { 0 };
        }
        Ok(())
    })
}

/// 16 values: normalized `(u, v)` of each corner.
///
/// # Safety
/// Handles must be live; `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bp_encode_corners_2d(camera: *const BpCamera, b: *const BpBox, out: *mut f64, out_len: usize) -> BpStatus {
    guard(|| {
        let v = encode_corners_2d(&get(camera, "camera")?.0, &get(b, "box")?.0)?;
        out_slice(out, out_len, 16, "out")?.copy_from_slice(&v);
        Ok(())
    })
}

/// 24 values: normalized `(u, v)` and camera depth of each corner.
///
/// # Safety
/// Handles must be live; `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bp_encode_corners_25d(camera: *const BpCamera, b: *const BpBox, out: *mut f64, out_len: usize) -> BpStatus {
    guard(|| {
        let v = encode_corners_25d(&get(camera, "camera")?.0, &get(b, "box")?.0)?;
        out_slice(out, out_len, 24, "out")?.copy_from_slice(&v);
        Ok(())
    })
}

/// Sinusoidal embedding with `2 * bands` outputs per input value.
///
/// # Safety
/// `values` must point to `n` doubles and `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bp_fourier_embed(values: *const f64, n: usize, bands: u32, out: *mut f64, out_len: usize) -> BpStatus {
    guard(|| {
        let v = fourier_embed(in_slice(values, n, "values")?, bands)?;
        out_slice(out, out_len, v.len(), "out")?.copy_from_slice(&v);
        Ok(())
    })
}

/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn bp_yaw_error(a: f64, b: f64, out: *mut f64) -> BpStatus {
    guard(|| write_out(out, yaw_error(a, b)?, "out"))
}

/// # Safety
/// `out` must point to a writable bool.
#[no_mangle]
pub unsafe extern "C" fn bp_is_flipped(aoe: f64, out: *mut bool) -> BpStatus {
    guard(|| write_out(out, is_flipped(aoe)?, "out"))
}

/// Fréchet distance between two row-major feature matrices of `n_a x dim` and `n_b x dim`.
///
/// # Safety
/// `a` and `b` must point to `n_a * dim` and `n_b * dim` floats; `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn bp_frechet_distance(
    a: *const f32,
    n_a: usize,
    b: *const f32,
    n_b: usize,
    dim: usize,
    out: *mut f64,
) -> BpStatus {
    guard(|| {
        let fa = FeatureSet::new(n_a, dim, in_slice(a, n_a * dim, "a")?.to_vec(), "a")?;
        let fb = FeatureSet::new(n_b, dim, in_slice(b, n_b * dim, "b")?.to_vec(), "b")?;
        write_out(out, frechet_distance(&fa, &fb)?, "out")
    })
}
