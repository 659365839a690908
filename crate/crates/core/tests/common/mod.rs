//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use boxpose::{Box3D, BoxSize, Camera};
use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Box-Muller standard normal.
pub fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Vehicle-style camera: positioned at `(x, y, height)` in a z-up world, looking along
/// world heading `heading`, with the optical axis horizontal.
#[derive(Debug, Clone, Copy)]
pub struct StreetRig {
    pub position: [f64; 3],
    pub heading: f64,
    pub f: f64,
    pub width: u32,
    pub height: u32,
}

impl StreetRig {
    pub fn new(width: u32, height: u32, f: f64) -> Self {
        Self { position: [0.0, 0.0, 1.5], heading: 0.0, f, width, height }
    }

    /// World-to-camera rotation, rows are the camera axes in world coordinates.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (s, c) = self.heading.sin_cos();
        let forward = Vector3::new(c, s, 0.0);
        let left = Vector3::new(-s, c, 0.0);
        let up = Vector3::z();
        Matrix3::from_rows(&[(-left).transpose(), (-up).transpose(), forward.transpose()])
    }

    pub fn to_camera(&self, p: [f64; 3]) -> Vector3<f64> {
        let rel = Vector3::from(p) - Vector3::from(self.position);
        self.rotation() * rel
    }

    pub fn cx(&self) -> f64 {
        (self.width as f64 - 1.0) / 2.0
    }

    pub fn cy(&self) -> f64 {
        (self.height as f64 - 1.0) / 2.0
    }

    pub fn camera(&self) -> Camera {
        let r = self.rotation();
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
        let t = -(r * Vector3::from(self.position));
        Camera::new(
            self.f,
            self.f,
            self.cx(),
            self.cy(),
            self.width,
            self.height,
            [q.w, q.i, q.j, q.k],
            [t.x, t.y, t.z],
        )
        .unwrap()
    }

    /// World point at camera-frame offsets `forward`, `right` and `down`.
    pub fn world_at(&self, forward: f64, right: f64, down: f64) -> [f64; 3] {
        let (s, c) = self.heading.sin_cos();
        let [x, y, z] = self.position;
        [x + c * forward + s * right, y + s * forward - c * right, z - down]
    }
}

/// Corners of a yaw-only box, computed from first principles, indexed by the sign bits of
/// the local offsets (bit 0: -length, bit 1: -width, bit 2: -height).
pub fn oracle_corners(center: [f64; 3], size: [f64; 3], yaw: f64) -> [[f64; 3]; 8] {
    let [w, l, h] = size;
    let (s, c) = yaw.sin_cos();
    std::array::from_fn(|k| {
        let lx = if k & 1 == 0 { l / 2.0 } else { -l / 2.0 };
        let ly = if k & 2 == 0 { w / 2.0 } else { -w / 2.0 };
        let lz = if k & 4 == 0 { h / 2.0 } else { -h / 2.0 };
        [center[0] + c * lx - s * ly, center[1] + s * lx + c * ly, center[2] + lz]
    })
}

pub fn make_box(center: [f64; 3], size: [f64; 3], yaw: f64) -> Box3D {
    Box3D::new(center, BoxSize::new(size[0], size[1], size[2]), yaw).unwrap()
}

/// Random car-to-bus sized box somewhere in the rig's field of view.
pub fn random_box(rng: &mut ChaCha20Rng, rig: &StreetRig, forward: (f64, f64)) -> Box3D {
    let d = uniform(rng, forward.0, forward.1);
    let half_fov = (rig.width as f64 / 2.0) / rig.f;
    let right = uniform(rng, -1.2, 1.2) * half_fov * d;
    let size = [uniform(rng, 0.6, 3.0), uniform(rng, 0.8, 9.0), uniform(rng, 0.6, 3.5)];
    let mut c = rig.world_at(d, right, 0.0);
    c[2] = uniform(rng, -0.5, 2.5);
    make_box(c, size, uniform(rng, -std::f64::consts::PI, std::f64::consts::PI))
}

/// Runs the CLI binary with `args`.
pub fn boxpose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boxpose"))
        .args(args)
        .output()
        .expect("spawn boxpose")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Every regular file under `root`, keyed by relative path.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
