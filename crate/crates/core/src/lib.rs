//! Box-pose conditioning, masking, cropping and evaluation toolkit for 3D-aware vehicle
//! editing in driving imagery.
//!
//! The crate turns annotated 3D boxes into conditioning maps and inpainting masks, prepares
//! square crops, generates edit and placement instructions, and scores detector outputs on
//! the edited images.

pub mod benchmark;
pub mod cli;
pub mod conditioning;
pub mod crops;
pub mod formats;
pub mod geometry;
pub mod masks;
pub mod metrics;
pub mod raster;

pub use geometry::{Box3D, BoxSize, Camera, CameraPoint, Face, Pixel};
