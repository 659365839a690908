//! File formats: 8-bit PNG images and masks, 16-bit depth PNG, and the little-endian
//! `CMAP` tensor and `FEAT` feature containers.

use std::fs::File;
use std::io::{BufWriter, Cursor, Write};
use std::path::Path;

use thiserror::Error;

use crate::conditioning::ConditioningMap;
use crate::crops::Image8;
use crate::masks::BinaryMask;
use crate::metrics::FeatureSet;

pub const CMAP_MAGIC: &[u8; 4] = b"CMAP";
pub const FEAT_MAGIC: &[u8; 4] = b"FEAT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("PNG error: {0}")]
    Png(String),
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: String },
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("truncated or oversized payload: expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
    #[error("unsupported layout: {0}")]
    Unsupported(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let mut f = BufWriter::new(File::create(path).map_err(io_err(path))?);
    f.write_all(bytes).map_err(io_err(path))?;
    f.flush().map_err(io_err(path))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(io_err(path))
}

/// `round(v * 255)` with halves rounded up, clamped to `[0, 255]`.
pub fn quantize_unit(v: f32) -> u8 {
    (v as f64 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Quantizes a 1- or 3-channel map with values in `[0, 1]`.
pub fn map_to_image8(map: &ConditioningMap) -> Result<Image8, FormatError> {
    if !matches!(map.channels, 1 | 3) {
        return Err(FormatError::Unsupported(format!("{} channels cannot be stored as 8-bit PNG", map.channels)));
    }
    Ok(Image8 {
        width: map.width,
        height: map.height,
        channels: map.channels,
        data: map.data.iter().map(|&v| quantize_unit(v)).collect(),
    })
}

fn png_error(e: impl std::fmt::Display) -> FormatError {
    FormatError::Png(e.to_string())
}

fn encode_png_raw(width: u32, height: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Result<Vec<u8>, FormatError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(color);
        enc.set_depth(depth);
        // pinned so encoder defaults cannot change output bytes
        enc.set_compression(png::Compression::Balanced);
        enc.set_filter(png::Filter::Adaptive);
        let mut w = enc.write_header().map_err(png_error)?;
        w.write_image_data(data).map_err(png_error)?;
        w.finish().map_err(png_error)?;
    }
    Ok(out)
}

pub fn encode_png(image: &Image8) -> Result<Vec<u8>, FormatError> {
    let color = match image.channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        4 => png::ColorType::Rgba,
        c => return Err(FormatError::Unsupported(format!("{c}-channel PNG"))),
    };
    encode_png_raw(image.width, image.height, color, png::BitDepth::Eight, &image.data)
}

pub fn write_png(path: &Path, image: &Image8) -> Result<(), FormatError> {
    write_bytes(path, &encode_png(image)?)
}

/// Decodes to 8-bit gray, RGB or RGBA; palettes are expanded and 16-bit samples stripped.
pub fn decode_png(bytes: &[u8]) -> Result<Image8, FormatError> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = dec.read_info().map_err(png_error)?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| png_error("image too large"))?];
    let info = reader.next_frame(&mut buf).map_err(png_error)?;
    buf.truncate(info.buffer_size());
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(FormatError::Unsupported("indexed PNG".into())),
    };
    Ok(Image8 { width: info.width, height: info.height, channels, data: buf })
}

pub fn read_png(path: &Path) -> Result<Image8, FormatError> {
    decode_png(&read_bytes(path)?)
}

pub fn write_rgb_png(path: &Path, map: &ConditioningMap) -> Result<(), FormatError> {
    write_png(path, &map_to_image8(map)?)
}

/// Depth in millimeters, rounded to nearest, saturating at 65535; 0 stays background.
pub fn depth_to_mm(v: f32) -> u16 {
    if !(v > 0.0) {
        return 0;
    }
    (v as f64 * 1000.0).round().min(65535.0) as u16
}

pub fn encode_depth_png(map: &ConditioningMap) -> Result<Vec<u8>, FormatError> {
    if map.channels != 1 {
        return Err(FormatError::Unsupported(format!("depth map with {} channels", map.channels)));
    }
    let data: Vec<u8> = map.data.iter().flat_map(|&v| depth_to_mm(v).to_be_bytes()).collect();
    encode_png_raw(map.width, map.height, png::ColorType::Grayscale, png::BitDepth::Sixteen, &data)
}

pub fn write_depth_png(path: &Path, map: &ConditioningMap) -> Result<(), FormatError> {
    write_bytes(path, &encode_depth_png(map)?)
}

/// Returns `(width, height, millimeters)`.
pub fn read_depth_png(path: &Path) -> Result<(u32, u32, Vec<u16>), FormatError> {
    let bytes = read_bytes(path)?;
    let dec = png::Decoder::new(Cursor::new(&bytes[..]));
    let mut reader = dec.read_info().map_err(png_error)?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| png_error("image too large"))?];
    let info = reader.next_frame(&mut buf).map_err(png_error)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(FormatError::Unsupported("depth PNG must be 16-bit grayscale".into()));
    }
    buf.truncate(info.buffer_size());
    let mm = buf.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect();
    Ok((info.width, info.height, mm))
}

pub fn write_mask_png(path: &Path, mask: &BinaryMask) -> Result<(), FormatError> {
    write_png(path, &Image8::from_mask(mask))
}

/// Any first-channel value of 128 or more reads as set.
pub fn read_mask_png(path: &Path) -> Result<BinaryMask, FormatError> {
    Ok(read_png(path)?.to_mask())
}

fn header(magic: &[u8; 4], dims: &[u32]) -> Vec<u8> {
    let mut out = magic.to_vec();
    out.extend(FORMAT_VERSION.to_le_bytes());
    for d in dims {
        out.extend(d.to_le_bytes());
    }
    out
}

fn parse_header<'a, const N: usize>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<([u32; N], &'a [u8]), FormatError> {
    let head = 8 + 4 * N;
    if bytes.len() < head {
        return Err(FormatError::Length { expected: head, got: bytes.len() });
    }
    if &bytes[..4] != magic {
        return Err(FormatError::BadMagic { expected: String::from_utf8_lossy(magic).into_owned() });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(FormatError::Version(version));
    }
    let mut dims = [0u32; N];
    for (k, d) in dims.iter_mut().enumerate() {
        *d = word(8 + 4 * k);
    }
    Ok((dims, &bytes[head..]))
}

fn f32_payload(body: &[u8], count: usize) -> Result<Vec<f32>, FormatError> {
    let expected = count * 4;
    if body.len() != expected {
        return Err(FormatError::Length { expected, got: body.len() });
    }
    Ok(body.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
}

pub fn encode_cmap(map: &ConditioningMap) -> Vec<u8> {
    let mut out = header(CMAP_MAGIC, &[map.height, map.width, map.channels as u32]);
    out.reserve(map.data.len() * 4);
    for v in &map.data {
        out.extend(v.to_le_bytes());
    }
    out
}

pub fn decode_cmap(bytes: &[u8]) -> Result<ConditioningMap, FormatError> {
    let ([h, w, c], body) = parse_header::<3>(bytes, CMAP_MAGIC)?;
    let data = f32_payload(body, h as usize * w as usize * c as usize)?;
    Ok(ConditioningMap { width: w, height: h, channels: c as usize, data })
}

pub fn write_cmap(path: &Path, map: &ConditioningMap) -> Result<(), FormatError> {
    write_bytes(path, &encode_cmap(map))
}

pub fn read_cmap(path: &Path) -> Result<ConditioningMap, FormatError> {
    decode_cmap(&read_bytes(path)?)
}

pub fn encode_feat(set: &FeatureSet) -> Vec<u8> {
    let mut out = header(FEAT_MAGIC, &[set.len() as u32, set.dim() as u32]);
    for v in set.data() {
        out.extend(v.to_le_bytes());
    }
    out
}

pub fn decode_feat(bytes: &[u8], source: &str) -> Result<FeatureSet, FormatError> {
    let ([n, d], body) = parse_header::<2>(bytes, FEAT_MAGIC)?;
    let data = f32_payload(body, n as usize * d as usize)?;
    FeatureSet::new(n as usize, d as usize, data, source).map_err(|e| FormatError::Unsupported(e.to_string()))
}

pub fn write_feat(path: &Path, set: &FeatureSet) -> Result<(), FormatError> {
    write_bytes(path, &encode_feat(set))
}

pub fn read_feat(path: &Path) -> Result<FeatureSet, FormatError> {
    decode_feat(&read_bytes(path)?, &path.display().to_string())
}
