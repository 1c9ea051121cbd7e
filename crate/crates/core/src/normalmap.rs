//! Per-pixel surface-normal maps.
//!
//! Normals live in camera space: x right, y down, z toward the viewer. The
//! 8-bit encoding maps each component with `c = round((n + 1) / 2 * 255)`, so
//! a camera-facing normal is stored as `(128, 128, 255)`.

use std::io::{Read, Write};

use image::{DynamicImage, GrayImage, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::geometry::{ImageSize, UnitVec3, Vec3};

pub const RAW_MAGIC: [u8; 4] = *b"NRM1";

const UNIT_TOLERANCE: f64 = 1e-6;

/// Row-major grid of unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    width: u32,
    height: u32,
    data: Vec<UnitVec3>,
}

impl NormalField {
    pub fn new(width: u32, height: u32, data: Vec<UnitVec3>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidInput(format!(
                "normal field {width}x{height} needs {} vectors, got {}",
                width as usize * height as usize,
                data.len()
            )));
        }
        Ok(NormalField { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> UnitVec3) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        NormalField { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> ImageSize {
        ImageSize::new(self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> UnitVec3 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, n: UnitVec3) {
        self.data[y as usize * self.width as usize + x as usize] = n;
    }

    pub fn data(&self) -> &[UnitVec3] {
        &self.data
    }

    /// Sub-rectangle; panics if it does not fit.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> NormalField {
        assert!(x + w <= self.width && y + h <= self.height, "crop out of bounds");
        NormalField::from_fn(w, h, |i, j| self.get(x + i, y + j))
    }

    /// Nearest-neighbor upsampling by an integer factor.
    pub fn upsample(&self, factor: u32) -> NormalField {
        NormalField::from_fn(self.width * factor, self.height * factor, |x, y| {
            self.get(x / factor, y / factor)
        })
    }
}

/// Boolean region mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl RoiMask {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidInput(format!(
                "mask {width}x{height} needs {} entries, got {}",
                width as usize * height as usize,
                data.len()
            )));
        }
        Ok(RoiMask { width, height, data })
    }

    pub fn full(width: u32, height: u32) -> Self {
        RoiMask {
            width,
            height,
            data: vec![true; width as usize * height as usize],
        }
    }

    /// Pixels whose index lies in `[x, x + w) × [y, y + h)`, clipped to the mask.
    pub fn from_rect(width: u32, height: u32, x: u32, y: u32, w: u32, h: u32) -> Self {
        let mut m = RoiMask {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        };
        for j in y..(y.saturating_add(h)).min(height) {
            for i in x..(x.saturating_add(w)).min(width) {
                m.data[j as usize * width as usize + i as usize] = true;
            }
        }
        m
    }

    /// Nonzero pixels are inside the region.
    pub fn from_gray(img: &GrayImage) -> Self {
        RoiMask {
            width: img.width(),
            height: img.height(),
            data: img.pixels().map(|p| p[0] != 0).collect(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> ImageSize {
        ImageSize::new(self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Bounding rectangle of the selected pixels as `(x, y, w, h)`.
    pub fn bounding_rect(&self) -> Option<(u32, u32, u32, u32)> {
        let mut bounds: Option<(u32, u32, u32, u32)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bounds = Some(match bounds {
                        None => (x, y, x, y),
                        Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                    });
                }
            }
        }
        bounds.map(|(a, b, c, d)| (a, b, c - a + 1, d - b + 1))
    }

    pub fn intersect(&self, other: &RoiMask) -> Result<RoiMask> {
        ensure_same_size(self.size(), other.size())?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect();
        Ok(RoiMask {
            width: self.width,
            height: self.height,
            data,
        })
    }

    pub fn upsample(&self, factor: u32) -> RoiMask {
        let (w, h) = (self.width * factor, self.height * factor);
        let mut data = Vec::with_capacity(w as usize * h as usize);
        for y in 0..h {
            for x in 0..w {
                data.push(self.get(x / factor, y / factor));
            }
        }
        RoiMask { width: w, height: h, data }
    }
}

pub(crate) fn ensure_same_size(a: ImageSize, b: ImageSize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            left_width: a.width,
            left_height: a.height,
            right_width: b.width,
            right_height: b.height,
        });
    }
    Ok(())
}

/// A decoded map together with the count of pixels that decoded to
/// (near) zero and were replaced by the camera-facing normal.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub field: NormalField,
    pub replaced_zero: usize,
}

fn raw_decode(c: [u8; 3]) -> Vec3 {
    let f = |v: u8| f64::from(v) / 255.0 * 2.0 - 1.0;
    Vec3::new(f(c[0]), f(c[1]), f(c[2]))
}

fn encode_one(n: Vec3) -> [u8; 3] {
    let f = |v: f64| ((v + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0) as u8;
    [f(n.x), f(n.y), f(n.z)]
}

/// Decodes one code. The renormalized vector may re-encode to a neighboring
/// code, so the code is first walked to the stable code its own decode maps
/// back onto; decoding that gives a quantization fixpoint. The walk settles
/// within two steps for every 24-bit code.
pub fn decode_pixel(c: [u8; 3]) -> Option<UnitVec3> {
    let mut code = c;
    let mut n = None;
    for _ in 0..8 {
        let raw = raw_decode(code);
        if raw.norm() < 1e-3 {
            return None;
        }
        let unit = UnitVec3::new(raw).ok()?;
        n = Some(unit);
        let next = encode_one(unit.get());
        if next == code {
            break;
        }
        code = next;
    }
    n
}

pub fn encode_pixel(n: UnitVec3) -> [u8; 3] {
    encode_one(n.get())
}

pub fn decode_rgb(img: &RgbImage) -> Decoded {
    let mut replaced_zero = 0;
    let data = img
        .pixels()
        .map(|p| {
            decode_pixel(p.0).unwrap_or_else(|| {
                replaced_zero += 1;
                UnitVec3::Z
            })
        })
        .collect();
    Decoded {
        field: NormalField {
            width: img.width(),
            height: img.height(),
            data,
        },
        replaced_zero,
    }
}

/// Decodes an 8-bit RGB normal map; any other pixel layout is rejected.
pub fn decode_normal_map(img: &DynamicImage) -> Result<Decoded> {
    match img {
        DynamicImage::ImageRgb8(rgb) => Ok(decode_rgb(rgb)),
        other => Err(Error::InvalidImage(format!(
            "normal map must be 8-bit RGB, got {:?}",
            other.color()
        ))),
    }
}

pub fn encode_normal_map(field: &NormalField) -> RgbImage {
    RgbImage::from_fn(field.width, field.height, |x, y| Rgb(encode_pixel(field.get(x, y))))
}

pub fn write_raw<W: Write>(field: &NormalField, mut out: W) -> std::io::Result<()> {
    out.write_all(&to_raw_bytes(field))
}

pub fn to_raw_bytes(field: &NormalField) -> Vec<u8> {
    let mut buf = Vec::with_capacity(12 + field.data.len() * 12);
    buf.extend_from_slice(&RAW_MAGIC);
    buf.extend_from_slice(&field.width.to_le_bytes());
    buf.extend_from_slice(&field.height.to_le_bytes());
    for n in &field.data {
        for c in n.to_array() {
            buf.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    buf
}

pub fn read_raw<R: Read>(mut input: R) -> Result<NormalField> {
    let mut buf = Vec::new();
    input
        .read_to_end(&mut buf)
        .map_err(|e| Error::io("<raw normal stream>", e))?;
    from_raw_bytes(&buf)
}

/// Parses the `NRM1` layout. Stored vectors within 1e-6 of unit length are
/// kept as-is so writing them back is byte-identical; others are renormalized.
pub fn from_raw_bytes(buf: &[u8]) -> Result<NormalField> {
    if buf.len() < 4 {
        return Err(Error::TruncatedFile {
            expected: 12,
            actual: buf.len(),
        });
    }
    let magic: [u8; 4] = buf[..4].try_into().unwrap();
    if magic != RAW_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if buf.len() < 12 {
        return Err(Error::TruncatedFile {
            expected: 12,
            actual: buf.len(),
        });
    }
    let width = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    let count = width as usize * height as usize;
    let expected = 12 + count * 12;
    if buf.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            actual: buf.len(),
        });
    }
    if buf.len() > expected {
        return Err(Error::InvalidInput(format!(
            "raw normal file has {} trailing bytes",
            buf.len() - expected
        )));
    }
    let comp = |i: usize| f64::from(f32::from_le_bytes(buf[i..i + 4].try_into().unwrap()));
    let mut data = Vec::with_capacity(count);
    for k in 0..count {
        let base = 12 + k * 12;
        let v = Vec3::new(comp(base), comp(base + 4), comp(base + 8));
        if !v.is_finite() || v.norm() < 1e-3 {
            return Err(Error::ZeroNormal);
        }
        if (v.norm() - 1.0).abs() <= UNIT_TOLERANCE {
            data.push(UnitVec3::new_unchecked(v));
        } else {
            data.push(UnitVec3::new(v)?);
        }
    }
    Ok(NormalField { width, height, data })
}

/// Renormalized mean of the normals under `roi`.
pub fn dominant_normal(field: &NormalField, roi: &RoiMask) -> Result<UnitVec3> {
    ensure_same_size(field.size(), roi.size())?;
    let mut sum = Vec3::default();
    let mut count = 0usize;
    for (n, &inside) in field.data.iter().zip(&roi.data) {
        if inside {
            sum = sum + n.get();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyRoi);
    }
    let mean = sum * (1.0 / count as f64);
    let magnitude = mean.norm();
    if magnitude < 0.1 {
        return Err(Error::IncoherentNormals { magnitude });
    }
    UnitVec3::new(mean)
}

pub fn synth_plane(n: UnitVec3, width: u32, height: u32) -> NormalField {
    NormalField {
        width,
        height,
        data: vec![n; width as usize * height as usize],
    }
}

/// Two planes meeting at column `split_col`.
pub fn synth_dihedral(
    left: UnitVec3,
    right: UnitVec3,
    width: u32,
    height: u32,
    split_col: u32,
) -> Result<NormalField> {
    if split_col == 0 || split_col >= width {
        return Err(Error::InvalidInput(format!(
            "split column must lie in (0, {width}), got {split_col}"
        )));
    }
    Ok(NormalField::from_fn(width, height, |x, _| {
        if x < split_col {
            left
        } else {
            right
        }
    }))
}
