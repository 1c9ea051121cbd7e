//! Conditioning file set for an external text-image generator.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{ImageSize, Point2, UnitVec3};
use crate::normalmap::{encode_normal_map, ensure_same_size, NormalField, RoiMask};

use super::raster::MaskImage;
use super::CharQuad;

pub const SOURCE_FILE: &str = "source.png";
pub const MASK_FILE: &str = "cmask_aligned.png";
pub const NORMALS_FILE: &str = "normals.png";
pub const ROI_FILE: &str = "roi.png";
pub const QUADS_FILE: &str = "quads.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub struct ConditioningSet<'a> {
    pub source: &'a RgbImage,
    pub mask: &'a MaskImage,
    pub field: &'a NormalField,
    pub roi: &'a RoiMask,
    pub quads: &'a [CharQuad],
    pub dominant_normal: UnitVec3,
    /// Settings that produced the set; hashed into the manifest.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<FileEntry>,
    pub width: u32,
    pub height: u32,
    pub char_count: usize,
    pub dominant_normal: [f64; 3],
    pub config_digest: String,
}

#[derive(Debug, Clone)]
pub struct ExportResult {
    pub manifest: Manifest,
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadRecord {
    pub ch: char,
    pub quad: [[f64; 2]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadsFile {
    pub chars: Vec<QuadRecord>,
    pub dominant_normal: [f64; 3],
}

// Nanopixel rounding hides last-bit float noise so equal layouts serialize
// identically; + 0.0 folds -0.0 into 0.0.
fn round_coord(v: f64) -> f64 {
    (v * 1e9).round() / 1e9 + 0.0
}

impl QuadsFile {
    pub fn new(quads: &[CharQuad], dominant_normal: UnitVec3) -> Self {
        QuadsFile {
            chars: quads
                .iter()
                .map(|q| QuadRecord {
                    ch: q.ch,
                    quad: q.quad.corners.map(|p| [round_coord(p.x), round_coord(p.y)]),
                })
                .collect(),
            dominant_normal: dominant_normal.to_array(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }

    pub fn corners(&self) -> Vec<[Point2; 4]> {
        self.chars
            .iter()
            .map(|r| r.quad.map(|[x, y]| Point2::new(x, y)))
            .collect()
    }
}

/// In-memory PNG encoding.
pub trait EncodePng {
    fn encode_png(&self) -> Result<Vec<u8>>;
}

impl<P, C> EncodePng for image::ImageBuffer<P, C>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    fn encode_png(&self) -> Result<Vec<u8>> {
        let mut buf = Cursor::new(Vec::new());
        self.write_to(&mut buf, ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: PathBuf::from("<png buffer>"),
                source,
            })?;
        Ok(buf.into_inner())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_digest(config: &serde_json::Value) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("json values always serialize"))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("plain data always serializes");
    out.push(b'\n');
    out
}

/// Writes the six conditioning files into `out_dir` (created if missing).
pub fn export_conditioning(set: &ConditioningSet<'_>, out_dir: &Path) -> Result<ExportResult> {
    let size = ImageSize::new(set.source.width(), set.source.height());
    ensure_same_size(size, set.mask.size())?;
    ensure_same_size(size, set.field.size())?;
    ensure_same_size(size, set.roi.size())?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let images: [(&str, Vec<u8>); 4] = [
        (SOURCE_FILE, set.source.encode_png()?),
        (MASK_FILE, set.mask.to_gray().encode_png()?),
        (NORMALS_FILE, encode_normal_map(set.field).encode_png()?),
        (ROI_FILE, set.roi.to_gray().encode_png()?),
    ];
    let quads = json_bytes(&QuadsFile::new(set.quads, set.dominant_normal));

    let mut files = Vec::new();
    let mut paths = Vec::new();
    for (name, bytes) in &images {
        paths.push(write_file(out_dir, name, bytes)?);
        files.push(FileEntry {
            name: name.to_string(),
            width: Some(size.width),
            height: Some(size.height),
            sha256: sha256_hex(bytes),
        });
    }
    paths.push(write_file(out_dir, QUADS_FILE, &quads)?);
    files.push(FileEntry {
        name: QUADS_FILE.into(),
        width: None,
        height: None,
        sha256: sha256_hex(&quads),
    });

    let manifest = Manifest {
        files,
        width: size.width,
        height: size.height,
        char_count: set.quads.len(),
        dominant_normal: set.dominant_normal.to_array(),
        config_digest: config_digest(&set.config),
    };
    paths.push(write_file(out_dir, MANIFEST_FILE, &json_bytes(&manifest))?);
    Ok(ExportResult { manifest, paths })
}

/// Source image with every quad outlined in red.
pub fn render_preview(source: &RgbImage, quads: &[CharQuad]) -> RgbImage {
    let mut img = source.clone();
    for q in quads {
        for i in 0..4 {
            draw_line(&mut img, q.quad.corners[i], q.quad.corners[(i + 1) % 4], Rgb([255, 0, 0]));
        }
    }
    img
}

fn draw_line(img: &mut RgbImage, a: Point2, b: Point2, color: Rgb<u8>) {
    let steps = (b.x - a.x).abs().max((b.y - a.y).abs()).ceil().max(1.0) as u32;
    for s in 0..=steps {
        let t = f64::from(s) / f64::from(steps);
        let x = (a.x + (b.x - a.x) * t).floor();
        let y = (a.y + (b.y - a.y) * t).floor();
        if x >= 0.0 && y >= 0.0 && x < f64::from(img.width()) && y < f64::from(img.height()) {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}
