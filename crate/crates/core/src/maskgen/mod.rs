//! Character masks: layout, surface alignment, rasterization and export of
//! the conditioning files.

pub mod export;
pub mod glyphs;
pub mod layout;
pub mod raster;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{align_bbox, BBox2D, ProjectionConfig, Quad2D, UnitVec3, Vec3};
use crate::normalmap::{dominant_normal, NormalField, RoiMask};

pub use export::{export_conditioning, render_preview, ConditioningSet, ExportResult, Manifest};
pub use glyphs::{Glyph, GlyphSet};
pub use layout::{layout_text, layout_text_with, Align, LayoutConfig, Rect};
pub use raster::{rasterize_mask, rasterize_mask_with, MaskImage};

/// One cell of the unaligned character mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharBox {
    pub ch: char,
    pub bbox: BBox2D,
}

/// One cell of the aligned character mask, with the normal it was aligned to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharQuad {
    pub ch: char,
    pub quad: Quad2D,
    pub normal: UnitVec3,
}

impl CharQuad {
    /// The box itself as a quad, as if aligned to a frontal surface.
    pub fn unaligned(b: &CharBox) -> Self {
        CharQuad {
            ch: b.ch,
            quad: b.bbox.to_quad(),
            normal: UnitVec3::Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalMode {
    /// One dominant normal over the whole region.
    #[default]
    Region,
    /// A dominant normal per character over region ∩ box.
    PerChar,
}

/// Pixels whose centers fall inside `b`.
fn box_mask(b: &BBox2D, width: u32, height: u32) -> RoiMask {
    let x0 = (b.min_x() - 0.5).ceil().max(0.0) as u32;
    let y0 = (b.min_y() - 0.5).ceil().max(0.0) as u32;
    let x1 = ((b.max_x() - 0.5).floor() + 1.0).clamp(0.0, f64::from(width)) as u32;
    let y1 = ((b.max_y() - 0.5).floor() + 1.0).clamp(0.0, f64::from(height)) as u32;
    RoiMask::from_rect(width, height, x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
}

/// Aligns every box with the surface. Output order matches input order;
/// errors carry the index of the offending box.
pub fn align_char_boxes(
    boxes: &[CharBox],
    field: &NormalField,
    roi: &RoiMask,
    cfg: &ProjectionConfig,
    mode: NormalMode,
) -> Result<Vec<CharQuad>> {
    cfg.validate()?;
    let size = field.size();
    let region = match mode {
        NormalMode::Region => Some(dominant_normal(field, roi)?),
        NormalMode::PerChar => None,
    };
    boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let wrap = |e| Error::at_box(i, e);
            if !b.bbox.within(size) {
                return Err(wrap(Error::InvalidInput(format!(
                    "box {:?} lies outside the {}x{} field",
                    b.bbox, size.width, size.height
                ))));
            }
            let normal = match region {
                Some(n) => n,
                None => {
                    let local = roi.intersect(&box_mask(&b.bbox, size.width, size.height))?;
                    dominant_normal(field, &local).map_err(wrap)?
                }
            };
            let quad = align_bbox(&b.bbox, normal, cfg, size).map_err(wrap)?;
            Ok(CharQuad { ch: b.ch, quad, normal })
        })
        .collect()
}

/// Renormalized mean of the per-character normals, for reporting.
pub fn summary_normal(quads: &[CharQuad]) -> Option<UnitVec3> {
    let sum = quads.iter().fold(Vec3::default(), |s, q| s + q.normal.get());
    UnitVec3::new(sum).ok()
}
