//! Uniform-grid placement of text inside a rectangular region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox2D;

use super::glyphs::GlyphSet;
use super::CharBox;

pub const MIN_FONT_HEIGHT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Align {
    Left,
    #[default]
    Center,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    /// Cell width over cell height.
    pub char_aspect: f64,
    /// Horizontal gap as a fraction of the cell width.
    pub char_gap_frac: f64,
    /// Vertical gap as a fraction of the cell height.
    pub line_gap_frac: f64,
    /// Margin on each side as a fraction of the region size.
    pub margin_frac: f64,
    pub align: Align,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            char_aspect: 0.6,
            char_gap_frac: 0.1,
            line_gap_frac: 0.25,
            margin_frac: 0.05,
            align: Align::Center,
        }
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<()> {
        let fracs = [
            ("char_gap_frac", self.char_gap_frac),
            ("line_gap_frac", self.line_gap_frac),
            ("margin_frac", self.margin_frac),
        ];
        for (name, v) in fracs {
            if !(0.0..=0.5).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 0.5], got {v}")));
            }
        }
        if !(self.char_aspect > 0.1 && self.char_aspect < 2.0) {
            return Err(Error::InvalidInput(format!(
                "char_aspect must lie in (0.1, 2), got {}",
                self.char_aspect
            )));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle by top-left corner and size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect { x, y, w, h }
    }
}

/// Cell layout for `text`, checked against the built-in glyph set.
pub fn layout_text(text: &str, roi: Rect, cfg: &LayoutConfig) -> Result<Vec<CharBox>> {
    layout_text_with(text, roi, cfg, GlyphSet::builtin())
}

pub fn layout_text_with(
    text: &str,
    roi: Rect,
    cfg: &LayoutConfig,
    glyphs: &GlyphSet,
) -> Result<Vec<CharBox>> {
    cfg.validate()?;
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::InvalidInput("text is empty".into()));
    }
    if !(roi.w > 0.0 && roi.h > 0.0) || ![roi.x, roi.y, roi.w, roi.h].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(format!("region must have positive area, got {roi:?}")));
    }
    let lines: Vec<Vec<char>> = text
        .split('\n')
        .map(|l| l.trim_end().chars().collect())
        .collect();
    if let Some(&bad) = lines
        .iter()
        .flatten()
        .find(|&&c| c != ' ' && !glyphs.contains(c))
    {
        return Err(Error::UnsupportedCharacter(bad));
    }

    let inner_x = roi.x + roi.w * cfg.margin_frac;
    let inner_y = roi.y + roi.h * cfg.margin_frac;
    let inner_w = roi.w * (1.0 - 2.0 * cfg.margin_frac);
    let inner_h = roi.h * (1.0 - 2.0 * cfg.margin_frac);

    let widest = lines.iter().map(Vec::len).max().unwrap_or(0).max(1) as f64;
    let rows = lines.len() as f64;
    // line width = h * aspect * (n + (n - 1) * gap); stack height = h * (L + (L - 1) * line_gap)
    let by_width = inner_w / (cfg.char_aspect * (widest + (widest - 1.0) * cfg.char_gap_frac));
    let by_height = inner_h / (rows + (rows - 1.0) * cfg.line_gap_frac);
    let height = by_width.min(by_height);
    // NaN from a degenerate region also lands here
    if height.is_nan() || height < MIN_FONT_HEIGHT {
        return Err(Error::RoiTooSmall { height });
    }

    let cell_w = cfg.char_aspect * height;
    let pitch_x = cell_w * (1.0 + cfg.char_gap_frac);
    let pitch_y = height * (1.0 + cfg.line_gap_frac);
    let stack_h = height * (rows + (rows - 1.0) * cfg.line_gap_frac);
    let top = inner_y + (inner_h - stack_h) / 2.0;

    let mut out = Vec::new();
    for (row, line) in lines.iter().enumerate() {
        let n = line.len() as f64;
        let line_w = if line.is_empty() {
            0.0
        } else {
            cell_w * (n + (n - 1.0) * cfg.char_gap_frac)
        };
        let left = match cfg.align {
            Align::Left => inner_x,
            Align::Center => inner_x + (inner_w - line_w) / 2.0,
            Align::Right => inner_x + inner_w - line_w,
        };
        let cy = top + row as f64 * pitch_y + height / 2.0;
        for (col, &ch) in line.iter().enumerate() {
            if ch == ' ' {
                continue;
            }
            let cx = left + col as f64 * pitch_x + cell_w / 2.0;
            out.push(CharBox {
                ch,
                bbox: BBox2D::new(cx, cy, cell_w, height)?,
            });
        }
    }
    Ok(out)
}
