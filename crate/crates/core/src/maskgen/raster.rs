use image::{GrayImage, Luma};

use crate::error::{Error, Result};
use crate::geometry::{homography_from_quads, ImageSize, Point2, Quad2D};

use super::glyphs::GlyphSet;
use super::CharQuad;

/// Strictly binary mask: every pixel is 0 or 255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl MaskImage {
    pub fn blank(size: ImageSize) -> Self {
        MaskImage {
            width: size.width,
            height: size.height,
            data: vec![0; size.pixel_count()],
        }
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

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn lit_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 255).count()
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0 || v == 255)
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| Luma([self.get(x, y)]))
    }
}

// Sub-micro-pixel drift between equivalent quads must not change which
// pixels light up.
const SNAP: f64 = 1024.0;

fn snap(q: &Quad2D) -> Quad2D {
    Quad2D::new(q.corners.map(|p| Point2::new((p.x * SNAP).round() / SNAP, (p.y * SNAP).round() / SNAP)))
}

pub fn rasterize_mask(quads: &[CharQuad], size: ImageSize) -> Result<MaskImage> {
    rasterize_mask_with(quads, size, GlyphSet::builtin())
}

/// Stamps each glyph into its quad. Pixel centers inside a quad's bounds are
/// pulled back through the unit-square→quad homography and sample the stamp
/// at the nearest texel; portions outside the image are clipped.
pub fn rasterize_mask_with(quads: &[CharQuad], size: ImageSize, glyphs: &GlyphSet) -> Result<MaskImage> {
    let mut mask = MaskImage::blank(size);
    for (i, cq) in quads.iter().enumerate() {
        let glyph = glyphs
            .get(cq.ch)
            .ok_or_else(|| Error::at_box(i, Error::UnsupportedCharacter(cq.ch)))?;
        let quad = snap(&cq.quad);
        let to_quad = homography_from_quads(&Quad2D::UNIT_SQUARE, &quad).map_err(|e| Error::at_box(i, e))?;
        let to_unit = to_quad.inverse().map_err(|e| Error::at_box(i, e))?;

        let (min_x, min_y, max_x, max_y) = quad.bounds();
        let x0 = min_x.floor().max(0.0) as u32;
        let y0 = min_y.floor().max(0.0) as u32;
        let x1 = max_x.ceil().clamp(0.0, f64::from(size.width)) as u32;
        let y1 = max_y.ceil().clamp(0.0, f64::from(size.height)) as u32;
        for y in y0..y1 {
            for x in x0..x1 {
                let center = Point2::new(f64::from(x) + 0.5, f64::from(y) + 0.5);
                let Ok(uv) = to_unit.apply(center) else { continue };
                if glyph.sample(uv.x, uv.y) {
                    mask.data[y as usize * size.width as usize + x as usize] = 255;
                }
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BBox2D, UnitVec3};
    use crate::maskgen::CharBox;

    fn frontal(ch: char, b: BBox2D) -> CharQuad {
        CharQuad::unaligned(&CharBox { ch, bbox: b })
    }

    #[test]
    fn empty_list_gives_blank_mask() {
        let m = rasterize_mask(&[], ImageSize::new(12, 9)).unwrap();
        assert_eq!(m.lit_count(), 0);
        assert_eq!(m.data().len(), 108);
    }

    #[test]
    fn frontal_i_matches_scaled_stamp() {
        let g = GlyphSet::builtin().get('I').unwrap();
        let (w, h) = (333.0, 517.0);
        let q = frontal('I', BBox2D::from_corner(30.5, 20.25, w, h).unwrap());
        let m = rasterize_mask(&[q], ImageSize::new(400, 600)).unwrap();
        let expected = g.ink_count() as f64 * w * h / f64::from(g.size() * g.size());
        let got = m.lit_count() as f64;
        assert!((got - expected).abs() / expected < 0.02, "{got} vs {expected}");
        assert!(m.is_binary());
    }

    #[test]
    fn quad_corners_pull_back_to_unit_square() {
        let quad = Quad2D::new([
            Point2::new(12.0, 10.0),
            Point2::new(52.5, 14.0),
            Point2::new(50.0, 70.25),
            Point2::new(8.0, 64.0),
        ]);
        let h = homography_from_quads(&Quad2D::UNIT_SQUARE, &quad).unwrap().inverse().unwrap();
        for (c, u) in quad.corners.iter().zip(Quad2D::UNIT_SQUARE.corners) {
            assert!(h.apply(*c).unwrap().distance(u) < 1e-6);
        }
    }

    #[test]
    fn lit_pixels_stay_inside_quads() {
        let q = CharQuad {
            ch: 'W',
            quad: Quad2D::new([
                Point2::new(10.0, 12.0),
                Point2::new(60.0, 4.0),
                Point2::new(66.0, 70.0),
                Point2::new(14.0, 60.0),
            ]),
            normal: UnitVec3::Z,
        };
        let m = rasterize_mask(&[q], ImageSize::new(80, 80)).unwrap();
        assert!(m.lit_count() > 100);
        for y in 0..80 {
            for x in 0..80 {
                if m.get(x, y) == 255 {
                    let p = Point2::new(f64::from(x) + 0.5, f64::from(y) + 0.5);
                    assert!(q.quad.contains(p), "({x},{y})");
                }
            }
        }
    }

    #[test]
    fn clipped_at_image_border() {
        let q = frontal('H', BBox2D::from_corner(-20.0, -10.0, 60.0, 80.0).unwrap());
        let m = rasterize_mask(&[q], ImageSize::new(30, 30)).unwrap();
        assert!(m.lit_count() > 0);
        assert!(m.is_binary());
    }

    #[test]
    fn unknown_glyph() {
        let q = frontal('~', BBox2D::from_corner(0.0, 0.0, 10.0, 10.0).unwrap());
        assert!(rasterize_mask(&[q], ImageSize::new(20, 20)).is_err());
    }
}
