//! Binary glyph stamps on the unit square.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const STAMP_SIZE: u32 = 64;

// 5x7 cell font. Rows top to bottom, '#' is ink.
const FONT: &[(char, [&str; 7])] = &[
    ('A', [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('B', ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."]),
    ('C', [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    ('D', ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."]),
    ('E', ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('F', ["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    ('G', [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."]),
    ('H', ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('I', [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('J', ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('K', ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    ('L', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('M', ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"]),
    ('N', ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"]),
    ('O', [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('P', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('Q', [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"]),
    ('R', ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('S', [".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    ('T', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('U', ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('V', ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('W', ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."]),
    ('X', ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    ('Y', ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    ('Z', ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"]),
    ('0', [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."]),
    ('1', ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('2', [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"]),
    ('3', ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."]),
    ('4', ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."]),
    ('5', ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."]),
    ('6', ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."]),
    ('7', ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."]),
    ('8', [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."]),
    ('9', [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."]),
    ('.', [".....", ".....", ".....", ".....", ".....", ".##..", ".##.."]),
    (',', [".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."]),
    ('-', [".....", ".....", ".....", "#####", ".....", ".....", "....."]),
    ('\'', ["..#..", "..#..", ".#...", ".....", ".....", ".....", "....."]),
    ('&', [".##..", "#..#.", "#.#..", ".#...", "#.#.#", "#..#.", ".##.#"]),
    ('!', ["..#..", "..#..", "..#..", "..#..", "..#..", ".....", "..#.."]),
    ('?', [".###.", "#...#", "....#", "...#.", "..#..", ".....", "..#.."]),
];

/// Square binary stamp sampled with nearest-texel lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glyph {
    size: u32,
    ink: Vec<bool>,
}

impl Glyph {
    /// Expands a 5x7 cell bitmap onto a stamp with a one-cell margin all round.
    fn from_cells(rows: &[&str; 7]) -> Self {
        let size = STAMP_SIZE;
        let mut ink = Vec::with_capacity((size * size) as usize);
        for ty in 0..size {
            for tx in 0..size {
                let gx = ((f64::from(tx) + 0.5) / f64::from(size) * 7.0).floor() as i32 - 1;
                let gy = ((f64::from(ty) + 0.5) / f64::from(size) * 9.0).floor() as i32 - 1;
                let lit = (0..5).contains(&gx)
                    && (0..7).contains(&gy)
                    && rows[gy as usize].as_bytes()[gx as usize] == b'#';
                ink.push(lit);
            }
        }
        Glyph { size, ink }
    }

    /// Gray stamp thresholded at half intensity; non-square images are rejected.
    pub fn from_gray(img: &image::GrayImage) -> Result<Self> {
        if img.width() != img.height() || img.width() == 0 {
            return Err(Error::InvalidImage(format!(
                "glyph stamps must be square, got {}x{}",
                img.width(),
                img.height()
            )));
        }
        Ok(Glyph {
            size: img.width(),
            ink: img.pixels().map(|p| p[0] >= 128).collect(),
        })
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn ink_count(&self) -> usize {
        self.ink.iter().filter(|&&b| b).count()
    }

    /// Ink at unit-square coordinates; outside `[0, 1)²` is blank.
    pub fn sample(&self, u: f64, v: f64) -> bool {
        if !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&v) {
            return false;
        }
        let s = f64::from(self.size);
        let tx = ((u * s) as u32).min(self.size - 1);
        let ty = ((v * s) as u32).min(self.size - 1);
        self.ink[(ty * self.size + tx) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphSet {
    glyphs: BTreeMap<char, Glyph>,
}

impl GlyphSet {
    pub fn builtin() -> &'static GlyphSet {
        static SET: OnceLock<GlyphSet> = OnceLock::new();
        SET.get_or_init(|| GlyphSet {
            glyphs: FONT.iter().map(|(c, rows)| (*c, Glyph::from_cells(rows))).collect(),
        })
    }

    /// Built-in set with stamps from `dir` replacing or extending it. Files are
    /// named `<char>.png` for ASCII letters and digits, or `U+XXXX.png`.
    pub fn with_overrides(dir: &Path) -> Result<GlyphSet> {
        let mut set = GlyphSet::builtin().clone();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect();
        paths.sort();
        for path in paths {
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let ch = if let Some(hex) = stem.strip_prefix("U+") {
                u32::from_str_radix(hex, 16).ok().and_then(char::from_u32)
            } else {
                let mut it = stem.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) if c.is_ascii_alphanumeric() => Some(c),
                    _ => None,
                }
            };
            let Some(ch) = ch else { continue };
            let img = image::open(&path)
                .map_err(|source| Error::Image {
                    path: path.clone(),
                    source,
                })?
                .to_luma8();
            set.glyphs.insert(ch, Glyph::from_gray(&img)?);
        }
        Ok(set)
    }

    pub fn get(&self, c: char) -> Option<&Glyph> {
        self.glyphs.get(&c)
    }

    pub fn contains(&self, c: char) -> bool {
        self.glyphs.contains_key(&c)
    }
}
