//! Affine augmentation of (image, normal map) pairs.
//!
//! The image is resampled bilinearly; the normal field is resampled with
//! nearest neighbor so vectors from different surfaces never blend, and each
//! vector's in-plane part is carried through the inverse transpose of the
//! linear map, keeping the stored normals consistent with the warped pixels.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, UnitVec3, Vec3};
use crate::normalmap::{ensure_same_size, NormalField};

/// Affine map about the image center: `p' = L (p - c) + c + t` with
/// `L = rotate · scale · shear`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub rotate_deg: f64,
    pub scale: f64,
    pub shear_x: f64,
    pub shear_y: f64,
    pub translate: (f64, f64),
}

impl Default for AffineParams {
    fn default() -> Self {
        AffineParams {
            rotate_deg: 0.0,
            scale: 1.0,
            shear_x: 0.0,
            shear_y: 0.0,
            translate: (0.0, 0.0),
        }
    }
}

/// Row-major 2×2.
type Mat2 = [[f64; 2]; 2];

fn mul(a: Mat2, b: Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn det(m: Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inverse(m: Mat2) -> Mat2 {
    let d = det(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

fn apply(m: Mat2, x: f64, y: f64) -> (f64, f64) {
    (m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y)
}

impl AffineParams {
    pub fn rotation(deg: f64) -> Self {
        AffineParams {
            rotate_deg: deg,
            ..Default::default()
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == AffineParams::default()
    }

    pub fn linear(&self) -> Mat2 {
        let (s, c) = self.rotate_deg.to_radians().sin_cos();
        let rot = [[c, -s], [s, c]];
        let scale = [[self.scale, 0.0], [0.0, self.scale]];
        let shear = [[1.0, self.shear_x], [self.shear_y, 1.0]];
        mul(mul(rot, scale), shear)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.rotate_deg, self.scale, self.shear_x, self.shear_y, self.translate.0, self.translate.1]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("affine parameters must be finite".into()));
        }
        if self.scale <= 0.0 {
            return Err(Error::InvalidInput(format!("scale must be > 0, got {}", self.scale)));
        }
        let d = det(self.linear());
        if d.abs() <= 1e-6 {
            return Err(Error::SingularAffine { det: d });
        }
        Ok(())
    }

    /// Destination pixel position to source position.
    pub fn inverse_map(&self, p: Point2, center: Point2) -> Point2 {
        let inv = inverse(self.linear());
        let (x, y) = apply(inv, p.x - center.x - self.translate.0, p.y - center.y - self.translate.1);
        Point2::new(x + center.x, y + center.y)
    }

    /// How a normal attached to the surface changes under the warp.
    pub fn transform_normal(&self, n: UnitVec3) -> Result<UnitVec3> {
        let inv = inverse(self.linear());
        let inv_t = [[inv[0][0], inv[1][0]], [inv[0][1], inv[1][1]]];
        let (x, y) = apply(inv_t, n.x, n.y);
        UnitVec3::new(Vec3::new(x, y, n.z))
    }
}

fn sample_bilinear(img: &RgbImage, p: Point2) -> Rgb<u8> {
    let sx = p.x - 0.5;
    let sy = p.y - 0.5;
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let (w, h) = (i64::from(img.width()), i64::from(img.height()));
    let at = |x: i64, y: i64| -> [f64; 3] {
        if x < 0 || y < 0 || x >= w || y >= h {
            [0.0; 3]
        } else {
            img.get_pixel(x as u32, y as u32).0.map(f64::from)
        }
    };
    let (x0, y0) = (x0 as i64, y0 as i64);
    let taps = [
        (at(x0, y0), (1.0 - fx) * (1.0 - fy)),
        (at(x0 + 1, y0), fx * (1.0 - fy)),
        (at(x0, y0 + 1), (1.0 - fx) * fy),
        (at(x0 + 1, y0 + 1), fx * fy),
    ];
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let v: f64 = taps.iter().map(|(px, wt)| px[c] * wt).sum();
        *o = v.round().clamp(0.0, 255.0) as u8;
    }
    Rgb(out)
}

/// Warps an image and its normal map together. Pixels mapped from outside
/// the source are black in the image and camera-facing in the field.
pub fn affine_warp_pair(
    image: &RgbImage,
    field: &NormalField,
    params: &AffineParams,
) -> Result<(RgbImage, NormalField)> {
    params.validate()?;
    ensure_same_size(crate::geometry::ImageSize::new(image.width(), image.height()), field.size())?;
    if params.is_identity() {
        return Ok((image.clone(), field.clone()));
    }
    let (w, h) = (image.width(), image.height());
    let center = Point2::new(f64::from(w) / 2.0, f64::from(h) / 2.0);
    let warped = RgbImage::from_fn(w, h, |x, y| {
        let src = params.inverse_map(Point2::new(f64::from(x) + 0.5, f64::from(y) + 0.5), center);
        sample_bilinear(image, src)
    });

    let mut data = Vec::with_capacity(field.data().len());
    for y in 0..h {
        for x in 0..w {
            let src = params.inverse_map(Point2::new(f64::from(x) + 0.5, f64::from(y) + 0.5), center);
            let (sx, sy) = (src.x.floor(), src.y.floor());
            let n = if sx >= 0.0 && sy >= 0.0 && sx < f64::from(w) && sy < f64::from(h) {
                params.transform_normal(field.get(sx as u32, sy as u32))?
            } else {
                UnitVec3::Z
            };
            data.push(n);
        }
    }
    Ok((warped, NormalField::new(w, h, data)?))
}

/// Seeded source of convenience augmentation parameters.
#[derive(Debug, Clone)]
pub struct AffineSampler {
    rng: ChaCha8Rng,
    pub max_rotate_deg: f64,
    pub scale_range: (f64, f64),
    pub max_shear: f64,
}

impl AffineSampler {
    /// Rotation ±20°, scale 0.9–1.1 and shear ±0.1.
    pub fn new(seed: u64) -> Self {
        AffineSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_rotate_deg: 20.0,
            scale_range: (0.9, 1.1),
            max_shear: 0.1,
        }
    }

    pub fn sample(&mut self) -> AffineParams {
        let r = self.max_rotate_deg;
        let s = self.max_shear;
        AffineParams {
            rotate_deg: self.rng.random_range(-r..=r),
            scale: self.rng.random_range(self.scale_range.0..=self.scale_range.1),
            shear_x: self.rng.random_range(-s..=s),
            shear_y: 0.0,
            translate: (0.0, 0.0),
        }
    }
}
