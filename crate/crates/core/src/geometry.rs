//! Planar alignment of character boxes with a surface normal.
//!
//! All 3D work happens in a normalized image frame: origin at the image
//! center, x to the right, y down, z toward the viewer, and the longer image
//! side spanning `[-1, 1]`. A box center is pushed back along the surface
//! normal by the configured depth, dropped onto the plane `n · x = 0`, and the
//! box is rebuilt on that plane from an orthonormal in-plane basis so its
//! width and height are preserved on the surface. Reading the plane corners
//! back to pixels yields the surface-aligned quadrilateral.

use std::ops::{Add, Deref, Mul, Neg, Sub};

use nalgebra::{Matrix3, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Points and directions share one representation.
pub type Point3 = Vec3;

impl Vec3 {
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A vector of unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "[f64; 3]")]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const Z: UnitVec3 = UnitVec3(Vec3::Z);

    /// Normalizes `v`; zero-length or non-finite input is rejected.
    pub fn new(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !v.is_finite() || !n.is_finite() || n < 1e-12 {
            return Err(Error::ZeroNormal);
        }
        // leave exact unit input untouched so constant fields stay bit-stable
        if n == 1.0 {
            return Ok(UnitVec3(v));
        }
        Ok(UnitVec3(v * (1.0 / n)))
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Vec3::new(x, y, z))
    }

    /// Wraps a vector the caller guarantees is unit length.
    pub(crate) fn new_unchecked(v: Vec3) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-6);
        UnitVec3(v)
    }

    pub fn get(self) -> Vec3 {
        self.0
    }
}

impl Deref for UnitVec3 {
    type Target = Vec3;
    fn deref(&self) -> &Vec3 {
        &self.0
    }
}

impl From<UnitVec3> for [f64; 3] {
    fn from(v: UnitVec3) -> Self {
        v.0.to_array()
    }
}

impl Neg for UnitVec3 {
    type Output = UnitVec3;
    fn neg(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub const fn new(width: u32, height: u32) -> Self {
        ImageSize { width, height }
    }

    /// Pixels per normalized unit: half the longer side.
    pub fn norm_scale(self) -> f64 {
        f64::from(self.width.max(self.height)) / 2.0
    }

    fn center(self) -> Point2 {
        Point2::new(f64::from(self.width) / 2.0, f64::from(self.height) / 2.0)
    }

    pub fn pixel_count(self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Axis-aligned box given by its center and size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox2D {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox2D {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = BBox2D { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn from_corner(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x + w / 2.0, y + h / 2.0, w, h)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.cx, self.cy, self.w, self.h].iter().all(|v| v.is_finite());
        if !finite || self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "box must have finite coordinates and positive size, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn min_x(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn min_y(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn max_x(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn max_y(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.cx, self.cy)
    }

    pub fn within(&self, size: ImageSize) -> bool {
        let eps = 1e-9;
        self.min_x() >= -eps
            && self.min_y() >= -eps
            && self.max_x() <= f64::from(size.width) + eps
            && self.max_y() <= f64::from(size.height) + eps
    }

    /// Corners as a quad: top-left, top-right, bottom-right, bottom-left.
    pub fn to_quad(&self) -> Quad2D {
        Quad2D {
            corners: [
                Point2::new(self.min_x(), self.min_y()),
                Point2::new(self.max_x(), self.min_y()),
                Point2::new(self.max_x(), self.max_y()),
                Point2::new(self.min_x(), self.max_y()),
            ],
        }
    }
}

/// Quadrilateral with corners ordered top-left, top-right, bottom-right,
/// bottom-left relative to the box it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad2D {
    pub corners: [Point2; 4],
}

impl Quad2D {
    pub const UNIT_SQUARE: Quad2D = Quad2D {
        corners: [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ],
    };

    pub fn new(corners: [Point2; 4]) -> Self {
        Quad2D { corners }
    }

    /// Shoelace area; positive for the top-left→top-right→bottom-right
    /// order in y-down image coordinates.
    pub fn signed_area(&self) -> f64 {
        let c = &self.corners;
        (0..4)
            .map(|i| {
                let (a, b) = (c[i], c[(i + 1) % 4]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
            / 2.0
    }

    /// Strictly convex with a consistent winding.
    pub fn is_convex(&self) -> bool {
        let c = &self.corners;
        let turns: Vec<f64> = (0..4)
            .map(|i| {
                let (a, b, d) = (c[i], c[(i + 1) % 4], c[(i + 2) % 4]);
                (b.x - a.x) * (d.y - b.y) - (b.y - a.y) * (d.x - b.x)
            })
            .collect();
        turns.iter().all(|&t| t > 0.0) || turns.iter().all(|&t| t < 0.0)
    }

    /// Point-in-polygon for convex quads of either winding; boundary counts as inside.
    pub fn contains(&self, p: Point2) -> bool {
        let c = &self.corners;
        let mut pos = false;
        let mut neg = false;
        for i in 0..4 {
            let (a, b) = (c[i], c[(i + 1) % 4]);
            let s = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            pos |= s > 0.0;
            neg |= s < 0.0;
        }
        !(pos && neg)
    }

    pub fn centroid(&self) -> Point2 {
        let (sx, sy) = self
            .corners
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point2::new(sx / 4.0, sy / 4.0)
    }

    /// `(min_x, min_y, max_x, max_y)`
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.corners.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
        )
    }

    /// Length of the top edge.
    pub fn top_width(&self) -> f64 {
        self.corners[0].distance(self.corners[1])
    }

    /// Length of the left edge.
    pub fn left_height(&self) -> f64 {
        self.corners[0].distance(self.corners[3])
    }
}

/// How plane points are read back into the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// Drop z.
    Orthographic,
    /// Pinhole on the view axis at `z = focal` (normalized units).
    Perspective { focal: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub depth: f64,
    pub min_facing: f64,
    pub readout: Readout,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            depth: 1.0,
            min_facing: 0.05,
            readout: Readout::Orthographic,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.depth > 0.0 && self.depth.is_finite()) {
            return Err(Error::InvalidInput(format!("depth must be > 0, got {}", self.depth)));
        }
        if !(self.min_facing > 0.0 && self.min_facing < 1.0) {
            return Err(Error::InvalidInput(format!(
                "min_facing must lie in (0, 1), got {}",
                self.min_facing
            )));
        }
        if let Readout::Perspective { focal } = self.readout {
            if !(focal > 0.0 && focal.is_finite()) {
                return Err(Error::InvalidInput(format!("focal length must be > 0, got {focal}")));
            }
        }
        Ok(())
    }
}

/// Pixel position to the normalized frame, `z = 0`.
pub fn normalize_coords(p: Point2, size: ImageSize) -> Point3 {
    let s = size.norm_scale();
    let c = size.center();
    Vec3::new((p.x - c.x) / s, (p.y - c.y) / s, 0.0)
}

pub fn denormalize_coords(p: Point2, size: ImageSize) -> Point2 {
    let s = size.norm_scale();
    let c = size.center();
    Point2::new(p.x * s + c.x, p.y * s + c.y)
}

/// Moves `c` back by the configured depth along `n`.
pub fn translate_along_normal(c: Point3, n: UnitVec3, cfg: &ProjectionConfig) -> Point3 {
    c - n.get() * cfg.depth
}

/// Orthogonal projection onto the plane `n · x = 0`: the point where the line
/// through `p` with direction `n` meets the plane.
pub fn project_to_plane(p: Point3, n: UnitVec3) -> Point3 {
    let t = -n.dot(p);
    let q = p + n.get() * t;
    // one refinement step absorbs the rounding left by the first pass
    q - n.get() * n.dot(q)
}

/// Orthonormal axes spanning the plane orthogonal to `n`: `u` is the image
/// x axis with its normal component removed, `v = n × u`.
pub fn in_plane_basis(n: UnitVec3) -> Result<(UnitVec3, UnitVec3)> {
    if n.x.abs() > 1.0 - 1e-9 {
        return Err(Error::DegenerateNormal {
            normal: n.get(),
            reason: "normal is parallel to the image x axis",
        });
    }
    let u = UnitVec3::new(Vec3::X - n.get() * n.x)?;
    let v = UnitVec3::new(n.cross(u.get()))?;
    Ok((u, v))
}

fn check_facing(n: UnitVec3, cfg: &ProjectionConfig) -> Result<()> {
    if n.z.abs() < cfg.min_facing {
        return Err(Error::DegenerateNormal {
            normal: n.get(),
            reason: "surface is edge-on to the viewer",
        });
    }
    Ok(())
}

/// Corners of the aligned box on the plane `n · x = 0`, normalized frame,
/// in top-left, top-right, bottom-right, bottom-left order.
pub fn plane_corners(
    bbox: &BBox2D,
    n: UnitVec3,
    cfg: &ProjectionConfig,
    size: ImageSize,
) -> Result<[Point3; 4]> {
    bbox.validate()?;
    check_facing(n, cfg)?;
    // the plane is the same for n and -n; orient it toward the viewer so the
    // in-plane basis keeps the image's handedness
    let n = if n.z < 0.0 { -n } else { n };

    let center = normalize_coords(bbox.center(), size);
    let shifted = translate_along_normal(center, n, cfg);
    let on_plane = project_to_plane(shifted, n);

    let (u, v) = in_plane_basis(n)?;
    let s = size.norm_scale();
    let half_u = u.get() * (bbox.w / s / 2.0);
    let half_v = v.get() * (bbox.h / s / 2.0);
    Ok([
        on_plane - half_u - half_v,
        on_plane + half_u - half_v,
        on_plane + half_u + half_v,
        on_plane - half_u + half_v,
    ])
}

/// Reads a normalized-frame point back into image pixels.
pub fn readout(p: Point3, readout: Readout, size: ImageSize) -> Result<Point2> {
    let flat = match readout {
        Readout::Orthographic => Point2::new(p.x, p.y),
        Readout::Perspective { focal } => {
            // points at or behind the camera have no image
            if focal - p.z < 1e-12 {
                return Err(Error::PointAtInfinity);
            }
            let k = focal / (focal - p.z);
            Point2::new(p.x * k, p.y * k)
        }
    };
    Ok(denormalize_coords(flat, size))
}

/// Surface-aligned quadrilateral for `bbox` under normal `n`.
pub fn align_bbox(
    bbox: &BBox2D,
    n: UnitVec3,
    cfg: &ProjectionConfig,
    size: ImageSize,
) -> Result<Quad2D> {
    cfg.validate()?;
    let [a, b, c, d] = plane_corners(bbox, n, cfg, size)?;
    Ok(Quad2D::new([
        readout(a, cfg.readout, size)?,
        readout(b, cfg.readout, size)?,
        readout(c, cfg.readout, size)?,
        readout(d, cfg.readout, size)?,
    ]))
}

/// Projective transform, stored with `h[2][2] = 1` whenever that entry is nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Homography { m: Matrix3::identity() }
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Self {
        let corner = m[(2, 2)];
        let m = if corner != 0.0 { m / corner } else { m };
        Homography { m }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }

    pub fn inverse(&self) -> Result<Homography> {
        if self.determinant().abs() <= 1e-12 {
            return Err(Error::DegenerateQuad("homography is not invertible"));
        }
        self.m
            .try_inverse()
            .map(Homography::from_matrix)
            .ok_or(Error::DegenerateQuad("homography is not invertible"))
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Homography) -> Homography {
        Homography::from_matrix(self.m * first.m)
    }

    pub fn apply(&self, p: Point2) -> Result<Point2> {
        apply_homography(self, p)
    }
}

pub fn apply_homography(h: &Homography, p: Point2) -> Result<Point2> {
    let m = &h.m;
    let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
    if w.abs() < 1e-12 {
        return Err(Error::PointAtInfinity);
    }
    Ok(Point2::new(
        (m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)]) / w,
        (m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)]) / w,
    ))
}

// Similarity that centers the points and scales their mean distance to sqrt(2).
fn conditioning(q: &Quad2D) -> Result<Matrix3<f64>> {
    let c = q.centroid();
    let mean_dist = q.corners.iter().map(|p| p.distance(c)).sum::<f64>() / 4.0;
    if !(mean_dist > 1e-12 && mean_dist.is_finite()) {
        return Err(Error::DegenerateQuad("corners coincide"));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0))
}

fn transform(m: &Matrix3<f64>, p: Point2) -> Point2 {
    Point2::new(
        m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)],
        m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)],
    )
}

/// Homography taking each corner of `src` to the matching corner of `dst`,
/// from the 8×8 linear system with `h[2][2]` fixed to 1. Points are
/// conditioned first so pixel-scale quads solve as accurately as unit ones.
pub fn homography_from_quads(src: &Quad2D, dst: &Quad2D) -> Result<Homography> {
    let ts = conditioning(src)?;
    let td = conditioning(dst)?;

    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for i in 0..4 {
        let p = transform(&ts, src.corners[i]);
        let q = transform(&td, dst.corners[i]);
        let (r0, r1) = (2 * i, 2 * i + 1);
        a[(r0, 0)] = p.x;
        a[(r0, 1)] = p.y;
        a[(r0, 2)] = 1.0;
        a[(r0, 6)] = -p.x * q.x;
        a[(r0, 7)] = -p.y * q.x;
        b[r0] = q.x;
        a[(r1, 3)] = p.x;
        a[(r1, 4)] = p.y;
        a[(r1, 5)] = 1.0;
        a[(r1, 6)] = -p.x * q.y;
        a[(r1, 7)] = -p.y * q.y;
        b[r1] = q.y;
    }

    let lu = a.lu();
    if lu.determinant().abs() < 1e-10 {
        return Err(Error::DegenerateQuad("corner system is singular (collinear corners)"));
    }
    let h = lu
        .solve(&b)
        .ok_or(Error::DegenerateQuad("corner system is singular"))?;
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
    let td_inv = td
        .try_inverse()
        .ok_or(Error::DegenerateQuad("corners coincide"))?;
    let out = Homography::from_matrix(td_inv * hn * ts);
    if out.determinant().abs() <= 1e-12 || !out.m.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateQuad("homography is not invertible"));
    }
    Ok(out)
}
