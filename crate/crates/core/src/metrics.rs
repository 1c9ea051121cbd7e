//! Surface-normal consistency (MAE-N) and human rating summaries.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::UnitVec3;
use crate::normalmap::{ensure_same_size, NormalField, RoiMask};

/// Angle between two unit vectors in degrees, in `[0, 180]`.
///
/// Evaluated as `atan2(|a × b|, a · b)`, which equals `acos(a · b)` but
/// stays accurate near 0° and 180° and returns exactly 0 for `a == b`.
pub fn angular_error(a: UnitVec3, b: UnitVec3) -> f64 {
    let cross = a.cross(b.get()).norm();
    let dot = a.dot(b.get()).clamp(-1.0, 1.0);
    cross.atan2(dot).to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "mae_deg")]
    pub mae_degrees: f64,
    #[serde(rename = "max_deg")]
    pub max_error_degrees: f64,
    #[serde(rename = "pixels")]
    pub pixel_count: usize,
}

// Fixed-shape pairwise reduction; the result depends only on the value order.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Mean and max per-pixel angular error between two normal fields,
/// optionally restricted to `mask`.
pub fn mae_n(before: &NormalField, after: &NormalField, mask: Option<&RoiMask>) -> Result<MetricReport> {
    ensure_same_size(before.size(), after.size())?;
    if let Some(m) = mask {
        ensure_same_size(before.size(), m.size())?;
    }
    let mut errors = Vec::with_capacity(before.data().len());
    for y in 0..before.height() {
        for x in 0..before.width() {
            if mask.is_none_or(|m| m.get(x, y)) {
                errors.push(angular_error(before.get(x, y), after.get(x, y)));
            }
        }
    }
    if errors.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let max = errors.iter().copied().fold(0.0, f64::max);
    let mean = pairwise_sum(&errors) / errors.len() as f64;
    Ok(MetricReport {
        // the mean of equal values can round a hair above them
        mae_degrees: mean.min(max),
        max_error_degrees: max,
        pixel_count: errors.len(),
    })
}

/// One participant's scores for one generated image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub method: String,
    pub image_id: String,
    pub participant: String,
    pub harmonization: u8,
    pub text_rendering: u8,
    pub perspective_blending: u8,
}

impl RatingRecord {
    fn scores(&self) -> [u8; 3] {
        [self.harmonization, self.text_rendering, self.perspective_blending]
    }

    fn validate(&self, row: usize) -> Result<()> {
        const NAMES: [&str; 3] = ["harmonization", "text_rendering", "perspective_blending"];
        for (name, s) in NAMES.iter().zip(self.scores()) {
            if !(1..=5).contains(&s) {
                return Err(Error::MalformedRecord {
                    row,
                    message: format!("{name} score {s} is outside 1..=5"),
                });
            }
        }
        if self.method.trim().is_empty() {
            return Err(Error::MalformedRecord {
                row,
                message: "empty method name".into(),
            });
        }
        Ok(())
    }
}

const HEADER: [&str; 6] = [
    "method",
    "image_id",
    "participant",
    "harmonization",
    "text_rendering",
    "perspective_blending",
];

/// Parses ratings CSV. Row numbers count the header as row 1.
pub fn read_ratings<R: Read>(input: R) -> Result<Vec<RatingRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| Error::MalformedRecord {
        row: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::MalformedRecord {
            row: 1,
            message: format!("expected header {}", HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<RatingRecord>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::MalformedRecord {
            row,
            message: e.to_string(),
        })?;
        rec.validate(row)?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamStats {
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    /// Counts for ratings 1 through 5.
    pub histogram: BTreeMap<u8, usize>,
    pub fives: usize,
}

impl ParamStats {
    fn from_scores(scores: &[u8]) -> Self {
        let n = scores.len() as f64;
        let mean = scores.iter().map(|&s| f64::from(s)).sum::<f64>() / n;
        let variance = scores
            .iter()
            .map(|&s| (f64::from(s) - mean).powi(2))
            .sum::<f64>()
            / n;
        let mut histogram: BTreeMap<u8, usize> = (1..=5).map(|r| (r, 0)).collect();
        for &s in scores {
            *histogram.entry(s).or_default() += 1;
        }
        ParamStats {
            mean,
            variance,
            fives: histogram[&5],
            histogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub records: usize,
    pub harmonization: ParamStats,
    pub text_rendering: ParamStats,
    pub perspective_blending: ParamStats,
}

/// Per-method mean, variance and rating histogram for each quality parameter.
pub fn rating_stats(records: &[RatingRecord]) -> Result<BTreeMap<String, MethodSummary>> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no rating records".into()));
    }
    let mut by_method: BTreeMap<&str, [Vec<u8>; 3]> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        r.validate(i + 2)?;
        let cols = by_method.entry(r.method.as_str()).or_default();
        for (col, s) in cols.iter_mut().zip(r.scores()) {
            col.push(s);
        }
    }
    Ok(by_method
        .into_iter()
        .map(|(m, [h, t, p])| {
            let summary = MethodSummary {
                records: h.len(),
                harmonization: ParamStats::from_scores(&h),
                text_rendering: ParamStats::from_scores(&t),
                perspective_blending: ParamStats::from_scores(&p),
            };
            (m.to_string(), summary)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalmap::synth_plane;

    fn tilt_x(deg: f64) -> UnitVec3 {
        let t = deg.to_radians();
        UnitVec3::from_xyz(0.0, t.sin(), t.cos()).unwrap()
    }

    #[test]
    fn angular_examples() {
        let a = UnitVec3::from_xyz(0.3, -0.2, 0.9).unwrap();
        assert_eq!(angular_error(a, a), 0.0);
        let y = UnitVec3::from_xyz(0.0, 1.0, 0.0).unwrap();
        assert!((angular_error(UnitVec3::Z, y) - 90.0).abs() < 1e-12);
        assert!((angular_error(UnitVec3::Z, tilt_x(10.0)) - 10.0).abs() < 1e-9);
        assert!((angular_error(UnitVec3::Z, -UnitVec3::Z) - 180.0).abs() < 1e-12);
    }

    #[test]
    fn constant_tilt() {
        let a = synth_plane(UnitVec3::Z, 8, 6);
        let b = synth_plane(tilt_x(25.0), 8, 6);
        let r = mae_n(&a, &b, None).unwrap();
        assert!((r.mae_degrees - 25.0).abs() < 1e-9);
        assert_eq!(r.mae_degrees, r.max_error_degrees);
        assert_eq!(r.pixel_count, 48);
        let z = mae_n(&a, &a, None).unwrap();
        assert_eq!((z.mae_degrees, z.max_error_degrees), (0.0, 0.0));
    }

    #[test]
    fn mae_errors() {
        let a = synth_plane(UnitVec3::Z, 4, 4);
        let b = synth_plane(UnitVec3::Z, 4, 3);
        assert!(matches!(mae_n(&a, &b, None), Err(Error::DimensionMismatch { .. })));
        let empty = RoiMask::from_rect(4, 4, 0, 0, 0, 0);
        assert!(matches!(mae_n(&a, &a, Some(&empty)), Err(Error::EmptyRoi)));
    }

    #[test]
    fn report_json_keys() {
        let r = MetricReport {
            mae_degrees: 1.5,
            max_error_degrees: 2.0,
            pixel_count: 3,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"mae_deg":1.5,"max_deg":2.0,"pixels":3}"#
        );
    }

    fn rec(method: &str, p: &str, h: u8, t: u8, b: u8) -> RatingRecord {
        RatingRecord {
            method: method.into(),
            image_id: "img".into(),
            participant: p.into(),
            harmonization: h,
            text_rendering: t,
            perspective_blending: b,
        }
    }

    #[test]
    fn rating_examples() {
        let s = rating_stats(&[rec("m", "p1", 3, 3, 3)]).unwrap();
        let h = &s["m"].harmonization;
        assert_eq!((h.mean, h.variance), (3.0, 0.0));
        assert_eq!(h.histogram[&3], 1);
        assert_eq!(h.histogram.values().sum::<usize>(), 1);

        let s = rating_stats(&[rec("m", "p1", 2, 1, 5), rec("m", "p2", 4, 1, 5)]).unwrap();
        let h = &s["m"].harmonization;
        assert_eq!((h.mean, h.variance), (3.0, 1.0));
        assert_eq!(s["m"].perspective_blending.fives, 2);
    }

    #[test]
    fn csv_rows() {
        let csv = "method,image_id,participant,harmonization,text_rendering,perspective_blending\n\
                   a,i1,p1,5,4,3\n\
                   a,i1,p2,9,4,3\n";
        let err = read_ratings(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { row: 3, .. }), "{err}");

        let csv = "method,image_id,participant,harmonization,text_rendering,perspective_blending\n\
                   a,i1,p1,5,4,3\n\
                   a,i1,p2,x,4,3\n";
        assert!(matches!(
            read_ratings(csv.as_bytes()),
            Err(Error::MalformedRecord { row: 3, .. })
        ));

        let bad_header = "method,image,participant,h,t,p\na,i,p,1,1,1\n";
        assert!(matches!(
            read_ratings(bad_header.as_bytes()),
            Err(Error::MalformedRecord { row: 1, .. })
        ));
    }
}
