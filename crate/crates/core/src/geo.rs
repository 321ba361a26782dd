//! Planar geometry kernel.
//!
//! Everything works in local metric coordinates: `x` meters east and `y`
//! meters north of the area origin. [`LocalFrame`] converts to and from
//! geographic latitude/longitude with an equirectangular projection, which is
//! accurate to well under a meter over the few kilometers a monitored area
//! spans.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Tolerance under which two circles are treated as tangent.
pub const TANGENCY_TOLERANCE: f64 = 1e-9;

const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("polyline needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("polyline points {0} and {1} coincide")]
    RepeatedPoint(usize, usize),
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("arclength {s} outside [0, {length}]")]
    ArclengthOutOfRange { s: f64, length: f64 },
    #[error("circle centers coincide")]
    CoincidentCenters,
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &GeoPoint) -> f64 {
        distance(*self, *other)
    }

    pub fn lerp(&self, other: &GeoPoint, t: f64) -> GeoPoint {
        GeoPoint::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.2}, {:.2})", self.x, self.y)
    }
}

/// Euclidean distance in meters.
pub fn distance(a: GeoPoint, b: GeoPoint) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Axis-aligned rectangle in local coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: GeoPoint,
    pub max: GeoPoint,
}

impl Bounds {
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// Clamps `p` into the rectangle.
    pub fn clamp(&self, p: GeoPoint) -> GeoPoint {
        GeoPoint::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }
}

/// An ordered, validated chain of points with precomputed arclengths.
#[derive(Debug, Clone, PartialEq)]
pub struct TrailPolyline {
    points: Vec<GeoPoint>,
    cumulative: Vec<f64>,
}

/// Nearest point of a polyline to some query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionResult {
    pub point: GeoPoint,
    pub segment_index: usize,
    pub arclength: f64,
    pub distance: f64,
}

impl TrailPolyline {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self, GeoError> {
        if points.len() < 2 {
            return Err(GeoError::TooFewPoints(points.len()));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(GeoError::NonFinite(i));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for i in 1..points.len() {
            let step = distance(points[i - 1], points[i]);
            if step <= 0.0 {
                return Err(GeoError::RepeatedPoint(i - 1, i));
            }
            cumulative.push(cumulative[i - 1] + step);
        }
        Ok(Self { points, cumulative })
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn cumulative_arclength(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self
            .cumulative
            .last()
            .expect("validated polyline is non-empty")
    }

    pub fn start(&self) -> GeoPoint {
        self.points[0]
    }

    pub fn end(&self) -> GeoPoint {
        *self.points.last().expect("validated polyline is non-empty")
    }

    /// Nearest point on the polyline. Ties go to the lowest segment index.
    pub fn project(&self, p: GeoPoint) -> ProjectionResult {
        let mut best: Option<ProjectionResult> = None;
        for (i, seg) in self.points.windows(2).enumerate() {
            let (a, b) = (seg[0], seg[1]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len2 = dx * dx + dy * dy;
            let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
            let foot = a.lerp(&b, t);
            let d = distance(p, foot);
            if best.is_none_or(|b| d < b.distance) {
                let seg_len = self.cumulative[i + 1] - self.cumulative[i];
                best = Some(ProjectionResult {
                    point: foot,
                    segment_index: i,
                    arclength: self.cumulative[i] + t * seg_len,
                    distance: d,
                });
            }
        }
        best.expect("validated polyline has at least one segment")
    }

    /// Point at arclength `s` by linear interpolation along the chain.
    pub fn position_at(&self, s: f64) -> Result<GeoPoint, GeoError> {
        let length = self.length();
        if !(0.0..=length).contains(&s) {
            return Err(GeoError::ArclengthOutOfRange { s, length });
        }
        Ok(self.position_clamped(s))
    }

    /// Like [`position_at`](Self::position_at) but clamps `s` into range.
    pub fn position_clamped(&self, s: f64) -> GeoPoint {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let (s0, s1) = (self.cumulative[i], self.cumulative[i + 1]);
        self.points[i].lerp(&self.points[i + 1], (s - s0) / (s1 - s0))
    }

    /// Index of the segment containing arclength `s` (clamped).
    pub fn segment_at(&self, s: f64) -> usize {
        let last_seg = self.points.len() - 2;
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(last_seg),
            Err(i) => i.saturating_sub(1).min(last_seg),
        }
    }

    /// Unit tangent of the segment containing `s`, oriented with increasing arclength.
    pub fn tangent_at(&self, s: f64) -> (f64, f64) {
        let i = self.segment_at(s);
        let (a, b) = (self.points[i], self.points[i + 1]);
        let len = distance(a, b);
        ((b.x - a.x) / len, (b.y - a.y) / len)
    }
}

/// Intersection points of two circles.
///
/// Returns one point when the circles are tangent (within
/// [`TANGENCY_TOLERANCE`]), two when they cross and none when they are
/// disjoint or one contains the other.
pub fn circle_intersection(
    c1: GeoPoint,
    r1: f64,
    c2: GeoPoint,
    r2: f64,
) -> Result<Vec<GeoPoint>, GeoError> {
    for r in [r1, r2] {
        if r.is_nan() || r <= 0.0 {
            return Err(GeoError::NonPositiveRadius(r));
        }
    }
    let d = distance(c1, c2);
    if d == 0.0 {
        return Err(GeoError::CoincidentCenters);
    }
    if d > r1 + r2 + TANGENCY_TOLERANCE || d < (r1 - r2).abs() - TANGENCY_TOLERANCE {
        return Ok(Vec::new());
    }
    let (ux, uy) = ((c2.x - c1.x) / d, (c2.y - c1.y) / d);
    let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let base = GeoPoint::new(c1.x + a * ux, c1.y + a * uy);
    let h2 = r1 * r1 - a * a;
    if (d - (r1 + r2)).abs() <= TANGENCY_TOLERANCE
        || (d - (r1 - r2).abs()).abs() <= TANGENCY_TOLERANCE
        || h2 <= 0.0
    {
        return Ok(vec![base]);
    }
    let h = h2.sqrt();
    Ok(vec![
        GeoPoint::new(base.x - h * uy, base.y + h * ux),
        GeoPoint::new(base.x + h * uy, base.y - h * ux),
    ])
}

/// Geographic position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    /// Degrees, minutes and seconds, e.g. `49°34′24″N, 19°31′46″E`.
    pub fn to_dms(&self) -> String {
        format!(
            "{}, {}",
            dms(self.lat, if self.lat >= 0.0 { 'N' } else { 'S' }),
            dms(self.lon, if self.lon >= 0.0 { 'E' } else { 'W' })
        )
    }
}

fn dms(value: f64, hemisphere: char) -> String {
    let total = (value.abs() * 3600.0).round() as u64;
    let (deg, min, sec) = (total / 3600, (total % 3600) / 60, total % 60);
    format!("{deg}°{min:02}′{sec:02}″{hemisphere}")
}

/// Equirectangular mapping between local meters and latitude/longitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    pub origin: LatLon,
}

impl LocalFrame {
    pub fn to_latlon(&self, p: GeoPoint) -> LatLon {
        let lat0 = self.origin.lat.to_radians();
        LatLon {
            lat: self.origin.lat + (p.y / EARTH_RADIUS_M).to_degrees(),
            lon: self.origin.lon + (p.x / (EARTH_RADIUS_M * lat0.cos())).to_degrees(),
        }
    }

    pub fn to_local(&self, ll: LatLon) -> GeoPoint {
        let lat0 = self.origin.lat.to_radians();
        GeoPoint::new(
            (ll.lon - self.origin.lon).to_radians() * EARTH_RADIUS_M * lat0.cos(),
            (ll.lat - self.origin.lat).to_radians() * EARTH_RADIUS_M,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(points: &[(f64, f64)]) -> TrailPolyline {
        TrailPolyline::new(points.iter().map(|&(x, y)| GeoPoint::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn distance_basics() {
        assert_eq!(
            distance(GeoPoint::new(0.0, 0.0), GeoPoint::new(3.0, 4.0)),
            5.0
        );
        assert_eq!(
            distance(GeoPoint::new(7.0, 7.0), GeoPoint::new(7.0, 7.0)),
            0.0
        );
    }

    #[test]
    fn projection_examples() {
        let t = line(&[(0.0, 0.0), (10.0, 0.0)]);
        let r = t.project(GeoPoint::new(5.0, 3.0));
        assert_eq!(r.point, GeoPoint::new(5.0, 0.0));
        assert_eq!(r.distance, 3.0);
        assert_eq!(r.arclength, 5.0);

        let r = t.project(GeoPoint::new(0.0, 0.0));
        assert_eq!((r.distance, r.arclength), (0.0, 0.0));
    }

    #[test]
    fn projection_tie_goes_to_lowest_segment() {
        // The query point is equidistant from both legs of the V.
        let t = line(&[(-10.0, 10.0), (0.0, 0.0), (10.0, 10.0)]);
        let r = t.project(GeoPoint::new(0.0, 20.0));
        assert_eq!(r.segment_index, 0);
    }

    #[test]
    fn position_examples() {
        let t = line(&[(0.0, 0.0), (10.0, 0.0)]);
        assert_eq!(t.position_at(0.0).unwrap(), GeoPoint::new(0.0, 0.0));
        assert_eq!(t.position_at(4.0).unwrap(), GeoPoint::new(4.0, 0.0));
        assert!(matches!(
            t.position_at(10.5),
            Err(GeoError::ArclengthOutOfRange { .. })
        ));
        assert!(t.position_at(-0.1).is_err());
    }

    #[test]
    fn polyline_validation() {
        assert_eq!(
            TrailPolyline::new(vec![GeoPoint::new(1.0, 1.0)]).unwrap_err(),
            GeoError::TooFewPoints(1)
        );
        assert_eq!(
            TrailPolyline::new(vec![GeoPoint::new(1.0, 1.0), GeoPoint::new(1.0, 1.0)]).unwrap_err(),
            GeoError::RepeatedPoint(0, 1)
        );
    }

    #[test]
    fn circle_examples() {
        let o = GeoPoint::new(0.0, 0.0);
        assert_eq!(
            circle_intersection(o, 5.0, GeoPoint::new(10.0, 0.0), 5.0).unwrap(),
            vec![GeoPoint::new(5.0, 0.0)]
        );
        let pts = circle_intersection(o, 5.0, GeoPoint::new(6.0, 0.0), 5.0).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts
            .iter()
            .any(|p| distance(*p, GeoPoint::new(3.0, 4.0)) < 1e-12));
        assert!(pts
            .iter()
            .any(|p| distance(*p, GeoPoint::new(3.0, -4.0)) < 1e-12));
        assert!(circle_intersection(o, 1.0, GeoPoint::new(10.0, 0.0), 1.0)
            .unwrap()
            .is_empty());
        assert_eq!(
            circle_intersection(o, 1.0, o, 2.0).unwrap_err(),
            GeoError::CoincidentCenters
        );
    }

    #[test]
    fn dms_formatting_and_frame_roundtrip() {
        let origin = LatLon {
            lat: 49.0 + 34.0 / 60.0 + 24.0 / 3600.0,
            lon: 19.0 + 31.0 / 60.0 + 46.0 / 3600.0,
        };
        assert_eq!(origin.to_dms(), "49°34′24″N, 19°31′46″E");
        let frame = LocalFrame { origin };
        let p = GeoPoint::new(1234.5, -987.25);
        let back = frame.to_local(frame.to_latlon(p));
        assert!(distance(p, back) < 1e-6);
    }

    fn pt() -> impl Strategy<Value = GeoPoint> {
        (-1e4..1e4f64, -1e4..1e4f64).prop_map(|(x, y)| GeoPoint::new(x, y))
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in pt(), b in pt(), c in pt()) {
            prop_assert!(distance(a, b) >= 0.0);
            prop_assert_eq!(distance(a, b), distance(b, a));
            prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
        }

        #[test]
        fn projection_never_worse_than_vertices(
            pts in proptest::collection::vec(pt(), 2..8),
            q in pt(),
        ) {
            if let Ok(t) = TrailPolyline::new(pts) {
                let r = t.project(q);
                for v in t.points() {
                    prop_assert!(r.distance <= distance(q, *v) + 1e-9);
                }
                prop_assert!(r.arclength >= 0.0 && r.arclength <= t.length());
            }
        }

        #[test]
        fn circle_points_lie_on_both_circles(
            c1 in pt(), c2 in pt(), r1 in 1.0..5e3f64, r2 in 1.0..5e3f64,
        ) {
            prop_assume!(distance(c1, c2) > 1e-3);
            for p in circle_intersection(c1, r1, c2, r2).unwrap() {
                prop_assert!((distance(p, c1) - r1).abs() < 1e-6);
                prop_assert!((distance(p, c2) - r2).abs() < 1e-6);
            }
        }
    }
}
