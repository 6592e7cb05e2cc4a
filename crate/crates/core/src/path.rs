//! Arc-length parameterized road centerline.
//!
//! Waypoints are resampled at a uniform spacing; heading comes from central
//! differences and curvature from the circle through three consecutive
//! samples. Between samples the path is evaluated as a cubic Hermite curve
//! so that the planner sees a C1 geometry with analytic derivatives.

use nalgebra::Vector2;
use thiserror::Error;

pub type Point2 = Vector2<f64>;

pub const DEFAULT_SPACING: f64 = 1.0;
const DEFAULT_SEARCH_WINDOW: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("a path needs at least 3 distinct points, got {0}")]
    TooFewPoints(usize),
    #[error("points {idx} and {next} coincide", idx = .0, next = .0 + 1)]
    DuplicatePoint(usize),
    #[error("point {0} is not finite")]
    NonFinite(usize),
    #[error("resample spacing must be positive, got {0}")]
    BadSpacing(f64),
}

#[derive(Debug, Clone)]
pub struct ReferencePath {
    pts: Vec<Point2>,
    s: Vec<f64>,
    heading: Vec<f64>,
    curvature: Vec<f64>,
    spacing: f64,
    search_window: f64,
}

/// Closest-point query result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathProjection {
    pub s: f64,
    /// Signed distance to the path, positive to the left of the direction of travel.
    pub lateral_offset: f64,
    pub foot: Point2,
    pub ref_heading: f64,
}

impl PathProjection {
    /// Heading of a body with yaw `yaw` relative to the path, wrapped to (-pi, pi].
    pub fn heading_error(&self, yaw: f64) -> f64 {
        wrap_angle(yaw - self.ref_heading)
    }
}

/// Smooth local frame of the path at some arc length.
#[derive(Debug, Clone, Copy)]
pub struct PathFrame {
    pub pos: Point2,
    /// dP/ds (close to, but not exactly, unit length).
    pub d1: Point2,
    /// d2P/ds2
    pub d2: Point2,
}

impl PathFrame {
    pub fn tangent(&self) -> Point2 {
        self.d1 / self.d1.norm()
    }

    pub fn normal(&self) -> Point2 {
        let t = self.tangent();
        Point2::new(-t.y, t.x)
    }

    /// d(tangent)/ds
    pub fn tangent_rate(&self) -> Point2 {
        let n = self.d1.norm();
        let t = self.d1 / n;
        (self.d2 - t * t.dot(&self.d2)) / n
    }

    /// d(normal)/ds
    pub fn normal_rate(&self) -> Point2 {
        let dt = self.tangent_rate();
        Point2::new(-dt.y, dt.x)
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r > std::f64::consts::PI {
        r -= two_pi;
    } else if r <= -std::f64::consts::PI {
        r += two_pi;
    }
    r
}

fn cross(a: &Point2, b: &Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed curvature of the circle through three points.
fn three_point_curvature(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    let ab = b - a;
    let bc = c - b;
    let ac = c - a;
    let denom = ab.norm() * bc.norm() * ac.norm();
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * cross(&ab, &bc) / denom
}

impl ReferencePath {
    /// Resample `points` at uniform arc-length spacing (adjusted so the last
    /// sample lands exactly on the final point).
    pub fn build(points: &[Point2], resample_spacing: f64) -> Result<Self, PathError> {
        if !(resample_spacing > 0.0 && resample_spacing.is_finite()) {
            return Err(PathError::BadSpacing(resample_spacing));
        }
        if let Some(i) = points.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(PathError::NonFinite(i));
        }
        if points.len() < 3 {
            return Err(PathError::TooFewPoints(points.len()));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(PathError::DuplicatePoint(i));
        }

        let mut cum = Vec::with_capacity(points.len());
        cum.push(0.0);
        for w in points.windows(2) {
            cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
        }
        let total = *cum.last().unwrap();
        let n_seg = ((total / resample_spacing).ceil() as usize).max(2);
        let ds = total / n_seg as f64;

        let mut pts = Vec::with_capacity(n_seg + 1);
        let mut seg = 0;
        for i in 0..=n_seg {
            let target = if i == n_seg { total } else { i as f64 * ds };
            while seg + 2 < cum.len() && cum[seg + 1] < target {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let u = ((target - cum[seg]) / len).clamp(0.0, 1.0);
            pts.push(points[seg] + (points[seg + 1] - points[seg]) * u);
        }

        Ok(Self::from_uniform_samples(pts, ds))
    }

    fn from_uniform_samples(pts: Vec<Point2>, ds: f64) -> Self {
        let n = pts.len();
        let s: Vec<f64> = (0..n).map(|i| i as f64 * ds).collect();

        let mut heading = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = match i {
                0 => (pts[0], pts[1]),
                _ if i == n - 1 => (pts[n - 2], pts[n - 1]),
                _ => (pts[i - 1], pts[i + 1]),
            };
            heading.push((b.y - a.y).atan2(b.x - a.x));
        }
        for i in 1..n {
            heading[i] = heading[i - 1] + wrap_angle(heading[i] - heading[i - 1]);
        }

        let mut curvature = vec![0.0; n];
        for i in 1..n - 1 {
            curvature[i] = three_point_curvature(&pts[i - 1], &pts[i], &pts[i + 1]);
        }
        curvature[0] = curvature[1];
        curvature[n - 1] = curvature[n - 2];

        Self { pts, s, heading, curvature, spacing: ds, search_window: DEFAULT_SEARCH_WINDOW }
    }

    pub fn total_length(&self) -> f64 {
        *self.s.last().unwrap()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn points(&self) -> &[Point2] {
        &self.pts
    }

    pub fn arc_lengths(&self) -> &[f64] {
        &self.s
    }

    pub fn headings(&self) -> &[f64] {
        &self.heading
    }

    pub fn curvatures(&self) -> &[f64] {
        &self.curvature
    }

    /// Half-width of the arc-length window searched by [`project`](Self::project).
    pub fn with_search_window(mut self, window: f64) -> Self {
        self.search_window = window;
        self
    }

    /// Segment index and fractional position for arc length `s` (clamped).
    fn locate(&self, s: f64) -> (usize, f64) {
        let n_seg = self.pts.len() - 1;
        let x = (s / self.spacing).clamp(0.0, n_seg as f64);
        let i = (x.floor() as usize).min(n_seg - 1);
        (i, x - i as f64)
    }

    fn lerp(values: &[f64], i: usize, u: f64) -> f64 {
        values[i] + (values[i + 1] - values[i]) * u
    }

    /// Sampled heading, linearly interpolated (continuous, unwrapped).
    pub fn heading_at(&self, s: f64) -> f64 {
        let (i, u) = self.locate(s);
        Self::lerp(&self.heading, i, u)
    }

    /// Sampled signed curvature, linearly interpolated.
    pub fn curvature_at(&self, s: f64) -> f64 {
        let (i, u) = self.locate(s);
        Self::lerp(&self.curvature, i, u)
    }

    /// Point on the sampled polyline at arc length `s`.
    pub fn point_at(&self, s: f64) -> Point2 {
        let (i, u) = self.locate(s);
        self.pts[i] + (self.pts[i + 1] - self.pts[i]) * u
    }

    /// Cubic Hermite evaluation with analytic derivatives. Outside
    /// `[0, total_length]` the path continues as a straight line along the
    /// end tangent.
    pub fn frame_at(&self, s: f64) -> PathFrame {
        let total = self.total_length();
        let tangent = |i: usize| {
            let h = self.heading[i];
            Point2::new(h.cos(), h.sin())
        };
        if s < 0.0 || s > total {
            let (i, base) = if s < 0.0 { (0, 0.0) } else { (self.pts.len() - 1, total) };
            let t = tangent(i);
            return PathFrame { pos: self.pts[i] + t * (s - base), d1: t, d2: Point2::zeros() };
        }
        let (i, u) = self.locate(s);
        let h = self.spacing;
        let (p0, p1) = (self.pts[i], self.pts[i + 1]);
        let (m0, m1) = (tangent(i) * h, tangent(i + 1) * h);
        let (u2, u3) = (u * u, u * u * u);
        let pos = p0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + m0 * (u3 - 2.0 * u2 + u)
            + p1 * (-2.0 * u3 + 3.0 * u2)
            + m1 * (u3 - u2);
        let du = p0 * (6.0 * u2 - 6.0 * u)
            + m0 * (3.0 * u2 - 4.0 * u + 1.0)
            + p1 * (-6.0 * u2 + 6.0 * u)
            + m1 * (3.0 * u2 - 2.0 * u);
        let duu = p0 * (12.0 * u - 6.0)
            + m0 * (6.0 * u - 4.0)
            + p1 * (-12.0 * u + 6.0)
            + m1 * (6.0 * u - 2.0);
        PathFrame { pos, d1: du / h, d2: duu / (h * h) }
    }

    /// Closest point on the polyline, searching segments within the path's
    /// search window around `hint_s`. Ties go to the smaller arc length.
    pub fn project(&self, point: Point2, hint_s: f64) -> PathProjection {
        let w = self.search_window;
        self.project_in(point, hint_s - w, hint_s + w)
    }

    /// Closest point over the whole path.
    pub fn project_global(&self, point: Point2) -> PathProjection {
        self.project_in(point, f64::NEG_INFINITY, f64::INFINITY)
    }

    fn project_in(&self, point: Point2, s_lo: f64, s_hi: f64) -> PathProjection {
        let n_seg = self.pts.len() - 1;
        let first = ((s_lo / self.spacing).floor().max(0.0) as usize).min(n_seg - 1);
        let last = ((s_hi / self.spacing).ceil().max(1.0) as usize).min(n_seg);

        let mut best = (f64::INFINITY, 0usize, 0.0f64);
        for i in first..last.max(first + 1) {
            let a = self.pts[i];
            let ab = self.pts[i + 1] - a;
            let u = ((point - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            let d2 = (point - (a + ab * u)).norm_squared();
            // strict improvement beyond round-off keeps the smallest-s tie
            if d2 < best.0 * (1.0 - 1e-12) - 1e-18 {
                best = (d2, i, u);
            }
        }
        let (_, i, u) = best;
        let a = self.pts[i];
        let ab = self.pts[i + 1] - a;
        let foot = a + ab * u;
        let side = cross(&ab, &(point - foot));
        let dist = (point - foot).norm();
        PathProjection {
            s: self.s[i] + u * self.spacing,
            lateral_offset: if side < 0.0 { -dist } else { dist },
            foot,
            ref_heading: Self::lerp(&self.heading, i, u),
        }
    }

    /// Largest `|curvature|` over `[s0, s0 + lookahead]`, clamped to the path.
    pub fn max_curvature_ahead(&self, s0: f64, lookahead: f64) -> f64 {
        let total = self.total_length();
        let a = s0.clamp(0.0, total);
        let b = (s0 + lookahead.max(0.0)).clamp(0.0, total);
        let mut m = self.curvature_at(a).abs().max(self.curvature_at(b).abs());
        let first = (a / self.spacing).floor() as usize + 1;
        let last = (b / self.spacing).ceil() as usize;
        for i in first..last.min(self.pts.len()) {
            if self.s[i] > a && self.s[i] < b {
                m = m.max(self.curvature[i].abs());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    pub(crate) fn circle(radius: f64, n: usize, clockwise: bool) -> Vec<Point2> {
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                let t = if clockwise { -t } else { t };
                Point2::new(radius * t.cos(), radius * t.sin())
            })
            .collect()
    }

    fn straight(n: usize) -> Vec<Point2> {
        (0..n).map(|i| Point2::new(i as f64, 0.0)).collect()
    }

    #[test]
    fn straight_line_has_zero_curvature() {
        let p = ReferencePath::build(&straight(100), 1.0).unwrap();
        assert!(p.curvatures().iter().all(|k| k.abs() < 1e-12));
        assert_relative_eq!(p.total_length(), 99.0, epsilon = 1e-9);
    }

    #[test]
    fn circle_curvature_within_two_percent() {
        let p = ReferencePath::build(&circle(10.0, 360, false), 1.0).unwrap();
        let k = p.curvatures();
        for &ki in &k[1..k.len() - 1] {
            assert!((ki - 0.1).abs() <= 0.002, "kappa {ki}");
        }
        let p = ReferencePath::build(&circle(10.0, 360, true), 1.0).unwrap();
        assert!(p.curvatures()[5] < 0.0);
    }

    #[test]
    fn three_collinear_points() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)];
        let p = ReferencePath::build(&pts, 1.0).unwrap();
        assert_relative_eq!(p.total_length(), 2.0);
        assert!(p.headings().iter().all(|h| *h == 0.0));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            ReferencePath::build(&straight(2), 1.0).unwrap_err(),
            PathError::TooFewPoints(2)
        );
        let dup = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 0.0)];
        assert_eq!(ReferencePath::build(&dup, 1.0).unwrap_err(), PathError::DuplicatePoint(1));
        assert!(matches!(ReferencePath::build(&straight(5), 0.0), Err(PathError::BadSpacing(_))));
        let nan = [Point2::new(0.0, 0.0), Point2::new(f64::NAN, 0.0), Point2::new(1.0, 0.0)];
        assert_eq!(ReferencePath::build(&nan, 1.0).unwrap_err(), PathError::NonFinite(1));
    }

    #[test]
    fn projection_examples() {
        let p = ReferencePath::build(&straight(20), 1.0).unwrap();
        let on = p.project(Point2::new(7.25, 0.0), 7.0);
        assert_relative_eq!(on.lateral_offset, 0.0);
        assert_relative_eq!(on.s, 7.25);

        let left = p.project(Point2::new(5.0, 1.0), 5.0);
        assert_relative_eq!(left.s, 5.0, epsilon = 1e-12);
        assert_relative_eq!(left.lateral_offset, 1.0, epsilon = 1e-12);
        assert_relative_eq!(left.heading_error(0.0), 0.0);
        assert_relative_eq!(p.project(Point2::new(5.0, -2.0), 5.0).lateral_offset, -2.0);
    }

    #[test]
    fn projection_from_circle_centre() {
        let cw = ReferencePath::build(&circle(10.0, 360, true), 1.0).unwrap();
        assert_relative_eq!(cw.project(Point2::zeros(), 0.0).lateral_offset, -10.0, epsilon = 0.02);
        // counter-clockwise traversal puts the centre on the left
        let ccw = ReferencePath::build(&circle(10.0, 360, false), 1.0).unwrap();
        assert_relative_eq!(ccw.project(Point2::zeros(), 0.0).lateral_offset, 10.0, epsilon = 0.02);
    }

    #[test]
    fn equidistant_projection_prefers_smaller_s() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 2.0), Point2::new(0.0, 2.0)];
        let p = ReferencePath::build(&pts, 1.0).unwrap();
        let pr = p.project_global(Point2::new(5.0, 1.0));
        assert_eq!(pr.s, 5.0);
        assert_eq!(pr.lateral_offset, 1.0);
    }

    #[test]
    fn curvature_lookahead_examples() {
        let s = ReferencePath::build(&straight(50), 1.0).unwrap();
        assert_eq!(s.max_curvature_ahead(10.0, 20.0), 0.0);

        let mut pts = straight(30);
        for i in 1..=90 {
            let t = (i as f64).to_radians();
            pts.push(Point2::new(29.0 + 10.0 * t.sin(), 10.0 - 10.0 * t.cos()));
        }
        let p = ReferencePath::build(&pts, 1.0).unwrap();
        assert_relative_eq!(p.max_curvature_ahead(0.0, 60.0), 0.1, max_relative = 0.02);
        assert_eq!(p.max_curvature_ahead(35.0, 0.0), p.curvature_at(35.0).abs());
    }

    #[test]
    fn hermite_frame_is_consistent() {
        let p = ReferencePath::build(&circle(15.0, 200, false), 1.0).unwrap();
        for s in [1.3, 10.7, 40.01, 80.5] {
            let f = p.frame_at(s);
            let h = 1e-6;
            let fd1 = (p.frame_at(s + h).pos - p.frame_at(s - h).pos) / (2.0 * h);
            let fd2 = (p.frame_at(s + h).d1 - p.frame_at(s - h).d1) / (2.0 * h);
            assert!((fd1 - f.d1).norm() < 1e-7);
            assert!((fd2 - f.d2).norm() < 1e-5);
            let fdn = (p.frame_at(s + h).normal() - p.frame_at(s - h).normal()) / (2.0 * h);
            assert!((fdn - f.normal_rate()).norm() < 1e-6);
            assert!((f.pos - p.point_at(s)).norm() < 0.01);
            assert_relative_eq!(f.tangent_rate().norm(), 1.0 / 15.0, max_relative = 0.03);
        }
        let end = p.frame_at(p.total_length() + 3.0);
        assert_relative_eq!((end.pos - p.points().last().unwrap()).norm(), 3.0, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn resampling_preserves_length(radius in 5.0f64..60.0, n in 60usize..400) {
            let pts = circle(radius, n, false);
            let raw: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            let p = ReferencePath::build(&pts, 1.0).unwrap();
            prop_assert!((p.total_length() - raw).abs() <= 1e-3 * raw);
        }

        #[test]
        fn normal_offset_is_recovered(s in 5.0f64..55.0, d in -8.0f64..8.0) {
            let p = ReferencePath::build(&circle(20.0, 400, false), 0.5).unwrap();
            let q = p.point_at(s) + Point2::new(-p.heading_at(s).sin(), p.heading_at(s).cos()) * d;
            let pr = p.project(q, s);
            prop_assert!((pr.lateral_offset - d).abs() < 0.5 * p.spacing(), "{} vs {d}", pr.lateral_offset);
        }

        #[test]
        fn lookahead_is_monotone(s0 in 0.0f64..100.0, a in 0.0f64..50.0, b in 0.0f64..50.0) {
            let mut pts = straight(40);
            for i in 1..=120 {
                let t = (i as f64).to_radians();
                pts.push(Point2::new(39.0 + 12.0 * t.sin(), 12.0 - 12.0 * t.cos()));
            }
            let p = ReferencePath::build(&pts, 1.0).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(p.max_curvature_ahead(s0, lo) <= p.max_curvature_ahead(s0, hi));
        }
    }
}
