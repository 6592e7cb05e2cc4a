//! Track files and the segment-based track generator.
//!
//! A track CSV has the header `x,y` and one waypoint per row. Generated
//! tracks chain straights and constant-radius arcs with tangent joins,
//! optionally eased in and out by clothoids.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path::Point2;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {source}")]
    Spec { path: String, source: toml::de::Error },
    #[error("invalid track spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Row {
    x: f64,
    y: f64,
}

pub fn read_track_csv(path: impl AsRef<Path>) -> Result<Vec<Point2>, TrackError> {
    let p = path.as_ref();
    let err = |source| TrackError::Csv { path: p.display().to_string(), source };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(p).map_err(err)?;
    let headers = rdr.headers().map_err(err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "y"] {
        return Err(TrackError::Invalid(format!(
            "{}: expected header `x,y`, found `{}`",
            p.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize::<Row>()
        .map(|r| r.map(|r| Point2::new(r.x, r.y)).map_err(err))
        .collect()
}

pub fn write_track_csv(path: impl AsRef<Path>, points: &[Point2]) -> Result<(), TrackError> {
    let p = path.as_ref();
    let err = |source| TrackError::Csv { path: p.display().to_string(), source };
    let mut w = csv::Writer::from_path(p).map_err(err)?;
    for pt in points {
        w.serialize(Row { x: pt.x, y: pt.y }).map_err(err)?;
    }
    w.flush().map_err(|source| TrackError::Io { path: p.display().to_string(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    Straight { length: f64 },
    /// Positive angle turns left. `transition` is the length of the clothoid
    /// at each end over which curvature ramps linearly to `1/radius`; the
    /// total heading change stays `angle_deg`.
    Arc {
        radius: f64,
        angle_deg: f64,
        #[serde(default)]
        transition: f64,
    },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Straight { length } => length,
            Segment::Arc { radius, angle_deg, transition } => {
                radius * angle_deg.to_radians().abs() + transition
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    #[serde(default)]
    pub start: [f64; 2],
    #[serde(default)]
    pub heading_deg: f64,
    /// Spacing of the generated waypoints (m).
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(rename = "segment")]
    pub segments: Vec<Segment>,
}

fn default_step() -> f64 {
    0.5
}

impl TrackSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrackError> {
        let p = path.as_ref();
        let text = fs::read_to_string(p)
            .map_err(|source| TrackError::Io { path: p.display().to_string(), source })?;
        toml::from_str(&text).map_err(|source| TrackError::Spec { path: p.display().to_string(), source })
    }

    /// Long straights joined by tight curves, the smallest of radius 10 m.
    pub fn demo_circuit() -> Self {
        use Segment::*;
        Self {
            start: [0.0, 0.0],
            heading_deg: 0.0,
            step: 0.5,
            segments: vec![
                Straight { length: 150.0 },
                Arc { radius: 10.0, angle_deg: 90.0, transition: 8.0 },
                Straight { length: 120.0 },
                Arc { radius: 20.0, angle_deg: 90.0, transition: 14.0 },
                Straight { length: 110.0 },
                Arc { radius: 10.0, angle_deg: -90.0, transition: 8.0 },
                Straight { length: 130.0 },
                Arc { radius: 15.0, angle_deg: 120.0, transition: 11.0 },
                Straight { length: 140.0 },
            ],
        }
    }

    pub fn generate(&self) -> Result<Vec<Point2>, TrackError> {
        if !(self.step > 0.0) {
            return Err(TrackError::Invalid(format!("step must be positive, got {}", self.step)));
        }
        if self.segments.is_empty() {
            return Err(TrackError::Invalid("no segments".into()));
        }
        let mut pos = Point2::new(self.start[0], self.start[1]);
        let mut heading = self.heading_deg.to_radians();
        let mut pts = vec![pos];
        for seg in &self.segments {
            match *seg {
                Segment::Straight { length } => {
                    if !(length > 0.0) {
                        return Err(TrackError::Invalid(format!("straight length {length}")));
                    }
                    let n = (length / self.step).ceil() as usize;
                    let dir = Point2::new(heading.cos(), heading.sin());
                    for i in 1..=n {
                        pts.push(pos + dir * (length * i as f64 / n as f64));
                    }
                    pos += dir * length;
                }
                Segment::Arc { radius, angle_deg, transition } => {
                    let sweep = angle_deg.to_radians();
                    if !(radius > 0.0) || sweep == 0.0 || !(transition >= 0.0) || transition > radius * sweep.abs() {
                        return Err(TrackError::Invalid(format!(
                            "arc radius {radius}, angle {angle_deg}, transition {transition}"
                        )));
                    }
                    let side = sweep.signum();
                    if transition == 0.0 {
                        let centre = pos + Point2::new(-heading.sin(), heading.cos()) * (side * radius);
                        let n = ((radius * sweep.abs()) / self.step).ceil() as usize;
                        let start_angle = (pos - centre).y.atan2((pos - centre).x);
                        for i in 1..=n {
                            let a = start_angle + sweep * i as f64 / n as f64;
                            pts.push(centre + Point2::new(a.cos(), a.sin()) * radius);
                        }
                        pos = *pts.last().unwrap();
                        heading += sweep;
                    } else {
                        let total = seg.length();
                        let kappa = side / radius;
                        let curvature = |u: f64| {
                            if u < transition {
                                kappa * u / transition
                            } else if u > total - transition {
                                kappa * (total - u) / transition
                            } else {
                                kappa
                            }
                        };
                        let n = (total / self.step).ceil() as usize;
                        let sub = 32;
                        let du = total / (n * sub) as f64;
                        let mut u = 0.0;
                        let h0 = heading;
                        for _ in 0..n {
                            for _ in 0..sub {
                                // Simpson on heading, midpoint on position.
                                let k0 = curvature(u);
                                let km = curvature(u + 0.5 * du);
                                let k1 = curvature(u + du);
                                let hm = heading + 0.5 * du * (k0 + km) * 0.5;
                                pos += Point2::new(hm.cos(), hm.sin()) * du;
                                heading += du * (k0 + 4.0 * km + k1) / 6.0;
                                u += du;
                            }
                            pts.push(pos);
                        }
                        heading = h0 + sweep;
                    }
                }
            }
        }
        Ok(pts)
    }
}

/// Arc-length intervals of the constant-radius parts of the arcs in `spec`,
/// with their radii.
pub fn arc_intervals(spec: &TrackSpec) -> Vec<(f64, f64, f64)> {
    let mut s = 0.0;
    let mut out = Vec::new();
    for seg in &spec.segments {
        if let Segment::Arc { radius, transition, .. } = *seg {
            out.push((s + transition, s + seg.length() - transition, radius));
        }
        s += seg.length();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::ReferencePath;
    use approx::assert_relative_eq;

    #[test]
    fn generated_track_has_expected_length_and_curvature() {
        let spec = TrackSpec::demo_circuit();
        let pts = spec.generate().unwrap();
        let path = ReferencePath::build(&pts, 1.0).unwrap();
        let expected: f64 = spec.segments.iter().map(Segment::length).sum();
        assert_relative_eq!(path.total_length(), expected, max_relative = 1e-3);
        let kmax = path.max_curvature_ahead(0.0, path.total_length());
        assert_relative_eq!(kmax, 0.1, max_relative = 0.02);
        let (a, b, r) = arc_intervals(&spec)[0];
        assert_eq!(r, 10.0);
        assert_relative_eq!(path.curvature_at(0.5 * (a + b)), 0.1, max_relative = 0.02);
    }

    #[test]
    fn clothoid_transitions_ramp_curvature() {
        let spec = TrackSpec {
            start: [0.0, 0.0],
            heading_deg: 0.0,
            step: 0.25,
            segments: vec![
                Segment::Straight { length: 30.0 },
                Segment::Arc { radius: 10.0, angle_deg: -90.0, transition: 6.0 },
                Segment::Straight { length: 30.0 },
            ],
        };
        let pts = spec.generate().unwrap();
        let last = pts[pts.len() - 1] - pts[pts.len() - 2];
        assert_relative_eq!(last.x, 0.0, epsilon = 1e-6);
        assert!(last.y < 0.0);
        let path = ReferencePath::build(&pts, 0.5).unwrap();
        assert_relative_eq!(path.total_length(), 60.0 + 5.0 * std::f64::consts::PI + 6.0, max_relative = 1e-4);
        let (a, b, r) = arc_intervals(&spec)[0];
        assert_eq!((a, r), (36.0, 10.0));
        assert_relative_eq!(path.curvature_at(0.5 * (a + b)), -0.1, max_relative = 0.02);
        assert_relative_eq!(path.curvature_at(33.0), -0.05, max_relative = 0.05);
        assert_relative_eq!(path.curvature_at(b + 3.0), -0.05, max_relative = 0.05);
    }

    #[test]
    fn csv_round_trip_and_header_check() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("t.csv");
        let pts = vec![Point2::new(0.0, 0.0), Point2::new(1.5, -2.0), Point2::new(3.0, 1.0)];
        write_track_csv(&f, &pts).unwrap();
        assert!(std::fs::read_to_string(&f).unwrap().starts_with("x,y\n"));
        assert_eq!(read_track_csv(&f).unwrap(), pts);

        let bad = dir.path().join("b.csv");
        std::fs::write(&bad, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_track_csv(&bad), Err(TrackError::Invalid(_))));
    }

    #[test]
    fn spec_parses_from_toml() {
        let text = r#"
            step = 0.25
            [[segment]]
            kind = "straight"
            length = 10.0
            [[segment]]
            kind = "arc"
            radius = 5.0
            angle_deg = -45.0
        "#;
        let spec: TrackSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.segments.len(), 2);
        let pts = spec.generate().unwrap();
        assert!(pts.last().unwrap().y < 0.0);
        assert!(toml::from_str::<TrackSpec>("bogus = 1\nsegment = []").is_err());
    }
}
