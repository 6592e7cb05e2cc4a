//! Static obstacles and their parabolic forbidden regions.
//!
//! Each obstacle is wrapped in a parabola whose axis is the path normal at
//! the point closest to the obstacle centroid, opening away from the path.
//! Among all such parabolas containing every vertex, the fit picks the one
//! that encloses the least area up to the obstacle's far side.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::path::{Point2, ReferencePath};

pub const DEFAULT_P_MIN: f64 = 0.5;
pub const DEFAULT_MARGIN: f64 = 0.5;
const P_MAX: f64 = 1e4;

#[derive(Debug, Error)]
pub enum ObstacleError {
    #[error("obstacle {0}: no vertices")]
    Empty(String),
    #[error("obstacle {0}: non-finite vertex")]
    NonFinite(String),
    #[error("obstacle {0}: polygon is not convex")]
    NotConvex(String),
    #[error("obstacle {0}: rows are not contiguous")]
    Ungrouped(String),
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: expected header `obstacle_id,x,y`, found `{found}`")]
    Header { path: String, found: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub id: String,
    vertices: Vec<Point2>,
}

fn cross(a: Point2, b: Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

impl Obstacle {
    /// Vertices in order around the polygon; 1 or 2 vertices are allowed
    /// (point and segment obstacles).
    pub fn new(id: impl Into<String>, vertices: Vec<Point2>) -> Result<Self, ObstacleError> {
        let id = id.into();
        if vertices.is_empty() {
            return Err(ObstacleError::Empty(id));
        }
        if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
            return Err(ObstacleError::NonFinite(id));
        }
        let n = vertices.len();
        if n >= 3 {
            let mut sign = 0.0;
            for i in 0..n {
                let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
                let z = cross(b - a, c - b);
                if z.abs() <= 1e-12 {
                    continue;
                }
                if sign == 0.0 {
                    sign = z.signum();
                } else if z.signum() != sign {
                    return Err(ObstacleError::NotConvex(id));
                }
            }
            // a star polygon turns the same way at every corner but winds twice
            let turning: f64 = (0..n)
                .map(|i| {
                    let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
                    let (u, v) = (b - a, c - b);
                    cross(u, v).atan2(u.dot(&v))
                })
                .sum();
            if turning.abs() > 2.0 * std::f64::consts::PI + 1e-6 {
                return Err(ObstacleError::NotConvex(id));
            }
        }
        Ok(Self { id, vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    /// Vertex average.
    pub fn centroid(&self) -> Point2 {
        self.vertices.iter().sum::<Point2>() / self.vertices.len() as f64
    }

    pub fn contains(&self, p: Point2) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let mut sign = 0.0;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let z = cross(b - a, p - a);
            if z.abs() <= 1e-12 {
                continue;
            }
            if sign == 0.0 {
                sign = z.signum();
            } else if z.signum() != sign {
                return false;
            }
        }
        true
    }

    /// Euclidean distance from `p` to the polygon, zero inside.
    pub fn distance(&self, p: Point2) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        let n = self.vertices.len();
        if n == 1 {
            return (p - self.vertices[0]).norm();
        }
        (0..n)
            .map(|i| segment_distance(p, self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Forbidden region `{ a - b^2 / (2p) + margin > 0 }` in the frame with
/// origin `vertex`, `a` along `axis` and `b` along the axis rotated by -90°.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaRegion {
    pub vertex: Point2,
    pub axis: Point2,
    pub p: f64,
    pub margin: f64,
    /// Arc length of the path point the axis passes through.
    pub path_s: f64,
}

impl ParabolaRegion {
    fn tangent(&self) -> Point2 {
        Point2::new(self.axis.y, -self.axis.x)
    }

    pub fn local(&self, point: Point2) -> (f64, f64) {
        let d = point - self.vertex;
        (d.dot(&self.axis), d.dot(&self.tangent()))
    }

    /// Positive inside the forbidden region.
    pub fn interior_value(&self, point: Point2) -> f64 {
        let (a, b) = self.local(point);
        a - b * b / (2.0 * self.p) + self.margin
    }

    pub fn interior_gradient(&self, point: Point2) -> Point2 {
        let (_, b) = self.local(point);
        self.axis - self.tangent() * (b / self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub p_min: f64,
    pub margin: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { p_min: DEFAULT_P_MIN, margin: DEFAULT_MARGIN }
    }
}

/// Apex offset along the axis for parameter `p`.
fn apex(local: &[(f64, f64)], p: f64) -> f64 {
    local.iter().map(|&(a, b)| a - b * b / (2.0 * p)).fold(f64::INFINITY, f64::min)
}

/// Area of the region between the parabola and the line `a = a_far`.
pub fn truncated_area(local: &[(f64, f64)], p: f64) -> f64 {
    let far = local.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    let h = (far - apex(local, p)).max(0.0);
    4.0 / 3.0 * (2.0 * p).sqrt() * h.powf(1.5)
}

/// Focal parameter minimizing [`truncated_area`] over `[p_min, P_MAX]`.
pub fn minimal_p(local: &[(f64, f64)], p_min: f64) -> f64 {
    let f = |lp: f64| truncated_area(local, lp.exp());
    let (lo, hi) = (p_min.ln(), P_MAX.max(p_min).ln());
    const SCAN: usize = 96;
    let step = (hi - lo) / SCAN as f64;
    let mut best = 0;
    let mut best_f = f(lo);
    for i in 1..=SCAN {
        let v = f(lo + step * i as f64);
        if v < best_f {
            best = i;
            best_f = v;
        }
    }
    let mut a = lo + step * best.saturating_sub(1) as f64;
    let mut b = (lo + step * (best + 1) as f64).min(hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let lp = 0.5 * (a + b);
    let cands = [(lo, f(lo)), (lp, f(lp)), (lo + step * best as f64, best_f)];
    let (lp, _) = cands.iter().fold((lo, f64::INFINITY), |acc, &(x, v)| if v < acc.1 { (x, v) } else { acc });
    lp.exp().clamp(p_min, P_MAX)
}

pub fn fit_parabola(obstacle: &Obstacle, path: &ReferencePath, cfg: &FitConfig) -> ParabolaRegion {
    let c = obstacle.centroid();
    let proj = path.project_global(c);
    let (sh, ch) = proj.ref_heading.sin_cos();
    let left = Point2::new(-sh, ch);
    let axis = if proj.lateral_offset < 0.0 { -left } else { left };
    let tangent = Point2::new(axis.y, -axis.x);
    let local: Vec<(f64, f64)> = obstacle
        .vertices()
        .iter()
        .map(|v| {
            let d = v - c;
            (d.dot(&axis), d.dot(&tangent))
        })
        .collect();
    let p = minimal_p(&local, cfg.p_min);
    ParabolaRegion { vertex: c + axis * apex(&local, p), axis, p, margin: cfg.margin, path_s: proj.s }
}

#[derive(Debug, Deserialize)]
struct Row {
    obstacle_id: String,
    x: f64,
    y: f64,
}

/// Reads `obstacle_id,x,y` rows; each id's rows must be contiguous.
pub fn read_obstacles_csv(path: impl AsRef<Path>) -> Result<Vec<Obstacle>, ObstacleError> {
    let p = path.as_ref();
    let err = |source| ObstacleError::Csv { path: p.display().to_string(), source };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(p).map_err(err)?;
    let headers = rdr.headers().map_err(err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["obstacle_id", "x", "y"] {
        return Err(ObstacleError::Header {
            path: p.display().to_string(),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut groups: Vec<(String, Vec<Point2>)> = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(err)?;
        match groups.last_mut() {
            Some((id, pts)) if *id == row.obstacle_id => pts.push(Point2::new(row.x, row.y)),
            _ => {
                if groups.iter().any(|(id, _)| *id == row.obstacle_id) {
                    return Err(ObstacleError::Ungrouped(row.obstacle_id));
                }
                groups.push((row.obstacle_id, vec![Point2::new(row.x, row.y)]));
            }
        }
    }
    groups.into_iter().map(|(id, pts)| Obstacle::new(id, pts)).collect()
}
