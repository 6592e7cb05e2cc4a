//! Heuristic target speed for the planner's speed cost.

use serde::{Deserialize, Serialize};

use crate::path::ReferencePath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VelocityPlannerConfig {
    pub v_max: f64,
    /// Speed increment over the current speed.
    pub dv: f64,
    /// Curvature preview time (s).
    pub t_prev: f64,
    pub mu: f64,
    pub g: f64,
    /// Minimum preview distance (m), used at low speed.
    pub min_preview: f64,
}

impl Default for VelocityPlannerConfig {
    fn default() -> Self {
        Self { v_max: 20.0, dv: 1.0, t_prev: 4.0, mu: 1.0, g: crate::GRAVITY, min_preview: 5.0 }
    }
}

impl VelocityPlannerConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("v_max", self.v_max),
            ("dv", self.dv),
            ("t_prev", self.t_prev),
            ("mu", self.mu),
            ("g", self.g),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("velocity.{name} must be positive, got {v}"));
            }
        }
        if !(self.min_preview.is_finite() && self.min_preview >= 0.0) {
            return Err(format!("velocity.min_preview must be non-negative, got {}", self.min_preview));
        }
        Ok(())
    }

    /// Speed at which curvature `kappa` produces the lateral-acceleration
    /// limit `0.5 mu g`; infinite on straight road.
    pub fn curve_speed(&self, kappa: f64) -> f64 {
        if kappa.abs() <= 1e-12 {
            f64::INFINITY
        } else {
            (0.5 * self.mu * self.g / kappa.abs()).sqrt()
        }
    }
}

/// `min(sqrt(0.5 mu g R_min), V_max, V + dV)` with `R_min` taken over the
/// next `max(V * T_prev, min_preview)` metres of path.
pub fn heuristic_speed(v: f64, s0: f64, path: &ReferencePath, cfg: &VelocityPlannerConfig) -> f64 {
    let v = v.max(0.0);
    let preview = (v * cfg.t_prev).max(cfg.min_preview);
    let kappa = path.max_curvature_ahead(s0, preview);
    cfg.curve_speed(kappa).min(cfg.v_max).min(v + cfg.dv).max(0.0)
}

/// Highest straight-line speed from which full braking `u1_min` stops the
/// vehicle within the horizon `t_h`.
pub fn straight_line_vmax(cfg: &VelocityPlannerConfig, u1_min: f64, t_h: f64) -> f64 {
    cfg.v_max.min(u1_min.abs() * t_h.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Point2;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn straight() -> ReferencePath {
        ReferencePath::build(&[Point2::new(0.0, 0.0), Point2::new(250.0, 0.0), Point2::new(500.0, 0.0)], 1.0).unwrap()
    }

    fn circle(r: f64) -> ReferencePath {
        let n = 400;
        let pts: Vec<_> = (0..=n)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / n as f64;
                Point2::new(r * a.sin(), r - r * a.cos())
            })
            .collect();
        ReferencePath::build(&pts, 0.25).unwrap()
    }

    #[test]
    fn straight_road_adds_increment() {
        let cfg = VelocityPlannerConfig::default();
        assert_eq!(heuristic_speed(15.0, 0.0, &straight(), &cfg), 16.0);
        assert_eq!(heuristic_speed(20.0, 0.0, &straight(), &cfg), 20.0);
        assert_eq!(heuristic_speed(0.0, 0.0, &straight(), &cfg), 1.0);
    }

    #[test]
    fn tight_curve_binds() {
        let cfg = VelocityPlannerConfig::default();
        let v = heuristic_speed(15.0, 5.0, &circle(10.0), &cfg);
        // sqrt(0.5 * 9.81 * 10) = 7.00357...
        assert_relative_eq!(v, 7.003570517957252, max_relative = 0.02);
        assert_relative_eq!(cfg.curve_speed(0.1), 7.003570517957252, epsilon = 1e-12);
    }

    #[test]
    fn stopping_cap() {
        let cfg = VelocityPlannerConfig { v_max: 30.0, ..Default::default() };
        assert_eq!(straight_line_vmax(&cfg, -8.0, 3.0), 24.0);
        assert_eq!(straight_line_vmax(&VelocityPlannerConfig::default(), -8.0, 3.0), 20.0);
        assert_eq!(straight_line_vmax(&cfg, -8.0, 0.0), 0.0);
    }

    proptest! {
        #[test]
        fn bounded_by_cap_and_increment(v in 0.0f64..30.0, s0 in 0.0f64..30.0, r in 5.0f64..200.0) {
            let cfg = VelocityPlannerConfig::default();
            let path = circle(r);
            let vh = heuristic_speed(v, s0, &path, &cfg);
            prop_assert!(vh >= 0.0);
            prop_assert!(vh <= v + cfg.dv);
            prop_assert!(vh <= cfg.v_max);
            let kappa = path.max_curvature_ahead(s0, (v * cfg.t_prev).max(cfg.min_preview));
            prop_assert!(kappa * vh * vh <= 0.5 * cfg.mu * cfg.g * 1.02);
        }

        #[test]
        fn tighter_curve_never_faster(r1 in 5.0f64..100.0, dr in 0.0f64..100.0) {
            let cfg = VelocityPlannerConfig::default();
            let k1 = 1.0 / r1;
            let k2 = 1.0 / (r1 + dr);
            prop_assert!(cfg.curve_speed(k1) <= cfg.curve_speed(k2));
        }
    }
}
