//! Reference paths sampled at a fixed period.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathShape {
    Square,
    Circle,
    /// Two tangent loops, the first counter-clockwise, the second clockwise.
    Eight,
    Hold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    XY,
    YZ,
}

impl Plane {
    /// In-plane unit axes `(u, v)`.
    pub fn axes(self) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            Plane::XY => (Vector3::x(), Vector3::y()),
            Plane::YZ => (Vector3::y(), Vector3::z()),
        }
    }
}

pub const DEFAULT_SAMPLE_PERIOD: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub shape: PathShape,
    pub plane: Plane,
    pub center: [f64; 3],
    /// Square width, circle radius or loop radius of the eight (m).
    pub size: f64,
    /// s
    pub duration: f64,
    #[serde(default = "default_period")]
    pub sample_period: f64,
}

fn default_period() -> f64 {
    DEFAULT_SAMPLE_PERIOD
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub stamp: f64,
    pub position: Vector3<f64>,
}

impl PathSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period > 0.0) {
            return Err(Error::Config(format!("sample_period must be positive, got {}", self.sample_period)));
        }
        if !(self.size > 0.0) {
            return Err(Error::Config(format!("path size must be positive, got {}", self.size)));
        }
        if !(self.duration >= self.sample_period) {
            return Err(Error::Config("path duration must cover at least one sample period".into()));
        }
        Ok(())
    }

    pub fn num_waypoints(&self) -> usize {
        ((self.duration / self.sample_period).round() as usize).max(1)
    }

    /// Closed-curve length (zero for hold).
    pub fn length(&self) -> f64 {
        use std::f64::consts::PI;
        match self.shape {
            PathShape::Square => 4.0 * self.size,
            PathShape::Circle => 2.0 * PI * self.size,
            PathShape::Eight => 4.0 * PI * self.size,
            PathShape::Hold => 0.0,
        }
    }

    /// In-plane offset from the center at curve parameter `s` in `[0, 1]`.
    fn offset(&self, s: f64) -> (f64, f64) {
        use std::f64::consts::{PI, TAU};
        let r = self.size;
        match self.shape {
            PathShape::Hold => (0.0, 0.0),
            PathShape::Circle => ((TAU * s).cos() * r, (TAU * s).sin() * r),
            PathShape::Square => {
                // corners counter-clockwise from (-h, -h)
                let h = 0.5 * r;
                let corners = [(-h, -h), (h, -h), (h, h), (-h, h), (-h, -h)];
                let t = (4.0 * s).clamp(0.0, 4.0);
                let edge = (t.floor() as usize).min(3);
                let f = t - edge as f64;
                let (a, b) = (corners[edge], corners[edge + 1]);
                (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1))
            }
            PathShape::Eight => {
                // both loops pass through the center, where they are tangent
                if s <= 0.5 {
                    let phi = PI + TAU * (2.0 * s);
                    (r + r * phi.cos(), r * phi.sin())
                } else {
                    let phi = -TAU * (2.0 * s - 1.0);
                    (-r + r * phi.cos(), r * phi.sin())
                }
            }
        }
    }
}

/// Waypoints `k * sample_period`, `k = 0..N` with `N = round(duration / period)`.
/// Closed shapes are parameterized so the last waypoint equals the first.
pub fn generate_path(spec: &PathSpec) -> Result<Vec<Waypoint>> {
    spec.validate()?;
    let n = spec.num_waypoints();
    let (u, v) = spec.plane.axes();
    let center = Vector3::from(spec.center);
    Ok((0..n)
        .map(|k| {
            let s = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
            let (a, b) = spec.offset(s);
            Waypoint { stamp: k as f64 * spec.sample_period, position: center + u * a + v * b }
        })
        .collect())
}

/// Index of the waypoint in force at time `t`, clamped to the last one.
pub fn waypoint_index(t: f64, sample_period: f64, len: usize) -> usize {
    (((t / sample_period) + 1e-9).floor() as usize).min(len.saturating_sub(1))
}
