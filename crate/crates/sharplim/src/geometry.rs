//! Polylines, interface states and point-to-curve distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Point>,
    pub closed: bool,
}

#[inline]
fn dist(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

impl Polyline {
    pub fn new(points: Vec<Point>, closed: bool) -> Self {
        Polyline { points, closed }
    }

    /// Regular polygon with `n` vertices on the circle of radius `r`.
    pub fn circle(center: Point, r: f64, n: usize) -> Self {
        let points = (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [center[0] + r * th.cos(), center[1] + r * th.sin()]
            })
            .collect();
        Polyline { points, closed: true }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Segments as vertex pairs, including the closing segment.
    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.points.len();
        let m = if self.closed && n > 2 { n } else { n.saturating_sub(1) };
        (0..m).map(move |k| (self.points[k], self.points[(k + 1) % n]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| dist(a, b)).sum()
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        if self.points.len() == 1 {
            return dist(p, self.points[0]);
        }
        self.segments().map(|(a, b)| point_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// Even-odd ray crossing test; meaningful for closed curves.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.segments() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if x > p[0] {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Vertices plus interior samples so that consecutive samples are at
    /// most `spacing` apart.
    pub fn densify(&self, spacing: f64) -> Vec<Point> {
        let mut out = Vec::new();
        if self.points.len() == 1 {
            return self.points.clone();
        }
        for (a, b) in self.segments() {
            let n = (dist(a, b) / spacing).ceil().max(1.0) as usize;
            for k in 0..n {
                let t = k as f64 / n as f64;
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        if !self.closed {
            out.push(*self.points.last().unwrap());
        }
        out
    }

    /// Mean and spread of vertex distances to `center`.
    pub fn radius_stats(&self, center: Point) -> (f64, f64, f64) {
        let r: Vec<f64> = self.points.iter().map(|&p| dist(p, center)).collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = r.iter().copied().fold(0.0, f64::max);
        (mean, lo, hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterfaceMode {
    Radial,
    LevelSet,
}

/// An interface Γ_t: a radial circle, 1D crossing points, or 2D polylines,
/// optionally with the signed distance it came from.
#[derive(Clone, Debug)]
pub struct InterfaceState {
    pub mode: InterfaceMode,
    pub center: Option<Point>,
    pub radius: Option<f64>,
    pub crossings: Vec<f64>,
    pub curves: Vec<Polyline>,
    pub dist: Option<Field>,
    pub time: f64,
}

impl InterfaceState {
    pub fn radial(center: Point, radius: f64, time: f64) -> Self {
        InterfaceState {
            mode: InterfaceMode::Radial,
            center: Some(center),
            radius: Some(radius),
            crossings: Vec::new(),
            curves: Vec::new(),
            dist: None,
            time,
        }
    }

    pub fn from_crossings(crossings: Vec<f64>, time: f64) -> Self {
        InterfaceState {
            mode: InterfaceMode::LevelSet,
            center: None,
            radius: None,
            crossings,
            curves: Vec::new(),
            dist: None,
            time,
        }
    }

    pub fn from_curves(curves: Vec<Polyline>, time: f64) -> Self {
        InterfaceState {
            mode: InterfaceMode::LevelSet,
            center: None,
            radius: None,
            crossings: Vec::new(),
            curves,
            dist: None,
            time,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.radius.is_none() && self.crossings.is_empty() && self.curves.iter().all(|c| c.is_empty())
    }

    /// Unsigned distance from `p` to Γ.
    pub fn distance_to(&self, p: Point) -> f64 {
        if let (InterfaceMode::Radial, Some(c), Some(r)) = (self.mode, self.center, self.radius) {
            return (dist(p, c) - r).abs();
        }
        let d1 = self.crossings.iter().map(|&x| (p[0] - x).abs()).fold(f64::INFINITY, f64::min);
        let d2 = self.curves.iter().map(|c| c.distance_to(p)).fold(f64::INFINITY, f64::min);
        d1.min(d2)
    }

    /// Sample points of Γ (densified curves, the crossings, or the circle).
    pub fn samples(&self, spacing: f64) -> Result<Vec<Point>> {
        if let (InterfaceMode::Radial, Some(c), Some(r)) = (self.mode, self.center, self.radius) {
            let n = ((2.0 * std::f64::consts::PI * r / spacing).ceil() as usize).max(16);
            return Ok(Polyline::circle(c, r, n).points);
        }
        let mut out: Vec<Point> = self.crossings.iter().map(|&x| [x, 0.0]).collect();
        for c in &self.curves {
            out.extend(c.densify(spacing));
        }
        if out.is_empty() {
            return Err(Error::InterfaceLost);
        }
        Ok(out)
    }

    /// Mean vertex radius about `center` over all curves.
    pub fn mean_radius(&self, center: Point) -> Option<f64> {
        if let Some(r) = self.radius {
            return Some(r);
        }
        let pts: Vec<Point> = self.curves.iter().flat_map(|c| c.points.iter().copied()).collect();
        if pts.is_empty() {
            return None;
        }
        Some(pts.iter().map(|&p| dist(p, center)).sum::<f64>() / pts.len() as f64)
    }
}
