//! The limit problems: radial interface ODE, level-set evolution of the
//! signed distance with geometric redistancing, Hausdorff distances, the
//! limit reaction-diffusion solve, and the heat-kernel surface integral.

use std::sync::Arc;

use crate::ac_solver::{marching_squares, RdParams};
use crate::corrector::{pressure_gamma, PerturbationG};
use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, InterfaceState, Polyline};
use crate::grid::{laplacian, Field, Grid, Point};
use crate::nonlinearity::BistableNonlinearity;
use crate::quad;

type GammaFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForcingKind {
    None,
    Constant,
    FromG,
    FromV,
}

/// Forcing term `γ(x,t) = c₀(G(x,t,α₊) − G(x,t,α₋))` of the interface law.
#[derive(Clone)]
pub struct ForcingSpec {
    pub kind: ForcingKind,
    eval: GammaFn,
}

impl std::fmt::Debug for ForcingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForcingSpec").field("kind", &self.kind).finish()
    }
}

impl ForcingSpec {
    pub fn none() -> Self {
        ForcingSpec { kind: ForcingKind::None, eval: Arc::new(|_, _| 0.0) }
    }

    pub fn constant(gamma: f64) -> Self {
        ForcingSpec { kind: ForcingKind::Constant, eval: Arc::new(move |_, _| gamma) }
    }

    pub fn from_g(pg: &PerturbationG, nl: &BistableNonlinearity, c0: f64) -> Self {
        let (pg, nl) = (pg.clone(), nl.clone());
        ForcingSpec { kind: ForcingKind::FromG, eval: Arc::new(move |x, t| pressure_gamma(&pg, &nl, c0, x, t, None)) }
    }

    /// `γ = −c₀F₁(v(x,t))` for a given v.
    pub fn from_v(rd: &RdParams, nl: &BistableNonlinearity, c0: f64, v: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        let (rd, nl) = (rd.clone(), nl.clone());
        ForcingSpec { kind: ForcingKind::FromV, eval: Arc::new(move |x, t| -c0 * rd.big_f1(&nl, v(x, t))) }
    }

    pub fn gamma(&self, x: Point, t: f64) -> f64 {
        (self.eval)(x, t)
    }

    /// The same forcing plus a constant.
    pub fn shifted(&self, dgamma: f64) -> Self {
        let inner = self.eval.clone();
        ForcingSpec { kind: self.kind, eval: Arc::new(move |x, t| inner(x, t) + dgamma) }
    }
}

/// Radius samples with slopes for Hermite interpolation.
#[derive(Clone, Debug, Default)]
pub struct RadialTrajectory {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    pub slopes: Vec<f64>,
    pub extinction: Option<f64>,
}

impl RadialTrajectory {
    pub fn final_radius(&self) -> f64 {
        *self.radii.last().unwrap_or(&f64::NAN)
    }

    /// Cubic Hermite interpolation; `None` outside the computed range.
    pub fn radius_at(&self, t: f64) -> Option<f64> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        if n == 1 {
            return Some(self.radii[0]);
        }
        let k = match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(k) => return Some(self.radii[k]),
            Err(k) => k - 1,
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let hh = t1 - t0;
        let s = (t - t0) / hh;
        let (h00, h10, h01, h11) =
            (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s, -2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        Some(h00 * self.radii[k] + h10 * hh * self.slopes[k] + h01 * self.radii[k + 1] + h11 * hh * self.slopes[k + 1])
    }
}

/// `R' = −(N−1)/R + γ(x_c + (R,0), t)` by RK4, sampled every `dt`. Internal
/// steps shrink to `0.1 R²` near extinction; extinction (R ≤ dt) is
/// recorded rather than reported as an error.
pub fn radial_trajectory(center: Point, r0: f64, n_dim: usize, forcing: &ForcingSpec, t_end: f64, dt: f64) -> Result<RadialTrajectory> {
    if !(r0 > 0.0) {
        return Err(Error::NonPositiveRadius(r0));
    }
    if !(dt > 0.0) || n_dim < 1 {
        return Err(Error::Config(format!("radial solve needs dt > 0 and N >= 1, got dt = {dt}, N = {n_dim}")));
    }
    let nm1 = (n_dim - 1) as f64;
    let rhs = |t: f64, r: f64| -nm1 / r + forcing.gamma([center[0] + r, center[1]], t);
    let mut tr = RadialTrajectory::default();
    let (mut t, mut r) = (0.0, r0);
    tr.times.push(t);
    tr.radii.push(r);
    tr.slopes.push(rhs(t, r));
    let n_out = (t_end / dt).ceil() as usize;
    for k in 1..=n_out {
        let t_target = (k as f64 * dt).min(t_end);
        while t < t_target {
            let hs = (t_target - t).min(0.1 * r * r).max(1e-300);
            let k1 = rhs(t, r);
            let k2 = rhs(t + 0.5 * hs, r + 0.5 * hs * k1);
            let k3 = rhs(t + 0.5 * hs, r + 0.5 * hs * k2);
            let k4 = rhs(t + hs, r + hs * k3);
            let next = r + hs / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
            if !(next > dt) || !next.is_finite() {
                // R' ≈ −(N−1)/R near extinction: remaining time ≈ R²/(2(N−1)).
                let rest = if nm1 > 0.0 { r * r / (2.0 * nm1) } else { 0.0 };
                tr.extinction = Some(t + rest.min(hs));
                return Ok(tr);
            }
            t += hs;
            r = next;
        }
        t = t_target;
        tr.times.push(t);
        tr.radii.push(r);
        tr.slopes.push(rhs(t, r));
    }
    Ok(tr)
}

/// Radial solve about the origin; extinction before `t_end` is an error.
pub fn radial_solve(r0: f64, n_dim: usize, forcing: &ForcingSpec, t_end: f64, dt: f64) -> Result<RadialTrajectory> {
    let tr = radial_trajectory([0.0, 0.0], r0, n_dim, forcing, t_end, dt)?;
    match tr.extinction {
        Some(te) => Err(Error::NonPositiveRadius(te)),
        None => Ok(tr),
    }
}

/// Uniform bucket index of polyline segments for exact nearest-segment queries.
struct SegmentIndex {
    segs: Vec<(Point, Point)>,
    cell: f64,
    ox: f64,
    oy: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl SegmentIndex {
    fn new(curves: &[Polyline], cell: f64) -> Self {
        let mut segs = Vec::new();
        for c in curves {
            if c.points.len() == 1 {
                segs.push((c.points[0], c.points[0]));
            }
            segs.extend(c.segments());
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (a, b) in &segs {
            for p in [a, b] {
                x0 = x0.min(p[0]);
                y0 = y0.min(p[1]);
                x1 = x1.max(p[0]);
                y1 = y1.max(p[1]);
            }
        }
        let nx = (((x1 - x0) / cell).floor() as usize + 1).max(1);
        let ny = (((y1 - y0) / cell).floor() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (k, (a, b)) in segs.iter().enumerate() {
            let (i0, i1) = (((a[0].min(b[0]) - x0) / cell) as usize, ((a[0].max(b[0]) - x0) / cell) as usize);
            let (j0, j1) = (((a[1].min(b[1]) - y0) / cell) as usize, ((a[1].max(b[1]) - y0) / cell) as usize);
            for j in j0..=j1.min(ny - 1) {
                for i in i0..=i1.min(nx - 1) {
                    buckets[j * nx + i].push(k);
                }
            }
        }
        SegmentIndex { segs, cell, ox: x0, oy: y0, nx, ny, buckets }
    }

    fn distance(&self, p: Point) -> f64 {
        let ci = ((p[0] - self.ox) / self.cell).floor() as i64;
        let cj = ((p[1] - self.oy) / self.cell).floor() as i64;
        // Chebyshev distance (in cells) from p's cell to the bucket box.
        let gap_i = if ci < 0 { -ci } else if ci >= self.nx as i64 { ci - self.nx as i64 + 1 } else { 0 };
        let gap_j = if cj < 0 { -cj } else if cj >= self.ny as i64 { cj - self.ny as i64 + 1 } else { 0 };
        let start = gap_i.max(gap_j);
        let max_ring = start + self.nx.max(self.ny) as i64 + 1;
        let mut best = f64::INFINITY;
        let mut ring = start;
        while ring <= max_ring {
            for j in (cj - ring)..=(cj + ring) {
                if j < 0 || j >= self.ny as i64 {
                    continue;
                }
                let on_edge_row = j == cj - ring || j == cj + ring;
                let mut i = ci - ring;
                while i <= ci + ring {
                    if i >= 0 && i < self.nx as i64 {
                        for &s in &self.buckets[j as usize * self.nx + i as usize] {
                            let (a, b) = self.segs[s];
                            best = best.min(point_segment_distance(p, a, b));
                        }
                    }
                    i += if on_edge_row || ring == 0 { 1 } else { 2 * ring };
                }
            }
            // Anything in ring + 1 or beyond is at least `ring · cell` away.
            if best <= ring as f64 * self.cell {
                break;
            }
            ring += 1;
        }
        best
    }
}

fn index_cell(grid: &Grid, curves: &[Polyline]) -> f64 {
    let total: usize = curves.iter().map(|c| c.len()).sum();
    let span = grid.lx.max(grid.ly);
    (4.0 * grid.h).max(span / (total as f64).sqrt().max(1.0))
}

/// Signed distance to a closed polyline: negative inside (Ω⁻).
pub fn signed_distance(curve: &Polyline, grid: &Grid) -> Result<Field> {
    if curve.points.len() < 3 {
        return Err(Error::DegenerateCurve(format!("{} vertices", curve.points.len())));
    }
    let curves = std::slice::from_ref(curve);
    let idx = SegmentIndex::new(curves, index_cell(grid, curves));
    Ok(Field::from_fn(*grid, |p| {
        let d = idx.distance(p);
        if curve.contains(p) {
            -d
        } else {
            d
        }
    }))
}

/// Exact geometric redistancing: zero polylines of `d`, distance to them at
/// every node, sign by even-odd parity over closed curves (sign of the old
/// `d` when some curve is open).
pub fn reinitialize(d: &Field) -> Result<Field> {
    if d.grid.dim != 2 {
        return Err(Error::Config("reinitialize works on 2D grids".into()));
    }
    let curves = marching_squares(d, 0.0);
    if curves.is_empty() {
        return Err(Error::InterfaceLost);
    }
    let all_closed = curves.iter().all(|c| c.closed);
    let idx = SegmentIndex::new(&curves, index_cell(&d.grid, &curves));
    let mut out = d.clone();
    for (k, val) in out.values.iter_mut().enumerate() {
        let p = d.grid.node_of(k);
        let dist = idx.distance(p);
        let inside = if all_closed { curves.iter().filter(|c| c.contains(p)).count() % 2 == 1 } else { d.values[k] < 0.0 };
        *val = if inside { -dist } else { dist };
        if !val.is_finite() {
            return Err(Error::ReinitDiverged(format!("non-finite distance at node {k}")));
        }
    }
    Ok(out)
}

/// Advances `d_t = Δd − γ(x,t)` by forward Euler until `t_end`, redistancing
/// every `reinit_every` steps.
pub fn evolve_distance(d: &Field, gamma: &ForcingSpec, dt: f64, reinit_every: usize, t_end: f64) -> Result<Field> {
    let limit = d.grid.dt_limit();
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let grid = d.grid;
    let nodes: Vec<Point> = (0..grid.len()).map(|k| grid.node_of(k)).collect();
    let mut cur = d.clone();
    let mut lap = vec![0.0; grid.len()];
    let mut steps = 0usize;
    while cur.time < t_end - 1e-14 {
        let h = dt.min(t_end - cur.time);
        laplacian(&grid, &cur.values, &mut lap);
        let t = cur.time;
        for k in 0..grid.len() {
            cur.values[k] += h * (lap[k] - gamma.gamma(nodes[k], t));
        }
        cur.time += h;
        steps += 1;
        if reinit_every > 0 && steps % reinit_every == 0 {
            let time = cur.time;
            cur = reinitialize(&cur)?;
            cur.time = time;
        }
    }
    Ok(cur)
}

/// `ζ(s)`: identity on `|s| ≤ d₀`, constant `±2d₀` beyond `2d₀`, and the C²
/// increasing quintic blend in between.
pub fn zeta(s: f64, d0: f64) -> f64 {
    let a = s.abs();
    let v = if a <= d0 {
        a
    } else if a >= 2.0 * d0 {
        2.0 * d0
    } else {
        let x = (a - d0) / d0;
        d0 + d0 * (x + x.powi(3) * (4.0 + x * (-7.0 + 3.0 * x)))
    };
    v.copysign(s)
}

/// Cut-off signed distance `d = ζ(d̃)`.
pub fn cutoff_distance(dtilde: &Field, d0: f64) -> Field {
    let mut out = dtilde.clone();
    for v in out.values.iter_mut() {
        *v = zeta(*v, d0);
    }
    out
}

/// Half the minimum of the distance of Γ to ∂Ω and the smallest vertex
/// circumradius (a reach estimate).
pub fn tubular_width(curves: &[Polyline], grid: &Grid) -> f64 {
    let mut wall = f64::INFINITY;
    let mut reach = f64::INFINITY;
    for c in curves {
        for p in &c.points {
            wall = wall.min(p[0]).min(grid.lx - p[0]);
            if grid.dim == 2 {
                wall = wall.min(p[1]).min(grid.ly - p[1]);
            }
        }
        let n = c.points.len();
        if n >= 3 {
            let m = if c.closed { n } else { n - 2 };
            for k in 0..m {
                let (a, b, q) = (c.points[k], c.points[(k + 1) % n], c.points[(k + 2) % n]);
                let (ab, bq, qa) = (
                    (a[0] - b[0]).hypot(a[1] - b[1]),
                    (b[0] - q[0]).hypot(b[1] - q[1]),
                    (q[0] - a[0]).hypot(q[1] - a[1]),
                );
                let cross = ((b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])).abs();
                if cross > 0.0 {
                    reach = reach.min(ab * bq * qa / (2.0 * cross));
                }
            }
        }
    }
    0.5 * wall.min(reach)
}

/// Symmetric Hausdorff distance between two polylines, sampling each at
/// spacing `spacing` and measuring exact distances to the other's segments.
pub fn hausdorff(a: &Polyline, b: &Polyline, spacing: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::DegenerateCurve("empty polyline".into()));
    }
    let dab = a.densify(spacing).into_iter().map(|p| b.distance_to(p)).fold(0.0, f64::max);
    let dba = b.densify(spacing).into_iter().map(|p| a.distance_to(p)).fold(0.0, f64::max);
    Ok(dab.max(dba))
}

/// Hausdorff distance between two interface states (any mode).
pub fn hausdorff_states(a: &InterfaceState, b: &InterfaceState, spacing: f64) -> Result<f64> {
    let sa = a.samples(spacing)?;
    let sb = b.samples(spacing)?;
    let dab = sa.iter().map(|&p| b.distance_to(p)).fold(0.0, f64::max);
    let dba = sb.iter().map(|&p| a.distance_to(p)).fold(0.0, f64::max);
    Ok(dab.max(dba))
}

/// `∫_Γ G₀(x, y, t) dS_y` with `G₀ = (4πDt)^{−1} exp(−|x−y|²/4Dt)` (N = 2),
/// segment by segment, each split at the foot of the perpendicular from x.
pub fn gaussian_surface_integral(curve: &Polyline, x: Point, t: f64, d: f64) -> f64 {
    let four_dt = 4.0 * d * t;
    let norm = 1.0 / (std::f64::consts::PI * four_dt);
    let mut total = 0.0;
    for (a, b) in curve.segments() {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let (ux, uy) = (dx / len, dy / len);
        let foot = ((x[0] - a[0]) * ux + (x[1] - a[1]) * uy).clamp(0.0, len);
        let kern = |s: f64| {
            let (px, py) = (a[0] + s * ux - x[0], a[1] + s * uy - x[1]);
            norm * (-(px * px + py * py) / four_dt).exp()
        };
        let tol = 1e-16;
        total += quad::integrate(kern, 0.0, foot, tol, 1e-13).0;
        total += quad::integrate(kern, foot, len, tol, 1e-13).0;
    }
    total
}

/// The same integral over the exact circle, by the periodic trapezoid rule
/// in the angle (exponentially convergent), doubling until stable.
pub fn gaussian_circle_integral(center: Point, r: f64, x: Point, t: f64, d: f64) -> f64 {
    let four_dt = 4.0 * d * t;
    let norm = 1.0 / (std::f64::consts::PI * four_dt);
    let eval = |n: usize| {
        let mut s = 0.0;
        for k in 0..n {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let (px, py) = (center[0] + r * th.cos() - x[0], center[1] + r * th.sin() - x[1]);
            s += (-(px * px + py * py) / four_dt).exp();
        }
        norm * s * 2.0 * std::f64::consts::PI * r / n as f64
    };
    let mut n = 256;
    let mut prev = eval(n);
    loop {
        n *= 2;
        let cur = eval(n);
        if (cur - prev).abs() <= 1e-14 * cur.abs().max(1e-300) || n > 1 << 24 {
            return cur;
        }
        prev = cur;
    }
}

#[derive(Clone, Debug)]
pub struct SensitivityReport {
    pub times: Vec<f64>,
    pub delta_r: Vec<f64>,
    pub eta0: f64,
    pub dgamma: f64,
    /// `sup (N−1)/(R_a R_b)` along the two trajectories.
    pub m: f64,
    /// `K = |Δγ|/(η₀ M)`.
    pub k: f64,
    pub bound_holds: bool,
}

/// Two radial solves with forcings differing by `Δγ`; the exact Grönwall
/// bound `|ΔR| ≤ |Δγ|(e^{Mt} − 1)/M` is checked at every sample time. `eta0`
/// is the size of the underlying perturbation of g, used to report K.
pub fn forcing_sensitivity_check(
    forcing_a: &ForcingSpec,
    forcing_b: &ForcingSpec,
    dgamma: f64,
    eta0: f64,
    r0: f64,
    n_dim: usize,
    t_end: f64,
    dt: f64,
) -> Result<SensitivityReport> {
    let ta = radial_solve(r0, n_dim, forcing_a, t_end, dt)?;
    let tb = radial_solve(r0, n_dim, forcing_b, t_end, dt)?;
    let nm1 = (n_dim - 1) as f64;
    let m = ta
        .radii
        .iter()
        .zip(&tb.radii)
        .map(|(ra, rb)| nm1 / (ra * rb))
        .fold(0.0, f64::max)
        .max(1e-12);
    let delta_r: Vec<f64> = ta.radii.iter().zip(&tb.radii).map(|(a, b)| (a - b).abs()).collect();
    let k = if eta0 > 0.0 { dgamma.abs() / (eta0 * m) } else { 0.0 };
    let bound_holds = ta.times.iter().zip(&delta_r).all(|(&t, &dr)| {
        let bound = dgamma.abs() * (m * t).exp_m1() / m;
        dr <= bound * (1.0 + 1e-9) + 1e-15
    });
    Ok(SensitivityReport { times: ta.times, delta_r, eta0, dgamma, m, k, bound_holds })
}

/// State of the limit reaction-diffusion problem on the PDE grid: the radius
/// R(t) and ṽ on the nodes, with ũ the step function of the disk of radius R
/// (α₋ inside), smoothed by the cell area fraction.
pub struct LimitRdGrid {
    pub grid: Grid,
    pub center: Point,
    pub radius: f64,
    pub v: Field,
    pub rd: RdParams,
    pub nl: BistableNonlinearity,
    pub c0: f64,
    pub dt: f64,
    buf_a: Vec<f64>,
    buf_b: Vec<f64>,
    u: Vec<f64>,
}

impl LimitRdGrid {
    pub fn new(grid: Grid, center: Point, r0: f64, rd: &RdParams, nl: &BistableNonlinearity, c0: f64, v0: Field, dt: f64) -> Result<Self> {
        let limit = grid.dt_limit() / rd.d.max(1.0);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit });
        }
        if !(r0 > 0.0) {
            return Err(Error::NonPositiveRadius(r0));
        }
        let mut s = LimitRdGrid {
            grid,
            center,
            radius: r0,
            v: v0,
            rd: rd.clone(),
            nl: nl.clone(),
            c0,
            dt,
            buf_a: Vec::new(),
            buf_b: Vec::new(),
            u: Vec::new(),
        };
        s.u = s.step_function(r0);
        Ok(s)
    }

    pub fn time(&self) -> f64 {
        self.v.time
    }

    /// ũ on the nodes for radius `r`.
    pub fn step_function(&self, r: f64) -> Vec<f64> {
        let g = self.grid;
        let (am, ap) = (self.nl.alpha_minus, self.nl.alpha_plus);
        (0..g.len())
            .map(|k| {
                let p = g.node_of(k);
                let rho = (p[0] - self.center[0]).hypot(p[1] - self.center[1]);
                let frac = if rho - r > 0.75 * g.h {
                    1.0
                } else if r - rho > 0.75 * g.h {
                    0.0
                } else {
                    let m = 8;
                    let mut out = 0usize;
                    for a in 0..m {
                        for b in 0..m {
                            let x = p[0] + g.h * ((a as f64 + 0.5) / m as f64 - 0.5);
                            let y = p[1] + g.h * ((b as f64 + 0.5) / m as f64 - 0.5);
                            if (x - self.center[0]).hypot(y - self.center[1]) > r {
                                out += 1;
                            }
                        }
                    }
                    out as f64 / (m * m) as f64
                };
                am + (ap - am) * frac
            })
            .collect()
    }

    /// Mean of ṽ over the circle of radius `r`.
    pub fn v_on_circle(&self, r: f64) -> f64 {
        let n = 128;
        (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                self.v.sample([self.center[0] + r * th.cos(), self.center[1] + r * th.sin()])
            })
            .sum::<f64>()
            / n as f64
    }

    fn radius_rhs(&self, r: f64) -> f64 {
        -1.0 / r - self.c0 * self.rd.big_f1(&self.nl, self.v_on_circle(r))
    }

    /// Same splitting as the PDE: v-reaction over dt/2, diffusion, v-reaction
    /// over dt/2; the radius advances by Heun with ṽ frozen over the step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.dt;
        let r = self.radius;
        let k1 = self.radius_rhs(r);
        let r_pred = r + dt * k1;
        if !(r_pred > 0.0) {
            return Err(Error::NonPositiveRadius(r_pred));
        }
        let k2 = self.radius_rhs(r_pred);
        let r_new = r + 0.5 * dt * (k1 + k2);
        if !(r_new > 0.0) {
            return Err(Error::NonPositiveRadius(r_new));
        }
        let u_old = std::mem::take(&mut self.u);
        let u_new = self.step_function(r_new);
        let half = 0.5 * dt;
        let rd = self.rd.clone();
        for (y, &uk) in self.v.values.iter_mut().zip(&u_old) {
            *y = rk4(*y, half, |y| rd.h(uk, y));
        }
        diffuse_heun(&self.grid, &mut self.v.values, rd.d, dt, &mut self.buf_a, &mut self.buf_b);
        for (y, &uk) in self.v.values.iter_mut().zip(&u_new) {
            *y = rk4(*y, half, |y| rd.h(uk, y));
        }
        self.u = u_new;
        self.radius = r_new;
        self.v.time += dt;
        Ok(())
    }

    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        let dt = self.dt;
        while self.v.time < t_end - 1e-14 {
            if self.v.time + self.dt > t_end {
                self.dt = t_end - self.v.time;
            }
            let r = self.step();
            self.dt = dt;
            r?;
        }
        Ok(())
    }
}

fn rk4(mut y: f64, span: f64, rhs: impl Fn(f64) -> f64) -> f64 {
    let hs = span / 4.0;
    for _ in 0..4 {
        let k1 = rhs(y);
        let k2 = rhs(y + 0.5 * hs * k1);
        let k3 = rhs(y + 0.5 * hs * k2);
        let k4 = rhs(y + hs * k3);
        y += hs / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
    }
    y
}

fn diffuse_heun(grid: &Grid, w: &mut [f64], d: f64, dt: f64, a: &mut Vec<f64>, b: &mut Vec<f64>) {
    let n = w.len();
    a.resize(n, 0.0);
    b.resize(n, 0.0);
    laplacian(grid, w, a);
    for k in 0..n {
        a[k] = w[k] + dt * d * a[k];
    }
    laplacian(grid, a, b);
    for k in 0..n {
        w[k] = 0.5 * (w[k] + a[k] + dt * d * b[k]);
    }
}

/// Radially reduced limit problem on `r ∈ [0, r_out]` with Neumann data at
/// `r_out`: `R' = −(N−1)/R − c₀F₁(ṽ(R))`, `ṽ_t = D(ṽ_rr + (N−1)ṽ_r/r) + h(ũ, ṽ)`.
/// Returns the radius trajectory and the final ṽ on the radial nodes.
#[allow(clippy::too_many_arguments)]
pub fn limit_rd_solve(
    r0: f64,
    n_dim: usize,
    rd: &RdParams,
    nl: &BistableNonlinearity,
    c0: f64,
    v0: impl Fn(f64) -> f64,
    r_out: f64,
    nr: usize,
    t_end: f64,
) -> Result<(RadialTrajectory, Vec<f64>)> {
    let hr = r_out / (nr - 1) as f64;
    let nd = n_dim as f64;
    let dt = 0.2 * hr * hr / (nd * rd.d.max(1.0));
    let mut v: Vec<f64> = (0..nr).map(|i| v0(i as f64 * hr)).collect();
    let (am, ap) = (nl.alpha_minus, nl.alpha_plus);
    let step_u = |r: f64| -> Vec<f64> {
        (0..nr)
            .map(|i| {
                let (lo, hi) = ((i as f64 - 0.5) * hr, (i as f64 + 0.5) * hr);
                let frac = ((hi - r) / (hi - lo)).clamp(0.0, 1.0);
                am + (ap - am) * frac
            })
            .collect()
    };
    let v_at = |v: &[f64], r: f64| {
        let s = (r / hr).clamp(0.0, (nr - 1) as f64);
        let i = (s.floor() as usize).min(nr - 2);
        let w = s - i as f64;
        (1.0 - w) * v[i] + w * v[i + 1]
    };
    let lap = |v: &[f64], out: &mut Vec<f64>| {
        out.resize(nr, 0.0);
        out[0] = nd * 2.0 * (v[1] - v[0]) / (hr * hr);
        for i in 1..nr {
            let right = if i + 1 < nr { v[i + 1] } else { v[i - 1] };
            let r = i as f64 * hr;
            out[i] = (right - 2.0 * v[i] + v[i - 1]) / (hr * hr) + (nd - 1.0) / r * (right - v[i - 1]) / (2.0 * hr);
        }
    };
    let mut tr = RadialTrajectory::default();
    let mut r = r0;
    let mut t = 0.0;
    let rhs_r = |v: &[f64], r: f64| -(nd - 1.0) / r - c0 * rd.big_f1(nl, v_at(v, r));
    tr.times.push(0.0);
    tr.radii.push(r);
    tr.slopes.push(rhs_r(&v, r));
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let mut u = step_u(r);
    while t < t_end - 1e-14 {
        let h = dt.min(t_end - t);
        let k1 = rhs_r(&v, r);
        let k2 = rhs_r(&v, r + h * k1);
        let r_new = r + 0.5 * h * (k1 + k2);
        if !(r_new > 0.0) {
            return Err(Error::NonPositiveRadius(r_new));
        }
        let u_new = step_u(r_new);
        for (y, &uk) in v.iter_mut().zip(&u) {
            *y = rk4(*y, 0.5 * h, |y| rd.h(uk, y));
        }
        lap(&v, &mut a);
        let pred: Vec<f64> = v.iter().zip(&a).map(|(y, l)| y + h * rd.d * l).collect();
        lap(&pred, &mut b);
        for i in 0..nr {
            v[i] = 0.5 * (v[i] + pred[i] + h * rd.d * b[i]);
        }
        for (y, &uk) in v.iter_mut().zip(&u_new) {
            *y = rk4(*y, 0.5 * h, |y| rd.h(uk, y));
        }
        u = u_new;
        r = r_new;
        t += h;
        tr.times.push(t);
        tr.radii.push(r);
        tr.slopes.push(rhs_r(&v, r));
    }
    Ok((tr, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::make_cubic;
    use crate::profile::surface_constant_c0;

    #[test]
    fn radial_examples() {
        let tr = radial_solve(0.3, 2, &ForcingSpec::none(), 0.02, 1e-4).unwrap();
        assert!((tr.final_radius() - 0.05f64.sqrt()).abs() < 1e-9);
        assert!((tr.radius_at(0.0137).unwrap() - (0.09f64 - 0.0274).sqrt()).abs() < 1e-8);
        let tr = radial_solve(0.3, 2, &ForcingSpec::constant(1.0 / 0.3), 0.05, 1e-3).unwrap();
        assert!(tr.radii.iter().all(|r| (r - 0.3).abs() < 1e-12));
        let dt = 1e-4;
        let tr = radial_trajectory([0.0, 0.0], 0.3, 2, &ForcingSpec::none(), 0.1, dt).unwrap();
        let te = tr.extinction.unwrap();
        assert!((te - 0.045).abs() <= dt, "{te}");
        assert!(matches!(radial_solve(0.3, 2, &ForcingSpec::none(), 0.1, dt), Err(Error::NonPositiveRadius(_))));
    }

    #[test]
    fn zeta_shape() {
        let d0 = 0.1;
        assert_eq!(zeta(0.05, d0), 0.05);
        assert_eq!(zeta(-0.3, d0), -0.2);
        let mut prev = zeta(-0.25, d0);
        for k in 1..=500 {
            let s = -0.25 + 0.5 * k as f64 / 500.0;
            let z = zeta(s, d0);
            assert!(z >= prev);
            prev = z;
        }
        // C¹ at the junctions.
        let h = 1e-7;
        assert!(((zeta(d0 + h, d0) - zeta(d0, d0)) / h - 1.0).abs() < 1e-5);
        assert!(((zeta(2.0 * d0, d0) - zeta(2.0 * d0 - h, d0)) / h).abs() < 1e-5);
    }

    #[test]
    fn signed_distance_circle() {
        let grid = Grid::new_2d(1.0, 1.0, 101).unwrap();
        let c = Polyline::circle([0.5, 0.5], 0.3, 720);
        let d = signed_distance(&c, &grid).unwrap();
        let center = d.values[grid.idx(50, 50)];
        assert!((center + 0.3).abs() < 1e-5);
        for k in 0..grid.len() {
            let p = grid.node_of(k);
            let exact = (p[0] - 0.5).hypot(p[1] - 0.5) - 0.3;
            assert!((d.values[k] - exact).abs() < 1e-5, "{k}");
        }
        assert!(signed_distance(&Polyline::new(vec![[0.0, 0.0], [1.0, 0.0]], true), &grid).is_err());
    }

    #[test]
    fn reinit_restores_distance() {
        let grid = Grid::new_2d(1.0, 1.0, 101).unwrap();
        let exact = Field::from_fn(grid, |p| (p[0] - 0.5).hypot(p[1] - 0.5) - 0.3);
        let mut scaled = exact.clone();
        scaled.values.iter_mut().for_each(|v| *v *= 3.0);
        let r = reinitialize(&scaled).unwrap();
        for k in 0..grid.len() {
            assert!((r.values[k] - exact.values[k]).abs() < 2e-3);
        }
        assert!((r.values[grid.idx(50, 50)] + 0.3).abs() < 2.0 * grid.h);
        let r2 = reinitialize(&r).unwrap();
        let zl1 = marching_squares(&r, 0.0);
        let zl2 = marching_squares(&r2, 0.0);
        let hd = hausdorff(&zl1[0], &zl2[0], grid.h / 4.0).unwrap();
        assert!(hd <= grid.h / 4.0, "{hd}");
        // Gradient norm in the band.
        for j in 1..grid.ny - 1 {
            for i in 1..grid.nx - 1 {
                if r.at(i, j).abs() <= 3.0 * grid.h {
                    assert!((r.grad_norm(i, j) - 1.0).abs() <= 0.05);
                }
            }
        }
    }

    #[test]
    fn level_set_matches_radial() {
        let grid = Grid::new_2d(1.0, 1.0, 101).unwrap();
        let d0 = Field::from_fn(grid, |p| (p[0] - 0.5).hypot(p[1] - 0.5) - 0.3);
        let dt = grid.dt_limit();
        let d = evolve_distance(&d0, &ForcingSpec::none(), dt, 5, 0.02).unwrap();
        let iface = crate::ac_solver::extract_interface(&d, 0.0).unwrap();
        let r = iface.mean_radius([0.5, 0.5]).unwrap();
        let exact = 0.05f64.sqrt();
        assert!((r - exact).abs() <= (2.0 * grid.h).max(0.01 * exact), "{r} {exact}");

        let forcing = ForcingSpec::constant(2.0);
        let d = evolve_distance(&d0, &forcing, dt, 5, 0.03).unwrap();
        let r = crate::ac_solver::extract_interface(&d, 0.0).unwrap().mean_radius([0.5, 0.5]).unwrap();
        let ode = radial_solve(0.3, 2, &forcing, 0.03, 1e-4).unwrap().final_radius();
        assert!((r - ode).abs() <= 2.0 * grid.h, "{r} {ode}");
    }

    #[test]
    fn planar_front_translates() {
        let grid = Grid::new_2d(1.0, 1.0, 51).unwrap();
        let d0 = Field::from_fn(grid, |p| p[0] - 0.3);
        let d = evolve_distance(&d0, &ForcingSpec::constant(2.0), grid.dt_limit(), 5, 0.05).unwrap();
        // d_t = −2: the zero level moves to x = 0.4.
        let zl = marching_squares(&d, 0.0);
        for p in &zl[0].points {
            assert!((p[0] - 0.4).abs() < 1e-9);
        }
    }

    #[test]
    fn hausdorff_examples() {
        let a = Polyline::circle([0.5, 0.5], 0.30, 2000);
        let b = Polyline::circle([0.5, 0.5], 0.32, 2000);
        let h = 0.001;
        assert_eq!(hausdorff(&a, &a, h).unwrap(), 0.0);
        let d = hausdorff(&a, &b, h).unwrap();
        assert!((d - 0.02).abs() < 1e-4);
        assert_eq!(d, hausdorff(&b, &a, h).unwrap());
        let c = Polyline::circle([0.51, 0.5], 0.31, 1500);
        let (ab, bc, ac) = (d, hausdorff(&b, &c, h).unwrap(), hausdorff(&a, &c, h).unwrap());
        assert!(ac <= ab + bc + 2.0 * h / 4.0);
    }

    #[test]
    fn gaussian_integral_center_closed_form() {
        let c = Polyline::circle([0.0, 0.0], 1.0, 4000);
        let (t, d) = (0.5, 1.0);
        let exact = (4.0 * std::f64::consts::PI * d * t).recip() * 2.0 * std::f64::consts::PI * (-1.0 / (4.0 * d * t)).exp();
        let poly = gaussian_surface_integral(&c, [0.0, 0.0], t, d);
        let circ = gaussian_circle_integral([0.0, 0.0], 1.0, [0.0, 0.0], t, d);
        assert!((circ - exact).abs() < 1e-13 * exact);
        // Polygon perimeter deficit is O(n⁻²).
        assert!((poly / exact - 1.0).abs() < 1e-6);
        // Large t: kernel flattens.
        let far = gaussian_surface_integral(&c, [0.0, 0.0], 1e4, d);
        assert!(far < 2.0 * std::f64::consts::PI / (4.0 * std::f64::consts::PI * 1e4));
    }

    #[test]
    fn sensitivity_bound_and_linearity() {
        let nl = make_cubic();
        let c0 = surface_constant_c0(&nl).unwrap();
        let base = ForcingSpec::none();
        let mut drs = Vec::new();
        for &eta0 in &[0.01, 0.005] {
            let dg = c0 * eta0 * (nl.alpha_plus - nl.alpha_minus);
            let rep = forcing_sensitivity_check(&base, &base.shifted(dg), dg, eta0, 0.4, 2, 0.05, 1e-4).unwrap();
            assert!(rep.bound_holds);
            let ratio: Vec<f64> = rep.delta_r.iter().map(|d| d / eta0).collect();
            for w in ratio.windows(2) {
                assert!(w[1] >= w[0]);
            }
            drs.push(*rep.delta_r.last().unwrap());
        }
        assert!((drs[0] / drs[1] / 2.0 - 1.0).abs() < 0.05);
        let rep = forcing_sensitivity_check(&base, &base, 0.0, 0.0, 0.4, 2, 0.05, 1e-4).unwrap();
        assert!(rep.delta_r.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn limit_rd_reductions() {
        let nl = make_cubic();
        let c0 = surface_constant_c0(&nl).unwrap();
        let inert = RdParams::new("inert", 1.0, |_, _| 0.0, |_, _, _| 0.0, |_, _| 0.0, 1.1, 2.0, false);
        let (tr, _) = limit_rd_solve(0.3, 2, &inert, &nl, c0, |_| 0.0, 0.6, 121, 0.02).unwrap();
        assert!((tr.final_radius() - 0.05f64.sqrt()).abs() < 1e-6);

        let fhn = RdParams::fhn_default();
        assert!((fhn.big_f1(&nl, 0.4) + 0.8).abs() < 1e-14);
        let (_, v) = limit_rd_solve(0.3, 2, &fhn, &nl, c0, |r| 1.5 - 0.2 * r, 0.6, 121, 0.05).unwrap();
        assert!(v.iter().all(|x| x.abs() <= 2.0));

        let grid = Grid::new_2d(1.0, 1.0, 51).unwrap();
        let v0 = Field::constant(grid, 0.0);
        let mut s = LimitRdGrid::new(grid, [0.5, 0.5], 0.3, &fhn, &nl, c0, v0, grid.dt_limit()).unwrap();
        s.advance_to(0.02).unwrap();
        assert!(s.v.values.iter().all(|x| x.abs() <= 2.0));
        assert!(s.radius < 0.3);
    }
}
