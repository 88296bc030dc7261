//! Explicit sub- and supersolutions for the generation and motion phases,
//! the constants they are built from, and numerical checks of their residual
//! sign and ordering.

use crate::bistable_ode::{measure_c5, measure_c7, BistableFlow};
use crate::corrector::{corrector_u1, CorrectorData, PerturbationG};
use crate::error::{Error, Result};
use crate::grid::{laplacian, Field, Grid, Point};
use crate::nonlinearity::{perturb, BistableNonlinearity};
use crate::profile::ProfileData;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Lower => -1.0,
            Side::Upper => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionParams {
    pub beta: f64,
    pub sigma: f64,
    pub m: f64,
    pub a1: f64,
    pub b: f64,
    pub f1_const: f64,
    pub f2_const: f64,
    pub k: f64,
    pub l_rate: f64,
    pub m_corr: f64,
    pub d0: f64,
}

impl MotionParams {
    /// `p(t) = −e^{−βt/ε²} + e^{Lt} + K`.
    pub fn p(&self, eps: f64, t: f64) -> f64 {
        -(-self.beta * t / (eps * eps)).exp() + (self.l_rate * t).exp() + self.k
    }

    pub fn dp(&self, eps: f64, t: f64) -> f64 {
        self.beta / (eps * eps) * (-self.beta * t / (eps * eps)).exp() + self.l_rate * (self.l_rate * t).exp()
    }

    /// `q(t) = σ(βe^{−βt/ε²} + ε²Le^{Lt})`.
    pub fn q(&self, eps: f64, t: f64) -> f64 {
        self.sigma * (self.beta * (-self.beta * t / (eps * eps)).exp() + eps * eps * self.l_rate * (self.l_rate * t).exp())
    }

    /// Smallest value of `U₀'(z) − σf'(U₀(z)) − σm` over the profile nodes.
    pub fn profile_margin(&self, prof: &ProfileData) -> f64 {
        let nl = prof.nonlinearity();
        prof.u0
            .iter()
            .zip(&prof.du0)
            .map(|(&u, &du)| du - self.sigma * nl.df(u) - self.sigma * self.m)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub c6: f64,
    pub c5: f64,
    pub c0_data: f64,
    pub mu: f64,
    pub g_bound: f64,
    pub t_gen: f64,
}

/// Largest b with `f' < 0` on `[α₋, α₋+b] ∪ [α₊−b, α₊]`, by scan then bisection.
pub fn admissible_b(nl: &BistableNonlinearity) -> Result<f64> {
    let cap = (nl.a - nl.alpha_minus).min(nl.alpha_plus - nl.a);
    let ok = |b: f64| nl.df(nl.alpha_minus + b) < 0.0 && nl.df(nl.alpha_plus - b) < 0.0;
    if !ok(0.0) {
        return Err(Error::DegenerateTuning("f' >= 0 at a stable zero".into()));
    }
    let n = 1000;
    let mut lo = 0.0;
    let mut hi = cap;
    for k in 1..=n {
        let b = cap * k as f64 / n as f64;
        if !ok(b) {
            hi = b;
            break;
        }
        lo = b;
    }
    if lo == cap {
        return Ok(cap);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `sup |f'|` on `[lo, hi]` by dense sampling, and the same for `f''`.
fn sup_abs(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    (0..=4000).map(|k| f(lo + (hi - lo) * k as f64 / 4000.0).abs()).fold(0.0, f64::max)
}

/// K from `U₀(−M₁+K) ≥ α₊ − σβ/3` and `U₀(M₁−K) ≤ α₋ + σβ/3`.
pub fn k_from_m1(prof: &ProfileData, sigma: f64, beta: f64, m1: f64) -> f64 {
    let nl = prof.nonlinearity();
    let gap = sigma * beta / 3.0;
    let zp = prof.inverse(nl.alpha_plus - gap);
    let zm = prof.inverse(nl.alpha_minus + gap);
    (m1 + zp).max(m1 - zm).max(1.0)
}

/// Motion constants for a given band width b.
#[allow(clippy::too_many_arguments)]
pub fn tune_motion_params_with_b(
    nl: &BistableNonlinearity,
    prof: &ProfileData,
    pg: &PerturbationG,
    b: f64,
    d0: f64,
    t_end: f64,
    eps0: f64,
    m1: f64,
) -> Result<MotionParams> {
    let cap = (nl.a - nl.alpha_minus).min(nl.alpha_plus - nl.a);
    if !(b > 0.0 && b < cap) {
        return Err(Error::DegenerateTuning(format!("b = {b} outside (0, {cap})")));
    }
    let band_max = |lo: f64, hi: f64| (0..=400).map(|k| nl.df(lo + (hi - lo) * k as f64 / 400.0)).fold(f64::NEG_INFINITY, f64::max);
    let worst = band_max(nl.alpha_minus, nl.alpha_minus + b).max(band_max(nl.alpha_plus - b, nl.alpha_plus));
    if !(worst < 0.0) {
        return Err(Error::DegenerateTuning(format!("f' reaches {worst} inside the bands of width {b}")));
    }
    let m = -worst;
    let (lo, hi) = (nl.alpha_minus + b, nl.alpha_plus - b);
    let mut a1 = prof.du0_at(prof.inverse(lo)).min(prof.du0_at(prof.inverse(hi)));
    for (&u, &du) in prof.u0.iter().zip(&prof.du0) {
        if u > lo && u < hi {
            a1 = a1.min(du);
        }
    }
    let f1_const = sup_abs(|u| nl.df(u), nl.alpha_minus, nl.alpha_plus);
    let f2_const = sup_abs(|u| nl.d2f(u), nl.alpha_minus - 2.0, nl.alpha_plus + 2.0);
    let beta = m / 4.0;
    let sigma0 = a1 / (m + f1_const);
    let sigma1 = 1.0 / (beta + 1.0);
    let sigma2 = 4.0 * beta / (f2_const * (beta + 1.0));
    let sigma = sigma0.min(sigma1).min(sigma2);
    if !(d0 > 4.0 * eps0) || !(t_end > 0.0) {
        return Err(Error::DegenerateTuning(format!("need d0 > 4 eps0 and T > 0 (d0 = {d0}, eps0 = {eps0}, T = {t_end})")));
    }
    let l_rate = (d0 / (4.0 * eps0)).ln() / t_end;
    let m_corr = if pg.is_zero() {
        0.0
    } else {
        let pts: Vec<Point> = if pg.depends_on_x { vec![[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]] } else { vec![[0.0, 0.0]] };
        let mut sup: f64 = 0.0;
        for x in pts {
            for &t in &[0.0, 0.5 * t_end, t_end] {
                sup = sup.max(corrector_u1(pg, prof, x, t, None)?.bound_m);
            }
        }
        sup
    };
    Ok(MotionParams {
        beta,
        sigma,
        m,
        a1,
        b,
        f1_const,
        f2_const,
        k: k_from_m1(prof, sigma, beta, m1),
        l_rate,
        m_corr,
        d0,
    })
}

/// Motion constants with b half the largest admissible band width.
pub fn tune_motion_params(
    nl: &BistableNonlinearity,
    prof: &ProfileData,
    pg: &PerturbationG,
    d0: f64,
    t_end: f64,
    eps0: f64,
    m1: f64,
) -> Result<MotionParams> {
    let b = 0.5 * admissible_b(nl)?;
    tune_motion_params_with_b(nl, prof, pg, b, d0, t_end, eps0, m1)
}

/// Generation constants: 𝒢 sampled over the box, C₅ measured on the
/// unperturbed flow, and `C₆ = 1.5(C₅C₀² + C₀)/μ`.
pub fn gen_params(nl: &BistableNonlinearity, pg: &PerturbationG, c0_data: f64, eps: f64, samples: usize) -> Result<GenParams> {
    let mu = nl.mu;
    let t_gen = eps * eps * eps.ln().abs() / mu;
    let pts = [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
    let g_bound = pg.sampled_bound(eps, &pts, &[0.0, t_gen], (-2.0 * c0_data, 2.0 * c0_data));
    let flat = perturb(nl, 0.0)?;
    let c5 = measure_c5(&flat, 2.0 * c0_data, eps.ln().abs() / mu, samples)?;
    let c6 = 1.5 * (c5 * c0_data * c0_data + c0_data) / mu;
    Ok(GenParams { c6, c5, c0_data, mu, g_bound, t_gen })
}

/// Flow handle for one side: `f_δ` with `δ = ±ε𝒢` (zero when g ≡ 0).
pub fn side_flow(nl: &BistableNonlinearity, gp: &GenParams, eps: f64, side: Side) -> Result<BistableFlow> {
    let pnl = perturb(nl, side.sign() * eps * gp.g_bound)?;
    Ok(BistableFlow::new(pnl, gp.c0_data))
}

/// `w^±(x,t) = Y(t/ε², u₀^±(x) ± ε²C₆(e^{μt/ε²} − 1))`.
pub fn gen_subsuper(flow: &BistableFlow, u0: &Field, gp: &GenParams, eps: f64, t: f64, side: Side) -> Result<Field> {
    if t > gp.t_gen * (1.0 + 1e-12) {
        return Err(Error::Config(format!("t = {t} beyond the generation window {}", gp.t_gen)));
    }
    let tau = t / (eps * eps);
    let shift = side.sign() * eps * eps * gp.c6 * (gp.mu * tau).exp_m1();
    let mut out = u0.clone();
    out.time = t;
    for v in out.values.iter_mut() {
        *v = flow.y(tau, *v + shift)?;
    }
    Ok(out)
}

/// Value of `w⁺` at `t = μ⁻¹ε²(|ln ε| − b)` for a node where `u₀ = xi`.
pub fn early_upper_value(flow: &BistableFlow, gp: &GenParams, xi: f64, eps: f64, b: f64) -> Result<f64> {
    let tau = (eps.ln().abs() - b).max(0.0) / gp.mu;
    flow.y(tau, xi + eps * eps * gp.c6 * (gp.mu * tau).exp_m1())
}

/// Boundary modification of the initial data where it is not flat at ∂Ω.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCutoff {
    pub d1: f64,
    pub rho: f64,
}

/// Distance to the boundary of the box.
pub fn boundary_distance(grid: &Grid, p: Point) -> f64 {
    let dx = p[0].min(grid.lx - p[0]);
    if grid.dim == 1 {
        dx
    } else {
        dx.min(p[1]).min(grid.ly - p[1])
    }
}

/// Largest one-sided normal difference quotient at the boundary nodes.
pub fn boundary_slope(u: &Field) -> f64 {
    let g = &u.grid;
    let mut worst: f64 = 0.0;
    for j in 0..g.ny {
        worst = worst.max((u.at(1, j) - u.at(0, j)).abs()).max((u.at(g.nx - 1, j) - u.at(g.nx - 2, j)).abs());
    }
    if g.dim == 2 {
        for i in 0..g.nx {
            worst = worst.max((u.at(i, 1) - u.at(i, 0)).abs()).max((u.at(i, g.ny - 1) - u.at(i, g.ny - 2)).abs());
        }
    }
    worst / g.h
}

/// `χ(z) = s³(10 − 15s + 6s²)`, `s = min(z/d₁, 1)`.
pub fn chi(z: f64, d1: f64) -> f64 {
    let s = (z / d1).clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// d₁ is half the distance from `{u₀ = a}` to ∂Ω; ρ is the smallest
/// `|u₀ − a|` within d₁ of the boundary.
pub fn measure_cutoff(u0: &Field, a: f64) -> Result<BoundaryCutoff> {
    let g = u0.grid;
    let mut gamma_dist = f64::INFINITY;
    for k in 0..g.len() {
        let (i, j) = (k % g.nx, k / g.nx);
        let mut nbrs = vec![];
        if i + 1 < g.nx {
            nbrs.push(g.idx(i + 1, j));
        }
        if g.dim == 2 && j + 1 < g.ny {
            nbrs.push(g.idx(i, j + 1));
        }
        for n in nbrs {
            if (u0.values[k] - a) * (u0.values[n] - a) <= 0.0 {
                gamma_dist = gamma_dist.min(boundary_distance(&g, g.node_of(k)).min(boundary_distance(&g, g.node_of(n))));
            }
        }
    }
    if !gamma_dist.is_finite() || gamma_dist <= 0.0 {
        return Err(Error::Config("the zero set of u0 - a touches the boundary or is empty".into()));
    }
    let d1 = 0.5 * gamma_dist;
    let rho = (0..g.len())
        .filter(|&k| boundary_distance(&g, g.node_of(k)) <= d1)
        .map(|k| (u0.values[k] - a).abs())
        .fold(f64::INFINITY, f64::min);
    if !(rho > 0.0) {
        return Err(Error::Config("u0 reaches a near the boundary".into()));
    }
    Ok(BoundaryCutoff { d1, rho })
}

/// `(u₀⁻, u₀⁺)`. Near a boundary piece where `u₀ > a` the lower data relaxes
/// to `a + ρ` and the upper one to `max u₀`; where `u₀ < a` the roles mirror.
pub fn cutoff_initial_data(u0: &Field, a: f64, cut: &BoundaryCutoff) -> (Field, Field) {
    let (umin, umax) = (u0.min(), u0.max());
    let mut lo = u0.clone();
    let mut hi = u0.clone();
    for k in 0..u0.values.len() {
        let c = chi(boundary_distance(&u0.grid, u0.grid.node_of(k)), cut.d1);
        let u = u0.values[k];
        let (l, h) = if u > a { (a + cut.rho, umax) } else { (umin, a - cut.rho) };
        lo.values[k] = c * u + (1.0 - c) * l;
        hi.values[k] = c * u + (1.0 - c) * h;
    }
    (lo, hi)
}

/// First-order corrector as seen by the motion construction.
#[derive(Clone, Debug)]
pub enum CorrectorField {
    Zero,
    /// x-independent corrector evaluated once.
    Uniform(CorrectorData),
    /// Recomputed per (x, t).
    PerNode(PerturbationG),
}

impl CorrectorField {
    pub fn build(pg: &PerturbationG, prof: &ProfileData, eps: f64) -> Result<Self> {
        if pg.is_zero() {
            Ok(CorrectorField::Zero)
        } else if !pg.depends_on_x {
            Ok(CorrectorField::Uniform(corrector_u1(pg, prof, [0.0, 0.0], 0.0, Some(eps))?))
        } else {
            Ok(CorrectorField::PerNode(pg.clone()))
        }
    }
}

/// `u^±(x,t) = U₀((d ± εp)/ε) + εU₁(x,t,(d ± εp)/ε) ± q` node-wise, where d
/// is the cut-off signed distance of Γ_t.
pub fn motion_subsuper(
    prof: &ProfileData,
    corr: &CorrectorField,
    d: &Field,
    mp: &MotionParams,
    eps: f64,
    t: f64,
    side: Side,
) -> Result<Field> {
    let s = side.sign();
    let (p, q) = (mp.p(eps, t), mp.q(eps, t));
    let mut out = d.clone();
    out.time = t;
    for k in 0..d.values.len() {
        let z = (d.values[k] + s * eps * p) / eps;
        let u1 = match corr {
            CorrectorField::Zero => 0.0,
            CorrectorField::Uniform(c) => c.u1_at(z),
            CorrectorField::PerNode(pg) => corrector_u1(pg, prof, d.grid.node_of(k), t, Some(eps))?.u1_at(z),
        };
        out.values[k] = prof.u0_at(z) + eps * u1 + s * q;
    }
    Ok(out)
}

/// Discrete `ℒw = w_t − Δw − ε⁻²(f(w) − εgᵉ(x,t,w))` at the time of `prev`,
/// by forward difference to `next` and the five-point Laplacian. Nodes
/// within two cells of the boundary are set to zero.
pub fn residual_l(prev: &Field, next: &Field, nl: &BistableNonlinearity, pg: &PerturbationG, eps: f64) -> Result<Field> {
    let dt = next.time - prev.time;
    if !(dt > 0.0) || prev.grid != next.grid {
        return Err(Error::Config("residual needs two snapshots on one grid with increasing time".into()));
    }
    let g = prev.grid;
    let mut lap = vec![0.0; g.len()];
    laplacian(&g, &prev.values, &mut lap);
    let mut out = prev.clone();
    let t = prev.time;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            out.values[k] = if g.is_interior(i, j, 2) {
                let w = prev.values[k];
                (next.values[k] - w) / dt - lap[k] - (nl.f(w) - eps * pg.g_eps(eps, g.node_of(k), t, w)) / (eps * eps)
            } else {
                0.0
            };
        }
    }
    Ok(out)
}

/// Truncation floor: ten times the largest residual of a candidate that
/// solves the discrete problem (for instance the PDE solution itself).
pub fn calibrate_tol_res(pairs: &[(Field, Field)], nl: &BistableNonlinearity, pg: &PerturbationG, eps: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (a, b) in pairs {
        let r = residual_l(a, b, nl, pg, eps)?;
        worst = worst.max(r.values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    Ok(10.0 * worst)
}

/// `lower ≤ mid ≤ upper` node-wise with slack 1e−12.
pub fn ordering_check(lower: &Field, mid: &Field, upper: &Field) -> bool {
    lower.values.len() == mid.values.len()
        && mid.values.len() == upper.values.len()
        && lower
            .values
            .iter()
            .zip(&mid.values)
            .zip(&upper.values)
            .all(|((l, m), u)| *l <= m + 1e-12 && *m <= u + 1e-12)
}

/// Largest violation of `lower ≤ mid ≤ upper` (0 when ordered).
pub fn ordering_gap(lower: &Field, mid: &Field, upper: &Field) -> f64 {
    lower
        .values
        .iter()
        .zip(&mid.values)
        .zip(&upper.values)
        .map(|((l, m), u)| (l - m).max(m - u).max(0.0))
        .fold(0.0, f64::max)
}

/// M₀ such that `ξ ≥ a + M₀ε` generates to within `σβ/2` of α₊ by the end
/// of the generation window, including the ε²C₆ shift of w⁻.
pub fn measure_m0(nl: &BistableNonlinearity, gp: &GenParams, mp: &MotionParams, eps: f64) -> Result<f64> {
    let flat = perturb(nl, 0.0)?;
    let c7 = measure_c7(&flat, 0.5 * mp.sigma * mp.beta, eps)?;
    Ok(c7 + gp.c6 * (1.0 - eps) + gp.g_bound)
}

/// Smallest M₁ on the grid with `d₀ ≥ M₁ε ⟹ u₀ ≥ a + M₀ε` and the mirror.
pub fn measure_m1(u0: &Field, d0: &Field, a: f64, m0: f64, eps: f64) -> f64 {
    let mut m1: f64 = 0.0;
    for (&u, &d) in u0.values.iter().zip(&d0.values) {
        let bad = if d > 0.0 { u < a + m0 * eps } else { u > a - m0 * eps };
        if bad {
            m1 = m1.max(d.abs() / eps);
        }
    }
    m1 + u0.grid.h / eps
}
