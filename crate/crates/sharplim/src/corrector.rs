//! Solvability machinery for the linearized operator `ψ'' + f'(U₀)ψ`, the
//! pressure γ, and the first-order corrector U₁.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Point;
use crate::nonlinearity::BistableNonlinearity;
use crate::profile::ProfileData;
use crate::quad;

pub type GFn = Arc<dyn Fn(Point, f64, f64) -> f64 + Send + Sync>;
pub type GEpsFn = Arc<dyn Fn(f64, Point, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GKind {
    Zero,
    Constant(f64),
    General,
}

/// The perturbation gᵉ(x, t, u) and its limit g.
#[derive(Clone)]
pub struct PerturbationG {
    g: GFn,
    g_eps: GEpsFn,
    pub bound_g: f64,
    pub neumann_compatible: bool,
    pub depends_on_x: bool,
    pub kind: GKind,
}

impl std::fmt::Debug for PerturbationG {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PerturbationG")
            .field("kind", &self.kind)
            .field("bound_g", &self.bound_g)
            .field("depends_on_x", &self.depends_on_x)
            .finish()
    }
}

impl PerturbationG {
    pub fn zero() -> Self {
        PerturbationG {
            g: Arc::new(|_, _, _| 0.0),
            g_eps: Arc::new(|_, _, _, _| 0.0),
            bound_g: 0.0,
            neumann_compatible: true,
            depends_on_x: false,
            kind: GKind::Zero,
        }
    }

    /// gᵉ = g = g₀.
    pub fn constant(g0: f64) -> Self {
        PerturbationG {
            g: Arc::new(move |_, _, _| g0),
            g_eps: Arc::new(move |_, _, _, _| g0),
            bound_g: g0.abs(),
            neumann_compatible: true,
            depends_on_x: false,
            kind: if g0 == 0.0 { GKind::Zero } else { GKind::Constant(g0) },
        }
    }

    /// General perturbation; `bound_g` is the caller's bound 𝒢 on |gᵉ|.
    pub fn new(
        g: impl Fn(Point, f64, f64) -> f64 + Send + Sync + 'static,
        g_eps: impl Fn(f64, Point, f64, f64) -> f64 + Send + Sync + 'static,
        bound_g: f64,
        depends_on_x: bool,
    ) -> Self {
        PerturbationG {
            g: Arc::new(g),
            g_eps: Arc::new(g_eps),
            bound_g,
            neumann_compatible: true,
            depends_on_x,
            kind: GKind::General,
        }
    }

    /// gᵉ = g independent of ε.
    pub fn from_limit(g: impl Fn(Point, f64, f64) -> f64 + Send + Sync + 'static, bound_g: f64, depends_on_x: bool) -> Self {
        let g: GFn = Arc::new(g);
        let g2 = g.clone();
        PerturbationG {
            g,
            g_eps: Arc::new(move |_, x, t, u| g2(x, t, u)),
            bound_g,
            neumann_compatible: true,
            depends_on_x,
            kind: GKind::General,
        }
    }

    #[inline]
    pub fn g(&self, x: Point, t: f64, u: f64) -> f64 {
        (self.g)(x, t, u)
    }

    #[inline]
    pub fn g_eps(&self, eps: f64, x: Point, t: f64, u: f64) -> f64 {
        (self.g_eps)(eps, x, t, u)
    }

    pub fn is_zero(&self) -> bool {
        self.kind == GKind::Zero
    }

    /// Either g (no ε) or gᵉ.
    pub fn eval(&self, use_eps: Option<f64>, x: Point, t: f64, u: f64) -> f64 {
        match use_eps {
            Some(e) => self.g_eps(e, x, t, u),
            None => self.g(x, t, u),
        }
    }

    /// Sampled sup of |gᵉ| over the given points, times and u-range.
    pub fn sampled_bound(&self, eps: f64, points: &[Point], times: &[f64], u_range: (f64, f64)) -> f64 {
        let mut sup: f64 = 0.0;
        for &x in points {
            for &t in times {
                for k in 0..=40 {
                    let u = u_range.0 + (u_range.1 - u_range.0) * k as f64 / 40.0;
                    sup = sup.max(self.g_eps(eps, x, t, u).abs());
                }
            }
        }
        sup
    }

    /// Sampled sup of |gᵉ − g| for the ε-consistency check.
    pub fn consistency_gap(&self, eps: f64, points: &[Point], times: &[f64], u_range: (f64, f64)) -> f64 {
        let mut sup: f64 = 0.0;
        for &x in points {
            for &t in times {
                for k in 0..=40 {
                    let u = u_range.0 + (u_range.1 - u_range.0) * k as f64 / 40.0;
                    sup = sup.max((self.g_eps(eps, x, t, u) - self.g(x, t, u)).abs());
                }
            }
        }
        sup
    }

    /// Largest one-sided normal difference of gᵉ across the boundary of the
    /// box `[0, lx] × [0, ly]`, sampled; large values only warrant a warning.
    pub fn neumann_defect(&self, eps: f64, lx: f64, ly: f64, t: f64, u: f64, h: f64) -> f64 {
        if !self.depends_on_x {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            let pairs = [
                ([0.0, s * ly], [h, s * ly]),
                ([lx, s * ly], [lx - h, s * ly]),
                ([s * lx, 0.0], [s * lx, h]),
                ([s * lx, ly], [s * lx, ly - h]),
            ];
            for (b, inner) in pairs {
                let d = (self.g_eps(eps, b, t, u) - self.g_eps(eps, inner, t, u)).abs() / h;
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Result of a Fredholm solve at one (x, t).
#[derive(Clone, Debug)]
pub struct CorrectorData {
    pub z_grid: Vec<f64>,
    pub u1: Vec<f64>,
    pub du1: Vec<f64>,
    pub bound_m: f64,
    pub gamma_value: f64,
    /// ψ read at `z = ∓(Z_cut − 4)`.
    pub limit_minus: f64,
    pub limit_plus: f64,
    /// `‖ψ'' + f'(U₀)ψ − A‖∞` on `|z| ≤ Z_cut − 4` (ψ'' by 4th-order differences of ψ').
    pub pde_residual: f64,
    pub solvability: f64,
    h: f64,
    lambda_minus: f64,
    lambda_plus: f64,
}

impl CorrectorData {
    pub fn zero_like(prof: &ProfileData) -> Self {
        let n = prof.len();
        CorrectorData {
            z_grid: prof.z_grid.clone(),
            u1: vec![0.0; n],
            du1: vec![0.0; n],
            bound_m: 0.0,
            gamma_value: 0.0,
            limit_minus: 0.0,
            limit_plus: 0.0,
            pde_residual: 0.0,
            solvability: 0.0,
            h: prof.h,
            lambda_minus: prof.lambda_minus,
            lambda_plus: prof.lambda_plus,
        }
    }

    /// U₁(z) by cubic Hermite inside the table, relaxing exponentially to the
    /// end value outside.
    pub fn u1_at(&self, z: f64) -> f64 {
        let n = self.z_grid.len();
        let z0 = self.z_grid[0];
        let z1 = self.z_grid[n - 1];
        if z >= z1 {
            return self.u1[n - 1] + self.du1[n - 1] / self.lambda_plus * (1.0 - (-self.lambda_plus * (z - z1)).exp());
        }
        if z <= z0 {
            return self.u1[0] - self.du1[0] / self.lambda_minus * (1.0 - (self.lambda_minus * (z - z0)).exp());
        }
        let s = (z - z0) / self.h;
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        let (y0, y1) = (self.u1[i], self.u1[i + 1]);
        let (m0, m1) = (self.du1[i] * self.h, self.du1[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }
}

/// `∫ A U₀'` over the profile table with exponential tail corrections.
pub fn solvability_residual(a: &dyn Fn(f64) -> f64, prof: &ProfileData) -> f64 {
    let vals: Vec<f64> = prof.z_grid.iter().map(|&z| a(z)).collect();
    prof.weighted_integral(&vals)
}

/// `G(x,t,s) = ∫_a^s g(x,t,r) dr`.
pub fn potential_g(pg: &PerturbationG, nl: &BistableNonlinearity, x: Point, t: f64, s: f64, use_eps: Option<f64>) -> f64 {
    match pg.kind {
        GKind::Zero => 0.0,
        GKind::Constant(g0) => g0 * (s - nl.a),
        GKind::General => quad::quad(|r| pg.eval(use_eps, x, t, r), nl.a, s),
    }
}

/// `γ = c₀ (G(x,t,α₊) − G(x,t,α₋))` (or the ε-variant).
pub fn pressure_gamma(pg: &PerturbationG, nl: &BistableNonlinearity, c0: f64, x: Point, t: f64, use_eps: Option<f64>) -> f64 {
    match pg.kind {
        GKind::Zero => 0.0,
        GKind::Constant(g0) => c0 * g0 * (nl.alpha_plus - nl.alpha_minus),
        GKind::General => {
            c0 * (potential_g(pg, nl, x, t, nl.alpha_plus, use_eps) - potential_g(pg, nl, x, t, nl.alpha_minus, use_eps))
        }
    }
}

/// Pieces shared by both forms of the variation-of-constants formula.
struct Tabulated {
    a: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

fn tabulate(a: &dyn Fn(f64) -> f64, prof: &ProfileData) -> Tabulated {
    let n = prof.len();
    let h = prof.h;
    let a_vals: Vec<f64> = prof.z_grid.iter().map(|&z| a(z)).collect();
    let phi = prof.du0.clone();
    let dphi = prof.d2u0.clone();
    let aphi: Vec<f64> = a_vals.iter().zip(&phi).map(|(x, y)| x * y).collect();
    let cum = quad::cumulative(&aphi, h);
    let tail_l = aphi[0] / prof.lambda_minus;
    let left: Vec<f64> = cum.iter().map(|c| tail_l + c).collect();
    let rev: Vec<f64> = aphi.iter().rev().copied().collect();
    let cum_r = quad::cumulative(&rev, h);
    let tail_r = aphi[n - 1] / prof.lambda_plus;
    let right: Vec<f64> = (0..n).map(|i| tail_r + cum_r[n - 1 - i]).collect();
    Tabulated { a: a_vals, phi, dphi, left, right }
}

/// `ψ = φ ∫₀^z φ⁻² I` with I the left inner integral `∫_{−∞}^ζ Aφ` or minus
/// the right one `∫_ζ^∞ Aφ`; returns (ψ, ψ').
fn assemble(t: &Tabulated, inner: &[f64], h: f64, mid: usize) -> (Vec<f64>, Vec<f64>) {
    let n = t.phi.len();
    let outer: Vec<f64> = (0..n).map(|i| inner[i] / (t.phi[i] * t.phi[i])).collect();
    let mut j = vec![0.0; n];
    let up = quad::cumulative(&outer[mid..], h);
    j[mid..].copy_from_slice(&up);
    let down_src: Vec<f64> = outer[..=mid].iter().rev().copied().collect();
    let down = quad::cumulative(&down_src, h);
    for (k, v) in down.iter().enumerate() {
        j[mid - k] = -v;
    }
    let psi: Vec<f64> = (0..n).map(|i| t.phi[i] * j[i]).collect();
    let dpsi: Vec<f64> = (0..n).map(|i| t.dphi[i] * j[i] + inner[i] / t.phi[i]).collect();
    (psi, dpsi)
}

/// Both nested-integral forms of ψ over the whole table (left form, right form).
pub fn psi_both_forms(a: &dyn Fn(f64) -> f64, prof: &ProfileData) -> (Vec<f64>, Vec<f64>) {
    let t = tabulate(a, prof);
    let mid = prof.len() / 2;
    let neg_right: Vec<f64> = t.right.iter().map(|v| -v).collect();
    (assemble(&t, &t.left, prof.h, mid).0, assemble(&t, &neg_right, prof.h, mid).0)
}

/// Solve `ψ'' + f'(U₀)ψ = A`, `ψ(0) = 0`, bounded.
pub fn fredholm_solve(a: &dyn Fn(f64) -> f64, prof: &ProfileData) -> Result<CorrectorData> {
    let n = prof.len();
    let h = prof.h;
    let mid = n / 2;
    let t = tabulate(a, prof);
    let a_sup = t.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if t.a.iter().any(|v| !v.is_finite()) {
        return Err(Error::TailDivergence(f64::NAN));
    }
    let solv = prof.weighted_integral(&t.a);
    if solv.abs() > 1e-6 * a_sup.max(1e-300) && a_sup > 0.0 {
        return Err(Error::SolvabilityViolation { residual: solv });
    }
    let aphi_sup = t.a.iter().zip(&t.phi).fold(0.0f64, |m, (x, y)| m.max((x * y).abs()));
    let end = (t.a[0] * t.phi[0]).abs().max((t.a[n - 1] * t.phi[n - 1]).abs());
    if end > 1e-6 * aphi_sup.max(1e-300) {
        return Err(Error::TailDivergence(end));
    }
    // Left form for z < 0, right form for z > 0: each integrates from the
    // tail where the inner integral is small.
    let mut inner = t.left.clone();
    for i in mid..n {
        inner[i] = -t.right[i];
    }
    let (psi, dpsi) = assemble(&t, &inner, h, mid);

    let nl = prof.nonlinearity();
    let margin = 4.0;
    let mut resid: f64 = 0.0;
    for i in 2..n - 2 {
        if prof.z_grid[i].abs() > prof.z_cut - margin {
            continue;
        }
        let d2 = (-dpsi[i + 2] + 8.0 * dpsi[i + 1] - 8.0 * dpsi[i - 1] + dpsi[i - 2]) / (12.0 * h);
        let r = d2 + nl.df(prof.u0[i]) * psi[i] - t.a[i];
        resid = resid.max(r.abs());
    }
    let k_lim = ((margin / h).round() as usize).min(n / 4);
    let bound_m = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(CorrectorData {
        z_grid: prof.z_grid.clone(),
        limit_minus: psi[k_lim],
        limit_plus: psi[n - 1 - k_lim],
        u1: psi,
        du1: dpsi,
        bound_m,
        gamma_value: 0.0,
        pde_residual: resid,
        solvability: solv,
        h,
        lambda_minus: prof.lambda_minus,
        lambda_plus: prof.lambda_plus,
    })
}

/// Corrector at a fixed (x, t): `A₀ = g(x,t,U₀) − γ U₀'` fed to the Fredholm
/// solve (ε-variants when `use_eps` is given).
pub fn corrector_u1(pg: &PerturbationG, prof: &ProfileData, x: Point, t: f64, use_eps: Option<f64>) -> Result<CorrectorData> {
    if pg.is_zero() {
        return Ok(CorrectorData::zero_like(prof));
    }
    let nl = prof.nonlinearity();
    let gamma = pressure_gamma(pg, nl, prof.c0, x, t, use_eps);
    let a0 = |z: f64| pg.eval(use_eps, x, t, prof.u0_at(z)) - gamma * prof.du0_at(z);
    let mut data = fredholm_solve(&a0, prof)?;
    data.gamma_value = gamma;
    Ok(data)
}

/// Finite-difference estimate of `sup_z |∂U₁/∂x_k|` at (x, t).
pub fn corrector_x_sensitivity(pg: &PerturbationG, prof: &ProfileData, x: Point, t: f64, hx: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[k] += hx;
        xm[k] -= hx;
        let up = corrector_u1(pg, prof, xp, t, None)?;
        let um = corrector_u1(pg, prof, xm, t, None)?;
        for (a, b) in up.u1.iter().zip(&um.u1) {
            worst = worst.max((a - b).abs() / (2.0 * hx));
        }
    }
    Ok(worst)
}
