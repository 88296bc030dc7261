//! Standing-wave profile U₀ with `U₀'' + f(U₀) = 0`, `U₀(±∞) = α±`,
//! `U₀(0) = a`, plus the surface constant c₀ and decay rates λ±.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::nonlinearity::BistableNonlinearity;
use crate::quad;

const BALANCE_TOL: f64 = 1e-10;

/// Tabulated profile on a uniform z-grid with exponential tails.
#[derive(Clone, Debug)]
pub struct ProfileData {
    pub z_grid: Vec<f64>,
    pub u0: Vec<f64>,
    pub du0: Vec<f64>,
    pub d2u0: Vec<f64>,
    pub c0: f64,
    pub norm_sq: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub z_cut: f64,
    pub h: f64,
    nl: BistableNonlinearity,
}

/// `λ± = √(−f'(α±))`.
pub fn decay_rates(nl: &BistableNonlinearity) -> Result<(f64, f64)> {
    let (dm, dp) = (nl.df(nl.alpha_minus), nl.df(nl.alpha_plus));
    if !(dm < 0.0 && dp < 0.0) {
        return Err(Error::NonBistable("f'(α±) must be negative".into()));
    }
    Ok(((-dm).sqrt(), (-dp).sqrt()))
}

fn check_balance(nl: &BistableNonlinearity) -> Result<()> {
    let r = nl.balance_residual();
    if r.abs() > BALANCE_TOL {
        return Err(Error::UnbalancedPotential(r));
    }
    Ok(())
}

/// `c₀ = [√2 ∫_{α₋}^{α₊} (W(s) − W(α₋))^{1/2} ds]⁻¹`.
pub fn surface_constant_c0(nl: &BistableNonlinearity) -> Result<f64> {
    check_balance(nl)?;
    let bad = Cell::new(None);
    let integrand = |s: f64| {
        let g = nl.potential_gap(s);
        if g < -1e-12 {
            bad.set(Some((s, g)));
        }
        g.max(0.0).sqrt()
    };
    let total = quad::integrate(&integrand, nl.alpha_minus, nl.a, 1e-16, 1e-14).0
        + quad::integrate(&integrand, nl.a, nl.alpha_plus, 1e-16, 1e-14).0;
    if let Some((u, gap)) = bad.get() {
        return Err(Error::QuadratureSingularity { u, gap });
    }
    Ok(1.0 / (std::f64::consts::SQRT_2 * total))
}

/// `U₀' = √(2(W(u) − W(α₋)))` as a function of the value u.
fn slope_of(nl: &BistableNonlinearity, u: f64) -> f64 {
    (2.0 * nl.potential_gap(u)).max(0.0).sqrt()
}

/// Solve `∫_{u_k}^{u} ds/P(s) = step` for u on the side given by `dir`.
fn march(nl: &BistableNonlinearity, u_k: f64, step: f64, dir: f64) -> f64 {
    let target = if dir > 0.0 { nl.alpha_plus } else { nl.alpha_minus };
    let p_k = slope_of(nl, u_k);
    let time = |u: f64| quad::gl8(|s| 1.0 / slope_of(nl, s), u_k, u) * dir;
    let mut lo = u_k;
    let mut hi = target;
    let mut u = u_k + dir * p_k * step - 0.5 * nl.f(u_k) * step * step;
    if !((u - lo) * dir > 0.0 && (hi - u) * dir > 0.0) {
        u = 0.5 * (lo + hi);
    }
    for _ in 0..100 {
        let p = slope_of(nl, u);
        let resid = time(u) - step;
        if resid > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let mut next = u - dir * resid * p;
        if !((next - lo) * dir > 0.0 && (hi - next) * dir > 0.0) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - u).abs() <= 2.0 * f64::EPSILON * u.abs() + 4.0 * f64::EPSILON * (target - u).abs();
        u = next;
        if done {
            break;
        }
    }
    u
}

/// Build the profile on `n_points` uniform nodes over `[−z_cut, z_cut]`.
pub fn compute_profile(nl: &BistableNonlinearity, n_points: usize, z_cut: f64) -> Result<ProfileData> {
    if n_points < 256 {
        return Err(Error::Config(format!("n_points = {n_points} < 256")));
    }
    if !(z_cut > 0.0) {
        return Err(Error::Config("z_cut must be positive".into()));
    }
    check_balance(nl)?;
    let c0 = surface_constant_c0(nl)?;
    let (lambda_minus, lambda_plus) = decay_rates(nl)?;
    let n = if n_points % 2 == 0 { n_points + 1 } else { n_points };
    let mid = n / 2;
    let h = 2.0 * z_cut / (n - 1) as f64;
    let z_grid: Vec<f64> = (0..n).map(|i| (i as f64 - mid as f64) * h).collect();
    let mut u0 = vec![0.0; n];
    u0[mid] = nl.a;
    for i in mid + 1..n {
        u0[i] = march(nl, u0[i - 1], h, 1.0);
    }
    for i in (0..mid).rev() {
        u0[i] = march(nl, u0[i + 1], h, -1.0);
    }
    let du0: Vec<f64> = u0.iter().map(|&u| slope_of(nl, u)).collect();
    if du0.iter().enumerate().any(|(i, &d)| !(d > 0.0) && i != 0 && i != n - 1) {
        return Err(Error::QuadratureSingularity { u: nl.alpha_plus, gap: 0.0 });
    }
    let d2u0: Vec<f64> = u0.iter().map(|&u| -nl.f(u)).collect();
    let sq: Vec<f64> = du0.iter().map(|d| d * d).collect();
    let tail_m = lambda_minus * (u0[0] - nl.alpha_minus).powi(2) / 2.0;
    let tail_p = lambda_plus * (nl.alpha_plus - u0[n - 1]).powi(2) / 2.0;
    let norm_sq = quad::uniform_integral(&sq, h) + tail_m + tail_p;
    Ok(ProfileData {
        z_grid,
        u0,
        du0,
        d2u0,
        c0,
        norm_sq,
        lambda_minus,
        lambda_plus,
        z_cut,
        h,
        nl: nl.clone(),
    })
}

/// Profile with the default truncation `Z_cut = 20/λ` and 4097 nodes.
pub fn default_profile(nl: &BistableNonlinearity) -> Result<ProfileData> {
    let (lm, lp) = decay_rates(nl)?;
    compute_profile(nl, 4097, 20.0 / lm.min(lp))
}

impl ProfileData {
    pub fn nonlinearity(&self) -> &BistableNonlinearity {
        &self.nl
    }

    pub fn len(&self) -> usize {
        self.z_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_grid.is_empty()
    }

    /// U₀(z): cubic Hermite inside the table, linearized exponential outside.
    pub fn u0_at(&self, z: f64) -> f64 {
        let n = self.len();
        let zc = self.z_cut;
        if z >= zc {
            let gap = self.nl.alpha_plus - self.u0[n - 1];
            return self.nl.alpha_plus - gap * (-self.lambda_plus * (z - zc)).exp();
        }
        if z <= -zc {
            let gap = self.u0[0] - self.nl.alpha_minus;
            return self.nl.alpha_minus + gap * (self.lambda_minus * (z + zc)).exp();
        }
        let s = (z + zc) / self.h;
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        let (y0, y1) = (self.u0[i], self.u0[i + 1]);
        let (m0, m1) = (self.du0[i] * self.h, self.du0[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }

    /// U₀'(z) through the identity `U₀' = √(2(W(U₀) − W(α₋)))`.
    pub fn du0_at(&self, z: f64) -> f64 {
        let zc = self.z_cut;
        if z >= zc {
            return self.lambda_plus * (self.nl.alpha_plus - self.u0_at(z));
        }
        if z <= -zc {
            return self.lambda_minus * (self.u0_at(z) - self.nl.alpha_minus);
        }
        slope_of(&self.nl, self.u0_at(z))
    }

    /// U₀''(z) = −f(U₀(z)).
    pub fn d2u0_at(&self, z: f64) -> f64 {
        -self.nl.f(self.u0_at(z))
    }

    /// z with U₀(z) = u, for u strictly between α₋ and α₊.
    pub fn inverse(&self, u: f64) -> f64 {
        let (am, ap) = (self.nl.alpha_minus, self.nl.alpha_plus);
        assert!(u > am && u < ap, "inverse profile needs α₋ < u < α₊");
        let (mut lo, mut hi) = (-self.z_cut, self.z_cut);
        while self.u0_at(lo) > u {
            lo *= 2.0;
        }
        while self.u0_at(hi) < u {
            hi *= 2.0;
        }
        let mut z = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = self.u0_at(z) - u;
            if r > 0.0 {
                hi = z;
            } else {
                lo = z;
            }
            let mut next = z - r / self.du0_at(z);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - z).abs() < 1e-14 * (1.0 + z.abs()) {
                return next;
            }
            z = next;
        }
        z
    }

    /// `∫ A(z) U₀'(z) dz` over the table plus exponential tail estimates.
    pub fn weighted_integral(&self, values: &[f64]) -> f64 {
        let n = self.len();
        let prod: Vec<f64> = values.iter().zip(&self.du0).map(|(a, d)| a * d).collect();
        let tail_p = values[n - 1] * self.du0[n - 1] / self.lambda_plus;
        let tail_m = values[0] * self.du0[0] / self.lambda_minus;
        quad::uniform_integral(&prod, self.h) + tail_p + tail_m
    }
}
