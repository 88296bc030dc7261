//! Scalar flow `Y_τ = f_δ(Y)`, `Y(0) = ξ`, evaluated through the time
//! identity `∫_ξ^Y dq/f_δ(q) = τ`, with the sensitivity `Y_ξ` and the
//! log-curvature `A = Y_ξξ/Y_ξ`.

use crate::error::{Error, Result};
use crate::nonlinearity::{perturb, BistableNonlinearity, PerturbedNonlinearity};
use crate::quad;

/// Y together with its derivatives in ξ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowResult {
    pub y: f64,
    pub y_xi: f64,
    pub a: f64,
    pub tau: f64,
    pub xi: f64,
    pub delta: f64,
}

/// Flow handle: a perturbed nonlinearity plus the admissible box (−2C₀, 2C₀).
#[derive(Clone, Debug)]
pub struct BistableFlow {
    pub nl: PerturbedNonlinearity,
    pub xi_bound: f64,
}

impl BistableFlow {
    pub fn new(nl: PerturbedNonlinearity, c0: f64) -> Self {
        BistableFlow { nl, xi_bound: 2.0 * c0 }
    }

    fn check_box(&self, xi: f64) -> Result<()> {
        if xi.abs() >= self.xi_bound {
            return Err(Error::OutOfBox { xi, bound: self.xi_bound });
        }
        Ok(())
    }

    pub fn y(&self, tau: f64, xi: f64) -> Result<f64> {
        self.check_box(xi)?;
        flow_y(&self.nl, tau, xi)
    }

    pub fn eval(&self, tau: f64, xi: f64) -> Result<FlowResult> {
        self.check_box(xi)?;
        let y = flow_y(&self.nl, tau, xi)?;
        let fx = self.nl.f(xi);
        let (y_xi, a) = if fx == 0.0 {
            (1.0, 0.0)
        } else {
            (self.nl.f(y) / fx, log_curvature_a(&self.nl, tau, xi)?)
        };
        Ok(FlowResult { y, y_xi, a, tau, xi, delta: self.nl.delta })
    }
}

/// Which zero a trajectory approaches and which it leaves.
struct Branch {
    target: f64,
    source: Option<f64>,
}

fn branch_of(nl: &PerturbedNonlinearity, xi: f64) -> Option<Branch> {
    let [r1, r2, r3] = nl.zeros();
    if xi == r1 || xi == r2 || xi == r3 {
        None
    } else if xi < r1 {
        Some(Branch { target: r1, source: None })
    } else if xi < r2 {
        Some(Branch { target: r1, source: Some(r2) })
    } else if xi < r3 {
        Some(Branch { target: r3, source: Some(r2) })
    } else {
        Some(Branch { target: r3, source: None })
    }
}

/// Regular part `1/f(q) − Σ 1/(f'(r)(q − r))` over the subtracted zeros.
///
/// The term of the zero nearest to q is combined with `1/f` through the
/// Taylor remainder `(f(q) − f'(r)s)/s² = ∫₀¹ f''(r + θs)(1 − θ) dθ`, which
/// avoids the cancellation between two large terms.
fn regular_part(nl: &PerturbedNonlinearity, br: &Branch, q: f64) -> f64 {
    let zs = [Some(br.target), br.source];
    let near = zs
        .iter()
        .flatten()
        .copied()
        .min_by(|a, b| (q - a).abs().total_cmp(&(q - b).abs()))
        .unwrap_or(br.target);
    let s = q - near;
    let d1 = nl.df(near);
    let rem = quad::gl8(|th| nl.d2f(near + th * s) * (1.0 - th), 0.0, 1.0);
    let mut val = -rem / (d1 * (d1 + s * rem));
    for r in zs.iter().flatten() {
        if *r != near {
            val -= 1.0 / (nl.df(*r) * (q - r));
        }
    }
    val
}

/// `∫_ξ^y dq/f_δ(q)` for y on the branch of ξ (between ξ and the target).
pub fn time_to_reach(nl: &PerturbedNonlinearity, xi: f64, y: f64) -> Result<f64> {
    let br = branch_of(nl, xi).ok_or(Error::AtEquilibrium(xi))?;
    Ok(time_identity(nl, &br, xi, y))
}

fn time_identity(nl: &PerturbedNonlinearity, br: &Branch, xi: f64, y: f64) -> f64 {
    let rk = br.target;
    let mut t = ((y - rk) / (xi - rk)).ln() / nl.df(rk);
    if let Some(rj) = br.source {
        t += ((y - rj) / (xi - rj)).ln() / nl.df(rj);
    }
    if y != xi {
        let scale = (y - xi).abs();
        t += quad::integrate(|q| regular_part(nl, br, q), xi, y, 1e-15 * scale.max(1e-300), 1e-13).0;
    }
    t
}

/// Y(τ, ξ; δ) by inverting the time identity; RK45 fallback.
pub fn flow_y(nl: &PerturbedNonlinearity, tau: f64, xi: f64) -> Result<f64> {
    if tau == 0.0 {
        return Ok(xi);
    }
    if tau < 0.0 || !tau.is_finite() || !xi.is_finite() {
        return Err(Error::Config(format!("flow needs finite tau >= 0, got tau = {tau}, xi = {xi}")));
    }
    let Some(br) = branch_of(nl, xi) else {
        return Ok(xi);
    };
    match invert_time_identity(nl, &br, tau, xi) {
        Some(y) => Ok(y),
        None => {
            let y = flow_y_rk45(nl, tau, xi)?;
            let [r1, r2, r3] = nl.zeros();
            for r in [r1, r2, r3] {
                if (xi - r) * (y - r) < 0.0 {
                    return Err(Error::BranchCross { zero: r });
                }
            }
            Ok(y)
        }
    }
}

fn invert_time_identity(nl: &PerturbedNonlinearity, br: &Branch, tau: f64, xi: f64) -> Option<f64> {
    let y = solve_anchored(nl, br, tau, xi, br.target, false)?;
    match br.source {
        // Y still close to the repelling zero: resolve |Y − r| relative to it.
        Some(rj) if (y - rj).abs() < (y - br.target).abs() => solve_anchored(nl, br, tau, xi, rj, true),
        _ => Some(y),
    }
}

/// Solve `T(Y) = τ` in `w = ln|Y − anchor|`. T is decreasing in w for the
/// target anchor and increasing for the source anchor.
fn solve_anchored(
    nl: &PerturbedNonlinearity,
    br: &Branch,
    tau: f64,
    xi: f64,
    anchor: f64,
    from_source: bool,
) -> Option<f64> {
    let sgn = (xi - anchor).signum();
    let w_xi = (xi - anchor).abs().ln();
    let y_of = |w: f64| anchor + sgn * w.exp();
    let g = |w: f64| time_identity(nl, br, xi, y_of(w)) - tau;
    let guess = w_xi + nl.df(anchor) * tau;
    let (mut lo, mut hi);
    if from_source {
        lo = w_xi;
        let w_end = (br.target - anchor).abs().ln();
        let mut probe = if guess < w_end { guess } else { 0.5 * (lo + w_end) };
        let mut guard = 0;
        while g(probe) < 0.0 {
            lo = probe;
            probe = 0.5 * (probe + w_end);
            guard += 1;
            if guard > 200 {
                return None;
            }
        }
        hi = probe;
    } else {
        hi = w_xi;
        lo = guess - 1.0;
        let mut guard = 0;
        while g(lo) < 0.0 {
            hi = lo;
            lo -= (lo - w_xi).abs().max(1.0);
            guard += 1;
            if lo < -745.0 {
                return Some(anchor);
            }
            if guard > 200 {
                return None;
            }
        }
    }
    let mut w = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    let tol_t = 4.0 * f64::EPSILON * (1.0 + tau);
    for _ in 0..200 {
        let r = g(w);
        if !r.is_finite() {
            return None;
        }
        if r.abs() <= tol_t {
            return Some(y_of(w));
        }
        if (r > 0.0) == from_source {
            hi = w;
        } else {
            lo = w;
        }
        let y = y_of(w);
        let dt_dw = (y - anchor) / nl.f(y);
        let mut next = w - r / dt_dw;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let wtol = 4.0 * f64::EPSILON * (1.0 + w.abs());
        if (next - w).abs() <= wtol || hi - lo <= wtol {
            return Some(y_of(next));
        }
        w = next;
    }
    Some(y_of(w))
}

/// Dormand-Prince 5(4) integration of the flow with step control.
pub fn flow_y_rk45(nl: &PerturbedNonlinearity, tau: f64, xi: f64) -> Result<f64> {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut y = xi;
    let mut t = 0.0;
    let mut h = (tau / 100.0).min(0.01);
    let mut steps = 0usize;
    while t < tau {
        if t + h > tau {
            h = tau - t;
        }
        let mut k = [0.0; 7];
        for s in 0..7 {
            let mut ys = y;
            for j in 0..s {
                ys += h * A[s][j] * k[j];
            }
            k[s] = nl.f(ys);
        }
        let y5: f64 = y + h * (0..7).map(|s| B5[s] * k[s]).sum::<f64>();
        let y4: f64 = y + h * (0..7).map(|s| B4[s] * k[s]).sum::<f64>();
        let err = (y5 - y4).abs();
        let tol = 1e-13 * (1.0 + y5.abs());
        if err <= tol {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0) };
        h *= factor;
        steps += 1;
        if steps > 10_000_000 || !y.is_finite() {
            return Err(Error::NonFinite(t));
        }
    }
    Ok(y)
}

/// `Y_ξ = f_δ(Y)/f_δ(ξ)`.
pub fn flow_sensitivity(nl: &PerturbedNonlinearity, tau: f64, xi: f64) -> Result<f64> {
    let fx = nl.f(xi);
    if fx == 0.0 {
        return Err(Error::AtEquilibrium(xi));
    }
    Ok(nl.f(flow_y(nl, tau, xi)?) / fx)
}

/// `A = (f'(Y) − f'(ξ))/f_δ(ξ)`; near a zero of f_δ the integral form
/// `∫₀^τ f''(Y(s)) Y_ξ(s) ds` is used instead.
pub fn log_curvature_a(nl: &PerturbedNonlinearity, tau: f64, xi: f64) -> Result<f64> {
    let fx = nl.f(xi);
    if fx == 0.0 {
        return Err(Error::AtEquilibrium(xi));
    }
    if fx.abs() < 1e-6 {
        return log_curvature_a_integral(nl, tau, xi);
    }
    Ok((nl.df(flow_y(nl, tau, xi)?) - nl.df(xi)) / fx)
}

/// Integral form of A, evaluated by quadrature along the trajectory.
pub fn log_curvature_a_integral(nl: &PerturbedNonlinearity, tau: f64, xi: f64) -> Result<f64> {
    let fx = nl.f(xi);
    if fx == 0.0 {
        return Err(Error::AtEquilibrium(xi));
    }
    let integrand = |s: f64| {
        let y = flow_y(nl, s, xi).unwrap_or(f64::NAN);
        nl.d2f(y) * nl.f(y) / fx
    };
    let v = quad::integrate(integrand, 0.0, tau, 1e-13, 1e-11).0;
    if !v.is_finite() {
        return Err(Error::NonFinite(tau));
    }
    Ok(v)
}

/// Measured envelope constants of `(Y − a)/(e^{μτ}(ξ − a))`.
#[derive(Clone, Copy, Debug)]
pub struct SandwichReport {
    pub c1: f64,
    pub c2: f64,
    pub c1_mirror: f64,
    pub c2_mirror: f64,
    pub samples: usize,
}

/// Sample (τ, ξ) with trajectories confined to `(a(δ), α₊ − η)` (and the
/// mirror interval) and report the ratio envelope.
pub fn sandwich_check(nl: &PerturbedNonlinearity, eta: f64, samples: usize) -> Result<SandwichReport> {
    let a = nl.a_d;
    let mu = nl.mu_d;
    let half = (a - nl.alpha_minus_d).min(nl.alpha_plus_d - a);
    if !(eta > 0.0 && eta < half) {
        return Err(Error::Config(format!("eta = {eta} outside (0, {half})")));
    }
    let samples = samples.max(2);
    let env = |lo_side: bool| -> Result<(f64, f64)> {
        let (start, stop) = if lo_side { (a, nl.alpha_minus_d + eta) } else { (a, nl.alpha_plus_d - eta) };
        let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
        for i in 0..samples {
            // Geometric spacing in |ξ − a| from 1e-8 up to the edge.
            let s = i as f64 / (samples - 1) as f64;
            let width = (stop - start).abs();
            let off = 1e-8 * (width / 1e-8).powf(s) * 0.999;
            let xi = if lo_side { start - off } else { start + off };
            let t_max = time_to_reach(nl, xi, stop)?;
            for jt in 0..=samples {
                let tau = t_max * jt as f64 / samples as f64;
                let y = flow_y(nl, tau, xi)?;
                let ratio = (y - a) / ((mu * tau).exp() * (xi - a));
                c1 = c1.min(ratio);
                c2 = c2.max(ratio);
            }
        }
        Ok((c1, c2))
    };
    let (c1, c2) = env(false)?;
    let (c1m, c2m) = env(true)?;
    Ok(SandwichReport { c1, c2, c1_mirror: c1m, c2_mirror: c2m, samples: 2 * samples * (samples + 1) })
}

/// `sup |A(τ, ξ)| / (e^{μτ} − 1)` over ξ ∈ (−ξ_max, ξ_max), τ ∈ (0, τ_max].
pub fn measure_c5(nl: &PerturbedNonlinearity, xi_max: f64, tau_max: f64, samples: usize) -> Result<f64> {
    let mu = nl.mu_d;
    let mut c5: f64 = 0.0;
    for i in 0..samples {
        let xi = -xi_max + 2.0 * xi_max * (i as f64 + 0.5) / samples as f64;
        if nl.f(xi).abs() < 1e-6 {
            continue;
        }
        for j in 1..=samples {
            let tau = tau_max * j as f64 / samples as f64;
            let a = log_curvature_a(nl, tau, xi)?;
            c5 = c5.max(a.abs() / ((mu * tau).exp() - 1.0));
        }
    }
    Ok(c5)
}

/// Smallest C with `ξ ≥ a + Cε ⟹ Y(μ⁻¹|ln ε|, ξ) ≥ α₊ − η` and the mirror
/// statement, by bisection on ξ (Y is increasing in ξ).
pub fn measure_c7(nl: &PerturbedNonlinearity, eta: f64, eps: f64) -> Result<f64> {
    let tau = eps.ln().abs() / nl.mu_d;
    let a = nl.a_d;
    let solve = |upper: bool| -> Result<f64> {
        let goal = if upper { nl.alpha_plus_d - eta } else { nl.alpha_minus_d + eta };
        let (mut lo, mut hi) = if upper { (a, goal) } else { (goal, a) };
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let y = flow_y(nl, tau, mid)?;
            let reached = if upper { y >= goal } else { y > goal };
            if reached {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(if upper { (hi - a) / eps } else { (a - lo) / eps })
    };
    Ok(solve(true)?.max(solve(false)?))
}

/// Smallest C with `ξ ≥ a + Cε ⟹ Y(τ, ξ; −ε𝒢) > a` for all
/// `τ ≤ μ⁻¹|ln ε|`, and the mirror statement under `+ε𝒢`. Y is monotone in
/// τ, so only the final time needs checking.
pub fn measure_c8(base: &BistableNonlinearity, g_bound: f64, eps: f64) -> Result<f64> {
    let tau = eps.ln().abs() / base.mu;
    let a = base.a;
    let solve = |upper: bool| -> Result<f64> {
        let nl = perturb(base, if upper { -eps * g_bound } else { eps * g_bound })?;
        let stays = |xi: f64| -> Result<bool> {
            let y = flow_y(&nl, tau, xi)?;
            Ok(if upper { y > a } else { y < a })
        };
        let far = if upper { nl.a_d.max(a) } else { nl.a_d.min(a) };
        let (mut bad, mut good) = (a, far + (far - a).abs() * 1e-9 + if upper { 1e-15 } else { -1e-15 });
        if !stays(good)? {
            return Err(Error::BranchCross { zero: nl.a_d });
        }
        for _ in 0..80 {
            let mid = 0.5 * (bad + good);
            if stays(mid)? {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok((good - a).abs() / eps)
    };
    Ok(solve(true)?.max(solve(false)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{make_cubic, perturb};

    fn cubic0() -> PerturbedNonlinearity {
        perturb(&make_cubic(), 0.0).unwrap()
    }

    fn closed_form(tau: f64, xi: f64) -> f64 {
        let e = (2.0 * tau).exp();
        xi * e.sqrt() / (1.0 - xi * xi + xi * xi * e).sqrt()
    }

    #[test]
    fn flow_examples() {
        let nl = cubic0();
        let y = flow_y(&nl, 10f64.ln(), 0.1).unwrap();
        assert!((y - 1.0 / 1.99f64.sqrt()).abs() < 1e-12);
        assert_eq!(flow_y(&nl, 3.0, 0.0).unwrap(), 0.0);
        assert_eq!(flow_y(&nl, 0.0, 0.37).unwrap(), 0.37);
    }

    #[test]
    fn sensitivity_and_curvature_examples() {
        let nl = cubic0();
        let t = 10f64.ln();
        let yx = flow_sensitivity(&nl, t, 0.1).unwrap();
        let y = closed_form(t, 0.1);
        assert!((yx - (y - y.powi(3)) / 0.099).abs() < 1e-9);
        assert!((yx - 3.5622).abs() < 1e-4);
        assert!((flow_sensitivity(&nl, 0.0, 0.3).unwrap() - 1.0).abs() < 1e-15);
        let a = log_curvature_a(&nl, t, 0.1).unwrap();
        assert!((a - ((1.0 - 3.0 * y * y) - 0.97) / 0.099).abs() < 1e-9);
        assert!((a + 14.9246).abs() < 1e-3);
        assert_eq!(log_curvature_a(&nl, 0.0, 0.4).unwrap(), 0.0);
        assert!(matches!(flow_sensitivity(&nl, 1.0, 1.0), Err(Error::AtEquilibrium(_))));
    }

    #[test]
    fn integral_form_matches_definition() {
        let nl = cubic0();
        for &(t, xi) in &[(0.5, 0.3), (2.0, -0.6), (1.0, 1.4)] {
            let a = log_curvature_a(&nl, t, xi).unwrap();
            let b = log_curvature_a_integral(&nl, t, xi).unwrap();
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn rk45_agrees() {
        let nl = perturb(&make_cubic(), 0.02).unwrap();
        for &(t, xi) in &[(0.3, 0.2), (4.0, -0.3), (2.0, 1.7)] {
            let a = flow_y(&nl, t, xi).unwrap();
            let b = flow_y_rk45(&nl, t, xi).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn perturbed_flow_respects_zeros() {
        let nl = perturb(&make_cubic(), 0.05).unwrap();
        let xi = nl.a_d + 1e-6;
        let y = flow_y(&nl, 40.0, xi).unwrap();
        assert!((y - nl.alpha_plus_d).abs() < 1e-10);
        let y = flow_y(&nl, 5.0, nl.a_d - 1e-3).unwrap();
        assert!(y < nl.a_d);
    }

    #[test]
    fn box_guard() {
        let fl = BistableFlow::new(cubic0(), 3.0);
        assert!(fl.y(1.0, 5.9).is_ok());
        assert!(matches!(fl.y(1.0, 6.5), Err(Error::OutOfBox { .. })));
    }

    #[test]
    fn sandwich_envelope() {
        let nl = cubic0();
        let r = sandwich_check(&nl, 0.1, 12).unwrap();
        assert!(r.c1 > 0.1 && r.c2 < 10.0 && r.c1 <= r.c2);
        assert!(r.c1_mirror > 0.1 && r.c2_mirror < 10.0);
        // Near a the ratio tends to one.
        let xi = 1e-8;
        let y = flow_y(&nl, 0.01, xi).unwrap();
        assert!((y / (0.01f64.exp() * xi) - 1.0).abs() < 1e-12);
        let rd = sandwich_check(&perturb(&make_cubic(), 0.005).unwrap(), 0.1, 12).unwrap();
        assert!((rd.c1 / r.c1 - 1.0).abs() <= 0.25 && (rd.c2 / r.c2 - 1.0).abs() <= 0.25);
    }

    #[test]
    fn after_time_digest() {
        let nl = cubic0();
        let eta = 0.1;
        for &eps in &[0.04, 0.02, 0.01] {
            let c7 = measure_c7(&nl, eta, eps).unwrap();
            let tau = eps.ln().abs();
            let xi = nl.a_d + c7 * eps * 1.0001;
            assert!(flow_y(&nl, tau, xi).unwrap() >= 1.0 - eta);
            for k in 0..=40 {
                let xi = -3.99 + 7.98 * k as f64 / 40.0;
                let y = flow_y(&nl, tau, xi).unwrap();
                assert!(y >= -1.0 - eta && y <= 1.0 + eta, "xi {xi} y {y}");
            }
        }
    }
    #[test]
    fn closed_form_grid() {
        let nl = cubic0();
        let tmax = 3.0 * (1.0f64 / 0.02).ln();
        for i in 0..20 {
            let tau = tmax * i as f64 / 19.0;
            for j in 0..20 {
                let xi = -0.95 + 1.9 * j as f64 / 19.0;
                let (y, e) = (flow_y(&nl, tau, xi).unwrap(), closed_form(tau, xi));
                assert!((y - e).abs() <= 1e-9 * e.abs().max(1e-300), "tau {tau} xi {xi}: {y} vs {e}");
            }
        }
    }

    #[test]
    fn semigroup() {
        for &d in &[0.0, 0.03] {
            let nl = perturb(&make_cubic(), d).unwrap();
            for &(t1, t2, xi) in &[(0.4, 1.1, 0.2), (2.0, 0.5, -0.7), (0.1, 3.0, 1.6), (1.0, 1.0, -1.8)] {
                let a = flow_y(&nl, t1 + t2, xi).unwrap();
                let b = flow_y(&nl, t2, flow_y(&nl, t1, xi).unwrap()).unwrap();
                assert!((a - b).abs() <= 1e-9, "{a} {b}");
            }
        }
    }

    #[test]
    fn sensitivity_matches_finite_differences() {
        let nl = perturb(&make_cubic(), 0.01).unwrap();
        let h = 1e-5;
        for &(t, xi) in &[(0.5, 0.3), (2.3, -0.4), (1.0, 1.5), (4.0, 0.05)] {
            let fd = (flow_y(&nl, t, xi + h).unwrap() - flow_y(&nl, t, xi - h).unwrap()) / (2.0 * h);
            let yx = flow_sensitivity(&nl, t, xi).unwrap();
            assert!((fd - yx).abs() <= 1e-6 * yx.abs().max(1.0), "{fd} {yx}");
        }
    }

    #[test]
    fn early_time_threshold() {
        let base = make_cubic();
        for &eps in &[0.04, 0.02, 0.01] {
            let c8 = measure_c8(&base, 1.0, eps).unwrap();
            // Linearizing at a: (ξ − a_δ)e^τ > a − a_δ at τ = |ln ε| gives (𝒢/μ)(1 − ε).
            assert!((c8 - (1.0 - eps)).abs() < 0.02, "{c8}");
            let tau = eps.ln().abs();
            for &d in &[-eps, eps] {
                let nl = perturb(&base, d).unwrap();
                for k in 0..=8 {
                    let t = tau * k as f64 / 8.0;
                    assert!(flow_y(&nl, t, c8 * eps * 1.001).unwrap() > 0.0);
                    assert!(flow_y(&nl, t, -c8 * eps * 1.001).unwrap() < 0.0);
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn monotone_in_xi(tau in 0.0f64..6.0, x1 in -1.9f64..1.9, dx in 1e-6f64..0.5, d in -0.05f64..0.05) {
            let nl = perturb(&make_cubic(), d).unwrap();
            let x2 = (x1 + dx).min(1.95);
            proptest::prop_assume!(x2 > x1);
            proptest::prop_assert!(flow_y(&nl, tau, x2).unwrap() > flow_y(&nl, tau, x1).unwrap());
        }
    }
}
