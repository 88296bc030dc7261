//! Bistable nonlinearities f, the potential W, and the offset family
//! f_delta = f + delta.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Poly(Vec<f64>),
    Closure { f: ScalarFn, df: ScalarFn, d2f: ScalarFn },
}

/// A bistable nonlinearity with zeros `alpha_minus < a < alpha_plus`.
#[derive(Clone)]
pub struct BistableNonlinearity {
    repr: Repr,
    pub alpha_minus: f64,
    pub a: f64,
    pub alpha_plus: f64,
    pub mu: f64,
    /// Taylor coefficients of f about alpha_minus and alpha_plus (polynomial case).
    shifted: Option<(Vec<f64>, Vec<f64>)>,
}

impl fmt::Debug for BistableNonlinearity {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("BistableNonlinearity")
            .field("poly", &self.coefficients())
            .field("alpha_minus", &self.alpha_minus)
            .field("a", &self.a)
            .field("alpha_plus", &self.alpha_plus)
            .field("mu", &self.mu)
            .finish()
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &ck)| k as f64 * ck).collect()
}

/// Coefficients of p(x0 + t) in powers of t.
fn taylor_shift(c: &[f64], x0: f64) -> Vec<f64> {
    let mut b = c.to_vec();
    let n = b.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            b[j] += x0 * b[j + 1];
        }
    }
    b
}

/// f = u(1 - u^2): zeros (-1, 0, 1), mu = 1.
pub fn make_cubic() -> BistableNonlinearity {
    BistableNonlinearity::from_polynomial(&[0.0, 1.0, 0.0, -1.0]).expect("cubic is bistable")
}

/// Sorted sign changes of `g` on `[lo, hi]` sampled at `n` points, refined
/// to brackets.
fn sign_change_brackets<G: Fn(f64) -> f64>(g: &G, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut x_prev = lo;
    let mut g_prev = g(lo);
    for i in 1..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let gx = g(x);
        if g_prev == 0.0 {
            out.push((x_prev, x_prev));
        } else if gx != 0.0 && (g_prev < 0.0) != (gx < 0.0) {
            out.push((x_prev, x));
        }
        x_prev = x;
        g_prev = gx;
    }
    if g_prev == 0.0 {
        out.push((hi, hi));
    }
    out
}

/// Newton with bisection safeguard on a bracket; tolerance 1e-13 on the step.
fn safeguarded_newton<G: Fn(f64) -> f64, D: Fn(f64) -> f64>(g: &G, dg: &D, lo: f64, hi: f64, x0: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    let (mut lo, mut hi) = (lo, hi);
    let g_lo = g(lo);
    let mut x = x0.clamp(lo, hi);
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if (gx < 0.0) == (g_lo < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        let d = dg(x);
        let mut next = if d != 0.0 { x - gx / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-13 * (1.0 + x.abs()) || hi - lo <= 1e-15 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

impl BistableNonlinearity {
    /// Build from ascending polynomial coefficients.
    pub fn from_polynomial(coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() < 4 {
            return Err(Error::NonBistable("degree below 3 cannot have three zeros".into()));
        }
        let c = coeffs.to_vec();
        let dc = derivative(&c);
        let lead = c.last().unwrap().abs().max(1e-300);
        let bound = 1.0 + c[..c.len() - 1].iter().map(|x| x.abs()).fold(0.0, f64::max) / lead;
        let g = |x: f64| horner(&c, x);
        let dg = |x: f64| horner(&dc, x);
        let brackets = sign_change_brackets(&g, -bound, bound, 20_000);
        let roots: Vec<f64> = brackets
            .iter()
            .map(|&(lo, hi)| safeguarded_newton(&g, &dg, lo, hi, 0.5 * (lo + hi)))
            .collect();
        let mut nl = Self::with_zeros(Repr::Poly(c.clone()), &roots)?;
        let (am, ap) = (nl.alpha_minus, nl.alpha_plus);
        let mut lo = taylor_shift(&c, am);
        let mut hi = taylor_shift(&c, ap);
        lo[0] = 0.0;
        hi[0] = 0.0;
        nl.shifted = Some((lo, hi));
        Ok(nl)
    }

    /// Build from closures for f, f', f'' with a search window for the zeros.
    pub fn from_fns(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        window: (f64, f64),
    ) -> Result<Self> {
        let f: ScalarFn = Arc::new(f);
        let df: ScalarFn = Arc::new(df);
        let d2f: ScalarFn = Arc::new(d2f);
        let brackets = sign_change_brackets(&|x| f(x), window.0, window.1, 20_000);
        let roots: Vec<f64> = brackets
            .iter()
            .map(|&(lo, hi)| safeguarded_newton(&|x| f(x), &|x| df(x), lo, hi, 0.5 * (lo + hi)))
            .collect();
        Self::with_zeros(Repr::Closure { f, df, d2f }, &roots)
    }

    fn with_zeros(repr: Repr, roots: &[f64]) -> Result<Self> {
        if roots.len() != 3 {
            return Err(Error::NonBistable(format!("found {} real zeros, need 3", roots.len())));
        }
        let mut nl = BistableNonlinearity {
            repr,
            alpha_minus: roots[0],
            a: roots[1],
            alpha_plus: roots[2],
            mu: 0.0,
            shifted: None,
        };
        nl.mu = nl.df(nl.a);
        if !(nl.df(nl.alpha_minus) < 0.0 && nl.df(nl.alpha_plus) < 0.0 && nl.mu > 0.0) {
            return Err(Error::NonBistable("derivative signs at the zeros are not (-, +, -)".into()));
        }
        Ok(nl)
    }

    /// Multiply f by a positive constant.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        match &self.repr {
            Repr::Poly(c) => Self::from_polynomial(&c.iter().map(|x| x * k).collect::<Vec<_>>()),
            Repr::Closure { f, df, d2f } => {
                let (f, df, d2f) = (f.clone(), df.clone(), d2f.clone());
                let w = self.alpha_plus - self.alpha_minus;
                Self::from_fns(
                    move |u| k * f(u),
                    move |u| k * df(u),
                    move |u| k * d2f(u),
                    (self.alpha_minus - w, self.alpha_plus + w),
                )
            }
        }
    }

    /// Ascending polynomial coefficients, if f is a polynomial.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Poly(c) => Some(c),
            Repr::Closure { .. } => None,
        }
    }

    /// Positive factor k when f(u) = k u (1 - u^2), the case with a closed-form flow.
    pub fn odd_cubic_factor(&self) -> Option<f64> {
        let c = self.coefficients()?;
        if c.len() == 4 && c[0] == 0.0 && c[2] == 0.0 && c[1] > 0.0 && c[3] == -c[1] {
            Some(c[1])
        } else {
            None
        }
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::Poly(c) => horner(c, u),
            Repr::Closure { f, .. } => f(u),
        }
    }

    #[inline]
    pub fn df(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::Poly(c) => {
                let mut acc = 0.0;
                for k in (1..c.len()).rev() {
                    acc = acc * u + k as f64 * c[k];
                }
                acc
            }
            Repr::Closure { df, .. } => df(u),
        }
    }

    #[inline]
    pub fn d2f(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::Poly(c) => {
                let mut acc = 0.0;
                for k in (2..c.len()).rev() {
                    acc = acc * u + (k * (k - 1)) as f64 * c[k];
                }
                acc
            }
            Repr::Closure { d2f, .. } => d2f(u),
        }
    }

    /// `min(a - alpha_minus, alpha_plus - a)`.
    pub fn half_gap(&self) -> f64 {
        (self.a - self.alpha_minus).min(self.alpha_plus - self.a)
    }

    /// `-int_{x0}^{x0+t} f` from Taylor coefficients of f about x0.
    fn neg_integral_shifted(b: &[f64], t: f64) -> f64 {
        let mut acc = 0.0;
        for k in (1..b.len()).rev() {
            acc = acc * t + b[k] / (k + 1) as f64;
        }
        -acc * t * t
    }

    /// W(s) - W(z0) for a zero z0 of f, free of cancellation near z0.
    fn gap_from(&self, s: f64, upper: bool) -> f64 {
        let z0 = if upper { self.alpha_plus } else { self.alpha_minus };
        if let Some((lo, hi)) = &self.shifted {
            let b = if upper { hi } else { lo };
            return Self::neg_integral_shifted(b, s - z0);
        }
        -quad::quad(|r| self.f(r), z0, s)
    }

    /// `W(s) - W(alpha_minus)`, computed from the nearer stable zero (this
    /// uses the balance condition on the upper half).
    pub fn potential_gap(&self, s: f64) -> f64 {
        if s <= self.a {
            self.gap_from(s, false)
        } else {
            self.gap_from(s, true) + self.balance_gap()
        }
    }

    /// `W(alpha_plus) - W(alpha_minus)`; zero for a balanced f.
    fn balance_gap(&self) -> f64 {
        -self.balance_residual()
    }

    /// `int_{alpha_minus}^{alpha_plus} f(u) du`.
    pub fn balance_residual(&self) -> f64 {
        match &self.repr {
            Repr::Poly(_) => {
                let (lo, _) = self.shifted.as_ref().expect("shifted coefficients");
                -Self::neg_integral_shifted(lo, self.alpha_plus - self.alpha_minus)
            }
            Repr::Closure { .. } => {
                quad::quad(|r| self.f(r), self.alpha_minus, self.a) + quad::quad(|r| self.f(r), self.a, self.alpha_plus)
            }
        }
    }

    /// Largest |delta| keeping three sign-alternating zeros, times 0.9.
    pub fn delta0(&self) -> f64 {
        0.9 * self.delta_limit(1.0).min(self.delta_limit(-1.0))
    }

    fn delta_limit(&self, sign: f64) -> f64 {
        let w = self.alpha_plus - self.alpha_minus;
        let (lo_x, hi_x) = (self.alpha_minus - w, self.alpha_plus + w);
        let count = |d: f64| sign_change_brackets(&|x| self.f(x) + d, lo_x, hi_x, 4000).len();
        let mut hi = w.max(1.0);
        while count(sign * hi) == 3 {
            hi *= 2.0;
            if hi > 1e12 {
                return hi;
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if count(sign * mid) == 3 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// W(s) = -int_a^s f(r) dr.
pub fn potential_w(nl: &BistableNonlinearity, s: f64) -> f64 {
    match nl.coefficients() {
        Some(c) => {
            let anti = |x: f64| {
                let mut acc = 0.0;
                for k in (0..c.len()).rev() {
                    acc = acc * x + c[k] / (k + 1) as f64;
                }
                acc * x
            };
            -(anti(s) - anti(nl.a))
        }
        None => -quad::quad(|r| nl.f(r), nl.a, s),
    }
}

/// `int_{alpha_minus}^{alpha_plus} f`.
pub fn balance_residual(nl: &BistableNonlinearity) -> f64 {
    nl.balance_residual()
}

/// f_delta = f + delta with its three zeros and slope at the middle zero.
#[derive(Clone, Debug)]
pub struct PerturbedNonlinearity {
    pub base: BistableNonlinearity,
    pub delta: f64,
    pub alpha_minus_d: f64,
    pub a_d: f64,
    pub alpha_plus_d: f64,
    pub mu_d: f64,
}

impl PerturbedNonlinearity {
    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        self.base.f(u) + self.delta
    }
    #[inline]
    pub fn df(&self, u: f64) -> f64 {
        self.base.df(u)
    }
    #[inline]
    pub fn d2f(&self, u: f64) -> f64 {
        self.base.d2f(u)
    }
    pub fn zeros(&self) -> [f64; 3] {
        [self.alpha_minus_d, self.a_d, self.alpha_plus_d]
    }
}

/// Offset the nonlinearity by a constant.
pub fn perturb(base: &BistableNonlinearity, delta: f64) -> Result<PerturbedNonlinearity> {
    if delta == 0.0 {
        return Ok(PerturbedNonlinearity {
            base: base.clone(),
            delta,
            alpha_minus_d: base.alpha_minus,
            a_d: base.a,
            alpha_plus_d: base.alpha_plus,
            mu_d: base.mu,
        });
    }
    let w = base.alpha_plus - base.alpha_minus;
    let g = |x: f64| base.f(x) + delta;
    let dg = |x: f64| base.df(x);
    let brackets = sign_change_brackets(&g, base.alpha_minus - w, base.alpha_plus + w, 8000);
    if brackets.len() != 3 || delta.abs() >= base.delta0() {
        return Err(Error::NonBistable(format!(
            "f + {delta} has {} sign changes (delta0 = {})",
            brackets.len(),
            base.delta0()
        )));
    }
    let seeds = [base.alpha_minus, base.a, base.alpha_plus];
    let mut z = [0.0; 3];
    for k in 0..3 {
        let (lo, hi) = brackets[k];
        z[k] = safeguarded_newton(&g, &dg, lo, hi, seeds[k]);
    }
    let p = PerturbedNonlinearity {
        base: base.clone(),
        delta,
        alpha_minus_d: z[0],
        a_d: z[1],
        alpha_plus_d: z[2],
        mu_d: base.df(z[1]),
    };
    if !(p.df(z[0]) < 0.0 && p.mu_d > 0.0 && p.df(z[2]) < 0.0) {
        return Err(Error::NonBistable("derivative signs lost under the offset".into()));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_zeros_and_slope() {
        let nl = make_cubic();
        assert_eq!((nl.alpha_minus, nl.a, nl.alpha_plus), (-1.0, 0.0, 1.0));
        assert_eq!(nl.mu, 1.0);
        assert_eq!(nl.f(0.5), 0.375);
        assert_eq!(nl.df(1.0), -2.0);
        assert_eq!(nl.d2f(1.0), -6.0);
        assert_eq!(nl.odd_cubic_factor(), Some(1.0));
    }

    #[test]
    fn potential_values() {
        let nl = make_cubic();
        assert_eq!(potential_w(&nl, 0.0), 0.0);
        assert!((potential_w(&nl, 1.0) + 0.25).abs() < 1e-15);
        assert!((potential_w(&nl, -1.0) + 0.25).abs() < 1e-15);
        for i in 0..=200 {
            let s = -1.0 + i as f64 / 100.0;
            let exact = (s * s - 1.0).powi(2) / 4.0;
            assert!((nl.potential_gap(s) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_has_relative_accuracy_near_zeros() {
        let nl = make_cubic();
        let s: f64 = 1.0 - 1e-9;
        let t = 1.0 - s;
        let exact = (t * (2.0 - t)).powi(2) / 4.0;
        assert!((nl.potential_gap(s) / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn balance() {
        let nl = make_cubic();
        assert!(balance_residual(&nl).abs() < 1e-15);
        let p = perturb(&nl, 0.1).unwrap();
        let shifted = BistableNonlinearity::from_polynomial(&[0.1, 1.0, 0.0, -1.0]).unwrap();
        let r = balance_residual(&shifted);
        let oracle = quad::quad(|u| p.f(u), p.alpha_minus_d, p.alpha_plus_d);
        assert!(r.abs() > 1e-3);
        assert!((r - oracle).abs() < 1e-12);
    }

    #[test]
    fn perturbed_zeros() {
        let nl = make_cubic();
        let p = perturb(&nl, 0.0).unwrap();
        assert_eq!(p.zeros(), [-1.0, 0.0, 1.0]);
        let p = perturb(&nl, 0.01).unwrap();
        assert!((p.a_d - p.a_d.powi(3) + 0.01).abs() < 1e-15);
        assert!(p.a_d < -0.0100 && p.a_d > -0.0101);
        assert!(matches!(perturb(&nl, 10.0), Err(Error::NonBistable(_))));
    }

    #[test]
    fn delta0_cubic() {
        let nl = make_cubic();
        let exact = 0.9 * 2.0 / (3.0 * 3f64.sqrt());
        assert!((nl.delta0() - exact).abs() < 1e-6);
    }

    #[test]
    fn linear_rate_of_zero_shift() {
        let nl = make_cubic();
        for k in 0..=6 {
            let d = 1e-2 * 0.5f64.powi(k);
            let r1 = (perturb(&nl, d).unwrap().a_d - nl.a).abs();
            let r2 = (perturb(&nl, d / 2.0).unwrap().a_d - nl.a).abs();
            let ratio = r1 / r2;
            assert!((1.8..=2.2).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn sign_pattern_midpoints() {
        let nl = make_cubic();
        for &d in &[-0.3, -0.05, 0.0, 0.05, 0.3] {
            let p = perturb(&nl, d).unwrap();
            let [am, a, ap] = p.zeros();
            assert!(p.f(am - 0.5) > 0.0);
            assert!(p.f(0.5 * (am + a)) < 0.0);
            assert!(p.f(0.5 * (a + ap)) > 0.0);
            assert!(p.f(ap + 0.5) < 0.0);
        }
    }

    #[test]
    fn closure_nonlinearity_matches_polynomial() {
        let nl = BistableNonlinearity::from_fns(|u| u - u * u * u, |u| 1.0 - 3.0 * u * u, |u| -6.0 * u, (-2.0, 2.0)).unwrap();
        assert!((nl.alpha_plus - 1.0).abs() < 1e-13);
        assert!((nl.potential_gap(0.3) - (0.09f64 - 1.0).powi(2) / 4.0).abs() < 1e-13);
        assert!(balance_residual(&nl).abs() < 1e-13);
    }
}
