//! The function `k̄(t) = e^{C²πt}(1 + C∫₀ᵗ e^{−C²πs}/√s ds)` solving
//! `k̄(t) = 1 + C∫₀ᵗ k̄(s)/√(t−s) ds`, and a product-integration solver for
//! that Volterra equation.

use crate::quad;

/// `k̄(t)` with the integral taken in `s = σ²`, which removes the singularity.
pub fn kbar(t: f64, c: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let a = c * c * std::f64::consts::PI;
    let rt = t.sqrt();
    let (int, _) = quad::integrate(|s| 2.0 * (-a * s * s).exp(), 0.0, rt, 1e-15, 1e-14);
    (a * t).exp() * (1.0 + c * int)
}

/// `|k̄(t) − 1 − C∫₀ᵗ k̄(s)/√(t−s) ds|`, the integral in `s = t − σ²`.
pub fn kbar_residual(t: f64, c: f64) -> f64 {
    if c == 0.0 {
        return (kbar(t, c) - 1.0).abs();
    }
    let rt = t.sqrt();
    let (int, _) = quad::integrate(|s| 2.0 * kbar(t - s * s, c), 0.0, rt, 1e-13, 1e-13);
    (kbar(t, c) - 1.0 - c * int).abs()
}

/// Solves `k(t) = 1 + C∫₀ᵗ k(s)/√(t−s) ds` on `n` uniform steps of
/// `[0, t_end]` by product integration: k is piecewise linear and the
/// kernel is integrated exactly on each cell.
pub fn volterra_solve(c: f64, t_end: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = t_end / n as f64;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let mut k = vec![1.0; n + 1];
    for m in 1..=n {
        let tm = times[m];
        let mut acc = 0.0;
        let mut diag = 0.0;
        for j in 0..m {
            let (a, b) = (tm - times[j], tm - times[j + 1]);
            let (sa, sb) = (a.sqrt(), b.sqrt());
            let i0 = 2.0 * (sa - sb);
            // ∫ (s − t_j) (t_m − s)^{-1/2} ds over the cell, divided by h.
            let i1 = (2.0 * a * (sa - sb) - 2.0 / 3.0 * (a * sa - b * sb)) / h;
            acc += (i0 - i1) * k[j];
            if j + 1 < m {
                acc += i1 * k[j + 1];
            } else {
                diag = i1;
            }
        }
        k[m] = (1.0 + c * acc) / (1.0 - c * diag);
    }
    (times, k)
}
