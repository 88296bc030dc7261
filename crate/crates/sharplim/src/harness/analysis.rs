use crate::error::{Error, Result};
use crate::grid::Field;
use crate::nonlinearity::BistableNonlinearity;

/// Least squares on `(ln x, ln y)`: `(slope, intercept, r²)`.
pub fn fit_power(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} points, need at least 3", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::DegenerateFit("non-positive or non-finite point".into()));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy <= 1e-300 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, intercept, r2))
}

/// Snapshot times: geometric growth from `t_gen/100` with gaps capped at
/// `t_gen/20` up to `3 t_gen`, then `n_uniform` equispaced times up to `t_end`,
/// merged with `extra`.
pub fn snapshot_times(t_gen: f64, t_end: f64, n_uniform: usize, extra: &[f64]) -> Vec<f64> {
    let mut ts = vec![0.0];
    let stop = (3.0 * t_gen).min(t_end);
    let mut t = t_gen / 100.0;
    while t < stop {
        ts.push(t);
        t += (0.1 * t).min(t_gen / 20.0);
    }
    ts.push(stop);
    for k in 1..=n_uniform {
        ts.push((stop + (t_end - stop) * k as f64 / n_uniform as f64).min(t_end));
    }
    ts.extend(extra.iter().copied().filter(|&x| x >= 0.0 && x <= t_end));
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end);
    ts
}

/// Ten equispaced times in `[2 t_gen, T]`.
pub fn hausdorff_times(t_gen: f64, t_end: f64) -> Vec<f64> {
    let t0 = (2.0 * t_gen).min(t_end);
    (0..10).map(|k| (t0 + (t_end - t0) * k as f64 / 9.0).min(t_end)).collect()
}

/// The three-band classification at one snapshot: values within
/// `[α₋ − η, α₊ + η]` everywhere, within η of α± wherever the signed
/// distance `dist` to Γ exceeds `±C ε`.
pub fn is_generated(u: &Field, dist: &Field, nl: &BistableNonlinearity, eta: f64, c_nbhd: f64, eps: f64) -> bool {
    let band = c_nbhd * eps;
    u.values.iter().zip(&dist.values).all(|(&x, &d)| {
        let inside_range = x >= nl.alpha_minus - eta && x <= nl.alpha_plus + eta;
        let upper = d < band || x >= nl.alpha_plus - eta;
        let lower = d > -band || x <= nl.alpha_minus + eta;
        inside_range && upper && lower
    })
}

/// Smallest snapshot time at which the classification holds.
pub fn measure_generation_time(
    traj: &[Field],
    dist: &Field,
    nl: &BistableNonlinearity,
    eta: f64,
    c_nbhd: f64,
    eps: f64,
) -> Result<f64> {
    traj.iter()
        .find(|u| is_generated(u, dist, nl, eta, c_nbhd, eps))
        .map(|u| u.time)
        .ok_or_else(|| Error::NeverGenerated(traj.last().map(|u| u.time).unwrap_or(0.0)))
}
