//! One-dimensional quadrature: adaptive Gauss-Kronrod (7/15) and fixed
//! Gauss-Legendre rules.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Gauss-Legendre 8-point nodes and weights on [-1, 1].
pub const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
pub const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Returns (Kronrod value, error estimate, integral of |f|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let (fl, fr) = (f(c - dx), f(c + dx));
        let s = fl + fr;
        kron += WGK[j] * s;
        abs += WGK[j] * (fl.abs() + fr.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs(), (abs * h).abs())
}

const MAX_INTERVALS: usize = 20_000;

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Returns the integral estimate and the accumulated error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let mut stack = vec![(a, b, 0usize)];
    let (whole, _, _) = gk15(&f, a, b);
    let scale = whole.abs();
    let mut total = 0.0;
    let mut err = 0.0;
    let mut visited = 0usize;
    while let Some((lo, hi, depth)) = stack.pop() {
        visited += 1;
        let (v, e, resabs) = gk15(&f, lo, hi);
        let local_tol = (abs_tol.max(rel_tol * scale)) * ((hi - lo) / (b - a)).abs();
        // Below the round-off floor further bisection cannot help.
        let roundoff = 50.0 * f64::EPSILON * resabs;
        if e <= local_tol
            || e <= roundoff
            || depth >= 48
            || visited >= MAX_INTERVALS
            || (hi - lo).abs() < 1e-14 * (b - a).abs()
        {
            total += v;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    (total, err)
}

/// Adaptive integral with default tolerances, value only.
pub fn quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    integrate(f, a, b, 1e-15, 1e-13).0
}

/// 8-point Gauss-Legendre rule on `[a, b]`.
pub fn gl8<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..8 {
        s += GL8_W[k] * f(c + h * GL8_X[k]);
    }
    s * h
}

/// Cumulative integral of uniformly sampled data with the fourth-order
/// interior rule `h/24 (-f[i-1] + 13 f[i] + 13 f[i+1] - f[i+2])`.
///
/// `out[0] = 0`, `out[i] = integral from x_0 to x_i`.
pub fn cumulative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * h * (values[i - 1] + values[i]);
        }
        return out;
    }
    for i in 0..n - 1 {
        let piece = if i == 0 {
            h / 24.0 * (9.0 * values[0] + 19.0 * values[1] - 5.0 * values[2] + values[3])
        } else if i == n - 2 {
            h / 24.0 * (9.0 * values[n - 1] + 19.0 * values[n - 2] - 5.0 * values[n - 3] + values[n - 4])
        } else {
            h / 24.0 * (-values[i - 1] + 13.0 * values[i] + 13.0 * values[i + 1] - values[i + 2])
        };
        out[i + 1] = out[i] + piece;
    }
    out
}

/// Composite Boole-type integral of uniformly sampled data (sum of the
/// cumulative fourth-order pieces).
pub fn uniform_integral(values: &[f64], h: f64) -> f64 {
    *cumulative(values, h).last().unwrap_or(&0.0)
}
