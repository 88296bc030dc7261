use std::thread;

use serde::Serialize;

use super::analysis::{fit_power, hausdorff_times, is_generated, snapshot_times};
use super::config::SweepConfig;
use super::export::SweepRecord;
use crate::ac_solver::{extract_interface, invariant_rectangle_check, layer_thickness, presets, AcStepper, RdParams, RdStepper};
use crate::comparison::{
    boundary_slope, calibrate_tol_res, cutoff_initial_data, gen_params, gen_subsuper, measure_cutoff, measure_m0, measure_m1,
    motion_subsuper, ordering_check, ordering_gap, residual_l, side_flow, tune_motion_params, CorrectorField, GenParams, Side,
};
use crate::corrector::{pressure_gamma, PerturbationG};
use crate::error::{Error, Result};
use crate::geometry::{InterfaceState, Polyline};
use crate::grid::{Field, Grid, Point};
use crate::nonlinearity::{make_cubic, BistableNonlinearity};
use crate::profile::{default_profile, surface_constant_c0};
use crate::sharp_interface::{
    cutoff_distance, hausdorff_states, radial_trajectory, tubular_width, ForcingSpec, LimitRdGrid, RadialTrajectory,
};

/// Sharp-interface reference for a scenario.
#[derive(Clone, Debug)]
pub enum Reference {
    /// Planar 1D front at `x0 + speed·t`, α₋ on the left.
    Planar { x0: f64, speed: f64 },
    /// Circle about `center` with α₋ inside.
    Radial { center: Point, traj: RadialTrajectory },
}

impl Reference {
    /// Unsigned distance function of Γ_t as an interface state.
    pub fn state(&self, t: f64) -> Result<InterfaceState> {
        match self {
            Reference::Planar { x0, speed } => Ok(InterfaceState::from_crossings(vec![x0 + speed * t], t)),
            Reference::Radial { center, traj } => {
                let r = traj.radius_at(t).ok_or(Error::NonPositiveRadius(t))?;
                Ok(InterfaceState::radial(*center, r, t))
            }
        }
    }

    /// Signed distance, positive on the α₊ side.
    pub fn signed_distance(&self, grid: Grid, t: f64) -> Result<Field> {
        let mut f = match self {
            Reference::Planar { x0, speed } => {
                let x = x0 + speed * t;
                Field::from_fn(grid, move |p| p[0] - x)
            }
            Reference::Radial { center, traj } => {
                let r = traj.radius_at(t).ok_or(Error::NonPositiveRadius(t))?;
                let c = *center;
                Field::from_fn(grid, move |p| (p[0] - c[0]).hypot(p[1] - c[1]) - r)
            }
        };
        f.time = t;
        Ok(f)
    }
}

/// Everything a scenario run needs.
#[derive(Clone, Debug)]
pub struct Setup {
    pub nl: BistableNonlinearity,
    pub c0: f64,
    pub pg: PerturbationG,
    pub rd: Option<RdParams>,
    pub grid: Grid,
    pub u0: Field,
    pub v0: Option<Field>,
    pub center: Point,
    pub dt: f64,
    pub reference: Reference,
}

pub fn scenario_nonlinearity(name: &str) -> Result<BistableNonlinearity> {
    if name == "pp-radial" {
        BistableNonlinearity::from_polynomial(&[0.0, -0.5, 1.5, -1.0])
    } else {
        Ok(make_cubic())
    }
}

pub fn setup(cfg: &SweepConfig, eps: f64) -> Result<Setup> {
    cfg.validate()?;
    let nl = scenario_nonlinearity(&cfg.scenario)?;
    let c0 = surface_constant_c0(&nl)?;
    let grid = cfg.grid_for(eps)?;
    let center = grid.center();
    let jump = nl.alpha_plus - nl.alpha_minus;
    let pg = match cfg.scenario.as_str() {
        "1d-forced" => PerturbationG::constant(cfg.g0.unwrap_or(0.5)),
        // c₀ g₀ (α₊ − α₋) = 1/R₀ keeps the radius stationary.
        "radial2d-forced" => PerturbationG::constant(cfg.g0.unwrap_or(1.0 / (cfg.r0 * c0 * jump))),
        _ => PerturbationG::constant(cfg.g0.unwrap_or(0.0)),
    };
    let rd = match cfg.scenario.as_str() {
        "fhn-radial" => Some(RdParams::fhn_default()),
        "pp-radial" => Some(RdParams::prey_predator_default()),
        _ => None,
    };
    let u0 = if grid.dim == 1 { presets::ramp_1d(grid, &nl) } else { presets::radial_2d(grid, &nl, center, cfg.r0, cfg.sigma0) };
    let v0 = rd.as_ref().map(|r| Field::constant(grid, if r.nonnegative { 0.5 } else { 0.0 }));
    let dt = grid.dt_limit() / rd.as_ref().map_or(1.0, |r| r.d.max(1.0));
    let reference = if grid.dim == 1 {
        let speed = pressure_gamma(&pg, &nl, c0, [0.0, 0.0], 0.0, None);
        Reference::Planar { x0: 0.5 * grid.lx, speed }
    } else {
        let forcing = match &rd {
            Some(r) => {
                // Constant-v estimate; the RD runs use the coupled limit solver instead.
                let v = v0.as_ref().map_or(0.0, |f| f.values[0]);
                ForcingSpec::constant(-c0 * r.big_f1(&nl, v))
            }
            None => ForcingSpec::from_g(&pg, &nl, c0),
        };
        let traj = radial_trajectory(center, cfg.r0, 2, &forcing, cfg.t_end, cfg.t_end / 2000.0)?;
        if let Some(te) = traj.extinction {
            return Err(Error::Config(format!("reference circle vanishes at t = {te} before T = {}", cfg.t_end)));
        }
        Reference::Radial { center, traj }
    };
    Ok(Setup { nl, c0, pg, rd, grid, u0, v0, center, dt, reference })
}

#[derive(Clone, Debug, Serialize)]
pub struct SnapshotRow {
    pub t: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub r_pde: f64,
    pub r_ref: f64,
    pub hausdorff: f64,
    pub v_err: f64,
    pub generated: bool,
}

impl SnapshotRow {
    pub const HEADER: [&'static str; 8] = ["t", "u_min", "u_max", "r_pde", "r_ref", "hausdorff", "v_err", "generated"];

    pub fn values(&self) -> Vec<f64> {
        vec![self.t, self.u_min, self.u_max, self.r_pde, self.r_ref, self.hausdorff, self.v_err, self.generated as u8 as f64]
    }
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub record: SweepRecord,
    pub rows: Vec<SnapshotRow>,
    /// Snapshot fields, kept for 1D runs only.
    pub fields: Vec<Field>,
}

enum Solver {
    Ac(AcStepper, Field),
    Rd(RdStepper, Field, Field, LimitRdGrid, RdParams),
}

/// Runs the PDE and its sharp-interface reference, collecting per-snapshot
/// metrics and the record for this ε.
pub fn run_scenario(cfg: &SweepConfig, eps: f64) -> Result<RunArtifacts> {
    let s = setup(cfg, eps)?;
    let nl = &s.nl;
    let t_gen = eps * eps * eps.ln().abs() / nl.mu;
    let htimes = hausdorff_times(t_gen, cfg.t_end);
    let times = snapshot_times(t_gen, cfg.t_end, cfg.snapshots, &htimes);
    let mut solver = match &s.rd {
        None => Solver::Ac(AcStepper::new(nl, &s.pg, eps, s.dt, &s.grid)?, s.u0.clone()),
        Some(rd) => {
            let v0 = s.v0.clone().expect("RD scenarios carry v0");
            let lim = LimitRdGrid::new(s.grid, s.center, cfg.r0, rd, nl, s.c0, v0.clone(), s.dt)?;
            Solver::Rd(RdStepper::new(nl, rd, eps, s.dt, &s.grid)?, s.u0.clone(), v0, lim, rd.clone())
        }
    };
    let mut rec = SweepRecord::empty(eps, s.grid.h);
    rec.t_gen_theory = t_gen;
    rec.hausdorff_max = 0.0;
    rec.radius_err_max = if s.grid.dim == 2 { 0.0 } else { f64::NAN };
    rec.drift = 0.0;
    let mut rect_ok = true;
    let mut rows = Vec::new();
    let mut fields = Vec::new();
    let mut first_pos: Option<f64> = None;
    let spacing = s.grid.h / 4.0;
    for &t in &times {
        let mut v_err = f64::NAN;
        let (u, lim_radius) = match &mut solver {
            Solver::Ac(st, u) => {
                st.advance_to(u, t)?;
                (&*u, None)
            }
            Solver::Rd(st, u, v, lim, rd) => {
                while u.time < t - 1e-14 {
                    let target = (u.time + st.dt).min(t);
                    st.advance_to(u, v, target)?;
                    rect_ok &= invariant_rectangle_check(u, v, rd);
                }
                lim.advance_to(t)?;
                v_err = v.values.iter().zip(&lim.v.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                (&*u, Some(lim.radius))
            }
        };
        let ref_state = match lim_radius {
            Some(r) => InterfaceState::radial(s.center, r, t),
            None => s.reference.state(t)?,
        };
        let dist = match lim_radius {
            Some(r) => {
                let c = s.center;
                Field::from_fn(s.grid, move |p| (p[0] - c[0]).hypot(p[1] - c[1]) - r)
            }
            None => s.reference.signed_distance(s.grid, t)?,
        };
        let generated = is_generated(u, &dist, nl, cfg.eta, cfg.c_nbhd, eps);
        if generated && rec.t_gen.is_nan() {
            rec.t_gen = t;
        }
        let (mut r_pde, mut r_ref, mut hd) = (f64::NAN, f64::NAN, f64::NAN);
        if let Ok(iface) = extract_interface(u, nl.a) {
            hd = hausdorff_states(&iface, &ref_state, spacing)?;
            let pos = if s.grid.dim == 2 {
                r_ref = ref_state.radius.unwrap_or(f64::NAN);
                iface.mean_radius(s.center).unwrap_or(f64::NAN)
            } else {
                r_ref = ref_state.crossings[0];
                iface.crossings.iter().copied().min_by(|a, b| (a - r_ref).abs().total_cmp(&(b - r_ref).abs())).unwrap_or(f64::NAN)
            };
            r_pde = pos;
            let p0 = *first_pos.get_or_insert(pos);
            rec.drift = rec.drift.max((pos - p0).abs());
        }
        if htimes.iter().any(|&x| (x - t).abs() <= 1e-12 * cfg.t_end) {
            rec.hausdorff_max = rec.hausdorff_max.max(hd);
            if s.grid.dim == 2 {
                rec.radius_err_max = rec.radius_err_max.max((r_pde - r_ref).abs());
            }
            if !v_err.is_nan() {
                rec.v_err = if rec.v_err.is_nan() { v_err } else { rec.v_err.max(v_err) };
            }
        }
        rows.push(SnapshotRow { t, u_min: u.min(), u_max: u.max(), r_pde, r_ref, hausdorff: hd, v_err, generated });
        if s.grid.dim == 1 {
            fields.push(u.clone());
        }
        if t == cfg.t_end {
            if let Ok(iface) = extract_interface(u, nl.a) {
                rec.thickness = layer_thickness(u, &iface, cfg.eta, nl);
            }
        }
    }
    if s.rd.is_some() {
        rec.rect_ok = if rect_ok { 1.0 } else { 0.0 };
    }
    Ok(RunArtifacts { record: rec, rows, fields })
}

/// Runs every ε of the configuration in parallel and fills the fitted slopes.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let results: Vec<Result<RunArtifacts>> = thread::scope(|sc| {
        let handles: Vec<_> = cfg.eps_list.iter().map(|&eps| sc.spawn(move || run_scenario(cfg, eps))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(Error::Config("worker panicked".into())))).collect()
    });
    let mut records: Vec<SweepRecord> = results.into_iter().map(|r| r.map(|a| a.record)).collect::<Result<_>>()?;
    let slope = |f: &dyn Fn(&SweepRecord) -> f64| -> f64 {
        let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.eps, f(r))).collect();
        fit_power(&pts).map(|x| x.0).unwrap_or(f64::NAN)
    };
    let ts = slope(&|r| r.thickness);
    let es = slope(&|r| if r.radius_err_max.is_nan() { r.hausdorff_max } else { r.radius_err_max });
    for r in records.iter_mut() {
        r.thickness_slope = ts;
        r.error_slope = es;
    }
    Ok(records)
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub phase: &'static str,
    pub t: f64,
    pub min_residual: f64,
    pub max_residual_lower: f64,
    pub ordering_ok: bool,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub eps: f64,
    pub c0_data: f64,
    pub c5: f64,
    pub c6: f64,
    pub k: f64,
    pub m1: f64,
    pub d0: f64,
    pub tol_res_gen: f64,
    pub tol_res_motion: f64,
    pub gen_error: Option<String>,
    pub gen_ordering_ok: bool,
    pub gen_residual_ok: bool,
    pub gen_doubled_c6_ok: bool,
    pub motion_ordering_ok: bool,
    pub motion_residual_ok: bool,
    pub rows: Vec<CompareRow>,
}

/// Min and max over the nodes where `residual_l` is evaluated.
fn interior_extrema(r: &Field) -> (f64, f64) {
    let g = r.grid;
    let mut ext = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..g.ny {
        for i in 0..g.nx {
            if g.is_interior(i, j, 2) {
                let v = r.values[g.idx(i, j)];
                ext = (ext.0.min(v), ext.1.max(v));
            }
        }
    }
    ext
}

fn subsuper_pair(flow: &crate::bistable_ode::BistableFlow, u0: &Field, gp: &GenParams, eps: f64, t: f64, dt: f64, side: Side) -> Result<(Field, Field)> {
    let (a, b) = if t + dt <= gp.t_gen { (t, t + dt) } else { (t - dt, t) };
    Ok((gen_subsuper(flow, u0, gp, eps, a, side)?, gen_subsuper(flow, u0, gp, eps, b, side)?))
}

/// Builds w^± over the generation window and u^± over `[0, T − tᵉ]`, and
/// checks ordering against the PDE and the sign of the discrete residual.
pub fn run_compare(cfg: &SweepConfig, eps: f64) -> Result<CompareReport> {
    let s = setup(cfg, eps)?;
    if s.rd.is_some() {
        return Err(Error::Config("compare covers the scalar Allen-Cahn scenarios".into()));
    }
    let nl = &s.nl;
    let prof = default_profile(nl)?;
    let (lo0, hi0) = if boundary_slope(&s.u0) > 1e-3 {
        let cut = measure_cutoff(&s.u0, nl.a)?;
        cutoff_initial_data(&s.u0, nl.a, &cut)
    } else {
        (s.u0.clone(), s.u0.clone())
    };
    let c0_data = cfg.c0.unwrap_or_else(|| s.u0.c0_bound().max(lo0.c0_bound()).max(hi0.c0_bound()));
    let gp = gen_params(nl, &s.pg, c0_data, eps, 16)?;
    let gp2 = GenParams { c6: 2.0 * gp.c6, ..gp.clone() };
    let (fl, fu) = (side_flow(nl, &gp, eps, Side::Lower)?, side_flow(nl, &gp, eps, Side::Upper)?);
    let mut st = AcStepper::new(nl, &s.pg, eps, s.dt, &s.grid)?;
    let mut u = s.u0.clone();
    let mut rows = Vec::new();
    let mut gen_error = None;
    let (mut gen_ord, mut gen_res, mut gen_dbl) = (true, true, true);
    let mut pde_pairs = Vec::new();
    let mut gen_rows = Vec::new();
    for k in 0..=10 {
        let t = gp.t_gen * k as f64 / 10.0;
        st.advance_to(&mut u, t)?;
        let mut next = u.clone();
        st.advance_to(&mut next, t + s.dt)?;
        pde_pairs.push((u.clone(), next));
        let eval = || -> Result<(Field, Field, Field, Field, Field, Field)> {
            let wl = gen_subsuper(&fl, &lo0, &gp, eps, t, Side::Lower)?;
            let wu = gen_subsuper(&fu, &hi0, &gp, eps, t, Side::Upper)?;
            let (a, b) = subsuper_pair(&fu, &hi0, &gp, eps, t, s.dt, Side::Upper)?;
            let (c, d) = subsuper_pair(&fl, &lo0, &gp, eps, t, s.dt, Side::Lower)?;
            let (e, f) = subsuper_pair(&fu, &hi0, &gp2, eps, t, s.dt, Side::Upper)?;
            Ok((wl, wu, residual_l(&a, &b, nl, &s.pg, eps)?, residual_l(&c, &d, nl, &s.pg, eps)?, residual_l(&e, &f, nl, &s.pg, eps)?, u.clone()))
        };
        match eval() {
            Ok((wl, wu, ru, rl, r2, uu)) => {
                let ok = ordering_check(&wl, &uu, &wu);
                gen_ord &= ok;
                gen_rows.push((t, interior_extrema(&ru).0, interior_extrema(&rl).1, interior_extrema(&r2).0, ok, ordering_gap(&wl, &uu, &wu)));
            }
            Err(e) => {
                gen_error.get_or_insert_with(|| format!("t = {t}: {e}"));
                gen_ord = false;
            }
        }
    }
    let tol_gen = calibrate_tol_res(&pde_pairs, nl, &s.pg, eps)?;
    for (t, rmin, rmax, r2, ok, gap) in gen_rows {
        gen_res &= rmin >= -tol_gen && rmax <= tol_gen;
        gen_dbl &= r2 >= -tol_gen;
        rows.push(CompareRow { phase: "generation", t, min_residual: rmin, max_residual_lower: rmax, ordering_ok: ok, gap });
    }
    if gen_error.is_some() {
        gen_res = false;
        gen_dbl = false;
    }

    // Motion phase.
    let t_end = cfg.t_end;
    let span = t_end - gp.t_gen;
    let d0 = match &s.reference {
        Reference::Planar { x0, speed } => {
            let x_end = x0 + speed * span;
            0.5 * x0.min(s.grid.lx - x0).min(x_end).min(s.grid.lx - x_end)
        }
        Reference::Radial { center, traj } => {
            let r_end = traj.radius_at(span).ok_or(Error::NonPositiveRadius(span))?;
            let r_max = traj.radii.iter().copied().fold(0.0, f64::max);
            let outer = Polyline::circle(*center, r_max, 256);
            let inner = Polyline::circle(*center, r_end, 256);
            tubular_width(&[outer], &s.grid).min(tubular_width(&[inner], &s.grid))
        }
    };
    let pre = tune_motion_params(nl, &prof, &s.pg, d0, span, eps, 0.0)?;
    let m0 = measure_m0(nl, &gp, &pre, eps)?;
    let dist0 = s.reference.signed_distance(s.grid, 0.0)?;
    let m1 = measure_m1(&s.u0, &dist0, nl.a, m0, eps);
    let mp = tune_motion_params(nl, &prof, &s.pg, d0, span, eps, m1)?;
    let corr = CorrectorField::build(&s.pg, &prof, eps)?;
    let build = |t: f64, side: Side| -> Result<Field> {
        let d = cutoff_distance(&s.reference.signed_distance(s.grid, t)?, d0);
        motion_subsuper(&prof, &corr, &d, &mp, eps, t, side)
    };
    let (mut mot_ord, mut mot_res) = (true, true);
    let mut motion_pairs = Vec::new();
    let mut mot_rows = Vec::new();
    for k in 0..=10 {
        let t = span * k as f64 / 10.0;
        st.advance_to(&mut u, t + gp.t_gen)?;
        let mut next = u.clone();
        st.advance_to(&mut next, u.time + s.dt)?;
        motion_pairs.push((u.clone(), next));
        let (lo, hi) = (build(t, Side::Lower)?, build(t, Side::Upper)?);
        let ok = ordering_check(&lo, &u, &hi);
        mot_ord &= ok;
        let (ta, tb) = if t + s.dt <= span { (t, t + s.dt) } else { (t - s.dt, t) };
        let ru = residual_l(&build(ta, Side::Upper)?, &build(tb, Side::Upper)?, nl, &s.pg, eps)?;
        let rl = residual_l(&build(ta, Side::Lower)?, &build(tb, Side::Lower)?, nl, &s.pg, eps)?;
        mot_rows.push((t, interior_extrema(&ru).0, interior_extrema(&rl).1, ok, ordering_gap(&lo, &u, &hi)));
    }
    let tol_mot = calibrate_tol_res(&motion_pairs, nl, &s.pg, eps)?;
    for (t, rmin, rmax, ok, gap) in mot_rows {
        mot_res &= rmin >= -tol_mot && rmax <= tol_mot;
        rows.push(CompareRow { phase: "motion", t, min_residual: rmin, max_residual_lower: rmax, ordering_ok: ok, gap });
    }
    Ok(CompareReport {
        eps,
        c0_data,
        c5: gp.c5,
        c6: gp.c6,
        k: mp.k,
        m1,
        d0,
        tol_res_gen: tol_gen,
        tol_res_motion: tol_mot,
        gen_error,
        gen_ordering_ok: gen_ord,
        gen_residual_ok: gen_res,
        gen_doubled_c6_ok: gen_dbl,
        motion_ordering_ok: mot_ord,
        motion_residual_ok: mot_res,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_d_generation_run() {
        let cfg = SweepConfig::preset("1d-generation").unwrap();
        let a = run_scenario(&cfg, 0.04).unwrap();
        let r = &a.record;
        assert!(r.t_gen >= 0.5 * r.t_gen_theory && r.t_gen <= 1.5 * r.t_gen_theory, "{} vs {}", r.t_gen, r.t_gen_theory);
        assert!(r.thickness / 0.04 > 2.0 && r.thickness / 0.04 < 8.0);
        assert!(r.drift < 0.04);
        assert_eq!(a.fields.len(), a.rows.len());
        // Determinism.
        let b = run_scenario(&cfg, 0.04).unwrap();
        assert_eq!(format!("{:?}", a.record), format!("{:?}", b.record));
    }

    #[test]
    fn forced_front_moves_at_gamma() {
        let cfg = SweepConfig::preset("1d-forced").unwrap();
        let a = run_scenario(&cfg, 0.02).unwrap();
        // γ = c₀·2g₀ with g₀ = 0.5 moves the front by ≈ 0.053 over T.
        assert!(a.record.hausdorff_max < 0.02, "{}", a.record.hausdorff_max);
        assert!(a.record.drift > 0.03);
    }

    #[test]
    fn compare_runs_and_reports_box_exit() {
        let cfg = SweepConfig::preset("1d-generation").unwrap();
        let rep = run_compare(&cfg, 0.04).unwrap();
        assert!(rep.gen_error.is_some());
        assert!(rep.motion_ordering_ok);
        assert!(rep.rows.iter().filter(|r| r.phase == "motion").count() == 11);
    }
}
