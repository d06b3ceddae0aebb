//! Conservation and restart invariants.

use super::{run, PropertyCase, Verdict};
use crate::checkpoint;
use crate::diagnostics::{compute_diagnostics, relative_vorticity};
use crate::dynamics::StepConfig;
use crate::grid::{Boundary, Grid};
use crate::params::PhysParams;
use crate::state::State;
use crate::Result;

pub const MASS_TOL: f64 = 1e-12;
pub const LINEAR_ENERGY_TOL: f64 = 1e-6;
pub const CIRCULATION_TOL: f64 = 1e-12;
/// Required reduction of the dt-attributable energy drift per dt halving
/// in nonlinear mode.
pub const NONLINEAR_ENERGY_RATIO: f64 = 8.0;
/// dt increments at or below this relative level count as converged.
pub const NONLINEAR_ENERGY_FLOOR: f64 = 1e-12;

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Scale circulation drift is measured against: Σ(|ζ| + |f|) over corners
/// times the cell area, at the start or end of the run, but at least the
/// peak speed times the domain perimeter.
fn circulation_scale(states: [&State; 2], grid: &Grid, params: &PhysParams) -> Result<f64> {
    let mut scale: f64 = 0.0;
    for s in states {
        let zeta = relative_vorticity(s, grid)?;
        let (cx, cy) = zeta.shape();
        let mut acc = 0.0;
        for i in 0..cx {
            for j in 0..cy {
                acc += zeta[(i, j)].abs() + params.coriolis_at(grid.y_face(j), grid).abs();
            }
        }
        scale = scale.max(acc * grid.cell_area()).max(s.max_speed() * 2.0 * (grid.lx() + grid.ly()));
    }
    Ok(scale)
}

/// Energy at the end of the case's run with dt divided by `split`.
fn final_energy(case: &PropertyCase, split: usize) -> Result<f64> {
    let mut cfg: StepConfig = case.config.clone();
    cfg.dt /= split as f64;
    cfg.n_steps *= split;
    let fin = run(&case.initial, &case.grid, &case.params, &cfg)?;
    Ok(compute_diagnostics(&fin, &case.grid, &case.params)?.energy)
}

pub fn prop_conservation(case: &PropertyCase) -> Verdict {
    let mut v = Verdict::new();
    let (g, p) = (&case.grid, &case.params);
    if p.r != 0.0 || case.config.forcing.is_some() {
        v.fail("precondition: no friction and no forcing");
        return v;
    }
    let body = |v: &mut Verdict| -> Result<()> {
        let d0 = compute_diagnostics(&case.initial, g, p)?;
        let fin = run(&case.initial, g, p, &case.config)?;
        let d1 = compute_diagnostics(&fin, g, p)?;
        let mass_scale = case.initial.eta.as_slice().iter().map(|e| e.abs()).sum::<f64>() * g.cell_area();
        v.at_most("mass_drift", ratio((d1.mass - d0.mass).abs(), mass_scale), MASS_TOL);
        let drift = ratio((d1.energy - d0.energy).abs(), d0.energy.abs());
        if p.nonlinear {
            // The advective momentum form conserves energy only up to the
            // spatial truncation error, which no dt refinement removes. The
            // time-stepping part of the drift is isolated by Richardson
            // increments: E(dt) − E(dt/2) must shrink ≥ 8× per halving.
            v.info("energy_drift", drift);
            let e_half = final_energy(case, 2)?;
            let e_quarter = final_energy(case, 4)?;
            let d1 = (d1.energy - e_half).abs() / d0.energy.abs();
            let d2 = (e_half - e_quarter).abs() / d0.energy.abs();
            v.info("energy_dt_increment", d1);
            v.info("energy_dt_increment_half", d2);
            let reduction = if d1 <= NONLINEAR_ENERGY_FLOOR { f64::INFINITY } else { d1 / d2 };
            v.at_least("energy_dt_reduction", reduction, NONLINEAR_ENERGY_RATIO);
        } else {
            v.at_most("energy_drift", drift, LINEAR_ENERGY_TOL);
        }
        if g.boundary() == Boundary::PeriodicXY {
            let scale = circulation_scale([&case.initial, &fin], g, p)?;
            v.at_most("circulation_drift", ratio((d1.circulation - d0.circulation).abs(), scale), CIRCULATION_TOL);
        }
        Ok(())
    };
    match body(&mut v) {
        Ok(()) => v,
        Err(e) => Verdict::from_error(&e),
    }
}

/// Steps per half of a restart check.
pub const RESTART_HALF_STEPS: usize = 100;

/// A 2N-step run must equal N steps, a checkpoint roundtrip, and N more
/// steps, bit for bit.
pub fn prop_restart(case: &PropertyCase) -> Verdict {
    let mut v = Verdict::new();
    let (g, p) = (&case.grid, &case.params);
    let n = case.config.n_steps.clamp(1, RESTART_HALF_STEPS);
    let body = |v: &mut Verdict| -> Result<()> {
        let mut cfg = case.config.clone();
        cfg.n_steps = 2 * n;
        let full = run(&case.initial, g, p, &cfg)?;
        cfg.n_steps = n;
        let half = run(&case.initial, g, p, &cfg)?;
        let bytes = checkpoint::serialize(&half, g, p)?;
        let (restored, g2, p2) = checkpoint::restore(&bytes)?;
        let roundtrip_ok = restored.bit_eq(&half) && g2 == *g && p2 == *p;
        v.at_most("checkpoint_roundtrip_defect", if roundtrip_ok { 0.0 } else { 1.0 }, 0.0);
        let resumed = run(&restored, &g2, &p2, &cfg)?;
        let d = if resumed.bit_eq(&full) { 0.0 } else { resumed.max_abs_diff(&full).max(f64::MIN_POSITIVE) };
        v.at_most("restart_max_abs_diff", d, 0.0);
        Ok(())
    };
    match body(&mut v) {
        Ok(()) => v,
        Err(e) => Verdict::from_error(&e),
    }
}
