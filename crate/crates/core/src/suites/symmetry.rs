//! Symmetry properties: 90° rotation, Galilean frame change, β mirror.

use alloc::vec::Vec;

use super::{field_scale, pair_orders, relative_diff, run, PropertyCase, Verdict};
use crate::dynamics::StepConfig;
use crate::field::Field;
use crate::gen::{build_state, frame_velocity, refined, Knobs};
use crate::grid::{Boundary, Grid};
use crate::state::State;
use crate::{Error, Result};

pub const ROTATION_TOL: f64 = 1e-12;
pub const MIRROR_TOL: f64 = 1e-12;
pub const GALILEAN_MIN_ORDER: f64 = 1.8;
pub const GALILEAN_LEVELS: usize = 3;

/// Rotates a state 90° clockwise about the domain center.
///
/// With R(x, y) = (L − y, x): η' = η∘R, u' = v∘R, v' = −u∘R, where the
/// staggered positions map onto each other exactly.
pub fn rot90_state(s: &State, grid: &Grid) -> Result<State> {
    let n = grid.nx();
    if grid.ny() != n || grid.dx() != grid.dy() || grid.boundary() == Boundary::ChannelPeriodicX {
        return Err(Error::Unsupported("rotation needs a square, isotropic, non-channel grid".into()));
    }
    s.check_shapes(grid)?;
    let xf = grid.x_faces();
    let rot_c = |c: &Field| Field::from_fn(n, n, |i, j| c[(n - 1 - j, i)]);
    let (ux, uy) = grid.u_shape();
    let (vx, vy) = grid.v_shape();
    Ok(State {
        u: Field::from_fn(ux, uy, |i, j| s.v[(n - 1 - j, i)]),
        v: Field::from_fn(vx, vy, |i, j| -s.u[((n - j) % xf, i)]),
        eta: rot_c(&s.eta),
        tracer: s.tracer.as_ref().map(rot_c),
        time: s.time,
    })
}

pub fn rot90_inverse(s: &State, grid: &Grid) -> Result<State> {
    rot90_state(&rot90_state(&rot90_state(s, grid)?, grid)?, grid)
}

/// Mirrors a state in x: η' = η(−x), u' = −u(−x), v' = v(−x).
///
/// On the f = βy plane with f0 = 0 this maps solutions for β onto
/// solutions for −β.
pub fn mirror_x_state(s: &State, grid: &Grid) -> State {
    let nx = grid.nx();
    let xf = grid.x_faces();
    let mir_c = |c: &Field| Field::from_fn(c.nx(), c.ny(), |i, j| c[(nx - 1 - i, j)]);
    State {
        u: Field::from_fn(s.u.nx(), s.u.ny(), |i, j| -s.u[((nx - i) % xf, j)]),
        v: mir_c(&s.v),
        eta: mir_c(&s.eta),
        tracer: s.tracer.as_ref().map(mir_c),
        time: s.time,
    }
}

pub fn prop_rotation90(case: &PropertyCase) -> Verdict {
    let g = &case.grid;
    let p = &case.params;
    let mut v = Verdict::new();
    if p.beta != 0.0 {
        v.fail("precondition: rotation needs β = 0");
        return v;
    }
    let body = || -> Result<(f64, bool)> {
        let r = rot90_state(&case.initial, g)?;
        let period_ok = rot90_state(&rot90_inverse(&r, g)?, g)?.bit_eq(&r);
        let direct = run(&case.initial, g, p, &case.config)?;
        let rotated = rot90_inverse(&run(&r, g, p, &case.config)?, g)?;
        Ok((relative_diff(&rotated, &direct), period_ok))
    };
    match body() {
        Ok((d, period_ok)) => {
            v.at_most("rotation_rel_diff", d, ROTATION_TOL);
            v.at_most("rot90_period_defect", if period_ok { 0.0 } else { 1.0 }, 0.0);
        }
        Err(e) => return Verdict::from_error(&e),
    }
    v
}

pub fn prop_beta_mirror(case: &PropertyCase) -> Verdict {
    let g = &case.grid;
    let p = &case.params;
    let mut v = Verdict::new();
    if p.f0 != 0.0 || g.boundary() != Boundary::ClosedBasin {
        v.fail("precondition: β-mirror needs f0 = 0 in a closed basin");
        return v;
    }
    let mirrored = mirror_x_state(&case.initial, g);
    let involution_ok = mirror_x_state(&mirrored, g).bit_eq(&case.initial);
    let neg = crate::params::PhysParams { beta: -p.beta, ..*p };
    let body = || -> Result<f64> {
        let direct = run(&case.initial, g, p, &case.config)?;
        let other = mirror_x_state(&run(&mirrored, g, &neg, &case.config)?, g);
        Ok(relative_diff(&other, &direct))
    };
    match body() {
        Ok(d) => {
            v.at_most("mirror_rel_diff", d, MIRROR_TOL);
            v.at_most("mirror_involution_defect", if involution_ok { 0.0 } else { 1.0 }, 0.0);
        }
        Err(e) => return Verdict::from_error(&e),
    }
    v
}

/// Shifts every field by (sx, sy) cells: out(i, j) = in(i + sx, j + sy).
fn shift_periodic(s: &State, sx: i64, sy: i64) -> State {
    let sh = |f: &Field| {
        let (nx, ny) = (f.nx() as i64, f.ny() as i64);
        Field::from_fn(f.nx(), f.ny(), |i, j| {
            f[((i as i64 + sx).rem_euclid(nx) as usize, (j as i64 + sy).rem_euclid(ny) as usize)]
        })
    };
    State { u: sh(&s.u), v: sh(&s.v), eta: sh(&s.eta), tracer: s.tracer.as_ref().map(sh), time: s.time }
}

/// Galilean discrepancy at one refinement level.
fn galilean_error(case: &PropertyCase, level: usize) -> Result<f64> {
    let Knobs::Galilean { shift_x, shift_y, every } = case.recipe.knobs else {
        return Err(Error::InvalidParams("missing frame knobs".into()));
    };
    let scale = 1usize << level;
    let recipe = refined(&case.recipe, scale);
    let grid = recipe.grid()?;
    let (state, _) = build_state(&recipe, &grid)?;
    let mut config = StepConfig::new(case.config.dt / scale as f64, case.config.n_steps * scale);
    config.mutation = case.config.mutation;
    let (uf, vf) = frame_velocity(&case.recipe.knobs, &grid, config.dt);
    let mut moving = state.clone();
    moving.u.as_mut_slice().iter_mut().for_each(|u| *u += uf);
    moving.v.as_mut_slice().iter_mut().for_each(|v| *v += vf);

    let rest = run(&state, &grid, &case.params, &config)?;
    let mut fly = run(&moving, &grid, &case.params, &config)?;
    fly.u.as_mut_slice().iter_mut().for_each(|u| *u -= uf);
    fly.v.as_mut_slice().iter_mut().for_each(|v| *v -= vf);
    let hops = (config.n_steps / every) as i64;
    let back = shift_periodic(&fly, shift_x * hops, shift_y * hops);
    Ok(back.max_abs_diff(&rest) / field_scale(&rest).max(f64::MIN_POSITIVE))
}

/// Frame change by an integer number of cells every `every` steps. The
/// discrepancy is a discretization error, so it must converge at second
/// order under simultaneous (dx, dt) halving.
pub fn prop_galilean(case: &PropertyCase) -> Verdict {
    let mut v = Verdict::new();
    let p = &case.params;
    if !p.nonlinear || p.f0 != 0.0 || p.beta != 0.0 || case.grid.boundary() != Boundary::PeriodicXY {
        v.fail("precondition: nonlinear, non-rotating, doubly periodic");
        return v;
    }
    let errors: Result<Vec<f64>> = (0..GALILEAN_LEVELS).map(|l| galilean_error(case, l)).collect();
    let errors = match errors {
        Ok(e) => e,
        Err(e) => return Verdict::from_error(&e),
    };
    for (l, e) in errors.iter().enumerate() {
        v.info(&alloc::format!("discrepancy_level{l}"), *e);
    }
    if errors.iter().all(|&e| e == 0.0) {
        // Zero frame speed: the runs coincide.
        v.at_most("discrepancy_level0", 0.0, 0.0);
        return v;
    }
    let orders = pair_orders(&errors);
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    v.at_least("galilean_order", min, GALILEAN_MIN_ORDER);
    v
}
