//! Metamorphic relations between paired runs: β doubling, Gill
//! rescaling, tracer circuits.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{pair_orders, run, PropertyCase, Verdict};
use crate::dynamics::{advect_tracer_only, StepConfig};
use crate::field::Field;
use crate::gen::{build_state, refined, tracer_velocity, Feature, Knobs};
use crate::grid::{Boundary, Grid};
use crate::math;
use crate::params::PhysParams;
use crate::state::State;
use crate::waves::dispersion_rossby;
use crate::Result;

pub const DOUBLING_TOL: f64 = 0.05;
pub const GILL_LOOSE_TOL: f64 = 1e-13;
pub const TRACER_MIN_ORDER: f64 = 1.8;
pub const TRACER_LINF_TOL: f64 = 0.1;
pub const TRACER_LEVELS: usize = 3;

/// Σ η e^{−ikx} sin(πy/Ly): the complex amplitude of the gravest
/// cross-channel structure at zonal wavenumber k.
fn channel_amplitude(eta: &Field, k: f64, grid: &Grid) -> Complex64 {
    let ly = grid.ly();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..grid.nx() {
        let x = grid.x_center(i);
        let e = Complex64::new(math::cos(k * x), -math::sin(k * x));
        for j in 0..grid.ny() {
            acc += e * (eta[(i, j)] * math::sin(math::PI * grid.y_center(j) / ly));
        }
    }
    acc
}

/// Crest displacement [m] over a run, from the phase change of the
/// channel amplitude (negative means westward).
fn crest_displacement(a0: Complex64, a1: Complex64, k: f64) -> f64 {
    -(a1 * a0.conj()).arg() / k
}

pub fn prop_beta_doubling(case: &PropertyCase) -> Verdict {
    let (g, p) = (&case.grid, &case.params);
    let mut v = Verdict::new();
    let Some(&Feature::ChannelWave { jx, .. }) = case.recipe.features.first() else {
        v.fail("precondition: one channel wave");
        return v;
    };
    if g.boundary() != Boundary::ChannelPeriodicX || p.nonlinear || p.beta <= 0.0 {
        v.fail("precondition: linear β-plane channel");
        return v;
    }
    let k = 2.0 * math::PI * jx as f64 / g.lx();
    let body = |v: &mut Verdict| -> Result<()> {
        let a0 = channel_amplitude(&case.initial.eta, k, g);
        let one = run(&case.initial, g, p, &case.config)?;
        let doubled = PhysParams { beta: 2.0 * p.beta, ..*p };
        let two = run(&case.initial, g, &doubled, &case.config)?;
        let d1 = crest_displacement(a0, channel_amplitude(&one.eta, k, g), k);
        let d2 = crest_displacement(a0, channel_amplitude(&two.eta, k, g), k);
        v.info("displacement_beta", d1);
        v.info("displacement_2beta", d2);
        v.at_least("westward_displacement_cells", -d1 / g.dx(), 0.0);
        let ratio = d2 / d1;
        v.info("displacement_ratio", ratio);
        v.at_most("ratio_error", (ratio / 2.0 - 1.0).abs(), DOUBLING_TOL);
        let t = case.config.dt * case.config.n_steps as f64;
        let l = math::PI / g.ly();
        v.info("predicted_displacement_beta", dispersion_rossby(k, l, p)? * t / k);
        Ok(())
    };
    match body(&mut v) {
        Ok(()) => v,
        Err(e) => Verdict::from_error(&e),
    }
}

/// First (field, index) where two fields differ, with the difference.
fn first_difference(name: &str, a: &Field, b: &Field) -> Option<(alloc::string::String, f64)> {
    let ny = a.ny();
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .position(|(x, y)| x.to_bits() != y.to_bits())
        .map(|k| (format!("{name}[{}, {}]", k / ny, k % ny), a.as_slice()[k] - b.as_slice()[k]))
}

/// Runs the rescaled problem (α f0, α² g, α r, dt/α) from (u/α, v/α, η/α²)
/// and returns it with A's final state mapped the same way.
fn gill_pair(case: &PropertyCase, alpha: f64, base: &State) -> Result<(State, State)> {
    let p = &case.params;
    let q = PhysParams { f0: alpha * p.f0, g: alpha * alpha * p.g, r: alpha * p.r, ..*p };
    let scale = |s: &State| State {
        u: s.u.map(|x| x / alpha),
        v: s.v.map(|x| x / alpha),
        eta: s.eta.map(|x| x / (alpha * alpha)),
        tracer: None,
        time: 0.0,
    };
    let mut cfg = case.config.clone();
    cfg.dt /= alpha;
    let b = run(&scale(&case.initial), &case.grid, &q, &cfg)?;
    let mut b = b;
    b.time = 0.0;
    Ok((b, scale(base)))
}

pub fn prop_gill_scaling(case: &PropertyCase) -> Verdict {
    let (g, p) = (&case.grid, &case.params);
    let mut v = Verdict::new();
    if p.beta != 0.0 || p.nonlinear {
        v.fail("precondition: linear f-plane");
        return v;
    }
    let alpha = match case.recipe.knobs {
        Knobs::Gill { alpha } => alpha,
        _ => 2.0,
    };
    let body = |v: &mut Verdict| -> Result<()> {
        let a = run(&case.initial, g, p, &case.config)?;
        let (b, mapped) = gill_pair(case, alpha, &a)?;
        let diff = b.max_abs_diff(&mapped);
        v.at_most("rescaled_max_abs_diff", diff, 0.0);
        if diff != 0.0 {
            let first = first_difference("u", &b.u, &mapped.u)
                .or_else(|| first_difference("v", &b.v, &mapped.v))
                .or_else(|| first_difference("eta", &b.eta, &mapped.eta));
            if let Some((at, d)) = first {
                v.note = Some(format!("first difference at {at}: {d:e}"));
            }
        }
        let (b3, mapped3) = gill_pair(case, 3.0, &a)?;
        let scale = mapped3.u.max_abs().max(mapped3.v.max_abs()).max(mapped3.eta.max_abs());
        let d3 = b3.max_abs_diff(&mapped3);
        v.at_most("alpha3_rel_diff", if d3 == 0.0 { 0.0 } else { d3 / scale }, GILL_LOOSE_TOL);
        Ok(())
    };
    match body(&mut v) {
        Ok(()) => v,
        Err(e) => Verdict::from_error(&e),
    }
}

/// Tracer error norms (L2 RMS, L∞) after the circuit at one level,
/// relative to the blob amplitude.
fn tracer_errors(case: &PropertyCase, level: usize) -> Result<(f64, f64)> {
    let scale = 1usize << level;
    let recipe = refined(&case.recipe, scale);
    let grid = recipe.grid()?;
    let (mut state, _) = build_state(&recipe, &grid)?;
    let mut cfg = StepConfig::new(case.config.dt / scale as f64, case.config.n_steps * scale);
    cfg.mutation = case.config.mutation;
    let (u, w) = tracer_velocity(&recipe.knobs, &grid, &cfg);
    state.u = Field::filled(grid.u_shape().0, grid.u_shape().1, u);
    state.v = Field::filled(grid.v_shape().0, grid.v_shape().1, w);
    let c0 = state.tracer.clone().unwrap_or_else(|| Field::zeros(grid.nx(), grid.ny()));
    let fin = advect_tracer_only(&state, &grid, &cfg)?;
    let c1 = fin.tracer.unwrap_or_else(|| Field::zeros(grid.nx(), grid.ny()));
    let amp = c0.max_abs();
    let n = c0.as_slice().len() as f64;
    let ss: f64 = c1.as_slice().iter().zip(c0.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((math::sqrt(ss / n) / amp, c1.max_abs_diff(&c0) / amp))
}

pub fn prop_tracer_roundtrip(case: &PropertyCase) -> Verdict {
    let g = &case.grid;
    let mut v = Verdict::new();
    if g.boundary() != Boundary::PeriodicXY || !matches!(case.recipe.knobs, Knobs::Tracer { .. }) {
        v.fail("precondition: doubly periodic tracer circuit");
        return v;
    }
    let body = |v: &mut Verdict| -> Result<()> {
        let mut still = case.initial.clone();
        still.u = Field::zeros(still.u.nx(), still.u.ny());
        still.v = Field::zeros(still.v.nx(), still.v.ny());
        let rest = advect_tracer_only(&still, g, &case.config)?;
        let same = match (&rest.tracer, &still.tracer) {
            (Some(a), Some(b)) => a.bit_eq(b),
            _ => false,
        };
        v.at_most("zero_velocity_defect", if same { 0.0 } else { 1.0 }, 0.0);

        let mut l2 = Vec::new();
        let mut linf = 0.0;
        for level in 0..TRACER_LEVELS {
            let (a, b) = tracer_errors(case, level)?;
            v.info(&format!("l2_error_level{level}"), a);
            l2.push(a);
            linf = b;
        }
        let orders = pair_orders(&l2);
        let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
        if l2.iter().all(|&e| e == 0.0) {
            v.at_most("l2_error_level0", 0.0, 0.0);
        } else {
            v.at_least("l2_order", min, TRACER_MIN_ORDER);
        }
        v.at_most("finest_linf_error", linf, TRACER_LINF_TOL);
        Ok(())
    };
    match body(&mut v) {
        Ok(()) => v,
        Err(e) => Verdict::from_error(&e),
    }
}
