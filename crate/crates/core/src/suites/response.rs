//! Postconditions on the response of the model: maintenance of balanced
//! flows and eigenmodes, resonant forcing, westward energy drift.

use alloc::vec::Vec;

use num_complex::Complex64;

use super::{run, PropertyCase, Verdict};
use crate::balance::balance_eta;
use crate::diagnostics::{compute_diagnostics, energy_density};
use crate::dynamics::{integrate, StepConfig};
use crate::gen::Feature;
use crate::grid::{Boundary, Grid};
use crate::math;
use crate::oracle::discrete_dispersion_matrix_free;
use crate::params::PhysParams;
use crate::state::State;
use crate::waves::{poincare_wave_at_phase, WaveSpec};
use crate::{Error, Result};

pub const TRANSIENT_TOL: f64 = 1e-4;
pub const ETA_DRIFT_TOL: f64 = 1e-3;
pub const WAVE_AMPLITUDE_TOL: f64 = 1e-6;
pub const WAVE_FREQUENCY_TOL: f64 = 1e-4;
pub const WAVE_LEAKAGE_TOL: f64 = 1e-6;
pub const RESONANCE_MIN_POWER: f64 = 1.8;
pub const RESONANCE_MIN_RATIO: f64 = 10.0;
pub const DETUNING: f64 = 1.5;
pub const WESTWARD_MIN_CELLS: f64 = 2.0;
pub const CONTROL_MAX_CELLS: f64 = 0.5;

/// Samples kept per time series.
const SERIES_SAMPLES: usize = 100;

fn linear_energy(s: &State, grid: &Grid, params: &PhysParams) -> f64 {
    let lin = PhysParams { nonlinear: false, ..*params };
    energy_density(s, grid, &lin).sum() * grid.cell_area()
}

/// Energy of (state − geostrophic re-diagnosis of its own η) relative to
/// the total energy.
pub fn unbalanced_fraction(s: &State, grid: &Grid, params: &PhysParams) -> Result<f64> {
    let (u, v, eta) = balance_eta(&s.eta, grid, params)?;
    let mut d = s.clone();
    d.u.axpy(-1.0, &u);
    d.v.axpy(-1.0, &v);
    d.eta.axpy(-1.0, &eta);
    let total = linear_energy(s, grid, params);
    let un = linear_energy(&d, grid, params);
    Ok(if un == 0.0 { 0.0 } else { un / total })
}

fn rms_diff(a: &crate::field::Field, b: &crate::field::Field) -> f64 {
    let n = a.as_slice().len().max(1) as f64;
    let ss: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
    math::sqrt(ss / n)
}

/// Integrates `config` and calls `sample` every `stride` steps (and at the
/// end); the first error from `sample` aborts with that error.
fn sampled_run(
    state: &State,
    grid: &Grid,
    params: &PhysParams,
    config: &StepConfig,
    stride: usize,
    mut sample: impl FnMut(usize, &State) -> Result<()>,
) -> Result<State> {
    let stride = stride.max(1);
    let mut err: Option<Error> = None;
    let fin = integrate(state, grid, params, config, |n, s| {
        if err.is_none() && (n % stride == 0 || n == config.n_steps) {
            if let Err(e) = sample(n, s) {
                err = Some(e);
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(fin),
    }
}

pub fn prop_balance_maintenance(case: &PropertyCase) -> Verdict {
    let (g, p) = (&case.grid, &case.params);
    let mut v = Verdict::new();
    if p.f0 == 0.0 || p.beta != 0.0 || p.nonlinear {
        v.fail("precondition: linear f-plane");
        return v;
    }
    let eta0 = case.initial.eta.clone();
    let eta_scale = eta0.max_abs();
    let body = |v: &mut Verdict| -> Result<()> {
        let f0 = unbalanced_fraction(&case.initial, g, p)?;
        v.info("initial_transient_fraction", f0);
        let (mut times, mut fracs, mut drifts) = (Vec::new(), Vec::new(), Vec::new());
        times.push(0.0);
        fracs.push(f0);
        drifts.push(0.0);
        let stride = case.config.n_steps.div_ceil(SERIES_SAMPLES);
        sampled_run(&case.initial, g, p, &case.config, stride, |_, s| {
            times.push(s.time);
            fracs.push(unbalanced_fraction(s, g, p)?);
            drifts.push(rms_diff(&s.eta, &eta0));
            Ok(())
        })?;
        let max_frac = fracs.iter().copied().fold(0.0, f64::max);
        let max_drift = drifts.iter().copied().fold(0.0, f64::max);
        v.at_most("transient_fraction", max_frac, TRANSIENT_TOL);
        v.at_most("eta_rms_drift", if max_drift == 0.0 { 0.0 } else { max_drift / eta_scale }, ETA_DRIFT_TOL);
        v.series("transient_fraction", times.clone(), fracs);
        v.series("eta_rms_drift", times, drifts);
        Ok(())
    };
    match body(&mut v) {
        Ok(()) => v,
        Err(e) => Verdict::from_error(&e),
    }
}

/// Σ η e^{−i(kx + ly)} normalised so a unit-amplitude cosine gives 1.
fn demodulate(eta: &crate::field::Field, k: f64, l: f64, grid: &Grid) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..grid.nx() {
        let x = grid.x_center(i);
        for j in 0..grid.ny() {
            let th = k * x + l * grid.y_center(j);
            acc += eta[(i, j)] * Complex64::new(math::cos(th), -math::sin(th));
        }
    }
    acc * (2.0 / (grid.nx() * grid.ny()) as f64)
}

fn energy_inner(a: &State, b: &State, p: &PhysParams) -> f64 {
    let dot = |x: &crate::field::Field, y: &crate::field::Field| -> f64 {
        x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a * b).sum()
    };
    p.h * (dot(&a.u, &b.u) + dot(&a.v, &b.v)) + p.g * dot(&a.eta, &b.eta)
}

/// Energy fraction of `s` outside span{mode at phase 0, mode at phase π/2}.
fn leakage(s: &State, spec: &WaveSpec, grid: &Grid, p: &PhysParams) -> Result<f64> {
    let ec = poincare_wave_at_phase(spec, grid, p, 0.0)?;
    let es = poincare_wave_at_phase(spec, grid, p, 0.5 * math::PI)?;
    let (a11, a12, a22) = (energy_inner(&ec, &ec, p), energy_inner(&ec, &es, p), energy_inner(&es, &es, p));
    let (b1, b2) = (energy_inner(s, &ec, p), energy_inner(s, &es, p));
    let det = a11 * a22 - a12 * a12;
    let c1 = (b1 * a22 - b2 * a12) / det;
    let c2 = (a11 * b2 - a12 * b1) / det;
    let mut r = s.clone();
    r.u.axpy(-c1, &ec.u);
    r.u.axpy(-c2, &es.u);
    r.v.axpy(-c1, &ec.v);
    r.v.axpy(-c2, &es.v);
    r.eta.axpy(-c1, &ec.eta);
    r.eta.axpy(-c2, &es.eta);
    Ok(energy_inner(&r, &r, p) / energy_inner(s, s, p))
}

/// Slope of the least-squares line through (x, y).
fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn prop_wave_maintenance(case: &PropertyCase) -> Verdict {
    let (g, p) = (&case.grid, &case.params);
    let mut v = Verdict::new();
    let Some(&Feature::Wave { jx, jy, amplitude }) = case.recipe.features.first() else {
        v.fail("precondition: one Poincaré wave");
        return v;
    };
    if g.boundary() != Boundary::PeriodicXY || p.beta != 0.0 || p.nonlinear {
        v.fail("precondition: linear periodic f-plane");
        return v;
    }
    if amplitude == 0.0 {
        return match run(&case.initial, g, p, &case.config) {
            Ok(fin) => {
                let rest = fin.max_abs_diff(&State::rest(g));
                v.at_most("rest_max_abs", rest, 0.0);
                v
            }
            Err(e) => Verdict::from_error(&e),
        };
    }
    let spec = WaveSpec::on_lattice(jx, jy, amplitude, g, p);
    let body = |v: &mut Verdict| -> Result<()> {
        let omega = discrete_dispersion_matrix_free(g, p, &spec)?;
        v.info("oracle_frequency", omega);
        v.info("closed_form_frequency", spec.omega);
        let a0 = demodulate(&case.initial.eta, spec.k, spec.l, g);
        let (mut times, mut phases) = (alloc::vec![0.0], alloc::vec![0.0]);
        let mut last = a0;
        let mut unwrapped = 0.0;
        let fin = sampled_run(&case.initial, g, p, &case.config, 1, |_, s| {
            let a = demodulate(&s.eta, spec.k, spec.l, g);
            unwrapped += (a * last.conj()).arg();
            last = a;
            times.push(s.time);
            phases.push(unwrapped);
            Ok(())
        })?;
        let a1 = demodulate(&fin.eta, spec.k, spec.l, g);
        v.at_most("amplitude_change", (a1.norm() - a0.norm()).abs() / a0.norm(), WAVE_AMPLITUDE_TOL);
        let measured = -ls_slope(&times, &phases);
        v.info("measured_frequency", measured);
        v.at_most("frequency_error", (measured - omega).abs() / omega.abs(), WAVE_FREQUENCY_TOL);
        v.at_most("mode_leakage", leakage(&fin, &spec, g, p)?, WAVE_LEAKAGE_TOL);
        Ok(())
    };
    match body(&mut v) {
        Ok(()) => v,
        Err(e) => Verdict::from_error(&e),
    }
}

fn energy(s: &State, g: &Grid, p: &PhysParams) -> Result<f64> {
    Ok(compute_diagnostics(s, g, p)?.energy)
}

pub fn prop_resonance(case: &PropertyCase) -> Verdict {
    let (g, p) = (&case.grid, &case.params);
    let mut v = Verdict::new();
    let Some(forcing) = case.config.forcing else {
        v.fail("precondition: basin-mode forcing");
        return v;
    };
    if g.boundary() != Boundary::ClosedBasin || p.f0 != 0.0 || p.beta != 0.0 || p.nonlinear || p.r != 0.0 {
        v.fail("precondition: linear, frictionless, non-rotating closed basin");
        return v;
    }
    let periods = 20;
    let per = (case.config.n_steps / periods).max(1);
    let body = |v: &mut Verdict| -> Result<()> {
        let (mut t_res, mut e_res) = (Vec::new(), Vec::new());
        sampled_run(&case.initial, g, p, &case.config, per, |_, s| {
            t_res.push(s.time);
            e_res.push(energy(s, g, p)?);
            Ok(())
        })?;
        let mut detuned = case.config.clone();
        detuned.forcing = Some(crate::dynamics::Forcing { frequency: DETUNING * forcing.frequency, ..forcing });
        let (mut t_det, mut e_det) = (Vec::new(), Vec::new());
        sampled_run(&case.initial, g, p, &detuned, (per / 8).max(1), |_, s| {
            t_det.push(s.time);
            e_det.push(energy(s, g, p)?);
            Ok(())
        })?;
        let mut control = case.config.clone();
        control.forcing = Some(crate::dynamics::Forcing { amplitude_x: 0.0, amplitude_y: 0.0, ..forcing });
        control.n_steps = per;
        let rest = run(&case.initial, g, p, &control)?;
        v.at_most("zero_forcing_max_abs", rest.max_abs_diff(&State::rest(g)), 0.0);

        let e_final = *e_res.last().unwrap_or(&0.0);
        let positive: Vec<(f64, f64)> =
            t_res.iter().zip(&e_res).filter(|(_, &e)| e > 0.0).map(|(&t, &e)| (math::ln(t), math::ln(e))).collect();
        let power = if positive.len() >= 2 {
            let (x, y): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
            ls_slope(&x, &y)
        } else {
            f64::NAN
        };
        v.at_least("growth_power", power, RESONANCE_MIN_POWER);
        let det_max = e_det.iter().copied().fold(0.0, f64::max);
        v.at_least("resonant_detuned_ratio", e_final / det_max, RESONANCE_MIN_RATIO);
        v.series("resonant_energy", t_res, e_res);
        v.series("detuned_energy", t_det, e_det);
        Ok(())
    };
    match body(&mut v) {
        Ok(()) => v,
        Err(e) => Verdict::from_error(&e),
    }
}

/// x-centroid of the energy density.
pub fn energy_centroid_x(s: &State, grid: &Grid, params: &PhysParams) -> f64 {
    let e = energy_density(s, grid, params);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..grid.nx() {
        let x = grid.x_center(i);
        for j in 0..grid.ny() {
            num += x * e[(i, j)];
            den += e[(i, j)];
        }
    }
    num / den
}

pub fn prop_westward_intensity(case: &PropertyCase) -> Verdict {
    let (g, p) = (&case.grid, &case.params);
    let mut v = Verdict::new();
    if g.boundary() != Boundary::ClosedBasin || p.nonlinear || p.beta <= 0.0 {
        v.fail("precondition: linear β-plane basin");
        return v;
    }
    let body = |v: &mut Verdict| -> Result<()> {
        let x0 = energy_centroid_x(&case.initial, g, p);
        let fin = run(&case.initial, g, p, &case.config)?;
        let drift = energy_centroid_x(&fin, g, p) - x0;
        v.at_most("centroid_drift_cells", drift / g.dx(), -WESTWARD_MIN_CELLS);
        let flat = PhysParams { beta: 0.0, ..*p };
        let ctl = run(&case.initial, g, &flat, &case.config)?;
        let ctl_drift = energy_centroid_x(&ctl, g, &flat) - x0;
        v.at_most("control_drift_cells", ctl_drift.abs() / g.dx(), CONTROL_MAX_CELLS);
        if let Some(ld) = p.deformation_radius() {
            let t = case.config.dt * case.config.n_steps as f64;
            v.info("speed_over_long_rossby_speed", drift / t / (-p.beta * ld * ld));
        }
        Ok(())
    };
    match body(&mut v) {
        Ok(()) => v,
        Err(e) => Verdict::from_error(&e),
    }
}
