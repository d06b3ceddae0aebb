//! Seeded generators for physically valid property cases.
//!
//! A case is never stored as raw arrays alone: it carries the [`Recipe`] it
//! was built from (grid, parameters, feature list, family knobs), and every
//! field is re-derived from that recipe. Shrinking edits the recipe and
//! rebuilds, so balanced features stay balanced.

mod shrink;

pub use shrink::{replay, shrink, simplicity};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::balance::{balance_eta, validity_checks, BalanceKind, ValidityReport};
use crate::dynamics::{cfl_limit, check_cfl, Forcing, Pattern, StepConfig};
use crate::field::Field;
use crate::grid::{Boundary, Grid};
use crate::math;
use crate::params::PhysParams;
use crate::state::State;
use crate::suites::{Family, PropertyCase};
use crate::waves::{discrete_poincare_frequency, dispersion_rossby, init_poincare_wave, WaveSpec};
use crate::{Error, Result};

/// Earth's rotation rate [s⁻¹].
pub const OMEGA: f64 = 7.2921e-5;
/// Galilean bumps span at least this many base-grid cells so the coarsest
/// refinement level is already in the asymptotic range.
const GALILEAN_MIN_CELLS: f64 = 4.0;
/// Rejection-sampling budget per case.
pub const MAX_TRIES: usize = 2000;
/// Draws whose estimated run length exceeds this are rejected to bound runtime.
const MAX_DRAWN_STEPS: f64 = 30_000.0;

/// Admissible parameter ranges for generated cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenBounds {
    pub g: (f64, f64),
    pub h: (f64, f64),
    pub f0_max: f64,
    pub beta: (f64, f64),
    pub cells: [usize; 4],
    pub length: (f64, f64),
    /// Largest flow speed as a fraction of √(gH).
    pub speed_fraction: f64,
}

impl Default for GenBounds {
    fn default() -> Self {
        Self {
            g: (0.1, 100.0),
            h: (10.0, 5000.0),
            f0_max: 2.0 * OMEGA,
            beta: (0.0, 2.3e-11),
            cells: [16, 32, 64, 128],
            length: (1e5, 1e7),
            speed_fraction: 0.1,
        }
    }
}

impl GenBounds {
    pub fn check(&self, r: &Recipe) -> core::result::Result<(), String> {
        let p = &r.params;
        let within = |v: f64, (lo, hi): (f64, f64)| v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12);
        if !within(p.g, self.g) {
            return Err(format!("g = {} out of range", p.g));
        }
        if !within(p.h, self.h) {
            return Err(format!("H = {} out of range", p.h));
        }
        if p.f0.abs() > self.f0_max {
            return Err(format!("|f0| = {} above 2Ω", p.f0.abs()));
        }
        if !within(p.beta, self.beta) {
            return Err(format!("beta = {} out of range", p.beta));
        }
        if !self.cells.contains(&r.nx) || !self.cells.contains(&r.ny) {
            return Err(format!("grid {}x{} not in the allowed set", r.nx, r.ny));
        }
        if !within(r.lx, self.length) || !within(r.ly, self.length) {
            return Err(format!("domain {} x {} out of range", r.lx, r.ly));
        }
        Ok(())
    }
}

/// One ingredient of an initial condition. Positions and widths are in
/// metres so they survive grid refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Feature {
    /// Geostrophically balanced vortex or jet.
    Balanced(BalanceKind),
    /// Gaussian η bump with the fluid at rest (unbalanced).
    Bump { x0: f64, y0: f64, amplitude: f64, width: f64 },
    /// Discrete Poincaré eigenmode with lattice indices (jx, jy).
    Wave { jx: i64, jy: i64, amplitude: f64 },
    /// η = A cos(2π jx x / Lx) sin(π y / Ly), balanced on f0.
    ChannelWave { jx: i64, amplitude: f64 },
    /// Passive tracer blob.
    TracerBlob { x0: f64, y0: f64, amplitude: f64, width: f64 },
}

impl Feature {
    pub fn amplitude(&self) -> f64 {
        match *self {
            Feature::Balanced(k) => k.amplitude(),
            Feature::Bump { amplitude, .. }
            | Feature::Wave { amplitude, .. }
            | Feature::ChannelWave { amplitude, .. }
            | Feature::TracerBlob { amplitude, .. } => amplitude,
        }
    }

    pub fn with_amplitude(&self, a: f64) -> Feature {
        let mut f = *self;
        match &mut f {
            Feature::Balanced(BalanceKind::Vortex { amplitude, .. })
            | Feature::Balanced(BalanceKind::Jet { amplitude, .. })
            | Feature::Bump { amplitude, .. }
            | Feature::Wave { amplitude, .. }
            | Feature::ChannelWave { amplitude, .. }
            | Feature::TracerBlob { amplitude, .. } => *amplitude = a,
        }
        f
    }

    /// Copy with every length scale raised to at least `min` [m].
    pub fn widened(&self, min: f64) -> Feature {
        let mut f = *self;
        match &mut f {
            Feature::Balanced(BalanceKind::Vortex { width, .. })
            | Feature::Bump { width, .. }
            | Feature::TracerBlob { width, .. } => *width = width.max(min),
            Feature::Balanced(BalanceKind::Jet { width, length, .. }) => {
                *width = width.max(min);
                *length = length.max(min);
            }
            Feature::Wave { .. } | Feature::ChannelWave { .. } => {}
        }
        f
    }

    /// Smallest length scale the feature must resolve [m].
    pub fn width(&self) -> Option<f64> {
        match *self {
            Feature::Balanced(BalanceKind::Vortex { width, .. }) => Some(width),
            Feature::Balanced(BalanceKind::Jet { width, length, .. }) => Some(width.min(length)),
            Feature::Bump { width, .. } | Feature::TracerBlob { width, .. } => Some(width),
            Feature::Wave { .. } | Feature::ChannelWave { .. } => None,
        }
    }
}

/// Family-specific settings that are not fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Knobs {
    Plain,
    /// Frame moves (shift_x, shift_y) cells every `every` steps.
    Galilean {
        shift_x: i64,
        shift_y: i64,
        every: usize,
    },
    /// Basin-mode forcing of mode (m, n); `amplitude` scales the forcing
    /// potential (forces are its gradient).
    Resonance {
        m: u32,
        n: u32,
        amplitude: f64,
    },
    /// Rescaling factor between the paired runs.
    Gill {
        alpha: f64,
    },
    /// Number of domain circuits in x and y.
    Tracer {
        circuits_x: i64,
        circuits_y: i64,
    },
}

/// Everything needed to rebuild a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub boundary: Boundary,
    pub params: PhysParams,
    pub features: Vec<Feature>,
    /// Time step as a fraction of the family's stability limit.
    pub cfl_fraction: f64,
    /// Step count for families with a fixed count; physical-duration
    /// families ignore it.
    pub n_steps: usize,
    pub knobs: Knobs,
}

impl Recipe {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.lx / self.nx as f64, self.ly / self.ny as f64, self.boundary)
    }
}

/// Minimum step count the shrinker may reduce to, for families where the
/// count is free.
pub fn min_steps(family: Family) -> Option<usize> {
    match family {
        Family::Conservation | Family::Rotation90 | Family::BetaMirror | Family::GillScaling => Some(10),
        Family::Galilean => Some(8),
        _ => None,
    }
}

/// The same recipe on a grid `scale` times finer in each direction.
pub fn refined(r: &Recipe, scale: usize) -> Recipe {
    Recipe { nx: r.nx * scale, ny: r.ny * scale, ..r.clone() }
}

/// Builds the case a recipe describes and checks the family preconditions.
pub fn build_case(seed: u64, family: Family, recipe: Recipe) -> Result<PropertyCase> {
    let grid = recipe.grid()?;
    let params = recipe.params;
    params.validate()?;
    GenBounds::default().check(&recipe).map_err(Error::InvalidParams)?;
    let (initial, _) = build_state(&recipe, &grid)?;
    let config = derive_config(family, &recipe, &grid, &initial)?;
    let mut initial = initial;
    if let Knobs::Tracer { .. } = recipe.knobs {
        let (u, v) = tracer_velocity(&recipe.knobs, &grid, &config);
        initial.u = Field::filled(grid.u_shape().0, grid.u_shape().1, u);
        initial.v = Field::filled(grid.v_shape().0, grid.v_shape().1, v);
    }
    let case = PropertyCase { seed, family, grid, params, initial, config, recipe, shrink_path: Vec::new() };
    check_preconditions(&case).map_err(Error::InvalidParams)?;
    Ok(case)
}

/// The initial state, plus the balanced component when there is one.
pub fn build_state(recipe: &Recipe, grid: &Grid) -> Result<(State, Option<State>)> {
    let p = &recipe.params;
    let mut st = State::rest(grid);
    let mut to_balance = Field::zeros(grid.nx(), grid.ny());
    let mut any_balanced = false;
    let mut tracer: Option<Field> = None;
    for f in &recipe.features {
        match *f {
            Feature::Balanced(k) => {
                to_balance.axpy(1.0, &k.eta(grid));
                any_balanced = true;
            }
            Feature::ChannelWave { jx, amplitude } => {
                let k = 2.0 * math::PI * jx as f64 / grid.lx();
                let ly = grid.ly();
                to_balance.axpy(
                    1.0,
                    &Field::from_fn(grid.nx(), grid.ny(), |i, j| {
                        amplitude * math::cos(k * grid.x_center(i)) * math::sin(math::PI * grid.y_center(j) / ly)
                    }),
                );
                any_balanced = true;
            }
            Feature::Bump { x0, y0, amplitude, width } => {
                st.eta.axpy(1.0, &smooth_blob(grid, x0, y0, amplitude, width));
            }
            Feature::Wave { jx, jy, amplitude } => {
                let spec = WaveSpec::on_lattice(jx, jy, amplitude, grid, p);
                let w = init_poincare_wave(&spec, grid, p)?;
                st.u.axpy(1.0, &w.u);
                st.v.axpy(1.0, &w.v);
                st.eta.axpy(1.0, &w.eta);
            }
            Feature::TracerBlob { x0, y0, amplitude, width } => {
                let blob = smooth_blob(grid, x0, y0, amplitude, width);
                match &mut tracer {
                    Some(t) => t.axpy(1.0, &blob),
                    None => tracer = Some(blob),
                }
            }
        }
    }
    let balanced = if any_balanced {
        let (u, v, eta) = balance_eta(&to_balance, grid, p)?;
        st.u.axpy(1.0, &u);
        st.v.axpy(1.0, &v);
        st.eta.axpy(1.0, &eta);
        let mut b = State::rest(grid);
        b.u = u;
        b.v = v;
        b.eta = eta;
        Some(b)
    } else {
        None
    };
    if let Knobs::Tracer { .. } = recipe.knobs {
        // Velocities are set by the step configuration; see derive_config.
        st.tracer = Some(tracer.unwrap_or_else(|| Field::zeros(grid.nx(), grid.ny())));
    } else if let Some(t) = tracer {
        st.tracer = Some(t);
    }
    Ok((st, balanced))
}

/// Validity of the balanced component of a case (cases without one pass
/// vacuously).
pub fn balanced_validity(case: &PropertyCase) -> Result<Option<ValidityReport>> {
    let (_, balanced) = build_state(&case.recipe, &case.grid)?;
    Ok(balanced.map(|b| validity_checks(&b.u, &b.v, &b.eta, &case.grid, &case.params)))
}

/// Period of basin mode (m, n) of the continuum closed basin.
pub fn basin_mode_frequency(m: u32, n: u32, grid: &Grid, params: &PhysParams) -> f64 {
    let (a, b) = (m as f64 / grid.lx(), n as f64 / grid.ly());
    params.gravity_wave_speed() * math::PI * math::sqrt(a * a + b * b)
}

pub fn basin_forcing(m: u32, n: u32, amplitude: f64, frequency: f64, grid: &Grid) -> Forcing {
    Forcing {
        amplitude_x: amplitude * m as f64 * math::PI / grid.lx(),
        amplitude_y: amplitude * n as f64 * math::PI / grid.ly(),
        pattern: Pattern::BasinMode { m, n },
        frequency,
    }
}

/// Galilean frame speed for a recipe with time step `dt`.
pub fn frame_velocity(knobs: &Knobs, grid: &Grid, dt: f64) -> (f64, f64) {
    match *knobs {
        Knobs::Galilean { shift_x, shift_y, every } => {
            (shift_x as f64 * grid.dx() / (every as f64 * dt), shift_y as f64 * grid.dy() / (every as f64 * dt))
        }
        _ => (0.0, 0.0),
    }
}

/// Tracer courant number |u|dt/dx targeted by tracer cases.
const TRACER_COURANT: f64 = 0.02;

/// Frozen advecting velocity of a tracer case.
pub fn tracer_velocity(knobs: &Knobs, grid: &Grid, config: &StepConfig) -> (f64, f64) {
    match *knobs {
        Knobs::Tracer { circuits_x, circuits_y } => {
            let t = config.dt * config.n_steps as f64;
            (circuits_x as f64 * grid.lx() / t, circuits_y as f64 * grid.ly() / t)
        }
        _ => (0.0, 0.0),
    }
}

/// Largest |f|·dt for conservation runs. RK4 damps an inertial oscillation
/// by about (f dt)⁶/72 per step, which must stay far below the energy
/// tolerance over 1000 steps.
const INERTIAL_STEP: f64 = 0.05;

fn max_coriolis(p: &PhysParams, grid: &Grid) -> f64 {
    let half = 0.5 * grid.ly();
    (p.f0 - p.beta * half).abs().max((p.f0 + p.beta * half).abs())
}

fn derive_config(family: Family, r: &Recipe, grid: &Grid, initial: &State) -> Result<StepConfig> {
    let p = &r.params;
    let speed = initial.max_speed();
    let limit = cfl_limit(grid, p, speed);
    let frac = r.cfl_fraction;
    let fit = |duration: f64, max_dt: f64| -> (f64, usize) {
        let n = math::ceil(duration / max_dt).max(1.0) as usize;
        (duration / n as f64, n)
    };
    let config = match family {
        Family::Conservation => {
            let f_max = max_coriolis(p, grid);
            let dt = if f_max > 0.0 { (frac * limit).min(INERTIAL_STEP / f_max) } else { frac * limit };
            StepConfig::new(dt, r.n_steps)
        }
        Family::Rotation90 | Family::BetaMirror | Family::GillScaling => StepConfig::new(frac * limit, r.n_steps),
        Family::Galilean => {
            let (every, shift) = match r.knobs {
                Knobs::Galilean { shift_x, shift_y, every } => (every, shift_x.abs().max(shift_y.abs())),
                _ => return Err(Error::InvalidParams("Galilean case without frame knobs".into())),
            };
            let room = 0.5 - shift as f64 / every as f64;
            let dt = frac * room * grid.dx().min(grid.dy()) / (p.gravity_wave_speed() + speed);
            StepConfig::new(dt, r.n_steps)
        }
        Family::BalanceMaintenance => {
            let (dt, n) = fit(10.0 * 2.0 * math::PI / p.f0.abs(), frac * limit);
            StepConfig::new(dt, n)
        }
        Family::WaveMaintenance => {
            let w = match r.features.first() {
                Some(Feature::Wave { jx, jy, .. }) => {
                    let s = WaveSpec::on_lattice(*jx, *jy, 1.0, grid, p);
                    discrete_poincare_frequency(s.k, s.l, grid, p)
                }
                _ => 2.0 * math::PI,
            };
            let (dt, n) = fit(5.0 * 2.0 * math::PI / w, (2.0 * math::PI / w / 128.0).min(frac * limit));
            StepConfig::new(dt, n)
        }
        Family::Resonance => {
            let (m, n, amp) = match r.knobs {
                Knobs::Resonance { m, n, amplitude } => (m, n, amplitude),
                _ => return Err(Error::InvalidParams("resonance case without mode knobs".into())),
            };
            let w = basin_mode_frequency(m, n, grid, p);
            let period = 2.0 * math::PI / w;
            let per = math::ceil(period / (frac * limit)) as usize;
            StepConfig::new(period / per as f64, 20 * per).with_forcing(basin_forcing(m, n, amp, w, grid))
        }
        Family::WestwardIntensity => {
            let ld = p.deformation_radius().ok_or(Error::ZeroCoriolis)?;
            let (dt, n) = fit(1.0 / (p.beta * ld), frac * limit);
            StepConfig::new(dt, n)
        }
        Family::BetaDoubling => {
            let (dt, n) = fit(beta_doubling_lag(r, grid)?, frac * limit);
            StepConfig::new(dt, n)
        }
        Family::TracerRoundtrip => {
            let (cx, cy) = match r.knobs {
                Knobs::Tracer { circuits_x, circuits_y } => (circuits_x, circuits_y),
                _ => return Err(Error::InvalidParams("tracer case without circuit knobs".into())),
            };
            let cells = (cx.unsigned_abs() as usize * grid.nx()).max(cy.unsigned_abs() as usize * grid.ny());
            let n = math::ceil(cells as f64 / TRACER_COURANT) as usize;
            StepConfig::new(frac * limit, n.max(1))
        }
    };
    Ok(config)
}

/// Lag at which β-doubling displacements are compared: half a radian of
/// phase at the base β.
pub fn beta_doubling_lag(r: &Recipe, grid: &Grid) -> Result<f64> {
    let jx = match r.features.first() {
        Some(Feature::ChannelWave { jx, .. }) => *jx,
        _ => 1,
    };
    let k = 2.0 * math::PI * jx as f64 / grid.lx();
    let l = math::PI / grid.ly();
    Ok(0.5 / dispersion_rossby(k, l, &r.params)?.abs())
}

/// Minimum feature width in grid cells, for families whose features carry
/// a width.
pub fn min_width_cells(family: Family) -> Option<f64> {
    match family {
        Family::Conservation => Some(3.0),
        Family::Galilean => Some(GALILEAN_MIN_CELLS),
        Family::BalanceMaintenance => Some(1.0),
        Family::Rotation90 | Family::BetaMirror | Family::GillScaling | Family::TracerRoundtrip => Some(2.0),
        _ => None,
    }
}

/// Family preconditions on a built case. Shrink candidates must pass them
/// too.
pub fn check_preconditions(case: &PropertyCase) -> core::result::Result<(), String> {
    let r = &case.recipe;
    let g = &case.grid;
    let p = &case.params;
    let dx = g.dx().max(g.dy());
    if !check_cfl(g, p, case.config.dt, case.initial.max_speed() + frame_speed(case)) {
        return Err("time step violates the CFL rule".into());
    }
    let guard = GenBounds::default().speed_fraction * p.gravity_wave_speed();
    if case.initial.max_speed() > guard * (1.0 + 1e-9) {
        return Err("flow speed above the linear-regime guard".into());
    }
    if p.nonlinear && case.initial.eta.max_abs() >= 0.1 * p.h {
        return Err("η amplitude too large for the layer depth".into());
    }
    let min_width = |cells: f64| -> core::result::Result<(), String> {
        for f in &r.features {
            if let Some(w) = f.width() {
                if w < cells * dx {
                    return Err(format!("feature width {w:.3e} below {cells} cells"));
                }
            }
        }
        Ok(())
    };
    if let Some(cells) = min_width_cells(case.family) {
        min_width(cells)?;
    }
    let needs_no_forcing =
        || if case.config.forcing.is_some() { Err(String::from("forcing not allowed")) } else { Ok(()) };
    match case.family {
        Family::Conservation => {
            needs_no_forcing()?;
            if p.r != 0.0 {
                return Err("friction must be zero".into());
            }
            if max_coriolis(p, g) * case.config.dt > INERTIAL_STEP * (1.0 + 1e-9) {
                return Err("inertial period resolved by too few steps".into());
            }
        }
        Family::Rotation90 => {
            if g.nx() != g.ny() || g.dx() != g.dy() {
                return Err("rotation needs a square grid with dx = dy".into());
            }
            if g.boundary() == Boundary::ChannelPeriodicX {
                return Err("a channel is not rotation symmetric".into());
            }
            if p.beta != 0.0 {
                return Err("rotation needs an f-plane".into());
            }
            needs_no_forcing()?;
        }
        Family::Galilean => {
            if !p.nonlinear || p.f0 != 0.0 || p.beta != 0.0 || g.boundary() != Boundary::PeriodicXY {
                return Err("Galilean cases are nonlinear, non-rotating and doubly periodic".into());
            }
            match r.knobs {
                Knobs::Galilean { every, .. } if every > 0 && r.n_steps % every == 0 => {}
                _ => return Err("frame shift must be an integer number of cells per sampling step".into()),
            }
        }
        Family::BetaMirror => {
            if p.f0 != 0.0 || p.beta == 0.0 || g.boundary() != Boundary::ClosedBasin {
                return Err("β-mirror needs f0 = 0, β ≠ 0 and a closed basin".into());
            }
            needs_no_forcing()?;
        }
        Family::BalanceMaintenance => {
            if p.f0 == 0.0 || p.beta != 0.0 || p.nonlinear || p.r != 0.0 {
                return Err("balance needs a linear, frictionless f-plane".into());
            }
            let ld = p.deformation_radius().unwrap_or(0.0);
            if dx > 0.5 * ld {
                return Err("deformation radius under-resolved".into());
            }
            if !r.features.iter().all(|f| matches!(f, Feature::Balanced(_))) || r.features.is_empty() {
                return Err("balance cases carry only balanced features".into());
            }
        }
        Family::WaveMaintenance => {
            if g.boundary() != Boundary::PeriodicXY || p.beta != 0.0 || p.nonlinear || p.r != 0.0 {
                return Err("waves need a linear, frictionless, periodic f-plane".into());
            }
            for f in &r.features {
                match *f {
                    Feature::Wave { jx, jy, .. } => {
                        let s = WaveSpec::on_lattice(jx, jy, 1.0, g, p);
                        let kmag = math::hypot(s.k, s.l);
                        if kmag == 0.0 || 2.0 * math::PI / kmag < 16.0 * dx {
                            return Err("wave resolved by fewer than 16 points".into());
                        }
                    }
                    _ => return Err("wave cases carry only waves".into()),
                }
            }
            if r.features.len() != 1 {
                return Err("wave cases carry exactly one wave".into());
            }
        }
        Family::Resonance => {
            let Knobs::Resonance { m, n, .. } = r.knobs else {
                return Err("missing resonance knobs".into());
            };
            if g.boundary() != Boundary::ClosedBasin || p.f0 != 0.0 || p.beta != 0.0 || p.nonlinear || p.r != 0.0 {
                return Err("resonance needs a linear, frictionless, non-rotating closed basin".into());
            }
            if !r.features.is_empty() {
                return Err("resonance starts from rest".into());
            }
            if m == 0 || n == 0 || g.nx() < 16 * m as usize || g.ny() < 16 * n as usize {
                return Err("basin mode under-resolved".into());
            }
        }
        Family::WestwardIntensity => {
            if g.boundary() != Boundary::ClosedBasin || p.nonlinear || p.r != 0.0 || p.beta <= 0.0 || p.f0 <= 0.0 {
                return Err("westward cases need a linear northern-hemisphere β-plane basin".into());
            }
            let ld = p.deformation_radius().unwrap_or(0.0);
            if p.beta * g.ly() > 0.5 * p.f0 {
                return Err("f changes too much across the basin".into());
            }
            if r.features.len() != 1 || !matches!(r.features[0], Feature::Balanced(BalanceKind::Vortex { .. })) {
                return Err("westward cases carry one balanced vortex".into());
            }
            if ld < 8.0 * dx {
                return Err("deformation radius too coarse to see a 2 dx drift".into());
            }
            if g.lx().min(g.ly()) < 6.0 * ld {
                return Err("basin smaller than six deformation radii".into());
            }
        }
        Family::BetaDoubling => {
            if g.boundary() != Boundary::ChannelPeriodicX || p.nonlinear || p.r != 0.0 || p.beta <= 0.0 || p.f0 == 0.0 {
                return Err("β-doubling needs a linear β-plane channel".into());
            }
            let ld = p.deformation_radius().unwrap_or(f64::INFINITY);
            let Some(Feature::ChannelWave { jx, .. }) = r.features.first() else {
                return Err("β-doubling needs one channel wave".into());
            };
            let k = 2.0 * math::PI * *jx as f64 / g.lx();
            let l = math::PI / g.ly();
            if (k * k + l * l) * ld * ld > 0.25 {
                return Err("wave is not long compared with the deformation radius".into());
            }
            if 2.0 * p.beta * g.ly() > 0.2 * p.f0.abs() {
                return Err("doubled β changes f too much across the channel".into());
            }
            if r.features.len() != 1 {
                return Err("β-doubling carries one wave".into());
            }
        }
        Family::GillScaling => {
            if p.beta != 0.0 || p.nonlinear {
                return Err("Gill scaling needs a linear f-plane".into());
            }
            if !r.features.iter().all(|f| matches!(f, Feature::Bump { .. })) || r.features.is_empty() {
                return Err("Gill cases start from η bumps at rest".into());
            }
            needs_no_forcing()?;
        }
        Family::TracerRoundtrip => {
            if g.boundary() != Boundary::PeriodicXY {
                return Err("tracer circuits need a doubly periodic grid".into());
            }
            let Knobs::Tracer { circuits_x, circuits_y } = r.knobs else {
                return Err("missing tracer knobs".into());
            };
            if circuits_x == 0 && circuits_y == 0 && r.features.is_empty() {
                return Err("empty tracer case".into());
            }
            if !r.features.iter().all(|f| matches!(f, Feature::TracerBlob { .. })) || r.features.len() != 1 {
                return Err("tracer cases carry one blob".into());
            }
            let (u, v) = tracer_velocity(&r.knobs, g, &case.config);
            if math::hypot(u, v) > guard {
                return Err("advecting velocity above the linear-regime guard".into());
            }
        }
    }
    Ok(())
}

fn frame_speed(case: &PropertyCase) -> f64 {
    let (u, v) = frame_velocity(&case.recipe.knobs, &case.grid, case.config.dt);
    u.abs().max(v.abs())
}

/// Gaussian-like blob with standard deviation `width`. Periodic
/// directions use exp((cos(2πd/L) − 1)(L/2πσ)²), which is smooth across
/// the seam where a minimum-image Gaussian has a kink.
pub fn smooth_blob(grid: &Grid, x0: f64, y0: f64, amplitude: f64, width: f64) -> Field {
    let profile = |d: f64, l: f64, periodic: bool| {
        if periodic {
            let kl = l / (2.0 * math::PI * width);
            (math::cos(2.0 * math::PI * d / l) - 1.0) * kl * kl
        } else {
            -d * d / (2.0 * width * width)
        }
    };
    Field::from_fn(grid.nx(), grid.ny(), |i, j| {
        let ax = profile(grid.x_center(i) - x0, grid.lx(), grid.periodic_x());
        let ay = profile(grid.y_center(j) - y0, grid.ly(), grid.periodic_y());
        amplitude * math::exp(ax + ay)
    })
}

/// Deterministic case for `(seed, family)`.
pub fn generate(seed: u64, family: Family) -> Result<PropertyCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(family.index() as u64);
    for _ in 0..MAX_TRIES {
        let Some(recipe) = draw_recipe(&mut rng, family) else {
            continue;
        };
        let recipe = match enforce_speed_guard(recipe) {
            Some(r) => r,
            None => continue,
        };
        let Ok(case) = build_case(seed, family, recipe) else {
            continue;
        };
        match balanced_validity(&case) {
            Ok(None) => return Ok(case),
            Ok(Some(rep)) if rep.all_passed() => return Ok(case),
            _ => continue,
        }
    }
    Err(Error::UnsatisfiableConstraints(MAX_TRIES))
}

/// Rescales feature amplitudes so the flow speed respects the
/// linear-regime guard (the fields are linear in the amplitudes).
fn enforce_speed_guard(mut r: Recipe) -> Option<Recipe> {
    let grid = r.grid().ok()?;
    let (st, _) = build_state(&r, &grid).ok()?;
    let guard = 0.9 * GenBounds::default().speed_fraction * r.params.gravity_wave_speed();
    let speed = st.max_speed();
    let mut scale: f64 = if speed > guard { guard / speed } else { 1.0 };
    if r.params.nonlinear {
        let eta = st.eta.max_abs();
        if eta * scale > 0.05 * r.params.h {
            scale = 0.05 * r.params.h / eta;
        }
    }
    if scale < 1.0 {
        for f in &mut r.features {
            if !matches!(f, Feature::TracerBlob { .. }) {
                *f = f.with_amplitude(f.amplitude() * scale);
            }
        }
    }
    Some(r)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    math::exp(rng.random_range(math::ln(lo)..=math::ln(hi)))
}

/// Uniform magnitude in [lo, hi] with a random sign.
fn signed_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let v = rng.random_range(lo..=hi);
    if rng.random_bool(0.5) {
        v
    } else {
        -v
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

/// Angles jets are drawn from; the named ones are checked explicitly.
pub const JET_ANGLES: [f64; 4] = [0.0, 30.0, 45.0, 90.0];

fn draw_balanced(rng: &mut ChaCha8Rng, lx: f64, ly: f64, dx: f64, min_cells: f64, allow_jet: bool) -> Option<Feature> {
    let l = lx.min(ly);
    let lo = (min_cells * dx).max(0.05 * l);
    let hi = 0.12 * l;
    if lo > hi {
        return None;
    }
    let width = rng.random_range(lo..=hi);
    let (x0, y0) = (rng.random_range(0.3..0.7) * lx, rng.random_range(0.3..0.7) * ly);
    let amplitude = signed_in(rng, 0.1, 1.0);
    if allow_jet && rng.random_bool(0.4) {
        let angle_deg = if rng.random_bool(0.5) { pick(rng, &JET_ANGLES) } else { rng.random_range(0.0..180.0) };
        Some(Feature::Balanced(BalanceKind::Jet {
            x0,
            y0,
            angle_deg,
            amplitude,
            width,
            length: width * rng.random_range(2.0..4.0),
        }))
    } else {
        Some(Feature::Balanced(BalanceKind::Vortex { x0, y0, amplitude, width }))
    }
}

fn draw_bump(rng: &mut ChaCha8Rng, lx: f64, ly: f64, dx: f64, min_cells: f64) -> Option<Feature> {
    draw_bump_upto(rng, lx, ly, dx, min_cells, 0.12)
}

fn draw_bump_upto(rng: &mut ChaCha8Rng, lx: f64, ly: f64, dx: f64, min_cells: f64, max_frac: f64) -> Option<Feature> {
    let l = lx.min(ly);
    let lo = (min_cells * dx).max(0.05 * l);
    let hi = max_frac * l;
    if lo > hi {
        return None;
    }
    Some(Feature::Bump {
        x0: rng.random_range(0.3..0.7) * lx,
        y0: rng.random_range(0.3..0.7) * ly,
        amplitude: signed_in(rng, 0.1, 1.0),
        width: rng.random_range(lo..=hi),
    })
}

fn base_params(rng: &mut ChaCha8Rng) -> PhysParams {
    let b = GenBounds::default();
    PhysParams {
        g: log_uniform(rng, b.g.0, b.g.1),
        h: log_uniform(rng, b.h.0, b.h.1),
        f0: 0.0,
        beta: 0.0,
        r: 0.0,
        rho0: 1025.0,
        nonlinear: false,
    }
}

fn draw_f0(rng: &mut ChaCha8Rng, min: f64) -> f64 {
    signed_in(rng, min, 2.0 * OMEGA)
}

fn draw_recipe(rng: &mut ChaCha8Rng, family: Family) -> Option<Recipe> {
    let b = GenBounds::default();
    let mut p = base_params(rng);
    let boundaries = [Boundary::PeriodicXY, Boundary::ClosedBasin, Boundary::ChannelPeriodicX];
    let recipe = match family {
        Family::Conservation => {
            let n = pick(rng, &[16usize, 32, 64]);
            let l = log_uniform(rng, b.length.0, b.length.1);
            let boundary = pick(rng, &boundaries);
            p.nonlinear = rng.random_bool(0.5);
            p.f0 = if rng.random_bool(0.8) { draw_f0(rng, 1e-5) } else { 0.0 };
            p.beta = if rng.random_bool(0.5) { rng.random_range(0.0..=b.beta.1) } else { 0.0 };
            let dx = l / n as f64;
            let mut features = Vec::new();
            for _ in 0..rng.random_range(1..=3) {
                let f = if p.f0 != 0.0 && rng.random_bool(0.5) {
                    draw_balanced(rng, l, l, dx, 3.0, true)?
                } else {
                    draw_bump(rng, l, l, dx, 3.0)?
                };
                features.push(f);
            }
            Recipe {
                nx: n,
                ny: n,
                lx: l,
                ly: l,
                boundary,
                params: p,
                features,
                // Nonlinear cases compare dt-halvings, which needs RK4 in its
                // asymptotic range.
                cfl_fraction: if p.nonlinear { rng.random_range(0.05..0.1) } else { rng.random_range(0.1..0.2) },
                n_steps: 1000,
                knobs: Knobs::Plain,
            }
        }
        Family::Rotation90 => {
            let n = pick(rng, &[16usize, 32, 64]);
            let l = log_uniform(rng, b.length.0, b.length.1);
            p.nonlinear = rng.random_bool(0.5);
            p.f0 = if rng.random_bool(0.8) { draw_f0(rng, 1e-5) } else { 0.0 };
            let dx = l / n as f64;
            let mut features = Vec::new();
            for _ in 0..rng.random_range(1..=2) {
                let f = if p.f0 != 0.0 && rng.random_bool(0.5) {
                    draw_balanced(rng, l, l, dx, 2.0, true)?
                } else {
                    draw_bump(rng, l, l, dx, 2.0)?
                };
                features.push(f);
            }
            Recipe {
                nx: n,
                ny: n,
                lx: l,
                ly: l,
                boundary: pick(rng, &[Boundary::PeriodicXY, Boundary::ClosedBasin]),
                params: p,
                features,
                cfl_fraction: rng.random_range(0.2..0.5),
                n_steps: 200,
                knobs: Knobs::Plain,
            }
        }
        Family::Galilean => {
            let n = pick(rng, &[16usize, 32]);
            let l = log_uniform(rng, b.length.0, b.length.1);
            p.nonlinear = true;
            let dx = l / n as f64;
            let mut features = Vec::new();
            for _ in 0..rng.random_range(1..=2) {
                features.push(draw_bump_upto(rng, l, l, dx, GALILEAN_MIN_CELLS, 0.25)?);
            }
            let shift_x = rng.random_range(-2i64..=2);
            let shift_y = if shift_x == 0 { pick(rng, &[-1i64, 1]) } else { rng.random_range(-1i64..=1) };
            let every = 4 * shift_x.abs().max(shift_y.abs()) as usize * rng.random_range(1..=2);
            Recipe {
                nx: n,
                ny: n,
                lx: l,
                ly: l,
                boundary: Boundary::PeriodicXY,
                params: p,
                features,
                cfl_fraction: rng.random_range(0.5..0.9),
                n_steps: every * rng.random_range(8..=16),
                knobs: Knobs::Galilean { shift_x, shift_y, every },
            }
        }
        Family::BetaMirror => {
            let n = pick(rng, &[16usize, 32, 64]);
            let lx = log_uniform(rng, b.length.0, b.length.1);
            let ly = lx * rng.random_range(0.5..2.0);
            p.nonlinear = rng.random_bool(0.5);
            p.beta = rng.random_range(1e-12..=b.beta.1);
            let dx = (lx / n as f64).max(ly / n as f64);
            let mut features = Vec::new();
            for _ in 0..rng.random_range(1..=2) {
                features.push(draw_bump(rng, lx, ly, dx, 2.0)?);
            }
            Recipe {
                nx: n,
                ny: n,
                lx,
                ly,
                boundary: Boundary::ClosedBasin,
                params: p,
                features,
                cfl_fraction: rng.random_range(0.2..0.5),
                n_steps: 300,
                knobs: Knobs::Plain,
            }
        }
        Family::BalanceMaintenance => {
            let n = pick(rng, &[16usize, 32, 64]);
            p.f0 = draw_f0(rng, 3e-5);
            let ld = p.deformation_radius()?;
            // Domain at most eight deformation radii keeps a 16-cell grid
            // (the shrink floor) within dx ≤ L_D/2.
            let l = ld * rng.random_range(3.0..8.0);
            let dx = l / n as f64;
            let mut features = Vec::new();
            for _ in 0..rng.random_range(1..=3) {
                features.push(draw_balanced(rng, l, l, dx, 1.0, true)?);
            }
            Recipe {
                nx: n,
                ny: n,
                lx: l,
                ly: l,
                boundary: pick(rng, &boundaries),
                params: p,
                features,
                cfl_fraction: rng.random_range(0.3..0.5),
                n_steps: 0,
                knobs: Knobs::Plain,
            }
        }
        Family::WaveMaintenance => {
            let n = pick(rng, &[16usize, 32, 64]);
            let l = log_uniform(rng, b.length.0, b.length.1);
            p.f0 = if rng.random_bool(0.8) { draw_f0(rng, 1e-5) } else { 0.0 };
            let jmax = (n / 16) as i64;
            let (jx, jy) = loop {
                let jx = rng.random_range(-jmax..=jmax);
                let jy = rng.random_range(-jmax..=jmax);
                if (jx, jy) != (0, 0) {
                    break (jx, jy);
                }
            };
            Recipe {
                nx: n,
                ny: n,
                lx: l,
                ly: l,
                boundary: Boundary::PeriodicXY,
                params: p,
                features: alloc::vec![Feature::Wave { jx, jy, amplitude: rng.random_range(0.1..1.0) }],
                cfl_fraction: 0.5,
                n_steps: 0,
                knobs: Knobs::Plain,
            }
        }
        Family::Resonance => {
            let m = rng.random_range(1u32..=2);
            let nn = rng.random_range(1u32..=2);
            let n = if m.max(nn) == 1 { pick(rng, &[32usize, 64]) } else { 64 };
            let lx = log_uniform(rng, b.length.0, b.length.1);
            let ly = lx * rng.random_range(0.7..1.4);
            Recipe {
                nx: n,
                ny: n,
                lx,
                ly,
                boundary: Boundary::ClosedBasin,
                params: p,
                features: Vec::new(),
                cfl_fraction: 0.5,
                n_steps: 0,
                knobs: Knobs::Resonance { m, n: nn, amplitude: rng.random_range(1e-3..1e-2) * p.g },
            }
        }
        Family::WestwardIntensity => {
            // The centroid moves only a fraction of L_D per 1/(βL_D), so a
            // 2 dx displacement needs L_D ≥ 8 dx. Walls close to the vortex
            // slow it further, hence the roomy basin.
            let n = 128usize;
            p.f0 = rng.random_range(3e-5..=2.0 * OMEGA);
            let ld = p.deformation_radius()?;
            let l = ld * rng.random_range(7.0..8.0);
            p.beta = rng.random_range(0.5..1.0) * b.beta.1.min(0.5 * p.f0 / l);
            let steps = 2.0 * p.f0 * n as f64 / (0.3 * p.beta * l);
            if steps > 0.15 * MAX_DRAWN_STEPS {
                return None;
            }
            let width = ld * rng.random_range(0.9..1.1);
            let amplitude = signed_in(rng, 0.1, 1.0);
            Recipe {
                nx: n,
                ny: n,
                lx: l,
                ly: l,
                boundary: Boundary::ClosedBasin,
                params: p,
                features: alloc::vec![Feature::Balanced(BalanceKind::Vortex {
                    x0: 0.5 * l,
                    y0: 0.5 * l,
                    amplitude,
                    width
                })],
                cfl_fraction: rng.random_range(0.3..0.5),
                n_steps: 0,
                knobs: Knobs::Plain,
            }
        }
        Family::BetaDoubling => {
            let n = pick(rng, &[16usize, 32]);
            p.f0 = draw_f0(rng, 3e-5);
            let ld = p.deformation_radius()?;
            let ly = ld * rng.random_range(9.0..14.0);
            let lx = ly * rng.random_range(2.0..4.0);
            p.beta = rng.random_range(0.2..1.0) * b.beta.1.min(0.1 * p.f0.abs() / ly);
            Recipe {
                nx: n,
                ny: n,
                lx,
                ly,
                boundary: Boundary::ChannelPeriodicX,
                params: p,
                features: alloc::vec![Feature::ChannelWave { jx: 1, amplitude: signed_in(rng, 0.1, 1.0) }],
                cfl_fraction: rng.random_range(0.3..0.5),
                n_steps: 0,
                knobs: Knobs::Plain,
            }
        }
        Family::GillScaling => {
            let n = pick(rng, &[16usize, 32, 64]);
            let l = log_uniform(rng, b.length.0, b.length.1);
            p.f0 = if rng.random_bool(0.8) { draw_f0(rng, 1e-5) } else { 0.0 };
            p.r = if rng.random_bool(0.5) { rng.random_range(0.0..1e-5) } else { 0.0 };
            let dx = l / n as f64;
            let mut features = Vec::new();
            for _ in 0..rng.random_range(1..=2) {
                features.push(draw_bump(rng, l, l, dx, 2.0)?);
            }
            Recipe {
                nx: n,
                ny: n,
                lx: l,
                ly: l,
                boundary: pick(rng, &boundaries),
                params: p,
                features,
                cfl_fraction: rng.random_range(0.2..0.5),
                n_steps: 200,
                knobs: Knobs::Gill { alpha: 2.0 },
            }
        }
        Family::TracerRoundtrip => {
            let n = 16usize;
            let l = log_uniform(rng, b.length.0, b.length.1);
            let (cx, cy) = pick(rng, &[(1i64, 0i64), (0, 1), (1, 1), (-1, 1), (-1, 0)]);
            let width = l / n as f64 * rng.random_range(3.0..4.0);
            Recipe {
                nx: n,
                ny: n,
                lx: l,
                ly: l,
                boundary: Boundary::PeriodicXY,
                params: p,
                features: alloc::vec![Feature::TracerBlob {
                    x0: rng.random_range(0.3..0.7) * l,
                    y0: rng.random_range(0.3..0.7) * l,
                    amplitude: rng.random_range(0.5..2.0),
                    width
                }],
                cfl_fraction: 0.8,
                n_steps: 0,
                knobs: Knobs::Tracer { circuits_x: cx, circuits_y: cy },
            }
        }
    };
    Some(recipe)
}

#[cfg(test)]
mod tests;
