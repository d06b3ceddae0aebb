//! Rotating shallow-water time stepping on the C-grid.
//!
//! Momentum:   ∂u/∂t = +f v̄ − g ∂η/∂x − r u + Fx  [− u·∇u]
//!             ∂v/∂t = −f ū − g ∂η/∂y − r v + Fy  [− u·∇v]
//! Continuity: ∂η/∂t = −∇·(h u),  h = H (linear) or H + η (nonlinear)
//!
//! Time integration is classical RK4 with fixed dt.

mod forcing;
mod rhs;

pub use forcing::{Forcing, Pattern};
pub use rhs::Model;

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::math;
use crate::params::PhysParams;
use crate::state::State;
use crate::{Error, Result};

/// Deliberate defects used to check that the property suites can tell a
/// broken model from a working one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Mutation {
    #[default]
    None,
    /// Coriolis term applied with the wrong sign.
    CoriolisSign,
    /// f evaluated as f0 everywhere.
    DroppedBeta,
    /// Continuity written as −(H + η)∇·u, which no longer telescopes.
    BrokenFluxForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub forcing: Option<Forcing>,
    #[serde(default)]
    pub mutation: Mutation,
}

impl StepConfig {
    pub fn new(dt: f64, n_steps: usize) -> Self {
        Self { dt, n_steps, forcing: None, mutation: Mutation::None }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn with_mutation(mut self, mutation: Mutation) -> Self {
        self.mutation = mutation;
        self
    }
}

/// Largest stable step under the rule dt ≤ ½ min(dx, dy) / (√(gH) + max_speed).
pub fn cfl_limit(grid: &Grid, params: &PhysParams, max_speed: f64) -> f64 {
    0.5 * grid.dx().min(grid.dy()) / (math::sqrt(params.g * params.h) + max_speed)
}

pub fn check_cfl(grid: &Grid, params: &PhysParams, dt: f64, max_speed: f64) -> bool {
    dt <= cfl_limit(grid, params, max_speed)
}

/// Advances `config.n_steps` RK4 steps.
pub fn step(state: &State, grid: &Grid, params: &PhysParams, config: &StepConfig) -> Result<State> {
    integrate(state, grid, params, config, |_, _| {})
}

/// Like [`step`] but calls `observe(step_index, &state)` after every step
/// (`step_index` starts at 1).
pub fn integrate(
    state: &State,
    grid: &Grid,
    params: &PhysParams,
    config: &StepConfig,
    mut observe: impl FnMut(usize, &State),
) -> Result<State> {
    params.validate()?;
    state.validate(grid, params)?;
    if !(config.dt > 0.0) {
        return Err(Error::CflViolation { dt: config.dt, limit: cfl_limit(grid, params, state.max_speed()) });
    }
    let limit = cfl_limit(grid, params, state.max_speed());
    if config.dt > limit {
        return Err(Error::CflViolation { dt: config.dt, limit });
    }
    let model = Model::new(grid, params, config.forcing.as_ref(), config.mutation);
    let mut current = state.clone();
    for n in 1..=config.n_steps {
        current = model.rk4(&current, config.dt);
        let depth_ok = !params.nonlinear || current.eta.as_slice().iter().all(|&e| params.h + e > 0.0);
        if !current.is_finite() || !depth_ok {
            return Err(Error::Blowup { step: n });
        }
        observe(n, &current);
    }
    Ok(current)
}

/// Advects only the tracer with the state's (frozen) velocities.
pub fn advect_tracer_only(state: &State, grid: &Grid, config: &StepConfig) -> Result<State> {
    state.check_shapes(grid)?;
    let Some(tracer) = &state.tracer else {
        return Err(Error::Unsupported("state carries no tracer".into()));
    };
    let mut current = tracer.clone();
    let dt = config.dt;
    let half = 0.5 * dt;
    let sixth = dt / 6.0;
    for n in 1..=config.n_steps {
        let k1 = rhs::tracer_tendency(&state.u, &state.v, &current, grid);
        let k2 = rhs::tracer_tendency(&state.u, &state.v, &rhs::offset(&current, half, &k1), grid);
        let k3 = rhs::tracer_tendency(&state.u, &state.v, &rhs::offset(&current, half, &k2), grid);
        let k4 = rhs::tracer_tendency(&state.u, &state.v, &rhs::offset(&current, dt, &k3), grid);
        current = rhs::combine(&current, sixth, &k1, &k2, &k3, &k4);
        if !current.is_finite() {
            return Err(Error::Blowup { step: n });
        }
    }
    let mut out = state.clone();
    out.tracer = Some(current);
    out.time = state.time + dt * config.n_steps as f64;
    Ok(out)
}

#[cfg(test)]
mod tests;
