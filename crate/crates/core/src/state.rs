use serde::{Deserialize, Serialize};

use crate::field::Field;
use crate::grid::Grid;
use crate::params::PhysParams;
use crate::{Error, Result};

/// Prognostic shallow-water state on a C-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub eta: Field,
    pub tracer: Option<Field>,
    /// Elapsed simulation time [s].
    pub time: f64,
}

impl State {
    pub fn rest(grid: &Grid) -> Self {
        let (ux, uy) = grid.u_shape();
        let (vx, vy) = grid.v_shape();
        Self {
            u: Field::zeros(ux, uy),
            v: Field::zeros(vx, vy),
            eta: Field::zeros(grid.nx(), grid.ny()),
            tracer: None,
            time: 0.0,
        }
    }

    pub fn with_tracer(mut self, tracer: Field) -> Self {
        self.tracer = Some(tracer);
        self
    }

    pub fn check_shapes(&self, grid: &Grid) -> Result<()> {
        let check = |field: &'static str, f: &Field, expected: (usize, usize)| {
            if f.shape() == expected {
                Ok(())
            } else {
                Err(Error::ShapeMismatch { field, expected, got: f.shape() })
            }
        };
        check("u", &self.u, grid.u_shape())?;
        check("v", &self.v, grid.v_shape())?;
        check("eta", &self.eta, grid.eta_shape())?;
        if let Some(t) = &self.tracer {
            check("tracer", t, grid.eta_shape())?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite()
            && self.v.is_finite()
            && self.eta.is_finite()
            && self.tracer.as_ref().map_or(true, Field::is_finite)
            && self.time.is_finite()
    }

    /// Shapes match, all values finite and, in nonlinear mode, H + η > 0.
    pub fn validate(&self, grid: &Grid, params: &PhysParams) -> Result<()> {
        self.check_shapes(grid)?;
        if !self.is_finite() {
            return Err(Error::Blowup { step: 0 });
        }
        if params.nonlinear && self.eta.as_slice().iter().any(|&e| params.h + e <= 0.0) {
            return Err(Error::InvalidParams("H + eta must be positive in nonlinear mode".into()));
        }
        Ok(())
    }

    pub fn max_speed(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }

    /// Bitwise equality of every field and the clock.
    pub fn bit_eq(&self, other: &State) -> bool {
        let tracer_eq = match (&self.tracer, &other.tracer) {
            (None, None) => true,
            (Some(a), Some(b)) => a.bit_eq(b),
            _ => false,
        };
        self.u.bit_eq(&other.u)
            && self.v.bit_eq(&other.v)
            && self.eta.bit_eq(&other.eta)
            && tracer_eq
            && self.time.to_bits() == other.time.to_bits()
    }

    /// Largest absolute difference over u, v and η.
    pub fn max_abs_diff(&self, other: &State) -> f64 {
        self.u.max_abs_diff(&other.u).max(self.v.max_abs_diff(&other.v)).max(self.eta.max_abs_diff(&other.eta))
    }
}
