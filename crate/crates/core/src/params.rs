use alloc::format;

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::math;
use crate::{Error, Result};

/// Physical constants for one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysParams {
    /// Gravitational acceleration [m s⁻²].
    pub g: f64,
    /// Resting depth [m].
    pub h: f64,
    /// Coriolis parameter at the domain mid-latitude [s⁻¹].
    pub f0: f64,
    /// Meridional gradient of f [m⁻¹ s⁻¹].
    pub beta: f64,
    /// Rayleigh friction [s⁻¹].
    pub r: f64,
    /// Reference density [kg m⁻³].
    pub rho0: f64,
    pub nonlinear: bool,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self { g: 10.0, h: 1000.0, f0: 1e-4, beta: 0.0, r: 0.0, rho0: 1025.0, nonlinear: false }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.g, self.h, self.f0, self.beta, self.r, self.rho0].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.g <= 0.0 {
            return Err(Error::InvalidParams(format!("g must be > 0, got {}", self.g)));
        }
        if self.h <= 0.0 {
            return Err(Error::InvalidParams(format!("H must be > 0, got {}", self.h)));
        }
        if self.r < 0.0 {
            return Err(Error::InvalidParams(format!("r must be >= 0, got {}", self.r)));
        }
        if self.rho0 <= 0.0 {
            return Err(Error::InvalidParams(format!("rho0 must be > 0, got {}", self.rho0)));
        }
        Ok(())
    }

    /// f(y) = f0 + β (y − y_mid).
    #[inline]
    pub fn coriolis_at(&self, y: f64, grid: &Grid) -> f64 {
        self.f0 + self.beta * (y - grid.y_mid())
    }

    /// Long gravity-wave speed √(gH).
    pub fn gravity_wave_speed(&self) -> f64 {
        math::sqrt(self.g * self.h)
    }

    /// Deformation radius √(gH)/|f0|, `None` on the non-rotating plane.
    pub fn deformation_radius(&self) -> Option<f64> {
        (self.f0 != 0.0).then(|| self.gravity_wave_speed() / self.f0.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    #[test]
    fn coriolis_is_f0_at_mid_latitude() {
        let grid = Grid::new(16, 16, 1e4, 1e4, Boundary::ClosedBasin).unwrap();
        let p = PhysParams { beta: 2e-11, ..PhysParams::default() };
        assert_eq!(p.coriolis_at(grid.y_mid(), &grid), p.f0);
        assert!((p.coriolis_at(grid.y_mid() + 1e4, &grid) - (1e-4 + 2e-7)).abs() < 1e-18);
    }

    #[test]
    fn deformation_radius() {
        let p = PhysParams::default();
        assert!((p.deformation_radius().unwrap() - 1e6).abs() < 1e-6);
        let q = PhysParams { f0: 0.0, ..p };
        assert_eq!(q.deformation_radius(), None);
    }

    #[test]
    fn validation() {
        assert!(PhysParams::default().validate().is_ok());
        assert!(PhysParams { g: 0.0, ..Default::default() }.validate().is_err());
        assert!(PhysParams { h: -1.0, ..Default::default() }.validate().is_err());
        assert!(PhysParams { r: -1e-6, ..Default::default() }.validate().is_err());
        assert!(PhysParams { rho0: 0.0, ..Default::default() }.validate().is_err());
    }
}
