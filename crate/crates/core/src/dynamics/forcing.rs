use serde::{Deserialize, Serialize};

use crate::field::Field;
use crate::grid::Grid;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Pattern {
    Uniform,
    /// Closed-basin mode shape: Fx ∝ sin(mπx/Lx) cos(nπy/Ly),
    /// Fy ∝ cos(mπx/Lx) sin(nπy/Ly).
    BasinMode {
        m: u32,
        n: u32,
    },
    GaussianBlob {
        x0: f64,
        y0: f64,
        width: f64,
    },
}

/// Momentum body force `amplitude · pattern(x, y) · cos(ω_F t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub amplitude_x: f64,
    pub amplitude_y: f64,
    pub pattern: Pattern,
    /// ω_F [s⁻¹]; 0 means steady.
    pub frequency: f64,
}

impl Forcing {
    pub fn is_valid(&self) -> bool {
        match self.pattern {
            Pattern::Uniform => true,
            Pattern::BasinMode { m, n } => m >= 1 && n >= 1,
            Pattern::GaussianBlob { width, .. } => width > 0.0,
        }
    }

    /// Spatial pattern sampled on the u and v points, amplitudes included.
    pub(crate) fn sample(&self, grid: &Grid) -> (Field, Field) {
        let (ux, uy) = grid.u_shape();
        let (vx, vy) = grid.v_shape();
        let (lx, ly) = (grid.lx(), grid.ly());
        let shape = |x: f64, y: f64, along_x: bool| -> f64 {
            match self.pattern {
                Pattern::Uniform => 1.0,
                Pattern::BasinMode { m, n } => {
                    let a = m as f64 * math::PI * x / lx;
                    let b = n as f64 * math::PI * y / ly;
                    if along_x {
                        math::sin(a) * math::cos(b)
                    } else {
                        math::cos(a) * math::sin(b)
                    }
                }
                Pattern::GaussianBlob { x0, y0, width } => {
                    let r2 = (x - x0) * (x - x0) + (y - y0) * (y - y0);
                    math::exp(-r2 / (2.0 * width * width))
                }
            }
        };
        let fx = Field::from_fn(ux, uy, |i, j| self.amplitude_x * shape(grid.x_face(i), grid.y_center(j), true));
        let fy = Field::from_fn(vx, vy, |i, j| self.amplitude_y * shape(grid.x_center(i), grid.y_face(j), false));
        (fx, fy)
    }

    pub fn time_factor(&self, t: f64) -> f64 {
        if self.frequency == 0.0 {
            1.0
        } else {
            math::cos(self.frequency * t)
        }
    }
}
