//! Integral diagnostics and relative vorticity.

use serde::{Deserialize, Serialize};

use crate::field::Field;
use crate::grid::Grid;
use crate::params::PhysParams;
use crate::state::State;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// ∑ η dx dy [m³].
    pub mass: f64,
    /// Quadratic shallow-water energy per unit reference density [m⁵ s⁻²].
    pub energy: f64,
    /// ∑ (ζ + f) dx dy over vorticity points [m² s⁻¹].
    pub circulation: f64,
    /// max(|u|, |v|) [m s⁻¹].
    pub max_speed: f64,
}

pub fn compute_diagnostics(state: &State, grid: &Grid, params: &PhysParams) -> Result<Diagnostics> {
    state.check_shapes(grid)?;
    let area = grid.cell_area();
    let mut mass = 0.0;
    for &e in state.eta.as_slice() {
        mass += e * area;
    }
    let energy = energy_density(state, grid, params).sum() * area;

    let zeta = relative_vorticity(state, grid)?;
    let (cx, cy) = zeta.shape();
    let mut circulation = 0.0;
    for i in 0..cx {
        for j in 0..cy {
            let f = params.coriolis_at(grid.y_face(j), grid);
            circulation += (zeta[(i, j)] + f) * area;
        }
    }
    Ok(Diagnostics { mass, energy, circulation, max_speed: state.max_speed() })
}

/// Cell-centered energy density ½[h (|u|²)ᶜ + g η²], with squared face
/// velocities averaged to the cell (h = H, or H + η in nonlinear mode).
///
/// Summed over cells this is the quadratic invariant of the linear scheme.
pub fn energy_density(state: &State, grid: &Grid, params: &PhysParams) -> Field {
    let (nx, ny) = (grid.nx(), grid.ny());
    let px = grid.periodic_x();
    let py = grid.periodic_y();
    Field::from_fn(nx, ny, |i, j| {
        let ie = if px { (i + 1) % nx } else { i + 1 };
        let jn = if py { (j + 1) % ny } else { j + 1 };
        let uw = state.u[(i, j)];
        let ue = state.u[(ie, j)];
        let vs = state.v[(i, j)];
        let vn = state.v[(i, jn)];
        let ke = 0.5 * (uw * uw + ue * ue) + 0.5 * (vs * vs + vn * vn);
        let eta = state.eta[(i, j)];
        let depth = if params.nonlinear { params.h + eta } else { params.h };
        0.5 * (depth * ke + params.g * eta * eta)
    })
}

/// ζ = ∂v/∂x − ∂u/∂y at cell corners.
///
/// Closed walls use free-slip ghosts (tangential velocity mirrored), so ζ
/// vanishes on wall corners.
pub fn relative_vorticity(state: &State, grid: &Grid) -> Result<Field> {
    state.check_shapes(grid)?;
    let (nx, ny) = (grid.nx(), grid.ny());
    let (cx, cy) = grid.corner_shape();
    let px = grid.periodic_x();
    let py = grid.periodic_y();
    let (dx, dy) = (grid.dx(), grid.dy());
    Ok(Field::from_fn(cx, cy, |i, j| {
        let dvdx = if px {
            state.v[(i, j)] - state.v[((i + nx - 1) % nx, j)]
        } else if i == 0 || i == nx {
            0.0
        } else {
            state.v[(i, j)] - state.v[(i - 1, j)]
        };
        let dudy = if py {
            state.u[(i, j)] - state.u[(i, (j + ny - 1) % ny)]
        } else if j == 0 || j == ny {
            0.0
        } else {
            state.u[(i, j)] - state.u[(i, j - 1)]
        };
        dvdx / dx - dudy / dy
    }))
}
