use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MIN_CELLS: usize = 8;

/// Lateral boundary topology of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    PeriodicXY,
    ClosedBasin,
    ChannelPeriodicX,
}

impl Boundary {
    /// Byte code used by the checkpoint format.
    pub fn code(self) -> u8 {
        match self {
            Boundary::PeriodicXY => 0,
            Boundary::ClosedBasin => 1,
            Boundary::ChannelPeriodicX => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Boundary::PeriodicXY),
            1 => Some(Boundary::ClosedBasin),
            2 => Some(Boundary::ChannelPeriodicX),
            _ => None,
        }
    }

    pub fn periodic_x(self) -> bool {
        matches!(self, Boundary::PeriodicXY | Boundary::ChannelPeriodicX)
    }

    pub fn periodic_y(self) -> bool {
        matches!(self, Boundary::PeriodicXY)
    }
}

/// Rectangular Arakawa C-grid.
///
/// η sits at cell centers `(i + ½, j + ½)`, u on x-faces `(i, j + ½)`, v on
/// y-faces `(i + ½, j)` and vorticity on corners `(i, j)`. A closed direction
/// carries one extra face (the far wall); normal velocity on walls is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    boundary: Boundary,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, boundary: Boundary) -> Result<Self> {
        for n in [nx, ny] {
            if n < MIN_CELLS {
                return Err(Error::DimensionTooSmall { got: n, min: MIN_CELLS });
            }
        }
        for d in [dx, dy] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::NonpositiveSpacing(d));
            }
        }
        Ok(Self { nx, ny, dx, dy, boundary })
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }
    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }
    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }
    #[inline]
    pub fn dy(&self) -> f64 {
        self.dy
    }
    #[inline]
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    #[inline]
    pub fn periodic_x(&self) -> bool {
        self.boundary.periodic_x()
    }
    #[inline]
    pub fn periodic_y(&self) -> bool {
        self.boundary.periodic_y()
    }

    pub fn lx(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn ly(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    pub fn eta_shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn u_shape(&self) -> (usize, usize) {
        (self.x_faces(), self.ny)
    }

    pub fn v_shape(&self) -> (usize, usize) {
        (self.nx, self.y_faces())
    }

    /// Vorticity (corner) points, including wall corners in closed directions.
    pub fn corner_shape(&self) -> (usize, usize) {
        (self.x_faces(), self.y_faces())
    }

    pub fn x_faces(&self) -> usize {
        if self.periodic_x() {
            self.nx
        } else {
            self.nx + 1
        }
    }

    pub fn y_faces(&self) -> usize {
        if self.periodic_y() {
            self.ny
        } else {
            self.ny + 1
        }
    }

    #[inline]
    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }
    #[inline]
    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy
    }
    #[inline]
    pub fn x_face(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }
    #[inline]
    pub fn y_face(&self, j: usize) -> f64 {
        j as f64 * self.dy
    }

    pub fn y_mid(&self) -> f64 {
        0.5 * self.ly()
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn total_dofs(&self) -> usize {
        let (a, b) = self.u_shape();
        let (c, d) = self.v_shape();
        a * b + c * d + self.nx * self.ny
    }

    /// Same physical domain resolved with `nx × ny` cells.
    pub fn rescaled(&self, nx: usize, ny: usize) -> Result<Self> {
        Grid::new(nx, ny, self.lx() / nx as f64, self.ly() / ny as f64, self.boundary)
    }
}

/// Validating constructor with the argument order used throughout the docs.
pub fn make_grid(nx: usize, ny: usize, dx: f64, dy: f64, boundary: Boundary) -> Result<Grid> {
    Grid::new(nx, ny, dx, dy, boundary)
}
