//! Dispersion relations and plane-wave initial states.

use serde::{Deserialize, Serialize};

use crate::field::Field;
use crate::grid::Grid;
use crate::math;
use crate::params::PhysParams;
use crate::state::State;
use crate::{Error, Result};

/// A plane wave η = A cos(kx + ly − ωt).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSpec {
    pub k: f64,
    pub l: f64,
    /// Vertical wavenumber; only the internal-wave calculator reads it.
    pub m: f64,
    pub omega: f64,
    pub amplitude: f64,
}

impl WaveSpec {
    /// Wave with lattice indices (jx, jy) on a periodic grid and its discrete
    /// Poincaré frequency.
    pub fn on_lattice(jx: i64, jy: i64, amplitude: f64, grid: &Grid, params: &PhysParams) -> Self {
        let k = 2.0 * math::PI * jx as f64 / grid.lx();
        let l = 2.0 * math::PI * jy as f64 / grid.ly();
        Self { k, l, m: 0.0, omega: discrete_poincare_frequency(k, l, grid, params), amplitude }
    }
}

/// ω = √((f²m² + N²(k²+l²)) / (k²+l²+m²)).
pub fn dispersion_internal_wave(k: f64, l: f64, m: f64, f: f64, n: f64) -> Result<f64> {
    if k == 0.0 && l == 0.0 && m == 0.0 {
        return Err(Error::ZeroWavevector);
    }
    if !(n >= 0.0) {
        return Err(Error::InvalidParams("buoyancy frequency must be >= 0".into()));
    }
    // Normalise first so the result depends only on direction and extreme
    // magnitudes do not overflow.
    let scale = k.abs().max(l.abs()).max(m.abs());
    let (k, l, m) = (k / scale, l / scale, m / scale);
    let kh2 = k * k + l * l;
    let w2 = (f * f * m * m + n * n * kh2) / (kh2 + m * m);
    // Clamp rounding excursions outside [min, max](f², N²).
    let lo = (f * f).min(n * n);
    let hi = (f * f).max(n * n);
    Ok(math::sqrt(w2.clamp(lo, hi)))
}

/// ω = √(f0² + gH(k²+l²)).
pub fn dispersion_poincare(k: f64, l: f64, params: &PhysParams) -> Result<f64> {
    if k == 0.0 && l == 0.0 {
        return Err(Error::ZeroWavevector);
    }
    Ok(math::sqrt(params.f0 * params.f0 + params.g * params.h * (k * k + l * l)))
}

/// Quasi-geostrophic Rossby branch ω = −βk / (k² + l² + 1/L_D²).
pub fn dispersion_rossby(k: f64, l: f64, params: &PhysParams) -> Result<f64> {
    if params.f0 == 0.0 {
        return Err(Error::ZeroCoriolis);
    }
    if params.beta == 0.0 {
        return Err(Error::ZeroBeta);
    }
    if k == 0.0 && l == 0.0 {
        return Err(Error::ZeroWavevector);
    }
    let ld = params.deformation_radius().ok_or(Error::ZeroCoriolis)?;
    Ok(-params.beta * k / (k * k + l * l + 1.0 / (ld * ld)))
}

/// Grid symbols of the C-grid operators for wavenumber (k, l): the
/// difference operators act as i·sx, i·sy and the four-point average as c.
pub fn grid_symbols(k: f64, l: f64, grid: &Grid) -> (f64, f64, f64) {
    let (hx, hy) = (0.5 * k * grid.dx(), 0.5 * l * grid.dy());
    let sx = 2.0 * math::sin(hx) / grid.dx();
    let sy = 2.0 * math::sin(hy) / grid.dy();
    (sx, sy, math::cos(hx) * math::cos(hy))
}

/// Frequency of the discrete linear f-plane plane wave:
/// ω² = f0²c² + gH(sx² + sy²).
pub fn discrete_poincare_frequency(k: f64, l: f64, grid: &Grid, params: &PhysParams) -> f64 {
    let (sx, sy, c) = grid_symbols(k, l, grid);
    math::sqrt(params.f0 * params.f0 * c * c + params.g * params.h * (sx * sx + sy * sy))
}

/// Integer lattice indices of (k, l), or `OffLatticeWavenumber`.
pub fn lattice_indices(k: f64, l: f64, grid: &Grid) -> Result<(i64, i64)> {
    let snap = |kk: f64, len: f64| -> Result<i64> {
        let j = kk * len / (2.0 * math::PI);
        let r = math::round(j);
        if (j - r).abs() > 1e-9 * r.abs().max(1.0) {
            return Err(Error::OffLatticeWavenumber);
        }
        Ok(r as i64)
    };
    Ok((snap(k, grid.lx())?, snap(l, grid.ly())?))
}

/// Discrete Poincaré eigenmode with η = A cos(kx + ly) at t = 0.
///
/// The velocities are the exact eigenvector of the semi-discrete linear
/// system, which coincides with the continuum polarisation up to O(dx²).
pub fn init_poincare_wave(spec: &WaveSpec, grid: &Grid, params: &PhysParams) -> Result<State> {
    poincare_wave_at_phase(spec, grid, params, 0.0)
}

/// The eigenmode with θ replaced by θ − `phase`: the state the wave reaches
/// after time `phase / ω`.
pub fn poincare_wave_at_phase(spec: &WaveSpec, grid: &Grid, params: &PhysParams, phase: f64) -> Result<State> {
    if !(grid.periodic_x() && grid.periodic_y()) {
        return Err(Error::Unsupported("plane waves need a doubly periodic grid".into()));
    }
    if params.beta != 0.0 || params.nonlinear {
        return Err(Error::Unsupported("plane waves need a linear f-plane".into()));
    }
    let (jx, jy) = lattice_indices(spec.k, spec.l, grid)?;
    if jx == 0 && jy == 0 {
        return Err(Error::ZeroWavevector);
    }
    // Evaluate the phase from the lattice indices so it is exactly periodic.
    let (k, l) = (2.0 * math::PI * jx as f64 / grid.lx(), 2.0 * math::PI * jy as f64 / grid.ly());
    let (sx, sy, c) = grid_symbols(k, l, grid);
    let s2 = sx * sx + sy * sy;
    let omega = discrete_poincare_frequency(k, l, grid, params);
    let (a, f, h) = (spec.amplitude, params.f0, params.h);
    let mut st = State::rest(grid);
    if spec.amplitude == 0.0 {
        return Ok(st);
    }
    st.eta =
        Field::from_fn(grid.nx(), grid.ny(), |i, j| a * math::cos(k * grid.x_center(i) + l * grid.y_center(j) - phase));
    st.u = Field::from_fn(grid.nx(), grid.ny(), |i, j| {
        let th = k * grid.x_face(i) + l * grid.y_center(j) - phase;
        a / (h * s2) * (omega * sx * math::cos(th) - f * c * sy * math::sin(th))
    });
    st.v = Field::from_fn(grid.nx(), grid.ny(), |i, j| {
        let th = k * grid.x_center(i) + l * grid.y_face(j) - phase;
        a / (h * s2) * (omega * sy * math::cos(th) + f * c * sx * math::sin(th))
    });
    Ok(st)
}
