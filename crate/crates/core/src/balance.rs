//! Geostrophic balance on the C-grid.
//!
//! The discrete balanced state is built from a streamfunction ψ on cell
//! corners: u = −δy ψ, v = δx ψ and η = (f/g)·A4ψ, where A4 averages the
//! four corners of each cell. With the scheme's four-point Coriolis average
//! this is an exact steady state of the linear f-plane equations, and it is
//! non-divergent by construction.
//!
//! Going from η to ψ applies the pseudo-inverse of A4. A4 is a tensor
//! product of one-dimensional two-point averages, so the inverse is applied
//! one direction at a time.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diagnostics::relative_vorticity;
use crate::field::Field;
use crate::grid::{Boundary, Grid};
use crate::math;
use crate::params::PhysParams;
use crate::state::State;
use crate::{Error, Result};

/// Divergence tolerance factor: tol_div = DIV_TOL · max_speed / min(dx, dy).
pub const DIV_TOL: f64 = 1e-10;
pub const ORTH_TOL: f64 = 1e-8;
pub const ROUNDTRIP_TOL: f64 = 1e-8;

const CG_TOL: f64 = 1e-14;
const CG_ACCEPT: f64 = 1e-10;

/// Recipe for one balanced flow feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BalanceKind {
    /// Gaussian η anomaly of amplitude η₀ and e-folding width `width`.
    Vortex { x0: f64, y0: f64, amplitude: f64, width: f64 },
    /// Elongated Gaussian ridge oriented at `angle_deg` (counterclockwise
    /// from +x). η varies across the jet on scale `width` and tapers along
    /// it on scale `length`.
    Jet { x0: f64, y0: f64, angle_deg: f64, amplitude: f64, width: f64, length: f64 },
}

impl BalanceKind {
    pub fn amplitude(&self) -> f64 {
        match *self {
            BalanceKind::Vortex { amplitude, .. } | BalanceKind::Jet { amplitude, .. } => amplitude,
        }
    }

    /// η anomaly at cell centers. Distances use the minimum image in
    /// periodic directions.
    pub fn eta(&self, grid: &Grid) -> Field {
        let (lx, ly) = (grid.lx(), grid.ly());
        let wrap = |d: f64, l: f64, periodic: bool| {
            if periodic {
                d - l * math::round(d / l)
            } else {
                d
            }
        };
        Field::from_fn(grid.nx(), grid.ny(), |i, j| {
            let (x, y) = (grid.x_center(i), grid.y_center(j));
            match *self {
                BalanceKind::Vortex { x0, y0, amplitude, width } => {
                    let dx = wrap(x - x0, lx, grid.periodic_x());
                    let dy = wrap(y - y0, ly, grid.periodic_y());
                    amplitude * math::exp(-(dx * dx + dy * dy) / (2.0 * width * width))
                }
                BalanceKind::Jet { x0, y0, angle_deg, amplitude, width, length } => {
                    let dx = wrap(x - x0, lx, grid.periodic_x());
                    let dy = wrap(y - y0, ly, grid.periodic_y());
                    let th = angle_deg.to_radians();
                    let (c, s) = (math::cos(th), math::sin(th));
                    let along = dx * c + dy * s;
                    let across = -dx * s + dy * c;
                    amplitude
                        * math::exp(-across * across / (2.0 * width * width) - along * along / (2.0 * length * length))
                }
            }
        })
    }
}

/// A discretely balanced (u, v, η) triple and the recipe it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedField {
    pub eta: Field,
    pub u: Field,
    pub v: Field,
    pub kinds: Vec<BalanceKind>,
}

impl BalancedField {
    /// Superposes the recipes' η and balances the sum.
    pub fn construct(kinds: &[BalanceKind], grid: &Grid, params: &PhysParams) -> Result<Self> {
        let mut eta = Field::zeros(grid.nx(), grid.ny());
        for k in kinds {
            eta.axpy(1.0, &k.eta(grid));
        }
        let (u, v, eta) = balance_eta(&eta, grid, params)?;
        Ok(Self { eta, u, v, kinds: kinds.to_vec() })
    }

    pub fn into_state(self, grid: &Grid) -> State {
        let mut s = State::rest(grid);
        s.u = self.u;
        s.v = self.v;
        s.eta = self.eta;
        s
    }
}

/// Geostrophic velocities for η on the f-plane (f = f0).
pub fn geostrophic_from_eta(eta: &Field, grid: &Grid, params: &PhysParams) -> Result<(Field, Field)> {
    let (u, v, _) = balance_eta(eta, grid, params)?;
    Ok((u, v))
}

/// Geostrophic velocities plus the balanced projection of η (η minus the
/// part A4 cannot represent, e.g. grid-scale checkerboards).
pub fn balance_eta(eta: &Field, grid: &Grid, params: &PhysParams) -> Result<(Field, Field, Field)> {
    if params.f0 == 0.0 {
        return Err(Error::ZeroCoriolis);
    }
    expect_shape("eta", eta, grid.eta_shape())?;
    let mut psi = invert_a4(eta, grid, WallGauge::Smooth);
    let scale = params.g / params.f0;
    psi.as_mut_slice().iter_mut().for_each(|p| *p *= scale);
    fit_walls(&mut psi, grid);
    flatten_walls(&mut psi, grid);
    canonical_null(&mut psi, grid);
    let (u, v) = velocities_from_streamfunction(&psi, grid);
    let mut eta_bal = average_to_centers(&psi, grid);
    let back = params.f0 / params.g;
    eta_bal.as_mut_slice().iter_mut().for_each(|e| *e *= back);
    Ok((u, v, eta_bal))
}

/// η from a non-divergent (u, v) on the f-plane, mean removed.
///
/// Solves ∇²ψ = ζ on the corner grid (conjugate gradients, 5-point
/// Laplacian) and maps back with η = (f/g)·A4ψ.
pub fn eta_from_velocity(u: &Field, v: &Field, grid: &Grid, params: &PhysParams) -> Result<Field> {
    if params.f0 == 0.0 {
        return Err(Error::ZeroCoriolis);
    }
    expect_shape("u", u, grid.u_shape())?;
    expect_shape("v", v, grid.v_shape())?;
    let max_speed = u.max_abs().max(v.max_abs());
    let div = divergence(u, v, grid).max_abs();
    let tol = DIV_TOL * max_speed / grid.dx().min(grid.dy());
    if div > tol {
        return Err(Error::DivergentInput { residual: div, tolerance: tol });
    }
    let psi = streamfunction(u, v, grid)?;
    let mut eta = average_to_centers(&psi, grid);
    let scale = params.f0 / params.g;
    let mean = eta.mean();
    eta.as_mut_slice().iter_mut().for_each(|e| *e = (*e - mean) * scale);
    Ok(eta)
}

/// Cell-centered ∂u/∂x + ∂v/∂y.
pub fn divergence(u: &Field, v: &Field, grid: &Grid) -> Field {
    let (nx, ny) = (grid.nx(), grid.ny());
    let px = grid.periodic_x();
    let py = grid.periodic_y();
    Field::from_fn(nx, ny, |i, j| {
        let ie = if px { (i + 1) % nx } else { i + 1 };
        let jn = if py { (j + 1) % ny } else { j + 1 };
        (u[(ie, j)] - u[(i, j)]) / grid.dx() + (v[(i, jn)] - v[(i, j)]) / grid.dy()
    })
}

fn expect_shape(field: &'static str, f: &Field, expected: (usize, usize)) -> Result<()> {
    if f.shape() != expected {
        return Err(Error::ShapeMismatch { field, expected, got: f.shape() });
    }
    Ok(())
}

/// A4: corner values averaged to cell centers.
pub fn average_to_centers(psi: &Field, grid: &Grid) -> Field {
    let (nx, ny) = (grid.nx(), grid.ny());
    let px = grid.periodic_x();
    let py = grid.periodic_y();
    Field::from_fn(nx, ny, |i, j| {
        let ie = if px { (i + 1) % nx } else { i + 1 };
        let jn = if py { (j + 1) % ny } else { j + 1 };
        0.25 * ((psi[(i, j)] + psi[(ie, j)]) + (psi[(i, jn)] + psi[(ie, jn)]))
    })
}

/// Corner pressure: a corner field whose four-point average reproduces the
/// representable part of `eta`, pinned to zero at the first wall corner.
///
/// For a balanced field (ψ constant along walls) this differs from ψ only by
/// a constant plus alternating modes, which centered two-cell differences
/// annihilate.
pub fn corner_pressure(eta: &Field, grid: &Grid) -> Field {
    invert_a4(eta, grid, WallGauge::Pinned)
}

#[derive(Debug, Clone, Copy)]
enum WallGauge {
    /// Pick the null-mode coefficient minimising second differences.
    Smooth,
    /// First value along the line is zero.
    Pinned,
}

fn invert_a4(eta: &Field, grid: &Grid, gauge: WallGauge) -> Field {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (cx, cy) = grid.corner_shape();
    // x direction, row by row.
    let mut half = Field::zeros(cx, ny);
    let mut row = vec![0.0; nx];
    for j in 0..ny {
        for i in 0..nx {
            row[i] = eta[(i, j)];
        }
        let x = invert_average(&row, grid.periodic_x(), gauge);
        for (i, xi) in x.into_iter().enumerate() {
            half[(i, j)] = xi;
        }
    }
    // y direction, column by column.
    let mut psi = Field::zeros(cx, cy);
    let mut col = vec![0.0; ny];
    for i in 0..cx {
        for j in 0..ny {
            col[j] = half[(i, j)];
        }
        let y = invert_average(&col, grid.periodic_y(), gauge);
        for (j, yj) in y.into_iter().enumerate() {
            psi[(i, j)] = yj;
        }
    }
    psi
}

/// Solves (x_k + x_{k+1})/2 = b_k.
///
/// Periodic (x has n entries): minimum-norm least-squares solution; for even
/// n the alternating vector is in the null space and its component of `b`
/// is unrepresentable.
///
/// Walled (x has n + 1 entries): the alternating vector is again the null
/// space. `Smooth` picks its coefficient to minimise the second-difference
/// energy, which recovers linear and interior-localised profiles exactly.
fn invert_average(b: &[f64], periodic: bool, gauge: WallGauge) -> Vec<f64> {
    let n = b.len();
    let alt = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    if periodic {
        let mut x = vec![0.0; n];
        if n % 2 == 1 {
            x[0] = (0..n).map(|k| alt(k) * b[k]).fold(0.0, |a, t| a + t);
            for k in 0..n - 1 {
                x[k + 1] = 2.0 * b[k] - x[k];
            }
            return x;
        }
        let c = (0..n).map(|k| alt(k) * b[k]).fold(0.0, |a, t| a + t) / n as f64;
        for k in 0..n - 1 {
            let bk = b[k] - c * alt(k);
            x[k + 1] = 2.0 * bk - x[k];
        }
        let d = (0..n).map(|k| alt(k) * x[k]).fold(0.0, |a, t| a + t) / n as f64;
        for (k, xk) in x.iter_mut().enumerate() {
            *xk -= d * alt(k);
        }
        x
    } else {
        let mut x = vec![0.0; n + 1];
        for k in 0..n {
            x[k + 1] = 2.0 * b[k] - x[k];
        }
        if let WallGauge::Pinned = gauge {
            return x;
        }
        let mut num = 0.0;
        for k in 1..n {
            num += (x[k - 1] - 2.0 * x[k] + x[k + 1]) * alt(k);
        }
        let c = num / (4.0 * (n - 1) as f64);
        for (k, xk) in x.iter_mut().enumerate() {
            *xk += c * alt(k);
        }
        x
    }
}

fn alt(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Wall group of a corner: closed basins have one connected wall, channels
/// a southern (0) and a northern (1) one.
fn wall_group(i: usize, j: usize, grid: &Grid) -> Option<usize> {
    let (cx, cy) = grid.corner_shape();
    match grid.boundary() {
        Boundary::PeriodicXY => None,
        Boundary::ChannelPeriodicX => {
            if j == 0 {
                Some(0)
            } else if j == cy - 1 {
                Some(1)
            } else {
                None
            }
        }
        Boundary::ClosedBasin => (i == 0 || j == 0 || i == cx - 1 || j == cy - 1).then_some(0),
    }
}

/// The wall-constant element of the A4 null space, if the grid has one.
/// Adding it shifts every wall value equally and leaves A4ψ unchanged.
fn wall_constant_null(grid: &Grid) -> Option<Field> {
    let (cx, cy) = grid.corner_shape();
    match grid.boundary() {
        Boundary::PeriodicXY => None,
        // The two channel walls may carry different constants.
        Boundary::ChannelPeriodicX => Some(Field::from_fn(cx, cy, |_, j| alt(j))),
        Boundary::ClosedBasin => (grid.nx() % 2 == 0 && grid.ny() % 2 == 0)
            .then(|| Field::from_fn(cx, cy, |i, j| alt(i) + alt(j) - alt(i) * alt(j))),
    }
}

/// Adds the A4 null-space element (alternating along walled directions)
/// that brings ψ closest, in least squares, to being constant along each
/// wall. If η admits a wall-constant ψ this finds it exactly, so the later
/// flattening changes nothing.
fn fit_walls(psi: &mut Field, grid: &Grid) {
    let (cx, cy) = grid.corner_shape();
    let walled_x = !grid.periodic_x();
    let walled_y = !grid.periodic_y();
    if !walled_x && !walled_y {
        return;
    }
    let groups = match grid.boundary() {
        Boundary::ChannelPeriodicX => 2,
        _ => 1,
    };
    // Unknowns: b_j (x-alternating rows), a_i (y-alternating columns), then
    // one constant per wall group. With both directions walled the fully
    // alternating mode is shared by the rows and columns, so b_0 is fixed.
    // When a wall-constant null mode exists the first group constant is
    // fixed too; canonical_null chooses it afterwards.
    let b_start = usize::from(walled_x && walled_y);
    let row_idx = |j: usize| -> Option<usize> { (walled_x && j >= b_start).then(|| j - b_start) };
    let n_rows = if walled_x { cy - b_start } else { 0 };
    let col_idx = |i: usize| -> Option<usize> { walled_y.then_some(n_rows + i) };
    let n_cols = if walled_y { cx } else { 0 };
    let first_free = usize::from(wall_constant_null(grid).is_some());
    let const_idx = |g: usize| -> Option<usize> { (g >= first_free).then(|| n_rows + n_cols + g - first_free) };
    let n = n_rows + n_cols + groups - first_free;

    let mut normal = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for i in 0..cx {
        for j in 0..cy {
            let Some(g) = wall_group(i, j, grid) else {
                continue;
            };
            let mut terms: [(usize, f64); 3] = [(0, 0.0); 3];
            let mut len = 0;
            if let Some(k) = row_idx(j) {
                terms[len] = (k, alt(i));
                len += 1;
            }
            if let Some(k) = col_idx(i) {
                terms[len] = (k, alt(j));
                len += 1;
            }
            if let Some(k) = const_idx(g) {
                terms[len] = (k, -1.0);
                len += 1;
            }
            for &(p, wp) in &terms[..len] {
                for &(q, wq) in &terms[..len] {
                    normal[p * n + q] += wp * wq;
                }
                rhs[p] -= wp * psi[(i, j)];
            }
        }
    }
    let Some(theta) = solve_spd(normal, rhs) else {
        return;
    };
    for i in 0..cx {
        for j in 0..cy {
            let mut add = 0.0;
            if let Some(k) = row_idx(j) {
                add += theta[k] * alt(i);
            }
            if let Some(k) = col_idx(i) {
                add += theta[k] * alt(j);
            }
            psi[(i, j)] += add;
        }
    }
}

/// Cholesky solve of a dense symmetric positive definite system; `None`
/// if it is numerically singular.
fn solve_spd(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = (0..n).map(|k| a[k * n + k]).fold(0.0, f64::max);
    for k in 0..n {
        let mut d = a[k * n + k];
        for m in 0..k {
            d -= a[k * n + m] * a[k * n + m];
        }
        if !(d > 1e-12 * scale) {
            return None;
        }
        let d = math::sqrt(d);
        a[k * n + k] = d;
        for r in k + 1..n {
            let mut v = a[r * n + k];
            for m in 0..k {
                v -= a[r * n + m] * a[k * n + m];
            }
            a[r * n + k] = v / d;
        }
    }
    for k in 0..n {
        let mut v = b[k];
        for m in 0..k {
            v -= a[k * n + m] * b[m];
        }
        b[k] = v / a[k * n + k];
    }
    for k in (0..n).rev() {
        let mut v = b[k];
        for m in k + 1..n {
            v -= a[m * n + k] * b[m];
        }
        b[k] = v / a[k * n + k];
    }
    Some(b)
}

/// Σ of products of second differences along both directions.
fn second_difference_dot(a: &Field, b: &Field, grid: &Grid) -> f64 {
    let (cx, cy) = a.shape();
    let px = grid.periodic_x();
    let py = grid.periodic_y();
    let mut acc = 0.0;
    for i in 0..cx {
        for j in 0..cy {
            if px || (i > 0 && i + 1 < cx) {
                let (w, e) = ((i + cx - 1) % cx, (i + 1) % cx);
                acc += (a[(w, j)] - 2.0 * a[(i, j)] + a[(e, j)]) * (b[(w, j)] - 2.0 * b[(i, j)] + b[(e, j)]);
            }
            if py || (j > 0 && j + 1 < cy) {
                let (s, n) = ((j + cy - 1) % cy, (j + 1) % cy);
                acc += (a[(i, s)] - 2.0 * a[(i, j)] + a[(i, n)]) * (b[(i, s)] - 2.0 * b[(i, j)] + b[(i, n)]);
            }
        }
    }
    acc
}

/// Fixes the remaining freedom, a multiple of the wall-constant null mode,
/// by minimising second-difference energy. Together with fit_walls this
/// makes the η → ψ map a projection: re-balancing a balanced η returns the
/// same ψ.
fn canonical_null(psi: &mut Field, grid: &Grid) {
    let Some(mode) = wall_constant_null(grid) else {
        return;
    };
    let t = -second_difference_dot(psi, &mode, grid) / second_difference_dot(&mode, &mode, grid);
    psi.axpy(t, &mode);
}

/// Makes ψ constant along each connected wall so that no fluid crosses it.
/// Only matters when η has not decayed at the walls.
fn flatten_walls(psi: &mut Field, grid: &Grid) {
    let (cx, cy) = grid.corner_shape();
    match grid.boundary() {
        Boundary::PeriodicXY => {}
        Boundary::ChannelPeriodicX => {
            for j in [0, cy - 1] {
                let m = (0..cx).map(|i| psi[(i, j)]).fold(0.0, |a, t| a + t) / cx as f64;
                (0..cx).for_each(|i| psi[(i, j)] = m);
            }
        }
        Boundary::ClosedBasin => {
            let on_wall = |i: usize, j: usize| i == 0 || j == 0 || i == cx - 1 || j == cy - 1;
            let (mut sum, mut count) = (0.0, 0usize);
            for i in 0..cx {
                for j in 0..cy {
                    if on_wall(i, j) {
                        sum += psi[(i, j)];
                        count += 1;
                    }
                }
            }
            let m = sum / count as f64;
            for i in 0..cx {
                for j in 0..cy {
                    if on_wall(i, j) {
                        psi[(i, j)] = m;
                    }
                }
            }
        }
    }
}

/// u = −δy ψ, v = δx ψ; normal velocity on closed walls is set to zero.
pub fn velocities_from_streamfunction(psi: &Field, grid: &Grid) -> (Field, Field) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let px = grid.periodic_x();
    let py = grid.periodic_y();
    let (ux, uy) = grid.u_shape();
    let (vx, vy) = grid.v_shape();
    let u = Field::from_fn(ux, uy, |i, j| {
        if !px && (i == 0 || i == nx) {
            return 0.0;
        }
        let jn = if py { (j + 1) % ny } else { j + 1 };
        -(psi[(i, jn)] - psi[(i, j)]) / grid.dy()
    });
    let v = Field::from_fn(vx, vy, |i, j| {
        if !py && (j == 0 || j == ny) {
            return 0.0;
        }
        let ie = if px { (i + 1) % nx } else { i + 1 };
        (psi[(ie, j)] - psi[(i, j)]) / grid.dx()
    });
    (u, v)
}

/// Streamfunction of a non-divergent flow: ∇²ψ = ζ on corners.
///
/// Periodic directions use a mean-zero gauge. Closed walls are ψ = 0; in a
/// channel the north wall carries ψ = −(zonal transport).
pub fn streamfunction(u: &Field, v: &Field, grid: &Grid) -> Result<Field> {
    let mut st = State::rest(grid);
    st.u = u.clone();
    st.v = v.clone();
    let zeta = relative_vorticity(&st, grid)?;
    let (cx, cy) = grid.corner_shape();
    let px = grid.periodic_x();
    let py = grid.periodic_y();
    let free = |i: usize, j: usize| (px || (i > 0 && i + 1 < cx)) && (py || (j > 0 && j + 1 < cy));

    let mut boundary = Field::zeros(cx, cy);
    if px && !py {
        let mut transport = 0.0;
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                transport += u[(i, j)] * grid.dy();
            }
        }
        transport /= grid.nx() as f64;
        for i in 0..cx {
            boundary[(i, cy - 1)] = -transport;
        }
    }

    let (idx2, idy2) = (1.0 / (grid.dx() * grid.dx()), 1.0 / (grid.dy() * grid.dy()));
    // −∇² on the full corner array; non-free nodes read as whatever the
    // input holds there and produce zero output.
    let neg_lap = |z: &Field, out: &mut Field| {
        for i in 0..cx {
            for j in 0..cy {
                if !free(i, j) {
                    out[(i, j)] = 0.0;
                    continue;
                }
                let (iw, ie) = if px { ((i + cx - 1) % cx, (i + 1) % cx) } else { (i - 1, i + 1) };
                let (js, jn) = if py { ((j + cy - 1) % cy, (j + 1) % cy) } else { (j - 1, j + 1) };
                let c = z[(i, j)];
                out[(i, j)] =
                    -((z[(iw, j)] - 2.0 * c + z[(ie, j)]) * idx2 + (z[(i, js)] - 2.0 * c + z[(i, jn)]) * idy2);
            }
        }
    };

    let mut rhs = Field::zeros(cx, cy);
    let mut lap_bc = Field::zeros(cx, cy);
    neg_lap(&boundary, &mut lap_bc);
    for i in 0..cx {
        for j in 0..cy {
            if free(i, j) {
                rhs[(i, j)] = -zeta[(i, j)] - lap_bc[(i, j)];
            }
        }
    }
    let singular = px && py;
    let delta = conjugate_gradient(neg_lap, &rhs, singular)?;
    let mut psi = boundary;
    psi.axpy(1.0, &delta);
    Ok(psi)
}

/// CG for a symmetric positive (semi-)definite operator. With `singular`
/// the constant null space is projected out of the iterates.
fn conjugate_gradient(apply: impl Fn(&Field, &mut Field), b: &Field, singular: bool) -> Result<Field> {
    let (nx, ny) = b.shape();
    let project = |f: &mut Field| {
        if singular {
            let m = f.mean();
            f.as_mut_slice().iter_mut().for_each(|x| *x -= m);
        }
    };
    let dot = |a: &Field, c: &Field| a.as_slice().iter().zip(c.as_slice()).fold(0.0, |acc, (x, y)| acc + x * y);
    let mut r = b.clone();
    project(&mut r);
    let bnorm = math::sqrt(dot(&r, &r));
    let mut x = Field::zeros(nx, ny);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut p = r.clone();
    let mut ap = Field::zeros(nx, ny);
    let mut rr = dot(&r, &r);
    let max_iter = 20 * nx * ny + 100;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        project(&mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = dot(&r, &r);
        let rel = math::sqrt(rr_new) / bnorm;
        if rel <= CG_TOL {
            rr = rr_new;
            break;
        }
        if rel < 0.5 * best {
            best = rel;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 200 && rel <= CG_ACCEPT {
                rr = rr_new;
                break;
            }
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pk, rk) in p.as_mut_slice().iter_mut().zip(r.as_slice()) {
            *pk = rk + beta * *pk;
        }
    }
    // Report the true residual, not the recurrence.
    let mut ax = Field::zeros(nx, ny);
    apply(&x, &mut ax);
    project(&mut ax);
    let mut res = b.clone();
    project(&mut res);
    res.axpy(-1.0, &ax);
    let rel = math::sqrt(dot(&res, &res)) / bnorm;
    let _ = rr;
    if rel > CG_ACCEPT {
        return Err(Error::NoConvergence(rel));
    }
    project(&mut x);
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(residual: f64, tolerance: f64) -> Self {
        Self { passed: residual <= tolerance, residual, tolerance }
    }
}

/// Outcome of the three balance validity predicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// L∞ of the discrete divergence.
    pub divergence: Check,
    /// Normalised |u·∇p| at interior corners, p the corner pressure A4⁺η.
    pub orthogonality: Check,
    /// Relative L∞ mismatch of η against η recovered from (u, v).
    pub roundtrip: Check,
}

impl ValidityReport {
    pub fn all_passed(&self) -> bool {
        self.divergence.passed && self.orthogonality.passed && self.roundtrip.passed
    }
}

pub fn validity_checks(u: &Field, v: &Field, eta: &Field, grid: &Grid, params: &PhysParams) -> ValidityReport {
    let shapes_ok = u.shape() == grid.u_shape() && v.shape() == grid.v_shape() && eta.shape() == grid.eta_shape();
    if !shapes_ok {
        let bad = Check::new(f64::INFINITY, 0.0);
        return ValidityReport { divergence: bad, orthogonality: bad, roundtrip: bad };
    }
    let max_speed = u.max_abs().max(v.max_abs());
    let div = divergence(u, v, grid).max_abs();
    let divergence_check = Check::new(div, DIV_TOL * max_speed / grid.dx().min(grid.dy()));

    let orthogonality = Check::new(orthogonality_residual(u, v, eta, grid), ORTH_TOL);

    let roundtrip_residual = match eta_from_velocity(u, v, grid, params) {
        Ok(recovered) => {
            let m = eta.mean();
            let centered = eta.map(|e| e - m);
            let scale = centered.max_abs();
            let diff = recovered.max_abs_diff(&centered);
            if scale == 0.0 {
                diff
            } else {
                diff / scale
            }
        }
        Err(_) => f64::INFINITY,
    };
    ValidityReport {
        divergence: divergence_check,
        orthogonality,
        roundtrip: Check::new(roundtrip_residual, ROUNDTRIP_TOL),
    }
}

/// ∑|u_c·∇p| / ∑|u_c||∇p| over interior corners.
pub fn orthogonality_residual(u: &Field, v: &Field, eta: &Field, grid: &Grid) -> f64 {
    let p = corner_pressure(eta, grid);
    let (nx, ny) = (grid.nx(), grid.ny());
    let (cx, cy) = grid.corner_shape();
    let px = grid.periodic_x();
    let py = grid.periodic_y();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..cx {
        if !px && (i == 0 || i == nx) {
            continue;
        }
        let (iw, ie) = if px { ((i + cx - 1) % cx, (i + 1) % cx) } else { (i - 1, i + 1) };
        let iw_cell = if px { (i + nx - 1) % nx } else { i - 1 };
        for j in 0..cy {
            if !py && (j == 0 || j == ny) {
                continue;
            }
            let (js, jn) = if py { ((j + cy - 1) % cy, (j + 1) % cy) } else { (j - 1, j + 1) };
            let js_cell = if py { (j + ny - 1) % ny } else { j - 1 };
            let uc = 0.5 * (u[(i, js_cell)] + u[(i, j % ny)]);
            let vc = 0.5 * (v[(iw_cell, j)] + v[(i % nx, j)]);
            let gx = (p[(ie, j)] - p[(iw, j)]) / (2.0 * grid.dx());
            let gy = (p[(i, jn)] - p[(i, js)]) / (2.0 * grid.dy());
            num += (uc * gx + vc * gy).abs();
            den += math::hypot(uc, vc) * math::hypot(gx, gy);
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Largest violation of the discrete geostrophic relations
/// f·v̄ = g δxη (u points) and f·ū = −g δyη (v points), relative to the
/// largest pressure-gradient term.
pub fn geostrophic_residual(u: &Field, v: &Field, eta: &Field, grid: &Grid, params: &PhysParams) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let px = grid.periodic_x();
    let py = grid.periodic_y();
    let f = params.f0;
    let g = params.g;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..grid.x_faces() {
        if !px && (i == 0 || i == nx) {
            continue;
        }
        let iw = if px { (i + nx - 1) % nx } else { i - 1 };
        for j in 0..ny {
            let jn = if py { (j + 1) % ny } else { j + 1 };
            let vbar = 0.25 * ((v[(iw, j)] + v[(i, j)]) + (v[(iw, jn)] + v[(i, jn)]));
            let pg = g * (eta[(i % nx, j)] - eta[(iw, j)]) / grid.dx();
            worst = worst.max((f * vbar - pg).abs());
            scale = scale.max(pg.abs());
        }
    }
    for i in 0..nx {
        let ie = if px { (i + 1) % nx } else { i + 1 };
        for j in 0..grid.y_faces() {
            if !py && (j == 0 || j == ny) {
                continue;
            }
            let js = if py { (j + ny - 1) % ny } else { j - 1 };
            let ubar = 0.25 * ((u[(i, js)] + u[(ie, js)]) + (u[(i, j % ny)] + u[(ie, j % ny)]));
            let pg = g * (eta[(i, j % ny)] - eta[(i, js)]) / grid.dy();
            worst = worst.max((f * ubar + pg).abs());
            scale = scale.max(pg.abs());
        }
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

#[cfg(test)]
mod tests;
