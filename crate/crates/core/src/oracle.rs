//! Dense reference for the linear semi-discrete system.
//!
//! The operator is assembled by probing the solver's own right-hand side with
//! unit states, so it is exactly the linear map RK4 integrates. Time
//! evolution uses the matrix exponential, which removes all time-stepping
//! error and leaves only the spatial discretization.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::dynamics::{Model, Mutation};
use crate::field::Field;
use crate::grid::Grid;
use crate::math;
use crate::params::PhysParams;
use crate::state::State;
use crate::waves::{lattice_indices, WaveSpec};
use crate::{Error, Result};

/// Largest operator the oracle will assemble.
pub const MAX_DOFS: usize = 20_000;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(x).fold(0.0, |a, (m, v)| a + m * v)).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            let crow = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (c, b) in crow.iter_mut().zip(brow) {
                    *c += a * b;
                }
            }
        }
        out
    }

    /// Σ scale_k · M_k, all of the same size.
    fn combination(terms: &[(f64, &DenseMatrix)]) -> DenseMatrix {
        let n = terms[0].1.n;
        let mut out = DenseMatrix::zeros(n);
        for (s, m) in terms {
            for (o, v) in out.data.iter_mut().zip(&m.data) {
                *o += s * v;
            }
        }
        out
    }

    fn add_identity(&mut self, s: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += s;
        }
    }

    pub fn norm1(&self) -> f64 {
        (0..self.n).map(|j| (0..self.n).map(|i| self.get(i, j).abs()).fold(0.0, |a, v| a + v)).fold(0.0, f64::max)
    }

    /// Solves self · X = rhs by LU with partial pivoting.
    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut b = rhs.data.clone();
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col * n + col].abs();
            for r in col + 1..n {
                let v = a[r * n + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return Err(Error::NoConvergence(f64::INFINITY));
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                    b.swap(col * n + j, piv * n + j);
                }
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let factor = a[r * n + col] / d;
                if factor == 0.0 {
                    continue;
                }
                let (top, bottom) = a.split_at_mut(r * n);
                let prow = &top[col * n..col * n + n];
                for (x, p) in bottom[..n].iter_mut().zip(prow).skip(col) {
                    *x -= factor * p;
                }
                let (btop, bbot) = b.split_at_mut(r * n);
                let brow = &btop[col * n..col * n + n];
                for (x, p) in bbot[..n].iter_mut().zip(brow) {
                    *x -= factor * p;
                }
            }
        }
        for col in (0..n).rev() {
            let d = a[col * n + col];
            for j in 0..n {
                let mut s = b[col * n + j];
                for k in col + 1..n {
                    s -= a[col * n + k] * b[k * n + j];
                }
                b[col * n + j] = s / d;
            }
        }
        Ok(DenseMatrix { n, data: b })
    }
}

/// exp(M) by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(m: &DenseMatrix) -> Result<DenseMatrix> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = m.dim();
    let norm = m.norm1();
    let s = if norm > THETA13 { math::ceil(math::log2(norm / THETA13)) as i32 } else { 0 };
    let scale = math::powi(2.0, -s);
    let a = DenseMatrix { n, data: m.data.iter().map(|v| v * scale).collect() };
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let mut u_inner = a6.matmul(&DenseMatrix::combination(&[(B[13], &a6), (B[11], &a4), (B[9], &a2)]));
    u_inner = DenseMatrix::combination(&[(1.0, &u_inner), (B[7], &a6), (B[5], &a4), (B[3], &a2)]);
    u_inner.add_identity(B[1]);
    let u = a.matmul(&u_inner);
    let mut v = a6.matmul(&DenseMatrix::combination(&[(B[12], &a6), (B[10], &a4), (B[8], &a2)]));
    v = DenseMatrix::combination(&[(1.0, &v), (B[6], &a6), (B[4], &a4), (B[2], &a2)]);
    v.add_identity(B[0]);
    let p = DenseMatrix::combination(&[(1.0, &v), (1.0, &u)]);
    let q = DenseMatrix::combination(&[(1.0, &v), (-1.0, &u)]);
    let mut r = q.solve(&p)?;
    for _ in 0..s {
        r = r.matmul(&r);
    }
    Ok(r)
}

/// Which prognostic array a degree of freedom belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    U,
    V,
    Eta,
}

/// Bijection between (component, i, j) and the flat index: all u, then all
/// v, then all η, each in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    u: (usize, usize),
    v: (usize, usize),
    eta: (usize, usize),
}

impl DofMap {
    pub fn new(grid: &Grid) -> Self {
        Self { u: grid.u_shape(), v: grid.v_shape(), eta: grid.eta_shape() }
    }

    pub fn len(&self) -> usize {
        self.u.0 * self.u.1 + self.v.0 * self.v.1 + self.eta.0 * self.eta.1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, c: Component, i: usize, j: usize) -> usize {
        let nu = self.u.0 * self.u.1;
        let nv = self.v.0 * self.v.1;
        match c {
            Component::U => i * self.u.1 + j,
            Component::V => nu + i * self.v.1 + j,
            Component::Eta => nu + nv + i * self.eta.1 + j,
        }
    }

    pub fn locate(&self, idx: usize) -> (Component, usize, usize) {
        let nu = self.u.0 * self.u.1;
        let nv = self.v.0 * self.v.1;
        if idx < nu {
            (Component::U, idx / self.u.1, idx % self.u.1)
        } else if idx < nu + nv {
            let k = idx - nu;
            (Component::V, k / self.v.1, k % self.v.1)
        } else {
            let k = idx - nu - nv;
            (Component::Eta, k / self.eta.1, k % self.eta.1)
        }
    }

    pub fn flatten(&self, s: &State) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(s.u.as_slice());
        out.extend_from_slice(s.v.as_slice());
        out.extend_from_slice(s.eta.as_slice());
        out
    }

    pub fn unflatten(&self, x: &[f64], time: f64) -> State {
        let nu = self.u.0 * self.u.1;
        let nv = self.v.0 * self.v.1;
        State {
            u: Field::from_vec(self.u.0, self.u.1, x[..nu].to_vec()).expect("u block"),
            v: Field::from_vec(self.v.0, self.v.1, x[nu..nu + nv].to_vec()).expect("v block"),
            eta: Field::from_vec(self.eta.0, self.eta.1, x[nu + nv..].to_vec()).expect("eta block"),
            tracer: None,
            time,
        }
    }

    /// Energy weights: the linear energy is ½·Σ w_i x_i² · dx·dy.
    pub fn energy_weights(&self, params: &PhysParams) -> Vec<f64> {
        let nu = self.u.0 * self.u.1;
        let nv = self.v.0 * self.v.1;
        (0..self.len()).map(|i| if i < nu + nv { params.h } else { params.g }).collect()
    }
}

/// The assembled linear operator dx/dt = A x.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    pub matrix: DenseMatrix,
    pub dof_map: DofMap,
    grid: Grid,
    params: PhysParams,
}

/// Column j of the matrix is the solver tendency of the j-th unit state.
pub fn assemble(grid: &Grid, params: &PhysParams) -> Result<LinearOperator> {
    if params.nonlinear {
        return Err(Error::Unsupported("the oracle covers the linear system only".into()));
    }
    params.validate()?;
    let map = DofMap::new(grid);
    let n = map.len();
    if n > MAX_DOFS {
        return Err(Error::TooLargeGrid { dofs: n, limit: MAX_DOFS });
    }
    let model = Model::new(grid, params, None, Mutation::None);
    let mut matrix = DenseMatrix::zeros(n);
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = 1.0;
        let col = map.flatten(&model.tendency(&map.unflatten(&x, 0.0), 0.0));
        x[j] = 0.0;
        for (i, v) in col.into_iter().enumerate() {
            if v != 0.0 {
                matrix.set(i, j, v);
            }
        }
    }
    Ok(LinearOperator { matrix, dof_map: map, grid: *grid, params: *params })
}

impl LinearOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    pub fn apply(&self, s: &State) -> State {
        self.dof_map.unflatten(&self.matrix.matvec(&self.dof_map.flatten(s)), 0.0)
    }

    /// exp(tA). The exponential is taken of W^½ A W^-½ (W the energy
    /// weights), which is skew-symmetric without friction and much better
    /// scaled than A itself.
    pub fn propagator(&self, t: f64) -> Result<DenseMatrix> {
        let n = self.matrix.dim();
        let w: Vec<f64> = self.dof_map.energy_weights(&self.params).iter().map(|v| math::sqrt(*v)).collect();
        let mut b = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let a = self.matrix.get(i, j);
                if a != 0.0 {
                    b.set(i, j, t * w[i] * a / w[j]);
                }
            }
        }
        let mut e = expm(&b)?;
        for i in 0..n {
            for j in 0..n {
                let v = e.get(i, j);
                e.set(i, j, v * w[j] / w[i]);
            }
        }
        Ok(e)
    }
}

/// Exact solution of the semi-discrete linear system at time `state.time + t`.
pub fn evolve_exact(op: &LinearOperator, state: &State, t: f64) -> Result<State> {
    state.check_shapes(&op.grid)?;
    if t == 0.0 {
        let mut s = state.clone();
        s.tracer = None;
        return Ok(s);
    }
    let e = op.propagator(t)?;
    let x = op.dof_map.flatten(state);
    Ok(op.dof_map.unflatten(&e.matvec(&x), state.time + t))
}

/// Linear energy ½·Σ(H u² + H v² + g η²)·dx·dy of a flat vector.
pub fn energy_norm(x: &[f64], map: &DofMap, grid: &Grid, params: &PhysParams) -> f64 {
    let w = map.energy_weights(params);
    0.5 * x.iter().zip(&w).fold(0.0, |a, (v, wi)| a + wi * v * v) * grid.cell_area()
}

/// Frequency of the Poincaré branch for `spec`'s wavevector, from the 3×3
/// projection of the operator onto the plane-wave subspace.
pub fn discrete_dispersion(op: &LinearOperator, spec: &WaveSpec) -> Result<f64> {
    let apply = |s: &State| op.apply(s);
    projected_frequency(&op.grid, &op.params, spec, apply)
}

/// Same as [`discrete_dispersion`] but applies the solver tendency directly,
/// so it works on grids too large to assemble.
pub fn discrete_dispersion_matrix_free(grid: &Grid, params: &PhysParams, spec: &WaveSpec) -> Result<f64> {
    let model = Model::new(grid, params, None, Mutation::None);
    projected_frequency(grid, params, spec, |s| model.tendency(s, 0.0))
}

fn projected_frequency(
    grid: &Grid,
    params: &PhysParams,
    spec: &WaveSpec,
    apply: impl Fn(&State) -> State,
) -> Result<f64> {
    if !(grid.periodic_x() && grid.periodic_y()) {
        return Err(Error::Unsupported("plane-wave projection needs a doubly periodic grid".into()));
    }
    if params.nonlinear {
        return Err(Error::Unsupported("the oracle covers the linear system only".into()));
    }
    let (jx, jy) = lattice_indices(spec.k, spec.l, grid)?;
    if jx == 0 && jy == 0 {
        return Err(Error::ZeroWavevector);
    }
    let k = 2.0 * math::PI * jx as f64 / grid.lx();
    let l = 2.0 * math::PI * jy as f64 / grid.ly();
    let phase_u = |i: usize, j: usize| k * grid.x_face(i) + l * grid.y_center(j);
    let phase_v = |i: usize, j: usize| k * grid.x_center(i) + l * grid.y_face(j);
    let phase_e = |i: usize, j: usize| k * grid.x_center(i) + l * grid.y_center(j);
    let phases: [&dyn Fn(usize, usize) -> f64; 3] = [&phase_u, &phase_v, &phase_e];

    // Basis b_c = e^{iθ_c} on component c; apply A to its real and imaginary
    // parts and project back: M[r][c] = <b_r, A b_c> / <b_r, b_r>.
    let basis_state = |c: usize, part: fn(f64) -> f64| {
        let mut s = State::rest(grid);
        let f = Field::from_fn(grid.nx(), grid.ny(), |i, j| part(phases[c](i, j)));
        match c {
            0 => s.u = f,
            1 => s.v = f,
            _ => s.eta = f,
        }
        s
    };
    let pick = |s: &State, r: usize| -> Field {
        match r {
            0 => s.u.clone(),
            1 => s.v.clone(),
            _ => s.eta.clone(),
        }
    };
    let npts = (grid.nx() * grid.ny()) as f64;
    let mut m = [[Complex64::new(0.0, 0.0); 3]; 3];
    for c in 0..3 {
        let re = apply(&basis_state(c, math::cos));
        let im = apply(&basis_state(c, math::sin));
        for (r, row) in m.iter_mut().enumerate() {
            let (fr, fi) = (pick(&re, r), pick(&im, r));
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..grid.nx() {
                for j in 0..grid.ny() {
                    let conj = Complex64::new(math::cos(phases[r](i, j)), -math::sin(phases[r](i, j)));
                    acc += conj * Complex64::new(fr[(i, j)], fi[(i, j)]);
                }
            }
            row[c] = acc / npts;
        }
    }
    for (d, row) in m.iter_mut().enumerate() {
        row[d] += params.r;
    }
    // Sum of principal 2×2 minors: eigenvalues {0, ±iω} give ω².
    let c2 = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    Ok(math::sqrt(c2.re.max(0.0)))
}

/// RK4 against the exact propagator at a sequence of halved time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub dts: Vec<f64>,
    /// L∞ error at the final time, relative to the final state's scale.
    pub errors: Vec<f64>,
    /// log2(e_k / e_{k+1}).
    pub orders: Vec<f64>,
}

impl ConvergenceStudy {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Integrates `state` to `t_end` with RK4 at `dt0`, `dt0/2`, … (`levels`
/// runs) and compares each with `evolve_exact`.
pub fn rk4_convergence(
    op: &LinearOperator,
    state: &State,
    t_end: f64,
    dt0: f64,
    levels: usize,
) -> Result<ConvergenceStudy> {
    use crate::dynamics::{step, StepConfig};
    let exact = evolve_exact(op, state, t_end)?;
    let scale = exact.u.max_abs().max(exact.v.max_abs()).max(exact.eta.max_abs()).max(f64::MIN_POSITIVE);
    let mut dts = Vec::new();
    let mut errors = Vec::new();
    let mut dt = dt0;
    for _ in 0..levels {
        let n = math::round(t_end / dt) as usize;
        let dt_exact = t_end / n as f64;
        let s = step(state, &op.grid, &op.params, &StepConfig::new(dt_exact, n))?;
        let err = s.u.max_abs_diff(&exact.u).max(s.v.max_abs_diff(&exact.v)).max(s.eta.max_abs_diff(&exact.eta));
        dts.push(dt_exact);
        errors.push(err / scale);
        dt *= 0.5;
    }
    let orders = errors.windows(2).map(|w| math::log2(w[0] / w[1])).collect();
    Ok(ConvergenceStudy { dts, errors, orders })
}
