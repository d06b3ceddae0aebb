use alloc::vec::Vec;

use super::{Forcing, Mutation};
use crate::field::Field;
use crate::grid::Grid;
use crate::params::PhysParams;
use crate::state::State;

/// Space-discretized right-hand side for one (grid, params, forcing) set.
pub struct Model<'a> {
    grid: &'a Grid,
    params: &'a PhysParams,
    /// Coriolis parameter on each y-face row (v points).
    f_v: Vec<f64>,
    forcing: Option<(Forcing, Field, Field)>,
    mutation: Mutation,
}

impl<'a> Model<'a> {
    pub fn new(grid: &'a Grid, params: &'a PhysParams, forcing: Option<&Forcing>, mutation: Mutation) -> Self {
        let f_v = (0..grid.y_faces())
            .map(|j| {
                let f = match mutation {
                    Mutation::DroppedBeta => params.f0,
                    _ => params.coriolis_at(grid.y_face(j), grid),
                };
                if mutation == Mutation::CoriolisSign {
                    -f
                } else {
                    f
                }
            })
            .collect();
        let forcing = forcing.map(|f| {
            let (fx, fy) = f.sample(grid);
            (*f, fx, fy)
        });
        Self { grid, params, f_v, forcing, mutation }
    }

    /// Time tendency of every prognostic field, packed in a `State`
    /// (its `time` is zero).
    pub fn tendency(&self, s: &State, t: f64) -> State {
        let g = self.grid;
        let p = self.params;
        let (nx, ny) = (g.nx(), g.ny());
        let (dx, dy) = (g.dx(), g.dy());
        let px = g.periodic_x();
        let py = g.periodic_y();
        let (ux, uy) = g.u_shape();
        let (vx, vy) = g.v_shape();
        let u = &s.u;
        let v = &s.v;
        let eta = &s.eta;
        let grav = p.g;
        let fr = p.r;
        let tf = self.forcing.as_ref().map(|(f, _, _)| f.time_factor(t));

        let mut du = Field::zeros(ux, uy);
        for i in 0..ux {
            if !px && (i == 0 || i == nx) {
                continue;
            }
            let iw = if px { (i + nx - 1) % nx } else { i - 1 };
            let ie = i;
            for j in 0..uy {
                let jn = if py { (j + 1) % ny } else { j + 1 };
                let (fs, fn_) = (self.f_v[j], self.f_v[jn]);
                let cor = 0.25 * (fs * (v[(iw, j)] + v[(ie, j)]) + fn_ * (v[(iw, jn)] + v[(ie, jn)]));
                let pg = grav * (eta[(ie, j)] - eta[(iw, j)]) / dx;
                let mut tend = cor - pg - fr * u[(i, j)];
                if let (Some(tf), Some((_, fx, _))) = (tf, &self.forcing) {
                    tend += fx[(i, j)] * tf;
                }
                if p.nonlinear {
                    let (ia, ib) = if px { ((i + nx - 1) % nx, (i + 1) % nx) } else { (i - 1, i + 1) };
                    let (js, jn2) = if py {
                        ((j + ny - 1) % ny, (j + 1) % ny)
                    } else {
                        (if j == 0 { 0 } else { j - 1 }, if j + 1 == ny { j } else { j + 1 })
                    };
                    let vbar = 0.25 * ((v[(iw, j)] + v[(ie, j)]) + (v[(iw, jn)] + v[(ie, jn)]));
                    let adv = u[(i, j)] * (u[(ib, j)] - u[(ia, j)]) / (2.0 * dx)
                        + vbar * (u[(i, jn2)] - u[(i, js)]) / (2.0 * dy);
                    tend -= adv;
                }
                du[(i, j)] = tend;
            }
        }

        let mut dv = Field::zeros(vx, vy);
        for i in 0..vx {
            let ie = if px { (i + 1) % nx } else { i + 1 };
            for j in 0..vy {
                if !py && (j == 0 || j == ny) {
                    continue;
                }
                let js = if py { (j + ny - 1) % ny } else { j - 1 };
                let jn = j;
                let ubar = 0.25 * ((u[(i, js)] + u[(ie, js)]) + (u[(i, jn)] + u[(ie, jn)]));
                let cor = -self.f_v[j] * ubar;
                let pg = grav * (eta[(i, jn)] - eta[(i, js)]) / dy;
                let mut tend = cor - pg - fr * v[(i, j)];
                if let (Some(tf), Some((_, _, fy))) = (tf, &self.forcing) {
                    tend += fy[(i, j)] * tf;
                }
                if p.nonlinear {
                    let (ia, ib) = if px {
                        ((i + nx - 1) % nx, (i + 1) % nx)
                    } else {
                        (if i == 0 { 0 } else { i - 1 }, if i + 1 == nx { i } else { i + 1 })
                    };
                    let (ja, jb) = if py { ((j + ny - 1) % ny, (j + 1) % ny) } else { (j - 1, j + 1) };
                    let adv = ubar * (v[(ib, j)] - v[(ia, j)]) / (2.0 * dx)
                        + v[(i, j)] * (v[(i, jb)] - v[(i, ja)]) / (2.0 * dy);
                    tend -= adv;
                }
                dv[(i, j)] = tend;
            }
        }

        let h = p.h;
        let broken = self.mutation == Mutation::BrokenFluxForm;
        let mut deta = Field::zeros(nx, ny);
        for i in 0..nx {
            let ie = if px { (i + 1) % nx } else { i + 1 };
            let iw_cell = if px { Some((i + nx - 1) % nx) } else { i.checked_sub(1) };
            let ie_cell = if px { Some((i + 1) % nx) } else { (i + 1 < nx).then_some(i + 1) };
            for j in 0..ny {
                let jn = if py { (j + 1) % ny } else { j + 1 };
                let div = (u[(ie, j)] - u[(i, j)]) / dx + (v[(i, jn)] - v[(i, j)]) / dy;
                deta[(i, j)] = if broken {
                    -(h + eta[(i, j)]) * div
                } else if p.nonlinear {
                    let e = eta[(i, j)];
                    let face_depth = |nb: Option<(usize, usize)>| match nb {
                        Some(c) => h + 0.5 * (eta[c] + e),
                        None => h,
                    };
                    let js_cell = if py { Some((j + ny - 1) % ny) } else { j.checked_sub(1) };
                    let jn_cell = if py { Some((j + 1) % ny) } else { (j + 1 < ny).then_some(j + 1) };
                    let fe = face_depth(ie_cell.map(|c| (c, j))) * u[(ie, j)];
                    let fw = face_depth(iw_cell.map(|c| (c, j))) * u[(i, j)];
                    let fnn = face_depth(jn_cell.map(|c| (i, c))) * v[(i, jn)];
                    let fs = face_depth(js_cell.map(|c| (i, c))) * v[(i, j)];
                    -((fe - fw) / dx + (fnn - fs) / dy)
                } else {
                    -h * div
                };
            }
        }

        let tracer = s.tracer.as_ref().map(|c| tracer_tendency(u, v, c, g));
        State { u: du, v: dv, eta: deta, tracer, time: 0.0 }
    }

    /// One classical RK4 step.
    pub fn rk4(&self, s: &State, dt: f64) -> State {
        let half = 0.5 * dt;
        let t = s.time;
        let k1 = self.tendency(s, t);
        let k2 = self.tendency(&offset_state(s, half, &k1), t + half);
        let k3 = self.tendency(&offset_state(s, half, &k2), t + half);
        let k4 = self.tendency(&offset_state(s, dt, &k3), t + dt);
        let sixth = dt / 6.0;
        State {
            u: combine(&s.u, sixth, &k1.u, &k2.u, &k3.u, &k4.u),
            v: combine(&s.v, sixth, &k1.v, &k2.v, &k3.v, &k4.v),
            eta: combine(&s.eta, sixth, &k1.eta, &k2.eta, &k3.eta, &k4.eta),
            tracer: match (&s.tracer, &k1.tracer, &k2.tracer, &k3.tracer, &k4.tracer) {
                (Some(c), Some(a), Some(b), Some(cc), Some(d)) => Some(combine(c, sixth, a, b, cc, d)),
                _ => None,
            },
            time: t + dt,
        }
    }
}

/// Flux-form centered advection of a cell-centered tracer.
pub(crate) fn tracer_tendency(u: &Field, v: &Field, c: &Field, grid: &Grid) -> Field {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let px = grid.periodic_x();
    let py = grid.periodic_y();
    // Face fluxes; closed-wall faces carry u = 0.
    let (ux, uy) = grid.u_shape();
    let fx = Field::from_fn(ux, uy, |i, j| {
        if !px && (i == 0 || i == nx) {
            return 0.0;
        }
        let iw = if px { (i + nx - 1) % nx } else { i - 1 };
        u[(i, j)] * 0.5 * (c[(iw, j)] + c[(i % nx, j)])
    });
    let (vx, vy) = grid.v_shape();
    let fy = Field::from_fn(vx, vy, |i, j| {
        if !py && (j == 0 || j == ny) {
            return 0.0;
        }
        let js = if py { (j + ny - 1) % ny } else { j - 1 };
        v[(i, j)] * 0.5 * (c[(i, js)] + c[(i, j % ny)])
    });
    Field::from_fn(nx, ny, |i, j| {
        let ie = if px { (i + 1) % nx } else { i + 1 };
        let jn = if py { (j + 1) % ny } else { j + 1 };
        -((fx[(ie, j)] - fx[(i, j)]) / dx + (fy[(i, jn)] - fy[(i, j)]) / dy)
    })
}

pub(crate) fn offset(x: &Field, scale: f64, k: &Field) -> Field {
    let mut out = x.clone();
    out.axpy(scale, k);
    out
}

fn offset_state(s: &State, scale: f64, k: &State) -> State {
    State {
        u: offset(&s.u, scale, &k.u),
        v: offset(&s.v, scale, &k.v),
        eta: offset(&s.eta, scale, &k.eta),
        tracer: match (&s.tracer, &k.tracer) {
            (Some(c), Some(kc)) => Some(offset(c, scale, kc)),
            _ => None,
        },
        time: s.time,
    }
}

/// x + w·(k1 + 2k2 + 2k3 + k4), summed in that fixed order.
pub(crate) fn combine(x: &Field, w: f64, k1: &Field, k2: &Field, k3: &Field, k4: &Field) -> Field {
    let mut out = x.clone();
    let o = out.as_mut_slice();
    let (a, b, c, d) = (k1.as_slice(), k2.as_slice(), k3.as_slice(), k4.as_slice());
    for n in 0..o.len() {
        o[n] += w * (((a[n] + 2.0 * b[n]) + 2.0 * c[n]) + d[n]);
    }
    out
}
