use super::*;
use crate::dynamics::{step, StepConfig};
use crate::grid::Boundary;
use proptest::prelude::*;

fn grid(n: usize, b: Boundary) -> Grid {
    Grid::new(n, n, 1e4, 1e4, b).unwrap()
}

fn vortex(g: &Grid, amp: f64, width_cells: f64) -> BalanceKind {
    BalanceKind::Vortex { x0: 0.45 * g.lx(), y0: 0.55 * g.ly(), amplitude: amp, width: width_cells * g.dx() }
}

#[test]
fn linear_eta_gives_uniform_jet() {
    let g = grid(16, Boundary::ChannelPeriodicX);
    let p = PhysParams::default();
    let big_u = 0.3;
    let eta = Field::from_fn(16, 16, |_, j| -(p.f0 * big_u / p.g) * g.y_center(j));
    let (u, v) = geostrophic_from_eta(&eta, &g, &p).unwrap();
    for &x in u.as_slice() {
        assert!((x - big_u).abs() <= 1e-12, "{x}");
    }
    assert!(v.max_abs() <= 1e-12 * big_u);
}

#[test]
fn constant_eta_gives_rest() {
    for b in [Boundary::PeriodicXY, Boundary::ClosedBasin, Boundary::ChannelPeriodicX] {
        let g = grid(16, b);
        let (u, v) = geostrophic_from_eta(&Field::filled(16, 16, 2.5), &g, &PhysParams::default()).unwrap();
        assert!(u.max_abs() <= 1e-12 && v.max_abs() <= 1e-12);
    }
}

#[test]
fn zero_coriolis_is_rejected() {
    let g = grid(16, Boundary::PeriodicXY);
    let p = PhysParams { f0: 0.0, ..Default::default() };
    let eta = Field::zeros(16, 16);
    assert_eq!(geostrophic_from_eta(&eta, &g, &p), Err(Error::ZeroCoriolis));
    assert_eq!(eta_from_velocity(&Field::zeros(16, 16), &Field::zeros(16, 16), &g, &p), Err(Error::ZeroCoriolis));
}

#[test]
fn gaussian_vortex_peak_speed_converges() {
    let p = PhysParams::default();
    let (amp, w) = (0.5, 1.2e5);
    let analytic = p.g * amp / (p.f0 * w) * math::exp(-0.5);
    let mut errs = Vec::new();
    for n in [32usize, 64, 128] {
        let dx = 1.6e6 / n as f64;
        let g = Grid::new(n, n, dx, dx, Boundary::PeriodicXY).unwrap();
        let eta = Field::from_fn(n, n, |i, j| {
            let (x, y) = (g.x_center(i) - 8e5, g.y_center(j) - 8e5);
            amp * math::exp(-(x * x + y * y) / (2.0 * w * w))
        });
        let (u, v) = geostrophic_from_eta(&eta, &g, &p).unwrap();
        // Along the horizontal axis through the center v is the azimuthal
        // component, and the face points sit exactly on that axis only when
        // x0 lies on a face; sample the larger of the two velocity maxima.
        let peak = u.max_abs().max(v.max_abs());
        errs.push((peak - analytic).abs() / analytic);
    }
    assert!(errs[2] < 0.01, "{errs:?}");
    assert!(errs[0] / errs[2] > 10.0, "{errs:?}");
}

#[test]
fn balanced_fields_are_exactly_steady_on_f_plane() {
    for b in [Boundary::PeriodicXY, Boundary::ClosedBasin, Boundary::ChannelPeriodicX] {
        let g = grid(32, b);
        let p = PhysParams::default();
        let bal = BalancedField::construct(&[vortex(&g, 0.3, 4.0)], &g, &p).unwrap();
        assert!(geostrophic_residual(&bal.u, &bal.v, &bal.eta, &g, &p) <= 1e-12);
        let s0 = bal.into_state(&g);
        let s = step(&s0, &g, &p, &StepConfig::new(40.0, 500)).unwrap();
        let scale = s0.eta.max_abs();
        assert!(s.eta.max_abs_diff(&s0.eta) <= 1e-12 * scale, "{b:?}");
    }
}

#[test]
fn roundtrip_recovers_eta() {
    for b in [Boundary::PeriodicXY, Boundary::ClosedBasin, Boundary::ChannelPeriodicX] {
        let g = grid(48, b);
        let p = PhysParams::default();
        // Narrow enough that the minimum-image kink and the wall values are
        // negligible, so the recipe itself is representable.
        let eta = vortex(&g, -0.4, 2.5).eta(&g);
        let (u, v) = geostrophic_from_eta(&eta, &g, &p).unwrap();
        let back = eta_from_velocity(&u, &v, &g, &p).unwrap();
        let m = eta.mean();
        let rel = back.max_abs_diff(&eta.map(|e| e - m)) / 0.4;
        assert!(rel <= 1e-8, "{b:?} {rel}");
    }
}

#[test]
fn roundtrip_recovers_balanced_projection_of_wide_features() {
    for b in [Boundary::PeriodicXY, Boundary::ClosedBasin, Boundary::ChannelPeriodicX] {
        let g = grid(16, b);
        let p = PhysParams::default();
        let bal = BalancedField::construct(&[vortex(&g, 0.7, 4.0)], &g, &p).unwrap();
        let back = eta_from_velocity(&bal.u, &bal.v, &g, &p).unwrap();
        let m = bal.eta.mean();
        let rel = back.max_abs_diff(&bal.eta.map(|e| e - m)) / bal.eta.max_abs();
        assert!(rel <= 1e-10, "{b:?} {rel}");
    }
}

#[test]
fn zero_velocity_gives_flat_eta() {
    let g = grid(16, Boundary::ClosedBasin);
    let p = PhysParams::default();
    let eta = eta_from_velocity(&Field::zeros(17, 16), &Field::zeros(16, 17), &g, &p).unwrap();
    assert_eq!(eta.max_abs(), 0.0);
}

#[test]
fn solid_body_patch_matches_line_quadrature() {
    // Streamfunction Ω/2·r² inside a tapered patch: near-solid-body rotation.
    let n = 32;
    let g = grid(n, Boundary::PeriodicXY);
    let p = PhysParams::default();
    let (cx, cy) = g.corner_shape();
    let omega = 1e-5;
    let r0 = 0.2 * g.lx();
    let psi = Field::from_fn(cx, cy, |i, j| {
        let (x, y) = (g.x_face(i) - 0.5 * g.lx(), g.y_face(j) - 0.5 * g.ly());
        let r2 = x * x + y * y;
        0.5 * omega * r2 * math::exp(-(r2 * r2) / (r0 * r0 * r0 * r0))
    });
    let (u, v) = velocities_from_streamfunction(&psi, &g);
    let eta = eta_from_velocity(&u, &v, &g, &p).unwrap();
    // Oracle: march g δxη = f v̄ along each row, then g δyη = −f ū up column 0.
    let mut oracle = Field::zeros(n, n);
    for j in 1..n {
        let ubar = 0.25 * (u[(0, j - 1)] + u[(1, j - 1)] + u[(0, j)] + u[(1, j)]);
        oracle[(0, j)] = oracle[(0, j - 1)] - p.f0 / p.g * ubar * g.dy();
    }
    for j in 0..n {
        let jn = (j + 1) % n;
        for i in 1..n {
            let vbar = 0.25 * (v[(i - 1, j)] + v[(i, j)] + v[(i - 1, jn)] + v[(i, jn)]);
            oracle[(i, j)] = oracle[(i - 1, j)] + p.f0 / p.g * vbar * g.dx();
        }
    }
    let m = oracle.mean();
    let oracle = oracle.map(|e| e - m);
    let rel = eta.max_abs_diff(&oracle) / oracle.max_abs();
    assert!(rel <= 1e-9, "{rel}");
}

#[test]
fn validity_checks_pass_for_balanced_output() {
    for b in [Boundary::PeriodicXY, Boundary::ClosedBasin, Boundary::ChannelPeriodicX] {
        let g = grid(32, b);
        let p = PhysParams::default();
        let kinds = [
            vortex(&g, 0.2, 3.0),
            BalanceKind::Jet {
                x0: 0.5 * g.lx(),
                y0: 0.5 * g.ly(),
                angle_deg: 30.0,
                amplitude: -0.1,
                width: 2.5 * g.dx(),
                length: 5.0 * g.dx(),
            },
        ];
        let bal = BalancedField::construct(&kinds, &g, &p).unwrap();
        let rep = validity_checks(&bal.u, &bal.v, &bal.eta, &g, &p);
        assert!(rep.all_passed(), "{b:?} {rep:?}");
    }
}

#[test]
fn divergent_flow_fails_divergence_check() {
    let g = grid(16, Boundary::PeriodicXY);
    let p = PhysParams::default();
    // u = a·x on x-faces (wraps once; check an interior cell's divergence)
    let a = 1e-6;
    let g2 = grid(16, Boundary::ClosedBasin);
    let u = Field::from_fn(17, 16, |i, _| a * g2.x_face(i));
    let v = Field::zeros(16, 17);
    let rep = validity_checks(&u, &v, &Field::zeros(16, 16), &g2, &p);
    assert!(!rep.divergence.passed);
    assert!((rep.divergence.residual - a).abs() <= 1e-15);
    assert!(matches!(eta_from_velocity(&u, &v, &g2, &p), Err(Error::DivergentInput { .. })));
    let _ = g;
}

#[test]
fn random_noise_orthogonality_is_reported() {
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    let g = grid(16, Boundary::PeriodicXY);
    let p = PhysParams::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut unif = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
    let mut fails = 0;
    let trials = 200;
    for _ in 0..trials {
        let u = Field::from_fn(16, 16, |_, _| unif());
        let v = Field::from_fn(16, 16, |_, _| unif());
        let eta = Field::from_fn(16, 16, |_, _| unif());
        let rep = validity_checks(&u, &v, &eta, &g, &p);
        assert!(rep.orthogonality.residual.is_finite());
        if !rep.orthogonality.passed {
            fails += 1;
        }
    }
    assert_eq!(fails, trials);
}

#[test]
fn invert_average_reproduces_smooth_profiles() {
    for periodic in [true, false] {
        let n = 16;
        let m = if periodic { n } else { n + 1 };
        let x: Vec<f64> = (0..m)
            .map(|k| {
                let t = k as f64 / n as f64;
                if periodic {
                    math::cos(2.0 * math::PI * t) + 0.3 * math::sin(4.0 * math::PI * t)
                } else {
                    1.0 + 2.0 * t
                }
            })
            .collect();
        let b: Vec<f64> = (0..n).map(|k| 0.5 * (x[k] + x[(k + 1) % m])).collect();
        let back = invert_average(&b, periodic, WallGauge::Smooth);
        for (a, c) in back.iter().zip(&x) {
            assert!((a - c).abs() <= 1e-13, "{periodic} {a} {c}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prop_generated_balance_is_valid(
        bcode in 0u8..3,
        n in prop::sample::select(vec![16usize, 32]),
        amp in -1.0f64..1.0,
        fx in 0.3f64..0.7,
        fy in 0.3f64..0.7,
        width_cells in 2.5f64..4.0,
        angle in 0.0f64..180.0,
        jet in any::<bool>(),
        f0 in prop::sample::select(vec![-1.4e-4, -5e-5, 3e-5, 1e-4]),
    ) {
        prop_assume!(amp.abs() > 1e-3);
        let b = Boundary::from_code(bcode).unwrap();
        let g = grid(n, b);
        let p = PhysParams { f0, ..Default::default() };
        let w = width_cells * g.dx();
        let kind = if jet {
            BalanceKind::Jet { x0: fx * g.lx(), y0: fy * g.ly(), angle_deg: angle, amplitude: amp, width: w, length: 2.0 * w }
        } else {
            BalanceKind::Vortex { x0: fx * g.lx(), y0: fy * g.ly(), amplitude: amp, width: w }
        };
        let bal = BalancedField::construct(&[kind], &g, &p).unwrap();
        prop_assert!(geostrophic_residual(&bal.u, &bal.v, &bal.eta, &g, &p) <= 1e-12);
        let rep = validity_checks(&bal.u, &bal.v, &bal.eta, &g, &p);
        prop_assert!(rep.all_passed(), "{:?}", rep);
    }
}

#[test]
fn rebalancing_a_balanced_eta_is_idempotent() {
    let p = PhysParams::default();
    for b in [Boundary::PeriodicXY, Boundary::ClosedBasin, Boundary::ChannelPeriodicX] {
        for n in [16, 17, 32] {
            let g = grid(n, b);
            // Wide enough to reach the walls, so flattening has work to do.
            let eta = vortex(&g, 1.0, 0.3 * n as f64).eta(&g);
            let (u1, v1, e1) = balance_eta(&eta, &g, &p).unwrap();
            let (u2, v2, e2) = balance_eta(&e1, &g, &p).unwrap();
            let speed = u1.max_abs().max(v1.max_abs());
            assert!(u1.max_abs_diff(&u2) <= 1e-12 * speed, "{b:?} {n}");
            assert!(v1.max_abs_diff(&v2) <= 1e-12 * speed, "{b:?} {n}");
            assert!(e1.max_abs_diff(&e2) <= 1e-12 * e1.max_abs(), "{b:?} {n}");
        }
    }
}
