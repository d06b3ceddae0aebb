use super::*;
use crate::balance::validity_checks;
use crate::dynamics::{cfl_limit, Mutation};
use proptest::prelude::*;

fn assert_valid(case: &PropertyCase) {
    let tag = format!("{} seed {} path {:?}", case.family, case.seed, case.shrink_path);
    GenBounds::default().check(&case.recipe).unwrap_or_else(|e| panic!("{tag}: {e}"));
    check_preconditions(case).unwrap_or_else(|e| panic!("{tag}: {e}"));
    let speed = case.initial.max_speed() + frame_speed(case);
    assert!(case.config.dt <= cfl_limit(&case.grid, &case.params, speed), "{tag}: CFL");
    if let (_, Some(bal)) = build_state(&case.recipe, &case.grid).unwrap() {
        let rep = validity_checks(&bal.u, &bal.v, &bal.eta, &case.grid, &case.params);
        assert!(rep.all_passed(), "{tag}: {rep:?}");
    }
}

#[test]
fn generation_is_deterministic() {
    for family in Family::ALL {
        for seed in [0, 7, 12345] {
            let a = generate(seed, family).unwrap();
            let b = generate(seed, family).unwrap();
            assert_eq!(a, b, "{family} seed {seed}");
            assert_eq!(a.seed, seed);
            assert_eq!(a.family, family);
            assert!(a.shrink_path.is_empty());
        }
    }
}

#[test]
fn families_draw_from_separate_streams() {
    let a = generate(3, Family::Rotation90).unwrap();
    let b = generate(3, Family::GillScaling).unwrap();
    assert_ne!(a.recipe.params, b.recipe.params);
}

#[test]
fn thousand_generated_balance_cases_are_valid() {
    for seed in 0..1000 {
        assert_valid(&generate(seed, Family::BalanceMaintenance).unwrap());
    }
}

#[test]
fn every_family_generates_valid_cases() {
    for family in Family::ALL {
        for seed in 0..40 {
            assert_valid(&generate(seed, family).unwrap());
        }
    }
}

#[test]
fn shrink_candidates_are_valid_and_strictly_simpler() {
    for family in Family::ALL {
        for seed in 0..6 {
            let case = generate(seed, family).unwrap();
            let key = simplicity(&case.recipe);
            for (k, c) in shrink(&case).iter().enumerate() {
                assert!(simplicity(&c.recipe) < key, "{family} seed {seed} candidate {k}");
                assert_eq!(c.shrink_path, [k]);
                assert_valid(c);
            }
        }
    }
}

#[test]
fn shrink_chains_terminate_and_replay() {
    for family in [Family::BalanceMaintenance, Family::Conservation, Family::GillScaling, Family::TracerRoundtrip] {
        let start = generate(5, family).unwrap();
        let mut case = start.clone();
        let mut key = simplicity(&case.recipe);
        for _ in 0..200 {
            let mut cands = shrink(&case);
            if cands.is_empty() {
                break;
            }
            // Always take the last candidate to exercise non-zero indices.
            case = cands.pop().unwrap();
            let next = simplicity(&case.recipe);
            assert!(next < key);
            key = next;
        }
        assert!(shrink(&case).is_empty(), "{family}: chain did not terminate");
        let again = replay(start, &case.shrink_path).unwrap();
        assert_eq!(again, case, "{family}");
    }
}

#[test]
fn balance_cases_shrink_to_the_grid_floor() {
    for seed in 0..5 {
        let mut case = generate(seed, Family::BalanceMaintenance).unwrap();
        while let Some(c) = shrink(&case).into_iter().next() {
            case = c;
        }
        assert_eq!((case.grid.nx(), case.grid.ny()), (shrink::GRID_FLOOR, shrink::GRID_FLOOR));
        assert_eq!(case.recipe.features.len(), 1);
        assert_valid(&case);
    }
}

#[test]
fn wave_cases_shrink_to_a_unit_mode_on_the_floor() {
    for seed in 0..20 {
        let mut case = generate(seed, Family::WaveMaintenance).unwrap();
        while let Some(c) = shrink(&case).into_iter().next() {
            case = c;
        }
        assert_eq!((case.grid.nx(), case.grid.ny()), (shrink::GRID_FLOOR, shrink::GRID_FLOOR));
        let Feature::Wave { jx, jy, .. } = case.recipe.features[0] else { panic!("not a wave") };
        assert_eq!(jx.abs() + jy.abs(), 1, "seed {seed}");
        assert_valid(&case);
    }
}

#[test]
fn minimal_case_has_no_candidates() {
    let recipe = Recipe {
        nx: 16,
        ny: 16,
        lx: 2e6,
        ly: 2e6,
        boundary: Boundary::PeriodicXY,
        params: PhysParams { g: 10.0, h: 1000.0, f0: 1e-4, beta: 0.0, ..PhysParams::default() },
        features: alloc::vec![Feature::Balanced(BalanceKind::Vortex { x0: 1e6, y0: 1e6, amplitude: 0.1, width: 3e5 })],
        cfl_fraction: 0.5,
        n_steps: 0,
        knobs: Knobs::Plain,
    };
    let case = build_case(0, Family::BalanceMaintenance, recipe).unwrap();
    assert!(shrink(&case).is_empty());
}

#[test]
fn replay_rejects_out_of_range_index() {
    let case = generate(1, Family::Conservation).unwrap();
    assert!(replay(case, &[999]).is_err());
}

#[test]
fn shrunk_candidates_keep_the_mutation() {
    let mut case = generate(2, Family::BalanceMaintenance).unwrap();
    case.config.mutation = Mutation::CoriolisSign;
    for c in shrink(&case) {
        assert_eq!(c.config.mutation, Mutation::CoriolisSign);
    }
}

#[test]
fn refined_recipe_keeps_the_domain() {
    let r = generate(4, Family::Galilean).unwrap().recipe;
    let f = refined(&r, 2);
    assert_eq!((f.nx, f.ny), (2 * r.nx, 2 * r.ny));
    assert_eq!((f.lx, f.ly), (r.lx, r.ly));
    assert_eq!(f.features, r.features);
}

#[test]
fn tracer_velocity_completes_whole_circuits() {
    let case = generate(0, Family::TracerRoundtrip).unwrap();
    let Knobs::Tracer { circuits_x, circuits_y } = case.recipe.knobs else { panic!() };
    let (u, v) = tracer_velocity(&case.recipe.knobs, &case.grid, &case.config);
    let t = case.config.dt * case.config.n_steps as f64;
    assert!((u * t - circuits_x as f64 * case.grid.lx()).abs() <= 1e-9 * case.grid.lx());
    assert!((v * t - circuits_y as f64 * case.grid.ly()).abs() <= 1e-9 * case.grid.ly());
}

#[test]
fn widened_only_grows_length_scales() {
    let f = Feature::Bump { x0: 1.0, y0: 2.0, amplitude: 0.5, width: 3.0 };
    assert_eq!(f.widened(1.0), f);
    assert_eq!(f.widened(5.0).width(), Some(5.0));
    assert_eq!(Feature::Wave { jx: 1, jy: 2, amplitude: 1.0 }.widened(9.0).width(), None);
}

proptest! {
    #[test]
    fn blob_peaks_at_its_centre(
        ci in 2usize..14, cj in 2usize..14, amp in 0.1f64..2.0, w in 1.5f64..3.0,
        b in prop::sample::select(alloc::vec![Boundary::PeriodicXY, Boundary::ClosedBasin, Boundary::ChannelPeriodicX]),
    ) {
        let g = Grid::new(16, 16, 16e3, 16e3, b).unwrap();
        let blob = smooth_blob(&g, g.x_center(ci), g.y_center(cj), amp, w * g.dx());
        prop_assert!((blob[(ci, cj)] - amp).abs() <= 1e-12 * amp);
        prop_assert!(blob.as_slice().iter().all(|&x| x > 0.0 && x <= amp * (1.0 + 1e-12)));
    }
}
