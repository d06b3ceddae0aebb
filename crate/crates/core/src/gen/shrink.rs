//! Recipe-level shrinking.
//!
//! Candidates are edits of the recipe; every candidate is rebuilt from
//! scratch, so balanced features are re-balanced on the shrunk grid and
//! parameters. Candidates that break a family precondition or fail the
//! validity checks are dropped.

use alloc::vec::Vec;

use super::{balanced_validity, build_case, min_steps, min_width_cells, Feature, Knobs, Recipe};
use crate::math;
use crate::suites::PropertyCase;
use crate::Result;

/// Smallest grid the shrinker will produce.
pub const GRID_FLOOR: usize = 16;

const ROUND_G: f64 = 10.0;
const ROUND_H: f64 = 1000.0;
const ROUND_F0: f64 = 1e-4;
const ROUND_BETA: f64 = 1e-11;

fn is_round_amplitude(a: f64) -> bool {
    a == 0.0 || {
        let p = math::round(math::log10(a.abs()));
        a.abs() == math::powi(10.0, p as i32)
    }
}

fn snap_amplitude(a: f64) -> f64 {
    let p = math::floor(math::log10(a.abs()));
    math::powi(10.0, p as i32).copysign(a)
}

/// Number of parameters not yet at their round values.
fn unsnapped_params(r: &Recipe) -> usize {
    let p = &r.params;
    [p.g != ROUND_G, p.h != ROUND_H, p.f0 != 0.0 && p.f0.abs() != ROUND_F0, p.beta != 0.0 && p.beta != ROUND_BETA]
        .iter()
        .filter(|&&b| b)
        .count()
}

fn unsnapped_amplitudes(r: &Recipe) -> usize {
    let mut n = r.features.iter().filter(|f| !is_round_amplitude(f.amplitude())).count();
    if let Knobs::Resonance { amplitude, .. } = r.knobs {
        n += usize::from(!is_round_amplitude(amplitude));
    }
    n
}

/// Lexicographic simplicity key: grid cells, then feature count, then
/// unsnapped amplitudes, then unsnapped parameters, then steps. Every
/// shrink candidate is strictly smaller than its parent.
pub fn simplicity(r: &Recipe) -> (usize, usize, usize, usize, usize) {
    (r.nx * r.ny, r.features.len(), unsnapped_amplitudes(r), unsnapped_params(r), r.n_steps)
}

fn adapted(f: &Feature, min_width: Option<f64>) -> Feature {
    match *f {
        Feature::Wave { jx, jy, amplitude } => {
            let (hx, hy) = match (jx / 2, jy / 2) {
                (0, 0) if jx.abs() >= jy.abs() => (jx.signum(), 0),
                (0, 0) => (0, jy.signum()),
                h => h,
            };
            Feature::Wave { jx: hx, jy: hy, amplitude }
        }
        _ => min_width.map_or(*f, |w| f.widened(w)),
    }
}

fn candidate_recipes(case: &PropertyCase) -> Vec<Recipe> {
    let r = &case.recipe;
    let mut out = Vec::new();

    if r.nx / 2 >= GRID_FLOOR && r.ny / 2 >= GRID_FLOOR {
        let mut c = r.clone();
        c.nx /= 2;
        c.ny /= 2;
        // Features the coarser grid cannot resolve are adapted (widened to
        // the family's floor, waves moved to a longer mode) rather than
        // blocking the halving.
        let dx = (c.lx / c.nx as f64).max(c.ly / c.ny as f64);
        let floor = min_width_cells(case.family).map(|cells| cells * dx);
        let fitted: Vec<Feature> = c.features.iter().map(|f| adapted(f, floor)).collect();
        let features = c.features.clone();
        out.push(c.clone());
        if fitted != features {
            c.features = fitted;
            out.push(c);
        }
    }

    if r.features.len() > 1 {
        for k in 0..r.features.len() {
            let mut c = r.clone();
            c.features.remove(k);
            out.push(c);
        }
    }

    for (k, f) in r.features.iter().enumerate() {
        if !is_round_amplitude(f.amplitude()) {
            let mut c = r.clone();
            c.features[k] = f.with_amplitude(snap_amplitude(f.amplitude()));
            out.push(c);
        }
    }
    if let Knobs::Resonance { m, n, amplitude } = r.knobs {
        if !is_round_amplitude(amplitude) {
            let mut c = r.clone();
            c.knobs = Knobs::Resonance { m, n, amplitude: snap_amplitude(amplitude) };
            out.push(c);
        }
    }

    let p = r.params;
    let mut snap = |edit: &dyn Fn(&mut Recipe)| {
        let mut c = r.clone();
        edit(&mut c);
        out.push(c);
    };
    if p.g != ROUND_G {
        snap(&|c| c.params.g = ROUND_G);
    }
    if p.h != ROUND_H {
        snap(&|c| c.params.h = ROUND_H);
    }
    if p.f0 != 0.0 && p.f0.abs() != ROUND_F0 {
        snap(&|c| c.params.f0 = ROUND_F0.copysign(c.params.f0));
    }
    if p.beta != 0.0 && p.beta != ROUND_BETA {
        snap(&|c| c.params.beta = ROUND_BETA);
    }

    if let Some(floor) = min_steps(case.family) {
        if r.n_steps > floor {
            let mut c = r.clone();
            c.n_steps = (r.n_steps / 2).max(floor);
            if let Knobs::Galilean { every, .. } = c.knobs {
                c.n_steps -= c.n_steps % every;
            }
            if c.n_steps < r.n_steps && c.n_steps > 0 {
                out.push(c);
            }
        }
    }
    out
}

/// Valid simplifications of `case`, simplest edit first. Each carries the
/// parent's shrink path extended by its own index, and the parent's
/// mutation setting.
pub fn shrink(case: &PropertyCase) -> Vec<PropertyCase> {
    let parent_key = simplicity(&case.recipe);
    let mut out = Vec::new();
    for recipe in candidate_recipes(case) {
        if simplicity(&recipe) >= parent_key {
            continue;
        }
        let Ok(mut c) = build_case(case.seed, case.family, recipe) else {
            continue;
        };
        match balanced_validity(&c) {
            Ok(None) => {}
            Ok(Some(rep)) if rep.all_passed() => {}
            _ => continue,
        }
        c.config.mutation = case.config.mutation;
        c.shrink_path = case.shrink_path.clone();
        c.shrink_path.push(out.len());
        out.push(c);
    }
    out
}

/// Rebuilds a counterexample from `(seed, family)` and its shrink path.
pub fn replay(case: PropertyCase, path: &[usize]) -> Result<PropertyCase> {
    let mut current = case;
    for &k in path {
        let mut cands = shrink(&current);
        if k >= cands.len() {
            return Err(crate::Error::InvalidParams(alloc::format!(
                "shrink path index {k} out of range ({} candidates)",
                cands.len()
            )));
        }
        current = cands.swap_remove(k);
    }
    Ok(current)
}
