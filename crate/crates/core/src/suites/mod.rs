//! Executable physics properties over generated cases.
//!
//! Each family maps a [`PropertyCase`] to a [`Verdict`] holding every
//! measured residual. Failing cases can be shrunk with [`shrink_failure`];
//! the shrunk case is a pure function of (seed, family, shrink path).

mod invariants;
mod metamorphic;
mod response;
mod symmetry;

pub use invariants::{prop_conservation, prop_restart};
pub use metamorphic::{prop_beta_doubling, prop_gill_scaling, prop_tracer_roundtrip, GILL_LOOSE_TOL};
pub use response::{
    energy_centroid_x, prop_balance_maintenance, prop_resonance, prop_wave_maintenance, prop_westward_intensity,
    unbalanced_fraction,
};
pub use symmetry::{mirror_x_state, prop_beta_mirror, prop_galilean, prop_rotation90, rot90_inverse, rot90_state};

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, Mutation, StepConfig};
use crate::gen::{generate, shrink, Recipe};
use crate::grid::Grid;
use crate::params::PhysParams;
use crate::state::State;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Conservation,
    Rotation90,
    Galilean,
    BetaMirror,
    BalanceMaintenance,
    WaveMaintenance,
    Resonance,
    WestwardIntensity,
    BetaDoubling,
    GillScaling,
    TracerRoundtrip,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Conservation,
        Family::Rotation90,
        Family::Galilean,
        Family::BetaMirror,
        Family::BalanceMaintenance,
        Family::WaveMaintenance,
        Family::Resonance,
        Family::WestwardIntensity,
        Family::BetaDoubling,
        Family::GillScaling,
        Family::TracerRoundtrip,
    ];

    /// Position in [`Family::ALL`]; also the generator stream id.
    pub fn index(self) -> usize {
        Family::ALL.iter().position(|&f| f == self).unwrap_or(0)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Conservation => "conservation",
            Family::Rotation90 => "rotation90",
            Family::Galilean => "galilean",
            Family::BetaMirror => "beta-mirror",
            Family::BalanceMaintenance => "balance-maintenance",
            Family::WaveMaintenance => "wave-maintenance",
            Family::Resonance => "resonance",
            Family::WestwardIntensity => "westward-intensity",
            Family::BetaDoubling => "beta-doubling",
            Family::GillScaling => "gill-scaling",
            Family::TracerRoundtrip => "tracer-roundtrip",
        }
    }

    /// Parses a family name; `_` and `-` are interchangeable and case is
    /// ignored.
    pub fn from_name(s: &str) -> Option<Family> {
        let norm: String = s.trim().chars().map(|c| if c == '_' { '-' } else { c.to_ascii_lowercase() }).collect();
        Family::ALL.iter().copied().find(|f| f.name() == norm)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully resolved test case together with the recipe it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCase {
    pub seed: u64,
    pub family: Family,
    pub grid: Grid,
    pub params: PhysParams,
    pub initial: State,
    pub config: StepConfig,
    pub recipe: Recipe,
    /// Indices into successive [`shrink`] candidate lists.
    pub shrink_path: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost,
    AtLeast,
    /// Logged only.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub passed: bool,
}

/// A sampled diagnostic attached to a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub residuals: Vec<Residual>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<Series>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Default for Verdict {
    fn default() -> Self {
        Self::new()
    }
}

impl Verdict {
    pub fn new() -> Self {
        Self { passed: true, residuals: Vec::new(), series: Vec::new(), note: None }
    }

    fn push(&mut self, name: &str, value: f64, tolerance: f64, bound: Bound) {
        let passed = match bound {
            Bound::AtMost => value <= tolerance,
            Bound::AtLeast => value >= tolerance,
            Bound::Info => true,
        };
        self.passed &= passed;
        self.residuals.push(Residual { name: name.to_string(), value, tolerance, bound, passed });
    }

    /// Records `value ≤ tolerance` (NaN fails).
    pub fn at_most(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, tolerance, Bound::AtMost);
    }

    /// Records `value ≥ minimum` (NaN fails).
    pub fn at_least(&mut self, name: &str, value: f64, minimum: f64) {
        self.push(name, value, minimum, Bound::AtLeast);
    }

    pub fn info(&mut self, name: &str, value: f64) {
        self.push(name, value, f64::NAN, Bound::Info);
    }

    pub fn series(&mut self, name: &str, times: Vec<f64>, values: Vec<f64>) {
        self.series.push(Series { name: name.to_string(), times, values });
    }

    pub fn fail(&mut self, note: impl Into<String>) {
        self.passed = false;
        self.note = Some(note.into());
    }

    pub fn from_error(e: &crate::Error) -> Self {
        let mut v = Verdict::new();
        v.fail(alloc::format!("run aborted: {e}"));
        v
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|r| r.name == name).map(|r| r.value)
    }
}

/// Runs the family's property on `case`.
pub fn check(case: &PropertyCase) -> Verdict {
    match case.family {
        Family::Conservation => prop_conservation(case),
        Family::Rotation90 => prop_rotation90(case),
        Family::Galilean => prop_galilean(case),
        Family::BetaMirror => prop_beta_mirror(case),
        Family::BalanceMaintenance => prop_balance_maintenance(case),
        Family::WaveMaintenance => prop_wave_maintenance(case),
        Family::Resonance => prop_resonance(case),
        Family::WestwardIntensity => prop_westward_intensity(case),
        Family::BetaDoubling => prop_beta_doubling(case),
        Family::GillScaling => prop_gill_scaling(case),
        Family::TracerRoundtrip => prop_tracer_roundtrip(case),
    }
}

/// A failure after shrinking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub family: Family,
    pub shrink_path: Vec<usize>,
    pub case: PropertyCase,
    pub residuals: Vec<Residual>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub family: Family,
    pub cases_run: usize,
    pub failures: Vec<Failure>,
    /// Filled in by the runner; the core has no clock.
    pub wall_time: f64,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Upper bound on property evaluations spent shrinking one failure.
pub const SHRINK_BUDGET: usize = 400;

/// Greedy shrink: repeatedly move to the first candidate that still fails.
pub fn shrink_failure(case: PropertyCase, verdict: Verdict) -> (PropertyCase, Verdict) {
    let mut current = (case, verdict);
    let mut spent = 0;
    'outer: loop {
        for cand in shrink(&current.0) {
            if spent >= SHRINK_BUDGET {
                break 'outer;
            }
            spent += 1;
            let v = check(&cand);
            if !v.passed {
                current = (cand, v);
                continue 'outer;
            }
        }
        break;
    }
    current
}

/// Outcome of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    pub seed: u64,
    pub verdict: Verdict,
    pub failure: Option<Failure>,
}

/// Generates, checks and (on failure, if asked) shrinks one case.
pub fn run_case(seed: u64, family: Family, mutation: Mutation, do_shrink: bool) -> Result<CaseOutcome> {
    let mut case = generate(seed, family)?;
    case.config.mutation = mutation;
    let verdict = check(&case);
    if verdict.passed {
        return Ok(CaseOutcome { seed, verdict, failure: None });
    }
    let (case, shrunk) = if do_shrink { shrink_failure(case, verdict.clone()) } else { (case, verdict.clone()) };
    let failure = Failure {
        seed,
        family,
        shrink_path: case.shrink_path.clone(),
        residuals: shrunk.residuals.clone(),
        note: shrunk.note.clone(),
        case,
    };
    Ok(CaseOutcome { seed, verdict, failure: Some(failure) })
}

/// Integrates a case's initial state with `config` (the case's own
/// mutation setting applies).
pub(crate) fn run(state: &State, grid: &Grid, params: &PhysParams, config: &StepConfig) -> Result<State> {
    integrate(state, grid, params, config, |_, _| {})
}

/// max |·| over u, v and η.
pub(crate) fn field_scale(s: &State) -> f64 {
    s.u.max_abs().max(s.v.max_abs()).max(s.eta.max_abs())
}

/// Relative L∞ difference; exact agreement of zero states gives 0.
pub(crate) fn relative_diff(a: &State, b: &State) -> f64 {
    let d = a.max_abs_diff(b);
    if d == 0.0 {
        0.0
    } else {
        d / field_scale(b).max(field_scale(a)).max(f64::MIN_POSITIVE)
    }
}

/// Observed order between consecutive refinement levels, each halving dx
/// and dt.
pub(crate) fn pair_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| crate::math::log2(w[0] / w[1])).collect()
}
