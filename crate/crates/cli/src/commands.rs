//! The `run`, `replay` and `simulate` subcommands. Each returns the process
//! exit code; progress goes to the supplied writer.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gfdprop_core::checkpoint;
use gfdprop_core::dynamics::{cfl_limit, integrate, Mutation, StepConfig};
use gfdprop_core::gen::{build_state, generate, replay, Feature, Knobs, Recipe};
use gfdprop_core::suites::{check, run_case, Family};
use gfdprop_core::{Boundary, Error, Field, Grid, PhysParams, State};
use rayon::prelude::*;
use serde::Deserialize;

use crate::fields::{write_csv, Stagger};
use crate::report::{
    read_replayable, write_json, CaseEntry, Counterexample, FamilyReport, Replayable, Report, ResidualEntry,
};
use crate::svg::{heatmap, Palette};
use crate::{CliError, EXIT_FAILURE, EXIT_PASS};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub families: Vec<Family>,
    pub seed: u64,
    /// Cases per family.
    pub cases: usize,
    pub report: PathBuf,
    /// Directory for one counterexample file per failure.
    pub out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    pub parallel: usize,
    /// Test-only defect injected into every case.
    pub mutation: Mutation,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.cases == 0 {
            return Err(CliError::Usage("--cases must be at least 1".into()));
        }
        if self.parallel == 0 {
            return Err(CliError::Usage("--parallel must be at least 1".into()));
        }
        if self.families.is_empty() {
            return Err(CliError::Usage("no suite selected".into()));
        }
        Ok(())
    }
}

/// Seed of the `k`-th case of a run.
pub fn case_seed(base: u64, k: usize) -> u64 {
    base.wrapping_add(k as u64)
}

fn run_family(cfg: &RunConfig, family: Family) -> FamilyReport {
    let one = |k: usize| {
        let seed = case_seed(cfg.seed, k);
        match run_case(seed, family, cfg.mutation, true) {
            Ok(o) => (CaseEntry::from_verdict(seed, &o.verdict), o.failure),
            Err(e) => (
                CaseEntry { seed, passed: false, residuals: Vec::new(), note: Some(format!("generation failed: {e}")) },
                None,
            ),
        }
    };
    let mut results: Vec<_> = if cfg.parallel > 1 {
        (0..cfg.cases).into_par_iter().map(one).collect()
    } else {
        (0..cfg.cases).map(one).collect()
    };
    results.sort_by_key(|(entry, _)| entry.seed);
    let mut cases = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (entry, failure) in results {
        if let Some(f) = failure {
            failures.push(Counterexample {
                schema: crate::report::COUNTEREXAMPLE_SCHEMA.into(),
                version: crate::report::SCHEMA_VERSION,
                seed: f.seed,
                family: f.family,
                shrink_path: f.shrink_path,
                residuals: f.residuals.iter().map(ResidualEntry::from).collect(),
                note: f.note,
                case: f.case,
            });
        }
        cases.push(entry);
    }
    let passed = cases.iter().filter(|c| c.passed).count();
    FamilyReport { family, cases_run: cases.len(), passed, failed: cases.len() - passed, cases, failures }
}

pub fn cmd_run(cfg: &RunConfig, log: &mut dyn Write) -> Result<i32, CliError> {
    cfg.validate()?;
    // Fail on an unwritable report path before spending time on the suites.
    fs::File::create(&cfg.report).map_err(CliError::io(&cfg.report))?;
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut families = Vec::new();
    for &family in &cfg.families {
        let start = Instant::now();
        let fr = pool.install(|| run_family(cfg, family));
        let secs = start.elapsed().as_secs_f64();
        let mut line = format!("{family}: {}/{} passed in {secs:.1} s", fr.passed, fr.cases_run);
        if let Some(smallest) = fr.failures.iter().min_by_key(|c| c.case.grid.nx() * c.case.grid.ny()) {
            line += &format!(
                "; smallest counterexample seed {} on {}x{}",
                smallest.seed,
                smallest.case.grid.nx(),
                smallest.case.grid.ny()
            );
        }
        let _ = writeln!(log, "{line}");
        if let Some(dir) = &cfg.out {
            for c in &fr.failures {
                write_json(&dir.join(format!("{family}-seed{}.json", c.seed)), c)?;
            }
        }
        families.push(fr);
    }
    let report = Report::new(cfg.seed, cfg.cases, families);
    write_json(&cfg.report, &report)?;
    Ok(if report.passed() { EXIT_PASS } else { EXIT_FAILURE })
}

/// Re-executes one stored counterexample and prints its residuals.
fn replay_one(c: &Counterexample, clear_mutation: bool, log: &mut dyn Write) -> Result<bool, CliError> {
    let mut case = c.case.clone();
    case.initial
        .validate(&case.grid, &case.params)
        .map_err(|e| CliError::Usage(format!("stored case is inconsistent: {e}")))?;
    if clear_mutation {
        case.config.mutation = Mutation::None;
    }
    // The shrink path must still rebuild the stored recipe.
    let rebuilt = generate(c.seed, c.family).and_then(|g| replay(g, &c.shrink_path)).map(|r| r.recipe == case.recipe);
    let verdict = check(&case);
    let _ = writeln!(
        log,
        "{} seed {} path {:?} on {}x{}: {}",
        c.family,
        c.seed,
        c.shrink_path,
        case.grid.nx(),
        case.grid.ny(),
        if verdict.passed { "PASS" } else { "FAIL" }
    );
    for r in &verdict.residuals {
        let _ = writeln!(
            log,
            "  {:<32} {:>12.6e}  {:?} {:e}{}",
            r.name,
            r.value,
            r.bound,
            r.tolerance,
            if r.passed { "" } else { "  <-- violated" }
        );
    }
    if let Some(note) = &verdict.note {
        let _ = writeln!(log, "  note: {note}");
    }
    let same = verdict.residuals.len() == c.residuals.len()
        && verdict.residuals.iter().zip(&c.residuals).all(|(a, b)| {
            a.name == b.name && (a.value.to_bits() == b.value.0.to_bits() || (a.value.is_nan() && b.value.0.is_nan()))
        });
    if !clear_mutation {
        let _ =
            writeln!(log, "  residuals {} the stored run", if same { "bitwise identical to" } else { "differ from" });
    }
    match rebuilt {
        Ok(true) => {}
        Ok(false) => {
            let _ = writeln!(log, "  warning: (seed, family, shrink path) no longer rebuilds this case");
        }
        Err(e) => {
            let _ = writeln!(log, "  warning: could not rebuild from the seed: {e}");
        }
    }
    Ok(verdict.passed)
}

pub fn cmd_replay(path: &Path, clear_mutation: bool, log: &mut dyn Write) -> Result<i32, CliError> {
    let doc = read_replayable(path)?;
    let cases: Vec<Counterexample> = match doc {
        Replayable::One(c) => vec![*c],
        Replayable::Many(r) => r.families.into_iter().flat_map(|f| f.failures).collect(),
    };
    if cases.is_empty() {
        let _ = writeln!(log, "no counterexamples to replay");
    }
    let mut all = true;
    for c in &cases {
        all &= replay_one(c, clear_mutation, log)?;
    }
    Ok(if all { EXIT_PASS } else { EXIT_FAILURE })
}

/// Input of `simulate`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub nx: usize,
    pub ny: usize,
    /// Domain size [m].
    pub lx: f64,
    pub ly: f64,
    pub boundary: Boundary,
    #[serde(default)]
    pub params: PhysParams,
    /// Initial condition; empty means rest.
    #[serde(default)]
    pub features: Vec<Feature>,
    /// Explicit time step; defaults to `cfl_fraction` of the stability limit.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_cfl_fraction")]
    pub cfl_fraction: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default = "default_true")]
    pub svg: bool,
}

fn default_cfl_fraction() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub out: PathBuf,
    /// Overrides the config's cadence.
    pub snapshot_every: Option<usize>,
    pub svg: Option<bool>,
}

/// Speed at cell centres from face-averaged velocities.
pub fn centre_speed(s: &State, grid: &Grid) -> Field {
    let (nx, ny) = (grid.nx(), grid.ny());
    Field::from_fn(nx, ny, |i, j| {
        let ie = if grid.periodic_x() { (i + 1) % nx } else { i + 1 };
        let jn = if grid.periodic_y() { (j + 1) % ny } else { j + 1 };
        let u = 0.5 * (s.u[(i, j)] + s.u[(ie, j)]);
        let v = 0.5 * (s.v[(i, j)] + s.v[(i, jn)]);
        u.hypot(v)
    })
}

fn write_snapshot(dir: &Path, step: usize, s: &State, grid: &Grid, svg: bool) -> Result<(), CliError> {
    let csv = |name: &str, f: &Field, at: Stagger| -> Result<(), CliError> {
        let path = dir.join(format!("{name}_{step:06}.csv"));
        let file = fs::File::create(&path).map_err(CliError::io(&path))?;
        write_csv(std::io::BufWriter::new(file), f, grid, at)
            .map_err(|e| CliError::Io { path: path.clone(), source: std::io::Error::other(e) })
    };
    csv("eta", &s.eta, Stagger::Center)?;
    csv("u", &s.u, Stagger::XFace)?;
    csv("v", &s.v, Stagger::YFace)?;
    if svg {
        let t = format!("t = {:.6e} s", s.time);
        let path = dir.join(format!("eta_{step:06}.svg"));
        fs::write(&path, heatmap(&s.eta, &format!("eta, {t}"), Palette::Diverging)).map_err(CliError::io(&path))?;
        let path = dir.join(format!("speed_{step:06}.svg"));
        fs::write(&path, heatmap(&centre_speed(s, grid), &format!("speed, {t}"), Palette::Sequential))
            .map_err(CliError::io(&path))?;
    }
    Ok(())
}

fn write_checkpoint(path: &Path, s: &State, grid: &Grid, params: &PhysParams) -> Result<(), CliError> {
    let bytes = checkpoint::serialize(s, grid, params).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::write(path, bytes).map_err(CliError::io(path))
}

pub fn cmd_simulate(config: &Path, opts: &SimulateOptions, log: &mut dyn Write) -> Result<i32, CliError> {
    let text = fs::read_to_string(config).map_err(CliError::io(config))?;
    let cfg: SimConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Malformed { path: config.to_path_buf(), reason: e.to_string() })?;
    let recipe = Recipe {
        nx: cfg.nx,
        ny: cfg.ny,
        lx: cfg.lx,
        ly: cfg.ly,
        boundary: cfg.boundary,
        params: cfg.params,
        features: cfg.features.clone(),
        cfl_fraction: cfg.cfl_fraction,
        n_steps: cfg.n_steps,
        knobs: Knobs::Plain,
    };
    let bad = |e: Error| CliError::Usage(format!("{}: {e}", config.display()));
    let grid = recipe.grid().map_err(bad)?;
    cfg.params.validate().map_err(bad)?;
    let (initial, _) = build_state(&recipe, &grid).map_err(bad)?;
    let dt = cfg.dt.unwrap_or_else(|| cfg.cfl_fraction * cfl_limit(&grid, &cfg.params, initial.max_speed()));
    let every = opts.snapshot_every.or(cfg.snapshot_every).unwrap_or(cfg.n_steps.max(1)).max(1);
    let svg = opts.svg.unwrap_or(cfg.svg);
    fs::create_dir_all(&opts.out).map_err(CliError::io(&opts.out))?;
    write_snapshot(&opts.out, 0, &initial, &grid, svg)?;

    let step_config = StepConfig::new(dt, cfg.n_steps);
    let mut last_good = initial.clone();
    let mut max_change: f64 = 0.0;
    let mut io_error = None;
    let result = integrate(&initial, &grid, &cfg.params, &step_config, |n, s| {
        max_change = max_change.max(s.eta.max_abs_diff(&initial.eta));
        if io_error.is_none() && (n % every == 0 || n == cfg.n_steps) {
            if let Err(e) = write_snapshot(&opts.out, n, s, &grid, svg) {
                io_error = Some(e);
            }
        }
        last_good = s.clone();
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    match result {
        Ok(fin) => {
            write_checkpoint(&opts.out.join("final.ckpt"), &fin, &grid, &cfg.params)?;
            let _ = writeln!(log, "{} steps of dt = {dt:e} s; max |eta(t) - eta(0)| = {max_change:.6e} m", cfg.n_steps);
            Ok(EXIT_PASS)
        }
        Err(Error::Blowup { step }) => {
            write_checkpoint(&opts.out.join("last_good.ckpt"), &last_good, &grid, &cfg.params)?;
            Err(CliError::Blowup { step, reason: "non-finite state or negative depth".into() })
        }
        Err(Error::CflViolation { dt, limit }) => {
            Err(CliError::Blowup { step: 0, reason: format!("time step {dt:e} exceeds the CFL limit {limit:e}") })
        }
        Err(e) => Err(bad(e)),
    }
}
