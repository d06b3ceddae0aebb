use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gfdprop::commands::{cmd_replay, cmd_run, cmd_simulate, RunConfig, SimulateOptions};
use gfdprop_core::dynamics::Mutation;
use gfdprop_core::suites::Family;

#[derive(Parser)]
#[command(name = "gfdprop", version, about = "Physics property suites for a rotating shallow-water model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run property suites over generated cases and write a JSON report.
    Run {
        /// Comma-separated families, or "all".
        #[arg(long, value_delimiter = ',', default_value = "all")]
        suite: Vec<String>,
        #[arg(long, env = "GFDPROP_SEED", default_value_t = 0)]
        seed: u64,
        /// Cases per family.
        #[arg(long, default_value_t = 10)]
        cases: usize,
        #[arg(long, default_value = "gfdprop-report.json")]
        report: PathBuf,
        /// Directory for counterexample files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long, value_enum, default_value_t = MutationArg::None, hide = true)]
        mutation: MutationArg,
    },
    /// Re-execute a counterexample (or every failure in a report).
    Replay {
        file: PathBuf,
        /// Run without the stored test-only mutation.
        #[arg(long, hide = true)]
        clear_mutation: bool,
    },
    /// Run one configured simulation with CSV/SVG snapshots.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "gfdprop-out")]
        out: PathBuf,
        #[arg(long)]
        snapshot_every: Option<usize>,
        #[arg(long)]
        no_svg: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    None,
    CoriolisSign,
    DroppedBeta,
    BrokenFluxForm,
}

impl From<MutationArg> for Mutation {
    fn from(m: MutationArg) -> Self {
        match m {
            MutationArg::None => Mutation::None,
            MutationArg::CoriolisSign => Mutation::CoriolisSign,
            MutationArg::DroppedBeta => Mutation::DroppedBeta,
            MutationArg::BrokenFluxForm => Mutation::BrokenFluxForm,
        }
    }
}

fn families(names: &[String]) -> Result<Vec<Family>, String> {
    if names.iter().any(|n| n.eq_ignore_ascii_case("all")) {
        return Ok(Family::ALL.to_vec());
    }
    let mut out = Vec::new();
    for n in names {
        let f = Family::from_name(n.trim()).ok_or_else(|| {
            let known: Vec<_> = Family::ALL.iter().map(|f| f.name()).collect();
            format!("unknown suite {n:?}; known: {}", known.join(", "))
        })?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    let result = match cli.command {
        Command::Run { suite, seed, cases, report, out, parallel, mutation } => match families(&suite) {
            Ok(families) => cmd_run(
                &RunConfig { families, seed, cases, report, out, parallel, mutation: mutation.into() },
                &mut stdout,
            ),
            Err(e) => Err(gfdprop::CliError::Usage(e)),
        },
        Command::Replay { file, clear_mutation } => cmd_replay(&file, clear_mutation, &mut stdout),
        Command::Simulate { config, out, snapshot_every, no_svg } => {
            cmd_simulate(&config, &SimulateOptions { out, snapshot_every, svg: no_svg.then_some(false) }, &mut stdout)
        }
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gfdprop: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
