use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use rmhmc::models::ModelKind;
use rmhmc_cli::verify::run_all;
use rmhmc_cli::{run_experiment, write_reports, ExperimentSpec};

const EXIT_CONFIG: u8 = 1;
const EXIT_CRITERION: u8 = 2;

#[derive(Parser)]
#[command(name = "rmhmc", version, about = "RMHMC integrator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write CSV reports.
    Run {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Report directory; overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Base seed; overrides `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Config override as dotted `key=value`, e.g. `model.alpha=1e4`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the acceptance criteria and print one line per criterion.
    Verify {
        /// Also write the results to `DIR/verify.csv`.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// List the bundled models.
    ListModels,
}

fn run(config: PathBuf, out: Option<PathBuf>, threads: usize, seed: Option<u64>, mut overrides: Vec<String>) -> Result<()> {
    // Dedicated flags win over `--set` and the file.
    if let Some(seed) = seed {
        overrides.push(format!("seed={seed}"));
    }
    let mut spec = ExperimentSpec::load(&config, &overrides)?;
    if let Some(out) = out {
        spec.output_dir = out;
    }
    let model = spec.model.build()?;
    eprintln!("running {} chains of {} on {}", spec.run_count(), spec.model.name, spec.integrators.join(", "));
    let results = run_experiment(&spec, &model, threads)?;
    for path in write_reports(&results, &spec.output_dir)? {
        eprintln!("wrote {}", path.display());
    }
    let failed = results.runs.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} of {} chains failed; see the status column", results.runs.len());
    }
    Ok(())
}

fn verify(out: Option<PathBuf>) -> Result<bool> {
    let outcomes = run_all(|o| println!("{o}"));
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} criteria passed", outcomes.len());
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        let mut w = csv::Writer::from_path(dir.join("verify.csv"))?;
        w.write_record(["criterion", "title", "passed", "seconds", "detail"])?;
        for o in &outcomes {
            w.write_record([o.id.to_string(), o.title.to_string(), o.passed.to_string(), format!("{:.1}", o.seconds), o.detail.clone()])?;
        }
        w.flush()?;
    }
    Ok(passed == outcomes.len())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, threads, seed, overrides } => run(config, out, threads, seed, overrides).map(|_| true),
        Command::Verify { out } => verify(out),
        Command::ListModels => {
            for kind in ModelKind::ALL {
                println!("{:<12}{}", kind.as_str(), kind.description());
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CRITERION),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
