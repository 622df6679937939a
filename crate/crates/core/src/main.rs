use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vfmga::orchestrator::api::{self, DEFAULT_PORT, PORT_VAR, RUN_DIR_VAR};
use vfmga::orchestrator::{run_pipeline, write_mps_file, Inputs, RunError, RunManifest, Stage};

#[derive(Parser)]
#[command(name = "vfmga", version, about = "Near-optimal energy system alternatives ranked by stakeholder preferences")]
struct Cli {
    /// Run configuration (run.json).
    #[arg(long, global = true, default_value = "run.json")]
    config: PathBuf,
    /// Directory receiving the run artifacts.
    #[arg(long, global = true, default_value = "run")]
    out_dir: PathBuf,
    /// Assert that the run uses no random numbers. Every stage is
    /// deterministic, so this only documents the intent.
    #[arg(long, global = true)]
    seed_independent: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cost-minimal system.
    Optimize {
        /// Also write the cost-minimising program in MPS format.
        #[arg(long)]
        mps: Option<PathBuf>,
    },
    /// Build technology groups and weight vectors.
    Groups,
    /// Generate near-optimal alternatives.
    Generate,
    /// Evaluate attribute profiles of every alternative.
    Evaluate,
    /// Rank alternatives per stakeholder.
    Rank,
    /// Classify technologies, count frequencies, cluster stakeholders.
    Analyse,
    /// Run every stage.
    All,
    /// Serve the JSON API over an existing run directory.
    Serve {
        /// Port; defaults to $VFMGA_PORT or 8080.
        #[arg(long)]
        port: Option<u16>,
    },
}

fn report(m: &RunManifest, out: &std::path::Path) {
    let c = &m.counts;
    println!("run {} -> {}", m.run_id, out.display());
    if let Some(f) = m.f_star {
        println!("  optimal cost    {f:.6}");
    }
    for (s, n) in &c.groups_per_strategy {
        println!("  groups {s:<8} {n}");
    }
    if m.stages.contains(&Stage::Generate) {
        println!("  weight vectors  {}", c.weight_vectors);
        println!("  MGA runs        {} ({} failed)", c.raw_runs, c.failed_runs);
        println!("  alternatives    {} ({} capacity artefacts)", c.alternatives, c.capacity_artefacts);
    }
    if m.stages.contains(&Stage::Rank) {
        println!("  stakeholders    {}", c.stakeholders);
    }
    let last = m.stages.last().map_or("none", |s| s.name());
    println!("  last stage      {last}");
}

fn run(cli: Cli) -> Result<(), RunError> {
    let stage = match &cli.command {
        Command::Serve { port } => {
            let dir = match std::env::var_os(RUN_DIR_VAR) {
                Some(d) if cli.out_dir.as_os_str() == "run" => PathBuf::from(d),
                _ => cli.out_dir.clone(),
            };
            let port = port
                .or_else(|| std::env::var(PORT_VAR).ok().and_then(|p| p.parse().ok()))
                .unwrap_or(DEFAULT_PORT);
            let rt = tokio::runtime::Runtime::new().map_err(|source| RunError::Io { path: dir.clone(), source })?;
            return rt.block_on(api::serve(&dir, port));
        }
        Command::Optimize { .. } => Stage::Optimize,
        Command::Groups => Stage::Groups,
        Command::Generate => Stage::Generate,
        Command::Evaluate => Stage::Evaluate,
        Command::Rank => Stage::Rank,
        Command::Analyse | Command::All => Stage::Analyse,
    };
    let inputs = Inputs::load(&cli.config)?;
    if let Command::Optimize { mps: Some(path) } = &cli.command {
        write_mps_file(&inputs, path)?;
    }
    if stage >= Stage::Rank && inputs.preferences.is_empty() {
        eprintln!("no stakeholder preferences: stopping after attribute evaluation");
    }
    let manifest = run_pipeline(&inputs, &cli.out_dir, stage)?;
    report(&manifest, &cli.out_dir);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
