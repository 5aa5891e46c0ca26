use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use expbench_cli::{commands, exit_code, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "expbench", version, about = "Pairwise single-step benchmark of stiff ODE integrators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List every scheme with its family and formal order.
    List,
    /// Build (or load from cache) reference trajectories and write them out.
    Reference(RunArgs),
    /// Run schemes over every consecutive pair of a reference grid.
    Bench(RunArgs),
    /// Fit convergence slopes on a problem with a closed-form solution.
    Convergence(RunArgs),
    /// Count the steps an adaptive explicit RK45 needs on a stiff model.
    DemoStiffness(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with run settings; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Scheme names (comma separated or repeated), or `all`.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
    /// Grid sizes (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Radau5 substeps per grid interval for the reference.
    #[arg(long)]
    substeps: Option<usize>,
    /// ETD-RDP sign convention: paper_verbatim or negated.
    #[arg(long)]
    sign_mode: Option<String>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunArgs {
    fn resolve(self) -> anyhow::Result<RunConfig> {
        let flags = Overrides {
            model: self.model,
            schemes: self.scheme,
            n: self.n,
            out: self.out,
            substeps: self.substeps,
            sign_mode: self.sign_mode,
            rtol: self.rtol,
            atol: self.atol,
            jobs: self.jobs,
        };
        RunConfig::resolve(self.config.as_deref(), flags)
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::List => commands::list(out),
        Command::Reference(a) => commands::reference(&a.resolve()?, out).map(drop),
        Command::Bench(a) => commands::bench(&a.resolve()?, out).map(drop),
        Command::Convergence(a) => commands::convergence(&a.resolve()?, out).map(drop),
        Command::DemoStiffness(a) => commands::demo_stiffness(&a.resolve()?, out).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
