use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod catalogue;
mod output;
mod pipeline;
mod simulate;

use output::Failure;

#[derive(Parser)]
#[command(name = "slowfast", version, about = "Slow-manifold reductions of mass-action reaction networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical manifold, eigenvalues and R₁..R_order on a base grid.
    Reduce(ReduceArgs),
    /// Singularity, branches, fibre class and form of a scaled model.
    Classify(ModelArgs),
    /// Full versus reduced trajectories.
    Simulate(SimulateArgs),
    /// Michaelis-Menten census and closed-form checks.
    Catalogue(CatalogueArgs),
    /// Reduced Kim-Forger field against its closed form.
    Kf(KfArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args)]
pub struct ModelArgs {
    /// Built-in id (mm-irreversible, mm-reversible, kim-forger) or a JSON file.
    #[arg(long)]
    pub model: String,
    /// Scaling JSON file.
    #[arg(long)]
    pub scaling: String,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Directory for output files; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=slowfast::reduction::MAX_ORDER as i64))]
    pub order: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// tQSSA figure data: α = 0.75, β = 1, γ = 0.005.
    Tqssa,
    /// KF runs at γ = ρ₆ and γ = 1.5ρ₆.
    Kf,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "tqssa")]
    pub scenario: Scenario,
    /// explicit (Dormand-Prince) or implicit (SDIRK); scenario default when absent.
    #[arg(long)]
    pub engine: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Irreversible,
    Reversible,
    Both,
}

#[derive(Args)]
pub struct CatalogueArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub scheme: SchemeArg,
    #[arg(long)]
    pub verify_oracles: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Args)]
pub struct KfArgs {
    /// γ as a multiple of ρ₆.
    #[arg(long, default_value_t = 1.0)]
    pub gamma_ratio: f64,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Reduce(a) => pipeline::reduce(&a),
        Command::Classify(a) => pipeline::classify(&a),
        Command::Simulate(a) => simulate::run(&a),
        Command::Catalogue(a) => catalogue::run(&a),
        Command::Kf(a) => simulate::kf(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

impl From<slowfast::Error> for Failure {
    fn from(e: slowfast::Error) -> Self {
        Failure::Core(e)
    }
}
