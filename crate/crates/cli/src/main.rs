use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "modart", version, about = "Modal decomposition of acoustic radiance transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble the radiance transfer system of a scene.
    Build(BuildArgs),
    /// Find poles, eigenvectors and undriven residues of a built system.
    Decompose(DecomposeArgs),
    /// Run the time-domain recursion (the reference solution).
    Simulate(SimulateArgs),
    /// Render energy responses (and optionally RIRs) from a modal model.
    Render(RenderArgs),
    /// Compare a modal response with a reference response.
    Compare(CompareArgs),
    /// Operation counts of the interactive update strategies.
    Complexity(ComplexityArgs),
}

#[derive(Args, Debug)]
struct BuildArgs {
    scene: PathBuf,
    #[arg(long = "fs-e", default_value_t = 1000.0)]
    fs_e: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Form-factor rays per patch.
    #[arg(long, default_value_t = 4000)]
    rays: usize,
    /// Rays per source and per listener.
    #[arg(long = "endpoint-rays", default_value_t = 20000)]
    endpoint_rays: usize,
    /// Point pairs (of 16) that must see each other to connect two patches.
    #[arg(long = "visibility-quorum", default_value_t = 8)]
    visibility_quorum: usize,
    /// Energy absorption per meter of air.
    #[arg(long = "air-absorption", default_value_t = 0.0)]
    air_absorption: f64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Eai,
    Arnoldi,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum RestrictArg {
    All,
    #[value(name = "real_positive", alias = "real-positive")]
    RealPositive,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    /// Output directory of `build`.
    system: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::Eai)]
    backend: BackendArg,
    /// Decay-time threshold in seconds.
    #[arg(long = "t-tr")]
    t_tr: f64,
    #[arg(long, value_enum, default_value_t = RestrictArg::All)]
    restrict: RestrictArg,
    /// Use the real-valued delays (EAI only).
    #[arg(long)]
    fractional: bool,
    /// Expected system rate; rejected if it differs from the build.
    #[arg(long = "fs-e")]
    fs_e: Option<f64>,
    /// Seed of the Arnoldi start vector.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    system: PathBuf,
    /// Samples per response.
    #[arg(short, long)]
    n: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RenderArgs {
    system: PathBuf,
    model: PathBuf,
    #[arg(short, long)]
    n: usize,
    /// Leave out the direct-path impulse.
    #[arg(long = "no-direct")]
    no_direct: bool,
    /// Also synthesize noise-shaped RIRs at this audio rate (Hz).
    #[arg(long)]
    rir: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    reference: PathBuf,
    candidate: PathBuf,
    /// Compare from this time on, in seconds.
    #[arg(long = "t-tr")]
    t_tr: f64,
    /// Write the report as JSON here as well.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SweepArg {
    /// `N_S = N_R` from 1 to 100.
    Endpoints,
    /// Log-spaced patch counts from 10 to 10⁴, paths following `ν·N_P²`.
    Patches,
}

#[derive(Args, Debug)]
struct ComplexityArgs {
    #[arg(long = "n-p", default_value_t = 140.0)]
    n_p: f64,
    #[arg(long, default_value_t = 0.4)]
    nu: f64,
    /// Path count; derived from `ν·N_P²` when absent.
    #[arg(long = "n-l")]
    n_l: Option<f64>,
    #[arg(long = "n-s", default_value_t = 1.0)]
    n_s: f64,
    #[arg(long = "n-r", default_value_t = 1.0)]
    n_r: f64,
    /// Moved sources; defaults to all.
    #[arg(long = "dn-s")]
    dn_s: Option<f64>,
    /// Moved listeners; defaults to all.
    #[arg(long = "dn-r")]
    dn_r: Option<f64>,
    #[arg(long = "n-t", default_value_t = 2000.0)]
    n_t: f64,
    #[arg(long = "n-k", default_value_t = 10.0)]
    n_k: f64,
    #[arg(long = "n-rays", default_value_t = 1e5)]
    n_rays: f64,
    /// Ray-tracing reflection orders to tabulate.
    #[arg(long = "n-refl", value_delimiter = ',', default_value = "10,100")]
    n_refl: Vec<f64>,
    #[arg(long, value_enum)]
    sweep: Option<SweepArg>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn configure_threads() {
    if let Some(n) = std::env::var("MODART_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not cap threads at {n}: {e}");
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads();
    let result = match cli.command {
        Command::Build(a) => commands::build(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Render(a) => commands::render(a),
        Command::Compare(a) => commands::compare(a),
        Command::Complexity(a) => commands::complexity(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
