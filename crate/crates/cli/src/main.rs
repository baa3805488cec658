use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fwbnb::problems::generators::GeometricNetworkParams;
use fwbnb_cli::schema::CriterionSpec;
use fwbnb_cli::{generate_to, run, GenerateSpec, GipPair, RunOptions, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "fwbnb", version, about = "Frank-Wolfe branch-and-bound for mixed-integer convex problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance file.
    Run {
        instance: PathBuf,
        /// Directory for solution.json and trace.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Settings override as dotted key=value, repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, value_name = "S")]
        time_limit: Option<f64>,
        #[arg(long, value_name = "N")]
        node_limit: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        verbose: bool,
    },
    /// Write a reproducible random instance.
    Generate {
        kind: Kind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cube dimension, graph vertices, or experiment parameters.
        #[arg(long)]
        n: Option<usize>,
        /// Number of experiments.
        #[arg(long)]
        m: Option<usize>,
        /// Graph degree.
        #[arg(long, default_value_t = 3)]
        degree: usize,
        #[arg(long, value_enum, default_value_t = Pair::Isomorphic)]
        pair: Pair,
        #[arg(long)]
        budget: Option<usize>,
        /// Per-experiment upper bound.
        #[arg(long, default_value_t = 2)]
        upper: usize,
        #[arg(long, value_enum, default_value_t = CriterionArg::D)]
        criterion: CriterionArg,
        /// Cube upper bound.
        #[arg(long, default_value_t = 3)]
        width: i64,
        #[arg(long, default_value_t = 8)]
        nodes: usize,
        #[arg(long, default_value_t = 0.45)]
        radius: f64,
        #[arg(long, default_value_t = 4)]
        candidates: usize,
        #[arg(long, default_value_t = 4)]
        demands: usize,
        #[arg(long, default_value_t = 2)]
        destinations: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Cube,
    Nd,
    Gip,
    Oedp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pair {
    Isomorphic,
    Independent,
    Petersen,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    A,
    D,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = matches!(cli.command, Command::Run { verbose: true, .. });
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if verbose { "info" } else { "warn" }))
        .init();
    let code = match cli.command {
        Command::Run {
            instance,
            out,
            set,
            time_limit,
            node_limit,
            seed,
            verbose,
        } => {
            let opts = RunOptions {
                out_dir: out,
                set,
                time_limit_s: time_limit,
                node_limit,
                seed,
                verbose,
            };
            match run(&instance, &opts) {
                Ok(report) => {
                    println!("{}", report.summary);
                    report.exit_code
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    EXIT_ERROR
                }
            }
        }
        Command::Generate {
            kind,
            seed,
            n,
            m,
            degree,
            pair,
            budget,
            upper,
            criterion,
            width,
            nodes,
            radius,
            candidates,
            demands,
            destinations,
            out,
        } => {
            let spec = match kind {
                Kind::Cube => GenerateSpec::CubeQuadratic { n: n.unwrap_or(3), width },
                Kind::Nd => GenerateSpec::NetworkDesign(GeometricNetworkParams {
                    num_nodes: nodes,
                    radius,
                    num_candidates: candidates,
                    num_demands: demands,
                    num_destinations: destinations,
                }),
                Kind::Gip => GenerateSpec::GraphIsomorphism {
                    n: n.unwrap_or(10),
                    degree,
                    pair: match pair {
                        Pair::Isomorphic => GipPair::Isomorphic,
                        Pair::Independent => GipPair::Independent,
                        Pair::Petersen => GipPair::Petersen,
                    },
                },
                Kind::Oedp => {
                    let n = n.unwrap_or(4);
                    GenerateSpec::Oedp {
                        m: m.unwrap_or(20),
                        n,
                        budget: budget.unwrap_or(2 * n),
                        upper,
                        criterion: match criterion {
                            CriterionArg::A => CriterionSpec::A,
                            CriterionArg::D => CriterionSpec::D,
                        },
                    }
                }
            };
            match generate_to(&spec, seed, &out) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    EXIT_ERROR
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
