//! Command-line front end for the gradient-avalanche laboratory.
//!
//! Exit codes: 0 success, 1 usage error, 2 acceptance failure, 3 corrupt store.

use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cascade_lab::campaign::{cmd_analyze, cmd_synth, cmd_train};
use cascade_lab::cascade::{run_cascade, CascadeConfig};
use cascade_lab::config::CampaignConfig;
use cascade_lab::graph::{DiffusionGraph, GraphParams, Topology};
use cascade_lab::report;
use cascade_lab::{Error, Scalar};

const OUTPUT_DIR_ENV: &str = "CASCADE_LAB_OUT";

#[derive(Parser)]
#[command(name = "cascade-lab", version, about = "XOR gradient-avalanche laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Campaign config file (flat key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. --set epochs=100 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output/store directory (overrides config; env CASCADE_LAB_OUT wins).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<CampaignConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => CampaignConfig::from_file(path)?,
            None => CampaignConfig::default(),
        };
        for pair in &self.overrides {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("--set expects KEY=VALUE, got '{pair}'")))?;
            cfg.set(key.trim(), value.trim())?;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Ok(env_out) = std::env::var(OUTPUT_DIR_ENV) {
            cfg.output_dir = PathBuf::from(env_out);
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) the training campaign into the store.
    Train(ConfigArgs),
    /// Run the synthetic Gaussian control campaign.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also run the alpha and quantile robustness sweeps.
        #[arg(long)]
        sweep: bool,
    },
    /// Analyze a populated store into figure datasets and a summary.
    Analyze(ConfigArgs),
    /// Evaluate every acceptance criterion against a store.
    Report(ConfigArgs),
    /// Run one cascade on a graph file and a gradient vector file.
    CascadeDebug {
        /// Edge-list graph file (graph-export format).
        #[arg(long)]
        graph: PathBuf,
        /// Gradient vector file, one value per line.
        #[arg(long)]
        gradient: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        #[arg(long, default_value_t = 0.90)]
        quantile: f64,
        #[arg(long, default_value_t = 20)]
        max_steps: usize,
    },
    /// Generate a diffusion graph and write its edge list.
    GraphExport {
        #[arg(long)]
        topology: String,
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are success, anything else is usage error
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::CorruptStore { .. } => ExitCode::from(3),
                Error::InvalidConfig(_) | Error::Parse(_) => ExitCode::from(1),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let report = cmd_train(&cfg)?;
            println!(
                "train: {} executed, {} skipped, {} quarantined -> {}",
                report.executed,
                report.skipped,
                report.quarantined,
                cfg.output_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { config, sweep } => {
            let cfg = config.resolve()?;
            let artifacts = cmd_synth(&cfg, sweep)?;
            println!(
                "synth: D_synth = {:.4}, topology cv = {:.5}",
                artifacts.summary.d_synth, artifacts.summary.cv
            );
            for (topo, fit) in &artifacts.summary.per_topology {
                println!(
                    "  {:16} exponent = {:.4}  R^2 = {:.4}",
                    topo.tag(),
                    fit.exponent,
                    fit.r_squared
                );
            }
            if let Some(table) = &artifacts.alpha_sweep {
                println!("  alpha sweep cv = {:.5}", table.cv);
            }
            if let Some(table) = &artifacts.quantile_sweep {
                println!("  quantile sweep cv = {:.5}", table.cv);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze(args) => {
            let cfg = args.resolve()?;
            let analysis = cmd_analyze(&cfg)?;
            let s = &analysis.summary;
            println!(
                "analyze: {} runs ({} grokked) across {} scales",
                s.coverage.n_runs,
                s.coverage.n_grokked,
                s.coverage.runs_per_scale.len()
            );
            println!(
                "  D = {:.4} (R^2 {:.4}), gamma = {:.4} (R^2 {:.4})",
                s.d_aggregate.exponent, s.d_aggregate.r_squared, s.gamma.exponent, s.gamma.r_squared
            );
            if let (Some(pre), Some(post)) = (&s.d_pre, &s.d_post) {
                println!(
                    "  D_pre = {:.4} +/- {:.4}, D_post = {:.4} +/- {:.4}",
                    pre.mean, pre.std, post.mean, post.std
                );
            }
            if let Some(ds) = s.d_synth {
                println!("  D_synth = {ds:.4}");
            }
            println!("  artifacts -> {}", cfg.output_dir.join("analysis").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(args) => {
            let cfg = args.resolve()?;
            let report = report::evaluate(&cfg.output_dir)?;
            print!("{}", report.render());
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::CascadeDebug {
            graph,
            gradient,
            alpha,
            quantile,
            max_steps,
        } => {
            let file = std::fs::File::open(&graph)?;
            let graph = DiffusionGraph::read_edge_list(BufReader::new(file))?;
            let text = std::fs::read_to_string(&gradient)?;
            let field: Vec<Scalar> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.trim().parse::<Scalar>())
                .collect::<Result<_, _>>()
                .map_err(|e| Error::Parse(format!("gradient file: {e}")))?;
            let cfg = CascadeConfig {
                alpha,
                quantile,
                max_steps,
            };
            let (_, record) = run_cascade(&field, &graph, &cfg)?;
            println!(
                "n_params = {}, threshold = {}, size = {}, steps = {}",
                record.n_params, record.threshold, record.size, record.steps
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::GraphExport {
            topology,
            nodes,
            seed,
            out,
        } => {
            let topo = Topology::from_tag(&topology)?;
            let graph = DiffusionGraph::generate(topo, nodes, &GraphParams::default(), seed)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(path)?;
                    graph.write_edge_list(std::io::BufWriter::new(file))?;
                }
                None => {
                    let stdout = std::io::stdout();
                    graph.write_edge_list(stdout.lock())?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
