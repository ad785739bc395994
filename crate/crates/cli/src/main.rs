use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use vat_cli::commands::{FIGURE_PATH_KEYS, RUN_PATH_KEYS};
use vat_cli::config::{load_document, path_value};
use vat_cli::CliError;
use vat_core::Execution;

#[derive(Parser)]
#[command(name = "vat", version, about = "Value alignment tax measurement")]
struct Cli {
    /// Worker threads; 1 runs every stage sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config; relative paths inside it resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate paired runs with planted coupling.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_scenes: Option<usize>,
    },
    /// Pair runs and compute the full metric report.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        runs: RunFlags,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        label: Option<String>,
    },
    /// Render figure data (and SVGs) from one or more reports.
    Figures {
        #[command(flatten)]
        common: Common,
        #[arg(long = "report")]
        reports: Vec<PathBuf>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        no_svg: bool,
    },
    /// Scene bootstrap, rank agreement and cross-granularity checks.
    Robustness {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        runs: RunFlags,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Collect judgments from a chat-completion endpoint.
    Elicit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Stratified train/test split of scenes.
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long = "run")]
        runs: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Serve the deterministic mock endpoint until killed.
    MockServer {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8089)]
        port: u16,
    },
}

#[derive(Args)]
struct RunFlags {
    #[arg(long)]
    pre: Option<PathBuf>,
    #[arg(long)]
    post: Option<PathBuf>,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Fail on unpaired keys and on degenerate statistics.
    #[arg(long)]
    strict: bool,
}

impl RunFlags {
    fn overrides(self) -> Vec<(&'static str, Option<Value>)> {
        vec![
            ("pre", path_value(self.pre)),
            ("post", path_value(self.post)),
            ("taxonomy", path_value(self.taxonomy)),
            ("strict", self.strict.then_some(Value::Bool(true))),
        ]
    }
}

fn execution(jobs: Option<usize>) -> Result<Execution, CliError> {
    match jobs {
        Some(0) => Err(CliError::input("cli", "args", "config", "--jobs must be at least 1")),
        Some(1) => Ok(Execution::Serial),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::input("cli", "args", "config", e.to_string()))?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Execution::Serial),
        None => Ok(Execution::Parallel),
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let exec = execution(cli.jobs)?;
    let base = |c: &Common| vec![("out_dir", path_value(c.out_dir.clone()))];
    match cli.command {
        Command::Synth {
            common,
            spec,
            seed,
            n_scenes,
        } => {
            let mut o = base(&common);
            o.push(("spec", path_value(spec)));
            o.push(("seed", seed.map(Value::from)));
            o.push(("n_scenes", n_scenes.map(Value::from)));
            vat_cli::cmd_synth(load_document(common.config.as_deref(), &["spec"], o)?, exec)
        }
        Command::Pipeline {
            common,
            runs,
            target,
            label,
        } => {
            let mut o = base(&common);
            o.extend(runs.overrides());
            o.push(("target", target.map(Value::from)));
            o.push(("label", label.map(Value::from)));
            vat_cli::cmd_pipeline(load_document(common.config.as_deref(), &RUN_PATH_KEYS, o)?, exec)
        }
        Command::Figures {
            common,
            reports,
            taxonomy,
            top_k,
            no_svg,
        } => {
            let mut o = base(&common);
            let reports: Vec<Value> = reports.into_iter().filter_map(|p| path_value(Some(p))).collect();
            o.push(("reports", (!reports.is_empty()).then_some(Value::Array(reports))));
            o.push(("taxonomy", path_value(taxonomy)));
            o.push(("top_k", top_k.map(Value::from)));
            o.push(("svg", no_svg.then_some(Value::Bool(false))));
            vat_cli::cmd_figures(load_document(common.config.as_deref(), &FIGURE_PATH_KEYS, o)?, exec)
        }
        Command::Robustness {
            common,
            runs,
            seed,
            fraction,
            replicates,
        } => {
            let mut o = base(&common);
            o.extend(runs.overrides());
            o.push(("seed", seed.map(Value::from)));
            o.push(("fraction", fraction.map(Value::from)));
            o.push(("replicates", replicates.map(Value::from)));
            vat_cli::cmd_robustness(load_document(common.config.as_deref(), &RUN_PATH_KEYS, o)?, exec)
        }
        Command::Elicit { common, dataset } => {
            let mut o = base(&common);
            o.push(("dataset", path_value(dataset)));
            vat_cli::cmd_elicit(load_document(common.config.as_deref(), &["dataset", "taxonomy"], o)?, exec)
        }
        Command::Split {
            common,
            runs,
            seed,
            ratio,
        } => {
            let mut o = base(&common);
            let runs: Vec<Value> = runs.into_iter().filter_map(|p| path_value(Some(p))).collect();
            o.push(("runs", (!runs.is_empty()).then_some(Value::Array(runs))));
            o.push(("seed", seed.map(Value::from)));
            o.push(("ratio", ratio.map(Value::from)));
            vat_cli::cmd_split(load_document(common.config.as_deref(), &["runs", "manifests"], o)?, exec)
        }
        Command::MockServer { config, port } => vat_cli::cmd_mock_server(load_document(config.as_deref(), &[], vec![])?, port),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
