use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use mcts_lab::domains::build_domain;
use mcts_lab::eval::ScoreKind;
use mcts_lab::harness::{measure_runtime, run_experiment, score_results, ExperimentConfig, HarnessError};
use mcts_lab::oracle::{
    exact_asap_fixed_point, exact_ipa_fixed_point, p_abs_closed_form, p_abs_enumerate, p_abs_exact,
    p_abs_monte_carlo, value_iteration, LayeredMdp, OracleError,
};
use mcts_lab::{ActionIndex, EnvState, Mdp};

#[derive(Parser)]
#[command(name = "mcts-lab", version, about = "MCTS with on-the-go abstractions: experiments, scores and oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play every (agent, budget, episode) of a config and write a result CSV.
    Run {
        config: PathBuf,
        /// Result file; defaults to the config path with a `.csv` extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the number of available cores.
        #[arg(long, env = "MCTS_LAB_THREADS")]
        threads: Option<usize>,
    },
    /// Score agents from one or more result files.
    Score {
        /// `pairings` or `relative`.
        kind: ScoreKind,
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Also write the pairwise matrix as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write the JSON report to a file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Exact reference computations.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Single-threaded per-decision timing of every agent in a config.
    Bench { config: PathBuf },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Optimal value and actions at the root of a finite-horizon model.
    ValueIteration(ModelArgs),
    /// Exact abstraction of a finite-horizon model.
    FixedPoint {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "asap")]
        kind: FixedPointKind,
        #[arg(long, default_value_t = 0.0)]
        eps_a: f64,
        #[arg(long, default_value_t = 0.0)]
        eps_t: f64,
        /// Pruning threshold of the pair rule; unpruned when absent.
        #[arg(long)]
        alpha: Option<f64>,
        /// List the members of every non-singleton state block.
        #[arg(long)]
        blocks: bool,
    },
    /// Probability that two random states are abstracted together.
    PAbs {
        /// Actions of the first state.
        n: u32,
        /// Actions of the second state.
        l: u32,
        /// Number of distinct Q values.
        m: u32,
        /// Monte Carlo trials in addition to the exact value.
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FixedPointKind {
    Asap,
    Ipa,
}

#[derive(Args)]
struct ModelArgs {
    /// Layered model in the text format.
    #[arg(long, conflicts_with = "domain", required_unless_present = "domain")]
    model: Option<PathBuf>,
    /// Shipped domain to unroll from its initial state.
    #[arg(long)]
    domain: Option<String>,
    /// Domain parameters as an inline TOML table body, e.g. `n = 6`.
    #[arg(long, default_value = "", requires = "domain")]
    params: String,
    /// Unrolling horizon; defaults to the domain's own horizon.
    #[arg(long, requires = "domain")]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    max_states: usize,
}

#[derive(Debug)]
enum CliError {
    Harness(HarnessError),
    Config(String),
    Other(String),
    /// Stdout was closed by the reader, e.g. `mcts-lab ... | head`.
    ClosedOutput,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Harness(e) => e.exit_code() as u8,
            CliError::Config(_) => 2,
            CliError::Other(_) => 1,
            CliError::ClosedOutput => 0,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Harness(e) => write!(f, "{e}"),
            CliError::Config(m) | CliError::Other(m) => f.write_str(m),
            CliError::ClosedOutput => f.write_str("stdout closed"),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Harness(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::ClosedOutput;
        }
        CliError::Other(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Parse { .. } | OracleError::InvalidModel(_) | OracleError::RangeExceeded(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) | Err(CliError::ClosedOutput) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out, threads } => run(&config, out, threads),
        Command::Score { kind, files, csv, json } => score(kind, &files, csv, json),
        Command::Oracle(cmd) => oracle(cmd),
        Command::Bench { config } => bench(&config),
    }
}

fn run(config: &Path, out: Option<PathBuf>, threads: Option<usize>) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let out = out.unwrap_or_else(|| config.with_extension("csv"));
    let threads = match threads {
        Some(0) => return Err(CliError::Config("thread count must be positive".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let summary = run_experiment(&cfg, &out, threads)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "wrote {} rows to {}", summary.rows.len(), summary.path.display())?;
    for (agent, iterations) in cfg.runs() {
        let label = &cfg.agents[agent].label;
        let returns: Vec<f64> = summary
            .rows
            .iter()
            .filter(|r| &r.agent_label == label && r.iterations == iterations)
            .map(|r| r.episode_return)
            .collect();
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        writeln!(stdout, "{label}@{iterations}: mean return {mean:.4} over {} episodes", returns.len())?;
    }
    Ok(())
}

fn score(kind: ScoreKind, files: &[PathBuf], csv: Option<PathBuf>, json_out: Option<PathBuf>) -> Result<(), CliError> {
    let report = score_results(files, kind)?;
    if let Some(path) = csv {
        report
            .write_csv(BufWriter::new(File::create(&path)?))
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    let text = serde_json::to_string_pretty(&report.to_json()).expect("json values serialize");
    if let Some(path) = json_out {
        std::fs::write(path, format!("{text}\n"))?;
    }
    writeln!(std::io::stdout(), "{text}")?;
    Ok(())
}

fn bench(config: &Path) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let reports = measure_runtime(&cfg)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "agent,iterations,decisions,mean_decision_ms,ratio_to_first_agent")?;
    for r in &reports {
        let base = reports
            .iter()
            .find(|b| b.iterations == r.iterations)
            .expect("r itself matches");
        let ratio = r.mean_decision_ms / base.mean_decision_ms;
        writeln!(stdout, "{},{},{},{:.6},{ratio:.4}", r.agent_label, r.iterations, r.decisions, r.mean_decision_ms)?;
    }
    Ok(())
}

/// The layered model plus, for unrolled domains, the source domain and root
/// for action labels.
fn load_model(args: &ModelArgs) -> Result<(LayeredMdp, Option<(std::sync::Arc<dyn Mdp>, EnvState)>), CliError> {
    if let Some(path) = &args.model {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let name = path.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
        let model = LayeredMdp::parse(&name, &text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return Ok((model, None));
    }
    let name = args.domain.as_deref().expect("clap requires --model or --domain");
    let params: toml::Table = toml::from_str(&args.params).map_err(|e| CliError::Config(format!("--params: {e}")))?;
    let mdp = build_domain(name, &params).map_err(|e| CliError::Config(e.to_string()))?;
    let horizon = args.horizon.unwrap_or(mdp.descriptor().horizon as usize);
    let root = mdp.initial_state();
    let model = LayeredMdp::unroll(mdp.as_ref(), &root, horizon, args.max_states)?;
    Ok((model, Some((mdp, root))))
}

fn oracle(cmd: OracleCommand) -> Result<(), CliError> {
    let value = match cmd {
        OracleCommand::ValueIteration(args) => {
            let (model, source) = load_model(&args)?;
            let values = value_iteration(&model);
            let best = values.optimal_actions(0, 0);
            let labels: Vec<String> = match &source {
                Some((mdp, root)) => best.iter().map(|&a| mdp.action_label(root, ActionIndex(a))).collect(),
                None => best.iter().map(usize::to_string).collect(),
            };
            json!({
                "horizon": model.horizon(),
                "states": model.num_states(),
                "root_value": values.value(0, 0),
                "root_q_values": (0..model.node(0, 0).actions.len()).map(|a| values.q_value(0, 0, a)).collect::<Vec<_>>(),
                "optimal_actions": best,
                "optimal_action_labels": labels,
            })
        }
        OracleCommand::FixedPoint {
            model: args,
            kind,
            eps_a,
            eps_t,
            alpha,
            blocks,
        } => {
            let (model, _) = load_model(&args)?;
            let (name, abs) = match kind {
                FixedPointKind::Asap => ("asap", exact_asap_fixed_point(&model, eps_a, eps_t, alpha)),
                FixedPointKind::Ipa => ("ipa", exact_ipa_fixed_point(&model, &value_iteration(&model))),
            };
            let per_layer: Vec<usize> = abs
                .state_class
                .iter()
                .map(|layer| {
                    let mut ids = layer.clone();
                    ids.sort_unstable();
                    ids.dedup();
                    ids.len()
                })
                .collect();
            let mut out = json!({
                "kind": name,
                "states": model.num_states(),
                "state_blocks": abs.num_state_blocks,
                "q_blocks": abs.num_q_blocks,
                "state_blocks_per_layer": per_layer,
            });
            if blocks {
                let listed: Vec<Vec<String>> = abs
                    .state_partition()
                    .blocks
                    .iter()
                    .filter(|b| b.len() > 1)
                    .map(|b| b.iter().map(|&(d, i, _)| model.node(d, i).label.clone()).collect())
                    .collect();
                out["blocks"] = json!(listed);
            }
            out
        }
        OracleCommand::PAbs { n, l, m, trials, seed } => {
            let exact = p_abs_exact(n, l, m)?;
            let (closed, bound) = p_abs_closed_form(n, l, m)?;
            let enumerated = p_abs_enumerate(n, l, m, 1_000_000)?;
            let mut out = json!({
                "n": n,
                "l": l,
                "m": m,
                "exact": exact.to_string(),
                "value": closed,
                "bound": bound,
                "enumerated": enumerated.map(|e| e.to_string()),
            });
            if trials > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (estimate, se) = p_abs_monte_carlo(n, l, m, trials, &mut rng)?;
                out["monte_carlo"] = json!({ "trials": trials, "estimate": estimate, "std_error": se });
            }
            out
        }
    };
    writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&value).expect("json values serialize"))?;
    Ok(())
}
