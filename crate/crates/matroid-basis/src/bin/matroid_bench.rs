//! Command-line experiment runner for the matroid-basis library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use matroid_basis::applications::random_feasible_sequence;
use matroid_basis::basis::{greedy_basis, run_algorithm, verify_basis, Algo};
use matroid_basis::bench::{
    load_matroid, read_records_jsonl, run_experiment, summarize, summary_csv, summary_plot_json,
    ExperimentSpec,
};
use matroid_basis::decomposition::{remove_small_circuits, repeated_global_peeling};
use matroid_basis::error::Result;
use matroid_basis::oracle::MatroidView;
use matroid_basis::scheduler::RoundLedger;
use matroid_basis::AlgorithmConfig;

#[derive(Parser)]
#[command(name = "matroid-bench", about = "Matroid basis algorithms under round accounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Matroid source: `gen:<family>:<params>`, inline JSON, or a spec file.
    #[arg(long)]
    matroid: String,
    /// Ground size for generator sources.
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Seed for generator instances.
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
    /// Run seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON config file overriding algorithm constants.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit peel traces.
    #[arg(long, default_value_t = false)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one basis-finding algorithm and print the result as JSON.
    FindBasis {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "main37")]
        algo: String,
    },
    /// Preprocess small circuits and run the iterative peeling, printing the
    /// peel trace as JSON lines.
    Decompose {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Generate a random feasible sequence and print it as JSON.
    Sequence {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "kuw")]
        algo: String,
    },
    /// Run an experiment grid from a spec file (or flags) and persist records.
    Experiment {
        /// Experiment spec JSON file; flags below override its fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        matroid: Option<String>,
        /// Comma-separated ground sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Comma-separated algorithms (greedy,kuw,kps49,main37).
        #[arg(long, value_delimiter = ',')]
        algo: Vec<String>,
        /// Comma-separated run seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 0)]
        instance_seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = false)]
        trace: bool,
    },
    /// Summarize persisted records: rounds vs n per algorithm with a log-log
    /// slope fit.
    Summarize {
        /// records.jsonl produced by `experiment`.
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<AlgorithmConfig> {
    let mut cfg = match path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => AlgorithmConfig::default(),
    };
    if let Ok(cap) = std::env::var("MATROID_BUDGET_CAP") {
        cfg.budget_cap = cap
            .parse()
            .map_err(|_| matroid_basis::Error::Parse(format!("bad MATROID_BUDGET_CAP '{cap}'")))?;
    }
    Ok(cfg)
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::FindBasis { common, algo } => {
            let cfg = load_config(&common.config)?;
            let algo = Algo::parse(&algo)?;
            let (family, m) = load_matroid(&common.matroid, common.n, common.instance_seed)?;
            let view = MatroidView::of(m);
            let run = run_algorithm(algo, &view, &cfg, common.seed)?;
            let valid =
                verify_basis(&view, &run.basis) && run.basis.len() == greedy_basis(&view).len();
            if let (Some(out), true) = (&common.out, common.trace) {
                std::fs::create_dir_all(out)?;
                let mut text = String::new();
                for p in &run.peel_trace {
                    text.push_str(&serde_json::to_string(p)?);
                    text.push('\n');
                }
                std::fs::write(out.join("trace.jsonl"), text)?;
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "family": family,
                    "algo": algo.name(),
                    "basis": run.basis,
                    "basisSize": run.basis.len(),
                    "ledger": run.ledger,
                    "stopReasons": run.stop_reasons,
                    "valid": valid,
                }))?
            );
            if !valid {
                return Err(matroid_basis::Error::InvalidView("basis failed validation".into()));
            }
            Ok(())
        }
        Command::Decompose { common } => {
            let cfg = load_config(&common.config)?;
            let (family, m) = load_matroid(&common.matroid, common.n, common.instance_seed)?;
            let view = MatroidView::of(m);
            let mut ledger = RoundLedger::with_budget_cap(common.seed, cfg.budget_cap);
            let pre = remove_small_circuits(&view, cfg.c0, &mut ledger)?;
            let outcome = repeated_global_peeling(&pre, &cfg, &mut ledger);
            for r in &outcome.records {
                println!("{}", serde_json::to_string(r)?);
            }
            if let Some(out) = &common.out {
                std::fs::create_dir_all(out)?;
                let mut text = String::new();
                for r in &outcome.records {
                    text.push_str(&serde_json::to_string(r)?);
                    text.push('\n');
                }
                std::fs::write(out.join("peels.jsonl"), text)?;
            }
            eprintln!(
                "{}",
                serde_json::to_string(&serde_json::json!({
                    "family": family,
                    "peels": outcome.records.len(),
                    "aborted": outcome.aborted.map(|e| e.to_string()),
                    "ledger": ledger,
                }))?
            );
            Ok(())
        }
        Command::Sequence { common, algo } => {
            let cfg = load_config(&common.config)?;
            let algo = Algo::parse(&algo)?;
            let (family, m) = load_matroid(&common.matroid, common.n, common.instance_seed)?;
            let view = MatroidView::of(m);
            let mut ledger = RoundLedger::with_budget_cap(common.seed, cfg.budget_cap);
            let seq = random_feasible_sequence(&view, &cfg, algo, &mut ledger, "sequence")?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "family": family,
                    "sequence": seq.elements,
                    "length": seq.elements.len(),
                    "roundsParallel": seq.rounds_parallel,
                    "roundsSequential": seq.rounds_sequential,
                    "ledger": ledger,
                }))?
            );
            Ok(())
        }
        Command::Experiment {
            spec,
            matroid,
            sizes,
            algo,
            seeds,
            instance_seed,
            config,
            out,
            trace,
        } => {
            let mut es = match spec {
                Some(p) => ExperimentSpec::from_json(&std::fs::read_to_string(p)?)?,
                None => ExperimentSpec::default(),
            };
            if let Some(m) = matroid {
                es.matroid = m;
            }
            if !sizes.is_empty() {
                es.sizes = sizes;
            }
            if !algo.is_empty() {
                es.algos = algo.iter().map(|a| Algo::parse(a)).collect::<Result<_>>()?;
            }
            if !seeds.is_empty() {
                es.seeds = seeds;
            }
            if instance_seed != 0 {
                es.instance_seed = instance_seed;
            }
            if let Some(c) = &config {
                es.config = serde_json::from_str(&std::fs::read_to_string(c)?)?;
            }
            if let Ok(cap) = std::env::var("MATROID_BUDGET_CAP") {
                es.config.budget_cap = cap.parse().map_err(|_| {
                    matroid_basis::Error::Parse(format!("bad MATROID_BUDGET_CAP '{cap}'"))
                })?;
            }
            if out.is_some() {
                es.out = out;
            }
            es.trace |= trace;
            let records = run_experiment(&es)?;
            if es.out.is_none() {
                println!("{}", matroid_basis::bench::CSV_HEADER);
                for r in &records {
                    println!("{}", r.csv_line());
                }
            }
            eprintln!("{} runs, all valid", records.len());
            Ok(())
        }
        Command::Summarize { records, out } => {
            let recs = read_records_jsonl(&records)?;
            let rows = summarize(&recs);
            let csv = summary_csv(&rows);
            print!("{csv}");
            if let Some(out) = out {
                std::fs::create_dir_all(&out)?;
                std::fs::write(out.join("summary.csv"), &csv)?;
                std::fs::write(
                    out.join("plot.json"),
                    serde_json::to_string_pretty(&summary_plot_json(&rows))?,
                )?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
