use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use care2vec::commands::{
    cmd_gradcheck, cmd_reproduce, cmd_run, cmd_validate, gradcheck_options, MethodName, ReproduceConfig, RunConfig,
    TrainOverrides, DEFAULT_OUT_DIR, OUT_DIR_ENV,
};
use care2vec::dataset::LabelScheme;
use care2vec::exec::Execution;
use care2vec::pipeline::{LeakageMode, Table};
use care2vec::tree::SplitCriterion;

#[derive(Parser)]
#[command(name = "care2vec", version, about = "Care2Vec, decision tree and ANN baselines on the SCADI self-care data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the CSV schema and print the class histogram.
    Validate {
        #[arg(long, env = "SCADI_CSV", default_value = "data/SCADI.csv")]
        data: PathBuf,
    },
    /// Cross-validate one method configuration.
    Run(RunArgs),
    /// Run the published experiment grids and write one file per table.
    Reproduce(ReproduceArgs),
    /// Finite-difference gradient checks for every network in the repo.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sampled weight entries per layer (0 checks every entry).
        #[arg(long, default_value_t = 24)]
        max_entries: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Tree,
    Ann,
    Care2vec,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Multi,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum LeakageArg {
    PerFold,
    FullData,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Gini,
    Entropy,
}

#[derive(Args)]
struct Common {
    #[arg(long, env = "SCADI_CSV", default_value = "data/SCADI.csv")]
    data: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, value_enum, default_value = "per-fold")]
    leakage: LeakageArg,
    #[arg(long, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
    out: PathBuf,
    /// Concurrent jobs; 1 runs sequentially, 0 uses every core.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Classifier epochs.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    ae_epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

impl Common {
    fn overrides(&self) -> TrainOverrides {
        TrainOverrides {
            epochs: self.epochs,
            ae_epochs: self.ae_epochs,
            learning_rate: self.lr,
            batch_size: self.batch_size,
        }
    }

    fn leakage(&self) -> LeakageMode {
        match self.leakage {
            LeakageArg::PerFold => LeakageMode::PerFold,
            LeakageArg::FullData => LeakageMode::FullData,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, value_enum, default_value = "multi")]
    task: TaskArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "gini")]
    criterion: CriterionArg,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Allow dims, nodes and layers outside the published grid.
    #[arg(long)]
    extended: bool,
}

#[derive(Args)]
struct ReproduceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Subset of tables, e.g. `1,3`.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    tables: Vec<String>,
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Validate { data } => {
            println!("{}", cmd_validate(&data).map_err(|e| e.to_string())?);
        }
        Command::Run(a) => {
            let cfg = RunConfig {
                data: a.common.data.clone(),
                method: match a.method {
                    MethodArg::Tree => MethodName::Tree,
                    MethodArg::Ann => MethodName::Ann,
                    MethodArg::Care2vec => MethodName::Care2Vec,
                },
                dim: a.dim,
                nodes: a.nodes,
                layers: a.layers,
                task: match a.task {
                    TaskArg::Multi => LabelScheme::MultiClass7,
                    TaskArg::Binary => LabelScheme::Binary,
                },
                k: a.common.k,
                seed: a.seed,
                leakage: a.common.leakage(),
                criterion: match a.criterion {
                    CriterionArg::Gini => SplitCriterion::Gini,
                    CriterionArg::Entropy => SplitCriterion::CrossEntropy,
                },
                max_depth: a.max_depth,
                extended: a.extended,
                out: a.common.out.clone(),
                jobs: a.common.jobs,
                train: a.common.overrides(),
            };
            let out = cmd_run(&cfg).map_err(|e| e.to_string())?;
            println!("{}", out.summary);
            for note in &out.report.annotations {
                println!("note: {note}");
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Reproduce(a) => {
            let tables = a
                .tables
                .iter()
                .map(|t| Table::parse(t).ok_or_else(|| format!("unknown table '{t}' (expected 1-4)")))
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = ReproduceConfig {
                data: a.common.data.clone(),
                seeds: a.seeds.clone(),
                out: a.common.out.clone(),
                tables,
                k: a.common.k,
                leakage: a.common.leakage(),
                jobs: a.common.jobs,
                train: a.common.overrides(),
            };
            let out = cmd_reproduce(&cfg).map_err(|e| e.to_string())?;
            for t in Table::ALL.into_iter().filter(|t| cfg.tables.contains(t)) {
                println!("{}", out.grid.table_text(t));
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            let failures = out.grid.failures();
            if out.grid.all_failed() {
                return Err(format!("every grid cell failed ({} failures)", failures.len()));
            }
            if !failures.is_empty() {
                eprintln!("{} cell runs failed; see the table files", failures.len());
            }
        }
        Command::Gradcheck { seed, max_entries, jobs } => {
            let mut opts = gradcheck_options(seed);
            opts.max_entries_per_layer = (max_entries > 0).then_some(max_entries);
            let results = cmd_gradcheck(&opts, Execution::from_jobs(jobs)).map_err(|e| e.to_string())?;
            let mut failed = 0;
            for (t, r) in &results {
                println!(
                    "{} {:<20} {:<40} {:<28} checked={:<5} max_rel_err={:.3e}",
                    if r.passed { "PASS" } else { "FAIL" },
                    t.name,
                    r.architecture,
                    r.loss,
                    r.n_checked,
                    r.max_relative_error
                );
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                return Err(format!("{failed} of {} gradient checks failed", results.len()));
            }
        }
    }
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
