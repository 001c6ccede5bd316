use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use raca::data_io::{accuracy_of, save_weights, train_with, MnistFiles, TrainOptions};
use raca::experiments::{self, write_csv, ExperimentConfig};
use raca::neurons::argmax;
use raca::{forward_reference, RacaError, Result};

#[derive(Parser)]
#[command(name = "raca", version, about = "ADC-free ReRAM compute-in-memory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trial count: comparator trials per point, WTA decisions, the largest
    /// accuracy grid point, or cost-report trials, depending on the command.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads, 0 = auto.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Train the float reference network and save its weight archive.
    Train,
    /// Firing probability versus logit across one physical knob.
    SigmoidSweep,
    /// WTA decision traces and win distribution.
    WtaRaster,
    /// Majority-vote accuracy versus trial count.
    Accuracy,
    /// Exact event tallies of an inference run.
    CostReport,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::SigmoidSweep => "sigmoid-sweep",
            Command::WtaRaster => "wta-raster",
            Command::Accuracy => "accuracy",
            Command::CostReport => "cost-report",
        }
    }
}

fn resolve(cmd: Command, c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(t) = c.threads {
        cfg.threads = t;
    }
    if let Some(n) = c.trials {
        if n == 0 {
            return Err(RacaError::Config("--trials must be positive".into()));
        }
        match cmd {
            Command::SigmoidSweep => cfg.sigmoid_sweep.trials = n,
            Command::WtaRaster => cfg.wta_raster.decisions = n,
            Command::Accuracy => {
                cfg.accuracy.trial_grid = (0..usize::BITS)
                    .map(|k| 1usize << k)
                    .take_while(|&g| g < n)
                    .chain([n])
                    .collect()
            }
            Command::CostReport => cfg.cost.trials = n,
            Command::Train => cfg.train.epochs = n,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_file(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

fn train(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let files = MnistFiles::in_dir(&cfg.data.mnist_dir);
    let mut train = files.load_train()?;
    if cfg.data.train_limit > 0 {
        train = train.head(cfg.data.train_limit);
    }
    let test = files.load_test()?;
    let opts = TrainOptions {
        epochs: cfg.train.epochs,
        learning_rate: cfg.train.learning_rate,
        batch_size: cfg.train.batch_size,
        w_limit: cfg.network.w_limit,
        seed: cfg.seed,
    };
    let report = train_with(&cfg.network.dims, &train, &opts)?;
    let weights = cfg.weights_path();
    if let Some(dir) = weights.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_weights(&report.weights, &weights)?;
    let accuracy = accuracy_of(&test, |x| forward_reference(&report.weights, x).ok().and_then(|p| argmax(&p)));
    #[derive(serde::Serialize)]
    struct Row {
        epoch: usize,
        loss: f64,
        test_accuracy: Option<f64>,
    }
    let last = report.epoch_losses.len();
    let rows: Vec<Row> = report
        .epoch_losses
        .iter()
        .enumerate()
        .map(|(e, &loss)| Row {
            epoch: e + 1,
            loss,
            test_accuracy: (e + 1 == last).then_some(accuracy),
        })
        .collect();
    let log = out_file(cfg, "train_log.csv");
    write_csv(&log, "train-log", &rows)?;
    eprintln!("float test accuracy {:.4} on {} images", accuracy, test.len());
    Ok(vec![weights, log])
}

fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    match cmd {
        Command::Train => train(cfg),
        Command::SigmoidSweep => {
            let s = experiments::run_sigmoid_sweep(cfg)?;
            let (a, b) = (out_file(cfg, "sigmoid_sweep.csv"), out_file(cfg, "sigmoid_sweep_settings.csv"));
            write_csv(&a, "sigmoid-sweep", &s.rows)?;
            write_csv(&b, "sigmoid-sweep-settings", &s.settings)?;
            Ok(vec![a, b])
        }
        Command::WtaRaster => {
            let r = experiments::run_wta_raster(cfg)?;
            let (a, b) = (out_file(cfg, "wta_raster.csv"), out_file(cfg, "wta_distribution.csv"));
            write_csv(&a, "wta-raster", &r.trace)?;
            write_csv(&b, "wta-distribution", &r.distribution)?;
            Ok(vec![a, b])
        }
        Command::Accuracy => {
            let c = experiments::run_accuracy_vs_trials(cfg)?;
            let a = out_file(cfg, "accuracy_vs_trials.csv");
            write_csv(&a, "accuracy-vs-trials", &c.rows)?;
            eprintln!("float baseline {:.4} on {} images", c.float_baseline, c.n_inputs);
            Ok(vec![a])
        }
        Command::CostReport => {
            let r = experiments::run_cost_report(cfg)?;
            let a = out_file(cfg, "cost_report.csv");
            write_csv(&a, "cost-report", &r.rows())?;
            Ok(vec![a])
        }
    }
}

fn write_resolved(cmd: Command, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let p = out_file(cfg, &format!("{}.resolved.toml", cmd.name()));
    std::fs::write(&p, cfg.to_toml())?;
    Ok(p)
}

fn main_inner(cli: &Cli) -> Result<()> {
    let cmd = cli.command;
    let cfg = resolve(cmd, &cli.common)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let resolved = write_resolved(cmd, &cfg)?;
    let files = experiments::with_threads(cfg.threads, || run(cmd, &cfg))??;
    for f in files.iter().map(PathBuf::as_path).chain([Path::new(&resolved)]) {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
