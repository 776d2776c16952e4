use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lamina::harness::{
    emit_metrics, load_mnist_dir, run_experiment, ExperimentConfig, ExperimentName, MetricsFormat,
};
use lamina::layers::gradcheck::standard_battery;

#[derive(Parser)]
#[command(
    name = "lamina",
    about = "Deep models as stacks of semi-autonomous learning machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one experiment on MNIST and write its metrics.
    Run {
        /// Experiment name; `lamina list` shows the options.
        #[arg(long)]
        experiment: String,
        /// Directory holding the four IDX files.
        #[arg(long, env = "LAMINA_DATA_DIR")]
        data_dir: PathBuf,
        /// Base TOML config; defaults to the bundled one for the experiment.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        train_subset: Option<usize>,
        #[arg(long)]
        test_subset: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Metrics output path.
        #[arg(long)]
        out: PathBuf,
        /// json or csv.
        #[arg(long, default_value = "json")]
        format: String,
        /// Record per-step error-reduction series.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Verify every layer's backward pass against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List the experiments and what they build.
    List,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> lamina::Result<ExitCode> {
    match cli.command {
        Command::Run {
            experiment,
            data_dir,
            config,
            seed,
            train_subset,
            test_subset,
            epochs,
            out,
            format,
            diagnostics,
        } => {
            let name = ExperimentName::parse(&experiment)?;
            let mut cfg = match config {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(&path).map_err(|e| lamina::Error::Io {
                            path: path.display().to_string(),
                            source: e,
                        })?;
                    ExperimentConfig::from_toml_str(&text)?
                }
                None => ExperimentConfig::default_for(name),
            };
            if cfg.name != name {
                return Err(lamina::Error::Config(format!(
                    "config file is for '{}' but '--experiment {}' was given",
                    cfg.name.as_str(),
                    name.as_str()
                )));
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(n) = train_subset {
                cfg.train_subset = n;
            }
            if let Some(n) = test_subset {
                cfg.test_subset = n;
            }
            if let Some(n) = epochs {
                cfg.epochs = n;
            }
            if diagnostics {
                cfg.diagnostics = true;
            }
            let format = MetricsFormat::parse(&format)?;

            eprintln!("loading MNIST from {} ...", data_dir.display());
            let (train, test) = load_mnist_dir(&data_dir)?;
            eprintln!(
                "running {} (seed {}, {} train / {} test, {} epochs) ...",
                cfg.name.as_str(),
                cfg.seed,
                cfg.train_subset.min(train.len()),
                cfg.test_subset.min(test.len()),
                cfg.epochs
            );
            let record = run_experiment(&cfg, &train, &test)?;
            for e in &record.epochs {
                eprintln!(
                    "  epoch {:>2}: train {:.4}  test {:.4}  loss {:.4}",
                    e.epoch, e.train_accuracy, e.test_accuracy, e.mean_global_loss
                );
            }
            eprintln!(
                "finished in {:.1}s; final test accuracy {:.4}",
                record.wall_clock_secs, record.final_test_accuracy
            );
            emit_metrics(&record, format, &out)?;
            eprintln!("metrics written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck { seed } => {
            let reports = standard_battery(seed)?;
            let mut all_pass = true;
            for report in &reports {
                println!("{report}");
                all_pass &= report.pass;
            }
            println!(
                "{}: {} checks",
                if all_pass { "PASS" } else { "FAIL" },
                reports.len()
            );
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::List => {
            for name in ExperimentName::all() {
                let cfg = ExperimentConfig::default_for(name);
                println!("{:<18} {}", name.as_str(), name.summary());
                println!(
                    "{:<18}   defaults: epochs {}, batch {}, lr {}",
                    "", cfg.epochs, cfg.batch_size, cfg.lr
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
