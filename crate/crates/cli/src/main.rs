use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rumor_core::harness::{
    ablate, early_eval, evaluate, make_synthetic, train_with, write_epoch_log_csv, write_metrics_csv,
    write_slices_csv, ModelGradCheck, StopReason, TrainConfig,
};
use rumor_core::model::Mode;
use rumor_core::optim::AttenuationSchedule;
use rumor_core::pheme::{load_canonical, parse_pheme_dir, save_canonical, split, stats, Dataset};
use rumor_core::{Checkpoint32, Error};

#[derive(Parser, Debug)]
#[command(name = "rumor", version, about = "Hierarchical multiloss rumor detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a PHEME thread directory into canonical JSONL.
    Ingest {
        #[arg(long)]
        pheme_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        marker_rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a corpus, train one variant and save the best checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "MHA")]
        mode: Mode,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        hyper: Hyper,
    },
    /// Score a checkpoint on a corpus.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every variant per seed and compare them.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        /// Seed of the train/valid/test split.
        #[arg(long, default_value_t = 7)]
        split_seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        hyper: Hyper,
    },
    /// Accuracy per early-detection slice.
    EarlyEval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the full model in double precision.
    Gradcheck {
        #[arg(long, default_value_t = 4)]
        hidden: usize,
        #[arg(long, default_value_t = 4)]
        embed: usize,
        #[arg(long, default_value_t = 10)]
        vocab: usize,
        #[arg(long, default_value = "MHA")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        /// Exit nonzero when the maximum relative error exceeds this.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
}

#[derive(Args, Debug, Clone)]
struct Hyper {
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    #[arg(long, default_value_t = 128)]
    embed: usize,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 50)]
    max_epochs: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 15)]
    beta_zero_epoch: usize,
}

impl Hyper {
    fn config(&self, mode: Mode, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig {
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed,
            schedule: AttenuationSchedule::Linear {
                zero_epoch: self.beta_zero_epoch,
            },
            ..TrainConfig::default()
        };
        cfg.adam.lr = self.lr;
        cfg.model.mode = mode;
        cfg.model.hidden_dim = self.hidden;
        cfg.model.embed_dim = self.embed;
        cfg.model.dropout_rate = self.dropout;
        cfg
    }
}

fn load(path: &Path) -> anyhow::Result<Dataset> {
    load_canonical(path).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest { pheme_dir, out } => {
            let report = parse_pheme_dir(&pheme_dir)?;
            for r in report.rejects.iter().chain(&report.skipped_files) {
                log::warn!("skipped {}: {}", r.path.display(), r.reason);
            }
            let dataset = Dataset::new(report.events);
            save_canonical(&dataset, &out)?;
            let mut s = stats(&dataset)?;
            s.users = report.users;
            println!("{s}");
            println!("{}", s.reference_comparison());
            println!(
                "wrote {} events to {} ({} event dirs rejected, {} files skipped)",
                dataset.len(),
                out.display(),
                report.rejects.len(),
                report.skipped_files.len()
            );
        }
        Command::Synth {
            n,
            seed,
            marker_rate,
            out,
        } => {
            let dataset = make_synthetic(n, marker_rate, seed)?;
            save_canonical(&dataset, &out)?;
            println!("wrote {} events to {}", dataset.len(), out.display());
        }
        Command::Train {
            data,
            mode,
            seed,
            out,
            hyper,
        } => {
            let dataset = load(&data)?;
            let splits = split(&dataset.events, seed)?;
            let cfg = hyper.config(mode, seed);
            let outcome = train_with::<f32>(&splits.train, &splits.valid, &cfg, |log| {
                println!(
                    "epoch {:>3}  loss_event {:.4}  beta {:.3}  val_acc {:.4}  val_f1 {:.4}  {:.1}s",
                    log.epoch, log.loss_event, log.beta, log.val.accuracy, log.val.f1, log.seconds
                );
            })?;
            outcome.checkpoint.save(&out).with_context(|| format!("saving checkpoint to {}", out.display()))?;
            write_epoch_log_csv(&outcome.logs, create(&out.join("epochs.csv"))?)?;
            fs::write(out.join("train_config.json"), serde_json::to_vec_pretty(&cfg)?)?;
            fs::create_dir_all(out.join("splits"))?;
            for (name, events) in [
                ("train", &splits.train),
                ("valid", &splits.valid),
                ("test", &splits.test),
            ] {
                save_canonical(&Dataset::new(events.clone()), &out.join("splits").join(format!("{name}.jsonl")))?;
            }
            println!("stopped: {:?}; checkpoint at {}", outcome.stop, out.display());
            if let StopReason::Diverged { epoch } = outcome.stop {
                return Err(Error::Diverged { epoch }.into());
            }
        }
        Command::Eval { ckpt, data, out } => {
            let ckpt = Checkpoint32::load(&ckpt).with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
            let m = evaluate(&ckpt, &load(&data)?.events)?;
            write_metrics_csv(&m, create(&out)?)?;
            println!(
                "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  (n = {})",
                m.accuracy, m.precision, m.recall, m.f1, m.n
            );
        }
        Command::Ablate {
            data,
            seeds,
            split_seed,
            out,
            hyper,
        } => {
            let dataset = load(&data)?;
            let splits = split(&dataset.events, split_seed)?;
            let report = ablate::<f32>(&splits, &seeds, &Mode::ALL, &hyper.config(Mode::MHA, 0))?;
            report.write(&out)?;
            print!("{}", report.summary());
        }
        Command::EarlyEval { ckpt, data, out } => {
            let ckpt = Checkpoint32::load(&ckpt).with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
            let results = early_eval(&ckpt, &load(&data)?.events)?;
            write_slices_csv(&results, create(&out)?)?;
            for r in &results {
                let acc = r.accuracy.map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
                println!("{:<8} {:>8} n={:<5} accuracy {acc}", r.slice, r.posts, r.n);
            }
        }
        Command::Gradcheck {
            hidden,
            embed,
            vocab,
            mode,
            seed,
            step,
            tol,
        } => {
            let check = ModelGradCheck {
                mode,
                hidden,
                embed,
                vocab,
                step,
                seed,
                ..ModelGradCheck::default()
            };
            let r = check.run()?;
            println!("max_rel_error {:.3e}", r.max_rel_error);
            println!("max_abs_error {:.3e}", r.max_abs_error);
            println!(
                "worst {}[{}] analytic {:.6e} numeric {:.6e} over {} entries",
                r.worst_param.as_deref().unwrap_or("-"),
                r.worst_index,
                r.analytic,
                r.numeric,
                r.checked
            );
            if r.max_rel_error > tol {
                bail!(GradcheckFailed(r.max_rel_error, tol));
            }
        }
    }
    Ok(())
}

#[derive(Debug)]
struct GradcheckFailed(f64, f64);

impl std::fmt::Display for GradcheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "max relative error {:.3e} exceeds {:.1e}", self.0, self.1)
    }
}

impl std::error::Error for GradcheckFailed {}

/// Stable tag for the one-line error report.
fn kind(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<Error>() {
        e.kind()
    } else if err.downcast_ref::<GradcheckFailed>().is_some() {
        "gradcheck_failed"
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        "io"
    } else {
        "other"
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let line = serde_json::json!({ "error": kind(&err), "message": format!("{err:#}") });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
