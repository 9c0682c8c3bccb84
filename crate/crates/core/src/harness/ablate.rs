//! Runs the model variants on identical data and seeds, and checks the
//! expected orderings between them.

use std::fmt;
use std::fs::{self, File};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::report::{epoch_fields, metric_fields, EPOCH_LOG_HEADER, METRICS_HEADER};
use crate::harness::{evaluate, train, EpochLog, Metrics, StopReason, TrainConfig};
use crate::model::Mode;
use crate::pheme::Splits;
use crate::scalar::Scalar;

/// Epoch at which training losses are compared for the learning-speed check.
pub const LOSS_COMPARE_EPOCH: usize = 5;

#[derive(Clone, Debug)]
pub struct AblationRun {
    pub mode: Mode,
    pub seed: u64,
    pub initial_loss: f64,
    pub logs: Vec<EpochLog>,
    pub test: Metrics,
    pub stop: StopReason,
}

impl AblationRun {
    /// Mean training event loss at `epoch`, or at the last completed epoch
    /// if training stopped earlier.
    pub fn train_loss_at(&self, epoch: usize) -> Option<f64> {
        self.logs
            .iter()
            .find(|l| l.epoch == epoch)
            .or(self.logs.last())
            .map(|l| l.loss_event)
    }
}

/// Seeds on which an ordering held.
#[derive(Clone, Debug, PartialEq)]
pub struct TrendCheck {
    pub name: &'static str,
    pub wins: usize,
    pub total: usize,
}

impl TrendCheck {
    /// Holds on a strict majority of the compared seeds.
    pub fn holds(&self) -> bool {
        self.total > 0 && 2 * self.wins > self.total
    }
}

impl fmt::Display for TrendCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.holds() { "holds" } else { "does not hold" };
        write!(f, "{}: {}/{} seeds, {verdict}", self.name, self.wins, self.total)
    }
}

#[derive(Clone, Debug, Default)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub runs: Vec<AblationRun>,
}

impl AblationReport {
    pub fn run(&self, mode: Mode, seed: u64) -> Option<&AblationRun> {
        self.runs.iter().find(|r| r.mode == mode && r.seed == seed)
    }

    fn count(&self, name: &'static str, pred: impl Fn(u64) -> Option<bool>) -> TrendCheck {
        let outcomes: Vec<bool> = self.seeds.iter().filter_map(|&s| pred(s)).collect();
        TrendCheck {
            name,
            wins: outcomes.iter().filter(|&&w| w).count(),
            total: outcomes.len(),
        }
    }

    /// Multiloss variants reach a lower training event loss than `H` at
    /// [`LOSS_COMPARE_EPOCH`].
    pub fn faster_learning(&self) -> TrendCheck {
        self.count("MH and MHA train loss below H at epoch 5", |s| {
            let h = self.run(Mode::H, s)?.train_loss_at(LOSS_COMPARE_EPOCH)?;
            let mh = self.run(Mode::MH, s)?.train_loss_at(LOSS_COMPARE_EPOCH)?;
            let mha = self.run(Mode::MHA, s)?.train_loss_at(LOSS_COMPARE_EPOCH)?;
            Some(mh < h && mha < h)
        })
    }

    /// Event-unit accuracy of `H` is at least the post-unit accuracy.
    pub fn event_over_post(&self) -> TrendCheck {
        self.count("event-unit accuracy >= post-unit accuracy", |s| {
            Some(self.run(Mode::H, s)?.test.accuracy >= self.run(Mode::PostOnly, s)?.test.accuracy)
        })
    }

    /// Hierarchical accuracy is at least the flat-sequence accuracy.
    pub fn hierarchy_over_flat(&self) -> TrendCheck {
        self.count("hierarchical accuracy >= flat accuracy", |s| {
            Some(self.run(Mode::H, s)?.test.accuracy >= self.run(Mode::Flat, s)?.test.accuracy)
        })
    }

    pub fn trends(&self) -> Vec<TrendCheck> {
        vec![self.faster_learning(), self.event_over_post(), self.hierarchy_over_flat()]
            .into_iter()
            .filter(|t| t.total > 0)
            .collect()
    }

    /// Writes `loss_curves.csv`, `final_metrics.csv` and `summary.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut curves = csv::Writer::from_writer(File::create(dir.join("loss_curves.csv"))?);
        curves.write_record(["mode", "seed"].into_iter().chain(EPOCH_LOG_HEADER))?;
        for r in &self.runs {
            for log in &r.logs {
                let mut row = vec![r.mode.to_string(), r.seed.to_string()];
                row.extend(epoch_fields(log));
                curves.write_record(row)?;
            }
        }
        curves.flush()?;

        let mut finals = csv::Writer::from_writer(File::create(dir.join("final_metrics.csv"))?);
        finals.write_record(
            ["mode", "seed", "epochs", "initial_loss"]
                .into_iter()
                .chain(METRICS_HEADER),
        )?;
        for r in &self.runs {
            let mut row = vec![
                r.mode.to_string(),
                r.seed.to_string(),
                r.logs.len().to_string(),
                format!("{:.6}", r.initial_loss),
            ];
            row.extend(metric_fields(&r.test));
            finals.write_record(row)?;
        }
        finals.flush()?;

        fs::write(dir.join("summary.txt"), self.summary())?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{:<10} {:>5} {:>7} {:>9} {:>9} {:>9} {:>9}\n",
            "mode", "seed", "epochs", "accuracy", "precision", "recall", "f1"
        );
        for r in &self.runs {
            s += &format!(
                "{:<10} {:>5} {:>7} {:>9.4} {:>9.4} {:>9.4} {:>9.4}\n",
                r.mode.as_str(),
                r.seed,
                r.logs.len(),
                r.test.accuracy,
                r.test.precision,
                r.test.recall,
                r.test.f1
            );
        }
        s.push('\n');
        for t in self.trends() {
            s += &format!("{t}\n");
        }
        s
    }
}

/// Trains and tests each of `modes` once per seed. `base.model.mode` and
/// `base.seed` are overridden per run.
pub fn ablate<T: Scalar>(splits: &Splits, seeds: &[u64], modes: &[Mode], base: &TrainConfig) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let mut report = AblationReport {
        seeds: seeds.to_vec(),
        runs: Vec::new(),
    };
    for &seed in seeds {
        for &mode in modes {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.model.mode = mode;
            let out = train::<T>(&splits.train, &splits.valid, &cfg)?;
            let test = evaluate(&out.checkpoint, &splits.test)?;
            log::info!("ablation {mode} seed {seed}: test accuracy {:.4}", test.accuracy);
            report.runs.push(AblationRun {
                mode,
                seed,
                initial_loss: out.initial_loss,
                logs: out.logs,
                test,
                stop: out.stop,
            });
        }
    }
    Ok(report)
}
