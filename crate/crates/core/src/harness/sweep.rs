use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use super::config::{Cell, ExperimentConfig};
use super::trial::{run_trial, ExperimentRecord, RESULTS_HEADER};
use crate::error::Result;

/// Records of a finished sweep in `(cell, trial)` order.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub records: Vec<ExperimentRecord>,
}

impl SweepReport {
    pub fn failed(&self) -> impl Iterator<Item = &ExperimentRecord> {
        self.records.iter().filter(|r| !r.status.is_ok())
    }

    /// One-paragraph account of failed trials.
    pub fn footer(&self) -> String {
        let failed: Vec<&ExperimentRecord> = self.failed().collect();
        let mut out = format!("{} trials, {} failed", self.records.len(), failed.len());
        for r in failed {
            if let super::trial::TrialStatus::Failed(msg) = &r.status {
                out.push_str(&format!("\n  n={} coupling={} force={} trial={}: {msg}", r.cell.n, r.cell.coupling, r.cell.force, r.trial));
            }
        }
        out
    }
}

fn worker_count(requested: usize, jobs: usize) -> usize {
    let auto = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let t = if requested == 0 { auto } else { requested };
    t.clamp(1, jobs.max(1))
}

/// Runs every `(cell, trial)` of the config on `threads` workers (0 = all
/// cores). When `sink` is given, the header and each record are written and
/// flushed as soon as all earlier records are in, so the file always holds
/// an in-order prefix of the final result.
pub fn run_sweep(cfg: &ExperimentConfig, threads: usize, mut sink: Option<&mut dyn Write>) -> Result<SweepReport> {
    cfg.validate()?;
    let jobs: Vec<(Cell, usize)> = cfg
        .cells()
        .into_iter()
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    if let Some(w) = sink.as_deref_mut() {
        writeln!(w, "{RESULTS_HEADER}")?;
        w.flush()?;
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, ExperimentRecord)>();
    let workers = worker_count(threads, jobs.len());

    let mut records = Vec::with_capacity(jobs.len());
    let mut write_err = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next) = (&jobs, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((cell, trial)) = jobs.get(i) else { break };
                if tx.send((i, run_trial(cfg, cell, *trial))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        for (i, rec) in rx {
            pending.insert(i, rec);
            while let Some(rec) = pending.remove(&records.len()) {
                if let (Some(w), None) = (sink.as_deref_mut(), &write_err) {
                    if let Err(e) = writeln!(w, "{}", rec.to_csv_row()).and_then(|_| w.flush()) {
                        write_err = Some(e);
                    }
                }
                records.push(rec);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e.into());
    }
    Ok(SweepReport { records })
}

/// The whole results file as a string.
pub fn results_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}
