use std::fs::File;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Constants, ExperimentConfig};
use super::regret::{RegretKind, RegretOracle};
use crate::batch::{
    run_delayed_with, run_undelayed_with, EpisodeRecord, MultiBatchedAlgorithm, RunLog, RunObserver,
};
use crate::delay::DelaySampler;
use crate::error::{Error, Result};
use crate::msdm::{JointPolicy, MsdmEnv};

/// Fixed CSV column order.
pub const CSV_HEADER: [&str; 8] = [
    "seed",
    "episode",
    "batch_index",
    "policy_id",
    "inst_regret",
    "cum_regret",
    "arrivals",
    "pending",
];

/// Written in the `episode` column when a run dies.
pub const FAILED_SENTINEL: &str = "FAILED";

/// Evaluates each new policy once and accumulates per-episode regret,
/// optionally streaming CSV rows.
struct RegretObserver<'a, W: Write> {
    oracle: RegretOracle<'a>,
    seed: u64,
    by_policy: Vec<f64>,
    inst: Vec<f64>,
    cum: f64,
    cadence: usize,
    k_max: usize,
    csv: Option<&'a mut csv::Writer<W>>,
}

impl<W: Write> RunObserver for RegretObserver<'_, W> {
    fn on_policies(&mut self, first_id: usize, policies: &[Arc<JointPolicy>]) -> Result<()> {
        debug_assert_eq!(first_id, self.by_policy.len());
        for p in policies {
            let r = self.oracle.instantaneous(p)?;
            self.by_policy.push(r);
        }
        Ok(())
    }

    fn on_episode(&mut self, rec: &EpisodeRecord) -> Result<()> {
        let r = self.by_policy[rec.policy_id];
        self.inst.push(r);
        self.cum += r;
        if let Some(w) = self.csv.as_deref_mut() {
            if rec.episode % self.cadence == 0 || rec.episode == self.k_max {
                w.write_record([
                    self.seed.to_string(),
                    rec.episode.to_string(),
                    rec.batch.to_string(),
                    rec.policy_id.to_string(),
                    r.to_string(),
                    self.cum.to_string(),
                    rec.arrivals.to_string(),
                    rec.pending.to_string(),
                ])?;
            }
        }
        Ok(())
    }
}

/// A run together with its exact regret curve.
#[derive(Debug, Clone)]
pub struct RegretRun {
    pub log: RunLog,
    /// Instantaneous regret per episode.
    pub inst: Vec<f64>,
    pub diagnostics: serde_json::Value,
}

impl RegretRun {
    pub fn total(&self) -> f64 {
        self.inst.iter().sum()
    }

    /// Cumulative regret after each episode.
    pub fn cumulative(&self) -> Vec<f64> {
        self.inst
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    /// Lengths of the completed batches.
    pub fn batch_lengths(&self) -> Vec<usize> {
        self.log
            .completed_batches()
            .map(|b| b.end + 1 - b.start)
            .collect()
    }
}

/// Runs `alg` (undelayed when `delay` is `None`) and scores every episode.
pub fn run_with_regret<W: Write>(
    alg: &mut dyn MultiBatchedAlgorithm,
    env: &MsdmEnv,
    delay: Option<&DelaySampler>,
    k: usize,
    seed: u64,
    csv: Option<&mut csv::Writer<W>>,
    cadence: usize,
) -> Result<RegretRun> {
    let mut obs = RegretObserver {
        oracle: RegretOracle::new(env)?,
        seed,
        by_policy: Vec::new(),
        inst: Vec::with_capacity(k),
        cum: 0.0,
        cadence: cadence.max(1),
        k_max: k,
        csv,
    };
    let log = match delay {
        None => run_undelayed_with(alg, env, k, seed, &mut obs)?,
        Some(d) => run_delayed_with(alg, env, d, k, seed, &mut obs)?,
    };
    if let Some(w) = obs.csv.as_deref_mut() {
        w.flush()?;
    }
    Ok(RegretRun {
        log,
        inst: obs.inst,
        diagnostics: alg.diagnostics(),
    })
}

/// Builds the config's learner and runs one seed in memory.
pub fn run_config_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RegretRun> {
    let mut alg = cfg.algo.build(&cfg.constants, &cfg.env, cfg.episodes)?;
    run_with_regret::<std::io::Sink>(
        alg.as_mut(),
        &cfg.env,
        cfg.delay.as_ref(),
        cfg.episodes,
        seed,
        None,
        1,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub final_regret: Option<f64>,
    pub batches: Option<usize>,
    pub completed_batches: Option<usize>,
    pub recomputes: Option<usize>,
    pub csv: Option<PathBuf>,
    pub diagnostics: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub episodes: usize,
    pub env: String,
    pub regret_kind: RegretKind,
    pub algo: super::config::AlgoSpec,
    pub delay: Option<DelaySampler>,
    pub constants: Constants,
    pub mean_final_regret: Option<f64>,
    pub stderr_final_regret: Option<f64>,
    pub seeds: Vec<SeedSummary>,
}

impl Summary {
    pub fn all_ok(&self) -> bool {
        self.seeds.iter().all(|s| s.ok)
    }
}

/// Mean and standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Thread pool honouring `DELAYLAB_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("DELAYLAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Contract(format!("DELAYLAB_THREADS={v:?} is not a thread count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Contract(format!("thread pool: {e}")))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

fn run_seed_to_csv(cfg: &ExperimentConfig, seed: u64) -> SeedSummary {
    run_seed_with(cfg, seed, || cfg.algo.build(&cfg.constants, &cfg.env, cfg.episodes))
}

/// One seed of `cfg` with a caller-supplied learner. Errors and panics are
/// caught and recorded as a `FAILED` row.
pub fn run_seed_with<F>(cfg: &ExperimentConfig, seed: u64, build: F) -> SeedSummary
where
    F: FnOnce() -> Result<Box<dyn MultiBatchedAlgorithm>>,
{
    let path = cfg.output_dir.join(format!("{}_seed{seed}.csv", cfg.name));
    let mut out = SeedSummary {
        seed,
        ok: false,
        error: None,
        final_regret: None,
        batches: None,
        completed_batches: None,
        recomputes: None,
        csv: Some(path.clone()),
        diagnostics: serde_json::Value::Null,
    };
    let file = match File::create(&path) {
        Ok(f) => f,
        Err(e) => {
            out.error = Some(format!("{}: {e}", path.display()));
            out.csv = None;
            return out;
        }
    };
    let mut w = csv::Writer::from_writer(file);
    if let Err(e) = w.write_record(CSV_HEADER) {
        out.error = Some(e.to_string());
        return out;
    }
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<RegretRun> {
        let mut alg = build()?;
        run_with_regret(
            alg.as_mut(),
            &cfg.env,
            cfg.delay.as_ref(),
            cfg.episodes,
            seed,
            Some(&mut w),
            cfg.eval_cadence,
        )
    }));
    let failure = match result {
        Ok(Ok(run)) => {
            out.ok = true;
            out.final_regret = Some(run.total());
            out.batches = Some(run.log.batches.len());
            out.completed_batches = Some(run.log.completed_batches().count());
            out.recomputes = Some(run.log.recomputes());
            out.diagnostics = run.diagnostics;
            None
        }
        Ok(Err(e)) => Some(e.to_string()),
        Err(p) => Some(panic_message(p)),
    };
    if let Some(msg) = failure {
        log::error!("{} seed {seed}: {msg}", cfg.name);
        let mut row = vec![seed.to_string(), FAILED_SENTINEL.to_string()];
        row.resize(CSV_HEADER.len(), String::new());
        let _ = w.write_record(&row);
        out.error = Some(msg);
    }
    if let Err(e) = w.flush() {
        out.ok = false;
        out.error.get_or_insert_with(|| e.to_string());
    }
    out
}

/// Runs every seed (in parallel), writes one CSV per seed and
/// `<name>_summary.json` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary> {
    run_experiment_in(cfg, &thread_pool()?)
}

/// [`run_experiment`] on a given pool.
pub fn run_experiment_in(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<Summary> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let seeds: Vec<u64> = cfg.seeds.iter().collect();
    let per_seed: Vec<SeedSummary> =
        pool.install(|| seeds.par_iter().map(|&s| run_seed_to_csv(cfg, s)).collect());
    let finals: Vec<f64> = per_seed.iter().filter_map(|s| s.final_regret).collect();
    let (mean, se) = if finals.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_stderr(&finals);
        (Some(m), Some(s))
    };
    let summary = Summary {
        name: cfg.name.clone(),
        episodes: cfg.episodes,
        env: cfg.env_source.clone(),
        regret_kind: RegretOracle::new(&cfg.env)?.kind(),
        algo: cfg.algo.clone(),
        delay: cfg.delay.clone(),
        constants: cfg.constants,
        mean_final_regret: mean,
        stderr_final_regret: se,
        seeds: per_seed,
    };
    let path = cfg.output_dir.join(format!("{}_summary.json", cfg.name));
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, &summary)?;
    f.write_all(b"\n")?;
    Ok(summary)
}
