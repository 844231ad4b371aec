use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AlgoSpec, Constants, ExperimentConfig};
use super::experiment::{mean_stderr, run_with_regret, thread_pool, RegretRun};
use super::fit::{fit_scaling, Fit, FitModel};
use crate::delay::DelaySampler;
use crate::error::{contract, Error, Result};
use crate::msdm::loader::toml_error;
use crate::msdm::MsdmEnv;

/// Delay laws parameterised by their mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayFamily {
    #[default]
    Geometric,
    /// Mean must be a whole number.
    Constant,
}

impl DelayFamily {
    pub fn sampler(self, mean: f64) -> Result<DelaySampler> {
        match self {
            DelayFamily::Geometric => DelaySampler::geometric_with_mean(mean),
            DelayFamily::Constant => {
                if !(mean >= 0.0 && mean.fract() == 0.0 && mean.is_finite()) {
                    return Err(contract(format!("constant delay needs a whole mean, got {mean}")));
                }
                Ok(DelaySampler::constant(mean as u64))
            }
        }
    }
}

fn run_once(
    algo: &AlgoSpec,
    constants: &Constants,
    env: &MsdmEnv,
    delay: Option<&DelaySampler>,
    k: usize,
    seed: u64,
) -> Result<RegretRun> {
    let mut alg = algo.build(constants, env, k)?;
    run_with_regret::<std::io::Sink>(alg.as_mut(), env, delay, k, seed, None, 1)
}

/// One mean delay of a penalty sweep.
#[derive(Debug, Clone, Serialize)]
pub struct PenaltyPoint {
    pub mean_delay: f64,
    /// Delayed minus undelayed final regret, per seed.
    pub excess: Vec<f64>,
    pub excess_mean: f64,
    pub excess_stderr: f64,
    pub delayed_mean: f64,
    /// Completed batches per seed in the delayed runs.
    pub completed_batches: Vec<usize>,
    /// Episodes beyond `feedback_used` inside completed batches, per seed.
    pub waiting: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PenaltySweep {
    pub undelayed_mean: f64,
    pub points: Vec<PenaltyPoint>,
    /// Affine fit of mean excess against mean delay (needs three means).
    pub fit: Option<Fit>,
}

/// Episodes a batch spent past the point where, without delay, it would
/// have stopped.
pub fn waiting_episodes(run: &RegretRun) -> usize {
    run.log
        .completed_batches()
        .map(|b| (b.end + 1 - b.start).saturating_sub(b.feedback_used))
        .sum()
}

/// Runs every seed undelayed and under each mean delay, pairing seeds so the
/// excess regret isolates the effect of the delay.
pub fn delay_penalty_sweep(
    env: &MsdmEnv,
    algo: &AlgoSpec,
    constants: &Constants,
    k: usize,
    family: DelayFamily,
    means: &[f64],
    seeds: &[u64],
) -> Result<PenaltySweep> {
    if seeds.is_empty() || means.is_empty() {
        return Err(contract("penalty sweep needs seeds and means"));
    }
    let samplers = means
        .iter()
        .map(|&m| family.sampler(m))
        .collect::<Result<Vec<_>>>()?;
    let pool = thread_pool()?;
    // per seed: undelayed regret, then (regret, completed, waiting) per mean
    type SeedRow = (f64, Vec<(f64, usize, usize)>);
    let rows: Vec<SeedRow> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| -> Result<SeedRow> {
                let base = run_once(algo, constants, env, None, k, seed)?.total();
                let per = samplers
                    .iter()
                    .map(|d| {
                        let run = run_once(algo, constants, env, Some(d), k, seed)?;
                        Ok((run.total(), run.log.completed_batches().count(), waiting_episodes(&run)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((base, per))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let base: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let points: Vec<PenaltyPoint> = means
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let delayed: Vec<f64> = rows.iter().map(|r| r.1[i].0).collect();
            let excess: Vec<f64> = rows.iter().map(|r| r.1[i].0 - r.0).collect();
            let (em, es) = mean_stderr(&excess);
            PenaltyPoint {
                mean_delay: m,
                excess_mean: em,
                excess_stderr: es,
                delayed_mean: mean_stderr(&delayed).0,
                completed_batches: rows.iter().map(|r| r.1[i].1).collect(),
                waiting: rows.iter().map(|r| r.1[i].2).collect(),
                excess,
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.mean_delay, p.excess_mean)).collect();
    let fit = fit_scaling(&pts, FitModel::Affine).ok();
    Ok(PenaltySweep {
        undelayed_mean: mean_stderr(&base).0,
        points,
        fit,
    })
}

/// Mean final regret at each horizon, each horizon run as its own experiment.
pub fn horizon_sweep(
    env: &MsdmEnv,
    algo: &AlgoSpec,
    constants: &Constants,
    delay: Option<&DelaySampler>,
    horizons: &[usize],
    seeds: &[u64],
) -> Result<Vec<(usize, f64, f64)>> {
    let pool = thread_pool()?;
    let jobs: Vec<(usize, u64)> = horizons
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    let totals: Vec<f64> = pool.install(|| {
        jobs.par_iter()
            .map(|&(k, s)| run_once(algo, constants, env, delay, k, s).map(|r| r.total()))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let (m, se) = mean_stderr(&totals[i * seeds.len()..(i + 1) * seeds.len()]);
            (k, m, se)
        })
        .collect())
}

/// Axes swept around a base config; unset axes keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub episodes: Option<Vec<usize>>,
    pub delay_means: Option<Vec<f64>>,
    #[serde(default)]
    pub delay_family: DelayFamily,
}

impl GridSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let g: GridSpec = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        let bad = |key: &str, message: &str| Error::Config {
            line: crate::msdm::loader::key_line(text, key),
            message: message.to_string(),
        };
        if g.episodes.as_ref().is_some_and(|e| e.is_empty() || e.contains(&0)) {
            return Err(bad("episodes", "episodes must be a non-empty list of positive counts"));
        }
        if let Some(m) = &g.delay_means {
            if m.is_empty() {
                return Err(bad("delay_means", "delay_means must not be empty"));
            }
            for &x in m {
                g.delay_family
                    .sampler(x)
                    .map_err(|e| bad("delay_means", &e.to_string()))?;
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub episodes: usize,
    /// `None` keeps the base config's delay.
    pub delay_mean: Option<f64>,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    pub failed_seeds: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridResult {
    pub name: String,
    pub cells: Vec<GridCell>,
    /// Power fit of regret against episodes, per delay mean.
    pub regret_fits: Vec<(Option<f64>, Fit)>,
    /// Affine fit of regret against mean delay, per horizon.
    pub penalty_fits: Vec<(usize, Fit)>,
}

/// Runs the grid; writes `<name>_grid.csv` (one row per cell and seed) and
/// `<name>_grid.json` into the config's output directory.
pub fn run_grid(cfg: &ExperimentConfig, grid: &GridSpec) -> Result<GridResult> {
    let horizons = grid.episodes.clone().unwrap_or_else(|| vec![cfg.episodes]);
    let means: Vec<Option<f64>> = match &grid.delay_means {
        Some(m) => m.iter().map(|&x| Some(x)).collect(),
        None => vec![None],
    };
    let seeds: Vec<u64> = cfg.seeds.iter().collect();
    let mut jobs = Vec::new();
    for &k in &horizons {
        for &m in &means {
            for &s in &seeds {
                jobs.push((k, m, s));
            }
        }
    }
    let pool = thread_pool()?;
    let results: Vec<std::result::Result<f64, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(k, m, s)| {
                let delay = match m {
                    Some(x) => Some(grid.delay_family.sampler(x).map_err(|e| e.to_string())?),
                    None => cfg.delay.clone(),
                };
                std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                    run_once(&cfg.algo, &cfg.constants, &cfg.env, delay.as_ref(), k, s)
                        .map(|r| r.total())
                        .map_err(|e| e.to_string())
                }))
                .unwrap_or_else(|_| Err("panic".into()))
            })
            .collect()
    });

    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut w = csv::Writer::from_path(cfg.output_dir.join(format!("{}_grid.csv", cfg.name)))?;
    w.write_record(["episodes", "delay_mean", "seed", "final_regret"])?;
    for (&(k, m, s), r) in jobs.iter().zip(&results) {
        w.write_record([
            k.to_string(),
            m.map_or(String::new(), |x| x.to_string()),
            s.to_string(),
            match r {
                Ok(v) => v.to_string(),
                Err(_) => super::experiment::FAILED_SENTINEL.to_string(),
            },
        ])?;
    }
    w.flush()?;

    let mut cells = Vec::new();
    for (ci, chunk) in results.chunks(seeds.len()).enumerate() {
        let (k, m, _) = jobs[ci * seeds.len()];
        let ok: Vec<f64> = chunk.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        for e in chunk.iter().filter_map(|r| r.as_ref().err()) {
            log::error!("{} K={k} delay={m:?}: {e}", cfg.name);
        }
        let (mean, se) = mean_stderr(&ok);
        cells.push(GridCell {
            episodes: k,
            delay_mean: m,
            mean_regret: mean,
            stderr_regret: se,
            failed_seeds: chunk.len() - ok.len(),
        });
    }
    let regret_fits = means
        .iter()
        .filter_map(|&m| {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.delay_mean == m && c.mean_regret.is_finite())
                .map(|c| (c.episodes as f64, c.mean_regret))
                .collect();
            fit_scaling(&pts, FitModel::Power).ok().map(|f| (m, f))
        })
        .collect();
    let penalty_fits = horizons
        .iter()
        .filter_map(|&k| {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.episodes == k && c.mean_regret.is_finite())
                .filter_map(|c| c.delay_mean.map(|m| (m, c.mean_regret)))
                .collect();
            fit_scaling(&pts, FitModel::Affine).ok().map(|f| (k, f))
        })
        .collect();
    let out = GridResult {
        name: cfg.name.clone(),
        cells,
        regret_fits,
        penalty_fits,
    };
    let mut f = File::create(cfg.output_dir.join(format!("{}_grid.json", cfg.name)))?;
    serde_json::to_writer_pretty(&mut f, &out)?;
    f.write_all(b"\n")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_fractional_constant_mean() {
        let text = "delay_family = \"constant\"\ndelay_means = [0.0, 2.5]\n";
        match GridSpec::parse(text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_defaults_to_geometric() {
        let g = GridSpec::parse("delay_means = [0, 5.0]").unwrap();
        assert_eq!(g.delay_family, DelayFamily::Geometric);
        assert_eq!(g.delay_means, Some(vec![0.0, 5.0]));
        assert!(GridSpec::parse("episodes = [10, 0]").is_err());
    }
}
