//! The acceptance suite: ten structural, oracle and scaling checks.
//!
//! Each check builds its own fixed instance, runs it and reports a
//! [`CriterionResult`]. Errors inside a check are reported as failures rather
//! than propagated, so one broken criterion never hides the others.

use std::fmt;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{AlgoKind, AlgoSpec, Constants};
use super::experiment::{mean_stderr, run_with_regret, thread_pool, RegretRun};
use super::fit::{fit_scaling, FitModel};
use super::instances;
use super::sweep::{delay_penalty_sweep, horizon_sweep, DelayFamily};
use crate::algorithms::{alpha_tail_sum, alpha_weights, g_optimal_design};
use crate::delay::DelaySampler;
use crate::equilibrium::{duality_gap, solve_cce_pair, solve_zero_sum, verify_cce, Matrix, QPairMatrix};
use crate::error::Result;
use crate::msdm::MsdmEnv;
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {} ({:.1}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

pub const NAMES: [&str; 10] = [
    "zero-delay reduction",
    "nash-vi batch bound",
    "lsvi-mg batch bound",
    "regret sublinearity",
    "delay penalty structure",
    "quantile arrivals",
    "alpha weights",
    "equilibrium certification",
    "g-optimal design",
    "v-learning convergence",
];

type Outcome = (bool, String);

/// Runs criterion `id` (1..=10).
pub fn run_criterion(id: usize) -> CriterionResult {
    let t0 = Instant::now();
    let out: Result<Outcome> = match id {
        1 => zero_delay_reduction(),
        2 => nash_vi_batches(),
        3 => lsvi_batches(),
        4 => regret_sublinearity(),
        5 => delay_penalty(),
        6 => quantile_arrivals(),
        7 => alpha_suite(),
        8 => equilibrium_certification(),
        9 => g_design(),
        10 => vlearning_convergence(),
        _ => Err(crate::error::contract(format!("no criterion {id}"))),
    };
    let (passed, detail) = out.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult {
        id,
        name: NAMES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown"),
        passed,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

pub fn run_all() -> Vec<CriterionResult> {
    (1..=10).map(run_criterion).collect()
}

fn csv_run(
    algo: &AlgoSpec,
    env: &MsdmEnv,
    delay: Option<&DelaySampler>,
    k: usize,
    seed: u64,
) -> Result<(RegretRun, Vec<u8>)> {
    let mut alg = algo.build(&Constants::default(), env, k)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(super::experiment::CSV_HEADER)?;
    let run = run_with_regret(alg.as_mut(), env, delay, k, seed, Some(&mut w), 1)?;
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok((run, bytes))
}

fn zero_delay_reduction() -> Result<Outcome> {
    let cases: Vec<(AlgoKind, MsdmEnv, usize)> = vec![
        (AlgoKind::BatchedElim, instances::five_arm_bandit()?, 2000),
        (AlgoKind::PhaseElim, instances::circle_linear_bandit(8)?, 2000),
        (AlgoKind::NashVi, instances::nash_vi_game()?, 600),
        (AlgoKind::LsviMg, instances::lsvi_game()?, 300),
        (AlgoKind::VLearning, instances::dominant_strategy_game()?, 1000),
    ];
    let zero = DelaySampler::constant(0);
    let mut notes = Vec::new();
    let mut ok = true;
    for (kind, env, k) in cases {
        let algo = AlgoSpec::new(kind);
        let (plain, a) = csv_run(&algo, &env, None, k, 11)?;
        let (delayed, b) = csv_run(&algo, &env, Some(&zero), k, 11)?;
        let same = a == b && plain.log == delayed.log;
        ok &= same;
        notes.push(format!(
            "{kind:?} {} ({} batches)",
            if same { "identical" } else { "DIFFERS" },
            plain.log.batches.len()
        ));
    }
    Ok((ok, notes.join(", ")))
}

fn nash_vi_batches() -> Result<Outcome> {
    let env = instances::nash_vi_game()?;
    let (k, h, s, j) = (2000usize, 3usize, 3usize, 4usize);
    let triggers = crate::batch::trigger_set(k, h).len();
    let bound = h * s * j * triggers;
    let algo = AlgoSpec::new(AlgoKind::NashVi);
    let counts = per_seed(0..10, |seed| {
        let mut alg = algo.build(&Constants::default(), &env, k)?;
        Ok(crate::batch::run_undelayed(alg.as_mut(), &env, k, seed)?.recomputes())
    })?;
    let max = *counts.iter().max().unwrap_or(&0);
    Ok((
        max <= bound,
        format!("recomputes per seed {counts:?}, max {max} <= {bound}"),
    ))
}

fn lsvi_batches() -> Result<Outcome> {
    let env = instances::lsvi_game()?;
    let (k, d, h) = (4000usize, 4.0f64, 3.0f64);
    let bound = d * h / 2f64.ln() * (1.0 + k as f64).ln();
    let algo = AlgoSpec::new(AlgoKind::LsviMg);
    let counts = per_seed(0..10, |seed| {
        let mut alg = algo.build(&Constants::default(), &env, k)?;
        Ok(crate::batch::run_undelayed(alg.as_mut(), &env, k, seed)?.recomputes())
    })?;
    let max = *counts.iter().max().unwrap_or(&0);
    Ok((
        (max as f64) <= bound,
        format!("recomputes per seed {counts:?}, max {max} <= {bound:.1}"),
    ))
}

fn regret_sublinearity() -> Result<Outcome> {
    let env = instances::nash_vi_game()?;
    let seeds: Vec<u64> = (0..10).collect();
    let horizons = [1000, 2000, 4000, 8000];
    let algo = AlgoSpec::new(AlgoKind::NashVi);
    let c = crate::algorithms::NashViParams::default().c;
    let rows = horizon_sweep(
        &env,
        &algo,
        &Constants::default(),
        None,
        &horizons,
        &seeds,
    )?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(k, m, _)| (k as f64, m)).collect();
    let fit = fit_scaling(&pts, FitModel::Power)?;
    let (k_last, r_last, _) = rows[rows.len() - 1];
    let per_episode = r_last / k_last as f64;
    let cap = 0.1 * env.horizon() as f64;
    let ok = (0.4..=0.75).contains(&fit.coefficient) && fit.r2 >= 0.9 && per_episode <= cap;
    let curve: Vec<String> = rows.iter().map(|(k, m, se)| format!("{k}:{m:.1}±{se:.1}")).collect();
    Ok((
        ok,
        format!(
            "C={c}; regret {}; exponent {:.3} in [0.4, 0.75], R2 {:.3} >= 0.9, R/K {:.4} <= {cap:.1}",
            curve.join(" "),
            fit.coefficient,
            fit.r2,
            per_episode
        ),
    ))
}

fn delay_penalty() -> Result<Outcome> {
    let env = instances::five_arm_bandit()?;
    let algo = AlgoSpec::new(AlgoKind::BatchedElim);
    let c = Constants::default();
    let k = 50_000;
    let seeds: Vec<u64> = (0..20).collect();
    let geo = delay_penalty_sweep(&env, &algo, &c, k, DelayFamily::Geometric, &[0.0, 20.0, 80.0], &seeds)?;
    let fit = geo
        .fit
        .ok_or_else(|| crate::error::Error::Numerical("affine fit failed".into()))?;
    let zero_exact = geo.points[0].excess.iter().all(|&x| x == 0.0);

    // constant delays: every completed batch waits exactly c extra episodes
    let consts = [0.0, 10.0, 20.0];
    let cs = delay_penalty_sweep(&env, &algo, &c, k, DelayFamily::Constant, &consts, &seeds[..5])?;
    let h = env.horizon() as f64;
    let mut const_ok = true;
    let mut const_notes = Vec::new();
    for p in &cs.points {
        for (i, (&nb, &w)) in p.completed_batches.iter().zip(&p.waiting).enumerate() {
            let formula = h * nb as f64 * p.mean_delay;
            let within = (w as f64 - formula).abs() <= nb as f64;
            let excess_ok = p.excess[i] <= formula + nb as f64;
            const_ok &= within && excess_ok;
        }
        let nb = p.completed_batches[0];
        const_notes.push(format!(
            "c={}: N_b={nb} waiting={} excess={:.1}",
            p.mean_delay, p.waiting[0], p.excess_mean
        ));
    }
    // upper bound from the batch accounting: each completed batch costs at most H per waited episode
    let bound_ok = geo.points.iter().all(|p| {
        let nb = p.completed_batches.iter().sum::<usize>() as f64 / p.completed_batches.len() as f64;
        p.excess_mean <= h * nb * p.mean_delay + 2.0 * p.excess_stderr
    });
    let pts: Vec<String> = geo
        .points
        .iter()
        .map(|p| format!("{}:{:.1}±{:.1}", p.mean_delay, p.excess_mean, p.excess_stderr))
        .collect();
    // a penalty needs a positive slope; a good R2 on a flat or falling line is noise
    let structure_ok = fit.r2 >= 0.8 && fit.coefficient > 0.0;
    Ok((
        structure_ok && bound_ok && zero_exact && const_ok,
        format!(
            "geometric excess {}; slope {:.3} > 0, R2 {:.3} >= 0.8; bound {bound_ok}; zero point exact {zero_exact}; constant {}",
            pts.join(" "),
            fit.coefficient,
            fit.r2,
            const_notes.join(", ")
        ),
    ))
}

fn quantile_arrivals() -> Result<Outcome> {
    let d = DelaySampler::new(crate::delay::DelayLaw::Geometric { p: 0.3 })?;
    let (q, t, trials) = (0.5, 200usize, 500u64);
    let dq = d.quantile(q)? as usize;
    let need = (q / 2.0 * t as f64).ceil() as usize;
    let mut good = 0;
    let mut worst = usize::MAX;
    for trial in 0..trials {
        let mut rng = stream(trial, Stream::Delay);
        let seen = (1..=t)
            .filter(|&k| k + d.sample(&mut rng) as usize <= t + dq)
            .count();
        worst = worst.min(seen);
        if seen >= need {
            good += 1;
        }
    }
    let frac = good as f64 / trials as f64;
    Ok((
        frac >= 0.95,
        format!("d(q)={dq}; {good}/{trials} trials saw >= {need} (worst {worst})"),
    ))
}

fn alpha_suite() -> Result<Outcome> {
    // float slack only; the inequalities are exact in real arithmetic
    const EPS: f64 = 1e-12;
    let mut violations = Vec::new();
    for h in 1..=5usize {
        let hf = h as f64;
        for t in 1..=1000u64 {
            let w = alpha_weights(h, t);
            let tf = t as f64;
            let sum: f64 = w.iter().sum();
            let root: f64 = w.iter().enumerate().map(|(i, a)| a / ((i + 1) as f64).sqrt()).sum();
            let max = w.iter().cloned().fold(0.0, f64::max);
            let sq: f64 = w.iter().map(|a| a * a).sum();
            let checks = [
                ((sum - 1.0).abs() <= EPS, "sum"),
                (root >= 1.0 / tf.sqrt() - EPS && root <= 2.0 / tf.sqrt() + EPS, "root"),
                (max <= 2.0 * hf / tf + EPS, "max"),
                (sq <= 2.0 * hf / tf + EPS, "square"),
            ];
            for (ok, what) in checks {
                if !ok {
                    violations.push(format!("H={h} t={t} {what}"));
                }
            }
        }
        for i in 1..=3u64 {
            let tail = alpha_tail_sum(h, i, 10_000);
            if (tail - (1.0 + 1.0 / hf)).abs() > 1e-3 {
                violations.push(format!("H={h} i={i} tail {tail}"));
            }
        }
    }
    let n = violations.len();
    violations.truncate(5);
    Ok((
        n == 0,
        if n == 0 {
            "all inequalities hold for H=1..5, t<=1000; tails within 1e-3".into()
        } else {
            format!("{n} violations: {}", violations.join("; "))
        },
    ))
}

fn equilibrium_certification() -> Result<Outcome> {
    let mut rng = stream(8, Stream::Misc);
    let mut worst_cce: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..200 {
        let a = rng.random_range(1..=6);
        let b = rng.random_range(1..=6);
        let lower: Vec<f64> = (0..a * b).map(|_| rng.random::<f64>() * 3.0).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.random::<f64>()).collect();
        let pair = QPairMatrix::new(Matrix::from_vec(a, b, upper)?, Matrix::from_vec(a, b, lower.clone())?)?;
        let sol = solve_cce_pair(&pair, 1e-3)?;
        let (gm, gn) = verify_cce(&sol.dist, &pair);
        worst_cce = worst_cce.max(gm).max(gn);
        let m = Matrix::from_vec(a, b, lower)?;
        let z = solve_zero_sum(&m, 1e-9)?;
        worst_gap = worst_gap.max(duality_gap(&m, &z.row, &z.col));
    }
    let v = solve_zero_sum(&Matrix::from_rows(&[vec![3.0, 0.0], vec![1.0, 2.0]])?, 1e-9)?.value;
    Ok((
        worst_cce <= 1e-3 && worst_gap <= 1e-6 && (v - 1.5).abs() <= 1e-6,
        format!("worst cce gap {worst_cce:.2e}, worst duality gap {worst_gap:.2e}, value {v:.9}"),
    ))
}

fn g_design() -> Result<Outcome> {
    let mut rng = stream(9, Stream::Misc);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=5usize);
        let n = rng.random_range(d..=4 * d + 4);
        let feats: Vec<DVector<f64>> = (0..n)
            .map(|_| DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let des = g_optimal_design(&feats, 0.04)?;
        worst = worst.max(des.g / des.dim as f64);
    }
    let basis: Vec<DVector<f64>> = (0..4)
        .map(|i| DVector::from_fn(4, |r, _| if r == i { 1.0 } else { 0.0 }))
        .collect();
    let g_basis = g_optimal_design(&basis, 0.04)?.g;
    Ok((
        worst <= 1.05 && (g_basis - 4.0).abs() <= 1e-6,
        format!("worst g/d {worst:.4} <= 1.05, basis g {g_basis:.9}"),
    ))
}

fn vlearning_convergence() -> Result<Outcome> {
    let env = instances::dominant_strategy_game()?;
    let k = 20_000;
    let (n, h, s) = (2usize, env.horizon(), env.n_states());
    let bound = n * h * s * ((((k * h) as f64).log2().floor()) as usize + 1);
    let algo = AlgoSpec::new(AlgoKind::VLearning);
    let runs = per_seed(0..10, |seed| {
        let mut alg = algo.build(&Constants::default(), &env, k)?;
        let run = run_with_regret::<std::io::Sink>(alg.as_mut(), &env, None, k, seed, None, 1)?;
        let tail = &run.inst[k - k / 5..];
        Ok((tail.iter().sum::<f64>() / tail.len() as f64, run.log.recomputes()))
    })?;
    let gaps: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (mean, se) = mean_stderr(&gaps);
    let max_ref = runs.iter().map(|r| r.1).max().unwrap_or(0);
    let cap = 0.1 * h as f64;
    Ok((
        mean <= cap && max_ref <= bound,
        format!("tail cce gap {mean:.4}±{se:.4} <= {cap}; refreshes max {max_ref} <= {bound}"),
    ))
}

fn per_seed<T: Send>(
    seeds: std::ops::Range<u64>,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let pool = thread_pool()?;
    let seeds: Vec<u64> = seeds.collect();
    pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
}

