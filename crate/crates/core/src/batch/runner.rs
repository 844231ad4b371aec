use std::sync::Arc;

use serde::Serialize;

use crate::batch::stop::StopCriterion;
use crate::delay::{ArrivalQueue, DelaySampler};
use crate::error::{contract, Result};
use crate::msdm::{run_episode, JointPolicy, MsdmEnv, Trajectory};
use crate::rng::{Rng, RunStreams};

/// What a learner commits to at batch start.
pub struct BatchPlan {
    /// Policies executed in this batch.
    pub policies: Vec<Arc<JointPolicy>>,
    /// Indices into `policies`, cycled episode by episode; empty means `[0]`.
    pub schedule: Vec<usize>,
    pub stop: Box<dyn StopCriterion>,
}

impl BatchPlan {
    pub fn single(policy: Arc<JointPolicy>, stop: Box<dyn StopCriterion>) -> Self {
        Self {
            policies: vec![policy],
            schedule: Vec::new(),
            stop,
        }
    }

    /// Policy slot used `offset` episodes into the batch.
    fn slot(&self, offset: usize) -> usize {
        if self.schedule.is_empty() {
            0
        } else {
            self.schedule[offset % self.schedule.len()]
        }
    }
}

/// One delivered trajectory, as handed to [`MultiBatchedAlgorithm::ingest`].
#[derive(Debug, Clone, Copy)]
pub struct Feedback<'a> {
    pub trajectory: &'a Trajectory,
    /// Batch (1-based) during which the trajectory was generated.
    pub batch: usize,
    /// Episode at whose end it became available.
    pub arrival: usize,
}

/// The multi-batched learner contract.
///
/// `next_batch` may only use data passed to `ingest` so far. Batches are
/// numbered from 1 in call order.
pub trait MultiBatchedAlgorithm {
    fn name(&self) -> &'static str;

    fn next_batch(&mut self, rng: &mut Rng) -> Result<BatchPlan>;

    fn ingest(&mut self, feedback: &Feedback<'_>);

    /// Learner-specific counters and constants for run summaries.
    fn diagnostics(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub batch: usize,
    pub policy_id: usize,
    /// Realized return per reward component.
    pub rewards: Vec<f64>,
    /// Trajectories delivered at the end of this episode.
    pub arrivals: usize,
    /// Trajectories still in flight afterwards.
    pub pending: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRecord {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    /// Current-batch trajectories seen by the stop criterion.
    pub feedback_used: usize,
    /// Arrivals from earlier batches delivered during this one.
    pub stragglers: usize,
    /// False when the run was truncated before the criterion held.
    pub completed: bool,
    /// First policy id of this batch.
    pub first_policy: usize,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub episodes: Vec<EpisodeRecord>,
    pub batches: Vec<BatchRecord>,
    /// Indexed by policy id.
    pub policies: Vec<Arc<JointPolicy>>,
}

impl RunLog {
    /// Number of policy recomputations after the initial plan.
    pub fn recomputes(&self) -> usize {
        self.batches.len().saturating_sub(1)
    }

    pub fn completed_batches(&self) -> impl Iterator<Item = &BatchRecord> {
        self.batches.iter().filter(|b| b.completed)
    }
}

/// Hooks for streaming output while a run progresses.
pub trait RunObserver {
    /// Called when a batch's policies have been assigned ids `first_id..`.
    fn on_policies(&mut self, _first_id: usize, _policies: &[Arc<JointPolicy>]) -> Result<()> {
        Ok(())
    }

    fn on_episode(&mut self, _record: &EpisodeRecord) -> Result<()> {
        Ok(())
    }
}

impl RunObserver for () {}

struct Runner<'a> {
    alg: &'a mut dyn MultiBatchedAlgorithm,
    observer: &'a mut dyn RunObserver,
    log: RunLog,
    plan: BatchPlan,
    batch_start: usize,
}

impl<'a> Runner<'a> {
    fn start(
        alg: &'a mut dyn MultiBatchedAlgorithm,
        observer: &'a mut dyn RunObserver,
        rng: &mut Rng,
    ) -> Result<Self> {
        let plan = alg.next_batch(rng)?;
        let mut r = Self {
            alg,
            observer,
            log: RunLog {
                episodes: Vec::new(),
                batches: Vec::new(),
                policies: Vec::new(),
            },
            plan,
            batch_start: 1,
        };
        r.open_batch()?;
        Ok(r)
    }

    fn open_batch(&mut self) -> Result<()> {
        if self.plan.policies.is_empty() {
            return Err(contract("batch plan has no policy"));
        }
        if self.plan.schedule.iter().any(|&i| i >= self.plan.policies.len()) {
            return Err(contract("batch schedule refers to a missing policy"));
        }
        let first = self.log.policies.len();
        self.log.policies.extend(self.plan.policies.iter().cloned());
        self.observer.on_policies(first, &self.plan.policies)?;
        self.log.batches.push(BatchRecord {
            index: self.log.batches.len() + 1,
            start: self.batch_start,
            end: self.batch_start,
            feedback_used: 0,
            stragglers: 0,
            completed: false,
            first_policy: first,
        });
        Ok(())
    }

    fn batch(&self) -> usize {
        self.log.batches.len()
    }

    fn current_policy(&self, k: usize) -> (usize, Arc<JointPolicy>) {
        let slot = self.plan.slot(k - self.batch_start);
        let first = self.log.batches.last().expect("open batch").first_policy;
        (first + slot, self.plan.policies[slot].clone())
    }

    fn deliver(&mut self, fb: Feedback<'_>) {
        self.alg.ingest(&fb);
        let m = self.batch();
        let rec = self.log.batches.last_mut().expect("open batch");
        if fb.batch == m {
            self.plan.stop.observe(fb.trajectory);
            rec.feedback_used += 1;
        } else {
            rec.stragglers += 1;
        }
    }

    /// Closes the episode; opens a new batch if the criterion held.
    fn finish_episode(
        &mut self,
        record: EpisodeRecord,
        k_max: usize,
        rng: &mut Rng,
    ) -> Result<()> {
        let k = record.episode;
        self.observer.on_episode(&record)?;
        self.log.episodes.push(record);
        let rec = self.log.batches.last_mut().expect("open batch");
        rec.end = k;
        if self.plan.stop.is_met() {
            rec.completed = true;
            if k < k_max {
                self.plan = self.alg.next_batch(rng)?;
                self.batch_start = k + 1;
                self.open_batch()?;
            }
        } else if k == k_max {
            log::info!(
                "{}: run truncated at K = {k_max} inside batch {}",
                self.alg.name(),
                rec.index
            );
        }
        Ok(())
    }
}

fn returns(tr: &Trajectory, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for t in &tr.steps {
        for (o, r) in out.iter_mut().zip(&t.rewards) {
            *o += r;
        }
    }
    out
}

/// Runs the batch protocol with immediate feedback.
pub fn run_undelayed(
    alg: &mut dyn MultiBatchedAlgorithm,
    env: &MsdmEnv,
    k_max: usize,
    seed: u64,
) -> Result<RunLog> {
    run_undelayed_with(alg, env, k_max, seed, &mut ())
}

pub fn run_undelayed_with(
    alg: &mut dyn MultiBatchedAlgorithm,
    env: &MsdmEnv,
    k_max: usize,
    seed: u64,
    observer: &mut dyn RunObserver,
) -> Result<RunLog> {
    if k_max == 0 {
        return Err(contract("K must be at least 1"));
    }
    let mut streams = RunStreams::new(seed);
    let mut r = Runner::start(alg, observer, &mut streams.alg)?;
    for k in 1..=k_max {
        let (pid, policy) = r.current_policy(k);
        let tr = run_episode(env, &policy, k, &mut streams.env)?;
        let m = r.batch();
        r.deliver(Feedback {
            trajectory: &tr,
            batch: m,
            arrival: k,
        });
        let record = EpisodeRecord {
            episode: k,
            batch: m,
            policy_id: pid,
            rewards: returns(&tr, env.reward_dim()),
            arrivals: 1,
            pending: 0,
        };
        r.finish_episode(record, k_max, &mut streams.alg)?;
    }
    Ok(r.log)
}

/// Runs the batch protocol under i.i.d. delays: a batch keeps executing its
/// policy until enough of its own feedback has arrived.
pub fn run_delayed(
    alg: &mut dyn MultiBatchedAlgorithm,
    env: &MsdmEnv,
    delay: &DelaySampler,
    k_max: usize,
    seed: u64,
) -> Result<RunLog> {
    run_delayed_with(alg, env, delay, k_max, seed, &mut ())
}

pub fn run_delayed_with(
    alg: &mut dyn MultiBatchedAlgorithm,
    env: &MsdmEnv,
    delay: &DelaySampler,
    k_max: usize,
    seed: u64,
    observer: &mut dyn RunObserver,
) -> Result<RunLog> {
    if k_max == 0 {
        return Err(contract("K must be at least 1"));
    }
    let mut streams = RunStreams::new(seed);
    let mut queue: ArrivalQueue<(Trajectory, usize)> = ArrivalQueue::new();
    let mut r = Runner::start(alg, observer, &mut streams.alg)?;
    for k in 1..=k_max {
        let (pid, policy) = r.current_policy(k);
        let tr = run_episode(env, &policy, k, &mut streams.env)?;
        let rewards = returns(&tr, env.reward_dim());
        let m = r.batch();
        let tau = delay.sample(&mut streams.delay);
        queue.push(k, tau, (tr, m))?;
        let arrived = queue.deliver(k)?;
        let n_arrived = arrived.len();
        for a in &arrived {
            r.deliver(Feedback {
                trajectory: &a.item.0,
                batch: a.item.1,
                arrival: k,
            });
        }
        let record = EpisodeRecord {
            episode: k,
            batch: m,
            policy_id: pid,
            rewards,
            arrivals: n_arrived,
            pending: queue.pending(),
        };
        r.finish_episode(record, k_max, &mut streams.alg)?;
    }
    Ok(r.log)
}
