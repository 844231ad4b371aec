use std::collections::BTreeMap;

use crate::error::{contract, Result};

/// An item released by [`ArrivalQueue::deliver`].
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival<T> {
    pub emit: usize,
    pub arrival: usize,
    pub item: T,
}

/// Holds emitted feedback until its arrival episode.
#[derive(Debug, Clone)]
pub struct ArrivalQueue<T> {
    /// Keyed by `(arrival, emit)` so a range split yields emission order.
    pending: BTreeMap<(usize, usize), T>,
    emitted: usize,
    delivered: usize,
    last_emit: Option<usize>,
    last_deliver: Option<usize>,
}

impl<T> Default for ArrivalQueue<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> ArrivalQueue<T> {
    pub fn new() -> Self {
        Self {
            pending: BTreeMap::new(),
            emitted: 0,
            delivered: 0,
            last_emit: None,
            last_deliver: None,
        }
    }

    /// Schedules `item`, emitted at episode `emit`, for episode `emit + tau`.
    pub fn push(&mut self, emit: usize, tau: u64, item: T) -> Result<()> {
        if self.last_emit.is_some_and(|e| emit <= e) {
            return Err(contract(format!("episode {emit} pushed out of order or twice")));
        }
        let arrival = emit
            .checked_add(usize::try_from(tau).map_err(|_| contract("delay too large"))?)
            .ok_or_else(|| contract("arrival episode overflows"))?;
        if self.last_deliver.is_some_and(|k| arrival <= k) {
            return Err(contract(format!(
                "arrival {arrival} is already in the past (delivered up to {})",
                self.last_deliver.unwrap_or(0)
            )));
        }
        self.pending.insert((arrival, emit), item);
        self.emitted += 1;
        self.last_emit = Some(emit);
        Ok(())
    }

    /// Releases everything with arrival episode `<= k`, sorted by arrival then emission.
    pub fn deliver(&mut self, k: usize) -> Result<Vec<Arrival<T>>> {
        if self.last_deliver.is_some_and(|last| k < last) {
            return Err(contract(format!("deliver({k}) after deliver({})", self.last_deliver.unwrap_or(0))));
        }
        self.last_deliver = Some(k);
        let later = self.pending.split_off(&(k + 1, 0));
        let due = std::mem::replace(&mut self.pending, later);
        self.delivered += due.len();
        Ok(due
            .into_iter()
            .map(|((arrival, emit), item)| Arrival { emit, arrival, item })
            .collect())
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    pub fn delivered(&self) -> usize {
        self.delivered
    }

    /// Emission episodes still pending, ascending by arrival.
    pub fn pending_emits(&self) -> impl Iterator<Item = usize> + '_ {
        self.pending.keys().map(|&(_, e)| e)
    }
}
