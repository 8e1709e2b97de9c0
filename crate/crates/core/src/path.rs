//! Counting, arrival and interarrival views of a single realization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// One realization of a counting process observed on `[0, horizon]`.
///
/// Event times are strictly increasing and lie in `(0, horizon]`; the path
/// carries no information past the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingPath<T = f64> {
    horizon: T,
    events: Vec<T>,
}

impl<T: Real> CountingPath<T> {
    pub fn new(horizon: T, events: Vec<T>) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= T::zero()) {
            return Err(Error::InvalidPath(format!("horizon {horizon} must be finite and nonnegative")));
        }
        let mut prev = T::zero();
        for (i, &t) in events.iter().enumerate() {
            if !t.is_finite() || t <= prev {
                return Err(Error::InvalidPath(format!(
                    "event {i} at {t} is not strictly after the previous event {prev}"
                )));
            }
            if t > horizon {
                return Err(Error::InvalidPath(format!("event {i} at {t} lies beyond horizon {horizon}")));
            }
            prev = t;
        }
        Ok(Self { horizon, events })
    }

    pub fn empty(horizon: T) -> Result<Self> {
        Self::new(horizon, Vec::new())
    }

    /// Builds the path whose arrivals are the partial sums of `waits`, dropping arrivals past `horizon`.
    pub fn from_interarrivals(waits: &[T], horizon: T) -> Result<Self> {
        let mut events = Vec::with_capacity(waits.len());
        let mut t = T::zero();
        for (i, &w) in waits.iter().enumerate() {
            if !(w > T::zero() && w.is_finite()) {
                return Err(Error::InvalidPath(format!("waiting time {i} = {w} must be positive")));
            }
            t = t + w;
            if t > horizon {
                break;
            }
            events.push(t);
        }
        Self::new(horizon, events)
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Arrival times `T_1 < T_2 < ...`.
    pub fn arrivals(&self) -> &[T] {
        &self.events
    }

    /// Waiting times `W_1 = T_1`, `W_n = T_n - T_{n-1}`.
    pub fn interarrivals(&self) -> Vec<T> {
        let mut prev = T::zero();
        self.events
            .iter()
            .map(|&t| {
                let w = t - prev;
                prev = t;
                w
            })
            .collect()
    }

    fn check_time(&self, t: T) -> Result<()> {
        if !(t >= T::zero()) || t > self.horizon {
            return Err(Error::OutOfRange {
                time: t.to_f64_lossy(),
                horizon: self.horizon.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// `N_t`: number of events at or before `t` (right-continuous).
    pub fn count(&self, t: T) -> Result<u64> {
        self.check_time(t)?;
        Ok(self.events.partition_point(|&e| e <= t) as u64)
    }

    pub fn count_at(&self, times: &[T]) -> Result<Vec<u64>> {
        times.iter().map(|&t| self.count(t)).collect()
    }

    /// Increments `N_{t_j} - N_{t_{j-1}}` over a strictly increasing grid (with `t_0 = 0`).
    pub fn increments(&self, grid: &[T]) -> Result<Vec<u64>> {
        check_grid(grid)?;
        let mut prev = 0;
        grid.iter()
            .map(|&t| {
                let n = self.count(t)?;
                let k = n - prev;
                prev = n;
                Ok(k)
            })
            .collect()
    }
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    let mut prev = T::zero();
    for (j, &t) in grid.iter().enumerate() {
        if !(t > prev) || !t.is_finite() {
            return Err(Error::InvalidQuery(format!("grid time {j} = {t} must exceed {prev}")));
        }
        prev = t;
    }
    Ok(())
}

/// The event `{N_{t_j} - N_{t_{j-1}} = κ_j, j = 1..m}` with `t_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FddQuery<T = f64> {
    times: Vec<T>,
    increments: Vec<u64>,
}

impl<T: Real> FddQuery<T> {
    pub fn new(times: Vec<T>, increments: Vec<u64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidQuery("at least one time point is required".into()));
        }
        if times.len() != increments.len() {
            return Err(Error::InvalidQuery(format!(
                "{} times but {} increments",
                times.len(),
                increments.len()
            )));
        }
        check_grid(&times)?;
        Ok(Self { times, increments })
    }

    /// Builds a query from cumulative counts `n_1 <= ... <= n_m`.
    pub fn from_cumulative(times: Vec<T>, counts: &[u64]) -> Result<Self> {
        let mut prev = 0;
        let mut increments = Vec::with_capacity(counts.len());
        for (j, &n) in counts.iter().enumerate() {
            if n < prev {
                return Err(Error::InvalidQuery(format!("cumulative count {j} = {n} decreases")));
            }
            increments.push(n - prev);
            prev = n;
        }
        Self::new(times, increments)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn increments(&self) -> &[u64] {
        &self.increments
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Interval lengths `Δ_j = t_j - t_{j-1}`.
    pub fn durations(&self) -> Vec<T> {
        let mut prev = T::zero();
        self.times
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }

    pub fn cumulative(&self) -> Vec<u64> {
        self.increments
            .iter()
            .scan(0u64, |acc, &k| {
                *acc += k;
                Some(*acc)
            })
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.increments.iter().sum()
    }

    pub fn last_time(&self) -> T {
        *self.times.last().expect("query is never empty")
    }

    /// True when `path` realizes the event.
    pub fn matches(&self, path: &CountingPath<T>) -> Result<bool> {
        Ok(path.increments(&self.times)? == self.increments)
    }
}
