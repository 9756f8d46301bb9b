//! Piecewise-constant lineage-count paths.

use serde::{Deserialize, Serialize};

use crate::engine::{Coordinate, Counts, EventRecord};
use crate::error::{Error, Result};
use crate::params::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// Every coordinate with a target level reached it.
    Levels,
    /// The time horizon was reached before the next arrival.
    Horizon,
    /// No arrival can change any process any more.
    Absorbed,
}

/// Output of [`crate::engine::simulate_coupled`]: one arrival stream's
/// effect on the three counts. Immutable once built.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoupledTrajectory {
    params: ModelParams,
    n0: u32,
    start_time: f64,
    events: Vec<EventRecord>,
    stop_time: f64,
    stop_reason: StopReason,
}

impl CoupledTrajectory {
    pub(crate) fn from_parts(
        params: ModelParams,
        n0: u32,
        start_time: f64,
        events: Vec<EventRecord>,
        stop_time: f64,
        stop_reason: StopReason,
    ) -> Self {
        Self {
            params,
            n0,
            start_time,
            events,
            stop_time,
            stop_reason,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n0(&self) -> u32 {
        self.n0
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn stop_time(&self) -> f64 {
        self.stop_time
    }

    pub fn stop_reason(&self) -> StopReason {
        self.stop_reason
    }

    pub fn final_counts(&self) -> Counts {
        self.events.last().map_or([self.n0; 3], |e| e.counts)
    }

    /// Counts at time `t`, right-continuous. `None` outside
    /// `[start_time, stop_time]`.
    pub fn counts_at(&self, t: f64) -> Option<Counts> {
        if t < self.start_time || t > self.stop_time {
            return None;
        }
        let idx = self.events.partition_point(|e| e.time <= t);
        Some(if idx == 0 {
            [self.n0; 3]
        } else {
            self.events[idx - 1].counts
        })
    }

    /// First time `coord` is at or below `level`; `None` if the run stopped
    /// before that.
    pub fn hitting_time(&self, coord: Coordinate, level: u32) -> Option<f64> {
        let c = coord.index();
        if self.n0 <= level {
            return Some(self.start_time);
        }
        self.events
            .iter()
            .find(|e| e.counts[c] <= level)
            .map(|e| e.time)
    }

    /// Number of events after which the coupling order
    /// `N^{0,theta} <= N^{0,0}` and `N^{0,theta} <= N^{sigma,theta}` fails.
    pub fn coupling_violations(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.counts[1] > e.counts[0] || e.counts[1] > e.counts[2])
            .count()
    }

    /// The path of one coordinate, keeping only the events that changed it.
    pub fn path(&self, coord: Coordinate) -> StepPath {
        let c = coord.index();
        let (times, levels) = self
            .events
            .iter()
            .filter(|e| e.applied[c])
            .map(|e| (e.time, e.counts[c]))
            .unzip();
        StepPath {
            start: self.start_time,
            end: self.stop_time,
            initial: self.n0,
            times,
            levels,
        }
    }
}

/// A right-continuous integer step function on `[start, end]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPath {
    start: f64,
    end: f64,
    initial: u32,
    times: Vec<f64>,
    levels: Vec<u32>,
}

/// A maximal interval on which the path is constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    pub level: u32,
}

impl StepPath {
    /// Build a path from `(time, level after the jump)` pairs.
    pub fn new(start: f64, end: f64, initial: u32, jumps: &[(f64, u32)]) -> Result<Self> {
        if !(start.is_finite() && start >= 0.0 && end >= start) {
            return Err(Error::Config(format!("bad path window [{start}, {end}]")));
        }
        let mut prev = start;
        for &(t, _) in jumps {
            if !(t > prev) || t > end {
                return Err(Error::Config(format!(
                    "jump time {t} out of order or beyond {end}"
                )));
            }
            prev = t;
        }
        let (times, levels) = jumps.iter().copied().unzip();
        Ok(Self {
            start,
            end,
            initial,
            times,
            levels,
        })
    }

    /// Unchecked constructor for samplers that emit jumps in order.
    pub(crate) fn from_parts(
        start: f64,
        end: f64,
        initial: u32,
        times: Vec<f64>,
        levels: Vec<u32>,
    ) -> Self {
        debug_assert_eq!(times.len(), levels.len());
        Self {
            start,
            end,
            initial,
            times,
            levels,
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn initial(&self) -> u32 {
        self.initial
    }

    pub fn jump_count(&self) -> usize {
        self.times.len()
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn final_level(&self) -> u32 {
        self.levels.last().copied().unwrap_or(self.initial)
    }

    /// Level at `t`, right-continuous.
    pub fn level_at(&self, t: f64) -> Result<u32> {
        if t < self.start || t > self.end {
            return Err(Error::PartialPath {
                time: t,
                start: self.start,
                end: self.end,
            });
        }
        let idx = self.times.partition_point(|&s| s <= t);
        Ok(if idx == 0 {
            self.initial
        } else {
            self.levels[idx - 1]
        })
    }

    /// `(time, level before, level after)` for every jump.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, u32, u32)> + '_ {
        let befores = std::iter::once(self.initial).chain(self.levels.iter().copied());
        self.times
            .iter()
            .zip(befores)
            .zip(&self.levels)
            .map(|((&t, b), &a)| (t, b, a))
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let froms = std::iter::once(self.start).chain(self.times.iter().copied());
        let tos = self.times.iter().copied().chain(std::iter::once(self.end));
        let levels = std::iter::once(self.initial).chain(self.levels.iter().copied());
        froms
            .zip(tos)
            .zip(levels)
            .map(|((from, to), level)| Segment { from, to, level })
    }

    /// First time the path is at or below `level`.
    pub fn hitting_time(&self, level: u32) -> Option<f64> {
        if self.initial <= level {
            return Some(self.start);
        }
        self.levels
            .iter()
            .position(|&l| l <= level)
            .map(|i| self.times[i])
    }

    /// The part of the path from its first visit to `level` on, as a path
    /// started at `level`. Exact for unit jumps.
    pub fn suffix_from_level(&self, level: u32) -> Option<StepPath> {
        if self.initial <= level {
            return Some(self.clone());
        }
        let i = self.levels.iter().position(|&l| l <= level)?;
        Some(StepPath {
            start: self.times[i],
            end: self.end,
            initial: self.levels[i],
            times: self.times[i + 1..].to_vec(),
            levels: self.levels[i + 1..].to_vec(),
        })
    }

    /// [`Self::suffix_from_level`] moved to start at `start`, in one copy.
    pub fn suffix_moved_to(&self, level: u32, start: f64) -> Option<Result<StepPath>> {
        let (i0, from, initial) = if self.initial <= level {
            (0, self.start, self.initial)
        } else {
            let i = self.levels.iter().position(|&l| l <= level)?;
            (i + 1, self.times[i], self.levels[i])
        };
        if start < 0.0 {
            return Some(Err(Error::Config(format!(
                "cannot move a path to start at {start}"
            ))));
        }
        let dt = start - from;
        Some(Ok(StepPath {
            start,
            end: self.end + dt,
            initial,
            times: self.times[i0..].iter().map(|t| t + dt).collect(),
            levels: self.levels[i0..].to_vec(),
        }))
    }

    /// Same path with every time moved by `dt`; the start must stay >= 0.
    pub fn shifted(&self, dt: f64) -> Result<StepPath> {
        if self.start + dt < 0.0 {
            return Err(Error::Config(format!(
                "shift {dt} moves start {} below zero",
                self.start
            )));
        }
        Ok(StepPath {
            start: self.start + dt,
            end: self.end + dt,
            initial: self.initial,
            times: self.times.iter().map(|t| t + dt).collect(),
            levels: self.levels.clone(),
        })
    }
}
