//! Event-driven sampler for the coupled triple of block-counting processes.
//!
//! A single marked Poisson arrival stream drives all three processes:
//!
//! * pair marks `(i, j)` with `i < j` arrive at unit rate each and merge
//!   lineages `i` and `j` in every process that currently has at least `j`
//!   lineages;
//! * mutation marks `i` arrive at rate `theta/2` each and kill lineage `i`
//!   in the two mutating processes when they have at least `i` lineages;
//! * selection marks `i` arrive at rate `sigma/2` each and split lineage `i`
//!   in the selection process when it has at least `i` lineages.
//!
//! Only marks that can change at least one process are generated, and their
//! indices are drawn lazily when the arrival fires.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::trajectory::{CoupledTrajectory, StepPath, StopReason};

/// Lineage counts `[N^{0,0}, N^{0,theta}, N^{sigma,theta}]`.
pub type Counts = [u32; 3];

pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

/// The three coupled coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coordinate {
    /// Kingman coalescent, `N^{0,0}`.
    Kingman = 0,
    /// Coalescent with mutation, `N^{0,theta}`.
    Mutation = 1,
    /// Ancestral selection graph, `N^{sigma,theta}`.
    Selection = 2,
}

impl Coordinate {
    pub const ALL: [Coordinate; 3] = [
        Coordinate::Kingman,
        Coordinate::Mutation,
        Coordinate::Selection,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// A potential coalescence, mutation or selection event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mark {
    PairCoalescence { i: u32, j: u32 },
    MutationKill { i: u32 },
    SelectionBranch { i: u32 },
}

/// One arrival that changed at least one of the three processes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub mark: Mark,
    /// Which coordinates the mark changed, indexed by [`Coordinate`].
    pub applied: [bool; 3],
    /// Counts right after the event.
    pub counts: Counts,
}

/// Rate decomposition of the arrivals that can affect the current state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrivalRates {
    pub pair: f64,
    pub mutation: f64,
    pub selection: f64,
}

impl ArrivalRates {
    pub fn total(&self) -> f64 {
        self.pair + self.mutation + self.selection
    }
}

pub fn check_counts(counts: Counts) -> Result<()> {
    let [k, m, a] = counts;
    if m > k {
        return Err(Error::InvalidCounts {
            counts,
            reason: "N^{0,theta} exceeds N^{0,0}",
        });
    }
    if m > a {
        return Err(Error::InvalidCounts {
            counts,
            reason: "N^{0,theta} exceeds N^{sigma,theta}",
        });
    }
    Ok(())
}

/// Intensity of effective arrivals. Pair marks range over `1..=max(N^{0,0},
/// N^{sigma,theta})`; mutation and selection marks over `1..=N^{sigma,theta}`,
/// which also covers `N^{0,theta}`.
pub fn arrival_rates(counts: Counts, params: &ModelParams) -> ArrivalRates {
    let top = counts[0].max(counts[2]) as f64;
    let c = counts[2] as f64;
    ArrivalRates {
        pair: 0.5 * top * (top - 1.0).max(0.0),
        mutation: 0.5 * c * params.theta(),
        selection: 0.5 * c * params.sigma(),
    }
}

/// Draw the holding time and mark of the next effective arrival.
pub fn sample_arrival<R: Rng + ?Sized>(
    counts: Counts,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(f64, Mark)> {
    check_counts(counts)?;
    let rates = arrival_rates(counts, params);
    let total = rates.total();
    if total <= 0.0 {
        return Err(Error::Absorbed);
    }
    Ok(draw_arrival(counts, &rates, total, rng))
}

#[inline]
fn draw_arrival<R: Rng + ?Sized>(
    counts: Counts,
    rates: &ArrivalRates,
    total: f64,
    rng: &mut R,
) -> (f64, Mark) {
    let e: f64 = Exp1.sample(rng);
    let holding = e / total;
    let u = rng.random::<f64>() * total;
    let mark = if u < rates.pair {
        let top = counts[0].max(counts[2]);
        let x = rng.random_range(0..top);
        let mut y = rng.random_range(0..top - 1);
        if y >= x {
            y += 1;
        }
        Mark::PairCoalescence {
            i: x.min(y) + 1,
            j: x.max(y) + 1,
        }
    } else {
        let i = rng.random_range(1..=counts[2]);
        if u < rates.pair + rates.mutation || rates.selection == 0.0 {
            Mark::MutationKill { i }
        } else {
            Mark::SelectionBranch { i }
        }
    };
    (holding, mark)
}

/// Thinning rule: which processes does `mark` change, and what are the new
/// counts.
#[inline]
pub fn apply_mark(counts: Counts, mark: Mark) -> (Counts, [bool; 3]) {
    let [k, m, a] = counts;
    match mark {
        Mark::PairCoalescence { j, .. } => {
            let hit = [k >= j, m >= j, a >= j];
            (
                [k - hit[0] as u32, m - hit[1] as u32, a - hit[2] as u32],
                hit,
            )
        }
        Mark::MutationKill { i } => {
            let hit = [false, i <= m, i <= a];
            ([k, m - hit[1] as u32, a - hit[2] as u32], hit)
        }
        Mark::SelectionBranch { i } => {
            let hit = [false, false, i <= a];
            ([k, m, a + hit[2] as u32], hit)
        }
    }
}

/// When to stop a coupled simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Per-coordinate target level; the run stops once every coordinate with
    /// a target has been at or below it.
    pub levels: [Option<u32>; 3],
    /// Absolute time horizon.
    pub horizon: Option<f64>,
    pub max_events: u64,
}

impl StopRule {
    /// Stop once all three coordinates have reached `level`.
    pub fn all_at_level(level: u32) -> Self {
        Self {
            levels: [Some(level); 3],
            horizon: None,
            max_events: DEFAULT_EVENT_CAP,
        }
    }

    /// Stop once `coord` has reached `level`.
    pub fn coordinate_at_level(coord: Coordinate, level: u32) -> Self {
        let mut levels = [None; 3];
        levels[coord.index()] = Some(level);
        Self {
            levels,
            horizon: None,
            max_events: DEFAULT_EVENT_CAP,
        }
    }

    pub fn horizon(time: f64) -> Self {
        Self {
            levels: [None; 3],
            horizon: Some(time),
            max_events: DEFAULT_EVENT_CAP,
        }
    }

    pub fn with_horizon(mut self, time: f64) -> Self {
        self.horizon = Some(time);
        self
    }

    pub fn with_event_cap(mut self, cap: u64) -> Self {
        self.max_events = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.levels.iter().all(Option::is_none) && self.horizon.is_none() {
            return Err(Error::Config(
                "stop rule needs a target level or a time horizon".into(),
            ));
        }
        if let Some(h) = self.horizon {
            if !h.is_finite() {
                return Err(Error::Config(format!(
                    "time horizon must be finite, got {h}"
                )));
            }
        }
        Ok(())
    }
}

/// Simulate the coupled triple started with `n0` lineages in every process
/// at time `start_time`.
pub fn simulate_coupled<R: Rng + ?Sized>(
    params: &ModelParams,
    n0: u32,
    start_time: f64,
    stop: &StopRule,
    rng: &mut R,
) -> Result<CoupledTrajectory> {
    if n0 == 0 {
        return Err(Error::Config("initial lineage count must be >= 1".into()));
    }
    stop.validate()?;
    if let Some(h) = stop.horizon {
        if h < start_time {
            return Err(Error::Config(format!(
                "horizon {h} precedes start time {start_time}"
            )));
        }
    }

    let mut counts: Counts = [n0; 3];
    let mut reached = [false; 3];
    let update_reached = |reached: &mut [bool; 3], counts: &Counts| {
        for c in 0..3 {
            if let Some(level) = stop.levels[c] {
                reached[c] |= counts[c] <= level;
            } else {
                reached[c] = true;
            }
        }
    };
    let has_level_target = stop.levels.iter().any(Option::is_some);
    update_reached(&mut reached, &counts);

    let mut events = Vec::new();
    let mut time = start_time;
    let reason;
    loop {
        if has_level_target && reached.iter().all(|r| *r) {
            reason = StopReason::Levels;
            break;
        }
        let rates = arrival_rates(counts, params);
        let total = rates.total();
        if total <= 0.0 {
            reason = StopReason::Absorbed;
            break;
        }
        if events.len() as u64 >= stop.max_events {
            return Err(Error::EventCapExceeded {
                cap: stop.max_events,
                time,
            });
        }
        let (holding, mark) = draw_arrival(counts, &rates, total, rng);
        let next = time + holding;
        if let Some(h) = stop.horizon {
            if next > h {
                time = h;
                reason = StopReason::Horizon;
                break;
            }
        }
        debug_assert!(next > time);
        time = next;
        let (after, applied) = apply_mark(counts, mark);
        debug_assert!(after[1] <= after[0] && after[1] <= after[2]);
        counts = after;
        events.push(EventRecord {
            time,
            mark,
            applied,
            counts,
        });
        update_reached(&mut reached, &counts);
    }

    let stop_time = match (reason, stop.horizon) {
        (StopReason::Absorbed, Some(h)) => h.max(time),
        _ => time,
    };
    Ok(CoupledTrajectory::from_parts(
        *params, n0, start_time, events, stop_time, reason,
    ))
}

/// Simulate the selective coordinate alone as a birth/death chain, from `n0`
/// at `start_time` until `horizon`. Same law as
/// `simulate_coupled(..).path(Coordinate::Selection)`, without the marks.
pub fn simulate_selective_path<R: Rng + ?Sized>(
    params: &ModelParams,
    n0: u32,
    start_time: f64,
    horizon: f64,
    max_events: u64,
    rng: &mut R,
) -> Result<StepPath> {
    if n0 == 0 {
        return Err(Error::Config("initial lineage count must be >= 1".into()));
    }
    if !(horizon.is_finite() && horizon >= start_time) {
        return Err(Error::Config(format!(
            "horizon {horizon} precedes start time {start_time}"
        )));
    }
    let (theta, sigma) = (params.theta(), params.sigma());
    let mut times = Vec::new();
    let mut levels = Vec::new();
    let mut level = n0;
    let mut time = start_time;
    loop {
        let a = level as f64;
        let death = 0.5 * a * (a - 1.0 + theta);
        let birth = 0.5 * a * sigma;
        let total = death + birth;
        if total <= 0.0 {
            break;
        }
        let e: f64 = Exp1.sample(rng);
        let next = time + e / total;
        if next > horizon {
            break;
        }
        if times.len() as u64 >= max_events {
            return Err(Error::EventCapExceeded {
                cap: max_events,
                time,
            });
        }
        time = next;
        level = if rng.random::<f64>() * total < death {
            level - 1
        } else {
            level + 1
        };
        times.push(time);
        levels.push(level);
    }
    Ok(StepPath::from_parts(start_time, horizon, n0, times, levels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng::stream_for;

    fn p(theta: f64, sigma: f64) -> ModelParams {
        ModelParams::new(theta, sigma).unwrap()
    }

    #[test]
    fn total_rate_arithmetic() {
        let rates = arrival_rates([5, 3, 4], &p(1.0, 1.0));
        assert_eq!(rates.total(), 14.0);
        assert_eq!(rates.pair / rates.total(), 10.0 / 14.0);
    }

    #[test]
    fn absorbed_state_has_no_events() {
        let mut rng = stream_for(0, 0);
        assert!(matches!(
            sample_arrival([1, 1, 1], &p(0.0, 0.0), &mut rng),
            Err(Error::Absorbed)
        ));
        // Kingman lineages keep coalescing after the mutating processes die out
        assert!(sample_arrival([3, 0, 0], &p(1.0, 1.0), &mut rng).is_ok());
        assert!(matches!(
            sample_arrival([1, 0, 0], &p(1.0, 1.0), &mut rng),
            Err(Error::Absorbed)
        ));
    }

    #[test]
    fn invalid_counts_are_rejected() {
        let mut rng = stream_for(0, 0);
        assert!(matches!(
            sample_arrival([2, 3, 3], &p(0.0, 0.0), &mut rng),
            Err(Error::InvalidCounts { .. })
        ));
        assert!(matches!(
            sample_arrival([5, 4, 3], &p(0.0, 0.0), &mut rng),
            Err(Error::InvalidCounts { .. })
        ));
    }

    #[test]
    fn two_lineages_always_coalesce_pair_one_two() {
        let mut rng = stream_for(3, 0);
        for _ in 0..100 {
            let (h, mark) = sample_arrival([2, 2, 2], &p(0.0, 0.0), &mut rng).unwrap();
            assert!(h > 0.0);
            assert_eq!(mark, Mark::PairCoalescence { i: 1, j: 2 });
        }
    }

    #[test]
    fn thinning_examples() {
        assert_eq!(
            apply_mark([5, 3, 4], Mark::PairCoalescence { i: 2, j: 4 }),
            ([4, 3, 3], [true, false, true])
        );
        assert_eq!(
            apply_mark([4, 3, 3], Mark::MutationKill { i: 2 }),
            ([4, 2, 2], [false, true, true])
        );
        assert_eq!(
            apply_mark([4, 2, 2], Mark::SelectionBranch { i: 1 }),
            ([4, 2, 3], [false, false, true])
        );
        assert_eq!(
            apply_mark([4, 2, 3], Mark::MutationKill { i: 3 }),
            ([4, 2, 2], [false, false, true])
        );
    }

    #[test]
    fn mark_frequencies_follow_rates() {
        let params = p(1.0, 1.0);
        let mut rng = stream_for(9, 0);
        let n = 200_000;
        let mut pairs = 0usize;
        let mut j_hist = [0usize; 6];
        for _ in 0..n {
            let (_, mark) = sample_arrival([5, 3, 4], &params, &mut rng).unwrap();
            if let Mark::PairCoalescence { i, j } = mark {
                assert!(1 <= i && i < j && j <= 5);
                pairs += 1;
                j_hist[j as usize] += 1;
            }
        }
        let frac = pairs as f64 / n as f64;
        let target = 10.0 / 14.0;
        let se = (target * (1.0 - target) / n as f64).sqrt();
        assert!((frac - target).abs() < 4.0 * se);
        // P(j = J) = (J-1)/10 among pairs
        for jj in 2..=5 {
            let q = (jj as f64 - 1.0) / 10.0;
            let f = j_hist[jj] as f64 / pairs as f64;
            let se = (q * (1.0 - q) / pairs as f64).sqrt();
            assert!((f - q).abs() < 4.0 * se, "j={jj}: {f} vs {q}");
        }
    }

    #[test]
    fn event_cap_is_enforced() {
        let mut rng = stream_for(1, 1);
        let stop = StopRule::all_at_level(1).with_event_cap(10);
        assert!(matches!(
            simulate_coupled(&p(0.0, 0.0), 100, 0.0, &stop, &mut rng),
            Err(Error::EventCapExceeded { .. })
        ));
    }

    #[test]
    fn rejects_bad_configuration() {
        let mut rng = stream_for(1, 1);
        assert!(
            simulate_coupled(&p(0.0, 0.0), 0, 0.0, &StopRule::all_at_level(1), &mut rng).is_err()
        );
        let none = StopRule {
            levels: [None; 3],
            horizon: None,
            max_events: 10,
        };
        assert!(simulate_coupled(&p(0.0, 0.0), 5, 0.0, &none, &mut rng).is_err());
    }

    #[test]
    fn selective_sampler_matches_coupled_marginal() {
        use crate::stats::estimate::Summary;
        let params = p(1.0, 2.0);
        let (n0, t, reps) = (40, 0.05, 20_000);
        let direct: Vec<f64> = (0..reps)
            .map(|r| {
                let mut rng = stream_for(5, r);
                let path =
                    simulate_selective_path(&params, n0, 0.0, t, DEFAULT_EVENT_CAP, &mut rng)
                        .unwrap();
                path.final_level() as f64
            })
            .collect();
        let coupled: Vec<f64> = (0..reps)
            .map(|r| {
                let mut rng = stream_for(6, r);
                let tr =
                    simulate_coupled(&params, n0, 0.0, &StopRule::horizon(t), &mut rng).unwrap();
                tr.final_counts()[2] as f64
            })
            .collect();
        let (a, b) = (Summary::of(&direct), Summary::of(&coupled));
        let se = a.stderr.hypot(b.stderr);
        assert!(
            (a.mean - b.mean).abs() < 4.0 * se,
            "{} vs {}",
            a.mean,
            b.mean
        );
        assert!((a.variance / b.variance - 1.0).abs() < 0.06);
    }

    #[test]
    fn selective_sampler_stops_at_horizon_and_absorption() {
        let mut rng = stream_for(2, 2);
        let path = simulate_selective_path(&p(0.0, 0.0), 30, 0.5, 1e6, DEFAULT_EVENT_CAP, &mut rng)
            .unwrap();
        assert_eq!(path.final_level(), 1);
        assert_eq!(path.jump_count(), 29);
        assert_eq!(path.end(), 1e6);
        assert!(simulate_selective_path(&p(0.0, 0.0), 30, 0.5, 1e6, 5, &mut rng).is_err());
        assert!(simulate_selective_path(&p(0.0, 0.0), 30, 0.5, 0.1, 5, &mut rng).is_err());
    }
}
