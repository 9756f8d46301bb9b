//! Path functionals of a lineage-count path `N`: the rescaled fluctuation
//! `X_eps`, the martingale `M`, the remainder `R`, the smoothed process `Y`
//! and the compensator of `L_eps`.
//!
//! With `X_s = s N_s / 2 - 1` the path satisfies, between its origin `o`
//! and any `t`,
//!
//! ```text
//! X_t - X_o + int_o^t X_s/s ds + (M_t - M_o) - R_t = 0
//! Y_t - Y_o + int_o^t Y_s/s ds + (M_t - M_o)       = 0
//! ```
//!
//! where `R_t = -int X_s^2/s ds + (1-theta+sigma)/4 int s N_s ds` and
//! `t Y_t = o Y_o - int_o^t u dM_u`. All integrals are evaluated in closed
//! form on each constant piece of the path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stats::estimate::CompensatedSum;
use crate::trajectory::StepPath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    XEps,
    M,
    R,
    Y,
    YEps,
    LEpsCompensator,
    SupDeviation,
}

/// Values of one functional on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathFunctional {
    pub kind: FunctionalKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub epsilon: Option<f64>,
    pub source: u64,
}

impl PathFunctional {
    pub fn with_source(mut self, id: u64) -> Self {
        self.source = id;
        self
    }
}

/// Everything known about the path at one time `t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub level: u32,
    /// `t N_t / 2 - 1`.
    pub x: f64,
    pub m: f64,
    pub r: f64,
    /// `int_o^t X_s/s ds`.
    pub int_x_over_s: f64,
    pub y: f64,
    /// `int_start^t Y_s/s ds`.
    pub int_y_over_s: f64,
    /// `int_0^t s^4 N_s(N_s-1+theta+sigma)/2 ds`.
    pub compensator: f64,
    /// Origin of the singular integrals and the values there.
    pub origin: f64,
    pub x_origin: f64,
    pub m_origin: f64,
    pub y_start: f64,
    /// Extremes over event endpoints in `[start, t]`.
    pub max_x: f64,
    pub max_abs_x: f64,
    pub max_abs_x_minus_y: f64,
    pub max_m_sq: f64,
    pub max_y_sq: f64,
    pub max_abs_r: f64,
}

impl Snapshot {
    /// Left side of the decomposition identity; zero up to rounding.
    pub fn decomposition_residual(&self) -> f64 {
        self.x - self.x_origin + self.int_x_over_s + (self.m - self.m_origin) - self.r
    }

    /// Left side of the `Y` identity; zero up to rounding.
    pub fn y_identity_residual(&self) -> f64 {
        self.y - self.y_start + self.int_y_over_s + self.m
    }
}

/// Which running quantities a scan maintains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScanMode {
    /// Everything in [`Snapshot`].
    #[default]
    Full,
    /// Only `X`, `Y`, the compensator and their running maxima; the other
    /// snapshot fields are NaN.
    XYOnly,
}

struct Scanner {
    full: bool,
    theta: f64,
    sigma: f64,
    now: f64,
    level: u32,
    origin: Option<f64>,
    x_origin: f64,
    m_origin: f64,
    y_start: f64,
    m_jump: CompensatedSum,
    m_drift: CompensatedSum,
    r: CompensatedSum,
    ix: CompensatedSum,
    l: CompensatedSum,
    iy: CompensatedSum,
    lc: CompensatedSum,
    max_x: f64,
    max_abs_x: f64,
    max_abs_xy: f64,
    max_m_sq: f64,
    max_y_sq: f64,
    max_abs_r: f64,
}

impl Scanner {
    fn new(params: &ModelParams, path: &StepPath, mode: ScanMode) -> Self {
        let start = path.start();
        let n0 = path.initial();
        let x0 = start * n0 as f64 / 2.0 - 1.0;
        let mut l = CompensatedSum::new();
        // Y is started equal to X at a positive start time
        l.add(start * x0);
        let mut s = Self {
            full: mode == ScanMode::Full,
            theta: params.theta(),
            sigma: params.sigma(),
            now: start,
            level: n0,
            origin: (start > 0.0).then_some(start),
            x_origin: x0,
            m_origin: 0.0,
            y_start: if start > 0.0 { x0 } else { 0.0 },
            m_jump: CompensatedSum::new(),
            m_drift: CompensatedSum::new(),
            r: CompensatedSum::new(),
            ix: CompensatedSum::new(),
            l,
            iy: CompensatedSum::new(),
            lc: CompensatedSum::new(),
            max_x: f64::NEG_INFINITY,
            max_abs_x: 0.0,
            max_abs_xy: 0.0,
            max_m_sq: 0.0,
            max_y_sq: 0.0,
            max_abs_r: 0.0,
        };
        s.observe();
        s
    }

    fn x(&self) -> f64 {
        self.now * self.level as f64 / 2.0 - 1.0
    }

    fn y(&self) -> f64 {
        if self.now > 0.0 {
            self.l.value() / self.now
        } else {
            0.0
        }
    }

    fn m(&self) -> f64 {
        self.m_jump.value() - self.m_drift.value()
    }

    fn observe(&mut self) {
        let x = self.x();
        let y = self.y();
        self.max_abs_xy = self.max_abs_xy.max((x - y).abs());
        if !self.full {
            return;
        }
        let m = self.m();
        let r = self.r.value();
        self.max_x = self.max_x.max(x);
        self.max_abs_x = self.max_abs_x.max(x.abs());
        self.max_m_sq = self.max_m_sq.max(m * m);
        self.max_y_sq = self.max_y_sq.max(y * y);
        self.max_abs_r = self.max_abs_r.max(r.abs());
    }

    /// Integrate the constant piece `[now, b]`.
    fn advance(&mut self, b: f64) {
        let a = self.now;
        let d = b - a;
        if d <= 0.0 {
            return;
        }
        let n = self.level as f64;
        let drift = 0.5 * n * (n - 1.0 + self.theta - self.sigma);
        let sum_ab = a + b;
        let sq = d * sum_ab;
        if self.full {
            self.m_drift.add(0.25 * drift * sq);
            let iy = if a > 0.0 {
                let l_a = self.l.value();
                (l_a - drift * a * a * a / 6.0) * d / (a * b) + drift * sq / 12.0
            } else {
                drift * sq / 12.0
            };
            self.iy.add(iy);
        }
        self.l.add(drift * d * (a * a + a * b + b * b) / 6.0);
        if self.full && a > 0.0 {
            let log = (d / a).ln_1p();
            self.ix.add(n * d / 2.0 - log);
            self.r.add(
                -(n * n * sq / 8.0 - n * d + log) + (1.0 - self.theta + self.sigma) * n * sq / 8.0,
            );
        }
        let (a2, b2) = (a * a, b * b);
        let quartic = a2 * a2 + a2 * a * b + a2 * b2 + a * b2 * b + b2 * b2;
        self.lc
            .add(0.5 * n * (n - 1.0 + self.theta + self.sigma) * d * quartic / 5.0);
        self.now = b;
        self.observe();
    }

    fn jump(&mut self, before: u32, after: u32) {
        let s = self.now;
        let units = before.abs_diff(after) as f64;
        let sign = if after < before { 1.0 } else { -1.0 };
        if self.full {
            self.m_jump.add(sign * 0.5 * s * units);
        }
        self.l.add(-sign * 0.5 * s * s * units);
        self.level = after;
        if self.origin.is_none() {
            self.origin = Some(s);
            self.x_origin = self.x();
            self.m_origin = self.m();
        }
        self.observe();
    }

    fn snapshot(&self) -> Snapshot {
        let full = |v: f64| if self.full { v } else { f64::NAN };
        Snapshot {
            t: self.now,
            level: self.level,
            x: self.x(),
            m: full(self.m()),
            r: full(self.r.value()),
            int_x_over_s: full(self.ix.value()),
            y: self.y(),
            int_y_over_s: full(self.iy.value()),
            compensator: self.lc.value(),
            origin: self.origin.unwrap_or(f64::NAN),
            x_origin: self.x_origin,
            m_origin: full(self.m_origin),
            y_start: self.y_start,
            max_x: full(self.max_x),
            max_abs_x: full(self.max_abs_x),
            max_abs_x_minus_y: self.max_abs_xy,
            max_m_sq: full(self.max_m_sq),
            max_y_sq: full(self.max_y_sq),
            max_abs_r: full(self.max_abs_r),
        }
    }
}

/// Walk the path once and return a [`Snapshot`] at every time in `times`
/// (raw time units, nondecreasing, inside the path's window).
pub fn scan_path(path: &StepPath, params: &ModelParams, times: &[f64]) -> Result<Vec<Snapshot>> {
    scan_path_with(path, params, times, ScanMode::Full)
}

/// [`scan_path`] maintaining only what `mode` asks for.
pub fn scan_path_with(
    path: &StepPath,
    params: &ModelParams,
    times: &[f64],
    mode: ScanMode,
) -> Result<Vec<Snapshot>> {
    for (i, &t) in times.iter().enumerate() {
        if t < path.start() || t > path.end() || !t.is_finite() {
            return Err(Error::PartialPath {
                time: t,
                start: path.start(),
                end: path.end(),
            });
        }
        if i > 0 && t < times[i - 1] {
            return Err(Error::Config("scan times must be nondecreasing".into()));
        }
    }
    let mut sc = Scanner::new(params, path, mode);
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    for (s, before, after) in path.jumps() {
        while next < times.len() && times[next] < s {
            sc.advance(times[next]);
            out.push(sc.snapshot());
            next += 1;
        }
        if next == times.len() {
            return Ok(out);
        }
        sc.advance(s);
        sc.jump(before, after);
    }
    while next < times.len() {
        sc.advance(times[next]);
        out.push(sc.snapshot());
        next += 1;
    }
    Ok(out)
}

fn raw_times(grid: &[f64], eps: f64) -> Vec<f64> {
    grid.iter().map(|&t| eps * t).collect()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "epsilon must be positive, got {eps}"
        )))
    }
}

/// `X_eps(t) = eps^{-1/2} (eps t N_{eps t} / 2 - 1)`, with `X_eps(0) = 0`.
pub fn x_eps_path(path: &StepPath, eps: f64, grid: &[f64]) -> Result<PathFunctional> {
    check_eps(eps)?;
    let scale = eps.sqrt().recip();
    let values = grid
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok(0.0);
            }
            let s = eps * t;
            let n = path.level_at(s)?;
            Ok(scale * (s * n as f64 / 2.0 - 1.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PathFunctional {
        kind: FunctionalKind::XEps,
        grid: grid.to_vec(),
        values,
        epsilon: Some(eps),
        source: 0,
    })
}

fn functional_from_scan(
    path: &StepPath,
    params: &ModelParams,
    grid: &[f64],
    kind: FunctionalKind,
    pick: impl Fn(&Snapshot) -> f64,
) -> Result<PathFunctional> {
    let snaps = scan_path(path, params, grid)?;
    let values = snaps.iter().map(pick).collect();
    Ok(PathFunctional {
        kind,
        grid: grid.to_vec(),
        values,
        epsilon: None,
        source: 0,
    })
}

/// `M_t = (1/2)[sum_down s - sum_up s] - (1/2) int s (mu(N_s) - lambda(N_s)) ds`
/// on raw times `grid`, integrated from the path start.
pub fn martingale_path(
    path: &StepPath,
    params: &ModelParams,
    grid: &[f64],
) -> Result<PathFunctional> {
    functional_from_scan(path, params, grid, FunctionalKind::M, |s| s.m)
}

/// `R_t` on raw times `grid`, integrated from the path origin (the start
/// if positive, otherwise the first jump).
pub fn residual_path(
    path: &StepPath,
    params: &ModelParams,
    grid: &[f64],
) -> Result<PathFunctional> {
    functional_from_scan(path, params, grid, FunctionalKind::R, |s| s.r)
}

/// `Y` on raw times `eps * grid` and `Y_eps(t) = eps^{-1/2} Y_{eps t}` on
/// `grid`.
pub fn y_paths(
    path: &StepPath,
    params: &ModelParams,
    eps: f64,
    grid: &[f64],
) -> Result<(PathFunctional, PathFunctional)> {
    check_eps(eps)?;
    let raw = raw_times(grid, eps);
    let snaps = scan_path(path, params, &raw)?;
    let y: Vec<f64> = snaps.iter().map(|s| s.y).collect();
    let scale = eps.sqrt().recip();
    let y_eps = y.iter().map(|v| scale * v).collect();
    Ok((
        PathFunctional {
            kind: FunctionalKind::Y,
            grid: raw,
            values: y,
            epsilon: None,
            source: 0,
        },
        PathFunctional {
            kind: FunctionalKind::YEps,
            grid: grid.to_vec(),
            values: y_eps,
            epsilon: Some(eps),
            source: 0,
        },
    ))
}

/// `<L_eps>_t = eps^{-3}/4 int_0^{eps t} s^4 N_s(N_s-1+theta+sigma)/2 ds`.
pub fn l_eps_compensator(path: &StepPath, params: &ModelParams, eps: f64, t: f64) -> Result<f64> {
    check_eps(eps)?;
    let snap = scan_path(path, params, &[eps * t])?;
    Ok(snap[0].compensator / (4.0 * eps * eps * eps))
}

/// `<L_eps>` on a grid of rescaled times.
pub fn l_eps_compensator_path(
    path: &StepPath,
    params: &ModelParams,
    eps: f64,
    grid: &[f64],
) -> Result<PathFunctional> {
    check_eps(eps)?;
    let snaps = scan_path(path, params, &raw_times(grid, eps))?;
    let c = 4.0 * eps * eps * eps;
    let values = snaps.iter().map(|s| s.compensator / c).collect();
    Ok(PathFunctional {
        kind: FunctionalKind::LEpsCompensator,
        grid: grid.to_vec(),
        values,
        epsilon: Some(eps),
        source: 0,
    })
}

/// `sup_{start <= s <= t} (s N_s / 2 - 1)^k`, from both endpoints of every
/// constant piece. For `k = 0` the value is 1.
pub fn sup_deviation(path: &StepPath, t: f64, k: u32) -> Result<f64> {
    let snap = scan_path(path, &ModelParams::kingman(), &[t])?;
    Ok(sup_power(&snap[0], k))
}

/// `sup (X_s)^k` from the running extremes of a snapshot.
pub fn sup_power(snap: &Snapshot, k: u32) -> f64 {
    if k % 2 == 0 {
        snap.max_abs_x.powi(k as i32)
    } else {
        snap.max_x.powi(k as i32)
    }
}

/// `sup_s (s N_s/2 - 1)^k` for each time of `grid` (raw units).
pub fn sup_deviation_path(path: &StepPath, grid: &[f64], k: u32) -> Result<PathFunctional> {
    let snaps = scan_path(path, &ModelParams::kingman(), grid)?;
    let values = snaps.iter().map(|s| sup_power(s, k)).collect();
    Ok(PathFunctional {
        kind: FunctionalKind::SupDeviation,
        grid: grid.to_vec(),
        values,
        epsilon: None,
        source: 0,
    })
}

/// `sup_{t <= t_max} |X_eps(t) - Y_eps(t)|` over event endpoints.
pub fn sup_x_minus_y(path: &StepPath, params: &ModelParams, eps: f64, t_max: f64) -> Result<f64> {
    check_eps(eps)?;
    let snap = scan_path(path, params, &[eps * t_max])?;
    Ok(snap[0].max_abs_x_minus_y / eps.sqrt())
}

/// Largest decomposition residual over raw times `grid`.
pub fn decomposition_residual(path: &StepPath, params: &ModelParams, grid: &[f64]) -> Result<f64> {
    let snaps = scan_path(path, params, grid)?;
    Ok(snaps
        .iter()
        .filter(|s| s.t >= s.origin)
        .map(|s| s.decomposition_residual().abs())
        .fold(0.0, f64::max))
}

/// Largest `Y` identity residual over raw times `grid`.
pub fn y_identity_residual(path: &StepPath, params: &ModelParams, grid: &[f64]) -> Result<f64> {
    let snaps = scan_path(path, params, grid)?;
    Ok(snaps
        .iter()
        .map(|s| s.y_identity_residual().abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate_coupled, Coordinate, StopRule};
    use crate::stats::rng::stream_for;

    fn p(theta: f64, sigma: f64) -> ModelParams {
        ModelParams::new(theta, sigma).unwrap()
    }

    /// Path following `N_s = round(2/s)` with unit jumps, started at `start`.
    fn two_over_s(start: f64, end: f64) -> StepPath {
        let n0 = (2.0 / start).round() as u32;
        let mut jumps = Vec::new();
        let mut n = n0;
        while n > 1 {
            // jump from n to n-1 at 2/(n - 1/2)
            let t = 2.0 / (n as f64 - 0.5);
            if t > end {
                break;
            }
            if t > start {
                jumps.push((t, n - 1));
            }
            n -= 1;
        }
        StepPath::new(start, end, n0, &jumps).unwrap()
    }

    #[test]
    fn x_eps_is_zero_at_zero_and_near_zero_on_centred_path() {
        let path = two_over_s(1e-4, 1.0);
        let grid = [0.0, 1.0, 10.0, 50.0];
        let f = x_eps_path(&path, 1e-2, &grid).unwrap();
        assert_eq!(f.values[0], 0.0);
        for (t, v) in grid.iter().zip(&f.values).skip(1) {
            // |sN_s/2 - 1| is about s/4 on this path
            assert!(v.abs() <= 0.3 * 0.1 * t, "{t}: {v}");
        }
        assert!(matches!(
            x_eps_path(&path, 1e-2, &[200.0]),
            Err(Error::PartialPath { .. })
        ));
    }

    #[test]
    fn no_events_gives_pure_drift() {
        let params = p(0.5, 2.0);
        let path = StepPath::new(0.0, 1.0, 7, &[]).unwrap();
        let t = 0.3;
        let drift = params.death_rate(7) - params.birth_rate(7);
        let m = martingale_path(&path, &params, &[t]).unwrap().values[0];
        assert!((m - (-0.5 * drift * t * t / 2.0)).abs() < 1e-15);
        let (y, _) = y_paths(&path, &params, 1.0, &[t]).unwrap();
        assert!((y.values[0] - drift * t * t / 6.0).abs() < 1e-15);
        let lc = l_eps_compensator(&path, &params, 1.0, t).unwrap();
        assert!((lc - params.holding_rate(7) * t.powi(5) / 5.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn residual_second_term_vanishes_when_theta_is_one_plus_sigma() {
        // only -int X^2/s remains, whatever theta and sigma are
        let path = two_over_s(1e-3, 0.5);
        let a = residual_path(&path, &p(1.0, 0.0), &[0.5]).unwrap().values[0];
        let b = residual_path(&path, &p(3.0, 2.0), &[0.5]).unwrap().values[0];
        assert!(a <= 0.0);
        assert_eq!(a, b);
        let c = residual_path(&path, &p(0.0, 0.0), &[0.5]).unwrap().values[0];
        assert!(c > a);
    }

    #[test]
    fn first_integral_of_r_vanishes_on_exact_inverse_path() {
        // with N_s = 2/s the integrand (sN/2 - 1)^2/s is 0; the lattice
        // version is O(s) small
        let path = two_over_s(1e-4, 0.1);
        let r = residual_path(&path, &p(1.0, 0.0), &[0.1]).unwrap().values[0];
        assert!(r.abs() < 0.1 * 0.1, "{r}");
    }

    #[test]
    fn identities_hold_on_simulated_paths() {
        for (i, &(theta, sigma)) in [(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)].iter().enumerate() {
            let params = p(theta, sigma);
            let mut rng = stream_for(11, i as u64);
            let tr =
                simulate_coupled(&params, 2000, 1e-3, &StopRule::horizon(0.2), &mut rng).unwrap();
            let path = tr.path(Coordinate::Selection);
            let grid: Vec<f64> = (1..=40).map(|j| 0.005 * j as f64).collect();
            assert!(decomposition_residual(&path, &params, &grid).unwrap() < 1e-10);
            assert!(y_identity_residual(&path, &params, &grid).unwrap() < 1e-10);
            // from time 0 the origin is the first event
            let tr0 =
                simulate_coupled(&params, 2000, 0.0, &StopRule::horizon(0.2), &mut rng).unwrap();
            let path0 = tr0.path(Coordinate::Selection);
            assert!(decomposition_residual(&path0, &params, &grid).unwrap() < 1e-9);
            assert!(y_identity_residual(&path0, &params, &grid).unwrap() < 1e-10);
        }
    }

    #[test]
    fn x_minus_y_is_continuous_across_jumps() {
        let params = p(1.0, 1.0);
        let mut rng = stream_for(5, 0);
        let tr = simulate_coupled(&params, 500, 4e-3, &StopRule::horizon(0.05), &mut rng).unwrap();
        let path = tr.path(Coordinate::Selection);
        let times: Vec<f64> = path.jump_times().iter().take(200).copied().collect();
        let eps = 1e-9;
        let before: Vec<f64> = times.iter().map(|t| t - eps).collect();
        let a = scan_path(&path, &params, &before).unwrap();
        let b = scan_path(&path, &params, &times).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!(((u.x - u.y) - (v.x - v.y)).abs() < 1e-6);
        }
    }

    #[test]
    fn sup_uses_both_endpoints() {
        // X rises linearly within a piece; at even powers the left endpoint
        // can carry the sup
        let path = StepPath::new(0.1, 1.0, 10, &[(0.2, 5)]).unwrap();
        // X: 0.1*10/2-1 = -0.5 at start, 0 at 0.2-, 0.2*5/2-1 = -0.5 after, -0.25 at 0.3
        assert!((sup_deviation(&path, 0.3, 2).unwrap() - 0.25).abs() < 1e-15);
        assert!((sup_deviation(&path, 0.3, 1).unwrap() - 0.0).abs() < 1e-15);
        assert!((sup_deviation(&path, 0.15, 1).unwrap() - (-0.25)).abs() < 1e-15);
    }

    #[test]
    fn compensator_on_inverse_path_is_near_cubic() {
        // N ~ 2/s gives <L_eps>_t ~ t^3/6
        let eps = 1e-4;
        let path = two_over_s(1e-5, 2e-4);
        let v = l_eps_compensator(&path, &ModelParams::kingman(), eps, 1.0).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 0.01, "{v}");
        let f =
            l_eps_compensator_path(&path, &ModelParams::kingman(), eps, &[0.25, 0.5, 1.0]).unwrap();
        assert!(f.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn reduced_scan_agrees_with_full_scan() {
        let params = ModelParams::new(1.0, 2.0).unwrap();
        let mut rng = stream_for(8, 0);
        let path =
            crate::engine::simulate_selective_path(&params, 3000, 5e-4, 0.02, 1 << 30, &mut rng)
                .unwrap();
        let times = [1e-3, 5e-3, 0.02];
        let full = scan_path(&path, &params, &times).unwrap();
        let lean = scan_path_with(&path, &params, &times, ScanMode::XYOnly).unwrap();
        for (a, b) in full.iter().zip(&lean) {
            assert_eq!(
                (a.x, a.y, a.compensator, a.max_abs_x_minus_y),
                (b.x, b.y, b.compensator, b.max_abs_x_minus_y)
            );
            assert!(b.m.is_nan() && b.max_abs_r.is_nan());
        }
    }
}
