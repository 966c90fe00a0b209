//! Linear exponential Hawkes process: parameters, event sets, conditional
//! intensity and exact samplers.
//!
//! Intensities are left-continuous: the value reported at an event instant is
//! the pre-jump left limit, and the post-jump value is that plus `α`.

mod simulate;

pub use simulate::{
    default_burn_in, default_cluster_window, sample_stationary_lambda0, simulate_cluster_process,
    simulate_hawkes_cluster, simulate_hawkes_thinning, thinning_with_terminal,
};

use crate::error::{invalid, Result};

/// Baseline `ξ`, jump size `α` and decay `β` of the intensity kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HawkesParams {
    xi: f64,
    alpha: f64,
    beta: f64,
}

impl HawkesParams {
    /// Validates `ξ > 0`, `α ≥ 0`, `β > 0` and `α/β < 1`.
    pub fn new(xi: f64, alpha: f64, beta: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(xi.is_finite() && xi > 0.0) {
            problems.push(format!("baseline xi must be finite and > 0 (got {xi})"));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            problems.push(format!("jump size alpha must be finite and >= 0 (got {alpha})"));
        }
        if !(beta.is_finite() && beta > 0.0) {
            problems.push(format!("decay beta must be finite and > 0 (got {beta})"));
        }
        if problems.is_empty() && alpha / beta >= 1.0 {
            problems.push(format!(
                "branching ratio alpha/beta = {} >= 1 violates the subcritical (non-explosion) condition",
                alpha / beta
            ));
        }
        if problems.is_empty() {
            Ok(HawkesParams { xi, alpha, beta })
        } else {
            Err(invalid(problems.join("; ")))
        }
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Mean number of direct offspring per event, `α/β ∈ [0, 1)`.
    pub fn branching_ratio(&self) -> f64 {
        self.alpha / self.beta
    }

    /// Stationary mean intensity `ξ / (1 - α/β)`.
    pub fn stationary_mean_intensity(&self) -> f64 {
        self.xi / (1.0 - self.branching_ratio())
    }

    pub(crate) fn check_lambda0(&self, lambda0: f64) -> Result<()> {
        if !lambda0.is_finite() || lambda0 < self.xi {
            return Err(invalid(format!(
                "initial intensity lambda0 = {lambda0} must be finite and >= xi = {}",
                self.xi
            )));
        }
        Ok(())
    }
}

/// Strictly increasing jump times of `N` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTimes {
    times: Vec<f64>,
    horizon: f64,
}

impl EventTimes {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(invalid(format!("horizon must be finite and >= 0 (got {horizon})")));
        }
        for (i, &t) in times.iter().enumerate() {
            if !(t.is_finite() && (0.0..=horizon).contains(&t)) {
                return Err(invalid(format!("event {i} at t = {t} lies outside [0, {horizon}]")));
            }
            if i > 0 && times[i - 1] >= t {
                return Err(invalid(format!(
                    "event times must be strictly increasing (t[{}] = {} >= t[{i}] = {t})",
                    i - 1,
                    times[i - 1]
                )));
            }
        }
        Ok(EventTimes { times, horizon })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    /// Samplers produce sorted, in-range output; skip the O(n) re-check.
    pub(crate) fn from_sorted(times: Vec<f64>, horizon: f64) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        EventTimes { times, horizon }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of events in `(a, b]`.
    pub fn count(&self, a: f64, b: f64) -> usize {
        if b <= a {
            return 0;
        }
        let lo = self.times.partition_point(|&t| t <= a);
        let hi = self.times.partition_point(|&t| t <= b);
        hi - lo
    }

    /// Events in `[0, s]`, as a new event set with horizon `s`.
    pub fn truncate(&self, s: f64) -> EventTimes {
        let end = self.times.partition_point(|&t| t <= s);
        EventTimes {
            times: self.times[..end].to_vec(),
            horizon: s,
        }
    }

    pub fn into_times(self) -> Vec<f64> {
        self.times
    }
}

/// Intensity sampled on an ordered set of instants.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub lambda0: f64,
}

/// `λ_t` by direct summation over the events strictly before `t`.
pub fn intensity_at(params: &HawkesParams, events: &EventTimes, lambda0: f64, t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("time must be finite and >= 0 (got {t})")));
    }
    params.check_lambda0(lambda0)?;
    let (xi, alpha, beta) = (params.xi, params.alpha, params.beta);
    let excitation: f64 = events
        .times()
        .iter()
        .take_while(|&&ti| ti < t)
        .map(|&ti| alpha * (-beta * (t - ti)).exp())
        .sum();
    Ok(xi + (lambda0 - xi) * (-beta * t).exp() + excitation)
}

/// `λ` on a sorted grid in `O(|grid| + |events|)`.
pub fn intensity_path(params: &HawkesParams, events: &EventTimes, lambda0: f64, grid: &[f64]) -> Result<IntensityPath> {
    params.check_lambda0(lambda0)?;
    check_grid(grid)?;
    Ok(intensity_path_unchecked(params, events.times(), lambda0, grid))
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if let Some(&first) = grid.first() {
        if !(first.is_finite() && first >= 0.0) {
            return Err(invalid(format!("grid must start at a finite t >= 0 (got {first})")));
        }
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1]) || !w[1].is_finite()) {
        return Err(invalid("grid must be sorted and finite"));
    }
    Ok(())
}

/// Recursion behind [`intensity_path`]; `lambda0` may be any finite value
/// (the reconstructed intensity allows `λ̃_0 < ξ̂`).
pub(crate) fn intensity_path_unchecked(
    params: &HawkesParams,
    events: &[f64],
    lambda0: f64,
    grid: &[f64],
) -> IntensityPath {
    let (xi, alpha, beta) = (params.xi, params.alpha, params.beta);
    let mut values = Vec::with_capacity(grid.len());
    // Excitation just after the most recent processed event, anchored there.
    let mut anchor = 0.0;
    let mut excitation = 0.0;
    let mut next = 0;
    for &t in grid {
        while next < events.len() && events[next] < t {
            let te = events[next];
            excitation = excitation * (-beta * (te - anchor)).exp() + alpha;
            anchor = te;
            next += 1;
        }
        let decayed = if next == 0 {
            0.0
        } else {
            excitation * (-beta * (t - anchor)).exp()
        };
        values.push(xi + (lambda0 - xi) * (-beta * t).exp() + decayed);
    }
    IntensityPath {
        grid: grid.to_vec(),
        values,
        lambda0,
    }
}

/// Left-limit intensities `λ_{T_i}` at every event, in `O(n)`.
pub(crate) fn intensity_at_events(params: &HawkesParams, events: &[f64], lambda0: f64) -> Vec<f64> {
    let (xi, alpha, beta) = (params.xi, params.alpha, params.beta);
    let mut out = Vec::with_capacity(events.len());
    let mut acc = 0.0;
    let mut prev: Option<f64> = None;
    for &t in events {
        if let Some(p) = prev {
            acc = (-beta * (t - p)).exp() * (acc + alpha);
        }
        out.push(xi + (lambda0 - xi) * (-beta * t).exp() + acc);
        prev = Some(t);
    }
    out
}

/// `∫_0^s (λ_u - ξ) du` in closed form, counting events strictly before `s`.
pub(crate) fn excess_compensator(params: &HawkesParams, events: &[f64], lambda0: f64, s: f64) -> f64 {
    let (xi, alpha, beta) = (params.xi, params.alpha, params.beta);
    let initial = (lambda0 - xi) / beta * (-(-beta * s).exp_m1());
    let excited: f64 = events
        .iter()
        .take_while(|&&t| t < s)
        .map(|&t| -(-beta * (s - t)).exp_m1())
        .sum();
    initial + alpha / beta * excited
}
