//! Likelihood ratio between a Hawkes law and the Poisson(ξ) law, its
//! envelope variant, and Monte Carlo checks of the associated identities
//! and exponential-moment bound.

use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::hawkes::{excess_compensator, intensity_at_events, simulate_hawkes_thinning, EventTimes, HawkesParams};
use crate::stats::{ols, LinearFit, MeanEstimate};
use crate::stream::{derive_stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodRatio {
    pub value: f64,
    pub log_value: f64,
    pub s: f64,
    pub lambda0: f64,
    pub n_events: usize,
}

fn check_path(params: &HawkesParams, events: &EventTimes, lambda0: f64, s: f64) -> Result<()> {
    params.check_lambda0(lambda0)?;
    if !(s.is_finite() && s >= 0.0) {
        return Err(invalid(format!("s must be finite and >= 0 (got {s})")));
    }
    if let Some(&last) = events.times().last() {
        if last > s {
            return Err(invalid(format!("event at {last} lies after s = {s}")));
        }
    }
    Ok(())
}

/// `L_s = Π_{T_j <= s} (λ_{T_j}/ξ) · exp(-∫_0^s (λ_u - ξ) du)`.
pub fn likelihood_ratio(params: &HawkesParams, events: &EventTimes, lambda0: f64, s: f64) -> Result<LikelihoodRatio> {
    check_path(params, events, lambda0, s)?;
    let xi = params.xi();
    let times = events.times();
    let log_prod: f64 = intensity_at_events(params, times, lambda0)
        .iter()
        .map(|l| (l / xi).ln())
        .sum();
    let log_value = log_prod - excess_compensator(params, times, lambda0, s);
    Ok(LikelihoodRatio {
        value: log_value.exp(),
        log_value,
        s,
        lambda0,
        n_events: times.len(),
    })
}

/// Envelope ratio `L̄_s`: after the first event the intensity in the product
/// is bounded above by restarting from `λ_0 + α`, and the one in the
/// compensator below by restarting from `ξ + α`.
pub fn likelihood_ratio_bar(
    params: &HawkesParams,
    events: &EventTimes,
    lambda0: f64,
    s: f64,
) -> Result<LikelihoodRatio> {
    check_path(params, events, lambda0, s)?;
    let times = events.times();
    let Some(&t1) = times.first() else {
        return likelihood_ratio(params, events, lambda0, s);
    };
    let (xi, alpha, beta) = (params.xi(), params.alpha(), params.beta());
    let rest: Vec<f64> = times[1..].iter().map(|t| t - t1).collect();
    let first = xi + (lambda0 - xi) * (-beta * t1).exp();
    let upper = intensity_at_events(params, &rest, lambda0 + alpha);
    let log_prod = (first / xi).ln() + upper.iter().map(|l| (l / xi).ln()).sum::<f64>();
    let lower = excess_compensator(params, &[], lambda0, t1) + excess_compensator(params, &rest, xi + alpha, s - t1);
    let log_value = log_prod - lower;
    Ok(LikelihoodRatio {
        value: log_value.exp(),
        log_value,
        s,
        lambda0,
        n_events: times.len(),
    })
}

/// One line of a verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    /// Target value or upper bound, depending on the check.
    pub bound: f64,
    pub pass: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadonNikodymReport {
    /// Mean of `1/L_s` over Hawkes paths.
    pub p_side: CheckReport,
    /// Mean of `L_s` over Poisson(ξ) paths.
    pub q_side: CheckReport,
}

const LANE_P: u64 = 1;
const LANE_Q: u64 = 2;
const LANE_MOMENT: u64 = 3;
const LANE_BAR: u64 = 4;

fn rep_stream(seed: u64, lane: u64, rep: usize) -> crate::stream::SeededStream {
    derive_stream(seed, Purpose::Girsanov, (lane << 40) | rep as u64)
}

fn check_reps(n_reps: usize) -> Result<()> {
    if n_reps < 100 {
        return Err(invalid(format!("need at least 100 replications (got {n_reps})")));
    }
    Ok(())
}

fn within_3se(name: String, est: MeanEstimate, target: f64) -> CheckReport {
    let pass = if est.std_error > 0.0 {
        est.within(target, 3.0)
    } else {
        (est.mean - target).abs() <= 1e-12 * target.abs().max(1.0)
    };
    CheckReport {
        name,
        estimate: est.mean,
        std_error: est.std_error,
        bound: target,
        pass,
        note: String::new(),
    }
}

/// Checks `E_P[1/L_s] = 1` and `E_Q[L_s] = 1` by simulation.
pub fn check_radon_nikodym(
    params: &HawkesParams,
    lambda0: f64,
    s: f64,
    n_reps: usize,
    seed: u64,
) -> Result<RadonNikodymReport> {
    check_reps(n_reps)?;
    params.check_lambda0(lambda0)?;
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid(format!("s must be > 0 (got {s})")));
    }
    let poisson = HawkesParams::new(params.xi(), 0.0, params.beta())?;

    let inv: Vec<f64> = (0..n_reps)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let ev = simulate_hawkes_thinning(params, lambda0, s, &mut rep_stream(seed, LANE_P, rep))?;
            Ok((-likelihood_ratio(params, &ev, lambda0, s)?.log_value).exp())
        })
        .collect::<Result<_>>()?;
    let direct: Vec<f64> = (0..n_reps)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let ev = simulate_hawkes_thinning(&poisson, poisson.xi(), s, &mut rep_stream(seed, LANE_Q, rep))?;
            Ok(likelihood_ratio(params, &ev, lambda0, s)?.value)
        })
        .collect::<Result<_>>()?;

    Ok(RadonNikodymReport {
        p_side: within_3se(format!("E_P[1/L] s={s}"), MeanEstimate::from_samples(&inv), 1.0),
        q_side: within_3se(format!("E_Q[L] s={s}"), MeanEstimate::from_samples(&direct), 1.0),
    })
}

/// Exponent `1 + 2/(1 - α/β)` shared by the admissible range and the bound.
fn moment_exponent(params: &HawkesParams) -> f64 {
    1.0 + 2.0 / (1.0 - params.branching_ratio())
}

/// Largest admissible `K`: `(β/(2α) + 1/2)^{1 + 2/(1-α/β)}`, infinite when `α = 0`.
pub fn max_moment_base(params: &HawkesParams) -> f64 {
    if params.alpha() == 0.0 {
        return f64::INFINITY;
    }
    (params.beta() / (2.0 * params.alpha()) + 0.5).powf(moment_exponent(params))
}

/// `log` of [`exp_moment_bound`]; finite even when the bound overflows.
pub fn exp_moment_log_bound(params: &HawkesParams, k: f64, t: f64, y0: f64) -> Result<f64> {
    let k_max = max_moment_base(params);
    if !(k > 1.0 && k <= k_max * (1.0 + 1e-12)) {
        return Err(invalid(format!("K = {k} outside the admissible range (1, {k_max}]")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("t must be finite and >= 0 (got {t})")));
    }
    if !(y0.is_finite() && y0 > 0.0) {
        return Err(invalid(format!("y0 must be finite and > 0 (got {y0})")));
    }
    Ok((k.powf(moment_exponent(params)) - 1.0) * t * y0.max(params.xi()))
}

/// Upper bound on `E[K^{N[0,t]} | λ_0 = y0]`:
/// `exp((K^{1+2/(1-α/β)} - 1) · t · max(y0, ξ))`.
pub fn exp_moment_bound(params: &HawkesParams, k: f64, t: f64, y0: f64) -> Result<f64> {
    Ok(exp_moment_log_bound(params, k, t, y0)?.exp())
}

/// Monte Carlo estimate of `E[K^{N[0,t]} | λ_0 = y0]` compared with the bound.
pub fn check_exp_moment(
    params: &HawkesParams,
    k: f64,
    t: f64,
    y0: f64,
    n_reps: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_reps(n_reps)?;
    let log_bound = exp_moment_log_bound(params, k, t, y0)?;
    params.check_lambda0(y0)?;
    let ln_k = k.ln();
    let samples: Vec<f64> = (0..n_reps)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let ev = simulate_hawkes_thinning(params, y0, t, &mut rep_stream(seed, LANE_MOMENT, rep))?;
            Ok((ev.len() as f64 * ln_k).exp())
        })
        .collect::<Result<_>>()?;
    let est = MeanEstimate::from_samples(&samples);
    let total: f64 = samples.iter().sum();
    let largest = samples.iter().cloned().fold(0.0, f64::max);
    let note = if largest > 0.1 * total {
        format!(
            "tail warning: largest sample is {:.1}% of the total",
            100.0 * largest / total
        )
    } else {
        String::new()
    };
    let lower = est.mean - 3.0 * est.std_error;
    Ok(CheckReport {
        name: format!("E[K^N] K={k} t={t} y0={y0}"),
        estimate: est.mean,
        std_error: est.std_error,
        bound: log_bound.exp(),
        pass: lower <= 0.0 || lower.ln() <= log_bound,
        note,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    /// `(s, E_Q[L̄_{T_1+s}])` for each probed `s`.
    pub points: Vec<(f64, MeanEstimate)>,
    /// Regression of the log-mean on `s`.
    pub fit: LinearFit,
    pub max_slope: f64,
    pub pass: bool,
}

/// Probes how fast `E_Q[L̄_{T_1+s} | λ_0 = y0]` grows with `s`, with `N`
/// a Poisson(ξ) process under `Q`.
pub fn probe_lbar_growth(
    params: &HawkesParams,
    y0: f64,
    shifts: &[f64],
    n_reps: usize,
    seed: u64,
    max_slope: f64,
) -> Result<GrowthReport> {
    check_reps(n_reps)?;
    params.check_lambda0(y0)?;
    if shifts.len() < 2 || shifts.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(invalid("need at least two positive shifts"));
    }
    let poisson = HawkesParams::new(params.xi(), 0.0, params.beta())?;
    let first_gap = Exp::new(params.xi()).map_err(|e| invalid(e.to_string()))?;
    let mut points = Vec::with_capacity(shifts.len());
    for (i, &s) in shifts.iter().enumerate() {
        let values: Vec<f64> = (0..n_reps)
            .into_par_iter()
            .map(|rep| -> Result<f64> {
                let mut rng = rep_stream(seed, LANE_BAR, (i << 24) | rep);
                let t1 = first_gap.sample(&mut rng);
                let tail = simulate_hawkes_thinning(&poisson, poisson.xi(), s, &mut rng)?;
                let mut times = vec![t1];
                times.extend(tail.times().iter().map(|u| t1 + u).filter(|&u| u > t1));
                let ev = EventTimes::new(times, t1 + s)?;
                Ok(likelihood_ratio_bar(params, &ev, y0, t1 + s)?.value)
            })
            .collect::<Result<_>>()?;
        points.push((s, MeanEstimate::from_samples(&values)));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.mean.ln()).collect();
    let fit = ols(&xs, &ys)?;
    Ok(GrowthReport {
        pass: fit.slope <= max_slope,
        points,
        fit,
        max_slope,
    })
}
