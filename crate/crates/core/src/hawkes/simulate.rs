//! Exact samplers: Ogata thinning from a given `λ_0`, and the stationary
//! immigrant–offspring (cluster) construction.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use super::{EventTimes, HawkesParams};
use crate::error::{invalid, Result};

/// Burn-in length `200/β` used to reach the stationary regime.
pub fn default_burn_in(params: &HawkesParams) -> f64 {
    200.0 / params.beta()
}

/// Immigration look-back window `50/β` for the cluster sampler.
pub fn default_cluster_window(params: &HawkesParams) -> f64 {
    50.0 / params.beta()
}

/// Samples `N` on `[0, horizon]` given `λ_0` by Ogata thinning.
pub fn simulate_hawkes_thinning<R: Rng + ?Sized>(
    params: &HawkesParams,
    lambda0: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<EventTimes> {
    thinning_with_terminal(params, lambda0, horizon, rng).map(|(ev, _)| ev)
}

/// Thinning sampler that also returns the left-limit intensity at `horizon`.
///
/// Between events the intensity decays towards `ξ`, so its right limit at the
/// last accepted or rejected candidate dominates it until the next event.
pub fn thinning_with_terminal<R: Rng + ?Sized>(
    params: &HawkesParams,
    lambda0: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<(EventTimes, f64)> {
    params.check_lambda0(lambda0)?;
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(invalid(format!("horizon must be finite and >= 0 (got {horizon})")));
    }
    let (xi, alpha, beta) = (params.xi(), params.alpha(), params.beta());
    let mut times = Vec::with_capacity((1.5 * params.stationary_mean_intensity() * horizon) as usize + 8);
    let mut t = 0.0;
    // λ(t+) - ξ
    let mut excess = lambda0 - xi;
    loop {
        let bound = xi + excess;
        let w: f64 = Exp1.sample(rng);
        let candidate = t + w / bound;
        if candidate > horizon {
            break;
        }
        excess *= (-beta * (candidate - t)).exp();
        t = candidate;
        let u: f64 = rng.random();
        if u * bound <= xi + excess {
            // Guard against a repeated instant from floating-point saturation.
            if times.last().is_none_or(|&last| last < t) {
                times.push(t);
            }
            excess += alpha;
        }
    }
    let terminal = xi + excess * (-beta * (horizon - t)).exp();
    Ok((EventTimes::from_sorted(times, horizon), terminal))
}

/// Draws `λ_0` from (approximately) the stationary law by running the
/// thinning sampler from `λ_0 = ξ` for `burn_in` time units.
pub fn sample_stationary_lambda0<R: Rng + ?Sized>(params: &HawkesParams, burn_in: f64, rng: &mut R) -> Result<f64> {
    if !(burn_in.is_finite() && burn_in > 0.0) {
        return Err(invalid(format!("burn-in must be finite and > 0 (got {burn_in})")));
    }
    let (_, terminal) = thinning_with_terminal(params, params.xi(), burn_in, rng)?;
    Ok(terminal.max(params.xi()))
}

/// Stationary sample on `[0, horizon]` from the cluster representation with
/// the default look-back window.
pub fn simulate_hawkes_cluster<R: Rng + ?Sized>(
    params: &HawkesParams,
    horizon: f64,
    rng: &mut R,
) -> Result<EventTimes> {
    simulate_cluster_process(params.xi(), params, horizon, default_cluster_window(params), rng)
}

/// Cluster construction with an arbitrary homogeneous immigration rate.
///
/// Immigrants arrive as a Poisson process of rate `immigration` on
/// `[-window, horizon]`; each point born at `d` has Poisson(`α/β`) children
/// at `d + Exp(β)`. Points outside `[0, horizon]` are dropped from the output
/// but those before `0` still reproduce.
pub fn simulate_cluster_process<R: Rng + ?Sized>(
    immigration: f64,
    params: &HawkesParams,
    horizon: f64,
    window: f64,
    rng: &mut R,
) -> Result<EventTimes> {
    if !(immigration.is_finite() && immigration >= 0.0) {
        return Err(invalid(format!("immigration rate must be >= 0 (got {immigration})")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) || !(window.is_finite() && window >= 0.0) {
        return Err(invalid("horizon and window must be finite and >= 0"));
    }
    let start = -window;
    let span = horizon - start;
    let n_immigrants = poisson_count(immigration * span, rng)?;
    let mut queue: Vec<f64> = (0..n_immigrants).map(|_| start + rng.random::<f64>() * span).collect();
    let offspring_mean = params.branching_ratio();
    let beta = params.beta();
    let mut points = Vec::with_capacity(queue.len() * 2);
    while let Some(d) = queue.pop() {
        if d > horizon {
            continue;
        }
        if d >= 0.0 {
            points.push(d);
        }
        let children = poisson_count(offspring_mean, rng)?;
        for _ in 0..children {
            let gap: f64 = Exp1.sample(rng);
            queue.push(d + gap / beta);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    Ok(EventTimes::from_sorted(points, horizon))
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| invalid(format!("poisson({mean}): {e}")))?;
    Ok(dist.sample(rng) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{chi_square_two_sample, MeanEstimate};
    use crate::stream::{derive_stream, Purpose};

    fn p() -> HawkesParams {
        HawkesParams::new(0.5, 0.4, 2.0).unwrap()
    }

    #[test]
    fn zero_horizon_is_empty() {
        let mut rng = derive_stream(1, Purpose::Custom(1), 0);
        assert!(simulate_hawkes_thinning(&p(), 0.5, 0.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn poisson_degenerate_count() {
        let params = HawkesParams::new(0.5, 0.0, 2.0).unwrap();
        let counts: Vec<f64> = (0..400)
            .map(|r| {
                let mut rng = derive_stream(2, Purpose::Custom(1), r);
                simulate_hawkes_thinning(&params, 0.5, 1000.0, &mut rng).unwrap().len() as f64
            })
            .collect();
        let est = MeanEstimate::from_samples(&counts);
        assert!(est.within(500.0, 3.0), "{est:?}");
    }

    #[test]
    fn stationary_thinning_mean_rate() {
        let counts: Vec<f64> = (0..400)
            .map(|r| {
                let mut rng = derive_stream(3, Purpose::Custom(1), r);
                let l0 = sample_stationary_lambda0(&p(), 100.0, &mut rng).unwrap();
                simulate_hawkes_thinning(&p(), l0, 50.0, &mut rng).unwrap().len() as f64 / 50.0
            })
            .collect();
        let est = MeanEstimate::from_samples(&counts);
        assert!(est.within(0.625, 3.0), "{est:?}");
    }

    #[test]
    fn cluster_without_immigrants_is_empty() {
        let mut rng = derive_stream(4, Purpose::Custom(1), 0);
        let ev = simulate_cluster_process(0.0, &p(), 100.0, 25.0, &mut rng).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn cluster_mean_rate() {
        let rates: Vec<f64> = (0..200)
            .map(|r| {
                let mut rng = derive_stream(5, Purpose::Custom(1), r);
                simulate_hawkes_cluster(&p(), 500.0, &mut rng).unwrap().len() as f64 / 500.0
            })
            .collect();
        let est = MeanEstimate::from_samples(&rates);
        assert!(est.within(0.625, 3.0), "{est:?}");
    }

    #[test]
    fn cluster_and_thinning_agree_on_short_window() {
        let n = 5000;
        let horizon = 5.0;
        let a: Vec<u64> = (0..n)
            .map(|r| {
                let mut rng = derive_stream(6, Purpose::Custom(2), r);
                let l0 = sample_stationary_lambda0(&p(), default_burn_in(&p()), &mut rng).unwrap();
                simulate_hawkes_thinning(&p(), l0, horizon, &mut rng).unwrap().len() as u64
            })
            .collect();
        let b: Vec<u64> = (0..n)
            .map(|r| {
                let mut rng = derive_stream(6, Purpose::Custom(3), r);
                simulate_hawkes_cluster(&p(), horizon, &mut rng).unwrap().len() as u64
            })
            .collect();
        let test = chi_square_two_sample(&a, &b).unwrap();
        assert!(test.p_value > 0.01, "{test:?}");
    }

    #[test]
    fn stationary_lambda0_properties() {
        let poisson = HawkesParams::new(0.5, 0.0, 2.0).unwrap();
        let mut rng = derive_stream(7, Purpose::Custom(1), 0);
        assert_eq!(sample_stationary_lambda0(&poisson, 50.0, &mut rng).unwrap(), 0.5);
        assert!(sample_stationary_lambda0(&p(), 0.0, &mut rng).is_err());

        let draws: Vec<f64> = (0..2000)
            .map(|r| {
                let mut rng = derive_stream(7, Purpose::Custom(2), r);
                sample_stationary_lambda0(&p(), 200.0, &mut rng).unwrap()
            })
            .collect();
        assert!(draws.iter().all(|&v| v >= 0.5));
        let est = MeanEstimate::from_samples(&draws);
        assert!(est.within(0.625, 3.0), "{est:?}");
    }

    #[test]
    fn thinning_output_is_valid_event_set() {
        let mut rng = derive_stream(8, Purpose::Custom(1), 0);
        let ev = simulate_hawkes_thinning(&p(), 3.0, 200.0, &mut rng).unwrap();
        assert!(EventTimes::new(ev.times().to_vec(), 200.0).is_ok());
    }
}
