//! Euler–Maruyama simulation of the Hawkes-driven jump diffusion `X` and
//! assembly of the joint trajectory `(X, λ)`.
//!
//! Hawkes events are simulated exactly first. `X` is then integrated on the
//! timeline obtained by merging the reporting grid with the event instants,
//! so jumps land at their true times rather than at the next grid point.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::hawkes::{
    default_burn_in, intensity_path_unchecked, sample_stationary_lambda0, thinning_with_terminal, EventTimes,
    HawkesParams,
};

pub type CoeffFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Declared bounds accompanying the coefficient functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffBounds {
    /// `a_1`: strict upper bound on `|a|`.
    pub jump_bound: f64,
    /// `σ_1`: upper bound on `σ`.
    pub vol_bound: f64,
    /// `r`: radius beyond which the drift is mean-reverting.
    pub recurrence_radius: f64,
    /// `d`: strength of mean reversion, `x b(x) <= -d x²` for `|x| > r`.
    pub recurrence_strength: f64,
}

/// Drift `b`, volatility `σ` and jump coefficient `a` of `X`.
///
/// A missing jump coefficient means `a ≡ 0`: events then leave `X` untouched
/// and the Euler scheme runs on the reporting grid alone.
#[derive(Clone)]
pub struct DiffusionCoeffs {
    drift: CoeffFn,
    volatility: CoeffFn,
    jump: Option<CoeffFn>,
    bounds: CoeffBounds,
}

impl fmt::Debug for DiffusionCoeffs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionCoeffs")
            .field("has_jump", &self.jump.is_some())
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl DiffusionCoeffs {
    pub fn new(drift: CoeffFn, volatility: CoeffFn, jump: Option<CoeffFn>, bounds: CoeffBounds) -> Self {
        DiffusionCoeffs {
            drift,
            volatility,
            jump,
            bounds,
        }
    }

    /// `b(x) = -rate·x`, `σ ≡ sigma`, `a ≡ jump` (`jump = 0` drops the jumps).
    pub fn linear_drift(rate: f64, sigma: f64, jump: f64) -> Self {
        let jump_fn: Option<CoeffFn> = if jump == 0.0 {
            None
        } else {
            Some(Arc::new(move |_| jump))
        };
        DiffusionCoeffs {
            drift: Arc::new(move |x| -rate * x),
            volatility: Arc::new(move |_| sigma),
            jump: jump_fn,
            bounds: CoeffBounds {
                jump_bound: if jump == 0.0 { 1.0 } else { 2.0 * jump.abs() },
                vol_bound: sigma.abs(),
                recurrence_radius: 0.0,
                recurrence_strength: rate,
            },
        }
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn volatility(&self, x: f64) -> f64 {
        (self.volatility)(x)
    }

    pub fn jump(&self, x: f64) -> f64 {
        self.jump.as_ref().map_or(0.0, |a| a(x))
    }

    pub fn has_jump(&self) -> bool {
        self.jump.is_some()
    }

    pub fn bounds(&self) -> CoeffBounds {
        self.bounds
    }
}

/// A pointwise failure of the coefficient assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub x: f64,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at x = {}: {}", self.x, self.message)
    }
}

/// Spot-checks boundedness of `σ` and `a` and drift recurrence on `probes`.
pub fn validate_coefficients(coeffs: &DiffusionCoeffs, probes: &[f64]) -> Result<Vec<Violation>> {
    if probes.is_empty() {
        return Err(invalid("probe grid must be non-empty"));
    }
    let b = coeffs.bounds;
    let mut out = Vec::new();
    let mut flag = |x: f64, message: String| out.push(Violation { x, message });
    for &x in probes {
        let s = coeffs.volatility(x);
        let s2 = s * s;
        if !(s2 > 0.0) {
            flag(x, "σ² > 0 fails".into());
        }
        if !(s2 <= b.vol_bound * b.vol_bound) {
            flag(x, format!("σ² <= σ₁² fails (σ² = {s2}, σ₁ = {})", b.vol_bound));
        }
        let a = coeffs.jump(x);
        if !(a.abs() < b.jump_bound) {
            flag(x, format!("|a| < a₁ fails (a = {a}, a₁ = {})", b.jump_bound));
        }
        if x.abs() > b.recurrence_radius {
            let lhs = x * coeffs.drift(x);
            if !(lhs <= -b.recurrence_strength * x * x) {
                flag(
                    x,
                    format!("x·b(x) <= -d·x² fails (x·b(x) = {lhs}, d = {})", b.recurrence_strength),
                );
            }
        }
    }
    Ok(out)
}

/// Uniform reporting grid `k·Δ`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    step: f64,
    n_steps: usize,
}

impl SimGrid {
    /// `horizon` must be an integer multiple of `step` (to 1e-9 relative).
    pub fn new(horizon: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid(format!("step must be finite and > 0 (got {step})")));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(invalid(format!("horizon must be finite and >= 0 (got {horizon})")));
        }
        let n = (horizon / step).round();
        if (n * step - horizon).abs() > 1e-9 * horizon.max(step) {
            return Err(invalid(format!(
                "horizon {horizon} is not a multiple of the step {step}"
            )));
        }
        Ok(SimGrid {
            step,
            n_steps: n as usize,
        })
    }

    pub fn from_steps(step: f64, n_steps: usize) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid(format!("step must be finite and > 0 (got {step})")));
        }
        Ok(SimGrid { step, n_steps })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.step
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }
}

/// Joint path of `(X, λ)` on a [`SimGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: SimGrid,
    pub x_values: Vec<f64>,
    /// Left-limit intensities (or a reconstruction of them).
    pub lambda_values: Vec<f64>,
    pub events: EventTimes,
    pub x0: f64,
    pub lambda0: f64,
}

impl Trajectory {
    pub fn new(
        grid: SimGrid,
        x_values: Vec<f64>,
        lambda_values: Vec<f64>,
        events: EventTimes,
        x0: f64,
        lambda0: f64,
    ) -> Result<Self> {
        let n = grid.n_steps() + 1;
        if x_values.len() != n || lambda_values.len() != n {
            return Err(invalid(format!(
                "trajectory needs {n} samples (got {} x, {} lambda)",
                x_values.len(),
                lambda_values.len()
            )));
        }
        Ok(Trajectory {
            grid,
            x_values,
            lambda_values,
            events,
            x0,
            lambda0,
        })
    }

    /// Same path with `λ` replaced, e.g. by a reconstructed intensity.
    pub fn with_lambda(&self, lambda_values: Vec<f64>) -> Result<Self> {
        Trajectory::new(
            self.grid,
            self.x_values.clone(),
            lambda_values,
            self.events.clone(),
            self.x0,
            self.lambda0,
        )
    }

    /// Appends `other` after `self`, shifting its clock by this horizon.
    /// The junction sample is taken from `other`.
    pub fn concat(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.grid.step() != other.grid.step() {
            return Err(invalid("cannot concatenate trajectories with different steps"));
        }
        let n = self.grid.n_steps();
        let grid = SimGrid::from_steps(self.grid.step(), n + other.grid.n_steps())?;
        let mut x = self.x_values[..n].to_vec();
        x.extend_from_slice(&other.x_values);
        let mut l = self.lambda_values[..n].to_vec();
        l.extend_from_slice(&other.lambda_values);
        let shift = self.grid.horizon();
        let mut times = self.events.times().to_vec();
        times.extend(other.events.times().iter().map(|t| t + shift));
        times.dedup();
        let events = EventTimes::new(times, grid.horizon())?;
        Trajectory::new(grid, x, l, events, self.x0, self.lambda0)
    }
}

/// Source of Brownian increments over consecutive, non-overlapping intervals.
pub trait BrownianIncrements {
    fn increment(&mut self, t0: f64, t1: f64) -> f64;
}

/// Independent `N(0, t1 - t0)` draws, one per call.
#[derive(Debug, Clone)]
pub struct GaussianIncrements<R> {
    rng: R,
}

impl<R: Rng> GaussianIncrements<R> {
    pub fn new(rng: R) -> Self {
        GaussianIncrements { rng }
    }
}

impl<R: Rng> BrownianIncrements for GaussianIncrements<R> {
    fn increment(&mut self, t0: f64, t1: f64) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        z * (t1 - t0).sqrt()
    }
}

/// One fixed Brownian path, sampled lazily by Brownian-bridge interpolation.
///
/// Querying the same path at different resolutions returns consistent values,
/// which couples Euler runs with different steps.
#[derive(Debug, Clone)]
pub struct BrownianPath<R> {
    rng: R,
    known: BTreeMap<u64, f64>,
}

impl<R: Rng> BrownianPath<R> {
    pub fn new(rng: R) -> Self {
        let mut known = BTreeMap::new();
        known.insert(0f64.to_bits(), 0.0);
        BrownianPath { rng, known }
    }

    /// `W(t)` for `t >= 0`.
    pub fn value(&mut self, t: f64) -> f64 {
        // Non-negative floats order like their bit patterns.
        let key = t.max(0.0).to_bits();
        if let Some(&w) = self.known.get(&key) {
            return w;
        }
        let (&lk, &lw) = self.known.range(..key).next_back().expect("W(0) is always known");
        let lt = f64::from_bits(lk);
        let z: f64 = self.rng.sample(StandardNormal);
        let w = match self.known.range(key..).next() {
            Some((&rk, &rw)) => {
                let rt = f64::from_bits(rk);
                let frac = (t - lt) / (rt - lt);
                let var = (t - lt) * (rt - t) / (rt - lt);
                lw + frac * (rw - lw) + z * var.sqrt()
            }
            None => lw + z * (t - lt).sqrt(),
        };
        self.known.insert(key, w);
        w
    }
}

impl<R: Rng> BrownianIncrements for BrownianPath<R> {
    fn increment(&mut self, t0: f64, t1: f64) -> f64 {
        let w0 = self.value(t0);
        self.value(t1) - w0
    }
}

/// Integrates `X` for given events and noise, and samples `λ` on the grid.
pub fn simulate_with_events<B: BrownianIncrements + ?Sized>(
    coeffs: &DiffusionCoeffs,
    params: &HawkesParams,
    x0: f64,
    lambda0: f64,
    grid: SimGrid,
    events: EventTimes,
    noise: &mut B,
) -> Result<Trajectory> {
    params.check_lambda0(lambda0)?;
    if !x0.is_finite() {
        return Err(invalid(format!("x0 must be finite (got {x0})")));
    }
    let n = grid.n_steps();
    let mut x_values = Vec::with_capacity(n + 1);
    let mut x = x0;
    let ev = events.times();
    let mut next = ev.partition_point(|&t| t <= 0.0);

    let euler = |x: f64, dt: f64, dw: f64| x + coeffs.drift(x) * dt + coeffs.volatility(x) * dw;

    for k in 0..n {
        let t0 = grid.time(k);
        let t1 = grid.time(k + 1);
        x_values.push(x);
        let mut cur = t0;
        if coeffs.has_jump() {
            // Events exactly at t0 jump after the sample is recorded.
            while next < ev.len() && ev[next] <= t0 {
                x += coeffs.jump(x);
                next += 1;
            }
            while next < ev.len() && ev[next] < t1 {
                let te = ev[next];
                if te > cur {
                    x = euler(x, te - cur, noise.increment(cur, te));
                    cur = te;
                }
                x += coeffs.jump(x);
                next += 1;
            }
        }
        x = euler(x, t1 - cur, noise.increment(cur, t1));
        if !x.is_finite() {
            return Err(Error::Simulation {
                step: k + 1,
                t: t1,
                reason: "X became non-finite".into(),
            });
        }
    }
    x_values.push(x);

    let times = grid.times();
    let lambda_values = intensity_path_unchecked(params, ev, lambda0, &times).values;
    Trajectory::new(grid, x_values, lambda_values, events, x0, lambda0)
}

/// Simulates Hawkes events exactly, then `X` by Euler–Maruyama.
///
/// Two child seeds are drawn from `rng` up front, one for the events and one
/// for the Brownian increments, so the Brownian path does not depend on the
/// Hawkes parameters.
pub fn simulate_jump_diffusion<R: Rng + ?Sized>(
    coeffs: &DiffusionCoeffs,
    params: &HawkesParams,
    x0: f64,
    lambda0: f64,
    grid: SimGrid,
    rng: &mut R,
) -> Result<Trajectory> {
    let event_seed: u64 = rng.random();
    let noise_seed: u64 = rng.random();
    let mut event_rng = ChaCha8Rng::seed_from_u64(event_seed);
    let (events, _) = thinning_with_terminal(params, lambda0, grid.horizon(), &mut event_rng)?;
    let mut noise = GaussianIncrements::new(ChaCha8Rng::seed_from_u64(noise_seed));
    simulate_with_events(coeffs, params, x0, lambda0, grid, events, &mut noise)
}

/// How to reach the stationary regime before recording a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurnIn {
    /// Hawkes-only warm-up from `λ = ξ`; `None` means `200/β`.
    pub lambda: Option<f64>,
    /// Joint `(X, λ)` warm-up that follows, integrated at the run's step.
    pub x: f64,
    /// Starting value of `X` for the joint warm-up.
    pub x_init: f64,
}

impl Default for BurnIn {
    fn default() -> Self {
        BurnIn {
            lambda: None,
            x: 10.0,
            x_init: 0.0,
        }
    }
}

/// Draws `(X_0, λ_0)` approximately from the invariant law.
pub fn stationary_start<R: Rng + ?Sized>(
    coeffs: &DiffusionCoeffs,
    params: &HawkesParams,
    step: f64,
    burn: &BurnIn,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let lambda_burn = burn.lambda.unwrap_or_else(|| default_burn_in(params));
    let lambda_b = sample_stationary_lambda0(params, lambda_burn, rng)?;
    if burn.x <= 0.0 {
        return Ok((burn.x_init, lambda_b));
    }
    let n = (burn.x / step).ceil().max(1.0) as usize;
    let grid = SimGrid::from_steps(step, n)?;
    let warm = simulate_jump_diffusion(coeffs, params, burn.x_init, lambda_b, grid, rng)?;
    let x0 = *warm.x_values.last().expect("non-empty");
    let l0 = warm.lambda_values.last().expect("non-empty").max(params.xi());
    Ok((x0, l0))
}

/// A trajectory started from [`stationary_start`].
pub fn simulate_stationary<R: Rng + ?Sized>(
    coeffs: &DiffusionCoeffs,
    params: &HawkesParams,
    grid: SimGrid,
    burn: &BurnIn,
    rng: &mut R,
) -> Result<Trajectory> {
    let (x0, l0) = stationary_start(coeffs, params, grid.step(), burn, rng)?;
    simulate_jump_diffusion(coeffs, params, x0, l0, grid, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::intensity_at;
    use crate::stats::ks_one_sample;
    use crate::stream::{derive_stream, Purpose};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn p() -> HawkesParams {
        HawkesParams::new(0.5, 0.4, 2.0).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = SimGrid::new(100.0, 1e-3).unwrap();
        assert_eq!(g.n_steps(), 100_000);
        assert!((g.horizon() - 100.0).abs() < 1e-9);
        assert!(SimGrid::new(1.0, 0.3).is_err());
        assert!(SimGrid::new(1.0, 0.0).is_err());
    }

    #[test]
    fn validation_examples() {
        let probes: Vec<f64> = (-100..=100).map(|i| i as f64 / 10.0).collect();
        let ok = DiffusionCoeffs::linear_drift(6.0, 0.1, 1.0);
        assert!(validate_coefficients(&ok, &probes).unwrap().is_empty());

        let flat = DiffusionCoeffs::linear_drift(6.0, 0.0, 1.0);
        let v = validate_coefficients(&flat, &probes).unwrap();
        assert!(!v.is_empty());
        assert!(v.iter().all(|v| v.message.contains("σ² > 0 fails")));

        let explosive = DiffusionCoeffs::new(
            Arc::new(|x| x),
            Arc::new(|_| 0.1),
            None,
            CoeffBounds {
                jump_bound: 1.0,
                vol_bound: 0.1,
                recurrence_radius: 0.0,
                recurrence_strength: 6.0,
            },
        );
        let v = validate_coefficients(&explosive, &[2.0]).unwrap();
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("x·b(x)"));
        assert!(validate_coefficients(&ok, &[]).is_err());
    }

    #[test]
    fn deterministic_ode() {
        let coeffs = DiffusionCoeffs::linear_drift(6.0, 0.0, 0.0);
        let grid = SimGrid::new(1.0, 1e-3).unwrap();
        let mut rng = derive_stream(1, Purpose::Custom(10), 0);
        let traj = simulate_jump_diffusion(&coeffs, &p(), 1.0, 0.5, grid, &mut rng).unwrap();
        let exact = (-6.0f64).exp();
        let got = *traj.x_values.last().unwrap();
        // Explicit Euler on x' = -θx gives (1 - θΔ)^n exactly.
        let euler = (1.0 - 6.0e-3f64).powi(1000);
        assert!(((got - euler) / euler).abs() < 1e-12);
        // Global error ≈ θ²Δt/2 relative, i.e. first order in Δ.
        let rel = ((got - exact) / exact).abs();
        assert!(rel < 36.0 * 1e-3 / 2.0 * 1.05, "{rel}");
    }

    #[test]
    fn ou_marginal_is_gaussian() {
        let coeffs = DiffusionCoeffs::linear_drift(6.0, 0.1, 0.0);
        let grid = SimGrid::new(3000.0, 1e-3).unwrap();
        let mut rng = derive_stream(2, Purpose::Custom(10), 0);
        let traj = simulate_jump_diffusion(&coeffs, &p(), 0.0, 0.5, grid, &mut rng).unwrap();
        // One sample per time unit is far beyond the 1/6 correlation time.
        let samples: Vec<f64> = traj.x_values.iter().step_by(1000).skip(5).copied().collect();
        let law = Normal::new(0.0, (0.01f64 / 12.0).sqrt()).unwrap();
        let test = ks_one_sample(&samples, |x| law.cdf(x)).unwrap();
        assert!(test.p_value > 0.01, "{test:?}");
    }

    #[test]
    fn reference_configuration_stays_finite() {
        let coeffs = DiffusionCoeffs::linear_drift(6.0, 0.1, 1.0);
        let grid = SimGrid::new(100.0, 1e-3).unwrap();
        let mut rng = derive_stream(3, Purpose::Custom(10), 0);
        let traj = simulate_stationary(&coeffs, &p(), grid, &BurnIn::default(), &mut rng).unwrap();
        assert_eq!(traj.x_values.len(), 100_001);
        assert!(traj.x_values.iter().all(|x| x.is_finite()));
        assert!(traj.lambda_values.iter().all(|&l| l >= 0.5));
    }

    #[test]
    fn non_finite_state_is_reported() {
        let coeffs = DiffusionCoeffs::new(
            Arc::new(|x| x * x * 1e3),
            Arc::new(|_| 0.1),
            None,
            CoeffBounds {
                jump_bound: 1.0,
                vol_bound: 0.1,
                recurrence_radius: 0.0,
                recurrence_strength: 0.0,
            },
        );
        let grid = SimGrid::new(10.0, 0.1).unwrap();
        let mut rng = derive_stream(4, Purpose::Custom(10), 0);
        let err = simulate_jump_diffusion(&coeffs, &p(), 10.0, 0.5, grid, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Simulation { .. }), "{err}");
    }

    #[test]
    fn jumps_equal_coefficient_at_left_limit() {
        // σ ≡ 0 and a(x) = 1 + x: the jump at T_i is exactly a(X(T_i-)).
        let coeffs = DiffusionCoeffs::new(
            Arc::new(|x| -x),
            Arc::new(|_| 0.0),
            Some(Arc::new(|x| 1.0 + x)),
            CoeffBounds {
                jump_bound: 10.0,
                vol_bound: 0.0,
                recurrence_radius: 0.0,
                recurrence_strength: 1.0,
            },
        );
        let events = EventTimes::new(vec![0.25], 1.0).unwrap();
        let grid = SimGrid::new(1.0, 0.5).unwrap();
        let mut noise = GaussianIncrements::new(derive_stream(5, Purpose::Custom(10), 0));
        let traj = simulate_with_events(&coeffs, &p(), 1.0, 0.5, grid, events, &mut noise).unwrap();
        let left = 1.0 - 0.25;
        let right = left + (1.0 + left);
        let at_half = right - right * 0.25;
        assert!((traj.x_values[1] - at_half).abs() < 1e-15);
    }

    #[test]
    fn x_path_ignores_hawkes_params_without_jumps() {
        let coeffs = DiffusionCoeffs::linear_drift(6.0, 0.1, 0.0);
        let grid = SimGrid::new(20.0, 1e-2).unwrap();
        let q = HawkesParams::new(1.5, 1.0, 3.0).unwrap();
        let a = simulate_jump_diffusion(
            &coeffs,
            &p(),
            0.0,
            0.5,
            grid,
            &mut derive_stream(6, Purpose::Custom(10), 0),
        )
        .unwrap();
        let b = simulate_jump_diffusion(
            &coeffs,
            &q,
            0.0,
            1.5,
            grid,
            &mut derive_stream(6, Purpose::Custom(10), 0),
        )
        .unwrap();
        assert_eq!(a.x_values, b.x_values);
        assert_ne!(a.events, b.events);
    }

    #[test]
    fn lambda_samples_match_direct_intensity() {
        let coeffs = DiffusionCoeffs::linear_drift(6.0, 0.1, 1.0);
        let grid = SimGrid::new(20.0, 0.05).unwrap();
        let mut rng = derive_stream(7, Purpose::Custom(10), 0);
        let traj = simulate_jump_diffusion(&coeffs, &p(), 0.0, 1.2, grid, &mut rng).unwrap();
        for k in (0..=grid.n_steps()).step_by(7) {
            let direct = intensity_at(&p(), &traj.events, 1.2, grid.time(k)).unwrap();
            assert!((traj.lambda_values[k] - direct).abs() < 1e-12 * direct);
        }
    }

    fn terminal<R: Rng>(step: f64, path: &mut BrownianPath<R>, events: &EventTimes) -> f64 {
        let coeffs = DiffusionCoeffs::linear_drift(6.0, 0.1, 1.0);
        let grid = SimGrid::new(2.0, step).unwrap();
        let traj = simulate_with_events(&coeffs, &p(), 0.0, 0.5, grid, events.clone(), path).unwrap();
        *traj.x_values.last().unwrap()
    }

    #[test]
    fn coupled_refinement_is_first_order() {
        let reps = 40;
        let mut rms = [0.0; 2];
        for (i, dt) in [0.02, 0.01].into_iter().enumerate() {
            let mut acc = 0.0;
            for r in 0..reps {
                let mut rng = derive_stream(8, Purpose::Custom(12), r);
                let events = crate::hawkes::simulate_hawkes_thinning(&p(), 0.5, 2.0, &mut rng).unwrap();
                let mut path = BrownianPath::new(derive_stream(r, Purpose::Custom(11), 0));
                let d = terminal(dt, &mut path, &events) - terminal(dt / 2.0, &mut path, &events);
                acc += d * d;
            }
            rms[i] = (acc / reps as f64).sqrt();
        }
        // O(Δ): halving the step roughly halves the coupled difference.
        assert!(rms[0] < 0.02 * 6.0, "{rms:?}");
        assert!(rms[1] < 0.75 * rms[0], "{rms:?}");
    }

    #[test]
    fn concat_shifts_events() {
        let coeffs = DiffusionCoeffs::linear_drift(6.0, 0.1, 1.0);
        let grid = SimGrid::new(5.0, 0.01).unwrap();
        let a = simulate_jump_diffusion(
            &coeffs,
            &p(),
            0.0,
            0.5,
            grid,
            &mut derive_stream(9, Purpose::Custom(10), 0),
        )
        .unwrap();
        let b = simulate_jump_diffusion(
            &coeffs,
            &p(),
            0.0,
            0.5,
            grid,
            &mut derive_stream(9, Purpose::Custom(10), 1),
        )
        .unwrap();
        let c = a.concat(&b).unwrap();
        assert_eq!(c.x_values.len(), 1001);
        assert_eq!(c.events.len(), a.events.len() + b.events.len());
        assert_eq!(c.x_values[500], b.x_values[0]);
    }
}
