//! Kernel density estimators of the invariant density of `(X, λ)` and of the
//! intensity marginal, the plug-in variant on a reconstructed intensity, and
//! rate-optimal bandwidth rules.
//!
//! Time integrals are left-endpoint Riemann sums on the simulation grid.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::diffusion::Trajectory;
use crate::error::{invalid, Result};
use crate::hawkes::IntensityPath;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Kernel functions `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// Standard normal density (moment 1 vanishes).
    Gaussian,
    /// `0.75 (1 - u²)` on `[-1, 1]` (moment 1 vanishes).
    Epanechnikov,
    /// Gaussian multiplied by a Hermite polynomial so that moments
    /// `1..=order` vanish.
    GaussianOrder(u32),
}

impl Kernel {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Kernel::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::GaussianOrder(order) => hermite_correction(order, u) * INV_SQRT_2PI * (-0.5 * u * u).exp(),
        }
    }

    /// `(1/h) K(z/h)` without validating `h`.
    #[inline]
    pub fn scaled(&self, h: f64, z: f64) -> f64 {
        self.eval(z / h) / h
    }

    /// Highest `M` with `∫ K(u) u^i du = 0` for all `1 <= i <= M`.
    pub fn order(&self) -> u32 {
        match *self {
            Kernel::Gaussian | Kernel::Epanechnikov => 1,
            Kernel::GaussianOrder(m) => {
                let r = m / 2 + 1;
                2 * r - 1
            }
        }
    }

    /// Radius of the support (`∞` for Gaussian-based kernels).
    pub fn support_radius(&self) -> f64 {
        match self {
            Kernel::Epanechnikov => 1.0,
            _ => f64::INFINITY,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        matches!(self, Kernel::Gaussian | Kernel::Epanechnikov) || matches!(self, Kernel::GaussianOrder(m) if *m <= 1)
    }

    /// `∫ K(u) u^i du`, by composite Simpson on the (truncated) support.
    pub fn moment(&self, i: u32) -> f64 {
        let radius = self.support_radius().min(16.0);
        let panels = 40_000;
        let h = 2.0 * radius / panels as f64;
        let f = |u: f64| self.eval(u) * u.powi(i as i32);
        let mut sum = f(-radius) + f(radius);
        for k in 1..panels {
            let u = -radius + k as f64 * h;
            sum += if k % 2 == 1 { 4.0 } else { 2.0 } * f(u);
        }
        sum * h / 3.0
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Gaussian => write!(f, "gaussian"),
            Kernel::Epanechnikov => write!(f, "epanechnikov"),
            Kernel::GaussianOrder(m) => write!(f, "gaussian:{m}"),
        }
    }
}

impl FromStr for Kernel {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => match other.strip_prefix("gaussian:").map(str::parse::<u32>) {
                Some(Ok(m)) if m >= 1 => Ok(Kernel::GaussianOrder(m)),
                _ => Err(invalid(format!(
                    "unknown kernel `{other}` (expected gaussian, epanechnikov or gaussian:<order>)"
                ))),
            },
        }
    }
}

/// `Σ_{k<r} (-1)^k He_{2k}(u) / (2^k k!)` with `r = order/2 + 1`.
fn hermite_correction(order: u32, u: f64) -> f64 {
    let r = order / 2 + 1;
    let (mut he_prev, mut he) = (1.0, u); // He_0, He_1
    let mut total = 1.0;
    let mut coef = 1.0;
    for n in 1..(2 * r - 1) {
        // advance to He_{n+1}
        let next = u * he - n as f64 * he_prev;
        he_prev = he;
        he = next;
        if (n + 1) % 2 == 0 {
            let k = n.div_ceil(2);
            coef *= -1.0 / (2.0 * k as f64);
            total += coef * he;
        }
    }
    total
}

/// Kernel together with the bandwidths in the `x` and `y` directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    kernel: Kernel,
    h1: f64,
    h2: f64,
}

impl KernelSpec {
    /// Checks `h1, h2 > 0` and, numerically, `∫K = 1` and the vanishing
    /// moments claimed by the kernel's order.
    pub fn new(kernel: Kernel, h1: f64, h2: f64) -> Result<Self> {
        check_bandwidth(h1)?;
        check_bandwidth(h2)?;
        check_kernel(kernel)?;
        Ok(KernelSpec { kernel, h1, h2 })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn order(&self) -> u32 {
        self.kernel.order()
    }

    pub fn support_radius(&self) -> f64 {
        self.kernel.support_radius()
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn h2(&self) -> f64 {
        self.h2
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid(format!("bandwidth must be finite and > 0 (got {h})")));
    }
    Ok(())
}

fn check_kernel(kernel: Kernel) -> Result<()> {
    let mass = kernel.moment(0);
    if (mass - 1.0).abs() > 1e-8 {
        return Err(invalid(format!("kernel {kernel} integrates to {mass}, not 1")));
    }
    for i in 1..=kernel.order() {
        let m = kernel.moment(i);
        if m.abs() > 1e-8 {
            return Err(invalid(format!("kernel {kernel}: moment {i} = {m} does not vanish")));
        }
    }
    Ok(())
}

/// `𝕂_h(z) = (1/h) K(z/h)`.
pub fn kernel_eval(kernel: Kernel, h: f64, z: f64) -> Result<f64> {
    check_bandwidth(h)?;
    Ok(kernel.scaled(h, z))
}

/// Where an estimate was evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalPoint {
    Joint { x: f64, y: f64 },
    Intensity { y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResult {
    pub value: f64,
    pub point: EvalPoint,
    pub kernel: Kernel,
    pub h1: Option<f64>,
    pub h2: f64,
    /// Time window `[start, end]` actually integrated.
    pub window: (f64, f64),
}

/// Left Riemann average of `f(k)` over `k in first..n`, normalised by the
/// length of `[first·Δ, n·Δ]`.
fn window_average(step: f64, first: usize, n: usize, f: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    for k in first..n {
        sum += f(k);
    }
    sum * step / ((n - first) as f64 * step)
}

fn first_index_at_or_after(step: f64, n: usize, t_min: f64) -> usize {
    let k = (t_min / step - 1e-9).ceil().max(0.0) as usize;
    k.min(n)
}

/// `π̂_{h1,h2}(x*, y*) = (1/T) ∫_0^T 𝕂_{h1}(x* - X_u) 𝕂_{h2}(y* - λ_u) du`.
pub fn estimate_pi_2d(traj: &Trajectory, spec: &KernelSpec, x: f64, y: f64) -> Result<EstimateResult> {
    joint_window_estimate(traj, spec, x, y, 0)
}

/// Plug-in estimator on `[t_min, T]`; `traj.lambda_values` holds `λ̂`.
///
/// The normalisation is the length of the grid window actually summed, so
/// the result equals [`estimate_pi_2d`] bit for bit when `t_min = 0`.
pub fn estimate_pi_plugin(traj: &Trajectory, spec: &KernelSpec, x: f64, y: f64, t_min: f64) -> Result<EstimateResult> {
    let horizon = traj.grid.horizon();
    if !(t_min.is_finite() && t_min >= 0.0 && t_min < horizon) {
        return Err(invalid(format!(
            "t_min = {t_min} must lie in [0, T) with T = {horizon}"
        )));
    }
    let first = first_index_at_or_after(traj.grid.step(), traj.grid.n_steps(), t_min);
    if first >= traj.grid.n_steps() {
        return Err(invalid(format!("no grid step lies in [{t_min}, {horizon}]")));
    }
    joint_window_estimate(traj, spec, x, y, first)
}

fn joint_window_estimate(traj: &Trajectory, spec: &KernelSpec, x: f64, y: f64, first: usize) -> Result<EstimateResult> {
    let n = traj.grid.n_steps();
    if n == 0 {
        return Err(invalid("trajectory has no time steps"));
    }
    if traj.x_values.len() != n + 1 || traj.lambda_values.len() != n + 1 {
        return Err(invalid("trajectory samples are not aligned with its grid"));
    }
    let (k, h1, h2) = (spec.kernel, spec.h1, spec.h2);
    let xs = &traj.x_values;
    let ls = &traj.lambda_values;
    let value = window_average(traj.grid.step(), first, n, |i| {
        k.scaled(h1, x - xs[i]) * k.scaled(h2, y - ls[i])
    });
    Ok(EstimateResult {
        value,
        point: EvalPoint::Joint { x, y },
        kernel: k,
        h1: Some(h1),
        h2,
        window: (traj.grid.time(first), traj.grid.horizon()),
    })
}

/// `π̂_{h2}(y*) = (1/T) ∫_0^T 𝕂_{h2}(y* - λ_u) du` on the path's own grid.
pub fn estimate_pi_lambda(path: &IntensityPath, kernel: Kernel, h2: f64, y: f64) -> Result<EstimateResult> {
    check_bandwidth(h2)?;
    let g = &path.grid;
    if g.len() < 2 || path.values.len() != g.len() {
        return Err(invalid("intensity path needs at least two aligned samples"));
    }
    let span = g[g.len() - 1] - g[0];
    if !(span > 0.0) {
        return Err(invalid("intensity path grid has zero length"));
    }
    let mut sum = 0.0;
    for i in 0..g.len() - 1 {
        sum += kernel.scaled(h2, y - path.values[i]) * (g[i + 1] - g[i]);
    }
    Ok(EstimateResult {
        value: sum / span,
        point: EvalPoint::Intensity { y },
        kernel,
        h1: None,
        h2,
        window: (g[0], g[g.len() - 1]),
    })
}

/// Which bandwidth rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Joint estimator at `y* = ξ`.
    AtBaseline,
    /// Joint estimator at `y* > ξ`.
    AboveBaseline,
    /// Plug-in estimator on a reconstructed intensity.
    Plugin,
    /// Intensity-only estimator at `y* > ξ`.
    IntensityAboveBaseline,
}

impl FromStr for Regime {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "at_baseline" | "baseline" => Ok(Regime::AtBaseline),
            "above_baseline" | "above" => Ok(Regime::AboveBaseline),
            "plugin" => Ok(Regime::Plugin),
            "intensity_above_baseline" => Ok(Regime::IntensityAboveBaseline),
            other => Err(invalid(format!("unknown bandwidth regime `{other}`"))),
        }
    }
}

/// Hölder exponents and rate slack driving the bandwidth rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthPolicy {
    pub beta1: f64,
    pub beta2: f64,
    pub regime: Regime,
    pub epsilon: f64,
}

/// Rate-optimal `(h1, h2)` for horizon `T`.
///
/// Outside the plug-in regime only `h2` is pinned by the rate; `h1` is set to
/// `T^{-a1}` with `a1` chosen so that `h1^{2β1}` matches the `h2` bias term.
pub fn optimal_bandwidths(horizon: f64, policy: &BandwidthPolicy) -> Result<(f64, f64)> {
    if !(horizon.is_finite() && horizon > 1.0) {
        return Err(invalid(format!("horizon must be > 1 (got {horizon})")));
    }
    let BandwidthPolicy {
        beta1: b1,
        beta2: b2,
        regime,
        epsilon: eps,
    } = *policy;
    if !(b1.is_finite() && b1 > 0.0 && b2.is_finite() && b2 > 0.0) {
        return Err(invalid(format!("Hölder exponents must be > 0 (got {b1}, {b2})")));
    }
    let needs_eps = matches!(regime, Regime::Plugin | Regime::IntensityAboveBaseline);
    if needs_eps && !(eps.is_finite() && eps > 0.0) {
        return Err(invalid(format!("epsilon must be > 0 (got {eps})")));
    }
    let (a1, a2) = match regime {
        Regime::AtBaseline => (b2 / (b1 * (2.0 * b2 + 1.0)), 1.0 / (2.0 * b2 + 1.0)),
        Regime::AboveBaseline => (2.0 * b2 / (b1 * (4.0 * b2 + 1.0)), 2.0 / (4.0 * b2 + 1.0)),
        Regime::Plugin => {
            let denom = b2 * (2.0 + (1.0 + eps) / b1) + 4.0;
            ((b2 / b1) / denom, 1.0 / denom)
        }
        Regime::IntensityAboveBaseline => {
            let a2 = 1.0 / (2.0 * b2 + eps);
            (b2 / b1 * a2, a2)
        }
    };
    Ok((horizon.powf(-a1), horizon.powf(-a2)))
}

/// Start of the window where the initial-condition error in `λ̂` is
/// negligible: `log(T) / (2ε)`.
pub fn t_min(horizon: f64, epsilon: f64) -> Result<f64> {
    if !(horizon.is_finite() && horizon > 1.0) {
        return Err(invalid(format!("horizon must be > 1 (got {horizon})")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1) (got {epsilon})")));
    }
    Ok(horizon.ln() / (2.0 * epsilon))
}

/// Standard normal density, used by the degenerate-model checks.
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{simulate_jump_diffusion, DiffusionCoeffs, SimGrid};
    use crate::hawkes::{EventTimes, HawkesParams};
    use crate::stream::{derive_stream, Purpose};
    use proptest::prelude::*;

    fn constant_traj(n: usize, step: f64, x: f64, y: f64) -> Trajectory {
        let grid = SimGrid::from_steps(step, n).unwrap();
        Trajectory::new(
            grid,
            vec![x; n + 1],
            vec![y; n + 1],
            EventTimes::empty(grid.horizon()).unwrap(),
            x,
            y,
        )
        .unwrap()
    }

    fn sample_traj(seed: u64, horizon: f64) -> Trajectory {
        let p = HawkesParams::new(0.5, 0.4, 2.0).unwrap();
        let coeffs = DiffusionCoeffs::linear_drift(6.0, 0.1, 1.0);
        let grid = SimGrid::new(horizon, 0.01).unwrap();
        simulate_jump_diffusion(
            &coeffs,
            &p,
            0.1,
            0.7,
            grid,
            &mut derive_stream(seed, Purpose::Custom(20), 0),
        )
        .unwrap()
    }

    #[test]
    fn kernel_eval_examples() {
        assert!((kernel_eval(Kernel::Gaussian, 1.0, 0.0).unwrap() - 0.398942).abs() < 1e-6);
        for k in [Kernel::Gaussian, Kernel::Epanechnikov, Kernel::GaussianOrder(4)] {
            assert_eq!(kernel_eval(k, 2.0, 0.0).unwrap(), k.eval(0.0) / 2.0);
        }
        assert_eq!(kernel_eval(Kernel::Epanechnikov, 0.5, 0.5).unwrap(), 0.0);
        assert!(kernel_eval(Kernel::Gaussian, 0.0, 1.0).is_err());
        assert!(kernel_eval(Kernel::Gaussian, -1.0, 1.0).is_err());
    }

    #[test]
    fn kernel_moments() {
        for k in [
            Kernel::Gaussian,
            Kernel::Epanechnikov,
            Kernel::GaussianOrder(2),
            Kernel::GaussianOrder(3),
            Kernel::GaussianOrder(5),
        ] {
            assert!((k.moment(0) - 1.0).abs() < 1e-8, "{k}");
            for i in 1..=k.order() {
                assert!(k.moment(i).abs() < 1e-8, "{k} moment {i}");
            }
            assert!(KernelSpec::new(k, 0.1, 0.2).is_ok());
        }
        // The first non-vanishing moment really is non-zero.
        assert!(Kernel::Gaussian.moment(2) > 0.99);
        assert!(Kernel::GaussianOrder(2).moment(4).abs() > 0.5);
        assert_eq!(Kernel::GaussianOrder(2).order(), 3);
    }

    #[test]
    fn higher_order_gaussian_closed_form() {
        // order 2/3: (3 - u²)/2 φ(u)
        for u in [0.0f64, 0.7, 1.9, -2.4] {
            let phi = INV_SQRT_2PI * (-0.5 * u * u).exp();
            let want = (3.0 - u * u) / 2.0 * phi;
            assert!((Kernel::GaussianOrder(2).eval(u) - want).abs() < 1e-15);
            let want4 = (15.0 - 10.0 * u * u + u.powi(4)) / 8.0 * phi;
            assert!((Kernel::GaussianOrder(4).eval(u) - want4).abs() < 1e-15);
        }
    }

    #[test]
    fn spec_rejects_bad_bandwidths() {
        assert!(KernelSpec::new(Kernel::Gaussian, 0.0, 0.1).is_err());
        assert!(KernelSpec::new(Kernel::Gaussian, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn kernel_parsing() {
        assert_eq!("gaussian".parse::<Kernel>().unwrap(), Kernel::Gaussian);
        assert_eq!("gaussian:4".parse::<Kernel>().unwrap(), Kernel::GaussianOrder(4));
        assert!("box".parse::<Kernel>().is_err());
        assert_eq!(Kernel::GaussianOrder(4).to_string(), "gaussian:4");
    }

    #[test]
    fn scaled_kernel_integrates_to_one() {
        for k in [Kernel::Gaussian, Kernel::Epanechnikov] {
            for h in [0.01, 0.3, 2.0] {
                let n = 20_000;
                let r = 12.0 * h;
                let dz = 2.0 * r / n as f64;
                let total: f64 = (0..n).map(|i| k.scaled(h, -r + (i as f64 + 0.5) * dz) * dz).sum();
                assert!((total - 1.0).abs() < 1e-6, "{k} h={h}: {total}");
            }
        }
    }

    #[test]
    fn constant_path_estimates() {
        let traj = constant_traj(1000, 0.01, 0.3, 0.8);
        let spec = KernelSpec::new(Kernel::Gaussian, 0.05, 0.2).unwrap();
        let want = Kernel::Gaussian.eval(0.0).powi(2) / (0.05 * 0.2);
        let got = estimate_pi_2d(&traj, &spec, 0.3, 0.8).unwrap();
        assert!((got.value - want).abs() < 1e-12 * want);
        let half = estimate_pi_plugin(&traj, &spec, 0.3, 0.8, traj.grid.horizon() / 2.0).unwrap();
        assert!((half.value - want).abs() < 1e-12 * want);
        assert!((half.window.0 - 5.0).abs() < 1e-12);

        let path = IntensityPath {
            grid: traj.grid.times(),
            values: traj.lambda_values.clone(),
            lambda0: 0.8,
        };
        let l = estimate_pi_lambda(&path, Kernel::Gaussian, 0.2, 0.8).unwrap();
        assert!((l.value - Kernel::Gaussian.eval(0.0) / 0.2).abs() < 1e-12);
    }

    #[test]
    fn estimators_reject_degenerate_input() {
        let traj = constant_traj(0, 0.01, 0.0, 0.5);
        let spec = KernelSpec::new(Kernel::Gaussian, 0.1, 0.1).unwrap();
        assert!(estimate_pi_2d(&traj, &spec, 0.0, 0.5).is_err());
        let traj = constant_traj(10, 0.1, 0.0, 0.5);
        assert!(estimate_pi_plugin(&traj, &spec, 0.0, 0.5, 1.0).is_err());
        assert!(estimate_pi_plugin(&traj, &spec, 0.0, 0.5, 2.0).is_err());
        let empty = IntensityPath {
            grid: vec![0.0],
            values: vec![0.5],
            lambda0: 0.5,
        };
        assert!(estimate_pi_lambda(&empty, Kernel::Gaussian, 0.1, 0.5).is_err());
    }

    #[test]
    fn poisson_intensity_estimate_is_exact() {
        let p = HawkesParams::new(0.5, 0.0, 2.0).unwrap();
        let mut rng = derive_stream(1, Purpose::Custom(21), 0);
        let ev = crate::hawkes::simulate_hawkes_thinning(&p, 0.5, 50.0, &mut rng).unwrap();
        let grid: Vec<f64> = (0..=5000).map(|k| k as f64 * 0.01).collect();
        let path = crate::hawkes::intensity_path(&p, &ev, 0.5, &grid).unwrap();
        let est = estimate_pi_lambda(&path, Kernel::Gaussian, 0.1, 0.7).unwrap();
        let want = Kernel::Gaussian.scaled(0.1, 0.2);
        assert!((est.value - want).abs() < 1e-13 * want);
    }

    #[test]
    fn plugin_with_true_lambda_is_bitwise_identical() {
        let traj = sample_traj(2, 20.0);
        let spec = KernelSpec::new(Kernel::Gaussian, 0.05, 0.1).unwrap();
        let a = estimate_pi_2d(&traj, &spec, 0.1, 0.8).unwrap();
        let b = estimate_pi_plugin(&traj, &spec, 0.1, 0.8, 0.0).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn estimator_is_linear_in_the_empirical_measure() {
        let a = sample_traj(3, 10.0);
        let b = sample_traj(4, 10.0);
        let c = a.concat(&b).unwrap();
        let spec = KernelSpec::new(Kernel::Gaussian, 0.05, 0.1).unwrap();
        let (x, y) = (0.1, 0.8);
        let ea = estimate_pi_2d(&a, &spec, x, y).unwrap().value;
        let eb = estimate_pi_2d(&b, &spec, x, y).unwrap().value;
        let ec = estimate_pi_2d(&c, &spec, x, y).unwrap().value;
        assert!((ec - (ea + eb) / 2.0).abs() < 1e-12 * ec.abs().max(1.0));
    }

    #[test]
    fn riemann_sum_refinement() {
        // Smooth deterministic path sampled at Δ and Δ/2.
        let f = |t: f64| (0.2 * (3.0 * t).sin(), 0.8 + 0.3 * (-t).exp());
        let spec = KernelSpec::new(Kernel::Gaussian, 0.1, 0.1).unwrap();
        let est = |step: f64| {
            let grid = SimGrid::new(4.0, step).unwrap();
            let (xs, ls): (Vec<f64>, Vec<f64>) = grid.times().into_iter().map(f).unzip();
            let traj = Trajectory::new(grid, xs, ls, EventTimes::empty(4.0).unwrap(), 0.0, 1.1).unwrap();
            estimate_pi_2d(&traj, &spec, 0.05, 0.85).unwrap().value
        };
        let (d, fine) = (0.01, est(0.005));
        let coarse = est(d);
        // |g'| is bounded by sup|𝕂|² (|x'|/h1 + |λ'|/h2)·K'max; a loose Lipschitz bound:
        let k0 = Kernel::Gaussian.eval(0.0);
        let lipschitz = (k0 / 0.1).powi(2) * (0.6 / 0.1 + 0.3 / 0.1) * 0.61;
        assert!((coarse - fine).abs() < 2.0 * d * lipschitz);
    }

    #[test]
    fn bandwidth_rules() {
        let base = BandwidthPolicy {
            beta1: 1.0,
            beta2: 1.0,
            regime: Regime::AtBaseline,
            epsilon: 0.1,
        };
        let (_, h2) = optimal_bandwidths(100.0, &base).unwrap();
        assert!((h2 - 0.215443).abs() < 1e-6);
        let above = BandwidthPolicy {
            regime: Regime::AboveBaseline,
            ..base
        };
        let (_, h2) = optimal_bandwidths(100.0, &above).unwrap();
        assert!((h2 - 0.158489).abs() < 1e-6);
        for regime in [
            Regime::AtBaseline,
            Regime::AboveBaseline,
            Regime::Plugin,
            Regime::IntensityAboveBaseline,
        ] {
            let (h1, h2) = optimal_bandwidths(1.0 + 1e-12, &BandwidthPolicy { regime, ..base }).unwrap();
            assert!((h1 - 1.0).abs() < 1e-10 && (h2 - 1.0).abs() < 1e-10);
        }
        let plug = BandwidthPolicy {
            beta1: 2.0,
            beta2: 1.0,
            regime: Regime::Plugin,
            epsilon: 0.5,
        };
        let (h1, h2) = optimal_bandwidths(1000.0, &plug).unwrap();
        let denom = 1.0 * (2.0 + 1.5 / 2.0) + 4.0;
        assert!((h1 - 1000f64.powf(-0.5 / denom)).abs() < 1e-14);
        assert!((h2 - 1000f64.powf(-1.0 / denom)).abs() < 1e-14);
        assert!(optimal_bandwidths(1.0, &base).is_err());
        assert!(optimal_bandwidths(10.0, &BandwidthPolicy { beta2: 0.0, ..base }).is_err());
        assert!(optimal_bandwidths(10.0, &BandwidthPolicy { epsilon: 0.0, ..plug }).is_err());
    }

    #[test]
    fn t_min_examples() {
        let e2 = 2f64.exp();
        assert!((t_min(e2, 0.5).unwrap() - 2.0).abs() < 1e-14);
        assert!((t_min(e2, 1.0 - 1e-12).unwrap() - 1.0).abs() < 1e-10);
        assert!(t_min(1.0, 0.5).is_err());
        assert!(t_min(10.0, 1.0).is_err());
        assert!(t_min(100.0, 0.5).unwrap() > t_min(10.0, 0.5).unwrap());
        assert!(t_min(100.0, 0.5).unwrap() < t_min(100.0, 0.25).unwrap());
    }

    proptest! {
        #[test]
        fn nonnegative_kernels_give_nonnegative_estimates(
            xs in proptest::collection::vec(-2.0f64..2.0, 11),
            ls in proptest::collection::vec(0.5f64..3.0, 11),
            x in -2.0f64..2.0,
            y in 0.0f64..3.0,
            h in 0.01f64..1.0,
        ) {
            let grid = SimGrid::from_steps(0.1, 10).unwrap();
            let traj = Trajectory::new(grid, xs, ls, EventTimes::empty(1.0).unwrap(), 0.0, 0.5).unwrap();
            for k in [Kernel::Gaussian, Kernel::Epanechnikov] {
                let spec = KernelSpec::new(k, h, h).unwrap();
                prop_assert!(estimate_pi_2d(&traj, &spec, x, y).unwrap().value >= 0.0);
            }
        }
    }
}
