//! Monte Carlo experiments: variance sweeps over bandwidths, MSE ladders,
//! plug-in gaps and intensity reconstruction error.
//!
//! Replication `r` always draws from its own counter-derived stream and
//! results are reduced in replication order, so output does not depend on
//! the number of threads.

mod suite;

pub use suite::{run_suite, ExperimentPlan, MsePlan, PluginPlan, PointSpec, SuiteOutcome};

use rayon::prelude::*;

use crate::diffusion::{simulate_stationary, BurnIn, DiffusionCoeffs, SimGrid, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::hawkes::{
    default_burn_in, intensity_path_unchecked, sample_stationary_lambda0, simulate_hawkes_thinning, HawkesParams,
};
use crate::inference::{mle_fit, reconstruct_path, FitOptions, FittedModel};
use crate::kernel::{estimate_pi_plugin, optimal_bandwidths, t_min, BandwidthPolicy, Kernel, KernelSpec};
use crate::stats::{mean, ols, sample_variance};
use crate::stream::{derive_stream, Purpose, SeededStream};

/// Jump diffusion `dX = -θ X dt + σ dW + a dN` driven by a Hawkes process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPreset {
    pub params: HawkesParams,
    pub drift_rate: f64,
    pub sigma: f64,
    pub jump: f64,
}

impl ModelPreset {
    /// `σ = 0.1`, `a = 1`, `b(x) = -6x`, `(ξ, α, β) = (0.5, 0.4, 2)`.
    pub fn reference() -> Self {
        ModelPreset {
            params: HawkesParams::new(0.5, 0.4, 2.0).expect("valid preset"),
            drift_rate: 6.0,
            sigma: 0.1,
            jump: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.drift_rate.is_finite() && self.drift_rate > 0.0) {
            return Err(invalid(format!("drift rate must be > 0 (got {})", self.drift_rate)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid(format!("sigma must be > 0 (got {})", self.sigma)));
        }
        if !self.jump.is_finite() {
            return Err(invalid("jump size must be finite"));
        }
        Ok(())
    }

    pub fn coeffs(&self) -> DiffusionCoeffs {
        DiffusionCoeffs::linear_drift(self.drift_rate, self.sigma, self.jump)
    }

    /// Stationary mean of `X`: `a · E[λ] / θ`.
    pub fn stationary_x_mean(&self) -> f64 {
        self.jump * self.params.stationary_mean_intensity() / self.drift_rate
    }
}

/// Horizon, step and replication settings shared by all experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub horizon: f64,
    pub step: f64,
    pub n_reps: usize,
    pub seed: u64,
    pub burn: BurnIn,
    /// Every replication reuses stream 0 (degenerate checks only).
    pub shared_stream: bool,
}

impl SimSettings {
    /// `T = 50`, `Δ = 1/500`, 200 replications.
    pub fn desk(seed: u64) -> Self {
        SimSettings {
            horizon: 50.0,
            step: 1.0 / 500.0,
            n_reps: 200,
            seed,
            burn: BurnIn::default(),
            shared_stream: false,
        }
    }

    /// `T = 100`, `Δ = 1/1000`, 1000 replications.
    pub fn paper(seed: u64) -> Self {
        SimSettings {
            horizon: 100.0,
            step: 1.0 / 1000.0,
            n_reps: 1000,
            ..Self::desk(seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_reps < 2 {
            return Err(invalid(format!("need at least 2 replications (got {})", self.n_reps)));
        }
        SimGrid::new(self.horizon, self.step)?;
        Ok(())
    }

    fn stream(&self, purpose: Purpose, lane: u64, rep: usize) -> SeededStream {
        let rep = if self.shared_stream { 0 } else { rep as u64 };
        derive_stream(self.seed, purpose, (lane << 32) | rep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// `π̂_{h1,h2}(x*, y*)`.
    Joint,
    /// `π̂_{h2}(y*)`; `h1` is unused.
    IntensityOnly,
}

fn simulate_rep(model: &ModelPreset, sim: &SimSettings, horizon: f64, lane: u64, rep: usize) -> Result<Trajectory> {
    let grid = SimGrid::new(horizon, sim.step)?;
    let mut rng = sim.stream(Purpose::Trajectory, lane, rep);
    simulate_stationary(&model.coeffs(), &model.params, grid, &sim.burn, &mut rng)
}

fn tag_rep<T>(rep: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Replication {
        rep,
        source: Box::new(e),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: ModelPreset,
    pub sim: SimSettings,
    pub kernel: Kernel,
    pub mode: EstimatorMode,
    pub x: f64,
    pub y: f64,
    pub h1s: Vec<f64>,
    pub h2s: Vec<f64>,
}

impl SweepConfig {
    fn pairs(&self) -> Vec<(f64, f64)> {
        match self.mode {
            EstimatorMode::Joint => self
                .h1s
                .iter()
                .flat_map(|&h1| self.h2s.iter().map(move |&h2| (h1, h2)))
                .collect(),
            EstimatorMode::IntensityOnly => self.h2s.iter().map(|&h2| (f64::NAN, h2)).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.sim.validate()?;
        if self.h2s.is_empty() || (self.mode == EstimatorMode::Joint && self.h1s.is_empty()) {
            return Err(invalid("bandwidth grids must be non-empty"));
        }
        for &h in self.h2s.iter().chain(if self.mode == EstimatorMode::Joint {
            &self.h1s[..]
        } else {
            &[]
        }) {
            KernelSpec::new(self.kernel, h, h)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// `NaN` in intensity-only mode.
    pub h1: f64,
    pub h2: f64,
    pub variance: f64,
    pub mean: f64,
    pub n_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| vec![r.h1, r.h2, r.variance, r.mean, r.n_reps as f64])
            .collect()
    }

    pub fn from_csv_rows(rows: &[Vec<f64>]) -> Self {
        SweepTable {
            rows: rows
                .iter()
                .map(|r| SweepRow {
                    h1: r[0],
                    h2: r[1],
                    variance: r[2],
                    mean: r[3],
                    n_reps: r[4] as usize,
                })
                .collect(),
        }
    }

    /// Distinct `h1` values in order of first appearance.
    pub fn h1_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|h| h.to_bits() == r.h1.to_bits()) {
                out.push(r.h1);
            }
        }
        out
    }
}

/// Per-replication estimates, one vector per replication, ordered like the
/// bandwidth pairs of the sweep.
pub fn sweep_estimates(cfg: &SweepConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let pairs = cfg.pairs();
    (0..cfg.sim.n_reps)
        .into_par_iter()
        .map(|rep| {
            tag_rep(rep, simulate_rep(&cfg.model, &cfg.sim, cfg.sim.horizon, 0, rep))
                .map(|traj| estimates_on(&traj, cfg, &pairs))
        })
        .collect()
}

fn estimates_on(traj: &Trajectory, cfg: &SweepConfig, pairs: &[(f64, f64)]) -> Vec<f64> {
    let n = traj.grid.n_steps();
    let step = traj.grid.step();
    let k = cfg.kernel;
    let ys = &traj.lambda_values[..n];
    let xs = &traj.x_values[..n];
    let norm = n as f64 * step;
    let mut cache_x: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut cache_y: Vec<(f64, Vec<f64>)> = Vec::new();
    let column = |cache: &mut Vec<(f64, Vec<f64>)>, h: f64, c: f64, v: &[f64]| -> usize {
        if let Some(i) = cache.iter().position(|(hh, _)| hh.to_bits() == h.to_bits()) {
            return i;
        }
        cache.push((h, v.iter().map(|&z| k.scaled(h, c - z)).collect()));
        cache.len() - 1
    };
    let mut out = Vec::with_capacity(pairs.len());
    for &(h1, h2) in pairs {
        let iy = column(&mut cache_y, h2, cfg.y, ys);
        let ky = &cache_y[iy].1;
        let sum = match cfg.mode {
            EstimatorMode::Joint => {
                let ix = column(&mut cache_x, h1, cfg.x, xs);
                let kx = &cache_x[ix].1;
                let mut s = 0.0;
                for i in 0..n {
                    s += kx[i] * ky[i];
                }
                s
            }
            EstimatorMode::IntensityOnly => ky.iter().sum(),
        };
        out.push(sum * step / norm);
    }
    out
}

/// Across-replication variance of the estimator for every bandwidth pair.
pub fn run_variance_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    let per_rep = sweep_estimates(cfg)?;
    let rows = cfg
        .pairs()
        .into_iter()
        .enumerate()
        .map(|(j, (h1, h2))| {
            let vals: Vec<f64> = per_rep.iter().map(|r| r[j]).collect();
            SweepRow {
                h1,
                h2,
                variance: sample_variance(&vals),
                mean: mean(&vals),
                n_reps: vals.len(),
            }
        })
        .collect();
    Ok(SweepTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub std_error: f64,
    pub n_points: usize,
    /// Rows dropped because their variance was not positive.
    pub excluded: usize,
}

/// OLS slope of `log(variance)` on `log(h2)` over rows with `h2` in
/// `[lo, hi]` and, if given, the matching `h1`.
pub fn fit_loglog_slope(table: &SweepTable, h1: Option<f64>, h2_range: (f64, f64)) -> Result<SlopeFit> {
    let (lo, hi) = h2_range;
    let tol = 1e-12;
    let selected: Vec<&SweepRow> = table
        .rows
        .iter()
        .filter(|r| r.h2 >= lo * (1.0 - tol) && r.h2 <= hi * (1.0 + tol))
        .filter(|r| match h1 {
            Some(h) => (r.h1 - h).abs() <= tol * h.abs(),
            None => true,
        })
        .collect();
    let usable: Vec<&&SweepRow> = selected.iter().filter(|r| r.variance > 0.0).collect();
    let excluded = selected.len() - usable.len();
    if excluded > 0 {
        eprintln!("warning: {excluded} row(s) with zero variance left out of the slope fit");
    }
    if usable.len() < 3 {
        return Err(invalid(format!(
            "need at least 3 rows with positive variance in range, found {}",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|r| r.h2.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|r| r.variance.ln()).collect();
    let fit = ols(&xs, &ys)?;
    Ok(SlopeFit {
        slope: fit.slope,
        std_error: fit.slope_se,
        n_points: fit.n,
        excluded,
    })
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Long-run histogram of `(X, λ)` used as the reference density.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceHistogram {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub bins: usize,
    /// Row-major `bins × bins` joint density, `x` index first.
    pub joint: Vec<f64>,
    /// Marginal density of `λ`.
    pub marginal: Vec<f64>,
}

impl ReferenceHistogram {
    /// Histogram of a single stationary path over its empirical range.
    pub fn build(model: &ModelPreset, horizon: f64, step: f64, bins: usize, seed: u64) -> Result<Self> {
        if bins == 0 {
            return Err(invalid("histogram needs at least one bin"));
        }
        let grid = SimGrid::new(horizon, step)?;
        let mut rng = derive_stream(seed, Purpose::Reference, 0);
        let traj = simulate_stationary(&model.coeffs(), &model.params, grid, &BurnIn::default(), &mut rng)?;
        Ok(Self::from_samples(&traj.x_values, &traj.lambda_values, bins))
    }

    pub fn from_samples(xs: &[f64], ys: &[f64], bins: usize) -> Self {
        let range = |v: &[f64]| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let pad = 1e-9 * (hi - lo).max(1.0);
            (lo, hi + pad)
        };
        let (x_range, y_range) = (range(xs), range(ys));
        let mut joint = vec![0.0; bins * bins];
        let mut marginal = vec![0.0; bins];
        let wx = (x_range.1 - x_range.0) / bins as f64;
        let wy = (y_range.1 - y_range.0) / bins as f64;
        let n = xs.len() as f64;
        for (&x, &y) in xs.iter().zip(ys) {
            let i = (((x - x_range.0) / wx) as usize).min(bins - 1);
            let j = (((y - y_range.0) / wy) as usize).min(bins - 1);
            joint[i * bins + j] += 1.0 / (n * wx * wy);
            marginal[j] += 1.0 / (n * wy);
        }
        ReferenceHistogram {
            x_range,
            y_range,
            bins,
            joint,
            marginal,
        }
    }

    fn bin(&self, v: f64, range: (f64, f64)) -> Option<usize> {
        if v < range.0 || v >= range.1 {
            return None;
        }
        let w = (range.1 - range.0) / self.bins as f64;
        Some((((v - range.0) / w) as usize).min(self.bins - 1))
    }

    pub fn density_joint(&self, x: f64, y: f64) -> f64 {
        match (self.bin(x, self.x_range), self.bin(y, self.y_range)) {
            (Some(i), Some(j)) => self.joint[i * self.bins + j],
            _ => 0.0,
        }
    }

    pub fn density_lambda(&self, y: f64) -> f64 {
        self.bin(y, self.y_range).map_or(0.0, |j| self.marginal[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseConfig {
    pub model: ModelPreset,
    /// `horizon` is ignored; the ladder below is used instead.
    pub sim: SimSettings,
    pub kernel: Kernel,
    pub mode: EstimatorMode,
    pub x: f64,
    pub y: f64,
    pub horizons: Vec<f64>,
    pub policy: BandwidthPolicy,
    /// Use these `(h1, h2)` at every horizon instead of the policy.
    pub fixed_bandwidths: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseRow {
    pub horizon: f64,
    pub h1: f64,
    pub h2: f64,
    pub mse: f64,
    pub bias: f64,
    pub variance: f64,
    pub n_reps: usize,
}

/// MSE of the estimator against `reference` along a ladder of horizons,
/// each using the rate-optimal bandwidths for its horizon.
pub fn run_mse_experiment(cfg: &MseConfig, reference: f64) -> Result<Vec<MseRow>> {
    cfg.model.validate()?;
    if cfg.horizons.is_empty() {
        return Err(invalid("horizon ladder must be non-empty"));
    }
    let mut rows = Vec::with_capacity(cfg.horizons.len());
    for (lane, &horizon) in cfg.horizons.iter().enumerate() {
        let (h1, h2) = match cfg.fixed_bandwidths {
            Some(h) => h,
            None => optimal_bandwidths(horizon, &cfg.policy)?,
        };
        let sweep = SweepConfig {
            model: cfg.model,
            sim: SimSettings { horizon, ..cfg.sim },
            kernel: cfg.kernel,
            mode: cfg.mode,
            x: cfg.x,
            y: cfg.y,
            h1s: vec![h1],
            h2s: vec![h2],
        };
        sweep.validate()?;
        let pairs = sweep.pairs();
        let vals: Vec<f64> = (0..cfg.sim.n_reps)
            .into_par_iter()
            .map(|rep| {
                tag_rep(rep, simulate_rep(&cfg.model, &sweep.sim, horizon, lane as u64 + 1, rep))
                    .map(|traj| estimates_on(&traj, &sweep, &pairs)[0])
            })
            .collect::<Result<_>>()?;
        let m = mean(&vals);
        let mse = mean(&vals.iter().map(|v| (v - reference).powi(2)).collect::<Vec<_>>());
        rows.push(MseRow {
            horizon,
            h1: if cfg.mode == EstimatorMode::Joint { h1 } else { f64::NAN },
            h2,
            mse,
            bias: m - reference,
            variance: sample_variance(&vals),
            n_reps: vals.len(),
        });
    }
    Ok(rows)
}

/// How the Hawkes parameters used for reconstruction are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitMode {
    /// MLE on an independent path of the fitting horizon.
    Mle { init: HawkesParams, opts: FitOptions },
    /// The true parameters, with `λ̃_0 = λ_0 + lambda0_shift`.
    Exact { lambda0_shift: f64 },
}

fn fit_rep(
    model: &ModelPreset,
    sim: &SimSettings,
    mode: &FitMode,
    fit_horizon: f64,
    lane: u64,
    rep: usize,
    lambda0: f64,
) -> Option<FittedModel> {
    match *mode {
        FitMode::Exact { lambda0_shift } => Some(FittedModel::exact(model.params, lambda0 + lambda0_shift)),
        FitMode::Mle { init, opts } => {
            let mut rng = sim.stream(Purpose::Fit, lane, rep);
            let burn = sim.burn.lambda.unwrap_or_else(|| default_burn_in(&model.params));
            let l0 = sample_stationary_lambda0(&model.params, burn, &mut rng).ok()?;
            let events = simulate_hawkes_thinning(&model.params, l0, fit_horizon, &mut rng).ok()?;
            let fit = mle_fit(&events, &init, &opts).ok()?;
            fit.converged.then_some(fit)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PluginConfig {
    pub model: ModelPreset,
    pub sim: SimSettings,
    pub kernel: Kernel,
    pub x: f64,
    pub y: f64,
    pub h1: f64,
    pub h2: f64,
    pub epsilon: f64,
    pub fit_horizons: Vec<f64>,
    pub fit: FitMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluginRow {
    pub fit_horizon: f64,
    /// Mean over replications of `(π̂ - π̃)²`.
    pub mean_sq_gap: f64,
    pub n_used: usize,
    pub n_failed: usize,
}

/// Gap between the estimator on the true intensity and the plug-in
/// estimator on `λ̂`, both over `[t_min, T]`.
pub fn run_plugin_experiment(cfg: &PluginConfig) -> Result<Vec<PluginRow>> {
    cfg.model.validate()?;
    cfg.sim.validate()?;
    let spec = KernelSpec::new(cfg.kernel, cfg.h1, cfg.h2)?;
    let start = t_min(cfg.sim.horizon, cfg.epsilon)?;
    let mut rows = Vec::new();
    for (lane, &fit_horizon) in cfg.fit_horizons.iter().enumerate() {
        let gaps: Vec<Option<f64>> = (0..cfg.sim.n_reps)
            .into_par_iter()
            .map(|rep| -> Result<Option<f64>> {
                let traj = tag_rep(rep, simulate_rep(&cfg.model, &cfg.sim, cfg.sim.horizon, 0, rep))?;
                let Some(fit) = fit_rep(
                    &cfg.model,
                    &cfg.sim,
                    &cfg.fit,
                    fit_horizon,
                    lane as u64,
                    rep,
                    traj.lambda0,
                ) else {
                    return Ok(None);
                };
                let hat = reconstruct_path(&fit, &traj.events, &traj.grid.times())?;
                let plug = traj.with_lambda(hat.values)?;
                let oracle = estimate_pi_plugin(&traj, &spec, cfg.x, cfg.y, start)?.value;
                let tilde = estimate_pi_plugin(&plug, &spec, cfg.x, cfg.y, start)?.value;
                Ok(Some((oracle - tilde).powi(2)))
            })
            .collect::<Result<_>>()?;
        let used: Vec<f64> = gaps.iter().flatten().copied().collect();
        rows.push(PluginRow {
            fit_horizon,
            mean_sq_gap: mean(&used),
            n_used: used.len(),
            n_failed: gaps.len() - used.len(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityErrorConfig {
    pub model: ModelPreset,
    pub sim: SimSettings,
    pub epsilon: f64,
    pub fit_horizons: Vec<f64>,
    pub fit: FitMode,
    /// Record every `stride`-th grid point.
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityErrorTable {
    pub fit_horizon: f64,
    pub times: Vec<f64>,
    /// Mean over replications of `|λ̂_t - λ_t|²`.
    pub mean_sq_error: Vec<f64>,
    pub t_min: f64,
    /// Average of `mean_sq_error` over `t >= t_min`.
    pub plateau: f64,
    pub n_used: usize,
    pub n_failed: usize,
}

/// Reconstruction error of `λ̂` along time, for each fitting horizon.
pub fn run_intensity_error_experiment(cfg: &IntensityErrorConfig) -> Result<Vec<IntensityErrorTable>> {
    cfg.model.validate()?;
    cfg.sim.validate()?;
    if cfg.stride == 0 {
        return Err(invalid("stride must be >= 1"));
    }
    let grid = SimGrid::new(cfg.sim.horizon, cfg.sim.step)?;
    let times: Vec<f64> = grid.times().into_iter().step_by(cfg.stride).collect();
    let start = t_min(cfg.sim.horizon, cfg.epsilon)?;
    let params = cfg.model.params;
    let burn = cfg.sim.burn.lambda.unwrap_or_else(|| default_burn_in(&params));
    let mut out = Vec::new();
    for (lane, &fit_horizon) in cfg.fit_horizons.iter().enumerate() {
        let errs: Vec<Option<Vec<f64>>> = (0..cfg.sim.n_reps)
            .into_par_iter()
            .map(|rep| -> Result<Option<Vec<f64>>> {
                let mut rng = cfg.sim.stream(Purpose::Trajectory, 1 << 16, rep);
                let l0 = tag_rep(rep, sample_stationary_lambda0(&params, burn, &mut rng))?;
                let events = tag_rep(rep, simulate_hawkes_thinning(&params, l0, cfg.sim.horizon, &mut rng))?;
                let Some(fit) = fit_rep(&cfg.model, &cfg.sim, &cfg.fit, fit_horizon, lane as u64, rep, l0) else {
                    return Ok(None);
                };
                let truth = intensity_path_unchecked(&params, events.times(), l0, &times);
                let hat = reconstruct_path(&fit, &events, &times)?;
                Ok(Some(
                    truth
                        .values
                        .iter()
                        .zip(&hat.values)
                        .map(|(a, b)| (b - a).powi(2))
                        .collect(),
                ))
            })
            .collect::<Result<_>>()?;
        let used: Vec<&Vec<f64>> = errs.iter().flatten().collect();
        let mut mse = vec![0.0; times.len()];
        for e in &used {
            for (m, v) in mse.iter_mut().zip(e.iter()) {
                *m += v;
            }
        }
        for m in &mut mse {
            *m /= used.len().max(1) as f64;
        }
        let tail: Vec<f64> = times
            .iter()
            .zip(&mse)
            .filter(|(t, _)| **t >= start)
            .map(|(_, v)| *v)
            .collect();
        out.push(IntensityErrorTable {
            fit_horizon,
            times: times.clone(),
            mean_sq_error: mse,
            t_min: start,
            plateau: mean(&tail),
            n_used: used.len(),
            n_failed: errs.len() - used.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleRateRow {
    pub horizon: f64,
    /// Root mean squared Euclidean error of `(ξ̂, α̂, β̂)`.
    pub rmse: f64,
    pub rmse_xi: f64,
    pub rmse_alpha: f64,
    pub rmse_beta: f64,
    pub n_used: usize,
    pub n_failed: usize,
}

/// Fits the MLE on independent stationary paths for each horizon and
/// tabulates the root mean squared parameter error.
pub fn run_mle_rate_experiment(
    params: &HawkesParams,
    horizons: &[f64],
    n_reps: usize,
    seed: u64,
    init: &HawkesParams,
    opts: &FitOptions,
) -> Result<Vec<MleRateRow>> {
    if n_reps < 2 {
        return Err(invalid(format!("need at least 2 replications (got {n_reps})")));
    }
    let burn = default_burn_in(params);
    let truth = [params.xi(), params.alpha(), params.beta()];
    let mut rows = Vec::with_capacity(horizons.len());
    for (lane, &horizon) in horizons.iter().enumerate() {
        let fits: Vec<Option<[f64; 3]>> = (0..n_reps)
            .into_par_iter()
            .map(|rep| -> Result<Option<[f64; 3]>> {
                let mut rng = derive_stream(seed, Purpose::Fit, ((lane as u64) << 32) | rep as u64);
                let l0 = tag_rep(rep, sample_stationary_lambda0(params, burn, &mut rng))?;
                let events = tag_rep(rep, simulate_hawkes_thinning(params, l0, horizon, &mut rng))?;
                Ok(mle_fit(&events, init, opts)
                    .ok()
                    .filter(|f| f.converged)
                    .map(|f| [f.params.xi(), f.params.alpha(), f.params.beta()]))
            })
            .collect::<Result<_>>()?;
        let used: Vec<[f64; 3]> = fits.iter().flatten().copied().collect();
        let sq = |i: usize| mean(&used.iter().map(|f| (f[i] - truth[i]).powi(2)).collect::<Vec<_>>());
        let (a, b, c) = (sq(0), sq(1), sq(2));
        rows.push(MleRateRow {
            horizon,
            rmse: (a + b + c).sqrt(),
            rmse_xi: a.sqrt(),
            rmse_alpha: b.sqrt(),
            rmse_beta: c.sqrt(),
            n_used: used.len(),
            n_failed: fits.len() - used.len(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sweep(mode: EstimatorMode) -> SweepConfig {
        let model = ModelPreset::reference();
        SweepConfig {
            model,
            sim: SimSettings {
                horizon: 4.0,
                step: 0.01,
                n_reps: 6,
                ..SimSettings::desk(3)
            },
            kernel: Kernel::Gaussian,
            mode,
            x: model.stationary_x_mean(),
            y: 0.5,
            h1s: vec![0.05, 0.2],
            h2s: vec![0.05, 0.1, 0.2],
        }
    }

    #[test]
    fn shared_stream_gives_zero_variance() {
        let mut cfg = small_sweep(EstimatorMode::Joint);
        cfg.sim.n_reps = 2;
        cfg.sim.shared_stream = true;
        let t = run_variance_sweep(&cfg).unwrap();
        assert!(t.rows.iter().all(|r| r.variance == 0.0));
        assert_eq!(t.rows.len(), 6);
    }

    #[test]
    fn sweep_matches_direct_estimator() {
        let cfg = small_sweep(EstimatorMode::Joint);
        let per_rep = sweep_estimates(&cfg).unwrap();
        let traj = simulate_rep(&cfg.model, &cfg.sim, cfg.sim.horizon, 0, 4).unwrap();
        for (j, (h1, h2)) in cfg.pairs().into_iter().enumerate() {
            let spec = KernelSpec::new(Kernel::Gaussian, h1, h2).unwrap();
            let direct = crate::kernel::estimate_pi_2d(&traj, &spec, cfg.x, cfg.y).unwrap().value;
            assert_eq!(direct.to_bits(), per_rep[4][j].to_bits());
        }
    }

    #[test]
    fn sweep_is_reproducible_and_order_free() {
        let cfg = small_sweep(EstimatorMode::IntensityOnly);
        let a = run_variance_sweep(&cfg).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_variance_sweep(&cfg).unwrap());
        assert_eq!(a.csv_rows().len(), 3);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.variance.to_bits(), y.variance.to_bits());
        }
        // Adding replications leaves the earlier ones untouched.
        let more = SweepConfig {
            sim: SimSettings { n_reps: 9, ..cfg.sim },
            ..cfg.clone()
        };
        let small = sweep_estimates(&cfg).unwrap();
        let big = sweep_estimates(&more).unwrap();
        assert_eq!(small[..], big[..6]);
    }

    #[test]
    fn slope_examples() {
        let h2s = geomspace(0.01, 0.3, 8);
        let table = |f: &dyn Fn(f64) -> f64| SweepTable {
            rows: h2s
                .iter()
                .map(|&h| SweepRow {
                    h1: 0.1,
                    h2: h,
                    variance: f(h),
                    mean: 1.0,
                    n_reps: 10,
                })
                .collect(),
        };
        let s = fit_loglog_slope(&table(&|h| 1.0 / h), Some(0.1), (0.01, 0.3)).unwrap();
        assert!((s.slope + 1.0).abs() < 1e-12);
        let s = fit_loglog_slope(&table(&|_| 3.0), None, (0.01, 0.3)).unwrap();
        assert!(s.slope.abs() < 1e-12);
        let mut rng = derive_stream(1, Purpose::Custom(50), 0);
        use rand::Rng;
        let noisy: Vec<f64> = (0..8).map(|_| 1.0 + rng.random_range(-0.05..0.05)).collect();
        let t = SweepTable {
            rows: h2s
                .iter()
                .zip(&noisy)
                .map(|(&h, &e)| SweepRow {
                    h1: 0.1,
                    h2: h,
                    variance: h.powf(-1.5) * e,
                    mean: 0.0,
                    n_reps: 10,
                })
                .collect(),
        };
        assert!((fit_loglog_slope(&t, None, (0.01, 0.3)).unwrap().slope + 1.5).abs() < 0.1);
        let mut zero = table(&|h| h);
        zero.rows[0].variance = 0.0;
        let s = fit_loglog_slope(&zero, None, (0.01, 0.3)).unwrap();
        assert_eq!(s.excluded, 1);
        assert!(fit_loglog_slope(&zero, None, (0.2, 0.3)).is_err());
    }

    #[test]
    fn geomspace_endpoints() {
        let g = geomspace(0.01, 0.3, 5);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[4], 0.3);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn exact_fit_plugin_gap_is_zero() {
        let model = ModelPreset::reference();
        let cfg = PluginConfig {
            model,
            sim: SimSettings {
                horizon: 10.0,
                step: 0.01,
                n_reps: 4,
                ..SimSettings::desk(5)
            },
            kernel: Kernel::Gaussian,
            x: model.stationary_x_mean(),
            y: 0.8,
            h1: 0.1,
            h2: 0.1,
            epsilon: 0.5,
            fit_horizons: vec![100.0],
            fit: FitMode::Exact { lambda0_shift: 0.0 },
        };
        let rows = run_plugin_experiment(&cfg).unwrap();
        assert_eq!(rows[0].mean_sq_gap, 0.0);
        assert_eq!(rows[0].n_used, 4);
    }

    #[test]
    fn shifted_initial_intensity_decays_exactly() {
        let model = ModelPreset::reference();
        let cfg = IntensityErrorConfig {
            model,
            sim: SimSettings {
                horizon: 5.0,
                step: 0.01,
                n_reps: 3,
                ..SimSettings::desk(6)
            },
            epsilon: 0.5,
            fit_horizons: vec![1.0],
            fit: FitMode::Exact { lambda0_shift: 1.0 },
            stride: 7,
        };
        let t = &run_intensity_error_experiment(&cfg).unwrap()[0];
        for (time, e) in t.times.iter().zip(&t.mean_sq_error) {
            assert!((e - (-4.0 * time).exp()).abs() < 1e-12);
        }
        let exact = IntensityErrorConfig {
            fit: FitMode::Exact { lambda0_shift: 0.0 },
            ..cfg
        };
        assert!(run_intensity_error_experiment(&exact).unwrap()[0]
            .mean_sq_error
            .iter()
            .all(|&e| e == 0.0));
    }

    #[test]
    fn histogram_is_a_density() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let ys: Vec<f64> = (0..1000).map(|i| 0.5 + (i as f64 * 0.11).cos().abs()).collect();
        let h = ReferenceHistogram::from_samples(&xs, &ys, 20);
        let wx = (h.x_range.1 - h.x_range.0) / 20.0;
        let wy = (h.y_range.1 - h.y_range.0) / 20.0;
        let total: f64 = h.joint.iter().sum::<f64>() * wx * wy;
        assert!((total - 1.0).abs() < 1e-9);
        let marg: f64 = h.marginal.iter().sum::<f64>() * wy;
        assert!((marg - 1.0).abs() < 1e-9);
        assert_eq!(h.density_joint(5.0, 0.7), 0.0);
    }
}
