//! Maximum-likelihood fitting of exponential Hawkes parameters from event
//! times, and reconstruction of the intensity path from a fitted model.

use crate::error::{invalid, Result};
use crate::hawkes::{check_grid, intensity_path_unchecked, EventTimes, HawkesParams, IntensityPath};

/// Initial intensity used inside the likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda0 {
    /// `λ_0 = ξ`, following whichever `ξ` is being evaluated.
    Baseline,
    Fixed(f64),
}

impl Lambda0 {
    fn resolve(self, xi: f64) -> f64 {
        match self {
            Lambda0::Baseline => xi,
            Lambda0::Fixed(l) => l,
        }
    }
}

/// `Σ log λ_{T_i} - ∫_0^T λ_s ds` for events on `[0, events.horizon()]`.
///
/// Returns `-∞` when some `λ_{T_i} <= 0`.
pub fn log_likelihood(params: &HawkesParams, events: &EventTimes, lambda0: Lambda0) -> Result<f64> {
    if let Lambda0::Fixed(l) = lambda0 {
        if !(l.is_finite() && l >= 0.0) {
            return Err(invalid(format!("lambda0 must be finite and >= 0 (got {l})")));
        }
    }
    Ok(loglik_raw(
        params.xi(),
        params.alpha(),
        params.beta(),
        events.times(),
        events.horizon(),
        lambda0,
    ))
}

fn loglik_raw(xi: f64, alpha: f64, beta: f64, times: &[f64], horizon: f64, lambda0: Lambda0) -> f64 {
    let l0 = lambda0.resolve(xi);
    let mut log_sum = 0.0;
    let mut tail = 0.0;
    let mut acc = 0.0;
    let mut prev = f64::NAN;
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            acc = (-beta * (t - prev)).exp() * (acc + alpha);
        }
        let lam = xi + (l0 - xi) * (-beta * t).exp() + acc;
        if !(lam > 0.0) {
            return f64::NEG_INFINITY;
        }
        log_sum += lam.ln();
        tail += -(-beta * (horizon - t)).exp_m1();
        prev = t;
    }
    let compensator = xi * horizon + (l0 - xi) / beta * -(-beta * horizon).exp_m1() + alpha / beta * tail;
    log_sum - compensator
}

/// Gradient of [`log_likelihood`] with respect to `(ξ, α, β)`.
pub fn log_likelihood_gradient(params: &HawkesParams, events: &EventTimes, lambda0: Lambda0) -> [f64; 3] {
    let (xi, alpha, beta) = (params.xi(), params.alpha(), params.beta());
    let horizon = events.horizon();
    let l0 = lambda0.resolve(xi);
    let free_l0 = matches!(lambda0, Lambda0::Fixed(_));
    let mut g = [0.0; 3];
    // c = Σ_{j<i} e^{-β(T_i - T_j)}, b = Σ_{j<i} (T_i - T_j) e^{-β(T_i - T_j)}
    let (mut c, mut b) = (0.0, 0.0);
    let mut prev = f64::NAN;
    for (i, &t) in events.times().iter().enumerate() {
        if i > 0 {
            let d = t - prev;
            let e = (-beta * d).exp();
            b = e * (b + d * (c + 1.0));
            c = e * (c + 1.0);
        }
        let e0 = (-beta * t).exp();
        let lam = xi + (l0 - xi) * e0 + alpha * c;
        let dxi = if free_l0 { 1.0 - e0 } else { 1.0 };
        g[0] += dxi / lam;
        g[1] += c / lam;
        g[2] += (-(l0 - xi) * t * e0 - alpha * b) / lam;

        let u = horizon - t;
        let eu = (-beta * u).exp();
        g[1] -= (1.0 - eu) / beta;
        g[2] -= alpha * (-(1.0 - eu) / (beta * beta) + u * eu / beta);
        prev = t;
    }
    let et = (-beta * horizon).exp();
    g[0] -= if free_l0 { horizon - (1.0 - et) / beta } else { horizon };
    g[2] -= (l0 - xi) * (-(1.0 - et) / (beta * beta) + horizon * et / beta);
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence threshold on the simplex diameter in log coordinates.
    pub xtol: f64,
    /// Convergence threshold on the spread of objective values.
    pub ftol: f64,
    /// Initial simplex edge in log coordinates.
    pub initial_step: f64,
    pub lambda0: Lambda0,
    /// Fit `ξ` only, with `α = 0`.
    pub fix_alpha_zero: bool,
    /// Fits with `β̂` below this value are flagged.
    pub beta_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 4000,
            xtol: 1e-9,
            ftol: 1e-11,
            initial_step: 0.25,
            lambda0: Lambda0::Baseline,
            fix_alpha_zero: false,
            beta_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub params: HawkesParams,
    /// `λ̃_0` used by [`reconstruct_intensity`].
    pub lambda0_proxy: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub beta_below_floor: bool,
}

impl FittedModel {
    /// A model with known parameters, for oracle comparisons.
    pub fn exact(params: HawkesParams, lambda0: f64) -> Self {
        FittedModel {
            params,
            lambda0_proxy: lambda0,
            loglik: f64::NAN,
            converged: true,
            iterations: 0,
            beta_below_floor: false,
        }
    }

    pub fn with_lambda0(mut self, lambda0: f64) -> Self {
        self.lambda0_proxy = lambda0;
        self
    }
}

type Objective<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;

/// Maximises the log-likelihood with a Nelder–Mead simplex on
/// `(log ξ, log α, log β)`; `α >= β` is treated as infeasible.
pub fn mle_fit(events: &EventTimes, init: &HawkesParams, opts: &FitOptions) -> Result<FittedModel> {
    if events.len() < 2 {
        return Err(invalid(format!("need at least 2 events to fit (got {})", events.len())));
    }
    if !(opts.xtol > 0.0 && opts.ftol >= 0.0 && opts.initial_step > 0.0) {
        return Err(invalid("fit tolerances and initial step must be positive"));
    }
    if let Lambda0::Fixed(l) = opts.lambda0 {
        if !(l.is_finite() && l >= 0.0) {
            return Err(invalid(format!("lambda0 must be finite and >= 0 (got {l})")));
        }
    }
    let times = events.times();
    let horizon = events.horizon();
    let lambda0 = opts.lambda0;

    let (start, objective): (Vec<f64>, Objective) = if opts.fix_alpha_zero {
        (
            vec![init.xi().ln()],
            Box::new(move |z: &[f64]| -loglik_raw(z[0].exp(), 0.0, 1.0, times, horizon, lambda0)),
        )
    } else {
        if init.alpha() <= 0.0 {
            return Err(invalid("initial alpha must be > 0 unless alpha is fixed at 0"));
        }
        (
            vec![init.xi().ln(), init.alpha().ln(), init.beta().ln()],
            Box::new(move |z: &[f64]| {
                let (xi, alpha, beta) = (z[0].exp(), z[1].exp(), z[2].exp());
                if !(alpha < beta) || !xi.is_finite() || !beta.is_finite() || xi <= 0.0 {
                    return f64::INFINITY;
                }
                let ll = loglik_raw(xi, alpha, beta, times, horizon, lambda0);
                if ll.is_finite() {
                    -ll
                } else {
                    f64::INFINITY
                }
            }),
        )
    };

    let mut run = nelder_mead(&objective, &start, opts.initial_step, opts);
    // One restart from the optimum guards against a collapsed simplex.
    let restart = nelder_mead(&objective, &run.x, opts.initial_step * 0.2, opts);
    run.iterations += restart.iterations;
    run.converged = restart.converged;
    if restart.f <= run.f {
        run.x = restart.x;
        run.f = restart.f;
    }
    if !run.f.is_finite() {
        return Err(invalid("likelihood is not finite anywhere the optimizer searched"));
    }

    let params = if opts.fix_alpha_zero {
        HawkesParams::new(run.x[0].exp(), 0.0, init.beta())?
    } else {
        HawkesParams::new(run.x[0].exp(), run.x[1].exp(), run.x[2].exp())?
    };
    Ok(FittedModel {
        lambda0_proxy: lambda0.resolve(params.xi()),
        loglik: -run.f,
        converged: run.converged,
        iterations: run.iterations,
        beta_below_floor: params.beta() < opts.beta_floor,
        params,
    })
}

struct Simplex {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
}

fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, opts: &FitOptions) -> Simplex {
    let n = start.len();
    let mut pts: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = (vals[n] - vals[0]).abs();
        let diameter = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if vals[0].is_finite() && spread <= opts.ftol && diameter <= opts.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (pts[n][j] - centroid[j])).collect() };

        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc.min(f64::INFINITY))
        } else {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = (0..n).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
            vals[i] = f(&p);
            pts[i] = p;
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Simplex {
        x: pts[best].clone(),
        f: vals[best],
        iterations,
        converged,
    }
}

/// `λ̂_t = ξ̂ + Σ_{T_i<t} α̂ e^{-β̂(t-T_i)} + (λ̃_0 - ξ̂) e^{-β̂ t}`.
pub fn reconstruct_intensity(model: &FittedModel, events: &EventTimes, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t <= events.horizon()) {
        return Err(invalid(format!("t = {t} outside [0, {}]", events.horizon())));
    }
    Ok(reconstruct_path(model, events, &[t])?.values[0])
}

/// [`reconstruct_intensity`] on a whole grid, in one pass.
pub fn reconstruct_path(model: &FittedModel, events: &EventTimes, grid: &[f64]) -> Result<IntensityPath> {
    check_grid(grid)?;
    if !(model.lambda0_proxy.is_finite() && model.lambda0_proxy >= 0.0) {
        return Err(invalid(format!(
            "lambda0 proxy must be finite and >= 0 (got {})",
            model.lambda0_proxy
        )));
    }
    Ok(intensity_path_unchecked(
        &model.params,
        events.times(),
        model.lambda0_proxy,
        grid,
    ))
}

/// Compensator increments `Λ(T_i) - Λ(T_{i-1})` (with `T_0 = 0`); unit
/// exponentials when the model is correct.
pub fn rescaled_interarrivals(params: &HawkesParams, events: &EventTimes, lambda0: f64) -> Result<Vec<f64>> {
    if !(lambda0.is_finite() && lambda0 >= 0.0) {
        return Err(invalid(format!("lambda0 must be finite and >= 0 (got {lambda0})")));
    }
    let (xi, alpha, beta) = (params.xi(), params.alpha(), params.beta());
    let mut out = Vec::with_capacity(events.len());
    // excitation just after the previous event
    let mut excite = 0.0;
    let mut prev = 0.0;
    for &t in events.times() {
        let d = t - prev;
        let decay = -(-beta * d).exp_m1();
        let initial = (lambda0 - xi) / beta * ((-beta * prev).exp() - (-beta * t).exp());
        out.push(xi * d + initial + excite / beta * decay);
        excite = excite * (-beta * d).exp() + alpha;
        prev = t;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::{intensity_at, sample_stationary_lambda0, simulate_hawkes_thinning};
    use crate::stats::ks_one_sample;
    use crate::stream::{derive_stream, Purpose};

    fn p() -> HawkesParams {
        HawkesParams::new(0.5, 0.4, 2.0).unwrap()
    }

    #[test]
    fn poisson_loglik_example() {
        let q = HawkesParams::new(0.5, 0.0, 2.0).unwrap();
        let ev = EventTimes::new(vec![1.0, 4.0, 7.5], 10.0).unwrap();
        let ll = log_likelihood(&q, &ev, Lambda0::Baseline).unwrap();
        assert!((ll - (3.0 * 0.5f64.ln() - 5.0)).abs() < 1e-12);
        assert!((ll + 7.079442).abs() < 1e-6);
    }

    #[test]
    fn two_event_example() {
        let ev = EventTimes::new(vec![1.0, 2.0], 3.0).unwrap();
        let ll = log_likelihood(&p(), &ev, Lambda0::Baseline).unwrap();
        let e = |x: f64| x.exp();
        let want = 0.5f64.ln() + (0.5 + 0.4 * e(-2.0)).ln() - (1.5 + 0.2 * ((1.0 - e(-4.0)) + (1.0 - e(-2.0))));
        assert!((ll - want).abs() < 1e-12);
        assert!((ll + 3.152747).abs() < 2e-5);
    }

    #[test]
    fn loglik_matches_direct_evaluation() {
        let mut rng = derive_stream(11, Purpose::Custom(30), 0);
        let ev = simulate_hawkes_thinning(&p(), 1.3, 400.0, &mut rng).unwrap();
        assert!(ev.len() > 100);
        let mut log_sum = 0.0;
        for &t in ev.times() {
            log_sum += intensity_at(&p(), &ev, 1.3, t).unwrap().ln();
        }
        // compensator by Simpson between consecutive events, using the
        // right limit at each interval's left end
        let mut knots = vec![0.0];
        knots.extend_from_slice(ev.times());
        knots.push(ev.horizon());
        let mut comp = 0.0;
        for (j, w) in knots.windows(2).enumerate() {
            let m = 256;
            let h = (w[1] - w[0]) / m as f64;
            let lam = |s: f64| intensity_at(&p(), &ev, 1.3, s).unwrap();
            for k in 0..m {
                let a = w[0] + k as f64 * h;
                let b = if k + 1 == m { w[1] } else { a + h };
                let fa = if k == 0 && j > 0 { lam(a) + 0.4 } else { lam(a) };
                comp += (b - a) / 6.0 * (fa + 4.0 * lam(0.5 * (a + b)) + lam(b));
            }
        }
        let ll = log_likelihood(&p(), &ev, Lambda0::Fixed(1.3)).unwrap();
        assert!(
            (ll - (log_sum - comp)).abs() < 1e-8 * ll.abs(),
            "{ll} vs {}",
            log_sum - comp
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = derive_stream(12, Purpose::Custom(30), 0);
        let ev = simulate_hawkes_thinning(&p(), 0.9, 200.0, &mut rng).unwrap();
        for conv in [Lambda0::Baseline, Lambda0::Fixed(0.9)] {
            let th = HawkesParams::new(0.6, 0.5, 1.7).unwrap();
            let g = log_likelihood_gradient(&th, &ev, conv);
            let f = |xi: f64, a: f64, b: f64| log_likelihood(&HawkesParams::new(xi, a, b).unwrap(), &ev, conv).unwrap();
            let h = 1e-6;
            let fd = [
                (f(0.6 + h, 0.5, 1.7) - f(0.6 - h, 0.5, 1.7)) / (2.0 * h),
                (f(0.6, 0.5 + h, 1.7) - f(0.6, 0.5 - h, 1.7)) / (2.0 * h),
                (f(0.6, 0.5, 1.7 + h) - f(0.6, 0.5, 1.7 - h)) / (2.0 * h),
            ];
            for i in 0..3 {
                assert!(
                    (g[i] - fd[i]).abs() < 1e-5 * fd[i].abs().max(1.0),
                    "{conv:?} {i}: {} vs {}",
                    g[i],
                    fd[i]
                );
            }
        }
    }

    #[test]
    fn gradient_vanishes_at_the_fit() {
        let mut rng = derive_stream(13, Purpose::Custom(30), 0);
        let ev = simulate_hawkes_thinning(&p(), 0.5, 2000.0, &mut rng).unwrap();
        let fit = mle_fit(&ev, &p(), &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let g = log_likelihood_gradient(&fit.params, &ev, Lambda0::Baseline);
        for gi in g {
            assert!(gi.abs() < 1e-3, "{g:?}");
        }
    }

    #[test]
    fn poisson_profile_fit() {
        let q = HawkesParams::new(0.5, 0.0, 2.0).unwrap();
        let mut rng = derive_stream(14, Purpose::Custom(30), 0);
        let ev = simulate_hawkes_thinning(&q, 0.5, 2000.0, &mut rng).unwrap();
        let opts = FitOptions {
            fix_alpha_zero: true,
            ..FitOptions::default()
        };
        let init = HawkesParams::new(1.0, 0.0, 2.0).unwrap();
        let fit = mle_fit(&ev, &init, &opts).unwrap();
        let want = ev.len() as f64 / 2000.0;
        assert!((fit.params.xi() - want).abs() < 1e-6, "{} vs {want}", fit.params.xi());
        assert_eq!(fit.params.alpha(), 0.0);
    }

    #[test]
    fn fit_is_deterministic_and_close() {
        let mut rng = derive_stream(15, Purpose::Custom(30), 0);
        let ev = simulate_hawkes_thinning(&p(), 0.5, 2000.0, &mut rng).unwrap();
        let init = HawkesParams::new(1.0, 0.2, 1.0).unwrap();
        let a = mle_fit(&ev, &init, &FitOptions::default()).unwrap();
        let b = mle_fit(&ev, &init, &FitOptions::default()).unwrap();
        assert_eq!(a.params.xi().to_bits(), b.params.xi().to_bits());
        assert_eq!(a.params.alpha().to_bits(), b.params.alpha().to_bits());
        assert_eq!(a.params.beta().to_bits(), b.params.beta().to_bits());
        assert!((a.params.xi() - 0.5).abs() < 0.15);
        assert!((a.params.branching_ratio() - 0.2).abs() < 0.15);
        let truth = log_likelihood(&p(), &ev, Lambda0::Baseline).unwrap();
        assert!(a.loglik >= truth);
    }

    #[test]
    fn fit_rejects_tiny_samples_and_flags_beta() {
        let ev = EventTimes::new(vec![1.0], 5.0).unwrap();
        assert!(mle_fit(&ev, &p(), &FitOptions::default()).is_err());
        let mut rng = derive_stream(16, Purpose::Custom(30), 0);
        let ev = simulate_hawkes_thinning(&p(), 0.5, 500.0, &mut rng).unwrap();
        let opts = FitOptions {
            beta_floor: 100.0,
            ..FitOptions::default()
        };
        assert!(mle_fit(&ev, &p(), &opts).unwrap().beta_below_floor);
        let opts = FitOptions {
            max_iter: 3,
            ..FitOptions::default()
        };
        assert!(!mle_fit(&ev, &p(), &opts).unwrap().converged);
    }

    #[test]
    fn reconstruction_examples() {
        let mut rng = derive_stream(17, Purpose::Custom(30), 0);
        let ev = simulate_hawkes_thinning(&p(), 1.1, 30.0, &mut rng).unwrap();
        let exact = FittedModel::exact(p(), 1.1);
        for t in [0.0, 0.37, 5.0, 12.5, 30.0] {
            let a = reconstruct_intensity(&exact, &ev, t).unwrap();
            let b = intensity_at(&p(), &ev, 1.1, t).unwrap();
            assert!((a - b).abs() < 1e-12 * b);
        }
        let none = EventTimes::empty(10.0).unwrap();
        let m = FittedModel::exact(HawkesParams::new(0.7, 0.3, 1.0).unwrap(), 0.7);
        assert_eq!(reconstruct_intensity(&m, &none, 4.0).unwrap(), 0.7);
        assert!(reconstruct_intensity(&m, &none, 11.0).is_err());

        // λ̃_0 = λ_0 + 1 gives an error of exactly e^{-βt}.
        let shifted = exact.clone().with_lambda0(2.1);
        for t in [0.0, 0.5, 2.0, 7.0] {
            let d = reconstruct_intensity(&shifted, &ev, t).unwrap() - intensity_at(&p(), &ev, 1.1, t).unwrap();
            assert!((d - (-2.0 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn time_rescaling_gives_unit_exponentials() {
        let mut rng = derive_stream(18, Purpose::Custom(30), 0);
        let l0 = sample_stationary_lambda0(&p(), 400.0, &mut rng).unwrap();
        let ev = simulate_hawkes_thinning(&p(), l0, 5000.0, &mut rng).unwrap();
        let gaps = rescaled_interarrivals(&p(), &ev, l0).unwrap();
        let total: f64 = gaps.iter().sum();
        let direct = 0.5 * ev.times()[ev.len() - 1]
            + crate::hawkes::excess_compensator(&p(), ev.times(), l0, ev.times()[ev.len() - 1]);
        assert!((total - direct).abs() < 1e-8 * direct);
        let ks = ks_one_sample(&gaps, |x| 1.0 - (-x).exp()).unwrap();
        assert!(ks.p_value > 0.01, "{ks:?}");
        // Wrong parameters are detected.
        let wrong = HawkesParams::new(0.625, 0.0, 2.0).unwrap();
        let gaps = rescaled_interarrivals(&wrong, &ev, 0.625).unwrap();
        assert!(ks_one_sample(&gaps, |x| 1.0 - (-x).exp()).unwrap().p_value < 0.01);
    }
}
