//! Flat `key = value` configuration files with `[section]` headers.
//!
//! ```text
//! version = 1
//! seed = 7
//!
//! [model]
//! xi = 0.5
//! alpha = 0.4
//! beta = 2
//!
//! [point.base]
//! y = 0.5
//! h2 = geom(0.01, 0.3, 10)
//! ```
//!
//! Lists are comma separated or written `geom(lo, hi, n)`. Parsing collects
//! every problem it finds before failing.

use std::collections::HashMap;
use std::str::FromStr;

use crate::diffusion::BurnIn;
use crate::error::{Error, Result};
use crate::experiments::{
    geomspace, EstimatorMode, ExperimentPlan, FitMode, ModelPreset, MsePlan, PluginPlan, PointSpec, SimSettings,
};
use crate::hawkes::HawkesParams;
use crate::inference::{FitOptions, Lambda0};
use crate::kernel::{Kernel, KernelSpec};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(Error::Validation(format!(
                "unknown scale `{s}` (expected desk or paper)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub horizon: f64,
    pub step: f64,
    /// `None` draws the start from the stationary regime.
    pub x0: Option<f64>,
    pub lambda0: Option<f64>,
    pub burn: BurnIn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub spec: KernelSpec,
    pub t_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSection {
    pub init: HawkesParams,
    pub opts: FitOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub n_reps: usize,
    pub shifts: Vec<f64>,
    pub k_values: Vec<f64>,
    pub t_values: Vec<f64>,
    pub y0_values: Vec<f64>,
}

/// Explicit `[experiment]` keys; unset ones come from the scale preset.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub scale: Scale,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub n_reps: Option<usize>,
    pub kernel: Kernel,
    pub mse: Option<MsePlan>,
    pub plugin: Option<PluginPlan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub model: ModelPreset,
    pub simulate: SimulateOptions,
    pub estimate: EstimateOptions,
    pub fit: FitSection,
    pub experiment: ExperimentOptions,
    /// `[point.NAME]` sections in file order; empty means the default sweep.
    pub points: Vec<PointSpec>,
    pub verify: VerifyOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("version = 1\n").expect("empty config is valid")
    }
}

impl RunConfig {
    /// Simulation settings for `experiment`; `scale` overrides the file.
    pub fn sim_settings(&self, scale: Option<Scale>) -> SimSettings {
        let base = match scale.unwrap_or(self.experiment.scale) {
            Scale::Desk => SimSettings::desk(self.seed),
            Scale::Paper => SimSettings::paper(self.seed),
        };
        let e = &self.experiment;
        SimSettings {
            horizon: e.horizon.unwrap_or(base.horizon),
            step: e.step.unwrap_or(base.step),
            n_reps: e.n_reps.unwrap_or(base.n_reps),
            burn: self.simulate.burn,
            ..base
        }
    }

    pub fn experiment_plan(&self, scale: Option<Scale>) -> ExperimentPlan {
        let points = if self.points.is_empty() {
            default_points(&self.model)
        } else {
            self.points.clone()
        };
        ExperimentPlan {
            model: self.model,
            sim: self.sim_settings(scale),
            kernel: self.experiment.kernel,
            points,
            mse: self.experiment.mse.clone(),
            plugin: self.experiment.plugin.clone(),
        }
    }
}

/// Joint and intensity-only sweeps at `y = ξ` and `y = ξ + 0.3`.
pub fn default_points(model: &ModelPreset) -> Vec<PointSpec> {
    let xi = model.params.xi();
    let x = model.stationary_x_mean();
    let (lo, hi) = ((-4f64).exp(), (-2f64).exp());
    vec![
        PointSpec {
            name: "joint_baseline".into(),
            x,
            y: xi,
            mode: EstimatorMode::Joint,
            h1s: geomspace(0.01, 0.3, 5),
            h2s: geomspace(0.01, 0.3, 10),
            slope_range: (0.01, 0.3),
            expected: Some((-1.9, -1.1)),
        },
        PointSpec {
            name: "joint_above".into(),
            x,
            y: xi + 0.3,
            mode: EstimatorMode::Joint,
            h1s: geomspace(0.01, 0.1, 5),
            h2s: geomspace(0.01, 0.1, 10),
            slope_range: (0.01, 0.1),
            expected: Some((-0.8, -0.2)),
        },
        PointSpec {
            name: "lambda_baseline".into(),
            x,
            y: xi,
            mode: EstimatorMode::IntensityOnly,
            h1s: vec![],
            h2s: geomspace(0.01, 0.3, 10),
            slope_range: (0.01, 0.3),
            expected: Some((-1.4, -0.6)),
        },
        PointSpec {
            name: "lambda_above".into(),
            x,
            y: xi + 0.3,
            mode: EstimatorMode::IntensityOnly,
            h1s: vec![],
            h2s: geomspace(lo, hi, 10),
            slope_range: (lo, hi),
            expected: Some((-0.3, 0.1)),
        },
    ]
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Raw section → key → entry map plus the problems found so far.
struct Doc {
    sections: Vec<(String, usize, HashMap<String, Entry>)>,
    errors: Vec<String>,
}

fn lex(text: &str) -> Doc {
    let mut doc = Doc {
        sections: vec![(String::new(), 0, HashMap::new())],
        errors: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            match rest.strip_suffix(']').map(str::trim) {
                Some(name) if !name.is_empty() => {
                    if let Some((_, first, _)) = doc.sections.iter().find(|(n, _, _)| n == name) {
                        doc.errors
                            .push(format!("line {line}: section [{name}] already opened on line {first}"));
                    }
                    doc.sections.push((name.to_string(), line, HashMap::new()));
                }
                _ => doc.errors.push(format!("line {line}: malformed section header `{s}`")),
            }
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            doc.errors
                .push(format!("line {line}: expected `key = value`, found `{s}`"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            doc.errors.push(format!("line {line}: empty key or value in `{s}`"));
            continue;
        }
        let (section, _, map) = doc.sections.last_mut().expect("root section");
        if let Some(prev) = map.get(k) {
            let qualified = if section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            doc.errors
                .push(format!("duplicate key `{qualified}` on lines {} and {line}", prev.line));
            continue;
        }
        map.insert(
            k.to_string(),
            Entry {
                value: v.to_string(),
                line,
                used: false,
            },
        );
    }
    doc
}

/// Typed access to one section, recording errors instead of failing.
struct Section<'a> {
    name: &'a str,
    map: Option<&'a mut HashMap<String, Entry>>,
    errors: &'a mut Vec<String>,
}

impl Section<'_> {
    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        let e = self.map.as_deref_mut()?.get_mut(key)?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    fn key(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn get<T: FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let (v, line) = self.raw(key)?;
        match v.parse() {
            Ok(t) => Some(t),
            Err(_) => {
                let k = self.key(key);
                self.errors
                    .push(format!("line {line}: `{k}` must be {what} (got `{v}`)"));
                None
            }
        }
    }

    fn float(&mut self, key: &str, default: f64) -> f64 {
        self.get(key, "a number").unwrap_or(default)
    }

    fn opt_float(&mut self, key: &str) -> Option<f64> {
        self.get(key, "a number")
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let v = self.float(key, default);
        if !(v.is_finite() && v > 0.0) {
            let k = self.key(key);
            self.errors.push(format!("`{k}` must be a finite number > 0 (got {v})"));
            return default;
        }
        v
    }

    fn count(&mut self, key: &str, default: usize) -> usize {
        self.get(key, "a non-negative integer").unwrap_or(default)
    }

    fn flag(&mut self, key: &str, default: bool) -> bool {
        self.get(key, "true or false").unwrap_or(default)
    }

    fn list(&mut self, key: &str, default: Vec<f64>) -> Vec<f64> {
        let Some((v, line)) = self.raw(key) else {
            return default;
        };
        match parse_list(&v) {
            Some(l) if !l.is_empty() && l.iter().all(|x| x.is_finite()) => l,
            _ => {
                let k = self.key(key);
                self.errors.push(format!(
                    "line {line}: `{k}` must be a comma-separated list of numbers or geom(lo, hi, n) (got `{v}`)"
                ));
                default
            }
        }
    }

    fn pair(&mut self, key: &str, default: (f64, f64)) -> (f64, f64) {
        let l = self.list(key, vec![default.0, default.1]);
        if l.len() != 2 || l[0] >= l[1] {
            let k = self.key(key);
            self.errors
                .push(format!("`{k}` must be two increasing numbers `lo, hi`"));
            return default;
        }
        (l[0], l[1])
    }
}

fn parse_list(v: &str) -> Option<Vec<f64>> {
    if let Some(inner) = v.strip_prefix("geom(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return None;
        }
        let (lo, hi): (f64, f64) = (parts[0].parse().ok()?, parts[1].parse().ok()?);
        let n: usize = parts[2].parse().ok()?;
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return None;
        }
        return Some(geomspace(lo, hi, n));
    }
    v.split(',').map(|p| p.trim().parse().ok()).collect()
}

impl Doc {
    fn section<'a>(&'a mut self, name: &'a str) -> Section<'a> {
        let map = self
            .sections
            .iter_mut()
            .rev()
            .find(|(n, _, _)| n == name)
            .map(|(_, _, m)| m);
        Section {
            name,
            map,
            errors: &mut self.errors,
        }
    }
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut doc = lex(text);
    let known = ["", "model", "simulate", "estimate", "fit", "experiment", "verify"];
    for (name, line, _) in &doc.sections {
        if !known.contains(&name.as_str()) && !name.starts_with("point.") {
            doc.errors.push(format!("line {line}: unknown section [{name}]"));
        }
    }

    let mut root = doc.section("");
    let version = root.get::<u32>("version", "an integer");
    let seed = root.get::<u64>("seed", "a non-negative integer").unwrap_or(0);
    match version {
        Some(CONFIG_VERSION) => {}
        Some(v) => doc
            .errors
            .push(format!("unsupported config version {v} (expected {CONFIG_VERSION})")),
        None if doc.errors.iter().any(|e| e.contains("`version`")) => {}
        None => doc.errors.push(format!("missing `version = {CONFIG_VERSION}`")),
    }

    let reference = ModelPreset::reference();
    let mut m = doc.section("model");
    let (xi, alpha, beta) = (
        m.float("xi", reference.params.xi()),
        m.float("alpha", reference.params.alpha()),
        m.float("beta", reference.params.beta()),
    );
    let model = ModelPreset {
        params: reference.params,
        drift_rate: m.float("drift_rate", reference.drift_rate),
        sigma: m.float("sigma", reference.sigma),
        jump: m.float("jump", reference.jump),
    };
    let params = match HawkesParams::new(xi, alpha, beta) {
        Ok(p) => p,
        Err(e) => {
            doc.errors.push(format!("[model]: {}", strip(e)));
            reference.params
        }
    };
    let model = ModelPreset { params, ..model };
    if let Err(e) = model.validate() {
        doc.errors.push(format!("[model]: {}", strip(e)));
    }

    let mut s = doc.section("simulate");
    let burn = BurnIn {
        lambda: s.opt_float("burn_lambda"),
        x: s.float("burn_x", BurnIn::default().x),
        x_init: s.float("x_init", BurnIn::default().x_init),
    };
    let simulate = SimulateOptions {
        horizon: s.positive("horizon", 50.0),
        step: s.positive("step", 1.0 / 500.0),
        x0: s.opt_float("x0"),
        lambda0: s.opt_float("lambda0"),
        burn,
    };
    if simulate.step > simulate.horizon {
        doc.errors
            .push("`simulate.step` must not exceed `simulate.horizon`".into());
    }
    if let Some(l0) = simulate.lambda0 {
        if let Err(e) = params.check_lambda0(l0) {
            doc.errors.push(format!("`simulate.lambda0`: {}", strip(e)));
        }
    }
    if burn.lambda.is_some_and(|b| !(b >= 0.0)) || !(burn.x >= 0.0) {
        doc.errors.push("burn-in lengths must be >= 0".into());
    }

    let mut e = doc.section("estimate");
    let kernel: Kernel = e
        .get("kernel", "a kernel name (gaussian, epanechnikov, gaussian:M)")
        .unwrap_or(Kernel::Gaussian);
    let (h1, h2) = (e.float("h1", 0.1), e.float("h2", 0.1));
    let t_min = e.float("t_min", 0.0);
    let spec = match KernelSpec::new(kernel, h1, h2) {
        Ok(s) => s,
        Err(err) => {
            doc.errors.push(format!("[estimate]: {}", strip(err)));
            KernelSpec::new(Kernel::Gaussian, 0.1, 0.1).expect("default spec")
        }
    };
    if !(t_min >= 0.0 && t_min.is_finite()) {
        doc.errors.push(format!("`estimate.t_min` must be >= 0 (got {t_min})"));
    }
    let estimate = EstimateOptions { spec, t_min };

    let mut f = doc.section("fit");
    let (ixi, ialpha, ibeta) = (
        f.float("init_xi", 1.0),
        f.float("init_alpha", 0.2),
        f.float("init_beta", 1.0),
    );
    let defaults = FitOptions::default();
    let lambda0 = match f.raw("lambda0") {
        None => Lambda0::Baseline,
        Some((v, _)) if v == "baseline" => Lambda0::Baseline,
        Some((v, line)) => match v.parse::<f64>() {
            Ok(l) if l.is_finite() && l >= 0.0 => Lambda0::Fixed(l),
            _ => {
                f.errors.push(format!(
                    "line {line}: `fit.lambda0` must be `baseline` or a number >= 0 (got `{v}`)"
                ));
                Lambda0::Baseline
            }
        },
    };
    let opts = FitOptions {
        max_iter: f.count("max_iter", defaults.max_iter),
        xtol: f.positive("xtol", defaults.xtol),
        ftol: f.float("ftol", defaults.ftol),
        initial_step: f.positive("initial_step", defaults.initial_step),
        lambda0,
        fix_alpha_zero: f.flag("fix_alpha_zero", defaults.fix_alpha_zero),
        beta_floor: f.float("beta_floor", defaults.beta_floor),
    };
    let init = match HawkesParams::new(ixi, ialpha, ibeta) {
        Ok(p) => p,
        Err(err) => {
            doc.errors.push(format!("[fit] initial values: {}", strip(err)));
            HawkesParams::new(1.0, 0.2, 1.0).expect("default init")
        }
    };
    let fit = FitSection { init, opts };

    let mut x = doc.section("experiment");
    let scale = x.get("scale", "desk or paper").unwrap_or(Scale::Desk);
    let horizon = x.opt_float("horizon");
    let step = x.opt_float("step");
    let n_reps = x.get::<usize>("n_reps", "an integer");
    let ekernel = x.get("kernel", "a kernel name").unwrap_or(kernel);
    let mse = if x.flag("mse", false) {
        Some(MsePlan {
            horizons: x.list("mse_horizons", vec![25.0, 50.0, 100.0, 200.0]),
            beta1: x.positive("beta1", 1.0),
            beta2: x.positive("beta2", 1.0),
            epsilon: x.positive("epsilon", 0.1),
            reference_horizon: x.positive("reference_horizon", 1e4),
            reference_bins: x.count("reference_bins", 200),
        })
    } else {
        None
    };
    let plugin = if x.flag("plugin", false) {
        Some(PluginPlan {
            x: x.float("plugin_x", model.stationary_x_mean()),
            y: x.float("plugin_y", params.xi() + 0.3),
            h1: x.positive("plugin_h1", 0.1),
            h2: x.positive("plugin_h2", 0.1),
            epsilon: x.positive("plugin_epsilon", 0.5),
            fit_horizons: x.list("fit_horizons", vec![500.0, 2000.0, 8000.0]),
            fit: FitMode::Mle { init, opts },
            stride: x.count("stride", 50).max(1),
        })
    } else {
        None
    };
    for (key, v) in [("horizon", horizon), ("step", step)] {
        if v.is_some_and(|v| !(v.is_finite() && v > 0.0)) {
            doc.errors.push(format!("`experiment.{key}` must be > 0"));
        }
    }
    if n_reps.is_some_and(|n| n < 2) {
        doc.errors.push("`experiment.n_reps` must be at least 2".into());
    }
    if let Some(m) = &mse {
        if m.horizons.iter().any(|&t| t <= 1.0) {
            doc.errors.push("`experiment.mse_horizons` must all exceed 1".into());
        }
        if m.reference_bins < 2 {
            doc.errors.push("`experiment.reference_bins` must be at least 2".into());
        }
    }
    let experiment = ExperimentOptions {
        scale,
        horizon,
        step,
        n_reps,
        kernel: ekernel,
        mse,
        plugin,
    };

    let names: Vec<String> = doc
        .sections
        .iter()
        .filter_map(|(n, _, _)| n.strip_prefix("point.").map(str::to_string))
        .collect();
    let mut points = Vec::new();
    for name in names {
        let section = format!("point.{name}");
        let mut p = doc.section(&section);
        let mode = match p.raw("mode") {
            None => EstimatorMode::Joint,
            Some((v, _)) if v == "joint" => EstimatorMode::Joint,
            Some((v, _)) if v == "intensity" => EstimatorMode::IntensityOnly,
            Some((v, line)) => {
                p.errors.push(format!(
                    "line {line}: `{section}.mode` must be joint or intensity (got `{v}`)"
                ));
                EstimatorMode::Joint
            }
        };
        let h2s = p.list("h2", geomspace(0.01, 0.3, 10));
        let h1s = match mode {
            EstimatorMode::Joint => p.list("h1", vec![0.1]),
            EstimatorMode::IntensityOnly => vec![],
        };
        let lo = h2s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = h2s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let slope_range = p.pair("slope_range", (lo, hi.max(lo * (1.0 + 1e-12))));
        let has_expected = p.map.as_deref().is_some_and(|m| m.contains_key("expected"));
        let expected = has_expected.then(|| p.pair("expected", (f64::NEG_INFINITY, f64::INFINITY)));
        let point = PointSpec {
            name: name.clone(),
            x: p.float("x", model.stationary_x_mean()),
            y: p.float("y", params.xi()),
            mode,
            h1s,
            h2s,
            slope_range,
            expected,
        };
        if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') || name.is_empty() {
            doc.errors
                .push(format!("point name `{name}` may only use letters, digits, `_` and `-`"));
        }
        if point.h1s.iter().chain(&point.h2s).any(|&h| !(h > 0.0)) {
            doc.errors.push(format!("[{section}]: bandwidths must be > 0"));
        }
        points.push(point);
    }

    let mut v = doc.section("verify");
    let verify = VerifyOptions {
        n_reps: v.count("n_reps", 100_000),
        shifts: v.list("shifts", vec![1.0, 2.0, 4.0]),
        k_values: v.list("k", vec![1.5, 2.0, 5.0]),
        t_values: v.list("t", vec![0.5, 1.0, 2.0]),
        y0_values: v.list("y0", vec![params.xi(), 1.0]),
    };
    if verify.n_reps < 100 {
        doc.errors.push("`verify.n_reps` must be at least 100".into());
    }
    if verify.k_values.iter().any(|&k| !(k > 1.0)) {
        doc.errors.push("`verify.k` values must exceed 1".into());
    }
    if verify.shifts.iter().chain(&verify.t_values).any(|&t| !(t > 0.0)) {
        doc.errors
            .push("`verify.shifts` and `verify.t` values must be > 0".into());
    }
    for &y0 in &verify.y0_values {
        if let Err(e) = params.check_lambda0(y0) {
            doc.errors.push(format!("`verify.y0`: {}", strip(e)));
        }
    }

    for (name, _, map) in &doc.sections {
        let mut unused: Vec<(&String, &Entry)> = map.iter().filter(|(_, e)| !e.used).collect();
        unused.sort_by_key(|(_, e)| e.line);
        for (k, e) in unused {
            let q = if name.is_empty() {
                k.clone()
            } else {
                format!("{name}.{k}")
            };
            doc.errors.push(format!("line {}: unknown key `{q}`", e.line));
        }
    }

    if !doc.errors.is_empty() {
        return Err(Error::Config(doc.errors));
    }
    Ok(RunConfig {
        version: CONFIG_VERSION,
        seed,
        model,
        simulate,
        estimate,
        fit,
        experiment,
        points,
        verify,
    })
}

fn strip(e: Error) -> String {
    match e {
        Error::Validation(m) => m,
        other => other.to_string(),
    }
}
