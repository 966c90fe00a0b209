use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hawkesjd::config::{parse_config, RunConfig, Scale};
use hawkesjd::csvio::{
    format_float, read_csv, read_events, read_trajectory, write_csv, write_events, write_intensity, write_trajectory,
    Schema,
};
use hawkesjd::diffusion::{simulate_jump_diffusion, simulate_stationary, SimGrid};
use hawkesjd::experiments::run_suite;
use hawkesjd::girsanov::{check_exp_moment, check_radon_nikodym, CheckReport};
use hawkesjd::hawkes::IntensityPath;
use hawkesjd::inference::{mle_fit, reconstruct_path};
use hawkesjd::kernel::{estimate_pi_2d, estimate_pi_lambda, estimate_pi_plugin, Kernel, KernelSpec};
use hawkesjd::stream::{derive_stream, Purpose};
use hawkesjd::Error;

#[derive(Parser)]
#[command(
    name = "hawkesjd",
    version,
    about = "Hawkes-driven jump diffusions: simulation, estimation, experiments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (defaults apply to anything it omits).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path of (X, λ); writes trajectory.csv and events.csv.
    Simulate {
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Maximum likelihood fit of an event file; prints key = value lines.
    Fit {
        #[arg(long)]
        events: PathBuf,
        /// Observation horizon of the event file.
        #[arg(long)]
        horizon: f64,
        /// Also write the reconstructed intensity on a grid of this step to --out.
        #[arg(long)]
        intensity_step: Option<f64>,
    },
    /// Evaluate the density estimator of a trajectory at a list of points.
    Estimate {
        /// t,x,lambda file on a uniform grid.
        #[arg(long)]
        trajectory: PathBuf,
        /// x,y file of evaluation points.
        #[arg(long)]
        points: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Joint)]
        mode: Mode,
        #[arg(long)]
        kernel: Option<Kernel>,
        #[arg(long)]
        h1: Option<f64>,
        #[arg(long)]
        h2: Option<f64>,
        /// Start of the averaging window.
        #[arg(long)]
        t_min: Option<f64>,
    },
    /// Run the configured experiment suite into the --out directory.
    Experiment {
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum)]
        scale: Option<ScaleArg>,
    },
    /// Monte Carlo checks of the change-of-measure identities and moment bounds.
    Verify {
        #[arg(long)]
        reps: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Joint,
    Intensity,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

enum Failure {
    Invalid(Error),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for failed checks.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_config(common: &Common) -> hawkesjd::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> hawkesjd::Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run(cli: Cli) -> Outcome {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate { horizon, step } => simulate(&cli.common, &cfg, horizon, step),
        Command::Fit {
            events,
            horizon,
            intensity_step,
        } => fit(&cli.common, &cfg, &events, horizon, intensity_step),
        Command::Estimate {
            trajectory,
            points,
            mode,
            kernel,
            h1,
            h2,
            t_min,
        } => {
            let spec = KernelSpec::new(
                kernel.unwrap_or(cfg.estimate.spec.kernel()),
                h1.unwrap_or(cfg.estimate.spec.h1()),
                h2.unwrap_or(cfg.estimate.spec.h2()),
            )?;
            estimate(
                &cli.common,
                &trajectory,
                &points,
                mode,
                &spec,
                t_min.unwrap_or(cfg.estimate.t_min),
            )
        }
        Command::Experiment { threads, scale } => {
            if let Some(n) = threads {
                set_threads(n)?;
            }
            let scale = scale.map(|s| match s {
                ScaleArg::Desk => Scale::Desk,
                ScaleArg::Paper => Scale::Paper,
            });
            let plan = cfg.experiment_plan(scale);
            let dir = out_dir(&cli.common)?;
            let outcome = run_suite(&plan, &dir)?;
            for (k, v) in &outcome.summary {
                println!("{k} = {v}");
            }
            Ok(())
        }
        Command::Verify { reps } => verify(&cli.common, &cfg, reps),
    }
}

fn set_threads(n: usize) -> hawkesjd::Result<()> {
    if n == 0 {
        return Err(Error::Validation("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Validation(format!("cannot configure thread pool: {e}")))
}

fn simulate(common: &Common, cfg: &RunConfig, horizon: Option<f64>, step: Option<f64>) -> Outcome {
    let s = &cfg.simulate;
    let grid = SimGrid::new(horizon.unwrap_or(s.horizon), step.unwrap_or(s.step))?;
    let coeffs = cfg.model.coeffs();
    let mut rng = derive_stream(cfg.seed, Purpose::Trajectory, 0);
    let traj = match s.lambda0 {
        Some(l0) => simulate_jump_diffusion(
            &coeffs,
            &cfg.model.params,
            s.x0.unwrap_or(s.burn.x_init),
            l0,
            grid,
            &mut rng,
        )?,
        None => simulate_stationary(&coeffs, &cfg.model.params, grid, &s.burn, &mut rng)?,
    };
    let dir = out_dir(common)?;
    write_trajectory(dir.join("trajectory.csv"), &traj)?;
    write_events(dir.join("events.csv"), &traj.events)?;
    println!("steps = {}", traj.grid.n_steps());
    println!("events = {}", traj.events.len());
    println!("x0 = {}", format_float(traj.x0));
    println!("lambda0 = {}", format_float(traj.lambda0));
    Ok(())
}

fn fit(common: &Common, cfg: &RunConfig, events: &Path, horizon: f64, intensity_step: Option<f64>) -> Outcome {
    let events = read_events(events, horizon)?;
    let model = mle_fit(&events, &cfg.fit.init, &cfg.fit.opts)?;
    let p = model.params;
    println!("xi = {}", format_float(p.xi()));
    println!("alpha = {}", format_float(p.alpha()));
    println!("beta = {}", format_float(p.beta()));
    println!("lambda0 = {}", format_float(model.lambda0_proxy));
    println!("loglik = {}", format_float(model.loglik));
    println!("converged = {}", model.converged);
    println!("iterations = {}", model.iterations);
    println!("events = {}", events.len());
    if let Some(step) = intensity_step {
        let grid = SimGrid::new(horizon, step)?;
        let path = reconstruct_path(&model, &events, &grid.times())?;
        let file = match &common.out {
            Some(p) if p.extension().is_some() => p.clone(),
            _ => out_dir(common)?.join("intensity.csv"),
        };
        write_intensity(&file, &path)?;
    }
    Ok(())
}

fn estimate(common: &Common, trajectory: &Path, points: &Path, mode: Mode, spec: &KernelSpec, t_min: f64) -> Outcome {
    let traj = read_trajectory(trajectory, None)?;
    let points = read_csv(points, &Schema::points())?;
    let path = IntensityPath {
        grid: traj.grid.times(),
        values: traj.lambda_values.clone(),
        lambda0: traj.lambda0,
    };
    let mut rows = Vec::with_capacity(points.len());
    for p in &points {
        let (x, y) = (p[0], p[1]);
        let value = match mode {
            Mode::Joint if t_min > 0.0 => estimate_pi_plugin(&traj, spec, x, y, t_min)?.value,
            Mode::Joint => estimate_pi_2d(&traj, spec, x, y)?.value,
            Mode::Intensity => {
                if t_min > 0.0 {
                    return Err(Error::Validation("--t-min is only supported in joint mode".into()).into());
                }
                estimate_pi_lambda(&path, spec.kernel(), spec.h2(), y)?.value
            }
        };
        rows.push(vec![x, y, value]);
    }
    let file = match &common.out {
        Some(p) if p.extension().is_some() => p.clone(),
        _ => out_dir(common)?.join("estimates.csv"),
    };
    write_csv(file, &Schema::estimates(), &rows)?;
    Ok(())
}

fn verify(common: &Common, cfg: &RunConfig, reps: Option<usize>) -> Outcome {
    let v = &cfg.verify;
    let n = reps.unwrap_or(v.n_reps);
    let params = &cfg.model.params;
    let mut reports: Vec<CheckReport> = Vec::new();
    for &s in &v.shifts {
        let r = check_radon_nikodym(params, params.xi(), s, n, cfg.seed)?;
        reports.push(r.p_side);
        reports.push(r.q_side);
    }
    for &k in &v.k_values {
        for &t in &v.t_values {
            for &y0 in &v.y0_values {
                reports.push(check_exp_moment(params, k, t, y0, n, cfg.seed)?);
            }
        }
    }
    let mut table = String::from("check,estimate,std_error,bound,pass,note\n");
    for r in &reports {
        table.push_str(&format!(
            "\"{}\",{},{},{},{},\"{}\"\n",
            r.name,
            format_float(r.estimate),
            format_float(r.std_error),
            format_float(r.bound),
            if r.pass { "pass" } else { "fail" },
            r.note
        ));
    }
    match &common.out {
        Some(p) => {
            let file = if p.extension().is_some() {
                p.clone()
            } else {
                out_dir(common)?.join("verify.csv")
            };
            fs::write(file, &table).map_err(Error::from)?;
        }
        None => std::io::stdout().write_all(table.as_bytes()).map_err(Error::from)?,
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(failed.join("; ")))
    }
}
