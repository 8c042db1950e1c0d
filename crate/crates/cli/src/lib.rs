//! Batch front end: each subcommand reads a JSON config, writes result files
//! and a `manifest.json` into the output directory.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use cascade_core::coefficients::{check_compat_1d, verify_hk_stability};
use cascade_core::energy::{
    config_hash, estimate_constants, ledger, total_energy, uniform_inhomogeneous_check,
};
use cascade_core::hum::{
    dense_gramian, simulate_controlled, synthesize, ControlProblem, HumSolution, SolverInfo,
    SPECTRAL_CUTOFF,
};
use cascade_core::observation::observe;
use cascade_core::scenarios::{insensitizing_pipeline, simultaneous_to_cascade, solve_simultaneous};
use cascade_core::{integrate_forward, CascadeState, CascadeSystem, Error};

use config::*;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad config or arguments; exit code 2.
    #[error("{0}")]
    Input(String),
    /// The computation ran but failed; exit code 3.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotControllable { .. } | Error::UndefinedRatio | Error::CannotEvaluate(_) | Error::Unsupported(_) => {
                Self::Numerical(e.to_string())
            }
            _ => Self::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Input(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Observe,
    SweepT,
    Hum,
    Gramian,
    CheckCoeff,
    Simultaneous,
    Insensitize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Observe => "observe",
            Self::SweepT => "sweep-T",
            Self::Hum => "hum",
            Self::Gramian => "gramian",
            Self::CheckCoeff => "check-coeff",
            Self::Simultaneous => "simultaneous",
            Self::Insensitize => "insensitize",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub overrides: Overrides,
}

/// What a command produced; `success == false` maps to exit code 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub success: bool,
    pub files: Vec<String>,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("config does not match the schema: {e}")))
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Runs one subcommand and writes the manifest. Numerical failures after
/// results exist still write them and return `success: false`.
pub fn run(inv: &Invocation) -> Result<Outcome, CliError> {
    let text = fs::read_to_string(&inv.config)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", inv.config.display())))?;
    fs::create_dir_all(&inv.out)?;
    let mut out = Output { dir: inv.out.clone(), files: Vec::new() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inv.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let result = pool.install(|| dispatch(inv.command, &text, &inv.overrides, &mut out));
    let (success, seed, failure) = match result {
        Ok((success, seed)) => (success, seed, None),
        Err(CliError::Numerical(msg)) => {
            out.json("failure.json", &json!({ "error": msg }))?;
            (false, inv.overrides.seed.unwrap_or(0), Some(msg))
        }
        Err(e) => return Err(e),
    };
    let outputs: Vec<_> = out
        .files
        .iter()
        .map(|f| {
            let bytes = fs::read(out.dir.join(f))?;
            Ok(json!({ "file": f, "sha256": sha256_hex(&bytes) }))
        })
        .collect::<Result<_, CliError>>()?;
    let manifest = json!({
        "command": inv.command.name(),
        "config": inv.config.display().to_string(),
        "config_sha256": sha256_hex(text.as_bytes()),
        "seed": seed,
        "threads": inv.threads,
        "overrides": {
            "seed": inv.overrides.seed,
            "dt": inv.overrides.dt,
            "modes": inv.overrides.modes,
        },
        "versions": {
            "cascade-cli": env!("CARGO_PKG_VERSION"),
            "cascade-core": cascade_core::VERSION,
        },
        "status": if success { "ok" } else { "numerical-failure" },
        "error": failure,
        "outputs": outputs,
        "timestamp": chrono::Utc::now().to_rfc3339(),
    });
    let files = out.files.clone();
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(inv.out.join("manifest.json"), text)?;
    Ok(Outcome { success, files })
}

fn dispatch(command: Command, text: &str, ov: &Overrides, out: &mut Output) -> Result<(bool, u64), CliError> {
    match command {
        Command::Simulate => simulate(parse(text)?, ov, out),
        Command::Observe => observe_cmd(parse(text)?, ov, out),
        Command::SweepT => sweep(parse(text)?, ov, out),
        Command::Hum => hum(parse(text)?, ov, out),
        Command::Gramian => gramian(parse(text)?, ov, out),
        Command::CheckCoeff => check_coeff(parse(text)?, out),
        Command::Simultaneous => simultaneous(parse(text)?, ov, out),
        Command::Insensitize => insensitize(parse(text)?, ov, out),
    }
}

fn simulate(mut cfg: SimulateConfig, ov: &Overrides, out: &mut Output) -> Result<(bool, u64), CliError> {
    ov.apply_modes(&mut cfg.system.modes);
    let (seed, dt) = (ov.seed(cfg.seed), ov.dt(cfg.dt));
    let sys = CascadeSystem::assemble(&cfg.system)?;
    let canonical = cfg.system.canonical_levels();
    let u0 = cfg.initial.build(&sys, &canonical, seed)?;
    let traj = integrate_forward(&sys, &u0, cfg.horizon, dt, None)?;
    let levels = cfg.levels.clone().unwrap_or_else(|| canonical.iter().map(|&k| vec![k]).collect());
    let led = ledger(&traj, &levels)?.with_config_hash(&cfg.system);
    led.write_csv(&out.path("ledger.csv"))?;
    let drift: Vec<_> = levels[0]
        .iter()
        .map(|&k| json!({ "level": k, "relative_drift": led.relative_drift(1, k) }))
        .collect();
    out.json(
        "summary.json",
        &json!({
            "horizon": cfg.horizon,
            "dt": dt,
            "steps": traj.steps(),
            "config_hash": config_hash(&cfg.system),
            "first_component_drift": drift,
            "initial_energy": total_energy(&u0, &canonical),
            "terminal_energy": total_energy(&traj.terminal(), &canonical),
        }),
    )?;
    out.json("terminal.json", &traj.terminal())?;
    if cfg.snapshot {
        let mut f = fs::File::create(out.path("trajectory.bin"))?;
        traj.write_binary(&mut f)?;
    }
    Ok((true, seed))
}

fn observe_cmd(mut cfg: ObserveConfig, ov: &Overrides, out: &mut Output) -> Result<(bool, u64), CliError> {
    ov.apply_modes(&mut cfg.system.modes);
    let (seed, dt) = (ov.seed(cfg.seed), ov.dt(cfg.dt));
    let sys = CascadeSystem::assemble(&cfg.system)?;
    cfg.observation.validate(&cfg.system)?;
    let canonical = cfg.system.canonical_levels();
    let u0 = cfg.initial.build(&sys, &canonical, seed)?;
    let traj = integrate_forward(&sys, &u0, cfg.horizon, dt, None)?;
    let series = observe(&sys, &traj, &cfg.observation)?;
    series.write_csv(&out.path("observation.csv"))?;
    let integral = series.energy();
    let initial = total_energy(&u0, &canonical);
    out.json(
        "summary.json",
        &json!({
            "horizon": cfg.horizon,
            "dt": dt,
            "observation_integral": integral,
            "initial_energy": initial,
            "ratio": if initial > 0.0 { Some(integral / initial) } else { None },
        }),
    )?;
    Ok((true, seed))
}

fn sweep(mut cfg: SweepConfig, ov: &Overrides, out: &mut Output) -> Result<(bool, u64), CliError> {
    ov.apply_modes(&mut cfg.system.modes);
    let (seed, dt) = (ov.seed(cfg.seed), ov.dt(cfg.dt));
    let sys = CascadeSystem::assemble(&cfg.system)?;
    cfg.observation.validate(&cfg.system)?;
    let report = estimate_constants(&sys, &cfg.observation, &cfg.horizons, cfg.samples, seed, dt)?;
    out.json("report.json", &report)?;
    report.write_csv(&out.path("constants.csv"), cfg.system.n)?;
    if let Some(source) = &cfg.inhomogeneous {
        let inh = uniform_inhomogeneous_check(&cfg.system, &cfg.observation, source, &cfg.horizons, cfg.samples, seed, dt)?;
        out.json("inhomogeneous.json", &inh)?;
    }
    Ok((true, seed))
}

/// HUM result without the control signals, which go to CSV.
#[derive(Debug, Clone, Serialize)]
pub struct HumSummary {
    pub success: bool,
    pub terminal_residual: f64,
    pub initial_energy: f64,
    pub relative_residual: f64,
    pub control_energy: f64,
    pub solver: SolverInfo,
    pub gramian_conditioning: Option<(f64, f64)>,
    pub uncontrolled_dimension: usize,
    pub dimension: usize,
    pub tolerance: f64,
    pub adjoint_terminal: CascadeState,
}

impl From<&HumSolution> for HumSummary {
    fn from(s: &HumSolution) -> Self {
        Self {
            success: s.success,
            terminal_residual: s.terminal_residual,
            initial_energy: s.initial_energy,
            relative_residual: s.relative_residual(),
            control_energy: s.control_energy,
            solver: s.solver.clone(),
            gramian_conditioning: s.gramian_conditioning,
            uncontrolled_dimension: s.uncontrolled_dimension,
            dimension: s.dimension,
            tolerance: s.tolerance,
            adjoint_terminal: s.adjoint_terminal.clone(),
        }
    }
}

/// Validated control problem with initial data built from the config.
pub fn hum_problem(cfg: &HumConfig, seed: u64, dt: f64) -> Result<ControlProblem, CliError> {
    let sys = CascadeSystem::assemble(&cfg.system)?;
    for spec in &cfg.controls {
        spec.validate(&cfg.system)?;
    }
    let problem = ControlProblem::with_filter(
        sys.clone(),
        sys.zero_state(),
        cfg.horizon,
        dt,
        cfg.controls.clone(),
        cfg.variant,
        cfg.mode_filter,
    )?;
    let y0 = cfg.initial.build(&sys, &problem.state_levels(), seed)?;
    Ok(problem.with_initial(y0)?)
}

fn hum(mut cfg: HumConfig, ov: &Overrides, out: &mut Output) -> Result<(bool, u64), CliError> {
    ov.apply_modes(&mut cfg.system.modes);
    let (seed, dt) = (ov.seed(cfg.seed), ov.dt(cfg.dt));
    let problem = hum_problem(&cfg, seed, dt)?;
    let sol = synthesize(&problem, &cfg.solver)?;
    out.json("solution.json", &HumSummary::from(&sol))?;
    for (j, v) in sol.controls.iter().enumerate() {
        v.write_csv(&out.path(&format!("control_{}.csv", j + 1)))?;
    }
    let traj = simulate_controlled(&problem, &sol.controls)?;
    let levels: Vec<Vec<i32>> = problem.state_levels().into_iter().map(|k| vec![k]).collect();
    ledger(&traj, &levels)?.with_config_hash(&cfg.system).write_csv(&out.path("ledger.csv"))?;
    Ok((sol.success, seed))
}

fn gramian(mut cfg: HumConfig, ov: &Overrides, out: &mut Output) -> Result<(bool, u64), CliError> {
    ov.apply_modes(&mut cfg.system.modes);
    let (seed, dt) = (ov.seed(cfg.seed), ov.dt(cfg.dt));
    let problem = hum_problem(&cfg, seed, dt)?;
    let g = dense_gramian(&problem)?;
    let mut w = csv::Writer::from_path(out.path("gramian.csv"))?;
    w.write_record((0..g.matrix.ncols()).map(|j| format!("c{j}")))?;
    for r in 0..g.matrix.nrows() {
        w.write_record(g.matrix.row(r).iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    let (m, n) = (problem.system().components(), problem.system().modes());
    let blocks: Vec<_> = (0..m)
        .map(|i| {
            let e = g.block_eigenvalues(&g.component_indices(i, m, n));
            json!({ "component": i + 1, "min_eigenvalue": e[0], "max_eigenvalue": e[e.len() - 1] })
        })
        .collect();
    let spd = g.min_eigenvalue() > SPECTRAL_CUTOFF * g.max_eigenvalue();
    out.json(
        "spectrum.json",
        &json!({
            "dimension": problem.dimension(),
            "horizon": problem.horizon(),
            "dt": dt,
            "asymmetry": g.asymmetry,
            "min_eigenvalue": g.min_eigenvalue(),
            "max_eigenvalue": g.max_eigenvalue(),
            "positive_definite": spd,
            "eigenvalues": g.eigenvalues,
            "component_blocks": blocks,
        }),
    )?;
    Ok((spd, seed))
}

fn check_coeff(cfg: CheckCoeffConfig, out: &mut Output) -> Result<(bool, u64), CliError> {
    let mut entries = Vec::new();
    for named in &cfg.coefficients {
        for &k in &cfg.levels {
            let compat = check_compat_1d(&named.coefficient, k, cfg.length);
            let stability = verify_hk_stability(&named.coefficient, k, &cfg.modes, cfg.length)?;
            entries.push(json!({
                "name": named.name,
                "level": k,
                "compat": compat.as_ref().ok(),
                "compat_error": compat.as_ref().err().map(|e| e.to_string()),
                "stability": stability,
            }));
        }
    }
    out.json("report.json", &json!({ "length": cfg.length, "modes": cfg.modes, "entries": entries }))?;
    Ok((true, 0))
}

fn simultaneous(mut cfg: SimultaneousConfig, ov: &Overrides, out: &mut Output) -> Result<(bool, u64), CliError> {
    ov.apply_modes(&mut cfg.system.modes);
    let (seed, dt) = (ov.seed(cfg.seed), ov.dt(cfg.dt));
    let (cascade_cfg, _) = simultaneous_to_cascade(&cfg.system);
    let sys = CascadeSystem::assemble(&cascade_cfg)?;
    let p0 = cfg.initial.build(&sys, &[3, 3, 3], seed)?;
    let sol = solve_simultaneous(&cfg.system, &p0, cfg.horizon, dt, &cfg.solver)?;
    out.json(
        "solution.json",
        &json!({
            "success": sol.success,
            "initial_energy": sol.initial_energy,
            "terminal_energy": sol.terminal_energy,
            "relative_energy": sol.relative_energy(),
            "hum": HumSummary::from(&sol.hum),
            "terminal": sol.terminal,
        }),
    )?;
    sol.h.write_csv(&out.path("h.csv"))?;
    Ok((sol.success, seed))
}

fn insensitize(mut cfg: InsensitizeConfig, ov: &Overrides, out: &mut Output) -> Result<(bool, u64), CliError> {
    let seed = ov.seed(cfg.seed);
    let problem = &mut cfg.problem;
    ov.apply_modes(&mut problem.modes);
    problem.dt = ov.dt(problem.dt);
    problem.y0 = fit_modes(&problem.y0, problem.modes)?;
    problem.y1 = fit_modes(&problem.y1, problem.modes)?;
    let report = insensitizing_pipeline(problem, &cfg.solver, cfg.directions, seed, cfg.epsilon)?;
    out.json(
        "report.json",
        &json!({
            "hum": HumSummary::from(&report.hum),
            "epsilon": report.epsilon,
            "seed": report.seed,
            "controlled": report.controlled,
            "uncontrolled": report.uncontrolled,
        }),
    )?;
    report.hum.controls[0].write_csv(&out.path("control.csv"))?;
    Ok((report.hum.success, seed))
}

/// Resolves a path relative to the directory holding the shipped configs.
pub fn shipped_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}
