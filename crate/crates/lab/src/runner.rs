//! Pipeline execution: wires configs to the core library, runs the
//! configured checks, and writes CSV/JSON artifacts.
//!
//! Artifacts carry no timestamps and every worker result is collected by
//! unit index, so identical config + seed give byte-identical outputs at
//! any thread count.

use crate::config::{
    parse_dispersal_g, parse_generator, parse_grid, parse_init, parse_kernel, parse_pipeline,
    ConfigError, Pipeline, RawConfig,
};
use crate::json::Json;
use crate::series_io::num_label;
use nonlocal_core::bounds::{
    constants_from_proof, dk_ode_parameters, lp_ode_parameters, ode_envelope, ode_envelope_t0,
    rescaled_epsilon0, rescaled_ode_parameters, ConstantLedger,
};
use nonlocal_core::dissipation::EntropySpec;
use nonlocal_core::evolution::{
    h_theorem_residual, heat_semigroup, run_experiment, step_rk4_general, step_with_symbol,
    Equation, RunConfig, SourceSpec,
};
use nonlocal_core::grid::{lp_norm, Field, GridSpec};
use nonlocal_core::kernels::{
    detailed_balance_residual, general_from_conv, make_standard_kernel, rescale_kernel,
    verify_hypothesis_j, KernelKind,
};
use nonlocal_core::spectral::kernel_symbol;
use nonlocal_core::verify::{
    check_dk_inequality, check_gradient_inequality, check_interpolation_chain, check_l2_inequality,
    check_main_inequality, estimate_best_constant, InequalityReport,
};
use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Runtime(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<nonlocal_core::Error> for RunError {
    fn from(e: nonlocal_core::Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        CheckOutcome {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub label: String,
    pub pipeline: Pipeline,
    pub out_dir: PathBuf,
    pub checks: Vec<CheckOutcome>,
    pub artifacts: Vec<PathBuf>,
    /// rendered summary (also written to summary.json)
    pub summary: String,
}

impl RunOutput {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: usize,
}

pub fn run_config_file(path: &Path, opts: &Options) -> Result<RunOutput, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        RunError::Config(ConfigError {
            path: path.display().to_string(),
            line: None,
            message: format!("cannot read config: {e}"),
        })
    })?;
    run_config_text(&text, &path.display().to_string(), opts)
}

pub fn run_config_text(text: &str, path: &str, opts: &Options) -> Result<RunOutput, RunError> {
    let raw = RawConfig::parse(text, path)?;
    let pipeline = parse_pipeline(&raw)?;
    let label = raw.get("label").unwrap_or("experiment").to_string();
    let seed = opts.seed.unwrap_or(raw.get_u64("seed")?.unwrap_or(0));
    let out_dir = resolve_out_dir(&raw, opts, &label)?;
    std::fs::create_dir_all(&out_dir)?;

    let mut output = match pipeline {
        Pipeline::Simulate => run_simulate(&raw, seed, &out_dir)?,
        Pipeline::VerifyInequality => run_verify(&raw, seed, &out_dir, opts.threads.max(1))?,
        Pipeline::Envelope => run_envelope(&raw, seed, &out_dir)?,
        Pipeline::Dispersal => run_dispersal(&raw, seed, &out_dir)?,
        Pipeline::Constants => run_constants(&raw, &out_dir)?,
    };
    raw.ensure_fully_consumed()?;
    output.label = label.clone();
    output.pipeline = pipeline;

    // summary.json: label, seed, pass/fail per enabled check
    let mut summary = Json::object();
    summary.push("label", Json::Str(label));
    summary.push("pipeline", Json::Str(pipeline.name().into()));
    summary.push("seed", Json::Int(seed as i64));
    summary.push("all_pass", Json::Bool(output.all_pass()));
    let mut checks = Vec::new();
    for c in &output.checks {
        let mut o = Json::object();
        o.push("name", Json::Str(c.name.clone()));
        o.push("pass", Json::Bool(c.pass));
        o.push("detail", Json::Str(c.detail.clone()));
        checks.push(o);
    }
    summary.push("checks", Json::Array(checks));
    summary.push(
        "artifacts",
        Json::Array(
            output
                .artifacts
                .iter()
                .map(|p| Json::Str(p.file_name().unwrap_or_default().to_string_lossy().into()))
                .collect(),
        ),
    );
    let rendered = summary.render();
    let summary_path = output.out_dir.join("summary.json");
    std::fs::write(&summary_path, &rendered)?;
    output.artifacts.push(summary_path);
    output.summary = rendered;
    Ok(output)
}

fn resolve_out_dir(raw: &RawConfig, opts: &Options, label: &str) -> Result<PathBuf, RunError> {
    if let Some(out) = &opts.out {
        return Ok(out.clone());
    }
    if let Some(out) = raw.get("out") {
        return Ok(PathBuf::from(out));
    }
    if let Ok(base) = std::env::var(crate::OUT_ENV) {
        return Ok(PathBuf::from(base).join(label));
    }
    Ok(PathBuf::from("out").join(label))
}

fn blank_output(out_dir: &Path) -> RunOutput {
    RunOutput {
        label: String::new(),
        pipeline: Pipeline::Simulate,
        out_dir: out_dir.to_path_buf(),
        checks: Vec::new(),
        artifacts: Vec::new(),
        summary: String::new(),
    }
}

/// Ledger built from the unit-ball indicator sampled on the experiment
/// grid (so the symbol bound is exact over the frequencies the run uses).
fn ball_ledger(grid: GridSpec, p: f64, k: f64) -> Result<ConstantLedger, RunError> {
    if grid.half_width() <= 1.0 {
        return Err(RunError::Runtime(
            "constant ledger needs L > 1 to sample the unit ball".into(),
        ));
    }
    let height = 1.0 / nonlocal_core::kernels::unit_ball_volume(grid.dim());
    let ball = make_standard_kernel(KernelKind::Box, 1.0, height, grid)?;
    let sym = kernel_symbol(&ball)?;
    Ok(constants_from_proof(grid.dim(), p, k, &sym)?)
}

/// Least-squares slope of `ln v` against `ln t` over samples with
/// `t_lo <= t <= t_hi`.
fn fitted_loglog_slope(times: &[f64], values: &[f64], t_lo: f64, t_hi: f64) -> Option<f64> {
    let mut pts = Vec::new();
    for (t, v) in times.iter().zip(values) {
        if *t >= t_lo && *t <= t_hi && *t > 0.0 && *v > 0.0 {
            pts.push((t.ln(), v.ln()));
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

fn parse_run_config(raw: &RawConfig, grid: GridSpec) -> Result<RunConfig, RunError> {
    let horizon = raw.require_f64("sim.horizon")?;
    let sample_dt = raw.require_f64("sim.sample_dt")?;
    let margin = raw.f64_or("sim.boundary_margin", grid.half_width() / 8.0)?;
    let mut cfg = RunConfig::new(horizon, sample_dt, margin);
    if let Some(ps) = raw.f64_list("sim.p_list")? {
        cfg.p_list = ps;
    }
    if let Some(ks) = raw.f64_list("sim.k_list")? {
        cfg.k_list = ks;
    }
    cfg.substeps = raw.usize_or("sim.substeps", 0)?;
    Ok(cfg)
}

/// Per-sample domination check `values[i] <= envelope(t_i)` over the
/// validity window; returns the first failing index.
fn check_domination(
    times: &[f64],
    values: &[f64],
    valid: usize,
    env: &[f64],
) -> (bool, Option<usize>) {
    for i in 0..valid.min(values.len()) {
        if values[i] > env[i] {
            return (false, Some(i));
        }
    }
    let _ = times;
    (true, None)
}

// ---------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------

fn run_simulate(raw: &RawConfig, seed: u64, out_dir: &Path) -> Result<RunOutput, RunError> {
    let grid = parse_grid(raw)?;
    let (kernel, r_test) = parse_kernel(raw, grid)?;
    let u0 = parse_init(raw, grid, seed)?;
    let cfg = parse_run_config(raw, grid)?;
    let equation = raw.get("equation").unwrap_or("convolution").to_string();
    let source = match raw.get("source.kind").unwrap_or("none") {
        "none" => None,
        "cubic" => Some(SourceSpec::cubic_absorption()),
        other => {
            return Err(RunError::Runtime(format!(
                "unknown source kind `{other}` (none, cubic)"
            )))
        }
    };

    let mut checks = Vec::new();
    let general;
    let mut series = match equation.as_str() {
        "convolution" => {
            if source.is_some() {
                return Err(RunError::Runtime(
                    "sources need equation = general (the exact propagator is linear)".into(),
                ));
            }
            run_experiment(&Equation::Convolution(&kernel), &u0, &cfg)?
        }
        "general" => {
            general = general_from_conv(&kernel)?;
            run_experiment(
                &Equation::General {
                    kernel: &general,
                    source: source.as_ref(),
                },
                &u0,
                &cfg,
            )?
        }
        other => {
            return Err(RunError::Runtime(format!(
                "unknown equation `{other}` (convolution, general; dispersal has its own pipeline)"
            )))
        }
    };

    // optional H-theorem closure check
    if raw.bool_or("checks.h_theorem", false)? {
        let limit = raw.f64_or("checks.h_theorem_limit", 1e-3)?;
        for p in series.p_list.clone() {
            let residual = h_theorem_residual(&series, p)?;
            checks.push(CheckOutcome::new(
                format!("h_theorem p={}", num_label(p)),
                residual <= limit,
                format!("residual {residual:.3e} (limit {limit:.1e})"),
            ));
        }
    }

    // optional decay-envelope domination
    if raw.bool_or("checks.envelope", false)? {
        let bounds = verify_hypothesis_j(&kernel, r_test)?;
        let norm1_0 = lp_norm(&u0, 1.0)?;
        let valid = series.valid_len();
        for (pi, p) in series.p_list.clone().iter().enumerate() {
            let ledger = ball_ledger(grid, *p, 0.0)?;
            let normp_0 = lp_norm(&u0, *p)?;
            let (_, c1, c2, gamma) = lp_ode_parameters(norm1_0, normp_0, &bounds, &ledger);
            let x0 = series.lp_pow[pi][0];
            let env: Vec<f64> = series
                .times
                .iter()
                .map(|t| ode_envelope(x0, c1, c2, gamma, *t))
                .collect();
            let (ok, first) = check_domination(&series.times, &series.lp_pow[pi], valid, &env);
            checks.push(CheckOutcome::new(
                format!("envelope p={}", num_label(*p)),
                ok,
                match first {
                    None => format!("dominated on {valid} valid samples"),
                    Some(i) => format!("exceeded at sample {i} (t = {})", series.times[i]),
                },
            ));
            series.envelope[pi] = Some(env);
        }
    }

    // optional comparison against the source-free run
    if raw.bool_or("checks.source_comparison", false)? {
        if source.is_none() {
            return Err(RunError::Runtime(
                "checks.source_comparison needs source.kind != none".into(),
            ));
        }
        let plain_kernel = general_from_conv(&kernel)?;
        let plain = run_experiment(
            &Equation::General {
                kernel: &plain_kernel,
                source: None,
            },
            &u0,
            &cfg,
        )?;
        let n = series.len().min(plain.len());
        let mut ok = true;
        let mut first = None;
        for i in 1..n {
            if series.lp_pow[0][i] >= plain.lp_pow[0][i] {
                ok = false;
                first = Some(i);
                break;
            }
        }
        checks.push(CheckOutcome::new(
            "source_below_source_free",
            ok,
            match first {
                None => format!("strictly below on {n} samples"),
                Some(i) => format!("not below at sample {i} (t = {})", series.times[i]),
            },
        ));
    }

    let series_path = out_dir.join("timeseries.csv");
    crate::series_io::write_series(&series_path, &series)?;
    let mut output = blank_output(out_dir);
    output.checks = checks;
    output.artifacts.push(series_path);
    Ok(output)
}

// ---------------------------------------------------------------------
// envelope
// ---------------------------------------------------------------------

fn run_envelope(raw: &RawConfig, seed: u64, out_dir: &Path) -> Result<RunOutput, RunError> {
    let grid = parse_grid(raw)?;
    let (kernel, r_test) = parse_kernel(raw, grid)?;
    let u0 = parse_init(raw, grid, seed)?;
    let mut cfg = parse_run_config(raw, grid)?;
    let equation = raw.get("equation").unwrap_or("convolution");
    if equation != "convolution" {
        return Err(RunError::Runtime(
            "the envelope pipeline drives the convolution equation".into(),
        ));
    }
    let p_list = raw
        .f64_list("envelope.p_list")?
        .unwrap_or_else(|| vec![2.0]);
    let k_list = raw.f64_list("envelope.k_list")?.unwrap_or_default();
    cfg.p_list = p_list.clone();
    cfg.k_list = k_list.clone();
    let bounds = verify_hypothesis_j(&kernel, r_test)?;
    let norm1_0 = lp_norm(&u0, 1.0)?;

    let mut checks = Vec::new();
    let mut artifacts = Vec::new();
    let mut report = Json::object();

    if let Some(epsilons) = raw.f64_list("envelope.epsilons")? {
        if raw.get("kernel.epsilon").is_some() {
            return Err(RunError::Runtime(
                "set either kernel.epsilon or envelope.epsilons, not both".into(),
            ));
        }
        // rescaled sweep: one run per epsilon under one envelope
        let reference = rescale_kernel(&kernel, 1.0)?;
        let c_of_j = reference.normalization();
        let mut eps_reports = Vec::new();
        let mut min_eps = f64::INFINITY;
        for &eps in &epsilons {
            let rescaled = rescale_kernel(&kernel, eps)?;
            min_eps = min_eps.min(eps);
            let series = run_experiment(&Equation::Convolution(rescaled.kernel()), &u0, &cfg)?;
            let valid = series.valid_len();
            let mut eps_obj = Json::object();
            eps_obj.push("epsilon", Json::Number(eps));
            eps_obj.push("valid_samples", Json::Int(valid as i64));
            let mut series_out = series.clone();
            for (pi, p) in series.p_list.clone().iter().enumerate() {
                let mut ledger = ball_ledger(grid, *p, 0.0)?;
                ledger.c_of_j = c_of_j;
                let normp_0 = lp_norm(&u0, *p)?;
                let (_, c1, c2, gamma) =
                    rescaled_ode_parameters(eps, norm1_0, normp_0, &bounds, &ledger);
                let x0 = series.lp_pow[pi][0];
                let env: Vec<f64> = series
                    .times
                    .iter()
                    .map(|t| ode_envelope(x0, c1, c2, gamma, *t))
                    .collect();
                let (ok, first) = check_domination(&series.times, &series.lp_pow[pi], valid, &env);
                checks.push(CheckOutcome::new(
                    format!("rescaled envelope eps={} p={}", eps, num_label(*p)),
                    ok,
                    match first {
                        None => format!("dominated on {valid} valid samples"),
                        Some(i) => format!("exceeded at sample {i} (t = {})", series.times[i]),
                    },
                ));
                let t0 = ode_envelope_t0(x0, c1, c2, gamma);
                let eps0 = rescaled_epsilon0(norm1_0, normp_0, &bounds, &ledger);
                eps_obj.push(&format!("t0_p{}", num_label(*p)), Json::Number(t0));
                eps_obj.push(&format!("eps0_p{}", num_label(*p)), Json::Number(eps0));
                if eps < eps0 {
                    checks.push(CheckOutcome::new(
                        format!("rescaled t0 vanishes eps={} p={}", eps, num_label(*p)),
                        t0 == 0.0,
                        format!("t0 = {t0:.3e}, eps0 = {eps0:.3e}"),
                    ));
                }
                series_out.envelope[pi] = Some(env);
            }
            let path = out_dir.join(format!("timeseries_eps{eps}.csv"));
            crate::series_io::write_series(&path, &series_out)?;
            artifacts.push(path);
            eps_reports.push(eps_obj);
        }
        report.push("epsilons", Json::Array(eps_reports));

        // smallest epsilon against the exact heat semigroup
        let t_heat = raw.f64_or("envelope.heat_check_t", 1.0)?;
        let heat_tol = raw.f64_or("envelope.heat_tol", 0.05)?;
        let rescaled = rescale_kernel(&kernel, min_eps)?;
        let sym = kernel_symbol(rescaled.kernel())?;
        let u_eps = step_with_symbol(&sym, &u0, t_heat)?;
        let u_heat = heat_semigroup(&u0, t_heat)?;
        let diff = Field::new(
            grid,
            u_eps
                .values()
                .iter()
                .zip(u_heat.values())
                .map(|(a, b)| a - b)
                .collect(),
        )?;
        let rel = lp_norm(&diff, 2.0)? / lp_norm(&u_heat, 2.0)?;
        checks.push(CheckOutcome::new(
            format!("heat agreement eps={min_eps} t={t_heat}"),
            rel <= heat_tol,
            format!("relative L2 gap {rel:.4e} (tolerance {heat_tol})"),
        ));
        report.push("heat_relative_l2_gap", Json::Number(rel));
    } else {
        // plain run with L^p (and derivative) envelopes
        let series = run_experiment(&Equation::Convolution(&kernel), &u0, &cfg)?;
        let valid = series.valid_len();
        let t_star = series.times[valid.saturating_sub(1)];
        report.push("valid_samples", Json::Int(valid as i64));
        report.push("t_star", Json::Number(t_star));
        let mut series_out = series.clone();
        for (pi, p) in series.p_list.clone().iter().enumerate() {
            let ledger = ball_ledger(grid, *p, 0.0)?;
            let normp_0 = lp_norm(&u0, *p)?;
            let (_, c1, c2, gamma) = lp_ode_parameters(norm1_0, normp_0, &bounds, &ledger);
            let x0 = series.lp_pow[pi][0];
            let env: Vec<f64> = series
                .times
                .iter()
                .map(|t| ode_envelope(x0, c1, c2, gamma, *t))
                .collect();
            let (ok, first) = check_domination(&series.times, &series.lp_pow[pi], valid, &env);
            checks.push(CheckOutcome::new(
                format!("envelope p={}", num_label(*p)),
                ok,
                match first {
                    None => format!("dominated on {valid} valid samples"),
                    Some(i) => format!("exceeded at sample {i} (t = {})", series.times[i]),
                },
            ));
            report.push(
                &format!("t0_p{}", num_label(*p)),
                Json::Number(ode_envelope_t0(x0, c1, c2, gamma)),
            );
            series_out.envelope[pi] = Some(env);
        }
        if let Some(limit) = raw.get_f64("envelope.slope_limit")? {
            let slope =
                fitted_loglog_slope(&series.times, &series.lp_pow[0], t_star / 10.0, t_star)
                    .ok_or_else(|| RunError::Runtime("too few samples for the slope fit".into()))?;
            checks.push(CheckOutcome::new(
                "late-time slope lp2",
                slope <= limit,
                format!("fitted {slope:.4} (limit {limit})"),
            ));
            report.push("slope_lp2", Json::Number(slope));
        }
        for (ki, k) in series.k_list.clone().iter().enumerate() {
            let ledger = ball_ledger(grid, 2.0, *k)?;
            let (_, c1, c2, gamma) = dk_ode_parameters(norm1_0, 1.0, &bounds, &ledger, *k);
            let x0 = series.dk_norms[ki][0];
            let env: Vec<f64> = series
                .times
                .iter()
                .map(|t| ode_envelope(x0, c1, c2, gamma, *t))
                .collect();
            let (ok, first) = check_domination(&series.times, &series.dk_norms[ki], valid, &env);
            checks.push(CheckOutcome::new(
                format!("derivative envelope k={}", num_label(*k)),
                ok,
                match first {
                    None => format!("dominated on {valid} valid samples"),
                    Some(i) => format!("exceeded at sample {i} (t = {})", series.times[i]),
                },
            ));
            if let Some(limit) = raw.get_f64("envelope.k_slope_limit")? {
                let slope =
                    fitted_loglog_slope(&series.times, &series.dk_norms[ki], t_star / 10.0, t_star)
                        .ok_or_else(|| {
                            RunError::Runtime("too few samples for the slope fit".into())
                        })?;
                checks.push(CheckOutcome::new(
                    format!("late-time slope dk{}", num_label(*k)),
                    slope <= limit,
                    format!("fitted {slope:.4} (limit {limit})"),
                ));
                report.push(&format!("slope_dk{}", num_label(*k)), Json::Number(slope));
            }
        }
        let path = out_dir.join("timeseries.csv");
        crate::series_io::write_series(&path, &series_out)?;
        artifacts.push(path);
    }

    let report_path = out_dir.join("envelope.json");
    std::fs::write(&report_path, report.render())?;
    artifacts.push(report_path);
    let mut output = blank_output(out_dir);
    output.checks = checks;
    output.artifacts = artifacts;
    Ok(output)
}

// ---------------------------------------------------------------------
// verify-inequality
// ---------------------------------------------------------------------

struct VerifyUnit {
    name: String,
    report: Option<InequalityReport>,
    pass: bool,
    detail: String,
    extra: Vec<(String, Json)>,
}

fn run_verify(
    raw: &RawConfig,
    seed: u64,
    out_dir: &Path,
    threads: usize,
) -> Result<RunOutput, RunError> {
    let grid = parse_grid(raw)?;
    let (kernel, r_test) = parse_kernel(raw, grid)?;
    let bounds = verify_hypothesis_j(&kernel, r_test)?;
    let trials = raw.usize_or("verify.trials", 1000)?;
    let check = raw.require("verify.check")?.to_string();
    let p_list = raw.f64_list("verify.p_list")?.unwrap_or_else(|| vec![2.0]);
    let k_list = raw.f64_list("verify.k_list")?.unwrap_or_else(|| vec![0.0]);
    let refine_steps = raw.usize_or("verify.refine_steps", 5)?;
    let default_margin = kernel.support_radius() + 4.0 * grid.spacing();
    let gen = parse_generator(raw, grid, default_margin.max(grid.half_width() / 8.0), seed)?;

    type Job<'a> = Box<dyn FnOnce() -> Result<VerifyUnit, RunError> + Send + 'a>;
    let mut jobs: Vec<Job> = Vec::new();
    match check.as_str() {
        "main" => {
            for &p in &p_list {
                let (kernel, bounds, gen) = (&kernel, &bounds, &gen);
                jobs.push(Box::new(move || {
                    let ledger = ball_ledger(grid, p, 0.0)?;
                    let report = check_main_inequality(kernel, bounds, &ledger, p, gen, trials)?;
                    let mut unit = unit_from_report(format!("main p={}", num_label(p)), report);
                    unit.extra.push((
                        "max_combination_margin".into(),
                        Json::Number(max_combination_margin(&report, &ledger)),
                    ));
                    Ok(unit)
                }));
            }
        }
        "l2" => {
            let (kernel, bounds, gen) = (&kernel, &bounds, &gen);
            jobs.push(Box::new(move || {
                let ledger = ball_ledger(grid, 2.0, 0.0)?;
                let report = check_l2_inequality(kernel, bounds, &ledger, gen, trials)?;
                let mut unit = unit_from_report("l2".to_string(), report);
                unit.extra.push((
                    "max_combination_margin".into(),
                    Json::Number(max_combination_margin(&report, &ledger)),
                ));
                Ok(unit)
            }));
        }
        "dk" => {
            for &k in &k_list {
                let (kernel, bounds, gen) = (&kernel, &bounds, &gen);
                jobs.push(Box::new(move || {
                    let ledger = ball_ledger(grid, 2.0, k)?;
                    let report = check_dk_inequality(kernel, bounds, &ledger, k, gen, trials)?;
                    let mut unit = unit_from_report(format!("dk k={}", num_label(k)), report);
                    let (c2k, c3k) =
                        nonlocal_core::bounds::dk_case_constants(grid.dim(), k, ledger.c1);
                    unit.extra.push((
                        "max_combination_margin".into(),
                        Json::Number(report.min_ratio * c2k.min(c3k) / c2k.max(c3k)),
                    ));
                    Ok(unit)
                }));
            }
        }
        "gradient" => {
            let (kernel, bounds, gen) = (&kernel, &bounds, &gen);
            jobs.push(Box::new(move || {
                let ledger = ball_ledger(grid, 2.0, 1.0)?;
                let report = check_gradient_inequality(kernel, bounds, &ledger, gen, trials)?;
                Ok(unit_from_report("gradient".to_string(), report))
            }));
        }
        "interpolation" => {
            for &p in &p_list {
                let gen = &gen;
                jobs.push(Box::new(move || {
                    let report = check_interpolation_chain(gen, trials, p)?;
                    Ok(unit_from_report(
                        format!("interpolation p={}", num_label(p)),
                        report,
                    ))
                }));
            }
        }
        "best_constant" => {
            for &p in &p_list {
                let (kernel, bounds, gen) = (&kernel, &bounds, &gen);
                jobs.push(Box::new(move || {
                    let ledger = ball_ledger(grid, p, 0.0)?;
                    let best =
                        estimate_best_constant(kernel, bounds, p, gen, trials, refine_steps)?;
                    let pass = best >= ledger.c_main;
                    Ok(VerifyUnit {
                        name: format!("best_constant p={}", num_label(p)),
                        report: None,
                        pass,
                        detail: format!(
                            "empirical {best:.6e} vs certified {:.6e} (ratio {:.2})",
                            ledger.c_main,
                            best / ledger.c_main
                        ),
                        extra: vec![
                            ("empirical".into(), Json::Number(best)),
                            ("certified".into(), Json::Number(ledger.c_main)),
                        ],
                    })
                }));
            }
        }
        other => {
            return Err(RunError::Runtime(format!(
            "unknown verify.check `{other}` (main, l2, dk, gradient, interpolation, best_constant)"
        )))
        }
    }

    let units = run_jobs(jobs, threads)?;
    let mut checks = Vec::new();
    let mut unit_reports = Vec::new();
    for unit in units {
        checks.push(CheckOutcome::new(
            unit.name.clone(),
            unit.pass,
            unit.detail.clone(),
        ));
        let mut o = Json::object();
        o.push("name", Json::Str(unit.name));
        o.push("pass", Json::Bool(unit.pass));
        if let Some(r) = unit.report {
            o.push("trials", Json::Int(r.trials as i64));
            o.push("violations", Json::Int(r.violations as i64));
            o.push("min_ratio", Json::Number(r.min_ratio));
            o.push("min_margin", Json::Number(r.min_margin));
            o.push("worst_seed", Json::Int(r.worst_seed as i64));
        }
        for (k, v) in unit.extra {
            o.push(&k, v);
        }
        unit_reports.push(o);
    }
    let mut report = Json::object();
    report.push("check", Json::Str(check));
    report.push("units", Json::Array(unit_reports));
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, report.render())?;

    let mut output = blank_output(out_dir);
    output.checks = checks;
    output.artifacts.push(report_path);
    Ok(output)
}

/// The certified checks run at the min of the two case constants. This
/// margin reports how the observed worst ratio fares against the larger
/// (max) combination: a value >= 1 means even that combination held
/// empirically on this trial family.
fn max_combination_margin(report: &InequalityReport, ledger: &ConstantLedger) -> f64 {
    report.min_ratio * ledger.c4 / ledger.c2.max(ledger.c3)
}

fn unit_from_report(name: String, report: InequalityReport) -> VerifyUnit {
    VerifyUnit {
        name,
        pass: report.violations == 0,
        detail: format!(
            "{} trials, {} violations, min ratio {:.4}",
            report.trials, report.violations, report.min_ratio
        ),
        report: Some(report),
        extra: Vec::new(),
    }
}

/// Run independent jobs on up to `threads` workers; results come back in
/// job order regardless of scheduling.
fn run_jobs<'a>(
    jobs: Vec<Box<dyn FnOnce() -> Result<VerifyUnit, RunError> + Send + 'a>>,
    threads: usize,
) -> Result<Vec<VerifyUnit>, RunError> {
    let queue: Mutex<
        VecDeque<(
            usize,
            Box<dyn FnOnce() -> Result<VerifyUnit, RunError> + Send>,
        )>,
    > = Mutex::new(jobs.into_iter().enumerate().collect());
    let n = queue.lock().unwrap().len();
    let results: Mutex<Vec<Option<Result<VerifyUnit, RunError>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let workers = threads.min(n).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop_front();
                match job {
                    Some((idx, job)) => {
                        let out = job();
                        results.lock().unwrap()[idx] = Some(out);
                    }
                    None => break,
                }
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("job did not run"))
        .collect()
}

// ---------------------------------------------------------------------
// dispersal
// ---------------------------------------------------------------------

fn run_dispersal(raw: &RawConfig, seed: u64, out_dir: &Path) -> Result<RunOutput, RunError> {
    let grid = parse_grid(raw)?;
    let (kernel, _r_test) = parse_kernel(raw, grid)?;
    let g = parse_dispersal_g(raw, grid)?;
    let u0 = parse_init(raw, grid, seed)?;
    if u0.values().iter().any(|v| *v < 0.0) {
        return Err(RunError::Runtime("dispersal runs need u0 >= 0".into()));
    }
    let p = raw.f64_or("dispersal.p", 2.0)?;
    let horizon = raw.require_f64("sim.horizon")?;
    let sample_dt = raw.require_f64("sim.sample_dt")?;
    let margin = raw.f64_or("sim.boundary_margin", grid.half_width() / 8.0)?;
    let tol = raw.f64_or("dispersal.tol", 1e-10)?;
    let max_iter = raw.usize_or("dispersal.max_iter", 100_000)?;
    let residual_limit = raw.f64_or("dispersal.residual_limit", 1e-8)?;

    let run = nonlocal_core::dispersal::run_dispersal_decay_with(
        &kernel, &g, &u0, p, horizon, sample_dt, margin, tol, max_iter,
    )?;
    let ledger = ball_ledger(grid, p, 0.0)?;
    let report = nonlocal_core::dispersal::check_general_decay(
        &run.kernel,
        run.equilibrium.m,
        &run.bounds,
        &ledger,
        &run.series,
        p,
    )?;

    let mut checks = Vec::new();
    checks.push(CheckOutcome::new(
        "equilibrium residual",
        run.equilibrium.residual <= residual_limit,
        format!(
            "residual {:.3e} after {} iterations (limit {residual_limit:.1e})",
            run.equilibrium.residual, run.equilibrium.iterations
        ),
    ));
    // strict monotonicity of the relative entropy over the valid window
    let valid = run.series.valid_len();
    let pi = run.series.p_index(p).expect("p recorded");
    let x = run.series.entropy[pi].as_ref().expect("entropy recorded");
    let mut strict = true;
    let mut strict_at = None;
    for i in 1..valid {
        if !(x[i] < x[i - 1]) {
            strict = false;
            strict_at = Some(i);
            break;
        }
    }
    checks.push(CheckOutcome::new(
        "entropy strictly nonincreasing",
        strict,
        match strict_at {
            None => format!("strict decay over {valid} samples"),
            Some(i) => format!("no decrease at sample {i}"),
        },
    ));
    checks.push(CheckOutcome::new(
        "lp dominated by entropy",
        report.lp_bound_ok,
        format!(
            "m = {:.6}; first failure {:?}",
            run.equilibrium.m, report.first_lp_failure
        ),
    ));
    checks.push(CheckOutcome::new(
        "dissipation dominates box comparison",
        report.dissipation_bound_ok,
        format!(
            "r = {:.4}, R = {:.4}; first failure {:?}",
            run.bounds.r, run.bounds.radius, report.first_dissipation_failure
        ),
    ));
    checks.push(CheckOutcome::new(
        "entropy below comparison envelope",
        report.envelope_ok,
        format!("first failure {:?}", report.first_envelope_failure),
    ));

    if let Some(limit) = raw.get_f64("dispersal.slope_limit")? {
        let t_star = run.series.times[valid.saturating_sub(1)];
        let slope = fitted_loglog_slope(&run.series.times, x, t_star / 5.0, t_star)
            .ok_or_else(|| RunError::Runtime("too few samples for the slope fit".into()))?;
        checks.push(CheckOutcome::new(
            "entropy decay slope",
            slope <= limit,
            format!("fitted {slope:.4} (limit {limit})"),
        ));
    }

    if raw.bool_or("checks.h_theorem", false)? {
        let limit = raw.f64_or("checks.h_theorem_limit", 1e-3)?;
        // d/dt ‖u‖_p^p closes against the recorded entropy dissipation
        let residual = h_theorem_residual(&run.series, p)?;
        checks.push(CheckOutcome::new(
            format!("h_theorem p={}", num_label(p)),
            residual <= limit,
            format!("residual {residual:.3e} (limit {limit:.1e})"),
        ));
    }

    if raw.bool_or("checks.entropy_catalog", false)? {
        let entropies = [
            ("s^2", EntropySpec::square()),
            ("|s|^3", EntropySpec::power(3.0).map_err(RunError::from)?),
            ("s^4", EntropySpec::fourth()),
        ];
        let hn = grid.cell_volume();
        let w = run.equilibrium.u_inf.values();
        let x_of = |u: &Field, e: &EntropySpec| -> f64 {
            u.values()
                .iter()
                .zip(w)
                .map(|(ui, wi)| e.phi(ui / wi) * wi)
                .sum::<f64>()
                * hn
        };
        let catalog_dt = (horizon / 200.0).max(sample_dt);
        let steps = (horizon / catalog_dt).round() as usize;
        let substep_dt = catalog_dt / 4.0;
        let mut u = u0.clone();
        let mut last: Vec<f64> = entropies.iter().map(|(_, e)| x_of(&u, e)).collect();
        let mut monotone = [true, true, true];
        for _ in 0..steps {
            for _ in 0..4 {
                u = step_rk4_general(&run.kernel, &u, substep_dt, None)?;
            }
            for (ei, (_, e)) in entropies.iter().enumerate() {
                let xv = x_of(&u, e);
                if xv > last[ei] * (1.0 + 1e-10) {
                    monotone[ei] = false;
                }
                last[ei] = xv;
            }
        }
        for (ei, (name, _)) in entropies.iter().enumerate() {
            checks.push(CheckOutcome::new(
                format!("entropy monotone {name}"),
                monotone[ei],
                format!("sampled every {catalog_dt} time units"),
            ));
        }
    }

    // artifacts
    let mut eq_json = Json::object();
    eq_json.push("residual", Json::Number(run.equilibrium.residual));
    eq_json.push("iterations", Json::Int(run.equilibrium.iterations as i64));
    eq_json.push("m", Json::Number(run.equilibrium.m));
    eq_json.push("raw_column_defect", Json::Number(run.raw_column_defect));
    eq_json.push(
        "detailed_balance_residual",
        Json::Number(detailed_balance_residual(
            &run.kernel,
            &run.equilibrium.u_inf,
        )?),
    );
    eq_json.push("bounds_r", Json::Number(run.bounds.r));
    eq_json.push("bounds_radius", Json::Number(run.bounds.radius));
    eq_json.push("bounds_c_k", Json::Number(run.bounds.c_k));
    let eq_path = out_dir.join("equilibrium.json");
    std::fs::write(&eq_path, eq_json.render())?;
    let u_inf_path = out_dir.join("equilibrium_field.csv");
    crate::field_io::write_field(&u_inf_path, &run.equilibrium.u_inf)?;
    let series_path = out_dir.join("timeseries.csv");
    crate::series_io::write_series(&series_path, &run.series)?;

    let mut checks_json = Json::object();
    checks_json.push("checked_samples", Json::Int(report.checked_samples as i64));
    checks_json.push(
        "dissipation_bound_ok",
        Json::Bool(report.dissipation_bound_ok),
    );
    checks_json.push("envelope_ok", Json::Bool(report.envelope_ok));
    checks_json.push("lp_bound_ok", Json::Bool(report.lp_bound_ok));
    let checks_path = out_dir.join("dispersal_checks.json");
    std::fs::write(&checks_path, checks_json.render())?;

    let mut output = blank_output(out_dir);
    output.checks = checks;
    output.artifacts = vec![eq_path, u_inf_path, series_path, checks_path];
    Ok(output)
}

// ---------------------------------------------------------------------
// constants
// ---------------------------------------------------------------------

fn run_constants(raw: &RawConfig, out_dir: &Path) -> Result<RunOutput, RunError> {
    let dim = raw.usize_or("constants.dim", 1)?;
    let p = raw.f64_or("constants.p", 2.0)?;
    let k = raw.f64_or("constants.k", 0.0)?;
    let grid = if raw.get("grid.n").is_some() {
        parse_grid(raw)?
    } else {
        match dim {
            1 => GridSpec::new(1, 4.0 * std::f64::consts::PI, 4096),
            2 => GridSpec::new(2, 8.0, 128),
            _ => GridSpec::new(3, 4.0, 32),
        }
        .map_err(RunError::from)?
    };
    if grid.dim() != dim {
        return Err(RunError::Runtime(
            "constants.dim disagrees with the grid block".into(),
        ));
    }
    let ledger = ball_ledger(grid, p, k)?;
    let json = ledger_json(&ledger, grid);
    let rendered = json.render();
    print!("{rendered}");
    let path = out_dir.join("constants.json");
    std::fs::write(&path, &rendered)?;
    let mut output = blank_output(out_dir);
    output.artifacts.push(path);
    output.checks.push(CheckOutcome::new(
        "ledger entries positive and finite",
        [
            ledger.c1,
            ledger.c2,
            ledger.c3,
            ledger.c4,
            ledger.c_p,
            ledger.mu_k,
            ledger.c_cor,
            ledger.c_main,
            ledger.gamma_p,
            ledger.gamma_k,
            ledger.c_of_j,
            ledger.c_dk,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite()),
        "all chain constants",
    ));
    Ok(output)
}

pub fn ledger_json(ledger: &ConstantLedger, grid: GridSpec) -> Json {
    fn entry(value: f64, note: &str) -> Json {
        let mut o = Json::object();
        o.push("value", Json::Number(value));
        o.push("note", Json::Str(note.into()));
        o
    }
    let mut obj = Json::object();
    obj.push("N", Json::Int(ledger.dim as i64));
    obj.push("p", Json::Number(ledger.p));
    obj.push("k", Json::Number(ledger.k));
    obj.push(
        "reference_grid",
        Json::Str(format!(
            "n = {}, L = {}",
            grid.points_per_axis(),
            grid.half_width()
        )),
    );
    obj.push("omega_N", entry(ledger.omega_n, "volume of the unit ball"));
    obj.push(
        "C1",
        entry(
            ledger.c1,
            "sup over nonzero grid frequencies of min{1, |xi|^2} / (1 - ball symbol)",
        ),
    );
    obj.push(
        "C2",
        entry(
            ledger.c2,
            "low-frequency case of the Fourier splitting: omega_N^{-2/N} C1^{-1} (1 + N/2)^{-(N+2)/N} N/2",
        ),
    );
    obj.push(
        "C3",
        entry(
            ledger.c3,
            "high-frequency case of the Fourier splitting: C1^{-1} (1 + 2/N)^{-1}",
        ),
    );
    obj.push(
        "C4",
        entry(
            ledger.c4,
            "certified two-case combination min{C2, C3} (each case bounds only its own term)",
        ),
    );
    obj.push(
        "c_p",
        entry(
            ledger.c_p,
            "numerical sharp constant of (a-b)(a^{p-1}-b^{p-1}) >= c(p)(a^{p/2}-b^{p/2})^2",
        ),
    );
    obj.push(
        "mu_k",
        entry(ledger.mu_k, "interpolation exponent 2/(N + 2 + 2k)"),
    );
    obj.push(
        "C_cor",
        entry(ledger.c_cor, "L2 inequality constant omega_N * C4"),
    );
    obj.push(
        "C_main",
        entry(ledger.c_main, "Lp inequality constant c_p * omega_N * C4"),
    );
    obj.push(
        "gamma_p",
        entry(ledger.gamma_p, "decay exponent 2/(N (p - 1))"),
    );
    obj.push(
        "gamma_k",
        entry(ledger.gamma_k, "derivative decay exponent 2/(N + 2k)"),
    );
    obj.push(
        "C_of_J",
        entry(
            ledger.c_of_j,
            "heat-scaling normalization of the reference ball kernel (from symbol curvature)",
        ),
    );
    obj.push(
        "C_dk",
        entry(
            ledger.c_dk,
            "derivative-chain constant omega_N * min of the two k-order case constants",
        ),
    );
    obj
}
