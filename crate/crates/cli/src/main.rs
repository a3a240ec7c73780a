//! `impulse-qvi`: validate specs, compute reachable sets and value grids,
//! synthesize controls and check the results.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde_json::{json, Value};

use impulse_qvi::cost::{evaluate_cost, CostBreakdown};
use impulse_qvi::dynamics::{check_trajectory_bounds, default_step, integrate, Impulse, ImpulseControl};
use impulse_qvi::geometry::{check_idempotence, CandidateSet};
use impulse_qvi::grid::SpatialGrid;
use impulse_qvi::io::RunManifest;
use impulse_qvi::model::validate::{boundary_samples, check_compatibility, validate_spec, SamplePlan};
use impulse_qvi::reach::{compute_reachable, uniform_partition, ReachOptions};
use impulse_qvi::solver::{solve, solve_unconstrained_compare, synthesize_control, Mode, SolveOptions, ValueGrid};
use impulse_qvi::verify::{
    compare_mask_to_oracle, compare_to_oracle, continuity_modulus, dpp_check, growth_bound_check, tol_acc,
    viscosity_residual, AnalyticOracle,
};
use impulse_qvi::ProblemSpec;

#[derive(Parser)]
#[command(name = "impulse-qvi", version, about = "Impulse control with a terminal state constraint")]
struct Cli {
    /// Worker threads for grid sweeps (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probe the structural hypotheses and the compatibility condition.
    Validate(ValidateArgs),
    /// Backward reachable sets on a grid.
    Reach(ReachArgs),
    /// Value function on a space-time grid.
    Solve(SolveArgs),
    /// Control from the stored policy, with its realized cost.
    Synthesize(SynthesizeArgs),
    /// Dynamic programming, residual, modulus and growth checks.
    Verify(VerifyArgs),
    /// Constrained and unconstrained solves side by side.
    CompareUnconstrained(CompareArgs),
    /// Evaluate a closed-form value or reachable set.
    Oracle(OracleArgs),
    /// Integrate a given impulse control and price it.
    Trajectory(TrajectoryArgs),
}

#[derive(Args)]
struct SpecArg {
    /// Problem spec (JSON).
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// Cells per axis: `N` for every axis or `N1,N2,...`.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<usize>,
    /// Number of time steps.
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value = "constrained")]
    mode: Mode,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    spec: SpecArg,
    /// Seed for sampled lattices in two or more dimensions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "validate.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ReachArgs {
    #[command(flatten)]
    spec: SpecArg,
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<usize>,
    /// Number of equal partition steps.
    #[arg(long)]
    partition: usize,
    /// Start of the partition (default 0).
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    /// Set oracle to compare against.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value = "mask.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    spec: SpecArg,
    #[command(flatten)]
    grid: GridArgs,
    /// Value oracle to compare against.
    #[arg(long)]
    name: Option<String>,
    /// Tolerance for the oracle comparison (default `2 (dx + dt)`).
    #[arg(long)]
    tol_acc: Option<f64>,
    #[arg(long, default_value = "values.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    spec: SpecArg,
    /// Previously saved value grid; otherwise `--grid` and `--steps` solve.
    #[arg(long, conflicts_with_all = ["grid", "steps"])]
    values: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    grid: Vec<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value = "constrained")]
    mode: Mode,
    /// Start point, e.g. `t=0,x=-1` or `t=0,x=0.5;1`.
    #[arg(long)]
    at: String,
    /// Allowed gap between realized cost and value (default `2 (dx + dt)`).
    #[arg(long)]
    tol_acc: Option<f64>,
    #[arg(long, default_value = "control.json")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    spec: SpecArg,
    #[arg(long, conflicts_with_all = ["grid", "steps"])]
    values: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    grid: Vec<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value = "constrained")]
    mode: Mode,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    tol_acc: Option<f64>,
    /// Accepted for interface symmetry; the checks are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "verify.json")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    spec: SpecArg,
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<usize>,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value = "compare.json")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// One of the closed forms, e.g. `zero_costs` or `forward_unit`.
    #[arg(long)]
    name: String,
    /// Query point, e.g. `t=0,x=-1.3,T=1`.
    #[arg(long)]
    at: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[command(flatten)]
    spec: SpecArg,
    #[arg(long)]
    at: String,
    /// Impulses `tau:xi1;xi2` separated by `/`, e.g. `0.5:-0.25/1:0.1`.
    #[arg(long, conflicts_with = "control_file")]
    control: Option<String>,
    /// JSON control as written by `synthesize`.
    #[arg(long)]
    control_file: Option<PathBuf>,
    /// Integration step (default `T / 1000`).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
}

/// `t`, `x` and optional `T` from `key=value` pairs.
struct Point {
    t: f64,
    x: Vec<f64>,
    horizon: Option<f64>,
}

fn parse_point(s: &str) -> Result<Point> {
    let (mut t, mut x, mut horizon) = (None, None, None);
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| anyhow!("expected key=value in `{part}`"))?;
        match k.trim() {
            "t" => t = Some(v.trim().parse::<f64>()?),
            "T" => horizon = Some(v.trim().parse::<f64>()?),
            "x" => x = Some(v.split(';').map(|c| c.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>()?),
            other => bail!("unknown key `{other}` in point"),
        }
    }
    Ok(Point { t: t.unwrap_or(0.0), x: x.ok_or_else(|| anyhow!("point needs x=..."))?, horizon })
}

fn parse_control(s: &str) -> Result<ImpulseControl> {
    let mut impulses = Vec::new();
    for item in s.split('/').map(str::trim).filter(|p| !p.is_empty()) {
        let (tau, xi) = item.split_once(':').ok_or_else(|| anyhow!("expected tau:xi in `{item}`"))?;
        let xi = xi.split(';').map(|c| c.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>()?;
        impulses.push(Impulse { tau: tau.trim().parse()?, xi });
    }
    Ok(ImpulseControl { impulses })
}

fn load_spec(path: &Path) -> Result<ProblemSpec> {
    ProblemSpec::load(path).with_context(|| format!("loading {}", path.display()))
}

fn spatial_grid(spec: &ProblemSpec, cells: &[usize]) -> Result<SpatialGrid> {
    let dom = spec.domain.as_ref().ok_or_else(|| anyhow!("the spec has no `domain` box to grid"))?;
    let cells = match cells.len() {
        1 => vec![cells[0]; spec.dimension],
        n if n == spec.dimension => cells.to_vec(),
        n => bail!("--grid has {n} entries for a {}-dimensional spec", spec.dimension),
    };
    Ok(SpatialGrid::new(dom.lower.clone(), dom.upper.clone(), cells)?)
}

fn oracle_by_name(name: &str) -> Result<AnalyticOracle> {
    AnalyticOracle::from_name(name)
        .ok_or_else(|| anyhow!("unknown oracle `{name}`; known: {}", AnalyticOracle::NAMES.join(", ")))
}

/// `values.csv` -> `values.manifest.json`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn finish(mut manifest: RunManifest, out: &Path, started: Instant) -> Result<bool> {
    manifest.timings_ms.insert("total".into(), json!(started.elapsed().as_secs_f64() * 1e3));
    let path = sibling(out, "manifest.json");
    manifest.save(&path)?;
    for c in &manifest.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", c.name, c.detail);
    }
    println!("manifest: {}", path.display());
    Ok(manifest.passed)
}

fn obtain_values(spec: &ProblemSpec, values: &Option<PathBuf>, grid: &[usize], steps: Option<usize>, mode: Mode) -> Result<ValueGrid> {
    match values {
        Some(p) => {
            let vg = ValueGrid::load(p).with_context(|| format!("loading {}", p.display()))?;
            if vg.spec_hash != spec.hash() {
                bail!("{} was computed for a different spec", p.display());
            }
            Ok(vg)
        }
        None => {
            let steps = steps.ok_or_else(|| anyhow!("either --values or --grid with --steps is required"))?;
            if grid.is_empty() {
                bail!("either --values or --grid with --steps is required");
            }
            Ok(solve(spec, &spatial_grid(spec, grid)?, &SolveOptions::new(steps).mode(mode))?)
        }
    }
}

fn cmd_validate(a: &ValidateArgs) -> Result<bool> {
    let started = Instant::now();
    let mut spec = load_spec(&a.spec.spec)?;
    spec.validation.seed = a.seed;
    let plan = SamplePlan::from_spec(&spec);
    let report = validate_spec(&spec, &plan)?;
    print!("{}", report.to_text());
    let cands = CandidateSet::for_spec(&spec, None);
    let compat = check_compatibility(&spec, &cands, &boundary_samples(&spec, &plan));
    let violated = compat.samples.iter().filter(|s| !s.holds).count();
    if compat.passed {
        println!("compatibility          PASS          {} samples", compat.samples.len());
    } else {
        warn!("compatibility condition fails at {violated} of {} samples", compat.samples.len());
        println!("compatibility          WARN          violated at {violated} of {} samples", compat.samples.len());
    }
    let xs: Vec<Vec<f64>> = plan.xs.clone();
    let idem = check_idempotence(&spec, &cands, &xs);
    println!(
        "terminal identity      {}          violation {:.3e}, landing gap {:.3e}",
        if idem.identity_holds && idem.compatible { "PASS" } else { "WARN" },
        idem.identity_violation,
        idem.landing_gap
    );
    let mut m = RunManifest::new(&spec.hash(), "validate");
    m.parameters.insert("seed".into(), json!(a.seed));
    m.tolerances.insert("margin".into(), json!(spec.validation.tolerance));
    write_json(
        &a.out,
        &json!({"spec_hash": spec.hash(), "hypotheses": report, "compatibility": compat, "idempotence": idem}),
    )?;
    m.outputs.push(a.out.clone());
    // only a negative subadditivity margin is asserted; the rest is reported
    let fatal = report.has_fatal_failure();
    m.check("subadditivity", !fatal, format!("worst margin {:.3e}", report.get("subadditivity").map_or(0.0, |c| c.worst_margin)));
    finish(m, &a.out, started)
}

fn cmd_reach(a: &ReachArgs) -> Result<bool> {
    let started = Instant::now();
    let spec = load_spec(&a.spec.spec)?;
    let grid = spatial_grid(&spec, &a.grid)?;
    let part = uniform_partition(a.t0, spec.horizon, a.partition);
    let mask = compute_reachable(&spec, &grid, &part, &ReachOptions::default())?;
    mask.write_csv(&a.out)?;
    let mut m = RunManifest::new(&spec.hash(), "reach");
    m.parameters.insert("grid".into(), json!(grid.cells()));
    m.parameters.insert("partition".into(), json!(part));
    m.parameters.insert("pad".into(), json!(mask.pad));
    m.timings_ms.insert("reach".into(), json!(started.elapsed().as_secs_f64() * 1e3));
    m.outputs.push(a.out.clone());
    for (k, &t) in part.iter().enumerate() {
        info!("t = {t}: {} of {} nodes reachable", mask.count(k), grid.len());
    }
    if let Some(name) = &a.name {
        let cmp = compare_mask_to_oracle(&mask, &oracle_by_name(name)?, 1.0);
        m.check("oracle_mask", cmp.passed, format!("{} nodes compared, mismatches {:?}", cmp.compared, cmp.mismatches));
    }
    finish(m, &a.out, started)
}

fn cmd_solve(a: &SolveArgs) -> Result<bool> {
    let started = Instant::now();
    let spec = load_spec(&a.spec.spec)?;
    let grid = spatial_grid(&spec, &a.grid.grid)?;
    let vg = solve(&spec, &grid, &SolveOptions::new(a.grid.steps).mode(a.grid.mode))?;
    if !vg.flagged.is_empty() {
        warn!("obstacle iteration hit its cap on {} slices", vg.flagged.len());
    }
    vg.write_csv(&spec, &a.out, None)?;
    let json_path = sibling(&a.out, "grid.json");
    vg.save(&json_path)?;
    let mut m = RunManifest::new(&spec.hash(), "solve");
    m.parameters.insert("grid".into(), json!(grid.cells()));
    m.parameters.insert("steps".into(), json!(a.grid.steps));
    m.parameters.insert("mode".into(), json!(a.grid.mode));
    m.timings_ms.insert("solve".into(), json!(vg.elapsed_ms));
    m.outputs.extend([a.out.clone(), json_path]);
    let dpp = dpp_check(&spec, &vg);
    m.check("dpp", dpp.holds(1e-9), format!("intervention {:.2e}, continuation {:.2e}", dpp.intervention_violation, dpp.continuation_violation));
    if let Some(name) = &a.name {
        let tol = a.tol_acc.unwrap_or_else(|| tol_acc(&vg));
        m.tolerances.insert("tol_acc".into(), json!(tol));
        let o = oracle_by_name(name)?;
        let table = compare_to_oracle(&vg, &o, 2.0, tol);
        m.check(
            "oracle",
            o.self_check().passed && table.passed,
            format!("max error {:.3e} (tol {:.3e}), {} finiteness mismatches", table.max_abs, tol, table.finiteness_mismatches),
        );
    }
    finish(m, &a.out, started)
}

fn cmd_synthesize(a: &SynthesizeArgs) -> Result<bool> {
    let started = Instant::now();
    let spec = load_spec(&a.spec.spec)?;
    let p = parse_point(&a.at)?;
    let vg = obtain_values(&spec, &a.values, &a.grid, a.steps, a.mode)?;
    let cands = vg.candidate_set(&spec);
    let ev = impulse_qvi::solver::Evaluator::new(&spec, &vg, &cands);
    let k = vg.times.iter().position(|&tk| tk >= p.t - 1e-12).unwrap_or(vg.steps());
    let value = if (vg.times[k] - p.t).abs() <= 1e-12 { ev.value_at(k, &p.x) } else { f64::NAN };
    let ctrl = synthesize_control(&spec, &vg, p.t, &p.x)?;
    let cost: CostBreakdown = evaluate_cost(&spec, p.t, &p.x, &ctrl, default_step(&spec))?;
    let tol = a.tol_acc.unwrap_or_else(|| tol_acc(&vg));
    write_json(
        &a.out,
        &json!({"spec_hash": spec.hash(), "t": p.t, "x": p.x, "value": impulse_qvi::io::fmt_f64(value), "control": ctrl, "cost": cost}),
    )?;
    let mut m = RunManifest::new(&spec.hash(), "synthesize");
    m.parameters.insert("at".into(), json!(a.at));
    m.tolerances.insert("tol_sim".into(), json!(tol));
    m.outputs.push(a.out.clone());
    println!("{} impulses, realized cost {}, value {}", ctrl.len(), cost.total, value);
    let gap = cost.total - value;
    m.check("realized_cost", value.is_nan() || gap <= tol, format!("cost - value = {gap:.3e} (tol {tol:.3e})"));
    finish(m, &a.out, started)
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let started = Instant::now();
    let spec = load_spec(&a.spec.spec)?;
    let vg = obtain_values(&spec, &a.values, &a.grid, a.steps, a.mode)?;
    let tol = a.tol_acc.unwrap_or_else(|| tol_acc(&vg));
    let dpp = dpp_check(&spec, &vg);
    let oracle = a.name.as_deref().map(oracle_by_name).transpose()?;
    let exclude = oracle.map(|o| {
        let band = 2.0 * vg.grid.min_spacing();
        move |t: f64, x: &[f64]| o.breakpoint_distance(t, x) < band
    });
    let residual = viscosity_residual(&spec, &vg, exclude.as_ref().map(|e| e as &(dyn Fn(f64, &[f64]) -> bool + Sync)));
    let modulus = continuity_modulus(&spec, &vg);
    let growth = growth_bound_check(&spec, &vg);
    let table = oracle.map(|o| compare_to_oracle(&vg, &o, 2.0, tol));
    write_json(
        &a.out,
        &json!({"spec_hash": spec.hash(), "dpp": dpp, "residual": residual, "modulus": modulus, "growth": growth, "oracle": table}),
    )?;
    let mut m = RunManifest::new(&spec.hash(), "verify");
    m.parameters.insert("seed".into(), json!(a.seed));
    m.tolerances.insert("tol_acc".into(), json!(tol));
    m.tolerances.insert("dpp".into(), json!(1e-9));
    m.outputs.push(a.out.clone());
    println!(
        "residual max {:.3e} ({:.0}% excluded), modulus C {:.3} over {} pairs",
        residual.max_residual,
        100.0 * residual.excluded_fraction,
        modulus.c_hat,
        modulus.pairs
    );
    m.check("dpp", dpp.holds(1e-9), format!("intervention {:.2e}, continuation {:.2e}", dpp.intervention_violation, dpp.continuation_violation));
    m.check(
        "post_jump_gap",
        dpp.post_jump_ok(spec.costs.l.delta0, tol),
        format!("{:.3e} over {} jump nodes", dpp.post_jump_gap, dpp.jump_nodes),
    );
    m.check("growth", growth.passed, format!("worst slack {:.3e}", growth.worst_slack));
    if let Some(t) = table {
        m.check("oracle", t.passed, format!("max error {:.3e} (tol {:.3e})", t.max_abs, tol));
    }
    finish(m, &a.out, started)
}

fn cmd_compare(a: &CompareArgs) -> Result<bool> {
    let started = Instant::now();
    let spec = load_spec(&a.spec.spec)?;
    let grid = spatial_grid(&spec, &a.grid)?;
    let cmp = solve_unconstrained_compare(&spec, &grid, &SolveOptions::new(a.steps))?;
    let r = &cmp.report;
    write_json(&a.out, &json!({"spec_hash": spec.hash(), "report": r}))?;
    let mut m = RunManifest::new(&spec.hash(), "compare-unconstrained");
    m.parameters.insert("grid".into(), json!(grid.cells()));
    m.parameters.insert("steps".into(), json!(a.steps));
    m.outputs.push(a.out.clone());
    println!(
        "max |V - V~| = {:.3e} over {} nodes ({:.3e} away from the box edge), {} nodes differ",
        r.max_abs_diff, r.both_finite, r.max_abs_diff_away_from_edge, r.differing
    );
    m.check("terminal_slices_identical", r.terminal_bitwise_equal, format!("obstacle gap {:.3e}", r.terminal_obstacle_gap));
    finish(m, &a.out, started)
}

fn cmd_oracle(a: &OracleArgs) -> Result<bool> {
    let mut o = oracle_by_name(&a.name)?;
    let p = parse_point(&a.at)?;
    if let Some(h) = p.horizon {
        o.horizon = h;
    }
    let out = match (o.value(p.t, &p.x), o.reachable(p.t, &p.x)) {
        (Some(v), _) => {
            println!("{}", impulse_qvi::io::fmt_f64(v));
            json!({"name": a.name, "t": p.t, "x": p.x, "T": o.horizon, "value": impulse_qvi::io::fmt_f64(v)})
        }
        (None, Some(r)) => {
            println!("{}", if r { "reachable" } else { "unreachable" });
            json!({"name": a.name, "t": p.t, "x": p.x, "T": o.horizon, "reachable": r})
        }
        (None, None) => bail!("the `{}` closed form does not cover t = {}", a.name, p.t),
    };
    if let Some(path) = &a.out {
        write_json(path, &out)?;
    }
    Ok(true)
}

fn cmd_trajectory(a: &TrajectoryArgs) -> Result<bool> {
    let started = Instant::now();
    let spec = load_spec(&a.spec.spec)?;
    let p = parse_point(&a.at)?;
    let ctrl = match (&a.control, &a.control_file) {
        (Some(s), _) => parse_control(s)?,
        (None, Some(path)) => {
            let v: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            serde_json::from_value(v.get("control").cloned().unwrap_or(v))?
        }
        (None, None) => ImpulseControl::trivial(),
    };
    let dt = a.dt.unwrap_or_else(|| default_step(&spec));
    let traj = integrate(&spec, p.t, &p.x, &ctrl, dt)?;
    traj.write_csv(&a.out, &spec.hash())?;
    let cost = evaluate_cost(&spec, p.t, &p.x, &ctrl, dt)?;
    let cost_path = sibling(&a.out, "cost.json");
    write_json(&cost_path, &json!({"spec_hash": spec.hash(), "cost": cost}))?;
    let bounds = check_trajectory_bounds(&spec, &traj, p.t, &p.x, &ctrl);
    let mut m = RunManifest::new(&spec.hash(), "trajectory");
    m.parameters.insert("at".into(), json!(a.at));
    m.parameters.insert("dt".into(), json!(dt));
    m.outputs.extend([a.out.clone(), cost_path]);
    println!("cost {} (feasible: {})", impulse_qvi::io::fmt_f64(cost.total), cost.feasible);
    m.check("trajectory_bounds", bounds.passed, format!("norm slack {:.3e}, modulus slack {:.3e}", bounds.norm_slack, bounds.modulus_slack));
    finish(m, &a.out, started)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Reach(a) => cmd_reach(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Verify(a) => cmd_verify(a),
        Command::CompareUnconstrained(a) => cmd_compare(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Trajectory(a) => cmd_trajectory(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IMPULSE_QVI_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
