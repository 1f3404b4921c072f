//! Command-line driver: scenarios in, analyses and JSON reports out.
//!
//! Exit codes: 0 success, 1 configuration or runtime error, 2 eigenvalue
//! non-convergence (`eigen` only), 3 integration timeout (`simulate`
//! only). `verify-paper` exits 0 exactly when every check passes.

use clap::{Args, Parser, Subcommand};
use kpp_lab::error::Error;
use kpp_lab::linalg::max_norm_diff;
use kpp_lab::model::{self, DomainGrid, StateField};
use kpp_lab::nonlinearity::{CooperativityReport, MonotonicityCounterexample};
use kpp_lab::parabolic::{self, IntegrationOutcome, IntegrationParams, TraceRow};
use kpp_lab::report::Report;
use kpp_lab::scenario::{self, Scenario};
use kpp_lab::spectral::{self, Classification, StabilityResult};
use kpp_lab::steady::{self};
use kpp_lab::{discretization, nonlinearity};
use rand::{Rng, SeedableRng};
use serde::Serialize;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "kpp-lab",
    version,
    about = "Numerical laboratory for coupled KPP reaction-diffusion systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Principal eigenvalue of the linearization at zero, optionally
    /// swept over diagonal shifts of the coupling matrix.
    Eigen(EigenArgs),
    /// Constant steady states: lattice multistart search, stability
    /// classification, pairwise order relations.
    Steady(SteadyArgs),
    /// Cooperativity analysis of the reaction field and the uniform
    /// monotonicity falsifier.
    CoopCheck(CoopCheckArgs),
    /// Time integration from a constant initial state, with outcome
    /// classification against the constant steady states.
    Simulate(SimulateArgs),
    /// Full counterexample checklist on one scenario; exit 0 iff every
    /// check passes.
    VerifyPaper(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Builtin scenario name or path to a scenario file.
    #[arg(long, default_value = "hei2004-counterexample")]
    scenario: String,
    /// Override the scenario grid resolution: comma-separated cell
    /// counts, one per axis.
    #[arg(long)]
    grid_cells: Option<String>,
    /// Write the JSON report to this path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Omit the generation timestamp so repeated runs are byte-identical.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct EigenArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Power-iteration tolerance.
    #[arg(long, default_value_t = spectral::DEFAULT_EIG_TOL)]
    tol: f64,
    /// Comma-separated diagonal shifts: for each value s the eigenvalue
    /// of the system with coupling A - s*I is computed.
    #[arg(long)]
    sweep: Option<String>,
    /// Write the (shift, lambda1) table to this CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SteadyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Search box upper corner "u1,...,un" (default: 2 * max coupling
    /// row sum / self-competition, per species). A "l1,..:u1,.." form is
    /// accepted; the lower corner is ignored here.
    #[arg(long = "box")]
    search_box: Option<String>,
    /// Seeds per axis for the multistart lattice.
    #[arg(long, default_value_t = 12)]
    lattice: usize,
    /// Newton tolerance for the root search.
    #[arg(long, default_value_t = steady::DEFAULT_NEWTON_TOL)]
    tol: f64,
    /// Write each state to "<prefix><index>.csv".
    #[arg(long = "csv")]
    csv_prefix: Option<String>,
}

#[derive(Args)]
struct CoopCheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Box to test: "u1,...,un" for [0, u], or "l1,..:u1,.." to give the
    /// falsifier a strictly positive lower corner.
    #[arg(long = "box")]
    search_box: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Constant initial state "v1,...,vn" (default 0.9 per species).
    #[arg(long)]
    u0: Option<String>,
    /// Draw the initial state uniformly from the default search box with
    /// this seed instead of giving --u0.
    #[arg(long)]
    seed: Option<u64>,
    /// Initial time step.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Time horizon.
    #[arg(long, default_value_t = 200.0)]
    t_max: f64,
    /// Write the per-window trajectory summary to this CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Eigen(a) => cmd_eigen(a),
        Command::Steady(a) => cmd_steady(a),
        Command::CoopCheck(a) => cmd_coop_check(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::VerifyPaper(a) => cmd_verify_paper(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

// ---------------------------------------------------------------- eigen

#[derive(Serialize)]
struct SweepRow {
    shift: f64,
    lambda1: f64,
    residual: f64,
    iterations: usize,
}

#[derive(Serialize)]
struct EigenResults {
    grid_cells: Vec<usize>,
    tolerance: f64,
    lambda1: f64,
    residual: f64,
    iterations: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sweep: Vec<SweepRow>,
}

fn cmd_eigen(args: EigenArgs) -> kpp_lab::Result<i32> {
    let (scn, grid) = load_scenario(&args.common)?;
    let eigen = |spec: &model::SystemSpec| {
        spectral::principal_eigenvalue(spec, &grid, args.tol, spectral::DEFAULT_EIG_MAX_ITERS)
    };
    let base = match eigen(&scn.spec) {
        Ok(r) => r,
        Err(Error::NonConvergence {
            iterations,
            residual,
        }) => {
            eprintln!(
                "error: power iteration did not converge after {iterations} iterations \
                 (residual {residual:.3e}); raise --tol or lower the resolution"
            );
            return Ok(2);
        }
        Err(e) => return Err(e),
    };

    let mut sweep = Vec::new();
    if let Some(spec_list) = &args.sweep {
        for shift in parse_f64_list(spec_list, "--sweep")? {
            let shifted = scn.spec.shifted(shift)?;
            match eigen(&shifted) {
                Ok(r) => sweep.push(SweepRow {
                    shift,
                    lambda1: r.lambda1,
                    residual: r.residual,
                    iterations: r.iterations,
                }),
                Err(Error::NonConvergence {
                    iterations,
                    residual,
                }) => {
                    eprintln!(
                        "error: shift {shift}: no convergence after {iterations} iterations \
                         (residual {residual:.3e})"
                    );
                    return Ok(2);
                }
                Err(e) => return Err(e),
            }
        }
    }

    println!("scenario: {}", scn.name);
    println!("grid cells: {}", fmt_usize_vec(grid.cells()));
    println!("lambda1: {}", base.lambda1);
    println!("residual: {:.3e}", base.residual);
    println!("iterations: {}", base.iterations);
    for row in &sweep {
        println!("shift {} -> lambda1 {}", row.shift, row.lambda1);
    }

    if let Some(path) = &args.csv {
        let mut text = String::from("shift,lambda1\n");
        if sweep.is_empty() {
            text.push_str(&format!("0,{}\n", base.lambda1));
        }
        for row in &sweep {
            text.push_str(&format!("{},{}\n", row.shift, row.lambda1));
        }
        std::fs::write(path, text)?;
    }

    let results = EigenResults {
        grid_cells: grid.cells().to_vec(),
        tolerance: args.tol,
        lambda1: base.lambda1,
        residual: base.residual,
        iterations: base.iterations,
        sweep,
    };
    emit_report(&args.common, "eigen", &scn, &results)?;
    Ok(0)
}

// --------------------------------------------------------------- steady

#[derive(Serialize)]
struct SteadyEntry {
    index: usize,
    values: Vec<f64>,
    residual: f64,
    positive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    stability: Option<StabilityResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stability_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
}

#[derive(Serialize)]
struct SteadyResults {
    search_upper: Vec<f64>,
    lattice: usize,
    tolerance: f64,
    states: Vec<SteadyEntry>,
    positive_count: usize,
    comparability: Vec<Vec<model::OrderRelation>>,
}

fn cmd_steady(args: SteadyArgs) -> kpp_lab::Result<i32> {
    let (scn, grid) = load_scenario(&args.common)?;
    let n = scn.spec.n;
    let upper = match &args.search_box {
        Some(s) => parse_box(s, n)?.1,
        None => steady::default_search_box(&scn.spec),
    };
    let states = steady::find_constant_states(&scn.spec, &upper, args.lattice, args.tol)?;

    let mut entries = Vec::new();
    for (index, u) in states.iter().enumerate() {
        let field = StateField::constant(grid.clone(), u);
        let residual = discretization::residual(&scn.spec, &grid, &field)?.max_abs();
        let (stability, stability_note) =
            match spectral::stability_of_constant_state(&scn.spec, &grid, u) {
                Ok(s) => (Some(s), None),
                Err(Error::NotSteady {
                    residual,
                    tolerance,
                }) => (
                    None,
                    Some(format!(
                        "residual {residual:.3e} above the stability gate {tolerance:.1e}; \
                         tighten --tol"
                    )),
                ),
                Err(e) => return Err(e),
            };
        let file = match &args.csv_prefix {
            Some(prefix) => {
                let name = format!("{prefix}{index}.csv");
                let mut w = std::io::BufWriter::new(std::fs::File::create(&name)?);
                model::write_state_csv(&field, &mut w)?;
                w.flush()?;
                Some(name)
            }
            None => None,
        };
        entries.push(SteadyEntry {
            index,
            values: u.clone(),
            residual,
            positive: u.iter().all(|v| *v > steady::POSITIVITY_THRESHOLD),
            stability,
            stability_note,
            file,
        });
    }
    let comparability = steady::comparability_matrix(&states, model::EQUALITY_TOL);
    let positive_count = entries.iter().filter(|e| e.positive).count();

    println!("scenario: {}", scn.name);
    println!("search box upper corner: {}", fmt_vec(&upper));
    println!("states found: {}", entries.len());
    for e in &entries {
        let class = match (&e.stability, &e.stability_note) {
            (Some(s), _) => format!(
                "{} (growth {})",
                classification_name(&s.classification),
                s.leading_growth_rate
            ),
            (None, Some(note)) => format!("unclassified: {note}"),
            (None, None) => "unclassified".into(),
        };
        println!(
            "state {}: {} residual {:.3e} {}",
            e.index,
            fmt_vec(&e.values),
            e.residual,
            class
        );
    }
    println!("positive states: {positive_count}");

    let results = SteadyResults {
        search_upper: upper,
        lattice: args.lattice,
        tolerance: args.tol,
        states: entries,
        positive_count,
        comparability,
    };
    emit_report(&args.common, "steady", &scn, &results)?;
    Ok(0)
}

// ----------------------------------------------------------- coop-check

#[derive(Serialize)]
struct CoopResults {
    box_lower: Vec<f64>,
    box_upper: Vec<f64>,
    cooperativity: CooperativityReport,
    falsifier_applicable: bool,
    monotonicity_counterexample: Option<MonotonicityCounterexample>,
}

fn cmd_coop_check(args: CoopCheckArgs) -> kpp_lab::Result<i32> {
    let (scn, _grid) = load_scenario(&args.common)?;
    let n = scn.spec.n;
    let (lower, upper) = match &args.search_box {
        Some(s) => parse_box(s, n)?,
        None => (vec![0.0; n], steady::default_search_box(&scn.spec)),
    };
    let cooperativity = nonlinearity::cooperativity_box(&scn.spec, &upper)?;
    let falsifier_applicable = lower.iter().all(|v| *v > 0.0);
    let counterexample = if falsifier_applicable {
        nonlinearity::falsify_uniform_monotonicity(&scn.spec, &lower, &upper)?
    } else {
        None
    };

    println!("scenario: {}", scn.name);
    println!(
        "largest cooperative box upper corner: {}",
        fmt_vec(&cooperativity.cooperative_box)
    );
    match &cooperativity.verdict {
        nonlinearity::CooperativityVerdict::CooperativeOnBox => {
            println!(
                "verdict: cooperative up to the queried corner {}",
                fmt_vec(&upper)
            );
        }
        nonlinearity::CooperativityVerdict::NotCooperativeAt { point, i, j, value } => {
            println!(
                "verdict: not cooperative up to the queried corner {}: dF{i}/du{j} = {value} at {}",
                fmt_vec(&upper),
                fmt_vec(point)
            );
        }
    }
    match (&counterexample, falsifier_applicable) {
        (Some(w), _) => println!(
            "uniform monotonicity fails: raising species {} by {} at {} moves \
             component {} of the reaction balance by {}",
            w.direction,
            w.epsilon,
            fmt_vec(&w.base_point),
            w.component,
            w.value
        ),
        (None, true) => println!(
            "no monotonicity counterexample found on [{}, {}]",
            fmt_vec(&lower),
            fmt_vec(&upper)
        ),
        (None, false) => println!(
            "monotonicity falsifier skipped: needs a strictly positive lower corner \
             (use --box l1,..:u1,..)"
        ),
    }

    let results = CoopResults {
        box_lower: lower,
        box_upper: upper,
        cooperativity,
        falsifier_applicable,
        monotonicity_counterexample: counterexample,
    };
    emit_report(&args.common, "coop-check", &scn, &results)?;
    Ok(0)
}

// ------------------------------------------------------------- simulate

#[derive(Serialize)]
struct SimulateResults {
    u0: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    dt: f64,
    t_max: f64,
    outcome: IntegrationOutcome,
    time: f64,
    steps: usize,
    final_dt: f64,
    final_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_state_constant: Option<Vec<f64>>,
    archive: Vec<Vec<f64>>,
}

fn cmd_simulate(args: SimulateArgs) -> kpp_lab::Result<i32> {
    let (scn, grid) = load_scenario(&args.common)?;
    let n = scn.spec.n;
    if args.u0.is_some() && args.seed.is_some() {
        return Err(Error::InvalidInput(
            "--u0 and --seed both fix the initial state; give only one".into(),
        ));
    }
    let u0_values = if let Some(s) = &args.u0 {
        let v = expect_len(parse_f64_list(s, "--u0")?, n, "--u0")?;
        if v.iter().any(|x| *x < 0.0) {
            return Err(Error::InvalidInput(
                "--u0 entries must be nonnegative".into(),
            ));
        }
        v
    } else if let Some(seed) = args.seed {
        let bounds = steady::default_search_box(&scn.spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        bounds
            .iter()
            .map(|hi| rng.gen_range(0.0..hi.max(1.0)))
            .collect()
    } else {
        vec![0.9; n]
    };

    let archive_values =
        steady::find_constant_states(&scn.spec, &steady::default_search_box(&scn.spec), 12, 1e-12)
            .unwrap_or_default();
    let archive: Vec<StateField> = archive_values
        .iter()
        .map(|u| StateField::constant(grid.clone(), u))
        .collect();

    let params = IntegrationParams {
        dt: args.dt,
        t_max: args.t_max,
        ..IntegrationParams::default()
    };
    let u0 = StateField::constant(grid.clone(), &u0_values);
    let run = parabolic::integrate(&scn.spec, &grid, &u0, &params, &archive)?;

    println!("scenario: {}", scn.name);
    println!("initial state: {}", fmt_vec(&u0_values));
    match run.outcome {
        IntegrationOutcome::Converged {
            archive_index: Some(k),
        } => println!(
            "outcome: converged to steady state {k} {}",
            fmt_vec(&archive_values[k])
        ),
        IntegrationOutcome::Converged {
            archive_index: None,
        } => println!("outcome: converged to a state outside the archive"),
        IntegrationOutcome::Extinction => println!("outcome: extinction"),
        IntegrationOutcome::Diverged => println!("outcome: diverged"),
        IntegrationOutcome::Timeout => println!("outcome: timeout"),
    }
    println!(
        "time: {}  steps: {}  final dt: {}",
        run.time, run.steps, run.final_dt
    );
    println!("final residual: {:.3e}", run.final_residual);
    let final_state_constant = run.final_state.as_constant(1e-6);
    if let Some(c) = &final_state_constant {
        println!("final state (constant): {}", fmt_vec(c));
    }

    if let Some(path) = &args.csv {
        write_trace_csv(path, n, &run.trace)?;
    }

    let timeout = run.outcome == IntegrationOutcome::Timeout;
    let results = SimulateResults {
        u0: u0_values,
        seed: args.seed,
        dt: args.dt,
        t_max: args.t_max,
        outcome: run.outcome,
        time: run.time,
        steps: run.steps,
        final_dt: run.final_dt,
        final_residual: run.final_residual,
        final_state_constant,
        archive: archive_values,
    };
    emit_report(&args.common, "simulate", &scn, &results)?;
    Ok(if timeout { 3 } else { 0 })
}

// --------------------------------------------------------- verify-paper

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct VerifyResults {
    provenance_warning: bool,
    deviations: Vec<String>,
    checks: Vec<Check>,
    all_pass: bool,
}

fn run_check<F: FnOnce() -> kpp_lab::Result<(bool, String)>>(name: &str, f: F) -> Check {
    let (pass, detail) = match f() {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e}")),
    };
    Check {
        name: name.into(),
        pass,
        detail,
    }
}

fn cmd_verify_paper(args: VerifyArgs) -> kpp_lab::Result<i32> {
    let (scn, grid) = load_scenario(&args.common)?;
    let canonical = scenario::counterexample();
    let deviations = spec_deviations(&scn.spec, &canonical.spec);
    let provenance_warning = !deviations.is_empty();
    if provenance_warning {
        println!(
            "warning: scenario system differs from the canonical counterexample ({})",
            deviations.join(", ")
        );
    }

    let s = (15.0f64 / 2.0).sqrt();
    let claimed = [
        vec![1.0, 1.0],
        vec![3.0 - s, 3.0 + s],
        vec![3.0 + s, 3.0 - s],
    ];
    let two_species = scn.spec.n == 2;
    let search = steady::verify_counterexample(&scn.spec, &grid);
    let mut checks = Vec::new();

    checks.push(run_check("claimed-roots-are-steady", || {
        if !two_species {
            return Ok((false, "scenario is not a two-species system".into()));
        }
        let mut worst = 0.0f64;
        for u in &claimed {
            let field = StateField::constant(grid.clone(), u);
            let r = discretization::residual(&scn.spec, &grid, &field)?.max_abs();
            worst = worst.max(r);
        }
        Ok((
            worst <= steady::COUNTEREXAMPLE_RESIDUAL_TOL,
            format!("max residual of the three claimed states: {worst:.3e}"),
        ))
    }));

    checks.push(run_check("root-search-complete", || {
        if !two_species {
            return Ok((false, "scenario is not a two-species system".into()));
        }
        let rep = search.as_ref().map_err(clone_error)?;
        let mut worst = 0.0f64;
        for cu in &claimed {
            let best = rep
                .positive_states
                .iter()
                .map(|f| max_norm_diff(f, cu))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        let pass = rep.positive_states.len() == 3 && rep.distinct && worst <= 1e-9;
        Ok((
            pass,
            format!(
                "{} positive roots, max deviation from the claimed states {:.3e}",
                rep.positive_states.len(),
                worst
            ),
        ))
    }));

    checks.push(run_check("principal-eigenvalue-negative", || {
        let eig = spectral::principal_eigenvalue(
            &scn.spec,
            &grid,
            spectral::DEFAULT_EIG_TOL,
            spectral::DEFAULT_EIG_MAX_ITERS,
        )?;
        let dev = (eig.lambda1 + 1.0).abs();
        Ok((
            dev <= 1e-8 && eig.lambda1 < 0.0,
            format!(
                "lambda1 = {} (deviation from -1: {dev:.3e}, residual {:.3e})",
                eig.lambda1, eig.residual
            ),
        ))
    }));

    checks.push(run_check("monotonicity-falsified", || {
        let lower = vec![1.0; scn.spec.n];
        let upper = vec![2.0; scn.spec.n];
        match nonlinearity::falsify_uniform_monotonicity(&scn.spec, &lower, &upper)? {
            Some(w) => Ok((
                w.value < 0.0,
                format!(
                    "raising species {} by {} moves component {} by {}",
                    w.direction, w.epsilon, w.component, w.value
                ),
            )),
            None => Ok((false, "no violation found on [1, 2]^n".into())),
        }
    }));

    checks.push(run_check("pairwise-incomparable", || {
        let rep = search.as_ref().map_err(clone_error)?;
        Ok((
            rep.all_incomparable,
            format!(
                "{} positive roots, every distinct pair incomparable: {}",
                rep.positive_states.len(),
                rep.all_incomparable
            ),
        ))
    }));

    checks.push(run_check("stability-pattern", || {
        let rep = search.as_ref().map_err(clone_error)?;
        let growths: Vec<String> = rep
            .stability
            .iter()
            .map(|s| format!("{}", s.leading_growth_rate))
            .collect();
        Ok((
            rep.stable_count >= 2 && rep.unstable_count >= 1,
            format!(
                "{} stable, {} unstable (growth rates: {})",
                rep.stable_count,
                rep.unstable_count,
                growths.join(", ")
            ),
        ))
    }));

    checks.push(run_check("basin-separation", || {
        if !two_species {
            return Ok((false, "scenario is not a two-species system".into()));
        }
        let all = steady::find_constant_states(
            &scn.spec,
            &steady::default_search_box(&scn.spec),
            12,
            1e-12,
        )?;
        let archive: Vec<StateField> = all
            .iter()
            .map(|u| StateField::constant(grid.clone(), u))
            .collect();
        let params = IntegrationParams::default();
        let scan = parabolic::basin_scan(&scn.spec, &grid, &[3.0, 3.0], 3, &params, &archive)?;
        let mut mismatches = Vec::new();
        for cell in &scan.cells {
            let (s0, s1) = (cell.seed[0], cell.seed[1]);
            let ok = if s0 == 0.0 && s1 == 0.0 {
                cell.outcome == IntegrationOutcome::Extinction
            } else {
                match (&cell.outcome, &cell.final_values) {
                    (IntegrationOutcome::Converged { .. }, Some(f)) => {
                        if s0 == s1 {
                            (f[0] - f[1]).abs() < 1e-6
                        } else if s0 > s1 {
                            f[0] > f[1] + 1.0
                        } else {
                            f[1] > f[0] + 1.0
                        }
                    }
                    _ => false,
                }
            };
            if !ok {
                mismatches.push(format!("seed {}", fmt_vec(&cell.seed)));
            }
        }
        if mismatches.is_empty() {
            Ok((
                true,
                format!(
                    "{} seeds: origin dies out, diagonal seeds reach the symmetric state, \
                     off-diagonal seeds keep their ordering",
                    scan.cells.len()
                ),
            ))
        } else {
            Ok((
                false,
                format!("unexpected endpoints at {}", mismatches.join(", ")),
            ))
        }
    }));

    let all_pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!(
            "[{}] {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    println!("{passed}/{} checks passed", checks.len());

    let results = VerifyResults {
        provenance_warning,
        deviations,
        checks,
        all_pass,
    };
    emit_report(&args.common, "verify-paper", &scn, &results)?;
    Ok(if all_pass { 0 } else { 1 })
}

/// Errors are not Clone; checks that share one search result re-render
/// the original error message instead.
fn clone_error(e: &Error) -> Error {
    Error::InvalidInput(format!("{e}"))
}

fn spec_deviations(spec: &model::SystemSpec, canonical: &model::SystemSpec) -> Vec<String> {
    let mut out = Vec::new();
    if spec.n != canonical.n {
        out.push("species count".into());
        return out;
    }
    if spec.d != canonical.d {
        out.push("diffusion coefficients".into());
    }
    match (spec.coupling.constant(), canonical.coupling.constant()) {
        (Some(a), Some(b)) if a.data() == b.data() => {}
        _ => out.push("coupling matrix".into()),
    }
    if spec.competition.data() != canonical.competition.data() {
        out.push("competition matrix".into());
    }
    out
}

// -------------------------------------------------------------- helpers

fn load_scenario(common: &CommonArgs) -> kpp_lab::Result<(Scenario, DomainGrid)> {
    let scn = scenario::resolve(&common.scenario)?;
    let grid = match &common.grid_cells {
        Some(s) => {
            let cells = parse_usize_list(s, "--grid-cells")?;
            if cells.len() != scn.grid.dimension() {
                return Err(Error::InvalidInput(format!(
                    "--grid-cells gives {} axes, scenario grid has {}",
                    cells.len(),
                    scn.grid.dimension()
                )));
            }
            DomainGrid::new(scn.grid.extent().to_vec(), cells)?
        }
        None => scn.grid.clone(),
    };
    for v in model::validate_spec(&scn.spec, &grid) {
        eprintln!("warning: structural hypothesis violated: {v:?}");
    }
    Ok((scn, grid))
}

fn emit_report<T: Serialize>(
    common: &CommonArgs,
    command: &str,
    scn: &Scenario,
    results: &T,
) -> kpp_lab::Result<()> {
    if let Some(path) = &common.json {
        Report::new(command, scn, !common.no_timestamp, results).write(path)?;
    }
    Ok(())
}

fn parse_f64_list(s: &str, what: &str) -> kpp_lab::Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("{what}: '{}' is not a number", t.trim())))
        })
        .collect()
}

fn parse_usize_list(s: &str, what: &str) -> kpp_lab::Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim().parse::<usize>().map_err(|_| {
                Error::InvalidInput(format!("{what}: '{}' is not a cell count", t.trim()))
            })
        })
        .collect()
}

fn expect_len(v: Vec<f64>, n: usize, what: &str) -> kpp_lab::Result<Vec<f64>> {
    if v.len() == n {
        Ok(v)
    } else {
        Err(Error::InvalidInput(format!(
            "{what} needs {n} entries, got {}",
            v.len()
        )))
    }
}

/// Parses "u1,..,un" as `[0, u]` or "l1,..:u1,.." as `[l, u]`.
fn parse_box(s: &str, n: usize) -> kpp_lab::Result<(Vec<f64>, Vec<f64>)> {
    match s.split_once(':') {
        Some((lo, hi)) => Ok((
            expect_len(
                parse_f64_list(lo, "--box lower corner")?,
                n,
                "--box lower corner",
            )?,
            expect_len(
                parse_f64_list(hi, "--box upper corner")?,
                n,
                "--box upper corner",
            )?,
        )),
        None => Ok((
            vec![0.0; n],
            expect_len(parse_f64_list(s, "--box")?, n, "--box")?,
        )),
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_usize_vec(v: &[usize]) -> String {
    let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    items.join(",")
}

fn classification_name(c: &Classification) -> &'static str {
    match c {
        Classification::Stable => "stable",
        Classification::Unstable => "unstable",
        Classification::Marginal { .. } => "marginal",
    }
}

fn write_trace_csv(path: &Path, species: usize, trace: &[TraceRow]) -> kpp_lab::Result<()> {
    let mut text = String::from("t");
    for i in 1..=species {
        text.push_str(&format!(",u{i}_max,u{i}_min,u{i}_mean"));
    }
    text.push('\n');
    for row in trace {
        text.push_str(&format!("{}", row.time));
        for i in 0..species {
            text.push_str(&format!(",{},{},{}", row.max[i], row.min[i], row.mean[i]));
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}
