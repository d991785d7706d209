use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lindode::budget::{
    lower_bound_report, predict_direct_access, predict_sqrt_access, scaling_harness, comparison_report, CostParams, HarnessConfig,
    QueryBudget, COMPARISON_METHODS, UNIT_CONSTANTS,
};
use lindode::extractor::{
    echo_estimate, environment_marker, expval_estimate, grover_extract, purify_via_kraus, shots_emulate, GroverPlan,
};
use lindode::lindblad::{check_state, propagate_interval, propagator_channel, LindbladSpec};
use lindode::ndme::{
    dilate, dissipative_parts, initial_state, inhomogeneous_solve, second_stage_for, solve_with_jumps, BlockReadout,
    REFERENCE_TOL,
};
use lindode::numkernel::{inner, normalized, spectral_norm, vec_sub, vnorm, PSD_TOL};
use lindode::odecore::{
    check_semi_dissipative, reference_solve, OdeProblem, TimeDependentMatrix, DEFAULT_GRID, SEMI_DISSIPATIVE_TOL,
};
use lindode::showcase::{gibbs_prepare, partition_estimate, GIBBS_FIDELITY_TOL, MAX_GIBBS_QUBITS, Z_RTOL};
use lindode::sqrtpoly::{direct_access_pipeline_with_gap, fit_odd_sqrt};
use lindode::{Error, C64};
use serde_json::{json, Value};

use crate::problem::{Problem, ProblemFile};
use crate::report::{measured, pairs, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;

const DEFAULT_DIRECT_EPS: f64 = 1e-4;
const DEFAULT_INHOMOGENEOUS_EPS: f64 = 1e-3;
const DEFAULT_SLICES: usize = 64;
const DEFAULT_EXPVAL_TOL: f64 = 1e-6;
const EXTRACT_TOL: f64 = 1e-9;
const SUCCESS_LAW_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "lindode", version, about = "Linear ODE solving through dilated Lindbladian dynamics")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every sampled quantity.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Emulate finite measurement statistics with this many shots.
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    /// Relative tolerance of the reference integrator.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub rtol: f64,
    /// Write the report here (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    /// Jump operator `√(2B)` given exactly.
    Sqrt,
    /// Jump operator built from `B` by the odd square-root polynomial.
    Direct,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the problem and compare with the reference integrator.
    Solve(SolveArgs),
    /// Estimate the echo `⟨φ₀|μ(T)⟩`.
    Echo(EstimateArgs),
    /// Estimate `⟨μ(T)|O|μ(T)⟩`.
    Expval(EstimateArgs),
    /// Purify the dilated channel and amplitude-amplify the solution state.
    Extract(FileArgs),
    /// Prepare a purified Gibbs state of `B = V` and estimate `Z`.
    Gibbs(GibbsArgs),
    /// Fit and certify the odd square-root polynomial.
    Poly(PolyArgs),
    /// Query-count comparison table and lower bounds.
    Budget(BudgetArgs),
    /// Fit scaling exponents of measured quantities.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct FileArgs {
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub file: PathBuf,
    /// Error target; defaults depend on the model.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum, default_value_t = Model::Sqrt)]
    pub model: Model,
    /// Midpoint slices for a problem with a source term.
    #[arg(long)]
    pub inhomogeneous_slices: Option<usize>,
    /// Trajectory rows for CSV output.
    #[arg(long, default_value_t = 11)]
    pub samples: usize,
    /// Also write the CSV trajectory here.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub file: PathBuf,
    /// Tolerance against the reference value.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GibbsArgs {
    pub file: PathBuf,
    /// Inverse temperature; overrides the file's `beta`.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PolyArgs {
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long = "time", default_value_t = 10.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, default_value_t = 10.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1)]
    pub jumps: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Fixed `ε` of the degree axis.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// `‖V‖` scale of the propagation fixture.
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
}

/// Why a command stopped early.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Assertion { message: String, check: Option<(f64, f64)> },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::ReferenceMismatch { error, tolerance } => Failure::Assertion {
                message,
                check: Some((error, tolerance)),
            },
            Error::Cptp(_) | Error::NotCompletelyPositive { .. } | Error::MarkerBlock { .. } | Error::StepUnderflow { .. } => {
                Failure::Assertion { message, check: None }
            }
            _ => Failure::Input(message),
        }
    }
}

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

type Outcome = Result<(), Failure>;

fn load(path: &Path, report: &mut Report) -> Result<Problem, Failure> {
    let src = std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let file = ProblemFile::parse(&src).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let problem = file.validate(&src).map_err(|e| input(format!("{}: {e}", path.display())))?;
    report.input("problem_file", path.display().to_string());
    report.input("problem", &file);
    Ok(problem)
}

fn require_homogeneous(p: &OdeProblem, what: &str) -> Outcome {
    if p.b.is_some() {
        return Err(input(format!("{what} needs a problem without a source term b")));
    }
    Ok(())
}

/// Checks semi-dissipativity, recording the worst eigenvalue.
fn semi_dissipative(p: &OdeProblem, report: &mut Report) -> Outcome {
    let verdict = check_semi_dissipative(&p.v, p.t_end, DEFAULT_GRID)?;
    report.result("min_eigenvalue_B", verdict.worst_eigenvalue, SEMI_DISSIPATIVE_TOL);
    verdict.into_result()?;
    Ok(())
}

fn reference_unnormalized(p: &OdeProblem, rtol: f64) -> Result<Vec<C64>, Failure> {
    Ok(reference_solve(p, rtol)?.final_state().to_vec())
}

fn csv_header(d: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for i in 0..d {
        cols.push(format!("re{i}"));
        cols.push(format!("im{i}"));
    }
    cols.push("eta".into());
    cols.join(",")
}

fn csv_row(t: f64, mu: &[C64], eta: f64) -> String {
    let mut cols = vec![t.to_string()];
    for z in mu {
        cols.push(z.re.to_string());
        cols.push(z.im.to_string());
    }
    cols.push(eta.to_string());
    cols.join(",")
}

fn sample_times(t_end: f64, samples: usize) -> Vec<f64> {
    if samples < 2 {
        return vec![t_end];
    }
    (0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect()
}

fn unit_or_zero(v: &[C64]) -> Vec<C64> {
    if vnorm(v) > 0.0 {
        normalized(v)
    } else {
        v.to_vec()
    }
}

/// Normalized `μ(t)` and `η(t)` read from the encoding at each sample time.
fn encoded_trajectory(spec: &LindbladSpec, p: &OdeProblem, samples: usize) -> Result<String, Failure> {
    let mut rho = initial_state(&p.mu0, &p.mu0)?.into_matrix();
    let mut rows = vec![csv_header(p.dim())];
    let mut t_prev = 0.0;
    for t in sample_times(p.t_end, samples) {
        if t > t_prev {
            rho = propagate_interval(spec, &rho, t_prev, t, 1)?.0;
            t_prev = t;
        }
        let readout = BlockReadout::from_state(&rho, &p.mu0);
        rows.push(csv_row(t, &unit_or_zero(&readout.solution(&p.mu0)), readout.eta));
    }
    Ok(rows.join("\n") + "\n")
}

fn inhomogeneous_trajectory(p: &OdeProblem, m: usize, samples: usize) -> Result<String, Failure> {
    let mut rows = vec![csv_header(p.dim())];
    for t in sample_times(p.t_end, samples) {
        let (mu, eta) = if t == 0.0 {
            (p.mu0.clone(), 1.0)
        } else {
            let head = OdeProblem::new(p.n, p.v.clone(), p.mu0.clone(), p.b.clone(), t)?;
            inhomogeneous_solve(&head, m)?
        };
        rows.push(csv_row(t, &mu, eta));
    }
    Ok(rows.join("\n") + "\n")
}

fn sqrt_access_budget(p: &OdeProblem, eps: f64, eta: f64, report: &mut Report) {
    let params = CostParams::new(p.v.max_norm(p.t_end), p.t_end, eps, eta.min(1.0));
    match predict_sqrt_access(&params) {
        Ok(b) => {
            let q = if p.v.is_constant() { b.time_independent } else { b.time_dependent };
            report.result_raw("predicted_queries", budget_json(&q));
        }
        Err(e) => report.note(format!("no query prediction: {e}")),
    }
}

fn solve(args: &SolveArgs, g: &GlobalArgs, report: &mut Report) -> Outcome {
    let prob = load(&args.file, report)?;
    let p = &prob.ode;
    report.input("model", format!("{:?}", args.model).to_lowercase());
    semi_dissipative(p, report)?;

    if p.b.is_some() {
        if args.model == Model::Direct {
            return Err(input("--model direct handles homogeneous problems only"));
        }
        let m = args.inhomogeneous_slices.unwrap_or(DEFAULT_SLICES);
        let eps = args.eps.unwrap_or(DEFAULT_INHOMOGENEOUS_EPS);
        report.input("inhomogeneous_slices", m);
        report.input("eps", eps);
        let (mu, eta) = inhomogeneous_solve(p, m)?;
        let reference = reference_unnormalized(p, g.rtol)?;
        let ref_eta = vnorm(&reference);
        let err = vnorm(&vec_sub(&mu, &normalized(&reference)));
        report.result("eta", eta, eps * ref_eta);
        report.result("mu_t", pairs(&mu), eps);
        report.result("reference_eta", ref_eta, g.rtol * ref_eta);
        report.result("error", err, eps);
        report.check_le("normalized_error", err, eps);
        if g.format == Format::Csv || args.trajectory.is_some() {
            report.csv = Some(inhomogeneous_trajectory(p, m, args.samples)?);
        }
        return Ok(());
    }
    if args.inhomogeneous_slices.is_some() {
        report.note("--inhomogeneous-slices ignored: the problem has no source term");
    }

    let spec = match args.model {
        Model::Sqrt => {
            let tol = args.eps.unwrap_or(REFERENCE_TOL);
            report.input("eps", tol);
            let (a, gj) = dissipative_parts(&p.v);
            let sol = solve_with_jumps(p, &a, &[gj], None, None)?;
            let reference = reference_unnormalized(p, g.rtol)?;
            let err = vnorm(&vec_sub(&sol.unnormalized(), &reference));
            let state = check_state(sol.rho_t.matrix());
            report.result("eta", sol.eta, tol);
            report.result("mu_t", pairs(&sol.mu_t), 2.0 * tol / sol.eta);
            report.result("reference_eta", vnorm(&reference), g.rtol);
            report.result("error", err, tol);
            report.result("substeps", sol.stats.substeps, 0.0);
            report.check_le("reference_error", err, tol);
            report.check("state_valid", state.min_eigenvalue, PSD_TOL, state.pass);
            sqrt_access_budget(p, tol, sol.eta, report);
            sol.spec
        }
        Model::Direct => {
            let eps = args.eps.unwrap_or(DEFAULT_DIRECT_EPS);
            report.input("eps", eps);
            if let Some(gap) = prob.delta_override {
                report.input("delta_override", gap);
            }
            let sol = direct_access_pipeline_with_gap(p, eps, prob.delta_override)?;
            let r = &sol.report;
            report.result("eta", sol.eta, eps * r.eta_estimate);
            report.result("mu_t", pairs(&sol.mu_t), eps);
            report.result("alpha", r.alpha, 0.0);
            report.result("eta_estimate", r.eta_estimate, 1e-6 * r.eta_estimate);
            report.result("degree", r.degree, 0.0);
            report.result("delta", r.delta, 0.0);
            report.result("eps_prime", r.eps_prime, 0.0);
            report.result("poly_error", r.poly_eps, r.eps_prime.unwrap_or(0.0));
            report.result("predicted_queries", r.predicted_queries, 0.0);
            report.result("error", r.error, eps);
            report.check_le("reference_error", r.error, eps);
            if r.degree.is_none() {
                report.note("B vanishes identically; no polynomial was needed");
            }
            sol.spec
        }
    };
    if g.format == Format::Csv || args.trajectory.is_some() {
        report.csv = Some(encoded_trajectory(&spec, p, args.samples)?);
    }
    Ok(())
}

fn shot_pair(value: f64, scale: f64, shots: u64, seed: u64) -> Result<(f64, f64), Failure> {
    let x = (value / scale).clamp(-1.0, 1.0);
    let mean = shots_emulate(x, shots, seed)?;
    Ok((scale * mean, scale * ((1.0 - x * x) / shots as f64).sqrt()))
}

fn echo(args: &EstimateArgs, g: &GlobalArgs, report: &mut Report) -> Outcome {
    let prob = load(&args.file, report)?;
    let p = &prob.ode;
    require_homogeneous(p, "echo")?;
    semi_dissipative(p, report)?;
    let phi0 = prob.phi0.clone().unwrap_or_else(|| p.mu0.clone());
    let tol = args.eps.unwrap_or(REFERENCE_TOL);
    report.input("eps", tol);
    let (a, gj) = dissipative_parts(&p.v);
    let sol = solve_with_jumps(p, &a, &[gj], Some(&phi0), None)?;
    let value = echo_estimate(&sol.rho_t)?;
    let exact = inner(&phi0, &reference_unnormalized(p, g.rtol)?);
    report.result("echo", [value.re, value.im], tol);
    report.result("echo_reference", [exact.re, exact.im], g.rtol);
    report.check_le("echo_error", (value - exact).norm(), tol);
    if let Some(shots) = g.shots {
        let (re, se_re) = shot_pair(value.re, 1.0, shots, g.seed)?;
        let (im, se_im) = shot_pair(value.im, 1.0, shots, g.seed.wrapping_add(1))?;
        report.result("echo_shots", [re, im], 3.0 * se_re.max(se_im));
        report.note("echo_shots is informational; its tolerance is three binomial standard errors");
    }
    Ok(())
}

fn expval(args: &EstimateArgs, g: &GlobalArgs, report: &mut Report) -> Outcome {
    let prob = load(&args.file, report)?;
    let p = &prob.ode;
    require_homogeneous(p, "expval")?;
    let o = prob.observable.clone().ok_or_else(|| input("expval needs an observable \"O\" in the problem file"))?;
    semi_dissipative(p, report)?;
    let tol = args.eps.unwrap_or(DEFAULT_EXPVAL_TOL);
    report.input("eps", tol);
    let (a, gj) = dissipative_parts(&p.v);
    let first = solve_with_jumps(p, &a, &[gj], None, None)?;
    let second = second_stage_for(p, &first.rho_t)?;
    let value = expval_estimate(&second, &o)?;
    let reference = reference_unnormalized(p, g.rtol)?;
    let exact = inner(&reference, &o.mat_vec(&reference)).re;
    report.result("expval", value, tol);
    report.result("expval_reference", exact, g.rtol * spectral_norm(&o));
    report.result("eta", first.eta, REFERENCE_TOL);
    report.check_le("expval_error", (value - exact).abs(), tol);
    if let Some(shots) = g.shots {
        let scale = spectral_norm(&o).max(f64::MIN_POSITIVE);
        let (est, se) = shot_pair(value, scale, shots, g.seed)?;
        report.result("expval_shots", est, 3.0 * se);
        report.note("expval_shots is informational; its tolerance is three binomial standard errors");
    }
    Ok(())
}

fn extract(args: &FileArgs, g: &GlobalArgs, report: &mut Report) -> Outcome {
    let prob = load(&args.file, report)?;
    let p = &prob.ode;
    require_homogeneous(p, "extract")?;
    if p.n > 3 {
        return Err(input(format!("extract supports n <= 3 (got n = {})", p.n)));
    }
    semi_dissipative(p, report)?;
    let (a, gj) = dissipative_parts(&p.v);
    let spec = dilate(&a, &[gj])?;
    let phi = propagator_channel(&spec, p.t_end)?;
    let psi0: Vec<C64> = p.mu0.iter().chain(&p.mu0).map(|z| z * std::f64::consts::FRAC_1_SQRT_2).collect();
    let (s, kraus) = purify_via_kraus(&phi, &psi0)?;
    let marker = environment_marker(&kraus, p.n)?;
    let reference = reference_unnormalized(p, g.rtol)?;
    let eta = vnorm(&reference);
    let plan = GroverPlan::new(eta)?;
    let out = grover_extract(&s, &marker, &normalized(&reference), &plan)?;
    let rho_t = phi.apply(&initial_state(&p.mu0, &p.mu0)?.into_matrix())?;
    let residual = s.residual(&rho_t);
    report.result("eta", eta, g.rtol);
    report.result("kraus_operators", kraus.len(), 0.0);
    report.result("purification_residual", residual, EXTRACT_TOL);
    report.result("theta", plan.theta, 0.0);
    report.result("k_star", plan.k_star, 0.0);
    report.result("queries", plan.queries, 0.0);
    report.result("expected_repetitions", plan.expected_repetitions, 0.0);
    report.result("predicted_success", plan.predicted_success, 0.0);
    report.result("success_prob", out.success_prob, SUCCESS_LAW_TOL);
    report.result("fidelity", out.fidelity, EXTRACT_TOL);
    report.result("junk_norm", out.junk_norm, 0.0);
    report.result("mu_t", pairs(&out.state), EXTRACT_TOL.sqrt());
    report.check_le("purification_residual", residual, EXTRACT_TOL);
    report.check_le("success_law", (out.success_prob - plan.predicted_success).abs(), SUCCESS_LAW_TOL);
    report.check_le("infidelity", 1.0 - out.fidelity, EXTRACT_TOL);
    Ok(())
}

fn gibbs(args: &GibbsArgs, g: &GlobalArgs, report: &mut Report) -> Outcome {
    let prob = load(&args.file, report)?;
    let p = &prob.ode;
    let TimeDependentMatrix::Constant(b) = &p.v else {
        return Err(input("gibbs needs a constant V, which is taken as B"));
    };
    if p.n > MAX_GIBBS_QUBITS {
        return Err(input(format!("gibbs supports n <= {MAX_GIBBS_QUBITS} (got n = {})", p.n)));
    }
    let beta = args
        .beta
        .or(prob.beta)
        .ok_or_else(|| input("gibbs needs --beta or a \"beta\" field"))?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(input(format!("beta = {beta} must be positive")));
    }
    report.input("beta", beta);
    let res = gibbs_prepare(b, beta, p.n)?;
    let rel = (res.z_estimate - res.z_exact).abs() / res.z_exact;
    report.result("Z", res.z_estimate, Z_RTOL * res.z_exact);
    report.result("Z_exact", res.z_exact, 0.0);
    report.result("fidelity", res.fidelity, GIBBS_FIDELITY_TOL);
    report.result("eta", res.eta, 0.5 * Z_RTOL * res.eta);
    report.check_le("Z_relative_error", rel, Z_RTOL);
    report.check_le("infidelity", 1.0 - res.fidelity, GIBBS_FIDELITY_TOL);
    if let Some(shots) = g.shots {
        let est = partition_estimate(b, beta, p.n, Some((shots, g.seed)))?;
        report.result("Z_shots", est.z, 3.0 * est.stderr);
        report.note(est.notes);
        report.note("Z_shots is informational; its tolerance is three binomial standard errors");
    }
    Ok(())
}

fn poly(args: &PolyArgs, report: &mut Report) -> Outcome {
    report.input("delta", args.delta);
    report.input("eps", args.eps);
    let p = fit_odd_sqrt(args.delta, args.eps)?;
    report.result("degree", p.degree, 0.0);
    report.result("certified_error", p.eps, args.eps);
    report.result("max_abs", p.max_abs, 1.0);
    report.result("coefficients", &p.coefficients, 0.0);
    report.check_le("certified_error", p.eps, args.eps);
    report.check("bounded_by_one", p.max_abs, 1.0, p.bound_ok && p.max_abs <= 1.0);
    let mut rows = vec!["k,odd_degree,chebyshev_coefficient".to_string()];
    rows.extend(p.coefficients.iter().enumerate().map(|(k, c)| format!("{k},{},{c}", 2 * k + 1)));
    report.csv = Some(rows.join("\n") + "\n");
    Ok(())
}

fn opt_measured(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| measured(x, 0.0))
}

fn budget_json(q: &QueryBudget) -> Value {
    json!({
        "method": q.method,
        "queries": opt_measured(q.queries_v_or_sqrt),
        "sqrt_model": opt_measured(q.sqrt_model),
        "queries_mu0": opt_measured(q.queries_mu0),
        "notes": q.notes,
    })
}

fn opt_csv(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn budget(args: &BudgetArgs, report: &mut Report) -> Outcome {
    let params = CostParams {
        delta: Some(args.delta),
        kappa_v: Some(args.kappa),
        m_jumps: args.jumps,
        ..CostParams::new(args.alpha, args.t, args.eps, args.eta)
    };
    params.validate()?;
    for (k, v) in [
        ("alpha", args.alpha),
        ("T", args.t),
        ("eps", args.eps),
        ("eta", args.eta),
        ("delta", args.delta),
        ("kappa", args.kappa),
    ] {
        report.input(k, v);
    }
    report.input("jumps", args.jumps);
    let table = comparison_report(&params)?;
    let lower = lower_bound_report(&params)?;
    let t1 = predict_direct_access(&params)?;
    let t2 = predict_sqrt_access(&params)?;
    report.result_raw("table", Value::Array(table.rows.iter().map(budget_json).collect()));
    report.result_raw("ranking", json!(table.ranking));
    report.result_raw(
        "direct_access",
        json!({"time_independent": budget_json(&t1.time_independent), "time_dependent": budget_json(&t1.time_dependent)}),
    );
    report.result_raw(
        "sqrt_access",
        json!({"time_independent": budget_json(&t2.time_independent), "time_dependent": budget_json(&t2.time_dependent)}),
    );
    report.result_raw(
        "lower_bounds",
        json!({
            "time": measured(lower.time, 0.0),
            "norm": measured(lower.norm, 0.0),
            "precision": measured(lower.precision, 0.0),
            "shared_by_both_models": lower.shared_by_both_models,
            "notes": lower.notes,
        }),
    );
    report.note(table.notes.clone());
    report.note(UNIT_CONSTANTS);
    let names_match = table.rows.len() == COMPARISON_METHODS.len()
        && table.rows.iter().zip(COMPARISON_METHODS).all(|(r, m)| r.method == m);
    report.check("table_rows", table.rows.len() as f64, 0.0, names_match);
    let mut rows = vec!["method,queries,sqrt_model,queries_mu0".to_string()];
    rows.extend(table.rows.iter().map(|r| {
        format!(
            "\"{}\",{},{},{}",
            r.method,
            opt_csv(r.queries_v_or_sqrt),
            opt_csv(r.sqrt_model),
            opt_csv(r.queries_mu0)
        )
    }));
    report.csv = Some(rows.join("\n") + "\n");
    Ok(())
}

fn sweep(args: &SweepArgs, report: &mut Report) -> Outcome {
    let cfg = HarnessConfig {
        eps: args.eps,
        alpha: args.alpha,
        ..HarnessConfig::default()
    };
    report.input("eps", args.eps);
    report.input("alpha", args.alpha);
    let res = scaling_harness(&cfg)?;
    let mut rows = vec!["axis,x,y,fitted_exponent,predicted_exponent".to_string()];
    let mut axes = Vec::new();
    for axis in &res.axes {
        axes.push(json!({
            "axis": axis.axis,
            "xs": measured(&axis.xs, 0.0),
            "ys": measured(&axis.ys, 0.0),
            "fitted_exponent": measured(axis.fitted_exponent, axis.tolerance),
            "predicted_exponent": measured(axis.predicted_exponent, 0.0),
        }));
        report.check(
            &format!("exponent_{}", axis.axis),
            (axis.fitted_exponent - axis.predicted_exponent).abs(),
            axis.tolerance,
            axis.pass,
        );
        for (x, y) in axis.xs.iter().zip(&axis.ys) {
            rows.push(format!(
                "{},{x},{y},{},{}",
                axis.axis, axis.fitted_exponent, axis.predicted_exponent
            ));
        }
    }
    report.result_raw("axes", Value::Array(axes));
    report.csv = Some(rows.join("\n") + "\n");
    Ok(())
}

fn supports_csv(c: &Command) -> bool {
    matches!(c, Command::Solve(_) | Command::Poly(_) | Command::Budget(_) | Command::Sweep(_))
}

fn name(c: &Command) -> &'static str {
    match c {
        Command::Solve(_) => "solve",
        Command::Echo(_) => "echo",
        Command::Expval(_) => "expval",
        Command::Extract(_) => "extract",
        Command::Gibbs(_) => "gibbs",
        Command::Poly(_) => "poly",
        Command::Budget(_) => "budget",
        Command::Sweep(_) => "sweep",
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn emit(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let g = &cli.global;
    if g.format == Format::Csv && !supports_csv(&cli.command) {
        eprintln!("error: --format csv is not available for {}", name(&cli.command));
        return EXIT_INPUT;
    }
    if !(g.rtol > 0.0 && g.rtol < 1e-2) {
        eprintln!("error: --rtol must lie in (0, 1e-2)");
        return EXIT_INPUT;
    }
    if g.shots == Some(0) {
        eprintln!("error: --shots must be positive");
        return EXIT_INPUT;
    }
    let mut report = Report::new(name(&cli.command));
    report.input("seed", g.seed);
    report.input("rtol", g.rtol);
    report.input("shots", g.shots);
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a, g, &mut report),
        Command::Echo(a) => echo(a, g, &mut report),
        Command::Expval(a) => expval(a, g, &mut report),
        Command::Extract(a) => extract(a, g, &mut report),
        Command::Gibbs(a) => gibbs(a, g, &mut report),
        Command::Poly(a) => poly(a, &mut report),
        Command::Budget(a) => budget(a, &mut report),
        Command::Sweep(a) => sweep(a, &mut report),
    };
    match outcome {
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_INPUT;
        }
        Err(Failure::Assertion { message, check }) => {
            if let Some((value, tolerance)) = check {
                report.check("library_check", value, tolerance, false);
            }
            report.error = Some(message);
        }
        Ok(()) => {}
    }
    if let (Command::Solve(a), Some(csv)) = (&cli.command, &report.csv) {
        if let Some(path) = &a.trajectory {
            if let Err(e) = write_atomic(path, csv.as_bytes()) {
                eprintln!("error: {}: {e}", path.display());
                return EXIT_INPUT;
            }
        }
    }
    let text = match g.format {
        Format::Json => report.to_json(),
        Format::Csv => report.csv.clone().unwrap_or_else(|| report.to_json()),
    };
    if let Err(e) = emit(g.out.as_deref(), &text) {
        eprintln!("error: writing report: {e}");
        return EXIT_INPUT;
    }
    if report.passed() {
        EXIT_OK
    } else {
        if let Some(msg) = &report.error {
            eprintln!("assertion failed: {msg}");
        }
        for a in report.assertions.iter().filter(|a| !a.pass) {
            eprintln!("assertion failed: {} = {:.3e} (tolerance {:.1e})", a.name, a.value, a.tolerance);
        }
        EXIT_ASSERTION
    }
}
