use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pnet_core::bounds::{bound_report, entangled_displacement_bound, Coupling, DisplacementFlavor};
use pnet_core::design::{
    build_omega_set_with_limit, check_saturation_phase, feasibility_precheck, schedule_qfi_analytic,
    solve_schedule_with_budget, ProtocolSchedule, ScheduleOutcome, ScheduleReport, DEFAULT_NODE_BUDGET,
    DEFAULT_OMEGA_LIMIT,
};
use pnet_core::estimation::{estimate_function_phase, phase_sweep, EstimationResult, RpeSchedule};
use pnet_core::fock::qfi_numeric_schedule;
use pnet_core::gaussian::{estimate_q_displacement, DisplacementProtocol};
use pnet_core::math::max_rel_diff;
use pnet_core::par::sub_seed;
use pnet_core::{CoefficientVector, QfiMatrix};

use crate::config::{ExperimentConfig, DEFAULT_PHASE_BUDGETS, DEFAULT_SHOTS, DEFAULT_TRIALS};
use crate::failure::{CliResult, Failure};

/// Residual and QFI deviation above which `verify` fails.
pub const VERIFY_TOLERANCE: f64 = 1e-6;

/// Settings shared by every subcommand.
pub struct Context {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub node_budget: Option<u64>,
    pub verbose: bool,
}

impl Context {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn out_path(&self, cfg: Option<&ExperimentConfig>) -> Option<PathBuf> {
        self.out.clone().or_else(|| cfg.and_then(|c| c.out.clone()))
    }

    fn seed(&self, cfg: &ExperimentConfig) -> CliResult<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => cfg.require_seed(),
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => {
            std::fs::write(p, bytes).map_err(|e| Failure::validation(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            Ok(stdout.flush()?)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn to_csv<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Failure::validation(format!("csv error: {e}")))
}

fn alpha_label(alpha: &CoefficientVector) -> String {
    alpha.original_entries().iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

pub fn bounds(ctx: &Context, cfg: &ExperimentConfig) -> CliResult<()> {
    let alpha = cfg.alpha()?;
    match cfg.coupling {
        Some(Coupling::Phase) if cfg.n.is_none() => return Err(Failure::validation("phase coupling needs N")),
        Some(Coupling::Displacement) if cfg.nbar.is_none() => {
            return Err(Failure::validation("displacement coupling needs N_bar"))
        }
        _ => {}
    }
    if cfg.n == Some(0) {
        return Err(Failure::validation("N must be positive"));
    }
    let summary = bound_report(&alpha, cfg.n, cfg.nbar, cfg.t, cfg.m)?;
    let out = ctx.out_path(Some(cfg));
    write_output(out.as_deref(), &to_json(&summary)?)?;
    let csv_path = cfg.csv_out.clone().or_else(|| out.map(|p| p.with_extension("csv")));
    if let Some(p) = csv_path {
        write_output(Some(&p), &to_csv(&summary.csv_rows())?)?;
        ctx.log(format!("wrote {}", p.display()));
    }
    Ok(())
}

/// Builds ω and runs the exact search, mapping outcomes to exit codes.
fn solve(ctx: &Context, cfg: &ExperimentConfig) -> CliResult<ProtocolSchedule> {
    let alpha = cfg.alpha()?;
    let n = cfg.phase_photons()?;
    let m = cfg.m;
    if !feasibility_precheck(&alpha, n, m)? {
        return Err(Failure::infeasible(format!("N·M·alpha/||alpha||_{{1,P}} is not integral for N={n}, M={m}")));
    }
    let limit = cfg.solver.omega_limit.unwrap_or(DEFAULT_OMEGA_LIMIT);
    let w = build_omega_set_with_limit(&alpha, n, cfg.solver.support_cap, limit)?;
    let budget = ctx.node_budget.or(cfg.solver.node_budget).unwrap_or(DEFAULT_NODE_BUDGET);
    ctx.log(format!("omega set: {} columns; node budget {budget}", w.len()));
    match solve_schedule_with_budget(&w, m, budget)? {
        ScheduleOutcome::Feasible(s) => Ok(s),
        ScheduleOutcome::Infeasible => Err(Failure::infeasible(format!(
            "no multiset of {m} admissible columns (of {}) reaches the target",
            w.len()
        ))),
    }
}

pub fn design(ctx: &Context, cfg: &ExperimentConfig) -> CliResult<()> {
    let s = solve(ctx, cfg)?;
    let report = ScheduleReport::from_schedule(&s);
    ctx.log(format!("schedule found: r = {:?}, residual {:e}", report.r, report.residual));
    write_output(ctx.out_path(Some(cfg)).as_deref(), &to_json(&report)?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub alpha: CoefficientVector,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    pub weighted_sum: Vec<i64>,
    pub target_hit: bool,
    pub qfi_analytic: QfiMatrix,
    pub qfi_numeric: QfiMatrix,
    /// Relative sup-norm gap between the two QFI paths.
    pub qfi_deviation: f64,
    /// Relative sup-norm gap between the stored and recomputed QFI; absent
    /// when the stored matrix has the wrong size.
    pub stored_qfi_deviation: Option<f64>,
    pub saturation_residual: f64,
    pub pass: bool,
}

pub fn verify(ctx: &Context, path: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read schedule {}: {e}", path.display())))?;
    let stored: ScheduleReport = serde_json::from_str(&text)?;
    let s = ProtocolSchedule::new_untargeted(stored.alpha.clone(), stored.n, stored.columns.clone(), stored.r.clone())?;
    if s.passes() != stored.m {
        ctx.log(format!("file declares M={} but r sums to {}", stored.m, s.passes()));
    }
    let analytic = schedule_qfi_analytic(&s);
    let numeric = qfi_numeric_schedule(&s)?;
    let qfi_deviation = max_rel_diff(&analytic, &numeric);
    let stored_qfi_deviation = (stored.qfi.dim() == analytic.dim()).then(|| max_rel_diff(&stored.qfi, &analytic));
    let residual = check_saturation_phase(&analytic, s.alpha(), s.photons(), stored.m)?;
    let pass = qfi_deviation <= VERIFY_TOLERANCE
        && stored_qfi_deviation.is_some_and(|x| x <= VERIFY_TOLERANCE)
        && residual <= VERIFY_TOLERANCE
        && s.passes() == stored.m;
    let report = VerifyReport {
        alpha: stored.alpha.clone(),
        n: stored.n,
        m: stored.m,
        weighted_sum: s.weighted_sum(),
        target_hit: s.hits_target()?,
        qfi_analytic: analytic,
        qfi_numeric: numeric,
        qfi_deviation,
        stored_qfi_deviation,
        saturation_residual: residual,
        pass,
    };
    write_output(ctx.out.as_deref(), &to_json(&report)?)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::verification(format!(
            "residual {residual:e}, QFI deviation {qfi_deviation:e}, stored QFI deviation {stored_qfi_deviation:?}"
        )))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PhaseRow {
    pub alpha: String,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub total_photons: u64,
    pub trials: usize,
    pub mse_empirical: f64,
    pub bound: f64,
    pub ratio: f64,
    /// Log-log slope of the whole sweep; empty for a single run.
    pub slope_context: Option<f64>,
}

fn load_or_solve(ctx: &Context, cfg: &ExperimentConfig) -> CliResult<ProtocolSchedule> {
    match &cfg.schedule {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::validation(format!("cannot read schedule {}: {e}", path.display())))?;
            let report: ScheduleReport = serde_json::from_str(&text)?;
            let s = report.to_schedule()?;
            if s.alpha() != &cfg.alpha()? {
                return Err(Failure::validation("schedule file was built for a different alpha"));
            }
            Ok(s)
        }
        None => solve(ctx, cfg),
    }
}

pub fn simulate_phase(ctx: &Context, cfg: &ExperimentConfig) -> CliResult<()> {
    let seed = ctx.seed(cfg)?;
    let schedule = load_or_solve(ctx, cfg)?;
    let theta = cfg.require_theta(schedule.alpha().dim())?;
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let rpe = &cfg.rpe;
    let (rpes, results, slope): (Vec<RpeSchedule>, Vec<EstimationResult>, Option<f64>) =
        match (&rpe.multipliers, &rpe.repetitions) {
            (Some(mult), Some(reps)) => {
                if rpe.budgets.is_some() {
                    return Err(Failure::validation("rpe: give budgets or an explicit stage table, not both"));
                }
                let r = RpeSchedule::new(mult.clone(), reps.clone())?;
                let res = estimate_function_phase(&schedule, theta, &r, trials, sub_seed(seed, "simulate-phase"))?;
                (vec![r], vec![res], None)
            }
            (None, None) => {
                let budgets = rpe.budgets.clone().unwrap_or_else(|| DEFAULT_PHASE_BUDGETS.to_vec());
                if budgets.is_empty() {
                    return Err(Failure::validation("rpe.budgets is empty"));
                }
                let rpes = budgets.iter().map(|&b| RpeSchedule::for_budget(b)).collect::<Result<Vec<_>, _>>()?;
                if budgets.len() == 1 {
                    let res =
                        estimate_function_phase(&schedule, theta, &rpes[0], trials, sub_seed(seed, "simulate-phase"))?;
                    (rpes, vec![res], None)
                } else {
                    let (points, fit) = phase_sweep(&schedule, theta, &budgets, trials, seed)?;
                    (rpes, points.into_iter().map(|p| p.result).collect(), Some(fit.slope))
                }
            }
            _ => return Err(Failure::validation("rpe: multipliers and repetitions must be given together")),
        };
    if results.iter().any(|r| r.capture_exceeded) {
        eprintln!("warning: |(W r)·theta| ≥ π; the first stage cannot resolve the phase");
    }
    if ctx.verbose {
        eprintln!("{}", serde_json::to_string_pretty(&results)?);
    }
    let label = alpha_label(schedule.alpha());
    let rows: Vec<PhaseRow> = rpes
        .iter()
        .zip(&results)
        .map(|(r, res)| PhaseRow {
            alpha: label.clone(),
            n: schedule.photons(),
            m: schedule.passes(),
            k: r.stages(),
            total_photons: res.total_photons,
            trials: res.trials,
            mse_empirical: res.mse_empirical,
            bound: res.bound,
            ratio: res.ratio,
            slope_context: slope,
        })
        .collect();
    write_output(ctx.out_path(Some(cfg)).as_deref(), &to_csv(&rows)?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DisplacementRow {
    #[serde(rename = "N_bar")]
    pub nbar: f64,
    #[serde(rename = "M")]
    pub m: u64,
    pub d: usize,
    pub mse_empirical: f64,
    pub mse_bound_leading: f64,
    pub mse_bound_exact: f64,
    pub ratio: f64,
    pub stderr: f64,
}

pub fn simulate_displacement(ctx: &Context, cfg: &ExperimentConfig) -> CliResult<()> {
    let seed = ctx.seed(cfg)?;
    let alpha = cfg.alpha()?;
    let budgets = cfg.displacement_budgets()?;
    let theta = cfg.require_theta(alpha.dim())?;
    let shots = cfg.shots.unwrap_or(DEFAULT_SHOTS);
    let t = cfg.m as f64;
    let mut rows = Vec::with_capacity(budgets.len());
    for (i, &nbar) in budgets.iter().enumerate() {
        let p = DisplacementProtocol::new(alpha.clone(), nbar, cfg.m)?;
        let e = estimate_q_displacement(&p, theta, shots, sub_seed(seed, &format!("simulate-displacement-{i}")))?;
        let leading = entangled_displacement_bound(&alpha, nbar, t, DisplacementFlavor::Leading)?;
        let exact = entangled_displacement_bound(&alpha, nbar, t, DisplacementFlavor::Exact)?;
        ctx.log(format!("N_bar={nbar}: q_hat={} (true {}), mse={}", e.q_hat, e.q_true, e.mse));
        rows.push(DisplacementRow {
            nbar,
            m: cfg.m,
            d: alpha.dim(),
            mse_empirical: e.mse,
            mse_bound_leading: leading,
            mse_bound_exact: exact,
            ratio: e.mse / leading,
            stderr: e.mse_stderr,
        });
    }
    write_output(ctx.out_path(Some(cfg)).as_deref(), &to_csv(&rows)?)
}
