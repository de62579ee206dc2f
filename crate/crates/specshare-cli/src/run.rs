//! Command execution: single-method runs, budget sweeps, boundary polylines,
//! and codebook verification.
//!
//! Exit codes: 0 on success, 2 on validation problems (bad config, bad
//! codebook file, failed verification), 3 on solver non-convergence.  A
//! sweep never aborts on a solver diagnostic — the failing row records it in
//! its `status` column instead.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use specshare::dual::{solve_quantized, DesignMethod, QuantizedSolution, SolverOptions};
use specshare::eval::{
    capacity_standard_error, estimate_capacity, estimate_capacity_with_errors,
    estimate_constraints, estimate_constraints_with_errors,
};
use specshare::fading::{sample_training_set, BandView, TrainingSet};
use specshare::feedback::{gla2_assign, solve_noisy, transition_matrix, FeedbackChannel};
use specshare::full_csi::{allocate_full_csi, power_point, DualVariables};
use specshare::lloyd::{boundary_g1, nnc_assign, verify_codebook_properties, PowerCodebook};
use specshare::numeric::pairwise_sum;
use specshare::Error;

use crate::config::{ExperimentConfig, Method, Quantizer};
use crate::output::{csv_header, csv_row, sig6, CodebookFile, Row, RowMetrics};
use crate::{FileArgs, RunArgs};

/// A command failure carrying its process exit code.
pub struct CliFailure {
    pub code: i32,
    pub message: String,
}

impl CliFailure {
    fn config(message: impl Into<String>) -> Self {
        CliFailure { code: 2, message: message.into() }
    }
}

impl From<Error> for CliFailure {
    fn from(e: Error) -> Self {
        CliFailure { code: exit_class(&e), message: e.to_string() }
    }
}

impl From<String> for CliFailure {
    fn from(message: String) -> Self {
        CliFailure::config(message)
    }
}

/// Solver diagnostics exit 3; everything else is a validation or
/// environment problem and exits 2.
fn exit_class(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. }
        | Error::BracketFailure { .. }
        | Error::CodebookExhausted { .. }
        | Error::AsymptoteExceeded { .. }
        | Error::UndefinedWaterLevel
        | Error::ZeroReference => 3,
        _ => 2,
    }
}

// ---------------------------------------------------------------------------
// point runs and sweeps

/// One scheduled solve: a budget, a method, and (for quantized methods) a
/// quantizer size.
struct PointSpec {
    p_avg_db: f64,
    method: Method,
    quantizer: Option<Quantizer>,
}

impl PointSpec {
    fn bits_label(&self) -> String {
        match self.quantizer {
            // The full-CSI benchmark is unquantized; 0 bits by convention.
            None => "0".into(),
            Some(q) => match q.bits {
                Some(b) => b.to_string(),
                None => format!("L{}", q.levels),
            },
        }
    }
}

struct PointOutcome {
    row: Row,
    codebook: Option<CodebookFile>,
    failure: Option<CliFailure>,
}

/// Run one method at the config's single operating point.
pub fn run_single(method: Method, args: &RunArgs) -> Result<(), CliFailure> {
    let cfg = ExperimentConfig::load(&args.config, args.seed)?;
    let p_avg_db = cfg
        .p_avg_db
        .ok_or_else(|| CliFailure::config("P_avg_dB: required for single-point commands"))?;
    let points = schedule(&cfg, &[p_avg_db], &[method])?;
    let outcomes = execute(&cfg, points, args)?;
    if let Some(fail) = outcomes.into_iter().find_map(|o| o.failure) {
        return Err(fail);
    }
    Ok(())
}

/// Run the configured methods over the sweep grid; solver diagnostics land
/// in the status column instead of aborting.
pub fn run_sweep(args: &RunArgs) -> Result<(), CliFailure> {
    let cfg = ExperimentConfig::load(&args.config, args.seed)?;
    let grid = cfg
        .sweep_grid()
        .ok_or_else(|| CliFailure::config("sweep: required for the sweep command"))?;
    let methods = cfg.methods.clone();
    let points = schedule(&cfg, &grid, &methods)?;
    execute(&cfg, points, args)?;
    Ok(())
}

/// Rows are emitted in (budget, method, quantizer) precedence, matching the
/// config's declaration order for the latter two.
fn schedule(
    cfg: &ExperimentConfig,
    grid: &[f64],
    methods: &[Method],
) -> Result<Vec<PointSpec>, CliFailure> {
    let mut points = Vec::new();
    for &p_avg_db in grid {
        for &method in methods {
            if method == Method::Fullcsi {
                points.push(PointSpec { p_avg_db, method, quantizer: None });
                continue;
            }
            if cfg.quantizers.is_empty() {
                return Err(CliFailure::config(format!(
                    "B: required for method {}",
                    method.name()
                )));
            }
            for &quantizer in &cfg.quantizers {
                points.push(PointSpec { p_avg_db, method, quantizer: Some(quantizer) });
            }
        }
    }
    Ok(points)
}

fn execute(
    cfg: &ExperimentConfig,
    points: Vec<PointSpec>,
    args: &RunArgs,
) -> Result<Vec<PointOutcome>, CliFailure> {
    let workers = args.workers.unwrap_or(1).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliFailure::config(format!("workers: {e}")))?;
    let outcomes: Vec<PointOutcome> =
        pool.install(|| points.par_iter().map(|p| run_point(cfg, p)).collect());

    let mut csv = csv_header(cfg.m, args.bits_capacity);
    csv.push('\n');
    for o in &outcomes {
        csv.push_str(&csv_row(&o.row, cfg.m, args.bits_capacity));
        csv.push('\n');
    }
    print!("{csv}");

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliFailure::config(format!("out {}: {e}", dir.display())))?;
        std::fs::write(dir.join("results.csv"), &csv)
            .map_err(|e| CliFailure::config(format!("out: {e}")))?;
        for o in &outcomes {
            if let Some(cb) = &o.codebook {
                let path = dir.join(cb.file_name());
                let text = serde_json::to_string_pretty(cb)
                    .map_err(|e| CliFailure::config(format!("serialize codebook: {e}")))?;
                std::fs::write(&path, text)
                    .map_err(|e| CliFailure::config(format!("out {}: {e}", path.display())))?;
            }
        }
    }
    Ok(outcomes)
}

fn run_point(cfg: &ExperimentConfig, point: &PointSpec) -> PointOutcome {
    let started = Instant::now();
    let q_f = if point.method == Method::Gla2 { cfg.q_f } else { 0.0 };
    let solved = solve_point(cfg, point);
    let (outcome, codebook, failure) = match solved {
        Ok((metrics, codebook)) => (Ok(metrics), codebook, None),
        Err(e) => {
            let failure = CliFailure::from(e);
            let status = failure.message.clone();
            (Err(status), None, Some(failure))
        }
    };
    PointOutcome {
        row: Row {
            p_avg_db: point.p_avg_db,
            method: point.method,
            bits_label: point.bits_label(),
            q_f,
            outcome,
            wall_ms: started.elapsed().as_millis(),
        },
        codebook,
        failure,
    }
}

/// Training and evaluation sets; the latter aliases the former when the
/// sizes agree (in-sample evaluation, the default), otherwise it is drawn
/// from an offset seed stream.
fn sample_sets(cfg: &ExperimentConfig) -> Result<(TrainingSet, Option<TrainingSet>), Error> {
    let training = sample_training_set(&cfg.models, cfg.n_train, cfg.seed)?;
    let eval = if cfg.n_eval == cfg.n_train {
        None
    } else {
        Some(sample_training_set(&cfg.models, cfg.n_eval, cfg.seed.wrapping_add(1))?)
    };
    Ok((training, eval))
}

fn solve_point(
    cfg: &ExperimentConfig,
    point: &PointSpec,
) -> Result<(RowMetrics, Option<CodebookFile>), Error> {
    let (training, eval) = sample_sets(cfg)?;
    let eval = eval.as_ref().unwrap_or(&training);
    let cons = cfg.constraints(point.p_avg_db);

    if point.method == Method::Fullcsi {
        let sol = allocate_full_csi(&training, &cons)?;
        let metrics = eval_full_csi(eval, &sol.duals)?;
        return Ok((metrics, None));
    }

    let quantizer = point.quantizer.expect("quantized methods carry a quantizer");
    let mut opts = SolverOptions::new(quantizer.levels);
    opts.restarts = cfg.restarts;
    opts.seed = cfg.seed;
    opts.design_tol = cfg.design_tol;
    opts.design_max_iter = cfg.design_max_iter;

    let (sol, channel) = match point.method {
        Method::Gla => (solve_quantized(&training, &cfg.models, &cons, &opts)?, None),
        Method::Aqpa => (
            solve_quantized(
                &training,
                &cfg.models,
                &cons,
                &opts.with_method(DesignMethod::Aqpa),
            )?,
            None,
        ),
        Method::Gla2 => {
            let bits = quantizer.bits.ok_or_else(|| {
                Error::Config("feedback-error design needs a power-of-two level count".into())
            })?;
            let channel = transition_matrix(bits, cfg.q_f)?;
            (solve_noisy(&training, &cfg.models, &cons, &channel, &opts)?, Some(channel))
        }
        Method::Fullcsi => unreachable!(),
    };

    let metrics = eval_quantized(eval, &sol, channel.as_ref())?;
    let codebook = CodebookFile {
        method: point.method,
        bits: quantizer.bits,
        levels: quantizer.levels,
        q_f: if point.method == Method::Gla2 { cfg.q_f } else { 0.0 },
        p_avg_db: point.p_avg_db,
        lambda: sol.duals.lambda,
        mu: sol.duals.mu.clone(),
        codebooks: sol.codebooks.iter().map(|c| c.levels.clone()).collect(),
        capacity_nats: metrics.capacity,
        seed: cfg.seed,
        config: cfg.echo.clone(),
    };
    Ok((metrics, Some(codebook)))
}

/// Full-CSI metrics on the evaluation set at converged prices.  The
/// iterations column does not apply to the closed-form benchmark and reads 0.
fn eval_full_csi(eval: &TrainingSet, duals: &DualVariables) -> Result<RowMetrics, Error> {
    let m = duals.mu.len();
    let mut caps = Vec::with_capacity(m);
    let mut vars = Vec::with_capacity(m);
    let mut atp = Vec::with_capacity(m);
    let mut aip = Vec::with_capacity(m);
    for i in 0..m {
        let band = eval.band(i);
        let n = band.len();
        let mut rates = Vec::with_capacity(n);
        let mut powers = Vec::with_capacity(n);
        let mut interference = Vec::with_capacity(n);
        for s in 0..n {
            let p = power_point(band.g0[s], band.g1[s], duals.lambda, duals.mu[i])?;
            rates.push((band.g1[s] * p).ln_1p());
            interference.push(band.g0[s] * p);
            powers.push(p);
        }
        let mean = pairwise_sum(&rates) / n as f64;
        let sq: Vec<f64> = rates.iter().map(|r| (r - mean) * (r - mean)).collect();
        caps.push(mean);
        vars.push(pairwise_sum(&sq) / ((n - 1) as f64 * n as f64));
        atp.push(pairwise_sum(&powers) / n as f64);
        aip.push(pairwise_sum(&interference) / n as f64);
    }
    Ok(RowMetrics {
        capacity: pairwise_sum(&caps) / m as f64,
        capacity_se: pairwise_sum(&vars).sqrt() / m as f64,
        atp: pairwise_sum(&atp) / m as f64,
        aip,
        lambda: duals.lambda,
        mu: duals.mu.clone(),
        iterations: 0,
    })
}

/// Quantized metrics on the evaluation set: re-assign each sample at the
/// converged prices, then average per-band estimates.
fn eval_quantized(
    eval: &TrainingSet,
    sol: &QuantizedSolution,
    channel: Option<&FeedbackChannel>,
) -> Result<RowMetrics, Error> {
    let m = sol.codebooks.len();
    let mut caps = Vec::with_capacity(m);
    let mut vars = Vec::with_capacity(m);
    let mut atp = Vec::with_capacity(m);
    let mut aip = Vec::with_capacity(m);
    for i in 0..m {
        let band = eval.band(i);
        let cb = &sol.codebooks[i];
        let (cap, var, used) = match channel {
            None => {
                let part = nnc_assign(band, cb, sol.duals.lambda, sol.duals.mu[i])?;
                let cap = estimate_capacity(band, &part, cb)?;
                let se = capacity_standard_error(band, &part, cb)?;
                (cap, se * se, estimate_constraints(band, &part, cb)?)
            }
            Some(ch) => {
                let part = gla2_assign(band, cb, ch, sol.duals.lambda, sol.duals.mu[i])?;
                let cap = estimate_capacity_with_errors(band, &part, cb, ch.rho())?;
                let var = expected_rate_variance(band, &part.labels, cb, ch) / band.len() as f64;
                (cap, var, estimate_constraints_with_errors(band, &part, cb, ch.rho())?)
            }
        };
        caps.push(cap);
        vars.push(var);
        atp.push(used.0);
        aip.push(used.1);
    }
    Ok(RowMetrics {
        capacity: pairwise_sum(&caps) / m as f64,
        capacity_se: pairwise_sum(&vars).sqrt() / m as f64,
        atp: pairwise_sum(&atp) / m as f64,
        aip,
        lambda: sol.duals.lambda,
        mu: sol.duals.mu.clone(),
        iterations: sol.report.designs_run,
    })
}

/// Sample variance of the per-sample expected rate under index confusion.
fn expected_rate_variance(
    band: BandView<'_>,
    labels: &[u32],
    codebook: &PowerCodebook,
    channel: &FeedbackChannel,
) -> f64 {
    let rho = channel.rho();
    let n = band.len();
    let terms: Vec<f64> = (0..n)
        .map(|s| {
            let sent = labels[s] as usize;
            (0..codebook.len())
                .map(|k| rho[sent][k] * (band.g1[s] * codebook.levels[k]).ln_1p())
                .sum()
        })
        .collect();
    if n < 2 {
        return f64::NAN;
    }
    let mean = pairwise_sum(&terms) / n as f64;
    let sq: Vec<f64> = terms.iter().map(|t| (t - mean) * (t - mean)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

// ---------------------------------------------------------------------------
// codebook-file commands

fn read_codebook(path: &Path) -> Result<(CodebookFile, ExperimentConfig), CliFailure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliFailure::config(format!("codebook {}: {e}", path.display())))?;
    let file: CodebookFile = serde_json::from_str(&text)
        .map_err(|e| CliFailure::config(format!("codebook schema: {e}")))?;
    if file.codebooks.is_empty() {
        return Err(CliFailure::config("codebook: no bands"));
    }
    if file.codebooks.len() != file.mu.len() {
        return Err(CliFailure::config("codebook: mu length does not match band count"));
    }
    let cfg = ExperimentConfig::from_value(file.config.clone(), None)
        .map_err(|e| CliFailure::config(format!("codebook config echo: {e}")))?;
    if cfg.m != file.codebooks.len() {
        return Err(CliFailure::config("codebook: band count does not match its config echo"));
    }
    Ok((file, cfg))
}

/// Emit `(g0, g1)` polyline points of the decision boundaries between
/// adjacent power levels, per band.  The `g0` grid spans five interference
/// means; a polyline stops early at a boundary's vertical asymptote.
pub fn run_boundaries(args: &FileArgs) -> Result<(), CliFailure> {
    const GRID_POINTS: usize = 101;
    let (file, cfg) = read_codebook(&args.codebook)?;
    let mut csv = String::from("band,pair,g0,g1\n");
    for (band, levels) in file.codebooks.iter().enumerate() {
        let mut sorted = levels.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let g0_max = 5.0 * cfg.models[band].interference.mean();
        for pair in 0..sorted.len().saturating_sub(1) {
            let (p_hi, p_lo) = (sorted[pair], sorted[pair + 1]);
            if !(p_hi > p_lo) {
                continue;
            }
            for k in 0..GRID_POINTS {
                let g0 = g0_max * k as f64 / (GRID_POINTS - 1) as f64;
                match boundary_g1(p_hi, p_lo, file.lambda, file.mu[band], g0) {
                    Ok(g1) => {
                        csv.push_str(&format!("{band},{pair},{},{}\n", sig6(g0), sig6(g1)));
                    }
                    Err(Error::AsymptoteExceeded { .. }) => break,
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    print!("{csv}");
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliFailure::config(format!("out {}: {e}", dir.display())))?;
        std::fs::write(dir.join("boundaries.csv"), &csv)
            .map_err(|e| CliFailure::config(format!("out: {e}")))?;
    }
    Ok(())
}

/// Re-check a stored codebook: structural properties of every band's levels
/// and byte-faithful reproduction of the recorded capacity (the evaluation
/// set is reconstructed from the config echo).
pub fn run_verify(path: &Path) -> Result<(), CliFailure> {
    let (file, cfg) = read_codebook(path)?;
    // The structural claims (strict descent, positive interior, boundaries
    // above the penalty line) characterize noise-free optimal codebooks; a
    // feedback-error-aware design deliberately contracts levels toward the
    // collapse point and may tie or zero them, so only its recorded capacity
    // is checked.
    let structure = if file.method == Method::Gla2 && file.q_f > 0.0 {
        "skipped (feedback-error design)"
    } else {
        let mut violations = Vec::new();
        for (band, levels) in file.codebooks.iter().enumerate() {
            let report = verify_codebook_properties(
                &PowerCodebook { levels: levels.clone() },
                file.lambda,
                file.mu[band],
                cfg.models[band].interference.mean(),
                cfg.models[band].secondary.mean(),
            );
            if !report.all_ok() {
                violations.extend(report.violations.iter().map(|v| format!("band {band}: {v}")));
            }
        }
        if !violations.is_empty() {
            return Err(CliFailure::config(format!(
                "codebook structure violated: {}",
                violations.join("; ")
            )));
        }
        "ok"
    };

    let (training, eval) = sample_sets(&cfg).map_err(CliFailure::from)?;
    let eval = eval.as_ref().unwrap_or(&training);
    let channel = match file.method {
        Method::Gla2 => {
            let bits = file
                .bits
                .ok_or_else(|| CliFailure::config("codebook: gla2 file is missing bits"))?;
            Some(transition_matrix(bits, file.q_f).map_err(CliFailure::from)?)
        }
        _ => None,
    };
    let mut caps = Vec::new();
    for (band, levels) in file.codebooks.iter().enumerate() {
        let view = eval.band(band);
        let cb = PowerCodebook { levels: levels.clone() };
        let cap = match &channel {
            None => {
                let part = nnc_assign(view, &cb, file.lambda, file.mu[band])?;
                estimate_capacity(view, &part, &cb)?
            }
            Some(ch) => {
                let part = gla2_assign(view, &cb, ch, file.lambda, file.mu[band])?;
                estimate_capacity_with_errors(view, &part, &cb, ch.rho())?
            }
        };
        caps.push(cap);
    }
    let capacity = pairwise_sum(&caps) / caps.len() as f64;
    let drift = (capacity - file.capacity_nats).abs();
    if drift > 1e-9 {
        return Err(CliFailure::config(format!(
            "capacity mismatch: recorded {:.12}, recomputed {:.12} (drift {drift:.3e})",
            file.capacity_nats, capacity
        )));
    }
    println!(
        "verified: {} bands, structure {structure}, capacity reproduced within 1e-9 ({} nats)",
        file.codebooks.len(),
        sig6(capacity)
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_diagnostics_exit_3_validation_exits_2() {
        assert_eq!(exit_class(&Error::NonConvergence { what: "x".into(), iters: 9 }), 3);
        assert_eq!(
            exit_class(&Error::BracketFailure { what: "lambda", lo: 0.0, hi: 1.0 }),
            3
        );
        assert_eq!(exit_class(&Error::CodebookExhausted { built: 3, requested: 8 }), 3);
        assert_eq!(exit_class(&Error::UndefinedWaterLevel), 3);
        assert_eq!(exit_class(&Error::Config("bad".into())), 2);
        assert_eq!(exit_class(&Error::DimensionMismatch("len".into())), 2);
        assert_eq!(exit_class(&Error::EmptyTrainingSet), 2);
        assert_eq!(exit_class(&Error::Unsupported("rho with aqpa".into())), 2);
    }
}
