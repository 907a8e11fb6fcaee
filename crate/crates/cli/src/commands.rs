//! Subcommand implementations: each solves what it needs, writes CSV data
//! files plus a JSON result record, and reports failures through exit codes
//! (single runs) or recorded per-point failures (sweeps).

use std::path::{Path, PathBuf};
use std::time::Instant;

use isacbeam::metrics::beampattern;
use isacbeam::rng::derive_seed;
use isacbeam::scenario::{angle_grid, db_to_linear};
use isacbeam::{
    bisection_solve, capon_spectrum, estimate_angles, extract_rank_one, pareto_sweep, rmse_mc,
    run_selftest, simulate_echo, synthesize_transmit, verify_preservation, BeamformerSet,
    BisectionResult, EchoScenario, ParetoPoint, PreservationCheck, ProbeVerdict, Scenario,
    SchemeMode, SignalConfig,
};
use serde_json::{json, Value};

use crate::config::{Built, RunConfig};
use crate::CliError;

/// Seed sub-streams for the evaluation commands.
const CAPON_SYMBOL_STREAM: u64 = 0xCA90;
const CAPON_ECHO_STREAM: u64 = 0xCA91;
const RMSE_STREAM: u64 = 0xE53E;

pub struct RunContext {
    pub config: RunConfig,
    pub built: Built,
    pub out_dir: PathBuf,
}

impl RunContext {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// One solved scheme, extracted to on-air beamformers.
struct SchemeRun {
    mode: SchemeMode,
    scenario: Scenario,
    result: BisectionResult,
    beams: BeamformerSet,
    preservation: PreservationCheck,
    /// Note emitted when the scheme is realized approximately.
    approximation: Option<String>,
}

/// Schemes that transmit communication streams only get a zero-probing
/// variant of the scenario; everything else runs it as configured.
fn effective_scenario(
    base: &Scenario,
    mode: SchemeMode,
) -> Result<(Scenario, Option<String>), isacbeam::Error> {
    match mode {
        SchemeMode::CommOnly | SchemeMode::MiConstrained if base.signal.n_radar_streams > 0 => {
            let signal = SignalConfig::new(
                base.signal.block_length,
                base.signal.total_power,
                0,
                base.signal.radar_noise,
            )?;
            let scenario = Scenario::new(
                base.geometry.clone(),
                base.targets.clone(),
                base.users.clone(),
                signal,
            )?;
            let note = (mode == SchemeMode::MiConstrained).then(|| {
                "mi-constrained is realized as communication-centric with zero probing streams"
                    .to_string()
            });
            Ok((scenario, note))
        }
        _ => Ok((base.clone(), None)),
    }
}

/// Solve one scheme on a base scenario and extract on-air beamformers,
/// truncated to the scheme's probing budget.
fn solve_scheme(
    built: &Built,
    base: &Scenario,
    mode: SchemeMode,
) -> Result<SchemeRun, isacbeam::Error> {
    let (scenario, approximation) = effective_scenario(base, mode)?;
    let result =
        bisection_solve(&scenario, &built.weights, &built.thresholds, mode, &built.params)?;
    let report = extract_rank_one(&scenario, &result.point)?;
    let preservation = verify_preservation(&result.point, &report, &scenario)?;
    let beams = report.beamformers.with_radar_budget(scenario.signal.n_radar_streams);
    Ok(SchemeRun { mode, scenario, result, beams, preservation, approximation })
}

fn verdict_name(v: &ProbeVerdict) -> &'static str {
    match v {
        ProbeVerdict::Feasible => "feasible",
        ProbeVerdict::Infeasible => "infeasible",
        ProbeVerdict::Stalled => "stalled",
    }
}

fn point_json(p: &ParetoPoint) -> Value {
    json!({
        "alpha": p.alpha,
        "r_star": p.r_star,
        "i_up_bits": p.i_up_bits,
        "exact_mi_bits": p.exact_mi_bits,
        "sinrs": p.sinrs,
        "avg_rate_bits": p.avg_rate_bits,
    })
}

fn diagnostics_json(run: &SchemeRun) -> Value {
    json!({
        "scheme": run.mode.name(),
        "r_star": run.result.r_star,
        "r_max": run.result.r_max,
        "iterations": run.result.iterations,
        "history": run.result.history.iter()
            .map(|(r, v)| json!([r, verdict_name(v)]))
            .collect::<Vec<_>>(),
        "probing_streams": run.scenario.signal.n_radar_streams,
        "streams_on_air": {
            "comm": run.beams.comm.len(),
            "radar": run.beams.radar.len(),
        },
        "preservation": {
            "pass": run.preservation.pass,
            "cov_sum_residual": run.preservation.cov_sum_residual,
            "max_sinr_delta": run.preservation.max_sinr_delta,
        },
    })
}

/// Write one CSV file: a fixed header, then rows of cells where `None`
/// marks a value a failed scheme could not produce.
fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<Option<f64>>>,
) -> Result<(), CliError> {
    let file_err =
        |e: std::io::Error| CliError::runtime(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::runtime(format!("cannot open {}: {e}", path.display())))?;
    w.write_record(header).map_err(|e| CliError::runtime(e.to_string()))?;
    for row in rows {
        let cells: Vec<String> =
            row.iter().map(|c| c.map(|v| format!("{v}")).unwrap_or_default()).collect();
        w.write_record(&cells).map_err(|e| CliError::runtime(e.to_string()))?;
    }
    w.flush().map_err(file_err)
}

/// Write the JSON result record that makes a run self-describing: artifact
/// version, full resolved config echo, metrics, diagnostics, file listing.
fn write_record(
    ctx: &RunContext,
    command: &str,
    metrics: Value,
    diagnostics: Value,
    files: &[(&str, String)],
    approximations: &[String],
    started: Instant,
) -> Result<PathBuf, CliError> {
    let record = json!({
        "artifact": {
            "name": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
        },
        "command": command,
        "config": serde_json::to_value(&ctx.config)
            .map_err(|e| CliError::runtime(e.to_string()))?,
        "approximations": approximations,
        "metrics": metrics,
        "diagnostics": diagnostics,
        "files": files.iter().cloned().collect::<serde_json::Map<_, _>>()
            .into_iter().map(|(k, v)| (k, v)).collect::<serde_json::Map<String, Value>>(),
        "runtime_seconds": started.elapsed().as_secs_f64(),
    });
    let path = ctx.path(&format!("{command}.json"));
    let mut text = serde_json::to_string_pretty(&record)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Map a solver failure of a single requested run onto the exit-code
/// contract: infeasible floors 2, stalled 3, anything else 1.
fn run_err(e: isacbeam::Error) -> CliError {
    let code = match &e {
        isacbeam::Error::ThresholdsInfeasible(_) => 2,
        isacbeam::Error::Stalled { .. } => 3,
        _ => 1,
    };
    CliError { code, message: e.to_string() }
}

pub fn solve(ctx: &RunContext) -> Result<(), CliError> {
    let started = Instant::now();
    let run = solve_scheme(&ctx.built, &ctx.built.scenario, ctx.built.mode).map_err(run_err)?;

    let beam_path = ctx.path("beamformers.csv");
    write_beamformers(&beam_path, &run.beams)?;

    let metrics = json!({
        "achieved": point_json(&run.result.achieved),
        "preservation_pass": run.preservation.pass,
    });
    let approx: Vec<String> = run.approximation.clone().into_iter().collect();
    let record = write_record(
        ctx,
        "solve",
        metrics,
        diagnostics_json(&run),
        &[("beamformers", "beamformers.csv".into())],
        &approx,
        started,
    )?;
    let a = &run.result.achieved;
    println!(
        "solved {} in {} bisection steps: r* = {:.4}, bound {:.3} bits, exact {:.3} bits, \
         average rate {:.3} bits",
        run.mode.name(),
        run.result.iterations,
        run.result.r_star,
        a.i_up_bits,
        a.exact_mi_bits,
        a.avg_rate_bits
    );
    println!("wrote {} and {}", record.display(), beam_path.display());
    Ok(())
}

/// One beamformer per row, real and imaginary parts interleaved.
fn write_beamformers(path: &Path, beams: &BeamformerSet) -> Result<(), CliError> {
    let dim = beams.dim();
    let mut header = vec!["stream".to_string(), "kind".to_string()];
    for n in 0..dim {
        header.push(format!("re{n}"));
        header.push(format!("im{n}"));
    }
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::runtime(format!("cannot open {}: {e}", path.display())))?;
    w.write_record(&header).map_err(|e| CliError::runtime(e.to_string()))?;
    let all = beams.comm.iter().map(|v| ("comm", v)).chain(beams.radar.iter().map(|v| ("radar", v)));
    for (index, (kind, vector)) in all.enumerate() {
        let mut row = vec![index.to_string(), kind.to_string()];
        for z in vector.iter() {
            row.push(format!("{}", z.re));
            row.push(format!("{}", z.im));
        }
        w.write_record(&row).map_err(|e| CliError::runtime(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::runtime(e.to_string()))
}

pub fn pareto(ctx: &RunContext) -> Result<(), CliError> {
    let started = Instant::now();
    let grid = &ctx.config.experiment.alpha_grid;
    if grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(CliError::config("alpha grid values must lie in [0, 1]".into()));
    }
    let (scenario, approximation) =
        effective_scenario(&ctx.built.scenario, ctx.built.mode).map_err(run_err)?;
    let points =
        pareto_sweep(&scenario, &ctx.built.thresholds, grid, ctx.built.mode, &ctx.built.params);

    let csv_path = ctx.path("pareto.csv");
    let header: Vec<String> =
        ["alpha", "i_up_bits", "exact_mi_bits", "avg_rate_bits"].map(String::from).into();
    write_csv(
        &csv_path,
        &header,
        points.iter().filter_map(|p| p.outcome.as_ref().ok()).map(|r| {
            let a = &r.achieved;
            vec![Some(a.alpha), Some(a.i_up_bits), Some(a.exact_mi_bits), Some(a.avg_rate_bits)]
        }),
    )?;

    let solved: Vec<Value> = points
        .iter()
        .filter_map(|p| p.outcome.as_ref().ok())
        .map(|r| point_json(&r.achieved))
        .collect();
    let failures: Vec<Value> = points
        .iter()
        .filter_map(|p| {
            p.outcome.as_ref().err().map(|e| json!({"alpha": p.alpha, "error": e.to_string()}))
        })
        .collect();
    let n_solved = solved.len();
    let metrics = json!({"points": solved, "failures": failures});
    let diagnostics: Vec<Value> = points
        .iter()
        .filter_map(|p| p.outcome.as_ref().ok())
        .map(|r| json!({"alpha": r.achieved.alpha, "iterations": r.iterations, "r_max": r.r_max}))
        .collect();
    let approx: Vec<String> = approximation.into_iter().collect();
    write_record(
        ctx,
        "pareto-sweep",
        metrics,
        Value::Array(diagnostics),
        &[("pareto", "pareto.csv".into())],
        &approx,
        started,
    )?;
    println!(
        "pareto sweep over {} weights: {} solved, {} failed; wrote {}",
        grid.len(),
        n_solved,
        grid.len() - n_solved,
        csv_path.display()
    );
    Ok(())
}

/// Solve every requested scheme, tolerating per-scheme failures: sweeps
/// compare schemes, and one infeasible benchmark should not kill the rest.
fn solve_schemes(
    ctx: &RunContext,
    schemes: &[SchemeMode],
    base: &Scenario,
) -> (Vec<SchemeRun>, Vec<Value>) {
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for &mode in schemes {
        match solve_scheme(&ctx.built, base, mode) {
            Ok(run) => runs.push(run),
            Err(e) => {
                failures.push(json!({"scheme": mode.name(), "error": e.to_string()}));
            }
        }
    }
    (runs, failures)
}

pub fn beampattern_cmd(ctx: &RunContext) -> Result<(), CliError> {
    let started = Instant::now();
    let schemes = ctx.config.scheme_list()?;
    let grid = angle_grid(ctx.config.experiment.angle_step_deg);
    let (runs, failures) = solve_schemes(ctx, &schemes, &ctx.built.scenario);

    let mut columns = Vec::new();
    for run in &runs {
        let r_x = run.beams.transmit_covariance();
        let pattern = beampattern(&run.scenario.geometry, &r_x, &grid).map_err(run_err)?;
        columns.push(pattern);
    }
    let mut header = vec!["angle_deg".to_string()];
    header.extend(runs.iter().map(|r| r.mode.name().to_string()));
    let csv_path = ctx.path("beampattern.csv");
    write_csv(
        &csv_path,
        &header,
        grid.iter().enumerate().map(|(i, &angle)| {
            let mut row = vec![Some(angle)];
            row.extend(columns.iter().map(|c| Some(c[i])));
            row
        }),
    )?;

    let target_angles = &ctx.built.scenario.targets.angles_deg;
    let metrics: Vec<Value> = runs
        .iter()
        .map(|run| {
            let r_x = run.beams.transmit_covariance();
            let at_targets = beampattern(&run.scenario.geometry, &r_x, target_angles)
                .unwrap_or_default();
            json!({
                "scheme": run.mode.name(),
                "achieved": point_json(&run.result.achieved),
                "gain_at_targets": at_targets,
            })
        })
        .collect();
    let diagnostics: Vec<Value> = runs.iter().map(diagnostics_json).collect();
    let approx: Vec<String> = runs.iter().filter_map(|r| r.approximation.clone()).collect();
    write_record(
        ctx,
        "beampattern",
        json!({"schemes": metrics, "failures": failures}),
        Value::Array(diagnostics),
        &[("beampattern", "beampattern.csv".into())],
        &approx,
        started,
    )?;
    println!(
        "beampattern over {} angles for {} scheme(s); wrote {}",
        grid.len(),
        runs.len(),
        csv_path.display()
    );
    Ok(())
}

/// Rebuild the scenario with the radar noise implied by an echo SNR (dB).
fn scenario_at_radar_snr(base: &Scenario, snr_db: f64) -> Result<Scenario, isacbeam::Error> {
    let mean_var =
        base.targets.variances.iter().sum::<f64>() / base.targets.variances.len() as f64;
    let noise = mean_var * base.signal.total_power / db_to_linear(snr_db);
    let signal = SignalConfig::new(
        base.signal.block_length,
        base.signal.total_power,
        base.signal.n_radar_streams,
        noise,
    )?;
    Scenario::new(base.geometry.clone(), base.targets.clone(), base.users.clone(), signal)
}

/// Rebuild the scenario with user noise implied by a downlink SNR (dB).
fn scenario_at_comm_snr(base: &Scenario, snr_db: f64) -> Result<Scenario, isacbeam::Error> {
    let noise = base.signal.total_power / db_to_linear(snr_db);
    let mut users = base.users.clone();
    users.noise_powers = vec![noise; users.noise_powers.len()];
    Scenario::new(base.geometry.clone(), base.targets.clone(), users, base.signal.clone())
}

/// Shared shape of the two SNR sweeps: per grid point, re-solve every
/// scheme on an adjusted scenario and tabulate chosen metrics.
fn snr_sweep(
    ctx: &RunContext,
    command: &str,
    value_columns: &[&str],
    adjust: impl Fn(&Scenario, f64) -> Result<Scenario, isacbeam::Error>,
    extract: impl Fn(&SchemeRun) -> Vec<f64>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let schemes = ctx.config.scheme_list()?;
    let grid = &ctx.config.experiment.snr_grid_db;
    if grid.is_empty() {
        return Err(CliError::config("experiment.snr_grid_db must not be empty".into()));
    }

    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut metrics = Vec::new();
    let mut failures = Vec::new();
    let mut approximations: Vec<String> = Vec::new();
    for &snr in grid {
        let base = adjust(&ctx.built.scenario, snr).map_err(run_err)?;
        let (runs, fails) = solve_schemes(ctx, &schemes, &base);
        let mut row = vec![Some(snr)];
        for &mode in &schemes {
            match runs.iter().find(|r| r.mode == mode) {
                Some(run) => {
                    let values = extract(run);
                    row.extend(values.iter().map(|&v| Some(v)));
                    metrics.push(json!({
                        "snr_db": snr,
                        "scheme": mode.name(),
                        "achieved": point_json(&run.result.achieved),
                    }));
                    if let Some(note) = &run.approximation {
                        if !approximations.contains(note) {
                            approximations.push(note.clone());
                        }
                    }
                }
                None => row.extend(value_columns.iter().map(|_| None)),
            }
        }
        for f in fails {
            let mut f = f;
            f["snr_db"] = json!(snr);
            failures.push(f);
        }
        rows.push(row);
    }

    let mut header = vec!["snr_db".to_string()];
    for &mode in &schemes {
        for col in value_columns {
            header.push(format!("{}_{col}", mode.name()));
        }
    }
    let csv_name = format!("{}.csv", command.replace('-', "_"));
    let csv_path = ctx.path(&csv_name);
    write_csv(&csv_path, &header, rows.into_iter())?;
    write_record(
        ctx,
        command,
        json!({"points": metrics, "failures": failures}),
        Value::Null,
        &[("table", csv_name)],
        &approximations,
        started,
    )?;
    println!("{command} over {} SNR points; wrote {}", grid.len(), csv_path.display());
    Ok(())
}

pub fn mi_vs_snr(ctx: &RunContext) -> Result<(), CliError> {
    snr_sweep(ctx, "mi-vs-snr", &["i_up_bits", "exact_mi_bits"], scenario_at_radar_snr, |run| {
        vec![run.result.achieved.i_up_bits, run.result.achieved.exact_mi_bits]
    })
}

pub fn rate_vs_snr(ctx: &RunContext) -> Result<(), CliError> {
    snr_sweep(ctx, "rate-vs-snr", &["avg_rate_bits"], scenario_at_comm_snr, |run| {
        vec![run.result.achieved.avg_rate_bits]
    })
}

pub fn capon(ctx: &RunContext) -> Result<(), CliError> {
    let started = Instant::now();
    let schemes = ctx.config.scheme_list()?;
    let grid = angle_grid(ctx.config.experiment.angle_step_deg);
    let seed = ctx.config.seed;
    let (runs, failures) = solve_schemes(ctx, &schemes, &ctx.built.scenario);

    let mut columns = Vec::new();
    let mut estimates = Vec::new();
    for run in &runs {
        let scn = &run.scenario;
        let x = synthesize_transmit(
            &run.beams,
            scn.signal.block_length,
            derive_seed(seed, CAPON_SYMBOL_STREAM),
        )
        .map_err(run_err)?;
        let echo = EchoScenario::unit(
            scn.n_targets(),
            scn.signal.radar_noise,
            derive_seed(seed, CAPON_ECHO_STREAM),
        )
        .map_err(run_err)?;
        let y = simulate_echo(&scn.geometry, &scn.targets, &echo, &x).map_err(run_err)?;
        let result = capon_spectrum(&y, &scn.geometry, &grid).map_err(run_err)?;
        let estimate = estimate_angles(&result, scn.n_targets()).map_err(run_err)?;
        estimates.push(json!({
            "scheme": run.mode.name(),
            "estimated_angles_deg": estimate.angles_deg,
            "degenerate": estimate.degenerate,
        }));
        columns.push(result.spectrum);
    }

    let mut header = vec!["angle_deg".to_string()];
    header.extend(runs.iter().map(|r| r.mode.name().to_string()));
    let csv_path = ctx.path("capon.csv");
    write_csv(
        &csv_path,
        &header,
        grid.iter().enumerate().map(|(i, &angle)| {
            let mut row = vec![Some(angle)];
            row.extend(columns.iter().map(|c| Some(c[i])));
            row
        }),
    )?;
    let diagnostics: Vec<Value> = runs.iter().map(diagnostics_json).collect();
    let approx: Vec<String> = runs.iter().filter_map(|r| r.approximation.clone()).collect();
    write_record(
        ctx,
        "capon",
        json!({
            "true_angles_deg": ctx.built.scenario.targets.angles_deg,
            "estimates": estimates,
            "failures": failures,
        }),
        Value::Array(diagnostics),
        &[("capon", "capon.csv".into())],
        &approx,
        started,
    )?;
    println!(
        "capon spectra for {} scheme(s) over {} angles; wrote {}",
        runs.len(),
        grid.len(),
        csv_path.display()
    );
    Ok(())
}

pub fn rmse(ctx: &RunContext) -> Result<(), CliError> {
    let started = Instant::now();
    let schemes = ctx.config.scheme_list()?;
    let grid = &ctx.config.experiment.snr_grid_db;
    let trials = ctx.config.experiment.trials;
    if grid.is_empty() || trials == 0 {
        return Err(CliError::config("rmse needs a non-empty SNR grid and trials >= 1".into()));
    }
    let (runs, failures) = solve_schemes(ctx, &schemes, &ctx.built.scenario);

    let mut tables = Vec::new();
    for run in &runs {
        let table = rmse_mc(
            &run.scenario,
            &run.beams,
            grid,
            trials,
            derive_seed(ctx.config.seed, RMSE_STREAM),
        )
        .map_err(run_err)?;
        tables.push(table);
    }

    let mut header = vec!["snr_db".to_string()];
    header.extend(runs.iter().map(|r| format!("{}_rmse_deg", r.mode.name())));
    let csv_path = ctx.path("rmse.csv");
    write_csv(
        &csv_path,
        &header,
        grid.iter().enumerate().map(|(i, &snr)| {
            let mut row = vec![Some(snr)];
            row.extend(tables.iter().map(|t| Some(t[i].rmse_deg)));
            row
        }),
    )?;
    let metrics: Vec<Value> = runs
        .iter()
        .zip(&tables)
        .map(|(run, table)| {
            json!({
                "scheme": run.mode.name(),
                "rmse": table.iter()
                    .map(|p| json!({"snr_db": p.snr_db, "rmse_deg": p.rmse_deg}))
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    let diagnostics: Vec<Value> = runs.iter().map(diagnostics_json).collect();
    let approx: Vec<String> = runs.iter().filter_map(|r| r.approximation.clone()).collect();
    write_record(
        ctx,
        "rmse",
        json!({"schemes": metrics, "trials": trials, "failures": failures}),
        Value::Array(diagnostics),
        &[("rmse", "rmse.csv".into())],
        &approx,
        started,
    )?;
    println!(
        "rmse over {} SNR points, {} trials, {} scheme(s); wrote {}",
        grid.len(),
        trials,
        runs.len(),
        csv_path.display()
    );
    Ok(())
}

/// Run the library invariant suite; any failed check exits 1.
pub fn selftest() -> Result<(), CliError> {
    let outcomes = run_selftest();
    let mut failed = 0usize;
    for o in &outcomes {
        let status = if o.pass { "pass" } else { "FAIL" };
        println!("{status}  {} — {}", o.name, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::runtime(format!("{failed} of {} checks failed", outcomes.len())));
    }
    println!("all {} checks passed", outcomes.len());
    Ok(())
}
