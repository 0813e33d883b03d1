use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chebprop::config::{Model, Problem, RunConfig};
use chebprop::oct::models::DoubleLambda;
use chebprop::oct::spectrum::{field_spectrum_on, Spectrum};
use chebprop::oct::{krotov_iterate, FunctionalReport};
use chebprop::scan::run_scan;
use chebprop::selfcheck::{run_selfcheck, Fault};
use chebprop::timegrid::{SampledTrajectory, TimeGrid};
use chebprop::Error;
use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "chebprop", version, about = "Chebychev propagators for inhomogeneous Schrödinger equations")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Print the report as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for parallel scans.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random initial states and self-checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Verb {
    /// Single propagation: trajectory.csv, populations.csv, report.json.
    Propagate,
    /// Convergence and cost scan: scan.csv, deviations.csv, report.json.
    Scan,
    /// Krotov optimization: functional.csv, field.csv, spectrum.csv,
    /// populations.csv, report.json.
    Oct,
    /// Spectrum of the configured guess field, or of a field.csv.
    Spectrum {
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Oracle-backed invariant checks.
    Selfcheck {
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn run_err(e: Error) -> Failure {
    if e.is_numerical() {
        Failure::Numerical(e.to_string())
    } else {
        Failure::Config(e.to_string())
    }
}

fn io_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("output error: {e}"))
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match &cli.verb {
        Verb::Propagate => cmd_propagate(&cli),
        Verb::Scan => cmd_scan(&cli),
        Verb::Oct => cmd_oct(&cli),
        Verb::Spectrum { field } => cmd_spectrum(&cli, field.as_deref()),
        Verb::Selfcheck { inject_fault } => cmd_selfcheck(&cli, inject_fault.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("error: {m}"),
                Failure::Numerical(m) => eprintln!("numerical failure: {m}"),
                Failure::Check(m) => eprintln!("self-check failed: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn load_problem(cli: &Cli) -> Result<Problem, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path).map_err(config_err)?;
    let problem = Problem::build(cfg, cli.seed).map_err(config_err)?;
    for w in &problem.warnings {
        eprintln!("warning: {w}");
    }
    Ok(problem)
}

fn out_dir(cli: &Cli) -> Result<&Path, Failure> {
    fs::create_dir_all(&cli.out).map_err(io_err)?;
    Ok(&cli.out)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Outcome {
    fs::write(path, serde_json::to_string_pretty(value).map_err(io_err)? + "\n").map_err(io_err)
}

fn emit(cli: &Cli, value: &serde_json::Value, text: impl FnOnce()) {
    if cli.json {
        println!("{}", serde_json::to_string_pretty(value).unwrap());
    } else {
        text();
    }
}

/// SHA-256 over the trajectory with amplitudes rounded to 1e-6, so that it
/// is insensitive to last-bit rounding differences between machines.
fn trajectory_digest(traj: &SampledTrajectory) -> String {
    let mut h = Sha256::new();
    let q = |x: f64| (x * 1e6).round() as i64;
    for (k, v) in traj.values.iter().enumerate() {
        let mut line = k.to_string();
        for a in v.iter() {
            line.push_str(&format!(",{},{}", q(a.re), q(a.im)));
        }
        line.push('\n');
        h.update(line.as_bytes());
    }
    hex::encode(h.finalize())
}

fn write_populations(path: &Path, model: &Model, traj: &SampledTrajectory) -> Outcome {
    let mut wr = csv::Writer::from_path(path).map_err(io_err)?;
    let mut header = vec!["t".to_string(), "norm".to_string()];
    header.extend(model.population_labels());
    wr.write_record(&header).map_err(io_err)?;
    for (t, v) in traj.grid.points().iter().zip(&traj.values) {
        let mut row = vec![format!("{t:.10e}"), format!("{:.15e}", v.norm())];
        row.extend(model.populations(v).iter().map(|p| format!("{p:.15e}")));
        wr.write_record(&row).map_err(io_err)?;
    }
    wr.flush().map_err(io_err)
}

fn write_field(path: &Path, grid: &TimeGrid, field: &[f64]) -> Outcome {
    let mut wr = csv::Writer::from_path(path).map_err(io_err)?;
    wr.write_record(["step", "t_start", "t_end", "field"]).map_err(io_err)?;
    let pts = grid.points();
    for (n, e) in field.iter().enumerate() {
        wr.write_record([n.to_string(), format!("{:.10e}", pts[n]), format!("{:.10e}", pts[n + 1]), format!("{e:.15e}")])
            .map_err(io_err)?;
    }
    wr.flush().map_err(io_err)
}

fn write_spectrum(path: &Path, sp: &Spectrum) -> Outcome {
    let mut wr = csv::Writer::from_path(path).map_err(io_err)?;
    wr.write_record(["freq_cm", "magnitude"]).map_err(io_err)?;
    for (f, a) in sp.positive() {
        wr.write_record([format!("{f:.6}"), format!("{a:.10e}")]).map_err(io_err)?;
    }
    wr.flush().map_err(io_err)
}

/// Peak search around each ground↔excited transition of the double-Λ model:
/// local maxima of at least 1% of the largest magnitude, within ±2 bins.
fn transition_peaks(model: &DoubleLambda, sp: &Spectrum) -> serde_json::Value {
    let labels = model.labels();
    let rows: Vec<serde_json::Value> = model
        .transitions()
        .into_iter()
        .map(|(u, l, f)| {
            json!({
                "transition": format!("{}<-{}", labels[u], labels[l]),
                "freq_cm": f,
                "peak_within_2_bins": sp.has_peak_near(f, 2, 0.01),
            })
        })
        .collect();
    serde_json::Value::Array(rows)
}

fn cmd_propagate(cli: &Cli) -> Outcome {
    let p = load_problem(cli)?;
    let run = p.run(&p.propagator).map_err(run_err)?;
    let dir = out_dir(cli)?;
    run.trajectory.save_csv(&dir.join("trajectory.csv")).map_err(io_err)?;
    write_populations(&dir.join("populations.csv"), &p.model, &run.trajectory)?;
    let norms: Vec<f64> = run.trajectory.values.iter().map(|v| v.norm()).collect();
    let report = json!({
        "run": run.report,
        "final_norm": norms.last(),
        "max_norm_deviation": norms.iter().map(|n| (n - norms[0]).abs()).fold(0.0, f64::max),
        "trajectory_digest": trajectory_digest(&run.trajectory),
        "warnings": p.warnings,
    });
    write_json(&dir.join("report.json"), &report)?;
    emit(cli, &report, || {
        let r = &run.report;
        println!(
            "{} m={} N_t={} dt_max={:.4} N_cheb={:?} H_applications={} wall={:.3}s",
            r.scheme, r.m, r.n_t, r.dt_max, r.n_cheb, r.h_applications, r.wall_seconds
        );
        println!("digest {}", trajectory_digest(&run.trajectory));
        println!("wrote {}", dir.display());
    });
    Ok(())
}

const TRACE_POINTS: usize = 2000;

/// At most `n` points of a trace: the largest deviation in each of `n`
/// consecutive blocks.
fn block_maxima(trace: &[(f64, f64)], n: usize) -> Vec<(f64, f64)> {
    let block = trace.len().div_ceil(n).max(1);
    trace
        .chunks(block)
        .map(|c| *c.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap())
        .collect()
}

fn cmd_scan(cli: &Cli) -> Outcome {
    let p = load_problem(cli)?;
    let spec = p.config.scan_spec().map_err(config_err)?;
    let res = run_scan(&spec, |cfg| p.run(cfg)).map_err(run_err)?;
    let dir = out_dir(cli)?;
    let mut wr = csv::Writer::from_path(dir.join("scan.csv")).map_err(io_err)?;
    wr.write_record(["m", "dt", "dt_max", "N_t", "N_cheb", "H_applications", "wall_seconds", "converged", "error_vs_reference"])
        .map_err(io_err)?;
    for r in &res.rows {
        wr.write_record([
            r.m.to_string(),
            r.dt.map_or(String::new(), |d| d.to_string()),
            format!("{:.6}", r.dt_max),
            r.n_t.to_string(),
            r.n_cheb.to_string(),
            r.h_applications.to_string(),
            format!("{:.4}", r.wall_seconds),
            r.converged.to_string(),
            format!("{:.6e}", r.error_vs_reference),
        ])
        .map_err(io_err)?;
    }
    wr.flush().map_err(io_err)?;
    let mut wr = csv::Writer::from_path(dir.join("deviations.csv")).map_err(io_err)?;
    wr.write_record(["m", "N_t", "t", "deviation"]).map_err(io_err)?;
    for (r, trace) in res.rows.iter().zip(&res.traces) {
        for (t, d) in block_maxima(trace, TRACE_POINTS) {
            wr.write_record([r.m.to_string(), r.n_t.to_string(), format!("{t:.10e}"), format!("{d:.6e}")]).map_err(io_err)?;
        }
    }
    wr.flush().map_err(io_err)?;
    let report = json!({ "threshold": spec.threshold, "reference": res.reference, "rows": res.rows });
    write_json(&dir.join("report.json"), &report)?;
    emit(cli, &report, || {
        println!("reference: m={} N_t={}", res.reference.m, res.reference.n_t);
        println!("{:>3} {:>10} {:>8} {:>7} {:>14} {:>10} {:>12}", "m", "dt_max", "N_t", "N_cheb", "H_applications", "converged", "error");
        for r in &res.rows {
            println!(
                "{:>3} {:>10.4} {:>8} {:>7} {:>14} {:>10} {:>12.3e}",
                r.m, r.dt_max, r.n_t, r.n_cheb, r.h_applications, r.converged, r.error_vs_reference
            );
        }
    });
    Ok(())
}

fn cmd_oct(cli: &Cli) -> Outcome {
    let p = load_problem(cli)?;
    let target = p.target.as_ref().ok_or_else(|| Failure::Config("oct needs a [target] section".into()))?;
    let kcfg = p.krotov_config().map_err(config_err)?;
    let field = p.control_on(&p.grid);
    let quiet = cli.json;
    let res = krotov_iterate(&p.psi0, field, target, &p.hamiltonian, &kcfg, |r: &FunctionalReport| {
        if !quiet {
            println!(
                "iter {:>4}  J={:+.10e}  J0={:.6e}  Ja={:+.6e}  Jb={:.6e}  Jnorm={:.6}",
                r.iteration, r.j, r.j0, r.ja, r.jb, r.j_norm
            );
        }
    })
    .map_err(run_err)?;
    let dir = out_dir(cli)?;
    let mut wr = csv::Writer::from_path(dir.join("functional.csv")).map_err(io_err)?;
    wr.write_record(["iteration", "J", "J0", "J_a", "J_b", "J_norm"]).map_err(io_err)?;
    for r in &res.reports {
        wr.write_record([
            r.iteration.to_string(),
            format!("{:.15e}", r.j),
            format!("{:.15e}", r.j0),
            format!("{:.15e}", r.ja),
            format!("{:.15e}", r.jb),
            format!("{:.15e}", r.j_norm),
        ])
        .map_err(io_err)?;
    }
    wr.flush().map_err(io_err)?;
    write_field(&dir.join("field.csv"), &p.grid, &res.field.samples)?;
    let sp = field_spectrum_on(&p.grid, &res.field.samples).map_err(run_err)?;
    write_spectrum(&dir.join("spectrum.csv"), &sp)?;
    write_populations(&dir.join("populations.csv"), &p.model, &res.trajectory)?;
    let mut report = json!({
        "iterations": kcfg.iterations,
        "monotonic": res.monotonic(),
        "violations": res.violations,
        "guess": res.reports[0],
        "final": res.last(),
        "spectrum_bin_cm": sp.bin_cm(),
        "warnings": p.warnings,
    });
    if let Model::DoubleLambda(m) = &p.model {
        report["transition_peaks"] = transition_peaks(m, &sp);
    }
    write_json(&dir.join("report.json"), &report)?;
    emit(cli, &report, || {
        println!("monotonic: {} (violations at {:?})", res.monotonic(), res.violations);
        println!("wrote {}", dir.display());
    });
    Ok(())
}

fn read_field(path: &Path) -> Result<Vec<f64>, Failure> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let v = rec
            .get(3)
            .ok_or_else(|| Failure::Config(format!("{}: expected columns step,t_start,t_end,field", path.display())))?;
        out.push(v.trim().parse().map_err(|e| Failure::Config(format!("{}: bad field value {v:?}: {e}", path.display())))?);
    }
    Ok(out)
}

fn cmd_spectrum(cli: &Cli, field_path: Option<&Path>) -> Outcome {
    let p = load_problem(cli)?;
    let field = match field_path {
        Some(path) => read_field(path)?,
        None => p.field_on(&p.grid),
    };
    let field = if field.is_empty() { vec![0.0; p.grid.n_steps()] } else { field };
    let sp = field_spectrum_on(&p.grid, &field).map_err(config_err)?;
    let dir = out_dir(cli)?;
    write_spectrum(&dir.join("spectrum.csv"), &sp)?;
    let peaks: Vec<(f64, f64)> = sp.peaks(0.01).into_iter().map(|k| sp.positive()[k]).collect();
    let mut report = json!({ "bin_cm": sp.bin_cm(), "energy": sp.energy(), "peaks": peaks });
    if let Model::DoubleLambda(m) = &p.model {
        report["transition_peaks"] = transition_peaks(m, &sp);
    }
    write_json(&dir.join("report.json"), &report)?;
    emit(cli, &report, || {
        println!("bin width {:.4} cm^-1, {} peaks above 1% of the maximum", sp.bin_cm(), peaks.len());
        println!("wrote {}", dir.display());
    });
    Ok(())
}

fn cmd_selfcheck(cli: &Cli, fault: Option<&str>) -> Outcome {
    let fault = fault.map(|f| f.parse::<Fault>()).transpose().map_err(Failure::Config)?;
    let report = run_selfcheck(cli.seed.unwrap_or(0), fault);
    let value = serde_json::to_value(&report).map_err(io_err)?;
    emit(cli, &value, || {
        for c in &report.checks {
            println!(
                "{} {:<22} max error {:.3e} (tolerance {:.0e})  {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.max_error,
                c.tolerance,
                c.detail
            );
        }
    });
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Check(report.failed().join(", ")))
    }
}
