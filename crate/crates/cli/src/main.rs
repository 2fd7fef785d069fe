use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use calabi_core::disc::{self, DiscGrid};
use calabi_core::error::Error;
use calabi_core::flow::{self, DiagnosticsRecord, Flow, HaltCause, RunOutcome};
use calabi_core::geometry::assemble_metric;
use calabi_core::io::{self, DiscPotential, Scenario, VOLUME_CONVENTION};
use calabi_core::krylov::SolverOptions;
use calabi_core::monitor;
use calabi_core::operators::{self, EigenOptions};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_HALT: u8 = 3;
const EXIT_NO_CONVERGENCE: u8 = 4;

/// Conservation tolerance used by `check`.
const CONSERVATION_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "calabi", version, about = "Calabi flow laboratory on flat complex tori and the punctured disc")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir` of the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to CALABI_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow and write the diagnostics series.
    Run(Common),
    /// One-shot geometry report of the initial potential.
    Curvature(Common),
    /// Lowest Lichnérowicz eigenvalue of the initial potential.
    Spectrum(Common),
    /// Futaki character of the initial potential.
    Futaki(Common),
    /// Punctured-disc singularity-removal pipeline.
    Desing(Common),
    /// Invariant checks on the scenario's series (runs it if absent).
    Check(Common),
}

/// Failure carrying its exit code.
struct Exit(u8, String);

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Io(_) | Error::Format(_) | Error::InvalidArgument(_) => EXIT_CONFIG,
            Error::NonAdmissible { .. } | Error::StepFailure { .. } | Error::EllipticityLost { .. } => EXIT_HALT,
            Error::NoConvergence { .. } | Error::IndefiniteForm { .. } => EXIT_NO_CONVERGENCE,
            _ => EXIT_CHECK_FAILED,
        };
        Exit(code, e.to_string())
    }
}

impl From<std::io::Error> for Exit {
    fn from(e: std::io::Error) -> Self {
        Exit(EXIT_CONFIG, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Exit>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Run(c)
        | Command::Curvature(c)
        | Command::Spectrum(c)
        | Command::Futaki(c)
        | Command::Desing(c)
        | Command::Check(c) => c.clone(),
    };
    let result = configure_threads(common.threads).and_then(|_| {
        let (scenario, out) = load(&common)?;
        match cli.command {
            Command::Run(_) => cmd_run(&scenario, &out),
            Command::Curvature(_) => cmd_curvature(&scenario, &out),
            Command::Spectrum(_) => cmd_spectrum(&scenario, &out),
            Command::Futaki(_) => cmd_futaki(&scenario, &out),
            Command::Desing(_) => cmd_desing(&scenario, &out),
            Command::Check(_) => cmd_check(&scenario, &out),
        }
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, msg)) => {
            eprintln!("calabi: {msg}");
            ExitCode::from(code)
        }
    }
}

fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let threads = match flag {
        Some(k) => Some(k),
        None => match std::env::var("CALABI_THREADS") {
            Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| Exit(EXIT_CONFIG, format!("CALABI_THREADS={s} is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(k) = threads {
        if k == 0 {
            return Err(Exit(EXIT_CONFIG, "thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Exit(EXIT_CONFIG, e.to_string()))?;
    }
    Ok(())
}

fn load(c: &Common) -> CliResult<(Scenario, PathBuf)> {
    let scenario = Scenario::load(&c.config)?;
    let out = c.out.clone().unwrap_or_else(|| scenario.output.dir.clone());
    fs::create_dir_all(&out)?;
    Ok((scenario, out))
}

/// Writes a line to stdout; a closed pipe is not an error.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn emit(out: &Path, name: &str, value: &Value) -> CliResult<()> {
    io::write_json(&out.join(name), value)?;
    say(&serde_json::to_string_pretty(value).expect("serializable"));
    Ok(())
}

fn record_json(r: &DiagnosticsRecord) -> Value {
    serde_json::to_value(r).expect("serializable")
}

fn halt_json(cause: &HaltCause) -> Value {
    match cause {
        HaltCause::TEnd => json!({ "cause": cause.as_str() }),
        HaltCause::Stationary { t } => json!({ "cause": cause.as_str(), "t": t }),
        HaltCause::NonAdmissible { t, min_eig, index } => {
            json!({ "cause": cause.as_str(), "t": t, "min_eig": min_eig, "index": index })
        }
        HaltCause::StepFailure { t, reason } => json!({ "cause": cause.as_str(), "t": t, "reason": reason }),
    }
}

/// Runs the scenario's flow and writes series, snapshots and summary.
fn execute_run(s: &Scenario, out: &Path) -> CliResult<RunOutcome> {
    let torus = s.torus()?;
    let phi0 = s.initial_potential(&torus)?;
    let flow = Flow::new(torus, s.integrator.clone())?;
    let outcome = flow.run(phi0)?;

    io::write_csv_file(&out.join("series.csv"), &outcome.records)?;
    if !outcome.snapshots.is_empty() {
        let dir = out.join("snapshots");
        fs::create_dir_all(&dir)?;
        for (t, phi) in &outcome.snapshots {
            io::write_field(&dir.join(format!("phi_t{t:.6}.cfsf")), phi)?;
        }
    }
    io::write_field(&out.join("phi_final.cfsf"), &outcome.final_state.phi)?;

    let m = outcome.final_state.metric();
    let mut summary = json!({
        "convention": VOLUME_CONVENTION,
        "halt": halt_json(&outcome.cause),
        "accepted_steps": outcome.steps.len() - 1,
        "rejected_steps": outcome.rejected_steps,
        "monotonicity": {
            "steps": outcome.monotonicity.steps,
            "violations": outcome.monotonicity.violations,
            "worst_relative_increase": outcome.monotonicity.worst_increase,
        },
        "final": record_json(outcome.records.last().expect("at least the initial record")),
    });
    if s.monitors.compactness {
        summary["compactness"] = serde_json::to_value(monitor::report(m)).expect("serializable");
        let j = monitor::jensen_check(m);
        summary["jensen"] = json!({ "holds": j.holds, "margin": j.margin });
    }
    if s.monitors.spectrum {
        summary["spectrum"] = spectrum_json(m, s.seed)?;
    }
    if s.monitors.futaki {
        summary["futaki"] = futaki_json(m, &outcome.final_state.integrals)?;
    }
    io::write_json(&out.join("summary.json"), &summary)?;
    Ok(outcome)
}

fn cmd_run(s: &Scenario, out: &Path) -> CliResult<u8> {
    let outcome = execute_run(s, out)?;
    let last = outcome.records.last().expect("initial record");
    say(&format!(
        "{} at t = {:.6}: Ca = {:.6e}, {} steps ({} rejected); outputs in {}",
        outcome.cause.as_str(),
        last.t,
        last.ca,
        outcome.steps.len() - 1,
        outcome.rejected_steps,
        out.display()
    ));
    Ok(if outcome.cause.is_failure() { EXIT_HALT } else { 0 })
}

fn cmd_curvature(s: &Scenario, out: &Path) -> CliResult<u8> {
    let torus = s.torus()?;
    let phi = s.initial_potential(&torus)?;
    let m = assemble_metric(&torus, &phi)?;
    let c = m.curvature();
    let g = m.global_integrals(&c.scalar);
    io::write_field(&out.join("scalar_curvature.cfsf"), &c.scalar)?;
    io::write_field(&out.join("log_ratio.cfsf"), &c.log_ratio)?;
    let j = monitor::jensen_check(&m);
    let value = json!({
        "convention": VOLUME_CONVENTION,
        "volume": g.volume,
        "total_scalar": g.total_scalar,
        "mean_scalar": g.mean_scalar,
        "calabi": g.calabi,
        "modified_calabi": g.modified_calabi,
        "sup_scalar": c.scalar.sup_norm(),
        "compactness": serde_json::to_value(monitor::report(&m)).expect("serializable"),
        "jensen": { "holds": j.holds, "margin": j.margin },
    });
    emit(out, "curvature.json", &value)?;
    Ok(0)
}

fn spectrum_json(m: &calabi_core::geometry::Metric, seed: u64) -> CliResult<Value> {
    let r = operators::lowest_eigenvalue(m, EigenOptions { seed, ..Default::default() })?;
    Ok(json!({
        "lambda": r.lambda,
        "rayleigh_residual": r.rayleigh_residual,
        "iterations": r.iterations,
    }))
}

fn futaki_json(m: &calabi_core::geometry::Metric, g: &calabi_core::geometry::GlobalIntegrals) -> CliResult<Value> {
    let bound = (g.calabi * g.volume).sqrt();
    let values: Vec<Value> = operators::futaki_components(m, SolverOptions { tol: 1e-12, max_iter: 2000 })?
        .iter()
        .enumerate()
        .map(|(j, f)| json!({ "direction": j, "re": f.re, "im": f.im, "abs": f.norm() }))
        .collect();
    Ok(json!({ "values": values, "sqrt_ca_times_v": bound }))
}

fn cmd_spectrum(s: &Scenario, out: &Path) -> CliResult<u8> {
    let torus = s.torus()?;
    let phi = s.initial_potential(&torus)?;
    let m = assemble_metric(&torus, &phi)?;
    let r = operators::lowest_eigenvalue(&m, EigenOptions { seed: s.seed, ..Default::default() })?;
    io::write_field(&out.join("eigenfield.cfsf"), &r.eigenfield)?;
    let value = json!({
        "convention": VOLUME_CONVENTION,
        "lambda": r.lambda,
        "rayleigh_residual": r.rayleigh_residual,
        "iterations": r.iterations,
    });
    emit(out, "spectrum.json", &value)?;
    Ok(0)
}

fn cmd_futaki(s: &Scenario, out: &Path) -> CliResult<u8> {
    let torus = s.torus()?;
    let phi = s.initial_potential(&torus)?;
    let m = assemble_metric(&torus, &phi)?;
    let r = m.scalar_curvature();
    let g = m.global_integrals(&r);
    let mut value = futaki_json(&m, &g)?;
    value["convention"] = json!(VOLUME_CONVENTION);
    emit(out, "futaki.json", &value)?;
    Ok(0)
}

fn cmd_desing(s: &Scenario, out: &Path) -> CliResult<u8> {
    let d = s.disc.as_ref().ok_or_else(|| Exit(EXIT_CONFIG, "scenario has no `disc` section".into()))?;
    let grid = DiscGrid::new(d.points, d.puncture)?;
    let phi = match &d.potential {
        DiscPotential::Zero => vec![0.0; grid.len()],
        DiscPotential::Quartic { coefficient } => grid.sample(|x, y| coefficient * (x * x + y * y).powi(2)),
        DiscPotential::Snapshot { path } => {
            let file = fs::File::open(path).map_err(|e| Exit(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
            let snap = io::read_snapshot(std::io::BufReader::new(file))?;
            if snap.n != 1 || snap.points as usize != d.points {
                return Err(Exit(EXIT_CONFIG, format!("disc snapshot must be n = 1, N = {}", d.points)));
            }
            snap.values
        }
        DiscPotential::TorusChart { center, radius } => {
            let outcome = execute_run(s, out)?;
            if outcome.cause.is_failure() {
                return Err(Exit(EXIT_HALT, format!("torus flow halted: {}", outcome.cause.as_str())));
            }
            let torus = s.torus()?;
            disc::torus_chart(&torus, &outcome.final_state.phi, &grid, *center, *radius)?
        }
    };
    let r = disc::desingularize(&grid, &phi, d.rbar)?;
    let h = grid.spacing();
    let threshold = 10.0 * (1e-10 + h);
    let n = d.points as u32;
    let write = |name: &str, v: &[f64]| -> CliResult<()> {
        let f = fs::File::create(out.join(name))?;
        io::write_snapshot(std::io::BufWriter::new(f), 1, n, v)?;
        Ok(())
    };
    write("disc_u.cfsf", &r.solution.u)?;
    write("disc_v.cfsf", &r.v)?;
    let value = json!({
        "points": d.points,
        "spacing": h,
        "puncture": d.puncture,
        "rbar": d.rbar,
        "sup_v": r.sup_v,
        "threshold": threshold,
        "removable": r.sup_v <= threshold,
        "energy": r.solution.energy,
        "solver_residual": r.solution.residual,
        "solver_iterations": r.solution.iterations,
    });
    emit(out, "desing.json", &value)?;
    Ok(0)
}

struct CheckLine {
    name: String,
    pass: bool,
    detail: String,
}

fn cmd_check(s: &Scenario, out: &Path) -> CliResult<u8> {
    let csv = out.join("series.csv");
    let records = if csv.exists() {
        io::read_csv_file(&csv)?
    } else {
        execute_run(s, out)?.records
    };
    let mut lines = Vec::new();
    let mut add = |name: &str, pass: bool, detail: String| lines.push(CheckLine { name: name.into(), pass, detail });

    let finite = records.iter().all(|r| {
        [r.t, r.ca, r.cam, r.volume, r.total_scalar, r.dissipation, r.lambda, r.big_lambda, r.sup_phi, r.sup_ric, r.sup_f, r.tail, r.dt]
            .iter()
            .all(|v| v.is_finite())
    });
    add("finite", finite, format!("{} records", records.len()));

    let r0 = records[0];
    let dv = records.iter().map(|r| (r.volume - r0.volume).abs() / r0.volume).fold(0.0, f64::max);
    add("volume_conserved", dv <= CONSERVATION_TOL, format!("max relative drift {dv:.3e}"));
    let scale = r0.total_scalar.abs().max(1.0);
    let ds = records.iter().map(|r| (r.total_scalar - r0.total_scalar).abs() / scale).fold(0.0, f64::max);
    add("total_scalar_conserved", ds <= CONSERVATION_TOL, format!("max drift {ds:.3e}"));

    let slack = flow::MONOTONE_SLACK * r0.cam;
    let worst = records.windows(2).map(|w| w[1].cam - w[0].cam).fold(f64::NEG_INFINITY, f64::max);
    let mono = records.len() < 2 || worst <= slack;
    add("energy_monotone", mono, format!("largest increase {worst:.3e} (slack {slack:.3e})"));

    if let Some(e) = &s.expect.decay_rate {
        match flow::decay_rate_fit(&records, (e.window[0], e.window[1])) {
            Ok((delta, rms)) => {
                let rel = (delta - e.rate).abs() / e.rate;
                add("decay_rate", rel <= e.rel_tol, format!("delta {delta:.7} vs {} (rel {rel:.2e}, rms {rms:.1e})", e.rate));
            }
            Err(err) => add("decay_rate", false, err.to_string()),
        }
    }
    if let Some(bound) = s.expect.identity_defect {
        match flow::dissipation_identity_check(&records) {
            Ok(d) => add("dissipation_identity", d.defect <= bound, format!("defect {:.3e} (bound {bound:.1e})", d.defect)),
            Err(err) => add("dissipation_identity", false, err.to_string()),
        }
    }

    let mut ok = true;
    for l in &lines {
        ok &= l.pass;
        say(&format!("{} {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.name, l.detail));
    }
    Ok(if ok { 0 } else { EXIT_CHECK_FAILED })
}
