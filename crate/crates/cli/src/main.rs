use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linengine::config::RunConfig;
use linengine::currents::{labels, solve_engine, EngineSolution, HeatReport, RateTable};
use linengine::floquet::check_stability;
use linengine::model::EngineConfig;
use linengine::oracle::run_oracle;
use linengine::report::{channels_csv, rates_csv, report_from_table, summary_csv, EngineReport};
use linengine::sweep::{parse_axis, run_sweep, sweep_csv};
use linengine::validate::run_suite;
use serde_json::json;

/// Stationary thermodynamics of driven linear quantum engines.
#[derive(Parser)]
#[command(name = "linengine", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Floquet problem over the quadrature grids and store the solution.
    Solve {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Solve even if the stability test fails.
        #[arg(long)]
        force: bool,
    },
    /// Heat, work, bounds and cost from a stored solution (JSON + CSV).
    Report {
        /// solution.json written by `solve`.
        #[arg(long, short)]
        solution: PathBuf,
        /// Output directory (default: next to the solution).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run the invariant batteries on a configuration.
    Validate {
        #[command(flatten)]
        config: ConfigArg,
        /// Reduced grids, no refinement study.
        #[arg(long)]
        quick: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Time-domain covariance oracle compared against the Floquet currents.
    Oracle {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// One-dimensional parameter sweep, e.g. --axis hot.r=0:1.5:16.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        axis: String,
        /// CSV file (default: stdout).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

/// Exit status 2: the numerics did not converge or the drive is unstable.
struct Unconverged;

type Outcome = Result<Result<(), Unconverged>, Box<dyn std::error::Error>>;

fn load(path: &Path) -> Result<EngineConfig, Box<dyn std::error::Error>> {
    let run = RunConfig::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(run.engine()?)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Box<dyn std::error::Error>> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn solve(config: &Path, out: &Path, force: bool) -> Outcome {
    let cfg = load(config)?;
    let stab = check_stability(&cfg)?;
    if !stab.pass && !force {
        eprintln!(
            "drive fails the stability test: margin {:.6e} (lhs {:.6e}, rhs {:.6e}); use --force to solve anyway",
            stab.margin, stab.lhs, stab.rhs
        );
        return Ok(Err(Unconverged));
    }
    let sol = solve_engine(&cfg)?;
    let convergence = json!({
        "stability": sol.stability,
        "floquet_converged": sol.floquet_converged(),
        "max_tail": sol.max_tail(),
        "quadrature_converged": sol.quadrature_converged(),
        "resonant_nodes": sol.resonant.nodes.len(),
        "nonresonant_nodes": sol.nonresonant.nodes.len(),
        "resonant_error": sol.resonant.error,
        "nonresonant_error": sol.nonresonant.error,
    });
    write(out, "solution.json", &serde_json::to_string(&sol)?)?;
    write(out, "convergence.json", &serde_json::to_string_pretty(&convergence)?)?;
    let ok = sol.floquet_converged() && sol.quadrature_converged();
    if !ok {
        eprintln!("solution did not converge; see convergence.json");
    }
    Ok(if ok { Ok(()) } else { Err(Unconverged) })
}

fn print_summary(rep: &EngineReport) {
    let h = &rep.heat;
    println!("work per cycle      {:.10e}", h.work);
    println!("dQ nonresonant      {:.10e}", h.dq_nr);
    println!("dQ resonant in/out  {:.10e} / {:.10e}", h.dq_in, h.dq_out);
    for p in &h.per_reservoir {
        println!("current {:<11} {:.10e}", p.label, p.total());
    }
    match rep.efficiency {
        Some(eta) => println!("efficiency          {eta:.10}"),
        None => println!("efficiency          not an engine (W >= 0)"),
    }
    println!("eta_g               {:.10}", rep.bounds.eta_g);
    if let Some(ec) = rep.bounds.eta_c {
        println!("eta_c               {ec:.10}");
    }
    if let Some(c) = &rep.cost {
        println!("cost ratio          {:.10e}", c.cost_ratio);
    }
    println!("converged           {}", rep.convergence.converged());
}

fn report(solution: &Path, out: Option<&Path>) -> Outcome {
    let text = fs::read_to_string(solution).map_err(|e| format!("{}: {e}", solution.display()))?;
    let sol: EngineSolution = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", solution.display()))?;
    let table = RateTable::from_solution(&sol)?;
    let rep = report_from_table(&sol, &table)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| solution.parent().unwrap_or(Path::new(".")).to_path_buf());
    write(&dir, "report.json", &serde_json::to_string_pretty(&rep)?)?;
    write(&dir, "summary.csv", &summary_csv(&rep))?;
    write(&dir, "channels.csv", &channels_csv(&rep.heat))?;
    write(&dir, "rates.csv", &rates_csv(&table, &labels(&sol.config)))?;
    print_summary(&rep);
    Ok(if rep.convergence.converged() { Ok(()) } else { Err(Unconverged) })
}

fn validate(config: &Path, quick: bool, out: Option<&Path>) -> Outcome {
    let cfg = load(config)?;
    let rep = run_suite(&cfg, quick)?;
    for c in &rep.checks {
        println!(
            "{:<4} {:<36} value {:>12.4e}  limit {:>10.2e}  {}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.value,
            c.limit,
            c.detail
        );
    }
    println!("{}", if rep.passed { "all checks passed" } else { "some checks failed" });
    if let Some(dir) = out {
        write(dir, "validation.json", &serde_json::to_string_pretty(&rep)?)?;
    }
    Ok(if rep.passed { Ok(()) } else { Err(Unconverged) })
}

fn oracle(config: &Path, out: Option<&Path>) -> Outcome {
    let run_cfg = RunConfig::from_path(config).map_err(|e| format!("{}: {e}", config.display()))?;
    let cfg = run_cfg.engine()?;
    let sol = solve_engine(&cfg)?;
    let heat = HeatReport::from_solution(&sol)?;
    let run = run_oracle(&cfg, &run_cfg.oracle)?;
    let tau = cfg.network.period();
    let rel = |a: f64, b: f64| if b == 0.0 { if a == 0.0 { 0.0 } else { f64::INFINITY } } else { (a - b).abs() / b.abs() };
    let mut rows = Vec::new();
    println!("{:<14} {:>16} {:>16} {:>10}", "quantity", "oracle", "floquet", "rel dev");
    for (i, p) in heat.per_reservoir.iter().enumerate() {
        let o = run.fit.bath_currents[i];
        println!("{:<14} {:>16.8e} {:>16.8e} {:>10.3e}", p.label, o, p.total(), rel(o, p.total()));
        rows.push(json!({"quantity": p.label, "oracle": o, "oracle_stderr": run.fit.bath_stderr[i], "floquet": p.total()}));
    }
    let power = heat.work / tau;
    println!("{:<14} {:>16.8e} {:>16.8e} {:>10.3e}", "power", run.fit.power, power, rel(run.fit.power, power));
    rows.push(json!({"quantity": "power", "oracle": run.fit.power, "floquet": power}));
    if !run.baths.iter().all(|b| b.covers_drive_band) {
        eprintln!("warning: a bath span does not reach the drive frequency");
    }
    if let Some(dir) = out {
        let summary = json!({
            "comparison": rows,
            "dt": run.dt,
            "step_error": run.step_error,
            "fit": run.fit,
            "horizon": run.baths.iter().map(|b| b.horizon).fold(f64::INFINITY, f64::min),
        });
        write(dir, "oracle.json", &serde_json::to_string_pretty(&summary)?)?;
        write(dir, "trajectory.csv", &run.trajectory.to_csv())?;
    }
    Ok(Ok(()))
}

fn sweep(config: &Path, axis: &str, out: Option<&Path>) -> Outcome {
    let cfg = load(config)?;
    let axis = parse_axis(axis)?;
    let rows = run_sweep(&cfg, &axis)?;
    let csv = sweep_csv(&axis, &rows);
    match out {
        Some(path) => {
            fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(if rows.iter().all(|r| r.status == "ok") { Ok(()) } else { Err(Unconverged) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match &cli.command {
        Command::Solve { config, out, force } => solve(&config.config, out, *force),
        Command::Report { solution, out } => report(solution, out.as_deref()),
        Command::Validate { config, quick, out } => validate(&config.config, *quick, out.as_deref()),
        Command::Oracle { config, out } => oracle(&config.config, out.as_deref()),
        Command::Sweep { config, axis, out } => sweep(&config.config, axis, out.as_deref()),
    };
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Unconverged)) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
