use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use varlab::averages::{ball_symm_diff, boundary_cube_count};
use varlab::harness::{registry, run_experiment, ExperimentKind, ExperimentReport, RunConfig};
use varlab::lattice::{BallShape, Field, GridSpec, Radius};
use varlab::martingale::cond_expect;
use varlab::variation::{hvar_bruteforce, hvar_exact, jump_bruteforce, jump_count, SampledPath};
use varlab::Error;

const EXIT_VIOLATION: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "varlab", version, about = "Numerical lab for variation, jump and square-function estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print the registered experiments with their parameters.
    ListExperiments {
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a brute-force or exact oracle and print JSON.
    ///
    /// Ops: hvar R V.., hvar-brute R V.., jump L V.., jump-brute L V..,
    /// ball-count DIM T, cond-expect K V.., boundary LOGSIDE X0 X1 T K I,
    /// symm-diff LOGSIDE X0 X1 Y0 Y1 T. Radii accept `a/b` or decimals.
    Oracle {
        op: String,
        #[arg(allow_hyphen_values = true)]
        args: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let result = match cli.command {
        Command::Run { config, output_dir } => run(&config, output_dir),
        Command::ListExperiments { json } => {
            list(json);
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { op, args } => oracle(&op, &args).map(|v| {
            println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        match e {
            Error::Config(_) => ExitCode::from(EXIT_CONFIG),
            _ => ExitCode::FAILURE,
        }
    })
}

/// Caps the global pool at `VARLAB_THREADS`.
fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("VARLAB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Error::Config(format!("VARLAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))
}

fn run(path: &Path, output_dir: Option<PathBuf>) -> Result<ExitCode, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    let report = run_experiment(&cfg)?;
    report.write_outputs(&report.config.output_dir)?;
    print_summary(&report);
    if report.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        print_diagnostics(&report);
        Ok(ExitCode::from(EXIT_VIOLATION))
    }
}

fn print_summary(r: &ExperimentReport) {
    println!("experiment   {}", r.name);
    println!("anchor       {}", r.anchor);
    println!("trials       {} ({} degenerate)", r.trials.len(), r.degenerate);
    println!("max_ratio    {}", varlab::harness::report::fmt17(r.max_ratio));
    if let Some(w) = &r.witness {
        println!("witness      {} (seed {}, {})", w.trial_id, w.seed, w.generator);
    }
    for row in &r.rows {
        println!("  row {:<28} constant {:>12.6}  max_ratio {:.6e}", row.label, row.constant, row.max_ratio);
    }
    for f in &r.fits {
        println!("  fit {:<40} slope {:.6} r2 {:.4}", f.name, f.slope, f.r_squared);
    }
    for c in &r.checks {
        let status = if c.violations == 0 { "ok" } else { "VIOLATED" };
        println!("  check {:<48} {:>8} evaluated {:>6} violations  {status}", c.name, c.evaluated, c.violations);
    }
    println!("output       {}", r.config.output_dir.display());
}

fn print_diagnostics(r: &ExperimentReport) {
    eprintln!("== diagnostics: {} ==", r.name);
    for v in &r.violations {
        eprintln!("invariant {:?} violated at {} (seed {}): {}", v.invariant, v.trial_id, v.seed, v.detail);
    }
    let listed: u64 = r.violations.len() as u64;
    let total: u64 = r.checks.iter().map(|c| c.violations).sum();
    if total > listed {
        eprintln!("... {} further violations not listed", total - listed);
    }
}

fn list(as_json: bool) {
    if as_json {
        let rows: Vec<_> = registry()
            .iter()
            .map(|e| {
                json!({
                    "name": e.name,
                    "kind": if e.kind == ExperimentKind::Verify { "verify" } else { "unit" },
                    "anchor": e.anchor,
                    "required": e.required,
                    "optional": e.optional,
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows).expect("json value"));
        return;
    }
    println!("{:<26} {:<7} ANCHOR", "NAME", "KIND");
    for e in registry() {
        let kind = if e.kind == ExperimentKind::Verify { "verify" } else { "unit" };
        println!("{:<26} {:<7} {}", e.name, kind, e.anchor);
        println!("{:<34} required: {}", "", e.required.join(", "));
        println!("{:<34} optional: {}", "", e.optional.join(", "));
    }
}

fn num(s: &str) -> Result<f64, Error> {
    s.parse::<f64>().map_err(|_| Error::Config(format!("not a number: {s:?}")))
}

fn int(s: &str) -> Result<i64, Error> {
    s.parse::<i64>().map_err(|_| Error::Config(format!("not an integer: {s:?}")))
}

fn uint(s: &str) -> Result<usize, Error> {
    s.parse::<usize>().map_err(|_| Error::Config(format!("not a nonnegative integer: {s:?}")))
}

fn radius(s: &str) -> Result<Radius, Error> {
    match s.split_once('/') {
        Some((a, b)) => Radius::new(uint(a)? as u64, uint(b)? as u64),
        None => Radius::from_f64(num(s)?),
    }
}

fn values(args: &[String]) -> Result<Vec<f64>, Error> {
    args.iter().map(|a| num(a)).collect()
}

fn arity(op: &str, args: &[String], n: usize) -> Result<(), Error> {
    if args.len() < n {
        return Err(Error::Config(format!("oracle {op} needs at least {n} arguments")));
    }
    Ok(())
}

fn oracle(op: &str, args: &[String]) -> Result<serde_json::Value, Error> {
    match op {
        "hvar" | "hvar-brute" => {
            arity(op, args, 2)?;
            let r = num(&args[0])?;
            let path = SampledPath::from_values(values(&args[1..])?)?;
            if op == "hvar" {
                let res = hvar_exact(&path, r)?;
                Ok(json!({"op": op, "r": r, "value": res.value, "witness": res.witness}))
            } else {
                Ok(json!({"op": op, "r": r, "value": hvar_bruteforce(&path, r)?}))
            }
        }
        "jump" | "jump-brute" => {
            arity(op, args, 2)?;
            let l = num(&args[0])?;
            let path = SampledPath::from_values(values(&args[1..])?)?;
            if op == "jump" {
                let res = jump_count(&path, l)?;
                Ok(json!({"op": op, "lambda": l, "count": res.count, "witness": res.witness}))
            } else {
                Ok(json!({"op": op, "lambda": l, "count": jump_bruteforce(&path, l)?}))
            }
        }
        "ball-count" => {
            arity(op, args, 2)?;
            let dim = uint(&args[0])?;
            if dim != 1 && dim != 2 {
                return Err(Error::Dimension(dim));
            }
            let t = radius(&args[1])?;
            Ok(json!({"op": op, "dim": dim, "radius": t.value(), "count": BallShape::new(dim, t).count()}))
        }
        "cond-expect" => {
            arity(op, args, 2)?;
            let k = uint(&args[0])? as u32;
            let vals = values(&args[1..])?;
            let n = vals.len();
            if !n.is_power_of_two() {
                return Err(Error::Config(format!("cond-expect needs 2^K values, got {n}")));
            }
            let grid = GridSpec::new(1, n.trailing_zeros())?;
            let e = cond_expect(&Field::new(grid, vals)?, k)?;
            Ok(json!({"op": op, "level": k, "values": e.values()}))
        }
        "boundary" => {
            arity(op, args, 6)?;
            let grid = GridSpec::new(2, uint(&args[0])? as u32)?;
            let x = [uint(&args[1])? % grid.side(), uint(&args[2])? % grid.side()];
            let t = radius(&args[3])?;
            let (k, i) = (uint(&args[4])? as u32, int(&args[5])? as i32);
            Ok(json!({"op": op, "count": boundary_cube_count(&grid, x, t, k, i)?}))
        }
        "symm-diff" => {
            arity(op, args, 6)?;
            let grid = GridSpec::new(2, uint(&args[0])? as u32)?;
            let s = grid.side();
            let x = [uint(&args[1])? % s, uint(&args[2])? % s];
            let y = [uint(&args[3])? % s, uint(&args[4])? % s];
            let t = radius(&args[5])?;
            Ok(json!({"op": op, "count": ball_symm_diff(&grid, x, y, t)?}))
        }
        _ => Err(Error::Config(format!(
            "unknown oracle op {op:?}; expected one of hvar, hvar-brute, jump, jump-brute, ball-count, cond-expect, boundary, symm-diff"
        ))),
    }
}
