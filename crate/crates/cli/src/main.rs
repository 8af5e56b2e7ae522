//! Command-line harness: single factorizations, instance generation,
//! factor verification, and benchmark sweeps with CSV/JSON output.
//!
//! Exit codes: 0 success, 1 solver non-success (or failed check), 2
//! input/usage errors.

mod bench;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bench::{run_benchmark, BenchRow, BenchmarkSpec, CSV_HEADER};
use rsmooth::cpfact::{
    self, cp_factorize, cp_solver_config, easy_boundary_instance, gen_boundary, gen_random_cp,
    gen_structured, verify_factorization, CpInstance, CpRunReport, Provenance,
};
use rsmooth::fsv::FsvBenchReport;
use rsmooth::smoothing::AbsKind;
use rsmooth::solver::SubAlgorithm;
use rsmooth::Error;

#[derive(Parser)]
#[command(
    name = "rsmooth",
    about = "Riemannian smoothing solver for CP factorization and sparse-vector recovery",
    version
)]
struct Cli {
    /// Master seed for all randomness.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads for benchmark sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Emit JSON instead of the human/CSV format.
    #[arg(long, global = true)]
    json: bool,

    /// Write the report to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorize a symmetric matrix read from a file.
    Factorize {
        matrix: PathBuf,
        /// Number of factor columns; defaults to the cp-rank bound.
        #[arg(long)]
        r: Option<usize>,
        /// Sub-algorithm: sd | bb | cg | rtr.
        #[arg(long, default_value = "cg")]
        sub: String,
        /// Override the total iteration budget.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Write the factor B to this path on success.
        #[arg(long)]
        factor_out: Option<PathBuf>,
    },
    /// Run a benchmark preset or a JSON spec file; prints a CSV table.
    Bench {
        /// Preset name (table2|table3|table3-n10|table4|table5) or a path
        /// to a JSON spec.
        spec: String,
    },
    /// Generate an instance matrix file.
    Gen {
        /// Family: random-cp | structured | boundary | easy-boundary.
        family: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Verify a factor file against a matrix file.
    Check {
        matrix: PathBuf,
        factor: PathBuf,
        #[arg(long, default_value_t = 1e-15)]
        entry_tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        residual_tol: f64,
    },
    /// Sparse-vector recovery sweep; prints per-tau success counts.
    FsvBench {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        m: usize,
        /// Smoothing kinds, comma separated (f1..f5).
        #[arg(long, default_value = "f1", value_delimiter = ',')]
        kind: Vec<String>,
        /// Sub-algorithms, comma separated.
        #[arg(long, default_value = "sd,bb,cg,rtr", value_delimiter = ',')]
        sub: Vec<String>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Numeric { .. } | Error::Stagnation(_) | Error::NotDescentDirection(_) => {
                    ExitCode::from(1)
                }
                _ => ExitCode::from(2),
            }
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Factorize {
            matrix,
            r,
            sub,
            max_iters,
            factor_out,
        } => {
            let a = cpfact::read_matrix(&matrix)?;
            let n = a.nrows();
            let inst = CpInstance::new(a, Provenance::File)?;
            let sub = SubAlgorithm::from_str(&sub)?;
            let mut cfg = cp_solver_config(sub);
            if let Some(cap) = max_iters {
                cfg.max_total_iters = cap;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let started = Instant::now();
            let res = cp_factorize(&inst, r, &cfg, &mut rng)?;
            let report = CpRunReport {
                instance: inst.provenance().to_string(),
                n,
                r: res.b.ncols(),
                sub_algorithm: sub.to_string(),
                success: res.success,
                min_entry: res.min_entry,
                residual: res.residual,
                outer_iters: res.trace.outer_iters(),
                total_iters: res.trace.total_iters(),
                wall_time_s: started.elapsed().as_secs_f64(),
                seed: cli.seed,
            };
            if let Some(path) = factor_out {
                cpfact::write_factor(&path, &res.b)?;
            }
            let text = if cli.json {
                format!(
                    "{}\n",
                    serde_json::to_string_pretty(&report).expect("serializable")
                )
            } else {
                format!(
                    "instance: {} (n = {n}, r = {})\nsub-algorithm: {}\nsuccess: {}\nmin entry: {:.6e}\nresidual: {:.6e}\nouter iterations: {} (total {})\nwall time: {:.3} s\n",
                    report.instance,
                    report.r,
                    report.sub_algorithm,
                    report.success,
                    report.min_entry,
                    report.residual,
                    report.outer_iters,
                    report.total_iters,
                    report.wall_time_s
                )
            };
            emit(&cli.out, &text)?;
            let ok = res.success && res.residual <= cpfact::CP_RESIDUAL_TOL;
            Ok(ExitCode::from(if ok { 0 } else { 1 }))
        }

        Command::Bench { spec } => {
            let spec = load_spec(&spec)?;
            let rows = run_benchmark(&spec, cli.seed, cli.jobs)?;
            emit(&cli.out, &render_rows(&rows, cli.json))?;
            Ok(ExitCode::from(0))
        }

        Command::Gen { family, n, lambda } => {
            let out = cli.out.as_ref().ok_or_else(|| {
                Error::Domain("gen requires --out <file> for the generated matrix".into())
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let inst = match family.as_str() {
                "random-cp" | "random_cp" => {
                    let n = n.ok_or_else(|| Error::Domain("random-cp requires --n".into()))?;
                    gen_random_cp(n, &mut rng)?
                }
                "structured" => {
                    let n = n.ok_or_else(|| Error::Domain("structured requires --n".into()))?;
                    gen_structured(n)?
                }
                "boundary" => {
                    let lambda = lambda
                        .ok_or_else(|| Error::Domain("boundary requires --lambda".into()))?;
                    gen_boundary(lambda)?
                }
                "easy-boundary" | "easy_boundary" => easy_boundary_instance(),
                other => {
                    return Err(Error::Domain(format!(
                        "unknown family '{other}' (expected random-cp|structured|boundary|easy-boundary)"
                    )))
                }
            };
            cpfact::write_matrix(out, inst.matrix())?;
            Ok(ExitCode::from(0))
        }

        Command::Check {
            matrix,
            factor,
            entry_tol,
            residual_tol,
        } => {
            let a = cpfact::read_matrix(&matrix)?;
            let b = cpfact::read_factor(&factor)?;
            let check = verify_factorization(&a, &b, entry_tol, residual_tol)?;
            let text = if cli.json {
                format!(
                    "{}\n",
                    serde_json::json!({
                        "min_entry": check.min_entry,
                        "residual": check.residual,
                        "entry_ok": check.entry_ok,
                        "residual_ok": check.residual_ok,
                        "passes": check.passes(),
                    })
                )
            } else {
                format!(
                    "min entry: {:.6e} (ok: {})\nresidual: {:.6e} (ok: {})\npasses: {}\n",
                    check.min_entry,
                    check.entry_ok,
                    check.residual,
                    check.residual_ok,
                    check.passes()
                )
            };
            emit(&cli.out, &text)?;
            Ok(ExitCode::from(if check.passes() { 0 } else { 1 }))
        }

        Command::FsvBench {
            n,
            m,
            kind,
            sub,
            trials,
        } => {
            let kinds: Vec<AbsKind> = kind
                .iter()
                .map(|k| AbsKind::from_str(k))
                .collect::<Result<_, _>>()?;
            let subs: Vec<SubAlgorithm> = sub
                .iter()
                .map(|s| SubAlgorithm::from_str(s))
                .collect::<Result<_, _>>()?;
            let spec = BenchmarkSpec::Fsv {
                shapes: vec![(n, m)],
                kinds,
                taus: bench::presets::FSV_TAUS.to_vec(),
                trials,
                sub_algorithms: subs,
            };
            let rows = run_benchmark(&spec, cli.seed, cli.jobs)?;
            let text = if cli.json {
                let reports: Vec<FsvBenchReport> = rows
                    .iter()
                    .map(|row| FsvBenchReport {
                        n: row.n,
                        m: row.r_or_m,
                        kind: row.kind.clone(),
                        sub_algorithm: row.sub_algorithm.clone(),
                        tau: row.tau.expect("fsv rows carry tau"),
                        successes: row.successes,
                        trials: row.trials,
                        seed: row.seed,
                    })
                    .collect();
                format!(
                    "{}\n",
                    serde_json::to_string_pretty(&reports).expect("serializable")
                )
            } else {
                render_rows(&rows, false)
            };
            emit(&cli.out, &text)?;
            Ok(ExitCode::from(0))
        }
    }
}

fn load_spec(arg: &str) -> Result<BenchmarkSpec, Error> {
    let path = std::path::Path::new(arg);
    if arg.ends_with(".json") || path.is_file() {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("bad spec file: {e}")))
    } else {
        BenchmarkSpec::preset(arg)
    }
}

fn render_rows(rows: &[BenchRow], json: bool) -> String {
    if json {
        format!(
            "{}\n",
            serde_json::to_string_pretty(rows).expect("serializable")
        )
    } else {
        let mut text = String::from(CSV_HEADER);
        text.push('\n');
        for row in rows {
            text.push_str(&row.to_csv());
            text.push('\n');
        }
        text
    }
}
