use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use curvesolve::homotopy::TraceStep;
use curvesolve::pipeline::{self, Checkpoint, ExportKind, RunArtifact, RunOptions, RunOutcome};
use curvesolve::scenario::Scenario;
use curvesolve::{Error, Result};

#[derive(Parser)]
#[command(name = "curvesolve", version, about = "Closed hypersurfaces of prescribed curvature by homotopy continuation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a scenario file.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Angular resolution override.
        #[arg(long)]
        grid_n: Option<usize>,
        /// Artifact path (default: <name>.artifact.json).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Checkpoint path.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write the checkpoint at the first accepted step with t at least this.
        #[arg(long, default_value_t = 0.5)]
        checkpoint_at: f64,
        /// Stop once the checkpoint is written.
        #[arg(long)]
        halt: bool,
    },
    /// Validate, build the starting problem and print the diagnostics.
    Diagnose {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        grid_n: Option<usize>,
    },
    /// Run every *.scenario file in a directory in parallel.
    Suite {
        dir: PathBuf,
        /// Directory for the artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        grid_n: Option<usize>,
    },
    /// Write plot data from an artifact.
    Export {
        artifact: PathBuf,
        #[arg(long, value_enum)]
        what: What,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finish a run from a checkpoint.
    Resume {
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Solution,
    #[value(name = "residual_history", alias = "residual-history")]
    ResidualHistory,
    #[value(name = "curvature_profile", alias = "curvature-profile")]
    CurvatureProfile,
}

impl From<What> for ExportKind {
    fn from(w: What) -> Self {
        match w {
            What::Solution => ExportKind::Solution,
            What::ResidualHistory => ExportKind::ResidualHistory,
            What::CurvatureProfile => ExportKind::CurvatureProfile,
        }
    }
}

/// Progress lines go to stdout unless logging is quiet.
fn progress_enabled() -> bool {
    std::env::var("CURVESOLVE_LOG").map_or(true, |v| v != "quiet")
}

fn init_logging() {
    let level = match std::env::var("CURVESOLVE_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        _ => log::LevelFilter::Warn,
    };
    let level = if std::env::var("CURVESOLVE_LOG").as_deref() == Ok("quiet") {
        log::LevelFilter::Off
    } else {
        level
    };
    env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .init();
}

fn load(path: &Path, seed: Option<u64>, grid_n: Option<usize>) -> Result<Scenario> {
    let mut sc = pipeline::load_scenario(path)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(n) = grid_n {
        sc = sc.with_grid_n(n);
    }
    Ok(sc)
}

fn printer(name: String) -> impl FnMut(&TraceStep) {
    let on = progress_enabled();
    move |s: &TraceStep| {
        if on {
            println!(
                "{name} t={:.6} dt={:.3e} iters={} residual={:.3e} gap={:.3e}",
                s.t, s.dt, s.iters, s.residual, s.min_barrier_gap
            );
        }
    }
}

fn summary(a: &RunArtifact, out: &Path) {
    if progress_enabled() {
        println!(
            "done lambda={} steps={} residual={:.3e} checksum={} artifact={}",
            a.lambda,
            a.trace.steps.len(),
            a.final_residual,
            a.checksum,
            out.display()
        );
    }
}

fn default_out(sc: &Scenario) -> PathBuf {
    PathBuf::from(format!("{}.artifact.json", sc.name))
}

fn run_one(sc: &Scenario, out: &Path, opts: &RunOptions) -> Result<Option<RunArtifact>> {
    let mut progress = printer(sc.name.clone());
    match pipeline::run(sc, opts, &mut progress)? {
        RunOutcome::Completed(a) => {
            pipeline::write_json(out, &a)?;
            summary(&a, out);
            Ok(Some(*a))
        }
        RunOutcome::Halted(cp) => {
            if progress_enabled() {
                println!("halted at t={} checkpoint written", cp.state.t);
            }
            Ok(None)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            grid_n,
            out,
            checkpoint,
            checkpoint_at,
            halt,
        } => {
            let sc = load(&scenario, seed, grid_n)?;
            if halt && checkpoint.is_none() {
                return Err(Error::Configuration("--halt requires --checkpoint".into()));
            }
            let opts = RunOptions {
                checkpoint_at: checkpoint.as_ref().map(|_| checkpoint_at),
                checkpoint_path: checkpoint,
                halt,
            };
            let out = out.unwrap_or_else(|| default_out(&sc));
            run_one(&sc, &out, &opts)?;
        }
        Command::Diagnose { scenario, seed, grid_n } => {
            let sc = load(&scenario, seed, grid_n)?;
            let setup = pipeline::setup(&sc)?;
            let (problem, attempts) = pipeline::build_problem(&sc, &setup)?;
            println!("[setup]");
            println!("lambda = {}", problem.lambda);
            println!("tau0 = {:e}", problem.tau0);
            println!("barrier_margin_upper = {:e}", setup.barrier_report.margin_upper);
            println!("barrier_margin_lower = {:e}", setup.barrier_report.margin_lower);
            println!("sigma_size = {}", setup.barrier_report.sigma_size);
            for a in &attempts {
                println!(
                    "lambda_trial = {} min_eigenvalue = {:e} unique = {}",
                    a.lambda, a.min_eigenvalue, a.uniqueness_passed
                );
            }
            println!();
            for r in pipeline::diagnose(&sc, &problem, None)? {
                println!("{r}");
            }
        }
        Command::Suite { dir, out, grid_n } => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "scenario"))
                .collect();
            files.sort();
            let out_dir = out.unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&out_dir)?;
            let results: Vec<(String, i32, i32)> = files
                .par_iter()
                .map(|f| {
                    let name = f.display().to_string();
                    match load(f, None, grid_n) {
                        Err(e) => (name, e.exit_code(), 0),
                        Ok(sc) => {
                            let target = out_dir.join(format!("{}.artifact.json", sc.name));
                            let mut quiet = |_: &TraceStep| {};
                            let code = match pipeline::run(&sc, &RunOptions::default(), &mut quiet) {
                                Ok(RunOutcome::Completed(a)) => match pipeline::write_json(&target, &a) {
                                    Ok(()) => 0,
                                    Err(e) => e.exit_code(),
                                },
                                Ok(RunOutcome::Halted(_)) => 1,
                                Err(e) => e.exit_code(),
                            };
                            (name, code, sc.expect_exit)
                        }
                    }
                })
                .collect();
            let mut failed = 0;
            for (name, code, expect) in &results {
                let ok = code == expect;
                failed += usize::from(!ok);
                println!(
                    "{} {name} exit={code} expected={expect}",
                    if ok { "PASS" } else { "FAIL" }
                );
            }
            if failed > 0 {
                return Err(Error::Path(format!("{failed} scenario(s) did not match their expected exit code")));
            }
        }
        Command::Export { artifact, what, out } => {
            let a: RunArtifact = pipeline::read_json(&artifact)?;
            let text = pipeline::export(&a, what.into());
            match out {
                Some(p) => pipeline::write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Command::Resume { checkpoint, out } => {
            let cp: Checkpoint = pipeline::read_json(&checkpoint)?;
            let sc = Scenario::parse(&cp.scenario)?;
            let mut progress = printer(sc.name.clone());
            let a = pipeline::resume(&cp, &mut progress)?;
            let out = out.unwrap_or_else(|| default_out(&sc));
            pipeline::write_json(&out, &a)?;
            summary(&a, &out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": e.exit_code(),
            });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
