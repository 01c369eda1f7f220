//! Acceptance criteria, one line each. Runs without the test harness so the
//! lines are always printed; exits non-zero if any criterion fails.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use curvesolve::ambient::AmbientManifold;
use curvesolve::curvature::{minmax_monotone_check, minmax_shift_check, principal_curvatures, CurvatureFunction};
use curvesolve::diagnostics::{uniqueness_experiment, UNIQUENESS_TOL};
use curvesolve::grid::Grid;
use curvesolve::homotopy::{min_real_eigenvalue, HomotopyProblem, TauPolicy};
use curvesolve::hypersurface::{embedding_oracle, graph_quantities};
use curvesolve::pipeline::{self, RunArtifact, RunOptions, RunOutcome};
use curvesolve::scenario::Scenario;
use curvesolve::{Error, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = std::result::Result<String, String>;

fn scenario(name: &str) -> Scenario {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.scenario"));
    pipeline::load_scenario(&p).expect("scenario parses")
}

fn run_timed(sc: &Scenario) -> Result<(RunArtifact, Duration)> {
    let start = Instant::now();
    match pipeline::run(sc, &RunOptions::default(), &mut |_| {})? {
        RunOutcome::Completed(a) => Ok((*a, start.elapsed())),
        RunOutcome::Halted(_) => Err(Error::Path("unexpected halt".into())),
    }
}

fn max_dev(a: &RunArtifact, c: f64) -> f64 {
    a.solution.iter().map(|r| (r.u - c).abs()).fold(0.0, f64::max)
}

fn problem_for(sc: &Scenario, lambda: f64) -> Result<HomotopyProblem> {
    pipeline::setup(sc)?.sketch.with_lambda(lambda)
}

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Runs {
    circle: (RunArtifact, Duration),
    sphere: (RunArtifact, Duration),
    s3: (RunArtifact, Duration),
    nonconstant: (RunArtifact, Duration),
}

fn criterion_1(r: &Runs) -> Verdict {
    let (a, dt) = &r.circle;
    let lower = a.barriers.margin_lower.unwrap_or(f64::NAN);
    let margins_ok = (a.barriers.margin_upper - 0.08).abs() < 1e-12
        && (lower - (2.0 / 2.25 - 0.02 - 2.0 / 3.0)).abs() < 1e-12;
    let dev = max_dev(a, 2.0);
    ensure(
        margins_ok && a.final_t == 1.0 && dev <= 1e-9 && *dt <= Duration::from_secs(2),
        format!(
            "euclidean circle: margins {:.6}/{lower:.6}, t = {}, max|u-2| = {dev:.2e}, {:.2} s",
            a.barriers.margin_upper,
            a.final_t,
            dt.as_secs_f64()
        ),
    )
}

fn criterion_2(r: &Runs) -> Verdict {
    let (a, dt) = &r.sphere;
    let dev = max_dev(a, FRAC_PI_4);
    ensure(
        a.final_t == 1.0 && dev <= 1e-9 && *dt <= Duration::from_secs(2),
        format!("sphere: t = {}, max|u-pi/4| = {dev:.2e}, {:.2} s", a.final_t, dt.as_secs_f64()),
    )
}

fn criterion_3(r: &Runs) -> Verdict {
    let (a, dt) = &r.s3;
    let dev = max_dev(a, FRAC_PI_4);
    ensure(
        a.final_t == 1.0 && a.solution.len() == 16 * 32 && dev <= 1e-6 && *dt <= Duration::from_secs(60),
        format!(
            "S^3 gauss_root on {} nodes: max|u-pi/4| = {dev:.2e}, {:.2} s",
            a.solution.len(),
            dt.as_secs_f64()
        ),
    )
}

fn criterion_4(r: &Runs) -> Verdict {
    let (a, _) = &r.nonconstant;
    let sc = scenario("nonconstant");
    let amb = sc.ambient_manifold().map_err(|e| e.to_string())?;
    let grid = sc.grid().map_err(|e| e.to_string())?;
    let rhs = sc.right_hand_side().map_err(|e| e.to_string())?;
    let u: Vec<f64> = a.solution.iter().map(|r| r.u).collect();
    let kappa = embedding_oracle(&amb, &grid, &u).map_err(|e| e.to_string())?;
    let err = kappa
        .iter()
        .zip(&u)
        .enumerate()
        .map(|(i, (k, &x0))| (k - rhs.eval(x0, grid.coords(i), [0.0; 3])).abs())
        .fold(0.0, f64::max);
    let inside = u.iter().all(|&x| x > 1.5 && x < 2.5);
    ensure(
        a.final_residual <= 1e-10 && err <= 1e-6 && inside,
        format!(
            "non-constant target: residual {:.2e}, max|kappa_oracle - f| = {err:.2e}, inside barriers {inside}",
            a.final_residual
        ),
    )
}

fn criterion_5(r: &Runs) -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, a) in [("euclidean_circle", &r.circle.0), ("sphere", &r.sphere.0)] {
        let sc = scenario(name);
        let p = problem_for(&sc, a.lambda).map_err(|e| e.to_string())?;
        let rep = uniqueness_experiment(&p, 20, sc.seed);
        let frac = rep.quantity("converged_fraction").unwrap_or(0.0);
        let dist = rep.quantity("max_distance_to_u0").unwrap_or(f64::INFINITY);
        ok &= frac == 1.0 && dist <= UNIQUENESS_TOL;
        parts.push(format!("{name} lambda {} converged {frac} max dist {dist:.1e}", a.lambda));
    }
    ensure(ok, format!("uniqueness, 20 starts: {}", parts.join("; ")))
}

fn criterion_6(r: &Runs) -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, a) in [("euclidean_circle", &r.circle.0), ("sphere", &r.sphere.0), ("s3_gauss", &r.s3.0)] {
        let sc = scenario(name);
        let mut sketch = pipeline::setup(&sc).map_err(|e| e.to_string())?.sketch;
        let base = sketch.with_lambda(a.lambda).map_err(|e| e.to_string())?;
        // keep u0 fixed so only the zero-order term moves
        sketch.tau_policy = TauPolicy::Fixed(base.tau0);
        let delta = a.lambda;
        let shifted = sketch.with_lambda(a.lambda + delta).map_err(|e| e.to_string())?;
        let mu = |p: &HomotopyProblem| -> Result<f64> { min_real_eigenvalue(&p.linearize(&p.u0, 0.0)?.matrix) };
        let m0 = mu(&base).map_err(|e| e.to_string())?;
        let m1 = mu(&shifted).map_err(|e| e.to_string())?;
        let rel = ((m1 - m0) - delta).abs() / delta;
        ok &= m0 > 0.0 && rel <= 1e-8;
        parts.push(format!("{name} mu_min {m0:.4} shift error {rel:.1e}"));
    }
    ensure(ok, format!("regular start: {}", parts.join("; ")))
}

fn criterion_7(r: &Runs) -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, a) in [
        ("euclidean_circle", &r.circle.0),
        ("sphere", &r.sphere.0),
        ("s3_gauss", &r.s3.0),
        ("nonconstant", &r.nonconstant.0),
    ] {
        for d in a.diagnostics.iter().filter(|d| d.experiment.starts_with("jacobian_fd")) {
            ok &= d.passed;
            parts.push(format!(
                "{name}/{} {:.1e}",
                d.experiment,
                d.quantity("max_relative_error").unwrap_or(f64::NAN)
            ));
        }
    }
    // the monitor fixture never completes; check it at its start
    let sc = scenario("monitor_breach");
    let p = problem_for(&sc, sc.lambda.unwrap_or(50.0)).map_err(|e| e.to_string())?;
    let d = curvesolve::diagnostics::jacobian_fd_check(&p, &p.u0, 0.0, sc.seed);
    ok &= d.passed;
    parts.push(format!("monitor_breach/start {:.1e}", d.quantity("max_relative_error").unwrap_or(f64::NAN)));
    ok &= parts.len() == 9;
    ensure(ok, format!("FD Jacobian, 10 directions: {}", parts.join(", ")))
}

fn cone_sample(f: &CurvatureFunction, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let k: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..5.0)).collect();
        if f.cone_margin(&k) > 0.1 {
            return k;
        }
    }
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let fs = [
        (CurvatureFunction::Mean, 3),
        (CurvatureFunction::GaussRoot, 2),
        (CurvatureFunction::GaussRoot, 3),
        (CurvatureFunction::SigmaKRoot { k: 2 }, 3),
        (CurvatureFunction::SigmaKRoot { k: 2 }, 4),
    ];
    let mut samples = 0;
    for (f, n) in &fs {
        for _ in 0..1000 {
            let k = cone_sample(f, *n, &mut rng);
            let k2 = cone_sample(f, *n, &mut rng);
            let v = f.evaluate(&k).map_err(|e| e.to_string())?;
            let mut p = k.clone();
            p.reverse();
            p.rotate_left(1);
            if f.evaluate(&p).map_err(|e| e.to_string())?.to_bits() != v.to_bits() {
                return Err(format!("symmetry failed for {f:?} at {k:?}"));
            }
            let g = f.gradient(&k).map_err(|e| e.to_string())?;
            if g.iter().any(|&x| x <= 0.0) {
                return Err(format!("monotonicity failed for {f:?} at {k:?}"));
            }
            let mid: Vec<f64> = k.iter().zip(&k2).map(|(a, b)| 0.5 * (a + b)).collect();
            let rhs = 0.5 * (v + f.evaluate(&k2).map_err(|e| e.to_string())?);
            if f.evaluate(&mid).map_err(|e| e.to_string())? < rhs - 1e-12 * (1.0 + rhs.abs()) {
                return Err(format!("concavity failed for {f:?}"));
            }
            let euler: f64 = g.iter().zip(&k).map(|(a, b)| a * b).sum();
            if (euler - v).abs() > 1e-12 * (1.0 + v.abs()) {
                return Err(format!("Euler identity failed for {f:?} at {k:?}"));
            }
            for i in 0..*n {
                let h = 1e-5;
                let (mut kp, mut km) = (k.clone(), k.clone());
                kp[i] += h;
                km[i] -= h;
                let fd = (f.evaluate(&kp).unwrap() - f.evaluate(&km).unwrap()) / (2.0 * h);
                if (fd - g[i]).abs() > 1e-6 * g[i].abs().max(1.0) {
                    return Err(format!("gradient FD mismatch for {f:?} at {k:?}"));
                }
            }
            if !matches!(f, CurvatureFunction::Mean) {
                let s = f.cone_margin(&k);
                let near: Vec<f64> = k.iter().map(|x| x - s + 1e-12).collect();
                let order = match f {
                    CurvatureFunction::SigmaKRoot { k } => *k,
                    _ => *n,
                };
                let scale = k.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                if f.evaluate(&near).map_err(|e| e.to_string())? > 10.0 * scale * 1e-12f64.powf(1.0 / order as f64) {
                    return Err(format!("boundary vanishing failed for {f:?} at {k:?}"));
                }
            }
            samples += 1;
        }
    }
    Ok(format!(
        "curvature functions: symmetry, monotonicity, concavity, Euler, gradient and boundary checks on {samples} cone samples"
    ))
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
    (&a + a.transpose()) * 0.5
}

/// Roots of `det(h − κ g)` by sign scanning and bisection.
fn charpoly_roots(h: &DMatrix<f64>, g: &DMatrix<f64>) -> Vec<f64> {
    let det = |k: f64| (h - g * k).determinant();
    let gmin = g.clone().symmetric_eigen().eigenvalues.min();
    let r = h.abs().row_sum().max() / gmin + 1.0;
    let steps = 100_000;
    let mut roots = Vec::new();
    let (mut a, mut da) = (-r, det(-r));
    for i in 1..=steps {
        let b = -r + 2.0 * r * i as f64 / steps as f64;
        let db = det(b);
        if da.signum() != db.signum() {
            let (mut lo, mut hi, mut dlo) = (a, b, da);
            for _ in 0..100 {
                let m = 0.5 * (lo + hi);
                let dm = det(m);
                if dm.signum() == dlo.signum() {
                    lo = m;
                    dlo = dm;
                } else {
                    hi = m;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        da = db;
    }
    roots
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let g = random_spd(5, &mut rng);
        let h = random_sym(5, &mut rng);
        minmax_shift_check(&h, &g, rng.random_range(-2.0..2.0))?;
        let b = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let d = &b * b.transpose();
        minmax_monotone_check(&h, &d, &g)?;
        let lo = charpoly_roots(&h, &g);
        let hi = charpoly_roots(&(&h + &d), &g);
        let k_lo = principal_curvatures(&h, &g).map_err(|e| e.to_string())?.kappa;
        let k_hi = principal_curvatures(&(&h + &d), &g).map_err(|e| e.to_string())?.kappa;
        if lo.len() != 5 || hi.len() != 5 {
            return Err("characteristic polynomial oracle missed a root".into());
        }
        for i in 0..5 {
            worst = worst.max((lo[i] - k_lo[i]).abs()).max((hi[i] - k_hi[i]).abs());
            if hi[i] < lo[i] - 1e-8 {
                return Err(format!("oracle eigenvalue {i} decreased"));
            }
        }
    }
    ensure(
        worst <= 1e-8,
        format!("min-max: shift identity and PSD monotonicity on 100 pencils, max oracle gap {worst:.1e}"),
    )
}

fn criterion_10() -> Verdict {
    let amb = AmbientManifold::euclidean(1);
    let mut errs = Vec::new();
    for n in [64, 128, 256] {
        let grid = Grid::circle(n).map_err(|e| e.to_string())?;
        let u = grid.sample(|x| 2.0 + 0.1 * x[0].cos());
        let st = graph_quantities(&amb, &grid, &u).map_err(|e| e.to_string())?;
        let oracle = embedding_oracle(&amb, &grid, &u).map_err(|e| e.to_string())?;
        let e = st
            .nodes
            .iter()
            .zip(&oracle)
            .map(|(g, k)| (g.kappa[0] - k).abs())
            .fold(0.0, f64::max);
        errs.push(e);
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(
        orders.iter().all(|&p| p >= 3.7),
        format!("convergence: errors {:.2e} {:.2e} {:.2e}, orders {:.2} {:.2}", errs[0], errs[1], errs[2], orders[0], orders[1]),
    )
}

fn criterion_11(r: &Runs) -> Verdict {
    let mut steps = 0;
    for (name, a) in [
        ("euclidean_circle", &r.circle.0),
        ("sphere", &r.sphere.0),
        ("s3_gauss", &r.s3.0),
        ("nonconstant", &r.nonconstant.0),
    ] {
        let p = problem_for(&scenario(name), a.lambda).map_err(|e| e.to_string())?;
        for s in &a.trace.steps {
            if !(s.min_barrier_gap > 0.0 && s.max_graddsq < p.monitors.grad_cap && s.max_kappa < p.monitors.kappa_cap) {
                return Err(format!("{name}: monitor bound fails at t = {}", s.t));
            }
            steps += 1;
        }
    }
    let breach = pipeline::run(&scenario("monitor_breach"), &RunOptions::default(), &mut |_| {});
    let code = breach.as_ref().err().map(|e| e.exit_code());
    ensure(
        code == Some(4),
        format!("monitors strict on {steps} accepted steps; violation fixture exit code {code:?}"),
    )
}

fn criterion_12(r: &Runs) -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cp_path = dir.path().join("cp.json");
    let sc = scenario("euclidean_circle");
    let opts = RunOptions {
        checkpoint_path: Some(cp_path.clone()),
        checkpoint_at: Some(0.5),
        halt: true,
    };
    let cp = match pipeline::run(&sc, &opts, &mut |_| {}).map_err(|e| e.to_string())? {
        RunOutcome::Halted(cp) => cp,
        RunOutcome::Completed(_) => return Err("run did not halt at the checkpoint".into()),
    };
    let stored: pipeline::Checkpoint = pipeline::read_json(&cp_path).map_err(|e| e.to_string())?;
    let resumed = pipeline::resume(&stored, &mut |_| {}).map_err(|e| e.to_string())?;
    let same = resumed.checksum == r.circle.0.checksum && *cp == stored;
    ensure(
        same,
        format!(
            "resume from t = {:.3}: checksum {} vs uninterrupted {}",
            stored.state.t,
            &resumed.checksum[..16],
            &r.circle.0.checksum[..16]
        ),
    )
}

fn main() -> ExitCode {
    let runs = (|| -> Result<Runs> {
        Ok(Runs {
            circle: run_timed(&scenario("euclidean_circle"))?,
            sphere: run_timed(&scenario("sphere"))?,
            s3: run_timed(&scenario("s3_gauss"))?,
            nonconstant: run_timed(&scenario("nonconstant"))?,
        })
    })();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => {
            println!("acceptance: scenario run failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let criteria: Vec<(usize, Box<dyn Fn() -> Verdict + '_>)> = vec![
        (1, Box::new(|| criterion_1(&runs))),
        (2, Box::new(|| criterion_2(&runs))),
        (3, Box::new(|| criterion_3(&runs))),
        (4, Box::new(|| criterion_4(&runs))),
        (5, Box::new(|| criterion_5(&runs))),
        (6, Box::new(|| criterion_6(&runs))),
        (7, Box::new(|| criterion_7(&runs))),
        (8, Box::new(criterion_8)),
        (9, Box::new(criterion_9)),
        (10, Box::new(criterion_10)),
        (11, Box::new(|| criterion_11(&runs))),
        (12, Box::new(|| criterion_12(&runs))),
    ];
    let mut failed = 0;
    for (n, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {n:>2}: PASS {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL {detail}");
            }
        }
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
