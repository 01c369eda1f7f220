use std::f64::consts::{FRAC_PI_4, PI};

use curvesolve::ambient::AmbientManifold;
use curvesolve::barriers::BarrierPair;
use curvesolve::curvature::CurvatureFunction;
use curvesolve::diagnostics::{coercivity_check, jacobian_fd_check};
use curvesolve::expr::Expr;
use curvesolve::grid::{Grid, D2};
use curvesolve::homotopy::*;
use curvesolve::rhs::RightHandSide;
use curvesolve::tubular::build_foliation;
use curvesolve::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sketch(
    amb: AmbientManifold,
    grid: Grid,
    f: &str,
    (c1, c2): (f64, f64),
    u1: f64,
    u2: f64,
    eps1: f64,
    curvature: CurvatureFunction,
) -> ProblemSketch {
    let n = grid.len();
    let fol = build_foliation(&amb, &grid, &vec![u2; n], 0.2, 5).unwrap();
    ProblemSketch {
        curvature,
        rhs: RightHandSide::new(Expr::parse(f).unwrap(), c1, c2).unwrap(),
        barriers: BarrierPair::new(vec![u1; n], vec![u2; n], eps1),
        foliation: fol,
        tau_policy: TauPolicy::Auto,
        overrides: MonitorOverrides::default(),
    }
}

fn euclid_sketch(n: usize) -> ProblemSketch {
    sketch(
        AmbientManifold::euclidean(1),
        Grid::circle(n).unwrap(),
        "2/x0^2",
        (0.3, 1.0),
        1.5,
        2.5,
        0.02,
        CurvatureFunction::Mean,
    )
}

fn sphere_sketch() -> ProblemSketch {
    sketch(
        AmbientManifold::sphere(1),
        Grid::circle(128).unwrap(),
        "1+4*(pi/4-x0)",
        (0.3, 2.0),
        0.6,
        0.95,
        0.25,
        CurvatureFunction::Mean,
    )
}

fn max_dev(u: &[f64], c: f64) -> f64 {
    u.iter().map(|x| (x - c).abs()).fold(0.0, f64::max)
}

fn run(problem: &HomotopyProblem) -> (Vec<f64>, f64, ContinuationTrace) {
    let opts = ContinuationOptions::default();
    let start = ContinuationState::start(problem.u0.clone(), &opts);
    match continue_path(problem, start, &opts, &mut |_| Control::Continue).unwrap() {
        Outcome::Completed { u, residual, trace } => (u, residual, trace),
        Outcome::Halted(_) => unreachable!(),
    }
}

#[test]
fn residual_examples() {
    let p = euclid_sketch(64).with_lambda(50.0).unwrap();
    assert!(p.residual(&p.u0, 0.0).unwrap().amax() <= 1e-10);
    let g = p.residual(&vec![2.0; 64], 1.0).unwrap();
    assert!(g.amax() < 1e-14);
    let g = p.residual(&vec![2.5; 64], 1.0).unwrap();
    assert!(g.iter().all(|x| (x - 0.08).abs() < 1e-13));
}

#[test]
fn residual_is_affine_in_t() {
    let p = euclid_sketch(64).with_lambda(50.0).unwrap();
    let grid = Grid::circle(64).unwrap();
    let u = grid.sample(|x| 2.1 + 0.05 * (2.0 * x[0]).cos() + 0.02 * (5.0 * x[0]).sin());
    let g0 = p.residual(&u, 0.0).unwrap();
    let g1 = p.residual(&u, 1.0).unwrap();
    for t in [0.1, 0.37, 0.5, 0.9] {
        let gt = p.residual(&u, t).unwrap();
        let mix = &g0 * (1.0 - t) + &g1 * t;
        assert!((gt - mix).amax() <= 1e-12);
    }
}

#[test]
fn particular_sandwich_examples() {
    // u2 = 3, lambda = 50: tau0 = −0.001 satisfies the sandwich, −0.05 does not
    let amb = AmbientManifold::euclidean(1);
    let grid = Grid::circle(32).unwrap();
    let fol = build_foliation(&amb, &grid, &[3.0; 32], 0.1, 5).unwrap();
    let u1 = vec![1.0; 32];
    let p = build_particular(&fol, &CurvatureFunction::Mean, &u1, 50.0, TauPolicy::Fixed(-0.001)).unwrap();
    assert!(max_dev(&p.u0, 2.999) < 1e-12);
    assert!((p.f_u0[0] - 0.333_445).abs() < 1e-6);
    assert!(p.sandwich_margin >= 0.0);
    // f0(x0 = 2) = 0.333445 + 50 (2.999 − 2)
    assert!((p.f_u0[3] + 50.0 * (p.u0[3] - 2.0) - 50.283_445).abs() < 1e-6);
    let bad = build_particular(&fol, &CurvatureFunction::Mean, &u1, 50.0, TauPolicy::Fixed(-0.05)).unwrap();
    assert!(bad.sandwich_margin < 0.0);
    let auto = build_particular(&fol, &CurvatureFunction::Mean, &u1, 50.0, TauPolicy::Auto).unwrap();
    assert!(auto.tau0 < 0.0 && auto.tau0 > -0.1 && auto.sandwich_margin >= 0.0);
    // the first trial that passes is the largest in magnitude
    let prev = build_particular(&fol, &CurvatureFunction::Mean, &u1, 50.0, TauPolicy::Fixed(2.0 * auto.tau0));
    assert!(prev.map_or(true, |p| p.sandwich_margin < 0.0));
}

#[test]
fn particular_fails_for_huge_lambda_on_flat_slab() {
    let amb = AmbientManifold::flat_slab(1);
    let grid = Grid::circle(32).unwrap();
    let fol = build_foliation(&amb, &grid, &[1.0; 32], 0.1, 3).unwrap();
    let e = build_particular(&fol, &CurvatureFunction::Mean, &[0.0; 32], 50.0, TauPolicy::Auto).unwrap_err();
    assert!(matches!(e, Error::ParticularSolution(_)));
}

#[test]
fn flat_slab_operator_is_shifted_laplacian() {
    let amb = AmbientManifold::flat_slab(1);
    let n = 32;
    let grid = Grid::circle(n).unwrap();
    let fol = build_foliation(&amb, &grid, &vec![1.0; n], 0.1, 3).unwrap();
    let sk = ProblemSketch {
        curvature: CurvatureFunction::Mean,
        rhs: RightHandSide::new(Expr::parse("1").unwrap(), 1.0, 1.0).unwrap(),
        barriers: BarrierPair::new(vec![0.0; n], vec![1.0; n], 0.1),
        foliation: fol,
        tau_policy: TauPolicy::Fixed(-0.05),
        overrides: MonitorOverrides::default(),
    };
    let lambda = 8.0;
    let p = sk.with_lambda(lambda).unwrap();
    let jac = p.linearize(&p.u0, 0.0).unwrap().matrix;
    let mut eig: Vec<f64> = jac.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    // discrete symbol of −D2 on mode k
    let h = 2.0 * PI / n as f64;
    let mut sym: Vec<f64> = (0..n)
        .map(|k| {
            let kh = k as f64 * h;
            let s = D2[2] + 2.0 * D2[3] * kh.cos() + 2.0 * D2[4] * (2.0 * kh).cos();
            lambda - s / (h * h)
        })
        .collect();
    sym.sort_by(f64::total_cmp);
    for (a, b) in eig.iter().zip(&sym) {
        assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
    }
    // low modes approach λ + k²
    assert!((sym[1] - (lambda + 1.0)).abs() < 1e-3);
    let c = coercivity_check(&p).unwrap();
    assert!((c.quantity("mu_min").unwrap() - lambda).abs() < 1e-9);
}

#[test]
fn jacobian_matches_finite_differences() {
    let p = euclid_sketch(64).with_lambda(50.0).unwrap();
    let grid = Grid::circle(64).unwrap();
    let u = grid.sample(|x| 2.1 + 0.05 * (2.0 * x[0]).cos() + 0.02 * (5.0 * x[0]).sin());
    for t in [0.0, 0.5, 1.0] {
        let r = jacobian_fd_check(&p, &u, t, 7);
        assert!(r.passed, "{r}");
    }
}

#[test]
fn coercivity_shifts_with_lambda() {
    let sk = euclid_sketch(64);
    let p = sk.with_lambda(50.0).unwrap();
    let mut q = p.clone();
    q.lambda = 80.0;
    let a = min_real_eigenvalue(&p.linearize(&p.u0, 0.0).unwrap().matrix).unwrap();
    let b = min_real_eigenvalue(&q.linearize(&q.u0, 0.0).unwrap().matrix).unwrap();
    assert!(a >= 1.0);
    assert!(((b - a) - 30.0).abs() <= 1e-8 * b.abs());
}

#[test]
fn newton_examples() {
    let p = euclid_sketch(256).with_lambda(50.0).unwrap();
    let opts = NewtonOptions::default();
    let warm = newton_solve(&p, &vec![2.2; 256], 1.0, &opts).unwrap();
    assert!(max_dev(&warm.u, 2.0) <= 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start: Vec<f64> = p.u0.iter().map(|x| x + 1e-3 * rng.random_range(-1.0..1.0)).collect();
    let rep = newton_solve(&p, &start, 0.0, &opts).unwrap();
    let dist = rep.u.iter().zip(&p.u0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dist <= 1e-9 && rep.iterations <= 6, "{dist} {}", rep.iterations);
    assert!(rep.tail_constant().map_or(true, |c| c <= 1e6));
}

#[test]
fn newton_rejects_inadmissible_start() {
    let amb = AmbientManifold::euclidean(1);
    let grid = Grid::circle(64).unwrap();
    let fol = build_foliation(&amb, &grid, &[2.5; 64], 0.2, 5).unwrap();
    let sk = ProblemSketch {
        curvature: CurvatureFunction::GaussRoot,
        rhs: RightHandSide::new(Expr::parse("2/x0^2").unwrap(), 0.3, 1.0).unwrap(),
        barriers: BarrierPair::new(vec![1.5; 64], vec![2.5; 64], 0.02),
        foliation: fol,
        tau_policy: TauPolicy::Auto,
        overrides: MonitorOverrides::default(),
    };
    let p = sk.with_lambda(50.0).unwrap();
    let bad = grid.sample(|x| 2.0 + 0.3 * (4.0 * x[0]).cos());
    let e = newton_solve(&p, &bad, 0.0, &NewtonOptions::default()).unwrap_err();
    assert!(matches!(e, Error::Inadmissible { .. }));
}

#[test]
fn euclidean_path_reaches_constant_solution() {
    let p = euclid_sketch(256).with_lambda(50.0).unwrap();
    let (u, residual, trace) = run(&p);
    assert!(max_dev(&u, 2.0) <= 1e-9);
    assert!(residual <= 1e-10);
    assert_eq!(trace.steps.last().unwrap().t, 1.0);
    assert!(trace.steps.windows(2).all(|w| w[0].t < w[1].t));
    for s in &trace.steps {
        assert!(s.residual <= 1e-10 && s.min_barrier_gap > 0.0);
        assert!(s.max_graddsq < p.monitors.grad_cap && s.max_kappa < p.monitors.kappa_cap);
    }
    assert!(trace.max_tail_constant.map_or(true, |c| c <= 1e6));
}

#[test]
fn sphere_path_reaches_quarter_pi() {
    let p = sphere_sketch().with_lambda(50.0).unwrap();
    let (u, _, trace) = run(&p);
    assert!(max_dev(&u, FRAC_PI_4) <= 1e-9);
    assert_eq!(trace.steps.last().unwrap().t, 1.0);
}

#[test]
fn halted_run_resumes_bitwise() {
    let p = euclid_sketch(64).with_lambda(50.0).unwrap();
    let opts = ContinuationOptions::default();
    let start = ContinuationState::start(p.u0.clone(), &opts);
    let full = continue_path(&p, start.clone(), &opts, &mut |_| Control::Continue).unwrap();
    let halted = continue_path(&p, start, &opts, &mut |s| {
        if s.t >= 0.5 {
            Control::Halt
        } else {
            Control::Continue
        }
    })
    .unwrap();
    let Outcome::Halted(state) = halted else { panic!("expected a halt") };
    let json = serde_json::to_string(&state).unwrap();
    let state: ContinuationState = serde_json::from_str(&json).unwrap();
    let resumed = continue_path(&p, state, &opts, &mut |_| Control::Continue).unwrap();
    assert_eq!(full, resumed);
}

#[test]
fn monitor_breach_is_reported() {
    let mut sk = euclid_sketch(64);
    sk.overrides.kappa_cap = Some(0.45);
    let p = sk.with_lambda(50.0).unwrap();
    let opts = ContinuationOptions::default();
    let e = continue_path(&p, ContinuationState::start(p.u0.clone(), &opts), &opts, &mut |_| Control::Continue)
        .unwrap_err();
    assert!(matches!(e, Error::Monitor { .. }));
    assert_eq!(e.exit_code(), 4);
}

/// `G(u; t) = 0.1(u³ − 3u) + 0.3 − t`, with a fold at `(u, t) = (−1, 0.5)`.
struct Fold;

impl PathSystem for Fold {
    fn dim(&self) -> usize {
        1
    }
    fn residual(&self, u: &[f64], t: f64) -> curvesolve::Result<DVector<f64>> {
        Ok(DVector::from_element(1, 0.1 * (u[0].powi(3) - 3.0 * u[0]) + 0.3 - t))
    }
    fn jacobian(&self, u: &[f64], _t: f64) -> curvesolve::Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, 0.3 * (u[0] * u[0] - 1.0)))
    }
    fn dt_residual(&self, _u: &[f64], _t: f64) -> curvesolve::Result<DVector<f64>> {
        Ok(DVector::from_element(1, -1.0))
    }
}

#[test]
fn arclength_passes_a_fold() {
    let opts = ContinuationOptions::default();
    let u0 = newton_solve(&Fold, &[-2.1], 0.0, &NewtonOptions::default()).unwrap().u;
    assert!((u0[0] + 2.1038).abs() < 1e-4);
    let out = continue_path(&Fold, ContinuationState::start(u0, &opts), &opts, &mut |_| Control::Continue).unwrap();
    let Outcome::Completed { u, trace, .. } = out else { panic!() };
    // upper branch at t = 1: u³ − 3u − 7 = 0
    assert!((u[0].powi(3) - 3.0 * u[0] - 7.0).abs() < 1e-8 && u[0] > 2.0);
    assert!(trace.arclength_entries >= 1);
    assert!(trace.steps.windows(2).all(|w| w[0].t < w[1].t));
    // the tracker went back down to t ≈ 0.1 around the fold
    let tmin = trace.fold_steps.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
    assert!(tmin < 0.15, "{tmin}");
}

#[test]
fn lambda0_for_flat_slab_is_first_trial() {
    let amb = AmbientManifold::flat_slab(1);
    let grid = Grid::circle(32).unwrap();
    let fol = build_foliation(&amb, &grid, &[1.0; 32], 0.1, 3).unwrap();
    let sk = ProblemSketch {
        curvature: CurvatureFunction::Mean,
        rhs: RightHandSide::new(Expr::parse("1").unwrap(), 1.0, 1.0).unwrap(),
        barriers: BarrierPair::new(vec![0.0; 32], vec![1.0; 32], 0.1),
        foliation: fol,
        tau_policy: TauPolicy::Fixed(-0.05),
        overrides: MonitorOverrides::default(),
    };
    let est = estimate_lambda0(&sk, 10, 1).unwrap();
    assert_eq!(est.lambda0, 8.0);
}

#[test]
fn lambda0_for_euclidean_circle() {
    let est = estimate_lambda0(&euclid_sketch(64), 20, 11).unwrap();
    assert!(est.lambda0 <= 64.0, "{:?}", est.attempts);
    let mut prev = f64::NEG_INFINITY;
    for a in &est.attempts {
        assert!(a.min_eigenvalue >= prev);
        prev = a.min_eigenvalue;
    }
}
