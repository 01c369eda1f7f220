use curvesolve::ambient::*;
use curvesolve::curvature::*;
use curvesolve::grid::*;
use curvesolve::Error;
use curvesolve::hypersurface::*;
use curvesolve::dual::Dual;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_4;

#[test]
fn constant_graphs_in_space_forms() {
    let g = Grid::circle(32).unwrap();
    for (amb, r, want) in [
        (AmbientManifold::euclidean(1), 2.0, 0.5),
        (AmbientManifold::sphere(1), FRAC_PI_4, 1.0),
        (AmbientManifold::hyperbolic(1), 1.0, 1.0 / 1.0f64.tanh()),
        (AmbientManifold::sphere(1), 0.6, 1.0 / 0.6f64.tan()),
    ] {
        let s = graph_quantities(&amb, &g, &vec![r; 32]).unwrap();
        for node in &s.nodes {
            assert!((node.kappa[0] - want).abs() < 1e-10);
            assert_eq!(node.v, 1.0);
            assert_eq!(node.nu, [1.0, 0.0, 0.0]);
        }
    }
    let s = graph_quantities(&AmbientManifold::euclidean(1), &g, &vec![2.0; 32]).unwrap();
    assert_eq!(s.nodes[0].h[0][0], 2.0);
    let sg = Grid::sphere(8, 16).unwrap();
    let s = graph_quantities(&AmbientManifold::sphere(2), &sg, &vec![FRAC_PI_4; sg.len()]).unwrap();
    for node in &s.nodes {
        assert!((node.kappa[0] - 1.0).abs() < 1e-10 && (node.kappa[1] - 1.0).abs() < 1e-10);
    }
    let rep = admissibility(&s, &CurvatureFunction::GaussRoot);
    assert!(rep.admissible);
}

#[test]
fn gradient_metric_and_normal_values() {
    let g = Grid::circle(256).unwrap();
    let amb = AmbientManifold::euclidean(1);
    let u = g.sample(|x| 2.0 + 0.1 * x[0].sin());
    let s = graph_quantities(&amb, &g, &u).unwrap();
    let n0 = &s.nodes[0];
    assert!((n0.jet.du[0] - 0.1).abs() < 1e-8);
    assert!((n0.graddsq - 0.0025).abs() < 1e-9);
    assert!((n0.v * n0.v - 1.0025).abs() < 1e-9);
    assert!((n0.g[0][0] - 4.01).abs() < 1e-8);
    for (i, node) in s.nodes.iter().enumerate() {
        let gm = amb.metric_matrix(u[i], g.coords(i)).unwrap();
        let nn = node.nu[0] * node.nu[0] * gm[(0, 0)] + node.nu[1] * node.nu[1] * gm[(1, 1)];
        assert!((nn - 1.0).abs() < 1e-12);
    }
}

#[test]
fn unit_normal_with_conformal_factor() {
    let g = Grid::sphere(8, 16).unwrap();
    let amb = AmbientManifold::euclidean(2).with_psi(ConformalFactor::Perturbed { amplitude: 0.3 });
    let u = g.sample(|x| 2.0 + 0.2 * x[0].cos() + 0.1 * x[0].sin() * x[1].sin());
    let s = graph_quantities(&amb, &g, &u).unwrap();
    for (i, node) in s.nodes.iter().enumerate() {
        let gm = amb.metric_matrix(u[i], g.coords(i)).unwrap();
        let nu = nalgebra::DVector::from_column_slice(&node.nu);
        let nn = (nu.transpose() * &gm * &nu)[(0, 0)];
        assert!((nn - 1.0).abs() < 1e-12);
    }
}

#[test]
fn embedding_oracle_values() {
    let g = Grid::circle(64).unwrap();
    let k = embedding_oracle(&AmbientManifold::euclidean(1), &g, &vec![2.0; 64]).unwrap();
    assert!(k.iter().all(|x| (x - 0.5).abs() < 1e-12));
    let k = embedding_oracle(&AmbientManifold::sphere(1), &g, &vec![FRAC_PI_4; 64]).unwrap();
    assert!(k.iter().all(|x| (x - 1.0).abs() < 1e-12));
    let k = embedding_oracle(&AmbientManifold::hyperbolic(1), &g, &vec![1.0; 64]).unwrap();
    assert!(k.iter().all(|x| (x - 1.0 / 1.0f64.tanh()).abs() < 1e-12));
    assert!(embedding_oracle(&AmbientManifold::flat_slab(1), &g, &vec![1.0; 64]).is_err());
    // plane-curve formula for r(θ) = 2 + 0.1 cos θ
    let u = g.sample(|x| 2.0 + 0.1 * x[0].cos());
    let k = embedding_oracle(&AmbientManifold::euclidean(1), &g, &u).unwrap();
    for i in 0..64 {
        let t = g.coords(i)[0];
        let (r, r1, r2) = (2.0 + 0.1 * t.cos(), -0.1 * t.sin(), -0.1 * t.cos());
        let want = (r * r + 2.0 * r1 * r1 - r * r2) / (r * r + r1 * r1).powf(1.5);
        assert!((k[i] - want).abs() < 1e-12);
    }
}

#[test]
fn fd_curvature_matches_oracle_in_all_space_forms() {
    let g = Grid::circle(256).unwrap();
    for (amb, r0) in [
        (AmbientManifold::euclidean(1), 2.0),
        (AmbientManifold::sphere(1), 1.0),
        (AmbientManifold::hyperbolic(1), 1.0),
    ] {
        let u = g.sample(|x| r0 + 0.1 * x[0].cos() + 0.03 * (2.0 * x[0]).sin());
        let s = graph_quantities(&amb, &g, &u).unwrap();
        let k = embedding_oracle(&amb, &g, &u).unwrap();
        for i in 0..g.len() {
            assert!((s.nodes[i].kappa[0] - k[i]).abs() < 1e-6, "{:?}", amb.kind);
        }
    }
}

#[test]
fn convergence_order_against_oracle() {
    let amb = AmbientManifold::euclidean(1);
    let mut errs = Vec::new();
    for n in [64, 128, 256] {
        let g = Grid::circle(n).unwrap();
        let u = g.sample(|x| 2.0 + 0.1 * x[0].cos());
        let s = graph_quantities(&amb, &g, &u).unwrap();
        let k = embedding_oracle(&amb, &g, &u).unwrap();
        errs.push(
            (0..n)
                .map(|i| (s.nodes[i].kappa[0] - k[i]).abs())
                .fold(0.0, f64::max),
        );
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 3.7, "{errs:?}");
    }
    assert!(errs[2] <= 1e-6);
}

#[test]
fn hessian_route_agrees_without_conformal_factor() {
    let g = Grid::sphere(16, 32).unwrap();
    for amb in [AmbientManifold::sphere(2), AmbientManifold::hyperbolic(2)] {
        let u = g.sample(|x| 0.8 + 0.05 * x[0].cos() + 0.05 * x[0].sin() * x[1].cos());
        let a = second_fundamental_form(&amb, &g, &u).unwrap();
        let b = hessian_form_crosscheck(&amb, &g, &u).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((x[i][j] - y[i][j]).abs() < 1e-12);
                }
            }
        }
    }
    // constant graph: the Hessian term vanishes and h equals ½∂₀σ
    let amb = AmbientManifold::euclidean(1);
    let c = Grid::circle(16).unwrap();
    let b = hessian_form_crosscheck(&amb, &c, &vec![2.0; 16]).unwrap();
    assert!(b.iter().all(|h| h[0][0] == 2.0));
}

#[test]
fn hessian_route_agrees_with_conformal_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let amb = AmbientManifold::euclidean(1).with_psi(ConformalFactor::Perturbed { amplitude: 0.25 });
    let g = Grid::circle(256).unwrap();
    let (a1, a2, p) = (rng.random_range(-0.2..0.2), rng.random_range(-0.1..0.1), rng.random_range(0.0..6.0));
    let u = g.sample(|x| 2.0 + a1 * (x[0] + p).cos() + a2 * (3.0 * x[0]).sin());
    let a = second_fundamental_form(&amb, &g, &u).unwrap();
    let b = hessian_form_crosscheck(&amb, &g, &u).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x[0][0] - y[0][0]).abs() <= 1e-6);
    }
    let amb2 = AmbientManifold::sphere(2).with_psi(ConformalFactor::Perturbed { amplitude: 0.25 });
    let s = Grid::sphere(16, 32).unwrap();
    let u = s.sample(|x| 0.9 + 0.05 * x[0].cos() + 0.04 * x[0].sin() * x[1].sin());
    let a = second_fundamental_form(&amb2, &s, &u).unwrap();
    let b = hessian_form_crosscheck(&amb2, &s, &u).unwrap();
    for (x, y) in a.iter().zip(&b) {
        for i in 0..2 {
            for j in 0..2 {
                assert!((x[i][j] - y[i][j]).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn rotation_equivariance() {
    let g = Grid::circle(64).unwrap();
    let amb = AmbientManifold::sphere(1);
    let u = g.sample(|x| 1.0 + 0.1 * x[0].cos() + 0.05 * (3.0 * x[0]).sin());
    let s = graph_quantities(&amb, &g, &u).unwrap();
    let shift = 7;
    let ur: Vec<f64> = (0..64).map(|i| u[(i + shift) % 64]).collect();
    let sr = graph_quantities(&amb, &g, &ur).unwrap();
    for i in 0..64 {
        assert_eq!(sr.nodes[i].kappa, s.nodes[(i + shift) % 64].kappa);
        assert_eq!(sr.nodes[i].v, s.nodes[(i + shift) % 64].v);
    }
}

#[test]
fn cache_is_coherent_and_rejects_chart_violations() {
    let g = Grid::circle(32).unwrap();
    let amb = AmbientManifold::sphere(1);
    let u = g.sample(|x| 1.0 + 0.1 * x[0].cos());
    assert_eq!(graph_quantities(&amb, &g, &u).unwrap(), graph_quantities(&amb, &g, &u).unwrap());
    let bad = vec![3.5; 32];
    assert!(matches!(graph_quantities(&amb, &g, &bad), Err(Error::Domain(_))));
}

#[test]
fn saddle_fixture_is_inadmissible_for_gauss_root() {
    // a strong cos 2θ ripple on a small sphere in S³ produces a node with κ₁ < 0
    let g = Grid::sphere(16, 32).unwrap();
    let amb = AmbientManifold::euclidean(2);
    let u = g.sample(|x| 1.0 + 0.3 * x[0].sin().powi(2) * (2.0 * x[1]).cos());
    let s = graph_quantities(&amb, &g, &u).unwrap();
    let rep = admissibility(&s, &CurvatureFunction::GaussRoot);
    assert!(!rep.admissible);
    for &i in &rep.violating {
        assert!(s.nodes[i].kappa[0] <= 0.0);
        // brute-force eigenvalues of the 2×2 pencil
        let (h, gm) = (s.nodes[i].h, s.nodes[i].g);
        let a = gm[0][0] * gm[1][1] - gm[0][1] * gm[0][1];
        let b = -(h[0][0] * gm[1][1] + h[1][1] * gm[0][0] - 2.0 * h[0][1] * gm[0][1]);
        let c = h[0][0] * h[1][1] - h[0][1] * h[0][1];
        let k1 = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        assert!((k1 - s.nodes[i].kappa[0]).abs() < 1e-9);
    }
    assert!(rep.violating.len() < g.len());
}

#[test]
fn dual_jet_derivatives_match_finite_differences() {
    let amb = AmbientManifold::sphere(2).with_psi(ConformalFactor::Perturbed { amplitude: 0.2 });
    let x = [0.8, 1.9];
    let base = [0.9, 0.05, -0.03, 0.2, 0.1, -0.15];
    let mk = |v: &[f64; 6]| JetT {
        u: v[0],
        du: [v[1], v[2]],
        ddu: [[v[3], v[4]], [v[4], v[5]]],
    };
    let d: [Dual<6>; 6] = std::array::from_fn(|k| Dual::variable(base[k], k));
    let jd = JetT {
        u: d[0],
        du: [d[1], d[2]],
        ddu: [[d[3], d[4]], [d[4], d[5]]],
    };
    let lg = local_geometry(&amb, &x, &jd).unwrap();
    for k in 0..6 {
        let h = 1e-6;
        let (mut p, mut m) = (base, base);
        p[k] += h;
        m[k] -= h;
        let lp = local_geometry(&amb, &x, &mk(&p)).unwrap();
        let lm = local_geometry(&amb, &x, &mk(&m)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let fd = (lp.h[i][j] - lm.h[i][j]) / (2.0 * h);
                assert!((lg.h[i][j].eps[k] - fd).abs() < 1e-7);
            }
        }
    }
}
