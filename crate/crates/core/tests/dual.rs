use curvesolve::dual::*;

type D2 = Dual<2>;

fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6;
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[test]
fn elementary_derivatives_match_central_differences() {
    let x = 0.7;
    let d = D2::variable(x, 0);
    let cases: Vec<(D2, Box<dyn Fn(f64) -> f64>)> = vec![
        (d.sin(), Box::new(f64::sin)),
        (d.cos(), Box::new(f64::cos)),
        (d.tan(), Box::new(f64::tan)),
        (d.sinh(), Box::new(f64::sinh)),
        (d.cosh(), Box::new(f64::cosh)),
        (d.tanh(), Box::new(f64::tanh)),
        (d.exp(), Box::new(f64::exp)),
        (d.ln(), Box::new(f64::ln)),
        (d.sqrt(), Box::new(f64::sqrt)),
        (d.powi(3), Box::new(|x: f64| x.powi(3))),
        (d.powf(2.5), Box::new(|x: f64| x.powf(2.5))),
        (d.recip(), Box::new(|x: f64| 1.0 / x)),
        (d.powd(D2::constant(1.5)), Box::new(|x: f64| x.powf(1.5))),
    ];
    for (val, f) in cases {
        assert!((val.re - f(x)).abs() < 1e-14);
        assert!((val.eps[0] - fd(&f, x)).abs() < 1e-8, "{val:?}");
        assert_eq!(val.eps[1], 0.0);
    }
}

#[test]
fn product_and_quotient_rules() {
    let a = D2::variable(1.5, 0);
    let b = D2::variable(-0.5, 1);
    let p = a * b;
    assert_eq!(p.eps, [-0.5, 1.5]);
    let q = a / b;
    assert!((q.eps[0] - 1.0 / -0.5).abs() < 1e-15);
    assert!((q.eps[1] + 1.5 / 0.25).abs() < 1e-15);
}
