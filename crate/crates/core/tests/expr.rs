use curvesolve::Error;
use curvesolve::expr::*;
use curvesolve::dual::Dual;
use std::f64::consts::PI;

fn ev(s: &str, x0: f64, theta: f64) -> f64 {
    Expr::parse(s).unwrap().eval_at(x0, &[theta])
}

#[test]
fn arithmetic_and_precedence() {
    assert_eq!(ev("1+2*3", 0.0, 0.0), 7.0);
    assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
    assert_eq!(ev("-2^2", 0.0, 0.0), -4.0);
    assert_eq!(ev("2/(x0)^2", 2.0, 0.0), 0.5);
    assert!((ev("1+4*(pi/4-x0)", PI / 4.0, 0.0) - 1.0).abs() < 1e-15);
    assert!((ev("2/x0^2*(1+0.05*cos(theta))", 2.0, 0.0) - 0.525).abs() < 1e-15);
    assert!((ev("cot(x0)", PI / 4.0, 0.0) - 1.0).abs() < 1e-15);
    assert_eq!(ev("1e-3*1E2", 0.0, 0.0), 0.1);
    assert!((ev("x0^-2", 2.0, 0.0) - 0.25).abs() < 1e-15);
}

#[test]
fn dual_evaluation_differentiates() {
    let e = Expr::parse("2/x0^2 + sin(x0)*nu0").unwrap();
    let b = Bindings::at(
        Dual::<2>::variable(1.5, 0),
        &[0.0],
        [Dual::variable(0.5, 1), Dual::constant(0.0), Dual::constant(0.0)],
    );
    let v = e.eval(&b);
    assert!((v.eps[0] - (-4.0 / 1.5f64.powi(3) + 1.5f64.cos() * 0.5)).abs() < 1e-14);
    assert!((v.eps[1] - 1.5f64.sin()).abs() < 1e-15);
    assert!(e.uses_normal());
}

#[test]
fn errors() {
    for bad in ["", "1+", "foo", "sin 1", "(1", "1)", "2 $ 3"] {
        assert!(matches!(Expr::parse(bad), Err(Error::Expression(_))), "{bad}");
    }
}

#[test]
fn constants() {
    assert_eq!(Expr::parse("2.5").unwrap().as_constant(), Some(2.5));
    assert_eq!(Expr::parse("1+x0").unwrap().as_constant(), None);
    assert_eq!(Expr::parse(" 3 ").unwrap().source(), "3");
}
