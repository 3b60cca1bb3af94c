//! Symbol expressions: parsing, printing and exact higher derivatives via Taylor jets.

mod ast;
mod jet;
mod parse;

pub use ast::{BinOp, Expr, Func};
pub use jet::{Jet, K_MAX};
pub use parse::{parse, ParseError};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{func} is not smooth at argument {arg} (evaluating at x = {x})")]
    Domain { func: &'static str, x: f64, arg: f64 },
    #[error("division by zero at x = {x}")]
    DivisionByZero { x: f64 },
    #[error("derivative order {order} exceeds the maximum of {max}")]
    OrderOverflow { order: usize, max: usize },
    #[error("non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

impl EvalError {
    /// The evaluation point at which the failure happened, if any.
    pub fn point(&self) -> Option<f64> {
        match self {
            EvalError::Domain { x, .. } | EvalError::DivisionByZero { x } | EvalError::NonFinite { x } => {
                Some(*x)
            }
            EvalError::OrderOverflow { .. } => None,
        }
    }
}

fn jet_of(e: &Expr, x0: f64, order: usize) -> Result<Jet, EvalError> {
    Ok(match e {
        Expr::Num(v) => Jet::constant(x0, *v, order),
        Expr::Var => Jet::variable(x0, order),
        Expr::Neg(a) => -&jet_of(a, x0, order)?,
        Expr::Binary(op, a, b) => {
            if *op == BinOp::Pow {
                return pow_jet(a, b, x0, order);
            }
            let ja = jet_of(a, x0, order)?;
            let jb = jet_of(b, x0, order)?;
            match op {
                BinOp::Add => &ja + &jb,
                BinOp::Sub => &ja - &jb,
                BinOp::Mul => &ja * &jb,
                BinOp::Div => (&ja / &jb)?,
                BinOp::Pow => unreachable!(),
            }
        }
        Expr::Call(func, args) => match func {
            Func::Pow => return pow_jet(&args[0], &args[1], x0, order),
            Func::Exp => jet_of(&args[0], x0, order)?.exp(),
            Func::Log => jet_of(&args[0], x0, order)?.ln()?,
            Func::Sqrt => jet_of(&args[0], x0, order)?.sqrt()?,
            Func::Sinh => jet_of(&args[0], x0, order)?.sinh_cosh().0,
            Func::Cosh => jet_of(&args[0], x0, order)?.sinh_cosh().1,
            Func::Tanh => jet_of(&args[0], x0, order)?.tanh(),
        },
    })
}

fn pow_jet(base: &Expr, exponent: &Expr, x0: f64, order: usize) -> Result<Jet, EvalError> {
    let jb = jet_of(base, x0, order)?;
    match exponent.integer_literal() {
        Some(n) => jb.powi(n),
        None => jb.powf(&jet_of(exponent, x0, order)?),
    }
}

/// Taylor jet of `e` at `x0` truncated at `order`.
pub fn eval_jet(e: &Expr, x0: f64, order: usize) -> Result<Jet, EvalError> {
    if order > K_MAX {
        return Err(EvalError::OrderOverflow { order, max: K_MAX });
    }
    let j = jet_of(e, x0, order)?;
    if j.coeffs().iter().any(|c| !c.is_finite()) {
        return Err(EvalError::NonFinite { x: x0 });
    }
    Ok(j)
}

/// `e^(k)(x0)`.
pub fn derivative(e: &Expr, x0: f64, k: usize) -> Result<f64, EvalError> {
    Ok(eval_jet(e, x0, k)?.derivative(k))
}

/// A positive function of one real variable, evaluated pointwise.
///
/// Closed-form symbols implement this through [`Expr`]; the finite-difference
/// criteria also accept non-smooth symbols such as [`PiecewiseLinear`].
pub trait Symbol: Sync {
    fn value(&self, x: f64) -> Result<f64, EvalError>;
}

impl Symbol for Expr {
    fn value(&self, x: f64) -> Result<f64, EvalError> {
        Ok(eval_jet(self, x, 0)?.value())
    }
}

impl<S: Symbol + ?Sized> Symbol for &S {
    fn value(&self, x: f64) -> Result<f64, EvalError> {
        (**self).value(x)
    }
}

/// Continuous piecewise-linear function through `knots`, constant beyond the last knot.
///
/// Only usable with the finite-difference route; it has no jet.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    /// Knots must be sorted by strictly increasing abscissa.
    pub fn new(knots: Vec<(f64, f64)>) -> PiecewiseLinear {
        assert!(!knots.is_empty());
        assert!(knots.windows(2).all(|w| w[0].0 < w[1].0), "knots must increase");
        PiecewiseLinear { knots }
    }
}

impl Symbol for PiecewiseLinear {
    fn value(&self, x: f64) -> Result<f64, EvalError> {
        let k = &self.knots;
        if x <= k[0].0 {
            let (x0, y0) = k[0];
            if k.len() == 1 {
                return Ok(y0);
            }
            let (x1, y1) = k[1];
            return Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0));
        }
        for w in k.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x <= x1 {
                return Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0));
            }
        }
        Ok(k[k.len() - 1].1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn quadratic_derivatives() {
        let d = eval_jet(&p("x^2 + 3*x + 2"), 1.0, 3).unwrap().derivatives();
        assert_eq!(d, vec![6.0, 5.0, 2.0, 0.0]);
    }

    #[test]
    fn log_derivatives() {
        let d = eval_jet(&p("log(x+2)"), 1.0, 2).unwrap().derivatives();
        assert_close(d[0], 3f64.ln(), 1e-15);
        assert_close(d[1], 1.0 / 3.0, 1e-15);
        assert_close(d[2], -1.0 / 9.0, 1e-15);
    }

    #[test]
    fn linear_has_zero_second_derivative() {
        assert_eq!(derivative(&p("x+1"), 7.3, 2).unwrap(), 0.0);
    }

    #[test]
    fn counterexample_third_derivative_signs() {
        let e = p("2*x - log(cosh(x-10)) + 100");
        let th = 1f64.tanh();
        let at11 = derivative(&e, 11.0, 3).unwrap();
        assert_close(at11, 2.0 * th * (1.0 - th * th), 1e-12);
        assert!(at11 > 0.0);
        let t0 = (-10f64).tanh();
        let at0 = derivative(&e, 0.0, 3).unwrap();
        assert!(at0 < 0.0);
        assert!((at0 - 2.0 * t0 * (1.0 - t0 * t0)).abs() < 1e-12);
    }

    #[test]
    fn order_overflow() {
        assert_eq!(
            eval_jet(&p("x"), 0.0, K_MAX + 1).unwrap_err(),
            EvalError::OrderOverflow { order: K_MAX + 1, max: K_MAX }
        );
        assert!(eval_jet(&p("x"), 0.0, K_MAX).is_ok());
    }

    #[test]
    fn pow_variants() {
        // integer literal exponent tolerates a negative base
        assert_close(p("x^3").value(-2.0).unwrap(), -8.0, 1e-15);
        assert_close(p("pow(x, 2)").value(-3.0).unwrap(), 9.0, 1e-15);
        assert_close(p("x^0.5").value(4.0).unwrap(), 2.0, 1e-15);
        assert!(p("x^0.5").value(-4.0).is_err());
        assert_close(derivative(&p("pow(x, x)"), 1.0, 1).unwrap(), 1.0, 1e-14);
    }

    #[test]
    fn tanh_matches_std() {
        let d = eval_jet(&p("tanh(x)"), 0.4, 2).unwrap().derivatives();
        let t = 0.4f64.tanh();
        assert_close(d[0], t, 1e-15);
        assert_close(d[1], 1.0 - t * t, 1e-14);
        assert_close(d[2], -2.0 * t * (1.0 - t * t), 1e-14);
    }

    #[test]
    fn log_domain_error_reports_point() {
        let err = p("log(x)").value(0.0).unwrap_err();
        assert_eq!(err.point(), Some(0.0));
    }

    #[test]
    fn piecewise_linear_symbol() {
        let pw = PiecewiseLinear::new(vec![(0.0, 1.0), (1.0, 2.0)]);
        assert_eq!(pw.value(0.5).unwrap(), 1.5);
        assert_eq!(pw.value(1.0).unwrap(), 2.0);
        assert_eq!(pw.value(7.0).unwrap(), 2.0);
    }

    const FIXTURES: &[&str] = &[
        "sqrt(x+1)",
        "x^3 + x^2 + x + 1",
        "log(x+2)",
        "2 - exp(-x)",
        "x + 1",
        "1/(x+1)",
        "exp(-x)",
        "(x+0.5)/(x+1)",
        "(x+2)/(x+1)",
        "exp(x)",
        "2*x - log(cosh(x-10)) + 100",
        "1/(x^2 + 2*x + 2)",
        "1/(x^2 + 3*x + 2)",
        "sinh(x/4) + cosh(x/5) + tanh(x-3)",
        "pow(x+1, 0.3)",
    ];

    #[test]
    fn print_parse_round_trip() {
        for src in FIXTURES {
            let e = p(src);
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{src} printed as {printed}");
        }
    }

    // k-th derivative central stencil with step h, O(h^2) truncation error.
    fn central_difference(e: &Expr, x: f64, k: usize, h: f64) -> f64 {
        let mut acc = 0.0;
        for j in 0..=k {
            let binom = (0..j).fold(1.0, |b, i| b * (k - i) as f64 / (i + 1) as f64);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let point = x + (k as f64 / 2.0 - j as f64) * h;
            acc += sign * binom * e.value(point).unwrap();
        }
        acc / h.powi(k as i32)
    }

    // stencils at h, h/2 and h/4 combined by two Richardson steps: O(h^6)
    fn richardson(e: &Expr, x: f64, k: usize, h: f64) -> f64 {
        let r1 = |h: f64| (4.0 * central_difference(e, x, k, h / 2.0) - central_difference(e, x, k, h)) / 3.0;
        (16.0 * r1(h / 2.0) - r1(h)) / 15.0
    }

    #[test]
    fn jets_match_finite_differences() {
        for src in FIXTURES {
            let e = p(src);
            // the widest stencil reaches 2h to the left of x; stay inside the domain
            let xs: Vec<f64> = (0..50).map(|i| 0.2 + 19.8 * i as f64 / 49.0).collect();
            for k in 1..=4usize {
                let ads: Vec<f64> = xs.iter().map(|&x| derivative(&e, x, k).unwrap()).collect();
                let scale = ads.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (&x, &ad) in xs.iter().zip(&ads) {
                    let h = f64::max(1e-2, 1e-2 * x.abs());
                    let fd = richardson(&e, x, k, h);
                    // rounding bound of the h/4 stencil: sum of |binomials| = 2^k
                    let fmag = e.value(x).unwrap().abs().max(1.0);
                    let noise = 16.0 * f64::EPSILON * 2f64.powi(k as i32) * fmag / (h / 4.0).powi(k as i32);
                    let tol = 1e-5 * ad.abs().max(1e-3 * scale) + noise;
                    assert!((ad - fd).abs() <= tol, "{src}: k={k} x={x} ad={ad} fd={fd}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn derivative_is_stable_inside_larger_jets(i in 0usize..FIXTURES.len(), x in 0.0f64..20.0, k in 0usize..=8) {
            let e = p(FIXTURES[i]);
            let direct = derivative(&e, x, k).unwrap();
            let inside = eval_jet(&e, x, k + 3).unwrap().derivative(k);
            prop_assert!((direct - inside).abs() <= 1e-12 * direct.abs().max(1e-300) || direct == inside);
        }
    }
}
