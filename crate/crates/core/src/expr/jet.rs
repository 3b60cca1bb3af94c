use std::ops::{Add, Div, Mul, Neg, Sub};

use super::EvalError;

/// Largest derivative order a jet may carry.
pub const K_MAX: usize = 16;

/// Truncated Taylor expansion at a point.
///
/// `coeffs[k]` is the normalized coefficient `f^(k)(x0) / k!`. All arithmetic
/// truncates at the jet's order, so the first `order + 1` coefficients are exact
/// up to floating-point rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    base_point: f64,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(base_point: f64, value: f64, order: usize) -> Jet {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Jet { base_point, coeffs }
    }

    /// The identity function `x` expanded at `base_point`.
    pub fn variable(base_point: f64, order: usize) -> Jet {
        let mut j = Jet::constant(base_point, base_point, order);
        if order >= 1 {
            j.coeffs[1] = 1.0;
        }
        j
    }

    pub fn from_coeffs(base_point: f64, coeffs: Vec<f64>) -> Jet {
        assert!(!coeffs.is_empty(), "a jet needs at least one coefficient");
        Jet { base_point, coeffs }
    }

    pub fn base_point(&self) -> f64 {
        self.base_point
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `f^(k)(x0)`, i.e. `k! * coeffs[k]`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeffs[k] * factorial(k)
    }

    /// All derivatives `f^(0) .. f^(order)`.
    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.coeffs.len()).map(|k| self.derivative(k)).collect()
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        Jet {
            base_point: self.base_point,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    fn map_coeffs(&self, f: impl Fn(f64) -> f64) -> Jet {
        Jet {
            base_point: self.base_point,
            coeffs: self.coeffs.iter().map(|a| f(*a)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        self.map_coeffs(|a| a * c)
    }

    /// Quotient by the Cauchy-division recurrence.
    pub fn checked_div(&self, den: &Jet) -> Result<Jet, EvalError> {
        let b0 = den.coeffs[0];
        if b0 == 0.0 || !b0.is_finite() {
            return Err(EvalError::DivisionByZero { x: self.base_point });
        }
        let n = self.coeffs.len();
        let mut q = vec![0.0; n];
        for k in 0..n {
            let mut acc = self.coeffs[k];
            for j in 1..=k {
                acc -= den.coeffs[j] * q[k - j];
            }
            q[k] = acc / b0;
        }
        Ok(Jet::from_coeffs(self.base_point, q))
    }

    pub fn recip(&self) -> Result<Jet, EvalError> {
        Jet::constant(self.base_point, 1.0, self.order()).checked_div(self)
    }

    pub fn exp(&self) -> Jet {
        let n = self.coeffs.len();
        let a = &self.coeffs;
        let mut e = vec![0.0; n];
        e[0] = a[0].exp();
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * a[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Jet::from_coeffs(self.base_point, e)
    }

    pub fn ln(&self) -> Result<Jet, EvalError> {
        let a = &self.coeffs;
        if a[0] <= 0.0 || !a[0].is_finite() {
            return Err(EvalError::Domain {
                func: "log",
                x: self.base_point,
                arg: a[0],
            });
        }
        let n = a.len();
        let mut l = vec![0.0; n];
        l[0] = a[0].ln();
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * l[j] * a[k - j];
            }
            l[k] = (a[k] - acc / k as f64) / a[0];
        }
        Ok(Jet::from_coeffs(self.base_point, l))
    }

    pub fn sqrt(&self) -> Result<Jet, EvalError> {
        let a = &self.coeffs;
        let n = a.len();
        // sqrt is not differentiable at 0, so a zero base is only admissible for a plain value
        if a[0] < 0.0 || (a[0] == 0.0 && n > 1) || !a[0].is_finite() {
            return Err(EvalError::Domain {
                func: "sqrt",
                x: self.base_point,
                arg: a[0],
            });
        }
        let mut s = vec![0.0; n];
        s[0] = a[0].sqrt();
        for k in 1..n {
            let mut acc = a[k];
            for j in 1..k {
                acc -= s[j] * s[k - j];
            }
            s[k] = acc / (2.0 * s[0]);
        }
        Ok(Jet::from_coeffs(self.base_point, s))
    }

    /// `(sinh(a), cosh(a))` from the coupled recurrences `s' = c a'`, `c' = s a'`.
    pub fn sinh_cosh(&self) -> (Jet, Jet) {
        let a = &self.coeffs;
        let n = a.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = a[0].sinh();
        c[0] = a[0].cosh();
        for k in 1..n {
            let mut acc_s = 0.0;
            let mut acc_c = 0.0;
            for j in 1..=k {
                let ja = j as f64 * a[j];
                acc_s += ja * c[k - j];
                acc_c += ja * s[k - j];
            }
            s[k] = acc_s / k as f64;
            c[k] = acc_c / k as f64;
        }
        (
            Jet::from_coeffs(self.base_point, s),
            Jet::from_coeffs(self.base_point, c),
        )
    }

    pub fn tanh(&self) -> Jet {
        let (s, c) = self.sinh_cosh();
        // cosh >= 1, the division cannot fail
        s.checked_div(&c).expect("cosh is bounded away from zero")
    }

    /// Integer power by repeated squaring; negative exponents go through the reciprocal.
    pub fn powi(&self, n: i32) -> Result<Jet, EvalError> {
        let mut result = Jet::constant(self.base_point, 1.0, self.order());
        let mut base = self.clone();
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        if n < 0 {
            result.recip()
        } else {
            Ok(result)
        }
    }

    /// `self^exponent` rewritten as `exp(exponent * log(self))`.
    pub fn powf(&self, exponent: &Jet) -> Result<Jet, EvalError> {
        if self.coeffs[0] <= 0.0 {
            return Err(EvalError::Domain {
                func: "pow",
                x: self.base_point,
                arg: self.coeffs[0],
            });
        }
        Ok((exponent * &self.ln()?).exp())
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = (0..=k).map(|j| self.coeffs[j] * rhs.coeffs[k - j]).sum();
        }
        Jet::from_coeffs(self.base_point, out)
    }
}

impl Div for &Jet {
    type Output = Result<Jet, EvalError>;
    fn div(self, rhs: &Jet) -> Result<Jet, EvalError> {
        self.checked_div(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map_coeffs(|a| -a)
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}
