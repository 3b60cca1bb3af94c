//! Weighted shifts sampled from a symbol: `beta_n = phi(n)`, `alpha_n = sqrt(beta_{n+1} / beta_n)`.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::classify::OrderProfile;
use crate::expr::{EvalError, Symbol};
use crate::verdict::{Verdict, Witness};

pub const DEFAULT_LENGTH: usize = 32;
pub const DEFAULT_ORDER: usize = 8;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("sequence of length {len} is too short for order {order}")]
    TooShort { len: usize, order: usize },
    #[error("beta_{n} = {value} is not positive")]
    NotPositive { n: usize, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftWeights {
    /// `phi(0), ..., phi(N)`, not normalized.
    pub beta: Vec<f64>,
    /// `beta_n / beta_0`.
    pub beta_normalized: Vec<f64>,
    /// `alpha_0, ..., alpha_{N-1}`.
    pub alpha: Vec<f64>,
    /// Weights of the Cauchy dual shift, `1 / alpha_n`.
    pub dual_alpha: Vec<f64>,
}

impl ShiftWeights {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `1 / beta_n`.
    pub fn reciprocal_beta(&self) -> Vec<f64> {
        self.beta.iter().map(|b| 1.0 / b).collect()
    }

    /// CSV with header `n,beta,alpha,dual_alpha`, one row per `n < N`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BridgeError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| BridgeError::Csv(e.to_string());
        w.write_record(["n", "beta", "alpha", "dual_alpha"]).map_err(csv_err)?;
        for n in 0..self.alpha.len() {
            w.write_record([
                n.to_string(),
                self.beta[n].to_string(),
                self.alpha[n].to_string(),
                self.dual_alpha[n].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn beta_alpha<S: Symbol + ?Sized>(sym: &S, len: usize) -> Result<ShiftWeights, BridgeError> {
    let beta = (0..=len)
        .map(|n| {
            let v = sym.value(n as f64)?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(BridgeError::NotPositive { n, value: v })
            }
        })
        .collect::<Result<Vec<_>, BridgeError>>()?;
    let alpha: Vec<f64> = beta.windows(2).map(|w| (w[1] / w[0]).sqrt()).collect();
    Ok(ShiftWeights {
        beta_normalized: beta.iter().map(|b| b / beta[0]).collect(),
        dual_alpha: alpha.iter().map(|a| 1.0 / a).collect(),
        alpha,
        beta,
    })
}

/// `k`-fold forward difference `(Delta u)(n) = u(n + 1) - u(n)`.
pub fn fwd_diff(seq: &[f64], k: usize) -> Result<Vec<f64>, BridgeError> {
    if k >= seq.len() {
        return Err(BridgeError::TooShort { len: seq.len(), order: k });
    }
    let mut cur = seq.to_vec();
    for _ in 0..k {
        cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(cur)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceClasses {
    pub completely_monotone: Verdict,
    pub completely_alternating: Verdict,
    pub orders_checked: usize,
    /// Sign summary of `Delta^k u`; witness `x` is the index `n`.
    pub profile: Vec<OrderProfile>,
}

/// Completely monotone: `(-1)^k Delta^k u >= 0` for `k = 0..=order`;
/// completely alternating: `(-1)^k Delta^k u <= 0` for `k = 1..=order`.
pub fn seq_classify(seq: &[f64], order: usize, tol: f64) -> Result<SequenceClasses, BridgeError> {
    let profile = (0..=order)
        .map(|k| {
            let d = fwd_diff(seq, k)?;
            let samples: Vec<Witness> = d.iter().enumerate().map(|(n, v)| Witness::at(n as f64, *v)).collect();
            Ok(OrderProfile::from_samples(k, &samples, tol))
        })
        .collect::<Result<Vec<_>, BridgeError>>()?;
    let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let first_failure = |orders: std::ops::RangeInclusive<usize>, s: &dyn Fn(usize) -> f64| {
        orders
            .map(|k| profile[k].require(s(k)))
            .find(|v| !v.holds())
            .unwrap_or(Verdict::Holds)
    };
    Ok(SequenceClasses {
        completely_monotone: first_failure(0..=order, &sign),
        completely_alternating: first_failure(1..=order, &|k| -sign(k)),
        orders_checked: order,
        profile,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeibnizResidual {
    pub n: usize,
    pub max_abs: f64,
    /// Largest sum of absolute terms on the right-hand side.
    pub scale: f64,
}

impl LeibnizResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.max_abs
        } else {
            self.max_abs / self.scale
        }
    }
}

/// Compares `Delta^n (u v)(x)` with `sum_k C(n, k) (Delta^k u)(x) (Delta^{n-k} v)(x + k)`
/// at every index where both sides are defined.
pub fn leibniz_check(u: &[f64], v: &[f64], n: usize) -> Result<LeibnizResidual, BridgeError> {
    let len = u.len().min(v.len());
    if n >= len {
        return Err(BridgeError::TooShort { len, order: n });
    }
    let product: Vec<f64> = u[..len].iter().zip(&v[..len]).map(|(a, b)| a * b).collect();
    let lhs = fwd_diff(&product, n)?;
    let du: Vec<Vec<f64>> = (0..=n).map(|k| fwd_diff(&u[..len], k)).collect::<Result<_, _>>()?;
    let dv: Vec<Vec<f64>> = (0..=n).map(|k| fwd_diff(&v[..len], k)).collect::<Result<_, _>>()?;
    let mut max_abs = 0.0f64;
    let mut scale = 0.0f64;
    for (x, l) in lhs.iter().enumerate() {
        let mut binom = 1.0;
        let mut rhs = 0.0;
        let mut mag = 0.0;
        for k in 0..=n {
            let term = binom * du[k][x] * dv[n - k][x + k];
            rhs += term;
            mag += term.abs();
            binom = binom * (n - k) as f64 / (k + 1) as f64;
        }
        max_abs = max_abs.max((l - rhs).abs());
        scale = scale.max(mag);
    }
    Ok(LeibnizResidual { n, max_abs, scale })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeReport {
    pub symbol: String,
    pub weights: ShiftWeights,
    pub beta_classes: SequenceClasses,
    pub reciprocal_classes: SequenceClasses,
    pub leibniz: Vec<LeibnizResidual>,
}

/// Sequences, their classes and the Leibniz residuals for `beta` against `1 / beta`.
pub fn bridge_report<S: Symbol + ?Sized + std::fmt::Display>(
    sym: &S,
    len: usize,
    order: usize,
    tol: f64,
) -> Result<BridgeReport, BridgeError> {
    let weights = beta_alpha(sym, len)?;
    let recip = weights.reciprocal_beta();
    let beta_classes = seq_classify(&weights.beta, order, tol)?;
    let reciprocal_classes = seq_classify(&recip, order, tol)?;
    let leibniz = (0..=order.min(5))
        .map(|n| leibniz_check(&weights.beta, &recip, n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BridgeReport {
        symbol: sym.to_string(),
        weights,
        beta_classes,
        reciprocal_classes,
        leibniz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr};
    use proptest::prelude::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn weights_of_simple_symbols() {
        let w = beta_alpha(&p("x+1"), 5).unwrap();
        assert_eq!(w.beta, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        for (n, a) in w.alpha.iter().enumerate() {
            assert!((a - ((n as f64 + 2.0) / (n as f64 + 1.0)).sqrt()).abs() < 1e-15);
        }
        let w = beta_alpha(&p("1"), 4).unwrap();
        assert!(w.beta.iter().chain(&w.alpha).chain(&w.dual_alpha).all(|v| *v == 1.0));
        let w = beta_alpha(&p("exp(-x)"), 6).unwrap();
        for a in &w.alpha {
            assert!((a - (-0.5f64).exp()).abs() < 1e-15);
        }
        assert!(matches!(beta_alpha(&p("3 - x"), 5), Err(BridgeError::NotPositive { n: 3, .. })));
    }

    #[test]
    fn forward_differences() {
        assert_eq!(fwd_diff(&[1.0, 2.0, 3.0, 4.0], 1).unwrap(), vec![1.0, 1.0, 1.0]);
        let sq: Vec<f64> = (0..5).map(|n| (n * n) as f64).collect();
        assert_eq!(fwd_diff(&sq, 2).unwrap(), vec![2.0, 2.0, 2.0]);
        assert_eq!(fwd_diff(&sq, 0).unwrap(), sq);
        assert!(fwd_diff(&sq, 5).is_err());
    }

    #[test]
    fn sequence_classes() {
        let b = beta_alpha(&p("x+1"), DEFAULT_LENGTH).unwrap().beta;
        assert!(seq_classify(&b, DEFAULT_ORDER, 1e-9).unwrap().completely_alternating.holds());

        let b = beta_alpha(&p("exp(-x)"), DEFAULT_LENGTH).unwrap().beta;
        for k in 0..=DEFAULT_ORDER {
            let d = fwd_diff(&b, k).unwrap();
            for (n, v) in d.iter().enumerate() {
                let closed = (-(n as f64)).exp() * (1.0 - (-1f64).exp()).powi(k as i32);
                let signed = if k % 2 == 0 { *v } else { -v };
                assert!((signed - closed).abs() < 1e-14);
            }
        }
        assert!(seq_classify(&b, DEFAULT_ORDER, 1e-9).unwrap().completely_monotone.holds());
    }

    #[test]
    fn counterexample_sequence_is_not_alternating() {
        let b = beta_alpha(&p("2*x - log(cosh(x-10)) + 100"), DEFAULT_LENGTH).unwrap().beta;
        let c = seq_classify(&b, DEFAULT_ORDER, 1e-9).unwrap();
        let w = *c.completely_alternating.witness().expect("fails");
        assert_eq!(w.order, Some(3));
        // brute force: Delta^3 beta changes sign between the two sides of n ~ 9
        let d3 = fwd_diff(&b, 3).unwrap();
        assert!(d3[7] < 0.0 && d3[10] > 0.0);
        let [neg, pos] = c.profile[3].witnesses.unwrap();
        assert!(neg.value < 0.0 && pos.value > 0.0);
        assert!((8.0..=11.0).contains(&pos.x), "{pos:?}");
    }

    #[test]
    fn leibniz_examples() {
        let w = beta_alpha(&p("x+1"), DEFAULT_LENGTH).unwrap();
        let r = leibniz_check(&w.beta, &w.reciprocal_beta(), 2).unwrap();
        assert!(r.max_abs <= 1e-12, "{r:?}");
        assert_eq!(leibniz_check(&w.beta, &w.reciprocal_beta(), 0).unwrap().max_abs, 0.0);
        assert!(leibniz_check(&w.beta[..3], &w.beta[..3], 3).is_err());
    }

    #[test]
    fn csv_layout() {
        let w = beta_alpha(&p("x+1"), 2).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,beta,alpha,dual_alpha");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,1,1.41421356237"));
    }

    proptest! {
        #[test]
        fn leibniz_holds_for_random_sequences(
            u in proptest::collection::vec(0.1f64..10.0, 12),
            v in proptest::collection::vec(0.1f64..10.0, 12),
            n in 0usize..6,
        ) {
            let r = leibniz_check(&u, &v, n).unwrap();
            prop_assert!(r.relative() <= 1e-10, "{:?}", r);
        }

        #[test]
        fn alpha_beta_coherence(a in 0.1f64..5.0, b in 0.0f64..3.0) {
            let e = p(&format!("{a}*x + {b} + 1"));
            let w = beta_alpha(&e, 20).unwrap();
            for n in 0..20 {
                let want = (w.beta[n + 1] / w.beta[n]).sqrt();
                prop_assert!((w.alpha[n] - want).abs() <= 1e-14 * want);
                prop_assert!((w.dual_alpha[n] * w.alpha[n] - 1.0).abs() <= 1e-15);
            }
        }
    }
}
