//! Cauchy dual of a weighted translation semigroup: the semigroup with symbol `1 / phi`.

use serde::Serialize;

use crate::classify::{classify, ClassificationReport, ClassifyConfig, ClassifyError, SignVerdict};
use crate::expr::{EvalError, Expr, Symbol};
use crate::opsim::{sample, weight, Grid, OpError, SampledFunction};
use crate::verdict::{Check, Verdict};

/// Margins below this are reported as "not left invertible at the tested scale".
pub const MARGIN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margin {
    pub t: f64,
    /// `min_x phi(x + t) / phi(x)`.
    pub margin: f64,
    pub x_at_min: f64,
    pub left_invertible: bool,
    /// Margin at least `1 - tol`, as for hyperexpansive semigroups.
    pub expansive: bool,
}

pub fn left_inv_margin<S: Symbol + ?Sized>(
    sym: &S,
    t_values: &[f64],
    xs: &[f64],
    tol: f64,
) -> Result<Vec<Margin>, ClassifyError> {
    let mut out = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let mut best: Option<(f64, f64)> = None;
        for &x in xs {
            let base = sym.value(x)?;
            if !(base > 0.0) {
                return Err(ClassifyError::NotPositive { x, value: base });
            }
            let ratio = sym.value(x + t)? / base;
            if best.is_none_or(|(m, _)| ratio < m) {
                best = Some((ratio, x));
            }
        }
        let (margin, x_at_min) = best.ok_or_else(|| ClassifyError::Config("empty grid".into()))?;
        out.push(Margin {
            t,
            margin,
            x_at_min,
            left_invertible: margin >= MARGIN_FLOOR,
            expansive: margin >= 1.0 - tol,
        });
    }
    Ok(out)
}

pub fn dual_symbol(e: &Expr) -> Expr {
    e.reciprocal()
}

/// `(S_t' f)(x) = f(x - t) / phi_t(x)` for `x >= t`, zero before.
pub fn apply_dual<S: Symbol + ?Sized>(sym: &S, t: f64, f: &SampledFunction) -> Result<SampledFunction, OpError> {
    let g = f.grid();
    let k = g.steps(t)?;
    let w = weight(sym, t, g)?;
    let fv = f.values();
    let values = (0..g.len())
        .map(|i| {
            if i < k {
                return Ok(0.0);
            }
            let wi = w.values()[i];
            if wi == 0.0 {
                Err(OpError::ZeroWeight { node: i })
            } else {
                Ok(fv[i - k] / wi)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    SampledFunction::new(g, values)
}

/// Multiplier of `(S_t^* S_t)^{-1}`: `phi(x) / phi(x + t)`.
pub fn inverse_gram_multiplier<S: Symbol + ?Sized>(sym: &S, t: f64, g: Grid) -> Result<SampledFunction, OpError> {
    let base = sample(sym, g)?;
    let values = (0..g.len())
        .map(|i| {
            let x = g.node(i);
            let shifted = sym
                .value(x + t)
                .map_err(|source| OpError::Eval { node: i, x: x + t, source })?;
            Ok(base.values()[i] / shifted)
        })
        .collect::<Result<Vec<_>, OpError>>()?;
    SampledFunction::new(g, values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremChecks {
    /// Completely alternating symbol has a completely monotone reciprocal.
    pub ca_implies_dual_cm: Check,
    /// Concave symbol has a log-convex reciprocal.
    pub concave_implies_dual_log_convex: Check,
    /// Degree-one symbol (2-isometry) has a completely monotone reciprocal.
    pub two_isometry_dual_cm: Check,
    /// Observed complete monotonicity of the reciprocal, whatever the hypothesis.
    pub dual_cm: Check,
}

fn observed(v: &Verdict, dual: &ClassificationReport) -> Check {
    match v {
        Verdict::Holds => Check::Pass,
        Verdict::Fails { witness } => {
            // prefer a sign-change pair from the failing order when there is one
            let pair = witness
                .order
                .map(|k| dual.profile.order(k))
                .filter(|o| o.verdict == SignVerdict::Mixed)
                .and_then(|o| o.witnesses);
            let witnesses = match pair {
                Some([neg, pos]) => vec![*witness, neg, pos],
                None => vec![*witness],
            };
            Check::Fail { witnesses }
        }
        Verdict::Inconclusive { .. } => Check::NotApplicable,
    }
}

fn implication(hypothesis: bool, conclusion: &Check) -> Check {
    if hypothesis {
        conclusion.clone()
    } else {
        Check::NotApplicable
    }
}

/// Checks the dual-class consequences given the classifications of `phi` and `1 / phi`.
pub fn verify_dual_theorems(symbol: &ClassificationReport, dual: &ClassificationReport) -> TheoremChecks {
    let dual_cm = observed(&dual.function_classes.completely_monotone, dual);
    let dual_log_convex = observed(&dual.function_classes.log_convex, dual);
    let fc = &symbol.function_classes;
    TheoremChecks {
        ca_implies_dual_cm: implication(fc.completely_alternating.holds(), &dual_cm),
        concave_implies_dual_log_convex: implication(fc.concave.holds(), &dual_log_convex),
        two_isometry_dual_cm: implication(fc.polynomial_degree == Some(1), &dual_cm),
        dual_cm,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualReport {
    pub symbol: String,
    pub dual_symbol: String,
    pub left_invertibility_margins: Vec<Margin>,
    pub dual_classification: ClassificationReport,
    pub theorem_checks: TheoremChecks,
}

/// Classifies `phi` and `1 / phi` with the same configuration and checks the dual theorems.
pub fn dual_report(e: &Expr, cfg: &ClassifyConfig) -> Result<(ClassificationReport, DualReport), ClassifyError> {
    let symbol = classify(e, cfg)?;
    let dual_expr = dual_symbol(e);
    let dual = classify(&dual_expr, cfg)?;
    let margins = left_inv_margin(e, &cfg.t_values, &cfg.grid, cfg.tol)?;
    let theorem_checks = verify_dual_theorems(&symbol, &dual);
    let report = DualReport {
        symbol: e.to_string(),
        dual_symbol: dual_expr.to_string(),
        left_invertibility_margins: margins,
        dual_classification: dual,
        theorem_checks,
    };
    Ok((symbol, report))
}

/// Value of `e` and `1 / (1 / e)` at `x`, for the involution check.
pub fn double_dual_values(e: &Expr, x: f64) -> Result<(f64, f64), EvalError> {
    Ok((e.value(x)?, dual_symbol(&dual_symbol(e)).value(x)?))
}
