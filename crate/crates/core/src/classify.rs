//! Function-class and semigroup-class verdicts for a symbol.
//!
//! Each class is decided on a finite grid up to a finite derivative order.
//! A sampled value `v` of the k-th derivative sits in the zero band when
//! `|v| <= tol * (1 + max_i |v_i|)`; band values are compatible with either
//! sign, values beyond the band decide the verdict.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{eval_jet, EvalError, Expr, Symbol, K_MAX};
use crate::verdict::{Verdict, Witness};

pub const DEFAULT_X_MAX: f64 = 20.0;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_T_VALUES: [f64; 6] = [0.1, 0.25, 0.5, 1.0, 2.0, 5.0];
const UNIFORM_POINTS: usize = 201;
const GEOMETRIC_POINTS: usize = 50;
const GEOMETRIC_START: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("symbol is not positive at x = {x} (value {value})")]
    NotPositive { x: f64, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// 201 uniform points on `[0, x_max]` merged with 50 geometric points in `(0, min(1, x_max)]`.
pub fn default_grid(x_max: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..UNIFORM_POINTS)
        .map(|i| x_max * i as f64 / (UNIFORM_POINTS - 1) as f64)
        .collect();
    let top = x_max.min(1.0);
    let ratio = (top / GEOMETRIC_START).ln() / (GEOMETRIC_POINTS - 1) as f64;
    pts.extend((0..GEOMETRIC_POINTS).map(|j| GEOMETRIC_START * (ratio * j as f64).exp()));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1.0));
    pts
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    pub order: usize,
    pub x_max: f64,
    pub grid: Vec<f64>,
    pub t_values: Vec<f64>,
    pub tol: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig::with_order(K_MAX)
    }
}

impl ClassifyConfig {
    pub fn with_order(order: usize) -> ClassifyConfig {
        ClassifyConfig {
            order,
            x_max: DEFAULT_X_MAX,
            grid: default_grid(DEFAULT_X_MAX),
            t_values: DEFAULT_T_VALUES.to_vec(),
            tol: DEFAULT_TOL,
        }
    }

    pub fn with_x_max(mut self, x_max: f64) -> ClassifyConfig {
        self.x_max = x_max;
        self.grid = default_grid(x_max);
        self
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        if self.order > K_MAX {
            return Err(ClassifyError::Config(format!("order {} exceeds {K_MAX}", self.order)));
        }
        if !(self.x_max > 0.0) || self.grid.is_empty() {
            return Err(ClassifyError::Config("empty grid".into()));
        }
        if self.t_values.iter().any(|t| !(*t > 0.0)) {
            return Err(ClassifyError::Config("t values must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(ClassifyError::Config("tolerance must be positive".into()));
        }
        Ok(())
    }

    /// `(x, t)` pairs for an order-`n` difference, restricted to `x + n t <= x_max`.
    pub fn xt_pairs(&self, n: usize) -> Vec<(f64, f64)> {
        let slack = 1e-12 * self.x_max;
        let mut pairs = Vec::new();
        for &t in &self.t_values {
            for &x in &self.grid {
                if x + n as f64 * t <= self.x_max + slack {
                    pairs.push((x, t));
                }
            }
        }
        pairs
    }

    pub fn describe(&self) -> GridDescription {
        GridDescription {
            points: self.grid.len(),
            x_min: self.grid.first().copied().unwrap_or(0.0),
            x_max: self.x_max,
            t_values: self.t_values.clone(),
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDescription {
    pub points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub t_values: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignVerdict {
    NonNegative,
    NonPositive,
    Zero,
    Mixed,
}

/// Sign summary of one sampled sequence of values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderProfile {
    pub order: usize,
    pub verdict: SignVerdict,
    /// Zero-band half width.
    pub band: f64,
    pub min: Witness,
    pub max: Witness,
    /// For `Mixed`: the first sample below and the first above the band, in grid order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<[Witness; 2]>,
}

impl OrderProfile {
    /// Summarizes `samples`; each witness carries its own x (and t, for differences).
    pub fn from_samples(order: usize, samples: &[Witness], tol: f64) -> OrderProfile {
        assert!(!samples.is_empty(), "no samples to profile");
        let mut min = samples[0];
        let mut max = samples[0];
        let mut scale = 0.0f64;
        for s in samples {
            if s.value < min.value {
                min = *s;
            }
            if s.value > max.value {
                max = *s;
            }
            scale = scale.max(s.value.abs());
        }
        let band = tol * (1.0 + scale);
        let first_neg = samples.iter().find(|s| s.value < -band);
        let first_pos = samples.iter().find(|s| s.value > band);
        let (verdict, witnesses) = match (first_neg, first_pos) {
            (Some(n), Some(p)) => (SignVerdict::Mixed, Some([*n, *p])),
            (Some(_), None) => (SignVerdict::NonPositive, None),
            (None, Some(_)) => (SignVerdict::NonNegative, None),
            (None, None) => (SignVerdict::Zero, None),
        };
        let tag = |w: Witness| w.with_order(order);
        OrderProfile {
            order,
            verdict,
            band,
            min: tag(min),
            max: tag(max),
            witnesses: witnesses.map(|[a, b]| [tag(a), tag(b)]),
        }
    }

    /// Verdict for `sign * value >= 0` at every sample, up to the band.
    pub fn require(&self, sign: f64) -> Verdict {
        if sign > 0.0 {
            if self.min.value < -self.band {
                return Verdict::fails(self.min);
            }
        } else if self.max.value > self.band {
            return Verdict::fails(self.max);
        }
        Verdict::Holds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignProfile {
    pub orders_checked: usize,
    pub points: usize,
    pub orders: Vec<OrderProfile>,
}

impl SignProfile {
    pub fn order(&self, k: usize) -> &OrderProfile {
        &self.orders[k]
    }

    /// First failing order of `sign(k) * f^(k) >= 0` over `orders`.
    pub fn require_orders(&self, orders: impl IntoIterator<Item = usize>, sign: impl Fn(usize) -> f64) -> Verdict {
        for k in orders {
            let v = self.orders[k].require(sign(k));
            if !v.holds() {
                return v;
            }
        }
        Verdict::Holds
    }
}

fn alt(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Signs of `e^(k)` for `k = 0..=order` over `grid`.
pub fn sign_profile(e: &Expr, order: usize, grid: &[f64], tol: f64) -> Result<SignProfile, EvalError> {
    let mut per_order: Vec<Vec<Witness>> = vec![Vec::with_capacity(grid.len()); order + 1];
    for &x in grid {
        let jet = eval_jet(e, x, order)?;
        for (k, samples) in per_order.iter_mut().enumerate() {
            samples.push(Witness::at(x, jet.derivative(k)));
        }
    }
    Ok(SignProfile {
        orders_checked: order,
        points: grid.len(),
        orders: per_order
            .iter()
            .enumerate()
            .map(|(k, s)| OrderProfile::from_samples(k, s, tol))
            .collect(),
    })
}

/// Verdicts on the symbol itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionClasses {
    pub completely_monotone: Verdict,
    pub completely_alternating: Verdict,
    pub absolutely_monotone: Verdict,
    pub concave: Verdict,
    pub log_convex: Verdict,
    /// `phi(x + t) <= phi(x)` on the sampled pairs.
    pub contractive: Verdict,
    pub polynomial_degree: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MIsometry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub verdict: Verdict,
}

/// Verdicts on the semigroup, derived from [`FunctionClasses`] alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemigroupClasses {
    pub subnormal_contraction: Verdict,
    pub completely_hyperexpansive: Verdict,
    pub two_hyperexpansive: Verdict,
    pub m_isometry: MIsometry,
    pub alternatingly_hyperexpansive: Verdict,
    pub hyponormal: Verdict,
}

/// The symbol-to-semigroup correspondence.
pub fn semigroup_classes(fc: &FunctionClasses, checked_order: usize) -> SemigroupClasses {
    let m_isometry = match fc.polynomial_degree {
        Some(d) => MIsometry {
            m: Some(d + 1),
            verdict: Verdict::Holds,
        },
        None => MIsometry {
            m: None,
            verdict: Verdict::inconclusive(format!(
                "no identically vanishing derivative up to order {checked_order}"
            )),
        },
    };
    SemigroupClasses {
        subnormal_contraction: fc.completely_monotone.and(&fc.contractive),
        completely_hyperexpansive: fc.completely_alternating.clone(),
        two_hyperexpansive: fc.concave.clone(),
        m_isometry,
        alternatingly_hyperexpansive: fc.absolutely_monotone.clone(),
        hyponormal: fc.log_convex.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub symbol: String,
    pub positivity: Verdict,
    pub checked_order: usize,
    pub grid: GridDescription,
    pub function_classes: FunctionClasses,
    pub semigroup_classes: SemigroupClasses,
    pub profile: SignProfile,
}

impl ClassificationReport {
    /// Looks up a verdict by its report field name.
    pub fn verdict(&self, class: &str) -> Option<&Verdict> {
        let fc = &self.function_classes;
        let sc = &self.semigroup_classes;
        Some(match class {
            "completely_monotone" => &fc.completely_monotone,
            "completely_alternating" => &fc.completely_alternating,
            "absolutely_monotone" => &fc.absolutely_monotone,
            "concave" => &fc.concave,
            "log_convex" => &fc.log_convex,
            "contractive" => &fc.contractive,
            "subnormal_contraction" => &sc.subnormal_contraction,
            "completely_hyperexpansive" => &sc.completely_hyperexpansive,
            "two_hyperexpansive" => &sc.two_hyperexpansive,
            "m_isometry" => &sc.m_isometry.verdict,
            "alternatingly_hyperexpansive" => &sc.alternatingly_hyperexpansive,
            "hyponormal" => &sc.hyponormal,
            "positivity" => &self.positivity,
            _ => return None,
        })
    }

    pub const CLASS_NAMES: [&'static str; 13] = [
        "completely_monotone",
        "completely_alternating",
        "absolutely_monotone",
        "concave",
        "log_convex",
        "contractive",
        "subnormal_contraction",
        "completely_hyperexpansive",
        "two_hyperexpansive",
        "m_isometry",
        "alternatingly_hyperexpansive",
        "hyponormal",
        "positivity",
    ];
}

/// Smallest `m >= 1` with every order `m..=K` in the zero band and order `m - 1` outside it;
/// the degree is `m - 1`.
fn polynomial_degree(profile: &SignProfile) -> Option<usize> {
    let orders = &profile.orders;
    (1..orders.len()).find_map(|m| {
        let vanishes = orders[m..].iter().all(|o| o.verdict == SignVerdict::Zero);
        (vanishes && orders[m - 1].verdict != SignVerdict::Zero).then_some(m - 1)
    })
}

fn contraction_check<S: Symbol>(sym: &S, cfg: &ClassifyConfig) -> Result<Verdict, EvalError> {
    let pairs = cfg.xt_pairs(1);
    let mut worst: Option<Witness> = None;
    for (x, t) in pairs {
        let ratio = sym.value(x + t)? / sym.value(x)?;
        if worst.is_none_or(|w| ratio > w.value) {
            worst = Some(Witness::at(x, ratio).with_t(t));
        }
    }
    Ok(match worst {
        None => Verdict::inconclusive("no (x, t) pairs inside the grid"),
        Some(w) if w.value > 1.0 + cfg.tol => Verdict::fails(w),
        Some(_) => Verdict::Holds,
    })
}

fn positivity<S: Symbol>(sym: &S, grid: &[f64]) -> Result<(), ClassifyError> {
    for &x in grid {
        let v = sym.value(x)?;
        if !(v > 0.0) {
            return Err(ClassifyError::NotPositive { x, value: v });
        }
    }
    Ok(())
}

pub fn classify(e: &Expr, cfg: &ClassifyConfig) -> Result<ClassificationReport, ClassifyError> {
    cfg.validate()?;
    positivity(e, &cfg.grid)?;
    let profile = sign_profile(e, cfg.order, &cfg.grid, cfg.tol)?;
    let log_profile = sign_profile(&e.ln(), cfg.order.min(2), &cfg.grid, cfg.tol)?;
    let k = cfg.order;

    let need_two = |v: Verdict| {
        if k >= 2 {
            v
        } else {
            Verdict::inconclusive("needs derivative order 2")
        }
    };
    let function_classes = FunctionClasses {
        completely_monotone: profile.require_orders(0..=k, alt),
        completely_alternating: profile.require_orders(1..=k, |k| -alt(k)),
        absolutely_monotone: profile.require_orders(0..=k, |_| 1.0),
        concave: need_two(if k >= 2 { profile.order(2).require(-1.0) } else { Verdict::Holds }),
        log_convex: need_two(if k >= 2 { log_profile.order(2).require(1.0) } else { Verdict::Holds }),
        contractive: contraction_check(e, cfg)?,
        polynomial_degree: polynomial_degree(&profile),
    };
    let semigroup_classes = semigroup_classes(&function_classes, k);
    Ok(ClassificationReport {
        symbol: e.to_string(),
        positivity: Verdict::Holds,
        checked_order: k,
        grid: cfg.describe(),
        function_classes,
        semigroup_classes,
        profile,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `D_n >= 0`
    Ge,
    /// `D_n <= 0`
    Le,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Ge => 1.0,
            Direction::Le => -1.0,
        }
    }
}

/// `sum_{k=0}^n (-1)^k C(n, k) phi(x + k t)`.
pub fn alternating_difference<S: Symbol + ?Sized>(sym: &S, n: usize, x: f64, t: f64) -> Result<f64, EvalError> {
    let mut binom = 1.0;
    let mut acc = 0.0;
    for k in 0..=n {
        acc += alt(k) * binom * sym.value(x + k as f64 * t)?;
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceCheck {
    pub n: usize,
    pub direction: Direction,
    pub verdict: Verdict,
    /// Every sampled difference lies in the zero band.
    pub zero_band: bool,
    pub pairs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<OrderProfile>,
}

/// Sign of the order-`n` alternating difference over `pairs` against `direction`.
pub fn finite_difference_check<S: Symbol + ?Sized>(
    sym: &S,
    n: usize,
    pairs: &[(f64, f64)],
    direction: Direction,
    tol: f64,
) -> Result<DifferenceCheck, EvalError> {
    if pairs.is_empty() {
        return Ok(DifferenceCheck {
            n,
            direction,
            verdict: Verdict::inconclusive("no (x, t) pairs inside the grid"),
            zero_band: false,
            pairs: 0,
            profile: None,
        });
    }
    let samples = pairs
        .iter()
        .map(|&(x, t)| Ok(Witness::at(x, alternating_difference(sym, n, x, t)?).with_t(t)))
        .collect::<Result<Vec<_>, EvalError>>()?;
    let profile = OrderProfile::from_samples(n, &samples, tol);
    Ok(DifferenceCheck {
        n,
        direction,
        verdict: profile.require(direction.sign()),
        zero_band: profile.verdict == SignVerdict::Zero,
        pairs: pairs.len(),
        profile: Some(profile),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheckRow {
    pub n: usize,
    /// `(-1)^n phi^(n) >= 0` from derivatives.
    pub derivative_ge: Verdict,
    pub derivative_le: Verdict,
    /// `D_n >= 0` from differences.
    pub difference_ge: Verdict,
    pub difference_le: Verdict,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheckReport {
    pub rows: Vec<CrossCheckRow>,
    pub conflicts: usize,
}

fn consistent(a: &Verdict, b: &Verdict) -> bool {
    !((a.holds() && b.is_fail()) || (a.is_fail() && b.holds()))
}

/// Compares the derivative-sign route and the alternating-difference route for `n = 1..=n_max`.
pub fn cross_check(e: &Expr, n_max: usize, cfg: &ClassifyConfig) -> Result<CrossCheckReport, ClassifyError> {
    cfg.validate()?;
    if n_max > K_MAX {
        return Err(ClassifyError::Config(format!("n_max {n_max} exceeds {K_MAX}")));
    }
    positivity(e, &cfg.grid)?;
    let profile = sign_profile(e, n_max, &cfg.grid, cfg.tol)?;
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let pairs = cfg.xt_pairs(n);
        let derivative_ge = profile.order(n).require(alt(n));
        let derivative_le = profile.order(n).require(-alt(n));
        let difference_ge = finite_difference_check(e, n, &pairs, Direction::Ge, cfg.tol)?.verdict;
        let difference_le = finite_difference_check(e, n, &pairs, Direction::Le, cfg.tol)?.verdict;
        let agree = consistent(&derivative_ge, &difference_ge) && consistent(&derivative_le, &difference_le);
        rows.push(CrossCheckRow {
            n,
            derivative_ge,
            derivative_le,
            difference_ge,
            difference_le,
            agree,
        });
    }
    let conflicts = rows.iter().filter(|r| !r.agree).count();
    Ok(CrossCheckReport { rows, conflicts })
}

/// 2-hyperexpansivity from differences alone (`D_1 <= 0` and `D_2 <= 0`), for symbols without jets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceConcavity {
    pub non_smooth: bool,
    pub increasing: DifferenceCheck,
    pub concave: DifferenceCheck,
    pub two_hyperexpansive: Verdict,
}

pub fn two_hyperexpansive_by_differences<S: Symbol + ?Sized>(
    sym: &S,
    cfg: &ClassifyConfig,
) -> Result<DifferenceConcavity, ClassifyError> {
    cfg.validate()?;
    positivity(&sym, &cfg.grid)?;
    let increasing = finite_difference_check(sym, 1, &cfg.xt_pairs(1), Direction::Le, cfg.tol)?;
    let concave = finite_difference_check(sym, 2, &cfg.xt_pairs(2), Direction::Le, cfg.tol)?;
    let two_hyperexpansive = increasing.verdict.and(&concave.verdict);
    Ok(DifferenceConcavity {
        non_smooth: true,
        increasing,
        concave,
        two_hyperexpansive,
    })
}
