//! Weighted translation operators on a uniform grid over `[0, x_max]`.
//!
//! Translations are restricted to multiples of the grid spacing, so every
//! operator is an exact index shift times a pointwise weight. Reads beyond
//! `x_max` (adjoint) are zero.

use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Symbol};

pub const DEFAULT_POINTS: usize = 2001;
pub const DEFAULT_X_MAX: f64 = 20.0;

#[derive(Debug, Error)]
pub enum OpError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("t = {t} is not a multiple of the grid spacing {h}")]
    NotAligned { t: f64, h: f64 },
    #[error("functions live on different grids")]
    GridMismatch,
    #[error("evaluation failed at node {node} (x = {x}): {source}")]
    Eval {
        node: usize,
        x: f64,
        #[source]
        source: EvalError,
    },
    #[error("symbol is not positive at node {node} (x = {x}, value {value})")]
    NotPositive { node: usize, x: f64, value: f64 },
    #[error("weight vanishes at node {node}")]
    ZeroWeight { node: usize },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    x_max: f64,
    n_points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            x_max: DEFAULT_X_MAX,
            n_points: DEFAULT_POINTS,
        }
    }
}

impl Grid {
    pub fn new(x_max: f64, n_points: usize) -> Result<Grid, OpError> {
        if n_points < 2 {
            return Err(OpError::InvalidGrid(format!("need at least 2 points, got {n_points}")));
        }
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(OpError::InvalidGrid(format!("x_max must be positive, got {x_max}")));
        }
        Ok(Grid { x_max, n_points })
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.x_max / (self.n_points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_points - 1 {
            self.x_max
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }

    /// Number of nodes spanned by the translation `t`.
    pub fn steps(&self, t: f64) -> Result<usize, OpError> {
        let h = self.spacing();
        let k = (t / h).round();
        if !(t >= 0.0) || (t / h - k).abs() > 1e-9 * k.max(1.0) {
            return Err(OpError::NotAligned { t, h });
        }
        Ok(k as usize)
    }
}

/// Real values at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<SampledFunction, OpError> {
        if values.len() != grid.len() {
            return Err(OpError::InvalidGrid(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(OpError::InvalidGrid(format!("non-finite value at node {i}")));
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> SampledFunction {
        let values = grid.nodes().into_iter().map(f).collect();
        SampledFunction { grid, values }
    }

    pub fn zeros(grid: Grid) -> SampledFunction {
        SampledFunction {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        inner(self, self).expect("same grid").max(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn pointwise(&self, other: &SampledFunction, f: impl Fn(f64, f64) -> f64) -> Result<SampledFunction, OpError> {
        same_grid(self, other)?;
        Ok(SampledFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// CSV with header `x,value`, one row per node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), OpError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| OpError::Csv(e.to_string());
        w.write_record(["x", "value"]).map_err(csv_err)?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([self.grid.node(i).to_string(), v.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `x,value` rows; the abscissae must be the nodes of a uniform grid starting at 0.
    pub fn read_csv<R: Read>(input: R) -> Result<SampledFunction, OpError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(|e| OpError::Csv(e.to_string()))?;
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "value" {
            return Err(OpError::Csv("expected header `x,value`".into()));
        }
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| OpError::Csv(e.to_string()))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| OpError::Csv(format!("row {}: bad number `{s}`", row + 1)))
            };
            if rec.len() != 2 {
                return Err(OpError::Csv(format!("row {}: expected 2 fields", row + 1)));
            }
            xs.push(num(&rec[0])?);
            vs.push(num(&rec[1])?);
        }
        if xs.len() < 2 {
            return Err(OpError::Csv("need at least 2 rows".into()));
        }
        let grid = Grid::new(*xs.last().unwrap(), xs.len())?;
        let h = grid.spacing();
        for (i, x) in xs.iter().enumerate() {
            if (x - grid.node(i)).abs() > 1e-9 * h.max(grid.node(i)) {
                return Err(OpError::Csv(format!("row {}: x = {x} is not node {i} of a uniform grid", i + 1)));
            }
        }
        SampledFunction::new(grid, vs)
    }
}

fn same_grid(a: &SampledFunction, b: &SampledFunction) -> Result<(), OpError> {
    if a.grid == b.grid {
        Ok(())
    } else {
        Err(OpError::GridMismatch)
    }
}

/// Pointwise evaluation of `sym` at the grid nodes.
pub fn sample<S: Symbol + ?Sized>(sym: &S, g: Grid) -> Result<SampledFunction, OpError> {
    let values = (0..g.len())
        .map(|i| {
            let x = g.node(i);
            let v = sym.value(x).map_err(|source| OpError::Eval { node: i, x, source })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(OpError::Eval {
                    node: i,
                    x,
                    source: EvalError::NonFinite { x },
                })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SampledFunction { grid: g, values })
}

fn positive_samples<S: Symbol + ?Sized>(sym: &S, g: Grid) -> Result<Vec<f64>, OpError> {
    let s = sample(sym, g)?;
    if let Some(i) = s.values.iter().position(|v| !(*v > 0.0)) {
        return Err(OpError::NotPositive {
            node: i,
            x: g.node(i),
            value: s.values[i],
        });
    }
    Ok(s.values)
}

/// `phi_t(x) = sqrt(phi(x) / phi(x - t))` for `x >= t`, zero before.
pub fn weight<S: Symbol + ?Sized>(sym: &S, t: f64, g: Grid) -> Result<SampledFunction, OpError> {
    let k = g.steps(t)?;
    let phi = positive_samples(sym, g)?;
    Ok(weight_from_samples(&phi, k, g))
}

fn weight_from_samples(phi: &[f64], k: usize, g: Grid) -> SampledFunction {
    let values = (0..phi.len())
        .map(|i| if i >= k { (phi[i] / phi[i - k]).sqrt() } else { 0.0 })
        .collect();
    SampledFunction { grid: g, values }
}

fn shift_right(f: &SampledFunction, k: usize, w: &[f64]) -> SampledFunction {
    let n = f.values.len();
    let values = (0..n).map(|i| if i >= k { w[i] * f.values[i - k] } else { 0.0 }).collect();
    SampledFunction { grid: f.grid, values }
}

/// `(S_t f)(x) = phi_t(x) f(x - t)`.
pub fn apply_st<S: Symbol + ?Sized>(sym: &S, t: f64, f: &SampledFunction) -> Result<SampledFunction, OpError> {
    let w = weight(sym, t, f.grid)?;
    let k = f.grid.steps(t)?;
    Ok(shift_right(f, k, &w.values))
}

/// `(S_t^* f)(x) = sqrt(phi(x + t) / phi(x)) f(x + t)`, with `f = 0` beyond the window.
pub fn apply_adjoint<S: Symbol + ?Sized>(sym: &S, t: f64, f: &SampledFunction) -> Result<SampledFunction, OpError> {
    let g = f.grid;
    let k = g.steps(t)?;
    let phi = positive_samples(sym, g)?;
    let n = g.len();
    let values = (0..n)
        .map(|i| {
            if i + k < n {
                (phi[i + k] / phi[i]).sqrt() * f.values[i + k]
            } else {
                0.0
            }
        })
        .collect();
    Ok(SampledFunction { grid: g, values })
}

/// Composite trapezoid rule for `int f g dx`.
pub fn inner(f: &SampledFunction, g: &SampledFunction) -> Result<f64, OpError> {
    same_grid(f, g)?;
    let n = f.values.len();
    let interior: f64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum();
    let ends = 0.5 * (f.values[0] * g.values[0] + f.values[n - 1] * g.values[n - 1]);
    Ok(f.grid.spacing() * (interior - ends))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |b, i| b * (n - i) as f64 / (i + 1) as f64)
}

/// Symbol of the multiplication operator `B_n(S_t)`:
/// `m(x) = sum_k (-1)^k C(n, k) phi(x + k t) / phi(x)`.
pub fn multiplier_bn<S: Symbol + ?Sized>(sym: &S, n: usize, t: f64, g: Grid) -> Result<SampledFunction, OpError> {
    g.steps(t)?;
    let values = (0..g.len())
        .map(|i| {
            let x = g.node(i);
            let eval = |y: f64| {
                let v = sym.value(y).map_err(|source| OpError::Eval { node: i, x: y, source })?;
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(OpError::NotPositive { node: i, x: y, value: v })
                }
            };
            let base = eval(x)?;
            let mut acc = 0.0;
            for k in 0..=n {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * binomial(n, k) * eval(x + k as f64 * t)?;
            }
            Ok(acc / base)
        })
        .collect::<Result<Vec<_>, OpError>>()?;
    Ok(SampledFunction { grid: g, values })
}

/// `<B_n(S_t) f, f>` computed by composing the operators and through the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadForm {
    pub composed: f64,
    pub multiplier: f64,
    pub difference: f64,
    /// `sum_k C(n, k) |<S_t^k f, S_t^k f>|`, the magnitude the two routes are compared against.
    pub scale: f64,
}

impl QuadForm {
    pub fn relative_difference(&self) -> f64 {
        if self.scale == 0.0 {
            self.difference.abs()
        } else {
            self.difference.abs() / self.scale
        }
    }
}

pub fn quad_form_bn<S: Symbol + ?Sized>(sym: &S, n: usize, t: f64, f: &SampledFunction) -> Result<QuadForm, OpError> {
    let g = f.grid;
    let k = g.steps(t)?;
    let phi = positive_samples(sym, g)?;
    let w = weight_from_samples(&phi, k, g).values;

    let mut composed = 0.0;
    let mut scale = 0.0;
    let mut forward = f.clone();
    for j in 0..=n {
        if j > 0 {
            forward = shift_right(&forward, k, &w);
        }
        // S^*^j S^j f = adjoint applied j times to S^j f
        let mut back = forward.clone();
        for _ in 0..j {
            back = apply_adjoint(sym, t, &back)?;
        }
        let term = inner(&back, f)?;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        composed += sign * binomial(n, j) * term;
        scale += binomial(n, j) * inner(&forward, &forward)?.abs();
    }

    let m = multiplier_bn(sym, n, t, g)?;
    let mf = m.pointwise(f, |a, b| a * b)?;
    let multiplier = inner(&mf, f)?;
    Ok(QuadForm {
        composed,
        multiplier,
        difference: composed - multiplier,
        scale,
    })
}

/// `max_x phi_t(x)` over the grid.
pub fn norm_st<S: Symbol + ?Sized>(sym: &S, t: f64, g: Grid) -> Result<f64, OpError> {
    Ok(weight(sym, t, g)?.max_abs())
}

/// `max |S_t S_s f - S_{t+s} f|`.
pub fn semigroup_residual<S: Symbol + ?Sized>(sym: &S, t: f64, s: f64, f: &SampledFunction) -> Result<f64, OpError> {
    let g = f.grid;
    let (kt, ks) = (g.steps(t)?, g.steps(s)?);
    let phi = positive_samples(sym, g)?;
    let two_step = shift_right(
        &shift_right(f, ks, &weight_from_samples(&phi, ks, g).values),
        kt,
        &weight_from_samples(&phi, kt, g).values,
    );
    let one_step = shift_right(f, kt + ks, &weight_from_samples(&phi, kt + ks, g).values);
    Ok(two_step
        .values
        .iter()
        .zip(&one_step.values)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr};

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn bump(g: Grid, lo: f64, hi: f64) -> SampledFunction {
        SampledFunction::from_fn(g, |x| {
            if x > lo && x < hi {
                let u = (x - lo) / (hi - lo);
                (u * (1.0 - u)).powi(2) * 16.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn sample_values() {
        let g = Grid::new(4.0, 5).unwrap();
        assert_eq!(sample(&p("1"), g).unwrap().values(), &[1.0; 5]);
        let s = sample(&p("sqrt(x+1)"), g).unwrap();
        let want = [1.0, 2f64.sqrt(), 3f64.sqrt(), 2.0, 5f64.sqrt()];
        for (a, b) in s.values().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let err = sample(&p("log(x)"), g).unwrap_err();
        assert!(matches!(err, OpError::Eval { node: 0, .. }), "{err}");
    }

    #[test]
    fn weight_of_sqrt_symbol() {
        let g = Grid::new(4.0, 9).unwrap();
        let w = weight(&p("sqrt(x+1)"), 1.0, g).unwrap();
        assert_eq!(w.values()[1], 0.0); // x = 0.5
        assert!((w.values()[4] - 1.5f64.powf(0.25)).abs() < 1e-15); // x = 2
        assert!((w.values()[6] - (4.0f64 / 3.0).powf(0.25)).abs() < 1e-15); // x = 3
    }

    #[test]
    fn weight_of_constant_is_indicator() {
        let g = Grid::new(2.0, 21).unwrap();
        let w = weight(&p("1"), 0.5, g).unwrap();
        for (i, v) in w.values().iter().enumerate() {
            assert_eq!(*v, if g.node(i) >= 0.5 - 1e-12 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn weight_of_exp_decay_is_constant() {
        let g = Grid::default();
        let w = weight(&p("exp(-x)"), 2.0, g).unwrap();
        for (i, v) in w.values().iter().enumerate().skip(200) {
            assert!((v - (-1f64).exp()).abs() < 1e-14, "node {i}");
        }
    }

    #[test]
    fn misaligned_translation_is_rejected() {
        let g = Grid::default();
        assert!(matches!(weight(&p("1"), 0.005, g), Err(OpError::NotAligned { .. })));
        assert!(g.steps(0.3).is_ok());
    }

    #[test]
    fn constant_symbol_translates() {
        let g = Grid::new(1.0, 11).unwrap();
        let f = SampledFunction::from_fn(g, |x| x * x);
        let out = apply_st(&p("1"), 0.2, &f).unwrap();
        for i in 0..11 {
            let want = if i >= 2 { f.values()[i - 2] } else { 0.0 };
            assert_eq!(out.values()[i], want);
        }
        let back = apply_adjoint(&p("1"), 0.2, &f).unwrap();
        for i in 0..11 {
            let want = if i + 2 < 11 { f.values()[i + 2] } else { 0.0 };
            assert_eq!(back.values()[i], want);
        }
    }

    #[test]
    fn delta_under_linear_symbol() {
        let g = Grid::default();
        let h = g.spacing();
        let mut v = vec![0.0; g.len()];
        v[0] = 1.0 / h.sqrt();
        let f = SampledFunction::new(g, v).unwrap();
        let out = apply_st(&p("x+1"), h, &f).unwrap();
        let nonzero: Vec<usize> = (0..g.len()).filter(|&i| out.values()[i] != 0.0).collect();
        assert_eq!(nonzero, vec![1]);
        let want = (1.0 + h).sqrt() / h.sqrt();
        assert!((out.values()[1] - want).abs() < 1e-12);
    }

    #[test]
    fn zero_translation_is_identity() {
        let g = Grid::new(3.0, 31).unwrap();
        let f = SampledFunction::from_fn(g, |x| x.sin());
        assert_eq!(apply_st(&p("exp(x)"), 0.0, &f).unwrap(), f);
    }

    #[test]
    fn adjoint_composition_is_multiplication() {
        let g = Grid::default();
        let e = p("sqrt(x+1)");
        let f = bump(g, 1.0, 5.0);
        let t = 1.5;
        let out = apply_adjoint(&e, t, &apply_st(&e, t, &f).unwrap()).unwrap();
        for i in 0..g.len() {
            let x = g.node(i);
            let want = (x + t + 1.0).sqrt() / (x + 1.0).sqrt() * f.values()[i];
            assert!((out.values()[i] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn inner_products() {
        let g = Grid::new(2.0, 3).unwrap();
        let one = SampledFunction::from_fn(g, |_| 1.0);
        assert!((inner(&one, &one).unwrap() - 2.0).abs() < 1e-15);
        let g = Grid::new(2.0, 201).unwrap();
        let x = SampledFunction::from_fn(g, |x| x);
        let one = SampledFunction::from_fn(g, |_| 1.0);
        assert!((inner(&x, &one).unwrap() - 2.0).abs() < 1e-12);
        assert!(inner(&x, &x).unwrap() >= 0.0);
        let other = SampledFunction::zeros(Grid::new(2.0, 5).unwrap());
        assert!(matches!(inner(&x, &other), Err(OpError::GridMismatch)));
    }

    #[test]
    fn multiplier_examples() {
        let g = Grid::new(10.0, 101).unwrap();
        let m = multiplier_bn(&p("x+1"), 2, 1.0, g).unwrap();
        assert!(m.max_abs() < 1e-13);
        let m = multiplier_bn(&p("log(x+2)"), 1, 0.5, g).unwrap();
        assert!(m.values().iter().all(|v| *v < 0.0));
        let t: f64 = 0.7;
        let m = multiplier_bn(&p("exp(-x)"), 2, t, g).unwrap();
        let closed = (1.0 - (-t).exp()).powi(2);
        for v in m.values() {
            assert!((v - closed).abs() < 1e-13);
        }
    }

    #[test]
    fn quad_forms() {
        let g = Grid::default();
        let f = bump(g, 2.0, 8.0);
        let q = quad_form_bn(&p("x+1"), 2, 1.0, &f).unwrap();
        assert!(q.composed.abs() < 1e-10 * q.scale && q.multiplier.abs() < 1e-10 * q.scale);

        let f = bump(g, 0.0, 15.0);
        let q = quad_form_bn(&p("1"), 1, 2.0, &f).unwrap();
        assert!(q.composed.abs() < 1e-14 && q.multiplier.abs() < 1e-14, "{q:?}");

        let f = bump(g, 1.0, 9.0);
        let q = quad_form_bn(&p("sqrt(x+1)"), 2, 1.0, &f).unwrap();
        assert!(q.composed <= 0.0 && q.multiplier <= 0.0);
        assert!(q.relative_difference() <= 1e-8, "{q:?}");
    }

    #[test]
    fn norms() {
        let g = Grid::default();
        let t: f64 = 1.3;
        assert!((norm_st(&p("exp(-x)"), t, g).unwrap() - (-t / 2.0).exp()).abs() < 1e-14);
        assert_eq!(norm_st(&p("1"), t, g).unwrap(), 1.0);
        let w = weight(&p("log(x+2)"), t, g).unwrap();
        let at_t = w.values()[g.steps(t).unwrap()];
        assert_eq!(norm_st(&p("log(x+2)"), t, g).unwrap(), at_t);
    }

    #[test]
    fn semigroup_residuals() {
        let g = Grid::default();
        let f = bump(g, 0.0, 12.0);
        assert_eq!(semigroup_residual(&p("1"), 0.7, 1.1, &f).unwrap(), 0.0);
        assert!(semigroup_residual(&p("sqrt(x+1)"), 0.5, 0.5, &f).unwrap() <= 1e-12);
        assert_eq!(semigroup_residual(&p("exp(x)"), 0.0, 0.0, &f).unwrap(), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(2.0, 5).unwrap();
        let f = SampledFunction::from_fn(g, |x| x.exp());
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,value\n0,1\n0.5,"));
        assert_eq!(SampledFunction::read_csv(&buf[..]).unwrap(), f);
        assert!(SampledFunction::read_csv("x,value\n0,1\n0.5,1\n2,1\n".as_bytes()).is_err());
        assert!(SampledFunction::read_csv("a,b\n0,1\n1,1\n".as_bytes()).is_err());
    }
}
